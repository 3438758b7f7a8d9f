//! The smooth dilatation family `mu = 0.95 tanh(A) bump(|z|/R) e^{i w |z|^2}`
//! and its calibration to prescribed `W^{1,2}` sizes, plus the random
//! fields and probes shared by the suites.

use anyhow::{bail, Result};
use beltrami::{sobolev_size, Complex64, ComplexField, Dilatation, PeriodicGrid, Spectrum};
use rand::Rng;

pub const AMPLITUDE_CAP: f64 = 0.95;

/// Standard mollifier `exp(1 - 1/(1 - s))` of `s = |z|^2 / R^2`, zero for `s >= 1`.
pub fn mollifier(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s)).exp()
    }
}

#[derive(Clone, Debug)]
pub struct Member {
    pub target: f64,
    /// Measured `||mu||_{W^{1,2}}`.
    pub size: f64,
    /// The `A` in `0.95 tanh(A)`.
    pub shape: f64,
    pub frequency: f64,
    pub mu: Dilatation,
}

impl Member {
    pub fn amplitude(&self) -> f64 {
        AMPLITUDE_CAP * self.shape.tanh()
    }
}

pub fn family_dilatation(
    grid: &PeriodicGrid,
    shape: f64,
    frequency: f64,
    radius: f64,
) -> Result<Dilatation> {
    Ok(Dilatation::bump(
        grid,
        AMPLITUDE_CAP * shape.tanh(),
        radius,
        frequency,
    )?)
}

fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finds the member of size `target`. The amplitude shape is lowered below
/// `max_shape` when the unchirped bump is already large enough; otherwise the
/// chirp frequency is raised at `max_shape`.
pub fn calibrate(grid: &PeriodicGrid, target: f64, max_shape: f64, radius: f64) -> Result<Member> {
    let size = |shape: f64, w: f64| -> Result<f64> {
        Ok(sobolev_size(&family_dilatation(grid, shape, w, radius)?))
    };
    let base = size(max_shape, 0.0)?;
    let (shape, frequency) = if target <= base {
        (bisect(0.0, max_shape, target, |a| size(a, 0.0))?, 0.0)
    } else {
        let mut hi = 1.0;
        while size(max_shape, hi)? < target {
            hi *= 2.0;
            if hi > 1e4 {
                bail!("W^(1,2) size {target} is out of reach of the bump family on this grid");
            }
        }
        (max_shape, bisect(0.0, hi, target, |w| size(max_shape, w))?)
    };
    let mu = family_dilatation(grid, shape, frequency, radius)?;
    Ok(Member {
        target,
        size: sobolev_size(&mu),
        shape,
        frequency,
        mu,
    })
}

/// Members with a fixed sup `k`, sizes reached through the chirp only.
pub fn calibrate_fixed_k(grid: &PeriodicGrid, target: f64, k: f64, radius: f64) -> Result<Member> {
    let shape = (k / AMPLITUDE_CAP).atanh();
    let base = sobolev_size(&family_dilatation(grid, shape, 0.0, radius)?);
    if target < base {
        bail!("size {target} is below the unchirped size {base:.4} at k = {k}");
    }
    let size =
        |w: f64| -> Result<f64> { Ok(sobolev_size(&family_dilatation(grid, shape, w, radius)?)) };
    let mut hi = 1.0;
    while size(hi)? < target {
        hi *= 2.0;
        if hi > 1e4 {
            bail!("W^(1,2) size {target} is out of reach at k = {k}");
        }
    }
    let frequency = bisect(0.0, hi, target, size)?;
    let mu = family_dilatation(grid, shape, frequency, radius)?;
    Ok(Member {
        target,
        size: sobolev_size(&mu),
        shape,
        frequency,
        mu,
    })
}

/// Random trigonometric polynomial with modes `|j|, |k| <= band`.
pub fn band_limited<R: Rng>(grid: &PeriodicGrid, band: usize, rng: &mut R) -> ComplexField {
    let n = grid.n();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in 0..n {
        for j in 0..n {
            let (fj, fk) = (
                grid.signed_frequency(j).unsigned_abs() as usize,
                grid.signed_frequency(k).unsigned_abs() as usize,
            );
            if fj <= band && fk <= band && !grid.is_nyquist(j) && !grid.is_nyquist(k) {
                coeffs[k * n + j] =
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
    }
    let spectrum = Spectrum::new(grid, coeffs).expect("coefficient count matches the grid");
    beltrami::fourier_inverse(&spectrum)
}

/// Band-limited noise times a mollifier of radius `radius`, so the result is
/// smooth and supported in the disk.
pub fn windowed_noise<R: Rng>(
    grid: &PeriodicGrid,
    band: usize,
    radius: f64,
    rng: &mut R,
) -> ComplexField {
    let noise = band_limited(grid, band, rng);
    let values = noise
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * mollifier(grid.point_at(i).norm_sqr() / (radius * radius)))
        .collect();
    ComplexField::new(grid, values).expect("finite samples")
}

/// Smooth random dilatation with sup exactly `k`, supported in `|z| < radius`.
pub fn random_dilatation<R: Rng>(
    grid: &PeriodicGrid,
    k: f64,
    radius: f64,
    rng: &mut R,
) -> Result<Dilatation> {
    let raw = windowed_noise(grid, 6, radius, rng);
    let sup = raw.sup_norm();
    if sup == 0.0 {
        bail!("degenerate random field");
    }
    Ok(Dilatation::new(raw.scale(Complex64::new(k / sup, 0.0)))?)
}
