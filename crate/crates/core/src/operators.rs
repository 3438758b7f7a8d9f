//! Beurling and Cauchy transforms as Fourier multipliers, and the Beurling
//! transform compressed to a domain mask.
//!
//! On the torus the Beurling symbol `conj(xi) / xi` is undefined at the zero
//! mode; it is set to zero there, so constants are annihilated. The Cauchy
//! symbol `-2i / xi` is zeroed at the zero mode and on the Nyquist row and
//! column, where the `dbar` multiplier it inverts is itself zero.

use num_complex::Complex64;

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, PeriodicGrid, RealField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn beurling_symbol(xi: Complex64) -> Complex64 {
    if xi == ZERO {
        ZERO
    } else {
        xi.conj() / xi
    }
}

pub fn beurling(f: &ComplexField) -> ComplexField {
    let g = f.grid();
    ComplexField::from_raw(
        g,
        g.apply_multiplier(f.values(), |xi, _, _| beurling_symbol(xi)),
    )
}

/// Relative size of the mean above which [`cauchy`] refuses its input.
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Zero-mean solution `g` of `dbar g = f`. Fails with `NonZeroMean` when the
/// mean of `f` exceeds `1e-12` times its sup norm.
pub fn cauchy(f: &ComplexField) -> Result<ComplexField> {
    let mean = f.mean();
    let sup = f.sup_norm();
    if mean.norm() > MEAN_TOLERANCE * sup {
        return Err(Error::NonZeroMean { mean, sup });
    }
    Ok(cauchy_unchecked(f))
}

pub(crate) fn cauchy_unchecked(f: &ComplexField) -> ComplexField {
    let g = f.grid();
    let values = g.apply_multiplier(f.values(), |xi, j, k| {
        if xi == ZERO || g.is_nyquist(j) || g.is_nyquist(k) {
            ZERO
        } else {
            Complex64::new(0.0, -2.0) / xi
        }
    });
    ComplexField::from_raw(g, values)
}

/// Sub-cell coverage fraction of a closed domain on a grid.
#[derive(Clone, Debug)]
pub struct DomainMask {
    coverage: RealField,
    spec: Option<DomainSpec>,
}

impl DomainMask {
    /// Wraps a coverage field; every value must lie in `[0, 1]`.
    pub fn new(coverage: RealField, spec: Option<DomainSpec>) -> Result<Self> {
        if let Some(i) = coverage
            .values()
            .iter()
            .position(|&c| !(0.0..=1.0).contains(&c))
        {
            return Err(Error::InvalidArgument(format!(
                "coverage {} at cell {i} is outside [0, 1]",
                coverage.values()[i]
            )));
        }
        Ok(Self { coverage, spec })
    }

    /// The whole window.
    pub fn full(grid: &PeriodicGrid) -> Self {
        Self {
            coverage: RealField::constant(grid, 1.0),
            spec: None,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.coverage.grid()
    }

    pub fn coverage(&self) -> &RealField {
        &self.coverage
    }

    pub fn spec(&self) -> Option<&DomainSpec> {
        self.spec.as_ref()
    }

    /// Covered area, `sum(coverage) * h^2`.
    pub fn area(&self) -> f64 {
        self.coverage.sum() * self.grid().cell_area()
    }

    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        f.mul_real(&self.coverage)
    }
}

/// `mask * S(mask * f)`.
pub fn compress_beurling(f: &ComplexField, mask: &DomainMask) -> Result<ComplexField> {
    let inner = mask.apply(f)?;
    mask.apply(&beurling(&inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{d_z, d_zbar, fourier_forward};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gaussian_bundle(n: usize, side: f64) -> (PeriodicGrid, ComplexField) {
        let g = PeriodicGrid::new(n, side).unwrap();
        let f = ComplexField::from_fn(&g, |z| z * (-z.norm_sqr()).exp()).unwrap();
        (g, f)
    }

    /// Random field with energy only in `|freq| <= band`, zero mean.
    fn band_limited(grid: &PeriodicGrid, band: i64, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = Vec::new();
        for ky in -band..=band {
            for kx in -band..=band {
                if kx == 0 && ky == 0 {
                    continue;
                }
                coeffs.push((
                    kx,
                    ky,
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ));
            }
        }
        let tau = 2.0 * std::f64::consts::PI / grid.side();
        ComplexField::from_fn(grid, |z| {
            coeffs
                .iter()
                .map(|&(kx, ky, a)| {
                    a * Complex64::from_polar(1.0, tau * (kx as f64 * z.re + ky as f64 * z.im))
                })
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn intertwines_derivatives() {
        let (_, g) = gaussian_bundle(256, 16.0);
        let lhs = beurling(&d_zbar(&g));
        let rhs = d_z(&g);
        assert!(lhs.relative_l2_error(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = PeriodicGrid::new(32, 1.0).unwrap();
        let z = ComplexField::zeros(&g);
        assert_eq!(beurling(&z).sup_norm(), 0.0);
        assert_eq!(cauchy(&z).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn cauchy_inverts_dbar() {
        let (_, g) = gaussian_bundle(256, 16.0);
        let back = cauchy(&d_zbar(&g)).unwrap();
        assert!(back.relative_l2_error(&g).unwrap() <= 1e-10);
    }

    #[test]
    fn cauchy_rejects_nonzero_mean() {
        let g = PeriodicGrid::new(64, 8.0).unwrap();
        let f = ComplexField::from_fn(&g, |z| c((-z.norm_sqr()).exp(), 0.0)).unwrap();
        assert!(matches!(cauchy(&f), Err(Error::NonZeroMean { .. })));
    }

    #[test]
    fn dz_of_cauchy_is_beurling() {
        let g = PeriodicGrid::new(128, 6.0).unwrap();
        for seed in 0..3 {
            let f = band_limited(&g, 12, seed);
            let lhs = d_z(&cauchy(&f).unwrap());
            let rhs = beurling(&f);
            assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10 * rhs.sup_norm().max(1.0));
        }
    }

    #[test]
    fn applying_twice_squares_the_symbol() {
        let g = PeriodicGrid::new(32, 3.0).unwrap();
        let f = band_limited(&g, 15, 4);
        let twice = fourier_forward(&beurling(&beurling(&f)));
        let base = fourier_forward(&f);
        for k in 0..g.n() {
            for j in 0..g.n() {
                let i = g.index(j, k);
                let m = beurling_symbol(g.frequency(j, k));
                assert!(
                    (twice.coeffs()[i] - m * m * base.coeffs()[i]).norm() <= 1e-10 * g.len() as f64
                );
            }
        }
    }

    #[test]
    fn full_mask_compression_is_plain_transform() {
        let (g, f) = gaussian_bundle(128, 8.0);
        let out = compress_beurling(&f, &DomainMask::full(&g)).unwrap();
        assert!(out.max_abs_diff(&beurling(&f)).unwrap() <= 1e-14);
    }

    #[test]
    fn compression_kills_data_outside_mask() {
        let g = PeriodicGrid::new(64, 4.0).unwrap();
        let cov = RealField::from_fn(&g, |z| if z.re < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let mask = DomainMask::new(cov, None).unwrap();
        let f = ComplexField::from_fn(&g, |z| if z.re > 0.5 { c(1.0, 2.0) } else { c(0.0, 0.0) })
            .unwrap();
        assert_eq!(compress_beurling(&f, &mask).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn compression_grid_mismatch() {
        let g = PeriodicGrid::new(32, 4.0).unwrap();
        let h = PeriodicGrid::new(32, 5.0).unwrap();
        let err = compress_beurling(&ComplexField::zeros(&g), &DomainMask::full(&h));
        assert!(matches!(err, Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn coverage_outside_unit_interval_is_rejected() {
        let g = PeriodicGrid::new(16, 1.0).unwrap();
        assert!(DomainMask::new(RealField::constant(&g, 1.5), None).is_err());
    }

    fn random_field(g: &PeriodicGrid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::new(
            g,
            (0..g.len())
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn isometric_on_zero_mean_fields(seed in any::<u64>()) {
            let g = PeriodicGrid::new(32, 2.0).unwrap();
            let f = random_field(&g, seed);
            let f = &f + (-f.mean());
            let out = beurling(&f);
            prop_assert!((out.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
        }

        #[test]
        fn linear_over_complex_scalars(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = PeriodicGrid::new(32, 2.0).unwrap();
            let f = random_field(&g, seed);
            let h = random_field(&g, seed ^ 0x5555);
            let s = c(a, b);
            let lhs = beurling(&(&(&f * s) + &h));
            let rhs = &(&beurling(&f) * s) + &beurling(&h);
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12 * (1.0 + s.norm()) * 64.0);
        }

        #[test]
        fn compression_matches_bilinear_definition(seed in any::<u64>()) {
            let g = PeriodicGrid::new(32, 4.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cov = RealField::new(&g, (0..g.len()).map(|_| rng.gen_range(0.0..=1.0)).collect()).unwrap();
            let mask = DomainMask::new(cov, None).unwrap();
            let f = random_field(&g, seed.wrapping_add(1));
            let h = random_field(&g, seed.wrapping_add(2));
            let lhs = compress_beurling(&f, &mask).unwrap().pairing(&h).unwrap();
            let rhs = beurling(&mask.apply(&f).unwrap()).pairing(&mask.apply(&h).unwrap()).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
            let compressed = compress_beurling(&f, &mask).unwrap().l2_norm();
            let masked = mask.apply(&f).unwrap();
            let transformed = beurling(&masked).l2_norm();
            prop_assert!(compressed <= transformed * (1.0 + 1e-12));
            prop_assert!(transformed <= masked.l2_norm() * (1.0 + 1e-12));
        }
    }
}
