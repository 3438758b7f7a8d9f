//! Muckenhoupt and reverse-Hölder characteristics over dyadic cube
//! families, the exponential-weight certificate for `e^{a Re sigma}`, and
//! area-distortion checks on preimages of squares.
//!
//! Cube averages come from summed-area tables, so every cube costs O(1)
//! after one pass over the grid.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::beltrami::{
    evaluate_derivatives, evaluate_map, invert_map, sobolev_size, BeltramiSolution,
};
use crate::error::{Error, Result};
use crate::grid::{d_z, d_zbar, ComplexField, PeriodicGrid, RealField};

pub const MIN_CUBE_CELLS: usize = 4;

/// Physical axis-aligned square, `corner` is the lower-left vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Square {
    pub corner: Complex64,
    pub side: f64,
}

impl Square {
    pub fn new(corner: Complex64, side: f64) -> Self {
        Self { corner, side }
    }

    pub fn center(&self) -> Complex64 {
        self.corner + Complex64::new(0.5 * self.side, 0.5 * self.side)
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let d = z - self.corner;
        d.re >= 0.0 && d.im >= 0.0 && d.re <= self.side && d.im <= self.side
    }

    /// Midpoints of an `m x m` subdivision.
    pub fn midpoints(&self, m: usize) -> Vec<Complex64> {
        let h = self.side / m as f64;
        (0..m * m)
            .map(|i| self.corner + Complex64::new((i % m) as f64 + 0.5, (i / m) as f64 + 0.5) * h)
            .collect()
    }

    /// `per_edge` points on each edge, counterclockwise from the corner.
    pub fn perimeter(&self, per_edge: usize) -> Vec<Complex64> {
        let s = self.side;
        let dirs = [
            Complex64::new(s, 0.0),
            Complex64::new(0.0, s),
            Complex64::new(-s, 0.0),
            Complex64::new(0.0, -s),
        ];
        let mut start = self.corner;
        let mut out = Vec::with_capacity(4 * per_edge);
        for d in dirs {
            for i in 0..per_edge {
                out.push(start + d * (i as f64 / per_edge as f64));
            }
            start += d;
        }
        out
    }
}

/// Grid-aligned cube: `cells x cells` samples starting at `(j0, k0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cube {
    pub level: u32,
    pub j0: usize,
    pub k0: usize,
    pub cells: usize,
}

/// Dyadic subdivisions of a grid-aligned base window, optionally together
/// with copies of each level shifted by one and two thirds of the base side.
#[derive(Clone, Debug)]
pub struct CubeFamily {
    grid: PeriodicGrid,
    j0: usize,
    k0: usize,
    cells: usize,
    levels: Vec<u32>,
    shifted: bool,
}

impl CubeFamily {
    pub fn new(
        grid: &PeriodicGrid,
        j0: usize,
        k0: usize,
        cells: usize,
        levels: Vec<u32>,
    ) -> Result<Self> {
        let n = grid.n();
        if cells == 0 || j0 + cells > n || k0 + cells > n {
            return Err(Error::InvalidArgument(format!(
                "base window {cells} cells at ({j0}, {k0}) does not fit a {n}^2 grid"
            )));
        }
        for &l in &levels {
            let side = cells >> l;
            if l >= usize::BITS || side << l != cells || side < MIN_CUBE_CELLS {
                return Err(Error::InvalidArgument(format!(
                    "level {l} does not tile {cells} cells into cubes of at least {MIN_CUBE_CELLS}"
                )));
            }
        }
        let mut levels = levels;
        levels.sort_unstable();
        levels.dedup();
        Ok(Self {
            grid: grid.clone(),
            j0,
            k0,
            cells,
            levels,
            shifted: false,
        })
    }

    /// Every admissible dyadic level of the base window.
    pub fn dyadic(grid: &PeriodicGrid, j0: usize, k0: usize, cells: usize) -> Result<Self> {
        let mut levels = Vec::new();
        let mut l = 0u32;
        while cells.is_multiple_of(1 << l) && (cells >> l) >= MIN_CUBE_CELLS {
            levels.push(l);
            l += 1;
        }
        Self::new(grid, j0, k0, cells, levels)
    }

    /// All levels of the whole window.
    pub fn full(grid: &PeriodicGrid) -> Self {
        Self::dyadic(grid, 0, 0, grid.n()).expect("whole window is admissible")
    }

    /// Centered base window of `cells` cells.
    pub fn centered(grid: &PeriodicGrid, cells: usize) -> Result<Self> {
        let n = grid.n();
        if cells > n {
            return Err(Error::InvalidArgument(format!(
                "{cells} cells exceed the {n}^2 grid"
            )));
        }
        let start = (n - cells) / 2;
        Self::dyadic(grid, start, start, cells)
    }

    pub fn with_shifts(mut self) -> Self {
        self.shifted = true;
        self
    }

    pub fn with_levels(mut self, levels: Vec<u32>) -> Result<Self> {
        let shifted = self.shifted;
        self = Self::new(&self.grid, self.j0, self.k0, self.cells, levels)?;
        self.shifted = shifted;
        Ok(self)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn base(&self) -> Cube {
        Cube {
            level: 0,
            j0: self.j0,
            k0: self.k0,
            cells: self.cells,
        }
    }

    pub fn square(&self, cube: &Cube) -> Square {
        let h = self.grid.spacing();
        let corner = self.grid.point(cube.j0, cube.k0) - Complex64::new(0.5 * h, 0.5 * h);
        Square::new(corner, cube.cells as f64 * h)
    }

    pub fn cubes(&self) -> Vec<Cube> {
        let offsets: Vec<usize> = if self.shifted {
            vec![
                0,
                (self.cells as f64 / 3.0).round() as usize,
                (2.0 * self.cells as f64 / 3.0).round() as usize,
            ]
        } else {
            vec![0]
        };
        let mut set = BTreeSet::new();
        for &level in &self.levels {
            let side = self.cells >> level;
            for &off in &offsets {
                let shift = off % side;
                let mut starts = Vec::new();
                let mut s = shift;
                while s + side <= self.cells {
                    starts.push(s);
                    s += side;
                }
                for &ky in &starts {
                    for &kx in &starts {
                        set.insert(Cube {
                            level,
                            j0: self.j0 + kx,
                            k0: self.k0 + ky,
                            cells: side,
                        });
                    }
                }
            }
        }
        set.into_iter().collect()
    }
}

/// Summed-area table over the whole grid.
struct PrefixTable {
    n: usize,
    sums: Vec<f64>,
}

impl PrefixTable {
    fn new(n: usize, values: impl Fn(usize) -> f64) -> Self {
        let stride = n + 1;
        let mut sums = vec![0.0; stride * stride];
        for k in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += values(k * n + j);
                sums[(k + 1) * stride + j + 1] = sums[k * stride + j + 1] + row;
            }
        }
        Self { n, sums }
    }

    fn mean(&self, c: &Cube) -> f64 {
        let s = self.n + 1;
        let (j1, k1) = (c.j0 + c.cells, c.k0 + c.cells);
        let total = self.sums[k1 * s + j1] - self.sums[c.k0 * s + j1] - self.sums[k1 * s + c.j0]
            + self.sums[c.k0 * s + c.j0];
        total / (c.cells * c.cells) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStat {
    pub level: u32,
    pub side: f64,
    pub characteristic: f64,
    pub cubes: usize,
}

/// Supremum of a cube functional over a family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApReport {
    pub characteristic: f64,
    pub extremal: Square,
    /// `p` for Muckenhoupt reports, `s` for reverse-Hölder ones.
    pub p: f64,
    pub cube_count: usize,
    pub levels: Vec<LevelStat>,
}

impl ApReport {
    /// `level,side,characteristic,cubes` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,side,characteristic,cubes\n");
        for l in &self.levels {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                l.level, l.side, l.characteristic, l.cubes
            );
        }
        out
    }
}

fn check_weight(w: &RealField, family: &CubeFamily) -> Result<()> {
    if w.grid() != family.grid() {
        return Err(Error::GridMismatch {
            left: w.grid().to_string(),
            right: family.grid().to_string(),
        });
    }
    let base = family.base();
    let n = w.grid().n();
    for k in base.k0..base.k0 + base.cells {
        for j in base.j0..base.j0 + base.cells {
            let i = k * n + j;
            let v = w.values()[i];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveWeight { index: i, value: v });
            }
        }
    }
    Ok(())
}

fn scan<F>(family: &CubeFamily, p: f64, functional: F) -> ApReport
where
    F: Fn(&Cube) -> f64 + Sync,
{
    let cubes = family.cubes();
    let values: Vec<f64> = cubes.par_iter().map(&functional).collect();
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let levels = family
        .levels()
        .iter()
        .map(|&level| {
            let (mut ch, mut count) = (f64::NEG_INFINITY, 0);
            for (c, v) in cubes.iter().zip(&values) {
                if c.level == level {
                    ch = ch.max(*v);
                    count += 1;
                }
            }
            LevelStat {
                level,
                side: family.square(&family.base()).side / (1u64 << level) as f64,
                characteristic: ch,
                cubes: count,
            }
        })
        .collect();
    ApReport {
        characteristic: values[best],
        extremal: family.square(&cubes[best]),
        p,
        cube_count: cubes.len(),
        levels,
    }
}

fn check_exponent(p: f64, what: &str) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} = {p} must be finite and > 1"
        )))
    }
}

/// `sup_Q <w>_Q <w^{-1/(p-1)}>_Q^{p-1}` over the family.
pub fn ap_characteristic(w: &RealField, p: f64, cubes: &CubeFamily) -> Result<ApReport> {
    check_exponent(p, "p")?;
    check_weight(w, cubes)?;
    let v = w.values();
    let n = w.grid().n();
    let e = -1.0 / (p - 1.0);
    let direct = PrefixTable::new(n, |i| v[i]);
    let dual = PrefixTable::new(n, |i| v[i].powf(e));
    Ok(scan(cubes, p, |c| {
        direct.mean(c) * dual.mean(c).powf(p - 1.0)
    }))
}

/// `sup_Q <w^s>_Q^{1/s} / <w>_Q` over the family.
pub fn rh_characteristic(w: &RealField, s: f64, cubes: &CubeFamily) -> Result<ApReport> {
    check_exponent(s, "s")?;
    check_weight(w, cubes)?;
    let v = w.values();
    let n = w.grid().n();
    let direct = PrefixTable::new(n, |i| v[i]);
    let power = PrefixTable::new(n, |i| v[i].powf(s));
    Ok(scan(cubes, s, |c| {
        power.mean(c).powf(1.0 / s) / direct.mean(c)
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MoserCertificate {
    /// Muckenhoupt characteristic of `e^{a Re sigma}`.
    pub lhs: f64,
    pub log_lhs: f64,
    /// `(||d sigma||_2^2 + ||dbar sigma||_2^2)^{1/2}`.
    pub dsigma_l2: f64,
    pub extremal: Square,
    /// Whether cube averages were taken in log space.
    pub log_space: bool,
}

/// Oscillation of `a Re sigma` above which averages switch to log-sum-exp.
pub const LOG_SPACE_THRESHOLD: f64 = 30.0;

fn log_mean_exp(u: &[f64], n: usize, c: &Cube, scale: f64) -> f64 {
    let mut top = f64::NEG_INFINITY;
    for k in c.k0..c.k0 + c.cells {
        for j in c.j0..c.j0 + c.cells {
            top = top.max(scale * u[k * n + j]);
        }
    }
    let mut acc = 0.0;
    for k in c.k0..c.k0 + c.cells {
        for j in c.j0..c.j0 + c.cells {
            acc += (scale * u[k * n + j] - top).exp();
        }
    }
    top + (acc / (c.cells * c.cells) as f64).ln()
}

/// `sup_Q <e^{a Re sigma}>_Q <e^{-a Re sigma/(p-1)}>_Q^{p-1}` with the
/// gradient size of `sigma`.
pub fn moser_certificate(
    sigma: &ComplexField,
    a: f64,
    p: f64,
    cubes: &CubeFamily,
) -> Result<MoserCertificate> {
    check_exponent(p, "p")?;
    if sigma.grid() != cubes.grid() {
        return Err(Error::GridMismatch {
            left: sigma.grid().to_string(),
            right: cubes.grid().to_string(),
        });
    }
    let dsigma_l2 = (d_z(sigma).l2_norm().powi(2) + d_zbar(sigma).l2_norm().powi(2)).sqrt();
    let grid = sigma.grid();
    let n = grid.n();
    let base = cubes.base();
    let u: Vec<f64> = sigma.values().iter().map(|s| a * s.re).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in base.k0..base.k0 + base.cells {
        for j in base.j0..base.j0 + base.cells {
            lo = lo.min(u[k * n + j]);
            hi = hi.max(u[k * n + j]);
        }
    }
    let log_space = hi - lo > LOG_SPACE_THRESHOLD;
    let (log_lhs, extremal) = if log_space {
        let report = scan(cubes, p, |c| {
            log_mean_exp(&u, n, c, 1.0) + (p - 1.0) * log_mean_exp(&u, n, c, -1.0 / (p - 1.0))
        });
        (report.characteristic, report.extremal)
    } else {
        let mid = 0.5 * (hi + lo);
        let w = RealField::from_raw(grid, u.iter().map(|x| (x - mid).exp()).collect());
        let report = ap_characteristic(&w, p, cubes)?;
        (report.characteristic.ln(), report.extremal)
    };
    if log_lhs > f64::MAX.ln() {
        return Err(Error::Overflow(format!(
            "log of the characteristic is {log_lhs:.1}"
        )));
    }
    Ok(MoserCertificate {
        lhs: log_lhs.exp(),
        log_lhs,
        dsigma_l2,
        extremal,
        log_space,
    })
}

/// Which bound of the three-regime area distortion estimate applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DistortionRegime {
    /// `1 - t > 1`: bound `exp((1-t)^2 L^2)`.
    ReverseHolder,
    /// `0 <= 1 - t <= 1`: bound 1.
    Holder,
    /// `1 - t < 0`: bound `exp(t (t-1) L^2)`.
    Muckenhoupt,
}

impl DistortionRegime {
    pub fn of(t: f64) -> Self {
        let e = 1.0 - t;
        if e > 1.0 {
            Self::ReverseHolder
        } else if e >= 0.0 {
            Self::Holder
        } else {
            Self::Muckenhoupt
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::ReverseHolder => "1-t>1",
            Self::Holder => "0<=1-t<=1",
            Self::Muckenhoupt => "1-t<0",
        }
    }

    /// Bound with unit constants for `L = ||mu||_{W^{1,2}}`.
    pub fn bound(&self, t: f64, size: f64) -> f64 {
        let l2 = size * size;
        match self {
            Self::ReverseHolder => ((1.0 - t).powi(2) * l2).exp(),
            Self::Holder => 1.0,
            Self::Muckenhoupt => (t * (t - 1.0) * l2).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreaDistortion {
    pub t: f64,
    /// `|P|^{-t} (int_P J)^{t-1} int_P J^{1-t}` on the bounding square `P`.
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub regime: DistortionRegime,
    pub case: &'static str,
    pub preimage_box: Square,
}

const QUADRATURE_POINTS: usize = 128;

/// Smallest square containing the preimage of `q`, centered on the
/// preimage's bounding box.
pub fn preimage_bounding_square(sol: &BeltramiSolution, q: &Square) -> Result<Square> {
    let pre = invert_map(sol, &q.perimeter(64))?;
    let (mut lo, mut hi) = (
        Complex64::new(f64::INFINITY, f64::INFINITY),
        Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for z in pre {
        lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
        hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
    }
    let side = (hi.re - lo.re).max(hi.im - lo.im);
    let center = 0.5 * (lo + hi);
    Ok(Square::new(
        center - Complex64::new(0.5 * side, 0.5 * side),
        side,
    ))
}

fn jacobians(sol: &BeltramiSolution, points: &[Complex64]) -> Vec<f64> {
    evaluate_derivatives(sol, points)
        .iter()
        .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
        .collect()
}

/// Evaluates the area distortion functional on the square bounding the
/// preimage of `q`, against the regime bound with unit constants.
pub fn area_distortion_check(sol: &BeltramiSolution, t: f64, q: &Square) -> Result<AreaDistortion> {
    let p = preimage_bounding_square(sol, q)?;
    let jac = jacobians(sol, &p.midpoints(QUADRATURE_POINTS));
    let count = jac.len() as f64;
    let mean_j = jac.iter().sum::<f64>() / count;
    let mean_pow = jac.iter().map(|j| j.powf(1.0 - t)).sum::<f64>() / count;
    let lhs = mean_j.powf(t - 1.0) * mean_pow;
    let regime = DistortionRegime::of(t);
    let rhs = regime.bound(t, sobolev_size(sol.dilatation()));
    Ok(AreaDistortion {
        t,
        lhs,
        rhs,
        ratio: lhs / rhs,
        regime,
        case: regime.label(),
        preimage_box: p,
    })
}

/// Both sides of `int_Q |J f^{-1}|^t = int_{f^{-1}(Q)} |J f|^{1-t}`.
///
/// The left side is a midpoint rule on `q` through `f^{-1}`; the right side
/// integrates over the preimage box with the indicator of `f(z) in q`
/// evaluated on a `4x` finer midpoint lattice.
pub fn change_of_variables(
    sol: &BeltramiSolution,
    t: f64,
    q: &Square,
    points: usize,
) -> Result<(f64, f64)> {
    let targets = q.midpoints(points);
    let pre = invert_map(sol, &targets)?;
    let lhs = jacobians(sol, &pre).iter().map(|j| j.powf(-t)).sum::<f64>() * q.area()
        / targets.len() as f64;

    let p = preimage_bounding_square(sol, q)?;
    let pad = 0.05 * p.side;
    let p = Square::new(p.corner - Complex64::new(pad, pad), p.side + 2.0 * pad);
    let fine = p.midpoints(4 * points);
    let images = evaluate_map(sol, &fine);
    let jac = jacobians(sol, &fine);
    let cell = p.area() / fine.len() as f64;
    let rhs = images
        .iter()
        .zip(&jac)
        .filter(|(w, _)| q.contains(**w))
        .map(|(_, j)| j.powf(1.0 - t))
        .sum::<f64>()
        * cell;
    Ok((lhs, rhs))
}
