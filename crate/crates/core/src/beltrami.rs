//! Beltrami resolvent, principal solutions, the logarithmic derivative
//! `sigma = log(d f)`, inversion of the computed map and Jacobian weights.
//!
//! The resolvent `(I - mu S)^{-1} h` is computed by the Neumann iteration
//! `x <- h + mu S x` started at `x = h`. Each step contracts by at least the
//! sup norm `k` of `mu`, which caps the iteration count at
//! `ceil(ln tol / ln k) + 8`.
//!
//! On the torus the principal solution is represented as
//! `f(z) = z + m conj(z) + g(z)` where `m` is the mean of `rho = dbar f` and
//! `g = K(rho - m)` is periodic. The extra `m conj(z)` term carries the part
//! of `dbar f` that no periodic function can produce; it does not change
//! `d f = 1 + S rho`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{domain_mask, BoundaryCurve, DomainSpec};
use crate::error::{Error, Result};
use crate::grid::{d_z, load_field, save_field, ComplexField, PeriodicGrid, RealField};
use crate::interp::Bicubic;
use crate::operators::{beurling, cauchy_unchecked, compress_beurling, DomainMask};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Mean of `dbar sigma` tolerated (relative to its sup norm) before
/// [`sigma_field`] reports `NonZeroMean`.
pub const SIGMA_MEAN_TOLERANCE: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Beltrami coefficient with certified sup norm `k < 1`, supported in the
/// central half of the window.
#[derive(Clone, Debug)]
pub struct Dilatation {
    mu: ComplexField,
    k: f64,
    support_radius: f64,
}

impl Dilatation {
    pub fn new(mu: ComplexField) -> Result<Self> {
        let grid = mu.grid().clone();
        let k = mu.sup_norm();
        if k >= 1.0 {
            return Err(Error::InvalidDilatation(format!(
                "sup |mu| = {k} is not below 1"
            )));
        }
        let quarter = 0.25 * grid.side() * (1.0 + 1e-12);
        let mut outside = 0usize;
        let mut support_radius = 0.0f64;
        for (i, v) in mu.values().iter().enumerate() {
            if *v == ZERO {
                continue;
            }
            let z = grid.point_at(i);
            support_radius = support_radius.max(z.norm());
            if z.re.abs() > quarter || z.im.abs() > quarter {
                outside += 1;
            }
        }
        if outside > 0 {
            return Err(Error::InvalidDilatation(format!(
                "mu is non-zero at {outside} samples outside the central half of the window"
            )));
        }
        Ok(Self {
            mu,
            k,
            support_radius,
        })
    }

    pub fn zero(grid: &PeriodicGrid) -> Self {
        Self {
            mu: ComplexField::zeros(grid),
            k: 0.0,
            support_radius: 0.0,
        }
    }

    /// `amplitude * exp(1 - 1/(1 - |z|^2/R^2)) * exp(i frequency |z|^2)` on `|z| < R`.
    pub fn bump(grid: &PeriodicGrid, amplitude: f64, radius: f64, frequency: f64) -> Result<Self> {
        let mu = ComplexField::from_fn(grid, |z| {
            let s = z.norm_sqr() / (radius * radius);
            if s >= 1.0 {
                return ZERO;
            }
            let b = (1.0 - 1.0 / (1.0 - s)).exp();
            Complex64::from_polar(amplitude * b, frequency * z.norm_sqr())
        })?;
        Self::new(mu)
    }

    /// Coefficient of `z |z|^{1/K - 1}` on the unit disk, which is
    /// `-k z / conj(z)` inside and zero outside. The disk indicator is the
    /// sub-cell coverage of the closed disk; `mu(0) = 0`.
    pub fn radial_stretch(grid: &PeriodicGrid, distortion: f64) -> Result<Self> {
        if !(distortion >= 1.0) {
            return Err(Error::InvalidDilatation(format!(
                "distortion {distortion} must be at least 1"
            )));
        }
        let k = (distortion - 1.0) / (distortion + 1.0);
        let mask = domain_mask(&DomainSpec::disk(ZERO, 1.0, 64)?, grid)?;
        let cov = mask.coverage().values();
        let values = (0..grid.len())
            .map(|i| {
                let z = grid.point_at(i);
                if z == ZERO {
                    ZERO
                } else {
                    -k * cov[i] * z / z.conj()
                }
            })
            .collect();
        Self::new(ComplexField::new(grid, values)?)
    }

    pub fn field(&self) -> &ComplexField {
        &self.mu
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.mu.grid()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `K = (1 + k) / (1 - k)`.
    pub fn distortion(&self) -> f64 {
        (1.0 + self.k) / (1.0 - self.k)
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }
}

/// Output of a resolvent solve.
#[derive(Clone, Debug)]
pub struct ResolventRun {
    pub solution: ComplexField,
    pub iterations: usize,
    /// `||x - mu S x - h|| / ||h||` of the returned `x`.
    pub residual: f64,
}

pub fn iteration_cap(k: f64, tol: f64) -> usize {
    let bound = if k > 0.0 {
        (tol.ln() / k.ln()).ceil().max(0.0)
    } else {
        0.0
    };
    bound as usize + 8
}

fn neumann<F>(h: &ComplexField, k: f64, tol: f64, step: F) -> Result<ResolventRun>
where
    F: Fn(&ComplexField) -> ComplexField,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let h_norm = h.l2_norm();
    if h_norm == 0.0 {
        return Ok(ResolventRun {
            solution: h.clone(),
            iterations: 0,
            residual: 0.0,
        });
    }
    let cap = iteration_cap(k, tol);
    let mut x = h.clone();
    let mut change = f64::INFINITY;
    for it in 1..=cap {
        let y = &step(&x) + h;
        change = (&y - &x).l2_norm() / h_norm;
        x = y;
        if !change.is_finite() {
            break;
        }
        if change <= tol {
            let residual = (&(&x - &step(&x)) - h).l2_norm() / h_norm;
            return Ok(ResolventRun {
                solution: x,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cap,
        residual: change,
    })
}

fn check_grid(a: &PeriodicGrid, b: &PeriodicGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            left: a.to_string(),
            right: b.to_string(),
        })
    }
}

/// Solves `x - mu S x = h`, returning the iteration count and final residual.
pub fn resolvent_run(mu: &Dilatation, h: &ComplexField, tol: f64) -> Result<ResolventRun> {
    check_grid(mu.grid(), h.grid())?;
    let m = mu.field();
    neumann(h, mu.k(), tol, |x| m * &beurling(x))
}

pub fn resolvent(mu: &Dilatation, h: &ComplexField, tol: f64) -> Result<ComplexField> {
    resolvent_run(mu, h, tol).map(|r| r.solution)
}

/// Solves `x - mu S_mask x = mask h` where `S_mask` is the compressed
/// Beurling transform.
pub fn resolvent_domain_run(
    mu: &Dilatation,
    h: &ComplexField,
    mask: &DomainMask,
    tol: f64,
) -> Result<ResolventRun> {
    check_grid(mu.grid(), h.grid())?;
    check_grid(mu.grid(), mask.grid())?;
    let cov = mask.coverage().values();
    let cells = mu
        .field()
        .values()
        .iter()
        .zip(cov)
        .filter(|(m, &c)| **m != ZERO && c == 0.0)
        .count();
    if cells > 0 {
        return Err(Error::SupportViolation { cells });
    }
    let masked = mask.apply(h)?;
    let m = mu.field();
    neumann(&masked, mu.k(), tol, |x| {
        m * &compress_beurling(x, mask).expect("grids checked")
    })
}

pub fn resolvent_domain(
    mu: &Dilatation,
    h: &ComplexField,
    mask: &DomainMask,
    tol: f64,
) -> Result<ComplexField> {
    resolvent_domain_run(mu, h, mask, tol).map(|r| r.solution)
}

/// Principal solution data on the grid.
#[derive(Clone, Debug)]
pub struct BeltramiSolution {
    mu: Dilatation,
    rho: ComplexField,
    dzf: ComplexField,
    sigma: ComplexField,
    jac: RealField,
    periodic: ComplexField,
    mean_rho: Complex64,
    residual: f64,
    iterations: usize,
    tol: f64,
}

/// Worst-case violations of the pointwise solution invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvariantReport {
    /// `max |dzf - 1 - S rho|`.
    pub dzf_consistency: f64,
    /// `max (|rho| - k |dzf|)`, non-positive when the bound holds.
    pub beltrami_excess: f64,
    pub min_jacobian: f64,
    /// `max (|dzf| + |rho|) / sqrt(K jac)`.
    pub distortion_ratio: f64,
    pub residual: f64,
    pub tol: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.dzf_consistency <= 1e-10
            && self.beltrami_excess <= 1e-8
            && self.min_jacobian > 0.0
            && self.distortion_ratio <= 1.0 + 1e-6
            && self.residual <= self.tol
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    k: f64,
    #[serde(rename = "K")]
    distortion: f64,
    tol: f64,
    residual: f64,
    iterations: usize,
}

impl BeltramiSolution {
    fn assemble(mu: Dilatation, rho: ComplexField, iterations: usize, tol: f64) -> Result<Self> {
        let dzf = &beurling(&rho) + ONE;
        let sigma = branch_log(&dzf)?;
        let jac = RealField::from_raw(
            dzf.grid(),
            dzf.values()
                .iter()
                .zip(rho.values())
                .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
                .collect(),
        );
        let mean_rho = rho.mean();
        let periodic = cauchy_unchecked(&rho);
        let mu_norm = mu.field().l2_norm();
        let residual = if mu_norm == 0.0 {
            0.0
        } else {
            (&rho - &(mu.field() * &dzf)).l2_norm() / mu_norm
        };
        Ok(Self {
            mu,
            rho,
            dzf,
            sigma,
            jac,
            periodic,
            mean_rho,
            residual,
            iterations,
            tol,
        })
    }

    pub fn dilatation(&self) -> &Dilatation {
        &self.mu
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }

    /// `dbar f`.
    pub fn rho(&self) -> &ComplexField {
        &self.rho
    }

    /// `d f = 1 + S rho`.
    pub fn dzf(&self) -> &ComplexField {
        &self.dzf
    }

    /// Branch-consistent `log(d f)`, zero imaginary part at the window corner.
    pub fn sigma(&self) -> &ComplexField {
        &self.sigma
    }

    /// `|d f|^2 - |dbar f|^2`.
    pub fn jacobian(&self) -> &RealField {
        &self.jac
    }

    /// `||rho - mu dzf|| / ||mu||`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn mean_rho(&self) -> Complex64 {
        self.mean_rho
    }

    /// Samples of `f(z) = z + m conj(z) + K(rho - m)` at the grid points.
    pub fn map_values(&self) -> ComplexField {
        let g = self.grid();
        ComplexField::from_raw(
            g,
            self.periodic
                .values()
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let z = g.point_at(i);
                    z + self.mean_rho * z.conj() + p
                })
                .collect(),
        )
    }

    pub fn invariants(&self) -> InvariantReport {
        let k = self.mu.k();
        let big_k = self.mu.distortion();
        let s_rho = beurling(&self.rho);
        let mut report = InvariantReport {
            dzf_consistency: 0.0,
            beltrami_excess: f64::NEG_INFINITY,
            min_jacobian: f64::INFINITY,
            distortion_ratio: 0.0,
            residual: self.residual,
            tol: self.tol,
        };
        for i in 0..self.rho.values().len() {
            let a = self.dzf.values()[i];
            let b = self.rho.values()[i];
            let j = self.jac.values()[i];
            report.dzf_consistency = report
                .dzf_consistency
                .max((a - ONE - s_rho.values()[i]).norm());
            report.beltrami_excess = report.beltrami_excess.max(b.norm() - k * a.norm());
            report.min_jacobian = report.min_jacobian.min(j);
            let ratio = if j > 0.0 {
                (a.norm() + b.norm()) / (big_k * j).sqrt()
            } else {
                f64::INFINITY
            };
            report.distortion_ratio = report.distortion_ratio.max(ratio);
        }
        report
    }

    /// Writes `mu`, `rho`, `dzf`, `sigma` and `jac` dumps plus `manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_field(&dir.join("mu.bin"), self.mu.field(), "mu")?;
        save_field(&dir.join("rho.bin"), &self.rho, "rho")?;
        save_field(&dir.join("dzf.bin"), &self.dzf, "dzf")?;
        save_field(&dir.join("sigma.bin"), &self.sigma, "sigma")?;
        save_field(&dir.join("jac.bin"), &self.jac.to_complex(), "jac")?;
        let manifest = Manifest {
            k: self.mu.k(),
            distortion: self.mu.distortion(),
            tol: self.tol,
            residual: self.residual,
            iterations: self.iterations,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let (mu, _) = load_field(&dir.join("mu.bin"))?;
        let (rho, _) = load_field(&dir.join("rho.bin"))?;
        let (sigma, _) = load_field(&dir.join("sigma.bin"))?;
        let mu = Dilatation::new(mu)?;
        if mu.k() != manifest.k {
            return Err(Error::Format {
                path,
                reason: format!("manifest k {} but mu has sup {}", manifest.k, mu.k()),
            });
        }
        let mut sol = Self::assemble(mu, rho, manifest.iterations, manifest.tol)?;
        sol.sigma = sigma;
        Ok(sol)
    }
}

/// `log(dzf)` with the argument unwrapped along a spanning tree: the first
/// row from the corner outward, then every column upward. Every grid edge,
/// periodic ones included, is then checked for consistency.
fn branch_log(dzf: &ComplexField) -> Result<ComplexField> {
    let g = dzf.grid();
    let n = g.n();
    let v = dzf.values();
    if let Some(i) = v.iter().position(|a| *a == ZERO) {
        return Err(Error::LogBranchFailure { from: i, to: i });
    }
    let increment = |from: usize, to: usize| (v[to] / v[from]).arg();
    let mut arg = vec![0.0f64; n * n];
    arg[0] = v[0].arg();
    for j in 1..n {
        arg[j] = arg[j - 1] + increment(j - 1, j);
    }
    for k in 1..n {
        for j in 0..n {
            let (a, b) = (g.index(j, k - 1), g.index(j, k));
            arg[b] = arg[a] + increment(a, b);
        }
    }
    let check = |a: usize, b: usize| -> Result<()> {
        let d = arg[b] - arg[a] - increment(a, b);
        if d.abs() > 1e-6 {
            Err(Error::LogBranchFailure { from: a, to: b })
        } else {
            Ok(())
        }
    };
    for k in 0..n {
        for j in 0..n {
            let here = g.index(j, k);
            check(here, g.index((j + 1) % n, k))?;
            check(here, g.index(j, (k + 1) % n))?;
        }
    }
    Ok(ComplexField::from_raw(
        g,
        v.iter()
            .zip(&arg)
            .map(|(a, &t)| Complex64::new(a.norm().ln(), t))
            .collect(),
    ))
}

/// `rho = (I - mu S)^{-1} mu` and the derived fields of the principal solution.
pub fn principal_solution(mu: &Dilatation, tol: f64) -> Result<BeltramiSolution> {
    let run = resolvent_run(mu, mu.field(), tol)?;
    BeltramiSolution::assemble(mu.clone(), run.solution, run.iterations, tol)
}

/// `sigma` with `dbar sigma = mu d sigma + d mu`, normalized so that
/// `exp(sigma)` has unit mean like `d f`.
///
/// `dbar sigma = (I - mu S)^{-1} d mu` is the derivative of a periodic field
/// and has zero mean up to discretization error; that residual mean is
/// projected out when below [`SIGMA_MEAN_TOLERANCE`].
pub fn sigma_field(mu: &Dilatation, tol: f64) -> Result<ComplexField> {
    let grid = mu.grid();
    if mu.k() == 0.0 {
        return Ok(ComplexField::zeros(grid));
    }
    let rhs = d_z(mu.field());
    let x = resolvent(mu, &rhs, tol)?;
    let mean = x.mean();
    let sup = x.sup_norm();
    if mean.norm() > SIGMA_MEAN_TOLERANCE * sup {
        return Err(Error::NonZeroMean { mean, sup });
    }
    let base = cauchy_unchecked(&(&x + (-mean)));
    let scale = base.values().iter().map(|s| s.exp()).sum::<Complex64>() / grid.len() as f64;
    Ok(&base + (-scale.ln()))
}

/// Bicubic model of the principal map for off-grid evaluation.
struct MapModel<'a> {
    sol: &'a BeltramiSolution,
    periodic: Bicubic<'a>,
    dzf: Bicubic<'a>,
    rho: Bicubic<'a>,
}

impl<'a> MapModel<'a> {
    fn new(sol: &'a BeltramiSolution) -> Self {
        let g = sol.grid();
        Self {
            sol,
            periodic: Bicubic::new(g, sol.periodic.values()),
            dzf: Bicubic::new(g, sol.dzf.values()),
            rho: Bicubic::new(g, sol.rho.values()),
        }
    }

    fn map(&self, z: Complex64) -> Complex64 {
        z + self.sol.mean_rho * z.conj() + self.periodic.eval(z)
    }

    fn invert(&self, w: Complex64) -> Result<Complex64> {
        let scale = self.sol.grid().side();
        let mut z = w;
        let mut r = w - self.map(z);
        for _ in 0..NEWTON_MAX_ITER {
            if r.norm() <= NEWTON_TOL * scale {
                return Ok(z);
            }
            let a = self.dzf.eval(z);
            let b = self.rho.eval(z);
            let det = a.norm_sqr() - b.norm_sqr();
            if !(det > 0.0) {
                break;
            }
            let mut step = (a.conj() * r - b * r.conj()) / det;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = z + step;
                let tr = w - self.map(trial);
                if tr.norm() < r.norm() {
                    z = trial;
                    r = tr;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if r.norm() <= NEWTON_TOL * scale {
            Ok(z)
        } else {
            Err(Error::NewtonStall {
                target: w,
                residual: r.norm(),
            })
        }
    }
}

/// Evaluates the principal map at arbitrary points through bicubic
/// interpolation of its periodic part.
pub fn evaluate_map(sol: &BeltramiSolution, points: &[Complex64]) -> Vec<Complex64> {
    let model = MapModel::new(sol);
    points.par_iter().map(|&z| model.map(z)).collect()
}

/// Interpolated `(d f, dbar f)` at arbitrary points.
pub fn evaluate_derivatives(
    sol: &BeltramiSolution,
    points: &[Complex64],
) -> Vec<(Complex64, Complex64)> {
    let model = MapModel::new(sol);
    points
        .par_iter()
        .map(|&z| (model.dzf.eval(z), model.rho.eval(z)))
        .collect()
}

/// Preimages under the principal map, by damped Newton iteration on the
/// interpolated map. Each result satisfies `|f(z) - w| <= 1e-9 L`.
pub fn invert_map(sol: &BeltramiSolution, targets: &[Complex64]) -> Result<Vec<Complex64>> {
    let model = MapModel::new(sol);
    targets.par_iter().map(|&w| model.invert(w)).collect()
}

/// Samples `|J f^{-1}(w)|^a = |J f(f^{-1}(w))|^{-a}` at the points of `region`.
pub fn inverse_jacobian_weight(
    sol: &BeltramiSolution,
    a: f64,
    region: &PeriodicGrid,
) -> Result<RealField> {
    let targets: Vec<Complex64> = (0..region.len()).map(|i| region.point_at(i)).collect();
    let pre = invert_map(sol, &targets)?;
    let model = MapModel::new(sol);
    let values: Vec<f64> = pre
        .par_iter()
        .map(|&z| {
            let (d, r) = (model.dzf.eval(z), model.rho.eval(z));
            (d.norm_sqr() - r.norm_sqr()).powf(-a)
        })
        .collect();
    RealField::new(region, values)
}

/// Image of a boundary curve under the principal map, with tangents
/// `d f z' + dbar f conj(z')`.
pub fn map_curve(sol: &BeltramiSolution, curve: &BoundaryCurve) -> Result<BoundaryCurve> {
    let model = MapModel::new(sol);
    let (nodes, tangents) = curve
        .nodes
        .iter()
        .zip(&curve.tangents)
        .map(|(&z, &t)| {
            (
                model.map(z),
                model.dzf.eval(z) * t + model.rho.eval(z) * t.conj(),
            )
        })
        .unzip();
    BoundaryCurve::new(nodes, tangents)
}

/// `||mu||_{W^{1,2}} = ||mu||_2 + ||d mu||_2 + ||dbar mu||_2`.
pub fn sobolev_size(mu: &Dilatation) -> f64 {
    let f = mu.field();
    f.l2_norm() + d_z(f).l2_norm() + crate::grid::d_zbar(f).l2_norm()
}

/// Closed forms of the radial stretch `f(z) = z |z|^s` on the unit disk.
pub mod radial {
    use super::*;

    pub fn exponent(distortion: f64) -> f64 {
        1.0 / distortion - 1.0
    }

    pub fn rho(s: f64, z: Complex64) -> Complex64 {
        let r = z.norm();
        if r == 0.0 || r > 1.0 {
            return ZERO;
        }
        0.5 * s * r.powf(s) * z / z.conj()
    }

    pub fn jacobian(s: f64, z: Complex64) -> f64 {
        let r = z.norm();
        if r > 1.0 {
            1.0
        } else {
            (1.0 + s) * r.powf(2.0 * s)
        }
    }

    pub fn map(s: f64, z: Complex64) -> Complex64 {
        let r = z.norm();
        if r > 1.0 || r == 0.0 {
            z
        } else {
            z * r.powf(s)
        }
    }

    pub fn inverse(s: f64, w: Complex64) -> Complex64 {
        let r = w.norm();
        if r > 1.0 || r == 0.0 {
            w
        } else {
            w * r.powf(1.0 / (1.0 + s) - 1.0)
        }
    }
}
