//! Both sides of the first- and second-order Caccioppoli inequalities for
//! principal solutions, against an analytic cutoff, under grid refinement.

use anyhow::Result;
use beltrami::{d_z, d_zbar, principal_solution, Complex64, Dilatation, PeriodicGrid};

use super::{grid, lp_norm, map_items};
use crate::config::ExperimentConfig;
use crate::family::{calibrate, family_dilatation};
use crate::report::{Check, Report, Series};

const CACC1: &str = "||eta |Df| ||_q <~ ||(D eta) f||_q, 2 < q";
const CACC2: &str =
    "||eta |D^2 f| ||_r <~ ||(D eta) f||_r + ||(D eta) Df||_r + ||(D^2 eta) f||_r, 1 < r < 2";

/// Analytic cutoff `eta = exp(1 - 1/(1 - |z|^2/R^2))` with `|D eta|` and
/// `|D^2 eta|` summed over Wirtinger derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Cutoff {
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffValues {
    pub eta: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Cutoff {
    pub fn eval(&self, z: Complex64) -> CutoffValues {
        let r2 = self.radius * self.radius;
        let s = z.norm_sqr() / r2;
        if s >= 1.0 {
            return CutoffValues::default();
        }
        let u = 1.0 - s;
        let eta = (1.0 - 1.0 / u).exp();
        let g1 = -1.0 / (u * u);
        let g2 = -2.0 / (u * u * u);
        // d eta = eta g' conj(z)/R^2; dbar eta is its conjugate.
        let d = eta * g1 * z.conj() / r2;
        // d^2 eta = eta (g'^2 + g'') (conj z / R^2)^2, dbar^2 eta its conjugate,
        // d dbar eta = eta (g'^2 + g'') |z|^2/R^4 + eta g' / R^2.
        let c = eta * (g1 * g1 + g2);
        let dd = c * (z.conj() / r2).powi(2);
        let mixed = c * z.norm_sqr() / (r2 * r2) + eta * g1 / r2;
        CutoffValues {
            eta,
            d1: 2.0 * d.norm(),
            d2: 2.0 * dd.norm() + mixed.abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratios {
    pub first: f64,
    pub second: f64,
}

/// Caccioppoli ratios of the principal solution of `mu` at exponents `q`, `r`.
pub fn caccioppoli_ratios(
    mu: &Dilatation,
    cutoff: Cutoff,
    q: f64,
    r: f64,
    tol: f64,
) -> Result<Ratios> {
    let sol = principal_solution(mu, tol)?;
    let g: &PeriodicGrid = sol.grid();
    let f = sol.map_values();
    let (dzf, rho) = (sol.dzf(), sol.rho());
    let (ddzf, drho, dbrho) = (d_z(dzf), d_z(rho), d_zbar(rho));
    let cut: Vec<CutoffValues> = (0..g.len()).map(|i| cutoff.eval(g.point_at(i))).collect();
    let df: Vec<f64> = (0..g.len())
        .map(|i| dzf.values()[i].norm() + rho.values()[i].norm())
        .collect();
    let d2f: Vec<f64> = (0..g.len())
        .map(|i| ddzf.values()[i].norm() + drho.values()[i].norm() + dbrho.values()[i].norm())
        .collect();
    let fabs: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    let idx = || 0..g.len();

    let lhs1 = lp_norm(g, idx().map(|i| cut[i].eta * df[i]), q);
    let rhs1 = lp_norm(g, idx().map(|i| cut[i].d1 * fabs[i]), q);
    let lhs2 = lp_norm(g, idx().map(|i| cut[i].eta * d2f[i]), r);
    let rhs2 = lp_norm(g, idx().map(|i| cut[i].d1 * fabs[i]), r)
        + lp_norm(g, idx().map(|i| cut[i].d1 * df[i]), r)
        + lp_norm(g, idx().map(|i| cut[i].d2 * fabs[i]), r);
    Ok(Ratios {
        first: lhs1 / rhs1,
        second: lhs2 / rhs2,
    })
}

pub fn run_caccioppoli(config: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(config);
    let tol = config.tolerances.solver;
    let cutoff = Cutoff {
        radius: config.cutoff_radius,
    };
    let coarse = grid(config.grid.n, config.grid.side)?;
    let radius = config.family.radius;

    // (size, shape, frequency); the zero member has shape 0.
    let mut members = vec![(0.0, 0.0, 0.0)];
    for &size in &config.family.sizes {
        let m = calibrate(&coarse, size, config.family.amplitude, radius)?;
        members.push((m.size, m.shape, m.frequency));
    }
    let levels: Vec<usize> = if config.grid.refinement.is_empty() {
        vec![config.grid.n]
    } else {
        config.grid.refinement.clone()
    };

    let mut series = Series::new("ratios", CACC1, &["n", "L", "q", "first", "r", "second"]);
    let mut table = Vec::new();
    for &n in &levels {
        let g = grid(n, config.grid.side)?;
        let jobs: Vec<(f64, f64, f64)> = members.clone();
        let rows = map_items(config.parallel, &jobs, |&(_, shape, w)| {
            let mu = if shape == 0.0 {
                Dilatation::zero(&g)
            } else {
                family_dilatation(&g, shape, w, radius)?
            };
            config
                .exponents
                .q
                .iter()
                .zip(&config.exponents.r)
                .map(|(&q, &r)| caccioppoli_ratios(&mu, cutoff, q, r, tol))
                .collect::<Result<Vec<_>>>()
        })?;
        for (m, row) in members.iter().zip(&rows) {
            for ((&q, &r), ratio) in config.exponents.q.iter().zip(&config.exponents.r).zip(row) {
                series.push(vec![n as f64, m.0, q, ratio.first, r, ratio.second]);
            }
        }
        table.push(rows);
    }
    report.add_series(series);

    let finite = table
        .iter()
        .flatten()
        .flatten()
        .all(|r| r.first.is_finite() && r.second.is_finite());
    report.check(Check::holds("finite", CACC1, finite));
    let zero = table[0][0]
        .iter()
        .all(|r| r.first.is_finite() && r.first > 0.0);
    report.check(Check::holds("zero_mu_finite", CACC1, zero).with_note("f = z"));

    if table.len() >= 2 {
        let (a, b) = (&table[0], &table[table.len() - 1]);
        let drift = |pick: fn(&Ratios) -> f64| {
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .filter(|(x, _)| pick(x) != 0.0)
                .map(|(x, y)| (pick(y) / pick(x) - 1.0).abs())
                .fold(0.0, f64::max)
        };
        let note = format!("{}^2 vs {}^2", levels[0], levels[levels.len() - 1]);
        report.check(
            Check::at_most(
                "drift_first",
                CACC1,
                drift(|r| r.first),
                config.tolerances.drift,
            )
            .with_note(note.clone()),
        );
        report.check(
            Check::at_most(
                "drift_second",
                CACC2,
                drift(|r| r.second),
                config.tolerances.drift,
            )
            .with_note(note),
        );
    }
    Ok(report)
}
