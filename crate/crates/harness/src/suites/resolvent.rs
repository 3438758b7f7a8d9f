//! Contraction of the Neumann solver, probed resolvent norms on Sobolev
//! spaces across a dilatation family, and the radial-stretch oracle.

use anyhow::Result;
use beltrami::beltrami::radial;
use beltrami::{
    principal_solution, resolvent, resolvent_run, sobolev_norm, ComplexField, Dilatation, NormSpec,
    PeriodicGrid,
};

use super::{grid, map_items, probe_norm, stream};
use crate::config::ExperimentConfig;
use crate::family::{calibrate_fixed_k, random_dilatation, windowed_noise};
use crate::fit::{linear_fit, variation};
use crate::report::{Check, Report, Series};

const CONTRACTION: &str =
    "Neumann series for (I - mu S)^{-1} converges at rate k with ||x||_2 <= ||h||_2 / (1 - k)";
const INVARIANTS: &str = "principal solution: |dbar f| <= k |d f|, J f > 0, |Df|^2 <= K J f";
const CRITICAL: &str = "||(I - mu S)^{-1}||_{W^{1,r}} <~ 1 for 1 < r < 2";
const GROWTH: &str = "||(I - mu S)^{-1}||_{L^p} <= C exp(C max{p, 1/(p-1)}^2 L^2)";
const SUPERCRITICAL: &str = "||(I - mu S)^{-1}||_{W^{1,p}} <~ 1 + ||mu||^2_{W^{1,p}} for p > 2";
const RADIAL: &str =
    "z |z|^{1/K - 1} is the principal solution for mu = -k z / conj z on the unit disk";

/// Support radii of the random dilatations and of the probes.
const PAIR_RADIUS: f64 = 1.0;
const PROBE_RADIUS: f64 = 1.5;
const PROBE_BAND: usize = 4;
/// Iteration budget at `k = 0.5`, `tol = 1e-10`.
const ITERATION_BUDGET: usize = 36;

fn w1(f: &ComplexField, p: f64) -> Result<f64> {
    Ok(sobolev_norm(f, &NormSpec::new(1, p), false)?)
}

fn probes(g: &PeriodicGrid, config: &ExperimentConfig) -> Vec<ComplexField> {
    let mut rng = stream(config.seed, 1_000);
    (0..config.probes)
        .map(|_| windowed_noise(g, PROBE_BAND, PROBE_RADIUS, &mut rng))
        .collect()
}

/// Probed lower bound of the resolvent norm on `W^{1,p}`.
pub fn probed_ratio(
    mu: &Dilatation,
    probes: &[ComplexField],
    steps: usize,
    p: f64,
    tol: f64,
) -> Result<f64> {
    probe_norm(probes, steps, |h| Ok(resolvent(mu, h, tol)?), |f| w1(f, p))
}

/// Relative L^2 errors of `rho` on `|z| <= 0.9` and of the Jacobian on
/// `0.1 <= |z| <= 0.9` for the radial stretch of distortion `big_k`.
pub fn radial_errors(g: &PeriodicGrid, big_k: f64, tol: f64) -> Result<(f64, f64, usize)> {
    let mu = Dilatation::radial_stretch(g, big_k)?;
    let run = resolvent_run(&mu, mu.field(), tol)?;
    let sol = principal_solution(&mu, tol)?;
    let s = radial::exponent(big_k);
    let (mut num, mut den, mut jnum, mut jden) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..g.len() {
        let z = g.point_at(i);
        let r = z.norm();
        if r <= 0.9 {
            let exact = radial::rho(s, z);
            num += (run.solution.values()[i] - exact).norm_sqr();
            den += exact.norm_sqr();
        }
        if (0.1..=0.9).contains(&r) {
            let exact = radial::jacobian(s, z);
            jnum += (sol.jacobian().values()[i] - exact).powi(2);
            jden += exact * exact;
        }
    }
    Ok(((num / den).sqrt(), (jnum / jden).sqrt(), run.iterations))
}

pub fn run_resolvent_growth(config: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(config);
    let tol = config.tolerances.solver;
    let g = grid(config.grid.n, config.grid.side)?;
    let k = config.family.k;

    // Contraction on random pairs.
    let seeds: Vec<u64> = (0..config.samples as u64).collect();
    let pairs = map_items(config.parallel, &seeds, |&s| {
        let mut rng = stream(config.seed, s);
        let mu = random_dilatation(&g, k, PAIR_RADIUS, &mut rng)?;
        let h = windowed_noise(&g, PROBE_BAND, PROBE_RADIUS, &mut rng);
        let run = resolvent_run(&mu, &h, tol)?;
        let bound = h.l2_norm() / (1.0 - mu.k()) + tol * h.l2_norm();
        let sol = principal_solution(&mu, tol)?;
        Ok((
            run.iterations,
            run.solution.l2_norm() / bound,
            sol.invariants().holds(),
        ))
    })?;
    let mut contraction = Series::new(
        "contraction",
        CONTRACTION,
        &["sample", "iterations", "norm_over_bound", "invariants"],
    );
    for (s, (it, ratio, ok)) in pairs.iter().enumerate() {
        contraction.push(vec![
            s as f64,
            *it as f64,
            *ratio,
            if *ok { 1.0 } else { 0.0 },
        ]);
    }
    report.add_series(contraction);
    let max_it = pairs.iter().map(|p| p.0).max().unwrap_or(0);
    report.check(Check::at_most(
        "iterations",
        CONTRACTION,
        max_it as f64,
        ITERATION_BUDGET as f64,
    ));
    report.check(Check::at_most(
        "norm_bound",
        CONTRACTION,
        pairs.iter().map(|p| p.1).fold(0.0, f64::max),
        1.0,
    ));
    report.check(Check::holds(
        "invariants",
        INVARIANTS,
        pairs.iter().all(|p| p.2),
    ));

    // Probed norms across the fixed-k family.
    let probes = probes(&g, config);
    let zero = Dilatation::zero(&g);
    let mut exponents: Vec<f64> = config.exponents.r.clone();
    exponents.extend(&config.exponents.p);
    let zero_ratio = exponents
        .iter()
        .map(|&p| probed_ratio(&zero, &probes, 0, p, tol))
        .collect::<Result<Vec<_>>>()?;
    report.check(Check::at_most(
        "zero_mu_ratio",
        CRITICAL,
        zero_ratio
            .iter()
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max),
        0.0,
    ));

    let radius = config.family.radius;
    let members = map_items(config.parallel, &config.family.sizes, |&size| {
        let member = calibrate_fixed_k(&g, size, k, radius)?;
        let ratios = exponents
            .iter()
            .map(|&p| probed_ratio(&member.mu, &probes, config.power_steps, p, tol))
            .collect::<Result<Vec<_>>>()?;
        let mu_p = config
            .exponents
            .p
            .iter()
            .map(|&p| w1(member.mu.field(), p))
            .collect::<Result<Vec<_>>>()?;
        Ok((member, ratios, mu_p))
    })?;

    let mut growth = Series::new(
        "growth",
        GROWTH,
        &["L", "L2", "exponent", "ratio", "mu_w1p", "fitted_c"],
    );
    let l2: Vec<f64> = members.iter().map(|m| m.0.size * m.0.size).collect();
    for (ei, &p) in exponents.iter().enumerate() {
        let ratios: Vec<f64> = members.iter().map(|m| m.1[ei]).collect();
        let critical = ei < config.exponents.r.len();
        let mut constants = Vec::new();
        for (mi, m) in members.iter().enumerate() {
            let (mu_p, c) = if critical {
                (f64::NAN, f64::NAN)
            } else {
                let mu_p = m.2[ei - config.exponents.r.len()];
                (mu_p, ratios[mi] / (1.0 + mu_p * mu_p))
            };
            if !critical {
                constants.push(c);
            }
            growth.push(vec![m.0.size, l2[mi], p, ratios[mi], mu_p, c]);
        }
        let logs: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        let fit = linear_fit(&l2, &logs);
        let note = format!(
            "log ratio vs L^2: slope {:.4e}, R^2 {:.4}",
            fit.slope, fit.r_squared
        );
        if critical {
            report.check(Check::holds(
                &format!("finite_r{p}"),
                CRITICAL,
                ratios.iter().all(|r| r.is_finite()),
            ));
            let drop = ratios.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            report.check(
                Check::at_most(&format!("nondecreasing_r{p}"), CRITICAL, drop, 0.0)
                    .with_note("largest decrease of the probed norm between consecutive members"),
            );
            report.check(
                Check::at_most(
                    &format!("bounded_r{p}"),
                    CRITICAL,
                    variation(&ratios),
                    config.tolerances.variation,
                )
                .with_note(note),
            );
        } else {
            // The bound is an upper shape: the fitted constant may fall
            // along the family but must not grow.
            let growth = constants
                .iter()
                .map(|c| c / constants[0])
                .fold(0.0, f64::max);
            report.check(
                Check::at_most(
                    &format!("supercritical_constant_p{p}"),
                    SUPERCRITICAL,
                    growth,
                    config.tolerances.variation,
                )
                .with_note(format!(
                    "largest C relative to the first member, max/min {:.3}; {note}",
                    variation(&constants)
                )),
            );
        }
    }
    report.add_series(growth);

    // Radial-stretch oracle on the fine grid.
    if let Some(&n) = config.grid.refinement.last() {
        let fine = grid(n, config.grid.side)?;
        let (rho_err, jac_err, iterations) = radial_errors(&fine, 2.0, tol)?;
        let mut radial = Series::new(
            "radial_stretch",
            RADIAL,
            &["n", "rho_error", "jacobian_error", "iterations"],
        );
        radial.push(vec![n as f64, rho_err, jac_err, iterations as f64]);
        report.add_series(radial);
        let note = format!("K = 2, {n}^2 grid, L = {}", config.grid.side);
        report.check(
            Check::at_most("radial_rho", RADIAL, rho_err, config.tolerances.oracle)
                .with_note(note.clone()),
        );
        report.check(
            Check::at_most("radial_jacobian", RADIAL, jac_err, config.tolerances.oracle)
                .with_note(note),
        );
    }
    Ok(report)
}
