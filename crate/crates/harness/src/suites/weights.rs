//! Muckenhoupt characteristics of inverse-Jacobian weights across the bump
//! family, their p-symmetry, the change of variables and Moser certificates.

use anyhow::Result;
use beltrami::{
    ap_characteristic, area_distortion_check, change_of_variables, inverse_jacobian_weight,
    moser_certificate, principal_solution, BeltramiSolution, Complex64, CubeFamily, Dilatation,
    PeriodicGrid, Square,
};

use super::{grid, map_items};
use crate::config::ExperimentConfig;
use crate::family::calibrate;
use crate::fit::{linear_fit, power_fit};
use crate::report::{Check, Report, Series};

const GROWTH: &str = "[|J f^{-1}|^{1-p/2}]_{A_p} <= C exp(C max{p, 1/(p-1)}^2 L^2)";
const GROWTH_DUAL: &str = "[|J f^{-1}|^{1-p}]_{A_p} <= C exp(C max{p^2, 1/(p-1)} L^2)";
const SYMMETRY: &str =
    "[|J f^{-1}|^{1-p/2}]_{A_p}^{max{1, 1/(p-1)}} is symmetric under p -> p/(p-1)";
const CHANGE: &str = "int_Q |J f^{-1}|^t = int_{f^{-1}(Q)} |J f|^{1-t}";
const MOSER: &str = "[e^{a Re sigma}]_{A_p} <= C exp(C a^2 max{p, 1/(p-1)} ||D sigma||_2^2)";
const DISTORTION: &str = "|P|^{-t} (int_P J)^{t-1} int_P J^{1-t} bounded by the regime bound in L";

/// Side of the square region in the image plane sampled for the weights.
pub const REGION_SIDE: f64 = 2.0;
pub const REGION_N: usize = 128;
/// Exponent of the log-characteristic in `L^2` above which growth counts as
/// faster than exponential in `L^2`.
pub const SUPERLINEAR_EXPONENT: f64 = 1.25;
const CHANGE_POINTS: usize = 128;

pub fn test_squares() -> [Square; 3] {
    let sq = |cx: f64, cy: f64, side: f64| {
        Square::new(Complex64::new(cx - 0.5 * side, cy - 0.5 * side), side)
    };
    [sq(0.0, 0.0, 0.5), sq(0.3, -0.2, 0.4), sq(-0.5, 0.4, 0.3)]
}

/// `[|J f^{-1}|^a]_{A_p}` over the shifted dyadic family of the region.
pub fn weight_characteristic(
    sol: &BeltramiSolution,
    a: f64,
    p: f64,
    region: &PeriodicGrid,
) -> Result<f64> {
    let w = inverse_jacobian_weight(sol, a, region)?;
    Ok(ap_characteristic(&w, p, &CubeFamily::full(region).with_shifts())?.characteristic)
}

fn dual(p: f64) -> f64 {
    p / (p - 1.0)
}

fn symmetric_power(p: f64) -> f64 {
    1f64.max(1.0 / (p - 1.0))
}

#[derive(Clone, Debug)]
struct MemberResult {
    size: f64,
    chars: Vec<(f64, f64, f64, f64)>,
    moser_log: f64,
    dsigma: f64,
    changes: Vec<(f64, f64)>,
    distortion: Vec<(f64, f64, f64)>,
}

fn measure(
    config: &ExperimentConfig,
    mu: &Dilatation,
    size: f64,
    region: &PeriodicGrid,
) -> Result<MemberResult> {
    let tol = config.tolerances.solver;
    let sol = principal_solution(mu, tol)?;
    let mut chars = Vec::new();
    for &p in &config.exponents.p {
        let half = weight_characteristic(&sol, 1.0 - p / 2.0, p, region)?;
        let full = weight_characteristic(&sol, 1.0 - p, p, region)?;
        let q = dual(p);
        let mirrored = weight_characteristic(&sol, 1.0 - q / 2.0, q, region)?;
        chars.push((p, half, full, mirrored));
    }
    let g = sol.grid();
    let support = CubeFamily::centered(g, g.n() / 2)?.with_shifts();
    let cert = moser_certificate(sol.sigma(), 1.0, 2.0, &support)?;
    let t = 1.0 - config.exponents.p[0] / 2.0;
    let changes = test_squares()
        .iter()
        .map(|q| change_of_variables(&sol, t, q, CHANGE_POINTS))
        .collect::<beltrami::Result<Vec<_>>>()?;
    let unit = Square::new(Complex64::new(-0.5, -0.5), 1.0);
    let distortion = [-0.5, 0.5, 1.5]
        .iter()
        .map(|&t| area_distortion_check(&sol, t, &unit).map(|d| (t, d.lhs, d.rhs)))
        .collect::<beltrami::Result<Vec<_>>>()?;
    Ok(MemberResult {
        size,
        chars,
        moser_log: cert.log_lhs,
        dsigma: cert.dsigma_l2,
        changes,
        distortion,
    })
}

pub fn run_weight_scaling(config: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(config);
    let g = grid(config.grid.n, config.grid.side)?;
    let region = grid(REGION_N, REGION_SIDE)?;

    let zero = measure(config, &Dilatation::zero(&g), 0.0, &region)?;
    let zero_dev = zero
        .chars
        .iter()
        .map(|&(_, a, b, c)| (a - 1.0).abs().max((b - 1.0).abs()).max((c - 1.0).abs()))
        .fold(0.0, f64::max);
    report.check(Check::at_most(
        "zero_mu_characteristic",
        GROWTH,
        zero_dev,
        1e-9,
    ));

    let results = map_items(config.parallel, &config.family.sizes, |&size| {
        let m = calibrate(&g, size, config.family.amplitude, config.family.radius)?;
        measure(config, &m.mu, m.size, &region)
    })?;

    let l2: Vec<f64> = results.iter().map(|r| r.size * r.size).collect();
    let mut chars = Series::new(
        "characteristics",
        GROWTH,
        &["L", "L2", "p", "half", "full", "dual_half"],
    );
    for r in &results {
        for &(p, a, b, c) in &r.chars {
            chars.push(vec![r.size, r.size * r.size, p, a, b, c]);
        }
    }
    report.add_series(chars);

    for (pi, &p) in config.exponents.p.iter().enumerate() {
        let half: Vec<f64> = results.iter().map(|r| r.chars[pi].1.ln()).collect();
        let full: Vec<f64> = results.iter().map(|r| r.chars[pi].2.ln()).collect();
        let fit = linear_fit(&l2, &half);
        let gamma = power_fit(&l2, &half).slope;
        report.check(
            Check::at_least(
                &format!("growth_slope_p{p}"),
                GROWTH,
                fit.slope,
                f64::MIN_POSITIVE,
            )
            .with_note(format!(
                "log char vs L^2: slope {:.4e}, intercept {:.4e}, R^2 {:.4}",
                fit.slope, fit.intercept, fit.r_squared
            )),
        );
        report.check(
            Check::at_most(
                &format!("growth_exponent_p{p}"),
                GROWTH,
                gamma,
                SUPERLINEAR_EXPONENT,
            )
            .with_note("log char ~ (L^2)^gamma on log-log axes"),
        );
        let fit_full = linear_fit(&l2, &full);
        report.check(
            Check::at_least(
                &format!("growth_slope_full_p{p}"),
                GROWTH_DUAL,
                fit_full.slope,
                f64::MIN_POSITIVE,
            )
            .with_note(format!("R^2 {:.4}", fit_full.r_squared)),
        );
        let asym = results
            .iter()
            .map(|r| {
                let (_, a, _, c) = r.chars[pi];
                let lhs = a.powf(symmetric_power(p));
                let rhs = c.powf(symmetric_power(dual(p)));
                (lhs - rhs).abs() / lhs
            })
            .fold(0.0, f64::max);
        report.check(Check::at_most(
            &format!("symmetry_p{p}"),
            SYMMETRY,
            asym,
            config.tolerances.symmetry,
        ));
    }

    let mut changes = Series::new(
        "change_of_variables",
        CHANGE,
        &["L", "square", "lhs", "rhs", "relative"],
    );
    let mut worst = 0.0f64;
    for r in &results {
        for (i, &(a, b)) in r.changes.iter().enumerate() {
            let rel = (a - b).abs() / a;
            worst = worst.max(rel);
            changes.push(vec![r.size, i as f64, a, b, rel]);
        }
    }
    report.add_series(changes);
    report.check(Check::at_most(
        "change_of_variables",
        CHANGE,
        worst,
        config.tolerances.change_of_variables,
    ));

    let mut moser = Series::new(
        "moser",
        MOSER,
        &["L", "dsigma_l2", "log_characteristic", "ratio"],
    );
    let ratios: Vec<f64> = results
        .iter()
        .map(|r| r.moser_log / (r.dsigma * r.dsigma))
        .collect();
    for (r, q) in results.iter().zip(&ratios) {
        moser.push(vec![r.size, r.dsigma, r.moser_log, *q]);
    }
    report.add_series(moser);
    let growth = ratios.iter().fold(0.0f64, |m, q| m.max(q / ratios[0]));
    report.check(
        Check::at_most(
            "moser_quadratic",
            MOSER,
            growth,
            config.tolerances.variation,
        )
        .with_note("largest log char / ||D sigma||^2 relative to the smallest member"),
    );

    let mut distortion = Series::new("area_distortion", DISTORTION, &["L", "t", "lhs", "rhs"]);
    for r in &results {
        for &(t, lhs, rhs) in &r.distortion {
            distortion.push(vec![r.size, t, lhs, rhs]);
        }
    }
    report.add_series(distortion);
    Ok(report)
}
