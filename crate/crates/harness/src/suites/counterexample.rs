//! `phi(z) = z (1 - log|z|)` solves `dbar phi = mu d phi` with
//! `|mu| < 1` near the origin, yet `D^2 phi ~ 1/|z|` is not square integrable.

use std::f64::consts::PI;

use anyhow::Result;
use beltrami::{d_z, d_zbar, Complex64, ComplexField};

use super::{grid, max_of};
use crate::config::ExperimentConfig;
use crate::report::{Check, Report, Series};

const EQUATION: &str =
    "phi = z(1 - log|z|) solves dbar phi = mu d phi, mu = (z/conj z)/(2 log|z| - 1)";
const NOT_W22: &str = "phi is not in W^{2,2}_loc";

pub const INNER: f64 = 0.1;
pub const OUTER: f64 = 0.9;
/// Sharpness of the window's erf transitions.
const WINDOW_SHARPNESS: f64 = 4.0;

pub fn phi(z: Complex64) -> Complex64 {
    z * (1.0 - z.norm().ln())
}

pub fn d_phi(z: Complex64) -> Complex64 {
    Complex64::new(0.5 - z.norm().ln(), 0.0)
}

pub fn dbar_phi(z: Complex64) -> Complex64 {
    -z / (2.0 * z.conj())
}

pub fn mu(z: Complex64) -> Complex64 {
    (z / z.conj()) / (2.0 * z.norm().ln() - 1.0)
}

/// `|d^2 phi| + |d dbar phi| + |dbar^2 phi|` from the second derivatives
/// `-1/(2z)`, `-1/(2 conj z)` and `z / (2 conj(z)^2)`.
pub fn second_derivative_size(z: Complex64) -> f64 {
    let zb = z.conj();
    (-0.5 / z).norm() + (-0.5 / zb).norm() + (z / (2.0 * zb * zb)).norm()
}

fn smooth_step(r: f64, a: f64, b: f64) -> f64 {
    let width = (b - a) / (2.0 * WINDOW_SHARPNESS);
    0.5 * libm::erfc(-(r - 0.5 * (a + b)) / width)
}

/// Radial window equal to one on the annulus up to `~1e-8`, with its
/// transitions in `[0, 0.1]` and `[0.9, 1.1]`.
pub fn window(r: f64) -> f64 {
    smooth_step(r, 0.0, INNER) * (1.0 - smooth_step(r, OUTER, OUTER + 0.2))
}

fn in_annulus(z: Complex64) -> bool {
    let r = z.norm();
    (INNER..=OUTER).contains(&r)
}

/// `(int_{eps < |z| < 0.9} |D^2 phi|^r)^{1/r}` by a midpoint rule in
/// `log|z|` and angle.
pub fn second_derivative_norm(r: f64, eps: f64, per_decade: usize, angles: usize) -> f64 {
    let decades = (OUTER / eps).log10();
    let steps = (decades * per_decade as f64).ceil() as usize;
    let dt = (OUTER / eps).ln() / steps as f64;
    let dth = 2.0 * PI / angles as f64;
    let mut total = 0.0;
    for i in 0..steps {
        let rho = eps * ((i as f64 + 0.5) * dt).exp();
        for a in 0..angles {
            let z = Complex64::from_polar(rho, (a as f64 + 0.5) * dth);
            total += second_derivative_size(z).powf(r) * rho * rho * dt * dth;
        }
    }
    total.powf(1.0 / r)
}

pub fn run_counterexample(config: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(config);
    let g = grid(config.grid.n, config.grid.side)?;

    let points: Vec<Complex64> = (0..g.len())
        .map(|i| g.point_at(i))
        .filter(|&z| in_annulus(z))
        .collect();
    let analytic = max_of(
        points
            .iter()
            .map(|&z| (dbar_phi(z) - mu(z) * d_phi(z)).norm()),
    );
    let sup_mu = max_of(points.iter().map(|&z| mu(z).norm()));
    report.check(Check::at_most(
        "analytic_residual",
        EQUATION,
        analytic,
        config.tolerances.analytic_residual,
    ));
    report.check(Check::at_most(
        "mu_below_one",
        EQUATION,
        sup_mu,
        1.0 - f64::EPSILON,
    ));

    let windowed = ComplexField::from_fn(&g, |z| {
        if z.norm() == 0.0 {
            z
        } else {
            phi(z) * window(z.norm())
        }
    })?;
    let (dw, dbw) = (d_z(&windowed), d_zbar(&windowed));
    let mut spectral = 0.0f64;
    for i in 0..g.len() {
        let z = g.point_at(i);
        if in_annulus(z) {
            spectral = spectral.max((dbw.values()[i] - mu(z) * dw.values()[i]).norm());
        }
    }
    report.check(
        Check::at_most(
            "spectral_residual",
            EQUATION,
            spectral,
            config.tolerances.spectral_residual,
        )
        .with_note(format!("{}^2 grid, L = {}", g.n(), g.side())),
    );

    let radii: Vec<f64> = (1..=6).map(|e| 10f64.powi(-e)).collect();
    let mut series = Series::new(
        "second_derivative",
        NOT_W22,
        &["r", "inner_radius", "norm", "integral"],
    );
    for &r in &config.exponents.r {
        let norms: Vec<f64> = radii
            .iter()
            .map(|&eps| second_derivative_norm(r, eps, 64, 64))
            .collect();
        let integrals: Vec<f64> = norms.iter().map(|v| v.powf(r)).collect();
        for ((&eps, &v), &i) in radii.iter().zip(&norms).zip(&integrals) {
            series.push(vec![r, eps, v, i]);
        }
        let increments: Vec<f64> = integrals.windows(2).map(|w| w[1] - w[0]).collect();
        if r >= 2.0 {
            let first = increments[0];
            let decay = increments
                .iter()
                .map(|d| d / first)
                .fold(f64::INFINITY, f64::min);
            report.check(
                Check::at_least(&format!("diverges_r{r}"), NOT_W22, decay, 0.9)
                    .with_note("smallest per-decade increment of the integral over the first"),
            );
        } else {
            let n = norms.len();
            let change = (norms[n - 1] - norms[n - 2]).abs() / norms[n - 1];
            report.check(
                Check::at_most(&format!("stabilizes_r{r}"), NOT_W22, change, 1e-2)
                    .with_note("relative change over the last decade"),
            );
        }
    }
    report.add_series(series);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_match_finite_differences() {
        let z = Complex64::new(0.3, -0.4);
        let h = 1e-6;
        let dx = (phi(z + h) - phi(z - h)) / (2.0 * h);
        let dy = (phi(z + Complex64::new(0.0, h)) - phi(z - Complex64::new(0.0, h))) / (2.0 * h);
        let d = 0.5 * (dx - Complex64::i() * dy);
        let db = 0.5 * (dx + Complex64::i() * dy);
        assert!((d - d_phi(z)).norm() < 1e-8);
        assert!((db - dbar_phi(z)).norm() < 1e-8);
        assert!((second_derivative_size(z) - 1.5 / z.norm()).abs() < 1e-12);
    }

    #[test]
    fn window_is_one_on_the_annulus() {
        for r in [0.1, 0.5, 0.9] {
            assert!((window(r) - 1.0).abs() < 1e-7);
        }
        assert!(window(0.0) < 1e-7 && window(1.1) < 1e-7);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        // int (3/(2 rho))^r rho drho dtheta over eps < rho < 0.9
        let (r, eps): (f64, f64) = (1.5, 1e-3);
        let exact = (2.0 * PI * 1.5f64.powf(r) * (OUTER.powf(2.0 - r) - eps.powf(2.0 - r))
            / (2.0 - r))
            .powf(1.0 / r);
        let v = second_derivative_norm(r, eps, 64, 16);
        assert!((v - exact).abs() < 1e-4 * exact, "{v} vs {exact}");
    }
}
