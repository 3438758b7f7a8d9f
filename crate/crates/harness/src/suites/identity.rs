//! Spectral identities of the Beurling and Cauchy transforms on random
//! smooth compactly supported fields, plus a derivative refinement study.

use anyhow::{Context, Result};
use beltrami::{
    beurling, cauchy, d_z, d_zbar, fourier_forward, fourier_inverse, Complex64, ComplexField,
    Spectrum,
};

use super::{grid, map_items, max_of, relative_error, stream};
use crate::config::ExperimentConfig;
use crate::family::{mollifier, windowed_noise};
use crate::report::{Check, Report, Series};

const TWINE: &str = "S(dbar f) = d f";
const DK: &str = "d K = S";
const ISOMETRY: &str = "||S f||_2 = ||f||_2";
const INVERSE: &str = "dbar K f = f and K dbar g = g - mean g on resolved modes";
const REFINE: &str = "spectral derivatives converge under refinement";

/// Noise-floor allowance in the refinement study: once the error reaches
/// round-off, later levels may fluctuate at that level.
const REFINEMENT_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default)]
struct Errors {
    twine: f64,
    dk: f64,
    isometry: f64,
    dbar_k: f64,
    k_dbar: f64,
}

fn identity_errors(g: &ComplexField) -> Result<Errors> {
    let f = d_zbar(g);
    let kf = cauchy(&f).context("Cauchy transform of dbar g")?;
    let centered = resolved_part(g);
    let sf = beurling(&f);
    Ok(Errors {
        twine: relative_error(&sf, &d_z(g))?,
        dk: relative_error(&d_z(&kf), &sf)?,
        isometry: (sf.l2_norm() - f.l2_norm()).abs() / f.l2_norm(),
        dbar_k: relative_error(&d_zbar(&kf), &f)?,
        k_dbar: relative_error(&kf, &centered)?,
    })
}

/// `g` without its mean and Nyquist modes: the part the discrete `K dbar`
/// reproduces.
fn resolved_part(g: &ComplexField) -> ComplexField {
    let grid = g.grid();
    let n = grid.n();
    let mut coeffs = fourier_forward(g).coeffs().to_vec();
    coeffs[0] = Complex64::new(0.0, 0.0);
    for k in 0..n {
        for j in 0..n {
            if grid.is_nyquist(j) || grid.is_nyquist(k) {
                coeffs[k * n + j] = Complex64::new(0.0, 0.0);
            }
        }
    }
    fourier_inverse(&Spectrum::new(grid, coeffs).expect("same grid"))
}

/// Max error of the spectral `dbar` of a mollifier bump against its closed form.
fn derivative_error(n: usize, side: f64, radius: f64) -> Result<f64> {
    let g = grid(n, side)?;
    let r2 = radius * radius;
    let u = ComplexField::from_fn(&g, |z| Complex64::new(mollifier(z.norm_sqr() / r2), 0.0))?;
    let exact = ComplexField::from_fn(&g, |z| {
        let s = z.norm_sqr() / r2;
        if s >= 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            -mollifier(s) * z / (r2 * (1.0 - s).powi(2))
        }
    })?;
    Ok(d_zbar(&u).max_abs_diff(&exact)? / exact.sup_norm())
}

pub fn run_identity_suite(config: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(config);
    let g = grid(config.grid.n, config.grid.side)?;
    let radius = 0.25 * config.grid.side;
    let seeds: Vec<u64> = (0..config.samples as u64).collect();
    let errors = map_items(config.parallel, &seeds, |&s| {
        let field = windowed_noise(&g, 6, radius, &mut stream(config.seed, s));
        identity_errors(&field)
    })?;

    let mut series = Series::new(
        "samples",
        "spectral identities on random fields",
        &["sample", "twine", "dk", "isometry", "dbar_k", "k_dbar"],
    );
    for (s, e) in errors.iter().enumerate() {
        series.push(vec![
            s as f64, e.twine, e.dk, e.isometry, e.dbar_k, e.k_dbar,
        ]);
    }
    report.add_series(series);

    let tol = config.tolerances.identity;
    let worst = |f: fn(&Errors) -> f64| max_of(errors.iter().map(f));
    report.check(Check::at_most("twine", TWINE, worst(|e| e.twine), tol));
    report.check(Check::at_most("d_cauchy", DK, worst(|e| e.dk), tol));
    report.check(Check::at_most(
        "isometry",
        ISOMETRY,
        worst(|e| e.isometry),
        tol,
    ));
    report.check(Check::at_most(
        "dbar_cauchy",
        INVERSE,
        worst(|e| e.dbar_k),
        tol,
    ));
    report.check(Check::at_most(
        "cauchy_dbar",
        INVERSE,
        worst(|e| e.k_dbar),
        tol,
    ));

    if !config.grid.refinement.is_empty() {
        let mut refine = Series::new("refinement", REFINE, &["n", "max_error"]);
        let errs = map_items(config.parallel, &config.grid.refinement, |&n| {
            derivative_error(n, config.grid.side, radius)
        })?;
        for (&n, &e) in config.grid.refinement.iter().zip(&errs) {
            refine.push(vec![n as f64, e]);
        }
        let increase = errs
            .windows(2)
            .map(|w| w[1] - w[0].max(REFINEMENT_FLOOR))
            .fold(0.0, f64::max);
        report.add_series(refine);
        report.check(
            Check::at_most("refinement_nonincreasing", REFINE, increase, 0.0)
                .with_note("largest increase between consecutive levels"),
        );
    }
    Ok(report)
}
