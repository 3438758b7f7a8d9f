//! Compressed resolvents on star-shaped domains: probed norms against the
//! global bound shape, boundary Besov norms of the domain and of its image,
//! and Jacobian weights on the image.

use std::f64::consts::PI;

use anyhow::Result;
use beltrami::{
    ap_characteristic, bp_norm, bp_norm_of_curve, domain_mask, inverse_jacobian_weight, map_curve,
    principal_solution, resolvent, resolvent_domain, sobolev_norm, Complex64, ComplexField,
    CubeFamily, Dilatation, DomainMask, DomainSpec, NormSpec, PeriodicGrid,
};

use super::{grid, map_items, probe_norm, stream};
use crate::config::ExperimentConfig;
use crate::family::{band_limited, calibrate};
use crate::fit::variation;
use crate::report::{Check, Report, Series};

const GLOBAL: &str =
    "||(I - mu S_Omega)^{-1}||_{W^{1,p}(Omega)} <~ O [ ||O||_{B_{p+eps}} + O^3 (1 + ||mu||^6_{W^{1,p}}) ], O = 1 + ||f(Omega)||_{B_p} + ||Omega||_{B_p}";
const IMAGE: &str = "f(Omega) is a B_p domain with ||f(Omega)||_{B_p} finite";
const WEIGHT: &str = "|J f^{-1}|^{1-p} is an A_p weight on f(Omega)";
const BESOV: &str = "||O||_{B_q} = ||N_O||_{B^{1-1/q}_{q,q}(dO)}";
const COMPRESSED: &str = "dbar f = (I - mu S_Omega)^{-1} mu on Omega when supp mu lies in Omega";

pub const DOMAIN_RADIUS: f64 = 0.9;
pub const PERTURBATIONS: [f64; 3] = [0.0, 0.05, 0.1];
pub const PERTURBATION_MODE: usize = 4;
pub const BOUNDARY_NODES: usize = 256;
const PROBE_BAND: usize = 4;
/// The `eps` of the `B_{p+eps}` term.
const EPS: f64 = 0.5;
/// Dilation factor of the scaling check.
const LAMBDA: f64 = 2.0;

pub fn domain(eps: f64) -> Result<DomainSpec> {
    Ok(DomainSpec::perturbed_disk(
        Complex64::new(0.0, 0.0),
        DOMAIN_RADIUS,
        eps,
        PERTURBATION_MODE,
        BOUNDARY_NODES,
    )?)
}

fn w1p(f: &ComplexField, p: f64, mask: Option<&DomainMask>) -> Result<f64> {
    let spec = NormSpec::new(1, p);
    let spec = match mask {
        Some(m) => spec.on(m.clone()),
        None => spec,
    };
    Ok(sobolev_norm(f, &spec, false)?)
}

/// Solution of `x - mu S_Omega x = h` on `Omega` for a smooth probe `h`,
/// returned as `h + (x - mask h)`: equal to `x` on the domain and free of
/// the jump of `mask h`, so spectral derivatives stay clean up to `dOmega`.
pub fn domain_solution(
    mu: &Dilatation,
    h: &ComplexField,
    mask: &DomainMask,
    tol: f64,
) -> Result<ComplexField> {
    let x = resolvent_domain(mu, h, mask, tol)?;
    Ok(&(&x - &mask.apply(h)?) + h)
}

/// Probed lower bound of the compressed resolvent norm on `W^{1,p}(Omega)`.
pub fn domain_ratio(
    mu: &Dilatation,
    mask: &DomainMask,
    probes: &[ComplexField],
    steps: usize,
    p: f64,
    tol: f64,
) -> Result<f64> {
    probe_norm(
        probes,
        steps,
        |h| domain_solution(mu, h, mask, tol),
        |f| w1p(f, p, Some(mask)),
    )
}

/// Relative L^2 difference of the compressed and global solutions of
/// `x - mu S x = mu` over the unit disk for the radial stretch.
pub fn compressed_vs_global(g: &PeriodicGrid, big_k: f64, tol: f64) -> Result<f64> {
    compressed_vs_global_within(g, big_k, tol, 1.0)
}

/// As [`compressed_vs_global`], over `|z| <= radius`.
pub fn compressed_vs_global_within(
    g: &PeriodicGrid,
    big_k: f64,
    tol: f64,
    radius: f64,
) -> Result<f64> {
    let mu = Dilatation::radial_stretch(g, big_k)?;
    let mask = domain_mask(&DomainSpec::disk(Complex64::new(0.0, 0.0), 1.0, 64)?, g)?;
    let local = resolvent_domain(&mu, mu.field(), &mask, tol)?;
    let global = resolvent(&mu, mu.field(), tol)?;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..g.len() {
        if g.point_at(i).norm() <= radius {
            num += (local.values()[i] - global.values()[i]).norm_sqr();
            den += global.values()[i].norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Debug)]
struct Row {
    eps: f64,
    size: f64,
    ratio: f64,
    mu_w1p: f64,
    bp_domain: f64,
    bp_image: f64,
    bp_image_eps: f64,
    weight_char: f64,
}

impl Row {
    fn big_o(&self) -> f64 {
        1.0 + self.bp_image + self.bp_domain
    }

    fn shape(&self) -> f64 {
        let o = self.big_o();
        o * (self.bp_image_eps + o.powi(3) * (1.0 + self.mu_w1p.powi(6)))
    }
}

pub fn run_domain_suite(config: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(config);
    let tol = config.tolerances.solver;
    let g = grid(config.grid.n, config.grid.side)?;
    let p = config.exponents.p[0];
    let region = grid(128, 2.0)?;

    let mut rng = stream(config.seed, 2_000);
    let probes: Vec<ComplexField> = (0..config.probes)
        .map(|_| band_limited(&g, PROBE_BAND, &mut rng))
        .collect();

    let mut dilatations = vec![(0.0, Dilatation::zero(&g))];
    for &size in &config.family.sizes {
        let m = calibrate(&g, size, config.family.amplitude, config.family.radius)?;
        dilatations.push((m.size, m.mu));
    }
    let mut jobs = Vec::new();
    for &eps in &PERTURBATIONS {
        for (size, mu) in &dilatations {
            jobs.push((eps, *size, mu.clone()));
        }
    }
    let rows = map_items(config.parallel, &jobs, |(eps, size, mu)| {
        let omega = domain(*eps)?;
        let mask = domain_mask(&omega, &g)?;
        let steps = if *size == 0.0 { 0 } else { config.power_steps };
        let ratio = domain_ratio(mu, &mask, &probes, steps, p, tol)?;
        let sol = principal_solution(mu, tol)?;
        let image = map_curve(&sol, &omega.curve())?;
        let w = inverse_jacobian_weight(&sol, 1.0 - p, &region)?;
        let weight_char =
            ap_characteristic(&w, p, &CubeFamily::centered(&region, 64)?.with_shifts())?
                .characteristic;
        Ok(Row {
            eps: *eps,
            size: *size,
            ratio,
            mu_w1p: w1p(mu.field(), p, None)?,
            bp_domain: bp_norm(&omega, p)?,
            bp_image: bp_norm_of_curve(&image, p)?,
            bp_image_eps: bp_norm_of_curve(&image, p + EPS)?,
            weight_char,
        })
    })?;

    let mut table = Series::new(
        "comparison",
        GLOBAL,
        &[
            "eps",
            "L",
            "ratio",
            "mu_w1p",
            "bp_domain",
            "bp_image",
            "bp_image_eps",
            "big_o",
            "shape",
            "fitted_c",
            "weight_ap",
        ],
    );
    for r in &rows {
        table.push(vec![
            r.eps,
            r.size,
            r.ratio,
            r.mu_w1p,
            r.bp_domain,
            r.bp_image,
            r.bp_image_eps,
            r.big_o(),
            r.shape(),
            r.ratio / r.shape(),
            r.weight_char,
        ]);
    }
    report.add_series(table);

    let zero: Vec<&Row> = rows.iter().filter(|r| r.size == 0.0).collect();
    let zero_dev = zero
        .iter()
        .map(|r| (r.ratio - 1.0).abs())
        .fold(0.0, f64::max);
    report.check(Check::at_most("zero_mu_ratio", GLOBAL, zero_dev, 0.0));
    let unchanged = zero
        .iter()
        .map(|r| (r.bp_image - r.bp_domain).abs() / r.bp_domain)
        .fold(0.0, f64::max);
    report.check(Check::at_most("zero_mu_image", IMAGE, unchanged, 1e-12));
    report.check(Check::holds(
        "image_finite",
        IMAGE,
        rows.iter().all(|r| r.bp_image.is_finite()),
    ));
    report.check(Check::holds(
        "weight_finite",
        WEIGHT,
        rows.iter()
            .all(|r| r.weight_char.is_finite() && r.weight_char >= 1.0 - 1e-12),
    ));
    // The family is the dilatation family on each domain; the domain enters
    // the shape through O alone.
    let constants: Vec<f64> = rows.iter().map(|r| r.ratio / r.shape()).collect();
    let per_domain = PERTURBATIONS
        .iter()
        .map(|&eps| {
            let c: Vec<f64> = rows
                .iter()
                .filter(|r| r.eps == eps)
                .map(|r| r.ratio / r.shape())
                .collect();
            variation(&c)
        })
        .fold(0.0, f64::max);
    report.check(
        Check::at_most("fitted_constant", GLOBAL, per_domain, config.tolerances.variation).with_note(format!(
            "max/min of ratio / bound shape over the dilatation family, worst domain; {:.3} over all domains",
            variation(&constants)
        )),
    );
    let monotone = PERTURBATIONS.windows(2).all(|w| {
        let a = zero.iter().find(|r| r.eps == w[0]).map(|r| r.bp_domain);
        let b = zero.iter().find(|r| r.eps == w[1]).map(|r| r.bp_domain);
        matches!((a, b), (Some(a), Some(b)) if b > a)
    });
    report.check(Check::holds("bp_monotone_in_eps", BESOV, monotone));

    // Boundary Besov geometry.
    let mut besov = Series::new(
        "besov",
        BESOV,
        &[
            "q",
            "disk",
            "disk_exact",
            "dilation_exponent",
            "ellipse",
            "ellipse_fine",
        ],
    );
    for &q in &config.exponents.q {
        let disk = bp_norm(
            &DomainSpec::disk(Complex64::new(0.0, 0.0), 1.0, BOUNDARY_NODES)?,
            q,
        )?;
        let exact = (4.0 * PI * PI).powf(1.0 / q);
        let ellipse = DomainSpec::ellipse(Complex64::new(0.0, 0.0), 2.0, 1.0, BOUNDARY_NODES)?;
        let e = bp_norm(&ellipse, q)?;
        let e_fine = bp_norm(&ellipse.with_nodes(4 * BOUNDARY_NODES)?, q)?;
        let exponent = (bp_norm(&ellipse.dilated(LAMBDA), q)? / e).ln() / LAMBDA.ln();
        besov.push(vec![q, disk, exact, exponent, e, e_fine]);
        report.check(Check::at_most(
            &format!("disk_q{q}"),
            BESOV,
            (disk - exact).abs() / exact,
            1e-6,
        ));
        report.check(
            Check::at_most(
                &format!("dilation_q{q}"),
                BESOV,
                (exponent - 2.0 / q).abs(),
                1e-8,
            )
            .with_note(format!(
                "measured exponent {exponent:.10}, asserted 2/q = {:.10}",
                2.0 / q
            )),
        );
        report.check(Check::at_most(
            &format!("ellipse_q{q}"),
            BESOV,
            (e - e_fine).abs() / e_fine,
            1e-2,
        ));
    }
    report.add_series(besov);

    if let Some(&n) = config.grid.refinement.last() {
        let fine = grid(n, config.grid.side)?;
        let err = compressed_vs_global(&fine, 2.0, tol)?;
        let inner = compressed_vs_global_within(&fine, 2.0, tol, 0.9)?;
        let mut s = Series::new(
            "compressed_vs_global",
            COMPRESSED,
            &["n", "relative_error", "relative_error_r09"],
        );
        s.push(vec![n as f64, err, inner]);
        report.add_series(s);
        report.check(
            Check::at_most(
                "compressed_vs_global",
                COMPRESSED,
                err,
                config.tolerances.oracle,
            )
            .with_note(format!("radial stretch K = 2 on the unit disk, {n}^2 grid")),
        );
    }
    Ok(report)
}
