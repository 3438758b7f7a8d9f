//! Acceptance criteria 1-9. Each test prints its sub-checks and one
//! `PASS`/`FAIL` line for the criterion, then asserts it.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use ::beltrami::{
    ap_characteristic, bp_norm, principal_solution, resolvent_run, Complex64, CubeFamily,
    DomainSpec, PeriodicGrid, RealField,
};
use harness::config::{ExperimentConfig, Suite};
use harness::family::{random_dilatation, windowed_noise};
use harness::report::Report;
use harness::suites;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Criterion {
    number: u32,
    title: &'static str,
    lines: Vec<String>,
    passed: bool,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Self {
            number,
            title,
            lines: Vec::new(),
            passed: true,
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.passed &= ok;
        self.lines.push(format!(
            "  {} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        ));
    }

    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value <= bound, format!("{value:.4e} <= {bound:.1e}"));
    }

    fn report_checks(&mut self, report: &Report, names: &[&str]) {
        for name in names {
            let check = report
                .find(name)
                .unwrap_or_else(|| panic!("report has no check {name}"));
            self.passed &= check.passed;
            self.lines.push(format!("  {}", check.line()));
        }
    }

    fn finish(self) {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut out = format!("\n{status} criterion {}: {}\n", self.number, self.title);
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        // Written past the test harness's capture so passing criteria show too.
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(out.as_bytes()).unwrap();
        stdout.flush().unwrap();
        assert!(self.passed, "criterion {} failed", self.number);
    }
}

#[test]
fn criterion_1_spectral_identities() {
    let mut cr = Criterion::new(1, "spectral identities on 256^2, L = 16");
    let config = ExperimentConfig::defaults(Suite::Identity);
    assert_eq!((config.grid.n, config.grid.side), (256, 16.0));
    let start = Instant::now();
    let report = suites::run(&config).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    cr.report_checks(
        &report,
        &[
            "twine",
            "d_cauchy",
            "isometry",
            "dbar_cauchy",
            "cauchy_dbar",
            "refinement_nonincreasing",
        ],
    );
    cr.at_most("runtime_seconds", elapsed, 5.0);
    cr.finish();
}

#[test]
fn criterion_2_radial_stretch_oracle() {
    let mut cr = Criterion::new(2, "radial stretch K = 2 against z|z|^(-1/2), 512^2");
    let g = PeriodicGrid::new(512, 4.0).unwrap();
    let mu = ::beltrami::Dilatation::radial_stretch(&g, 2.0).unwrap();
    let rho = resolvent_run(&mu, mu.field(), 1e-10).unwrap().solution;
    let sol = principal_solution(&mu, 1e-10).unwrap();
    // f = z |z|^s with s = -1/2: dbar f = (s/2) |z|^s z / conj z, J f = (1 + s) |z|^(2s).
    let s = -0.5;
    let (mut num, mut den, mut jnum, mut jden) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..g.len() {
        let z = g.point_at(i);
        let r = z.norm();
        if r <= 0.9 && r > 0.0 {
            let exact = 0.5 * s * r.powf(s) * z / z.conj();
            num += (rho.values()[i] - exact).norm_sqr();
            den += exact.norm_sqr();
        } else if r == 0.0 {
            num += rho.values()[i].norm_sqr();
        }
        if (0.1..=0.9).contains(&r) {
            let exact = (1.0 + s) * r.powf(2.0 * s);
            jnum += (sol.jacobian().values()[i] - exact).powi(2);
            jden += exact * exact;
        }
    }
    cr.at_most("rho_relative_l2_on_r<=0.9", (num / den).sqrt(), 1e-3);
    cr.at_most(
        "jacobian_relative_l2_on_0.1<=r<=0.9",
        (jnum / jden).sqrt(),
        1e-3,
    );
    cr.finish();
}

#[test]
fn criterion_3_counterexample() {
    let mut cr = Criterion::new(
        3,
        "z(1 - log|z|) solves the Beltrami equation but is not W^(2,2)",
    );
    let config = ExperimentConfig::defaults(Suite::Counterexample);
    let report = suites::run(&config).unwrap();
    cr.report_checks(
        &report,
        &[
            "analytic_residual",
            "mu_below_one",
            "spectral_residual",
            "diverges_r2",
            "stabilizes_r1.5",
        ],
    );
    // The quadrature behind the series against the closed form
    // 2 pi (3/2)^r int_eps^0.9 rho^(1-r) d rho.
    let series = report.series("second_derivative").unwrap();
    let mut worst = 0.0f64;
    for row in &series.rows {
        let (r, eps, integral) = (row[0], row[1], row[3]);
        let exact = if r == 2.0 {
            2.0 * PI * 2.25 * (0.9 / eps).ln()
        } else {
            2.0 * PI * 1.5f64.powf(r) * (0.9f64.powf(2.0 - r) - eps.powf(2.0 - r)) / (2.0 - r)
        };
        worst = worst.max((integral - exact).abs() / exact);
    }
    cr.at_most("series_vs_closed_form", worst, 1e-3);
    cr.finish();
}

#[test]
fn criterion_4_resolvent_contraction() {
    let mut cr = Criterion::new(4, "Neumann contraction on 10 random pairs at k = 0.5");
    let g = PeriodicGrid::new(128, 4.0).unwrap();
    let tol = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut max_it, mut worst_bound, mut invariants) = (0usize, f64::NEG_INFINITY, true);
    for _ in 0..10 {
        let mu = random_dilatation(&g, 0.5, 1.0, &mut rng).unwrap();
        let h = windowed_noise(&g, 5, 1.5, &mut rng);
        let run = resolvent_run(&mu, &h, tol).unwrap();
        max_it = max_it.max(run.iterations);
        let bound = h.l2_norm() / (1.0 - mu.k()) + tol * h.l2_norm();
        worst_bound = worst_bound.max(run.solution.l2_norm() - bound);
        let sol = principal_solution(&mu, tol).unwrap();
        let inv = sol.invariants();
        invariants &= inv.holds() && inv.min_jacobian > 0.0;
    }
    cr.at_most("iterations", max_it as f64, 36.0);
    cr.at_most("norm_minus_bound", worst_bound, 0.0);
    cr.check(
        "solution_invariants",
        invariants,
        "distortion, positive Jacobian and residual on every solution".into(),
    );
    cr.finish();
}

/// Brute-force `sup_Q <w>_Q <w^(-1/(p-1))>_Q^(p-1)` over dyadic and
/// third-shifted cubes, each cell sampled `sub x sub` times.
fn brute_force_ap(n: usize, side: f64, p: f64, sub: usize, w: impl Fn(Complex64) -> f64) -> f64 {
    let h = side / n as f64;
    let origin = -0.5 * side - 0.5 * h;
    let m = n * sub;
    let fine_h = h / sub as f64;
    let samples: Vec<f64> = (0..m * m)
        .map(|i| {
            let (j, k) = (i % m, i / m);
            w(c(
                origin + (j as f64 + 0.5) * fine_h,
                origin + (k as f64 + 0.5) * fine_h,
            ))
        })
        .collect();
    let mut best = 0.0f64;
    let mut cells = n;
    while cells >= 4 {
        for off in [
            0,
            (n as f64 / 3.0).round() as usize,
            (2.0 * n as f64 / 3.0).round() as usize,
        ] {
            let shift = off % cells;
            let mut starts = Vec::new();
            let mut s = shift;
            while s + cells <= n {
                starts.push(s);
                s += cells;
            }
            for &ky in &starts {
                for &kx in &starts {
                    let (mut a, mut b) = (0.0, 0.0);
                    for y in ky * sub..(ky + cells) * sub {
                        for x in kx * sub..(kx + cells) * sub {
                            let v = samples[y * m + x];
                            a += v;
                            b += v.powf(-1.0 / (p - 1.0));
                        }
                    }
                    let count = (cells * sub * cells * sub) as f64;
                    best = best.max((a / count) * (b / count).powf(p - 1.0));
                }
            }
        }
        cells /= 2;
    }
    best
}

#[test]
fn criterion_5_ap_estimator() {
    let mut cr = Criterion::new(
        5,
        "A_p estimator against brute force, constants and duality",
    );
    let (n, side) = (128, 2.0);
    let g = PeriodicGrid::new(n, side).unwrap();
    let h = g.spacing();
    let family = CubeFamily::full(&g).with_shifts();
    for alpha in [-1.0, 1.0] {
        let power = move |z: Complex64| z.norm().powf(alpha);
        // Cell averages from 4 x 4 interior samples keep the origin cell finite.
        let w = RealField::from_fn(&g, |z| {
            let mut acc = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    let off = c((a as f64 + 0.5) / 4.0 - 0.5, (b as f64 + 0.5) / 4.0 - 0.5) * h;
                    acc += power(z + off);
                }
            }
            acc / 16.0
        })
        .unwrap();
        let estimate = ap_characteristic(&w, 2.0, &family).unwrap().characteristic;
        let oracle = brute_force_ap(n, side, 2.0, 4, power);
        cr.at_most(
            &format!("|z|^{alpha}_relative_to_oracle"),
            (estimate - oracle).abs() / oracle,
            0.05,
        );
    }
    for p in [1.5, 2.0, 3.0] {
        let w = RealField::constant(&g, 2.7);
        let ch = ap_characteristic(&w, p, &family).unwrap().characteristic;
        cr.at_most(&format!("constant_p{p}"), (ch - 1.0).abs(), 1e-9);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = RealField::new(
        &g,
        (0..g.len())
            .map(|_| rng.gen_range(-1.5..1.5f64).exp())
            .collect(),
    )
    .unwrap();
    for p in [1.5, 3.0] {
        let q = p / (p - 1.0);
        let lhs = ap_characteristic(&w, p, &family)
            .unwrap()
            .characteristic
            .powf(1.0 / (p - 1.0));
        let dual = w.map(|v| v.powf(-1.0 / (p - 1.0)));
        let rhs = ap_characteristic(&dual, q, &family).unwrap().characteristic;
        cr.at_most(&format!("duality_p{p}"), (lhs - rhs).abs() / lhs, 1e-9);
    }
    cr.finish();
}

#[test]
fn criterion_6_weight_scaling() {
    let mut cr = Criterion::new(
        6,
        "A_3 characteristic of |Jf^-1|^(-1/2) grows at most exponentially in L^2",
    );
    let config = ExperimentConfig::defaults(Suite::Weights);
    let report = suites::run(&config).unwrap();
    let sizes: Vec<f64> = config.family.sizes.iter().map(|s| s * s).collect();
    assert_eq!(sizes, vec![0.25, 1.0, 4.0]);
    cr.report_checks(
        &report,
        &[
            "zero_mu_characteristic",
            "growth_slope_p3",
            "growth_exponent_p3",
            "symmetry_p3",
            "change_of_variables",
        ],
    );
    cr.finish();
}

#[test]
fn criterion_7_caccioppoli() {
    let mut cr = Criterion::new(
        7,
        "Caccioppoli ratios finite and stable from 256^2 to 512^2",
    );
    let config = ExperimentConfig::defaults(Suite::Caccioppoli);
    let report = suites::run(&config).unwrap();
    cr.report_checks(
        &report,
        &["finite", "zero_mu_finite", "drift_first", "drift_second"],
    );
    cr.finish();
}

/// `(int int |N(t) - N(s)|^q / |g(t) - g(s)|^q |g'(t)| |g'(s)| dt ds)^(1/q)`
/// for the ellipse `g(t) = (a cos t, b sin t)`, by a midpoint rule whose two
/// node sets are staggered by half a step so no pair coincides.
fn ellipse_oracle(a: f64, b: f64, q: f64, m: usize) -> f64 {
    let dt = 2.0 * PI / m as f64;
    let pts: Vec<(Complex64, Complex64, f64)> = (0..2 * m)
        .map(|i| {
            let t = 0.5 * dt * i as f64;
            let gamma = c(a * t.cos(), b * t.sin());
            let tangent = c(-a * t.sin(), b * t.cos());
            let speed = tangent.norm();
            let normal = c(tangent.im, -tangent.re) / speed;
            (gamma, normal, speed)
        })
        .collect();
    let mut total = 0.0;
    for i in (0..2 * m).step_by(2) {
        for j in (1..2 * m).step_by(2) {
            let (gi, ni, si) = pts[i];
            let (gj, nj, sj) = pts[j];
            total += ((ni - nj).norm() / (gi - gj).norm()).powf(q) * si * sj;
        }
    }
    (total * dt * dt).powf(1.0 / q)
}

#[test]
fn criterion_8_besov_geometry() {
    let mut cr = Criterion::new(
        8,
        "boundary Besov norm: disk value, dilation exponent, ellipse oracle",
    );
    let q = 3.0;
    let o = c(0.0, 0.0);
    let disk = bp_norm(&DomainSpec::disk(o, 1.0, 256).unwrap(), q).unwrap();
    let exact = (4.0 * PI * PI).powf(1.0 / q);
    cr.at_most("disk_relative", (disk - exact).abs() / exact, 1e-6);

    let ellipse = DomainSpec::ellipse(o, 2.0, 1.0, 256).unwrap();
    let base = bp_norm(&ellipse, q).unwrap();
    let lambda = 2.0;
    let exponent = (bp_norm(&ellipse.dilated(lambda), q).unwrap() / base).ln() / lambda.ln();
    cr.check(
        "dilation_exponent_2/q",
        (exponent - 2.0 / q).abs() <= 1e-8,
        format!("measured {exponent:.10}, asserted {:.10}", 2.0 / q),
    );
    let oracle = ellipse_oracle(2.0, 1.0, q, 4096);
    cr.at_most("ellipse_vs_oracle", (base - oracle).abs() / oracle, 1e-2);
    cr.finish();
}

#[test]
fn criterion_9_domain_suite() {
    let mut cr = Criterion::new(9, "compressed resolvent on domains");
    let config = ExperimentConfig::defaults(Suite::Domains);
    let report = suites::run(&config).unwrap();
    cr.report_checks(
        &report,
        &[
            "compressed_vs_global",
            "zero_mu_ratio",
            "zero_mu_image",
            "fitted_constant",
        ],
    );
    cr.finish();
}
