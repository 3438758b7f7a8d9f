//! Star-shaped domains given by a Fourier series radial function, their
//! boundary curves and normals, sub-cell coverage masks, and the boundary
//! Besov characteristic of the normal.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, RealField};
use crate::norms::{besov_boundary_norm, dini_norm, DiniNorm};
use crate::operators::DomainMask;

pub const MAX_MODES: usize = 64;
const SUBCELLS: usize = 4;

/// `z(theta) = center + r(theta) e^{i theta}` with
/// `r(theta) = a_0 + sum_k (a_k cos k theta + b_k sin k theta)`.
///
/// `fourier_coeffs[k] = [a_k, b_k]`; `b_0` must be zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub center: Complex64,
    pub fourier_coeffs: Vec<[f64; 2]>,
    pub m: usize,
}

impl DomainSpec {
    pub fn new(center: Complex64, fourier_coeffs: Vec<[f64; 2]>, m: usize) -> Result<Self> {
        let spec = Self {
            center,
            fourier_coeffs,
            m,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fourier_coeffs.is_empty() || self.fourier_coeffs.len() > MAX_MODES {
            return Err(Error::InvalidArgument(format!(
                "radial function needs 1..={MAX_MODES} modes, got {}",
                self.fourier_coeffs.len()
            )));
        }
        if self.fourier_coeffs[0][1] != 0.0 {
            return Err(Error::InvalidArgument(
                "constant mode has a sine part".into(),
            ));
        }
        if self.m < 8 {
            return Err(Error::InvalidArgument(format!(
                "need at least 8 boundary nodes, got {}",
                self.m
            )));
        }
        let all_finite = self.fourier_coeffs.iter().flatten().all(|v| v.is_finite());
        if !all_finite || !(self.center.re.is_finite() && self.center.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite domain parameters".into(),
            ));
        }
        let r_min = self.radius_bounds().0;
        if r_min <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "radial function reaches {r_min} <= 0"
            )));
        }
        Ok(())
    }

    pub fn disk(center: Complex64, radius: f64, m: usize) -> Result<Self> {
        Self::new(center, vec![[radius, 0.0]], m)
    }

    /// Axis-aligned ellipse with semi-axes `a` (along x) and `b`, expanded in
    /// the first [`MAX_MODES`] Fourier modes of its polar radius.
    pub fn ellipse(center: Complex64, a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipse semi-axes {a}, {b} must be positive"
            )));
        }
        let samples = 1024;
        let r = |t: f64| a * b / ((b * t.cos()).powi(2) + (a * t.sin()).powi(2)).sqrt();
        let values: Vec<f64> = (0..samples)
            .map(|i| r(TAU * i as f64 / samples as f64))
            .collect();
        let coeffs = (0..MAX_MODES)
            .map(|k| {
                let (mut ca, mut cb) = (0.0, 0.0);
                for (i, v) in values.iter().enumerate() {
                    let t = TAU * (k * i) as f64 / samples as f64;
                    ca += v * t.cos();
                    cb += v * t.sin();
                }
                let scale = if k == 0 { 1.0 } else { 2.0 } / samples as f64;
                let clean = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x * scale };
                [clean(ca), if k == 0 { 0.0 } else { clean(cb) }]
            })
            .collect();
        Self::new(center, coeffs, m)
    }

    /// Disk perturbed by `eps cos(mode theta)`.
    pub fn perturbed_disk(
        center: Complex64,
        radius: f64,
        eps: f64,
        mode: usize,
        m: usize,
    ) -> Result<Self> {
        let mut coeffs = vec![[0.0, 0.0]; mode + 1];
        coeffs[0][0] = radius;
        coeffs[mode][0] += eps;
        Self::new(center, coeffs, m)
    }

    pub fn with_nodes(&self, m: usize) -> Result<Self> {
        Self::new(self.center, self.fourier_coeffs.clone(), m)
    }

    /// Rotation about the center by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let coeffs = self
            .fourier_coeffs
            .iter()
            .enumerate()
            .map(|(k, &[a, b])| {
                let (s, c) = (k as f64 * angle).sin_cos();
                [a * c - b * s, a * s + b * c]
            })
            .collect();
        Self {
            center: self.center,
            fourier_coeffs: coeffs,
            m: self.m,
        }
    }

    pub fn translated(&self, by: Complex64) -> Self {
        Self {
            center: self.center + by,
            ..self.clone()
        }
    }

    /// Dilation `z -> center + lambda (z - center)`.
    pub fn dilated(&self, lambda: f64) -> Self {
        let coeffs = self
            .fourier_coeffs
            .iter()
            .map(|&[a, b]| [lambda * a, lambda * b])
            .collect();
        Self {
            center: self.center,
            fourier_coeffs: coeffs,
            m: self.m,
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.fourier_coeffs
            .iter()
            .enumerate()
            .map(|(k, &[a, b])| {
                let (s, c) = (k as f64 * theta).sin_cos();
                a * c + b * s
            })
            .sum()
    }

    pub fn radius_derivative(&self, theta: f64) -> f64 {
        self.fourier_coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &[a, b])| {
                let kf = k as f64;
                let (s, c) = (kf * theta).sin_cos();
                kf * (b * c - a * s)
            })
            .sum()
    }

    pub fn point(&self, theta: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius(theta), theta)
    }

    /// `dz/dtheta = (r' + i r) e^{i theta}`.
    pub fn tangent(&self, theta: f64) -> Complex64 {
        Complex64::new(self.radius_derivative(theta), self.radius(theta))
            * Complex64::from_polar(1.0, theta)
    }

    /// Bounds of `r` on a fine sampling of the circle.
    pub fn radius_bounds(&self) -> (f64, f64) {
        (0..4096)
            .map(|i| self.radius(TAU * i as f64 / 4096.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            })
    }

    /// `z` lies in the closed domain.
    pub fn contains(&self, z: Complex64) -> bool {
        let rel = z - self.center;
        let rho = rel.norm();
        rho == 0.0 || rho <= self.radius(rel.arg())
    }

    /// Boundary sampled at `m` equally spaced parameter values.
    pub fn curve(&self) -> BoundaryCurve {
        let thetas = (0..self.m).map(|i| TAU * i as f64 / self.m as f64);
        let (nodes, tangents) = thetas.map(|t| (self.point(t), self.tangent(t))).unzip();
        BoundaryCurve { nodes, tangents }
    }

    /// Dini integral of the unit tangent direction as a function of
    /// normalized arclength.
    pub fn dini_proxy(&self) -> DiniNorm {
        let fine = self.m.max(1024);
        let curve = self
            .with_nodes(fine)
            .map(|d| d.curve())
            .unwrap_or_else(|_| self.curve());
        let speeds: Vec<f64> = curve.tangents.iter().map(|t| t.norm()).collect();
        let total: f64 = speeds.iter().sum();
        // Angle unwrapped along the curve.
        let mut angles = Vec::with_capacity(fine);
        let mut prev = curve.tangents[0].arg();
        let mut acc = prev;
        angles.push(acc);
        for t in &curve.tangents[1..] {
            let a = t.arg();
            let mut d = a - prev;
            d -= TAU * (d / TAU).round();
            acc += d;
            angles.push(acc);
            prev = a;
        }
        // Resample on a uniform arclength grid.
        let mut arc = Vec::with_capacity(fine);
        let mut s = 0.0;
        for sp in &speeds {
            arc.push(s / total);
            s += sp;
        }
        let m = fine;
        let samples: Vec<f64> = (0..m)
            .map(|i| {
                let target = i as f64 / (m - 1) as f64;
                let idx = arc.partition_point(|&a| a <= target).max(1) - 1;
                if idx + 1 >= arc.len() {
                    let span = 1.0 - arc[idx];
                    let w = if span > 0.0 {
                        (target - arc[idx]) / span
                    } else {
                        0.0
                    };
                    angles[idx] + w * (angles[0] + TAU - angles[idx])
                } else {
                    let w = (target - arc[idx]) / (arc[idx + 1] - arc[idx]);
                    angles[idx] + w * (angles[idx + 1] - angles[idx])
                }
            })
            .collect();
        dini_norm(&samples)
    }
}

/// Closed curve sampled at uniform parameter steps `2 pi / m`, with the
/// parameter derivative at each node.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurve {
    pub nodes: Vec<Complex64>,
    pub tangents: Vec<Complex64>,
}

impl BoundaryCurve {
    pub fn new(nodes: Vec<Complex64>, tangents: Vec<Complex64>) -> Result<Self> {
        if nodes.len() != tangents.len() || nodes.len() < 8 {
            return Err(Error::InvalidArgument(format!(
                "curve needs matching node and tangent lists of length >= 8 (got {} and {})",
                nodes.len(),
                tangents.len()
            )));
        }
        Ok(Self { nodes, tangents })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parameter_step(&self) -> f64 {
        TAU / self.len() as f64
    }

    /// Arclength weight `|z'| dtheta` per node.
    pub fn arc_weights(&self) -> Vec<f64> {
        let dt = self.parameter_step();
        self.tangents.iter().map(|t| t.norm() * dt).collect()
    }

    pub fn length(&self) -> f64 {
        self.arc_weights().iter().sum()
    }

    /// Outward unit normal of a counterclockwise curve.
    pub fn normals(&self) -> Vec<Complex64> {
        self.tangents
            .iter()
            .map(|t| Complex64::new(0.0, -1.0) * t / t.norm())
            .collect()
    }
}

pub fn boundary_normal(domain: &DomainSpec) -> Vec<Complex64> {
    domain.curve().normals()
}

/// Boundary Besov characteristic of the domain: the boundary norm of its
/// outward normal.
pub fn bp_norm(domain: &DomainSpec, q: f64) -> Result<f64> {
    let curve = domain.curve();
    besov_boundary_norm(&curve, &curve.normals(), q)
}

pub fn bp_norm_of_curve(curve: &BoundaryCurve, q: f64) -> Result<f64> {
    besov_boundary_norm(curve, &curve.normals(), q)
}

/// Sub-cell coverage of the closed domain. The domain must fit in the
/// central half of the window.
pub fn domain_mask(domain: &DomainSpec, grid: &PeriodicGrid) -> Result<DomainMask> {
    let quarter = 0.25 * grid.side();
    let slack = 1e-12 * grid.side();
    let (r_min, r_max) = domain.radius_bounds();
    let (mut lo, mut hi) = (
        Complex64::new(f64::INFINITY, f64::INFINITY),
        Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for i in 0..4096 {
        let p = domain.point(TAU * i as f64 / 4096.0);
        lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    if lo.re < -quarter - slack
        || lo.im < -quarter - slack
        || hi.re > quarter + slack
        || hi.im > quarter + slack
    {
        return Err(Error::DomainTooLarge(format!(
            "bounding box [{:.4}, {:.4}] x [{:.4}, {:.4}] exceeds [-{quarter}, {quarter}]^2",
            lo.re, hi.re, lo.im, hi.im
        )));
    }
    let h = grid.spacing();
    let margin = h * std::f64::consts::SQRT_2;
    let coverage = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let z = grid.point_at(i);
            let d = (z - domain.center).norm();
            if d + margin < r_min {
                return 1.0;
            }
            if d - margin > r_max {
                return 0.0;
            }
            let mut inside = 0usize;
            for sy in 0..SUBCELLS {
                for sx in 0..SUBCELLS {
                    let off = |s: usize| ((s as f64 + 0.5) / SUBCELLS as f64 - 0.5) * h;
                    if domain.contains(z + Complex64::new(off(sx), off(sy))) {
                        inside += 1;
                    }
                }
            }
            inside as f64 / (SUBCELLS * SUBCELLS) as f64
        })
        .collect();
    DomainMask::new(RealField::from_raw(grid, coverage), Some(domain.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disk_normal_is_radial_and_unit() {
        let d = DomainSpec::disk(c(0.3, -0.2), 1.5, 64).unwrap();
        for (i, n) in boundary_normal(&d).iter().enumerate() {
            let t = TAU * i as f64 / 64.0;
            assert!((n - Complex64::from_polar(1.0, t)).norm() < 1e-14);
        }
    }

    #[test]
    fn ellipse_normal_matches_implicit_gradient() {
        let (a, b) = (2.0, 1.0);
        let e = DomainSpec::ellipse(c(0.0, 0.0), a, b, 256).unwrap();
        let curve = e.curve();
        for (p, n) in curve.nodes.iter().zip(curve.normals()) {
            assert!((p.re / a).powi(2) + (p.im / b).powi(2) - 1.0 < 1e-12);
            let grad = c(2.0 * p.re / (a * a), 2.0 * p.im / (b * b));
            assert!((n - grad / grad.norm()).norm() < 1e-10);
            assert!((n.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_positive_radius() {
        assert!(DomainSpec::new(c(0.0, 0.0), vec![[0.5, 0.0], [0.6, 0.0]], 64).is_err());
        assert!(DomainSpec::new(c(0.0, 0.0), vec![[1.0, 0.3]], 64).is_err());
        assert!(DomainSpec::new(c(0.0, 0.0), vec![[1.0, 0.0]; 65], 64).is_err());
    }

    #[test]
    fn disk_mask_area() {
        let g = PeriodicGrid::new(256, 8.0).unwrap();
        let mask = domain_mask(&DomainSpec::disk(c(0.0, 0.0), 1.0, 64).unwrap(), &g).unwrap();
        assert!((mask.area() - PI).abs() <= 1e-3, "area {}", mask.area());
        let cov = mask.coverage();
        assert_eq!(cov.values()[g.index(0, 0)], 0.0);
        assert_eq!(cov.values()[g.index(128, 128)], 1.0);
        assert_eq!(cov.values()[g.index(140, 131)], 1.0);
    }

    #[test]
    fn mask_shrinks_with_domain() {
        let g = PeriodicGrid::new(64, 4.0).unwrap();
        let mut last = f64::INFINITY;
        for r in [1.0, 0.8, 0.55, 0.3] {
            let area = domain_mask(&DomainSpec::disk(c(0.0, 0.0), r, 64).unwrap(), &g)
                .unwrap()
                .area();
            assert!(area < last);
            last = area;
        }
    }

    #[test]
    fn too_large_domain_is_rejected() {
        let g = PeriodicGrid::new(64, 4.0).unwrap();
        let d = DomainSpec::disk(c(0.5, 0.0), 1.0, 64).unwrap();
        assert!(matches!(domain_mask(&d, &g), Err(Error::DomainTooLarge(_))));
    }

    #[test]
    fn disk_bp_norm_closed_form() {
        for q in [2.5, 3.0, 4.0, 6.0] {
            let d = DomainSpec::disk(c(0.0, 0.0), 1.0, 512).unwrap();
            let v = bp_norm(&d, q).unwrap();
            let expected = (4.0 * PI * PI).powf(1.0 / q);
            assert!(
                (v - expected).abs() <= 1e-10 * expected,
                "q={q}: {v} vs {expected}"
            );
        }
    }

    #[test]
    fn bp_norm_isometry_invariance() {
        let d = DomainSpec::perturbed_disk(c(0.0, 0.0), 1.0, 0.1, 4, 512).unwrap();
        let base = bp_norm(&d, 3.0).unwrap();
        let moved = bp_norm(&d.rotated(0.3).translated(c(0.7, -1.1)), 3.0).unwrap();
        assert!((moved - base).abs() <= 1e-8 * base);
    }

    #[test]
    fn bp_norm_grows_with_perturbation() {
        let vals: Vec<f64> = [0.0, 0.05, 0.1]
            .iter()
            .map(|&e| {
                bp_norm(
                    &DomainSpec::perturbed_disk(c(0.0, 0.0), 1.0, e, 4, 512).unwrap(),
                    3.0,
                )
                .unwrap()
            })
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2], "{vals:?}");
    }

    #[test]
    fn bp_norm_dilation_power() {
        // The normal is scale free, so the double integral picks up
        // lambda^2 from the arclength measure and lambda^-q from distances.
        let d = DomainSpec::ellipse(c(0.0, 0.0), 2.0, 1.0, 512).unwrap();
        let q = 3.0;
        let lambda = 1.7;
        let ratio = bp_norm(&d.dilated(lambda), q).unwrap() / bp_norm(&d, q).unwrap();
        assert!((ratio.ln() / lambda.ln() - (2.0 / q - 1.0)).abs() <= 1e-8);
    }

    #[test]
    fn spec_json_shape() {
        let d = DomainSpec::disk(c(0.25, -0.5), 1.0, 128).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(
            text,
            r#"{"center":[0.25,-0.5],"fourier_coeffs":[[1.0,0.0]],"m":128}"#
        );
        let back: DomainSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn dini_proxy_of_circle_is_linear_modulus() {
        // Tangent angle grows linearly over 2 pi, so the modulus is 2 pi t.
        let d = DomainSpec::disk(c(0.0, 0.0), 1.0, 1024).unwrap();
        let dini = d.dini_proxy();
        assert!((dini.value - TAU).abs() <= 0.02 * TAU, "{dini:?}");
    }
}
