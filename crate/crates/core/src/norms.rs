//! Weighted Sobolev norms on grid regions, the Dini integral of a sampled
//! function on `[0, 1]`, and the boundary Besov norm of a function on a
//! closed curve.

use std::collections::VecDeque;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::domains::BoundaryCurve;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, RealField};
use crate::operators::DomainMask;

#[derive(Clone, Debug)]
pub enum Region {
    Full,
    Mask(DomainMask),
}

/// Order, integrability exponent, region and optional weight of a Sobolev norm.
#[derive(Clone, Debug)]
pub struct NormSpec {
    pub order: usize,
    pub p: f64,
    pub region: Region,
    pub weight: Option<RealField>,
}

impl NormSpec {
    pub fn new(order: usize, p: f64) -> Self {
        Self {
            order,
            p,
            region: Region::Full,
            weight: None,
        }
    }

    pub fn on(mut self, mask: DomainMask) -> Self {
        self.region = Region::Mask(mask);
        self
    }

    pub fn weighted(mut self, weight: RealField) -> Self {
        self.weight = Some(weight);
        self
    }
}

/// `d^a dbar^b f` through a single spectral multiplier.
pub fn mixed_derivative(f: &ComplexField, a: usize, b: usize) -> ComplexField {
    if a + b == 0 {
        return f.clone();
    }
    let g = f.grid();
    let half_i = Complex64::new(0.0, 0.5);
    let values = g.apply_multiplier(f.values(), |xi, j, k| {
        if g.is_nyquist(j) || g.is_nyquist(k) {
            return Complex64::new(0.0, 0.0);
        }
        (half_i * xi.conj()).powu(a as u32) * (half_i * xi).powu(b as u32)
    });
    ComplexField::from_raw(g, values)
}

/// Sum over multi-indices `(a, b)` with `a + b = j` of
/// `|| d^a dbar^b f * w^{1/p} ||_{L^p(region)}`, for `j = order` only when
/// `homogeneous`, else for every `j <= order`.
///
/// Integrals are midpoint sums; mask coverage enters as a per-cell factor.
pub fn sobolev_norm(f: &ComplexField, spec: &NormSpec, homogeneous: bool) -> Result<f64> {
    let p = spec.p;
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent p = {p} must be finite and >= 1"
        )));
    }
    let grid = f.grid();
    let coverage = match &spec.region {
        Region::Full => None,
        Region::Mask(mask) => {
            if mask.grid() != grid {
                return Err(Error::GridMismatch {
                    left: grid.to_string(),
                    right: mask.grid().to_string(),
                });
            }
            Some(mask.coverage().values())
        }
    };
    let weight = match &spec.weight {
        None => None,
        Some(w) => {
            if w.grid() != grid {
                return Err(Error::GridMismatch {
                    left: grid.to_string(),
                    right: w.grid().to_string(),
                });
            }
            for (i, &v) in w.values().iter().enumerate() {
                let active = coverage.is_none_or(|c| c[i] > 0.0);
                if active && !(v > 0.0 && v.is_finite()) {
                    return Err(Error::NonPositiveWeight { index: i, value: v });
                }
            }
            Some(w.values())
        }
    };
    let lowest = if homogeneous { spec.order } else { 0 };
    let mut total = 0.0;
    for order in lowest..=spec.order {
        for a in (0..=order).rev() {
            let d = mixed_derivative(f, a, order - a);
            let mut acc = 0.0;
            for (i, v) in d.values().iter().enumerate() {
                let mut term = v.norm().powf(p);
                if let Some(w) = weight {
                    term *= w[i];
                }
                if let Some(c) = coverage {
                    term *= c[i];
                }
                acc += term;
            }
            total += (acc * grid.cell_area()).powf(1.0 / p);
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiniNorm {
    /// Log-trapezoid integral of the modulus over `[cutoff, 1]`.
    pub value: f64,
    /// Modulus at the cutoff; bounds the omitted `[0, cutoff]` part for the
    /// piecewise-linear interpolant of the samples.
    pub error_bar: f64,
    pub cutoff: f64,
}

const LEVELS_PER_OCTAVE: f64 = 8.0;

/// Largest oscillation of `samples` over windows of `width + 1` consecutive
/// points.
fn window_oscillation(samples: &[f64], width: usize) -> f64 {
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best = 0.0f64;
    for (i, &v) in samples.iter().enumerate() {
        while maxq.back().is_some_and(|&b| samples[b] <= v) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&b| samples[b] >= v) {
            minq.pop_back();
        }
        minq.push_back(i);
        let start = i.saturating_sub(width);
        while maxq.front().is_some_and(|&f| f < start) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&f| f < start) {
            minq.pop_front();
        }
        if i >= width {
            best = best.max(samples[maxq[0]] - samples[minq[0]]);
        }
    }
    best
}

/// Dini integral `int_0^1 omega(t) dt / t` of samples `f(i / (m - 1))`.
///
/// The modulus is evaluated at integer window widths spaced eight per octave
/// between `1 / (m - 1)` and `1`.
pub fn dini_norm(samples: &[f64]) -> DiniNorm {
    let m = samples.len();
    assert!(m >= 2, "need at least two samples");
    let span = m - 1;
    let mut widths = Vec::new();
    let mut level = 0.0f64;
    loop {
        let w = (2f64.powf(level / LEVELS_PER_OCTAVE)).round() as usize;
        if w >= span {
            break;
        }
        if widths.last() != Some(&w) {
            widths.push(w);
        }
        level += 1.0;
    }
    widths.push(span);
    let moduli: Vec<f64> = widths
        .par_iter()
        .map(|&w| window_oscillation(samples, w))
        .collect();
    let mut value = 0.0;
    for i in 1..widths.len() {
        let du = (widths[i] as f64 / widths[i - 1] as f64).ln();
        value += 0.5 * (moduli[i] + moduli[i - 1]) * du;
    }
    DiniNorm {
        value,
        error_bar: moduli[0],
        cutoff: 1.0 / span as f64,
    }
}

/// Derivative in the curve parameter of periodic samples, spectrally.
fn parameter_derivative(values: &[Complex64]) -> Vec<Complex64> {
    let m = values.len();
    let mut planner = FftPlanner::new();
    let mut buf = values.to_vec();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = if 2 * k < m {
            k as f64
        } else if 2 * k == m {
            0.0
        } else {
            k as f64 - m as f64
        };
        *c *= Complex64::new(0.0, freq / m as f64);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf
}

/// `(sum_i sum_j |f_i - f_j|^q / |z_i - z_j|^q ds_i ds_j)^{1/q}` over the
/// curve nodes.
///
/// Diagonal terms take the limit `|df/ds|^q ds_i^2`, with `df/ds` from a
/// spectral derivative along the curve.
pub fn besov_boundary_norm(curve: &BoundaryCurve, f: &[Complex64], q: f64) -> Result<f64> {
    if !(q.is_finite() && q > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent q = {q} must exceed 2"
        )));
    }
    if f.len() != curve.len() {
        return Err(Error::InvalidArgument(format!(
            "{} boundary values for {} nodes",
            f.len(),
            curve.len()
        )));
    }
    let ds = curve.arc_weights();
    let df = parameter_derivative(f);
    let nodes = &curve.nodes;
    let rows: Vec<Result<f64>> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut row = 0.0;
            for j in 0..nodes.len() {
                if i == j {
                    let slope = df[i].norm() / curve.tangents[i].norm();
                    row += slope.powf(q) * ds[i];
                    continue;
                }
                let dist = (nodes[i] - nodes[j]).norm();
                if dist == 0.0 {
                    return Err(Error::DegenerateBoundary {
                        i: i.min(j),
                        j: i.max(j),
                    });
                }
                row += ((f[i] - f[j]).norm() / dist).powf(q) * ds[j];
            }
            Ok(row * ds[i])
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total.powf(1.0 / q))
}
