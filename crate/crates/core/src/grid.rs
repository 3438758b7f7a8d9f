//! Periodic square grids, sampled complex and real fields, the 2-D discrete
//! Fourier transform and spectral Wirtinger derivatives.
//!
//! Samples sit at `z_jk = (-L/2 + j h) + i(-L/2 + k h)` and are stored row
//! major, `index = k * n + j`, so `j` runs along the real axis. The signed
//! frequency of index `j` lies in `(-n/2, n/2]` and the physical frequency is
//! `2 pi j / L`.
//!
//! Derivatives use the Wirtinger convention `d = (d_x - i d_y) / 2` and
//! `dbar = (d_x + i d_y) / 2`. The Nyquist row and column are annihilated by
//! both derivative multipliers.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

struct GridInner {
    n: usize,
    side: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Square periodic sampling lattice. Cloning is cheap; the FFT plans are shared.
#[derive(Clone)]
pub struct PeriodicGrid {
    inner: Arc<GridInner>,
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n && self.inner.side.to_bits() == other.inner.side.to_bits()
    }
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PeriodicGrid({}x{}, L={})",
            self.n(),
            self.n(),
            self.side()
        )
    }
}

impl fmt::Display for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^2 grid on L={}", self.n(), self.side())
    }
}

impl PeriodicGrid {
    /// `n` must be a power of two, at least 16, and `side` positive and finite.
    pub fn new(n: usize, side: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two >= 16"
            )));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "window side {side} must be positive"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                side,
                forward,
                inverse,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn side(&self) -> f64 {
        self.inner.side
    }

    pub fn spacing(&self) -> f64 {
        self.inner.side / self.inner.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Number of samples, `n^2`.
    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, j: usize, k: usize) -> usize {
        k * self.inner.n + j
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.inner.n, index / self.inner.n)
    }

    pub fn point(&self, j: usize, k: usize) -> Complex64 {
        let h = self.spacing();
        let half = 0.5 * self.side();
        Complex64::new(-half + j as f64 * h, -half + k as f64 * h)
    }

    pub fn point_at(&self, index: usize) -> Complex64 {
        let (j, k) = self.coords(index);
        self.point(j, k)
    }

    /// Signed integer frequency of lattice index `j`, in `(-n/2, n/2]`.
    pub fn signed_frequency(&self, j: usize) -> i64 {
        let n = self.inner.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.inner.n / 2
    }

    /// Physical frequency `xi = (2 pi / L)(j + i k)` of spectral index `(j, k)`.
    pub fn frequency(&self, j: usize, k: usize) -> Complex64 {
        let scale = 2.0 * std::f64::consts::PI / self.side();
        Complex64::new(
            scale * self.signed_frequency(j) as f64,
            scale * self.signed_frequency(k) as f64,
        )
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let n = self.inner.n;
        let plan = if forward {
            &self.inner.forward
        } else {
            &self.inner.inverse
        };
        data.par_chunks_mut(n).for_each(|row| plan.process(row));
        let mut columns = transpose(data, n);
        columns.par_chunks_mut(n).for_each(|col| plan.process(col));
        let back = transpose(&columns, n);
        data.copy_from_slice(&back);
    }

    /// Applies a spectral multiplier `m(xi, j, k)` to `values`.
    pub(crate) fn apply_multiplier<M>(&self, values: &[Complex64], multiplier: M) -> Vec<Complex64>
    where
        M: Fn(Complex64, usize, usize) -> Complex64 + Sync,
    {
        let n = self.inner.n;
        let mut data = values.to_vec();
        self.transform(&mut data, true);
        let norm = 1.0 / (n * n) as f64;
        data.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
            for (j, c) in row.iter_mut().enumerate() {
                *c *= multiplier(self.frequency(j, k), j, k) * norm;
            }
        });
        self.transform(&mut data, false);
        data
    }
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    const B: usize = 32;
    for kb in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for k in kb..(kb + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    out[j * n + k] = data[k * n + j];
                }
            }
        }
    }
    out
}

/// Complex samples of a function on a [`PeriodicGrid`].
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: PeriodicGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: &PeriodicGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &PeriodicGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: &PeriodicGrid, c: Complex64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f` at every grid point. Non-finite results are rejected.
    pub fn from_fn<F>(grid: &PeriodicGrid, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(grid.point_at(i)))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.values[self.grid.index(j, k)]
    }

    pub fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        check_grids(&self.grid, &other.grid)
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip_with<F>(&self, other: &ComplexField, f: F) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        self.check_same_grid(other)?;
        Ok(Self::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn abs(&self) -> RealField {
        RealField::from_raw(&self.grid, self.values.iter().map(|v| v.norm()).collect())
    }

    pub fn real(&self) -> RealField {
        RealField::from_raw(&self.grid, self.values.iter().map(|v| v.re).collect())
    }

    /// Pointwise product with a real field.
    pub fn mul_real(&self, w: &RealField) -> Result<Self> {
        check_grids(&self.grid, &w.grid)?;
        Ok(Self::from_raw(
            &self.grid,
            self.values
                .iter()
                .zip(&w.values)
                .map(|(&v, &c)| v * c)
                .collect(),
        ))
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `(sum |f|^2 h^2)^(1/2)` over the whole window.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    /// L2 norm restricted to samples where `keep(z)` holds.
    pub fn l2_norm_where<P: Fn(Complex64) -> bool>(&self, keep: P) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(self.grid.point_at(*i)))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        (s * self.grid.cell_area()).sqrt()
    }

    /// Bilinear pairing `<f, g> = sum f g h^2` (no conjugation).
    pub fn pairing(&self, other: &ComplexField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<Complex64>()
            * self.grid.cell_area())
    }

    /// Relative L2 distance `|self - other| / |other|`.
    pub fn relative_l2_error(&self, reference: &ComplexField) -> Result<f64> {
        self.check_same_grid(reference)?;
        let num: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = reference.values.iter().map(|b| b.norm_sqr()).sum();
        Ok((num / den).sqrt())
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

fn check_grids(a: &PeriodicGrid, b: &PeriodicGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            left: a.to_string(),
            right: b.to_string(),
        })
    }
}

macro_rules! field_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ComplexField> for &ComplexField {
            type Output = ComplexField;
            /// Panics if the grids differ; use [`ComplexField::zip_with`] for a fallible version.
            fn $method(self, rhs: &ComplexField) -> ComplexField {
                assert!(self.grid == rhs.grid, "fields on different grids");
                ComplexField::from_raw(
                    &self.grid,
                    self.values.iter().zip(&rhs.values).map(|(&a, &b)| a $op b).collect(),
                )
            }
        }
    };
}

field_binop!(Add, add, +);
field_binop!(Sub, sub, -);
field_binop!(Mul, mul, *);

impl Add<Complex64> for &ComplexField {
    type Output = ComplexField;
    fn add(self, c: Complex64) -> ComplexField {
        self.map(|v| v + c)
    }
}

impl Mul<Complex64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, c: Complex64) -> ComplexField {
        self.scale(c)
    }
}

impl Neg for &ComplexField {
    type Output = ComplexField;
    fn neg(self) -> ComplexField {
        self.map(|v| -v)
    }
}

/// Real samples on a grid: Jacobians, weights, coverage fractions.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &PeriodicGrid, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    pub fn from_fn<F>(grid: &PeriodicGrid, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> f64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(grid.point_at(i)))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::from_raw(
            &self.grid,
            self.values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        )
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Unnormalized 2-D DFT coefficients of a field, in the same row-major layout.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: &PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a grid of {} points",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Physical-space energy `sum |f|^2 h^2` computed from the coefficients.
    pub fn energy(&self) -> f64 {
        let n2 = self.grid.len() as f64;
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_area() / n2
    }
}

pub fn fourier_forward(f: &ComplexField) -> Spectrum {
    let mut coeffs = f.values.clone();
    f.grid.transform(&mut coeffs, true);
    Spectrum {
        grid: f.grid.clone(),
        coeffs,
    }
}

pub fn fourier_inverse(s: &Spectrum) -> ComplexField {
    let mut values = s.coeffs.clone();
    s.grid.transform(&mut values, false);
    let norm = 1.0 / s.grid.len() as f64;
    values.iter_mut().for_each(|v| *v *= norm);
    ComplexField::from_raw(&s.grid, values)
}

fn wirtinger(grid: &PeriodicGrid, xi: Complex64, j: usize, k: usize, conjugate: bool) -> Complex64 {
    if grid.is_nyquist(j) || grid.is_nyquist(k) {
        return Complex64::new(0.0, 0.0);
    }
    let w = if conjugate { xi } else { xi.conj() };
    0.5 * I * w
}

/// Spectral `d/dz`.
pub fn d_z(f: &ComplexField) -> ComplexField {
    let g = &f.grid;
    ComplexField::from_raw(
        g,
        g.apply_multiplier(&f.values, |xi, j, k| wirtinger(g, xi, j, k, false)),
    )
}

/// Spectral `d/dzbar`.
pub fn d_zbar(f: &ComplexField) -> ComplexField {
    let g = &f.grid;
    ComplexField::from_raw(
        g,
        g.apply_multiplier(&f.values, |xi, j, k| wirtinger(g, xi, j, k, true)),
    )
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    n: usize,
    #[serde(rename = "L")]
    side: f64,
    name: String,
}

/// Writes a field as a one-line JSON header followed by little-endian
/// interleaved `(re, im)` f64 pairs.
pub fn write_dump<W: Write>(mut out: W, field: &ComplexField, name: &str) -> std::io::Result<()> {
    let header = DumpHeader {
        n: field.grid.n(),
        side: field.grid.side(),
        name: name.to_string(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in &field.values {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_dump<R: BufRead>(mut input: R, path: &Path) -> Result<(ComplexField, String)> {
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut line = String::new();
    input.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: DumpHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| fail(format!("bad header: {e}")))?;
    let grid = PeriodicGrid::new(header.n, header.side)?;
    let mut bytes = Vec::with_capacity(grid.len() * 16);
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != grid.len() * 16 {
        return Err(fail(format!(
            "expected {} payload bytes, found {}",
            grid.len() * 16,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((ComplexField::new(&grid, values)?, header.name))
}

pub fn save_field(path: &Path, field: &ComplexField, name: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dump(BufWriter::new(file), field, name).map_err(|e| Error::io(path, e))
}

pub fn load_field(path: &Path) -> Result<(ComplexField, String)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dump(BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(grid: &PeriodicGrid, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexField::new(grid, values).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(PeriodicGrid::new(8, 1.0).is_err());
        assert!(PeriodicGrid::new(48, 1.0).is_err());
        assert!(PeriodicGrid::new(64, 0.0).is_err());
        assert!(PeriodicGrid::new(64, f64::NAN).is_err());
    }

    #[test]
    fn lattice_layout() {
        let g = PeriodicGrid::new(16, 4.0).unwrap();
        assert_eq!(g.point(0, 0), c(-2.0, -2.0));
        assert_eq!(g.point(8, 8), c(0.0, 0.0));
        assert_eq!(g.index(3, 2), 35);
        assert_eq!(g.coords(35), (3, 2));
        assert_eq!(g.signed_frequency(8), 8);
        assert_eq!(g.signed_frequency(9), -7);
        assert_eq!(g.signed_frequency(15), -1);
    }

    #[test]
    fn rejects_non_finite_samples() {
        let g = PeriodicGrid::new(16, 1.0).unwrap();
        let mut v = vec![c(0.0, 0.0); g.len()];
        v[7] = c(f64::NAN, 0.0);
        assert!(matches!(
            ComplexField::new(&g, v),
            Err(Error::NonFinite { index: 7 })
        ));
    }

    #[test]
    fn roundtrip_and_parseval() {
        let g = PeriodicGrid::new(64, 3.0).unwrap();
        let f = random_field(&g, 1);
        let s = fourier_forward(&f);
        let back = fourier_inverse(&s);
        assert!(back.max_abs_diff(&f).unwrap() <= 1e-12);
        let energy = f.l2_norm().powi(2);
        assert!((s.energy() - energy).abs() <= 1e-12 * energy);
    }

    #[test]
    fn constant_spectrum_is_a_single_mode() {
        let g = PeriodicGrid::new(32, 2.0).unwrap();
        let s = fourier_forward(&ComplexField::constant(&g, c(1.0, 0.0)));
        assert!((s.coeffs()[0] - c(1024.0, 0.0)).norm() < 1e-9);
        let rest: f64 = s.coeffs()[1..].iter().map(|v| v.norm()).sum();
        assert!(rest < 1e-9);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = PeriodicGrid::new(32, 2.0).unwrap();
        let one = ComplexField::constant(&g, c(1.0, 0.0));
        assert!(d_z(&one).sup_norm() < 1e-14);
        assert!(d_zbar(&one).sup_norm() < 1e-14);
    }

    #[test]
    fn gaussian_dbar_matches_symbolic() {
        let g = PeriodicGrid::new(256, 16.0).unwrap();
        let f = ComplexField::from_fn(&g, |z| c((-z.norm_sqr()).exp(), 0.0)).unwrap();
        let expected = ComplexField::from_fn(&g, |z| -z * (-z.norm_sqr()).exp()).unwrap();
        assert!(d_zbar(&f).relative_l2_error(&expected).unwrap() <= 1e-8);
    }

    #[test]
    fn z_gaussian_dz_matches_symbolic() {
        let g = PeriodicGrid::new(256, 16.0).unwrap();
        let f = ComplexField::from_fn(&g, |z| z * (-z.norm_sqr()).exp()).unwrap();
        let expected =
            ComplexField::from_fn(&g, |z| c((1.0 - z.norm_sqr()) * (-z.norm_sqr()).exp(), 0.0))
                .unwrap();
        assert!(d_z(&f).relative_l2_error(&expected).unwrap() <= 1e-8);
    }

    #[test]
    fn derivatives_commute_and_conjugate() {
        let g = PeriodicGrid::new(64, 5.0).unwrap();
        let f = random_field(&g, 2);
        let a = d_z(&d_zbar(&f));
        let b = d_zbar(&d_z(&f));
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-9 * a.sup_norm());
        let lhs = d_z(&f.conj());
        let rhs = d_zbar(&f).conj();
        assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12 * rhs.sup_norm().max(1.0));
    }

    #[test]
    fn dump_roundtrip_is_bit_exact() {
        let g = PeriodicGrid::new(16, 1.5).unwrap();
        let f = random_field(&g, 3);
        let mut buf = Vec::new();
        write_dump(&mut buf, &f, "mu").unwrap();
        let first_line = buf.split(|&b| b == b'\n').next().unwrap();
        assert_eq!(
            std::str::from_utf8(first_line).unwrap(),
            r#"{"n":16,"L":1.5,"name":"mu"}"#
        );
        let (back, name) = read_dump(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(name, "mu");
        assert_eq!(back.grid(), f.grid());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let g = PeriodicGrid::new(16, 1.0).unwrap();
        let mut buf = Vec::new();
        write_dump(&mut buf, &ComplexField::zeros(&g), "x").unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            read_dump(&buf[..], Path::new("mem")),
            Err(Error::Format { .. })
        ));
    }
}
