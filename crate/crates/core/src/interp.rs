//! Periodic bicubic interpolation of grid samples.

use num_complex::Complex64;

use crate::grid::PeriodicGrid;

/// Keys cubic convolution weights with `a = -1/2` (Catmull-Rom).
fn keys_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Bicubic interpolant of periodic samples; evaluation wraps around the torus.
#[derive(Clone, Debug)]
pub struct Bicubic<'a> {
    grid: &'a PeriodicGrid,
    values: &'a [Complex64],
}

impl<'a> Bicubic<'a> {
    pub fn new(grid: &'a PeriodicGrid, values: &'a [Complex64]) -> Self {
        assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let n = self.grid.n() as i64;
        let h = self.grid.spacing();
        let half = 0.5 * self.grid.side();
        let u = (z.re + half) / h;
        let v = (z.im + half) / h;
        let (j0, k0) = (u.floor(), v.floor());
        let wx = keys_weights(u - j0);
        let wy = keys_weights(v - k0);
        let (j0, k0) = (j0 as i64 - 1, k0 as i64 - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for (dy, wyv) in wy.iter().enumerate() {
            let k = (k0 + dy as i64).rem_euclid(n) as usize;
            let row = &self.values[k * n as usize..(k + 1) * n as usize];
            let mut racc = Complex64::new(0.0, 0.0);
            for (dx, wxv) in wx.iter().enumerate() {
                let j = (j0 + dx as i64).rem_euclid(n) as usize;
                racc += row[j] * wxv;
            }
            acc += racc * wyv;
        }
        acc
    }
}
