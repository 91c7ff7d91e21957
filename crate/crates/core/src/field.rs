//! Truncated Fourier fields on the flat torus and the transforms that move
//! them to and from the collocation grid.
//!
//! A field with truncation `K` stores the coefficients `c(kx, ky)` for
//! `|kx|, |ky| <= K` in the orthonormal basis `e^{i k.z} / (2 pi)`, so the
//! Euclidean norm of the coefficient vector is the L² norm. The matching grid
//! has `n = 2K + 1` nodes per axis at `x_j = 2 pi j / n`; the unitary discrete
//! transform maps coefficients to grid values bijectively.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FourierField2D {
    k: usize,
    h: f64,
    coeffs: Vec<C64>,
}

impl FourierField2D {
    pub fn zeros(k: usize, h: f64) -> Self {
        let n = 2 * k + 1;
        Self {
            k,
            h,
            coeffs: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_coeffs(k: usize, h: f64, coeffs: Vec<C64>) -> Result<Self> {
        let n = 2 * k + 1;
        if coeffs.len() != n * n {
            return Err(LabError::InvalidParameter {
                name: "coeffs",
                reason: format!(
                    "expected {} coefficients for K={k}, got {}",
                    n * n,
                    coeffs.len()
                ),
            });
        }
        Ok(Self { k, h, coeffs })
    }

    /// Unit-norm single Fourier mode.
    pub fn mode(k: usize, h: f64, kx: i64, ky: i64) -> Self {
        let mut f = Self::zeros(k, h);
        f.set(kx, ky, C64::new(1.0, 0.0));
        f
    }

    /// Unit-norm field with independent Gaussian coefficients.
    pub fn random<R: Rng>(k: usize, h: f64, rng: &mut R) -> Self {
        let n = 2 * k + 1;
        let coeffs = (0..n * n)
            .map(|_| C64::new(gaussian(rng), gaussian(rng)))
            .collect();
        let mut f = Self { k, h, coeffs };
        f.normalize();
        f
    }

    pub fn truncation(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn side(&self) -> usize {
        2 * self.k + 1
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn index(&self, kx: i64, ky: i64) -> usize {
        mode_index(self.k, kx, ky)
    }

    pub fn wavenumbers(&self, idx: usize) -> (i64, i64) {
        mode_of_index(self.k, idx)
    }

    pub fn get(&self, kx: i64, ky: i64) -> C64 {
        self.coeffs[self.index(kx, ky)]
    }

    pub fn set(&mut self, kx: i64, ky: i64, value: C64) {
        let i = self.index(kx, ky);
        self.coeffs[i] = value;
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coeffs)
    }

    /// `<self, other> = sum self * conj(other)`.
    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.coeffs, &other.coeffs)
    }

    pub fn normalize(&mut self) {
        let s = self.norm();
        if s > 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c /= s);
        }
    }

    /// Samples of the represented function at the grid nodes.
    pub fn to_physical(&self, grid: &TorusGrid) -> Vec<C64> {
        let scale = grid.side() as f64 / (2.0 * PI);
        grid.to_grid(&self.coeffs)
            .into_iter()
            .map(|v| v * scale)
            .collect()
    }
}

pub(crate) fn mode_index(k: usize, kx: i64, ky: i64) -> usize {
    let n = 2 * k + 1;
    let ki = k as i64;
    assert!(
        kx.abs() <= ki && ky.abs() <= ki,
        "mode ({kx},{ky}) outside K={k}"
    );
    (kx + ki) as usize * n + (ky + ki) as usize
}

pub(crate) fn mode_of_index(k: usize, idx: usize) -> (i64, i64) {
    let n = 2 * k + 1;
    ((idx / n) as i64 - k as i64, (idx % n) as i64 - k as i64)
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; u1 in (0, 1] keeps the logarithm finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Unitary transform between the `(2K+1)^2` coefficient array and grid values.
#[derive(Clone)]
pub struct TorusGrid {
    k: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusGrid").field("k", &self.k).finish()
    }
}

impl TorusGrid {
    pub fn new(k: usize) -> Self {
        let n = 2 * k + 1;
        let mut planner = FftPlanner::new();
        Self {
            k,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn truncation(&self) -> usize {
        self.k
    }

    pub fn side(&self) -> usize {
        self.n
    }

    /// Grid nodes `2 pi j / n` along one axis.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| 2.0 * PI * j as f64 / self.n as f64)
            .collect()
    }

    /// Samples `f(x_i, y_j)` in grid order (x-major).
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let nodes = self.nodes();
        let mut out = Vec::with_capacity(self.n * self.n);
        for &x in &nodes {
            for &y in &nodes {
                out.push(f(x, y));
            }
        }
        out
    }

    /// Coefficients to unitary grid values.
    pub fn to_grid(&self, coeffs: &[C64]) -> Vec<C64> {
        let n = self.n;
        let k = self.k;
        let mut buf = vec![C64::new(0.0, 0.0); n * n];
        for ix in 0..n {
            let rx = (ix + n - k) % n;
            for iy in 0..n {
                let ry = (iy + n - k) % n;
                buf[rx * n + ry] = coeffs[ix * n + iy];
            }
        }
        self.transform_2d(&mut buf, &self.inv);
        let s = 1.0 / n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Unitary grid values to coefficients.
    pub fn from_grid(&self, values: &[C64]) -> Vec<C64> {
        let n = self.n;
        let k = self.k;
        let mut buf = values.to_vec();
        self.transform_2d(&mut buf, &self.fwd);
        let s = 1.0 / n as f64;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for ix in 0..n {
            let rx = (ix + n - k) % n;
            for iy in 0..n {
                let ry = (iy + n - k) % n;
                out[ix * n + iy] = buf[rx * n + ry] * s;
            }
        }
        out
    }

    /// Applies `u -> f u` for grid samples `f`, i.e. `F diag(f) F*`.
    pub fn multiply(&self, f: &[f64], coeffs: &[C64]) -> Vec<C64> {
        let mut g = self.to_grid(coeffs);
        g.iter_mut().zip(f).for_each(|(v, &w)| *v *= w);
        self.from_grid(&g)
    }

    fn transform_2d(&self, buf: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(buf);
        transpose_in_place(buf, n);
        plan.process(buf);
        transpose_in_place(buf, n);
    }
}

fn transpose_in_place(buf: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Unitary 1D transform on `n` equispaced nodes of `[-pi, pi)` with signed
/// wavenumbers in DFT order.
#[derive(Clone)]
pub struct Spectral1D {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral1D").field("n", &self.n).finish()
    }
}

impl Spectral1D {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| -PI + 2.0 * PI * j as f64 / self.n as f64)
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Signed wavenumber of DFT slot `j`; the Nyquist slot maps to `-n/2`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if 2 * j >= n {
            j - n
        } else {
            j
        }
    }

    pub fn forward(&self, v: &[C64]) -> Vec<C64> {
        let mut buf = v.to_vec();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn inverse(&self, c: &[C64]) -> Vec<C64> {
        let mut buf = c.to_vec();
        self.inv.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Applies the Fourier multiplier `m(k)` to grid samples. Samples sit on
    /// nodes shifted by `-pi`, which only rephases coefficients and cancels.
    pub fn apply_multiplier(&self, v: &[C64], m: impl Fn(i64) -> C64) -> Vec<C64> {
        let mut c = self.forward(v);
        for (j, cj) in c.iter_mut().enumerate() {
            *cj *= m(self.wavenumber(j));
        }
        self.inverse(&c)
    }

    /// Spectral first derivative; the Nyquist mode is dropped.
    pub fn derivative(&self, v: &[C64]) -> Vec<C64> {
        let half = (self.n / 2) as i64;
        let even = self.n.is_multiple_of(2);
        self.apply_multiplier(v, |k| {
            if even && k == -half {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, k as f64)
            }
        })
    }

    /// Spectral second derivative, multiplier `-k^2` on every mode.
    pub fn second_derivative(&self, v: &[C64]) -> Vec<C64> {
        self.apply_multiplier(v, |k| C64::new(-((k * k) as f64), 0.0))
    }

    pub fn derivative_real(&self, v: &[f64]) -> Vec<f64> {
        let c: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.derivative(&c).into_iter().map(|z| z.re).collect()
    }

    pub fn second_derivative_real(&self, v: &[f64]) -> Vec<f64> {
        let c: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.second_derivative(&c)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    /// Quadrature L² norm `sqrt(dx * sum |v|^2)`.
    pub fn l2_norm(&self, v: &[C64]) -> f64 {
        (self.spacing() * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Quadrature inner product `dx * sum a conj(b)`.
    pub fn l2_inner(&self, a: &[C64], b: &[C64]) -> C64 {
        inner(a, b) * self.spacing()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transforms_are_unitary_inverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = FourierField2D::random(5, 0.3, &mut rng);
        let grid = TorusGrid::new(5);
        let g = grid.to_grid(f.coeffs());
        assert!((norm(&g) - f.norm()).abs() < 1e-13);
        let back = grid.from_grid(&g);
        let err: f64 = back
            .iter()
            .zip(f.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn single_mode_samples_plane_wave() {
        let k = 4;
        let grid = TorusGrid::new(k);
        let f = FourierField2D::mode(k, 1.0, 2, -1);
        let vals = f.to_physical(&grid);
        let nodes = grid.nodes();
        let n = grid.side();
        for i in 0..n {
            for j in 0..n {
                let phase = 2.0 * nodes[i] - nodes[j];
                let expect = C64::from_polar(1.0 / (2.0 * PI), phase);
                assert!((vals[i * n + j] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cosine_multiplication_shifts_modes() {
        let k = 4;
        let grid = TorusGrid::new(k);
        let f = grid.sample(|x, _| x.cos());
        let out = grid.multiply(&f, FourierField2D::mode(k, 1.0, 0, 0).coeffs());
        let out = FourierField2D::from_coeffs(k, 1.0, out).unwrap();
        assert!((out.get(1, 0) - 0.5).norm() < 1e-14);
        assert!((out.get(-1, 0) - 0.5).norm() < 1e-14);
        assert!(out.get(0, 0).norm() < 1e-14);
    }

    #[test]
    fn spectral_derivatives_of_trig_polynomial() {
        let s = Spectral1D::new(32);
        let x = s.nodes();
        let v: Vec<C64> = x.iter().map(|&t| C64::new((3.0 * t).sin(), 0.0)).collect();
        let d = s.derivative(&v);
        let d2 = s.second_derivative(&v);
        for (i, &t) in x.iter().enumerate() {
            assert!((d[i].re - 3.0 * (3.0 * t).cos()).abs() < 1e-12);
            assert!((d2[i].re + 9.0 * (3.0 * t).sin()).abs() < 1e-11);
        }
    }
}
