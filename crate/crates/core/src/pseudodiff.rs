//! Torus quantization of the separable symbols of the first averaging step:
//! Fourier multipliers, multiplication operators, the generator
//! `G_h = b(hD_y) A + A b(hD_y)` with `b(eta) = -psi_1(eta) / (4 eta)`, and the
//! residual of the conjugated stationary equation.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::averaging::primitive_on_fourier_grid;
use crate::damping::DampingProfile;
use crate::error::{LabError, Result};
use crate::field::{mode_of_index, norm, FourierField2D, TorusGrid};
use crate::linalg::{self, c, expm_action, lanczos_extreme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// `C^inf` step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let phi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        phi(t) / (phi(t) + phi(1.0 - t))
    }
}

/// Even plateau cutoff: 1 on `|eta +- 1| <= inner`, 0 outside `|eta +- 1| <= outer`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffPsi1 {
    pub inner: f64,
    pub outer: f64,
}

impl Default for CutoffPsi1 {
    fn default() -> Self {
        Self {
            inner: 0.25,
            outer: 0.5,
        }
    }
}

impl CutoffPsi1 {
    pub fn eval(&self, eta: f64) -> f64 {
        let d = (eta.abs() - 1.0).abs();
        smooth_step((self.outer - d) / (self.outer - self.inner))
    }

    /// `b(eta) = -psi_1(eta) / (4 eta)`, with `b(0) = 0`.
    pub fn generator_symbol(&self, eta: f64) -> f64 {
        let p = self.eval(eta);
        if p == 0.0 {
            0.0
        } else {
            -p / (4.0 * eta)
        }
    }
}

/// Diagonal operator multiplying mode `(kx, ky)` by `phi(h k_axis)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierMultiplier {
    k: usize,
    diag: Vec<f64>,
}

pub fn fourier_multiplier(
    phi: impl Fn(f64) -> f64,
    axis: Axis,
    h: f64,
    k: usize,
) -> Result<FourierMultiplier> {
    if k < 4 {
        return Err(LabError::InvalidParameter {
            name: "K",
            reason: format!("must be at least 4, got {k}"),
        });
    }
    let n = 2 * k + 1;
    let diag = (0..n * n)
        .map(|idx| {
            let (kx, ky) = mode_of_index(k, idx);
            let kk = if axis == Axis::X { kx } else { ky };
            phi(h * kk as f64)
        })
        .collect();
    Ok(FourierMultiplier { k, diag })
}

impl FourierMultiplier {
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply_coeffs(&self, u: &[C64]) -> Vec<C64> {
        u.iter().zip(&self.diag).map(|(v, d)| v * d).collect()
    }

    pub fn apply(&self, u: &FourierField2D) -> Result<FourierField2D> {
        check_k(self.k, u)?;
        FourierField2D::from_coeffs(self.k, u.h(), self.apply_coeffs(u.coeffs()))
    }
}

fn check_k(expected: usize, u: &FourierField2D) -> Result<()> {
    if u.truncation() != expected {
        return Err(LabError::TruncationMismatch {
            expected,
            got: u.truncation(),
        });
    }
    Ok(())
}

/// `u -> f u` for real grid samples `f`, realized as `F diag(f) F*`.
#[derive(Clone, Debug)]
pub struct MultiplicationOperator {
    grid: TorusGrid,
    f: Vec<f64>,
}

pub fn multiplication_operator(f: Vec<f64>, k: usize) -> Result<MultiplicationOperator> {
    let n = 2 * k + 1;
    if f.len() != n * n {
        return Err(LabError::InvalidParameter {
            name: "f",
            reason: format!("expected {} samples, got {}", n * n, f.len()),
        });
    }
    Ok(MultiplicationOperator {
        grid: TorusGrid::new(k),
        f,
    })
}

impl MultiplicationOperator {
    pub fn samples(&self) -> &[f64] {
        &self.f
    }

    pub fn apply_coeffs(&self, u: &[C64]) -> Vec<C64> {
        self.grid.multiply(&self.f, u)
    }

    pub fn apply(&self, u: &FourierField2D) -> Result<FourierField2D> {
        check_k(self.grid.truncation(), u)?;
        FourierField2D::from_coeffs(u.truncation(), u.h(), self.apply_coeffs(u.coeffs()))
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.grid.side();
        linalg::assemble(n * n, |v| self.apply_coeffs(v))
    }
}

/// Matrix-free `G_h`; `to_dense` assembles it for small truncations.
#[derive(Clone, Debug)]
pub struct NormalFormGenerator {
    pub h: f64,
    pub k: usize,
    grid: TorusGrid,
    /// `b(h k_y)` per coefficient index.
    b_diag: Vec<f64>,
    /// `A(x, y)` at the Fourier grid nodes.
    primitive: Vec<f64>,
    /// Crude bound `2 max|b| max|A|` on the operator norm.
    norm_bound: f64,
}

impl NormalFormGenerator {
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let bu: Vec<C64> = u.iter().zip(&self.b_diag).map(|(v, b)| v * b).collect();
        let abu = self.grid.multiply(&self.primitive, &bu);
        let au = self.grid.multiply(&self.primitive, u);
        au.iter()
            .zip(&self.b_diag)
            .zip(&abu)
            .map(|((a, b), x)| a * b + x)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.b_diag.len()
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn primitive_samples(&self) -> &[f64] {
        &self.primitive
    }

    pub fn symbol_diagonal(&self) -> &[f64] {
        &self.b_diag
    }

    pub fn is_zero(&self) -> bool {
        self.norm_bound == 0.0
    }

    pub fn to_dense(&self) -> Mat<C64> {
        linalg::assemble(self.dim(), |v| self.apply(v))
    }

    /// Operator norm from Lanczos on the self-adjoint `G_h`.
    pub fn norm(&self) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let start: Vec<C64> = (0..self.dim())
            .map(|i| C64::new(1.0 + (i as f64 * 0.618).sin(), (i as f64 * 0.377).cos()))
            .collect();
        let r = lanczos_extreme(|v| Ok(self.apply(v)), &start, 300, 1e-10)?;
        Ok(r.value.abs())
    }

    /// `exp(s G_h) v` by a scaled Taylor series.
    pub fn exp_action(&self, v: &[C64], s: f64) -> Vec<C64> {
        if self.is_zero() {
            return v.to_vec();
        }
        expm_action(|x| self.apply(x), v, s, self.norm_bound)
    }
}

pub fn required_truncation(h: f64) -> usize {
    (2.0 / h).ceil() as usize
}

pub fn build_generator(a: &DampingProfile, h: f64, k: usize) -> Result<NormalFormGenerator> {
    build_generator_with(a, h, k, CutoffPsi1::default())
}

pub fn build_generator_with(
    a: &DampingProfile,
    h: f64,
    k: usize,
    psi: CutoffPsi1,
) -> Result<NormalFormGenerator> {
    if !(h > 0.0 && h < 1.0) {
        return Err(LabError::InvalidParameter {
            name: "h",
            reason: format!("must lie in (0, 1), got {h}"),
        });
    }
    let required = required_truncation(h);
    if k < required {
        return Err(LabError::TruncationTooSmall {
            got: k,
            required,
            h,
        });
    }
    let n = 2 * k + 1;
    let refine = 2 * 1024usize.div_ceil(n);
    let primitive = primitive_on_fourier_grid(a, n, refine);
    let b_diag: Vec<f64> = (0..n * n)
        .map(|idx| psi.generator_symbol(h * mode_of_index(k, idx).1 as f64))
        .collect();
    let amax = primitive.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bmax = b_diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(NormalFormGenerator {
        h,
        k,
        grid: TorusGrid::new(k),
        b_diag,
        primitive,
        norm_bound: 2.0 * amax * bmax,
    })
}

/// `exp(M)` by scaling and squaring with the degree-13 Padé approximant.
pub fn matrix_exponential(m: &Mat<C64>) -> Result<Mat<C64>> {
    linalg::expm(m)
}

/// Window `|h k_y - 1| <= width_y`, `sqrt(h) |k_x| <= width_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeWindow {
    pub width_y: f64,
    pub width_x: f64,
}

impl Default for ProbeWindow {
    fn default() -> Self {
        Self {
            width_y: 0.125,
            width_x: 1.0,
        }
    }
}

impl ProbeWindow {
    pub fn contains(&self, h: f64, kx: i64, ky: i64) -> bool {
        (h * ky as f64 - 1.0).abs() <= self.width_y && h.sqrt() * (kx as f64).abs() <= self.width_x
    }
}

/// Unit-norm packet `e^{i n y} phi(x)` with `n = round(1/h)` and
/// `cos^2(pi sqrt(h) k_x / 2)` weights on `sqrt(h)|k_x| <= 1`.
pub fn microlocalized_probe(h: f64, k: usize) -> FourierField2D {
    let ky = (1.0 / h).round() as i64;
    let mut f = FourierField2D::zeros(k, h);
    for idx in 0..f.len() {
        let (kx, kyy) = f.wavenumbers(idx);
        let t = h.sqrt() * kx as f64;
        if kyy == ky && t.abs() < 1.0 {
            f.coeffs_mut()[idx] = c((0.5 * std::f64::consts::PI * t).cos().powi(2));
        }
    }
    f.normalize();
    f
}

/// Operator pieces shared by the dense and matrix-free residuals.
struct ConjugationParts {
    h: f64,
    grid: TorusGrid,
    symbol: Vec<f64>,
    dx2: Vec<f64>,
    a: Vec<f64>,
    avg: Vec<f64>,
}

impl ConjugationParts {
    fn new(a: &DampingProfile, h: f64, k: usize) -> Self {
        let grid = TorusGrid::new(k);
        let n = grid.side();
        let samples = grid.sample(|x, y| a.eval(x, y));
        let mut avg = vec![0.0; n * n];
        for i in 0..n {
            let m = samples[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64;
            avg[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = m);
        }
        let (symbol, dx2) = (0..n * n)
            .map(|idx| {
                let (kx, ky) = mode_of_index(k, idx);
                let (kx, ky) = (kx as f64, ky as f64);
                (h * h * (kx * kx + ky * ky) - 1.0, h * h * kx * kx)
            })
            .unzip();
        Self {
            h,
            grid,
            symbol,
            dx2,
            a: samples,
            avg,
        }
    }

    /// `(P_h + i h f) u` for grid samples `f`.
    fn stationary(&self, f: &[f64], u: &[C64]) -> Vec<C64> {
        let fu = self.grid.multiply(f, u);
        u.iter()
            .zip(&self.symbol)
            .zip(&fu)
            .map(|((v, s), w)| v * s + C64::new(0.0, self.h) * w)
            .collect()
    }

    fn dx2(&self, u: &[C64]) -> Vec<C64> {
        u.iter().zip(&self.dx2).map(|(v, d)| v * d).collect()
    }
}

fn validate_probe(h: f64, k: usize, probe: &FourierField2D, window: ProbeWindow) -> Result<()> {
    check_k(k, probe)?;
    for (idx, v) in probe.coeffs().iter().enumerate() {
        let (kx, ky) = probe.wavenumbers(idx);
        if *v != c(0.0) && !window.contains(h, kx, ky) {
            return Err(LabError::NotMicrolocalized(format!(
                "coefficient at ({kx}, {ky}) lies outside |h ky - 1| <= {}, sqrt(h)|kx| <= {}",
                window.width_y, window.width_x
            )));
        }
    }
    Ok(())
}

/// `||e^{G}(P + iha)e^{-G} w - (P + ih A(a) - [h^2 D_x^2, G]) w||` with the
/// exponentials applied matrix-free.
pub fn conjugation_residual(
    a: &DampingProfile,
    h: f64,
    k: usize,
    probe: &FourierField2D,
) -> Result<f64> {
    conjugation_residual_with(a, h, k, probe, ProbeWindow::default())
}

pub fn conjugation_residual_with(
    a: &DampingProfile,
    h: f64,
    k: usize,
    probe: &FourierField2D,
    window: ProbeWindow,
) -> Result<f64> {
    validate_probe(h, k, probe, window)?;
    let g = build_generator(a, h, k)?;
    let parts = ConjugationParts::new(a, h, k);
    let w = probe.coeffs();
    let lhs = {
        let x = g.exp_action(w, -1.0);
        let y = parts.stationary(&parts.a, &x);
        g.exp_action(&y, 1.0)
    };
    let rhs = reduced_side(&parts, &g, w, |v| g.apply(v));
    Ok(norm(&diff(&lhs, &rhs)))
}

/// Same residual with dense matrix exponentials of `+-G_h`.
pub fn conjugation_residual_dense(
    a: &DampingProfile,
    h: f64,
    k: usize,
    probe: &FourierField2D,
) -> Result<f64> {
    validate_probe(h, k, probe, ProbeWindow::default())?;
    let g = build_generator(a, h, k)?;
    let parts = ConjugationParts::new(a, h, k);
    let gd = g.to_dense();
    let ep = matrix_exponential(&gd)?;
    let em = matrix_exponential(&linalg::scaled(&gd, c(-1.0)))?;
    let w = probe.coeffs();
    let x = linalg::matvec(&em, w);
    let y = parts.stationary(&parts.a, &x);
    let lhs = linalg::matvec(&ep, &y);
    let rhs = reduced_side(&parts, &g, w, |v| linalg::matvec(&gd, v));
    Ok(norm(&diff(&lhs, &rhs)))
}

fn reduced_side(
    parts: &ConjugationParts,
    _g: &NormalFormGenerator,
    w: &[C64],
    apply_g: impl Fn(&[C64]) -> Vec<C64>,
) -> Vec<C64> {
    let base = parts.stationary(&parts.avg, w);
    let gw = apply_g(w);
    let comm = diff(&parts.dx2(&gw), &apply_g(&parts.dx2(w)));
    diff(&base, &comm)
}

fn diff(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `||[psi(hbar D_x), a]||` from Lanczos on the self-adjoint `i [psi, a]`.
pub fn commutator_norm(
    psi: impl Fn(f64) -> f64,
    hbar: f64,
    a: &DampingProfile,
    k: usize,
) -> Result<f64> {
    let mult = fourier_multiplier(psi, Axis::X, hbar, k)?;
    let grid = TorusGrid::new(k);
    let samples = grid.sample(|x, y| a.eval(x, y));
    let apply = |u: &[C64]| -> Result<Vec<C64>> {
        let first = mult.apply_coeffs(&grid.multiply(&samples, u));
        let second = grid.multiply(&samples, &mult.apply_coeffs(u));
        Ok(first
            .iter()
            .zip(&second)
            .map(|(x, y)| C64::new(0.0, 1.0) * (x - y))
            .collect())
    };
    let n = grid.side();
    let start: Vec<C64> = (0..n * n)
        .map(|i| C64::new((i as f64 * 0.7).sin() + 0.1, (i as f64 * 0.31).cos()))
        .collect();
    Ok(lanczos_extreme(apply, &start, 300, 1e-9)?.value.abs())
}
