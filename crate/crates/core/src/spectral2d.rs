//! The stationary operator `P_h + i h a = -h^2 Delta - 1 + i h a` on the
//! truncated Fourier basis, smallest-singular-value estimation, exponent sweeps,
//! quasimodes and the spectrum of the first-order damped-wave generator.

use std::time::Instant;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::{DampingKind, DampingProfile, DampingSpec};
use crate::error::{invalid, LabError, Result};
use crate::field::{gaussian, inner, mode_of_index, norm, FourierField2D, TorusGrid};
use crate::harness::fit::{loglog_fit, FitReport, LogLogFit};
use crate::linalg::{self, c, gmres, lanczos_extreme, GmresOptions};

pub const DENSE_MAX_K: usize = 48;
pub const GENERATOR_MAX_K: usize = 24;

#[derive(Clone, Debug)]
pub struct StationaryOperator {
    h: f64,
    k: usize,
    grid: TorusGrid,
    symbol: Vec<f64>,
    a: Vec<f64>,
    y_independent: bool,
    undamped: bool,
}

impl StationaryOperator {
    pub fn new(damping: &DampingProfile, h: f64, k: usize) -> Result<Self> {
        let grid = TorusGrid::new(k);
        let a = grid.sample(|x, y| damping.eval(x, y));
        Self::from_samples(a, h, k)
    }

    /// Damping given by its samples at the `(2K+1)^2` grid nodes (x-major).
    pub fn from_samples(a: Vec<f64>, h: f64, k: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("must be positive, got {h}")));
        }
        if k < 2 {
            return Err(invalid("K", format!("must be at least 2, got {k}")));
        }
        let n = 2 * k + 1;
        if a.len() != n * n {
            return Err(invalid(
                "a",
                format!("expected {} samples, got {}", n * n, a.len()),
            ));
        }
        if let Some(bad) = a.iter().position(|v| !(*v >= 0.0)) {
            return Err(LabError::NonPositive {
                index: bad,
                value: a[bad],
            });
        }
        let symbol = (0..n * n)
            .map(|idx| {
                let (kx, ky) = mode_of_index(k, idx);
                h * h * ((kx * kx + ky * ky) as f64) - 1.0
            })
            .collect();
        let y_independent = (0..n).all(|i| a[i * n..(i + 1) * n].iter().all(|v| *v == a[i * n]));
        let undamped = a.iter().all(|v| *v == 0.0);
        Ok(Self {
            h,
            k,
            grid: TorusGrid::new(k),
            symbol,
            a,
            y_independent,
            undamped,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn truncation(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.symbol.len()
    }

    pub fn damping_samples(&self) -> &[f64] {
        &self.a
    }

    /// `h^2 |k|^2 - 1` per coefficient index.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn is_y_independent(&self) -> bool {
        self.y_independent
    }

    pub fn is_undamped(&self) -> bool {
        self.undamped
    }

    pub fn apply(&self, u: &FourierField2D) -> Result<FourierField2D> {
        if u.truncation() != self.k {
            return Err(LabError::TruncationMismatch {
                expected: self.k,
                got: u.truncation(),
            });
        }
        FourierField2D::from_coeffs(self.k, self.h, self.apply_coeffs(u.coeffs()))
    }

    /// `(P_h + i h a) u`.
    pub fn apply_coeffs(&self, u: &[C64]) -> Vec<C64> {
        self.apply_signed(u, 1.0)
    }

    /// `(P_h - i h a) u`.
    pub fn apply_adjoint_coeffs(&self, u: &[C64]) -> Vec<C64> {
        self.apply_signed(u, -1.0)
    }

    fn apply_signed(&self, u: &[C64], sign: f64) -> Vec<C64> {
        let mut out: Vec<C64> = u.iter().zip(&self.symbol).map(|(v, s)| v * s).collect();
        if !self.undamped {
            let au = self.grid.multiply(&self.a, u);
            let f = C64::new(0.0, sign * self.h);
            out.iter_mut().zip(&au).for_each(|(o, w)| *o += f * w);
        }
        out
    }

    /// `h <a u, u>`, equal to `h ||a^{1/2} u||^2`.
    pub fn damping_form(&self, u: &[C64]) -> f64 {
        self.h * inner(&self.grid.multiply(&self.a, u), u).re
    }

    pub fn to_dense(&self) -> Mat<C64> {
        linalg::assemble(self.dim(), |v| self.apply_coeffs(v))
    }

    /// `y`-average of the damping at each `x` node.
    fn x_profile(&self) -> Vec<f64> {
        let n = self.grid.side();
        (0..n)
            .map(|i| self.a[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
            .collect()
    }

    /// Matrix of the `k_y` block of `P_h + i h w(x)` on the `k_x` modes.
    fn block(&self, ky: i64, w: &[f64], sign: f64) -> Mat<C64> {
        let k = self.k as i64;
        let n = self.grid.side();
        let what = profile_coefficients(w);
        let h = self.h;
        Mat::from_fn(n, n, |p, q| {
            let (kp, kq) = (p as i64 - k, q as i64 - k);
            let mut v = C64::new(0.0, sign * h) * what[(kp - kq).rem_euclid(n as i64) as usize];
            if p == q {
                v += c(h * h * ((kp * kp + ky * ky) as f64) - 1.0);
            }
            v
        })
    }
}

/// `hat w(m) = (1/n) sum_j w_j e^{-i m x_j}` for `m` in `0..n`.
fn profile_coefficients(w: &[f64]) -> Vec<C64> {
    let n = w.len();
    (0..n)
        .map(|m| {
            w.iter()
                .enumerate()
                .map(|(j, &v)| {
                    C64::from_polar(
                        v,
                        -2.0 * std::f64::consts::PI * (m * j % n) as f64 / n as f64,
                    )
                })
                .sum::<C64>()
                / n as f64
        })
        .collect()
}

/// Exact inverse of the `y`-averaged operator `P_h + i h A(a)`, block-diagonal in `k_y`.
struct AveragedPreconditioner {
    k: usize,
    blocks: Vec<PartialPivLu<C64>>,
}

impl AveragedPreconditioner {
    fn new(op: &StationaryOperator) -> Self {
        let w = op.x_profile();
        let blocks = (0..=op.k as i64)
            .into_par_iter()
            .map(|ky| op.block(ky, &w, 1.0).partial_piv_lu())
            .collect();
        Self { k: op.k, blocks }
    }

    fn apply(&self, v: &[C64], adjoint: bool) -> Vec<C64> {
        let k = self.k;
        let n = 2 * k + 1;
        let mut out = vec![c(0.0); n * n];
        let mut rhs = Mat::<C64>::zeros(n, 1);
        for col in 0..n {
            let ky = col as i64 - k as i64;
            let lu = &self.blocks[ky.unsigned_abs() as usize];
            for p in 0..n {
                rhs[(p, 0)] = v[p * n + col];
            }
            if adjoint {
                lu.solve_adjoint_in_place(rhs.as_mut());
            } else {
                lu.solve_in_place(rhs.as_mut());
            }
            for p in 0..n {
                out[p * n + col] = rhs[(p, 0)];
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventMethod {
    DenseSvd,
    Krylov,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovOptions {
    /// Relative Ritz residual at which Lanczos stops.
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            inner_tol: 1e-10,
            inner_max_iter: 3000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventEstimate {
    pub norm: f64,
    pub sigma_min: f64,
    /// `||(P_h + i h a) u||` for the returned unit vector.
    pub residual: f64,
    pub iterations: usize,
    pub method: ResolventMethod,
    #[serde(skip)]
    pub vector: Vec<C64>,
}

pub fn resolvent_norm(
    op: &StationaryOperator,
    method: ResolventMethod,
) -> Result<ResolventEstimate> {
    resolvent_norm_with(op, method, KrylovOptions::default())
}

pub fn resolvent_norm_with(
    op: &StationaryOperator,
    method: ResolventMethod,
    opts: KrylovOptions,
) -> Result<ResolventEstimate> {
    if op.undamped {
        return diagonal_estimate(op, method);
    }
    match method {
        ResolventMethod::DenseSvd => dense_estimate(op),
        ResolventMethod::Krylov if op.y_independent => separable_estimate(op),
        ResolventMethod::Krylov => krylov_estimate(op, opts),
    }
}

pub(crate) fn singular_guard(sigma: f64, scale: f64) -> Result<()> {
    if sigma <= 1e-13 * scale.max(1.0) {
        Err(LabError::Singular(sigma))
    } else {
        Ok(())
    }
}

fn diagonal_estimate(
    op: &StationaryOperator,
    method: ResolventMethod,
) -> Result<ResolventEstimate> {
    let (idx, s) = op
        .symbol
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("nonempty basis");
    let sigma = s.abs();
    let scale = op.symbol.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    singular_guard(sigma, scale)?;
    let mut vector = vec![c(0.0); op.dim()];
    vector[idx] = c(1.0);
    Ok(ResolventEstimate {
        norm: 1.0 / sigma,
        sigma_min: sigma,
        residual: sigma,
        iterations: 0,
        method,
        vector,
    })
}

fn dense_estimate(op: &StationaryOperator) -> Result<ResolventEstimate> {
    if op.k > DENSE_MAX_K {
        return Err(invalid(
            "K",
            format!("dense SVD supports K <= {DENSE_MAX_K}, got {}", op.k),
        ));
    }
    let m = op.to_dense();
    let (sigma, smax, vector) = smallest_singular_triplet(&m)?;
    singular_guard(sigma, smax)?;
    let residual = norm(&op.apply_coeffs(&vector));
    Ok(ResolventEstimate {
        norm: 1.0 / sigma,
        sigma_min: sigma,
        residual,
        iterations: 0,
        method: ResolventMethod::DenseSvd,
        vector,
    })
}

/// `(sigma_min, sigma_max, right singular vector of sigma_min)`.
pub(crate) fn smallest_singular_triplet(m: &Mat<C64>) -> Result<(f64, f64, Vec<C64>)> {
    let svd = m
        .svd()
        .map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let n = s.nrows();
    let (mut imin, mut smax) = (0, 0.0f64);
    for i in 0..n {
        if s[i].re < s[imin].re {
            imin = i;
        }
        smax = smax.max(s[i].re);
    }
    let v = svd.V();
    let vector = (0..v.nrows()).map(|r| v[(r, imin)]).collect();
    Ok((s[imin].re, smax, vector))
}

pub(crate) fn smallest_singular_value(m: &Mat<C64>) -> Result<(f64, f64)> {
    let s = m
        .singular_values()
        .map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

/// `y`-independent damping: the operator is block-diagonal in `k_y` and each
/// distinct block (`k_y` and `-k_y` coincide) is handled densely.
fn separable_estimate(op: &StationaryOperator) -> Result<ResolventEstimate> {
    let w = op.x_profile();
    let per_block: Vec<(f64, f64)> = (0..=op.k as i64)
        .into_par_iter()
        .map(|ky| smallest_singular_value(&op.block(ky, &w, 1.0)))
        .collect::<Result<_>>()?;
    let (best, &(sigma, _)) = per_block
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("nonempty");
    let smax = per_block.iter().fold(0.0f64, |m, p| m.max(p.1));
    singular_guard(sigma, smax)?;
    let (_, _, v) = smallest_singular_triplet(&op.block(best as i64, &w, 1.0))?;
    let n = op.grid.side();
    let col = best + op.k;
    let mut vector = vec![c(0.0); n * n];
    for p in 0..n {
        vector[p * n + col] = v[p];
    }
    let residual = norm(&op.apply_coeffs(&vector));
    Ok(ResolventEstimate {
        norm: 1.0 / sigma,
        sigma_min: sigma,
        residual,
        iterations: op.k + 1,
        method: ResolventMethod::Krylov,
        vector,
    })
}

/// Lanczos for the top eigenvalue of `(A^* A)^{-1}`, each application being
/// two preconditioned GMRES solves, followed by one inverse-iteration step.
fn krylov_estimate(op: &StationaryOperator, opts: KrylovOptions) -> Result<ResolventEstimate> {
    krylov_estimate_from(op, opts, None)
}

/// Krylov estimate whose Lanczos start mixes `start` with a small seeded
/// random component.
pub fn krylov_resolvent_from(
    op: &StationaryOperator,
    opts: KrylovOptions,
    start: &[C64],
) -> Result<ResolventEstimate> {
    if op.undamped {
        return diagonal_estimate(op, ResolventMethod::Krylov);
    }
    if op.y_independent {
        return separable_estimate(op);
    }
    krylov_estimate_from(op, opts, Some(start))
}

fn krylov_estimate_from(
    op: &StationaryOperator,
    opts: KrylovOptions,
    warm: Option<&[C64]>,
) -> Result<ResolventEstimate> {
    let pre = AveragedPreconditioner::new(op);
    let gopts = GmresOptions {
        restart: 60,
        tol: opts.inner_tol,
        max_iter: opts.inner_max_iter,
        op_norm: 0.0,
    };
    let inverse_normal = |v: &[C64]| -> Result<Vec<C64>> {
        let y = gmres(
            |x| op.apply_adjoint_coeffs(x),
            |x| pre.apply(x, true),
            v,
            None,
            gopts,
        )?;
        let z = gmres(
            |x| op.apply_coeffs(x),
            |x| pre.apply(x, false),
            &y.x,
            None,
            gopts,
        )?;
        Ok(z.x)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<C64> = (0..op.dim())
        .map(|_| C64::new(gaussian(&mut rng), gaussian(&mut rng)))
        .collect();
    if let Some(w) = warm.filter(|w| w.len() == start.len()) {
        let scale = 1e-3 * norm(w) / norm(&start);
        start
            .iter_mut()
            .zip(w)
            .for_each(|(s, v)| *s = v + *s * scale);
    }
    let ritz = lanczos_extreme(&inverse_normal, &start, opts.max_iter, opts.tol)?;
    let theta = ritz.value;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(LabError::Singular(0.0));
    }
    let mut u = inverse_normal(&ritz.vector)?;
    let un = norm(&u);
    u.iter_mut().for_each(|v| *v /= un);
    let residual = norm(&op.apply_coeffs(&u));
    let sigma = 1.0 / theta.sqrt();
    Ok(ResolventEstimate {
        norm: theta.sqrt(),
        sigma_min: sigma,
        residual,
        iterations: ritz.iterations,
        method: ResolventMethod::Krylov,
        vector: u,
    })
}

#[derive(Clone, Debug)]
pub struct Quasimode {
    pub u: FourierField2D,
    pub residual: f64,
    pub resolvent_norm: f64,
}

/// Minimizer of `||(P_h + i h a) u||` over unit `u`: dense SVD for `K <= 24`,
/// Krylov otherwise.
pub fn quasimode_extract(op: &StationaryOperator) -> Result<Quasimode> {
    let method = if op.k <= 24 {
        ResolventMethod::DenseSvd
    } else {
        ResolventMethod::Krylov
    };
    quasimode_extract_with(op, method, KrylovOptions::default())
}

pub fn quasimode_extract_with(
    op: &StationaryOperator,
    method: ResolventMethod,
    opts: KrylovOptions,
) -> Result<Quasimode> {
    let est = resolvent_norm_with(op, method, opts)?;
    Ok(Quasimode {
        u: FourierField2D::from_coeffs(op.k, op.h, est.vector)?,
        residual: est.residual,
        resolvent_norm: est.norm,
    })
}

/// Both sides of the two a-priori identities for `f = (P_h + i h a) u`:
/// `h ||a^{1/2} u||^2 = |Im <f, u>|` and `||h grad u||^2 - ||u||^2 = Re <f, u>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriIdentities {
    pub damping_lhs: f64,
    pub damping_rhs: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
}

impl AprioriIdentities {
    /// Largest absolute mismatch, relative to `||u||^2`.
    pub fn residual(&self, u_norm_sq: f64) -> f64 {
        let d = (self.damping_lhs - self.damping_rhs).abs();
        let e = (self.energy_lhs - self.energy_rhs).abs();
        d.max(e) / u_norm_sq
    }
}

pub fn apriori_identities(
    op: &StationaryOperator,
    u: &FourierField2D,
) -> Result<AprioriIdentities> {
    let f = op.apply(u)?;
    let fu = inner(f.coeffs(), u.coeffs());
    let grad: f64 = u
        .coeffs()
        .iter()
        .zip(&op.symbol)
        .map(|(v, s)| (s + 1.0) * v.norm_sqr())
        .sum();
    let mass: f64 = u.coeffs().iter().map(|v| v.norm_sqr()).sum();
    Ok(AprioriIdentities {
        damping_lhs: op.damping_form(u.coeffs()),
        damping_rhs: fu.im.abs(),
        energy_lhs: grad - mass,
        energy_rhs: fu.re,
    })
}

/// `2 + 2/(2 beta + 5)` for a disk, `2 + 1/(gamma + 2)` for a strip, `2` for a
/// positive constant.
pub fn predicted_exponent(damping: &DampingProfile) -> Option<f64> {
    match (damping.kind(), damping.spec()) {
        (DampingKind::Disk, Some(DampingSpec::Disk { beta, .. })) => {
            Some(2.0 + 2.0 / (2.0 * beta + 5.0))
        }
        (DampingKind::Strip, Some(DampingSpec::Strip { gamma, .. })) => {
            Some(2.0 + 1.0 / (gamma + 2.0))
        }
        (_, Some(DampingSpec::Constant { value })) if *value > 0.0 => Some(2.0),
        _ => None,
    }
}

pub fn default_k_rule(h: f64) -> usize {
    (4.0 / h).ceil() as usize
}

/// Geometric sequence `h0 * ratio^j`, `j = 0..count`.
pub fn geometric_h_list(h0: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| h0 * ratio.powi(j as i32)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: f64,
    pub k: usize,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Excluded from deterministic outputs.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub fit: Option<LogLogFit>,
    pub predicted_exponent: Option<f64>,
    pub report: Option<FitReport>,
}

impl SweepResult {
    /// Sorts by `h` descending and fits `ln value` against `ln(1/h)`.
    pub fn from_points(
        mut points: Vec<SweepPoint>,
        predicted: Option<f64>,
        tolerance: f64,
    ) -> Self {
        points.sort_by(|a, b| b.h.total_cmp(&a.h));
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (1.0 / p.h, p.value)).collect();
        let fit = if pairs.len() >= 4 {
            loglog_fit(&pairs, None).ok()
        } else {
            None
        };
        let report = fit
            .zip(predicted)
            .map(|(f, p)| FitReport::new(f, p, tolerance));
        Self {
            points,
            fit,
            predicted_exponent: predicted,
            report,
        }
    }

    pub fn tolerance_met(&self) -> bool {
        self.report.is_some_and(|r| r.pass)
    }
}

/// Resolvent norms over `h_list` with `K = k_rule(h)`; fitted exponent of
/// `||R||` in `1/h`. Tolerance for the pass flag defaults to 0.15.
pub fn exponent_sweep(
    damping: &DampingProfile,
    h_list: &[f64],
    k_rule: impl Fn(f64) -> usize + Sync,
    method: ResolventMethod,
) -> Result<SweepResult> {
    if h_list.len() < 5 {
        return Err(LabError::TooFewPoints {
            got: h_list.len(),
            required: 5,
        });
    }
    let points = h_list
        .par_iter()
        .map(|&h| sweep_point(damping, h, k_rule(h), method, KrylovOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::from_points(
        points,
        predicted_exponent(damping),
        0.15,
    ))
}

pub fn sweep_point(
    damping: &DampingProfile,
    h: f64,
    k: usize,
    method: ResolventMethod,
    opts: KrylovOptions,
) -> Result<SweepPoint> {
    let t = Instant::now();
    let op = StationaryOperator::new(damping, h, k)?;
    let est = resolvent_norm_with(&op, method, opts)?;
    Ok(SweepPoint {
        h,
        k,
        value: est.norm,
        residual: est.residual,
        iterations: est.iterations,
        wall_time_ms: t.elapsed().as_secs_f64() * 1e3,
    })
}

/// Sup of `||(P_h' + i h' a)^{-1}||` over `h'` in `[h / (1 + width h), h]`.
///
/// Lattice resonances make the pointwise norm jump by orders of magnitude
/// between nearby `h`. Peaks are located with the `y`-averaged model: for each
/// eigenvalue `nu` of `-d_x^2 + i A(a)(x) / h` a resonance sits at
/// `1/h'^2 = k_y^2 + Re nu` with height about `1 / (h'^2 |Im nu|)`. The most
/// promising candidates are then refined by golden-section search on the full
/// operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSearch {
    pub width: f64,
    pub candidates: usize,
    pub golden_steps: usize,
    /// Half-width of the refinement bracket in units of the predicted peak width.
    pub bracket: f64,
}

impl Default for PeakSearch {
    fn default() -> Self {
        Self {
            width: 1.5,
            candidates: 2,
            golden_steps: 18,
            bracket: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakCandidate {
    pub h: f64,
    pub ky: i64,
    pub nu: [f64; 2],
    pub predicted: f64,
}

/// Resonance candidates of the averaged model inside the window, best first.
pub fn averaged_peak_candidates(
    damping: &DampingProfile,
    h: f64,
    k: usize,
    width: f64,
) -> Result<Vec<PeakCandidate>> {
    let op = StationaryOperator::new(damping, h, k)?;
    let w = op.x_profile();
    let n = op.grid.side();
    let what = profile_coefficients(&w);
    let kk = k as i64;
    let l = Mat::<C64>::from_fn(n, n, |p, q| {
        let (kp, kq) = (p as i64 - kk, q as i64 - kk);
        let mut v = C64::new(0.0, 1.0 / h) * what[(kp - kq).rem_euclid(n as i64) as usize];
        if p == q {
            v += c((kp * kp) as f64);
        }
        v
    });
    let nus: Vec<C64> = l
        .eigenvalues()
        .map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    let lo = 1.0 / (h * h);
    let hi = (1.0 + width * h).powi(2) / (h * h);
    let mut out = Vec::new();
    for nu in nus {
        if nu.im.abs() <= 0.0 {
            continue;
        }
        for ky in 0..=kk {
            let t = (ky * ky) as f64 + nu.re;
            if t >= lo && t <= hi {
                let hp = 1.0 / t.sqrt();
                out.push(PeakCandidate {
                    h: hp,
                    ky,
                    nu: [nu.re, nu.im],
                    predicted: 1.0 / (hp * hp * nu.im.abs()),
                });
            }
        }
    }
    out.sort_by(|a, b| b.predicted.total_cmp(&a.predicted));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakPoint {
    pub h: f64,
    pub h_peak: f64,
    pub k: usize,
    pub value: f64,
    pub predicted: f64,
    pub residual: f64,
    pub evaluations: usize,
}

pub fn windowed_peak(
    damping: &DampingProfile,
    h: f64,
    k: usize,
    search: PeakSearch,
    opts: KrylovOptions,
) -> Result<PeakPoint> {
    let cands = averaged_peak_candidates(damping, h, k, search.width)?;
    let mut best: Option<PeakPoint> = None;
    let mut evaluations = 0;
    let mut warm: Vec<C64> = Vec::new();
    let eval = |hp: f64, warm: &mut Vec<C64>, evaluations: &mut usize| -> Result<(f64, f64)> {
        let op = StationaryOperator::new(damping, hp, k)?;
        let est = if warm.is_empty() {
            resolvent_norm_with(&op, ResolventMethod::Krylov, opts)?
        } else {
            krylov_resolvent_from(&op, opts, warm)?
        };
        *evaluations += 1;
        *warm = est.vector;
        Ok((est.norm, est.residual))
    };
    let endpoints = [h, h / (1.0 + search.width * h)];
    for &hp in &endpoints {
        let (v, r) = eval(hp, &mut warm, &mut evaluations)?;
        if best.as_ref().is_none_or(|b| v > b.value) {
            best = Some(PeakPoint {
                h,
                h_peak: hp,
                k,
                value: v,
                predicted: 0.0,
                residual: r,
                evaluations: 0,
            });
        }
    }
    for cand in cands.iter().take(search.candidates) {
        warm.clear();
        let half = search.bracket * 0.5 * cand.h * cand.h * cand.nu[1].abs() + 1e-9;
        let (mut a, mut b) = (cand.h * (1.0 - half), cand.h * (1.0 + half));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = eval(x1, &mut warm, &mut evaluations)?;
        let mut f2 = eval(x2, &mut warm, &mut evaluations)?;
        for _ in 0..search.golden_steps {
            if f1.0 > f2.0 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = eval(x1, &mut warm, &mut evaluations)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = eval(x2, &mut warm, &mut evaluations)?;
            }
        }
        let (hp, (v, r)) = if f1.0 > f2.0 { (x1, f1) } else { (x2, f2) };
        if best.as_ref().is_none_or(|bp| v > bp.value) {
            best = Some(PeakPoint {
                h,
                h_peak: hp,
                k,
                value: v,
                predicted: cand.predicted,
                residual: r,
                evaluations: 0,
            });
        }
    }
    let mut best = best.expect("endpoints evaluated");
    best.evaluations = evaluations;
    Ok(best)
}

/// Windowed-peak counterpart of [`exponent_sweep`].
pub fn peak_sweep(
    damping: &DampingProfile,
    h_list: &[f64],
    k_rule: impl Fn(f64) -> usize + Sync,
    search: PeakSearch,
    tolerance: f64,
) -> Result<(SweepResult, Vec<PeakPoint>)> {
    if h_list.len() < 5 {
        return Err(LabError::TooFewPoints {
            got: h_list.len(),
            required: 5,
        });
    }
    let (points, peaks): (Vec<SweepPoint>, Vec<PeakPoint>) = h_list
        .par_iter()
        .map(|&h| {
            let t = Instant::now();
            let p = windowed_peak(damping, h, k_rule(h), search, KrylovOptions::default())?;
            let point = SweepPoint {
                h,
                k: p.k,
                value: p.value,
                residual: p.residual,
                iterations: p.evaluations,
                wall_time_ms: t.elapsed().as_secs_f64() * 1e3,
            };
            Ok((point, p))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok((
        SweepResult::from_points(points, predicted_exponent(damping), tolerance),
        peaks,
    ))
}

/// Real spectral second-derivative matrix on `n` odd equispaced nodes.
fn second_derivative_matrix(n: usize) -> Mat<f64> {
    let k = (n / 2) as i64;
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            (-k..=k)
                .map(|m| {
                    -((m * m) as f64)
                        * (2.0 * std::f64::consts::PI * (m * d as i64) as f64 / n as f64).cos()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect();
    Mat::from_fn(n, n, |i, j| {
        kernel[(i as i64 - j as i64).rem_euclid(n as i64) as usize]
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorSpectrum {
    pub k: usize,
    pub eigenvalues: Vec<C64>,
    pub max_real: f64,
    pub band: (f64, f64),
    /// `min |Re lambda|` over eigenvalues with `|Im lambda|` in the band.
    pub min_abs_real_in_band: Option<f64>,
    /// Log-log fit of the per-unit-bin minimum of `|Re lambda|` against `|Im lambda|`.
    pub decay_fit: Option<LogLogFit>,
}

impl GeneratorSpectrum {
    /// `-1 / slope` of the decay fit, the rate the spectrum suggests.
    pub fn alpha_fit(&self) -> Option<f64> {
        self.decay_fit.map(|f| -1.0 / f.slope)
    }
}

/// Eigenvalues of `[[0, I], [Delta, -a]]` on the physical grid (unitarily
/// equivalent to the Fourier basis).
pub fn generator_spectrum(damping: &DampingProfile, k: usize) -> Result<GeneratorSpectrum> {
    if !(1..=GENERATOR_MAX_K).contains(&k) {
        return Err(invalid(
            "K",
            format!("must lie in 1..={GENERATOR_MAX_K}, got {k}"),
        ));
    }
    let grid = TorusGrid::new(k);
    let n = grid.side();
    let nn = n * n;
    let a = grid.sample(|x, y| damping.eval(x, y));
    let d2 = second_derivative_matrix(n);
    // Similarity diag(1, scale): both off-diagonal blocks become O(K), which
    // keeps the Hessenberg QR iteration from stalling (it does at K = 16 unscaled).
    let scale = k as f64;
    let g = Mat::<f64>::from_fn(2 * nn, 2 * nn, |r, s| {
        if r < nn {
            if s == r + nn {
                scale
            } else {
                0.0
            }
        } else if s < nn {
            let (i, l) = ((r - nn) / n, (r - nn) % n);
            let (i2, l2) = (s / n, s % n);
            let mut v = 0.0;
            if l == l2 {
                v += d2[(i, i2)];
            }
            if i == i2 {
                v += d2[(l, l2)];
            }
            v / scale
        } else if s == r {
            -a[r - nn]
        } else {
            0.0
        }
    });
    let mut eigenvalues: Vec<C64> = g
        .eigenvalues()
        .map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    eigenvalues.sort_by(|x, y| x.im.total_cmp(&y.im).then(x.re.total_cmp(&y.re)));
    let max_real = eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, l| m.max(l.re));
    let band = (0.5, k as f64 / 2.0);
    let in_band: Vec<&C64> = eigenvalues
        .iter()
        .filter(|l| l.im.abs() >= band.0 && l.im.abs() <= band.1)
        .collect();
    let min_abs_real_in_band = in_band.iter().map(|l| l.re.abs()).reduce(f64::min);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    for l in &in_band {
        let m = l.im.abs();
        if m < 1.0 {
            continue;
        }
        let b = m.floor();
        match bins.iter_mut().find(|p| p.0 == b) {
            Some(p) => p.1 = p.1.min(l.re.abs()),
            None => bins.push((b, l.re.abs())),
        }
    }
    bins.retain(|p| p.1 > 0.0);
    let decay_fit = loglog_fit(&bins, None).ok();
    Ok(GeneratorSpectrum {
        k,
        eigenvalues,
        max_real,
        band,
        min_abs_real_in_band,
        decay_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::{make_disk_damping, make_strip_damping};
    use rand::Rng;

    #[test]
    fn undamped_operator_is_diagonal() {
        let op = StationaryOperator::new(&DampingProfile::zero(), 0.8, 6).unwrap();
        let u = FourierField2D::mode(6, 0.8, 1, 0);
        let v = op.apply(&u).unwrap();
        assert!((v.get(1, 0) - c(0.64 - 1.0)).norm() < 1e-15);
        let est = resolvent_norm(&op, ResolventMethod::Krylov).unwrap();
        assert!((est.norm - 1.0 / 0.28).abs() < 1e-12 * est.norm);
        let dense = resolvent_norm(&op, ResolventMethod::DenseSvd).unwrap();
        assert!((dense.norm - est.norm).abs() < 1e-12 * est.norm);
    }

    #[test]
    fn constant_damping_adds_imaginary_shift() {
        let op = StationaryOperator::new(&DampingProfile::constant(2.0).unwrap(), 0.3, 5).unwrap();
        let u = FourierField2D::random(5, 0.3, &mut ChaCha8Rng::seed_from_u64(3));
        let v = op.apply(&u).unwrap();
        for (idx, (a, b)) in v.coeffs().iter().zip(u.coeffs()).enumerate() {
            let want = b * C64::new(op.symbol()[idx], 0.6);
            assert!((a - want).norm() < 1e-13);
        }
    }

    #[test]
    fn exact_resonance_is_singular() {
        let op = StationaryOperator::new(&DampingProfile::zero(), 0.5, 6).unwrap();
        assert!(matches!(
            resolvent_norm(&op, ResolventMethod::DenseSvd),
            Err(LabError::Singular(_))
        ));
        assert!(matches!(
            resolvent_norm(&op, ResolventMethod::Krylov),
            Err(LabError::Singular(_))
        ));
    }

    #[test]
    fn matrix_free_matches_dense_assembly() {
        let d = make_disk_damping([0.2, -0.4], 1.2, 5.0).unwrap();
        let op = StationaryOperator::new(&d, 0.3, 8).unwrap();
        let m = op.to_dense();
        let u = FourierField2D::random(8, 0.3, &mut ChaCha8Rng::seed_from_u64(9));
        let a = op.apply_coeffs(u.coeffs());
        let b = linalg::matvec(&m, u.coeffs());
        let worst = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn apply_is_linear() {
        let d = make_disk_damping([0.0, 0.0], 1.0, 5.0).unwrap();
        let op = StationaryOperator::new(&d, 0.2, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = FourierField2D::random(10, 0.2, &mut rng);
        let v = FourierField2D::random(10, 0.2, &mut rng);
        let (al, be) = (
            C64::new(rng.random(), rng.random()),
            C64::new(rng.random(), rng.random()),
        );
        let comb: Vec<C64> = u
            .coeffs()
            .iter()
            .zip(v.coeffs())
            .map(|(x, y)| al * x + be * y)
            .collect();
        let lhs = op.apply_coeffs(&comb);
        let (au, av) = (op.apply_coeffs(u.coeffs()), op.apply_coeffs(v.coeffs()));
        let err: Vec<C64> = lhs
            .iter()
            .zip(au.iter().zip(&av))
            .map(|(l, (x, y))| l - al * x - be * y)
            .collect();
        assert!(norm(&err) <= 1e-12 * (u.norm() + v.norm()));
    }

    #[test]
    fn krylov_matches_dense_on_disk_and_strip() {
        let disk = make_disk_damping([0.0, 0.0], 1.0, 5.0).unwrap();
        let strip = make_strip_damping(&[(-1.0, 1.0)], 5.0).unwrap();
        for (d, h) in [(&disk, 0.23), (&strip, 0.25)] {
            let op = StationaryOperator::new(d, h, 12).unwrap();
            let dense = resolvent_norm(&op, ResolventMethod::DenseSvd).unwrap();
            let kry = resolvent_norm(&op, ResolventMethod::Krylov).unwrap();
            assert!(
                (dense.norm - kry.norm).abs() < 1e-6 * dense.norm,
                "{} vs {}",
                dense.norm,
                kry.norm
            );
            assert!((kry.residual * kry.norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn apriori_identities_hold_for_any_field() {
        let d = make_disk_damping([0.0, 0.0], 1.0, 5.0).unwrap();
        let op = StationaryOperator::new(&d, 0.15, 14).unwrap();
        let u = FourierField2D::random(14, 0.15, &mut ChaCha8Rng::seed_from_u64(11));
        let ids = apriori_identities(&op, &u).unwrap();
        assert!(ids.residual(u.norm().powi(2)) < 1e-10);
    }

    #[test]
    fn predicted_exponents() {
        let d = make_disk_damping([0.0, 0.0], 1.0, 5.0).unwrap();
        let s = make_strip_damping(&[(-1.0, 1.0)], 5.0).unwrap();
        assert!((predicted_exponent(&d).unwrap() - 32.0 / 15.0).abs() < 1e-15);
        assert!((predicted_exponent(&s).unwrap() - 15.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn undamped_generator_is_conservative() {
        let g = generator_spectrum(&DampingProfile::zero(), 4).unwrap();
        // The constant mode is a 2x2 Jordan block; its eigenvalues split by ~sqrt(eps).
        assert!(g
            .eigenvalues
            .iter()
            .all(|l| l.re.abs() < 1e-9 || l.norm() < 1e-6));
        let mut ims: Vec<f64> = g.eigenvalues.iter().map(|l| l.im.abs()).collect();
        ims.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (-4i64..=4)
            .flat_map(|a| (-4i64..=4).map(move |b| ((a * a + b * b) as f64).sqrt()))
            .flat_map(|m| [m, m])
            .collect();
        want.sort_by(f64::total_cmp);
        for (x, y) in ims.iter().zip(&want) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_damping_generator_roots() {
        let cst = 0.4;
        let g = generator_spectrum(&DampingProfile::constant(cst).unwrap(), 3).unwrap();
        for l in &g.eigenvalues {
            let q = l * l + cst * l;
            let m2 = -q.re;
            assert!(q.im.abs() < 1e-9 && (m2 - m2.round()).abs() < 1e-9);
        }
        assert!(g
            .eigenvalues
            .iter()
            .filter(|l| l.im.abs() > 1.0)
            .all(|l| (l.re + cst / 2.0).abs() < 1e-9));
    }
}
