//! The reduced problem `-h^2 v'' - E v + i h W v + h^2 kappa W^{1/2} v' = r`
//! on the circle: collocation solver, energy regimes, weighted-energy and
//! Morawetz diagnostics, and the maximal resolvent
//! `||(-d^2 - lambda^2 + i W / h)^{-1}||` over the admissible `lambda` window.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{average_along, RationalDirection};
use crate::damping::{make_disk_damping, make_strip_damping};
use crate::error::{invalid, LabError, Result};
use crate::field::{gaussian, norm, Spectral1D};
use crate::linalg::{assemble, c, gmres, lanczos_extreme, solve_cyclic_tridiagonal, GmresOptions};
use crate::pseudodiff::smooth_step;
use crate::spectral2d::{singular_guard, smallest_singular_triplet, SweepPoint, SweepResult};

pub const MIN_GRID: usize = 512;
pub const DENSE_SOLVE_MAX: usize = 2048;
pub const DENSE_SVD_MAX: usize = 512;
/// Bound on `|kappa|` and its grid slope.
pub const KAPPA_BOUND: f64 = 100.0;
pub const DEFAULT_C1: f64 = 1.0;

pub fn delta_of(theta: f64) -> f64 {
    theta / (2.0 * theta + 1.0)
}

/// Hölder parameter of a strip profile vanishing like `d^gamma`.
pub fn strip_theta(gamma: f64) -> f64 {
    1.0 / gamma
}

/// Hölder parameter of the averaged disk damping of order `beta`.
pub fn disk_theta(beta: f64) -> f64 {
    2.0 / (2.0 * beta + 1.0)
}

/// Strip damping restricted to `y = 0` on the `n` collocation nodes.
pub fn strip_samples(intervals: &[(f64, f64)], gamma: f64, n: usize) -> Result<Vec<f64>> {
    let f = make_strip_damping(intervals, gamma)?;
    Ok(Spectral1D::new(n)
        .nodes()
        .iter()
        .map(|&x| f.eval(x, 0.0))
        .collect())
}

/// Vertical average of the disk damping centred at the origin.
pub fn disk_average_samples(r0: f64, beta: f64, n: usize) -> Result<Vec<f64>> {
    let f = make_disk_damping([0.0, 0.0], r0, beta)?;
    Ok(average_along(&f, RationalDirection::vertical(), n)?.samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaProfile {
    Constant(f64),
    Cosine { mean: f64, amplitude: f64 },
}

impl Default for KappaProfile {
    fn default() -> Self {
        Self::Constant(1.0)
    }
}

impl KappaProfile {
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let x = Spectral1D::new(n).nodes();
        match *self {
            Self::Constant(k) => vec![k; n],
            Self::Cosine { mean, amplitude } => {
                x.iter().map(|t| mean + amplitude * t.cos()).collect()
            }
        }
    }
}

/// Forcing with seeded Gaussian coefficients on `|k| <= kmax`, normalized in
/// L². The same seed gives the same function on every grid with `n > 2 kmax`.
pub fn band_limited_forcing(n: usize, kmax: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(i64, C64)> = (-(kmax as i64)..=kmax as i64)
        .map(|k| (k, C64::new(gaussian(&mut rng), gaussian(&mut rng))))
        .collect();
    let s = Spectral1D::new(n);
    let v: Vec<C64> = s
        .nodes()
        .iter()
        .map(|&x| {
            modes
                .iter()
                .map(|&(k, a)| a * C64::from_polar(1.0, k as f64 * x))
                .sum()
        })
        .collect();
    let l = s.l2_norm(&v);
    v.into_iter().map(|z| z / l).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedProblem1D {
    h: f64,
    e: f64,
    w: Vec<f64>,
    kappa: Vec<f64>,
    r: Vec<C64>,
    theta: f64,
}

impl ReducedProblem1D {
    pub fn new(
        h: f64,
        e: f64,
        w: Vec<f64>,
        kappa: Vec<f64>,
        r: Vec<C64>,
        theta: f64,
    ) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(invalid("h", format!("must lie in (0, 1), got {h}")));
        }
        if !e.is_finite() {
            return Err(invalid("E", "must be finite"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid("theta", format!("must be positive, got {theta}")));
        }
        let n = w.len();
        if n < 3 || kappa.len() != n || r.len() != n {
            return Err(invalid(
                "grid",
                format!(
                    "W, kappa and r need equal lengths >= 3, got {}, {}, {}",
                    n,
                    kappa.len(),
                    r.len()
                ),
            ));
        }
        if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(invalid("W", "samples must be finite and nonnegative"));
        }
        let dx = 2.0 * PI / n as f64;
        let sup = kappa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slope = (0..n).fold(0.0f64, |m, j| {
            m.max((kappa[(j + 1) % n] - kappa[j]).abs() / dx)
        });
        if !(sup <= KAPPA_BOUND && slope <= KAPPA_BOUND) {
            return Err(invalid(
                "kappa",
                format!("|kappa| = {sup:.3e} and slope {slope:.3e} must stay below {KAPPA_BOUND}"),
            ));
        }
        Ok(Self {
            h,
            e,
            w,
            kappa,
            r,
            theta,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn energy(&self) -> f64 {
        self.e
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn r(&self) -> &[C64] {
        &self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn delta(&self) -> f64 {
        delta_of(self.theta)
    }

    pub fn grid_n(&self) -> usize {
        self.w.len()
    }

    pub fn lambda_sq(&self) -> f64 {
        self.e / (self.h * self.h)
    }

    pub fn with_forcing(&self, r: Vec<C64>) -> Result<Self> {
        Self::new(
            self.h,
            self.e,
            self.w.clone(),
            self.kappa.clone(),
            r,
            self.theta,
        )
    }

    pub fn with_energy(&self, e: f64) -> Result<Self> {
        Self::new(
            self.h,
            e,
            self.w.clone(),
            self.kappa.clone(),
            self.r.clone(),
            self.theta,
        )
    }

    fn is_undamped(&self) -> bool {
        self.w.iter().all(|&v| v == 0.0)
    }

    fn operator(&self) -> Collocation {
        let drift = self
            .w
            .iter()
            .zip(&self.kappa)
            .map(|(w, k)| self.h * self.h * k * w.sqrt())
            .collect();
        Collocation::new(
            self.h * self.h,
            self.e,
            self.w.iter().map(|w| self.h * w).collect(),
            drift,
        )
    }

    /// The discrete left-hand side applied to grid samples.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.operator().apply(v)
    }
}

/// `v -> stiff * (-v'') - shift * v + i pot * v + drift * v'` on collocation
/// nodes. The first derivative drops the Nyquist mode.
struct Collocation {
    s: Spectral1D,
    stiff: f64,
    shift: f64,
    pot: Vec<f64>,
    drift: Vec<f64>,
}

impl Collocation {
    fn new(stiff: f64, shift: f64, pot: Vec<f64>, drift: Vec<f64>) -> Self {
        Self {
            s: Spectral1D::new(pot.len()),
            stiff,
            shift,
            pot,
            drift,
        }
    }

    fn norm_bound(&self) -> f64 {
        let kmax = (self.pot.len() / 2) as f64;
        let pmax = self.pot.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        (self.stiff * kmax * kmax - self.shift)
            .abs()
            .max(self.shift.abs())
            + pmax
    }

    fn has_drift(&self) -> bool {
        self.drift.iter().any(|&d| d != 0.0)
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = self
            .s
            .apply_multiplier(v, |k| c(self.stiff * (k * k) as f64 - self.shift));
        for ((o, vi), p) in out.iter_mut().zip(v).zip(&self.pot) {
            *o += C64::new(0.0, *p) * vi;
        }
        if self.has_drift() {
            let dv = self.s.derivative(v);
            for ((o, d), q) in out.iter_mut().zip(&dv).zip(&self.drift) {
                *o += d * q;
            }
        }
        out
    }

    /// Adjoint; only used without drift, where it flips the potential sign.
    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        debug_assert!(!self.has_drift());
        let mut out = self
            .s
            .apply_multiplier(v, |k| c(self.stiff * (k * k) as f64 - self.shift));
        for ((o, vi), p) in out.iter_mut().zip(v).zip(&self.pot) {
            *o -= C64::new(0.0, *p) * vi;
        }
        out
    }

    /// Second-order finite-difference analogue, solved cyclically.
    fn fd_solve(&self, rhs: &[C64], adjoint: bool) -> Vec<C64> {
        let n = self.pot.len();
        let dx = self.s.spacing();
        let off = -self.stiff / (dx * dx);
        let sign = if adjoint { -1.0 } else { 1.0 };
        let mut lower = vec![c(off); n];
        let mut upper = vec![c(off); n];
        let diag: Vec<C64> = self
            .pot
            .iter()
            .map(|p| C64::new(2.0 * self.stiff / (dx * dx) - self.shift, sign * p))
            .collect();
        if self.has_drift() && !adjoint {
            for j in 0..n {
                lower[j] -= c(self.drift[j] / (2.0 * dx));
                upper[j] += c(self.drift[j] / (2.0 * dx));
            }
        }
        solve_cyclic_tridiagonal(&lower, &diag, &upper, rhs)
    }

    fn dense(&self) -> Mat<C64> {
        assemble(self.pot.len(), |v| self.apply(v))
    }
}

/// Residual relative to the largest of `||r||`, `||h^2 v''||`, `||E v||` and
/// `||h W v||`. Measuring against `||r||` alone hits the FFT rounding floor
/// near `1e-10` at 4096 nodes, since the solution is far larger than `r`.
fn relative_residual(op: &Collocation, v: &[C64], r: &[C64], w: &[f64], h: f64) -> f64 {
    let av = op.apply(v);
    let d: Vec<C64> = av.iter().zip(r).map(|(a, b)| a - b).collect();
    let stiff = norm(&op.s.second_derivative(v)) * op.stiff;
    let shift = norm(v) * op.shift.abs();
    let damp = norm(
        &v.iter()
            .zip(w)
            .map(|(z, a)| z * (h * a))
            .collect::<Vec<_>>(),
    );
    let scale = norm(r)
        .max(stiff)
        .max(shift)
        .max(damp)
        .max(f64::MIN_POSITIVE);
    norm(&d) / scale
}

/// GMRES restarted on the true residual until it falls below `tol`; plain
/// GMRES stagnates near `1e-10` for the stiff operators of small `h`.
fn refined_gmres(op: &Collocation, r: &[C64], tol: f64) -> Result<Vec<C64>> {
    let opts = GmresOptions {
        restart: 80,
        tol: 1e-8,
        max_iter: 4000,
        op_norm: 0.0,
    };
    let rn = norm(r);
    let mut x = vec![c(0.0); r.len()];
    let mut d = r.to_vec();
    let mut last = f64::INFINITY;
    for _ in 0..6 {
        let dn = norm(&d);
        if dn <= tol * rn || dn > 0.5 * last {
            break;
        }
        last = dn;
        let dx = gmres(|v| op.apply(v), |v| op.fd_solve(v, false), &d, None, opts)?.x;
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        let ax = op.apply(&x);
        d = r.iter().zip(&ax).map(|(a, b)| a - b).collect();
    }
    Ok(x)
}

/// Collocation solve: exact diagonal inversion without damping, dense LU with
/// one refinement step up to [`DENSE_SOLVE_MAX`] nodes, preconditioned GMRES
/// beyond. Fails unless the discrete residual is at most `1e-10` relative.
pub fn solve_reduced(p: &ReducedProblem1D) -> Result<Vec<C64>> {
    let n = p.grid_n();
    if n < MIN_GRID {
        return Err(invalid(
            "grid_n",
            format!("must be at least {MIN_GRID}, got {n}"),
        ));
    }
    let op = p.operator();
    if p.is_undamped() {
        let s = &op.s;
        let mut coef = s.forward(&p.r);
        let mut smin = f64::INFINITY;
        for (j, cj) in coef.iter_mut().enumerate() {
            let k = s.wavenumber(j) as f64;
            let sym = p.h * p.h * k * k - p.e;
            smin = smin.min(sym.abs());
            *cj /= sym;
        }
        if smin <= 1e-13 * p.e.abs().max(p.h * p.h) {
            return Err(LabError::Singular(smin));
        }
        return Ok(s.inverse(&coef));
    }
    let v = if n <= DENSE_SOLVE_MAX {
        let lu = op.dense().partial_piv_lu();
        let solve = |rhs: &[C64]| {
            let mut m = Mat::<C64>::from_fn(n, 1, |i, _| rhs[i]);
            lu.solve_in_place(m.as_mut());
            (0..n).map(|i| m[(i, 0)]).collect::<Vec<C64>>()
        };
        let mut v = solve(&p.r);
        let av = op.apply(&v);
        let d: Vec<C64> = p.r.iter().zip(&av).map(|(a, b)| a - b).collect();
        let dv = solve(&d);
        v.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
        v
    } else {
        refined_gmres(&op, &p.r, 1e-12)?
    };
    if v.iter().any(|z| !z.is_finite()) {
        return Err(LabError::Singular(0.0));
    }
    let rel = relative_residual(&op, &v, &p.r, &p.w, p.h);
    if rel > 1e-10 {
        return Err(LabError::NotConverged {
            iterations: 1,
            estimate: norm(&v),
            residual: rel,
        });
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Elliptic,
    LowHyperbolic,
    HighHyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeTag {
    pub regime: Regime,
    pub c1: f64,
    pub delta: f64,
}

/// `E <= c1 h^2` elliptic, `E <= h^{1+delta}` low hyperbolic, else high.
pub fn classify_regime(h: f64, e: f64, c1: f64, delta: f64) -> RegimeTag {
    debug_assert!(h > 0.0 && h < 1.0);
    let regime = if e <= c1 * h * h {
        Regime::Elliptic
    } else if e <= h.powf(1.0 + delta) {
        Regime::LowHyperbolic
    } else {
        Regime::HighHyperbolic
    };
    RegimeTag { regime, c1, delta }
}

/// `count` energies per regime, geometric inside each band; the elliptic band
/// starts two decades below `c1 h^2` and the high band ends at `E = 1/2`.
pub fn regime_energy_grid(h: f64, c1: f64, delta: f64, count: usize) -> Vec<f64> {
    let e1 = c1 * h * h;
    let e2 = h.powf(1.0 + delta);
    let bands = [(e1 * 1e-2, e1), (e1, e2), (e2, 0.5)];
    let mut out = Vec::new();
    for (a, b) in bands {
        if !(b > a) {
            continue;
        }
        for i in 0..count {
            let t = (i as f64 + 0.5) / count as f64;
            out.push(a * (b / a).powf(t));
        }
    }
    out
}

/// Exponents `(2 + theta/(2 theta + 1), (3 theta + 1)/(2 (2 theta + 1)))`
/// weighting `||r||` and `||W^{1/2} v||` in the uniform estimate.
pub fn gain_exponents(theta: f64) -> (f64, f64) {
    let d = 2.0 * theta + 1.0;
    (2.0 + theta / d, (3.0 * theta + 1.0) / (2.0 * d))
}

pub fn uniform_estimate_gain(p: &ReducedProblem1D, v: &[C64]) -> f64 {
    let s = Spectral1D::new(p.grid_n());
    let (a, b) = gain_exponents(p.theta);
    let wv: Vec<C64> = v.iter().zip(&p.w).map(|(z, w)| z * w.sqrt()).collect();
    let den = p.h.powf(-a) * s.l2_norm(&p.r) + p.h.powf(-b) * s.l2_norm(&wv);
    s.l2_norm(v) / den
}

/// Largest gain over `energies` for the same forcing.
pub fn max_gain_over_energies(p: &ReducedProblem1D, energies: &[f64]) -> Result<f64> {
    let mut best = 0.0f64;
    for &e in energies {
        let q = p.with_energy(e)?;
        let v = solve_reduced(&q)?;
        best = best.max(uniform_estimate_gain(&q, &v));
    }
    Ok(best)
}

/// Spectral derivative keeping the Nyquist mode, so that `||v'||^2` matches
/// `<-v'', v>` exactly.
fn derivative_full(s: &Spectral1D, v: &[C64]) -> Vec<C64> {
    s.apply_multiplier(v, |k| C64::new(0.0, k as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedIdentity {
    pub lhs: f64,
    pub rhs: f64,
}

impl WeightedIdentity {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs() / (self.lhs.abs() + self.rhs.abs() + f64::MIN_POSITIVE)
    }
}

/// Both sides of
/// `h^2 int w|v'|^2 - h^2/2 int w''|v|^2 - E int w|v|^2
///  - h^2/2 int (w kappa W^{1/2})' |v|^2 = Re int r w conj(v)`.
pub fn weighted_identity(p: &ReducedProblem1D, v: &[C64], w: &[f64]) -> WeightedIdentity {
    let s = Spectral1D::new(p.grid_n());
    let dx = s.spacing();
    let h2 = p.h * p.h;
    let dv = derivative_full(&s, v);
    let w2 = s.second_derivative_real(w);
    let g: Vec<f64> = (0..w.len())
        .map(|j| w[j] * p.kappa[j] * p.w[j].sqrt())
        .collect();
    let dg = s.derivative_real(&g);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for j in 0..w.len() {
        let a = v[j].norm_sqr();
        lhs += h2 * w[j] * dv[j].norm_sqr()
            - 0.5 * h2 * w2[j] * a
            - p.e * w[j] * a
            - 0.5 * h2 * dg[j] * a;
        rhs += (p.r[j] * w[j] * v[j].conj()).re;
    }
    WeightedIdentity {
        lhs: lhs * dx,
        rhs: rhs * dx,
    }
}

pub fn weighted_identity_residual(p: &ReducedProblem1D, v: &[C64], w: &[f64]) -> f64 {
    weighted_identity(p, v, w).residual()
}

/// Energy and damping identities in the `lambda` scaling, with the drift term
/// moved into the forcing `r/h^2 - kappa W^{1/2} v'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriIdentities1D {
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub damping_lhs: f64,
    pub damping_rhs: f64,
}

impl AprioriIdentities1D {
    pub fn residual(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / (a.abs() + b.abs() + f64::MIN_POSITIVE);
        rel(self.energy_lhs, self.energy_rhs).max(rel(self.damping_lhs, self.damping_rhs))
    }
}

pub fn apriori_identities_1d(p: &ReducedProblem1D, v: &[C64]) -> AprioriIdentities1D {
    let s = Spectral1D::new(p.grid_n());
    let h2 = p.h * p.h;
    let dv = s.derivative(v);
    let rt: Vec<C64> = (0..v.len())
        .map(|j| p.r[j] / h2 - dv[j] * (p.kappa[j] * p.w[j].sqrt()))
        .collect();
    let lap = s.second_derivative(v);
    let minus_lap: Vec<C64> = lap.iter().map(|z| -z).collect();
    let grad_sq = s.l2_inner(&minus_lap, v).re;
    let v_sq = s.l2_inner(v, v).re;
    let wv: Vec<C64> = v.iter().zip(&p.w).map(|(z, w)| z * *w).collect();
    let f = s.l2_inner(&rt, v);
    AprioriIdentities1D {
        energy_lhs: grad_sq - p.lambda_sq() * v_sq,
        energy_rhs: f.re,
        damping_lhs: s.l2_inner(&wv, v).re / p.h,
        damping_rhs: f.im,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Krylov1DOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub seed: u64,
}

impl Default for Krylov1DOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 300,
            inner_tol: 1e-10,
            inner_max_iter: 3000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolvent1DEstimate {
    pub norm: f64,
    pub sigma_min: f64,
    /// `||A u||` for the returned unit singular vector.
    pub residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub vector: Vec<C64>,
}

/// `||(-d^2 - lambda^2 + i W / h)^{-1}||` on the collocation grid of `W`.
pub fn resolvent_1d_norm(h: f64, lambda: f64, w: &[f64]) -> Result<f64> {
    Ok(resolvent_1d(h, lambda * lambda, w, Krylov1DOptions::default())?.norm)
}

/// Exact diagonal value without damping, dense SVD up to [`DENSE_SVD_MAX`]
/// nodes, Lanczos on `(A^* A)^{-1}` beyond.
pub fn resolvent_1d(
    h: f64,
    lambda_sq: f64,
    w: &[f64],
    opts: Krylov1DOptions,
) -> Result<Resolvent1DEstimate> {
    resolvent_1d_impl(h, lambda_sq, w, opts, None, false)
}

/// Lanczos estimate regardless of grid size, for cross-checks against SVD.
pub fn resolvent_1d_krylov(
    h: f64,
    lambda_sq: f64,
    w: &[f64],
    opts: Krylov1DOptions,
) -> Result<Resolvent1DEstimate> {
    resolvent_1d_impl(h, lambda_sq, w, opts, None, true)
}

/// As [`resolvent_1d`], with the Lanczos start biased towards `warm`.
pub fn resolvent_1d_from(
    h: f64,
    lambda_sq: f64,
    w: &[f64],
    opts: Krylov1DOptions,
    warm: &[C64],
) -> Result<Resolvent1DEstimate> {
    resolvent_1d_impl(h, lambda_sq, w, opts, Some(warm), false)
}

fn resolvent_1d_impl(
    h: f64,
    lambda_sq: f64,
    w: &[f64],
    opts: Krylov1DOptions,
    warm: Option<&[C64]>,
    force_krylov: bool,
) -> Result<Resolvent1DEstimate> {
    let n = w.len();
    if n < 8 {
        return Err(invalid("grid_n", format!("must be at least 8, got {n}")));
    }
    if !(h > 0.0) {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    let op = Collocation::new(
        1.0,
        lambda_sq,
        w.iter().map(|v| v / h).collect(),
        vec![0.0; n],
    );
    if w.iter().all(|&v| v == 0.0) {
        let s = &op.s;
        let (mut jmin, mut smin, mut smax) = (0, f64::INFINITY, 0.0f64);
        for j in 0..n {
            let k = s.wavenumber(j) as f64;
            let d = (k * k - lambda_sq).abs();
            if d < smin {
                smin = d;
                jmin = j;
            }
            smax = smax.max(d);
        }
        singular_guard(smin, smax)?;
        let mut e = vec![c(0.0); n];
        e[jmin] = c(1.0);
        let mut u = s.inverse(&e);
        let un = norm(&u);
        u.iter_mut().for_each(|z| *z /= un);
        return Ok(Resolvent1DEstimate {
            norm: 1.0 / smin,
            sigma_min: smin,
            residual: smin,
            iterations: 0,
            vector: u,
        });
    }
    if n <= DENSE_SVD_MAX && !force_krylov {
        let (sigma, smax, u) = smallest_singular_triplet(&op.dense())?;
        singular_guard(sigma, smax)?;
        let residual = norm(&op.apply(&u));
        return Ok(Resolvent1DEstimate {
            norm: 1.0 / sigma,
            sigma_min: sigma,
            residual,
            iterations: 0,
            vector: u,
        });
    }
    let gopts = GmresOptions {
        restart: 60,
        tol: opts.inner_tol,
        max_iter: opts.inner_max_iter,
        op_norm: op.norm_bound(),
    };
    let inverse_normal = |v: &[C64]| -> Result<Vec<C64>> {
        let y = gmres(
            |x| op.apply_adjoint(x),
            |x| op.fd_solve(x, true),
            v,
            None,
            gopts,
        )?;
        Ok(gmres(
            |x| op.apply(x),
            |x| op.fd_solve(x, false),
            &y.x,
            None,
            gopts,
        )?
        .x)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<C64> = (0..n)
        .map(|_| C64::new(gaussian(&mut rng), gaussian(&mut rng)))
        .collect();
    if let Some(wm) = warm.filter(|wm| wm.len() == n) {
        let scale = 1e-3 * norm(wm) / norm(&start);
        start
            .iter_mut()
            .zip(wm)
            .for_each(|(s, v)| *s = v + *s * scale);
    }
    let ritz = lanczos_extreme(&inverse_normal, &start, opts.max_iter, opts.tol)?;
    let theta = ritz.value;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(LabError::Singular(0.0));
    }
    let mut u = inverse_normal(&ritz.vector)?;
    let un = norm(&u);
    u.iter_mut().for_each(|z| *z /= un);
    let residual = norm(&op.apply(&u));
    Ok(Resolvent1DEstimate {
        norm: theta.sqrt(),
        sigma_min: 1.0 / theta.sqrt(),
        residual,
        iterations: ritz.iterations,
        vector: u,
    })
}

/// Maximization of the 1D resolvent over `lambda`: a logarithmic scan, one
/// golden-section refinement around its argmax, and golden-section searches
/// in `lambda^2` around the least damped resonances of `-d^2 + i W / h`
/// computed on a coarser grid. Peaks are narrower than the scan spacing, so
/// the resonance seeds carry the maximum in practice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub per_decade: usize,
    pub c1: f64,
    pub seed_grid: usize,
    pub seeds: usize,
    /// Half-width of each seed bracket in units of `|Im nu|`.
    pub bracket: f64,
    pub golden_steps: usize,
    pub scan_tol: f64,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        Self {
            per_decade: 40,
            c1: DEFAULT_C1,
            seed_grid: 512,
            seeds: 6,
            bracket: 4.0,
            golden_steps: 30,
            scan_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaPeak {
    pub h: f64,
    pub lambda: f64,
    pub norm: f64,
    pub residual: f64,
    pub evaluations: usize,
    pub from_seed: bool,
}

/// `[sqrt(c1), h^{-(1 - delta)/2}]`.
pub fn lambda_range(h: f64, delta: f64, c1: f64) -> (f64, f64) {
    (c1.sqrt(), h.powf(-(1.0 - delta) / 2.0))
}

pub fn lambda_grid(h: f64, delta: f64, search: &LambdaSearch) -> Vec<f64> {
    let (lo, hi) = lambda_range(h, delta, search.c1);
    let mut out = Vec::new();
    let step = 10f64.powf(1.0 / search.per_decade as f64);
    let mut l = lo;
    while l < hi * (1.0 - 1e-12) {
        out.push(l);
        l *= step;
    }
    out.push(hi);
    out
}

/// Eigenvalues of `-d^2 + i W / h` on a subsampled grid with real part in
/// `[lo2, hi2]`, least damped first.
pub fn seed_resonances(
    h: f64,
    w: &[f64],
    seed_grid: usize,
    lo2: f64,
    hi2: f64,
) -> Result<Vec<C64>> {
    let n = w.len();
    let m = seed_grid.min(n);
    if !n.is_multiple_of(m) {
        return Err(invalid(
            "seed_grid",
            format!("{m} must divide the grid size {n}"),
        ));
    }
    let stride = n / m;
    let ws: Vec<f64> = (0..m).map(|j| w[j * stride]).collect();
    let op = Collocation::new(1.0, 0.0, ws.iter().map(|v| v / h).collect(), vec![0.0; m]);
    let nus = op
        .dense()
        .eigenvalues()
        .map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    let mut out: Vec<C64> = nus
        .into_iter()
        .filter(|z| z.re >= lo2 && z.re <= hi2)
        .collect();
    out.sort_by(|a, b| a.im.abs().total_cmp(&b.im.abs()));
    Ok(out)
}

fn golden_max(
    mut f: impl FnMut(f64) -> Result<(f64, f64)>,
    mut a: f64,
    mut b: f64,
    steps: usize,
) -> Result<(f64, f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..steps {
        if f1.0 > f2.0 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1.0 > f2.0 {
        (x1, f1.0, f1.1)
    } else {
        (x2, f2.0, f2.1)
    })
}

pub fn max_resolvent_1d(
    h: f64,
    w: &[f64],
    delta: f64,
    search: &LambdaSearch,
) -> Result<LambdaPeak> {
    let (lo, hi) = lambda_range(h, delta, search.c1);
    if !(hi > lo) {
        return Err(invalid("h", format!("empty lambda window [{lo}, {hi}]")));
    }
    let scan = Krylov1DOptions {
        tol: search.scan_tol,
        ..Krylov1DOptions::default()
    };
    let fine = Krylov1DOptions::default();
    let mut evaluations = 0usize;
    let mut eval = |l2: f64, opts: Krylov1DOptions, warm: &mut Vec<C64>| -> Result<(f64, f64)> {
        let est = if warm.is_empty() {
            resolvent_1d(h, l2, w, opts)?
        } else {
            resolvent_1d_from(h, l2, w, opts, warm)?
        };
        evaluations += 1;
        *warm = est.vector;
        Ok((est.norm, est.residual))
    };
    let grid = lambda_grid(h, delta, search);
    let mut scanned = Vec::with_capacity(grid.len());
    for &l in &grid {
        scanned.push(eval(l * l, scan, &mut Vec::new())?);
    }
    let imax = (0..grid.len())
        .max_by(|&a, &b| scanned[a].0.total_cmp(&scanned[b].0))
        .expect("nonempty grid");
    let mut best = LambdaPeak {
        h,
        lambda: grid[imax],
        norm: scanned[imax].0,
        residual: scanned[imax].1,
        evaluations: 0,
        from_seed: false,
    };
    let (a, b) = (
        grid[imax.saturating_sub(1)],
        grid[(imax + 1).min(grid.len() - 1)],
    );
    if b > a {
        let mut warm = Vec::new();
        let (x, v, r) = golden_max(|l| eval(l * l, fine, &mut warm), a, b, search.golden_steps)?;
        if v > best.norm {
            best = LambdaPeak {
                lambda: x,
                norm: v,
                residual: r,
                ..best
            };
        }
    }
    let seeds = seed_resonances(h, w, search.seed_grid, lo * lo, hi * hi)?;
    for nu in seeds.iter().take(search.seeds) {
        let half = search.bracket * nu.im.abs() + 1e-9 * nu.re;
        let (a, b) = ((nu.re - half).max(lo * lo), (nu.re + half).min(hi * hi));
        if !(b > a) {
            continue;
        }
        let mut warm = Vec::new();
        let (x, v, r) = golden_max(|l2| eval(l2, fine, &mut warm), a, b, search.golden_steps)?;
        if v > best.norm {
            best = LambdaPeak {
                lambda: x.sqrt(),
                norm: v,
                residual: r,
                from_seed: true,
                ..best
            };
        }
    }
    best.evaluations = evaluations;
    Ok(best)
}

/// Maximal resolvent norms over `h_list`. `norms` fits `ln ||R||` against
/// `ln(1/h)`; `sigma` fits the inverse smallest singular value of the
/// `h`-scaled operator `h^2 (-d^2 - lambda^2) + i h W`, i.e. `||R|| / h^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolvent1DSweep {
    pub norms: SweepResult,
    pub sigma: SweepResult,
    pub peaks: Vec<LambdaPeak>,
}

pub fn resolvent_sweep_1d(
    w: &[f64],
    h_list: &[f64],
    delta: f64,
    predicted: f64,
    tolerances: (f64, f64),
    search: &LambdaSearch,
) -> Result<Resolvent1DSweep> {
    if h_list.len() < 4 {
        return Err(LabError::TooFewPoints {
            got: h_list.len(),
            required: 4,
        });
    }
    let found = h_list
        .par_iter()
        .map(|&h| {
            let t0 = std::time::Instant::now();
            max_resolvent_1d(h, w, delta, search)
                .map(|pk| (h, pk, t0.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut peaks = Vec::new();
    let mut norms = Vec::new();
    let mut sigma = Vec::new();
    for (h, pk, ms) in found {
        let point = SweepPoint {
            h,
            k: w.len(),
            value: pk.norm,
            residual: pk.residual,
            iterations: pk.evaluations,
            wall_time_ms: ms,
        };
        sigma.push(SweepPoint {
            value: pk.norm / (h * h),
            ..point.clone()
        });
        norms.push(point);
        peaks.push(pk);
    }
    Ok(Resolvent1DSweep {
        norms: SweepResult::from_points(norms, Some(predicted), tolerances.0),
        sigma: SweepResult::from_points(sigma, Some(2.0 + predicted), tolerances.1),
        peaks,
    })
}

/// Cutoff weights of the Morawetz multiplier argument for damped intervals
/// `(alpha_j, beta_j)`: `V0`, `chi_h = chi(V0^3 / h^{3 delta})`, the
/// piecewise-constant `Psi_h` with zero mean, its primitive `Phi_h` vanishing
/// at `0`, and `Theta = Psi_h 1_{Psi_h > 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorawetzWeights {
    pub h: f64,
    pub delta: f64,
    pub intervals: Vec<(f64, f64)>,
    pub epsilons: Vec<f64>,
    pub m: f64,
    pub x: Vec<f64>,
    pub v0: Vec<f64>,
    pub chi_h: Vec<f64>,
    pub psi_h: Vec<f64>,
    pub phi_h: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi_sup: f64,
    segments: Vec<(f64, f64, f64)>,
}

/// `chi(s) = 1` for `s <= 1`, `0` for `s >= 2`.
fn plateau_cutoff(s: f64) -> f64 {
    1.0 - smooth_step(s - 1.0)
}

pub fn build_morawetz_weights(
    intervals: &[(f64, f64)],
    h: f64,
    delta: f64,
    epsilons: &[f64],
    n: usize,
) -> Result<MorawetzWeights> {
    if intervals.is_empty() {
        return Err(invalid("intervals", "at least one interval is required"));
    }
    if epsilons.len() != intervals.len() {
        return Err(invalid("epsilons", "one epsilon per interval is required"));
    }
    for (j, &(a, b)) in intervals.iter().enumerate() {
        if !(a > -PI && b < PI && a < b) {
            return Err(invalid(
                "intervals",
                format!("({a}, {b}) must be an interval inside (-pi, pi)"),
            ));
        }
        if j > 0 && a < intervals[j - 1].1 {
            return Err(invalid(
                "intervals",
                "intervals must be sorted and disjoint",
            ));
        }
    }
    let shell = 2.0 * PI * h.powf(delta);
    for (&(a, b), &eps) in intervals.iter().zip(epsilons) {
        if !(eps > shell && eps < 0.5 * (b - a)) {
            return Err(invalid(
                "epsilons",
                format!(
                    "need 2 pi h^delta = {shell:.4} < epsilon = {eps} < half length {:.4} on ({a}, {b})",
                    0.5 * (b - a)
                ),
            ));
        }
    }
    let top = h.powf(-delta);
    let mut num = 2.0 * PI;
    let mut den = 0.0;
    for (&(a, b), &eps) in intervals.iter().zip(epsilons) {
        num += 2.0 * shell * top + 2.0 * (eps - shell) - (b - a);
        den += b - a - 2.0 * eps;
    }
    let m = num / den;
    let mut segments = Vec::new();
    let mut cursor = -PI;
    for (&(a, b), &eps) in intervals.iter().zip(epsilons) {
        segments.push((cursor, a, 1.0));
        segments.push((a, a + shell, top));
        segments.push((a + shell, a + eps, 1.0));
        segments.push((a + eps, b - eps, -m));
        segments.push((b - eps, b - shell, 1.0));
        segments.push((b - shell, b, top));
        cursor = b;
    }
    segments.push((cursor, PI, 1.0));
    let prim = |x: f64| -> f64 {
        segments
            .iter()
            .map(|&(s, e, v)| v * (x.clamp(s, e) - s))
            .sum()
    };
    let psi = |x: f64| -> f64 {
        segments
            .iter()
            .find(|&&(s, e, _)| x >= s && x < e)
            .map_or(1.0, |s| s.2)
    };
    let x = Spectral1D::new(n).nodes();
    let v0: Vec<f64> = x
        .iter()
        .map(|&t| {
            intervals
                .iter()
                .map(|&(a, b)| ((t - a) * (b - t)).max(0.0))
                .sum()
        })
        .collect();
    let h3 = h.powf(3.0 * delta);
    let chi_h = v0.iter().map(|v| plateau_cutoff(v.powi(3) / h3)).collect();
    let psi_h: Vec<f64> = x.iter().map(|&t| psi(t)).collect();
    let p0 = prim(0.0);
    let phi_h: Vec<f64> = x.iter().map(|&t| prim(t) - p0).collect();
    let theta = psi_h
        .iter()
        .map(|&p| if p > 0.0 { p } else { 0.0 })
        .collect();
    let phi_sup = phi_h.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    Ok(MorawetzWeights {
        h,
        delta,
        intervals: intervals.to_vec(),
        epsilons: epsilons.to_vec(),
        m,
        x,
        v0,
        chi_h,
        psi_h,
        phi_h,
        theta,
        phi_sup,
        segments,
    })
}

impl MorawetzWeights {
    /// Exact integral of the piecewise-constant `Psi_h`.
    pub fn psi_integral(&self) -> f64 {
        self.segments.iter().map(|&(s, e, v)| v * (e - s)).sum()
    }

    /// `Phi_h(pi) - Phi_h(-pi)`, zero for a periodic primitive.
    pub fn phi_jump(&self) -> f64 {
        self.psi_integral()
    }

    /// `|v'|^2 + lambda^2 |v|^2` on the grid.
    pub fn energy_density(&self, v: &[C64], lambda: f64) -> Vec<f64> {
        let dv = Spectral1D::new(v.len()).derivative(v);
        v.iter()
            .zip(&dv)
            .map(|(z, d)| d.norm_sqr() + lambda * lambda * z.norm_sqr())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorawetzBalance {
    pub lhs: f64,
    pub damping_term: f64,
    pub forcing_term: f64,
    /// `lhs / (damping_term + forcing_term)`.
    pub constant: f64,
}

/// Both sides of the Morawetz inequality for `v1 = chi_h v`, where `v1`
/// solves `-v1'' - lambda^2 v1 + i W v1 / h = r1` with `r1` computed from `v1`.
pub fn morawetz_balance(
    weights: &MorawetzWeights,
    v: &[C64],
    lambda: f64,
    h: f64,
    w: &[f64],
) -> MorawetzBalance {
    let s = Spectral1D::new(v.len());
    let dx = s.spacing();
    let v1: Vec<C64> = v.iter().zip(&weights.chi_h).map(|(z, k)| z * *k).collect();
    let dv1 = s.derivative(&v1);
    let lap = s.second_derivative(&v1);
    let lam2 = lambda * lambda;
    let e0 = weights.energy_density(&v1, lambda);
    let mut lhs = 0.0;
    let mut damp = c(0.0);
    let mut force = 0.0;
    for j in 0..v.len() {
        let r1 = -lap[j] - v1[j] * lam2 + C64::new(0.0, w[j] / h) * v1[j];
        lhs += weights.psi_h[j] * e0[j];
        damp += v1[j] * dv1[j].conj() * (weights.phi_h[j] * w[j]);
        force += (dv1[j].conj() * r1 * weights.phi_h[j]).re;
    }
    let damping_term = damp.norm() * dx / h;
    let forcing_term = force.abs() * dx;
    MorawetzBalance {
        lhs: lhs * dx,
        damping_term,
        forcing_term,
        constant: lhs * dx / (damping_term + forcing_term),
    }
}

/// `||f||_{H^{-1}}` with Fourier weights `(1 + k^2)^{-1/2}`, normalized so
/// that the unweighted sum is the quadrature L² norm.
pub fn h_minus_one_norm(f: &[C64]) -> f64 {
    let s = Spectral1D::new(f.len());
    let n = f.len() as f64;
    let coef = s.forward(f);
    let sum: f64 = coef
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let k = s.wavenumber(j) as f64;
            z.norm_sqr() / (1.0 + k * k)
        })
        .sum();
    (2.0 * PI * sum / (n * n)).sqrt()
}

/// Quadrature L² norm over the nodes of the arc `(a, b)`, read modulo `2 pi`;
/// an arc of length at least `2 pi` is the whole circle.
pub fn l2_norm_on(v: &[C64], arc: (f64, f64)) -> f64 {
    let s = Spectral1D::new(v.len());
    let len = arc.1 - arc.0;
    let sum: f64 = s
        .nodes()
        .iter()
        .zip(v)
        .filter(|(x, _)| {
            len >= 2.0 * PI
                || ((**x - arc.0).rem_euclid(2.0 * PI) > 0.0
                    && (**x - arc.0).rem_euclid(2.0 * PI) < len)
        })
        .map(|(_, z)| z.norm_sqr())
        .sum();
    (sum * s.spacing()).sqrt()
}

/// `||v|| / (||f1|| / lambda + ||f2||_{H^{-1}} + ||v||_{L^2(I)})` for
/// `-v'' - lambda^2 v = f1 + f2`.
pub fn geometric_control_check(
    v: &[C64],
    lambda: f64,
    f1: &[C64],
    f2: &[C64],
    arc: (f64, f64),
) -> f64 {
    let s = Spectral1D::new(v.len());
    s.l2_norm(v) / (s.l2_norm(f1) / lambda + h_minus_one_norm(f2) + l2_norm_on(v, arc))
}

/// Relative L² distance between two grid functions sampled on grids of
/// sizes `n` and `2n`, compared on the coarse nodes.
pub fn coarse_difference(coarse: &[C64], fine: &[C64]) -> f64 {
    let sub: Vec<C64> = fine
        .iter()
        .step_by(fine.len() / coarse.len())
        .copied()
        .collect();
    let d: Vec<C64> = coarse.iter().zip(&sub).map(|(a, b)| a - b).collect();
    norm(&d) / norm(coarse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(n: usize) -> Vec<f64> {
        Spectral1D::new(n)
            .nodes()
            .iter()
            .map(|&x| 0.5 * (1.0 + x.cos()).powi(3) / 8.0)
            .collect()
    }

    fn problem(n: usize, h: f64, e: f64, w: Vec<f64>, theta: f64) -> ReducedProblem1D {
        let kappa = KappaProfile::default().samples(n);
        let r = band_limited_forcing(n, 12, 7);
        ReducedProblem1D::new(h, e, w, kappa, r, theta).unwrap()
    }

    #[test]
    fn constant_mode_without_damping() {
        let n = 512;
        let p = ReducedProblem1D::new(0.1, -1.0, vec![0.0; n], vec![0.0; n], vec![c(1.0); n], 0.2)
            .unwrap();
        let v = solve_reduced(&p).unwrap();
        assert!(v.iter().all(|z| (z - c(1.0)).norm() < 1e-14));
    }

    #[test]
    fn exact_resonance_is_singular() {
        let n = 512;
        let h = 0.01;
        let p = ReducedProblem1D::new(
            h,
            h * h * 9.0,
            vec![0.0; n],
            vec![1.0; n],
            band_limited_forcing(n, 4, 1),
            0.2,
        )
        .unwrap();
        assert!(matches!(solve_reduced(&p), Err(LabError::Singular(_))));
    }

    #[test]
    fn small_grid_and_rough_kappa_rejected() {
        let p = ReducedProblem1D::new(
            0.1,
            0.5,
            vec![0.0; 256],
            vec![1.0; 256],
            vec![c(1.0); 256],
            0.2,
        )
        .unwrap();
        assert!(solve_reduced(&p).is_err());
        let rough: Vec<f64> = (0..512)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!(
            ReducedProblem1D::new(0.1, 0.5, vec![0.0; 512], rough, vec![c(1.0); 512], 0.2).is_err()
        );
    }

    #[test]
    fn disk_average_identities() {
        let n = 1024;
        let h = 0.01;
        let w = disk_average_samples(1.0, 5.0, n).unwrap();
        let p = problem(n, h, h.powf(1.1), w, disk_theta(5.0));
        let v = solve_reduced(&p).unwrap();
        let one = vec![1.0; n];
        let x = Spectral1D::new(n).nodes();
        let cosw: Vec<f64> = x.iter().map(|t| 1.0 + 0.5 * t.cos()).collect();
        let r1 = weighted_identity_residual(&p, &v, &one);
        let r2 = weighted_identity_residual(&p, &v, &cosw);
        assert!(r1 <= 1e-9, "w = 1: {r1:e}");
        assert!(r2 <= 1e-8, "w = 1 + cos/2: {r2:e}");
        let ap = apriori_identities_1d(&p, &v);
        assert!(ap.residual() <= 1e-8, "{ap:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scale = norm(&v) / (n as f64).sqrt();
        let noisy: Vec<C64> = v
            .iter()
            .map(|z| z + C64::new(gaussian(&mut rng), gaussian(&mut rng)) * (1e-3 * scale))
            .collect();
        let rn = weighted_identity_residual(&p, &noisy, &cosw);
        assert!(rn > 1e-4, "noise not detected: {rn:e}");
    }

    #[test]
    fn grid_doubling_converges() {
        let h = 0.05;
        let p1 = problem(512, h, 0.3, bump(512), 0.2);
        let p2 = problem(1024, h, 0.3, bump(1024), 0.2);
        let v1 = solve_reduced(&p1).unwrap();
        let v2 = solve_reduced(&p2).unwrap();
        let s1 = Spectral1D::new(512).l2_norm(&v1);
        let s2 = Spectral1D::new(1024).l2_norm(&v2);
        assert!(((s1 - s2) / s2).abs() < 1e-6);
        assert!(coarse_difference(&v1, &v2) < 1e-6);
    }

    #[test]
    fn gmres_path_matches_dense() {
        let h = 0.05;
        let p1 = problem(2048, h, 0.3, bump(2048), 0.2);
        let p2 = problem(4096, h, 0.3, bump(4096), 0.2);
        let v1 = solve_reduced(&p1).unwrap();
        let v2 = solve_reduced(&p2).unwrap();
        assert!(coarse_difference(&v1, &v2) < 1e-8);
    }

    #[test]
    fn regimes() {
        assert_eq!(
            classify_regime(0.01, 1e-6, 1.0, 0.2).regime,
            Regime::Elliptic
        );
        assert_eq!(
            classify_regime(0.01, 0.5, 1.0, 0.9).regime,
            Regime::HighHyperbolic
        );
        assert_eq!(
            classify_regime(0.01, 1e-3, 1.0, 2.0 / 15.0).regime,
            Regime::LowHyperbolic
        );
        assert_eq!(
            classify_regime(0.01, 1e-4, 1.0, 0.2).regime,
            Regime::Elliptic
        );
        let e2 = 0.01f64.powf(1.2);
        assert_eq!(
            classify_regime(0.01, e2, 1.0, 0.2).regime,
            Regime::LowHyperbolic
        );
        for e in regime_energy_grid(0.02, 1.0, 0.2, 4) {
            assert!(e > 0.0);
        }
    }

    #[test]
    fn gain_exponents_for_beta_five() {
        let (a, b) = gain_exponents(disk_theta(5.0));
        assert!((a - (2.0 + 2.0 / 15.0)).abs() < 1e-15);
        assert!((b - 17.0 / 30.0).abs() < 1e-15);
        assert!((delta_of(strip_theta(5.0)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn gain_is_finite_for_manufactured_solution() {
        let n = 512;
        let h = 0.02;
        let p = problem(n, h, 0.2, bump(n), 0.2);
        let v = band_limited_forcing(n, 5, 11);
        let q = p.with_forcing(p.apply(&v)).unwrap();
        let g = uniform_estimate_gain(&q, &v);
        assert!(g.is_finite() && g > 0.0);
        let back = solve_reduced(&q).unwrap();
        assert!(coarse_difference(&v, &back) < 1e-9);
    }

    #[test]
    fn undamped_resolvent_is_diagonal() {
        let w = vec![0.0; 1024];
        let r = resolvent_1d_norm(0.1, 0.5f64.sqrt(), &w).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        assert!(resolvent_1d_norm(0.1, 3.0, &w).is_err());
    }

    #[test]
    fn krylov_matches_dense_svd() {
        let h = 0.01;
        let w512 = strip_samples(&[(-0.5, 0.5)], 2.0, 512).unwrap();
        for l2 in [3.7, 10.2] {
            let d = resolvent_1d(h, l2, &w512, Krylov1DOptions::default()).unwrap();
            let k = resolvent_1d_krylov(h, l2, &w512, Krylov1DOptions::default()).unwrap();
            assert!(
                ((d.norm - k.norm) / d.norm).abs() < 1e-6,
                "{} vs {}",
                d.norm,
                k.norm
            );
            assert!((d.norm * d.residual - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn morawetz_weights_structure() {
        let h = 1e-3;
        let delta = 1.0 / 7.0;
        let wts = build_morawetz_weights(&[(-2.5, 2.5)], h, delta, &[2.4], 1024).unwrap();
        assert!(wts.psi_integral().abs() < 1e-10);
        assert!(wts.m > 0.0);
        let quad: f64 = wts.psi_h.iter().sum::<f64>() * 2.0 * PI / 1024.0;
        assert!(quad.abs() < 0.1 * h.powf(-delta));
        let top = h.powf(-delta);
        let shell = 2.0 * PI * h.powf(delta);
        for (j, &x) in wts.x.iter().enumerate() {
            assert!((0.0..=1.0).contains(&wts.chi_h[j]));
            if wts.v0[j] <= h.powf(delta) {
                assert_eq!(wts.chi_h[j], 1.0);
            }
            if x > -2.5 && x < -2.5 + shell {
                assert_eq!(wts.psi_h[j], top);
            }
            assert!(wts.theta[j] >= 0.0);
        }
        assert!(wts.phi_h[512].abs() < 1e-12);
        assert!(wts.phi_sup.is_finite());
    }

    #[test]
    fn morawetz_shells_must_fit() {
        let err = build_morawetz_weights(&[(-0.5, 0.5)], 0.01, 1.0 / 7.0, &[0.4], 1024);
        assert!(err.is_err());
        assert!(
            build_morawetz_weights(&[(-1.0, 0.5), (0.0, 1.0)], 1e-9, 0.1, &[0.1, 0.1], 512)
                .is_err()
        );
    }

    #[test]
    fn morawetz_balance_holds() {
        let h = 1e-3;
        let delta = 1.0 / 7.0;
        let w = strip_samples(&[(-2.5, 2.5)], 5.0, 1024).unwrap();
        let wts = build_morawetz_weights(&[(-2.5, 2.5)], h, delta, &[2.4], 1024).unwrap();
        let lam = 3.3;
        let v = band_limited_forcing(1024, 8, 2);
        let b = morawetz_balance(&wts, &v, lam, h, &w);
        assert!(b.constant <= 2.0 + 1e-6, "{b:?}");
    }

    #[test]
    fn geometric_control_single_mode() {
        let n = 512;
        let s = Spectral1D::new(n);
        let k = 3.0;
        let lam = 2.0;
        let v: Vec<C64> = s
            .nodes()
            .iter()
            .map(|&x| C64::from_polar(1.0, k * x))
            .collect();
        let f1: Vec<C64> = v.iter().map(|z| z * (k * k - lam * lam)).collect();
        let zero = vec![c(0.0); n];
        let ratio = geometric_control_check(&v, lam, &f1, &zero, (0.0, 1.0));
        let local = l2_norm_on(&v, (0.0, 1.0));
        let expect = (2.0 * PI).sqrt() / ((k * k - lam * lam) * (2.0 * PI).sqrt() / lam + local);
        assert!((ratio - expect).abs() < 1e-12);
        assert!((local - 1.0).abs() < 2.0 * s.spacing());
        assert!(geometric_control_check(&v, lam, &f1, &zero, (-PI, PI)) <= 1.0);
    }

    #[test]
    fn h_minus_one_of_single_mode() {
        let n = 256;
        let s = Spectral1D::new(n);
        let v: Vec<C64> = s
            .nodes()
            .iter()
            .map(|&x| C64::from_polar(1.0, 4.0 * x))
            .collect();
        let expect = (2.0 * PI / 17.0).sqrt();
        assert!((h_minus_one_norm(&v) - expect).abs() < 1e-12);
    }
}
