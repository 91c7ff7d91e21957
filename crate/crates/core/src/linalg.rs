//! Dense and matrix-free linear algebra shared by the operator modules:
//! Padé scaling-and-squaring exponential, restarted GMRES, Lanczos for
//! extreme eigenvalues of Hermitian operators, and a cyclic tridiagonal solve.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{LabError, Result};
use crate::field::{inner, norm};

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense matrix of a linear map given by its action on basis vectors.
pub fn assemble(n: usize, apply: impl Fn(&[C64]) -> Vec<C64>) -> Mat<C64> {
    let mut m = Mat::<C64>::zeros(n, n);
    let mut e = vec![c(0.0); n];
    for j in 0..n {
        e[j] = c(1.0);
        let col = apply(&e);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = c(0.0);
    }
    m
}

pub fn matvec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![c(0.0); n];
    for (j, &vj) in v.iter().enumerate().take(m.ncols()) {
        if vj == c(0.0) {
            continue;
        }
        let col = m.col(j);
        for i in 0..n {
            out[i] += col[i] * vj;
        }
    }
    out
}

pub fn scaled(m: &Mat<C64>, s: C64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn adjoint(m: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Spectral norm via the largest singular value.
pub fn spectral_norm(m: &Mat<C64>) -> Result<f64> {
    let s = m
        .singular_values()
        .map_err(|e| LabError::Eigensolver(format!("{e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

pub fn one_norm(m: &Mat<C64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(M)` by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(m: &Mat<C64>) -> Result<Mat<C64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(LabError::InvalidParameter {
            name: "M",
            reason: "matrix must be square".into(),
        });
    }
    for j in 0..n {
        for i in 0..n {
            if !m[(i, j)].re.is_finite() || !m[(i, j)].im.is_finite() {
                return Err(LabError::NonFinite);
            }
        }
    }
    const THETA13: f64 = 5.371920351148152;
    let nrm = one_norm(m);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = scaled(m, c(0.5f64.powi(s)));
    let id = Mat::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let lin = |m6: f64, m4: f64, m2: f64, m0: f64| -> Mat<C64> {
        Mat::from_fn(n, n, |i, j| {
            a6[(i, j)] * m6 + a4[(i, j)] * m4 + a2[(i, j)] * m2 + id[(i, j)] * m0
        })
    };
    let u_inner = &a6 * &lin(b[13], b[11], b[9], 0.0);
    let u_poly = Mat::from_fn(n, n, |i, j| {
        u_inner[(i, j)]
            + a6[(i, j)] * b[7]
            + a4[(i, j)] * b[5]
            + a2[(i, j)] * b[3]
            + id[(i, j)] * b[1]
    });
    let u = &a * &u_poly;
    let v_inner = &a6 * &lin(b[12], b[10], b[8], 0.0);
    let v = Mat::from_fn(n, n, |i, j| {
        v_inner[(i, j)]
            + a6[(i, j)] * b[6]
            + a4[(i, j)] * b[4]
            + a2[(i, j)] * b[2]
            + id[(i, j)] * b[0]
    });
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Action `exp(s G) v` by a scaled Taylor series; `g_norm` bounds `||G||`.
pub fn expm_action(apply: impl Fn(&[C64]) -> Vec<C64>, v: &[C64], s: f64, g_norm: f64) -> Vec<C64> {
    let steps = (s.abs() * g_norm).ceil().max(1.0) as usize;
    let h = s / steps as f64;
    let mut x = v.to_vec();
    for _ in 0..steps {
        let mut term = x.clone();
        let mut acc = x.clone();
        for j in 1..60 {
            term = apply(&term);
            let f = h / j as f64;
            term.iter_mut().for_each(|t| *t *= f);
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
            if norm(&term) <= 1e-17 * norm(&acc) {
                break;
            }
        }
        x = acc;
    }
    x
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Bound on `||A||`. When positive, iteration also stops at the rounding
    /// floor `64 eps ||A|| ||x|| / ||b||` of the relative residual.
    pub op_norm: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 60,
            tol: 1e-12,
            max_iter: 2000,
            op_norm: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Right-preconditioned restarted GMRES for `A x = b` with `precond ~ A^{-1}`.
pub fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    precond: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    x0: Option<&[C64]>,
    opts: GmresOptions,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.map_or_else(|| vec![c(0.0); n], |v| v.to_vec());
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x: vec![c(0.0); n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut total = 0;
    let residual_of = |x: &[C64]| -> Vec<C64> {
        let ax = apply(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };
    let target = |x: &[C64]| {
        opts.tol
            .max(64.0 * f64::EPSILON * opts.op_norm * norm(x) / bnorm)
    };
    let mut r = residual_of(&x);
    let mut rel = norm(&r) / bnorm;
    let mut tol = target(&x);
    while total < opts.max_iter {
        if rel <= tol {
            break;
        }
        let m = opts.restart.min(opts.max_iter - total);
        let beta = norm(&r);
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![c(0.0); m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![c(0.0); m];
        let mut g = vec![c(0.0); m + 1];
        g[0] = c(beta);
        let mut k_used = 0;
        for j in 0..m {
            let z = precond(&basis[j]);
            let mut w = apply(&z);
            for (i, vi) in basis.iter().enumerate() {
                let hij = inner(&w, vi);
                hess[i][j] = hij;
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            // Second orthogonalization pass for stability.
            for (i, vi) in basis.iter().enumerate() {
                let hij = inner(&w, vi);
                hess[i][j] += hij;
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let hn = norm(&w);
            hess[j + 1][j] = c(hn);
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i].conj() * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let (h1, h2) = (hess[j][j], hess[j + 1][j]);
            let rr = (h1.norm_sqr() + h2.norm_sqr()).sqrt();
            if rr == 0.0 {
                cs[j] = 1.0;
                sn[j] = c(0.0);
            } else if h1.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = c(1.0) * (h2.conj() / h2.norm());
            } else {
                cs[j] = h1.norm() / rr;
                sn[j] = (h1 / h1.norm()) * h2.conj() / rr;
            }
            hess[j][j] = cs[j] * h1 + sn[j] * h2;
            hess[j + 1][j] = c(0.0);
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] = cs[j] * g[j];
            k_used = j + 1;
            total += 1;
            let est = g[j + 1].norm() / bnorm;
            if est <= tol * 0.5 || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![c(0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in (i + 1)..k_used {
                s -= hess[i][l] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![c(0.0); n];
        for (yi, vi) in y.iter().zip(&basis) {
            update.iter_mut().zip(vi).for_each(|(u, v)| *u += yi * v);
        }
        let dz = precond(&update);
        x.iter_mut().zip(&dz).for_each(|(a, d)| *a += d);
        r = residual_of(&x);
        tol = target(&x);
        let new_rel = norm(&r) / bnorm;
        if !(new_rel < rel) && new_rel > tol {
            rel = new_rel;
            break;
        }
        rel = new_rel;
    }
    if rel > tol {
        return Err(LabError::NotConverged {
            iterations: total,
            estimate: norm(&x),
            residual: rel,
        });
    }
    Ok(GmresOutcome {
        x,
        iterations: total,
        relative_residual: rel,
    })
}

#[derive(Clone, Debug)]
pub struct RitzPair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Eigenvalues and eigenvectors of a real symmetric tridiagonal matrix.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Mat<f64>) {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("tridiagonal eigensolver");
    let vals: Vec<f64> = (0..m).map(|i| evd.S()[i]).collect();
    (vals, evd.U().to_owned())
}

/// Lanczos with full reorthogonalization for the eigenvalue of largest
/// modulus of a Hermitian operator. Converges when the Ritz residual falls
/// below `tol` times the Ritz value.
pub fn lanczos_extreme(
    mut apply: impl FnMut(&[C64]) -> Result<Vec<C64>>,
    start: &[C64],
    max_iter: usize,
    tol: f64,
) -> Result<RitzPair> {
    let n = start.len();
    let s0 = norm(start);
    let mut basis: Vec<Vec<C64>> = vec![start.iter().map(|v| v / s0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best = RitzPair {
        value: 0.0,
        vector: basis[0].clone(),
        residual: f64::INFINITY,
        iterations: 0,
    };
    for j in 0..max_iter.min(n) {
        let mut w = apply(&basis[j])?;
        let a = inner(&w, &basis[j]).re;
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let p = inner(&w, v);
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= p * vk);
            }
        }
        let b = norm(&w);
        let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
        let (idx, &theta) = vals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("nonempty");
        let last = vecs[(alpha.len() - 1, idx)];
        let res = (b * last).abs();
        if res <= best.residual || j + 1 == max_iter.min(n) || res <= tol * theta.abs() {
            let mut vec = vec![c(0.0); n];
            for (i, v) in basis.iter().enumerate() {
                let coef = vecs[(i, idx)];
                vec.iter_mut().zip(v).for_each(|(u, vk)| *u += vk * coef);
            }
            best = RitzPair {
                value: theta,
                vector: vec,
                residual: res,
                iterations: j + 1,
            };
        }
        if res <= tol * theta.abs() || b <= 1e-300 {
            return Ok(best);
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    if best.residual <= tol * best.value.abs() {
        Ok(best)
    } else {
        Err(LabError::NotConverged {
            iterations: best.iterations,
            estimate: best.value,
            residual: best.residual,
        })
    }
}

/// Solves the cyclic tridiagonal system `lower[i] x[i-1] + diag[i] x[i] +
/// upper[i] x[i+1] = rhs[i]` with indices taken modulo `n` (Sherman-Morrison).
pub fn solve_cyclic_tridiagonal(
    lower: &[C64],
    diag: &[C64],
    upper: &[C64],
    rhs: &[C64],
) -> Vec<C64> {
    let n = diag.len();
    assert!(n >= 3);
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = thomas(lower, &bb, upper, rhs);
    let mut u = vec![c(0.0); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &bb, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (c(1.0) + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(lower: &[C64], diag: &[C64], upper: &[C64], rhs: &[C64]) -> Vec<C64> {
    let n = diag.len();
    let mut cp = vec![c(0.0); n];
    let mut dp = vec![c(0.0); n];
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * cp[i - 1];
        cp[i] = if i + 1 < n { upper[i] / m } else { c(0.0) };
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
    }
    let mut x = vec![c(0.0); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Side;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, scale: f64, seed: u64) -> Mat<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Mat::<C64>::from_fn(n, n, |_, _| {
            C64::new(
                crate::field::gaussian(&mut rng),
                crate::field::gaussian(&mut rng),
            )
        });
        Mat::from_fn(n, n, |i, j| {
            (g[(i, j)] + g[(j, i)].conj()) * (scale / (2.0 * (n as f64).sqrt()))
        })
    }

    #[test]
    fn expm_of_zero_and_diagonal() {
        let z = Mat::<C64>::zeros(5, 5);
        let e = expm(&z).unwrap();
        assert!(max_abs_diff(&e, &Mat::identity(5, 5)) < 1e-15);
        let th = [0.3, -1.2, 4.0, 25.0];
        let d = Mat::from_fn(
            4,
            4,
            |i, j| if i == j { C64::new(0.0, th[i]) } else { c(0.0) },
        );
        let e = expm(&d).unwrap();
        for i in 0..4 {
            assert!((e[(i, i)] - C64::from_polar(1.0, th[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn expm_matches_eigendecomposition_oracle() {
        for (seed, scale) in [(1, 0.5), (2, 3.0), (3, 12.0)] {
            let m = random_hermitian(40, scale, seed);
            let e = expm(&m).unwrap();
            let evd = m.self_adjoint_eigen(Side::Lower).unwrap();
            let u = evd.U();
            let n = 40;
            let oracle = Mat::from_fn(n, n, |i, j| {
                (0..n)
                    .map(|k| u[(i, k)] * evd.S()[k].re.exp() * u[(j, k)].conj())
                    .sum::<C64>()
            });
            let rel = max_abs_diff(&e, &oracle) / one_norm(&oracle);
            assert!(rel < 1e-12, "scale {scale}: {rel}");
            let ev = e.self_adjoint_eigenvalues(Side::Lower).unwrap();
            let top = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (k, lam) in ev.iter().enumerate() {
                let want = evd.S()[k].re.exp();
                assert!((lam - want).abs() <= 1e-11 * top, "{lam} vs {want}");
            }
        }
    }

    #[test]
    fn expm_rejects_nan() {
        let mut m = Mat::<C64>::zeros(3, 3);
        m[(1, 2)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(expm(&m), Err(LabError::NonFinite)));
    }

    #[test]
    fn expm_action_matches_dense() {
        let m = random_hermitian(30, 4.0, 7);
        let dense = expm(&scaled(&m, c(-1.0))).unwrap();
        let v: Vec<C64> = (0..30)
            .map(|i| C64::new((i as f64).sin(), 0.1 * i as f64))
            .collect();
        let a = expm_action(|x| matvec(&m, x), &v, -1.0, 4.0);
        let b = matvec(&dense, &v);
        let err: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-11 * norm(&b), "{err}");
    }

    #[test]
    fn gmres_solves_nonhermitian_system() {
        let n = 50;
        let m = Mat::<C64>::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(2.0 + i as f64 * 0.1, 0.5)
            } else {
                C64::new(((i * 7 + j * 3) % 11) as f64 / 50.0, 0.0)
            }
        });
        let b: Vec<C64> = (0..n).map(|i| C64::new(1.0, i as f64)).collect();
        let out = gmres(
            |x| matvec(&m, x),
            |x| x.to_vec(),
            &b,
            None,
            GmresOptions::default(),
        )
        .unwrap();
        let r = matvec(&m, &out.x);
        let err = norm(&r.iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err < 1e-10 * norm(&b));
    }

    #[test]
    fn lanczos_finds_extreme_eigenvalue() {
        let m = random_hermitian(80, 5.0, 11);
        let ev = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let want = ev
            .iter()
            .copied()
            .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let start: Vec<C64> = (0..80).map(|i| C64::new(1.0, (i as f64).cos())).collect();
        let r = lanczos_extreme(|x| Ok(matvec(&m, x)), &start, 80, 1e-12).unwrap();
        assert!((r.value - want).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn cyclic_tridiagonal_solve() {
        let n = 17;
        let lower: Vec<C64> = (0..n).map(|i| C64::new(-1.0, 0.1 * i as f64)).collect();
        let upper: Vec<C64> = (0..n).map(|i| C64::new(-1.0, -0.05 * i as f64)).collect();
        let diag: Vec<C64> = (0..n).map(|i| C64::new(4.0, i as f64 * 0.2)).collect();
        let rhs: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let x = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs);
        for i in 0..n {
            let ax = lower[i] * x[(i + n - 1) % n] + diag[i] * x[i] + upper[i] * x[(i + 1) % n];
            assert!((ax - rhs[i]).norm() < 1e-12);
        }
    }
}
