//! Damped waves `u_tt - Δu + a u_t = 0` on the truncated torus basis,
//! integrated by Strang splitting: a half step of pointwise damping, the exact
//! undamped rotation of every Fourier mode, another half step of damping.
//! Both flows are energy non-increasing, so the scheme dissipates exactly.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{invalid, LabError, Result};
use crate::field::{FourierField2D, TorusGrid};
use crate::harness::fit::{loglog_fit, LogLogFit};
use crate::linalg::c;

fn wavenumber_sq(k: usize) -> Vec<f64> {
    let n = 2 * k + 1;
    let ki = k as i64;
    (0..n * n)
        .map(|idx| {
            let kx = (idx / n) as i64 - ki;
            let ky = (idx % n) as i64 - ki;
            (kx * kx + ky * ky) as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub u: FourierField2D,
    pub ut: FourierField2D,
    pub time: f64,
    pub energy: f64,
}

impl WaveState {
    pub fn new(u: FourierField2D, ut: FourierField2D, time: f64) -> Result<Self> {
        if u.truncation() != ut.truncation() {
            return Err(LabError::TruncationMismatch {
                expected: u.truncation(),
                got: ut.truncation(),
            });
        }
        let energy = energy_of(&u, &ut);
        Ok(Self {
            u,
            ut,
            time,
            energy,
        })
    }

    pub fn truncation(&self) -> usize {
        self.u.truncation()
    }

    /// `E = ||grad u||^2 / 2 + ||u_t||^2 / 2`.
    pub fn recompute_energy(&self) -> f64 {
        energy_of(&self.u, &self.ut)
    }

    /// `(||u||_{H^2}^2 + ||u_t||_{H^1}^2)^{1/2}` with weights `1 + |k|^2`.
    pub fn sobolev_norm(&self) -> f64 {
        let w = wavenumber_sq(self.truncation());
        let a: f64 = self
            .u
            .coeffs()
            .iter()
            .zip(&w)
            .map(|(z, k2)| (1.0 + k2).powi(2) * z.norm_sqr())
            .sum();
        let b: f64 = self
            .ut
            .coeffs()
            .iter()
            .zip(&w)
            .map(|(z, k2)| (1.0 + k2) * z.norm_sqr())
            .sum();
        (a + b).sqrt()
    }
}

fn energy_of(u: &FourierField2D, ut: &FourierField2D) -> f64 {
    let w = wavenumber_sq(u.truncation());
    let pot: f64 = u
        .coeffs()
        .iter()
        .zip(&w)
        .map(|(z, k2)| k2 * z.norm_sqr())
        .sum();
    let kin: f64 = ut.coeffs().iter().map(|z| z.norm_sqr()).sum();
    0.5 * (pot + kin)
}

/// Largest step for which every mode rotates by at most `pi` per step, so the
/// sampled trajectory resolves the top frequency `K sqrt 2`.
pub fn step_bound(k: usize) -> f64 {
    std::f64::consts::PI / (k as f64 * 2f64.sqrt())
}

/// Precomputed splitting step for one damping, truncation and `dt`.
#[derive(Clone, Debug)]
pub struct Integrator {
    k: usize,
    dt: f64,
    grid: TorusGrid,
    a: Vec<f64>,
    half_decay: Vec<f64>,
    omega: Vec<f64>,
}

impl Integrator {
    pub fn new(damping: &DampingProfile, k: usize, dt: f64) -> Result<Self> {
        let grid = TorusGrid::new(k);
        let a = grid.sample(|x, y| damping.eval(x, y));
        Self::from_samples(a, k, dt)
    }

    pub fn from_samples(a: Vec<f64>, k: usize, dt: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("K", "must be positive"));
        }
        let bound = step_bound(k);
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if dt > bound {
            return Err(LabError::StepTooLarge { dt, bound });
        }
        let grid = TorusGrid::new(k);
        if a.len() != grid.side() * grid.side() || a.iter().any(|&v| !(v >= 0.0)) {
            return Err(invalid("damping", "needs (2K+1)^2 nonnegative samples"));
        }
        let half_decay = a.iter().map(|&v| (-0.5 * v * dt).exp()).collect();
        let omega = wavenumber_sq(k).into_iter().map(f64::sqrt).collect();
        Ok(Self {
            k,
            dt,
            grid,
            a,
            half_decay,
            omega,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn bound(&self) -> f64 {
        step_bound(self.k)
    }

    /// `int a |u_t|^2`, the instantaneous energy loss rate.
    pub fn dissipation_rate(&self, state: &WaveState) -> f64 {
        let g = self.grid.to_grid(state.ut.coeffs());
        g.iter().zip(&self.a).map(|(v, a)| a * v.norm_sqr()).sum()
    }

    fn rotate(&self, u: &mut [C64], ut: &mut [C64]) {
        let t = self.dt;
        for ((a, b), &w) in u.iter_mut().zip(ut.iter_mut()).zip(&self.omega) {
            if w == 0.0 {
                *a += *b * t;
            } else {
                let (s, co) = (w * t).sin_cos();
                let na = *a * co + *b * (s / w);
                let nb = -*a * (w * s) + *b * co;
                *a = na;
                *b = nb;
            }
        }
    }

    pub fn step(&self, state: &WaveState) -> Result<WaveState> {
        if state.truncation() != self.k {
            return Err(LabError::TruncationMismatch {
                expected: self.k,
                got: state.truncation(),
            });
        }
        let mut u = state.u.coeffs().to_vec();
        // The grid round trip is skipped when undamped so energy drifts only through rotation rounding.
        let undamped = self.a.iter().all(|&v| v == 0.0);
        let mut ut = if undamped {
            state.ut.coeffs().to_vec()
        } else {
            self.grid.multiply(&self.half_decay, state.ut.coeffs())
        };
        self.rotate(&mut u, &mut ut);
        if !undamped {
            ut = self.grid.multiply(&self.half_decay, &ut);
        }
        let h = state.u.h();
        WaveState::new(
            FourierField2D::from_coeffs(self.k, h, u)?,
            FourierField2D::from_coeffs(self.k, h, ut)?,
            state.time + self.dt,
        )
    }
}

/// One splitting step; builds the integrator on every call.
pub fn step(state: &WaveState, damping: &DampingProfile, dt: f64) -> Result<WaveState> {
    Integrator::new(damping, state.truncation(), dt)?.step(state)
}

/// Energies and loss rates at every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub dissipation: Vec<f64>,
}

pub fn simulate(
    integrator: &Integrator,
    initial: &WaveState,
    steps: usize,
) -> Result<(Trajectory, WaveState)> {
    let mut state = initial.clone();
    let mut traj = Trajectory {
        dt: integrator.dt(),
        times: vec![state.time],
        energies: vec![state.energy],
        dissipation: vec![integrator.dissipation_rate(&state)],
    };
    for _ in 0..steps {
        state = integrator.step(&state)?;
        traj.times.push(state.time);
        traj.energies.push(state.energy);
        traj.dissipation.push(integrator.dissipation_rate(&state));
    }
    Ok((traj, state))
}

/// Largest gap between the centred difference of `E` and `-int a |u_t|^2` at
/// interior samples, relative to the largest loss rate; absolute when the
/// damping vanishes.
pub fn dissipation_identity_residual(traj: &Trajectory) -> f64 {
    let n = traj.energies.len();
    if n < 3 {
        return 0.0;
    }
    let scale = traj.dissipation.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for j in 1..n - 1 {
        let de = (traj.energies[j + 1] - traj.energies[j - 1]) / (2.0 * traj.dt);
        worst = worst.max((de + traj.dissipation[j]).abs());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Largest relative energy increase over one step.
pub fn max_energy_increase(traj: &Trajectory) -> f64 {
    traj.energies
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sum of modes `(0, +-n)`, `1 <= n <= K/2`, with weights `1/n`, scaled to unit
/// `H^2 x H^1` norm and zero velocity. These modes are constant along `x`.
pub fn trapped_packet(k: usize) -> Result<WaveState> {
    let mut u = FourierField2D::zeros(k, 1.0);
    for n in 1..=(k / 2).max(1) as i64 {
        let w = c(1.0 / n as f64);
        u.set(0, n, w);
        u.set(0, -n, w);
    }
    let ut = FourierField2D::zeros(k, 1.0);
    let s = WaveState::new(u.clone(), ut.clone(), 0.0)?.sobolev_norm();
    let u = FourierField2D::from_coeffs(k, 1.0, u.coeffs().iter().map(|z| z / s).collect())?;
    WaveState::new(u, ut, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRecord {
    pub samples: Vec<(f64, f64)>,
    pub initial_norm: f64,
    pub window: (f64, f64),
    /// Fit of `E^{1/2} / ||(u0, u1)||` against `t` on the window; `alpha` is
    /// minus the slope.
    pub fit: Option<LogLogFit>,
    pub alpha: Option<f64>,
    /// Set when `ln E` is closer to linear in `t` than in `ln t` on the window.
    pub exponential: bool,
    pub strictly_decreasing: bool,
}

impl DecayRecord {
    pub fn final_energy(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.1)
    }
}

/// Runs to `t_end` and records `(t, E)` every `sample_every` steps; fits on
/// `[t_end / 4, t_end]`.
pub fn measure_decay(
    damping: &DampingProfile,
    initial: &WaveState,
    t_end: f64,
    dt: f64,
    sample_every: usize,
) -> Result<DecayRecord> {
    let integ = Integrator::new(damping, initial.truncation(), dt)?;
    let steps = (t_end / dt).round() as usize;
    let every = sample_every.max(1);
    let mut state = initial.clone();
    let mut samples = vec![(state.time, state.energy)];
    for s in 1..=steps {
        state = integ.step(&state)?;
        if s % every == 0 || s == steps {
            samples.push((state.time, state.energy));
        }
    }
    let initial_norm = initial.sobolev_norm();
    let window = (t_end / 4.0, t_end);
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, e)| *t >= window.0 && *t > 0.0 && *e > 0.0)
        .map(|&(t, e)| (t, e.sqrt() / initial_norm))
        .collect();
    let fit = loglog_fit(&pts, None).ok();
    let exponential = fit.is_some_and(|f| {
        let lin: Vec<(f64, f64)> = pts.iter().map(|&(t, y)| (t, y.ln())).collect();
        let (_, _, r2) = crate::averaging::linear_fit(&lin);
        r2 > f.r2
    });
    let strictly_decreasing = samples.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(DecayRecord {
        samples,
        initial_norm,
        window,
        alpha: fit.map(|f| -f.slope),
        fit,
        exponential,
        strictly_decreasing,
    })
}

/// Decay exponents `1 - 2/(2 beta + 7)` (convex) and `1 - 1/(beta + 3)` (strip).
pub fn predicted_alpha(beta: f64) -> (f64, f64) {
    (1.0 - 2.0 / (2.0 * beta + 7.0), 1.0 - 1.0 / (beta + 3.0))
}
