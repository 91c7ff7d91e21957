//! Averaging along rational directions, covering-torus coordinates, the
//! primitive `A(x, y)` of `a - A(a)` in `y`, and vanishing-order fits.
//!
//! For a direction `(p, q)` with `gcd(|p|, |q|) = 1` the orbit closes after
//! length `tau = 2 pi sqrt(p^2 + q^2)`. Covering coordinates are
//! `z = X e_perp + Y e_v` with `e_v = (p, q) / |(p, q)|` and
//! `e_perp = (q, -p) / |(p, q)|`, so `(0, 1)` is the identity.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{invalid, LabError, Result};
use crate::harness::fit::LogLogFit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalDirection {
    p: i64,
    q: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl RationalDirection {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if p == 0 && q == 0 {
            return Err(invalid("direction", "p and q cannot both vanish"));
        }
        if gcd(p, q) != 1 {
            return Err(invalid("direction", format!("({p}, {q}) is not primitive")));
        }
        Ok(Self { p, q })
    }

    pub fn vertical() -> Self {
        Self { p: 0, q: 1 }
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn degree(&self) -> f64 {
        ((self.p * self.p + self.q * self.q) as f64).sqrt()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI * self.degree()
    }

    pub fn unit(&self) -> [f64; 2] {
        let d = self.degree();
        [self.p as f64 / d, self.q as f64 / d]
    }

    pub fn perp(&self) -> [f64; 2] {
        let d = self.degree();
        [self.q as f64 / d, -(self.p as f64) / d]
    }

    /// Torus point with covering coordinates `(X, Y)`.
    pub fn to_torus(&self, x: f64, y: f64) -> [f64; 2] {
        let e = self.perp();
        let v = self.unit();
        [x * e[0] + y * v[0], x * e[1] + y * v[1]]
    }

    /// Transversal nodes `-tau/2 + j tau / n`.
    pub fn transversal_nodes(&self, n: usize) -> Vec<f64> {
        let tau = self.period();
        (0..n)
            .map(|j| -tau / 2.0 + tau * j as f64 / n as f64)
            .collect()
    }

    /// Orbit average of `g` through the transversal point `x`, trapezoid rule
    /// with `orbit_n` nodes per period.
    pub fn orbit_mean(&self, x: f64, orbit_n: usize, g: impl Fn(f64, f64) -> f64) -> f64 {
        let tau = self.period();
        let mut s = 0.0;
        for m in 0..orbit_n {
            let z = self.to_torus(x, tau * m as f64 / orbit_n as f64);
            s += g(z[0], z[1]);
        }
        s / orbit_n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Left end of a positive run: `W = 0` to the left, `W > 0` to the right.
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub x: f64,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedDamping {
    pub direction: Option<RationalDirection>,
    pub x: Vec<f64>,
    pub samples: Vec<f64>,
    pub grid_n: usize,
    pub period: f64,
    pub boundary_points: Vec<BoundaryPoint>,
    pub fitted_exponent: Option<f64>,
}

impl AveragedDamping {
    /// Wraps plain periodic samples on `x`; zero nodes adjacent to positive
    /// nodes become boundary points without sub-grid refinement.
    pub fn from_samples(x: Vec<f64>, samples: Vec<f64>, period: f64) -> Self {
        let n = samples.len();
        let mut boundary_points = Vec::new();
        for j in 0..n {
            if samples[j] > 0.0 {
                continue;
            }
            if samples[(j + 1) % n] > 0.0 {
                boundary_points.push(BoundaryPoint {
                    x: x[j],
                    side: Side::Left,
                });
            }
            if samples[(j + n - 1) % n] > 0.0 {
                boundary_points.push(BoundaryPoint {
                    x: x[j],
                    side: Side::Right,
                });
            }
        }
        Self {
            direction: None,
            grid_n: n,
            x,
            samples,
            period,
            boundary_points,
            fitted_exponent: None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Positive runs as `(left boundary, right boundary)` pairs.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let lefts: Vec<f64> = self
            .boundary_points
            .iter()
            .filter(|b| b.side == Side::Left)
            .map(|b| b.x)
            .collect();
        let rights: Vec<f64> = self
            .boundary_points
            .iter()
            .filter(|b| b.side == Side::Right)
            .map(|b| b.x)
            .collect();
        lefts
            .iter()
            .map(|&l| {
                let r = rights
                    .iter()
                    .copied()
                    .min_by(|a, b| {
                        let da = (a - l).rem_euclid(self.period);
                        let db = (b - l).rem_euclid(self.period);
                        da.total_cmp(&db)
                    })
                    .unwrap_or(l);
                (l, r)
            })
            .collect()
    }
}

/// Averages of `g` along `v` on the transversal grid of `grid_n` nodes with
/// `grid_n` orbit nodes per period.
pub fn average_fn(
    v: RationalDirection,
    grid_n: usize,
    g: impl Fn(f64, f64) -> f64 + Sync,
) -> Vec<f64> {
    v.transversal_nodes(grid_n)
        .par_iter()
        .map(|&x| v.orbit_mean(x, grid_n, &g))
        .collect()
}

pub fn average_along(
    f: &DampingProfile,
    v: RationalDirection,
    grid_n: usize,
) -> Result<AveragedDamping> {
    if grid_n < 256 {
        return Err(invalid(
            "grid_n",
            format!("must be at least 256, got {grid_n}"),
        ));
    }
    let x = v.transversal_nodes(grid_n);
    let samples = average_fn(v, grid_n, |a, b| f.eval(a, b));
    let mut out = AveragedDamping::from_samples(x, samples, v.period());
    out.direction = Some(v);
    let step = v.period() / grid_n as f64;
    let w = |x: f64| v.orbit_mean(x, grid_n, |a, b| f.eval(a, b));
    for b in out.boundary_points.iter_mut() {
        // The zero node sits at b.x; the positive neighbour one step inward.
        let (mut zero, mut pos) = match b.side {
            Side::Left => (b.x, b.x + step),
            Side::Right => (b.x, b.x - step),
        };
        for _ in 0..80 {
            let mid = 0.5 * (zero + pos);
            if mid == zero || mid == pos {
                break;
            }
            if w(mid) > 0.0 {
                pos = mid;
            } else {
                zero = mid;
            }
        }
        b.x = 0.5 * (zero + pos);
    }
    Ok(out)
}

/// Least-squares slope of `log W` against `log dist` over `window`, measured
/// from the first boundary point on `side`. Returns `(exponent, r2)`.
pub fn fit_vanishing_exponent(
    w: &AveragedDamping,
    side: Side,
    window: (f64, f64),
) -> Result<(f64, f64)> {
    vanishing_fit(w, side, window).map(|f| (f.slope, f.r2))
}

/// Full fit behind [`fit_vanishing_exponent`].
pub fn vanishing_fit(w: &AveragedDamping, side: Side, window: (f64, f64)) -> Result<LogLogFit> {
    let (dmin, dmax) = window;
    if !(dmin > 0.0 && dmin < dmax) {
        return Err(invalid(
            "window",
            format!("need 0 < d_min < d_max, got {window:?}"),
        ));
    }
    let b = w
        .boundary_points
        .iter()
        .find(|b| b.side == side)
        .ok_or_else(|| invalid("side", format!("no {side:?} boundary point detected")))?;
    let mut pts = Vec::new();
    for (j, (&x, &val)) in w.x.iter().zip(&w.samples).enumerate() {
        let d = match side {
            Side::Left => (x - b.x).rem_euclid(w.period),
            Side::Right => (b.x - x).rem_euclid(w.period),
        };
        if d >= dmin && d <= dmax {
            if !(val > 0.0) {
                return Err(LabError::NonPositive {
                    index: j,
                    value: val,
                });
            }
            pts.push((d.ln(), val.ln()));
        }
    }
    if pts.len() < 8 {
        return Err(LabError::TooFewPoints {
            got: pts.len(),
            required: 8,
        });
    }
    let (slope, intercept, r2) = linear_fit(&pts);
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
        n_points: pts.len(),
    })
}

/// Ordinary least squares `y = slope x + intercept`; returns
/// `(slope, intercept, r2)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Worst ratio `|W^(j)| / W^{1 - j sigma}` for `j = 0..=k` on a periodic grid,
/// using centered differences; nodes with `W < floor` are skipped.
pub fn class_ratios_1d(w: &AveragedDamping, sigma: f64, k: u32, floor: f64) -> Vec<f64> {
    let n = w.samples.len();
    let s = w.period / n as f64;
    let at = |j: isize| w.samples[j.rem_euclid(n as isize) as usize];
    (0..=k)
        .map(|order| {
            let mut worst: f64 = 0.0;
            for j in 0..n as isize {
                let v = at(j);
                if v < floor {
                    continue;
                }
                let d = match order {
                    0 => v,
                    1 => (at(j + 1) - at(j - 1)) / (2.0 * s),
                    _ => (at(j + 1) - 2.0 * v + at(j - 1)) / (s * s),
                };
                worst = worst.max(d.abs() / v.powf(1.0 - order as f64 * sigma));
            }
            worst
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringSamples {
    pub direction: RationalDirection,
    pub n_x: usize,
    pub n_y: usize,
    pub tau: f64,
    /// Row-major in `X`, values at `(-tau/2 + i tau/n_x, -tau/2 + j tau/n_y)`.
    pub values: Vec<f64>,
}

impl CoveringSamples {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_y + j]
    }

    /// Number of connected components of `{values > 0}` with periodic
    /// 4-neighbour adjacency.
    pub fn count_components(&self) -> usize {
        let (nx, ny) = (self.n_x, self.n_y);
        let mut seen = vec![false; nx * ny];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..nx * ny {
            if seen[start] || self.values[start] <= 0.0 {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                let (i, j) = (idx / ny, idx % ny);
                let nbrs = [
                    ((i + 1) % nx, j),
                    ((i + nx - 1) % nx, j),
                    (i, (j + 1) % ny),
                    (i, (j + ny - 1) % ny),
                ];
                for (a, b) in nbrs {
                    let m = a * ny + b;
                    if !seen[m] && self.values[m] > 0.0 {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
        }
        count
    }
}

pub fn pullback_to_covering(
    f: &DampingProfile,
    v: RationalDirection,
    grid: (usize, usize),
) -> CoveringSamples {
    let (n_x, n_y) = grid;
    let tau = v.period();
    let values = (0..n_x)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = -tau / 2.0 + tau * i as f64 / n_x as f64;
            (0..n_y).map(move |j| {
                let y = -tau / 2.0 + tau * j as f64 / n_y as f64;
                let z = v.to_torus(x, y);
                f.eval(z[0], z[1])
            })
        })
        .collect();
    CoveringSamples {
        direction: v,
        n_x,
        n_y,
        tau,
        values,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBound {
    pub order: u32,
    /// Class constant `C_j`: worst `|d_x^j a| / a^{1 - j sigma}` on the grid.
    pub class_constant: f64,
    /// Worst `sup_y |d_x^j A| / (4 pi A(a)^{1 - j sigma})` over `x`.
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveBounds {
    /// Worst `sup_y |A| / (4 pi A(a))`; must not exceed 1.
    pub value_ratio: f64,
    pub value_holds: bool,
    /// Empty when the profile has no analytic derivatives.
    pub derivatives: Vec<DerivativeBound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveField {
    pub n_x: usize,
    pub n_y: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major in `x`: `A(x_i, y_l)`.
    pub values: Vec<f64>,
    /// `A(a)(x_i)`, the mean over the `y` nodes.
    pub average: Vec<f64>,
    /// `max_x |A(x, pi)|`.
    pub endpoint_residual: f64,
    pub bounds: PrimitiveBounds,
}

impl PrimitiveField {
    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.n_y + l]
    }
}

/// Cumulative periodic trapezoid of `g - mean(g)` from `-pi`; returns the
/// node values and the value at `y = pi`.
fn cumulative_zero_mean(g: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = g.len();
    let dy = 2.0 * PI / n as f64;
    let mean = g.iter().sum::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for l in 1..n {
        acc += 0.5 * dy * ((g[l - 1] - mean) + (g[l] - mean));
        out.push(acc);
    }
    acc += 0.5 * dy * ((g[n - 1] - mean) + (g[0] - mean));
    (out, acc, mean)
}

/// Primitive on `x` nodes `-pi + 2 pi i / n_x` and `y` nodes `-pi + 2 pi l / n_y`.
pub fn primitive_a(a: &DampingProfile, grid: (usize, usize)) -> Result<PrimitiveField> {
    let (n_x, n_y) = grid;
    if n_x < 256 || n_y < 256 {
        return Err(invalid(
            "grid",
            format!("sizes must be at least 256, got {grid:?}"),
        ));
    }
    let x: Vec<f64> = (0..n_x)
        .map(|i| -PI + 2.0 * PI * i as f64 / n_x as f64)
        .collect();
    let y: Vec<f64> = (0..n_y)
        .map(|l| -PI + 2.0 * PI * l as f64 / n_y as f64)
        .collect();
    Ok(primitive_on(a, &x, &y))
}

fn primitive_on(a: &DampingProfile, x: &[f64], y: &[f64]) -> PrimitiveField {
    let n_x = x.len();
    let n_y = y.len();
    let rows: Vec<(Vec<f64>, f64, f64)> = x
        .par_iter()
        .map(|&xi| {
            let g: Vec<f64> = y.iter().map(|&yl| a.eval(xi, yl)).collect();
            cumulative_zero_mean(&g)
        })
        .collect();
    let mut values = Vec::with_capacity(n_x * n_y);
    let mut average = Vec::with_capacity(n_x);
    let mut endpoint_residual: f64 = 0.0;
    let mut value_ratio: f64 = 0.0;
    let mut value_holds = true;
    for (row, end, mean) in rows {
        endpoint_residual = endpoint_residual.max(end.abs());
        let sup = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = 4.0 * PI * mean;
        if sup > bound * (1.0 + 1e-12) + 1e-300 {
            value_holds = false;
        }
        if bound > 0.0 {
            value_ratio = value_ratio.max(sup / bound);
        }
        values.extend(row);
        average.push(mean);
    }
    let derivatives = derivative_bounds(a, x, y, &average).unwrap_or_default();
    PrimitiveField {
        n_x,
        n_y,
        x: x.to_vec(),
        y: y.to_vec(),
        values,
        average,
        endpoint_residual,
        bounds: PrimitiveBounds {
            value_ratio,
            value_holds,
            derivatives,
        },
    }
}

fn derivative_bounds(
    a: &DampingProfile,
    x: &[f64],
    y: &[f64],
    average: &[f64],
) -> Option<Vec<DerivativeBound>> {
    let params = a.params()?;
    if !a.has_analytic_derivatives() {
        return None;
    }
    let mut out = Vec::new();
    for order in 1..=params.k.min(2) {
        let alpha = [order, 0];
        let expo = 1.0 - order as f64 * params.sigma;
        let rows: Vec<(f64, f64, f64)> = x
            .par_iter()
            .zip(average)
            .map(|(&xi, &avg)| {
                let mut g = Vec::with_capacity(y.len());
                let mut c: f64 = 0.0;
                for &yl in y {
                    // Isolated singular nodes (the disk apex) carry no weight in the y integral.
                    let Some(d) = a.partial(alpha, xi, yl, 0.0) else {
                        g.push(0.0);
                        continue;
                    };
                    let v = a.eval(xi, yl);
                    if v > 0.0 {
                        c = c.max(d.abs() / v.powf(expo));
                    } else if d != 0.0 {
                        c = f64::INFINITY;
                    }
                    g.push(d);
                }
                let (prim, _, _) = cumulative_zero_mean(&g);
                let sup = prim.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (c, sup, 4.0 * PI * avg.max(0.0).powf(expo))
            })
            .collect();
        let class_constant = rows.iter().fold(0.0f64, |m, r| m.max(r.0));
        let mut ratio: f64 = 0.0;
        let mut holds = true;
        for &(_, sup, base) in &rows {
            if base > 0.0 {
                ratio = ratio.max(sup / base);
            }
            if sup > class_constant * base * (1.0 + 1e-12) + 1e-300 {
                holds = false;
            }
        }
        out.push(DerivativeBound {
            order,
            class_constant,
            ratio,
            holds,
        });
    }
    Some(out)
}

/// Samples of `A(x, y)` at the Fourier grid nodes `2 pi j / n` (both axes),
/// integrating on a `y` grid refined by `refine` (even).
pub fn primitive_on_fourier_grid(a: &DampingProfile, n: usize, refine: usize) -> Vec<f64> {
    assert!(refine.is_multiple_of(2), "refine must be even");
    let nf = n * refine;
    let x: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    let y: Vec<f64> = (0..nf)
        .map(|l| -PI + 2.0 * PI * l as f64 / nf as f64)
        .collect();
    let rows: Vec<Vec<f64>> = x
        .par_iter()
        .map(|&xi| {
            let g: Vec<f64> = y.iter().map(|&yl| a.eval(xi, yl)).collect();
            cumulative_zero_mean(&g).0
        })
        .collect();
    let mut out = Vec::with_capacity(n * n);
    for row in &rows {
        for l in 0..n {
            // Fine node of y = 2 pi l / n.
            let idx = ((2 * l + n) * refine / 2) % nf;
            out.push(row[idx]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::{make_disk_damping, make_strip_damping};

    #[test]
    fn direction_validation_and_geometry() {
        assert!(RationalDirection::new(0, 0).is_err());
        assert!(RationalDirection::new(2, 4).is_err());
        let v = RationalDirection::new(3, -2).unwrap();
        assert!((v.period() - 2.0 * PI * 13f64.sqrt()).abs() < 1e-12);
        let id = RationalDirection::vertical().to_torus(0.3, -1.2);
        assert!((id[0] - 0.3).abs() < 1e-15 && (id[1] + 1.2).abs() < 1e-15);
        let sw = RationalDirection::new(1, 0).unwrap().to_torus(0.3, -1.2);
        assert!((sw[0] + 1.2).abs() < 1e-15 && (sw[1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn constant_and_zero_mean_averages() {
        let c = DampingProfile::constant(2.5).unwrap();
        for v in [
            RationalDirection::vertical(),
            RationalDirection::new(3, -2).unwrap(),
        ] {
            let w = average_along(&c, v, 256).unwrap();
            assert!(w.samples.iter().all(|&s| (s - 2.5).abs() < 1e-13));
        }
        let w = average_fn(RationalDirection::vertical(), 256, |_, y| y.cos());
        assert!(w.iter().all(|s| s.abs() < 1e-14));
    }

    #[test]
    fn indicator_disk_chord_law() {
        let r0 = 1.0;
        let ind = DampingProfile::custom("indicator", None, move |x, y| {
            if x * x + y * y < r0 * r0 {
                1.0
            } else {
                0.0
            }
        });
        let w = average_along(&ind, RationalDirection::vertical(), 4096).unwrap();
        let dy = 2.0 * PI / 4096.0;
        for (x, s) in w.x.iter().zip(&w.samples) {
            if x.abs() < 0.9 {
                let exact = (r0 * r0 - x * x).sqrt() / PI;
                assert!((s - exact).abs() < dy, "x={x}: {s} vs {exact}");
            }
        }
    }

    #[test]
    fn synthetic_power_law_exponent() {
        let n = 4096;
        let x: Vec<f64> = (0..n)
            .map(|j| -PI + 2.0 * PI * j as f64 / n as f64)
            .collect();
        let x0 = x[1500];
        let s: Vec<f64> = x.iter().map(|&t| (t - x0).abs().powi(3)).collect();
        let w = AveragedDamping::from_samples(x, s, 2.0 * PI);
        for side in [Side::Left, Side::Right] {
            let (e, r2) = fit_vanishing_exponent(&w, side, (1e-2, 0.5)).unwrap();
            assert!((e - 3.0).abs() < 0.01 && r2 > 0.999);
        }
    }

    #[test]
    fn strip_average_is_the_profile() {
        let s = make_strip_damping(&[(-1.0, 1.0)], 5.0).unwrap();
        let w = average_along(&s, RationalDirection::vertical(), 4096).unwrap();
        for (x, v) in w.x.iter().zip(&w.samples) {
            assert!(
                (v - s.eval(*x, 0.0)).abs() <= 1e-12 * v,
                "{x}: {v} vs {}",
                s.eval(*x, 0.0)
            );
        }
        let (e, _) = fit_vanishing_exponent(&w, Side::Left, (1e-3, 1e-1)).unwrap();
        assert!((e - 5.0).abs() < 0.1, "{e}");
    }

    #[test]
    fn disk_boundary_is_refined() {
        let d = make_disk_damping([0.0, 0.0], 1.0, 5.0).unwrap();
        let w = average_along(&d, RationalDirection::vertical(), 1024).unwrap();
        let left = w
            .boundary_points
            .iter()
            .find(|b| b.side == Side::Left)
            .unwrap();
        let right = w
            .boundary_points
            .iter()
            .find(|b| b.side == Side::Right)
            .unwrap();
        assert!((left.x + 1.0).abs() < 1e-5, "{}", left.x);
        assert!((right.x - 1.0).abs() < 1e-5, "{}", right.x);
        assert_eq!(w.intervals().len(), 1);
    }

    #[test]
    fn primitive_vanishes_for_y_independent_damping() {
        let s = make_strip_damping(&[(-1.0, 1.0)], 3.0).unwrap();
        let p = primitive_a(&s, (256, 256)).unwrap();
        assert!(p.values.iter().all(|v| v.abs() < 1e-13));
        let z = primitive_a(&DampingProfile::zero(), (256, 256)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn primitive_on_fourier_grid_matches_direct_quadrature() {
        let d = make_disk_damping([0.0, 0.0], 1.0, 5.0).unwrap();
        let n = 33;
        let coarse = primitive_on_fourier_grid(&d, n, 64);
        // y = 2 pi l / n lies in [pi, 2 pi) for large l; compare through periodicity.
        let nf = n * 64;
        let yf: Vec<f64> = (0..nf)
            .map(|l| -PI + 2.0 * PI * l as f64 / nf as f64)
            .collect();
        let xi = 2.0 * PI * 3.0 / n as f64;
        let g: Vec<f64> = yf.iter().map(|&y| d.eval(xi, y)).collect();
        let (row, _, _) = cumulative_zero_mean(&g);
        for l in 0..n {
            let y = 2.0 * PI * l as f64 / n as f64;
            let yw = crate::damping::wrap(y);
            let idx = ((yw + PI) / (2.0 * PI) * nf as f64).round() as usize % nf;
            assert!((coarse[3 * n + l] - row[idx]).abs() < 1e-14);
        }
    }
}
