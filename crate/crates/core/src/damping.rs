//! Damping profiles `a(z) >= 0` on the flat torus: the convex disk family, the
//! strip family, and custom closures, together with the class-membership
//! check `|d^alpha f| <= C |f|^{1 - |alpha| sigma}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};

pub const DEFAULT_CLASS_CAP: f64 = 50.0;
pub const DEFAULT_CLASS_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub beta: f64,
    pub sigma: f64,
    pub m: u32,
    pub k: u32,
}

impl HolderParams {
    /// Class parameters with `sigma = 1/beta` and the largest `k <= 2` with
    /// `k sigma < 1`.
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        let sigma = 1.0 / beta;
        let k = (0..=2u32)
            .rev()
            .find(|&k| k as f64 * sigma < 1.0)
            .unwrap_or(0);
        Self::with_orders(beta, 10, k)
    }

    pub fn with_orders(beta: f64, m: u32, k: u32) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        let sigma = 1.0 / beta;
        if k as f64 * sigma >= 1.0 {
            return Err(invalid(
                "k",
                format!("k*sigma = {} must be < 1", k as f64 * sigma),
            ));
        }
        Ok(Self { beta, sigma, m, k })
    }

    /// Parameters of a smooth profile with no vanishing constraint.
    pub fn smooth(k: u32) -> Self {
        Self {
            beta: f64::INFINITY,
            sigma: 0.0,
            m: 10,
            k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DampingKind {
    Disk,
    Strip,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Disk { center: [f64; 2], r0: f64 },
    Strip { intervals: Vec<(f64, f64)> },
    None,
}

/// Serializable description used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingSpec {
    Disk {
        center: [f64; 2],
        r0: f64,
        beta: f64,
    },
    Strip {
        intervals: Vec<(f64, f64)>,
        gamma: f64,
    },
    Constant {
        value: f64,
    },
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;
type MatrixFn = Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>;

#[derive(Clone)]
struct CustomFns {
    name: String,
    eval: ScalarFn,
    grad: Option<VectorFn>,
    hess: Option<MatrixFn>,
}

#[derive(Clone)]
pub struct DampingProfile {
    kind: DampingKind,
    params: Option<HolderParams>,
    geometry: Geometry,
    beta: f64,
    custom: Option<CustomFns>,
    spec: Option<DampingSpec>,
}

impl fmt::Debug for DampingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("DampingProfile");
        d.field("kind", &self.kind)
            .field("params", &self.params)
            .field("geometry", &self.geometry);
        if let Some(c) = &self.custom {
            d.field("name", &c.name);
        }
        d.finish()
    }
}

/// Wraps a coordinate into `[-pi, pi)`.
pub fn wrap(x: f64) -> f64 {
    let t = (x + PI).rem_euclid(2.0 * PI);
    t - PI
}

/// Displacement `z - c` reduced to the nearest lattice translate. On the
/// square lattice the nearest of the 9 neighbouring translates is obtained
/// componentwise.
fn periodic_delta(z: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    [wrap(z[0] - c[0]), wrap(z[1] - c[1])]
}

pub fn torus_distance(z: [f64; 2], c: [f64; 2]) -> f64 {
    let d = periodic_delta(z, c);
    d[0].hypot(d[1])
}

fn pow(d: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < 64.0 {
        d.powi(p as i32)
    } else {
        d.powf(p)
    }
}

/// `c d^p`, with the convention `0 * anything = 0`.
fn scaled_pow(c: f64, d: f64, p: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * pow(d, p)
    }
}

/// One strip interval: `d^gamma` on the outer quarters, quartic bridge in the
/// middle with vanishing first and second derivative at the midpoint.
#[derive(Clone, Copy, Debug)]
struct StripPiece {
    gamma: f64,
    q: f64,
    a: f64,
    b: f64,
    c: f64,
    c3: f64,
    c4: f64,
}

impl StripPiece {
    fn new(width: f64, gamma: f64) -> Self {
        let q = width / 4.0;
        let a = pow(q, gamma);
        let b = scaled_pow(gamma, q, gamma - 1.0);
        let c = scaled_pow(gamma * (gamma - 1.0), q, gamma - 2.0);
        let c4 = (b + c * q / 2.0) / (2.0 * q.powi(3));
        let c3 = (-c - 12.0 * c4 * q * q) / (6.0 * q);
        Self {
            gamma,
            q,
            a,
            b,
            c,
            c3,
            c4,
        }
    }

    /// Value and first two derivatives with respect to the edge distance `d`.
    fn jet(&self, d: f64) -> [f64; 3] {
        let g = self.gamma;
        if d <= self.q {
            [
                pow(d, g),
                scaled_pow(g, d, g - 1.0),
                scaled_pow(g * (g - 1.0), d, g - 2.0),
            ]
        } else {
            let s = d - self.q;
            [
                self.a
                    + self.b * s
                    + self.c * s * s / 2.0
                    + self.c3 * s.powi(3)
                    + self.c4 * s.powi(4),
                self.b + self.c * s + 3.0 * self.c3 * s * s + 4.0 * self.c4 * s.powi(3),
                self.c + 6.0 * self.c3 * s + 12.0 * self.c4 * s * s,
            ]
        }
    }
}

pub fn make_disk_damping(center: [f64; 2], r0: f64, beta: f64) -> Result<DampingProfile> {
    if !(r0 > 0.0 && r0 < PI) {
        return Err(invalid("r0", format!("must lie in (0, pi), got {r0}")));
    }
    let params = HolderParams::new(beta)?;
    Ok(DampingProfile {
        kind: DampingKind::Disk,
        params: Some(params),
        geometry: Geometry::Disk { center, r0 },
        beta,
        custom: None,
        spec: Some(DampingSpec::Disk { center, r0, beta }),
    })
}

pub fn make_strip_damping(intervals: &[(f64, f64)], gamma: f64) -> Result<DampingProfile> {
    if !(gamma >= 0.0) {
        return Err(invalid(
            "gamma",
            format!("must be nonnegative, got {gamma}"),
        ));
    }
    if intervals.is_empty() {
        return Err(invalid("intervals", "at least one interval is required"));
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut covered = 0.0;
    for (i, &(a, b)) in sorted.iter().enumerate() {
        if !(a < b) || a <= -PI || b >= PI {
            return Err(invalid(
                "intervals",
                format!("({a}, {b}) must satisfy -pi < a < b < pi"),
            ));
        }
        if i > 0 && a < sorted[i - 1].1 {
            return Err(invalid(
                "intervals",
                format!(
                    "({a}, {b}) overlaps ({}, {})",
                    sorted[i - 1].0,
                    sorted[i - 1].1
                ),
            ));
        }
        covered += b - a;
    }
    if covered >= 2.0 * PI {
        return Err(invalid(
            "intervals",
            "closure of the union covers the circle",
        ));
    }
    let params = if gamma > 0.0 {
        Some(HolderParams::new(gamma)?)
    } else {
        None
    };
    Ok(DampingProfile {
        kind: DampingKind::Strip,
        params,
        geometry: Geometry::Strip { intervals: sorted },
        beta: gamma,
        custom: None,
        spec: Some(DampingSpec::Strip {
            intervals: intervals.to_vec(),
            gamma,
        }),
    })
}

impl DampingProfile {
    pub fn from_spec(spec: &DampingSpec) -> Result<Self> {
        match spec {
            DampingSpec::Disk { center, r0, beta } => make_disk_damping(*center, *r0, *beta),
            DampingSpec::Strip { intervals, gamma } => make_strip_damping(intervals, *gamma),
            DampingSpec::Constant { value } => Self::constant(*value),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        params: Option<HolderParams>,
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: DampingKind::Custom,
            params,
            geometry: Geometry::None,
            beta: params.map_or(f64::NAN, |p| p.beta),
            custom: Some(CustomFns {
                name: name.into(),
                eval: Arc::new(eval),
                grad: None,
                hess: None,
            }),
            spec: None,
        }
    }

    pub fn with_derivatives(
        mut self,
        grad: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static,
        hess: impl Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync + 'static,
    ) -> Self {
        if let Some(c) = self.custom.as_mut() {
            c.grad = Some(Arc::new(grad));
            c.hess = Some(Arc::new(hess));
        }
        self
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(invalid(
                "value",
                format!("damping must be nonnegative, got {value}"),
            ));
        }
        let mut p = Self::custom("constant", Some(HolderParams::smooth(2)), move |_, _| value)
            .with_derivatives(|_, _| [0.0; 2], |_, _| [[0.0; 2]; 2]);
        p.spec = Some(DampingSpec::Constant { value });
        Ok(p)
    }

    pub fn zero() -> Self {
        Self::constant(0.0).expect("zero is nonnegative")
    }

    pub fn kind(&self) -> DampingKind {
        self.kind
    }

    pub fn params(&self) -> Option<HolderParams> {
        self.params
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Vanishing order: `beta` for disks, `gamma` for strips.
    pub fn order(&self) -> f64 {
        self.beta
    }

    pub fn spec(&self) -> Option<&DampingSpec> {
        self.spec.as_ref()
    }

    pub fn name(&self) -> String {
        match (&self.custom, &self.geometry) {
            (Some(c), _) => c.name.clone(),
            (None, Geometry::Disk { r0, .. }) => format!("disk(r0={r0}, beta={})", self.beta),
            (None, Geometry::Strip { intervals }) => {
                format!("strip({intervals:?}, gamma={})", self.beta)
            }
            (None, Geometry::None) => "custom".into(),
        }
    }

    /// True when the profile does not depend on `y`.
    pub fn is_y_independent(&self) -> bool {
        matches!(self.geometry, Geometry::Strip { .. })
            || matches!(self.spec, Some(DampingSpec::Constant { .. }))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.geometry {
            Geometry::Disk { center, r0 } => {
                let d = r0 - torus_distance([x, y], *center);
                if d > 0.0 {
                    pow(d, self.beta)
                } else {
                    0.0
                }
            }
            Geometry::Strip { intervals } => self.strip_jet(intervals, x)[0],
            Geometry::None => {
                (self.custom.as_ref().expect("custom profile").eval)(wrap(x), wrap(y))
            }
        }
    }

    fn strip_jet(&self, intervals: &[(f64, f64)], x: f64) -> [f64; 3] {
        let x = wrap(x);
        for &(a, b) in intervals {
            if x > a && x < b {
                let piece = StripPiece::new(b - a, self.beta);
                let (d, s) = if x - a <= b - x {
                    (x - a, 1.0)
                } else {
                    (b - x, -1.0)
                };
                let j = piece.jet(d);
                return [j[0], s * j[1], j[2]];
            }
        }
        [0.0; 3]
    }

    /// Analytic gradient, when available. `None` also marks points where the
    /// profile is not differentiable (the disk apex).
    pub fn grad(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        match &self.geometry {
            Geometry::Disk { center, r0 } => {
                if self.beta < 2.0 {
                    return None;
                }
                let dz = periodic_delta([x, y], *center);
                let rho = dz[0].hypot(dz[1]);
                let d = r0 - rho;
                if d <= 0.0 {
                    return Some([0.0; 2]);
                }
                if rho == 0.0 {
                    return None;
                }
                let g = -self.beta * pow(d, self.beta - 1.0) / rho;
                Some([g * dz[0], g * dz[1]])
            }
            Geometry::Strip { intervals } => Some([self.strip_jet(intervals, x)[1], 0.0]),
            Geometry::None => self
                .custom
                .as_ref()?
                .grad
                .as_ref()
                .map(|g| g(wrap(x), wrap(y))),
        }
    }

    pub fn hess(&self, x: f64, y: f64) -> Option<[[f64; 2]; 2]> {
        match &self.geometry {
            Geometry::Disk { center, r0 } => {
                if self.beta < 2.0 {
                    return None;
                }
                let dz = periodic_delta([x, y], *center);
                let rho = dz[0].hypot(dz[1]);
                let d = r0 - rho;
                if d <= 0.0 {
                    return Some([[0.0; 2]; 2]);
                }
                if rho == 0.0 {
                    return None;
                }
                let b = self.beta;
                let radial = b * (b - 1.0) * pow(d, b - 2.0);
                let tangential = b * pow(d, b - 1.0) / rho;
                let n = [dz[0] / rho, dz[1] / rho];
                let mut h = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        h[i][j] = radial * n[i] * n[j] - tangential * (delta - n[i] * n[j]);
                    }
                }
                Some(h)
            }
            Geometry::Strip { intervals } => {
                Some([[self.strip_jet(intervals, x)[2], 0.0], [0.0, 0.0]])
            }
            Geometry::None => self
                .custom
                .as_ref()?
                .hess
                .as_ref()
                .map(|h| h(wrap(x), wrap(y))),
        }
    }

    /// Partial derivative of multi-index `alpha` with `|alpha| <= 2`, analytic
    /// when available and otherwise a centered difference with step `step`.
    pub fn partial(&self, alpha: [u32; 2], x: f64, y: f64, step: f64) -> Option<f64> {
        match alpha[0] + alpha[1] {
            0 => Some(self.eval(x, y)),
            1 => {
                let i = if alpha[0] == 1 { 0 } else { 1 };
                if self.has_analytic_derivatives() {
                    self.grad(x, y).map(|g| g[i])
                } else {
                    Some(self.fd_partial(alpha, x, y, step))
                }
            }
            2 => {
                let (i, j) = match alpha {
                    [2, 0] => (0, 0),
                    [0, 2] => (1, 1),
                    _ => (0, 1),
                };
                if self.has_analytic_derivatives() {
                    self.hess(x, y).map(|h| h[i][j])
                } else {
                    Some(self.fd_partial(alpha, x, y, step))
                }
            }
            _ => None,
        }
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        match &self.geometry {
            Geometry::Disk { .. } => self.beta >= 2.0,
            Geometry::Strip { .. } => true,
            Geometry::None => self.custom.as_ref().is_some_and(|c| c.grad.is_some()),
        }
    }

    /// Second-order centered finite difference of multi-index `alpha`.
    pub fn fd_partial(&self, alpha: [u32; 2], x: f64, y: f64, s: f64) -> f64 {
        let f = |dx: f64, dy: f64| self.eval(x + dx, y + dy);
        match alpha {
            [0, 0] => f(0.0, 0.0),
            [1, 0] => (f(s, 0.0) - f(-s, 0.0)) / (2.0 * s),
            [0, 1] => (f(0.0, s) - f(0.0, -s)) / (2.0 * s),
            [2, 0] => (f(s, 0.0) - 2.0 * f(0.0, 0.0) + f(-s, 0.0)) / (s * s),
            [0, 2] => (f(0.0, s) - 2.0 * f(0.0, 0.0) + f(0.0, -s)) / (s * s),
            [1, 1] => (f(s, s) - f(s, -s) - f(-s, s) + f(-s, -s)) / (4.0 * s * s),
            _ => f64::NAN,
        }
    }

    /// Periodic distance to the boundary of the damped region.
    pub fn dist_to_boundary(&self, z: [f64; 2]) -> Result<f64> {
        match &self.geometry {
            Geometry::Disk { center, r0 } => Ok((r0 - torus_distance(z, *center)).abs()),
            Geometry::Strip { intervals } => Ok(intervals
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .map(|e| wrap(z[0] - e).abs())
                .fold(f64::INFINITY, f64::min)),
            Geometry::None => Err(LabError::UnsupportedGeometry(format!(
                "profile `{}` carries no region geometry",
                self.name()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub alpha: [u32; 2],
    pub worst_ratio: f64,
    pub worst_at: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCheckReport {
    pub grid_n: usize,
    pub floor: f64,
    pub cap: f64,
    pub sigma: f64,
    pub k: u32,
    pub analytic: bool,
    pub ratios: Vec<ClassRatio>,
    /// Grid nodes with `f >= floor` where the profile is not differentiable.
    pub singular_points: usize,
    pub pass: bool,
}

impl ClassCheckReport {
    /// Worst ratio over all multi-indices of total order `order`.
    pub fn max_ratio_of_order(&self, order: u32) -> f64 {
        self.ratios
            .iter()
            .filter(|r| r.alpha[0] + r.alpha[1] == order)
            .map(|r| r.worst_ratio)
            .fold(0.0, f64::max)
    }
}

pub fn check_class_membership(f: &DampingProfile, grid_n: usize, floor: f64) -> ClassCheckReport {
    check_class_membership_with_cap(f, grid_n, floor, DEFAULT_CLASS_CAP)
}

/// Grid nodes are `-pi + 2 pi j / grid_n` in each coordinate.
pub fn check_class_membership_with_cap(
    f: &DampingProfile,
    grid_n: usize,
    floor: f64,
    cap: f64,
) -> ClassCheckReport {
    let (sigma, k) = f.params.map_or((0.0, 0), |p| (p.sigma, p.k));
    let step = 2.0 * PI / grid_n as f64;
    let alphas: Vec<[u32; 2]> = (0..=k)
        .flat_map(|order| (0..=order).rev().map(move |i| [i, order - i]))
        .collect();
    let mut ratios: Vec<ClassRatio> = alphas
        .iter()
        .map(|&alpha| ClassRatio {
            alpha,
            worst_ratio: 0.0,
            worst_at: [f64::NAN; 2],
        })
        .collect();
    let mut singular = 0;
    for i in 0..grid_n {
        let x = -PI + step * i as f64;
        for j in 0..grid_n {
            let y = -PI + step * j as f64;
            let v = f.eval(x, y);
            if v < floor {
                continue;
            }
            let mut node_singular = false;
            for r in ratios.iter_mut() {
                let order = r.alpha[0] + r.alpha[1];
                let Some(d) = f.partial(r.alpha, x, y, step) else {
                    node_singular = true;
                    continue;
                };
                let ratio = d.abs() / v.abs().powf(1.0 - order as f64 * sigma);
                if ratio > r.worst_ratio {
                    r.worst_ratio = ratio;
                    r.worst_at = [x, y];
                }
            }
            if node_singular {
                singular += 1;
            }
        }
    }
    let pass = ratios
        .iter()
        .all(|r| r.worst_ratio.is_finite() && r.worst_ratio <= cap);
    ClassCheckReport {
        grid_n,
        floor,
        cap,
        sigma,
        k,
        analytic: f.has_analytic_derivatives(),
        ratios,
        singular_points: singular,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn disk_formula_examples() {
        let d = make_disk_damping([0.0, 0.0], 0.1, 5.0).unwrap();
        assert!(rel(d.eval(0.0, 0.0), 1.0e-5) < 1e-12);
        assert_eq!(d.eval(0.1, 0.0), 0.0);
        assert!(rel(d.eval(0.05, 0.0), 3.125e-7) < 1e-12);
    }

    #[test]
    fn disk_rejects_bad_parameters() {
        assert!(make_disk_damping([0.0, 0.0], 0.0, 5.0).is_err());
        assert!(make_disk_damping([0.0, 0.0], PI, 5.0).is_err());
        assert!(make_disk_damping([0.0, 0.0], 0.5, 0.0).is_err());
    }

    #[test]
    fn disk_is_periodic_across_the_seam() {
        let d = make_disk_damping([3.0, -3.0], 0.5, 4.0).unwrap();
        let a = d.eval(3.0 + 0.3, -3.0);
        let b = d.eval(3.3 - 2.0 * PI, -3.0 + 2.0 * PI);
        assert!(rel(a, b) < 1e-12);
        assert!(rel(a, 0.2f64.powi(4)) < 1e-12);
    }

    #[test]
    fn strip_edge_and_plateau() {
        let s = make_strip_damping(&[(-0.5, 0.5)], 5.0).unwrap();
        assert!(rel(s.eval(-0.5 + 1e-2, 1.3), 1e-10) < 1e-9);
        let flat = make_strip_damping(&[(-0.5, 0.5)], 0.0).unwrap();
        for x in [-0.49, -0.3, 0.0, 0.2, 0.45] {
            assert!((flat.eval(x, 0.0) - 1.0).abs() < 1e-15);
        }
        assert_eq!(flat.eval(0.6, 0.0), 0.0);
    }

    #[test]
    fn strip_midpoint_bridge_value() {
        // Frozen from an independent evaluation of the quartic bridge.
        let s = make_strip_damping(&[(-0.5, 0.5)], 5.0).unwrap();
        let mid = s.eval(0.0, 0.0);
        assert!(rel(mid, 0.005045572916666668) < 1e-12);
        let quarter = s.eval(-0.25, 0.0);
        assert!(mid >= quarter);
    }

    #[test]
    fn strip_bridge_is_c2_and_monotone() {
        for gamma in [0.5, 1.0, 2.0, 3.5, 5.0, 8.0] {
            let s = make_strip_damping(&[(-1.0, 0.6)], gamma).unwrap();
            let q = 1.6 / 4.0;
            let left = -1.0 + q;
            let e = 1e-7;
            let a = s.eval(left - e, 0.0);
            let b = s.eval(left + e, 0.0);
            let ga = s.grad(left - e, 0.0).unwrap()[0];
            let gb = s.grad(left + e, 0.0).unwrap()[0];
            assert!(
                (a - b).abs() <= 2.0 * e * ga.abs().max(gb.abs()) * (1.0 + 1e-6) + 1e-14,
                "gamma {gamma}"
            );
            assert!((ga - gb).abs() < 1e-5 * ga.abs().max(1.0));
            let mut prev = 0.0;
            let n = 400;
            for i in 1..n {
                let x = -1.0 + 0.8 * i as f64 / n as f64;
                let v = s.eval(x, 0.0);
                assert!(v >= prev - 1e-15, "gamma {gamma} not monotone at {x}");
                prev = v;
            }
        }
    }

    #[test]
    fn strip_validation() {
        assert!(make_strip_damping(&[(-1.0, 0.5), (0.2, 1.0)], 2.0).is_err());
        assert!(make_strip_damping(&[(-1.0, 0.5)], -1.0).is_err());
        assert!(make_strip_damping(&[(-4.0, 0.5)], 1.0).is_err());
    }

    #[test]
    fn distance_examples() {
        let d = make_disk_damping([0.0, 0.0], 0.1, 5.0).unwrap();
        assert!((d.dist_to_boundary([0.0, 0.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!(d.dist_to_boundary([0.1, 0.0]).unwrap().abs() < 1e-15);
        let s = make_strip_damping(&[(-0.5, 0.5)], 5.0).unwrap();
        assert!((s.dist_to_boundary([0.6, 2.0]).unwrap() - 0.1).abs() < 1e-12);
        let c = DampingProfile::constant(1.0).unwrap();
        assert!(matches!(
            c.dist_to_boundary([0.0, 0.0]),
            Err(LabError::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn disk_equals_distance_power_inside() {
        let d = make_disk_damping([0.3, -0.2], 0.8, 5.0).unwrap();
        for &(x, y) in &[(0.3, -0.2), (0.7, 0.1), (0.0, -0.5), (1.0, -0.2)] {
            let r = d.eval(x, y);
            let dist = d.dist_to_boundary([x, y]).unwrap();
            assert!(rel(r, dist.powi(5)) < 1e-12);
        }
    }

    #[test]
    fn class_check_constant_and_disk() {
        let c = DampingProfile::constant(1.0).unwrap();
        let rep = check_class_membership(&c, 64, DEFAULT_CLASS_FLOOR);
        assert!(rep.pass);
        assert_eq!(rep.max_ratio_of_order(1), 0.0);
        assert_eq!(rep.max_ratio_of_order(2), 0.0);
        // Frozen worst ratios from an independent 512^2 evaluation.
        for (beta, worst2) in [
            (4.0, 28.59493234522028),
            (5.0, 35.743665431525336),
            (6.0, 42.89239851783046),
        ] {
            let d = make_disk_damping([0.0, 0.0], 0.1, beta).unwrap();
            let rep = check_class_membership(&d, 512, DEFAULT_CLASS_FLOOR);
            assert!(rep.pass, "beta {beta}: {rep:?}");
            assert_eq!(rep.singular_points, 1);
            assert!(rel(rep.max_ratio_of_order(1), beta) < 1e-9);
            assert!(rel(rep.max_ratio_of_order(2), worst2) < 1e-9);
        }
    }

    #[test]
    fn class_check_strip_passes() {
        let s = make_strip_damping(&[(-0.5, 0.5)], 5.0).unwrap();
        let rep = check_class_membership(&s, 512, DEFAULT_CLASS_FLOOR);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn finite_differences_match_analytic() {
        let d = make_disk_damping([0.0, 0.0], 1.0, 5.0).unwrap();
        let s = 1e-4;
        let pts = [(0.3, 0.1), (-0.2, 0.4), (0.5, -0.3), (0.1, -0.6)];
        for &(x, y) in &pts {
            assert!(d.eval(x, y) >= 1e-3);
            for alpha in [[1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
                let a = d.partial(alpha, x, y, s).unwrap();
                let f = d.fd_partial(alpha, x, y, s);
                assert!(rel(f, a) < 1e-4, "{alpha:?} at ({x},{y}): {f} vs {a}");
            }
        }
    }
}
