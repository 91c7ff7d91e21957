use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::damping::DampingSpec;
use crate::error::{LabError, Result};
use crate::oned::{KappaProfile, LambdaSearch};
use crate::spectral2d::PeakSearch;

/// Largest truncation accepted for 2D sweeps; the stationary operator has
/// `(2K+1)^2` unknowns.
pub const MAX_K: usize = 400;
pub const MAX_GRID_1D: usize = 1 << 16;
pub const MAX_GRID_AVERAGING: usize = 1 << 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Resolvent2d,
    Resolvent1d,
    Averaging,
    Normalform,
    Decay,
    GeneratorSpectrum,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::Resolvent2d,
        Self::Resolvent1d,
        Self::Averaging,
        Self::Normalform,
        Self::Decay,
        Self::GeneratorSpectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Resolvent2d => "resolvent2d",
            Self::Resolvent1d => "resolvent1d",
            Self::Averaging => "averaging",
            Self::Normalform => "normalform",
            Self::Decay => "decay",
            Self::GeneratorSpectrum => "generator-spectrum",
        }
    }
}

/// Either an explicit list or `start * ratio^j`, `j < count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HGrid {
    List(Vec<f64>),
    Geometric {
        start: f64,
        ratio: f64,
        count: usize,
    },
}

impl HGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::List(v) => v.clone(),
            Self::Geometric {
                start,
                ratio,
                count,
            } => (0..*count).map(|j| start * ratio.powi(j as i32)).collect(),
        }
    }
}

/// `K = ceil(factor / h) + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KRule {
    pub factor: f64,
    #[serde(default)]
    pub offset: usize,
}

impl KRule {
    pub fn k(&self, h: f64) -> usize {
        (self.factor / h).ceil() as usize + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolvent2dMode {
    /// Norm at each listed `h`.
    Pointwise,
    /// Supremum over a window `[h / (1 + width h), h]`.
    Peak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Krylov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolvent2dParams {
    pub damping: DampingSpec,
    pub h: HGrid,
    pub k_rule: KRule,
    pub mode: Resolvent2dMode,
    pub method: Method,
    pub peak: PeakSearch,
    pub tolerance: f64,
}

impl Default for Resolvent2dParams {
    fn default() -> Self {
        Self {
            damping: DampingSpec::Disk {
                center: [0.0, 0.0],
                r0: 1.0,
                beta: 5.0,
            },
            h: HGrid::Geometric {
                start: 0.2,
                ratio: 0.8,
                count: 5,
            },
            k_rule: KRule {
                factor: 4.0,
                offset: 0,
            },
            mode: Resolvent2dMode::Pointwise,
            method: Method::Krylov,
            peak: PeakSearch::default(),
            tolerance: 0.15,
        }
    }
}

/// The 1D potential: the strip damping on `y = 0`, or the vertical average of
/// a disk damping centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential1d {
    Strip {
        intervals: Vec<(f64, f64)>,
        gamma: f64,
    },
    DiskAverage {
        r0: f64,
        beta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolvent1dParams {
    pub potential: Potential1d,
    pub grid_n: usize,
    pub h: HGrid,
    pub search: LambdaSearch,
    /// Tolerances on the norm exponent and on the singular value exponent.
    pub tolerance: (f64, f64),
    /// Energies per `h` for the regime table; zero skips it.
    pub regime_energies: usize,
    pub kappa: KappaProfile,
}

impl Default for Resolvent1dParams {
    fn default() -> Self {
        Self {
            potential: Potential1d::Strip {
                intervals: vec![(-0.5, 0.5)],
                gamma: 5.0,
            },
            grid_n: 1024,
            h: HGrid::Geometric {
                start: 10f64.powf(-1.5),
                ratio: 10f64.powf(-0.25),
                count: 4,
            },
            search: LambdaSearch::default(),
            tolerance: (0.02, 0.03),
            regime_energies: 0,
            kappa: KappaProfile::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingParams {
    pub damping: DampingSpec,
    /// Rational direction `(p, q)`.
    pub direction: (i64, i64),
    pub grid_n: usize,
    /// Distance window for the vanishing-exponent fit.
    pub window: (f64, f64),
    pub tolerance: f64,
}

impl Default for AveragingParams {
    fn default() -> Self {
        Self {
            damping: DampingSpec::Disk {
                center: [0.0, 0.0],
                r0: 1.0,
                beta: 5.0,
            },
            direction: (0, 1),
            grid_n: 8192,
            window: (1e-3, 1e-1),
            tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalformParams {
    pub damping: DampingSpec,
    pub h: HGrid,
    pub k_rule: KRule,
    /// Smallest acceptable fitted order of the residual in `h`.
    pub min_order: f64,
}

impl Default for NormalformParams {
    fn default() -> Self {
        Self {
            damping: DampingSpec::Disk {
                center: [0.0, 0.0],
                r0: 1.0,
                beta: 5.0,
            },
            h: HGrid::List(vec![0.2, 0.14, 0.1, 0.07, 0.05]),
            k_rule: KRule {
                factor: 2.0,
                offset: 4,
            },
            min_order: 1.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub dampings: Vec<DampingSpec>,
    pub k: usize,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            dampings: vec![
                DampingSpec::Disk {
                    center: [0.0, 0.0],
                    r0: 1.0,
                    beta: 5.0,
                },
                DampingSpec::Strip {
                    intervals: vec![(-1.0, 1.0)],
                    gamma: 5.0,
                },
            ],
            k: 16,
            t_end: 50.0,
            dt: 0.05,
            sample_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpectrumParams {
    pub damping: DampingSpec,
    pub k: usize,
}

impl Default for GeneratorSpectrumParams {
    fn default() -> Self {
        Self {
            damping: DampingSpec::Disk {
                center: [0.0, 0.0],
                r0: 1.0,
                beta: 5.0,
            },
            k: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    Resolvent2d(Resolvent2dParams),
    Resolvent1d(Resolvent1dParams),
    Averaging(AveragingParams),
    Normalform(NormalformParams),
    Decay(DecayParams),
    GeneratorSpectrum(GeneratorSpectrumParams),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::Resolvent2d(_) => ExperimentKind::Resolvent2d,
            Self::Resolvent1d(_) => ExperimentKind::Resolvent1d,
            Self::Averaging(_) => ExperimentKind::Averaging,
            Self::Normalform(_) => ExperimentKind::Normalform,
            Self::Decay(_) => ExperimentKind::Decay,
            Self::GeneratorSpectrum(_) => ExperimentKind::GeneratorSpectrum,
        }
    }

    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Resolvent2d => Self::Resolvent2d(Default::default()),
            ExperimentKind::Resolvent1d => Self::Resolvent1d(Default::default()),
            ExperimentKind::Averaging => Self::Averaging(Default::default()),
            ExperimentKind::Normalform => Self::Normalform(Default::default()),
            ExperimentKind::Decay => Self::Decay(Default::default()),
            ExperimentKind::GeneratorSpectrum => Self::GeneratorSpectrum(Default::default()),
        }
    }
}

/// One experiment per JSON file:
/// `{"experiment": {"kind": ..., "params": {...}}, "out_dir": ..., "seed": ..., "threads": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn bad(field: &str, reason: impl Into<String>) -> LabError {
    LabError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn check_h(field: &str, grid: &HGrid, min_points: usize) -> Result<Vec<f64>> {
    if let HGrid::Geometric { ratio, .. } = grid {
        if !(*ratio > 0.0 && *ratio < 1.0) {
            return Err(bad(field, format!("ratio must lie in (0, 1), got {ratio}")));
        }
    }
    let hs = grid.values();
    if hs.len() < min_points {
        return Err(bad(
            field,
            format!("need at least {min_points} values, got {}", hs.len()),
        ));
    }
    if let Some(h) = hs.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
        return Err(bad(field, format!("every h must lie in (0, 1), got {h}")));
    }
    Ok(hs)
}

fn check_damping(field: &str, spec: &DampingSpec) -> Result<()> {
    crate::damping::DampingProfile::from_spec(spec)
        .map(|_| ())
        .map_err(|e| bad(field, e.to_string()))
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            out_dir: default_out(),
            seed: 0,
            threads: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| bad("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks on every numeric parameter the run will read.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(bad("threads", "must be at least 1"));
        }
        match &self.experiment {
            Experiment::Resolvent2d(p) => {
                check_damping("params.damping", &p.damping)?;
                let hs = check_h("params.h", &p.h, 5)?;
                check_positive("params.k_rule.factor", p.k_rule.factor)?;
                check_positive("params.tolerance", p.tolerance)?;
                if let Some(h) = hs.iter().find(|&&h| p.k_rule.k(h) > MAX_K) {
                    return Err(bad(
                        "params.k_rule",
                        format!("K at h = {h} exceeds {MAX_K}"),
                    ));
                }
                if p.mode == Resolvent2dMode::Peak {
                    check_positive("params.peak.width", p.peak.width)?;
                    check_positive("params.peak.bracket", p.peak.bracket)?;
                }
            }
            Experiment::Resolvent1d(p) => {
                match &p.potential {
                    Potential1d::Strip { intervals, gamma } => {
                        crate::damping::make_strip_damping(intervals, *gamma)
                            .map_err(|e| bad("params.potential", e.to_string()))?;
                    }
                    Potential1d::DiskAverage { r0, beta } => {
                        crate::damping::make_disk_damping([0.0, 0.0], *r0, *beta)
                            .map_err(|e| bad("params.potential", e.to_string()))?;
                    }
                }
                if !(crate::oned::MIN_GRID..=MAX_GRID_1D).contains(&p.grid_n)
                    || !p.grid_n.is_power_of_two()
                {
                    return Err(bad(
                        "params.grid_n",
                        format!(
                            "must be a power of two in {}..={MAX_GRID_1D}",
                            crate::oned::MIN_GRID
                        ),
                    ));
                }
                check_h("params.h", &p.h, 4)?;
                check_positive("params.search.c1", p.search.c1)?;
                if p.search.per_decade == 0 {
                    return Err(bad("params.search.per_decade", "must be positive"));
                }
                check_positive("params.tolerance.0", p.tolerance.0)?;
                check_positive("params.tolerance.1", p.tolerance.1)?;
            }
            Experiment::Averaging(p) => {
                check_damping("params.damping", &p.damping)?;
                crate::averaging::RationalDirection::new(p.direction.0, p.direction.1)
                    .map_err(|e| bad("params.direction", e.to_string()))?;
                if !(256..=MAX_GRID_AVERAGING).contains(&p.grid_n) {
                    return Err(bad(
                        "params.grid_n",
                        format!("must lie in 256..={MAX_GRID_AVERAGING}"),
                    ));
                }
                if !(p.window.0 > 0.0 && p.window.0 < p.window.1) {
                    return Err(bad("params.window", "need 0 < lo < hi"));
                }
                check_positive("params.tolerance", p.tolerance)?;
            }
            Experiment::Normalform(p) => {
                check_damping("params.damping", &p.damping)?;
                let hs = check_h("params.h", &p.h, 4)?;
                check_positive("params.k_rule.factor", p.k_rule.factor)?;
                if let Some(h) = hs
                    .iter()
                    .find(|&&h| p.k_rule.k(h) < crate::pseudodiff::required_truncation(h))
                {
                    return Err(bad("params.k_rule", format!("K too small at h = {h}")));
                }
            }
            Experiment::Decay(p) => {
                if p.dampings.is_empty() {
                    return Err(bad("params.dampings", "need at least one damping"));
                }
                for d in &p.dampings {
                    check_damping("params.dampings", d)?;
                }
                if !(1..=128).contains(&p.k) {
                    return Err(bad("params.k", "must lie in 1..=128"));
                }
                check_positive("params.t_end", p.t_end)?;
                check_positive("params.dt", p.dt)?;
                let bound = crate::timedomain::step_bound(p.k);
                if p.dt > bound {
                    return Err(bad(
                        "params.dt",
                        format!("exceeds the stability bound {bound}"),
                    ));
                }
                if p.sample_every == 0 {
                    return Err(bad("params.sample_every", "must be positive"));
                }
            }
            Experiment::GeneratorSpectrum(p) => {
                check_damping("params.damping", &p.damping)?;
                if !(1..=crate::spectral2d::GENERATOR_MAX_K).contains(&p.k) {
                    return Err(bad(
                        "params.k",
                        format!("must lie in 1..={}", crate::spectral2d::GENERATOR_MAX_K),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for kind in ExperimentKind::ALL {
            let mut cfg = ExperimentConfig::new(Experiment::default_for(kind));
            cfg.seed = 11;
            cfg.threads = Some(2);
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.experiment.kind(), kind);
        }
    }

    #[test]
    fn rejects_unknown_fields() {
        let mut v = serde_json::to_value(ExperimentConfig::new(Experiment::default_for(
            ExperimentKind::Decay,
        )))
        .unwrap();
        v["experiment"]["params"]["t_ned"] = serde_json::json!(10.0);
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("t_ned"), "{err}");
    }

    #[test]
    fn names_the_bad_field() {
        let p = Resolvent2dParams {
            h: HGrid::List(vec![0.2, 0.1, 1.5, 0.05, 0.04]),
            ..Default::default()
        };
        let cfg = ExperimentConfig::new(Experiment::Resolvent2d(p));
        match cfg.validate() {
            Err(LabError::Config { field, .. }) => assert_eq!(field, "params.h"),
            other => panic!("{other:?}"),
        }
        let err = ExperimentConfig::from_json(r#"{"experiment": {"kind": "decay", "params": {}}}"#)
            .unwrap_err();
        assert!(matches!(err, LabError::Config { .. }));
    }

    #[test]
    fn geometric_grid() {
        let g: HGrid = serde_json::from_str(r#"{"start": 0.2, "ratio": 0.5, "count": 3}"#).unwrap();
        assert_eq!(g.values(), vec![0.2, 0.1, 0.05]);
        let l: HGrid = serde_json::from_str("[0.3, 0.2]").unwrap();
        assert_eq!(l.values(), vec![0.3, 0.2]);
    }
}
