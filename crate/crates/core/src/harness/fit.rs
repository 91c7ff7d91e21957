use serde::{Deserialize, Serialize};

use crate::averaging::linear_fit;
use crate::error::{LabError, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Pass requires `|slope - predicted| <= tolerance` and `r2 >= 0.98`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
    pub predicted: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const MIN_R2: f64 = 0.98;

pub fn loglog_fit(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<LogLogFit> {
    let mut logs = Vec::with_capacity(points.len());
    for (i, &(x, y)) in points.iter().enumerate() {
        if let Some((lo, hi)) = window {
            if x < lo || x > hi {
                continue;
            }
        }
        if !(x > 0.0) {
            return Err(LabError::NonPositive { index: i, value: x });
        }
        if !(y > 0.0) {
            return Err(LabError::NonPositive { index: i, value: y });
        }
        logs.push((x.ln(), y.ln()));
    }
    if logs.len() < 4 {
        return Err(LabError::TooFewPoints {
            got: logs.len(),
            required: 4,
        });
    }
    let (slope, intercept, r2) = linear_fit(&logs);
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
        n_points: logs.len(),
    })
}

impl FitReport {
    pub fn new(fit: LogLogFit, predicted: f64, tolerance: f64) -> Self {
        let abs_diff = (fit.slope - predicted).abs();
        Self {
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r2,
            n_points: fit.n_points,
            predicted,
            abs_diff,
            tolerance,
            pass: abs_diff <= tolerance && fit.r2 >= MIN_R2,
        }
    }
}
