//! The three trajectory-quality metrics: anomalous acceleration, anomalous
//! jerk, and jerk sign inversions per 1 s window.

use crate::model::{TrajectoryRecord, DT};
use crate::signal::{differentiate, Series, SignalError};

/// Band and window thresholds for the quality metrics. Band membership uses
/// closed intervals: a = 5.0 m/s^2 is still normal.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityThresholds {
    pub accel_min: f64,
    pub accel_max: f64,
    pub jerk_min: f64,
    pub jerk_max: f64,
    /// Inversion window length, seconds.
    pub window: f64,
    pub max_inversions_per_window: usize,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        Self {
            accel_min: -8.0,
            accel_max: 5.0,
            jerk_min: -15.0,
            jerk_max: 15.0,
            window: 1.0,
            max_inversions_per_window: 1,
        }
    }
}

impl QualityThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if self.accel_min >= self.accel_max {
            return Err("quality.accel_min must be < accel_max".into());
        }
        if self.jerk_min >= self.jerk_max {
            return Err("quality.jerk_min must be < jerk_max".into());
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err("quality.window must be > 0".into());
        }
        Ok(())
    }

    fn window_samples(&self) -> usize {
        (self.window / DT).round() as usize
    }
}

/// The three anomaly percentages for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub anomaly_accel_pct: f64,
    pub anomaly_jerk_pct: f64,
    pub anomaly_inversion_pct: f64,
}

fn band_anomaly_pct(values: &[f64], lo: f64, hi: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let bad = values.iter().filter(|&&v| v < lo || v > hi).count();
    100.0 * bad as f64 / values.len() as f64
}

/// Percentage of acceleration samples outside the normal band.
pub fn anomaly_acceleration_pct(a: &Series, t: &QualityThresholds) -> f64 {
    band_anomaly_pct(&a.values, t.accel_min, t.accel_max)
}

/// Percentage of jerk samples outside the normal band.
pub fn anomaly_jerk_pct(j: &Series, t: &QualityThresholds) -> f64 {
    band_anomaly_pct(&j.values, t.jerk_min, t.jerk_max)
}

/// Percentage of sliding 1 s windows whose jerk changes sign more than once.
/// Zero samples carry no sign and are skipped in the inversion count.
pub fn anomaly_inversion_pct(j: &Series, t: &QualityThresholds) -> Result<f64, SignalError> {
    let w = t.window_samples();
    let n = j.values.len();
    if n < w {
        return Err(SignalError::TooShort { len: n, min: w });
    }
    let windows = n - w + 1;
    let mut bad = 0usize;
    for start in 0..windows {
        let mut changes = 0usize;
        let mut last_sign = 0i8;
        for &v in &j.values[start..start + w] {
            let sign = if v > 0.0 {
                1i8
            } else if v < 0.0 {
                -1i8
            } else {
                continue;
            };
            if last_sign != 0 && sign != last_sign {
                changes += 1;
            }
            last_sign = sign;
        }
        if changes > t.max_inversions_per_window {
            bad += 1;
        }
    }
    Ok(100.0 * bad as f64 / windows as f64)
}

/// Computes all three metrics for a record. Jerk is derived from the record's
/// acceleration series by differentiation.
pub fn quality_report(record: &TrajectoryRecord, t: &QualityThresholds) -> QualityReport {
    let accel = Series::new(record.accels(), DT);
    let jerk = differentiate(&accel).expect("records have full length");
    QualityReport {
        anomaly_accel_pct: anomaly_acceleration_pct(&accel, t),
        anomaly_jerk_pct: anomaly_jerk_pct(&jerk, t),
        anomaly_inversion_pct: anomaly_inversion_pct(&jerk, t).expect("records have full length"),
    }
}
