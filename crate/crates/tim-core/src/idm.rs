//! Intelligent Driver Model for stop-at-red-light behavior: the acceleration
//! law, approach simulation, and seeded Monte-Carlo calibration against
//! organized trajectories.
//!
//! The stop line is static, so the closing speed equals the AV speed; that is
//! already folded into the v^2 / (2 sqrt(a_max b)) term of the desired gap.

use crate::model::TrajectoryRecord;
use crate::signal::Series;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IdmError {
    #[error("gap must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no trajectories provided")]
    EmptyInput,
    #[error("no usable (v, s) samples in the calibration data")]
    AllSamplesInvalid,
}

/// The six IDM parameters, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired speed, m/s.
    pub v0: f64,
    /// Desired time headway, s.
    pub t_headway: f64,
    /// Maximum acceleration, m/s^2.
    pub a_max: f64,
    /// Comfortable braking deceleration, m/s^2.
    pub b: f64,
    /// Minimum spacing, m.
    pub s0: f64,
    /// Acceleration exponent.
    pub delta: f64,
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("v0", self.v0),
            ("t_headway", self.t_headway),
            ("a_max", self.a_max),
            ("b", self.b),
            ("s0", self.s0),
            ("delta", self.delta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("idm.{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Desired minimum gap s*(v) = s0 + v T + v^2 / (2 sqrt(a_max b)).
pub fn desired_gap(v: f64, p: &IdmParams) -> f64 {
    p.s0 + v * p.t_headway + v * v / (2.0 * (p.a_max * p.b).sqrt())
}

/// IDM acceleration a = a_max [1 - (v / v0)^delta - (s* / s)^2].
pub fn idm_accel(v: f64, s: f64, p: &IdmParams) -> Result<f64, IdmError> {
    if s <= 0.0 {
        return Err(IdmError::NonPositiveGap(s));
    }
    let free = (v / p.v0).powf(p.delta);
    let gap = desired_gap(v, p) / s;
    Ok(p.a_max * (1.0 - free - gap * gap))
}

/// Analytic gap sensitivity d a / d s = 2 a_max s*^2 / s^3.
pub fn idm_accel_ds(v: f64, s: f64, p: &IdmParams) -> f64 {
    let s_star = desired_gap(v, p);
    2.0 * p.a_max * s_star * s_star / (s * s * s)
}

/// Explicit-Euler simulation of an approach to a static stop line from
/// initial speed and gap. Speed is clamped at zero from below; integration
/// stops early once the gap falls to s0 / 2.
pub fn simulate_approach(
    initial: (f64, f64),
    p: &IdmParams,
    dt: f64,
    steps: usize,
) -> Result<(Series, Series), IdmError> {
    let (mut v, mut s) = initial;
    let mut speeds = Vec::with_capacity(steps);
    let mut gaps = Vec::with_capacity(steps);
    for _ in 0..steps {
        speeds.push(v);
        gaps.push(s);
        let a = idm_accel(v, s, p)?;
        let v_next = (v + a * dt).max(0.0);
        let s_next = s - v * dt;
        v = v_next;
        s = s_next;
        if s <= p.s0 / 2.0 {
            break;
        }
    }
    Ok((Series::new(speeds, dt), Series::new(gaps, dt)))
}

/// Root mean square error between two equally long acceleration series.
pub fn rmse_accel(observed: &Series, modeled: &Series) -> Result<f64, IdmError> {
    if observed.len() != modeled.len() {
        return Err(IdmError::LengthMismatch(observed.len(), modeled.len()));
    }
    let n = observed.len() as f64;
    let sum: f64 = observed
        .values
        .iter()
        .zip(&modeled.values)
        .map(|(o, m)| (o - m) * (o - m))
        .sum();
    Ok((sum / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub low: f64,
    pub high: f64,
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<(), String> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return Err(format!("calibration.{name}: low must be < high"));
        }
        Ok(())
    }
}

/// Per-parameter uniform sampling ranges. The defaults bracket published
/// stop-at-light calibrations with wide margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRanges {
    pub v0: ParamRange,
    pub t_headway: ParamRange,
    pub a_max: ParamRange,
    pub b: ParamRange,
    pub s0: ParamRange,
    pub delta: ParamRange,
}

impl Default for CalibrationRanges {
    fn default() -> Self {
        Self {
            v0: ParamRange { low: 1.0, high: 30.0 },
            t_headway: ParamRange { low: 0.1, high: 5.0 },
            a_max: ParamRange { low: 0.05, high: 5.0 },
            b: ParamRange { low: 0.1, high: 8.0 },
            s0: ParamRange { low: 0.1, high: 10.0 },
            delta: ParamRange { low: 1.0, high: 10.0 },
        }
    }
}

/// How per-sample errors pool into the calibration objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Objective {
    /// RMSE over all samples of all trajectories pooled together.
    #[default]
    Pooled,
    /// Mean of per-trajectory RMSEs.
    PerTrajectoryMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub ranges: CalibrationRanges,
    pub n_samples: usize,
    pub seed: u64,
    /// Skip samples with v < 0.1 m/s (post-stop dwell) when evaluating.
    pub exclude_stopped: bool,
    pub objective: Objective,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            ranges: CalibrationRanges::default(),
            n_samples: 100_000,
            seed: 42,
            exclude_stopped: false,
            objective: Objective::Pooled,
        }
    }
}

impl CalibrationSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_samples == 0 {
            return Err("calibration.n_samples must be >= 1".into());
        }
        self.ranges.v0.validate("v0")?;
        self.ranges.t_headway.validate("t_headway")?;
        self.ranges.a_max.validate("a_max")?;
        self.ranges.b.validate("b")?;
        self.ranges.s0.validate("s0")?;
        self.ranges.delta.validate("delta")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub best: IdmParams,
    pub rmse_calibration: f64,
    /// Filled when a held-out validation set is evaluated.
    pub rmse_validation: Option<f64>,
}

/// One usable (v, s, a) sample per timestep per trajectory.
#[derive(Debug, Clone)]
struct CalibrationData {
    /// Per-trajectory samples, in input order.
    trajectories: Vec<Vec<(f64, f64, f64)>>,
}

fn collect_samples(
    trajectories: &[TrajectoryRecord],
    exclude_stopped: bool,
) -> Result<CalibrationData, IdmError> {
    if trajectories.is_empty() {
        return Err(IdmError::EmptyInput);
    }
    let mut out = Vec::with_capacity(trajectories.len());
    for rec in trajectories {
        let samples: Vec<(f64, f64, f64)> = rec
            .rows
            .iter()
            .filter_map(|row| {
                let s = row.dist_to_stop_line?;
                if s <= 0.0 {
                    return None;
                }
                if exclude_stopped && row.speed < 0.1 {
                    return None;
                }
                Some((row.speed, s, row.accel))
            })
            .collect();
        out.push(samples);
    }
    if out.iter().all(|t| t.is_empty()) {
        return Err(IdmError::AllSamplesInvalid);
    }
    Ok(CalibrationData { trajectories: out })
}

fn objective_value(data: &CalibrationData, p: &IdmParams, objective: Objective) -> f64 {
    match objective {
        Objective::Pooled => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for traj in &data.trajectories {
                for &(v, s, a) in traj {
                    let m = idm_accel(v, s, p).expect("s > 0 by construction");
                    sum += (m - a) * (m - a);
                    n += 1;
                }
            }
            (sum / n as f64).sqrt()
        }
        Objective::PerTrajectoryMean => {
            let mut total = 0.0;
            let mut count = 0usize;
            for traj in &data.trajectories {
                if traj.is_empty() {
                    continue;
                }
                let mut sum = 0.0;
                for &(v, s, a) in traj {
                    let m = idm_accel(v, s, p).expect("s > 0 by construction");
                    sum += (m - a) * (m - a);
                }
                total += (sum / traj.len() as f64).sqrt();
                count += 1;
            }
            total / count as f64
        }
    }
}

/// Evaluates the calibration objective for fixed parameters over a trajectory
/// set (used for held-out validation).
pub fn evaluate_rmse(
    trajectories: &[TrajectoryRecord],
    p: &IdmParams,
    spec: &CalibrationSpec,
) -> Result<f64, IdmError> {
    let data = collect_samples(trajectories, spec.exclude_stopped)?;
    Ok(objective_value(&data, p, spec.objective))
}

/// Seeded Monte-Carlo calibration: draws `n_samples` parameter vectors
/// uniformly over the ranges and returns the one with the smallest objective.
/// Ties break toward the earlier sample index, so the result is deterministic
/// for a fixed spec regardless of evaluation order.
pub fn calibrate(
    trajectories: &[TrajectoryRecord],
    spec: &CalibrationSpec,
) -> Result<CalibrationResult, IdmError> {
    let data = collect_samples(trajectories, spec.exclude_stopped)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut best: Option<(f64, IdmParams)> = None;
    for _ in 0..spec.n_samples {
        let r = &spec.ranges;
        let candidate = IdmParams {
            v0: rng.gen_range(r.v0.low..r.v0.high),
            t_headway: rng.gen_range(r.t_headway.low..r.t_headway.high),
            a_max: rng.gen_range(r.a_max.low..r.a_max.high),
            b: rng.gen_range(r.b.low..r.b.high),
            s0: rng.gen_range(r.s0.low..r.s0.high),
            delta: rng.gen_range(r.delta.low..r.delta.high),
        };
        let value = objective_value(&data, &candidate, spec.objective);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, candidate));
        }
    }
    let (rmse_calibration, best) = best.expect("n_samples >= 1");
    Ok(CalibrationResult {
        best,
        rmse_calibration,
        rmse_validation: None,
    })
}
