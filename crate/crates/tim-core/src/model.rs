//! Core domain types shared by every other module: segments, trajectory
//! records, and the classifier parameter sets.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Fixed number of samples per segment (9.1 s at 0.1 s spacing).
pub const SEGMENT_LEN: usize = 91;

/// Sample spacing in seconds.
pub const DT: f64 = 0.1;

/// A point in the locally planar frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Vector from `self` to `other`.
    pub fn vector_to(&self, other: Point) -> Vec2 {
        Vec2 {
            x: other.x - self.x,
            y: other.y - self.y,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A planar vector, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    /// Unit vector, or `None` when the norm is zero.
    pub fn unit(&self) -> Option<Vec2> {
        let n = self.norm();
        if n == 0.0 {
            None
        } else {
            Some(Vec2 {
                x: self.x / n,
                y: self.y / n,
            })
        }
    }
}

/// One timestep of the AV state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStep {
    /// 1-based timestep index, 1..=91.
    pub index: u32,
    pub position: Point,
    /// Speed in m/s, non-negative.
    pub speed: f64,
}

/// Per-timestep state codes of a traffic light, as recorded in the source
/// data: unknown (0), arrow red (1), arrow yellow (2), arrow green (3),
/// circle red (4), circle yellow (5), circle green (6), flashing red (7),
/// flashing yellow (8).
pub const LIGHT_STATE_MAX: u8 = 8;

/// A traffic light track: the stop-line point it controls plus its state at
/// every timestep. The light position in the source data is the beginning of
/// the lane in the intersection, i.e., the stop line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficLightTrack {
    pub stop_line: Point,
    pub states: Vec<u8>,
}

/// A stop sign position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopSign {
    pub position: Point,
}

/// One 9.1 s clip: 91 AV states plus traffic-light and stop-sign context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub steps: Vec<TimeStep>,
    pub lights: Vec<TrafficLightTrack>,
    pub signs: Vec<StopSign>,
}

impl Segment {
    pub fn positions(&self) -> Vec<Point> {
        self.steps.iter().map(|s| s.position).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.speed).collect()
    }

    pub fn first_position(&self) -> Point {
        self.steps[0].position
    }

    pub fn last_position(&self) -> Point {
        self.steps[self.steps.len() - 1].position
    }
}

/// The eight interaction categories plus the rejection bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionCategory {
    LightStop,
    LightLeftTurn,
    LightRightTurn,
    LightStraight,
    SignFourWay,
    SignRightTurn,
    SignLeftOneStep,
    SignLeftTwoStep,
    None,
}

impl InteractionCategory {
    pub const ALL: [InteractionCategory; 9] = [
        InteractionCategory::LightStop,
        InteractionCategory::LightLeftTurn,
        InteractionCategory::LightRightTurn,
        InteractionCategory::LightStraight,
        InteractionCategory::SignFourWay,
        InteractionCategory::SignRightTurn,
        InteractionCategory::SignLeftOneStep,
        InteractionCategory::SignLeftTwoStep,
        InteractionCategory::None,
    ];

    /// Stable lowercase name used for directories and CSV fields.
    pub fn as_str(&self) -> &'static str {
        match self {
            InteractionCategory::LightStop => "light_stop",
            InteractionCategory::LightLeftTurn => "light_left_turn",
            InteractionCategory::LightRightTurn => "light_right_turn",
            InteractionCategory::LightStraight => "light_straight",
            InteractionCategory::SignFourWay => "sign_four_way",
            InteractionCategory::SignRightTurn => "sign_right_turn",
            InteractionCategory::SignLeftOneStep => "sign_left_one_step",
            InteractionCategory::SignLeftTwoStep => "sign_left_two_step",
            InteractionCategory::None => "none",
        }
    }

    pub fn from_str_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for InteractionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One organized per-timestep output row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub index: u32,
    pub position: Point,
    pub speed: f64,
    pub accel: f64,
    /// State code of the influencing light at this timestep; `None` when the
    /// segment has no influencing light.
    pub light_state: Option<u8>,
    /// Euclidean distance to the influencing light's stop line.
    pub dist_to_stop_line: Option<f64>,
    /// Euclidean distance to the initial nearest stop sign.
    pub dist_to_sign: Option<f64>,
}

/// The organized trajectory extracted from a classified segment.
///
/// Missing context (no light, no sign) is an explicit `None`, never a zero
/// sentinel: (0, 0) is a valid coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub segment_id: String,
    pub category: InteractionCategory,
    pub light_position: Option<Point>,
    pub sign_position: Option<Point>,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecord {
    pub fn speeds(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.speed).collect()
    }

    pub fn accels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.accel).collect()
    }

    /// Distance traveled along the recorded positions, meters.
    pub fn path_length(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| w[0].position.distance(w[1].position))
            .sum()
    }
}

/// Thresholds governing the traffic-light rule chain R1.1-R1.9.
#[derive(Debug, Clone, PartialEq)]
pub struct LightRuleParams {
    /// Minimum cumulative movement duration, seconds.
    pub l_move: f64,
    /// Distance threshold for passing through the stop line, meters.
    pub d_pass: f64,
    /// Degree of the trajectory-fitting polynomial.
    pub d_poly: usize,
    /// Forward extension of the fitted trajectory, fraction of its length.
    pub p_extend: f64,
    /// Speed below which the vehicle counts as stopped, m/s.
    pub v_stop: f64,
    /// Length of the leading window that must show motion, seconds.
    pub l_begin: f64,
    /// Length of the trailing window that must show a stop, seconds.
    pub l_end: f64,
    /// Maximum final distance to the stop line for a stop, meters.
    pub d_stop: f64,
    /// Minimum travel time beyond the stop line for a pass, seconds.
    pub l_extend: f64,
    pub eta_left: f64,
    pub eta_right: f64,
    pub eta_through_1: f64,
    pub eta_through_2: f64,
}

impl Default for LightRuleParams {
    fn default() -> Self {
        Self {
            l_move: 1.0,
            d_pass: 0.1,
            d_poly: 6,
            p_extend: 0.2,
            v_stop: 1.0,
            l_begin: 1.0,
            l_end: 1.0,
            d_stop: 5.0,
            l_extend: 2.0,
            eta_left: 0.3,
            eta_right: -0.3,
            eta_through_1: 0.1,
            eta_through_2: -0.1,
        }
    }
}

impl LightRuleParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta_right < self.eta_through_2
            && self.eta_through_2 < self.eta_through_1
            && self.eta_through_1 < self.eta_left)
        {
            return Err(format!(
                "eta ordering violated: need eta_right < eta_through_2 < eta_through_1 < eta_left, \
                 got {} / {} / {} / {}",
                self.eta_right, self.eta_through_2, self.eta_through_1, self.eta_left
            ));
        }
        for (name, v) in [
            ("l_move", self.l_move),
            ("d_pass", self.d_pass),
            ("v_stop", self.v_stop),
            ("l_begin", self.l_begin),
            ("l_end", self.l_end),
            ("d_stop", self.d_stop),
            ("l_extend", self.l_extend),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("light.{name} must be > 0, got {v}"));
            }
        }
        if !(self.p_extend > 0.0 && self.p_extend < 1.0) {
            return Err(format!("light.p_extend must be in (0, 1), got {}", self.p_extend));
        }
        if self.d_poly == 0 {
            return Err("light.d_poly must be >= 1".into());
        }
        Ok(())
    }
}

/// Which point the R2.3 stop area is centered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopAreaMode {
    /// Centered on the trajectory point nearest to the initial nearest sign
    /// (the prose reading of the selection procedure). Default.
    NearestPoint,
    /// Centered directly on the sign (the printed-equation reading).
    SignCentered,
}

/// Thresholds governing the stop-sign rule chain R2.1-R2.7.
#[derive(Debug, Clone, PartialEq)]
pub struct SignRuleParams {
    /// Radius of the circular stop area, meters.
    pub r_stop: f64,
    /// Minimum cumulative stopping duration, seconds.
    pub l_stop: f64,
    /// Speed below which the vehicle counts as stopped, m/s.
    pub v_stop: f64,
    /// Minimum interval between the two stops of a two-step left turn, seconds.
    pub delta_t_stop: f64,
    pub eta_left: f64,
    pub eta_right: f64,
    /// DBSCAN neighborhood radius, meters.
    pub dbscan_eps: f64,
    /// DBSCAN core-point threshold (the point itself counts).
    pub dbscan_min_pts: usize,
    pub stop_area_mode: StopAreaMode,
}

impl Default for SignRuleParams {
    fn default() -> Self {
        Self {
            r_stop: 5.0,
            l_stop: 0.5,
            v_stop: 0.5,
            delta_t_stop: 1.0,
            eta_left: 0.3,
            eta_right: -0.3,
            dbscan_eps: 28.0,
            dbscan_min_pts: 2,
            stop_area_mode: StopAreaMode::NearestPoint,
        }
    }
}

impl SignRuleParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta_right < 0.0 && 0.0 < self.eta_left) {
            return Err(format!(
                "sign eta ordering violated: need eta_right < 0 < eta_left, got {} / {}",
                self.eta_right, self.eta_left
            ));
        }
        for (name, v) in [
            ("r_stop", self.r_stop),
            ("l_stop", self.l_stop),
            ("v_stop", self.v_stop),
            ("delta_t_stop", self.delta_t_stop),
            ("dbscan_eps", self.dbscan_eps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("sign.{name} must be > 0, got {v}"));
            }
        }
        if self.dbscan_min_pts == 0 {
            return Err("sign.dbscan_min_pts must be >= 1".into());
        }
        Ok(())
    }
}

/// A named invariant violation found by [`validate_segment`]. Violations are
/// data, not failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Field path, e.g. `steps` or `lights[0].states`.
    pub field: String,
    /// Offending index within the field, when applicable.
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}]: {}", self.field, i, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Checks every [`Segment`] invariant; an empty list means the segment is
/// well-formed.
pub fn validate_segment(segment: &Segment) -> Vec<Violation> {
    let mut out = Vec::new();
    if segment.steps.len() != SEGMENT_LEN {
        out.push(Violation {
            field: "steps".into(),
            index: None,
            message: format!("expected {} steps, got {}", SEGMENT_LEN, segment.steps.len()),
        });
    }
    for (i, step) in segment.steps.iter().enumerate() {
        if step.index as usize != i + 1 {
            out.push(Violation {
                field: "steps".into(),
                index: Some(i),
                message: format!("index must be {} (contiguous from 1), got {}", i + 1, step.index),
            });
        }
        if !step.position.is_finite() {
            out.push(Violation {
                field: "steps".into(),
                index: Some(i),
                message: "non-finite position".into(),
            });
        }
        if !step.speed.is_finite() || step.speed < 0.0 {
            out.push(Violation {
                field: "steps".into(),
                index: Some(i),
                message: format!("speed must be finite and >= 0, got {}", step.speed),
            });
        }
    }
    for (li, light) in segment.lights.iter().enumerate() {
        if light.states.len() != SEGMENT_LEN {
            out.push(Violation {
                field: format!("lights[{li}].states"),
                index: None,
                message: format!("expected {} states, got {}", SEGMENT_LEN, light.states.len()),
            });
        }
        for (i, &code) in light.states.iter().enumerate() {
            if code > LIGHT_STATE_MAX {
                out.push(Violation {
                    field: format!("lights[{li}].states"),
                    index: Some(i),
                    message: format!("state code must be 0..={LIGHT_STATE_MAX}, got {code}"),
                });
            }
        }
        if !light.stop_line.is_finite() {
            out.push(Violation {
                field: format!("lights[{li}].stop_line"),
                index: None,
                message: "non-finite stop line".into(),
            });
        }
    }
    for (si, sign) in segment.signs.iter().enumerate() {
        if !sign.position.is_finite() {
            out.push(Violation {
                field: format!("signs[{si}].position"),
                index: None,
                message: "non-finite position".into(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn straight_segment(n: usize) -> Segment {
        Segment {
            id: "seg".into(),
            steps: (0..n)
                .map(|i| TimeStep {
                    index: (i + 1) as u32,
                    position: Point::new(i as f64, 0.0),
                    speed: 10.0,
                })
                .collect(),
            lights: vec![],
            signs: vec![],
        }
    }

    #[test]
    fn well_formed_segment_has_no_violations() {
        assert!(validate_segment(&straight_segment(91)).is_empty());
    }

    #[test]
    fn short_segment_reports_length_violation() {
        let v = validate_segment(&straight_segment(90));
        assert!(v.iter().any(|x| x.field == "steps" && x.index.is_none()));
    }

    #[test]
    fn state_code_nine_reported_with_step_index() {
        let mut seg = straight_segment(91);
        let mut states = vec![4u8; 91];
        states[17] = 9;
        seg.lights.push(TrafficLightTrack {
            stop_line: Point::new(50.0, 0.0),
            states,
        });
        // every code 0..=8 is accepted, 9 is not
        for code in 0..=8u8 {
            let mut ok = seg.clone();
            ok.lights[0].states[17] = code;
            assert!(validate_segment(&ok).is_empty(), "code {code} should be valid");
        }
        let v = validate_segment(&seg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "lights[0].states");
        assert_eq!(v[0].index, Some(17));
    }

    #[test]
    fn negative_speed_is_a_violation() {
        let mut seg = straight_segment(91);
        seg.steps[3].speed = -0.1;
        let v = validate_segment(&seg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, Some(3));
    }

    #[test]
    fn default_light_params_match_published_values() {
        let p = LightRuleParams::default();
        assert_eq!(p.l_move, 1.0);
        assert_eq!(p.d_pass, 0.1);
        assert_eq!(p.d_poly, 6);
        assert_eq!(p.p_extend, 0.2);
        assert_eq!(p.v_stop, 1.0);
        assert_eq!(p.l_begin, 1.0);
        assert_eq!(p.l_end, 1.0);
        assert_eq!(p.d_stop, 5.0);
        assert_eq!(p.l_extend, 2.0);
        assert_eq!(p.eta_left, 0.3);
        assert_eq!(p.eta_right, -0.3);
        assert_eq!(p.eta_through_1, 0.1);
        assert_eq!(p.eta_through_2, -0.1);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn default_sign_params_match_published_values() {
        let p = SignRuleParams::default();
        assert_eq!(p.r_stop, 5.0);
        assert_eq!(p.l_stop, 0.5);
        assert_eq!(p.v_stop, 0.5);
        assert_eq!(p.delta_t_stop, 1.0);
        assert_eq!(p.eta_left, 0.3);
        assert_eq!(p.eta_right, -0.3);
        assert_eq!(p.dbscan_eps, 28.0);
        assert_eq!(p.dbscan_min_pts, 2);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn domain_types_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Segment>();
        assert_send_sync::<TrajectoryRecord>();
        assert_send_sync::<LightRuleParams>();
        assert_send_sync::<SignRuleParams>();
        assert_send_sync::<InteractionCategory>();
    }

    #[test]
    fn eta_ordering_violation_is_rejected() {
        let p = LightRuleParams {
            eta_left: 0.1,
            eta_through_1: 0.3,
            ..LightRuleParams::default()
        };
        assert!(p.validate().is_err());
    }
}
