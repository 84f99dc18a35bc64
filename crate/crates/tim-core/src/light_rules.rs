//! Rules R1.1-R1.9: classify a segment as a stop, left turn, right turn, or
//! straight pass at a traffic light, or reject it.
//!
//! The stop branch is evaluated before the pass branch and short-circuits, so
//! no segment is ever assigned both. Candidate lights are tried in ascending
//! order of initial distance to the AV; the first one yielding a category
//! wins.

use crate::geometry::{
    classify_eta, distance_dip_index, fit_and_extend, passes_point, sign_flip_index, turn_measure,
    FittedPath, TurnDirection, TurnMeasure, TurnThresholds,
};
use crate::model::{InteractionCategory, LightRuleParams, Point, Segment, TrafficLightTrack};

#[derive(Debug, Clone, PartialEq)]
pub struct LightClassification {
    /// One of the four light categories, or None.
    pub category: InteractionCategory,
    /// The light that influenced the AV; present iff a category was assigned.
    pub influencing_light: Option<TrafficLightTrack>,
    /// Turn measure of the pass branch; absent for stops and rejections.
    pub eta: Option<TurnMeasure>,
}

impl LightClassification {
    fn none() -> Self {
        Self {
            category: InteractionCategory::None,
            influencing_light: None,
            eta: None,
        }
    }
}

/// R1.1: the segment must include at least one traffic light.
pub fn r1_1_has_light(segment: &Segment) -> bool {
    !segment.lights.is_empty()
}

/// R1.2: cumulative time above the stop-speed threshold must reach `l_move`
/// seconds (10 samples per second).
pub fn r1_2_is_moving(speeds: &[f64], v_stop: f64, l_move: f64) -> bool {
    let moving = speeds.iter().filter(|&&v| v > v_stop).count();
    moving as f64 >= 10.0 * l_move
}

/// R1.3: the fitted trajectory, or its forward extension, passes through the
/// stop line. A degenerate fit (stationary segment) never passes.
pub fn r1_3_trajectory_crosses(segment: &Segment, light: &TrafficLightTrack, params: &LightRuleParams) -> bool {
    match fit_and_extend(&segment.positions(), params.d_poly, params.p_extend) {
        Ok(path) => passes_point(&path, light.stop_line, params.d_pass),
        Err(_) => false,
    }
}

fn window_samples(seconds: f64) -> usize {
    (10.0 * seconds).round() as usize
}

/// R1.4-R1.6: significant speed over the first `l_begin` seconds, a stop over
/// the last `l_end` seconds, and a final position within `d_stop` of the stop
/// line (front of the queue).
pub fn classify_stop_branch(segment: &Segment, light: &TrafficLightTrack, params: &LightRuleParams) -> bool {
    let speeds = segment.speeds();
    let n = speeds.len();
    let n_begin = window_samples(params.l_begin).min(n);
    let n_end = window_samples(params.l_end).min(n);
    let begins_fast = speeds[..n_begin].iter().all(|&v| v > params.v_stop);
    let ends_stopped = speeds[n - n_end..].iter().all(|&v| v < params.v_stop);
    let near_line = segment.last_position().distance(light.stop_line) < params.d_stop;
    begins_fast && ends_stopped && near_line
}

/// R1.7-R1.9: detect the stop-line crossing (sign flip or distance dip),
/// require `l_extend` seconds of travel beyond it, and classify the turn by
/// the unit-vector cross product. Returns the category and the turn measure,
/// or `None` when any rule fails or eta falls in an indeterminate gap.
pub fn classify_pass_branch(
    segment: &Segment,
    light: &TrafficLightTrack,
    params: &LightRuleParams,
) -> Option<(InteractionCategory, TurnMeasure)> {
    let positions = segment.positions();
    let crossing = match (
        sign_flip_index(&positions, light.stop_line),
        distance_dip_index(&positions, light.stop_line),
    ) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return None,
    };
    let remaining = positions.len() - crossing;
    if remaining as f64 <= 10.0 * params.l_extend {
        return None;
    }
    let measure = turn_measure(
        segment.first_position(),
        light.stop_line,
        segment.last_position(),
    )
    .ok()?;
    let category = match classify_eta(measure.eta, &TurnThresholds::light(params)) {
        TurnDirection::Left => InteractionCategory::LightLeftTurn,
        TurnDirection::Right => InteractionCategory::LightRightTurn,
        TurnDirection::Straight => InteractionCategory::LightStraight,
        TurnDirection::Indeterminate => return None,
    };
    Some((category, measure))
}

/// Runs the full rule chain over every light, nearest-to-start first.
pub fn classify_light_interaction(segment: &Segment, params: &LightRuleParams) -> LightClassification {
    if !r1_1_has_light(segment) {
        return LightClassification::none();
    }
    if !r1_2_is_moving(&segment.speeds(), params.v_stop, params.l_move) {
        return LightClassification::none();
    }
    let path: Option<FittedPath> =
        fit_and_extend(&segment.positions(), params.d_poly, params.p_extend).ok();

    let start: Point = segment.first_position();
    let mut candidates: Vec<&TrafficLightTrack> = segment.lights.iter().collect();
    candidates.sort_by(|a, b| {
        start
            .distance(a.stop_line)
            .total_cmp(&start.distance(b.stop_line))
    });

    for light in candidates {
        let crosses = match &path {
            Some(p) => passes_point(p, light.stop_line, params.d_pass),
            None => false,
        };
        if !crosses {
            continue;
        }
        if classify_stop_branch(segment, light, params) {
            return LightClassification {
                category: InteractionCategory::LightStop,
                influencing_light: Some(light.clone()),
                eta: None,
            };
        }
        if let Some((category, eta)) = classify_pass_branch(segment, light, params) {
            return LightClassification {
                category,
                influencing_light: Some(light.clone()),
                eta: Some(eta),
            };
        }
    }
    LightClassification::none()
}
