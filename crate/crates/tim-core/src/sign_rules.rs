//! Rules R2.1-R2.7: classify a segment as a four-way stop, right turn,
//! one-step left turn, or two-step left turn at a stop sign, or reject it.
//!
//! All rules are anchored to the initial nearest stop sign: the sign closest
//! to the AV's first position. The four-way test runs before the turn tests
//! and wins when both would fire.

use crate::clustering::dbscan;
use crate::geometry::{classify_eta, convex_quadrilateral, turn_measure, TurnDirection, TurnMeasure, TurnThresholds};
use crate::model::{InteractionCategory, Point, Segment, SignRuleParams, StopSign, StopAreaMode};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignRuleError {
    #[error("segment has no stop signs")]
    NoSigns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignClassification {
    /// One of the four sign categories, or None.
    pub category: InteractionCategory,
    /// The initial nearest sign; present iff a category was assigned.
    pub initial_nearest_sign: Option<StopSign>,
    /// Turn measure; absent for four-way stops and rejections.
    pub eta_sign: Option<TurnMeasure>,
    /// Center of the circular stop area established by R2.3.
    pub stop_area_center: Option<Point>,
}

impl SignClassification {
    fn none() -> Self {
        Self {
            category: InteractionCategory::None,
            initial_nearest_sign: None,
            eta_sign: None,
            stop_area_center: None,
        }
    }
}

/// Index of the sign closest to the AV's initial position; ties break by
/// input order.
pub fn initial_nearest_sign_index(segment: &Segment) -> Result<usize, SignRuleError> {
    if segment.signs.is_empty() {
        return Err(SignRuleError::NoSigns);
    }
    let start = segment.first_position();
    let mut best = 0usize;
    for (i, sign) in segment.signs.iter().enumerate().skip(1) {
        if start.distance(sign.position) < start.distance(segment.signs[best].position) {
            best = i;
        }
    }
    Ok(best)
}

/// The sign closest to the AV's initial position (R2.1 anchor).
pub fn initial_nearest_sign(segment: &Segment) -> Result<StopSign, SignRuleError> {
    Ok(segment.signs[initial_nearest_sign_index(segment)?])
}

/// R2.2: some pair of timesteps i < j shows both the distance to the sign and
/// the speed decreasing.
pub fn r2_2_decelerates(segment: &Segment, sign: StopSign) -> bool {
    let positions = segment.positions();
    let speeds = segment.speeds();
    let dists: Vec<f64> = positions.iter().map(|p| p.distance(sign.position)).collect();
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            if dists[i] > dists[j] && speeds[i] > speeds[j] {
                return true;
            }
        }
    }
    false
}

/// R2.3: the AV dwells below the stop speed inside the circular stop area for
/// at least `l_stop` seconds. Returns the verdict and the area center.
///
/// The center is the trajectory point nearest to the sign by default; the
/// printed-equation variant that centers the area on the sign itself is
/// available through [`StopAreaMode::SignCentered`].
pub fn r2_3_stops(segment: &Segment, sign: StopSign, params: &SignRuleParams) -> (bool, Point) {
    let positions = segment.positions();
    let center = match params.stop_area_mode {
        StopAreaMode::NearestPoint => positions
            .iter()
            .copied()
            .min_by(|a, b| {
                a.distance(sign.position)
                    .total_cmp(&b.distance(sign.position))
            })
            .expect("segment has samples"),
        StopAreaMode::SignCentered => sign.position,
    };
    let speeds = segment.speeds();
    let dwell = positions
        .iter()
        .zip(&speeds)
        .filter(|(p, &v)| v < params.v_stop && p.distance(center) < params.r_stop)
        .count();
    (dwell as f64 >= 10.0 * params.l_stop, center)
}

/// R2.4 + R2.5: the cluster of signs around the initial nearest sign must be
/// exactly four signs forming a convex quadrilateral. With more than four
/// signs in the segment, DBSCAN isolates the intersection; an over-full
/// cluster gets one clustering retry before being discarded.
pub fn detect_four_way(segment: &Segment, params: &SignRuleParams) -> bool {
    let Ok(mu) = initial_nearest_sign_index(segment) else {
        return false;
    };
    let positions: Vec<Point> = segment.signs.iter().map(|s| s.position).collect();
    match positions.len() {
        0..=3 => false,
        4 => convex_quadrilateral(&[positions[0], positions[1], positions[2], positions[3]]),
        _ => {
            let assignment = dbscan(&positions, params.dbscan_eps, params.dbscan_min_pts);
            let Some(cluster) = assignment.cluster_of(mu) else {
                return false;
            };
            let members = assignment.members(cluster);
            cluster_is_four_way(&positions, &members, mu, params, true)
        }
    }
}

fn cluster_is_four_way(
    positions: &[Point],
    members: &[usize],
    mu: usize,
    params: &SignRuleParams,
    allow_recursion: bool,
) -> bool {
    match members.len() {
        0..=3 => false,
        4 => {
            let quad = [
                positions[members[0]],
                positions[members[1]],
                positions[members[2]],
                positions[members[3]],
            ];
            convex_quadrilateral(&quad)
        }
        _ if allow_recursion => {
            let sub_positions: Vec<Point> = members.iter().map(|&i| positions[i]).collect();
            let assignment = dbscan(&sub_positions, params.dbscan_eps, params.dbscan_min_pts);
            let mu_local = members.iter().position(|&i| i == mu).expect("mu is a member");
            let Some(cluster) = assignment.cluster_of(mu_local) else {
                return false;
            };
            let sub_members: Vec<usize> = assignment
                .members(cluster)
                .into_iter()
                .map(|i| members[i])
                .collect();
            cluster_is_four_way(positions, &sub_members, mu, params, false)
        }
        _ => false,
    }
}

/// R2.6: turn direction about the initial nearest sign. A zero-length vector
/// (start or end coincides with the sign) is indeterminate.
pub fn classify_turn(segment: &Segment, sign: StopSign, params: &SignRuleParams) -> (TurnDirection, Option<TurnMeasure>) {
    match turn_measure(segment.first_position(), sign.position, segment.last_position()) {
        Ok(m) => (classify_eta(m.eta, &TurnThresholds::sign(params)), Some(m)),
        Err(_) => (TurnDirection::Indeterminate, None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftSteps {
    OneStep,
    TwoStep,
}

/// R2.7: a two-step left turn stops twice, so the speed profile must contain
/// two sub-threshold runs separated by more than `delta_t_stop` seconds
/// (measured from the end of one run to the start of the next).
pub fn classify_left_steps(speeds: &[f64], params: &SignRuleParams) -> LeftSteps {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &v) in speeds.iter().enumerate() {
        if v < params.v_stop {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            runs.push((s, i - 1));
        }
    }
    if let Some(s) = start {
        runs.push((s, speeds.len() - 1));
    }
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            let gap = runs[b].0 - runs[a].1;
            if gap as f64 > 10.0 * params.delta_t_stop {
                return LeftSteps::TwoStep;
            }
        }
    }
    LeftSteps::OneStep
}

/// Runs the full rule chain R2.1 -> R2.3 gate, then the four-way test, then
/// the turn split.
pub fn classify_sign_interaction(segment: &Segment, params: &SignRuleParams) -> SignClassification {
    let Ok(sign) = initial_nearest_sign(segment) else {
        return SignClassification::none();
    };
    if !r2_2_decelerates(segment, sign) {
        return SignClassification::none();
    }
    let (stopped, center) = r2_3_stops(segment, sign, params);
    if !stopped {
        return SignClassification::none();
    }
    if detect_four_way(segment, params) {
        return SignClassification {
            category: InteractionCategory::SignFourWay,
            initial_nearest_sign: Some(sign),
            eta_sign: None,
            stop_area_center: Some(center),
        };
    }
    let (direction, eta) = classify_turn(segment, sign, params);
    let category = match direction {
        TurnDirection::Left => match classify_left_steps(&segment.speeds(), params) {
            LeftSteps::OneStep => InteractionCategory::SignLeftOneStep,
            LeftSteps::TwoStep => InteractionCategory::SignLeftTwoStep,
        },
        TurnDirection::Right => InteractionCategory::SignRightTurn,
        TurnDirection::Straight | TurnDirection::Indeterminate => {
            return SignClassification::none();
        }
    };
    SignClassification {
        category,
        initial_nearest_sign: Some(sign),
        eta_sign: eta,
        stop_area_center: Some(center),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TimeStep, DT};

    fn params() -> SignRuleParams {
        SignRuleParams::default()
    }

    fn sign(x: f64, y: f64) -> StopSign {
        StopSign {
            position: Point::new(x, y),
        }
    }

    /// Position along a north approach with a quarter-arc turn at the origin:
    /// `sgn` -1 turns left (exit west), +1 turns right (exit east), 0 goes
    /// straight through.
    fn turn_path(s: f64, approach: f64, radius: f64, sgn: f64) -> Point {
        if sgn == 0.0 || s <= approach {
            return Point::new(0.0, s - approach);
        }
        let arc_len = std::f64::consts::FRAC_PI_2 * radius;
        if s <= approach + arc_len {
            let phi = (s - approach) / radius;
            Point::new(sgn * radius * (1.0 - phi.cos()), radius * phi.sin())
        } else {
            let tail = s - approach - arc_len;
            Point::new(sgn * (radius + tail), radius)
        }
    }

    /// Builds a segment by integrating a speed profile along `turn_path`.
    fn segment_on_path(
        speeds: &[f64],
        approach: f64,
        radius: f64,
        sgn: f64,
        signs: Vec<StopSign>,
    ) -> Segment {
        let mut s = 0.0;
        let steps = speeds
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i > 0 {
                    s += v * DT;
                }
                TimeStep {
                    index: (i + 1) as u32,
                    position: turn_path(s, approach, radius, sgn),
                    speed: v,
                }
            })
            .collect();
        Segment {
            id: "sign-test".into(),
            steps,
            lights: vec![],
            signs,
        }
    }

    /// Speed profile with dwell windows: cruise, smooth stop over
    /// `[t0, t0+ramp]`, dwell until `t1`, smooth resume over `ramp`.
    fn profile_with_stops(v0: f64, stops: &[(f64, f64)]) -> Vec<f64> {
        let ramp = 1.0;
        (0..91)
            .map(|i| {
                let t = i as f64 * DT;
                let mut v = v0;
                for &(t0, t1) in stops {
                    if t >= t0 - ramp && t < t0 {
                        let tau = (t0 - t) / ramp;
                        v = v.min(v0 * (3.0 * tau * tau - 2.0 * tau * tau * tau));
                    } else if t >= t0 && t <= t1 {
                        v = 0.0;
                    } else if t > t1 && t < t1 + ramp {
                        let tau = (t - t1) / ramp;
                        v = v.min(v0 * (3.0 * tau * tau - 2.0 * tau * tau * tau));
                    }
                }
                v
            })
            .collect()
    }

    #[test]
    fn nearest_sign_selection_and_ties() {
        let mut seg = segment_on_path(&vec![5.0; 91], 30.0, 10.0, 0.0, vec![]);
        // P_1 = (0, -30)
        seg.signs = vec![sign(0.0, 10.0), sign(0.0, -18.0)]; // 40 m vs 12 m
        assert_eq!(initial_nearest_sign(&seg).unwrap(), sign(0.0, -18.0));

        seg.signs = vec![sign(5.0, -30.0)];
        assert_eq!(initial_nearest_sign(&seg).unwrap(), sign(5.0, -30.0));

        // equidistant: first in input order wins
        seg.signs = vec![sign(5.0, -30.0), sign(-5.0, -30.0)];
        assert_eq!(initial_nearest_sign(&seg).unwrap(), sign(5.0, -30.0));

        seg.signs = vec![];
        assert_eq!(initial_nearest_sign(&seg).unwrap_err(), SignRuleError::NoSigns);
    }

    #[test]
    fn deceleration_detection() {
        // monotone approach 8 -> 0 toward a sign ahead
        let speeds = profile_with_stops(8.0, &[(4.0, 9.1)]);
        let seg = segment_on_path(&speeds, 40.0, 10.0, 0.0, vec![sign(0.0, 0.0)]);
        assert!(r2_2_decelerates(&seg, seg.signs[0]));

        // constant position, constant speed: nothing decreases
        let still = Segment {
            id: "still".into(),
            steps: (0..91)
                .map(|i| TimeStep {
                    index: (i + 1) as u32,
                    position: Point::new(1.0, 1.0),
                    speed: 0.0,
                })
                .collect(),
            lights: vec![],
            signs: vec![sign(10.0, 0.0)],
        };
        assert!(!r2_2_decelerates(&still, still.signs[0]));

        // speed strictly increasing while the distance decreases
        let mut s = 0.0;
        let accel: Vec<TimeStep> = (0..91)
            .map(|i| {
                let v = 1.0 + 0.1 * i as f64;
                if i > 0 {
                    s += v * DT;
                }
                TimeStep {
                    index: (i + 1) as u32,
                    position: Point::new(0.0, s - 100.0),
                    speed: v,
                }
            })
            .collect();
        let seg = Segment {
            id: "accel".into(),
            steps: accel,
            lights: vec![],
            signs: vec![sign(0.0, 0.0)],
        };
        assert!(!r2_2_decelerates(&seg, seg.signs[0]));
    }

    #[test]
    fn stop_detection_counts_dwell_samples() {
        let p = params();
        // dwell 0.8 s at v = 0.2, with the dwell sitting next to the sign's
        // closest-approach point
        let speeds: Vec<f64> = (0..91)
            .map(|i| {
                let t = i as f64 * DT;
                if (3.0..3.8).contains(&t) {
                    0.2
                } else {
                    2.0
                }
            })
            .collect();
        let seg = segment_on_path(&speeds, 6.5, 10.0, 0.0, vec![sign(1.0, 0.0)]);
        let (ok, center) = r2_3_stops(&seg, seg.signs[0], &p);
        assert!(ok);
        assert!(center.distance(Point::new(0.0, 0.0)) < 0.5);

        // rolling stop: never below 0.5 m/s
        let rolling: Vec<f64> = speeds.iter().map(|&v| v.max(0.6)).collect();
        let seg2 = segment_on_path(&rolling, 6.5, 10.0, 0.0, vec![sign(1.0, 0.0)]);
        assert!(!r2_3_stops(&seg2, seg2.signs[0], &p).0);

        // 0.4 s dwell: 4 < 5 samples
        let short: Vec<f64> = (0..91)
            .map(|i| {
                let t = i as f64 * DT;
                if (3.0..3.4).contains(&t) {
                    0.2
                } else {
                    2.0
                }
            })
            .collect();
        let seg3 = segment_on_path(&short, 6.5, 10.0, 0.0, vec![sign(1.0, 0.0)]);
        assert!(!r2_3_stops(&seg3, seg3.signs[0], &p).0);
    }

    #[test]
    fn sign_centered_mode_measures_from_the_sign() {
        // dwell 6 m from the sign: inside no area of radius 5 centered on the
        // sign, but the nearest-point center is the dwell itself
        let speeds = profile_with_stops(6.0, &[(4.0, 9.1)]);
        let seg = segment_on_path(&speeds, 18.6, 10.0, 0.0, vec![sign(6.0, 0.6)]);
        let near = params();
        assert!(r2_3_stops(&seg, seg.signs[0], &near).0);
        let eq9 = SignRuleParams {
            stop_area_mode: StopAreaMode::SignCentered,
            ..params()
        };
        assert!(!r2_3_stops(&seg, seg.signs[0], &eq9).0);
    }

    fn square_signs(cx: f64, cy: f64, half: f64) -> Vec<StopSign> {
        vec![
            sign(cx - half, cy - half),
            sign(cx + half, cy - half),
            sign(cx + half, cy + half),
            sign(cx - half, cy + half),
        ]
    }

    #[test]
    fn four_signs_on_a_square_form_a_four_way() {
        let speeds = profile_with_stops(8.0, &[(3.0, 4.0)]);
        let seg = segment_on_path(&speeds, 30.0, 10.0, 0.0, square_signs(0.0, 0.0, 12.5));
        assert!(detect_four_way(&seg, &params()));
    }

    #[test]
    fn three_signs_are_never_a_four_way() {
        let speeds = profile_with_stops(8.0, &[(3.0, 4.0)]);
        let mut signs = square_signs(0.0, 0.0, 12.5);
        signs.pop();
        let seg = segment_on_path(&speeds, 30.0, 10.0, 0.0, signs);
        assert!(!detect_four_way(&seg, &params()));
    }

    #[test]
    fn two_distant_squares_are_separated_by_clustering() {
        let speeds = profile_with_stops(8.0, &[(3.0, 4.0)]);
        let mut signs = square_signs(0.0, 0.0, 12.5);
        signs.extend(square_signs(200.0, 0.0, 12.5));
        let seg = segment_on_path(&speeds, 30.0, 10.0, 0.0, signs);
        assert!(detect_four_way(&seg, &params()));
    }

    #[test]
    fn four_way_is_invariant_under_sign_order() {
        let speeds = profile_with_stops(8.0, &[(3.0, 4.0)]);
        let mut signs = square_signs(0.0, 0.0, 12.5);
        signs.extend(square_signs(200.0, 0.0, 12.5));
        let orders: Vec<Vec<usize>> = vec![
            (0..8).collect(),
            (0..8).rev().collect(),
            vec![3, 7, 1, 5, 0, 4, 2, 6],
        ];
        let mut verdicts = Vec::new();
        for order in orders {
            let permuted: Vec<StopSign> = order.iter().map(|&i| signs[i]).collect();
            let seg = segment_on_path(&speeds, 30.0, 10.0, 0.0, permuted);
            verdicts.push(detect_four_way(&seg, &params()));
        }
        assert!(verdicts.iter().all(|&v| v));
    }

    #[test]
    fn dart_cluster_is_rejected() {
        let speeds = profile_with_stops(8.0, &[(3.0, 4.0)]);
        let signs = vec![
            sign(0.0, -12.0),
            sign(20.0, -12.0),
            sign(20.0, 8.0),
            sign(10.0, -7.0), // inside the triangle of the others
        ];
        let seg = segment_on_path(&speeds, 30.0, 10.0, 0.0, signs);
        assert!(!detect_four_way(&seg, &params()));
    }

    #[test]
    fn turn_classification_about_the_sign() {
        let p = params();
        // right turn: perpendicular entry/exit around a sign on the axis
        let speeds = profile_with_stops(7.0, &[(3.5, 4.2)]);
        let right = segment_on_path(&speeds, 26.0, 8.0, 1.0, vec![sign(0.0, -2.0)]);
        let (dir, eta) = classify_turn(&right, right.signs[0], &p);
        assert_eq!(dir, TurnDirection::Right);
        assert!(eta.unwrap().eta < -0.3);

        let left = segment_on_path(&speeds, 26.0, 8.0, -1.0, vec![sign(0.0, -2.0)]);
        let (dir, eta) = classify_turn(&left, left.signs[0], &p);
        assert_eq!(dir, TurnDirection::Left);
        assert!(eta.unwrap().eta > 0.3);

        let straight = segment_on_path(&speeds, 26.0, 8.0, 0.0, vec![sign(0.0, -2.0)]);
        let (dir, _) = classify_turn(&straight, straight.signs[0], &p);
        assert_eq!(dir, TurnDirection::Indeterminate);
    }

    #[test]
    fn left_step_counting() {
        let p = params();
        // stops over [1.0, 1.6] and [5.0, 5.8]: gap 3.4 s
        let two = profile_with_stops(6.0, &[(1.0, 1.6), (5.0, 5.8)]);
        assert_eq!(classify_left_steps(&two, &p), LeftSteps::TwoStep);

        let one = profile_with_stops(6.0, &[(3.0, 4.0)]);
        assert_eq!(classify_left_steps(&one, &p), LeftSteps::OneStep);

        // two dips 0.5 s apart: gap 5 samples, needs more than 10
        let mut close = vec![2.0; 91];
        for i in 20..=22 {
            close[i] = 0.2;
        }
        for i in 27..=29 {
            close[i] = 0.2;
        }
        assert_eq!(classify_left_steps(&close, &p), LeftSteps::OneStep);

        // no sub-threshold run at all
        assert_eq!(classify_left_steps(&vec![3.0; 91], &p), LeftSteps::OneStep);
    }

    #[test]
    fn full_chain_four_way() {
        // dwell at distance 20 (cruise 16 m + ramp 4 m), so the near corner
        // at y = -2.5 sits 1.5 m beyond the dwell
        let speeds = profile_with_stops(8.0, &[(3.0, 4.0)]);
        let seg = segment_on_path(&speeds, 24.0, 10.0, 0.0, square_signs(12.5, 10.0, 12.5));
        let c = classify_sign_interaction(&seg, &params());
        assert_eq!(c.category, InteractionCategory::SignFourWay);
        assert!(c.initial_nearest_sign.is_some());
        assert!(c.stop_area_center.is_some());
    }

    #[test]
    fn four_way_wins_over_a_turn() {
        // left-turning trajectory inside a four-way square still reports the
        // four-way category (branch precedence)
        let speeds = profile_with_stops(8.0, &[(3.0, 4.0)]);
        let seg = segment_on_path(&speeds, 28.0, 10.0, -1.0, square_signs(0.0, 5.0, 12.5));
        let c = classify_sign_interaction(&seg, &params());
        assert_eq!(c.category, InteractionCategory::SignFourWay);
    }

    #[test]
    fn full_chain_right_turn() {
        let speeds = profile_with_stops(7.0, &[(3.5, 4.2)]);
        let seg = segment_on_path(&speeds, 26.0, 8.0, 1.0, vec![sign(1.5, -2.5)]);
        let c = classify_sign_interaction(&seg, &params());
        assert_eq!(c.category, InteractionCategory::SignRightTurn);
    }

    #[test]
    fn full_chain_one_step_left() {
        let speeds = profile_with_stops(7.0, &[(3.5, 4.2)]);
        let seg = segment_on_path(&speeds, 26.0, 8.0, -1.0, vec![sign(-1.5, -2.5)]);
        let c = classify_sign_interaction(&seg, &params());
        assert_eq!(c.category, InteractionCategory::SignLeftOneStep);
    }

    #[test]
    fn full_chain_two_step_left() {
        let speeds = profile_with_stops(7.0, &[(2.5, 3.3), (5.5, 6.3)]);
        let seg = segment_on_path(&speeds, 14.0, 8.0, -1.0, vec![sign(-1.5, -2.5)]);
        let c = classify_sign_interaction(&seg, &params());
        assert_eq!(c.category, InteractionCategory::SignLeftTwoStep);
    }

    #[test]
    fn no_signs_is_rejected() {
        let seg = segment_on_path(&vec![8.0; 91], 30.0, 10.0, 0.0, vec![]);
        let c = classify_sign_interaction(&seg, &params());
        assert_eq!(c.category, InteractionCategory::None);
        assert!(c.initial_nearest_sign.is_none());
    }

    #[test]
    fn all_moving_speeds_never_report_two_step() {
        let p = params();
        let speeds: Vec<f64> = (0..91).map(|i| 0.5 + 0.01 * i as f64).collect();
        assert_eq!(classify_left_steps(&speeds, &p), LeftSteps::OneStep);
    }
}
