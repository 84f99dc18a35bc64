//! Combined segment classification and trajectory organization: every segment
//! gets exactly one category (light rules first, then sign rules), and
//! classified segments are turned into per-timestep records with derived
//! acceleration and distance columns.

use crate::light_rules::{classify_light_interaction, LightClassification};
use crate::model::{
    InteractionCategory, LightRuleParams, Point, Segment, SignRuleParams, StopSign,
    TrafficLightTrack, TrajectoryRecord, TrajectoryRow, DT,
};
use crate::sign_rules::{classify_sign_interaction, initial_nearest_sign, SignClassification};
use crate::signal::{differentiate, Series};

/// The single-category outcome for a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentClassification {
    pub category: InteractionCategory,
    pub influencing_light: Option<TrafficLightTrack>,
    pub initial_nearest_sign: Option<StopSign>,
    pub eta: Option<f64>,
    pub stop_area_center: Option<Point>,
}

/// Runs both rule engines; the light chain is evaluated first and wins when
/// both would classify.
pub fn classify_segment(
    segment: &Segment,
    light_params: &LightRuleParams,
    sign_params: &SignRuleParams,
) -> SegmentClassification {
    let light: LightClassification = classify_light_interaction(segment, light_params);
    if light.category != InteractionCategory::None {
        return SegmentClassification {
            category: light.category,
            influencing_light: light.influencing_light,
            initial_nearest_sign: None,
            eta: light.eta.map(|m| m.eta),
            stop_area_center: None,
        };
    }
    let sign: SignClassification = classify_sign_interaction(segment, sign_params);
    SegmentClassification {
        category: sign.category,
        influencing_light: None,
        initial_nearest_sign: sign.initial_nearest_sign,
        eta: sign.eta_sign.map(|m| m.eta),
        stop_area_center: sign.stop_area_center,
    }
}

/// Builds the organized record for a segment: acceleration differentiated
/// from speed, light state and stop-line distance from the influencing light,
/// and the distance to the initial nearest sign whenever any sign exists.
pub fn organize_record(segment: &Segment, classification: &SegmentClassification) -> TrajectoryRecord {
    let speeds = Series::new(segment.speeds(), DT);
    let accel = differentiate(&speeds).expect("segments have 91 samples");
    let light = classification.influencing_light.as_ref();
    // the distance column is anchored to the initial nearest sign as a data
    // field, independent of which rule chain classified the segment
    let sign = initial_nearest_sign(segment).ok();

    let rows = segment
        .steps
        .iter()
        .zip(accel.values)
        .map(|(step, a)| TrajectoryRow {
            index: step.index,
            position: step.position,
            speed: step.speed,
            accel: a,
            light_state: light.map(|l| l.states[(step.index - 1) as usize]),
            dist_to_stop_line: light.map(|l| step.position.distance(l.stop_line)),
            dist_to_sign: sign.map(|s| step.position.distance(s.position)),
        })
        .collect();

    TrajectoryRecord {
        segment_id: segment.id.clone(),
        category: classification.category,
        light_position: light.map(|l| l.stop_line),
        sign_position: sign.map(|s| s.position),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TimeStep;
    use crate::signal::Series;

    fn segment(lights: Vec<TrafficLightTrack>, signs: Vec<StopSign>) -> Segment {
        let mut x = -40.0;
        let steps = (0..91)
            .map(|i| {
                if i > 0 {
                    x += 10.0 * DT;
                }
                TimeStep {
                    index: (i + 1) as u32,
                    position: Point::new(x, 0.0),
                    speed: 10.0,
                }
            })
            .collect();
        Segment {
            id: "org".into(),
            steps,
            lights,
            signs,
        }
    }

    #[test]
    fn organized_record_has_derived_accel_and_distances() {
        let light = TrafficLightTrack {
            stop_line: Point::new(0.0, 0.0),
            states: vec![6; 91],
        };
        let seg = segment(vec![light], vec![]);
        let c = classify_segment(&seg, &LightRuleParams::default(), &SignRuleParams::default());
        assert_eq!(c.category, InteractionCategory::LightStraight);
        let rec = organize_record(&seg, &c);
        assert_eq!(rec.rows.len(), 91);
        // re-derivation reproduces the stored acceleration exactly
        let rederived = differentiate(&Series::new(rec.speeds(), DT)).unwrap();
        assert_eq!(rec.accels(), rederived.values);
        for row in &rec.rows {
            assert_eq!(row.light_state, Some(6));
            assert!(row.dist_to_stop_line.unwrap() >= 0.0);
            assert_eq!(row.dist_to_sign, None);
        }
    }

    #[test]
    fn missing_context_stays_null_not_zero() {
        let seg = segment(vec![], vec![]);
        let c = classify_segment(&seg, &LightRuleParams::default(), &SignRuleParams::default());
        assert_eq!(c.category, InteractionCategory::None);
        let rec = organize_record(&seg, &c);
        assert!(rec.light_position.is_none());
        assert!(rec.sign_position.is_none());
        assert!(rec.rows.iter().all(|r| r.light_state.is_none()
            && r.dist_to_stop_line.is_none()
            && r.dist_to_sign.is_none()));
    }

    #[test]
    fn sign_distance_is_recorded_even_for_light_categories() {
        let light = TrafficLightTrack {
            stop_line: Point::new(0.0, 0.0),
            states: vec![4; 91],
        };
        let sign = StopSign {
            position: Point::new(5.0, 8.0),
        };
        let seg = segment(vec![light], vec![sign]);
        let c = classify_segment(&seg, &LightRuleParams::default(), &SignRuleParams::default());
        assert_eq!(c.category, InteractionCategory::LightStraight);
        let rec = organize_record(&seg, &c);
        assert_eq!(rec.sign_position, Some(sign.position));
        assert!(rec.rows.iter().all(|r| r.dist_to_sign.is_some()));
    }
}
