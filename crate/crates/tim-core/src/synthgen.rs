//! Labeled synthetic segments for every interaction category (and negatives).
//!
//! Scenes are built from constant-jerk speed profiles integrated along an
//! approach-arc-exit path, so positions and speeds are kinematically
//! consistent. Noiseless scenes satisfy their category's rule chain at the
//! published default thresholds; Gaussian noise is added afterwards.

use crate::model::{
    InteractionCategory, Point, Segment, StopSign, TimeStep, TrafficLightTrack, DT, SEGMENT_LEN,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible scenario: {0}")]
    InfeasibleSpec(String),
}

/// Everything needed to generate one labeled scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub category: InteractionCategory,
    /// Cruise speed on the approach, m/s.
    pub approach_speed: f64,
    /// Characteristic intersection size (four-way square side / twice the
    /// turn radius), m.
    pub intersection_scale: f64,
    /// Gaussian noise on speeds, m/s.
    pub noise_sigma_speed: f64,
    /// Gaussian noise on positions, m.
    pub noise_sigma_pos: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Noiseless scene at the given speed / scale.
    pub fn clean(category: InteractionCategory, approach_speed: f64, intersection_scale: f64, seed: u64) -> Self {
        Self {
            category,
            approach_speed,
            intersection_scale,
            noise_sigma_speed: 0.0,
            noise_sigma_pos: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.approach_speed.is_finite() && self.approach_speed >= 2.0) {
            return Err(SynthError::InfeasibleSpec(format!(
                "approach_speed must be >= 2 m/s to clear the movement gates, got {}",
                self.approach_speed
            )));
        }
        if !(8.0..=60.0).contains(&self.intersection_scale) {
            return Err(SynthError::InfeasibleSpec(format!(
                "intersection_scale must be within [8, 60] m, got {}",
                self.intersection_scale
            )));
        }
        if self.noise_sigma_speed < 0.0 || self.noise_sigma_pos < 0.0 {
            return Err(SynthError::InfeasibleSpec("noise sigmas must be >= 0".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// constant-jerk speed profiles
// ---------------------------------------------------------------------------

/// One profile phase: hold the current speed or ramp to a target with a
/// constant-jerk S-curve.
#[derive(Debug, Clone, Copy)]
enum Phase {
    Cruise { duration: f64 },
    RampTo { duration: f64, target: f64 },
}

#[derive(Debug, Clone)]
struct SpeedProfile {
    start_speed: f64,
    phases: Vec<Phase>,
}

impl SpeedProfile {
    fn speed_at(&self, t: f64) -> f64 {
        let mut v = self.start_speed;
        let mut t0 = 0.0;
        for phase in &self.phases {
            match *phase {
                Phase::Cruise { duration } => {
                    if t < t0 + duration {
                        return v;
                    }
                    t0 += duration;
                }
                Phase::RampTo { duration, target } => {
                    if t < t0 + duration {
                        let tau = t - t0;
                        let half = duration / 2.0;
                        let jerk = (target - v) / (half * half);
                        return if tau <= half {
                            v + 0.5 * jerk * tau * tau
                        } else {
                            target - 0.5 * jerk * (duration - tau) * (duration - tau)
                        };
                    }
                    t0 += duration;
                    v = target;
                }
            }
        }
        v
    }

    /// Speeds at the 91 sample times plus cumulative distance via fine
    /// trapezoidal integration.
    fn sample(&self) -> (Vec<f64>, Vec<f64>) {
        const SUBSTEPS: usize = 20;
        let h = DT / SUBSTEPS as f64;
        let mut speeds = Vec::with_capacity(SEGMENT_LEN);
        let mut dists = Vec::with_capacity(SEGMENT_LEN);
        let mut s = 0.0;
        let mut prev_v = self.speed_at(0.0);
        speeds.push(prev_v);
        dists.push(0.0);
        for i in 1..SEGMENT_LEN {
            let t_start = (i - 1) as f64 * DT;
            for k in 1..=SUBSTEPS {
                let v = self.speed_at(t_start + k as f64 * h);
                s += 0.5 * (prev_v + v) * h;
                prev_v = v;
            }
            speeds.push(prev_v);
            dists.push(s);
        }
        (speeds, dists)
    }
}

// ---------------------------------------------------------------------------
// path geometry
// ---------------------------------------------------------------------------

/// Approach north along +y toward the origin, then a quarter arc (turn < 0
/// left, > 0 right, = 0 straight), then a straight exit.
fn path_position(s: f64, approach: f64, radius: f64, turn: f64) -> Point {
    let rel = s - approach;
    if turn == 0.0 || rel <= 0.0 {
        return Point::new(0.0, rel);
    }
    let arc_len = FRAC_PI_2 * radius;
    if rel <= arc_len {
        let phi = rel / radius;
        Point::new(turn * radius * (1.0 - phi.cos()), radius * phi.sin())
    } else {
        let tail = rel - arc_len;
        Point::new(turn * (radius + tail), radius)
    }
}

// ---------------------------------------------------------------------------
// scene construction
// ---------------------------------------------------------------------------

struct SceneLayout {
    profile: SpeedProfile,
    /// Distance from the start position to the device point (path origin).
    approach: f64,
    /// -1 left, +1 right, 0 straight.
    turn: f64,
    radius: f64,
    lights: Vec<(Point, u8)>,
    signs: Vec<Point>,
}

fn cruise(v0: f64) -> SpeedProfile {
    SpeedProfile {
        start_speed: v0,
        phases: vec![Phase::Cruise { duration: 10.0 }],
    }
}

fn profile(v0: f64, phases: Vec<Phase>) -> SpeedProfile {
    SpeedProfile {
        start_speed: v0,
        phases,
    }
}

/// Sample index at time `t` (0-based; sample i sits at i * DT).
fn sample_at(t: f64) -> usize {
    (t / DT).round() as usize
}

/// Turn radius for stop-sign corners: minor-road turns are tight regardless
/// of how large the four-way square is.
fn sign_turn_radius(scale: f64) -> f64 {
    (scale / 2.0).min(9.0)
}

fn layout_for(spec: &ScenarioSpec) -> SceneLayout {
    let v0 = spec.approach_speed;
    let radius = (spec.intersection_scale / 2.0).max(5.0);
    let half = spec.intersection_scale / 2.0;
    match spec.category {
        InteractionCategory::LightStop => {
            // cruise 2 s, constant-jerk stop over 4.5 s (gentle deceleration),
            // dwell; the vehicle halts 0.02 m short of the stop line
            let p = profile(
                v0,
                vec![
                    Phase::Cruise { duration: 2.0 },
                    Phase::RampTo { duration: 4.5, target: 0.0 },
                    Phase::Cruise { duration: 10.0 },
                ],
            );
            let (_, dists) = p.sample();
            let total = *dists.last().unwrap();
            SceneLayout {
                profile: p,
                approach: total + 0.02,
                turn: 0.0,
                radius,
                lights: vec![(Point::new(0.0, 0.0), 4)],
                signs: vec![],
            }
        }
        InteractionCategory::LightStraight => SceneLayout {
            profile: cruise(v0),
            approach: v0 * 3.5,
            turn: 0.0,
            radius,
            lights: vec![(Point::new(0.0, 0.0), 6)],
            signs: vec![],
        },
        InteractionCategory::LightLeftTurn | InteractionCategory::LightRightTurn => {
            let turn = if spec.category == InteractionCategory::LightLeftTurn {
                -1.0
            } else {
                1.0
            };
            let state = if turn < 0.0 { 3 } else { 6 };
            // slow to a comfortable cornering speed (lateral acceleration
            // about 2.5 m/s^2) before crossing the stop line at t = 3.0 s
            let v_turn = v0.min((2.5 * radius).sqrt());
            let p = profile(
                v0,
                vec![
                    Phase::Cruise { duration: 1.4 },
                    Phase::RampTo { duration: 1.2, target: v_turn },
                    Phase::Cruise { duration: 10.0 },
                ],
            );
            let (_, dists) = p.sample();
            SceneLayout {
                profile: p,
                approach: dists[sample_at(3.0)],
                turn,
                radius,
                lights: vec![(Point::new(0.0, 0.0), state)],
                signs: vec![],
            }
        }
        InteractionCategory::SignFourWay => {
            // stop reached at t = 3.5, dwell 1 s, resume; the dwell sits one
            // meter before the near-corner sign of the square
            let p = profile(
                v0,
                vec![
                    Phase::Cruise { duration: 1.5 },
                    Phase::RampTo { duration: 2.0, target: 0.0 },
                    Phase::Cruise { duration: 1.0 },
                    Phase::RampTo { duration: 1.5, target: v0 },
                    Phase::Cruise { duration: 10.0 },
                ],
            );
            let (_, dists) = p.sample();
            let dwell_dist = dists[sample_at(4.0)];
            SceneLayout {
                profile: p,
                approach: dwell_dist + 1.0 + half,
                turn: 0.0,
                radius,
                lights: vec![],
                signs: vec![
                    Point::new(0.0, -half),
                    Point::new(2.0 * half, -half),
                    Point::new(2.0 * half, half),
                    Point::new(0.0, half),
                ],
            }
        }
        InteractionCategory::SignRightTurn | InteractionCategory::SignLeftOneStep => {
            let turn = if spec.category == InteractionCategory::SignRightTurn {
                1.0
            } else {
                -1.0
            };
            // stop at t = 3.5, dwell 0.8 s, resume and take the corner
            let p = profile(
                v0,
                vec![
                    Phase::Cruise { duration: 1.5 },
                    Phase::RampTo { duration: 2.0, target: 0.0 },
                    Phase::Cruise { duration: 0.8 },
                    Phase::RampTo { duration: 1.5, target: v0 },
                    Phase::Cruise { duration: 10.0 },
                ],
            );
            let (_, dists) = p.sample();
            let dwell_dist = dists[sample_at(3.9)];
            SceneLayout {
                profile: p,
                approach: dwell_dist + 0.8 + 2.5,
                turn,
                radius: sign_turn_radius(spec.intersection_scale),
                lights: vec![],
                signs: vec![Point::new(turn * 1.5, -2.5)],
            }
        }
        InteractionCategory::SignLeftTwoStep => {
            // full stop at the sign, creep forward, second full stop in the
            // center lane 2.5+ s later, then complete the left turn
            let p = profile(
                v0,
                vec![
                    Phase::Cruise { duration: 0.8 },
                    Phase::RampTo { duration: 1.2, target: 0.0 },
                    Phase::Cruise { duration: 0.6 },
                    Phase::RampTo { duration: 1.2, target: 0.7 * v0 },
                    Phase::Cruise { duration: 0.4 },
                    Phase::RampTo { duration: 1.2, target: 0.0 },
                    Phase::Cruise { duration: 0.6 },
                    Phase::RampTo { duration: 1.2, target: v0 },
                    Phase::Cruise { duration: 10.0 },
                ],
            );
            let (_, dists) = p.sample();
            let dwell_dist = dists[sample_at(2.3)];
            SceneLayout {
                profile: p,
                approach: dwell_dist + 0.8 + 2.5,
                turn: -1.0,
                radius: sign_turn_radius(spec.intersection_scale),
                lights: vec![],
                signs: vec![Point::new(-1.5, -2.5)],
            }
        }
        InteractionCategory::None => SceneLayout {
            profile: cruise(v0),
            approach: v0 * 4.0,
            turn: 0.0,
            radius,
            lights: vec![],
            signs: vec![],
        },
    }
}

/// Generates a 91-step segment satisfying `spec.category`'s rule chain when
/// noiseless, plus the category label.
pub fn generate(spec: &ScenarioSpec) -> Result<(Segment, InteractionCategory), SynthError> {
    spec.validate()?;
    let layout = layout_for(spec);
    let (speeds, dists) = layout.profile.sample();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pos_noise = Normal::new(0.0, spec.noise_sigma_pos.max(f64::MIN_POSITIVE)).unwrap();
    let speed_noise = Normal::new(0.0, spec.noise_sigma_speed.max(f64::MIN_POSITIVE)).unwrap();

    let steps: Vec<TimeStep> = (0..SEGMENT_LEN)
        .map(|i| {
            let mut position = path_position(dists[i], layout.approach, layout.radius, layout.turn);
            let mut speed = speeds[i];
            if spec.noise_sigma_pos > 0.0 {
                position.x += pos_noise.sample(&mut rng);
                position.y += pos_noise.sample(&mut rng);
            }
            if spec.noise_sigma_speed > 0.0 {
                speed = (speed + speed_noise.sample(&mut rng)).max(0.0);
            }
            TimeStep {
                index: (i + 1) as u32,
                position,
                speed,
            }
        })
        .collect();

    let id = format!(
        "{}-v{:.1}-m{:.0}-seed{}",
        spec.category, spec.approach_speed, spec.intersection_scale, spec.seed
    );
    let segment = Segment {
        id,
        steps,
        lights: layout
            .lights
            .iter()
            .map(|&(stop_line, state)| TrafficLightTrack {
                stop_line,
                states: vec![state; SEGMENT_LEN],
            })
            .collect(),
        signs: layout
            .signs
            .iter()
            .map(|&position| StopSign { position })
            .collect(),
    };
    Ok((segment, spec.category))
}

/// The speed/scale grid used for acceptance-style round trips: 25 clean
/// scenes per category.
pub fn acceptance_grid(category: InteractionCategory) -> Vec<ScenarioSpec> {
    let speeds = [5.0, 6.5, 8.0, 9.5, 11.0];
    let scales = [20.0, 24.0, 28.0, 32.0, 36.0];
    let mut out = Vec::with_capacity(25);
    for (i, &v) in speeds.iter().enumerate() {
        for (j, &m) in scales.iter().enumerate() {
            out.push(ScenarioSpec::clean(category, v, m, (i * 5 + j) as u64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_segment;
    use crate::organize::classify_segment;
    use crate::model::{LightRuleParams, SignRuleParams};

    #[test]
    fn generated_segments_are_well_formed() {
        for category in InteractionCategory::ALL {
            let spec = ScenarioSpec::clean(category, 8.0, 25.0, 1);
            let (seg, label) = generate(&spec).unwrap();
            assert_eq!(label, category);
            assert!(
                validate_segment(&seg).is_empty(),
                "{category}: {:?}",
                validate_segment(&seg)
            );
        }
    }

    #[test]
    fn noiseless_scenes_classify_as_labeled() {
        let lp = LightRuleParams::default();
        let sp = SignRuleParams::default();
        for category in InteractionCategory::ALL {
            let spec = ScenarioSpec::clean(category, 8.0, 25.0, 3);
            let (seg, label) = generate(&spec).unwrap();
            let got = classify_segment(&seg, &lp, &sp).category;
            assert_eq!(got, label, "category {category}");
        }
    }

    #[test]
    fn kinematic_consistency_of_noiseless_scenes() {
        for category in InteractionCategory::ALL {
            let spec = ScenarioSpec::clean(category, 9.5, 30.0, 5);
            let (seg, _) = generate(&spec).unwrap();
            for w in seg.steps.windows(2) {
                let chord = w[0].position.distance(w[1].position) / DT;
                let mid = 0.5 * (w[0].speed + w[1].speed);
                if mid > 0.5 {
                    let rel = (chord - mid).abs() / mid;
                    assert!(rel < 0.05, "{category}: chord {chord} vs mid speed {mid}");
                } else {
                    assert!(chord < 0.6, "{category}: creeping chord {chord}");
                }
            }
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = ScenarioSpec {
            category: InteractionCategory::LightStop,
            approach_speed: 8.0,
            intersection_scale: 25.0,
            noise_sigma_speed: 0.1,
            noise_sigma_pos: 0.05,
            seed: 77,
        };
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let slow = ScenarioSpec::clean(InteractionCategory::LightStop, 0.5, 25.0, 0);
        assert!(matches!(generate(&slow), Err(SynthError::InfeasibleSpec(_))));
        let tiny = ScenarioSpec::clean(InteractionCategory::SignFourWay, 8.0, 2.0, 0);
        assert!(matches!(generate(&tiny), Err(SynthError::InfeasibleSpec(_))));
    }

    #[test]
    fn acceptance_grid_has_25_distinct_specs() {
        let grid = acceptance_grid(InteractionCategory::SignFourWay);
        assert_eq!(grid.len(), 25);
        for spec in &grid {
            assert_eq!(spec.noise_sigma_speed, 0.0);
            assert_eq!(spec.noise_sigma_pos, 0.0);
        }
    }
}
