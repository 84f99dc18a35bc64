//! Pure geometric predicates: polynomial trajectory fitting and extension,
//! point-passage tests, cross-product crossing and turn tests, polar sorting,
//! and convex-quadrilateral detection.

use crate::model::{LightRuleParams, Point, SignRuleParams, Vec2};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Tolerance used by [`crossed_by_distance_dip`] to suppress sensor jitter:
/// the interior minimum must undercut both endpoint distances by this margin.
pub const DIP_TOLERANCE: f64 = 0.1;

/// Number of uniform parameter samples used by [`passes_point`]. Raw 0.1 s
/// samples can straddle a 0.1 m ball at typical speeds; the dense resample
/// cannot.
pub const PASSAGE_SAMPLES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// The fit is rank-deficient (fewer distinct points than coefficients),
    /// which signals a stationary segment.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("zero-length vector between coincident points")]
    ZeroLengthVector,
}

/// Signed planar cross product `v1.x * v2.y - v1.y * v2.x`.
pub fn cross2(v1: Vec2, v2: Vec2) -> f64 {
    v1.x * v2.y - v1.y * v2.x
}

/// A parametric polynomial fit of a trajectory over normalized time
/// `u in [0, 1 + p_extend]`; `u = 1` corresponds to the last observed sample
/// and the extension covers the segment's forward continuation.
#[derive(Debug, Clone)]
pub struct FittedPath {
    /// Monomial coefficients of x(u), ascending powers.
    pub coeffs_x: Vec<f64>,
    /// Monomial coefficients of y(u), ascending powers.
    pub coeffs_y: Vec<f64>,
    /// Resampling increment in u covering the full extended span.
    pub sample_step: f64,
    /// Upper end of the parameter domain, `1 + p_extend`.
    pub u_max: f64,
}

impl FittedPath {
    pub fn eval(&self, u: f64) -> Point {
        Point::new(horner(&self.coeffs_x, u), horner(&self.coeffs_y, u))
    }
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

/// Least-squares parametric fit of `points` with a `d_poly`-degree polynomial
/// in normalized time, evaluable over `[0, 1 + p_extend]`.
///
/// The fit is parametric (x(u), y(u) separately) rather than y-on-x because
/// intersection paths are not x-monotone.
pub fn fit_and_extend(
    points: &[Point],
    d_poly: usize,
    p_extend: f64,
) -> Result<FittedPath, GeometryError> {
    let n = points.len();
    let n_coeffs = d_poly + 1;
    let distinct = count_distinct(points);
    if distinct < n_coeffs {
        return Err(GeometryError::DegenerateFit(format!(
            "{distinct} distinct points, need at least {n_coeffs}"
        )));
    }

    let mut design = DMatrix::zeros(n, n_coeffs);
    for i in 0..n {
        let u = i as f64 / (n - 1) as f64;
        let mut p = 1.0;
        for j in 0..n_coeffs {
            design[(i, j)] = p;
            p *= u;
        }
    }
    let svd = design.svd(true, true);
    let bx = DVector::from_iterator(n, points.iter().map(|p| p.x));
    let by = DVector::from_iterator(n, points.iter().map(|p| p.y));
    let eps = 1e-10;
    let coeffs_x = svd
        .solve(&bx, eps)
        .map_err(|e| GeometryError::DegenerateFit(e.to_string()))?;
    let coeffs_y = svd
        .solve(&by, eps)
        .map_err(|e| GeometryError::DegenerateFit(e.to_string()))?;

    let u_max = 1.0 + p_extend;
    Ok(FittedPath {
        coeffs_x: coeffs_x.iter().copied().collect(),
        coeffs_y: coeffs_y.iter().copied().collect(),
        sample_step: u_max / (PASSAGE_SAMPLES - 1) as f64,
        u_max,
    })
}

fn count_distinct(points: &[Point]) -> usize {
    let mut distinct: Vec<Point> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| q.x == p.x && q.y == p.y) {
            distinct.push(*p);
        }
    }
    distinct.len()
}

/// True iff a dense resample of the path (original span plus extension) comes
/// within `d_pass` of `target`.
pub fn passes_point(path: &FittedPath, target: Point, d_pass: f64) -> bool {
    (0..PASSAGE_SAMPLES).any(|k| {
        let u = k as f64 * path.sample_step;
        path.eval(u).distance(target) < d_pass
    })
}

/// First 1-based interior index at which the sign of the cross products about
/// `reference` flips, i.e. the trajectory crosses the stop line there.
pub fn sign_flip_index(points: &[Point], reference: Point) -> Option<usize> {
    if points.len() < 3 {
        return None;
    }
    for i in 1..points.len() - 1 {
        let c1 = cross2(points[i - 1].vector_to(reference), reference.vector_to(points[i]));
        let c2 = cross2(points[i].vector_to(reference), reference.vector_to(points[i + 1]));
        if c1 * c2 < 0.0 {
            return Some(i + 1); // 1-based timestep
        }
    }
    None
}

/// True iff the signs of consecutive cross products about `reference` are
/// opposite somewhere along the trajectory.
pub fn crossed_by_sign_flip(points: &[Point], reference: Point) -> bool {
    sign_flip_index(points, reference).is_some()
}

/// 1-based index of the strict interior minimum of the distance series to
/// `reference`: the closest interior sample, provided it undercuts both
/// endpoint distances by [`DIP_TOLERANCE`]. This is where the trajectory
/// crosses (or passes) the reference.
pub fn distance_dip_index(points: &[Point], reference: Point) -> Option<usize> {
    if points.len() < 3 {
        return None;
    }
    let d_first = points[0].distance(reference);
    let d_last = points[points.len() - 1].distance(reference);
    let mut best = (f64::INFINITY, 0usize);
    for (i, p) in points.iter().enumerate().skip(1).take(points.len() - 2) {
        let d = p.distance(reference);
        if d < best.0 {
            best = (d, i);
        }
    }
    if best.0 < d_first - DIP_TOLERANCE && best.0 < d_last - DIP_TOLERANCE {
        Some(best.1 + 1) // 1-based timestep
    } else {
        None
    }
}

/// True iff the distance series to `reference` first decreases and then
/// increases (interior minimum under the dip tolerance).
pub fn crossed_by_distance_dip(points: &[Point], reference: Point) -> bool {
    distance_dip_index(points, reference).is_some()
}

/// Normalized cross product of the entry and exit headings about a reference
/// point; positive means the end lies to the left of the entry direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnMeasure {
    pub eta: f64,
}

/// Computes the unit-vector cross product eta for start -> reference -> end.
pub fn turn_measure(start: Point, reference: Point, end: Point) -> Result<TurnMeasure, GeometryError> {
    let u1 = start
        .vector_to(reference)
        .unit()
        .ok_or(GeometryError::ZeroLengthVector)?;
    let u2 = reference
        .vector_to(end)
        .unit()
        .ok_or(GeometryError::ZeroLengthVector)?;
    Ok(TurnMeasure { eta: cross2(u1, u2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Left,
    Right,
    Straight,
    Indeterminate,
}

/// Eta thresholds for turn classification. The light rules carry a dedicated
/// straight band; the sign rules only split left from right.
#[derive(Debug, Clone, Copy)]
pub struct TurnThresholds {
    pub left: f64,
    pub right: f64,
    /// `(eta_through_2, eta_through_1)` band classified as Straight.
    pub straight_band: Option<(f64, f64)>,
}

impl TurnThresholds {
    pub fn light(p: &LightRuleParams) -> Self {
        Self {
            left: p.eta_left,
            right: p.eta_right,
            straight_band: Some((p.eta_through_2, p.eta_through_1)),
        }
    }

    pub fn sign(p: &SignRuleParams) -> Self {
        Self {
            left: p.eta_left,
            right: p.eta_right,
            straight_band: None,
        }
    }
}

/// Classifies the maneuver start -> reference -> end by the unit-vector cross
/// product. Eta values in the gaps between thresholds are Indeterminate.
pub fn turn_direction(
    start: Point,
    reference: Point,
    end: Point,
    thresholds: &TurnThresholds,
) -> Result<TurnDirection, GeometryError> {
    let eta = turn_measure(start, reference, end)?.eta;
    Ok(classify_eta(eta, thresholds))
}

pub fn classify_eta(eta: f64, thresholds: &TurnThresholds) -> TurnDirection {
    if eta > thresholds.left {
        TurnDirection::Left
    } else if eta < thresholds.right {
        TurnDirection::Right
    } else if let Some((lo, hi)) = thresholds.straight_band {
        if eta > lo && eta < hi {
            TurnDirection::Straight
        } else {
            TurnDirection::Indeterminate
        }
    } else {
        TurnDirection::Indeterminate
    }
}

/// Stop signs sorted by polar angle about a reference sign; ties in angle
/// break by ascending distance from the reference.
#[derive(Debug, Clone)]
pub struct PolarOrder {
    pub reference: Point,
    pub ordered: Vec<(Point, f64)>,
}

/// Sorts `points` by polar angle about `reference`, angle in (-pi, pi].
pub fn polar_order(reference: Point, points: &[Point]) -> PolarOrder {
    let mut ordered: Vec<(Point, f64)> = points
        .iter()
        .map(|&p| (p, (p.y - reference.y).atan2(p.x - reference.x)))
        .collect();
    ordered.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| reference.distance(a.0).total_cmp(&reference.distance(b.0)))
    });
    PolarOrder { reference, ordered }
}

/// True iff the four positions form a strictly convex quadrilateral.
///
/// The reference vertex is the lexicographic (x, then y) minimum, the rest are
/// sorted by polar angle about it, and the four cyclic edge cross products
/// must share a strict sign. Collinear or duplicate configurations are not
/// convex.
pub fn convex_quadrilateral(signs: &[Point; 4]) -> bool {
    let mut ref_idx = 0;
    for (i, p) in signs.iter().enumerate().skip(1) {
        let r = signs[ref_idx];
        if p.x < r.x || (p.x == r.x && p.y < r.y) {
            ref_idx = i;
        }
    }
    let reference = signs[ref_idx];
    let rest: Vec<Point> = signs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != ref_idx)
        .map(|(_, p)| *p)
        .collect();
    let order = polar_order(reference, &rest);

    let cycle = [
        reference,
        order.ordered[0].0,
        order.ordered[1].0,
        order.ordered[2].0,
    ];
    let mut crosses = [0.0; 4];
    for i in 0..4 {
        let a = cycle[i];
        let b = cycle[(i + 1) % 4];
        let c = cycle[(i + 2) % 4];
        crosses[i] = cross2(a.vector_to(b), b.vector_to(c));
    }
    crosses.iter().all(|&c| c > 0.0) || crosses.iter().all(|&c| c < 0.0)
}
