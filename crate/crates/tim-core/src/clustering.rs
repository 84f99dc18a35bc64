//! Density-based clustering of stop-sign positions (DBSCAN) used to isolate
//! candidate four-way intersections. Point counts are tiny (signs per
//! segment), so neighborhoods are brute force.

use crate::model::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Noise,
    Cluster(usize),
}

/// One label per input point. Cluster ids form a contiguous range 0..k-1,
/// canonicalized by first appearance over the input index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub labels: Vec<PointLabel>,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.labels
            .iter()
            .filter_map(|l| match l {
                PointLabel::Cluster(id) => Some(id + 1),
                PointLabel::Noise => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Input indices of the members of cluster `id`.
    pub fn members(&self, id: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == PointLabel::Cluster(id))
            .map(|(i, _)| i)
            .collect()
    }

    /// Cluster id of point `idx`, if it is not noise.
    pub fn cluster_of(&self, idx: usize) -> Option<usize> {
        match self.labels[idx] {
            PointLabel::Cluster(id) => Some(id),
            PointLabel::Noise => None,
        }
    }
}

/// Standard DBSCAN with Euclidean metric. `min_pts` counts the point itself,
/// so two mutually close points form a cluster at `min_pts = 2`. Border
/// points reachable from several clusters join the first cluster to claim
/// them in input order; labels are then canonicalized by first appearance.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> ClusterAssignment {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| points[i].distance(points[j]) <= eps)
                .collect()
        })
        .collect();
    let is_core: Vec<bool> = (0..n).map(|i| neighbors[i].len() >= min_pts).collect();

    let mut labels = vec![PointLabel::Noise; n];
    let mut visited = vec![false; n];
    let mut next_id = 0usize;

    for seed in 0..n {
        if visited[seed] || !is_core[seed] {
            continue;
        }
        let id = next_id;
        next_id += 1;
        let mut queue = std::collections::VecDeque::new();
        visited[seed] = true;
        labels[seed] = PointLabel::Cluster(id);
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            if !is_core[p] {
                continue;
            }
            for &q in &neighbors[p] {
                if !visited[q] {
                    visited[q] = true;
                    labels[q] = PointLabel::Cluster(id);
                    queue.push_back(q);
                }
            }
        }
    }

    ClusterAssignment {
        labels: canonicalize(labels),
    }
}

/// Renumber cluster ids by first appearance over the input index.
fn canonicalize(labels: Vec<PointLabel>) -> Vec<PointLabel> {
    let mut remap: Vec<Option<usize>> = Vec::new();
    let mut next = 0usize;
    labels
        .iter()
        .map(|l| match l {
            PointLabel::Noise => PointLabel::Noise,
            PointLabel::Cluster(id) => {
                if remap.len() <= *id {
                    remap.resize(id + 1, None);
                }
                let new_id = *remap[*id].get_or_insert_with(|| {
                    let v = next;
                    next += 1;
                    v
                });
                PointLabel::Cluster(new_id)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    /// Independent reference DBSCAN: union-find over core points, then border
    /// attachment to the earliest-created adjacent component, then the same
    /// first-appearance canonicalization.
    pub(crate) fn reference_dbscan(points: &[Point], eps: f64, min_pts: usize) -> ClusterAssignment {
        let n = points.len();
        let close = |i: usize, j: usize| points[i].distance(points[j]) <= eps;
        let is_core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| close(i, j)).count() >= min_pts)
            .collect();

        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        for i in 0..n {
            for j in i + 1..n {
                if is_core[i] && is_core[j] && close(i, j) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
        // component creation order = order of each component's first core
        // point in the input scan
        let mut comp_order: Vec<usize> = Vec::new();
        let mut provisional = vec![PointLabel::Noise; n];
        for i in 0..n {
            if is_core[i] {
                let root = find(&mut parent, i);
                let ord = comp_order.iter().position(|&r| r == root).unwrap_or_else(|| {
                    comp_order.push(root);
                    comp_order.len() - 1
                });
                provisional[i] = PointLabel::Cluster(ord);
            }
        }
        for i in 0..n {
            if is_core[i] {
                continue;
            }
            let mut best: Option<usize> = None;
            for j in 0..n {
                if is_core[j] && close(i, j) {
                    if let PointLabel::Cluster(ord) = provisional[j] {
                        best = Some(best.map_or(ord, |b: usize| b.min(ord)));
                    }
                }
            }
            if let Some(ord) = best {
                provisional[i] = PointLabel::Cluster(ord);
            }
        }
        ClusterAssignment {
            labels: canonicalize(provisional),
        }
    }

    #[test]
    fn single_point_is_noise_at_min_pts_two() {
        let a = dbscan(&[pt(0.0, 0.0)], 28.0, 2);
        assert_eq!(a.labels, vec![PointLabel::Noise]);
    }

    #[test]
    fn square_corners_chain_into_one_cluster() {
        let square = [pt(0.0, 0.0), pt(20.0, 0.0), pt(20.0, 20.0), pt(0.0, 20.0)];
        let a = dbscan(&square, 28.0, 2);
        assert_eq!(a.cluster_count(), 1);
        assert_eq!(a.members(0).len(), 4);
    }

    #[test]
    fn distant_squares_form_two_clusters() {
        let mut pts = vec![pt(0.0, 0.0), pt(20.0, 0.0), pt(20.0, 20.0), pt(0.0, 20.0)];
        pts.extend([pt(200.0, 0.0), pt(220.0, 0.0), pt(220.0, 20.0), pt(200.0, 20.0)]);
        let a = dbscan(&pts, 28.0, 2);
        assert_eq!(a.cluster_count(), 2);
        assert_eq!(a.members(0), vec![0, 1, 2, 3]);
        assert_eq!(a.members(1), vec![4, 5, 6, 7]);
    }

    #[test]
    fn pair_of_close_points_is_a_cluster_at_min_pts_two() {
        // min_pts counts the point itself
        let a = dbscan(&[pt(0.0, 0.0), pt(10.0, 0.0)], 28.0, 2);
        assert_eq!(a.cluster_count(), 1);
    }

    #[test]
    fn empty_input_is_an_empty_assignment() {
        let a = dbscan(&[], 28.0, 2);
        assert!(a.labels.is_empty());
        assert_eq!(a.cluster_count(), 0);
    }

    fn arb_points(max_n: usize) -> impl Strategy<Value = Vec<Point>> {
        proptest::collection::vec((-60.0..60.0f64, -60.0..60.0f64), 0..max_n)
            .prop_map(|v| v.into_iter().map(|(x, y)| pt(x, y)).collect())
    }

    proptest! {
        #[test]
        fn matches_reference_implementation(points in arb_points(50),
                                            eps in prop::sample::select(vec![5.0, 28.0, 50.0]),
                                            min_pts in 2usize..4) {
            let fast = dbscan(&points, eps, min_pts);
            let slow = reference_dbscan(&points, eps, min_pts);
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn partition_is_permutation_invariant(points in arb_points(30), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.shuffle(&mut rng);
            let shuffled: Vec<Point> = order.iter().map(|&i| points[i]).collect();

            let a = dbscan(&points, 28.0, 2);
            let b = dbscan(&shuffled, 28.0, 2);

            // the induced partition must agree: same-cluster relations and
            // noise status are preserved under the permutation
            for (new_i, &old_i) in order.iter().enumerate() {
                prop_assert_eq!(
                    matches!(b.labels[new_i], PointLabel::Noise),
                    matches!(a.labels[old_i], PointLabel::Noise)
                );
            }
            for (ni, &oi) in order.iter().enumerate() {
                for (nj, &oj) in order.iter().enumerate() {
                    let same_b = b.cluster_of(ni).is_some() && b.cluster_of(ni) == b.cluster_of(nj);
                    let same_a = a.cluster_of(oi).is_some() && a.cluster_of(oi) == a.cluster_of(oj);
                    prop_assert_eq!(same_b, same_a);
                }
            }
        }

        #[test]
        fn close_core_points_share_a_cluster(points in arb_points(30)) {
            let eps = 28.0;
            let min_pts = 2;
            let a = dbscan(&points, eps, min_pts);
            let n = points.len();
            let is_core = |i: usize| (0..n).filter(|&j| points[i].distance(points[j]) <= eps).count() >= min_pts;
            for i in 0..n {
                for j in 0..n {
                    if is_core(i) && is_core(j) && points[i].distance(points[j]) <= eps {
                        prop_assert_eq!(a.cluster_of(i), a.cluster_of(j));
                    }
                }
            }
        }
    }
}
