//! Exact nearest-neighbour index over a static point set.

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Balanced 3-d tree stored implicitly: the median of every subrange
/// `[lo, hi)` sits at `(lo + hi) / 2`, its left subtree below and right
/// subtree above, splitting on axis `depth % 3`.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Tree order to original index.
    order: Vec<usize>,
}

impl KdTree {
    /// Builds the tree. Medians are chosen by `(coordinate, original index)`
    /// so the layout is a pure function of the input order.
    pub fn build(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("cannot index an empty point cloud"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("point cloud contains non-finite coordinates"));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        split(points, &mut order, 0);
        let points = order.iter().map(|&i| points[i]).collect();
        Ok(KdTree { points, order })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Original index and squared distance of the point nearest to `q`.
    /// Among equidistant points the smallest original index wins.
    pub fn nearest(&self, q: Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.points.len(), 0, &mut best);
        best
    }

    pub fn point(&self, original_index: usize) -> Option<Vec3> {
        self.order
            .iter()
            .position(|&i| i == original_index)
            .map(|slot| self.points[slot])
    }

    fn search(&self, q: Vec3, lo: usize, hi: usize, depth: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        let d = q.distance_squared(p);
        let idx = self.order[mid];
        if d < best.1 || (d == best.1 && idx < best.0) {
            *best = (idx, d);
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn split(points: &[Vec3], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let (left, rest) = order.split_at_mut(mid);
    split(points, left, depth + 1);
    split(points, &mut rest[1..], depth + 1);
}
