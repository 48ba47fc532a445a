//! Exact nearest-neighbor queries over 3D point sets via a median-split
//! kd-tree.

use nalgebra::Point3;

/// Static kd-tree over a point set. Queries return exact nearest neighbors.
pub struct KdTree {
    points: Vec<Point3<f64>>,
    /// Point indices arranged so each subtree occupies a contiguous slice;
    /// the splitting point sits at the slice midpoint.
    order: Vec<usize>,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> KdTree {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut tree = KdTree {
            points: points.to_vec(),
            order,
        };
        order = std::mem::take(&mut tree.order);
        build_recursive(&tree.points, &mut order, 0);
        tree.order = order;
        tree
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest point and its distance. Panics on an empty tree.
    pub fn nearest(&self, query: &Point3<f64>) -> (usize, f64) {
        assert!(!self.points.is_empty());
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(&self.order, 0, query, &mut best);
        (best.0, best.1.sqrt())
    }

    fn search(&self, slice: &[usize], axis: usize, query: &Point3<f64>, best: &mut (usize, f64)) {
        if slice.is_empty() {
            return;
        }
        let mid = slice.len() / 2;
        let idx = slice[mid];
        let p = self.points[idx];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        let diff = query[axis] - p[axis];
        let next_axis = (axis + 1) % 3;
        let (near, far) = if diff < 0.0 {
            (&slice[..mid], &slice[mid + 1..])
        } else {
            (&slice[mid + 1..], &slice[..mid])
        };
        self.search(near, next_axis, query, best);
        if diff * diff <= best.1 {
            self.search(far, next_axis, query, best);
        }
    }
}

fn build_recursive(points: &[Point3<f64>], slice: &mut [usize], axis: usize) {
    if slice.len() <= 1 {
        return;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let next = (axis + 1) % 3;
    let (lo, rest) = slice.split_at_mut(mid);
    build_recursive(points, lo, next);
    build_recursive(points, &mut rest[1..], next);
}
