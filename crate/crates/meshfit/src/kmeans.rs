//! Seeded k-means (k-means++ initialization, Lloyd iterations) over dense
//! feature vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cluster `points` (row-major, `dim` values each) into `k` clusters.
/// Deterministic for a given seed. Returns the cluster centers.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> Vec<f64> {
    let n = points.len() / dim;
    assert!(n >= k && k > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(points, dim, k, &mut rng);

    let mut assignment = vec![0usize; n];
    const MAX_ITERS: usize = 300;
    const SHIFT_TOLERANCE: f64 = 1e-7;
    for _ in 0..MAX_ITERS {
        assign(points, dim, &centers, &mut assignment);
        let shift = update_centers(points, dim, k, &assignment, &mut centers);
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    centers
}

/// Index of the nearest center for each point.
pub fn assignments(points: &[f64], dim: usize, centers: &[f64]) -> Vec<usize> {
    let n = points.len() / dim;
    let mut assignment = vec![0usize; n];
    assign(points, dim, centers, &mut assignment);
    assignment
}

fn plus_plus_init(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centers.extend_from_slice(&points[first * dim..(first + 1) * dim]);

    let mut dist2 = vec![f64::INFINITY; n];
    while centers.len() < k * dim {
        let last = &centers[centers.len() - dim..];
        for i in 0..n {
            let d = sq_dist(&points[i * dim..(i + 1) * dim], last);
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // all remaining points coincide with a center
            rng.gen_range(0..n)
        };
        centers.extend_from_slice(&points[next * dim..(next + 1) * dim]);
    }
    centers
}

fn assign(points: &[f64], dim: usize, centers: &[f64], assignment: &mut [usize]) {
    let k = centers.len() / dim;
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d = sq_dist(p, &centers[c * dim..(c + 1) * dim]);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignment[i] = best;
    }
}

/// Recompute centers as cluster means; returns the largest center shift.
/// Empty clusters keep their previous center.
fn update_centers(
    points: &[f64],
    dim: usize,
    k: usize,
    assignment: &[usize],
    centers: &mut [f64],
) -> f64 {
    let mut acc = vec![0.0f64; k * dim];
    let mut count = vec![0usize; k];
    for (i, p) in points.chunks_exact(dim).enumerate() {
        let c = assignment[i];
        count[c] += 1;
        for (a, &v) in acc[c * dim..(c + 1) * dim].iter_mut().zip(p) {
            *a += v;
        }
    }
    let mut worst_shift = 0.0f64;
    for c in 0..k {
        if count[c] == 0 {
            continue;
        }
        let inv = 1.0 / count[c] as f64;
        let mut shift2 = 0.0;
        for d in 0..dim {
            let new = acc[c * dim + d] * inv;
            let old = centers[c * dim + d];
            shift2 += (new - old) * (new - old);
            centers[c * dim + d] = new;
        }
        worst_shift = worst_shift.max(shift2.sqrt());
    }
    worst_shift
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}
