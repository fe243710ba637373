//! K-means clustering of the joint (input, angle) space and the per-center
//! kernel widths derived from it.
//!
//! Recentering uses the cluster mean, which minimizes the within-cluster sum
//! of squared distances; the unsquared sum of distances is recorded alongside
//! it as the quantization error for reporting. Restarts keep the best
//! within-cluster sum of squares, ties broken toward the lower restart index,
//! so the winner does not depend on execution order.

use crate::error::{Error, Result};
use crate::rbf::euclidean;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Smallest admissible kernel width, in standardized units. Keeps the
/// Gaussian kernel finite for singleton or zero-spread clusters.
pub const WIDTH_FLOOR: f64 = 1e-3;

/// Result of one clustering run (the best restart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// K centers in the joint clustering space.
    pub centers: Vec<Vec<f64>>,
    /// Cluster index per input point.
    pub assignments: Vec<usize>,
    /// Iterations used by the winning restart.
    pub iterations: usize,
    /// Sum of point-to-center Euclidean distances at convergence.
    pub quantization_error: f64,
    /// Sum of squared point-to-center distances (the recentering objective).
    pub within_ss: f64,
    /// False when the winning restart stopped on the iteration cap instead of
    /// on membership convergence.
    pub converged: bool,
    /// Restart index that produced this result.
    pub restart: usize,
}

/// Sum of Euclidean distances of each point to its assigned center.
pub fn quantization_error(points: &[Vec<f64>], centers: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    if assignments.len() != points.len() {
        return Err(Error::domain("quantization_error", "one assignment per point required"));
    }
    let mut total = 0.0;
    for (p, &a) in points.iter().zip(assignments) {
        let c = centers
            .get(a)
            .ok_or_else(|| Error::domain("quantization_error", format!("cluster index {a} out of range")))?;
        if c.len() != p.len() {
            return Err(Error::domain("quantization_error", "point/center dimension mismatch"));
        }
        total += euclidean(p, c);
    }
    Ok(total)
}

fn within_sum_of_squares(points: &[Vec<f64>], centers: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| {
            let d = euclidean(p, &centers[a]);
            d * d
        })
        .sum()
}

fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = euclidean(point, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Assigns every point to its nearest center.
pub fn assign_all(points: &[Vec<f64>], centers: &[Vec<f64>]) -> Vec<usize> {
    points.iter().map(|p| nearest_center(p, centers)).collect()
}

fn recenter(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut centers = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (c, &v) in centers[a].iter_mut().zip(p) {
            *c += v;
        }
    }
    for (c, &n) in centers.iter_mut().zip(&counts) {
        if n > 0 {
            for v in c.iter_mut() {
                *v /= n as f64;
            }
        }
    }
    (centers, counts)
}

/// Reseeds every emptied cluster with the point farthest from its assigned
/// center. Returns true if any repair happened.
///
/// Only points from clusters with at least two members may move, so every
/// repair step reduces the number of empty clusters by one; with N ≥ K such a
/// donor cluster always exists.
fn repair_empty_clusters(points: &[Vec<f64>], centers: &mut [Vec<f64>], assignments: &mut [usize]) -> bool {
    let k = centers.len();
    let mut repaired = false;
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return repaired;
        };
        let farthest = points
            .iter()
            .zip(assignments.iter())
            .enumerate()
            .filter(|(_, (_, a))| counts[**a] > 1)
            .max_by(|(_, (p, a)), (_, (q, b))| {
                let da = euclidean(p, &centers[**a]);
                let db = euclidean(q, &centers[**b]);
                da.partial_cmp(&db).unwrap()
            })
            .map(|(i, _)| i)
            .expect("N ≥ K guarantees a donor cluster");
        centers[empty] = points[farthest].clone();
        assignments[farthest] = empty;
        repaired = true;
    }
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> (Vec<Vec<f64>>, Vec<usize>, usize, bool) {
    let k = centers.len();
    let dim = points[0].len();
    let mut assignments = assign_all(points, &centers);
    repair_empty_clusters(points, &mut centers, &mut assignments);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let (new_centers, _) = recenter(points, &assignments, k, dim);
        centers = new_centers;
        let mut next = assign_all(points, &centers);
        let repaired = repair_empty_clusters(points, &mut centers, &mut next);
        // a repair moves a center off the recentered position, so the
        // nearest-center invariant must be re-established by another pass
        if !repaired && next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    (centers, assignments, iterations, converged)
}

/// Lloyd's algorithm with seeded restarts.
///
/// Initial centers are drawn uniformly without replacement from the points.
/// Stops when cluster membership repeats in two consecutive iterations or
/// after `max_iter` iterations; the result of the best restart (lowest
/// within-cluster sum of squares) is returned.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize, max_iter: usize) -> Result<ClusterResult> {
    if k == 0 {
        return Err(Error::domain("kmeans", "k must be ≥ 1"));
    }
    if points.len() < k {
        return Err(Error::domain(
            "kmeans",
            format!("need at least k = {k} points, got {}", points.len()),
        ));
    }
    if restarts == 0 {
        return Err(Error::domain("kmeans", "restart count must be ≥ 1"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::domain("kmeans", "ragged point dimensions"));
    }

    let mut best: Option<ClusterResult> = None;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart as u64));
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.shuffle(&mut rng);
        let init: Vec<Vec<f64>> = idx[..k].iter().map(|&i| points[i].clone()).collect();

        let (centers, assignments, iterations, converged) = lloyd(points, init, max_iter);
        let within_ss = within_sum_of_squares(points, &centers, &assignments);
        let qe = quantization_error(points, &centers, &assignments)?;
        let candidate = ClusterResult {
            centers,
            assignments,
            iterations,
            quantization_error: qe,
            within_ss,
            converged,
            restart,
        };
        let better = match &best {
            None => true,
            Some(b) => candidate.within_ss < b.within_ss,
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("restarts ≥ 1"))
}

/// Per-center kernel widths: the mean Euclidean distance of each cluster's
/// points to its center, measured in the first `input_dim` coordinates.
///
/// Zero-spread clusters get [`WIDTH_FLOOR`].
pub fn widths(points: &[Vec<f64>], assignments: &[usize], centers: &[Vec<f64>], input_dim: usize) -> Result<Vec<f64>> {
    let k = centers.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        if a >= k {
            return Err(Error::domain("widths", format!("cluster index {a} out of range")));
        }
        sums[a] += euclidean(&p[..input_dim], &centers[a][..input_dim]);
        counts[a] += 1;
    }
    let mut out = Vec::with_capacity(k);
    for (s, &n) in sums.iter().zip(&counts) {
        if n == 0 {
            return Err(Error::domain("widths", "empty cluster"));
        }
        out.push((s / n as f64).max(WIDTH_FLOOR));
    }
    Ok(out)
}
