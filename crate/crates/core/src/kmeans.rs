//! Seeded, deterministic k-means over unit-norm vectors.
//!
//! Inputs are pre-normalized embeddings, so Euclidean k-means on the unit
//! sphere agrees with cosine similarity as long as centroids are re-projected
//! onto the sphere after every update (the normalized mean maximizes the
//! within-cluster dot product, which keeps the squared-error objective
//! non-increasing through both half-steps).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Objective value (sum of squared distances) after each update step,
    /// starting from the initial seeding.
    pub sse_history: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (idx, centroid) in centroids.iter().enumerate() {
        let dist = squared_distance(point, centroid);
        if dist < best_dist {
            best_dist = dist;
            best = idx;
        }
    }
    (best, best_dist)
}

fn normalize_in_place(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn sse(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum()
}

/// k-means++ seeding: first center uniform, later centers weighted by
/// squared distance to the nearest chosen center. Degenerate data (all
/// remaining points coincide with chosen centers) falls back to the first
/// unchosen index, then to copies.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];

    let first = rng.gen_range(0..points.len());
    centroids.push(points[first].clone());
    chosen[first] = true;

    while centroids.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| nearest(p, &centroids).1)
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total <= f64::EPSILON {
            (0..points.len()).find(|&i| !chosen[i])
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (idx, w) in weights.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = idx;
                    break;
                }
            }
            Some(pick)
        };
        match next {
            Some(idx) => {
                centroids.push(points[idx].clone());
                chosen[idx] = true;
            }
            None => {
                // Fewer distinct points than k: reuse the first centroid.
                centroids.push(centroids[0].clone());
            }
        }
    }
    centroids
}

/// Run seeded spherical k-means until assignments stabilize or
/// [`MAX_ITERATIONS`] is reached. Fixed `seed` gives bit-identical output.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::Config(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Config("points have mixed dimensions".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut sse_history = vec![sse(points, &centroids, &assignments)];
    let mut iterations = 0usize;

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;

        // Update step: normalized mean per cluster.
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (point, &cluster) in points.iter().zip(&assignments) {
            counts[cluster] += 1;
            for (acc, value) in sums[cluster].iter_mut().zip(point) {
                *acc += value;
            }
        }
        for cluster in 0..k {
            if counts[cluster] == 0 {
                // Re-seed an empty cluster with the point farthest from its
                // current centroid; deterministic tie-break on lowest index.
                let farthest = points
                    .iter()
                    .enumerate()
                    .map(|(idx, p)| (idx, squared_distance(p, &centroids[assignments[idx]])))
                    .max_by(|(ai, ad), (bi, bd)| {
                        ad.partial_cmp(bd)
                            .expect("finite distances")
                            .then(bi.cmp(ai))
                    })
                    .map(|(idx, _)| idx)
                    .expect("points non-empty");
                centroids[cluster] = points[farthest].clone();
            } else {
                centroids[cluster] = sums[cluster].clone();
                normalize_in_place(&mut centroids[cluster]);
            }
        }

        // Assignment step.
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        sse_history.push(sse(points, &centroids, &next));
        let stable = next == assignments;
        assignments = next;
        if stable {
            break;
        }
    }

    Ok(KMeansResult {
        centroids,
        assignments,
        iterations,
        sse_history,
    })
}
