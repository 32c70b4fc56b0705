use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PointSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pod::Basis;

#[derive(Debug, Clone, Copy)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Stop once the relative objective change falls below this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 300,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    /// One centroid per row.
    pub centroids: Matrix,
    pub objective: f64,
    /// Objective after every Lloyd iteration.
    pub history: Vec<f64>,
}

fn dist2(points: &Matrix, i: usize, centroids: &Matrix, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(points: &Matrix, i: usize, centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, dist2(points, i, centroids, 0));
    for c in 1..centroids.nrows() {
        let d = dist2(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Sum of squared distances of every point to the centroid it is assigned to.
pub fn objective(points: &Matrix, assignments: &[usize], centroids: &Matrix) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| dist2(points, i, centroids, c))
        .sum()
}

fn means(points: &Matrix, assignments: &[usize], k: usize) -> Matrix {
    let mut sums = Matrix::zeros(k, points.ncols());
    let mut counts = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        let mut row = sums.row_mut(c);
        row += points.row(i);
        counts[c] += 1;
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            sums.row_mut(c).unscale_mut(count as f64);
        }
    }
    sums
}

/// Lloyd's algorithm on the rows of `points`.
///
/// Seeding takes one row at random and then, repeatedly, the row farthest
/// from its nearest chosen center. A cluster that empties is re-seeded at the
/// point farthest from its centroid, taken from a cluster with at least two
/// members.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, config: KMeansConfig) -> Result<ClusteringResult> {
    let count = points.nrows();
    if k == 0 || k > count {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={count}, got {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Matrix::zeros(k, points.ncols());
    centroids.row_mut(0).copy_from(&points.row(rng.random_range(0..count)));
    let mut closest: Vec<f64> = (0..count).map(|i| dist2(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let mut far = 0;
        for i in 1..count {
            if closest[i] > closest[far] {
                far = i;
            }
        }
        centroids.row_mut(c).copy_from(&points.row(far));
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(dist2(points, i, &centroids, c));
        }
    }

    let mut assignments = vec![usize::MAX; count];
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..config.max_iters {
        let mut distances = vec![0.0; count];
        let mut changed = false;
        for i in 0..count {
            let (c, d) = nearest(points, i, &centroids);
            changed |= assignments[i] != c;
            assignments[i] = c;
            distances[i] = d;
        }
        let mut sizes = vec![0usize; k];
        for &c in &assignments {
            sizes[c] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let mut donor: Option<usize> = None;
            for i in 0..count {
                if sizes[assignments[i]] < 2 {
                    continue;
                }
                if donor.is_none_or(|j| distances[i] > distances[j]) {
                    donor = Some(i);
                }
            }
            let i = donor.expect("k <= number of points leaves a donor");
            sizes[assignments[i]] -= 1;
            assignments[i] = empty;
            sizes[empty] = 1;
            distances[i] = 0.0;
            changed = true;
        }
        centroids = means(points, &assignments, k);
        let value = objective(points, &assignments, &centroids);
        let previous = history.last().copied();
        history.push(value);
        if !changed {
            break;
        }
        if let Some(prev) = previous {
            if (prev - value).abs() <= config.tol * prev.abs() {
                break;
            }
        }
    }
    let objective = *history.last().expect("at least one iteration");
    Ok(ClusteringResult {
        assignments,
        centroids,
        objective,
        history,
    })
}

/// One point per k-means cluster of the basis rows (`k = n`): the row with
/// the smallest `||row - centroid||^2 / ||row||^2`.
pub fn kdeim(basis: &Basis, seed: u64) -> Result<PointSet> {
    kdeim_with(basis, seed, KMeansConfig::default())
}

pub fn kdeim_with(basis: &Basis, seed: u64, config: KMeansConfig) -> Result<PointSet> {
    let u = basis.u();
    let n = basis.dim();
    let clusters = kmeans(u, n, seed, config)?;
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
    for (i, &c) in clusters.assignments.iter().enumerate() {
        let norm2 = u.row(i).norm_squared();
        let score = if norm2 == 0.0 {
            f64::INFINITY
        } else {
            dist2(u, i, &clusters.centroids, c) / norm2
        };
        match best[c] {
            Some((_, s)) if score >= s => {}
            _ => best[c] = Some((i, score)),
        }
    }
    let points = best
        .into_iter()
        .map(|b| b.expect("clusters are nonempty").0)
        .collect();
    PointSet::new(points, basis.full_dim())
}
