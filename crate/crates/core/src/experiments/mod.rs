//! Drivers for the toy and diffusion-reaction sweeps and the Monte-Carlo
//! check of the uniform-sampling bounds.

mod bounds;
mod config;
mod pde;
mod table;
mod toy;

pub use bounds::{verify_probabilistic_bounds, BoundReport, LevelSummary, TrialRecord, VerifierConfig};
pub use config::{
    derive_seed, ExperimentConfig, ModelConfig, Oversampling, PdeConfig, ToyConfig,
};
pub use pde::{
    load_or_generate_snapshots, run_pde_experiment, snapshot_cache_paths, PdeOutcome, PdeSetup,
    SnapshotSource,
};
pub use table::{CellSummary, ErrorRow, ErrorTable, CSV_HEADER};
pub use toy::{noise_bound_check, run_toy_experiment, NoiseBoundSample, ToySetup};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// `(1/K) sum_i ||t_i - a_i|| / ||t_i||`
pub fn averaged_relative_l2(truth: &[Vector], approx: &[Vector]) -> Result<f64> {
    if truth.len() != approx.len() {
        return Err(Error::Dimension(format!(
            "{} reference vectors but {} approximations",
            truth.len(),
            approx.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no vectors to compare".into()));
    }
    let mut total = 0.0;
    for (i, (t, a)) in truth.iter().zip(approx).enumerate() {
        if t.len() != a.len() {
            return Err(Error::Dimension(format!(
                "pair {i}: lengths {} and {}",
                t.len(),
                a.len()
            )));
        }
        let norm = t.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(format!("reference vector {i} is zero")));
        }
        total += (t - a).norm() / norm;
    }
    Ok(total / truth.len() as f64)
}

/// Column-wise version of [`averaged_relative_l2`].
pub fn averaged_relative_l2_columns(truth: &Matrix, approx: &Matrix) -> Result<f64> {
    if truth.shape() != approx.shape() {
        return Err(Error::Dimension(format!(
            "shapes {:?} and {:?}",
            truth.shape(),
            approx.shape()
        )));
    }
    if truth.ncols() == 0 {
        return Err(Error::InvalidArgument("no vectors to compare".into()));
    }
    let mut total = 0.0;
    for (i, (t, a)) in truth.column_iter().zip(approx.column_iter()).enumerate() {
        let norm = t.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(format!("reference vector {i} is zero")));
        }
        total += (t - a).norm() / norm;
    }
    Ok(total / truth.ncols() as f64)
}

pub(crate) fn normal(sigma: f64) -> Result<Normal<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {sigma}")));
    }
    Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// `v + eps` with independent `N(0, sigma^2)` components.
pub fn add_noise<R: Rng + ?Sized>(v: &Vector, sigma: f64, rng: &mut R) -> Result<Vector> {
    let dist = normal(sigma)?;
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    Ok(v.map(|x| x + dist.sample(rng)))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Log-log slope of the replicate-mean error of `method` over `n` in `[lo, hi]`.
pub fn growth_rate(table: &ErrorTable, method: &str, n_range: (usize, usize)) -> Result<f64> {
    let (lo, hi) = n_range;
    let cells: Vec<CellSummary> = table
        .cells()
        .into_iter()
        .filter(|c| c.method == method && c.n >= lo && c.n <= hi)
        .collect();
    let points: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|c| c.mean.filter(|e| *e > 0.0).map(|e| (c.n as f64, e)))
        .collect();
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "growth rate of {method} over [{lo}, {hi}] needs >= 4 cells with positive error, found {}",
            points.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    log_log_slope(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relative_error_examples() {
        let t = vec![Vector::from_vec(vec![3.0, 4.0])];
        assert_eq!(averaged_relative_l2(&t, &t).unwrap(), 0.0);
        assert_eq!(averaged_relative_l2(&t, &[Vector::zeros(2)]).unwrap(), 1.0);
        let truth = vec![Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![0.0, 2.0])];
        let approx = vec![Vector::from_vec(vec![1.1, 0.0]), Vector::from_vec(vec![0.0, 1.4])];
        assert!((averaged_relative_l2(&truth, &approx).unwrap() - 0.2).abs() < 1e-15);
        let cols = averaged_relative_l2_columns(
            &Matrix::from_columns(&truth),
            &Matrix::from_columns(&approx),
        )
        .unwrap();
        assert!((cols - 0.2).abs() < 1e-15);
        match averaged_relative_l2(&[Vector::zeros(2)], &[Vector::zeros(2)]) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains('0')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = Vector::from_vec(vec![0.7, -1.0]);
        assert_eq!(add_noise(&v, 0.0, &mut rng).unwrap(), v);
        assert!(add_noise(&v, -1.0, &mut rng).is_err());

        let sigma = 0.25;
        let draws = 1_000_000;
        let noisy = add_noise(&Vector::from_element(draws, 0.7), sigma, &mut rng).unwrap();
        let mean = noisy.mean();
        let var = noisy.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!((mean - 0.7).abs() <= 5.0 * sigma / 1e3);
        assert!((var / (sigma * sigma) - 1.0).abs() <= 0.02);
    }

    #[test]
    fn slopes_of_power_laws() {
        let n: Vec<f64> = (1..=8).map(|k| 5.0 * k as f64).collect();
        let sqrt: Vec<f64> = n.iter().map(|v| 3.0 * v.sqrt()).collect();
        assert!((log_log_slope(&n, &sqrt).unwrap() - 0.5).abs() < 1e-12);
        let flat = vec![2.0; n.len()];
        assert!(log_log_slope(&n, &flat).unwrap().abs() < 1e-12);
        let lin: Vec<f64> = n.iter().map(|v| 0.1 * v).collect();
        assert!((log_log_slope(&n, &lin).unwrap() - 1.0).abs() < 1e-12);
        assert!(log_log_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn growth_rate_needs_four_cells() {
        let mut table = ErrorTable::default();
        for (k, n) in [10usize, 20, 40, 80].into_iter().enumerate() {
            table.push(ErrorRow::ok("deim", n, n, 0, 1e-3 * (n as f64).sqrt(), 1.0));
            if k < 3 {
                table.push(ErrorRow::ok("qdeim", n, n, 0, 1.0, 1.0));
            }
        }
        assert!((growth_rate(&table, "deim", (10, 80)).unwrap() - 0.5).abs() < 1e-12);
        assert!(growth_rate(&table, "qdeim", (10, 80)).is_err());
    }
}
