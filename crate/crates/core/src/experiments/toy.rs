use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use super::config::{derive_seed, ExperimentConfig, ModelConfig, ToyConfig};
use super::normal;
use super::table::{ErrorRow, ErrorTable};
use crate::error::{Error, Result};
use crate::interpolant::{deim_noise_bound, Interpolant};
use crate::linalg::{select_rows, Matrix};
use crate::models::{toy_function, ToyFunctionSpec};
use crate::parallel::par_map;
use crate::pod::{pod_basis, Basis, SnapshotMatrix};
use crate::selection::{qdeim, select, Method, PointSet};

const STREAM_TEST: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_SELECT: u64 = 3;

/// Training snapshots and their POD basis, shared by all cells of a toy sweep.
#[derive(Debug, Clone)]
pub struct ToySetup {
    spec: ToyFunctionSpec,
    pod: Basis,
}

impl ToySetup {
    /// POD of `training` equidistant parameters, kept up to dimension `max_n`.
    pub fn new(cfg: &ToyConfig, max_n: usize) -> Result<Self> {
        let spec = ToyFunctionSpec::with_grid(cfg.grid_size);
        let columns = spec
            .training_parameters(cfg.training)
            .into_iter()
            .map(|xi| toy_function(&spec, xi))
            .collect::<Result<Vec<_>>>()?;
        let pod = pod_basis(&SnapshotMatrix::from_columns(&columns)?, max_n)?;
        Ok(Self { spec, pod })
    }

    pub fn spec(&self) -> &ToyFunctionSpec {
        &self.spec
    }

    pub fn basis(&self, n: usize) -> Result<Basis> {
        self.pod.truncate(n)
    }

    /// `count` parameters drawn uniformly from the parameter domain.
    pub fn test_parameters<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.spec.parameter_domain;
        (0..count).map(|_| rng.random_range(lo..=hi)).collect()
    }

    /// Test functions as columns.
    pub fn evaluate(&self, parameters: &[f64]) -> Result<Matrix> {
        let cols = parameters
            .iter()
            .map(|&xi| toy_function(&self.spec, xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_columns(&cols))
    }
}

struct CellOutcome {
    error: f64,
    selection_norm: f64,
    bound_holds: Option<bool>,
}

/// Regresses every column of `noisy` from its samples at the interpolant's
/// points and compares against `truth`.
fn evaluate_cell(interp: &Interpolant, truth: &Matrix, noisy: &Matrix, check_bound: bool) -> Result<CellOutcome> {
    let u = interp.basis().u();
    let samples = select_rows(noisy, interp.points().indices());
    let approx = u * (interp.pseudo_inverse() * samples);
    let error = super::averaged_relative_l2_columns(truth, &approx)?;
    let bound_holds = check_bound.then(|| {
        let coeffs = u.tr_mul(truth);
        let projected = u * coeffs;
        truth.column_iter().enumerate().all(|(k, f)| {
            let proj_err = (f - projected.column(k)).norm();
            let err = (f - approx.column(k)).norm();
            err <= interp.selection_norm() * proj_err + 1e-10 * f.norm()
        })
    });
    Ok(CellOutcome {
        error,
        selection_norm: interp.selection_norm(),
        bound_holds,
    })
}

fn selection_seed(master: u64, method: Method, n: usize, replicate: usize) -> u64 {
    let idx = Method::ALL.iter().position(|m| *m == method).unwrap_or(0) as u64;
    derive_seed(master, &[STREAM_SELECT, idx, n as u64, replicate as u64])
}

/// Noisy-regression error sweep over methods, `n` and replicates.
///
/// Per replicate, test parameters and one noise matrix are drawn from the
/// replicate's streams and shared across all `(method, n)` cells. Sampled
/// values are taken from the noisy test functions. With `sigma = 0` each row
/// records whether every per-parameter error met `||(P^T U)^+|| ||f - U U^T f||`.
pub fn run_toy_experiment(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    cfg.validate()?;
    let toy = match &cfg.model {
        ModelConfig::Toy(t) => t,
        ModelConfig::Pde(_) => {
            return Err(Error::InvalidArgument("toy experiment needs a toy model config".into()))
        }
    };
    let max_n = *cfg.n_grid.iter().max().unwrap();
    let setup = ToySetup::new(toy, max_n)?;
    let big_n = toy.grid_size;
    let bases: HashMap<usize, Basis> = cfg
        .n_grid
        .iter()
        .map(|&n| Ok((n, setup.basis(n)?)))
        .collect::<Result<_>>()?;

    let cells: Vec<(Method, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&method| cfg.n_grid.iter().map(move |&n| (method, n)))
        .collect();
    let select_cell = |&(method, n): &(Method, usize), replicate: usize| -> Result<Interpolant> {
        let m = cfg.oversampling.points(method, n, big_n);
        let basis = &bases[&n];
        let points = select(method, basis, m, selection_seed(cfg.seed, method, n, replicate))?;
        Interpolant::new(basis.clone(), points)
    };
    // deterministic selections do not depend on the replicate
    let fixed: Vec<Option<Result<Interpolant>>> = par_map(&cells, |cell| {
        (!cell.0.is_randomized()).then(|| select_cell(cell, 0))
    });

    let noise = normal(cfg.sigma)?;
    let mut table = ErrorTable::default();
    for replicate in 0..cfg.replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[replicate as u64, STREAM_TEST]));
        let params = setup.test_parameters(toy.test, &mut rng);
        let truth = setup.evaluate(&params)?;
        let noisy = if cfg.sigma > 0.0 {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[replicate as u64, STREAM_NOISE]));
            let eps = Matrix::from_fn(truth.nrows(), truth.ncols(), |_, _| noise.sample(&mut rng));
            &truth + eps
        } else {
            truth.clone()
        };
        let indexed: Vec<usize> = (0..cells.len()).collect();
        let rows = par_map(&indexed, |&k| {
            let (method, n) = cells[k];
            let m = cfg.oversampling.points(method, n, big_n);
            let finish = |interp: &Interpolant| match evaluate_cell(interp, &truth, &noisy, cfg.sigma == 0.0) {
                Ok(o) => {
                    let mut row = ErrorRow::ok(method.name(), n, m, replicate, o.error, o.selection_norm);
                    row.bound_holds = o.bound_holds;
                    row
                }
                Err(e) => ErrorRow::failed(method.name(), n, m, replicate, &e),
            };
            match &fixed[k] {
                Some(Ok(interp)) => finish(interp),
                Some(Err(e)) => ErrorRow::failed(method.name(), n, m, replicate, e),
                None => match select_cell(&cells[k], replicate) {
                    Ok(interp) => finish(&interp),
                    Err(e) => ErrorRow::failed(method.name(), n, m, replicate, &e),
                },
            }
        });
        for row in rows {
            table.push(row);
        }
    }
    table.sort();
    Ok(table)
}

/// Mean error of QDEIM interpolation over noise draws at one `(n, xi)`,
/// next to the a-priori bound in expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBoundSample {
    pub n: usize,
    pub parameter: f64,
    pub mean_error: f64,
    pub bound: f64,
}

/// For each `n` and parameter, averages `||f - U (P^T U)^{-1} P^T (f + eps)||`
/// over `draws` noise draws with QDEIM points.
pub fn noise_bound_check(
    setup: &ToySetup,
    n_grid: &[usize],
    parameters: &[f64],
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<NoiseBoundSample>> {
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be >= 1".into()));
    }
    let noise = normal(sigma)?;
    let truth = setup.evaluate(parameters)?;
    let big_n = truth.nrows();
    let per_n = par_map(n_grid, |&n| -> Result<Vec<NoiseBoundSample>> {
        let basis = setup.basis(n)?;
        let points: PointSet = qdeim(&basis)?;
        let interp = Interpolant::new(basis, points)?;
        let u = interp.basis().u();
        let projected = u * u.tr_mul(&truth);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[n as u64]));
        let mut out = Vec::with_capacity(parameters.len());
        for (k, &xi) in parameters.iter().enumerate() {
            let f = truth.column(k);
            let sampled = interp.sample(&f.into_owned());
            let mut total = 0.0;
            for _ in 0..draws {
                let noisy = sampled.map(|v| v + noise.sample(&mut rng));
                let (_, approx) = interp.approximate(&noisy)?;
                total += (f - approx).norm();
            }
            let proj = (f - projected.column(k)).norm();
            out.push(NoiseBoundSample {
                n,
                parameter: xi,
                mean_error: total / draws as f64,
                bound: deim_noise_bound(big_n, n, sigma, proj)?,
            });
        }
        Ok(out)
    });
    let mut samples = Vec::new();
    for chunk in per_n {
        samples.extend(chunk?);
    }
    Ok(samples)
}
