use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{derive_seed, ExperimentConfig, ModelConfig, PdeConfig};
use super::table::{ErrorRow, ErrorTable};
use crate::error::{Error, Result};
use crate::interpolant::Interpolant;
use crate::linalg::{io, Vector};
use crate::models::{
    attach_hyper_reduction, build_rom, generate_snapshots, midpoint_grid, parameter_grid, solve_rom,
    FullOrderModel, NewtonConfig, Noise, Parameter, PdeSnapshots, ReducedModel, PARAMETER_BOUND,
};
use crate::parallel::par_map;
use crate::pod::{pod_basis, Basis, SnapshotMatrix};
use crate::selection::{select, Method};

const STREAM_SELECT: u64 = 11;
const STREAM_NOISE: u64 = 12;

/// Solves the full model at every parameter; failures are either returned as
/// an error naming the parameter (`strict`) or collected.
fn solve_all(
    model: &FullOrderModel,
    parameters: &[Parameter],
    cfg: &NewtonConfig,
    strict: bool,
) -> Result<(Vec<Parameter>, Vec<Vector>, Vec<Parameter>)> {
    let results = par_map(parameters, |&xi| model.solve(xi, cfg).map(|r| r.solution));
    let mut kept = Vec::new();
    let mut states = Vec::new();
    let mut dropped = Vec::new();
    for (&xi, res) in parameters.iter().zip(results) {
        match res {
            Ok(x) => {
                kept.push(xi);
                states.push(x);
            }
            Err(e) if strict => return Err(annotate(e, xi)),
            Err(_) => dropped.push(xi),
        }
    }
    Ok((kept, states, dropped))
}

fn annotate(e: Error, xi: Parameter) -> Error {
    match e {
        Error::NonConvergence { iterations, residual } => Error::Hypothesis(format!(
            "full-order solve at parameter ({}, {}) did not converge after {iterations} iterations (residual {residual:e})",
            xi[0], xi[1]
        )),
        other => other,
    }
}

/// Where snapshot data came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotSource {
    Generated,
    Cache,
}

/// `(states, nonlinear, parameters)` cache files for a mesh and snapshot grid.
pub fn snapshot_cache_paths(dir: &Path, mesh: usize, grid: usize) -> [PathBuf; 3] {
    let stem = format!("snapshots-mesh{mesh}-grid{grid}");
    [
        dir.join(format!("{stem}-states.dmat")),
        dir.join(format!("{stem}-nonlinear.dmat")),
        dir.join(format!("{stem}-parameters.txt")),
    ]
}

fn format_parameters(kept: &[Parameter], dropped: &[Parameter]) -> String {
    let mut out = String::new();
    for (tag, list) in [("kept", kept), ("dropped", dropped)] {
        for xi in list {
            out.push_str(&format!("{tag} {} {}\n", xi[0], xi[1]));
        }
    }
    out
}

fn parse_parameters(text: &str) -> Result<(Vec<Parameter>, Vec<Parameter>)> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("parameter line {line:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let xi = [parts[1].parse().map_err(|_| bad())?, parts[2].parse().map_err(|_| bad())?];
        match parts[0] {
            "kept" => kept.push(xi),
            "dropped" => dropped.push(xi),
            _ => return Err(bad()),
        }
    }
    Ok((kept, dropped))
}

/// Snapshots over the `grid x grid` parameter grid, read from `cache_dir`
/// when present and written there after generation.
pub fn load_or_generate_snapshots(
    model: &FullOrderModel,
    grid: usize,
    newton: &NewtonConfig,
    strict: bool,
    cache_dir: Option<&Path>,
) -> Result<(PdeSnapshots, Vec<Parameter>, SnapshotSource)> {
    if let Some(dir) = cache_dir {
        let [states, nonlinear, params] = snapshot_cache_paths(dir, model.divisions(), grid);
        if states.exists() && nonlinear.exists() && params.exists() {
            let (kept, dropped) = parse_parameters(&fs::read_to_string(&params)?)?;
            if strict && !dropped.is_empty() {
                let xi = dropped[0];
                return Err(Error::Hypothesis(format!(
                    "cached snapshot grid lacks parameter ({}, {}) whose full-order solve did not converge",
                    xi[0], xi[1]
                )));
            }
            let snaps = PdeSnapshots {
                parameters: kept,
                states: SnapshotMatrix::new(io::read_matrix(&states)?)?,
                nonlinear: SnapshotMatrix::new(io::read_matrix(&nonlinear)?)?,
            };
            if snaps.states.full_dim() != model.dim() || snaps.states.count() != snaps.parameters.len() {
                return Err(Error::Dimension("snapshot cache does not match the model".into()));
            }
            return Ok((snaps, dropped, SnapshotSource::Cache));
        }
    }
    let all = parameter_grid(grid, PARAMETER_BOUND);
    let (kept, _, dropped) = solve_all(model, &all, newton, strict)?;
    if kept.is_empty() {
        return Err(Error::InvalidArgument("no snapshot parameter admits a full-order solution".into()));
    }
    let snaps = generate_snapshots(model, &kept, newton)?;
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir)?;
        let [states, nonlinear, params] = snapshot_cache_paths(dir, model.divisions(), grid);
        io::write_binary(&states, snaps.states.data())?;
        io::write_binary(&nonlinear, snaps.nonlinear.data())?;
        fs::write(&params, format_parameters(&snaps.parameters, &dropped))?;
    }
    Ok((snaps, dropped, SnapshotSource::Generated))
}

/// Offline data of a PDE sweep: Galerkin ROM, nonlinear POD and reference outputs.
#[derive(Debug, Clone)]
pub struct PdeSetup {
    pub model: FullOrderModel,
    pub rom: ReducedModel,
    pub nonlinear_pod: Basis,
    pub test_parameters: Vec<Parameter>,
    /// Full-order outputs at the test parameters.
    pub reference_outputs: Vec<Vector>,
    pub dropped_snapshots: Vec<Parameter>,
    pub dropped_tests: Vec<Parameter>,
    pub snapshot_source: SnapshotSource,
}

impl PdeSetup {
    pub fn new(pde: &PdeConfig, max_n: usize, cache_dir: Option<&Path>) -> Result<Self> {
        let newton = NewtonConfig::default();
        let model = FullOrderModel::new(pde.mesh)?;
        let (snaps, dropped_snapshots, snapshot_source) =
            load_or_generate_snapshots(&model, pde.snapshot_grid, &newton, pde.strict_snapshots, cache_dir)?;
        let rom = build_rom(&model, &snaps.states, pde.pod_dim)?;
        let nonlinear_pod = pod_basis(&snaps.nonlinear, max_n)?;
        let tests = midpoint_grid(pde.test_grid, PARAMETER_BOUND);
        let (test_parameters, states, dropped_tests) = solve_all(&model, &tests, &newton, pde.strict_snapshots)?;
        if test_parameters.is_empty() {
            return Err(Error::InvalidArgument("no test parameter admits a full-order solution".into()));
        }
        let idx = model.output_indices();
        let reference_outputs = states
            .iter()
            .map(|x| Vector::from_iterator(idx.len(), idx.iter().map(|&k| x[k])))
            .collect();
        Ok(Self {
            model,
            rom,
            nonlinear_pod,
            test_parameters,
            reference_outputs,
            dropped_snapshots,
            dropped_tests,
            snapshot_source,
        })
    }

    /// Averaged relative output error of `rom` over the test parameters.
    pub fn output_error(&self, rom: &ReducedModel, sigma: f64, seed: u64) -> Result<f64> {
        let newton = NewtonConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut outputs = Vec::with_capacity(self.test_parameters.len());
        for &xi in &self.test_parameters {
            let noise = (sigma > 0.0).then(|| Noise { sigma, rng: &mut rng });
            outputs.push(solve_rom(rom, xi, &newton, noise)?.outputs);
        }
        super::averaged_relative_l2(&self.reference_outputs, &outputs)
    }

    /// Output error of the POD-Galerkin ROM without hyper-reduction.
    pub fn galerkin_error(&self) -> Result<f64> {
        self.output_error(&self.rom, 0.0, 0)
    }

    pub fn hyper_reduced(&self, interp: Interpolant) -> Result<ReducedModel> {
        attach_hyper_reduction(self.rom.clone(), interp)
    }
}

/// Result of a PDE sweep with the offline bookkeeping needed for logging.
#[derive(Debug, Clone)]
pub struct PdeOutcome {
    pub table: ErrorTable,
    pub galerkin_error: f64,
    pub big_n: usize,
    pub test_parameters: usize,
    pub dropped_snapshots: Vec<Parameter>,
    pub dropped_tests: Vec<Parameter>,
    pub snapshot_source: SnapshotSource,
}

fn method_index(method: Method) -> u64 {
    Method::ALL.iter().position(|m| *m == method).unwrap_or(0) as u64
}

/// Noisy hyper-reduced ROM sweep over methods, `n` and replicates.
///
/// A cell fails if the selection is singular or any reduced solve diverges.
pub fn run_pde_experiment(cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<PdeOutcome> {
    cfg.validate()?;
    let pde = match &cfg.model {
        ModelConfig::Pde(p) => p,
        ModelConfig::Toy(_) => {
            return Err(Error::InvalidArgument("PDE experiment needs a PDE model config".into()))
        }
    };
    let max_n = *cfg.n_grid.iter().max().unwrap();
    let setup = PdeSetup::new(pde, max_n, cache_dir)?;
    let big_n = setup.model.dim();
    let bases: HashMap<usize, Basis> = cfg
        .n_grid
        .iter()
        .map(|&n| Ok((n, setup.nonlinear_pod.truncate(n)?)))
        .collect::<Result<_>>()?;

    let mut items = Vec::new();
    for &method in &cfg.methods {
        for &n in &cfg.n_grid {
            for replicate in 0..cfg.replicates {
                items.push((method, n, replicate));
            }
        }
    }
    let select_cell = |method: Method, n: usize, replicate: usize| -> Result<Interpolant> {
        let m = cfg.oversampling.points(method, n, big_n);
        let seed = derive_seed(cfg.seed, &[STREAM_SELECT, method_index(method), n as u64, replicate as u64]);
        Interpolant::new(bases[&n].clone(), select(method, &bases[&n], m, seed)?)
    };
    let mut fixed: HashMap<(u64, usize), Result<Interpolant>> = HashMap::new();
    let deterministic: Vec<(Method, usize)> = cfg
        .methods
        .iter()
        .filter(|m| !m.is_randomized())
        .flat_map(|&m| cfg.n_grid.iter().map(move |&n| (m, n)))
        .collect();
    for ((method, n), res) in deterministic
        .iter()
        .zip(par_map(&deterministic, |&(method, n)| select_cell(method, n, 0)))
    {
        fixed.insert((method_index(*method), *n), res);
    }

    let rows = par_map(&items, |&(method, n, replicate)| {
        let m = cfg.oversampling.points(method, n, big_n);
        let noise_seed = derive_seed(cfg.seed, &[STREAM_NOISE, method_index(method), n as u64, replicate as u64]);
        let run = |interp: &Interpolant| -> Result<(f64, f64)> {
            let rom = setup.hyper_reduced(interp.clone())?;
            Ok((setup.output_error(&rom, cfg.sigma, noise_seed)?, interp.selection_norm()))
        };
        let outcome = match fixed.get(&(method_index(method), n)) {
            Some(Ok(interp)) => run(interp),
            Some(Err(e)) => return ErrorRow::failed(method.name(), n, m, replicate, e),
            None => select_cell(method, n, replicate).and_then(|i| run(&i)),
        };
        match outcome {
            Ok((error, norm)) => ErrorRow::ok(method.name(), n, m, replicate, error, norm),
            Err(e) => ErrorRow::failed(method.name(), n, m, replicate, &e),
        }
    });

    let mut table = ErrorTable::default();
    for row in rows {
        table.push(row);
    }
    table.sort();
    let describe = |list: &[Parameter]| {
        list.iter()
            .map(|xi| format!("({}, {})", xi[0], xi[1]))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if !setup.dropped_snapshots.is_empty() {
        table.notes.push(format!(
            "snapshot parameters without a full-order solution: {}",
            describe(&setup.dropped_snapshots)
        ));
    }
    if !setup.dropped_tests.is_empty() {
        table.notes.push(format!(
            "test parameters without a full-order solution: {}",
            describe(&setup.dropped_tests)
        ));
    }
    Ok(PdeOutcome {
        galerkin_error: setup.galerkin_error()?,
        table,
        big_n,
        test_parameters: setup.test_parameters.len(),
        dropped_snapshots: setup.dropped_snapshots.clone(),
        dropped_tests: setup.dropped_tests.clone(),
        snapshot_source: setup.snapshot_source,
    })
}
