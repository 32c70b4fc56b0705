use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use odeim::experiments::{
    run_pde_experiment, run_toy_experiment, snapshot_cache_paths, verify_probabilistic_bounds,
    ErrorTable, ExperimentConfig, ModelConfig, Oversampling, SnapshotSource, VerifierConfig,
};
use odeim::interpolant::Interpolant;
use odeim::linalg::io::read_matrix;
use odeim::models::FullOrderModel;
use odeim::pod::Basis;
use odeim::selection::{select, Method};

/// Orthonormality tolerance for bases read from disk.
const BASIS_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "odeim", version, about = "Empirical interpolation point selection and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select interpolation points for a basis read from a matrix file.
    Select(SelectArgs),
    /// Run the parametrized-function sweep.
    Toy(ToyArgs),
    /// Run the diffusion-reaction reduced-model sweep.
    Pde(PdeArgs),
    /// Monte-Carlo check of the uniform-sampling bounds.
    VerifyBounds(BoundArgs),
}

#[derive(Args)]
struct SelectArgs {
    /// Basis matrix (text or DMAT), N x n with orthonormal columns.
    #[arg(long)]
    basis: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Number of points for the oversampling methods (default n).
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flags shared by the two experiment subcommands.
#[derive(Args)]
struct SweepArgs {
    /// Comma list (`5,10,20`) or range `lo:hi:step`.
    #[arg(long, value_parser = parse_grid)]
    n_grid: Option<Grid>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated method names.
    #[arg(long, value_parser = parse_methods)]
    methods: Option<MethodList>,
    /// Start from the full-size defaults instead of the desk-sized ones.
    #[arg(long)]
    full_scale: bool,
    /// key=value manifest; explicit flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for experiment cells (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ToyArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long)]
    oversample_factor: Option<f64>,
    /// Number of grid points in the spatial domain.
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    training: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
}

#[derive(Args)]
struct PdeArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long)]
    oversample_fraction: Option<f64>,
    /// Mesh divisions per side.
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    pod_dim: Option<usize>,
    #[arg(long)]
    snapshot_grid: Option<usize>,
    #[arg(long)]
    test_grid: Option<usize>,
    /// Abort when a full-order solve fails instead of dropping the parameter.
    #[arg(long)]
    strict_snapshots: bool,
    /// Snapshot cache directory (default: `<out-dir>/snapshots`).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Print the problem size and the number of extra points, then exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long = "N")]
    big_n: usize,
    #[arg(long = "n")]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    sigma: Option<f64>,
    /// Base number of samples (default: the smallest admissible).
    #[arg(long)]
    m: Option<usize>,
    /// Noise draws per trial and level.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    projection_error: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
struct MethodList(Vec<Method>);

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: odeim::Error| e.to_string())
}

fn parse_methods(s: &str) -> Result<MethodList, String> {
    let methods = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(parse_method)
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err("empty method list".into());
    }
    Ok(MethodList(methods))
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let grid: Vec<usize> = if let Some((lo, rest)) = s.split_once(':') {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if step == 0 || lo > hi {
            return Err(format!("range {s:?} needs lo <= hi and step >= 1"));
        }
        (lo..=hi).step_by(step).collect()
    } else {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(num)
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err("empty grid".into());
    }
    Ok(Grid(grid))
}

/// Exit status for a library error: 3 for numerical infeasibility, 2 otherwise.
fn fail(err: odeim::Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn emit(out: Option<&Path>, text: &str) -> odeim::Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_select(args: SelectArgs) -> odeim::Result<()> {
    let u = read_matrix(&args.basis)?;
    let basis = Basis::from_orthonormal(u, BASIS_TOL)?;
    let m = args.points.unwrap_or(basis.dim());
    let points = select(args.method, &basis, m, args.seed)?;
    // Rejects point sets that do not determine the coefficients.
    Interpolant::new(basis, points.clone())?;
    let lines: Vec<String> = points.indices().iter().map(|i| i.to_string()).collect();
    emit(args.out.as_deref(), &format!("{}\n", lines.join("\n")))
}

/// Defaults, then the manifest, then the explicit flags.
fn base_config(sweep: &SweepArgs, desk: ExperimentConfig, full: ExperimentConfig) -> odeim::Result<ExperimentConfig> {
    let mut cfg = if sweep.full_scale { full } else { desk };
    if let Some(path) = &sweep.config {
        cfg = cfg.with_manifest(&fs::read_to_string(path)?)?;
    }
    if let Some(grid) = &sweep.n_grid {
        cfg.n_grid = grid.0.clone();
    }
    if let Some(sigma) = sweep.noise {
        cfg.sigma = sigma;
    }
    if let Some(r) = sweep.replicates {
        cfg.replicates = r;
    }
    if let Some(seed) = sweep.seed {
        cfg.seed = seed;
    }
    if let Some(methods) = &sweep.methods {
        cfg.methods = methods.0.clone();
    }
    Ok(cfg)
}

fn configure_jobs(jobs: Option<usize>) -> odeim::Result<()> {
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(odeim::Error::InvalidArgument("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| odeim::Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn write_results(dir: &Path, cfg: &ExperimentConfig, table: &ErrorTable) -> odeim::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("manifest.txt"), cfg.to_resolved_manifest())?;
    fs::write(dir.join("results.csv"), table.to_csv())?;
    fs::write(dir.join("results.json"), table.to_json())?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn print_summary(table: &ErrorTable) {
    println!("method\tn\tm\tok\tmean_error\tselection_norm");
    for c in table.cells() {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"));
        println!(
            "{}\t{}\t{}\t{}/{}\t{}\t{}",
            c.method,
            c.n,
            c.m,
            c.succeeded,
            c.succeeded + c.failed,
            fmt(c.mean),
            fmt(c.selection_norm)
        );
    }
}

fn cmd_toy(args: ToyArgs) -> odeim::Result<()> {
    let mut cfg = base_config(&args.sweep, ExperimentConfig::toy_desk(), ExperimentConfig::toy_full())?;
    if let Some(k) = args.oversample_factor {
        cfg.oversampling = Oversampling::Factor(k);
    }
    if let ModelConfig::Toy(t) = &mut cfg.model {
        if let Some(v) = args.grid_size {
            t.grid_size = v;
        }
        if let Some(v) = args.training {
            t.training = v;
        }
        if let Some(v) = args.test {
            t.test = v;
        }
    }
    cfg.validate()?;
    configure_jobs(args.sweep.jobs)?;
    let out_dir = args.sweep.out_dir.clone().unwrap_or_else(|| PathBuf::from("results/toy"));

    let start = Instant::now();
    let table = run_toy_experiment(&cfg)?;
    eprintln!("toy sweep: {} rows in {:.1}s", table.rows.len(), start.elapsed().as_secs_f64());
    write_results(&out_dir, &cfg, &table)?;
    print_summary(&table);
    Ok(())
}

fn cmd_pde(args: PdeArgs) -> odeim::Result<()> {
    let mut cfg = base_config(&args.sweep, ExperimentConfig::pde_desk(), ExperimentConfig::pde_full())?;
    if let Some(b) = args.oversample_fraction {
        cfg.oversampling = Oversampling::Fraction(b);
    }
    if let ModelConfig::Pde(p) = &mut cfg.model {
        if let Some(v) = args.mesh {
            p.mesh = v;
        }
        if let Some(v) = args.pod_dim {
            p.pod_dim = v;
        }
        if let Some(v) = args.snapshot_grid {
            p.snapshot_grid = v;
        }
        if let Some(v) = args.test_grid {
            p.test_grid = v;
        }
        if args.strict_snapshots {
            p.strict_snapshots = true;
        }
    }
    cfg.validate()?;
    let ModelConfig::Pde(pde) = cfg.model.clone() else {
        unreachable!("PDE defaults always carry a PDE model")
    };

    if args.dry_run {
        let big_n = FullOrderModel::new(pde.mesh)?.dim();
        let n = cfg.n_grid[0];
        let m = cfg.oversampling.points(Method::OdeimE, n, big_n);
        println!("N={big_n}");
        println!("m-n={}", m - n);
        return Ok(());
    }

    configure_jobs(args.sweep.jobs)?;
    let out_dir = args.sweep.out_dir.clone().unwrap_or_else(|| PathBuf::from("results/pde"));
    let cache_dir = args.cache_dir.clone().unwrap_or_else(|| out_dir.join("snapshots"));
    fs::create_dir_all(&cache_dir)?;

    let start = Instant::now();
    let mut outcome = run_pde_experiment(&cfg, Some(&cache_dir))?;
    let [states_path, ..] = snapshot_cache_paths(&cache_dir, pde.mesh, pde.snapshot_grid);
    match outcome.snapshot_source {
        SnapshotSource::Cache => eprintln!("snapshot cache hit: {}", states_path.display()),
        SnapshotSource::Generated => eprintln!("generated snapshots, cached at {}", states_path.display()),
    }
    for xi in &outcome.dropped_snapshots {
        eprintln!("dropped snapshot parameter ({}, {}): no full-order solution", xi[0], xi[1]);
    }
    for xi in &outcome.dropped_tests {
        eprintln!("dropped test parameter ({}, {}): no full-order solution", xi[0], xi[1]);
    }
    eprintln!(
        "pde sweep: N = {}, {} test parameters, Galerkin output error {:e}, {:.1}s",
        outcome.big_n,
        outcome.test_parameters,
        outcome.galerkin_error,
        start.elapsed().as_secs_f64()
    );
    outcome
        .table
        .notes
        .push(format!("galerkin_output_error={:e}", outcome.galerkin_error));
    write_results(&out_dir, &cfg, &outcome.table)?;
    print_summary(&outcome.table);
    Ok(())
}

fn cmd_verify_bounds(args: BoundArgs) -> odeim::Result<()> {
    let mut cfg = VerifierConfig::new(args.big_n, args.n, args.delta, args.trials, args.seed);
    if let Some(sigma) = args.sigma {
        cfg.sigma = sigma;
    }
    if let Some(draws) = args.draws {
        cfg.draws = draws;
    }
    if let Some(p) = args.projection_error {
        cfg.projection_error = p;
    }
    cfg.base_points = args.m;
    let report = verify_probabilistic_bounds(&cfg)?;
    eprintln!(
        "eigenvalue bound: {} violations ({:.4} <= {:.4}: {}); proposition: {} exceedances ({:.4} <= {:.4}: {})",
        report.eigen_violations,
        report.eigen_failure_frequency,
        report.eigen_allowed_frequency,
        report.eigen_bound_ok(),
        report.proposition_exceedances,
        report.proposition_exceedance_frequency,
        report.proposition_allowed_frequency,
        report.proposition_ok()
    );
    emit(args.out.as_deref(), &format!("{}\n", report.to_json()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Toy(a) => cmd_toy(a),
        Command::Pde(a) => cmd_pde(a),
        Command::VerifyBounds(a) => cmd_verify_bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
