use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::selection::Method;

/// Number of sampling points for the oversampling methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oversampling {
    /// `m = ceil(kappa n)`
    Factor(f64),
    /// `m = n + ceil(beta N)`
    Fraction(f64),
}

impl Oversampling {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Oversampling::Factor(k) if !(k >= 1.0) || !k.is_finite() => Err(Error::InvalidArgument(
                format!("oversampling factor must be >= 1, got {k}"),
            )),
            Oversampling::Fraction(b) if !(0.0..=1.0).contains(&b) => Err(Error::InvalidArgument(
                format!("oversampling fraction must lie in [0, 1], got {b}"),
            )),
            _ => Ok(()),
        }
    }

    /// Points used by `method` at dimension `n` out of `big_n`, capped at `big_n`.
    pub fn points(&self, method: Method, n: usize, big_n: usize) -> usize {
        if !method.oversamples() {
            return n;
        }
        let m = match *self {
            Oversampling::Factor(k) => (k * n as f64).ceil() as usize,
            Oversampling::Fraction(b) => n + (b * big_n as f64).ceil() as usize,
        };
        m.clamp(n, big_n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub grid_size: usize,
    pub training: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub mesh: usize,
    /// Snapshots on a `snapshot_grid x snapshot_grid` tensor grid.
    pub snapshot_grid: usize,
    /// Test parameters at the cell midpoints of a `test_grid x test_grid` partition.
    pub test_grid: usize,
    pub pod_dim: usize,
    /// Abort instead of dropping parameters whose full-order solve fails.
    pub strict_snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Toy(ToyConfig),
    Pde(PdeConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub n_grid: Vec<usize>,
    pub oversampling: Oversampling,
    pub sigma: f64,
    pub replicates: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

fn step_grid(lo: usize, hi: usize, step: usize) -> Vec<usize> {
    (lo..=hi).step_by(step).collect()
}

impl ExperimentConfig {
    pub fn toy_desk() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            n_grid: step_grid(5, 100, 5),
            oversampling: Oversampling::Factor(2.0),
            sigma: 1e-6,
            replicates: 10,
            seed: 1,
            model: ModelConfig::Toy(ToyConfig {
                grid_size: 2048,
                training: 500,
                test: 500,
            }),
        }
    }

    pub fn toy_full() -> Self {
        Self {
            model: ModelConfig::Toy(ToyConfig {
                grid_size: 8192,
                training: 2500,
                test: 2500,
            }),
            ..Self::toy_desk()
        }
    }

    pub fn pde_desk() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            n_grid: step_grid(5, 40, 5),
            oversampling: Oversampling::Fraction(0.1),
            sigma: 1e-3,
            replicates: 10,
            seed: 1,
            model: ModelConfig::Pde(PdeConfig {
                mesh: 64,
                snapshot_grid: 10,
                test_grid: 5,
                pod_dim: 20,
                strict_snapshots: false,
            }),
        }
    }

    pub fn pde_full() -> Self {
        Self {
            model: ModelConfig::Pde(PdeConfig {
                mesh: 256,
                snapshot_grid: 40,
                test_grid: 5,
                pod_dim: 50,
                strict_snapshots: false,
            }),
            ..Self::pde_desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad(format!("n grid must be nonempty and positive, got {:?}", self.n_grid));
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("noise level must be >= 0, got {}", self.sigma));
        }
        self.oversampling.validate()?;
        match &self.model {
            ModelConfig::Toy(t) => {
                if t.grid_size < 2 || t.training == 0 || t.test == 0 {
                    return bad(format!("invalid toy sizes {t:?}"));
                }
                let max_n = *self.n_grid.iter().max().unwrap();
                if max_n > t.training.min(t.grid_size) {
                    return bad(format!(
                        "n = {max_n} exceeds the number of training snapshots {}",
                        t.training
                    ));
                }
            }
            ModelConfig::Pde(p) => {
                if p.mesh < 4 || p.snapshot_grid < 2 || p.test_grid == 0 || p.pod_dim == 0 {
                    return bad(format!("invalid PDE sizes {p:?}"));
                }
            }
        }
        Ok(())
    }

    /// Flat `key=value` manifest.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let grid: Vec<String> = self.n_grid.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "methods={}", methods.join(","));
        let _ = writeln!(out, "n_grid={}", grid.join(","));
        match self.oversampling {
            Oversampling::Factor(k) => writeln!(out, "oversample_factor={k}"),
            Oversampling::Fraction(b) => writeln!(out, "oversample_fraction={b}"),
        }
        .ok();
        let _ = writeln!(out, "noise={}", self.sigma);
        let _ = writeln!(out, "replicates={}", self.replicates);
        let _ = writeln!(out, "seed={}", self.seed);
        match &self.model {
            ModelConfig::Toy(t) => {
                let _ = writeln!(out, "model=toy");
                let _ = writeln!(out, "toy.grid_size={}", t.grid_size);
                let _ = writeln!(out, "toy.training={}", t.training);
                let _ = writeln!(out, "toy.test={}", t.test);
            }
            ModelConfig::Pde(p) => {
                let _ = writeln!(out, "model=pde");
                let _ = writeln!(out, "pde.mesh={}", p.mesh);
                let _ = writeln!(out, "pde.snapshot_grid={}", p.snapshot_grid);
                let _ = writeln!(out, "pde.test_grid={}", p.test_grid);
                let _ = writeln!(out, "pde.pod_dim={}", p.pod_dim);
                let _ = writeln!(out, "pde.strict_snapshots={}", p.strict_snapshots);
            }
        }
        out
    }

    /// Manifest followed by the per-replicate seeds, for logging next to results.
    pub fn to_resolved_manifest(&self) -> String {
        let mut out = self.to_manifest();
        for r in 0..self.replicates {
            let _ = writeln!(out, "derived.replicate_seed.{r}={}", derive_seed(self.seed, &[r as u64]));
        }
        out
    }

    /// Parses a manifest. Missing keys take the desk defaults of the named
    /// model; `derived.*` keys are ignored.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let map = parse_pairs(text)?;
        let model = map.get("model").map(String::as_str).unwrap_or("toy");
        let mut cfg = match model {
            "toy" => Self::toy_desk(),
            "pde" => Self::pde_desk(),
            other => return Err(Error::Parse(format!("unknown model {other:?}"))),
        };
        cfg.apply_pairs(&map)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides the fields named in `text`, keeping the rest of `self`.
    pub fn with_manifest(mut self, text: &str) -> Result<Self> {
        let map = parse_pairs(text)?;
        let current = match self.model {
            ModelConfig::Toy(_) => "toy",
            ModelConfig::Pde(_) => "pde",
        };
        if let Some(model) = map.get("model") {
            if model != current {
                return Err(Error::InvalidArgument(format!(
                    "manifest is for model {model:?}, expected {current:?}"
                )));
            }
        }
        self.apply_pairs(&map)?;
        Ok(self)
    }

    fn apply_pairs(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in map {
            match key.as_str() {
                "model" => {}
                "methods" => self.methods = parse_list(value)?,
                "n_grid" => self.n_grid = parse_list(value)?,
                "oversample_factor" => self.oversampling = Oversampling::Factor(parse_value(key, value)?),
                "oversample_fraction" => {
                    self.oversampling = Oversampling::Fraction(parse_value(key, value)?)
                }
                "noise" => self.sigma = parse_value(key, value)?,
                "replicates" => self.replicates = parse_value(key, value)?,
                "seed" => self.seed = parse_value(key, value)?,
                k if k.starts_with("derived.") => {}
                k => match (&mut self.model, k.split_once('.')) {
                    (ModelConfig::Toy(t), Some(("toy", field))) => match field {
                        "grid_size" => t.grid_size = parse_value(key, value)?,
                        "training" => t.training = parse_value(key, value)?,
                        "test" => t.test = parse_value(key, value)?,
                        _ => return Err(unknown_key(key)),
                    },
                    (ModelConfig::Pde(p), Some(("pde", field))) => match field {
                        "mesh" => p.mesh = parse_value(key, value)?,
                        "snapshot_grid" => p.snapshot_grid = parse_value(key, value)?,
                        "test_grid" => p.test_grid = parse_value(key, value)?,
                        "pod_dim" => p.pod_dim = parse_value(key, value)?,
                        "strict_snapshots" => p.strict_snapshots = parse_value(key, value)?,
                        _ => return Err(unknown_key(key)),
                    },
                    _ => return Err(unknown_key(key)),
                },
            }
        }
        Ok(())
    }
}

fn unknown_key(key: &str) -> Error {
    Error::Parse(format!("unknown manifest key {key:?}"))
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("line {}: duplicate key {}", lineno + 1, k.trim())));
        }
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("invalid value {value:?} for {key}")))
}

pub(crate) fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e: T::Err| Error::Parse(format!("{s:?}: {e}"))))
        .collect()
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed of `master` for the stream labelled by `path`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn with_manifest_keeps_unnamed_fields() {
        let cfg = ExperimentConfig::toy_full().with_manifest("noise=0\nreplicates=2\n").unwrap();
        assert_eq!(cfg.sigma, 0.0);
        assert_eq!(cfg.replicates, 2);
        assert_eq!(cfg.model, ExperimentConfig::toy_full().model);
        assert!(ExperimentConfig::toy_desk().with_manifest("model=pde\n").is_err());
    }

    #[test]
    fn manifest_round_trip() {
        for cfg in [
            ExperimentConfig::toy_desk(),
            ExperimentConfig::pde_full(),
            ExperimentConfig {
                sigma: 0.0,
                oversampling: Oversampling::Factor(1.5),
                methods: vec![Method::Qdeim, Method::OdeimE],
                ..ExperimentConfig::toy_full()
            },
        ] {
            let text = cfg.to_resolved_manifest();
            assert_eq!(ExperimentConfig::from_manifest(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn manifest_errors() {
        assert!(ExperimentConfig::from_manifest("model=toy\nbogus=1").is_err());
        assert!(ExperimentConfig::from_manifest("model=toy\npde.mesh=4").is_err());
        assert!(ExperimentConfig::from_manifest("replicates=0").is_err());
        assert!(ExperimentConfig::from_manifest("methods=qdeim,nosuch").is_err());
        assert!(ExperimentConfig::from_manifest("seed").is_err());
        let cfg = ExperimentConfig::from_manifest("# comment\nmodel=pde\npde.mesh=32\n").unwrap();
        match cfg.model {
            ModelConfig::Pde(p) => assert_eq!(p.mesh, 32),
            _ => panic!(),
        }
    }

    #[test]
    fn oversampling_rules() {
        assert_eq!(Oversampling::Factor(2.0).points(Method::OdeimE, 7, 100), 14);
        assert_eq!(Oversampling::Factor(2.0).points(Method::Deim, 7, 100), 7);
        assert_eq!(Oversampling::Fraction(0.1).points(Method::OdeimRand, 5, 3969), 5 + 397);
        assert_eq!(Oversampling::Fraction(0.1).points(Method::OdeimC, 20, 65025), 20 + 6503);
        assert_eq!(Oversampling::Factor(3.0).points(Method::OdeimD, 40, 100), 100);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(1, &[0]);
        assert_eq!(a, derive_seed(1, &[0]));
        assert_ne!(a, derive_seed(1, &[1]));
        assert_ne!(a, derive_seed(2, &[0]));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
    }
}
