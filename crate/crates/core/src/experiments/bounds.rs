use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::derive_seed;
use super::normal;
use crate::error::{Error, Result};
use crate::interpolant::{coherence, BoundParameters, Interpolant};
use crate::linalg::{min_singular_value, Matrix, Vector};
use crate::parallel::par_map;
use crate::pod::Basis;
use crate::selection::PointSet;

/// Sampling levels as multiples of the base number of points.
const LEVELS: [usize; 3] = [1, 2, 4];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierConfig {
    pub big_n: usize,
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub sigma: f64,
    /// Noise draws per trial and level.
    pub draws: usize,
    /// `||f - U U^T f||` of the synthetic test function.
    pub projection_error: f64,
    /// Base number of samples; `None` takes `floor(T) + 1` per basis, the
    /// smallest count meeting the hypothesis `m >= T`.
    pub base_points: Option<usize>,
}

impl VerifierConfig {
    pub fn new(big_n: usize, n: usize, delta: f64, trials: usize, seed: u64) -> Self {
        Self {
            big_n,
            n,
            delta,
            trials,
            seed,
            sigma: 1e-3,
            draws: 20,
            projection_error: 1e-3,
            base_points: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.n == 0 || self.n > self.big_n {
            return bad(format!("need 1 <= n <= N, got n = {}, N = {}", self.n, self.big_n));
        }
        if self.trials == 0 || self.draws == 0 {
            return bad("trials and draws must be >= 1".into());
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.projection_error >= 0.0) || !self.projection_error.is_finite() {
            return bad(format!("projection error must be >= 0, got {}", self.projection_error));
        }
        if self.base_points == Some(0) {
            return bad("base number of points must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub m: usize,
    pub gamma: f64,
    /// Mean of `||f - f_hat||` over the noise draws.
    pub mean_error: f64,
    /// Mean of `||U (P^T U)^+ P^T eps||` over the noise draws.
    pub noise_contribution: f64,
    pub projection_term: f64,
    pub noise_term: f64,
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub mu: f64,
    pub threshold: f64,
    /// `||((P^T U)^T P^T U)^{-1}||_2` at the base level.
    pub inverse_gram_norm: f64,
    pub eigen_bound: f64,
    pub eigen_holds: bool,
    pub levels: Vec<LevelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub multiplier: usize,
    pub mean_m: f64,
    pub mean_error: f64,
    pub mean_noise_contribution: f64,
    pub mean_bound: f64,
    pub mean_noise_term: f64,
    pub exceedances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub big_n: usize,
    pub n: usize,
    pub delta: f64,
    pub sigma: f64,
    pub trials: usize,
    pub draws: usize,
    pub projection_error: f64,
    pub eigen_violations: usize,
    pub eigen_failure_frequency: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / trials)`
    pub eigen_allowed_frequency: f64,
    pub proposition_exceedances: usize,
    pub proposition_exceedance_frequency: f64,
    /// `2 delta + 3 sqrt(2 delta (1 - 2 delta) / (trials * levels))`
    pub proposition_allowed_frequency: f64,
    /// Whether the mean noise contribution strictly decreases across levels.
    pub noise_contribution_decreasing: bool,
    pub levels: Vec<LevelSummary>,
    pub trial_records: Vec<TrialRecord>,
}

impl BoundReport {
    pub fn eigen_bound_ok(&self) -> bool {
        self.eigen_failure_frequency <= self.eigen_allowed_frequency
    }

    pub fn proposition_ok(&self) -> bool {
        self.proposition_exceedance_frequency <= self.proposition_allowed_frequency
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bound report serializes")
    }
}

fn binomial_margin(p: f64, count: usize) -> f64 {
    let p = p.min(1.0);
    p + 3.0 * (p * (1.0 - p) / count as f64).sqrt()
}

/// Orthonormal basis of the span of an `N x n` Gaussian matrix.
pub(crate) fn random_orthonormal(big_n: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Basis> {
    let g = Matrix::from_fn(big_n, n, |_, _| StandardNormal.sample(rng));
    Basis::from_orthonormal(g.qr().q(), 1e-12)
}

fn run_trial(cfg: &VerifierConfig, trial: usize) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial as u64]));
    let basis = random_orthonormal(cfg.big_n, cfg.n, &mut rng)?;
    let mu = coherence(&basis);
    let threshold = crate::interpolant::sample_threshold(cfg.n, mu, cfg.delta);
    let base = cfg.base_points.unwrap_or(threshold.floor() as usize + 1);

    // synthetic f = U a + g with g orthogonal to U and ||g|| prescribed
    let u = basis.u();
    let a = Vector::from_fn(cfg.n, |_, _| StandardNormal.sample(&mut rng));
    let z = Vector::from_fn(cfg.big_n, |_, _| StandardNormal.sample(&mut rng));
    let g = &z - u * u.tr_mul(&z);
    let g = g.normalize() * cfg.projection_error;
    let f = u * a + g;
    let noise = normal(cfg.sigma)?;

    let mut levels = Vec::with_capacity(LEVELS.len());
    let mut base_gram = None;
    for &k in &LEVELS {
        let m = base * k;
        let params = BoundParameters::new(cfg.big_n, cfg.n, m, cfg.delta, mu, cfg.sigma)?;
        params.check_hypotheses()?;
        let indices: Vec<usize> = (0..m).map(|_| rand::Rng::random_range(&mut rng, 0..cfg.big_n)).collect();
        let points = PointSet::with_replacement(indices, cfg.big_n)?;
        let interp = Interpolant::new(basis.clone(), points)?;
        if base_gram.is_none() {
            let s = min_singular_value(interp.sampled_basis())?;
            base_gram = Some((1.0 / (s * s), params.eigen_bound()?));
        }
        let sampled = interp.sample(&f);
        let (_, clean) = interp.approximate(&sampled)?;
        let mut err_total = 0.0;
        let mut noise_total = 0.0;
        for _ in 0..cfg.draws {
            // one value per grid component, so repeated rows see the same noise
            let eps = Vector::from_fn(cfg.big_n, |_, _| noise.sample(&mut rng));
            let sampled_eps = interp.sample(&eps);
            let (_, lifted) = interp.approximate(&sampled_eps)?;
            err_total += (&f - (&clean + &lifted)).norm();
            noise_total += lifted.norm();
        }
        let projection_term = params.projection_term(cfg.projection_error)?;
        let noise_term = params.noise_term()?;
        let mean_error = err_total / cfg.draws as f64;
        let bound = projection_term + noise_term;
        levels.push(LevelRecord {
            m,
            gamma: params.gamma,
            mean_error,
            noise_contribution: noise_total / cfg.draws as f64,
            projection_term,
            noise_term,
            bound,
            within_bound: mean_error <= bound,
        });
    }
    let (inverse_gram_norm, eigen_bound) = base_gram.expect("at least one level");
    Ok(TrialRecord {
        trial,
        mu,
        threshold,
        inverse_gram_norm,
        eigen_bound,
        eigen_holds: inverse_gram_norm <= eigen_bound,
        levels,
    })
}

/// Monte-Carlo check of the eigenvalue lemma and the expected-error
/// proposition for uniform sampling with replacement.
///
/// Each trial draws a random orthonormal basis (its own coherence and
/// `gamma`), samples `m, 2m, 4m` rows and averages the regression error of a
/// synthetic function over noise draws.
pub fn verify_probabilistic_bounds(cfg: &VerifierConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let ids: Vec<usize> = (0..cfg.trials).collect();
    let records = par_map(&ids, |&t| run_trial(cfg, t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let trials = records.len() as f64;
    let eigen_violations = records.iter().filter(|r| !r.eigen_holds).count();
    let levels: Vec<LevelSummary> = LEVELS
        .iter()
        .enumerate()
        .map(|(j, &multiplier)| {
            let mean = |g: &dyn Fn(&LevelRecord) -> f64| records.iter().map(|r| g(&r.levels[j])).sum::<f64>() / trials;
            LevelSummary {
                multiplier,
                mean_m: mean(&|l| l.m as f64),
                mean_error: mean(&|l| l.mean_error),
                mean_noise_contribution: mean(&|l| l.noise_contribution),
                mean_bound: mean(&|l| l.bound),
                mean_noise_term: mean(&|l| l.noise_term),
                exceedances: records.iter().filter(|r| !r.levels[j].within_bound).count(),
            }
        })
        .collect();
    let proposition_exceedances: usize = levels.iter().map(|l| l.exceedances).sum();
    let checks = records.len() * LEVELS.len();
    let noise_contribution_decreasing = levels
        .windows(2)
        .all(|w| w[1].mean_noise_contribution < w[0].mean_noise_contribution);
    Ok(BoundReport {
        big_n: cfg.big_n,
        n: cfg.n,
        delta: cfg.delta,
        sigma: cfg.sigma,
        trials: cfg.trials,
        draws: cfg.draws,
        projection_error: cfg.projection_error,
        eigen_violations,
        eigen_failure_frequency: eigen_violations as f64 / trials,
        eigen_allowed_frequency: binomial_margin(cfg.delta, cfg.trials),
        proposition_exceedances,
        proposition_exceedance_frequency: proposition_exceedances as f64 / checks as f64,
        proposition_allowed_frequency: binomial_margin(2.0 * cfg.delta, checks),
        noise_contribution_decreasing,
        levels,
        trial_records: records,
    })
}
