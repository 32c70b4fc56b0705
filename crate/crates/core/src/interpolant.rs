//! The gappy regression operator `f ~ U (P^T U)^+ P^T f` and its error bounds.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector, RANK_TOLERANCE};
use crate::pod::Basis;
use crate::selection::PointSet;

/// A basis together with sampling points and a precomputed `(P^T U)^+`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    basis: Basis,
    points: PointSet,
    sampled_basis: Matrix,
    /// `R^{-1} Q^T` from the thin QR of `sampled_basis` (n x m).
    pseudo_inverse: Matrix,
    smallest_singular_value: f64,
}

impl Interpolant {
    pub fn new(basis: Basis, points: PointSet) -> Result<Self> {
        let (m, n) = (points.len(), basis.dim());
        if m < n {
            return Err(Error::InvalidArgument(format!(
                "need at least n = {n} points, got {m}"
            )));
        }
        if let Some(&bad) = points.indices().iter().find(|&&p| p >= basis.full_dim()) {
            return Err(Error::InvalidArgument(format!(
                "point {bad} out of range for dimension {}",
                basis.full_dim()
            )));
        }
        let sampled_basis = basis.rows(points.indices());
        let s = linalg::singular_values(&sampled_basis)?;
        let (smax, smin) = (s[0], s[s.len() - 1]);
        if !(smin > RANK_TOLERANCE * smax) {
            return Err(Error::Singular(format!(
                "sampled basis is rank deficient (s_min = {smin:e}, s_max = {smax:e}); \
                 the point set does not determine the coefficients"
            )));
        }
        let qr = sampled_basis.clone().qr();
        let pseudo_inverse = qr
            .r()
            .solve_upper_triangular(&qr.q().transpose())
            .ok_or_else(|| Error::Singular("triangular factor of the sampled basis".into()))?;
        Ok(Self {
            basis,
            points,
            sampled_basis,
            pseudo_inverse,
            smallest_singular_value: smin,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    /// `P^T U` (m x n).
    pub fn sampled_basis(&self) -> &Matrix {
        &self.sampled_basis
    }

    /// `(P^T U)^+` (n x m).
    pub fn pseudo_inverse(&self) -> &Matrix {
        &self.pseudo_inverse
    }

    /// `||(P^T U)^+||_2 = 1 / s_min(P^T U)`.
    pub fn selection_norm(&self) -> f64 {
        1.0 / self.smallest_singular_value
    }

    /// Values of `f` at the sampling points, in point order.
    pub fn sample(&self, f: &Vector) -> Vector {
        Vector::from_iterator(self.points.len(), self.points.indices().iter().map(|&p| f[p]))
    }

    /// `(P^T U)^+ y`
    pub fn coefficients(&self, sampled_values: &Vector) -> Result<Vector> {
        if sampled_values.len() != self.points.len() {
            return Err(Error::Dimension(format!(
                "expected {} sampled values, got {}",
                self.points.len(),
                sampled_values.len()
            )));
        }
        Ok(&self.pseudo_inverse * sampled_values)
    }

    /// Coefficients and the full-length reconstruction `U c`.
    pub fn approximate(&self, sampled_values: &Vector) -> Result<(Vector, Vector)> {
        let c = self.coefficients(sampled_values)?;
        let full = self.basis.u() * &c;
        Ok((c, full))
    }

    /// Reconstructs every column of an `m x K` matrix of samples.
    pub fn approximate_many(&self, sampled_values: &Matrix) -> Result<Matrix> {
        if sampled_values.nrows() != self.points.len() {
            return Err(Error::Dimension(format!(
                "expected {} sampled rows, got {}",
                self.points.len(),
                sampled_values.nrows()
            )));
        }
        Ok(self.basis.u() * (&self.pseudo_inverse * sampled_values))
    }
}

/// `mu = (N / n) max_i ||u_i||^2` over the rows of `u`.
pub fn coherence(basis: &Basis) -> f64 {
    let u = basis.u();
    let max_row = u
        .row_iter()
        .map(|r| r.norm_squared())
        .fold(0.0, f64::max);
    basis.full_dim() as f64 / basis.dim() as f64 * max_row
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiselessBound {
    /// `selection_norm * projection_error`
    pub bound: f64,
    /// `||f - U U^T f||_2`
    pub projection_error: f64,
    /// `||f - U (P^T U)^+ P^T f||_2`
    pub error: f64,
}

impl NoiselessBound {
    /// Whether the measured error respects the bound up to `1e-10 ||f||`.
    pub fn holds(&self, f_norm: f64) -> bool {
        self.error <= self.bound + 1e-10 * f_norm
    }
}

pub fn noiseless_error_bound(interp: &Interpolant, f: &Vector) -> Result<NoiselessBound> {
    if f.len() != interp.basis.full_dim() {
        return Err(Error::Dimension(format!(
            "f has length {}, expected {}",
            f.len(),
            interp.basis.full_dim()
        )));
    }
    let projection_error = interp.basis.projection_error(f);
    let (_, approx) = interp.approximate(&interp.sample(f))?;
    Ok(NoiselessBound {
        bound: interp.selection_norm() * projection_error,
        projection_error,
        error: (f - approx).norm(),
    })
}

/// Expected-error bound for interpolation under noise:
/// `sqrt(1 + 4 n (N - n)) (projection_error + sqrt(n) sigma)`.
pub fn deim_noise_bound(big_n: usize, n: usize, sigma: f64, projection_error: f64) -> Result<f64> {
    if n == 0 || n > big_n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n <= N, got n = {n}, N = {big_n}"
        )));
    }
    let factor = (1.0 + 4.0 * n as f64 * (big_n - n) as f64).sqrt();
    Ok(factor * (projection_error + (n as f64).sqrt() * sigma))
}

/// Parameters of the uniform-sampling bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParameters {
    pub big_n: usize,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub mu: f64,
    pub gamma: f64,
    pub sigma: f64,
}

/// Smallest-coherence slack accepted when validating `mu >= 1`.
const COHERENCE_SLACK: f64 = 1e-12;

fn log_term(n: usize, delta: f64) -> f64 {
    (2.0 * n as f64 / delta).ln()
}

/// `(8/3) n mu ln(2n / delta)`, the minimal number of samples of the eigenvalue lemma.
pub fn sample_threshold(n: usize, mu: f64, delta: f64) -> f64 {
    8.0 / 3.0 * n as f64 * mu * log_term(n, delta)
}

impl BoundParameters {
    pub fn new(big_n: usize, n: usize, m: usize, delta: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
        }
        if n == 0 || n > big_n || m == 0 {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= n <= N and m >= 1, got N = {big_n}, n = {n}, m = {m}"
            )));
        }
        if !(mu >= 1.0 - COHERENCE_SLACK) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("coherence must be >= 1, got {mu}")));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
        }
        let gamma = (sample_threshold(n, mu, delta) / m as f64).sqrt();
        Ok(Self {
            big_n,
            n,
            m,
            delta,
            mu,
            gamma,
            sigma,
        })
    }

    pub fn threshold(&self) -> f64 {
        sample_threshold(self.n, self.mu, self.delta)
    }

    /// Errors unless `m >= (8/3) n mu ln(2n/delta)` and `gamma < 1`.
    pub fn check_hypotheses(&self) -> Result<()> {
        let t = self.threshold();
        if (self.m as f64) < t {
            return Err(Error::Hypothesis(format!(
                "m >= (8/3) n mu ln(2n/delta) fails: m = {} < {t:.6}",
                self.m
            )));
        }
        if !(self.gamma < 1.0) {
            return Err(Error::Hypothesis(format!(
                "gamma < 1 fails: gamma = {:.6}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// `N / ((1 - gamma) m)`, the high-probability bound on `||((P^T U)^T P^T U)^{-1}||_2`.
    pub fn eigen_bound(&self) -> Result<f64> {
        self.check_hypotheses()?;
        Ok(self.big_n as f64 / ((1.0 - self.gamma) * self.m as f64))
    }

    /// `(1 + sqrt(n mu / m) / (1 - gamma)) projection_error`
    pub fn projection_term(&self, projection_error: f64) -> Result<f64> {
        self.check_hypotheses()?;
        let (n, m) = (self.n as f64, self.m as f64);
        Ok((1.0 + (n * self.mu / m).sqrt() / (1.0 - self.gamma)) * projection_error)
    }

    /// `sigma sqrt(n N / m) / (1 - gamma)`
    pub fn noise_term(&self) -> Result<f64> {
        self.check_hypotheses()?;
        let (n, big_n, m) = (self.n as f64, self.big_n as f64, self.m as f64);
        Ok(self.sigma * (n * big_n / m).sqrt() / (1.0 - self.gamma))
    }
}

/// Expected-error bound for oversampled regression with uniformly sampled points.
pub fn odeim_expected_bound(params: &BoundParameters, projection_error: f64) -> Result<f64> {
    Ok(params.projection_term(projection_error)? + params.noise_term()?)
}

/// `((g/2) + sqrt(g^2 + 2)/2)^2`, the sampling fraction as a function of `g`.
pub fn oversampling_fraction_from_gamma(gamma_tilde: f64) -> f64 {
    (0.5 * gamma_tilde + 0.5 * (gamma_tilde * gamma_tilde + 2.0).sqrt()).powi(2)
}

/// Fraction `alpha` such that `m = ceil(alpha N)` uniform samples give
/// `||(P^T U)^+||_2 <= 2` with probability at least `1 - delta`.
///
/// Errors when `alpha >= 1`, i.e. no admissible fraction exists.
pub fn wellposed_oversampling_fraction(big_n: usize, n: usize, delta: f64, mu: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if n == 0 || n > big_n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n <= N, got n = {n}, N = {big_n}"
        )));
    }
    let gamma_tilde = (sample_threshold(n, mu, delta) / big_n as f64).sqrt();
    let alpha = oversampling_fraction_from_gamma(gamma_tilde);
    if alpha >= 1.0 {
        return Err(Error::Hypothesis(format!(
            "no sampling fraction below 1 exists: alpha = {alpha:.6} (gamma~ = {gamma_tilde:.6})"
        )));
    }
    Ok(alpha)
}
