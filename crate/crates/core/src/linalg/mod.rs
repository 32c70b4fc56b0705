//! Dense linear-algebra primitives used throughout the crate.
//!
//! Matrices are `nalgebra` dense matrices. The thin SVD delegates to the
//! `nalgebra` bidiagonalization + implicit-shift QR solver; the column-pivoted
//! QR factorization is implemented here because its pivot order is what the
//! point selectors consume.

mod banded;
pub mod io;

pub use banded::{BandMatrix, BandedLu};

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Iteration cap handed to the SVD solver.
pub const SVD_MAX_ITERATIONS: usize = 10_000;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-13;

/// Thin singular value decomposition `a = left * diag(singular_values) * right^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: Matrix,
    pub singular_values: Vector,
    pub right: Matrix,
}

impl SvdResult {
    pub fn smallest(&self) -> f64 {
        self.singular_values[self.singular_values.len() - 1]
    }

    pub fn largest(&self) -> f64 {
        self.singular_values[0]
    }

    /// `left * diag(s) * right^T`
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.left.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }
}

/// Column-pivoted QR factorization: `a[:, pivots] = q * r`.
#[derive(Debug, Clone)]
pub struct PivotedQrResult {
    pub q: Matrix,
    pub r: Matrix,
    pub pivots: Vec<usize>,
}

impl PivotedQrResult {
    /// The input matrix with its columns permuted by `pivots`.
    pub fn permuted(a: &Matrix, pivots: &[usize]) -> Matrix {
        Matrix::from_fn(a.nrows(), pivots.len(), |i, j| a[(i, pivots[j])])
    }
}

fn check_finite(a: &Matrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "matrix must be non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Convergence thresholds tried in turn, as multiples of machine epsilon.
/// The solver can return an inconsistent factorization when the threshold is
/// too tight for a rank-deficient input, so each result is checked.
const SVD_EPSILON_FACTORS: [f64; 3] = [5.0, 50.0, 500.0];

/// Allowed relative gap between `sum s_i^2` and `||a||_F^2`.
const SVD_ENERGY_TOLERANCE: f64 = 1e-10;

fn svd_with(a: &Matrix, compute_u: bool, compute_v: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    check_finite(a)?;
    let energy = a.norm_squared();
    let mut gap = f64::NAN;
    for factor in SVD_EPSILON_FACTORS {
        let svd = SVD::try_new(a.clone(), compute_u, compute_v, factor * f64::EPSILON, SVD_MAX_ITERATIONS)
            .ok_or(Error::SvdNonConvergence {
                iterations: SVD_MAX_ITERATIONS,
            })?;
        gap = (svd.singular_values.norm_squared() - energy).abs();
        if gap <= SVD_ENERGY_TOLERANCE * energy {
            return Ok(svd);
        }
    }
    Err(Error::SvdInconsistent {
        relative_gap: gap / energy,
    })
}

/// Thin SVD with singular values sorted descending.
pub fn thin_svd(a: &Matrix) -> Result<SvdResult> {
    let svd = svd_with(a, true, true)?;
    Ok(SvdResult {
        left: svd.u.expect("requested left vectors"),
        singular_values: svd.singular_values,
        right: svd.v_t.expect("requested right vectors").transpose(),
    })
}

/// Left singular vectors and singular values only; cheaper for tall snapshot matrices.
pub(crate) fn left_singular(a: &Matrix) -> Result<(Matrix, Vector)> {
    let svd = svd_with(a, true, false)?;
    Ok((svd.u.expect("requested left vectors"), svd.singular_values))
}

/// Right singular vectors and singular values only.
pub(crate) fn right_singular(a: &Matrix) -> Result<(Matrix, Vector)> {
    let svd = svd_with(a, false, true)?;
    Ok((
        svd.v_t.expect("requested right vectors").transpose(),
        svd.singular_values,
    ))
}

pub fn singular_values(a: &Matrix) -> Result<Vector> {
    Ok(svd_with(a, false, false)?.singular_values)
}

/// Smallest singular value of a matrix with at least as many rows as columns.
pub fn min_singular_value(a: &Matrix) -> Result<f64> {
    if a.nrows() < a.ncols() {
        return Err(Error::Dimension(format!(
            "min_singular_value needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let s = singular_values(a)?;
    Ok(s[s.len() - 1])
}

pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?[0])
}

/// Minimizer of `||a x - b||_2` for `a` with full column rank.
///
/// Applied through the SVD; the normal equations are never formed.
pub fn solve_least_squares(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "least squares: matrix has {} rows, right-hand side has {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.nrows() < a.ncols() {
        return Err(Error::Dimension(format!(
            "least squares needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = thin_svd(a)?;
    let (smax, smin) = (svd.largest(), svd.smallest());
    if !(smin > RANK_TOLERANCE * smax) {
        return Err(Error::Singular(format!(
            "rank-deficient least-squares matrix (s_min = {smin:e}, s_max = {smax:e})"
        )));
    }
    let mut coeffs = svd.left.tr_mul(b);
    for (c, s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c /= s;
    }
    Ok(&svd.right * coeffs)
}

/// Column-pivoted Householder QR (Businger–Golub).
///
/// At every step the remaining column with the largest (downdated) norm is
/// moved to the front; ties go to the smaller column index. Downdated norms
/// are recomputed from scratch once they lose more than half the working
/// precision relative to their last exact value.
pub fn pivoted_qr(a: &Matrix) -> Result<PivotedQrResult> {
    check_finite(a)?;
    let (rows, cols) = a.shape();
    let steps = rows.min(cols);
    let mut work = a.clone();
    let mut pivots: Vec<usize> = (0..cols).collect();
    let mut norms: Vec<f64> = (0..cols).map(|j| work.column(j).norm()).collect();
    let mut exact_norms = norms.clone();
    let tol = f64::EPSILON.sqrt();
    let mut reflectors: Vec<Vector> = Vec::with_capacity(steps);

    for i in 0..steps {
        let mut best = i;
        for j in i + 1..cols {
            if norms[j] > norms[best] {
                best = j;
            }
        }
        if best != i {
            work.swap_columns(i, best);
            pivots.swap(i, best);
            norms.swap(i, best);
            exact_norms.swap(i, best);
        }

        // Householder reflector annihilating work[i+1.., i].
        let x = work.view((i, i), (rows - i, 1)).clone_owned();
        let xnorm = x.norm();
        let mut v = Vector::from_iterator(rows - i, x.iter().copied());
        if xnorm > 0.0 {
            let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
            v[0] -= alpha;
            let vnorm = v.norm();
            if vnorm > 0.0 {
                v /= vnorm;
                let mut block = work.view_mut((i, i), (rows - i, cols - i));
                let proj = block.tr_mul(&v);
                block.ger(-2.0, &v, &proj, 1.0);
            } else {
                v.fill(0.0);
            }
            work[(i, i)] = alpha;
            for k in i + 1..rows {
                work[(k, i)] = 0.0;
            }
        } else {
            v.fill(0.0);
        }
        reflectors.push(v);

        for j in i + 1..cols {
            if norms[j] == 0.0 {
                continue;
            }
            let ratio = work[(i, j)].abs() / norms[j];
            let shrink = (1.0 - ratio * ratio).max(0.0);
            let drift = shrink * (norms[j] / exact_norms[j]).powi(2);
            if drift <= tol {
                let fresh = if i + 1 < rows {
                    work.view((i + 1, j), (rows - i - 1, 1)).norm()
                } else {
                    0.0
                };
                norms[j] = fresh;
                exact_norms[j] = fresh;
            } else {
                norms[j] *= shrink.sqrt();
            }
        }
    }

    let mut r = Matrix::zeros(steps, cols);
    for i in 0..steps {
        for j in i..cols {
            r[(i, j)] = work[(i, j)];
        }
    }

    // Q = H_0 H_1 ... H_{steps-1} applied to the first `steps` identity columns.
    let mut q = Matrix::identity(rows, steps);
    for (i, v) in reflectors.iter().enumerate().rev() {
        let mut block = q.view_mut((i, 0), (rows - i, steps));
        let proj = block.tr_mul(v);
        block.ger(-2.0, v, &proj, 1.0);
    }

    Ok(PivotedQrResult { q, r, pivots })
}

/// Rows of `a` at `indices`, in order (duplicates allowed).
pub fn select_rows(a: &Matrix, indices: &[usize]) -> Matrix {
    Matrix::from_fn(indices.len(), a.ncols(), |i, j| a[(indices[i], j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_defect(m: &Matrix) -> f64 {
        let gram = m.tr_mul(m);
        spectral_norm(&(gram - Matrix::identity(m.ncols(), m.ncols()))).unwrap()
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let svd = thin_svd(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(svd.singular_values.as_slice(), &[1.0, 1.0, 1.0]);
        assert!((svd.reconstruct() - Matrix::identity(3, 3)).norm() < 1e-15);

        let d = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0, 1.0]));
        let svd = thin_svd(&d).unwrap();
        assert_eq!(svd.singular_values.as_slice(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn svd_of_swap_matrix_reconstructs() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let svd = thin_svd(&a).unwrap();
        assert!((svd.singular_values[0] - 1.0).abs() < 1e-15);
        assert!((svd.singular_values[1] - 1.0).abs() < 1e-15);
        // direct product, entry by entry
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for k in 0..2 {
                    v += svd.left[(i, k)] * svd.singular_values[k] * svd.right[(j, k)];
                }
                assert!((v - a[(i, j)]).abs() < 1e-14);
            }
        }
    }

    /// Leading singular values from the eigenvalues of `a^T a`.
    fn gram_singular_values(a: &Matrix, count: usize) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(a.tr_mul(a));
        let mut s: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        s.sort_by(|x, y| y.total_cmp(x));
        s.truncate(count);
        s
    }

    fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
    }

    #[test]
    fn svd_of_wide_rank_two_matrix() {
        // With a convergence threshold of one machine epsilon the solver returns
        // s_0 = 13.35 and a factorization off by 2.6 for this input.
        let seed = 15083135919445231980;
        let a = gaussian_matrix(13, 2, seed) * gaussian_matrix(2, 12, seed ^ 7);
        let svd = thin_svd(&a).unwrap();
        let oracle = gram_singular_values(&a, 2);
        assert!((svd.singular_values[0] - oracle[0]).abs() < 1e-10 * oracle[0]);
        assert!((svd.singular_values[1] - oracle[1]).abs() < 1e-10 * oracle[0]);
        assert!((svd.reconstruct() - &a).norm() < 1e-12 * a.norm());
        let (left, s) = left_singular(&a).unwrap();
        assert!((s[0] - oracle[0]).abs() < 1e-10 * oracle[0]);
        let coeffs = left.columns(0, 2).tr_mul(&a);
        assert!((left.columns(0, 2) * coeffs - &a).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn svd_rejects_non_finite() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(thin_svd(&a), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pivoted_qr_picks_largest_column_first() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 10.0, 0.0, 1.0, 0.0]);
        let qr = pivoted_qr(&a).unwrap();
        assert_eq!(qr.pivots[0], 2);
        let back = &qr.q * &qr.r;
        assert!((back - PivotedQrResult::permuted(&a, &qr.pivots)).norm() < 1e-14);
    }

    #[test]
    fn pivoted_qr_identity() {
        let qr = pivoted_qr(&Matrix::identity(3, 3)).unwrap();
        for k in 0..3 {
            assert!((qr.r[(k, k)].abs() - 1.0).abs() < 1e-15);
        }
        let mut p = qr.pivots.clone();
        p.sort();
        assert_eq!(p, vec![0, 1, 2]);
    }

    #[test]
    fn pivoted_qr_canonical_rows() {
        // U^T for U = [e1, e2] in R^4
        let ut = Matrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let qr = pivoted_qr(&ut).unwrap();
        let mut first: Vec<usize> = qr.pivots[..2].to_vec();
        first.sort();
        assert_eq!(first, vec![0, 1]);
    }

    #[test]
    fn min_singular_value_cases() {
        assert_eq!(min_singular_value(&Matrix::identity(3, 3)).unwrap(), 1.0);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0, 1.0]));
        assert!((min_singular_value(&d).unwrap() - 1.0).abs() < 1e-15);
        let tall = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((min_singular_value(&tall).unwrap() - 1.0).abs() < 1e-15);
        assert!(min_singular_value(&tall.transpose()).is_err());
    }

    #[test]
    fn least_squares_examples() {
        let x = solve_least_squares(&Matrix::identity(2, 2), &Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((x - Vector::from_vec(vec![3.0, 4.0])).norm() < 1e-15);

        let ones = Matrix::from_element(2, 1, 1.0);
        let x = solve_least_squares(&ones, &Vector::from_vec(vec![0.0, 2.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);

        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = Vector::from_vec(vec![1.0, 1.0, 2.0]);
        let x = solve_least_squares(&a, &b).unwrap();
        assert!((&x - Vector::from_vec(vec![1.0, 1.0])).norm() < 1e-14);
        assert!((&a * x - b).norm() < 1e-14);
    }

    #[test]
    fn least_squares_rank_deficient() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let b = Vector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(solve_least_squares(&a, &b), Err(Error::Singular(_))));
    }

    #[test]
    fn least_squares_residual_orthogonal_to_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let a = random_matrix(12, 4, 1000 + trial);
            let b = Vector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let x = solve_least_squares(&a, &b).unwrap();
            let residual = &b - &a * &x;
            let along_range = a.tr_mul(&residual).norm() / spectral_norm(&a).unwrap();
            assert!(along_range < 1e-10 * b.norm(), "trial {trial}: {along_range:e}");
        }
    }

    #[test]
    fn random_reconstructions_50x30() {
        for seed in 0..5 {
            let a = random_matrix(50, 30, seed);
            let scale = spectral_norm(&a).unwrap();

            let svd = thin_svd(&a).unwrap();
            assert!(spectral_norm(&(svd.reconstruct() - &a)).unwrap() < 1e-12 * scale);
            assert!(orthonormality_defect(&svd.left) < 1e-12);
            assert!(orthonormality_defect(&svd.right) < 1e-12);
            assert!(svd.singular_values.as_slice().windows(2).all(|w| w[0] >= w[1]));

            let qr = pivoted_qr(&a).unwrap();
            let permuted = PivotedQrResult::permuted(&a, &qr.pivots);
            assert!(spectral_norm(&(&qr.q * &qr.r - permuted)).unwrap() < 1e-12 * scale);
            assert!(orthonormality_defect(&qr.q) < 1e-12);
            let diag: Vec<f64> = (0..30).map(|k| qr.r[(k, k)].abs()).collect();
            assert!(diag.windows(2).all(|w| w[0] >= w[1] * (1.0 - 1e-12)));
        }
    }

    #[test]
    fn min_singular_value_lower_bounds_rayleigh_quotients() {
        let a = random_matrix(20, 6, 99);
        let smin = min_singular_value(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = Vector::from_fn(6, |_, _| rng.random_range(-1.0..1.0)).normalize();
            assert!(smin <= (&a * x).norm() * (1.0 + 1e-14));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn qr_pivots_are_a_permutation(rows in 1usize..8, cols in 1usize..12, seed in 0u64..1000) {
            let a = random_matrix(rows, cols, seed);
            let qr = pivoted_qr(&a).unwrap();
            let mut p = qr.pivots.clone();
            p.sort();
            prop_assert_eq!(p, (0..cols).collect::<Vec<_>>());
            let back = &qr.q * &qr.r;
            let err = (back - PivotedQrResult::permuted(&a, &qr.pivots)).norm();
            prop_assert!(err < 1e-12 * a.norm().max(1.0));
        }

        #[test]
        fn low_rank_svd_reconstructs(
            rows in 2usize..40, cols in 2usize..40, rank in 1usize..5, seed in any::<u64>()
        ) {
            let a = gaussian_matrix(rows, rank, seed) * gaussian_matrix(rank, cols, seed ^ 7);
            let svd = thin_svd(&a).unwrap();
            prop_assert!((svd.reconstruct() - &a).norm() <= 1e-12 * a.norm());
            let r = rank.min(rows).min(cols);
            let oracle = gram_singular_values(&a, r);
            for k in 0..r {
                prop_assert!((svd.singular_values[k] - oracle[k]).abs() <= 1e-9 * oracle[0]);
            }
            prop_assert!(orthonormality_defect(&svd.left) < 1e-12);
            prop_assert!(orthonormality_defect(&svd.right) < 1e-12);
        }
    }
}
