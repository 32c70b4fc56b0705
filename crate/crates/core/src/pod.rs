//! Proper orthogonal decomposition of snapshot matrices.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector, RANK_TOLERANCE};

/// Snapshots stored column-wise: `N` rows (full dimension), one column per sample.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix(Matrix);

impl SnapshotMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::Dimension("snapshot matrix needs at least one snapshot".into()));
        }
        Ok(Self(data))
    }

    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        let first = columns
            .first()
            .ok_or_else(|| Error::Dimension("no snapshots".into()))?;
        if columns.iter().any(|c| c.len() != first.len()) {
            return Err(Error::Dimension("snapshots have different lengths".into()));
        }
        Self::new(Matrix::from_columns(columns))
    }

    pub fn data(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn full_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn count(&self) -> usize {
        self.0.ncols()
    }
}

/// Orthonormal basis `u` (N x n) with the singular values it was truncated from.
#[derive(Debug, Clone)]
pub struct Basis {
    u: Matrix,
    singular_values: Vector,
}

impl Basis {
    /// Wraps a matrix whose columns are already orthonormal (checked to `tol`).
    pub fn from_orthonormal(u: Matrix, tol: f64) -> Result<Self> {
        if u.ncols() == 0 || u.nrows() < u.ncols() {
            return Err(Error::Dimension(format!(
                "basis must be N x n with 1 <= n <= N, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        let defect = (u.tr_mul(&u) - Matrix::identity(u.ncols(), u.ncols())).abs().max();
        if !(defect <= tol) {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (max |U^T U - I| = {defect:e})"
            )));
        }
        let n = u.ncols();
        Ok(Self {
            u,
            singular_values: Vector::from_element(n, 1.0),
        })
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn singular_values(&self) -> &Vector {
        &self.singular_values
    }

    /// Number of basis vectors `n`.
    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// Full dimension `N`.
    pub fn full_dim(&self) -> usize {
        self.u.nrows()
    }

    /// Leading `dim` vectors of this basis.
    pub fn truncate(&self, dim: usize) -> Result<Basis> {
        if dim == 0 || dim > self.dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-dimensional basis to {dim}",
                self.dim()
            )));
        }
        Ok(Basis {
            u: self.u.columns(0, dim).into_owned(),
            singular_values: self.singular_values.rows(0, dim).into_owned(),
        })
    }

    /// Rows of `u` at `indices` (the matrix `P^T U`).
    pub fn rows(&self, indices: &[usize]) -> Matrix {
        linalg::select_rows(&self.u, indices)
    }

    /// `||f - u u^T f||_2`
    pub fn projection_error(&self, f: &Vector) -> f64 {
        let coeffs = self.u.tr_mul(f);
        (f - &self.u * coeffs).norm()
    }
}

/// Number of singular values above `RANK_TOLERANCE` times the largest.
pub fn numerical_rank(singular_values: &Vector) -> usize {
    let s0 = singular_values[0];
    singular_values
        .iter()
        .take_while(|&&s| s > RANK_TOLERANCE * s0)
        .count()
}

/// Leading `dim` left singular vectors of the snapshot matrix, without centering.
///
/// Each column is flipped so that its largest-magnitude entry is positive.
pub fn pod_basis(snapshots: &SnapshotMatrix, dim: usize) -> Result<Basis> {
    let data = snapshots.data();
    let max_dim = data.nrows().min(data.ncols());
    if dim == 0 || dim > max_dim {
        return Err(Error::InvalidArgument(format!(
            "POD dimension must lie in 1..={max_dim}, got {dim}"
        )));
    }
    let (left, s) = linalg::left_singular(data)?;
    let rank = numerical_rank(&s);
    if dim > rank {
        return Err(Error::Rank {
            requested: dim,
            rank,
        });
    }
    let mut u = left.columns(0, dim).into_owned();
    for mut col in u.column_iter_mut() {
        let mut lead = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(Basis {
        u,
        singular_values: s.rows(0, dim).into_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_snapshots() {
        let basis = pod_basis(&SnapshotMatrix::new(Matrix::identity(3, 3)).unwrap(), 2).unwrap();
        assert_eq!(basis.singular_values().as_slice(), &[1.0, 1.0]);
        for col in basis.u().column_iter() {
            let nonzero: Vec<f64> = col.iter().copied().filter(|v| v.abs() > 1e-12).collect();
            assert_eq!(nonzero.len(), 1);
            assert!((nonzero[0] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_one_snapshots() {
        let c = Vector::from_vec(vec![0.6, 0.0, -0.8]);
        let snaps = SnapshotMatrix::from_columns(&[c.clone(), &c * 2.0]).unwrap();
        let basis = pod_basis(&snaps, 1).unwrap();
        assert!((basis.singular_values()[0] - 5f64.sqrt()).abs() < 1e-14);
        // sign convention: largest magnitude entry (-0.8) is made positive
        let u = basis.u().column(0);
        assert!((u - (-&c)).norm() < 1e-14);
    }

    #[test]
    fn dim_beyond_rank_is_rejected() {
        let mut m = Matrix::zeros(6, 5);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 2.0;
        m[(0, 2)] = 3.0;
        let err = pod_basis(&SnapshotMatrix::new(m).unwrap(), 5).unwrap_err();
        assert!(matches!(err, Error::Rank { requested: 5, rank: 2 }));
    }

    #[test]
    fn projection_error_matches_tail_energy_and_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Matrix::from_fn(40, 12, |_, _| rng.random_range(-1.0..1.0));
        let snaps = SnapshotMatrix::new(f.clone()).unwrap();
        let all = linalg::singular_values(&f).unwrap();
        let mut previous = f64::INFINITY;
        for dim in 1..=12 {
            let basis = pod_basis(&snaps, dim).unwrap();
            let u = basis.u();
            assert!((u.tr_mul(u) - Matrix::identity(dim, dim)).abs().max() < 1e-12);
            let residual = (&f - u * u.tr_mul(&f)).norm_squared();
            let tail: f64 = all.iter().skip(dim).map(|s| s * s).sum();
            assert!((residual - tail).abs() <= 1e-10 * f.norm_squared());
            assert!(residual <= previous + 1e-12);
            previous = residual;
        }
    }
}
