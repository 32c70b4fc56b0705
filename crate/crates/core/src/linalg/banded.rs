use crate::error::{Error, Result};

/// Square band matrix with `lower` sub-diagonals and `upper` super-diagonals.
///
/// Column-major band storage with room for the `lower` extra super-diagonals
/// that row interchanges create during factorization (LAPACK `gbtrf` layout).
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    stride: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let stride = 2 * lower + upper + 1;
        Self {
            n,
            lower,
            upper,
            stride,
            data: vec![0.0; stride * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.upper + self.lower >= j && i <= j + self.lower);
        (self.lower + self.upper + i - j) + j * self.stride
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j <= i + self.upper && i <= j + self.lower
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    /// LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let (kl, ku) = (self.lower, self.upper);
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.offset(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.offset(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot in banded LU at column {k}")));
            }
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.offset(k, j);
                    let b = self.offset(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(k, k)];
            for i in k + 1..=last_row {
                let o = self.offset(i, k);
                let l = self.data[o] / pivot;
                self.data[o] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let src = self.data[self.offset(k, j)];
                        let dst = self.offset(i, j);
                        self.data[dst] -= l * src;
                    }
                }
            }
        }
        Ok(BandedLu {
            factors: self,
            pivots,
        })
    }
}

/// Packed LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    factors: BandMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let f = &self.factors;
        let n = f.n;
        let (kl, ku) = (f.lower, f.upper);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= f.data[f.offset(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                acc -= f.data[f.offset(k, j)] * b[j];
            }
            b[k] = acc / f.data[f.offset(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, kl, ku) = (30, 4, 3);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces row interchanges
                let v = if i == j { 1e-3 } else { rng.random_range(-1.0..1.0) };
                band.set(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let expected = dense.clone().lu().solve(&b).unwrap();
        let lu = band.factor().unwrap();
        let mut x = b.as_slice().to_vec();
        lu.solve_in_place(&mut x);
        let x = Vector::from_vec(x);
        assert!((x - expected).norm() < 1e-9);
    }

    #[test]
    fn singular_band_is_reported() {
        let band = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(band.factor(), Err(Error::Singular(_))));
    }
}
