use std::collections::HashSet;

use super::{check_oversampling, qdeim, PointSet};
use crate::error::Result;
use crate::linalg::{self, Matrix, Vector};
use crate::pod::Basis;

/// Index of the largest `|r[i]|` among rows not in `taken`; ties go to the smaller index.
fn argmax_unselected(r: &Vector, taken: &HashSet<usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in r.iter().enumerate() {
        if taken.contains(&i) {
            continue;
        }
        let a = v.abs();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best.map(|(i, _)| i)
}

/// Classical DEIM greedy selection (`odeim_d` with `m = n`).
pub fn deim(basis: &Basis) -> Result<PointSet> {
    odeim_d(basis, basis.dim())
}

/// DEIM residual greedy continued past `n` points.
///
/// Step `i` (1-based) fits column `i mod n` on the first `min(i, n)` columns
/// at the selected rows and picks the largest remaining residual entry. Past
/// `n` the fitted column already lies in the span, so the residual is at
/// rounding level.
pub fn odeim_d(basis: &Basis, m: usize) -> Result<PointSet> {
    check_oversampling(basis, m)?;
    let u = basis.u();
    let n = basis.dim();
    let mut points = Vec::with_capacity(m);
    let mut taken = HashSet::with_capacity(m);
    let mut r: Vector = u.column(0).into_owned();
    for i in 1..=m {
        let p = argmax_unselected(&r, &taken).expect("m <= N leaves a free row");
        points.push(p);
        taken.insert(p);
        if i == m {
            break;
        }
        let d = i.min(n);
        let k = i % n;
        let lead: Matrix = u.columns(0, d).into_owned();
        let a = linalg::select_rows(&lead, &points);
        let b = Vector::from_iterator(points.len(), points.iter().map(|&p| u[(p, k)]));
        let c = linalg::solve_least_squares(&a, &b)?;
        r = u.column(k) - lead * c;
    }
    PointSet::new(points, basis.full_dim())
}

/// QDEIM points, then greedily the row with the largest squared inner
/// product against the last right singular vector of the sampled basis.
pub fn odeim_e(basis: &Basis, m: usize) -> Result<PointSet> {
    check_oversampling(basis, m)?;
    let u = basis.u();
    let n = basis.dim();
    let mut points = qdeim(basis)?.into_vec();
    let mut taken: HashSet<usize> = points.iter().copied().collect();
    while points.len() < m {
        let (w, _) = linalg::right_singular(&basis.rows(&points))?;
        let scores = u * w.column(n - 1);
        let p = argmax_unselected(&scores, &taken).expect("m <= N leaves a free row");
        points.push(p);
        taken.insert(p);
    }
    PointSet::new(points, basis.full_dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::test_support::{canonical_basis, random_basis};

    /// Step-by-step transcription of the residual recurrence with dense
    /// square solves for `i <= n` and normal equations past `n`.
    fn oracle_deim(u: &Matrix) -> Vec<usize> {
        let (big_n, n) = u.shape();
        let mut phi: Vec<usize> = Vec::new();
        let mut r: Vec<f64> = (0..big_n).map(|j| u[(j, 0)]).collect();
        for i in 1..=n {
            let mut best = 0;
            for j in 1..big_n {
                if r[j].abs() > r[best].abs() {
                    best = j;
                }
            }
            phi.push(best);
            if i == n {
                break;
            }
            let d = i;
            let k = i % n;
            let a = Matrix::from_fn(d, d, |row, col| u[(phi[row], col)]);
            let b = Vector::from_fn(d, |row, _| u[(phi[row], k)]);
            let c = a.lu().solve(&b).unwrap();
            for j in 0..big_n {
                let mut fit = 0.0;
                for col in 0..d {
                    fit += u[(j, col)] * c[col];
                }
                r[j] = u[(j, k)] - fit;
            }
        }
        phi
    }

    #[test]
    fn single_canonical_vector() {
        let basis = canonical_basis(3, &[0]);
        assert_eq!(odeim_d(&basis, 1).unwrap().indices(), &[0]);
    }

    #[test]
    fn two_canonical_vectors() {
        let basis = canonical_basis(3, &[0, 1]);
        assert_eq!(odeim_d(&basis, 2).unwrap().indices(), &[0, 1]);
    }

    #[test]
    fn matches_oracle_on_random_bases() {
        for seed in 0..20 {
            let basis = random_basis(30, 4, seed);
            assert_eq!(
                deim(&basis).unwrap().indices(),
                oracle_deim(basis.u()).as_slice(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn oversampled_points_extend_deim() {
        let basis = random_basis(40, 5, 7);
        let base = deim(&basis).unwrap();
        let over = odeim_d(&basis, 12).unwrap();
        assert_eq!(&over.indices()[..5], base.indices());
        assert_eq!(over.len(), 12);
    }

    #[test]
    fn odeim_e_without_oversampling_is_qdeim() {
        let basis = random_basis(25, 3, 2);
        assert_eq!(odeim_e(&basis, 3).unwrap(), qdeim(&basis).unwrap());
    }

    #[test]
    fn odeim_e_third_point_by_exhaustive_scoring() {
        for seed in 0..10 {
            let basis = random_basis(6, 2, seed);
            let u = basis.u();
            let first = qdeim(&basis).unwrap().into_vec();
            let points = odeim_e(&basis, 3).unwrap();
            assert_eq!(&points.indices()[..2], first.as_slice());

            let sampled = basis.rows(&first);
            let svd = linalg::thin_svd(&sampled).unwrap();
            let w = svd.right.column(1);
            let mut best = None;
            for row in (0..6).filter(|r| !first.contains(r)) {
                let score = (u[(row, 0)] * w[0] + u[(row, 1)] * w[1]).powi(2);
                match best {
                    Some((_, s)) if score <= s => {}
                    _ => best = Some((row, score)),
                }
            }
            assert_eq!(points.indices()[2], best.unwrap().0, "seed {seed}");
        }
    }

    #[test]
    fn odeim_e_smallest_singular_value_never_decreases() {
        for seed in 0..10 {
            let basis = random_basis(80, 6, seed);
            let points = odeim_e(&basis, 30).unwrap();
            let mut previous = 0.0;
            for k in 6..=30 {
                let s = linalg::min_singular_value(&basis.rows(&points.indices()[..k])).unwrap();
                assert!(s >= previous, "seed {seed} step {k}: {s} < {previous}");
                previous = s;
            }
        }
    }
}
