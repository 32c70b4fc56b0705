//! Sampling-point selection.
//!
//! Every selector returns a [`PointSet`] of distinct row indices of the basis.
//! The first `n` points of the oversampling selectors other than ODEIM+D come
//! from [`qdeim`].

mod entropy;
mod greedy;
mod kmeans;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use entropy::{column_entropies, odeim_c, EntropyProfile};
pub use greedy::{deim, odeim_d, odeim_e};
pub use kmeans::{kdeim, kdeim_with, kmeans, ClusteringResult, KMeansConfig};

use crate::error::{Error, Result};
use crate::linalg;
use crate::pod::Basis;

/// Ordered row indices; the index form of the sampling matrix `P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    indices: Vec<usize>,
}

impl PointSet {
    /// Distinct indices below `big_n`.
    pub fn new(indices: Vec<usize>, big_n: usize) -> Result<Self> {
        let set = Self::with_replacement(indices, big_n)?;
        let mut seen = HashSet::with_capacity(set.indices.len());
        if let Some(dup) = set.indices.iter().find(|&&i| !seen.insert(i)) {
            return Err(Error::InvalidArgument(format!("point {dup} selected twice")));
        }
        Ok(set)
    }

    /// Indices below `big_n`, duplicates allowed.
    pub fn with_replacement(indices: Vec<usize>, big_n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty point set".into()));
        }
        if let Some(bad) = indices.iter().find(|&&i| i >= big_n) {
            return Err(Error::InvalidArgument(format!(
                "point {bad} out of range for dimension {big_n}"
            )));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.indices
    }
}

/// Point-selection algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Qdeim,
    Deim,
    OdeimD,
    OdeimE,
    OdeimC,
    OdeimRand,
    Kdeim,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Qdeim,
        Method::Deim,
        Method::OdeimD,
        Method::OdeimE,
        Method::OdeimC,
        Method::OdeimRand,
        Method::Kdeim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qdeim => "qdeim",
            Method::Deim => "deim",
            Method::OdeimD => "odeim-d",
            Method::OdeimE => "odeim-e",
            Method::OdeimC => "odeim-c",
            Method::OdeimRand => "odeim-rand",
            Method::Kdeim => "kdeim",
        }
    }

    /// Whether the method selects more than `n` points.
    pub fn oversamples(self) -> bool {
        matches!(
            self,
            Method::OdeimD | Method::OdeimE | Method::OdeimC | Method::OdeimRand
        )
    }

    /// Whether the selection depends on the seed.
    pub fn is_randomized(self) -> bool {
        matches!(self, Method::OdeimRand | Method::Kdeim)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown method {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Runs `method`; `m` is ignored by the methods that do not oversample.
pub fn select(method: Method, basis: &Basis, m: usize, seed: u64) -> Result<PointSet> {
    match method {
        Method::Qdeim => qdeim(basis),
        Method::Deim => deim(basis),
        Method::OdeimD => odeim_d(basis, m),
        Method::OdeimE => odeim_e(basis, m),
        Method::OdeimC => odeim_c(basis, m),
        Method::OdeimRand => odeim_rand(basis, m, seed),
        Method::Kdeim => kdeim(basis, seed),
    }
}

pub(crate) fn check_oversampling(basis: &Basis, m: usize) -> Result<()> {
    let (big_n, n) = (basis.full_dim(), basis.dim());
    if m < n || m > big_n {
        return Err(Error::InvalidArgument(format!(
            "number of points must satisfy n <= m <= N ({n} <= m <= {big_n}), got {m}"
        )));
    }
    Ok(())
}

/// First `n` pivots of the column-pivoted QR factorization of `u^T`.
pub fn qdeim(basis: &Basis) -> Result<PointSet> {
    let qr = linalg::pivoted_qr(&basis.u().transpose())?;
    PointSet::new(qr.pivots[..basis.dim()].to_vec(), basis.full_dim())
}

/// QDEIM points followed by `m - n` points drawn uniformly without
/// replacement from the remaining indices.
pub fn odeim_rand(basis: &Basis, m: usize, seed: u64) -> Result<PointSet> {
    check_oversampling(basis, m)?;
    let mut points = qdeim(basis)?.into_vec();
    let taken: HashSet<usize> = points.iter().copied().collect();
    let complement: Vec<usize> = (0..basis.full_dim()).filter(|i| !taken.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra = m - points.len();
    points.extend(index::sample(&mut rng, complement.len(), extra).into_iter().map(|k| complement[k]));
    PointSet::new(points, basis.full_dim())
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::linalg::Matrix;
    use proptest::prelude::*;

    fn sorted(p: &PointSet) -> Vec<usize> {
        let mut v = p.indices().to_vec();
        v.sort();
        v
    }

    #[test]
    fn point_set_validation() {
        assert!(PointSet::new(vec![0, 2, 1], 3).is_ok());
        assert!(PointSet::new(vec![0, 0], 3).is_err());
        assert!(PointSet::new(vec![3], 3).is_err());
        assert!(PointSet::new(vec![], 3).is_err());
        assert_eq!(PointSet::with_replacement(vec![1, 1], 3).unwrap().len(), 2);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nosuch".parse::<Method>().is_err());
    }

    #[test]
    fn qdeim_canonical_basis() {
        let basis = canonical_basis(4, &[0, 1]);
        assert_eq!(sorted(&qdeim(&basis).unwrap()), vec![0, 1]);
    }

    #[test]
    fn qdeim_hand_example() {
        let s = 0.5f64.sqrt();
        let u = Matrix::from_row_slice(3, 2, &[s, 0.0, s, 0.0, 0.0, 1.0]);
        let basis = Basis::from_orthonormal(u, 1e-15).unwrap();
        let points = qdeim(&basis).unwrap();
        let v = sorted(&points);
        // column 2 of U^T has norm 1 and comes first; then 0 or 1 (tie -> 0)
        assert_eq!(points.indices()[0], 2);
        assert!(v == vec![0, 2] || v == vec![1, 2]);
        assert!(linalg::min_singular_value(&basis.rows(points.indices())).unwrap() > 0.0);
    }

    #[test]
    fn qdeim_invariant_under_orthogonal_recombination() {
        for seed in 0..10 {
            let basis = random_basis(60, 5, seed);
            let q = random_basis(5, 5, 100 + seed).u().clone();
            let rotated = Basis::from_orthonormal(basis.u() * q, 1e-12).unwrap();
            let a = qdeim(&basis).unwrap();
            let b = qdeim(&rotated).unwrap();
            assert_eq!(sorted(&a), sorted(&b), "seed {seed}");
        }
    }

    #[test]
    fn odeim_rand_cases() {
        let basis = random_basis(20, 4, 1);
        assert_eq!(odeim_rand(&basis, 4, 3).unwrap(), qdeim(&basis).unwrap());
        assert_eq!(sorted(&odeim_rand(&basis, 20, 3).unwrap()), (0..20).collect::<Vec<_>>());
        assert_eq!(odeim_rand(&basis, 11, 9).unwrap(), odeim_rand(&basis, 11, 9).unwrap());
        assert!(odeim_rand(&basis, 3, 9).is_err());
        assert!(odeim_rand(&basis, 21, 9).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn every_selector_returns_distinct_points(
            big_n in 12usize..40,
            n in 1usize..5,
            extra in 0usize..6,
            seed in 0u64..500,
        ) {
            let basis = random_basis(big_n, n, seed);
            let m = n + extra;
            for method in Method::ALL {
                let points = select(method, &basis, m, seed).unwrap();
                let expected = if method.oversamples() { m } else { n };
                prop_assert_eq!(points.len(), expected);
                prop_assert!(PointSet::new(points.indices().to_vec(), big_n).is_ok());
                let smin = linalg::min_singular_value(&basis.rows(points.indices())).unwrap();
                prop_assert!(smin > 0.0 && (1.0 / smin).is_finite(), "{} gave s_min {}", method, smin);
            }
        }
    }
}
