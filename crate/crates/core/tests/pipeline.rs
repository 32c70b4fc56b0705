use odeim::experiments::{run_toy_experiment, ErrorTable, ExperimentConfig, ModelConfig, Oversampling, ToyConfig};
use odeim::interpolant::Interpolant;
use odeim::linalg::{Matrix, Vector};
use odeim::pod::{pod_basis, Basis, SnapshotMatrix};
use odeim::selection::{select, Method};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn orthonormal(rows: usize, cols: usize, seed: u64) -> Basis {
    Basis::from_orthonormal(gaussian(rows, cols, seed).qr().q(), 1e-12).unwrap()
}

const DETERMINISTIC: [Method; 5] = [Method::Qdeim, Method::Deim, Method::OdeimD, Method::OdeimE, Method::OdeimC];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn functions_in_the_span_are_reproduced(
        big_n in 20usize..120, n in 1usize..8, extra in 0usize..10, seed in any::<u64>()
    ) {
        let basis = orthonormal(big_n, n, seed);
        let c = Vector::from_iterator(n, gaussian(n, 1, seed ^ 1).iter().copied());
        let f = basis.u() * &c;
        let m = (n + extra).min(big_n);
        for method in DETERMINISTIC.into_iter().chain([Method::OdeimRand]) {
            let points = select(method, &basis, m, seed).unwrap();
            let interp = Interpolant::new(basis.clone(), points).unwrap();
            let (coef, approx) = interp.approximate(&interp.sample(&f)).unwrap();
            prop_assert!((&coef - &c).norm() <= 1e-8 * c.norm(), "{method}");
            prop_assert!((&approx - &f).norm() <= 1e-8 * f.norm(), "{method}");
            prop_assert!(interp.selection_norm() >= 1.0 - 1e-10, "{method}");
        }
    }

    /// Adding rows to `P^T U` cannot lower its smallest singular value, so
    /// methods that extend the QDEIM points never do worse than QDEIM.
    #[test]
    fn extending_qdeim_never_raises_the_selection_norm(
        big_n in 30usize..150, n in 1usize..10, extra in 1usize..20, seed in any::<u64>()
    ) {
        let basis = orthonormal(big_n, n, seed);
        let m = (n + extra).min(big_n);
        let base = Interpolant::new(basis.clone(), select(Method::Qdeim, &basis, n, 0).unwrap()).unwrap();
        for method in [Method::OdeimE, Method::OdeimRand] {
            let points = select(method, &basis, m, seed).unwrap();
            prop_assert_eq!(&points.indices()[..n], base.points().indices());
            let interp = Interpolant::new(basis.clone(), points).unwrap();
            prop_assert!(interp.selection_norm() <= base.selection_norm() * (1.0 + 1e-10), "{method}");
        }
    }

    #[test]
    fn selections_are_distinct_in_range_and_sized(
        big_n in 10usize..80, n in 1usize..6, extra in 0usize..12, seed in any::<u64>()
    ) {
        let basis = orthonormal(big_n, n, seed);
        let m = (n + extra).min(big_n);
        for method in Method::ALL {
            let points = select(method, &basis, m, seed).unwrap();
            let expected = if method.oversamples() { m } else { n };
            prop_assert_eq!(points.len(), expected, "{}", method);
            let mut sorted = points.indices().to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), expected, "{}", method);
            prop_assert!(sorted.iter().all(|&i| i < big_n));
        }
    }

    #[test]
    fn pod_of_a_low_rank_matrix_spans_its_columns(
        big_n in 10usize..60, rank in 1usize..5, count in 6usize..20, seed in any::<u64>()
    ) {
        let data = gaussian(big_n, rank, seed) * gaussian(rank, count, seed ^ 7);
        let basis = pod_basis(&SnapshotMatrix::new(data.clone()).unwrap(), rank).unwrap();
        for col in data.column_iter() {
            let f = col.into_owned();
            prop_assert!(basis.projection_error(&f) <= 1e-9 * f.norm());
        }
    }

    #[test]
    fn manifests_round_trip(
        grid in prop::collection::vec(1usize..40, 1..6),
        sigma in 0.0f64..1.0,
        replicates in 1usize..20,
        seed in any::<u64>(),
        factor in 1.0f64..4.0,
    ) {
        let cfg = ExperimentConfig {
            n_grid: grid,
            sigma,
            replicates,
            seed,
            oversampling: Oversampling::Factor(factor),
            ..ExperimentConfig::toy_desk()
        };
        let back = ExperimentConfig::from_manifest(&cfg.to_resolved_manifest()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn toy_table_round_trips_through_csv_and_json() {
    let cfg = ExperimentConfig {
        methods: vec![Method::Deim, Method::OdeimE, Method::Kdeim],
        n_grid: vec![2, 4, 8],
        replicates: 2,
        model: ModelConfig::Toy(ToyConfig {
            grid_size: 256,
            training: 60,
            test: 20,
        }),
        ..ExperimentConfig::toy_desk()
    };
    let table = run_toy_experiment(&cfg).unwrap();
    assert_eq!(table.rows.len(), 3 * 3 * 2);
    assert!(table.rows.iter().any(|r| !r.is_ok()), "kdeim is singular on this basis at some n");

    let from_csv = ErrorTable::from_csv(&table.to_csv()).unwrap();
    assert_eq!(from_csv.rows.len(), table.rows.len());
    for (a, b) in from_csv.rows.iter().zip(&table.rows) {
        assert_eq!((a.method.as_str(), a.n, a.m, a.replicate), (b.method.as_str(), b.n, b.m, b.replicate));
        assert_eq!(a.error, b.error);
        assert_eq!(a.selection_norm, b.selection_norm);
        assert_eq!(a.status, b.status);
    }
    assert_eq!(ErrorTable::from_json(&table.to_json()).unwrap(), table);
    assert_eq!(run_toy_experiment(&cfg).unwrap(), table);
}
