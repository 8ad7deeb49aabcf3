use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tenkrylov::krylov::als_rank1;
use tenkrylov::linalg::{numerical_rank, Basis};
use tenkrylov::matrix_wedderburn::wedderburn_update;
use tenkrylov::source::densify;
use tenkrylov::{
    CanonicalTensor, CountingSource, DenseTensor3, HadamardTuckerSource, Mode, SparseTensor3,
    TenvecSource, TuckerTensor,
};

fn shape_strategy() -> impl Strategy<Value = [usize; 3]> {
    [1usize..6, 1usize..6, 1usize..6]
}

fn vec_of(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(DVector::from_vec)
}

fn mat_of(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn dense_of(shape: [usize; 3]) -> impl Strategy<Value = DenseTensor3> {
    prop::collection::vec(-1.0f64..1.0, shape.iter().product::<usize>())
        .prop_map(move |v| DenseTensor3::from_vec(shape, v).unwrap())
}

fn mode_strategy() -> impl Strategy<Value = Mode> {
    prop::sample::select(Mode::ALL.to_vec())
}

/// Dense tensor with two probe vectors for a random skip mode.
fn probe() -> impl Strategy<Value = (DenseTensor3, Mode, DVector<f64>, DVector<f64>)> {
    (shape_strategy(), mode_strategy()).prop_flat_map(|(shape, mode)| {
        let (a, b) = mode.others();
        (
            dense_of(shape),
            Just(mode),
            vec_of(shape[a.index()]),
            vec_of(shape[b.index()]),
        )
    })
}

fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() <= tol * scale
}

fn canonical_case() -> impl Strategy<Value = (CanonicalTensor, Mode, DVector<f64>, DVector<f64>)> {
    (shape_strategy(), 1usize..4, mode_strategy()).prop_flat_map(|(shape, rank, mode)| {
        let (a, b) = mode.others();
        (
            (
                mat_of(shape[0], rank),
                mat_of(shape[1], rank),
                mat_of(shape[2], rank),
            )
                .prop_map(|(u, v, w)| CanonicalTensor::new([u, v, w]).unwrap()),
            Just(mode),
            vec_of(shape[a.index()]),
            vec_of(shape[b.index()]),
        )
    })
}

fn tucker_case() -> impl Strategy<Value = (TuckerTensor, Mode, DVector<f64>, DVector<f64>)> {
    (shape_strategy(), mode_strategy())
        .prop_flat_map(|(shape, mode)| {
            let ranks = (1..=shape[0], 1..=shape[1], 1..=shape[2]);
            (Just(shape), ranks, Just(mode))
        })
        .prop_flat_map(|(shape, (r1, r2, r3), mode)| {
            let (a, b) = mode.others();
            (
                (
                    dense_of([r1, r2, r3]),
                    mat_of(shape[0], r1),
                    mat_of(shape[1], r2),
                    mat_of(shape[2], r3),
                )
                    .prop_map(|(g, u, v, w)| TuckerTensor::new(g, [u, v, w]).unwrap()),
                Just(mode),
                vec_of(shape[a.index()]),
                vec_of(shape[b.index()]),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tenvec_is_bilinear((t, mode, p, q) in probe(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let p2 = p.map(|x| 0.5 - x);
        let lhs = t.tenvec(mode, &(&p * alpha + &p2 * beta), &q).unwrap();
        let rhs = t.tenvec(mode, &p, &q).unwrap() * alpha + t.tenvec(mode, &p2, &q).unwrap() * beta;
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let q2 = q.map(|x| x * x - 0.3);
        let lhs = t.tenvec(mode, &p, &(&q * alpha + &q2 * beta)).unwrap();
        let rhs = t.tenvec(mode, &p, &q).unwrap() * alpha + t.tenvec(mode, &p, &q2).unwrap() * beta;
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn dense_matches_sparse((t, mode, p, q) in probe()) {
        let sparse = SparseTensor3::from_dense(&t);
        prop_assert!(close(&t.tenvec(mode, &p, &q).unwrap(), &sparse.tenvec(mode, &p, &q).unwrap(), 1e-12));
        prop_assert_eq!(sparse.to_dense(), t);
    }

    #[test]
    fn canonical_matches_dense((c, mode, p, q) in canonical_case()) {
        let dense = c.to_dense();
        prop_assert!(close(&c.tenvec(mode, &p, &q).unwrap(), &dense.tenvec(mode, &p, &q).unwrap(), 1e-12));
    }

    #[test]
    fn tucker_matches_dense((t, mode, p, q) in tucker_case()) {
        let dense = t.reconstruct();
        prop_assert!(close(&t.tenvec(mode, &p, &q).unwrap(), &dense.tenvec(mode, &p, &q).unwrap(), 1e-12));
    }

    #[test]
    fn hadamard_matches_dense((left, mode, p, q) in tucker_case(), scale in 0.5f64..2.0) {
        let right = TuckerTensor::new(left.core().scaled(scale), left.factors().clone()).unwrap();
        let src = HadamardTuckerSource::new(left.clone(), right.clone()).unwrap();
        let dense = left.reconstruct().hadamard(&right.reconstruct()).unwrap();
        prop_assert!(close(&src.tenvec(mode, &p, &q).unwrap(), &dense.tenvec(mode, &p, &q).unwrap(), 1e-11));
    }

    #[test]
    fn tenvec_is_a_full_contraction((t, mode, p, q) in probe()) {
        let out = t.tenvec(mode, &p, &q).unwrap();
        let (a, b) = mode.others();
        let mut expected = DVector::zeros(t.shape()[mode.index()]);
        let [n1, n2, n3] = t.shape();
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let idx = [i, j, k];
                    expected[idx[mode.index()]] += t.get(i, j, k) * p[idx[a.index()]] * q[idx[b.index()]];
                }
            }
        }
        prop_assert!(close(&out, &expected, 1e-12));
    }

    #[test]
    fn unfold_refold_round_trip(t in shape_strategy().prop_flat_map(dense_of), mode in mode_strategy()) {
        let m = t.unfold(mode);
        prop_assert_eq!(m.nrows(), t.shape()[mode.index()]);
        prop_assert_eq!(DenseTensor3::refold(&m, mode, t.shape()).unwrap(), t);
    }

    #[test]
    fn densify_recovers_tensor(t in shape_strategy().prop_flat_map(dense_of)) {
        let counting = CountingSource::new(&t);
        let back = densify(&counting).unwrap();
        prop_assert_eq!(&back, &t);
        let [_, n2, n3] = t.shape();
        prop_assert_eq!(counting.count(), (n2 * n3) as u64);
    }

    #[test]
    fn basis_stays_orthonormal(cols in (2usize..8).prop_flat_map(|n| prop::collection::vec(vec_of(n), 1..n))) {
        let mut basis = Basis::new(cols[0].len());
        for c in &cols {
            let o = basis.orthogonalize(c);
            if !o.is_breakdown(1e-8) {
                basis.push(o.unit());
            }
        }
        prop_assert!(basis.gram_deviation() <= 1e-12);
    }

    #[test]
    fn als_sigma_is_non_decreasing((t, _, _, _) in probe(), seed in 0u64..1000) {
        let [_, n2, n3] = t.shape();
        let mut rng = tenkrylov::linalg::seeded_rng(seed);
        let v0 = tenkrylov::linalg::random_unit(&mut rng, n2);
        let w0 = tenkrylov::linalg::random_unit(&mut rng, n3);
        let res = als_rank1(&t, &v0, &w0, 8).unwrap();
        for w in res.history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * w[0].max(1.0));
        }
    }

    #[test]
    fn wedderburn_update_drops_rank(
        (a, x, y) in (2usize..7, 2usize..7).prop_flat_map(|(m, n)| (mat_of(m, n), vec_of(m), vec_of(n)))
    ) {
        let omega = x.dot(&(&a * &y));
        prop_assume!(omega.abs() > 1e-3 * a.norm() * x.norm() * y.norm());
        let b = wedderburn_update(&a, &x, &y).unwrap();
        let ra = numerical_rank(&a, 1e-10);
        prop_assert_eq!(numerical_rank(&b, 1e-10 * a.norm() / b.norm().max(1e-300)), ra - 1);
    }
}

#[test]
fn backend_equivalence_on_seeded_probes() {
    // Deterministic sweep in addition to the randomized cases above.
    let mut rng = tenkrylov::linalg::seeded_rng(77);
    for case in 0..100 {
        let shape = [2 + case % 4, 3 + case % 3, 2 + case % 5];
        let rank = 1 + case % 3;
        let factors = shape.map(|n| tenkrylov::linalg::random_gaussian_matrix(&mut rng, n, rank));
        let canon = CanonicalTensor::new(factors).unwrap();
        let dense = canon.to_dense();
        let sparse = SparseTensor3::from_dense(&dense);
        let tucker = TuckerTensor::from_dense(&dense);
        for mode in Mode::ALL {
            let (a, b) = mode.others();
            let p = tenkrylov::linalg::random_gaussian(&mut rng, shape[a.index()]);
            let q = tenkrylov::linalg::random_gaussian(&mut rng, shape[b.index()]);
            let reference = dense.tenvec(mode, &p, &q).unwrap();
            for other in [
                canon.tenvec(mode, &p, &q).unwrap(),
                sparse.tenvec(mode, &p, &q).unwrap(),
                tucker.tenvec(mode, &p, &q).unwrap(),
            ] {
                assert!(close(&reference, &other, 1e-12), "case {case}, mode {mode}");
            }
        }
    }
}
