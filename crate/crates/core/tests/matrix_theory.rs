use nalgebra::{DMatrix, DVector};
use tenkrylov::linalg::{random_gaussian_matrix, random_unit, seeded_rng};
use tenkrylov::matrix_wedderburn::{
    lanczos_bidiag, optimal_pivot, wcp_approximate, wcp_lanczos, wedderburn_update,
    LeadingVectorPolicy, MatrixWedderburnState, Transposed,
};

const TRIALS: u64 = 100;

fn random_matrix(seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    let m = 2 + (seed as usize * 7) % 39;
    let n = 2 + (seed as usize * 5) % 29;
    random_gaussian_matrix(&mut rng, m, n)
}

fn projector(x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let xk = x.columns(0, k);
    DMatrix::identity(x.nrows(), x.nrows()) - xk * xk.transpose()
}

fn check_projectors(st: &MatrixWedderburnState) {
    let x = &st.basis;
    let r = x.ncols();
    for k in 0..=r {
        let p = projector(x, k);
        assert!((&p * &p - &p).amax() <= 1e-12);
        for m in 0..=r {
            let q = projector(x, m);
            assert!((&p * &q - projector(x, k.max(m))).amax() <= 1e-12);
        }
        for m in 0..k {
            assert!((&p * x.column(m)).norm() <= 1e-10);
        }
    }
}

/// Biconjugate right vectors `v_k = y_k - Σ_{m<k} v_m (x_mᵀ A y_k) / (x_mᵀ A v_m)`.
fn biconjugate_v(a: &DMatrix<f64>, st: &MatrixWedderburnState) -> DMatrix<f64> {
    let x = &st.basis;
    let y = &st.leading;
    let mut vs: Vec<DVector<f64>> = Vec::new();
    for k in 0..x.ncols() {
        let yk = y.column(k).into_owned();
        let mut v = yk.clone();
        for (m, vm) in vs.iter().enumerate() {
            let xm = x.column(m);
            let coeff = xm.dot(&(a * &yk)) / xm.dot(&(a * vm));
            v -= vm * coeff;
        }
        vs.push(v);
    }
    if vs.is_empty() {
        DMatrix::zeros(a.ncols(), 0)
    } else {
        DMatrix::from_columns(&vs)
    }
}

fn run_wcp(a: &DMatrix<f64>, seed: u64) -> MatrixWedderburnState {
    let r_max = a.nrows().min(a.ncols()).min(8);
    wcp_approximate(
        a,
        &LeadingVectorPolicy::Random { seed },
        1e-12,
        1e-14,
        r_max,
        false,
    )
    .unwrap()
}

#[test]
fn projector_laws() {
    for seed in 0..TRIALS {
        let a = random_matrix(seed);
        check_projectors(&run_wcp(&a, seed));
    }
}

#[test]
fn row_pivoting_through_transpose() {
    for seed in 0..TRIALS {
        let a = random_matrix(seed);
        let st = wcp_approximate(
            &Transposed(&a),
            &LeadingVectorPolicy::Random { seed },
            1e-12,
            1e-14,
            a.nrows().min(a.ncols()).min(8),
            false,
        )
        .unwrap();
        check_projectors(&st);
        let at = a.transpose();
        assert!((st.basis.transpose() * &at - st.images.transpose()).amax() <= 1e-10 * a.norm());
    }
}

#[test]
fn biconjugacy_and_interpolation() {
    for seed in 0..TRIALS {
        let a = random_matrix(seed);
        let st = run_wcp(&a, seed);
        let v = biconjugate_v(&a, &st);
        let d = st.basis.transpose() * &a * &v;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if i == j {
                    assert!(
                        (d[(i, i)] - st.omegas[i]).abs() <= 1e-10 * st.omegas[i].abs().max(1.0)
                    );
                } else {
                    assert!(
                        d[(i, j)].abs() <= 1e-9,
                        "seed {seed}: ({i},{j}) = {}",
                        d[(i, j)]
                    );
                }
            }
        }
        let approx = st.approximation();
        let x = &st.basis;
        assert!((approx.transpose() * x - a.transpose() * x).norm() <= 1e-10 * a.norm());
        let nrm2: f64 = st.errors.iter().map(|e| e * e).sum();
        assert!((nrm2.sqrt() - st.nrm).abs() <= 1e-12 * st.nrm.max(1.0));
    }
}

#[test]
fn optimal_pivot_is_minimal() {
    let mut violations = 0;
    for seed in 0..TRIALS {
        let mut rng = seeded_rng(1000 + seed);
        let a = random_gaussian_matrix(&mut rng, 6, 6);
        let y = random_unit(&mut rng, 6);
        let best = wedderburn_update(&a, &optimal_pivot(&a, &y).unwrap(), &y)
            .unwrap()
            .norm();
        for _ in 0..200 {
            let x = random_unit(&mut rng, 6);
            if let Ok(b) = wedderburn_update(&a, &x, &y) {
                if b.norm() < best - 1e-12 * a.norm() {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn lanczos_wcp_agree_and_tridiagonal() {
    for seed in 0..TRIALS {
        let a = random_matrix(seed);
        let steps = a.nrows().min(a.ncols()).min(6).saturating_sub(1).max(1);
        let mut rng = seeded_rng(2000 + seed);
        let y1 = random_unit(&mut rng, a.ncols());
        let wcp = wcp_lanczos(&a, &y1, 1e-12, 1e-14, steps).unwrap();
        // Lanczos bidiagonalization started on the right from y1.
        let lnc = lanczos_bidiag(&a.transpose(), &y1, steps).unwrap();
        let k = wcp.rank().min(lnc.right.ncols());
        for c in 0..k {
            let w = wcp.basis.column(c);
            let l = lnc.right.column(c);
            let s = w.dot(&l).signum();
            assert!((w - l * s).amax() <= 1e-8, "seed {seed}, column {c}");
        }
        let t = wcp.basis.transpose() * &a * &wcp.leading;
        for i in 0..t.nrows() {
            for j in 0..t.ncols() {
                // x_iᵀ A y_j vanishes unless i ∈ {j-2, j-1, j}.
                if i + 2 < j || i > j {
                    assert!(t[(i, j)].abs() <= 1e-8 * a.norm(), "seed {seed}: ({i},{j})");
                }
            }
        }
        let y = &wcp.leading;
        for k in 0..y.ncols() {
            for m in 0..k.saturating_sub(1) {
                assert!(y.column(k).dot(&y.column(m)).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn exact_low_rank_recovery() {
    for seed in 0..20 {
        let mut rng = seeded_rng(3000 + seed);
        let a = random_gaussian_matrix(&mut rng, 30, 4) * random_gaussian_matrix(&mut rng, 4, 20);
        let st = wcp_approximate(
            &a,
            &LeadingVectorPolicy::Random { seed },
            1e-12,
            1e-10,
            20,
            false,
        )
        .unwrap();
        assert!(st.rank() <= 4);
        assert!((&a - st.approximation()).norm() <= 1e-10 * a.norm());
    }
}
