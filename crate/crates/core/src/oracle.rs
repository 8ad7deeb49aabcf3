//! Dense ground-truth baselines: truncated HOSVD, Tucker-ALS and a
//! multi-restart rank-(1,1,1) search.

use log::warn;

use crate::krylov::Rank1Result;
use crate::linalg::{leading_left_singular, numerical_rank, random_unit, seeded_rng};
use crate::tensor::{DenseTensor3, TuckerTensor};
use crate::{Error, Matrix, Mode, Result, TenvecSource, Vector};

/// Relative singular value threshold below which Tucker-ALS treats an
/// unfolding as rank deficient.
pub const COLLAPSE_TOL: f64 = 1e-12;

fn check_ranks(shape: [usize; 3], ranks: [usize; 3]) -> Result<()> {
    for l in 0..3 {
        if ranks[l] == 0 || ranks[l] > shape[l] {
            return Err(Error::InvalidArgument(format!(
                "mode-{} rank {} must lie in 1..={}",
                l + 1,
                ranks[l],
                shape[l]
            )));
        }
    }
    Ok(())
}

/// Truncated HOSVD: leading left singular vectors of every unfolding and
/// the optimal core for them.
pub fn hosvd(t: &DenseTensor3, ranks: [usize; 3]) -> Result<TuckerTensor> {
    check_ranks(t.shape(), ranks)?;
    let factors = Mode::ALL.map(|m| leading_left_singular(&t.unfold(m), ranks[m.index()]).0);
    let core = t.project([&factors[0], &factors[1], &factors[2]])?;
    TuckerTensor::new(core, factors)
}

/// Mode singular values (descending) of every unfolding.
pub fn mode_singular_values(t: &DenseTensor3) -> [Vec<f64>; 3] {
    Mode::ALL.map(|m| crate::linalg::singular_values(&t.unfold(m)))
}

/// `‖A - Ã‖_F` for a dense `A`.
pub fn dense_residual(t: &DenseTensor3, approx: &TuckerTensor) -> Result<f64> {
    Ok(t.sub(&approx.reconstruct())?.frobenius_norm())
}

/// `‖A - A ×_1 UUᵀ ×_2 VVᵀ ×_3 WWᵀ‖_F` for orthonormal bases (possibly
/// empty).
pub fn projection_residual(t: &DenseTensor3, bases: [&Matrix; 3]) -> Result<f64> {
    let mut p = t.project(bases)?;
    for mode in Mode::ALL {
        p = p.mode_multiply(mode, bases[mode.index()])?;
    }
    Ok(t.sub(&p)?.frobenius_norm())
}

/// `A ×_a X_aᵀ ×_b X_bᵀ` unfolded along `mode` (`n_mode × r_a r_b`), from
/// `r_a · r_b` tenvecs. Column `p + r_a q` pairs `X_a(:,p)` with `X_b(:,q)`.
fn partial_projection<S: TenvecSource + ?Sized>(
    src: &S,
    mode: Mode,
    xa: &Matrix,
    xb: &Matrix,
) -> Result<Matrix> {
    let n = src.shape()[mode.index()];
    let (ra, rb) = (xa.ncols(), xb.ncols());
    let mut cols = Vec::with_capacity(ra * rb);
    for q in 0..rb {
        let bq = xb.column(q).into_owned();
        for p in 0..ra {
            cols.push(src.tenvec(mode, &xa.column(p).into_owned(), &bq)?);
        }
    }
    if cols.is_empty() {
        return Ok(Matrix::zeros(n, 0));
    }
    Ok(Matrix::from_columns(&cols))
}

/// Tucker-ALS: each mode factor in turn becomes the leading left singular
/// basis of `A` projected on the other two factors. One iteration costs
/// `r₂r₃ + r₃r₁ + r₁r₂` tenvecs and the core comes for free. A mode whose
/// projected unfolding has lower numerical rank than requested shrinks,
/// with a warning.
pub fn tucker_als<S: TenvecSource + ?Sized>(
    src: &S,
    init: &TuckerTensor,
    iterations: usize,
) -> Result<TuckerTensor> {
    if init.shape() != src.shape() {
        return Err(Error::Dimension(format!(
            "initial guess has shape {:?}, source has {:?}",
            init.shape(),
            src.shape()
        )));
    }
    for mode in Mode::ALL {
        if !init.is_orthonormal(mode) {
            return Err(Error::NotOrthonormal {
                mode,
                deviation: crate::linalg::gram_deviation(init.factor(mode)),
            });
        }
    }
    let mut factors = init.factors().clone();
    if iterations == 0 {
        return Ok(init.clone());
    }
    let mut last = Matrix::zeros(0, 0);
    for _ in 0..iterations {
        for mode in Mode::ALL {
            let (a, b) = mode.others();
            let m = partial_projection(src, mode, &factors[a.index()], &factors[b.index()])?;
            let wanted = factors[mode.index()].ncols();
            let available = numerical_rank(&m, COLLAPSE_TOL);
            let r = if available < wanted {
                warn!("Tucker-ALS: mode-{mode} rank collapsed from {wanted} to {available}");
                available
            } else {
                wanted
            };
            factors[mode.index()] = leading_left_singular(&m, r).0;
            last = m;
        }
    }
    // The mode-3 projection of the final sweep already holds the core.
    let ranks = factors.each_ref().map(|f| f.ncols());
    let coords = factors[2].tr_mul(&last);
    let core = DenseTensor3::from_fn(ranks, |i, j, k| coords[(k, i + ranks[0] * j)]);
    TuckerTensor::new(core, factors)
}

fn contract(t: &DenseTensor3, skip: Mode, p: &Vector, q: &Vector) -> Vector {
    let [n1, n2, n3] = t.shape();
    let mut out = Vector::zeros(t.shape()[skip.index()]);
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let a = t.get(i, j, k);
                match skip {
                    Mode::One => out[i] += a * p[j] * q[k],
                    Mode::Two => out[j] += a * p[k] * q[i],
                    Mode::Three => out[k] += a * p[i] * q[j],
                }
            }
        }
    }
    out
}

/// Best rank-(1,1,1) approximation over `restarts` dense ALS runs of
/// `sweeps` sweeps. The first restart starts from `v, w` drawn (in that
/// order) from the seeded generator, like a single seeded ALS run.
pub fn brute_rank1(t: &DenseTensor3, restarts: usize, sweeps: usize, seed: u64) -> Rank1Result {
    let [n1, n2, n3] = t.shape();
    let mut rng = seeded_rng(seed);
    let mut best: Option<Rank1Result> = None;
    for _ in 0..restarts.max(1) {
        let mut u = Vector::zeros(n1);
        let mut v = random_unit(&mut rng, n2);
        let mut w = random_unit(&mut rng, n3);
        let mut sigma = 0.0;
        let mut history = Vec::new();
        'sweeps: for _ in 0..sweeps.max(1) {
            for skip in Mode::ALL {
                let x = match skip {
                    Mode::One => contract(t, skip, &v, &w),
                    Mode::Two => contract(t, skip, &w, &u),
                    Mode::Three => contract(t, skip, &u, &v),
                };
                let s = x.norm();
                if s == 0.0 {
                    sigma = 0.0;
                    break 'sweeps;
                }
                sigma = s;
                match skip {
                    Mode::One => u = x / s,
                    Mode::Two => v = x / s,
                    Mode::Three => w = x / s,
                }
            }
            history.push(sigma);
        }
        if best.as_ref().is_none_or(|b| sigma > b.sigma) {
            best = Some(Rank1Result {
                sigma,
                u,
                v,
                w,
                history,
            });
        }
    }
    best.expect("at least one restart")
}
