//! Matrix-level Wedderburn rank reduction: single updates, elimination with
//! column pivoting (WCP), Lanczos bidiagonalization and the Lanczos-flavoured
//! WCP. Row pivoting is obtained by running WCP on [`Transposed`].

use crate::error::dim_err;
use crate::linalg::{random_unit, seeded_rng, Basis};
use crate::{Error, Matrix, Result, Vector};

/// Matrix accessed only through products with vectors.
pub trait MatvecSource: Send + Sync {
    /// `(rows, cols)`.
    fn dims(&self) -> (usize, usize);

    /// `A x` for `x` of length `cols`.
    fn apply(&self, x: &Vector) -> Result<Vector>;

    /// `Aᵀ y` for `y` of length `rows`.
    fn apply_transpose(&self, y: &Vector) -> Result<Vector>;

    /// `‖A‖_F` when cheaply known; used to scale breakdown thresholds.
    fn frobenius_hint(&self) -> Option<f64> {
        None
    }
}

impl MatvecSource for Matrix {
    fn dims(&self) -> (usize, usize) {
        self.shape()
    }

    fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.ncols() {
            return dim_err(format!(
                "matvec with {} columns got a vector of length {}",
                self.ncols(),
                x.len()
            ));
        }
        Ok(self * x)
    }

    fn apply_transpose(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.nrows() {
            return dim_err(format!(
                "transposed matvec with {} rows got a vector of length {}",
                self.nrows(),
                y.len()
            ));
        }
        Ok(self.tr_mul(y))
    }

    fn frobenius_hint(&self) -> Option<f64> {
        Some(self.norm())
    }
}

impl<S: MatvecSource + ?Sized> MatvecSource for &S {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn apply(&self, x: &Vector) -> Result<Vector> {
        (**self).apply(x)
    }
    fn apply_transpose(&self, y: &Vector) -> Result<Vector> {
        (**self).apply_transpose(y)
    }
    fn frobenius_hint(&self) -> Option<f64> {
        (**self).frobenius_hint()
    }
}

/// `Aᵀ` as a matvec source.
#[derive(Clone, Copy, Debug)]
pub struct Transposed<S>(pub S);

impl<S: MatvecSource> MatvecSource for Transposed<S> {
    fn dims(&self) -> (usize, usize) {
        let (m, n) = self.0.dims();
        (n, m)
    }
    fn apply(&self, x: &Vector) -> Result<Vector> {
        self.0.apply_transpose(x)
    }
    fn apply_transpose(&self, y: &Vector) -> Result<Vector> {
        self.0.apply(y)
    }
    fn frobenius_hint(&self) -> Option<f64> {
        self.0.frobenius_hint()
    }
}

/// `B = A - (A y)(xᵀ A) / (xᵀ A y)`.
pub fn wedderburn_update(a: &Matrix, x: &Vector, y: &Vector) -> Result<Matrix> {
    if x.len() != a.nrows() || y.len() != a.ncols() {
        return dim_err(format!(
            "Wedderburn update of a {}x{} matrix with vectors of lengths {} and {}",
            a.nrows(),
            a.ncols(),
            x.len(),
            y.len()
        ));
    }
    let ay = a * y;
    let omega = x.dot(&ay);
    let threshold = 1e-14 * a.norm() * x.norm() * y.norm();
    if omega.is_nan() || omega.abs() < threshold || omega == 0.0 {
        return Err(Error::SingularPivot { omega, threshold });
    }
    let xa = a.tr_mul(x);
    Ok(a - (ay * xa.transpose()) / omega)
}

/// Pivot minimizing the Frobenius residual of a Wedderburn step for fixed
/// `y`: `A y / ‖A y‖`.
pub fn optimal_pivot<S: MatvecSource + ?Sized>(a: &S, y: &Vector) -> Result<Vector> {
    let ay = a.apply(y)?;
    let nrm = ay.norm();
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    Ok(ay / nrm)
}

/// How WCP picks the leading vector `y_k`.
#[derive(Clone, Debug, PartialEq)]
pub enum LeadingVectorPolicy {
    /// Independent seeded random unit vectors.
    Random { seed: u64 },
    /// `y_{k+1} = Aᵀ x_k / ‖Aᵀ x_k‖`, seeded random `y_1`.
    Lanczos { seed: u64 },
    /// Caller-supplied vectors; runs stop with `MaxRank` when exhausted.
    Sequence(Vec<Vector>),
}

/// Outcome of a matrix Wedderburn run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixTermination {
    Converged,
    /// Breakdown when attempting update number `step`.
    Breakdown {
        step: usize,
    },
    MaxRank,
}

/// State of WCP-type runs: `Ã = X Bᵀ` with `B = Aᵀ X`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixWedderburnState {
    /// Orthonormal pivots `x_k` (columns).
    pub basis: Matrix,
    /// Row images `b_k = Aᵀ x_k` (columns).
    pub images: Matrix,
    /// Leading vectors `y_k` actually used, normalized.
    pub leading: Matrix,
    /// `ω_k = x_kᵀ A_{k-1} y_k`.
    pub omegas: Vec<f64>,
    /// Per-step `‖b_k‖`.
    pub errors: Vec<f64>,
    pub err: f64,
    pub nrm: f64,
    pub termination: MatrixTermination,
    /// Number of breakdown retries taken.
    pub retries: usize,
}

impl MatrixWedderburnState {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Dense `X Bᵀ`.
    pub fn approximation(&self) -> Matrix {
        &self.basis * self.images.transpose()
    }
}

fn columns_matrix(rows: usize, cols: &[Vector]) -> Matrix {
    if cols.is_empty() {
        Matrix::zeros(rows, 0)
    } else {
        Matrix::from_columns(cols)
    }
}

fn check_params(tol: f64, eps: f64, r_max: usize) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must lie in (0, 1), got {tol}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if r_max == 0 {
        return Err(Error::InvalidArgument("r_max must be at least 1".into()));
    }
    Ok(())
}

/// Wedderburn elimination with column pivoting.
///
/// With `retry` set, a breakdown is retried once with a fresh seeded random
/// leading vector before the run terminates.
pub fn wcp_approximate<S: MatvecSource + ?Sized>(
    a: &S,
    policy: &LeadingVectorPolicy,
    tol: f64,
    eps: f64,
    r_max: usize,
    retry: bool,
) -> Result<MatrixWedderburnState> {
    check_params(tol, eps, r_max)?;
    let (m, n) = a.dims();
    let seed = match policy {
        LeadingVectorPolicy::Random { seed } | LeadingVectorPolicy::Lanczos { seed } => *seed,
        LeadingVectorPolicy::Sequence(_) => 0,
    };
    let mut rng = seeded_rng(seed);
    let mut retry_rng = seeded_rng(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut basis = Basis::new(m);
    let mut images: Vec<Vector> = Vec::new();
    let mut leading: Vec<Vector> = Vec::new();
    let mut omegas = Vec::new();
    let mut errors = Vec::new();
    let mut nrm2 = 0.0;
    let mut err = 0.0;
    let mut retries = 0;
    let termination;

    let mut k = 0;
    loop {
        if k == r_max {
            termination = MatrixTermination::MaxRank;
            break;
        }
        k += 1;
        let y = match policy {
            LeadingVectorPolicy::Random { .. } => random_unit(&mut rng, n),
            LeadingVectorPolicy::Lanczos { .. } => match images.last() {
                Some(b) if b.norm() > 0.0 => b / b.norm(),
                _ => random_unit(&mut rng, n),
            },
            LeadingVectorPolicy::Sequence(seq) => match seq.get(k - 1) {
                Some(v) => v.clone(),
                None => {
                    termination = MatrixTermination::MaxRank;
                    break;
                }
            },
        };
        let mut y = y;
        let mut ortho = basis.orthogonalize(&a.apply(&y)?);
        if ortho.is_breakdown(tol) && retry {
            retries += 1;
            y = random_unit(&mut retry_rng, n);
            ortho = basis.orthogonalize(&a.apply(&y)?);
        }
        if ortho.is_breakdown(tol) {
            termination = MatrixTermination::Breakdown { step: k };
            break;
        }
        let x = ortho.unit();
        let b = a.apply_transpose(&x)?;
        err = b.norm();
        nrm2 += err * err;
        omegas.push(ortho.norm);
        errors.push(err);
        leading.push(y);
        images.push(b);
        basis.push(x);
        if err <= eps * nrm2.sqrt() {
            termination = MatrixTermination::Converged;
            break;
        }
    }

    Ok(MatrixWedderburnState {
        basis: basis.to_matrix(),
        images: columns_matrix(n, &images),
        leading: columns_matrix(n, &leading),
        omegas,
        errors,
        err,
        nrm: nrm2.sqrt(),
        termination,
        retries,
    })
}

/// Output of [`lanczos_bidiag`].
#[derive(Clone, Debug, PartialEq)]
pub struct LanczosBidiag {
    /// `[x_0 x_1 ... x_k]`, starting vector first.
    pub left: Matrix,
    /// `[y_1 ... y_k]`.
    pub right: Matrix,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Step at which `α_k` or `β_k` vanished, if any.
    pub breakdown: Option<usize>,
}

/// Golub–Kahan bidiagonalization started from the unit vector `x0`, with
/// full reorthogonalization of both bases.
///
/// With `x0` kept as the first left vector, `A y_k = α_k x_{k-1} + β_k x_k`.
pub fn lanczos_bidiag<S: MatvecSource + ?Sized>(
    a: &S,
    x0: &Vector,
    steps: usize,
) -> Result<LanczosBidiag> {
    let (m, n) = a.dims();
    if x0.len() != m {
        return dim_err(format!(
            "start vector has length {}, expected {}",
            x0.len(),
            m
        ));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if (x0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(
            "start vector must have unit norm".into(),
        ));
    }
    let mut left = Basis::new(m);
    let mut right = Basis::new(n);
    left.push(x0.clone());
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut breakdown = None;
    let mut scale = a.frobenius_hint().unwrap_or(0.0);

    for k in 1..=steps {
        let y = a.apply_transpose(left.last().expect("non-empty"))?;
        if a.frobenius_hint().is_none() {
            scale = scale.max(y.norm());
        }
        let mut y = y;
        if let (Some(prev), Some(&beta)) = (right.last(), betas.last()) {
            y.axpy(-beta, prev, 1.0);
        }
        let y = right.orthogonalize(&y);
        if y.norm.is_nan() || y.norm <= 1e-14 * scale {
            breakdown = Some(k);
            break;
        }
        alphas.push(y.norm);
        let yk = y.unit();
        let mut x = a.apply(&yk)?;
        right.push(yk);
        if a.frobenius_hint().is_none() {
            scale = scale.max(x.norm());
        }
        x.axpy(-y.norm, left.last().expect("non-empty"), 1.0);
        let x = left.orthogonalize(&x);
        if x.norm.is_nan() || x.norm <= 1e-14 * scale {
            breakdown = Some(k);
            break;
        }
        betas.push(x.norm);
        left.push(x.unit());
    }
    Ok(LanczosBidiag {
        left: left.to_matrix(),
        right: right.to_matrix(),
        alphas,
        betas,
        breakdown,
    })
}

/// WCP with the Lanczos-like leading vector `y_{k+1} = Aᵀ x_k`.
///
/// Orthogonalization uses the two-term short recurrence against `x_{k-2}`,
/// `x_{k-1}` followed by one full Gram–Schmidt sweep. A breakdown returns
/// the approximation accumulated so far.
pub fn wcp_lanczos<S: MatvecSource + ?Sized>(
    a: &S,
    y1: &Vector,
    tol: f64,
    eps: f64,
    r_max: usize,
) -> Result<MatrixWedderburnState> {
    check_params(tol, eps, r_max)?;
    let (m, n) = a.dims();
    if y1.len() != n {
        return dim_err(format!(
            "leading vector has length {}, expected {}",
            y1.len(),
            n
        ));
    }
    let mut basis = Basis::new(m);
    let mut images: Vec<Vector> = Vec::new();
    let mut leading: Vec<Vector> = Vec::new();
    let mut omegas = Vec::new();
    let mut errors = Vec::new();
    let mut nrm2 = 0.0;
    let mut err = 0.0;
    let mut y = y1.clone();
    let termination;

    let mut k = 0;
    loop {
        if k == r_max {
            termination = MatrixTermination::MaxRank;
            break;
        }
        k += 1;
        let x = a.apply(&y)?;
        let raw_norm = x.norm();
        let mut short = x;
        let cols = basis.columns();
        for prev in cols.iter().rev().take(2) {
            let c = prev.dot(&short);
            short.axpy(-c, prev, 1.0);
        }
        let reorth = basis.complement_once(&short);
        let norm = reorth.norm();
        if !(norm > 0.0 && norm >= tol * raw_norm) {
            termination = MatrixTermination::Breakdown { step: k };
            break;
        }
        let xk = reorth / norm;
        let b = a.apply_transpose(&xk)?;
        err = b.norm();
        nrm2 += err * err;
        omegas.push(norm);
        errors.push(err);
        leading.push(y.clone());
        basis.push(xk);
        if err <= eps * nrm2.sqrt() {
            images.push(b);
            termination = MatrixTermination::Converged;
            break;
        }
        y = &b / err;
        images.push(b);
    }

    Ok(MatrixWedderburnState {
        basis: basis.to_matrix(),
        images: columns_matrix(n, &images),
        leading: columns_matrix(n, &leading),
        omegas,
        errors,
        err,
        nrm: nrm2.sqrt(),
        termination,
        retries: 0,
    })
}
