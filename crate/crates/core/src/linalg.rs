//! Small dense linear-algebra helpers shared by the algorithms: growing
//! orthonormal bases with re-orthogonalization, seeded random vectors and
//! truncated SVD wrappers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Column vector of `f64`.
pub type Vector = DVector<f64>;
/// Column-major dense matrix of `f64`.
pub type Matrix = DMatrix<f64>;

/// Seeded generator used by every stochastic routine.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Gaussian vector normalized to unit length.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    loop {
        let v = random_gaussian(rng, n);
        let nrm = v.norm();
        if n == 0 {
            return v;
        }
        if nrm > 0.0 {
            return v / nrm;
        }
    }
}

pub fn random_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)),
    )
}

/// `n x r` matrix with orthonormal columns (`r <= n`), Q factor of a Gaussian matrix.
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> Matrix {
    assert!(
        r <= n,
        "cannot draw {r} orthonormal columns in dimension {n}"
    );
    if r == 0 {
        return Matrix::zeros(n, 0);
    }
    let g = random_gaussian_matrix(rng, n, r);
    g.qr().q()
}

/// Max-abs entry of `XᵀX - I`.
pub fn gram_deviation(x: &Matrix) -> f64 {
    let g = x.transpose() * x;
    let mut dev = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Singular values of `m` sorted in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * σ₁`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&v| v > rel_tol * s1).count(),
        _ => 0,
    }
}

/// Dominant singular triple `(σ, u, v)` of a dense matrix. A zero (or empty)
/// matrix yields `σ = 0` with unit first basis vectors.
pub fn top_singular_triple(m: &Matrix) -> (f64, Vector, Vector) {
    let (rows, cols) = m.shape();
    let unit = |n: usize| {
        let mut e = Vector::zeros(n);
        if n > 0 {
            e[0] = 1.0;
        }
        e
    };
    if rows == 0 || cols == 0 || m.iter().all(|&v| v == 0.0) {
        return (0.0, unit(rows), unit(cols));
    }
    let svd = m.clone().svd(true, true);
    let (idx, &sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let u = svd
        .u
        .as_ref()
        .expect("requested U")
        .column(idx)
        .into_owned();
    let v = svd.v_t.as_ref().expect("requested Vᵀ").row(idx).transpose();
    (sigma, u, v)
}

/// Leading `r` left singular vectors of `m` (ordered by singular value), and
/// the corresponding singular values.
pub fn leading_left_singular(m: &Matrix, r: usize) -> (Matrix, Vec<f64>) {
    let rows = m.nrows();
    if r == 0 || m.ncols() == 0 {
        return (Matrix::zeros(rows, 0), Vec::new());
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let r = r.min(order.len());
    let cols: Vec<Vector> = order[..r]
        .iter()
        .map(|&i| u.column(i).into_owned())
        .collect();
    let values = order[..r].iter().map(|&i| svd.singular_values[i]).collect();
    (Matrix::from_columns(&cols), values)
}

/// Result of orthogonalizing a candidate direction against a basis.
#[derive(Clone, Debug)]
pub struct Orthogonalized {
    /// Component orthogonal to the basis.
    pub vector: Vector,
    /// Norm of the raw candidate.
    pub raw_norm: f64,
    /// Norm of the orthogonal component.
    pub norm: f64,
}

impl Orthogonalized {
    /// Breakdown test `‖x'‖ < tol·‖x‖`; an exactly zero candidate also breaks down.
    pub fn is_breakdown(&self, tol: f64) -> bool {
        !(self.norm > 0.0 && self.norm >= tol * self.raw_norm)
    }

    pub fn unit(&self) -> Vector {
        &self.vector / self.norm
    }
}

/// Growing orthonormal basis `X = [x_1 ... x_k]` of an `n`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    dim: usize,
    cols: Vec<Vector>,
}

impl Basis {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            cols: Vec::new(),
        }
    }

    /// Wraps the columns of `m`; they are trusted to be orthonormal.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            dim: m.nrows(),
            cols: m.column_iter().map(|c| c.into_owned()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn columns(&self) -> &[Vector] {
        &self.cols
    }

    pub fn column(&self, i: usize) -> &Vector {
        &self.cols[i]
    }

    pub fn last(&self) -> Option<&Vector> {
        self.cols.last()
    }

    pub fn push(&mut self, v: Vector) {
        debug_assert_eq!(v.len(), self.dim);
        self.cols.push(v);
    }

    pub fn to_matrix(&self) -> Matrix {
        if self.cols.is_empty() {
            Matrix::zeros(self.dim, 0)
        } else {
            Matrix::from_columns(&self.cols)
        }
    }

    /// Coordinates `Xᵀ v`.
    pub fn coords(&self, v: &Vector) -> Vector {
        Vector::from_iterator(self.cols.len(), self.cols.iter().map(|c| c.dot(v)))
    }

    /// Linear combination `X c`.
    pub fn expand(&self, c: &Vector) -> Vector {
        debug_assert_eq!(c.len(), self.cols.len());
        let mut out = Vector::zeros(self.dim);
        for (col, &w) in self.cols.iter().zip(c.iter()) {
            out.axpy(w, col, 1.0);
        }
        out
    }

    /// `(I - X Xᵀ) v` by one classical Gram–Schmidt sweep.
    pub fn complement_once(&self, v: &Vector) -> Vector {
        if self.cols.is_empty() {
            return v.clone();
        }
        let c = self.coords(v);
        let mut out = v.clone();
        for (col, &w) in self.cols.iter().zip(c.iter()) {
            out.axpy(-w, col, 1.0);
        }
        out
    }

    /// Orthogonalizes `v` against the basis with two classical Gram–Schmidt
    /// sweeps.
    pub fn orthogonalize(&self, v: &Vector) -> Orthogonalized {
        let raw_norm = v.norm();
        let once = self.complement_once(v);
        let vector = self.complement_once(&once);
        let norm = vector.norm();
        Orthogonalized {
            vector,
            raw_norm,
            norm,
        }
    }

    pub fn gram_deviation(&self) -> f64 {
        gram_deviation(&self.to_matrix())
    }
}
