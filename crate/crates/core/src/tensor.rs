//! Dense 3-tensors, unfoldings, mode products and the Tucker format.
//!
//! Linearization: entry `(i, j, k)` of an `n1 x n2 x n3` tensor lives at
//! `i + n1*j + n1*n2*k` (first index fastest). Unfoldings use the cyclic
//! pairing `A(1)[i, (j,k)]`, `A(2)[j, (k,i)]`, `A(3)[k, (i,j)]`, with the
//! first listed index of the pair fastest in the column index.

use crate::error::dim_err;
use crate::krylov::als_rank1;
use crate::linalg::{gram_deviation, random_unit, seeded_rng};
use crate::source::TenvecSource;
use crate::{Error, Mode, Result};

pub use crate::linalg::{Matrix, Vector};

/// Tolerance used to decide whether a factor matrix is orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor3 {
    shape: [usize; 3],
    values: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if values.len() != len {
            return dim_err(format!(
                "{} values supplied for a {}x{}x{} tensor",
                values.len(),
                shape[0],
                shape[1],
                shape[2]
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor values"));
        }
        Ok(Self { shape, values })
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    let idx = t.offset(i, j, k);
                    t.values[idx] = f(i, j, k);
                }
            }
        }
        t
    }

    /// `σ · u ⊗ v ⊗ w`.
    pub fn rank1(sigma: f64, u: &Vector, v: &Vector, w: &Vector) -> Self {
        Self::from_fn([u.len(), v.len(), w.len()], |i, j, k| {
            sigma * u[i] * v[j] * w[k]
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.shape[0] * (j + self.shape[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.offset(i, j, k);
        self.values[idx] = value;
    }

    /// Entry addressed by an index triple.
    #[inline]
    pub fn at(&self, idx: [usize; 3]) -> f64 {
        self.get(idx[0], idx[1], idx[2])
    }

    /// Mode unfolding, see the module docs for the column convention.
    pub fn unfold(&self, mode: Mode) -> Matrix {
        let m = mode.index();
        let (a, b) = mode.others();
        let (a, b) = (a.index(), b.index());
        let [n1, n2, n3] = self.shape;
        let mut out = Matrix::zeros(self.shape[m], self.shape[a] * self.shape[b]);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    let idx = [i, j, k];
                    let col = idx[a] + self.shape[a] * idx[b];
                    out[(idx[m], col)] = self.get(i, j, k);
                }
            }
        }
        out
    }

    /// Inverse of [`DenseTensor3::unfold`].
    pub fn refold(mat: &Matrix, mode: Mode, shape: [usize; 3]) -> Result<Self> {
        let m = mode.index();
        let (a, b) = mode.others();
        let (a, b) = (a.index(), b.index());
        if mat.nrows() != shape[m] || mat.ncols() != shape[a] * shape[b] {
            return dim_err(format!(
                "a {}x{} matrix cannot be refolded along mode {} into {:?}",
                mat.nrows(),
                mat.ncols(),
                mode,
                shape
            ));
        }
        let mut t = Self::zeros(shape);
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    let idx = [i, j, k];
                    t.set(i, j, k, mat[(idx[m], idx[a] + shape[a] * idx[b])]);
                }
            }
        }
        Ok(t)
    }

    /// `A ×_mode M`: replaces mode size `n_mode` by `m.nrows()`.
    pub fn mode_multiply(&self, mode: Mode, m: &Matrix) -> Result<Self> {
        let l = mode.index();
        if m.ncols() != self.shape[l] {
            return dim_err(format!(
                "mode-{} product needs {} columns, matrix has {}",
                mode,
                self.shape[l],
                m.ncols()
            ));
        }
        let mut shape = self.shape;
        shape[l] = m.nrows();
        let unfolded = m * self.unfold(mode);
        Self::refold(&unfolded, mode, shape)
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return dim_err(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return dim_err(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            shape: self.shape,
            values,
        })
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return dim_err(format!(
                "shapes {:?} and {:?} differ",
                self.shape, other.shape
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            shape: self.shape,
            values,
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `A ×_1 Uᵀ ×_2 Vᵀ ×_3 Wᵀ`.
    pub fn project(&self, factors: [&Matrix; 3]) -> Result<Self> {
        let mut t = self.clone();
        for mode in Mode::ALL {
            t = t.mode_multiply(mode, &factors[mode.index()].transpose())?;
        }
        Ok(t)
    }
}

/// Long vector `p ⊗ q` laid out like the columns of the unfolding that skips
/// `mode`, so that `unfold(mode) * pair_vector(mode, p, q)` equals the tenvec
/// `A ×_{a} pᵀ ×_{b} qᵀ` with `(a, b) = mode.others()`.
pub fn pair_vector(p: &Vector, q: &Vector) -> Vector {
    let mut out = Vector::zeros(p.len() * q.len());
    for b in 0..q.len() {
        for a in 0..p.len() {
            out[a + p.len() * b] = p[a] * q[b];
        }
    }
    out
}

/// Tucker tensor `G ×_1 U ×_2 V ×_3 W`.
#[derive(Clone, Debug, PartialEq)]
pub struct TuckerTensor {
    core: DenseTensor3,
    factors: [Matrix; 3],
    orthonormal: [bool; 3],
}

impl TuckerTensor {
    pub fn new(core: DenseTensor3, factors: [Matrix; 3]) -> Result<Self> {
        let ranks = core.shape();
        for mode in Mode::ALL {
            let f = &factors[mode.index()];
            if f.ncols() != ranks[mode.index()] {
                return dim_err(format!(
                    "factor {} has {} columns but the core has mode rank {}",
                    mode,
                    f.ncols(),
                    ranks[mode.index()]
                ));
            }
            if f.ncols() > f.nrows() {
                return dim_err(format!(
                    "mode-{} rank {} exceeds mode size {}",
                    mode,
                    f.ncols(),
                    f.nrows()
                ));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("Tucker factor"));
            }
        }
        let orthonormal = [0, 1, 2].map(|l| gram_deviation(&factors[l]) <= ORTHONORMAL_TOL);
        Ok(Self {
            core,
            factors,
            orthonormal,
        })
    }

    /// Wraps a dense tensor as a Tucker tensor with identity factors.
    pub fn from_dense(t: &DenseTensor3) -> Self {
        let [n1, n2, n3] = t.shape();
        Self::new(
            t.clone(),
            [
                Matrix::identity(n1, n1),
                Matrix::identity(n2, n2),
                Matrix::identity(n3, n3),
            ],
        )
        .expect("identity factors are consistent")
    }

    /// Ambient shape `(n1, n2, n3)`.
    pub fn shape(&self) -> [usize; 3] {
        [0, 1, 2].map(|l| self.factors[l].nrows())
    }

    pub fn ranks(&self) -> [usize; 3] {
        self.core.shape()
    }

    pub fn core(&self) -> &DenseTensor3 {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix; 3] {
        &self.factors
    }

    pub fn factor(&self, mode: Mode) -> &Matrix {
        &self.factors[mode.index()]
    }

    pub fn is_orthonormal(&self, mode: Mode) -> bool {
        self.orthonormal[mode.index()]
    }

    /// Densifies the tensor.
    pub fn reconstruct(&self) -> DenseTensor3 {
        let mut t = self.core.clone();
        for mode in Mode::ALL {
            t = t
                .mode_multiply(mode, &self.factors[mode.index()])
                .expect("factor shapes checked at construction");
        }
        t
    }

    /// Frobenius norm without densification (exact for orthonormal factors,
    /// otherwise computed through the joint-basis projection).
    pub fn frobenius_norm(&self) -> f64 {
        if self.orthonormal.iter().all(|&o| o) {
            self.core.frobenius_norm()
        } else {
            let zero = TuckerTensor::zero(self.shape());
            tucker_residual_norm(self, &zero).expect("same ambient shape")
        }
    }

    /// Rank-(0,0,0) Tucker tensor.
    pub fn zero(shape: [usize; 3]) -> Self {
        Self::new(
            DenseTensor3::zeros([0, 0, 0]),
            [0, 1, 2].map(|l| Matrix::zeros(shape[l], 0)),
        )
        .expect("empty factors are consistent")
    }
}

/// Dense reconstruction `G ×_1 U ×_2 V ×_3 W`.
pub fn tucker_reconstruct(t: &TuckerTensor) -> DenseTensor3 {
    t.reconstruct()
}

/// `‖A - B‖_F` for two Tucker tensors without densification.
///
/// Per mode, the factors of both operands are concatenated and orthogonalized
/// (QR); both cores are then expressed in the joint bases and subtracted.
pub fn tucker_residual_norm(a: &TuckerTensor, b: &TuckerTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return dim_err(format!(
            "ambient shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        ));
    }
    let mut coeff_a = Vec::with_capacity(3);
    let mut coeff_b = Vec::with_capacity(3);
    for mode in Mode::ALL {
        let fa = a.factor(mode);
        let fb = b.factor(mode);
        let n = fa.nrows();
        let cols = fa.ncols() + fb.ncols();
        let q = if cols == 0 || n == 0 {
            Matrix::zeros(n, 0)
        } else {
            let mut joint = Matrix::zeros(n, cols);
            joint.columns_mut(0, fa.ncols()).copy_from(fa);
            joint.columns_mut(fa.ncols(), fb.ncols()).copy_from(fb);
            joint.qr().q()
        };
        coeff_a.push(q.transpose() * fa);
        coeff_b.push(q.transpose() * fb);
    }
    let mut ga = a.core().clone();
    let mut gb = b.core().clone();
    for mode in Mode::ALL {
        ga = ga.mode_multiply(mode, &coeff_a[mode.index()])?;
        gb = gb.mode_multiply(mode, &coeff_b[mode.index()])?;
    }
    Ok(ga.sub(&gb)?.frobenius_norm())
}

/// Lower bound on the spectral norm `max (A, x⊗y⊗z)` over unit vectors,
/// from `iters` ALS rank-(1,1,1) sweeps started at seeded random vectors.
pub fn spectral_norm_estimate<S: TenvecSource + ?Sized>(
    src: &S,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    if iters == 0 {
        return Err(Error::InvalidArgument("iters must be at least 1".into()));
    }
    let [_, n2, n3] = src.shape();
    let mut rng = seeded_rng(seed);
    let v0 = random_unit(&mut rng, n2);
    let w0 = random_unit(&mut rng, n3);
    Ok(als_rank1(src, &v0, &w0, iters)?.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_gaussian, random_orthonormal, singular_values};

    fn counting_tensor() -> DenseTensor3 {
        DenseTensor3::from_fn([2, 2, 2], |i, j, k| (i + 2 * j + 4 * k) as f64)
    }

    #[test]
    fn unfold_mode1_columns() {
        let a = counting_tensor().unfold(Mode::One);
        assert_eq!(a.shape(), (2, 4));
        let rows: Vec<Vec<f64>> = (0..2).map(|r| a.row(r).iter().copied().collect()).collect();
        assert_eq!(rows[0], vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(rows[1], vec![1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn unfold_cyclic_pairing() {
        let t = DenseTensor3::from_fn([2, 3, 4], |i, j, k| (100 * i + 10 * j + k) as f64);
        let a2 = t.unfold(Mode::Two);
        let a3 = t.unfold(Mode::Three);
        assert_eq!(a2.shape(), (3, 8));
        assert_eq!(a3.shape(), (4, 6));
        // a(2)[j, k + n3*i] and a(3)[k, i + n1*j]
        assert_eq!(a2[(2, 3 + 4)], t.get(1, 2, 3));
        assert_eq!(a3[(3, 1 + 2 * 2)], t.get(1, 2, 3));
    }

    #[test]
    fn unfold_refold_round_trip() {
        let mut rng = seeded_rng(1);
        let t =
            DenseTensor3::from_vec([3, 4, 2], random_gaussian(&mut rng, 24).as_slice().to_vec())
                .unwrap();
        for mode in Mode::ALL {
            let back = DenseTensor3::refold(&t.unfold(mode), mode, t.shape()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn rank1_unfolding_has_rank_one() {
        let mut rng = seeded_rng(2);
        let (u, v, w) = (
            random_gaussian(&mut rng, 4),
            random_gaussian(&mut rng, 5),
            random_gaussian(&mut rng, 3),
        );
        let s = singular_values(&DenseTensor3::rank1(1.0, &u, &v, &w).unfold(Mode::One));
        assert!(s[1] < 1e-12 * s[0]);
    }

    #[test]
    fn from_vec_validates() {
        assert!(matches!(
            DenseTensor3::from_vec([2, 2, 2], vec![0.0; 7]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            DenseTensor3::from_vec([1, 1, 1], vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn mode_multiply_identity_and_ones() {
        let t = counting_tensor();
        assert_eq!(
            t.mode_multiply(Mode::Two, &Matrix::identity(2, 2)).unwrap(),
            t
        );
        let ones = DenseTensor3::from_fn([2, 2, 2], |_, _, _| 1.0);
        let r = ones
            .mode_multiply(Mode::Two, &Matrix::from_row_slice(1, 2, &[1.0, 1.0]))
            .unwrap();
        assert_eq!(r.shape(), [2, 1, 2]);
        assert!(r.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn mode_multiply_rejects_mismatch() {
        let t = counting_tensor();
        assert!(t.mode_multiply(Mode::One, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn mode_multiply_composes() {
        let mut rng = seeded_rng(5);
        let t =
            DenseTensor3::from_vec([3, 4, 5], random_gaussian(&mut rng, 60).as_slice().to_vec())
                .unwrap();
        let m1 = crate::linalg::random_gaussian_matrix(&mut rng, 3, 4);
        let m2 = crate::linalg::random_gaussian_matrix(&mut rng, 2, 3);
        let two_step = t
            .mode_multiply(Mode::Two, &m1)
            .unwrap()
            .mode_multiply(Mode::Two, &m2)
            .unwrap();
        let one_step = t.mode_multiply(Mode::Two, &(&m2 * &m1)).unwrap();
        let diff = two_step.sub(&one_step).unwrap().frobenius_norm();
        assert!(diff <= 1e-13 * one_step.frobenius_norm());
    }

    #[test]
    fn inner_products() {
        let ones = DenseTensor3::from_fn([2, 2, 2], |_, _, _| 1.0);
        assert_eq!(ones.inner(&ones).unwrap(), 8.0);
        let a = DenseTensor3::from_fn([2, 2, 2], |i, _, _| if i == 0 { 1.0 } else { 0.0 });
        let b = DenseTensor3::from_fn([2, 2, 2], |i, _, _| if i == 1 { 3.0 } else { 0.0 });
        assert_eq!(a.inner(&b).unwrap(), 0.0);
        assert!(a.inner(&DenseTensor3::zeros([2, 2, 3])).is_err());
    }

    #[test]
    fn inner_matches_triple_loop() {
        let mut rng = seeded_rng(8);
        let a =
            DenseTensor3::from_vec([3, 3, 3], random_gaussian(&mut rng, 27).as_slice().to_vec())
                .unwrap();
        let b =
            DenseTensor3::from_vec([3, 3, 3], random_gaussian(&mut rng, 27).as_slice().to_vec())
                .unwrap();
        let mut naive = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    naive += a.get(i, j, k) * b.get(i, j, k);
                }
            }
        }
        let fast = a.inner(&b).unwrap();
        assert!((fast - naive).abs() <= 1e-13 * naive.abs().max(1.0));
    }

    #[test]
    fn reconstruct_rank1_and_identity() {
        let u = Vector::from_vec(vec![0.6, 0.8]);
        let v = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let w = Vector::from_vec(vec![0.0, 1.0]);
        let core = DenseTensor3::from_vec([1, 1, 1], vec![2.5]).unwrap();
        let t = TuckerTensor::new(
            core,
            [
                Matrix::from_column_slice(2, 1, u.as_slice()),
                Matrix::from_column_slice(3, 1, v.as_slice()),
                Matrix::from_column_slice(2, 1, w.as_slice()),
            ],
        )
        .unwrap();
        assert!(t.is_orthonormal(Mode::One));
        let dense = t.reconstruct();
        let expected = DenseTensor3::rank1(2.5, &u, &v, &w);
        assert!(dense.sub(&expected).unwrap().frobenius_norm() < 1e-15);

        let c = counting_tensor();
        assert_eq!(TuckerTensor::from_dense(&c).reconstruct(), c);
    }

    #[test]
    fn reconstruct_matches_quadruple_loop() {
        let mut rng = seeded_rng(9);
        let core =
            DenseTensor3::from_vec([2, 2, 2], random_gaussian(&mut rng, 8).as_slice().to_vec())
                .unwrap();
        let f = [0, 1, 2].map(|_| random_orthonormal(&mut rng, 5, 2));
        let t = TuckerTensor::new(core.clone(), f.clone()).unwrap();
        let dense = t.reconstruct();
        let oracle = DenseTensor3::from_fn([5, 5, 5], |i, j, k| {
            let mut s = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    for r in 0..2 {
                        s += core.get(p, q, r) * f[0][(i, p)] * f[1][(j, q)] * f[2][(k, r)];
                    }
                }
            }
            s
        });
        let diff = dense.sub(&oracle).unwrap().frobenius_norm();
        assert!(diff <= 1e-13 * oracle.frobenius_norm());
    }

    #[test]
    fn tucker_rejects_bad_shapes() {
        let core = DenseTensor3::zeros([2, 2, 2]);
        let bad = [
            Matrix::zeros(4, 3),
            Matrix::zeros(4, 2),
            Matrix::zeros(4, 2),
        ];
        assert!(TuckerTensor::new(core.clone(), bad).is_err());
        let too_wide = [
            Matrix::zeros(1, 2),
            Matrix::zeros(4, 2),
            Matrix::zeros(4, 2),
        ];
        assert!(TuckerTensor::new(core, too_wide).is_err());
    }

    fn random_tucker(seed: u64, n: usize, r: [usize; 3], orthonormal: bool) -> TuckerTensor {
        let mut rng = seeded_rng(seed);
        let core = DenseTensor3::from_vec(
            r,
            random_gaussian(&mut rng, r.iter().product())
                .as_slice()
                .to_vec(),
        )
        .unwrap();
        let f = [0, 1, 2].map(|l| {
            if orthonormal {
                random_orthonormal(&mut rng, n, r[l])
            } else {
                crate::linalg::random_gaussian_matrix(&mut rng, n, r[l])
            }
        });
        TuckerTensor::new(core, f).unwrap()
    }

    #[test]
    fn residual_of_identical_operands_vanishes() {
        let a = random_tucker(10, 6, [2, 3, 2], true);
        let r = tucker_residual_norm(&a, &a).unwrap();
        assert!(r <= 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn residual_against_zero_is_core_norm() {
        let a = random_tucker(11, 6, [2, 3, 2], true);
        let zero = TuckerTensor::zero([6, 6, 6]);
        let r = tucker_residual_norm(&a, &zero).unwrap();
        assert!((r - a.core().frobenius_norm()).abs() <= 1e-12 * r);
    }

    #[test]
    fn residual_matches_dense_oracle() {
        let a = random_tucker(12, 5, [2, 3, 2], false);
        let b = random_tucker(13, 5, [3, 1, 2], true);
        let fast = tucker_residual_norm(&a, &b).unwrap();
        let dense = a
            .reconstruct()
            .sub(&b.reconstruct())
            .unwrap()
            .frobenius_norm();
        assert!((fast - dense).abs() <= 1e-11 * dense);
        let swapped = tucker_residual_norm(&b, &a).unwrap();
        assert!((fast - swapped).abs() <= 1e-13 * fast);
    }

    #[test]
    fn residual_rejects_shape_mismatch() {
        let a = random_tucker(14, 5, [2, 2, 2], true);
        let b = random_tucker(15, 6, [2, 2, 2], true);
        assert!(tucker_residual_norm(&a, &b).is_err());
    }
}
