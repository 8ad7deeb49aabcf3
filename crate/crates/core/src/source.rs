//! The tenvec contract and its backends.
//!
//! `tenvec(skip, p, q)` contracts the two modes other than `skip` in cyclic
//! order: `skip = 1` contracts modes (2, 3) with `(p, q)`, `skip = 2`
//! contracts (3, 1) and `skip = 3` contracts (1, 2). The result has length
//! `n_skip`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::dim_err;
use crate::tensor::{DenseTensor3, TuckerTensor};
use crate::{Error, Matrix, Mode, Result, Vector};

/// Read-only access to a 3-tensor through tensor-by-vector-by-vector products.
pub trait TenvecSource: Send + Sync {
    /// Mode sizes `(n1, n2, n3)`.
    fn shape(&self) -> [usize; 3];

    /// Contraction of the two modes other than `skip`, `p` on `skip.next()`
    /// and `q` on `skip.next().next()`.
    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector>;
}

/// Checks vector lengths against the cyclic contraction modes.
pub fn check_tenvec_args(shape: [usize; 3], skip: Mode, p: &Vector, q: &Vector) -> Result<()> {
    let (a, b) = skip.others();
    if p.len() != shape[a.index()] || q.len() != shape[b.index()] {
        return dim_err(format!(
            "tenvec skipping mode {} expects vectors of lengths ({}, {}), got ({}, {})",
            skip,
            shape[a.index()],
            shape[b.index()],
            p.len(),
            q.len()
        ));
    }
    Ok(())
}

impl<S: TenvecSource + ?Sized> TenvecSource for &S {
    fn shape(&self) -> [usize; 3] {
        (**self).shape()
    }
    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        (**self).tenvec(skip, p, q)
    }
}

impl<S: TenvecSource + ?Sized> TenvecSource for Box<S> {
    fn shape(&self) -> [usize; 3] {
        (**self).shape()
    }
    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        (**self).tenvec(skip, p, q)
    }
}

impl<S: TenvecSource + ?Sized> TenvecSource for Arc<S> {
    fn shape(&self) -> [usize; 3] {
        (**self).shape()
    }
    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        (**self).tenvec(skip, p, q)
    }
}

impl TenvecSource for DenseTensor3 {
    fn shape(&self) -> [usize; 3] {
        DenseTensor3::shape(self)
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        let shape = DenseTensor3::shape(self);
        check_tenvec_args(shape, skip, p, q)?;
        let m = skip.index();
        let (a, b) = skip.others();
        let (a, b) = (a.index(), b.index());
        let mut out = Vector::zeros(shape[m]);
        let values = self.values();
        let mut idx = 0;
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    let pos = [i, j, k];
                    out[pos[m]] += values[idx] * p[pos[a]] * q[pos[b]];
                    idx += 1;
                }
            }
        }
        Ok(out)
    }
}

/// Coordinate-format sparse tensor. Duplicate coordinates are summed on
/// construction; entries are kept sorted by linear index.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor3 {
    shape: [usize; 3],
    entries: Vec<([usize; 3], f64)>,
}

impl SparseTensor3 {
    pub fn new(
        shape: [usize; 3],
        entries: impl IntoIterator<Item = ([usize; 3], f64)>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for (idx, value) in entries {
            if idx.iter().zip(shape.iter()).any(|(i, n)| i >= n) {
                return dim_err(format!(
                    "entry {:?} out of range for shape {:?}",
                    idx, shape
                ));
            }
            if !value.is_finite() {
                return Err(Error::NonFinite("sparse entry"));
            }
            *merged.entry((idx[2], idx[1], idx[0])).or_insert(0.0) += value;
        }
        let entries = merged
            .into_iter()
            .map(|((k, j, i), v)| ([i, j, k], v))
            .collect();
        Ok(Self { shape, entries })
    }

    pub fn from_dense(t: &DenseTensor3) -> Self {
        let [n1, n2, n3] = t.shape();
        let mut entries = Vec::new();
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    let v = t.get(i, j, k);
                    if v != 0.0 {
                        entries.push(([i, j, k], v));
                    }
                }
            }
        }
        Self {
            shape: t.shape(),
            entries,
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[([usize; 3], f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        let mut t = DenseTensor3::zeros(self.shape);
        for &([i, j, k], v) in &self.entries {
            t.set(i, j, k, v);
        }
        t
    }
}

impl TenvecSource for SparseTensor3 {
    fn shape(&self) -> [usize; 3] {
        self.shape
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        check_tenvec_args(self.shape, skip, p, q)?;
        let m = skip.index();
        let (a, b) = skip.others();
        let (a, b) = (a.index(), b.index());
        let mut out = Vector::zeros(self.shape[m]);
        for (idx, v) in &self.entries {
            out[idx[m]] += v * p[idx[a]] * q[idx[b]];
        }
        Ok(out)
    }
}

/// Canonical (CP) tensor `Σ_s u_s ⊗ v_s ⊗ w_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalTensor {
    factors: [Matrix; 3],
}

impl CanonicalTensor {
    pub fn new(factors: [Matrix; 3]) -> Result<Self> {
        let rank = factors[0].ncols();
        if factors.iter().any(|f| f.ncols() != rank) {
            return dim_err(format!(
                "canonical factors have column counts {}, {}, {}",
                factors[0].ncols(),
                factors[1].ncols(),
                factors[2].ncols()
            ));
        }
        if factors.iter().any(|f| f.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("canonical factor"));
        }
        Ok(Self { factors })
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn factors(&self) -> &[Matrix; 3] {
        &self.factors
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        let [u, v, w] = &self.factors;
        DenseTensor3::from_fn(self.shape(), |i, j, k| {
            (0..self.rank())
                .map(|s| u[(i, s)] * v[(j, s)] * w[(k, s)])
                .sum()
        })
    }
}

impl TenvecSource for CanonicalTensor {
    fn shape(&self) -> [usize; 3] {
        [0, 1, 2].map(|l| self.factors[l].nrows())
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        check_tenvec_args(self.shape(), skip, p, q)?;
        let (a, b) = skip.others();
        let weights =
            (self.factors[a.index()].tr_mul(p)).component_mul(&self.factors[b.index()].tr_mul(q));
        Ok(&self.factors[skip.index()] * weights)
    }
}

/// Contracts a core `g` along the two modes other than `skip` with small
/// vectors `p` (mode `skip.next()`) and `q`.
fn contract_core(g: &DenseTensor3, skip: Mode, p: &Vector, q: &Vector) -> Vector {
    let shape = g.shape();
    let m = skip.index();
    let (a, b) = skip.others();
    let (a, b) = (a.index(), b.index());
    let mut out = Vector::zeros(shape[m]);
    let values = g.values();
    let mut idx = 0;
    for k in 0..shape[2] {
        for j in 0..shape[1] {
            for i in 0..shape[0] {
                let pos = [i, j, k];
                out[pos[m]] += values[idx] * p[pos[a]] * q[pos[b]];
                idx += 1;
            }
        }
    }
    out
}

impl TenvecSource for TuckerTensor {
    fn shape(&self) -> [usize; 3] {
        TuckerTensor::shape(self)
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        check_tenvec_args(TuckerTensor::shape(self), skip, p, q)?;
        let (a, b) = skip.others();
        let small_p = self.factor(a).tr_mul(p);
        let small_q = self.factor(b).tr_mul(q);
        let t = contract_core(self.core(), skip, &small_p, &small_q);
        Ok(self.factor(skip) * t)
    }
}

/// Elementwise product `A ∘ B` of two Tucker tensors, evaluated lazily.
///
/// The implicit Tucker form of the product has a Kronecker-product core of
/// size `(r1 p1) x (r2 p2) x (r3 p3)`; it is never formed. Each tenvec only
/// allocates buffers indexed by pairs of core indices, and the largest total
/// scratch size seen is recorded in [`HadamardTuckerSource::peak_scratch`].
#[derive(Debug)]
pub struct HadamardTuckerSource {
    left: TuckerTensor,
    right: TuckerTensor,
    peak_scratch: AtomicUsize,
}

impl HadamardTuckerSource {
    pub fn new(left: TuckerTensor, right: TuckerTensor) -> Result<Self> {
        if left.shape() != right.shape() {
            return dim_err(format!(
                "Hadamard operands have shapes {:?} and {:?}",
                left.shape(),
                right.shape()
            ));
        }
        Ok(Self {
            left,
            right,
            peak_scratch: AtomicUsize::new(0),
        })
    }

    /// `A ∘ A`.
    pub fn square(t: TuckerTensor) -> Self {
        Self::new(t.clone(), t).expect("equal shapes")
    }

    pub fn operands(&self) -> (&TuckerTensor, &TuckerTensor) {
        (&self.left, &self.right)
    }

    /// Mode ranks of the implicit product, `r_l · p_l`.
    pub fn product_ranks(&self) -> [usize; 3] {
        let (r, p) = (self.left.ranks(), self.right.ranks());
        [r[0] * p[0], r[1] * p[1], r[2] * p[2]]
    }

    /// Number of entries the Kronecker core would occupy.
    pub fn kron_core_len(&self) -> usize {
        self.product_ranks().iter().product()
    }

    /// Largest number of scratch `f64`s simultaneously held by one tenvec call.
    pub fn peak_scratch(&self) -> usize {
        self.peak_scratch.load(Ordering::Relaxed)
    }

    /// Elementwise product of the densified operands.
    pub fn to_dense(&self) -> DenseTensor3 {
        self.left
            .reconstruct()
            .hadamard(&self.right.reconstruct())
            .expect("equal shapes")
    }
}

/// `M[x, y] = Σ_i fa[i, x] fb[i, y] v[i]`.
fn crossed_gram(fa: &Matrix, fb: &Matrix, v: &Vector) -> Matrix {
    let mut scaled = fb.clone();
    for (mut row, &vi) in scaled.row_iter_mut().zip(v.iter()) {
        row *= vi;
    }
    fa.tr_mul(&scaled)
}

impl TenvecSource for HadamardTuckerSource {
    fn shape(&self) -> [usize; 3] {
        self.left.shape()
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        check_tenvec_args(self.shape(), skip, p, q)?;
        let (ma, mb) = skip.others();
        let (m, a, b) = (skip.index(), ma.index(), mb.index());
        let g = self.left.core();
        let h = self.right.core();
        let r = g.shape();
        let s = h.shape();

        let mp = crossed_gram(self.left.factor(ma), self.right.factor(ma), p);
        let mq = crossed_gram(self.left.factor(mb), self.right.factor(mb), q);

        // xg[xm, xa, yb] = Σ_xb g[x] mq[xb, yb]
        let mut xg = vec![0.0; r[m] * r[a] * s[b]];
        for x3 in 0..r[2] {
            for x2 in 0..r[1] {
                for x1 in 0..r[0] {
                    let gv = g.get(x1, x2, x3);
                    if gv == 0.0 {
                        continue;
                    }
                    let x = [x1, x2, x3];
                    let base = x[m] + r[m] * x[a];
                    for yb in 0..s[b] {
                        xg[base + r[m] * r[a] * yb] += gv * mq[(x[b], yb)];
                    }
                }
            }
        }

        // yt[xm, ya, yb] = Σ_xa xg[xm, xa, yb] mp[xa, ya]
        let mut yt = vec![0.0; r[m] * s[a] * s[b]];
        for yb in 0..s[b] {
            for xa in 0..r[a] {
                for xm in 0..r[m] {
                    let v = xg[xm + r[m] * (xa + r[a] * yb)];
                    if v == 0.0 {
                        continue;
                    }
                    for ya in 0..s[a] {
                        yt[xm + r[m] * (ya + s[a] * yb)] += v * mp[(xa, ya)];
                    }
                }
            }
        }
        let scratch = mp.len() + mq.len() + xg.len() + yt.len();
        drop(xg);

        // t[xm, ym] = Σ_{ya, yb} yt[xm, ya, yb] h[y]
        let mut t = Matrix::zeros(r[m], s[m]);
        for y3 in 0..s[2] {
            for y2 in 0..s[1] {
                for y1 in 0..s[0] {
                    let hv = h.get(y1, y2, y3);
                    if hv == 0.0 {
                        continue;
                    }
                    let y = [y1, y2, y3];
                    for xm in 0..r[m] {
                        t[(xm, y[m])] += hv * yt[xm + r[m] * (y[a] + s[a] * y[b])];
                    }
                }
            }
        }
        let scratch = scratch.max(mp.len() + mq.len() + yt.len() + t.len());
        self.peak_scratch.fetch_max(scratch, Ordering::Relaxed);

        let fa = self.left.factor(skip);
        let fb = self.right.factor(skip);
        let mut out = Vector::zeros(fa.nrows());
        for i in 0..fa.nrows() {
            let mut acc = 0.0;
            for xm in 0..r[m] {
                let f = fa[(i, xm)];
                if f == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for ym in 0..s[m] {
                    inner += fb[(i, ym)] * t[(xm, ym)];
                }
                acc += f * inner;
            }
            out[i] = acc;
        }
        Ok(out)
    }
}

/// Wrapper counting tenvec invocations; results are passed through unchanged.
#[derive(Debug)]
pub struct CountingSource<S> {
    inner: S,
    count: AtomicU64,
}

impl<S: TenvecSource> CountingSource<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: TenvecSource> TenvecSource for CountingSource<S> {
    fn shape(&self) -> [usize; 3] {
        self.inner.shape()
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.tenvec(skip, p, q)
    }
}

/// How a [`ProjectedSource`] transforms one mode.
#[derive(Clone, Copy, Debug)]
pub enum ModeMap<'a> {
    Identity,
    /// `I - X Xᵀ` applied to inputs and outputs (orthonormal `X`).
    Complement(&'a Matrix),
    /// Restriction to the span of orthonormal `X`: the mode size becomes
    /// `X.ncols()`, inputs are lifted by `X` and outputs lowered by `Xᵀ`.
    Restrict(&'a Matrix),
}

impl ModeMap<'_> {
    fn size(&self, n: usize) -> usize {
        match self {
            ModeMap::Restrict(x) => x.ncols(),
            _ => n,
        }
    }

    fn lift(&self, v: &Vector) -> Vector {
        match self {
            ModeMap::Identity => v.clone(),
            ModeMap::Complement(x) => complement(x, v),
            ModeMap::Restrict(x) => *x * v,
        }
    }

    fn lower(&self, v: Vector) -> Vector {
        match self {
            ModeMap::Identity => v,
            ModeMap::Complement(x) => complement(x, &v),
            ModeMap::Restrict(x) => x.tr_mul(&v),
        }
    }
}

fn complement(x: &Matrix, v: &Vector) -> Vector {
    if x.ncols() == 0 {
        return v.clone();
    }
    v - x * x.tr_mul(v)
}

/// `A ×_1 M1 ×_2 M2 ×_3 M3` for projector-like maps, one inner tenvec per call.
#[derive(Clone, Copy, Debug)]
pub struct ProjectedSource<'a, S: ?Sized> {
    inner: &'a S,
    maps: [ModeMap<'a>; 3],
}

impl<'a, S: TenvecSource + ?Sized> ProjectedSource<'a, S> {
    pub fn new(inner: &'a S, maps: [ModeMap<'a>; 3]) -> Result<Self> {
        let shape = inner.shape();
        for (l, map) in maps.iter().enumerate() {
            if let ModeMap::Complement(x) | ModeMap::Restrict(x) = map {
                if x.nrows() != shape[l] {
                    return dim_err(format!(
                        "mode-{} map has {} rows, mode size is {}",
                        l + 1,
                        x.nrows(),
                        shape[l]
                    ));
                }
            }
        }
        Ok(Self { inner, maps })
    }
}

impl<S: TenvecSource + ?Sized> TenvecSource for ProjectedSource<'_, S> {
    fn shape(&self) -> [usize; 3] {
        let n = self.inner.shape();
        [0, 1, 2].map(|l| self.maps[l].size(n[l]))
    }

    fn tenvec(&self, skip: Mode, p: &Vector, q: &Vector) -> Result<Vector> {
        check_tenvec_args(self.shape(), skip, p, q)?;
        let (a, b) = skip.others();
        let lp = self.maps[a.index()].lift(p);
        let lq = self.maps[b.index()].lift(q);
        let out = self.inner.tenvec(skip, &lp, &lq)?;
        Ok(self.maps[skip.index()].lower(out))
    }
}

/// Densifies any source with `n2 · n3` tenvecs (mode-1 fibres).
pub fn densify<S: TenvecSource + ?Sized>(src: &S) -> Result<DenseTensor3> {
    let [n1, n2, n3] = src.shape();
    let mut t = DenseTensor3::zeros([n1, n2, n3]);
    for k in 0..n3 {
        let ek = unit(n3, k);
        for j in 0..n2 {
            let fibre = src.tenvec(Mode::One, &unit(n2, j), &ek)?;
            for i in 0..n1 {
                t.set(i, j, k, fibre[i]);
            }
        }
    }
    Ok(t)
}

pub(crate) fn unit(n: usize, i: usize) -> Vector {
    let mut e = Vector::zeros(n);
    e[i] = 1.0;
    e
}
