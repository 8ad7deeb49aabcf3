//! Wedderburn elimination for tensors: dominant mode subspaces under four
//! pivoting strategies, the integrated restricted Lanczos-like driver and
//! the optimal Tucker core.

use crate::krylov::{
    als_rank1_from, check_restricted, check_tol, power_rank1_slice, random_combination,
    resolve_start, sizes, Flag, RestrictedConfig, SliceRank1, StartVectors, SubspaceBases,
    ZERO_NORM,
};
use crate::linalg::{
    gram_deviation, random_unit, seeded_rng, top_singular_triple, Basis, SeededRng,
};
use crate::report::Recorder;
use crate::source::{unit, CountingSource, ModeMap, ProjectedSource};
use crate::tensor::{DenseTensor3, TuckerTensor};
use crate::{Error, Estimator, Matrix, Mode, ModeOutcome, Result, RunReport, TenvecSource, Vector};

/// How the leading vectors `y_k, z_k` of each elimination step are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotStrategy {
    /// ALS on the deflated tensor `A ×_m (I - X Xᵀ)`.
    Wsvd { p_als: usize },
    /// Power iterations on the newest slice `A ×_m x_kᵀ`.
    Wlnc { p_pow: usize },
    /// ALS on the deflated tensor restricted to the other mode bases.
    WsvdR { p_als: usize },
    /// SVD of the newest core slice; assembles the core on the fly.
    WlncR,
}

impl PivotStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            PivotStrategy::Wsvd { .. } => "wsvd",
            PivotStrategy::Wlnc { .. } => "wlnc",
            PivotStrategy::WsvdR { .. } => "wsvdr",
            PivotStrategy::WlncR => "wlncr",
        }
    }

    /// Restricted strategies grow all three bases together.
    pub fn is_restricted(&self) -> bool {
        matches!(self, PivotStrategy::WsvdR { .. } | PivotStrategy::WlncR)
    }

    pub fn estimator(&self) -> Estimator {
        match self {
            PivotStrategy::Wsvd { .. } | PivotStrategy::Wlnc { .. } => Estimator::Spectral,
            PivotStrategy::WsvdR { .. } => Estimator::RestrictedSpectral,
            PivotStrategy::WlncR => Estimator::RestrictedFrobenius,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PivotStrategy::Wsvd { p_als: 0 } | PivotStrategy::WsvdR { p_als: 0 } => {
                Err(Error::InvalidArgument("p_als must be at least 1".into()))
            }
            PivotStrategy::Wlnc { p_pow: 0 } => {
                Err(Error::InvalidArgument("p_pow must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproxConfig {
    pub strategy: PivotStrategy,
    /// Breakdown threshold for `‖x'‖ < tol · ‖x‖`.
    pub tol: f64,
    /// Relative accuracy of the stopping rule `err <= eps · nrm`.
    pub eps: f64,
    /// Basis size caps per mode (further capped by the mode sizes).
    pub r_max: [usize; 3],
    pub seed: u64,
    pub start: StartVectors,
    /// Retry a breakdown once with random leading vectors. On by default
    /// for Wsvd and Wlnc only.
    pub retry: bool,
}

impl ApproxConfig {
    pub fn new(strategy: PivotStrategy) -> Self {
        Self {
            strategy,
            tol: 1e-12,
            eps: 1e-8,
            r_max: [usize::MAX; 3],
            seed: 0,
            start: StartVectors::Random,
            retry: !strategy.is_restricted(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        check_tol(self.tol)?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if self.r_max.contains(&0) {
            return Err(Error::InvalidArgument(
                "r_max must be at least 1 in every mode".into(),
            ));
        }
        Ok(())
    }

    fn restricted(&self, p_als: usize) -> RestrictedConfig {
        RestrictedConfig {
            r_max: self.r_max,
            tol: self.tol,
            eps: self.eps,
            p_als,
            start: self.start.clone(),
            seed: self.seed,
            retry: self.retry,
            revive: false,
        }
    }
}

/// Tucker approximation with its run report.
#[derive(Clone, Debug, PartialEq)]
pub struct Approximation {
    pub tucker: TuckerTensor,
    pub report: RunReport,
}

/// Result of a single-mode dominant subspace run.
#[derive(Clone, Debug, PartialEq)]
pub struct DominantSubspace {
    pub basis: Matrix,
    /// Last error estimate.
    pub err: f64,
    /// `sqrt(Σ err_k²)`.
    pub nrm: f64,
    pub outcome: ModeOutcome,
    pub report: RunReport,
}

/// Pivot of the deflated tensor `A ×_mode (I - X Xᵀ)`: `p_als` ALS sweeps
/// from `(y0, z0)`, which live on `mode.next()` and the remaining mode.
///
/// `σ = 0` signals that `X` already represents the tensor in this mode.
pub fn pivot_wsvd<S: TenvecSource + ?Sized>(
    src: &S,
    mode: Mode,
    basis: &Matrix,
    y0: &Vector,
    z0: &Vector,
    p_als: usize,
) -> Result<SliceRank1> {
    let mut maps = [ModeMap::Identity; 3];
    maps[mode.index()] = ModeMap::Complement(basis);
    let proj = ProjectedSource::new(src, maps)?;
    let res = als_rank1_from(&proj, mode, y0, z0, p_als)?;
    let (a, b) = mode.others();
    Ok(SliceRank1 {
        sigma: res.sigma,
        y: res.factor(a).clone(),
        z: res.factor(b).clone(),
    })
}

/// Pivot from the leading singular pair of the slice `A ×_mode xᵀ`
/// (`p_pow` power sweeps, `2 p_pow` tenvecs). Its `σ` doubles as the
/// spectral error estimate of the step that produced `x`.
pub fn pivot_wlnc<S: TenvecSource + ?Sized>(
    src: &S,
    mode: Mode,
    x: &Vector,
    z0: &Vector,
    p_pow: usize,
) -> Result<SliceRank1> {
    power_rank1_slice(src, mode, x, z0, p_pow)
}

/// Pivot of `A ×_mode (I - X Xᵀ) ×_a Yᵀ ×_b Zᵀ` with `bases = [X, Y, Z]`
/// ordered as `(mode, mode.next(), remaining)`. `y0`, `z0` are coordinates
/// in `Y` and `Z`; the returned vectors are expanded back to full length.
pub fn pivot_wsvdr<S: TenvecSource + ?Sized>(
    src: &S,
    mode: Mode,
    bases: [&Matrix; 3],
    y0: &Vector,
    z0: &Vector,
    p_als: usize,
) -> Result<SliceRank1> {
    let (a, b) = mode.others();
    let [xm, xa, xb] = bases;
    let mut maps = [ModeMap::Identity; 3];
    maps[mode.index()] = ModeMap::Complement(xm);
    maps[a.index()] = ModeMap::Restrict(xa);
    maps[b.index()] = ModeMap::Restrict(xb);
    let proj = ProjectedSource::new(src, maps)?;
    let res = als_rank1_from(&proj, mode, y0, z0, p_als)?;
    Ok(SliceRank1 {
        sigma: res.sigma,
        y: xa * res.factor(a),
        z: xb * res.factor(b),
    })
}

/// Best rank-one approximation `σ ŷ ẑᵀ` of a small core slice, no tenvecs.
/// The sign is fixed so that the largest entry of `ŷ` is positive.
pub fn pivot_wlncr(slice: &Matrix) -> SliceRank1 {
    let (sigma, mut y, mut z) = top_singular_triple(slice);
    if let Some((imax, _)) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    {
        if y[imax] < 0.0 {
            y.neg_mut();
            z.neg_mut();
        }
    }
    SliceRank1 { sigma, y, z }
}

fn mode_seed(seed: u64, mode: Mode) -> u64 {
    seed ^ (mode.number() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// One mode of an unrestricted (Wsvd or Wlnc) elimination.
struct ModeRun {
    mode: Mode,
    strategy: PivotStrategy,
    size: usize,
    cap: usize,
    basis: Basis,
    nrm2: f64,
    err: f64,
    rng: SeededRng,
    leading: Option<(Vector, Vector)>,
    outcome: Option<ModeOutcome>,
}

impl ModeRun {
    fn new(shape: [usize; 3], mode: Mode, cfg: &ApproxConfig) -> Self {
        let mut rng = seeded_rng(mode_seed(cfg.seed, mode));
        let (a, b) = mode.others();
        let (na, nb) = (shape[a.index()], shape[b.index()]);
        let leading = match cfg.strategy {
            PivotStrategy::Wlnc { .. } => Some(match &cfg.start {
                StartVectors::Given(vs) => (vs[a.index()].clone(), vs[b.index()].clone()),
                StartVectors::E1 => (unit(na, 0), unit(nb, 0)),
                _ => (random_unit(&mut rng, na), random_unit(&mut rng, nb)),
            }),
            _ => None,
        };
        let size = shape[mode.index()];
        Self {
            mode,
            strategy: cfg.strategy,
            size,
            cap: size.min(cfg.r_max[mode.index()]),
            basis: Basis::new(size),
            nrm2: 0.0,
            err: 0.0,
            rng,
            leading,
            outcome: None,
        }
    }

    fn nrm(&self) -> f64 {
        self.nrm2.sqrt()
    }

    /// Attempts one basis extension; returns the error estimate when a
    /// vector was added. Sets `outcome` once the mode is finished.
    fn advance<S: TenvecSource + ?Sized>(
        &mut self,
        src: &S,
        cfg: &ApproxConfig,
    ) -> Result<Option<f64>> {
        let step = self.basis.len() + 1;
        if self.basis.len() >= self.cap {
            self.outcome = Some(if self.cap == self.size {
                ModeOutcome::Exhausted { step }
            } else {
                ModeOutcome::MaxRank
            });
            return Ok(None);
        }
        let shape = src.shape();
        let (a, b) = self.mode.others();
        let (na, nb) = (shape[a.index()], shape[b.index()]);
        let (y, z) = match self.strategy {
            PivotStrategy::Wsvd { p_als } => {
                let y0 = random_unit(&mut self.rng, na);
                let z0 = random_unit(&mut self.rng, nb);
                let piv = pivot_wsvd(src, self.mode, &self.basis.to_matrix(), &y0, &z0, p_als)?;
                if piv.sigma < ZERO_NORM {
                    self.outcome = Some(ModeOutcome::Exhausted { step });
                    return Ok(None);
                }
                (piv.y, piv.z)
            }
            PivotStrategy::Wlnc { .. } => self.leading.clone().expect("Wlnc keeps leading vectors"),
            _ => unreachable!("restricted strategies use their own drivers"),
        };
        let mut ortho = self.basis.orthogonalize(&src.tenvec(self.mode, &y, &z)?);
        let mut retried = false;
        if ortho.is_breakdown(cfg.tol) && cfg.retry {
            let y = random_unit(&mut self.rng, na);
            let z = random_unit(&mut self.rng, nb);
            ortho = self.basis.orthogonalize(&src.tenvec(self.mode, &y, &z)?);
            retried = true;
        }
        if ortho.is_breakdown(cfg.tol) {
            // A Wsvd breakdown certifies ‖A - A ×_m X Xᵀ‖₂ < tol ‖A‖₂. So does
            // a vanishing first direction, and (with probability one) a
            // random probe that finds nothing new.
            let exhausted = matches!(self.strategy, PivotStrategy::Wsvd { .. })
                || retried
                || (self.basis.is_empty() && ortho.raw_norm < ZERO_NORM);
            self.outcome = Some(if exhausted {
                ModeOutcome::Exhausted { step }
            } else {
                ModeOutcome::Breakdown { step }
            });
            return Ok(None);
        }
        let x = ortho.unit();
        let err = match self.strategy {
            PivotStrategy::Wlnc { p_pow } => {
                let z0 = random_unit(&mut self.rng, nb);
                let piv = pivot_wlnc(src, self.mode, &x, &z0, p_pow)?;
                self.leading = Some((piv.y, piv.z));
                piv.sigma
            }
            _ => ortho.norm,
        };
        self.basis.push(x);
        self.err = err;
        self.nrm2 += err * err;
        if err <= cfg.eps * self.nrm() {
            self.outcome = Some(ModeOutcome::Converged);
        }
        Ok(Some(err))
    }
}

/// Dominant subspace of one mode by Wedderburn elimination with the Wsvd or
/// Wlnc strategy. Restricted strategies need the other modes' bases and are
/// only available through [`tucker_approximate`].
pub fn dominant_subspace<S: TenvecSource + ?Sized>(
    src: &S,
    mode: Mode,
    cfg: &ApproxConfig,
) -> Result<DominantSubspace> {
    cfg.validate()?;
    if cfg.strategy.is_restricted() {
        return Err(Error::InvalidArgument(format!(
            "{} grows all modes together; use tucker_approximate",
            cfg.strategy.name()
        )));
    }
    let counting = CountingSource::new(src);
    let mut run = ModeRun::new(counting.shape(), mode, cfg);
    let mut rec = Recorder::new(cfg.strategy.name(), Some(cfg.strategy.estimator()));
    while run.outcome.is_none() {
        if let Some(err) = run.advance(&counting, cfg)? {
            let mut ranks = [0; 3];
            ranks[mode.index()] = run.basis.len();
            rec.step(Some(mode), ranks, err, run.nrm(), counting.count());
        }
    }
    let outcome = run.outcome.expect("loop ends with an outcome");
    let mut outcomes = [ModeOutcome::Idle; 3];
    outcomes[mode.index()] = outcome;
    let mut ranks = [0; 3];
    ranks[mode.index()] = run.basis.len();
    let report = rec.finish(ranks, counting.count(), outcomes);
    Ok(DominantSubspace {
        basis: run.basis.to_matrix(),
        err: run.err,
        nrm: run.nrm(),
        outcome,
        report,
    })
}

/// Optimal core `A ×_1 Uᵀ ×_2 Vᵀ ×_3 Wᵀ` for orthonormal bases, from
/// `r_a · r_b` tenvecs for the cheapest pair of modes.
pub fn compute_core<S: TenvecSource + ?Sized>(
    src: &S,
    bases: [&Matrix; 3],
) -> Result<DenseTensor3> {
    let shape = src.shape();
    for mode in Mode::ALL {
        let x = bases[mode.index()];
        if x.nrows() != shape[mode.index()] {
            return Err(Error::Dimension(format!(
                "mode-{} basis has {} rows, mode size is {}",
                mode,
                x.nrows(),
                shape[mode.index()]
            )));
        }
        let deviation = gram_deviation(x);
        if deviation > 1e-8 {
            return Err(Error::NotOrthonormal { mode, deviation });
        }
    }
    let ranks = bases.map(|x| x.ncols());
    let skip = *Mode::ALL
        .iter()
        .min_by_key(|m| {
            let (a, b) = m.others();
            ranks[a.index()] * ranks[b.index()]
        })
        .expect("three modes");
    let (a, b) = skip.others();
    let mut core = DenseTensor3::zeros(ranks);
    for p in 0..ranks[a.index()] {
        for q in 0..ranks[b.index()] {
            let fibre = src.tenvec(
                skip,
                &bases[a.index()].column(p).into_owned(),
                &bases[b.index()].column(q).into_owned(),
            )?;
            let coords = bases[skip.index()].tr_mul(&fibre);
            for (i, &c) in coords.iter().enumerate() {
                let mut idx = [0; 3];
                idx[skip.index()] = i;
                idx[a.index()] = p;
                idx[b.index()] = q;
                core.set(idx[0], idx[1], idx[2], c);
            }
        }
    }
    Ok(core)
}

/// Core tensor grown one slab at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowingCore {
    core: DenseTensor3,
}

impl GrowingCore {
    pub fn new(value: f64) -> Self {
        Self {
            core: DenseTensor3::from_fn([1, 1, 1], |_, _, _| value),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.core.shape()
    }

    pub fn tensor(&self) -> &DenseTensor3 {
        &self.core
    }

    pub fn into_tensor(self) -> DenseTensor3 {
        self.core
    }

    /// Slice `index` along `mode` with rows over `mode.next()`.
    pub fn slice(&self, mode: Mode, index: usize) -> Matrix {
        let (a, b) = mode.others();
        let shape = self.core.shape();
        Matrix::from_fn(shape[a.index()], shape[b.index()], |p, q| {
            let mut idx = [0; 3];
            idx[mode.index()] = index;
            idx[a.index()] = p;
            idx[b.index()] = q;
            self.core.at(idx)
        })
    }

    /// Appends a slab along `mode`; its rows run over `mode.next()`.
    pub fn grow(&mut self, mode: Mode, slab: &Matrix) -> Result<()> {
        let (a, b) = mode.others();
        let old = self.core.shape();
        if slab.shape() != (old[a.index()], old[b.index()]) {
            return Err(Error::Dimension(format!(
                "slab is {}x{}, expected {}x{}",
                slab.nrows(),
                slab.ncols(),
                old[a.index()],
                old[b.index()]
            )));
        }
        let mut shape = old;
        shape[mode.index()] += 1;
        let last = old[mode.index()];
        self.core = DenseTensor3::from_fn(shape, |i, j, k| {
            let idx = [i, j, k];
            if idx[mode.index()] == last {
                slab[(idx[a.index()], idx[b.index()])]
            } else {
                self.core.at(idx)
            }
        });
        Ok(())
    }
}

/// First vectors `A v₀ w₀`, `A w₀ u₀`, `A u₀ v₀` (normalized) with their
/// norms. Falls back once to random start vectors when one of them
/// vanishes; `None` means the tensor behaves like zero.
fn initial_triple<S: TenvecSource + ?Sized>(
    src: &S,
    start: &StartVectors,
    rng: &mut SeededRng,
) -> Result<Option<([Vector; 3], [f64; 3])>> {
    let mut starts = resolve_start(src, start, rng)?;
    for _ in 0..2 {
        let mut vecs = Vec::with_capacity(3);
        for mode in Mode::ALL {
            let (a, b) = mode.others();
            vecs.push(src.tenvec(mode, &starts[a.index()], &starts[b.index()])?);
        }
        let norms = [0, 1, 2].map(|l| vecs[l].norm());
        if norms.iter().all(|&n| n >= ZERO_NORM) {
            let vecs = [0, 1, 2].map(|l| &vecs[l] / norms[l]);
            return Ok(Some((vecs, norms)));
        }
        starts = src.shape().map(|n| random_unit(rng, n));
    }
    Ok(None)
}

fn empty_bases(shape: [usize; 3]) -> [Matrix; 3] {
    shape.map(|n| Matrix::zeros(n, 0))
}

/// Interleaved restricted SVD-like elimination shared by the optimized
/// minimal Krylov recursion and the WsvdR strategy.
pub(crate) fn restricted_svd_drive<S: TenvecSource + ?Sized>(
    src: &S,
    cfg: &RestrictedConfig,
    name: &str,
) -> Result<SubspaceBases> {
    check_restricted(cfg)?;
    let counting = CountingSource::new(src);
    let shape = counting.shape();
    let caps = [0, 1, 2].map(|l| shape[l].min(cfg.r_max[l]));
    let mut rng = seeded_rng(cfg.seed);
    let mut rec = Recorder::new(name, Some(Estimator::RestrictedSpectral));
    let Some((first, norms)) = initial_triple(&counting, &cfg.start, &mut rng)? else {
        let report = rec.finish(
            [0, 0, 0],
            counting.count(),
            [ModeOutcome::Exhausted { step: 1 }; 3],
        );
        return Ok(SubspaceBases {
            bases: empty_bases(shape),
            report,
        });
    };
    let mut bases = shape.map(Basis::new);
    for (basis, x) in bases.iter_mut().zip(first) {
        basis.push(x);
    }
    let mut nrm2 = norms.map(|n| n * n);
    let init = norms.iter().copied().fold(0.0, f64::max);
    rec.step(None, sizes(&bases), init, init, counting.count());

    let mut flags = [Flag::Active; 3];
    loop {
        let mut progress = false;
        for mode in Mode::ALL {
            let l = mode.index();
            let total: usize = sizes(&bases).iter().sum();
            if !flags[l].eligible(total, cfg.revive) {
                continue;
            }
            let step = bases[l].len() + 1;
            if bases[l].len() >= caps[l] {
                flags[l] = Flag::Done(if caps[l] == shape[l] {
                    ModeOutcome::Exhausted { step }
                } else {
                    ModeOutcome::MaxRank
                });
                continue;
            }
            let (a, b) = mode.others();
            let pivot = {
                let xm = bases[l].to_matrix();
                let xa = bases[a.index()].to_matrix();
                let xb = bases[b.index()].to_matrix();
                let y0 = random_unit(&mut rng, xa.ncols());
                let z0 = random_unit(&mut rng, xb.ncols());
                pivot_wsvdr(&counting, mode, [&xm, &xa, &xb], &y0, &z0, cfg.p_als)?
            };
            // The pivot value bounds the restricted remainder of this mode.
            let mut exhausted = pivot.sigma < ZERO_NORM.max(cfg.tol * nrm2[l].sqrt());
            let mut ortho = None;
            if !exhausted {
                let o = bases[l].orthogonalize(&counting.tenvec(mode, &pivot.y, &pivot.z)?);
                if !o.is_breakdown(cfg.tol) {
                    ortho = Some(o);
                }
            }
            if ortho.is_none() && cfg.retry {
                let y = random_combination(&bases[a.index()], &mut rng);
                let z = random_combination(&bases[b.index()], &mut rng);
                let o = bases[l].orthogonalize(&counting.tenvec(mode, &y, &z)?);
                if o.is_breakdown(cfg.tol) {
                    exhausted = true;
                } else {
                    ortho = Some(o);
                }
            }
            let Some(o) = ortho else {
                let outcome = if exhausted {
                    ModeOutcome::Exhausted { step }
                } else {
                    ModeOutcome::Breakdown { step }
                };
                flags[l] = Flag::Stalled { total, outcome };
                continue;
            };
            bases[l].push(o.unit());
            nrm2[l] += o.norm * o.norm;
            let nrm = nrm2[l].sqrt();
            rec.step(Some(mode), sizes(&bases), o.norm, nrm, counting.count());
            progress = true;
            flags[l] = if o.norm <= cfg.eps * nrm {
                Flag::Done(ModeOutcome::Converged)
            } else {
                Flag::Active
            };
        }
        if !progress {
            break;
        }
    }
    let outcomes = flags.map(|f| f.outcome());
    let report = rec.finish(sizes(&bases), counting.count(), outcomes);
    Ok(SubspaceBases {
        bases: bases.map(|b| b.to_matrix()),
        report,
    })
}

/// Restricted Lanczos-like elimination that grows the three bases and the
/// core together.
///
/// Mode-3 fibres `A x_i y_j` are cached, so a new `x` or `y` costs one tenvec
/// per existing partner vector and a new `z` costs none: a balanced rank-`r`
/// run uses `r² + 3r` tenvecs. The error estimate of each step is the
/// Frobenius norm of the new core slab.
pub fn wlncr_drive<S: TenvecSource + ?Sized>(src: &S, cfg: &ApproxConfig) -> Result<Approximation> {
    cfg.validate()?;
    let counting = CountingSource::new(src);
    let shape = counting.shape();
    let caps = [0, 1, 2].map(|l| shape[l].min(cfg.r_max[l]));
    let mut rng = seeded_rng(cfg.seed);
    let mut rec = Recorder::new("wlncr", Some(Estimator::RestrictedFrobenius));
    let Some(([x1, y1, z1], _)) = initial_triple(&counting, &cfg.start, &mut rng)? else {
        let report = rec.finish(
            [0, 0, 0],
            counting.count(),
            [ModeOutcome::Exhausted { step: 1 }; 3],
        );
        return Ok(Approximation {
            tucker: TuckerTensor::zero(shape),
            report,
        });
    };
    let mut fibres: Vec<Vec<Vector>> = vec![vec![counting.tenvec(Mode::Three, &x1, &y1)?]];
    let g = z1.dot(&fibres[0][0]);
    let mut core = GrowingCore::new(g);
    let mut bases = shape.map(Basis::new);
    bases[0].push(x1);
    bases[1].push(y1);
    bases[2].push(z1);
    let mut nrm2 = g * g;
    rec.step(None, sizes(&bases), g.abs(), g.abs(), counting.count());

    let mut flags = [Flag::Active; 3];
    loop {
        let mut progress = false;
        for mode in Mode::ALL {
            let l = mode.index();
            let total: usize = sizes(&bases).iter().sum();
            if !flags[l].eligible(total, false) {
                continue;
            }
            let step = bases[l].len() + 1;
            if bases[l].len() >= caps[l] {
                flags[l] = Flag::Done(if caps[l] == shape[l] {
                    ModeOutcome::Exhausted { step }
                } else {
                    ModeOutcome::MaxRank
                });
                continue;
            }
            let (a, b) = mode.others();
            let piv = pivot_wlncr(&core.slice(mode, bases[l].len() - 1));
            let mut ortho = None;
            if piv.sigma >= ZERO_NORM {
                let p = bases[a.index()].expand(&piv.y);
                let q = bases[b.index()].expand(&piv.z);
                let o = bases[l].orthogonalize(&counting.tenvec(mode, &p, &q)?);
                if !o.is_breakdown(cfg.tol) {
                    ortho = Some(o);
                }
            }
            if ortho.is_none() && cfg.retry {
                let p = random_combination(&bases[a.index()], &mut rng);
                let q = random_combination(&bases[b.index()], &mut rng);
                let o = bases[l].orthogonalize(&counting.tenvec(mode, &p, &q)?);
                if !o.is_breakdown(cfg.tol) {
                    ortho = Some(o);
                }
            }
            let Some(o) = ortho else {
                flags[l] = Flag::Stalled {
                    total,
                    outcome: ModeOutcome::Breakdown { step },
                };
                continue;
            };
            let x = o.unit();
            let [k, lq, m] = sizes(&bases);
            let slab = match mode {
                Mode::One => {
                    let mut row = Vec::with_capacity(lq);
                    for y in bases[1].columns() {
                        row.push(counting.tenvec(Mode::Three, &x, y)?);
                    }
                    let slab = Matrix::from_fn(lq, m, |j, s| bases[2].column(s).dot(&row[j]));
                    fibres.push(row);
                    slab
                }
                Mode::Two => {
                    for (i, xi) in bases[0].columns().iter().enumerate() {
                        let f = counting.tenvec(Mode::Three, xi, &x)?;
                        fibres[i].push(f);
                    }
                    Matrix::from_fn(m, k, |s, i| bases[2].column(s).dot(&fibres[i][lq]))
                }
                Mode::Three => Matrix::from_fn(k, lq, |i, j| x.dot(&fibres[i][j])),
            };
            bases[l].push(x);
            core.grow(mode, &slab)?;
            let err = slab.norm();
            nrm2 += err * err;
            let nrm = nrm2.sqrt();
            rec.step(Some(mode), sizes(&bases), err, nrm, counting.count());
            progress = true;
            flags[l] = if err < cfg.eps * nrm {
                Flag::Done(ModeOutcome::Converged)
            } else {
                Flag::Active
            };
        }
        if !progress {
            break;
        }
    }
    let outcomes = flags.map(|f| f.outcome());
    let report = rec.finish(sizes(&bases), counting.count(), outcomes);
    let tucker = TuckerTensor::new(core.into_tensor(), bases.map(|b| b.to_matrix()))?;
    Ok(Approximation { tucker, report })
}

/// Tucker approximation by Wedderburn elimination.
///
/// Wsvd and Wlnc run three independent mode eliminations (advanced
/// round-robin so the report shows joint progress) followed by the optimal
/// core; WsvdR runs the interleaved restricted elimination followed by the
/// core; WlncR assembles the core during elimination.
pub fn tucker_approximate<S: TenvecSource + ?Sized>(
    src: &S,
    cfg: &ApproxConfig,
) -> Result<Approximation> {
    cfg.validate()?;
    match cfg.strategy {
        PivotStrategy::WlncR => wlncr_drive(src, cfg),
        PivotStrategy::WsvdR { p_als } => {
            let run = restricted_svd_drive(src, &cfg.restricted(p_als), "wsvdr")?;
            with_core(src, run.bases, run.report)
        }
        PivotStrategy::Wsvd { .. } | PivotStrategy::Wlnc { .. } => {
            let counting = CountingSource::new(src);
            let shape = counting.shape();
            let mut runs = Mode::ALL.map(|m| ModeRun::new(shape, m, cfg));
            let mut rec = Recorder::new(cfg.strategy.name(), Some(cfg.strategy.estimator()));
            while runs.iter().any(|r| r.outcome.is_none()) {
                for l in 0..3 {
                    if runs[l].outcome.is_some() {
                        continue;
                    }
                    if let Some(err) = runs[l].advance(&counting, cfg)? {
                        let ranks = [0, 1, 2].map(|i| runs[i].basis.len());
                        rec.step(
                            Some(runs[l].mode),
                            ranks,
                            err,
                            runs[l].nrm(),
                            counting.count(),
                        );
                    }
                }
            }
            let outcomes = runs
                .each_ref()
                .map(|r| r.outcome.expect("all runs finished"));
            let ranks = runs.each_ref().map(|r| r.basis.len());
            let report = rec.finish(ranks, counting.count(), outcomes);
            let bases = runs.map(|r| r.basis.to_matrix());
            with_core(src, bases, report)
        }
    }
}

fn with_core<S: TenvecSource + ?Sized>(
    src: &S,
    bases: [Matrix; 3],
    mut report: RunReport,
) -> Result<Approximation> {
    let counting = CountingSource::new(src);
    let core = compute_core(&counting, [&bases[0], &bases[1], &bases[2]])?;
    report.tenvec_count += counting.count();
    let tucker = TuckerTensor::new(core, bases)?;
    Ok(Approximation { tucker, report })
}
