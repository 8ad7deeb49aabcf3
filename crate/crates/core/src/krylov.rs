//! Rank-(1,1,1) kernels and the minimal Krylov recursion with its
//! ALS-optimized variant.

use crate::linalg::{random_unit, seeded_rng, Basis, SeededRng};
use crate::report::Recorder;
use crate::source::{check_tenvec_args, unit, CountingSource};
use crate::{
    Error, Matrix, Mode, ModeOutcome, Result, RunReport, TenvecSource, Termination, Vector,
};

/// Norms below this are treated as an exactly vanishing iterate.
pub const ZERO_NORM: f64 = 1e-300;

/// Best rank-(1,1,1) approximation `σ u ⊗ v ⊗ w` found by ALS.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Result {
    pub sigma: f64,
    pub u: Vector,
    pub v: Vector,
    pub w: Vector,
    /// `σ` after each completed sweep.
    pub history: Vec<f64>,
}

impl Rank1Result {
    pub fn factor(&self, mode: Mode) -> &Vector {
        match mode {
            Mode::One => &self.u,
            Mode::Two => &self.v,
            Mode::Three => &self.w,
        }
    }
}

/// ALS rank-(1,1,1) iteration: `sweeps` cyclic updates `u := A v w`,
/// `v := A w u`, `w := A u v`, each normalized.
pub fn als_rank1<S: TenvecSource + ?Sized>(
    src: &S,
    v0: &Vector,
    w0: &Vector,
    sweeps: usize,
) -> Result<Rank1Result> {
    als_rank1_from(src, Mode::One, v0, w0, sweeps)
}

/// ALS sweep starting with the update of `first`; `b0` is the start vector
/// of `first.next()` and `c0` that of the remaining mode.
///
/// A vanishing iterate stops the iteration with `σ = 0`.
pub fn als_rank1_from<S: TenvecSource + ?Sized>(
    src: &S,
    first: Mode,
    b0: &Vector,
    c0: &Vector,
    sweeps: usize,
) -> Result<Rank1Result> {
    if sweeps == 0 {
        return Err(Error::InvalidArgument(
            "at least one ALS sweep is required".into(),
        ));
    }
    let shape = src.shape();
    check_tenvec_args(shape, first, b0, c0)?;
    let (ma, mb) = first.others();
    let mut vecs: [Vector; 3] = [0, 1, 2].map(|l| unit(shape[l], 0));
    vecs[ma.index()] = b0.clone();
    vecs[mb.index()] = c0.clone();
    let mut sigma = 0.0;
    let mut history = Vec::with_capacity(sweeps);
    'outer: for _ in 0..sweeps {
        for mode in [first, ma, mb] {
            let (p, q) = mode.others();
            let t = src.tenvec(mode, &vecs[p.index()], &vecs[q.index()])?;
            let s = t.norm();
            if s.is_nan() || s < ZERO_NORM {
                sigma = 0.0;
                history.push(0.0);
                break 'outer;
            }
            sigma = s;
            vecs[mode.index()] = t / s;
        }
        history.push(sigma);
    }
    let [u, v, w] = vecs;
    Ok(Rank1Result {
        sigma,
        u,
        v,
        w,
        history,
    })
}

/// Leading singular triple estimate of the slice `A ×_mode xᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceRank1 {
    pub sigma: f64,
    /// Vector on `mode.next()`.
    pub y: Vector,
    /// Vector on the remaining mode.
    pub z: Vector,
}

/// Power iterations on the slice matrix `A ×_mode xᵀ`: alternately
/// `y := A z x` and `z := A x y` (mode-1 notation), normalized.
pub fn power_rank1_slice<S: TenvecSource + ?Sized>(
    src: &S,
    mode: Mode,
    x: &Vector,
    z0: &Vector,
    sweeps: usize,
) -> Result<SliceRank1> {
    if sweeps == 0 {
        return Err(Error::InvalidArgument(
            "at least one power sweep is required".into(),
        ));
    }
    let shape = src.shape();
    let (a, b) = mode.others();
    if x.len() != shape[mode.index()] || z0.len() != shape[b.index()] {
        return Err(Error::Dimension(format!(
            "slice vectors have lengths ({}, {}), expected ({}, {})",
            x.len(),
            z0.len(),
            shape[mode.index()],
            shape[b.index()]
        )));
    }
    let mut y = unit(shape[a.index()], 0);
    let mut z = z0.clone();
    let mut sigma = 0.0;
    for _ in 0..sweeps {
        let ty = src.tenvec(a, &z, x)?;
        let s = ty.norm();
        if s.is_nan() || s < ZERO_NORM {
            return Ok(SliceRank1 { sigma: 0.0, y, z });
        }
        y = ty / s;
        let tz = src.tenvec(b, x, &y)?;
        let s = tz.norm();
        if s.is_nan() || s < ZERO_NORM {
            return Ok(SliceRank1 { sigma: 0.0, y, z });
        }
        sigma = s;
        z = tz / s;
    }
    Ok(SliceRank1 { sigma, y, z })
}

/// How the initial mode-1 and mode-2 vectors are chosen.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum StartVectors {
    /// Seeded random unit vectors.
    Random,
    /// First canonical basis vectors.
    E1,
    /// `u = A v' w'`, `v = A w' u` from seeded random probes `v'`, `w'`
    /// (two tenvecs). Keeps the start inside the mode subspaces.
    #[default]
    DataDriven,
    /// Explicit unit vectors for modes 1, 2 and 3; algorithms that need only
    /// two of them ignore the third.
    Given([Vector; 3]),
}

fn normalized_or_random(v: Vector, rng: &mut SeededRng) -> Vector {
    let n = v.norm();
    if n >= ZERO_NORM {
        v / n
    } else {
        random_unit(rng, v.len())
    }
}

/// Resolves the start vectors for all three modes.
pub(crate) fn resolve_start<S: TenvecSource + ?Sized>(
    src: &S,
    start: &StartVectors,
    rng: &mut SeededRng,
) -> Result<[Vector; 3]> {
    let [n1, n2, n3] = src.shape();
    Ok(match start {
        StartVectors::Random => [
            random_unit(rng, n1),
            random_unit(rng, n2),
            random_unit(rng, n3),
        ],
        StartVectors::E1 => [unit(n1, 0), unit(n2, 0), unit(n3, 0)],
        StartVectors::DataDriven => {
            let vp = random_unit(rng, n2);
            let wp = random_unit(rng, n3);
            let u = normalized_or_random(src.tenvec(Mode::One, &vp, &wp)?, rng);
            let v = normalized_or_random(src.tenvec(Mode::Two, &wp, &u)?, rng);
            [u, v, wp]
        }
        StartVectors::Given(vs) => {
            for (l, v) in vs.iter().enumerate() {
                if v.len() != src.shape()[l] {
                    return Err(Error::Dimension(format!(
                        "start vector {} has length {}, expected {}",
                        l + 1,
                        v.len(),
                        src.shape()[l]
                    )));
                }
                if (v.norm() - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "start vector {} is not a unit vector",
                        l + 1
                    )));
                }
            }
            vs.clone()
        }
    })
}

/// What MKR does when one mode breaks down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BreakdownPolicy {
    /// Stop the whole recursion and report the stalled mode.
    #[default]
    Stop,
    /// Freeze the stalled mode; its current vector becomes a seeded random
    /// combination of its basis so the other modes can keep growing.
    Continue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MkrConfig {
    /// Target basis size per mode (capped by the mode sizes).
    pub rank: usize,
    pub tol: f64,
    pub start: StartVectors,
    pub policy: BreakdownPolicy,
    pub seed: u64,
}

impl MkrConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            tol: 1e-12,
            start: StartVectors::default(),
            policy: BreakdownPolicy::default(),
            seed: 0,
        }
    }
}

/// Orthonormal mode bases with the run report.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBases {
    pub bases: [Matrix; 3],
    pub report: RunReport,
}

impl SubspaceBases {
    pub fn ranks(&self) -> [usize; 3] {
        [0, 1, 2].map(|l| self.bases[l].ncols())
    }
}

pub(crate) fn sizes(bases: &[Basis; 3]) -> [usize; 3] {
    [0, 1, 2].map(|l| bases[l].len())
}

pub(crate) fn random_combination(basis: &Basis, rng: &mut SeededRng) -> Vector {
    let c = random_unit(rng, basis.len());
    let v = basis.expand(&c);
    let n = v.norm();
    v / n
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must lie in (0, 1), got {tol}"
        )));
    }
    Ok(())
}

/// Minimal Krylov recursion.
///
/// Starting from `u_1, v_1` and `w_1 = A u_1 v_1`, every iteration appends
/// `u := A v_k w_k`, `v := A w_k u_{k+1}`, `w := A u_{k+1} v_{k+1}` after
/// orthogonalization. With a random or canonical start this costs
/// `3 rank - 2` tenvecs; the data-driven start adds two.
pub fn mkr<S: TenvecSource + ?Sized>(src: &S, cfg: &MkrConfig) -> Result<SubspaceBases> {
    check_tol(cfg.tol)?;
    if cfg.rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let counting = CountingSource::new(src);
    let shape = counting.shape();
    let caps = shape.map(|n| n.min(cfg.rank));
    let mut rng = seeded_rng(cfg.seed);
    let mut rec = Recorder::new("mkr", None);
    let start = resolve_start(&counting, &cfg.start, &mut rng)?;
    let [u1, v1, _] = start;

    let w = counting.tenvec(Mode::Three, &u1, &v1)?;
    let w_norm = w.norm();
    let mut bases = shape.map(Basis::new);
    let mut outcomes = [ModeOutcome::Interrupted; 3];
    if w_norm.is_nan() || w_norm < ZERO_NORM {
        outcomes[2] = ModeOutcome::Breakdown { step: 1 };
        let report = rec.finish_with(
            [0, 0, 0],
            counting.count(),
            outcomes,
            Termination::Breakdown {
                mode: Mode::Three,
                step: 1,
            },
        );
        return Ok(SubspaceBases {
            bases: shape.map(|n| Matrix::zeros(n, 0)),
            report,
        });
    }
    let w1 = w / w_norm;
    bases[0].push(u1.clone());
    bases[1].push(v1.clone());
    bases[2].push(w1.clone());
    let mut current = [u1, v1, w1];
    let mut nrm2 = [w_norm * w_norm; 3];
    rec.step(None, sizes(&bases), w_norm, w_norm, counting.count());

    let mut frozen = [false; 3];
    let mut stop: Option<Termination> = None;
    'outer: loop {
        let growing = Mode::ALL
            .iter()
            .any(|m| !frozen[m.index()] && bases[m.index()].len() < caps[m.index()]);
        if !growing {
            break;
        }
        for mode in Mode::ALL {
            let l = mode.index();
            if frozen[l] || bases[l].len() >= caps[l] {
                current[l] = random_combination(&bases[l], &mut rng);
                continue;
            }
            let (a, b) = mode.others();
            let raw = counting.tenvec(mode, &current[a.index()], &current[b.index()])?;
            let ortho = bases[l].orthogonalize(&raw);
            if ortho.is_breakdown(cfg.tol) {
                let step = bases[l].len() + 1;
                outcomes[l] = ModeOutcome::Breakdown { step };
                match cfg.policy {
                    BreakdownPolicy::Stop => {
                        stop = Some(Termination::Breakdown { mode, step });
                        break 'outer;
                    }
                    BreakdownPolicy::Continue => {
                        frozen[l] = true;
                        current[l] = random_combination(&bases[l], &mut rng);
                        continue;
                    }
                }
            }
            let x = ortho.unit();
            bases[l].push(x.clone());
            current[l] = x;
            nrm2[l] += ortho.norm * ortho.norm;
            rec.step(
                Some(mode),
                sizes(&bases),
                ortho.norm,
                nrm2[l].sqrt(),
                counting.count(),
            );
        }
    }

    for l in 0..3 {
        if matches!(outcomes[l], ModeOutcome::Interrupted) && stop.is_none() {
            outcomes[l] = if bases[l].len() == shape[l] {
                ModeOutcome::Exhausted { step: shape[l] + 1 }
            } else {
                ModeOutcome::MaxRank
            };
        }
    }
    let final_ranks = sizes(&bases);
    let report = match stop {
        Some(t) => rec.finish_with(final_ranks, counting.count(), outcomes, t),
        None => rec.finish(final_ranks, counting.count(), outcomes),
    };
    Ok(SubspaceBases {
        bases: bases.map(|b| b.to_matrix()),
        report,
    })
}

/// Parameters of the restricted (optimized) recursions.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedConfig {
    /// Basis size caps per mode (further capped by the mode sizes).
    pub r_max: [usize; 3],
    pub tol: f64,
    pub eps: f64,
    pub p_als: usize,
    pub start: StartVectors,
    pub seed: u64,
    /// On breakdown, retry once with random restricted leading vectors.
    pub retry: bool,
    /// Re-attempt a stalled mode after another mode's basis has grown.
    pub revive: bool,
}

impl Default for RestrictedConfig {
    fn default() -> Self {
        Self {
            r_max: [usize::MAX; 3],
            tol: 1e-12,
            eps: 1e-8,
            p_als: 3,
            start: StartVectors::Random,
            seed: 0,
            retry: false,
            revive: false,
        }
    }
}

/// Per-mode state of an interleaved restricted run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Flag {
    Active,
    Done(ModeOutcome),
    /// Stalled when the bases held `total` vectors in all.
    Stalled {
        total: usize,
        outcome: ModeOutcome,
    },
}

impl Flag {
    pub(crate) fn eligible(&self, total: usize, revive: bool) -> bool {
        match *self {
            Flag::Active => true,
            Flag::Done(_) => false,
            Flag::Stalled { total: t, .. } => revive && total > t,
        }
    }

    pub(crate) fn outcome(&self) -> ModeOutcome {
        match *self {
            Flag::Active => ModeOutcome::MaxRank,
            Flag::Done(o) | Flag::Stalled { outcome: o, .. } => o,
        }
    }
}

/// Optimized minimal Krylov recursion: each new vector maximizes its
/// component orthogonal to the current basis over leading vectors drawn
/// from the other two mode bases, by `p_als` ALS sweeps on the restricted
/// tensor `A ×_m (I - X Xᵀ) ×_a Yᵀ ×_b Zᵀ`.
///
/// The first vectors are `A v₀ w₀`, `A w₀ u₀`, `A u₀ v₀` for the start
/// vectors `u₀, v₀, w₀`. Modes are then visited round-robin; a mode stops on
/// `err <= eps · nrm` with `err = ‖x'‖`, at its cap, or when no new
/// direction can be found. This is the restricted SVD-like Wedderburn
/// strategy under another name.
pub fn optimized_mkr<S: TenvecSource + ?Sized>(
    src: &S,
    cfg: &RestrictedConfig,
) -> Result<SubspaceBases> {
    crate::wedderburn::restricted_svd_drive(src, cfg, "opt-mkr")
}

pub(crate) fn check_restricted(cfg: &RestrictedConfig) -> Result<()> {
    check_tol(cfg.tol)?;
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {}",
            cfg.eps
        )));
    }
    if cfg.p_als == 0 {
        return Err(Error::InvalidArgument("p_als must be at least 1".into()));
    }
    if cfg.r_max.contains(&0) {
        return Err(Error::InvalidArgument(
            "r_max must be at least 1 in every mode".into(),
        ));
    }
    Ok(())
}
