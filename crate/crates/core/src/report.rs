//! Run reports shared by every approximation algorithm.

use std::time::Instant;

use serde::Serialize;

use crate::Mode;

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Every mode met its stopping rule (or its subspace was exhausted).
    Converged,
    /// Growth of `mode` stalled when attempting basis vector number `step`.
    Breakdown { mode: Mode, step: usize },
    /// A rank cap was reached before convergence.
    MaxRank,
}

impl Termination {
    /// Process exit code used by the command line tool. Codes 1 and 2 are
    /// left for runtime and usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Termination::Converged => 0,
            Termination::Breakdown { .. } => 3,
            Termination::MaxRank => 4,
        }
    }

    /// Combines per-mode outcomes: the first breakdown wins, then any rank cap.
    pub fn from_outcomes(outcomes: &[ModeOutcome; 3]) -> Self {
        for mode in Mode::ALL {
            if let ModeOutcome::Breakdown { step } = outcomes[mode.index()] {
                return Termination::Breakdown { mode, step };
            }
        }
        if outcomes.contains(&ModeOutcome::MaxRank) {
            Termination::MaxRank
        } else {
            Termination::Converged
        }
    }
}

/// How the subspace growth of a single mode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeOutcome {
    /// The error estimate dropped below `eps · nrm`.
    Converged,
    /// The new direction fell inside the current span (after any retry).
    Breakdown {
        step: usize,
    },
    /// The remainder vanished: the basis already represents the tensor in
    /// this mode to working accuracy.
    Exhausted {
        step: usize,
    },
    MaxRank,
    /// The run stopped because another mode broke down.
    Interrupted,
    /// The mode was not processed by this run.
    Idle,
}

/// Which error estimate drives the stopping rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Spectral-norm estimate of the unrestricted remainder.
    Spectral,
    /// Frobenius norm of the newest restricted core slab.
    RestrictedFrobenius,
    /// Spectral-norm estimate of the restricted remainder.
    RestrictedSpectral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based, strictly increasing over the run.
    pub step: usize,
    /// Mode whose basis grew at this step (`None` for whole-tensor steps).
    pub mode: Option<Mode>,
    /// Basis sizes after the step.
    pub ranks: [usize; 3],
    pub err_estimate: f64,
    pub nrm: f64,
    /// Cumulative tenvec count after the step.
    pub tenvecs: u64,
    pub elapsed_ms: f64,
    pub true_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub algorithm: String,
    pub steps: Vec<StepRecord>,
    pub final_ranks: [usize; 3],
    pub tenvec_count: u64,
    pub wall_time_ms: f64,
    pub termination: Termination,
    pub mode_outcomes: [ModeOutcome; 3],
    pub estimator: Option<Estimator>,
}

impl RunReport {
    /// True when step numbers strictly increase.
    pub fn steps_increasing(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].step < w[1].step)
    }
}

/// Incrementally assembles a [`RunReport`].
#[derive(Debug)]
pub(crate) struct Recorder {
    algorithm: String,
    estimator: Option<Estimator>,
    steps: Vec<StepRecord>,
    start: Instant,
}

impl Recorder {
    pub fn new(algorithm: &str, estimator: Option<Estimator>) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            estimator,
            steps: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    pub fn step(
        &mut self,
        mode: Option<Mode>,
        ranks: [usize; 3],
        err: f64,
        nrm: f64,
        tenvecs: u64,
    ) {
        let elapsed_ms = self.elapsed_ms();
        self.steps.push(StepRecord {
            step: self.steps.len() + 1,
            mode,
            ranks,
            err_estimate: err,
            nrm,
            tenvecs,
            elapsed_ms,
            true_error: None,
        });
    }

    pub fn finish(
        self,
        final_ranks: [usize; 3],
        tenvec_count: u64,
        mode_outcomes: [ModeOutcome; 3],
    ) -> RunReport {
        self.finish_with(
            final_ranks,
            tenvec_count,
            mode_outcomes,
            Termination::from_outcomes(&mode_outcomes),
        )
    }

    pub fn finish_with(
        self,
        final_ranks: [usize; 3],
        tenvec_count: u64,
        mode_outcomes: [ModeOutcome; 3],
        termination: Termination,
    ) -> RunReport {
        RunReport {
            wall_time_ms: self.elapsed_ms(),
            algorithm: self.algorithm,
            steps: self.steps,
            final_ranks,
            tenvec_count,
            termination,
            mode_outcomes,
            estimator: self.estimator,
        }
    }
}
