//! Single runs of any algorithm with optional dense ground truth, and their
//! CSV / JSON artifacts.

use std::fmt::Write as _;
use std::time::Instant;

use log::warn;
use serde::Serialize;

use tenkrylov::krylov::{mkr, optimized_mkr, MkrConfig, RestrictedConfig};
use tenkrylov::linalg::{random_orthonormal, seeded_rng};
use tenkrylov::oracle::{
    dense_residual, hosvd, mode_singular_values, projection_residual, tucker_als,
};
use tenkrylov::wedderburn::{tucker_approximate, ApproxConfig, PivotStrategy};
use tenkrylov::{
    CountingSource, DenseTensor3, Matrix, ModeOutcome, RunReport, StepRecord, TenvecSource,
    Termination, TuckerTensor,
};

use crate::formats::Tensor;

/// Default cap on densified entries for the ground-truth oracle.
pub const DEFAULT_MEM_BUDGET: usize = 200_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mkr,
    OptMkr,
    Wsvd,
    Wlnc,
    Wsvdr,
    Wlncr,
    Hosvd,
    TuckerAls,
}

impl Algorithm {
    pub const KRYLOV: [Algorithm; 6] = [
        Algorithm::Mkr,
        Algorithm::OptMkr,
        Algorithm::Wsvd,
        Algorithm::Wlnc,
        Algorithm::Wsvdr,
        Algorithm::Wlncr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mkr => "mkr",
            Algorithm::OptMkr => "opt-mkr",
            Algorithm::Wsvd => "wsvd",
            Algorithm::Wlnc => "wlnc",
            Algorithm::Wsvdr => "wsvdr",
            Algorithm::Wlncr => "wlncr",
            Algorithm::Hosvd => "hosvd",
            Algorithm::TuckerAls => "tucker-als",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub tol: f64,
    pub eps: f64,
    /// Per-mode rank caps; `usize::MAX` means uncapped.
    pub r_max: [usize; 3],
    pub p_als: usize,
    pub p_pow: usize,
    pub seed: u64,
    /// Compute per-step true errors against the densified tensor.
    pub oracle: bool,
    /// Largest densified tensor (in entries) the oracle may form.
    pub mem_budget: usize,
    pub als_iterations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Wsvd,
            tol: 1e-12,
            eps: 1e-8,
            r_max: [usize::MAX; 3],
            p_als: 3,
            p_pow: 3,
            seed: 0,
            oracle: true,
            mem_budget: DEFAULT_MEM_BUDGET,
            als_iterations: 10,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0} needs the dense tensor, which exceeds the memory budget ({1} > {2} entries)")]
    TooLarge(&'static str, usize, usize),
    #[error(transparent)]
    Tensor(#[from] tenkrylov::Error),
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Report with `true_error` filled in when the oracle ran.
    pub report: RunReport,
    /// Final orthonormal mode bases.
    pub factors: [Matrix; 3],
    /// Tenvecs seen by the outer counting wrapper.
    pub counted_tenvecs: u64,
    /// Frobenius norm of the tensor when the oracle ran.
    pub norm: Option<f64>,
}

impl Experiment {
    pub fn oracle_used(&self) -> bool {
        self.norm.is_some()
    }

    pub fn final_true_error(&self) -> Option<f64> {
        self.report.steps.last().and_then(|s| s.true_error)
    }

    pub fn final_relative_error(&self) -> Option<f64> {
        Some(self.final_true_error()? / self.norm?.max(f64::MIN_POSITIVE))
    }
}

fn capped(r_max: [usize; 3], shape: [usize; 3]) -> [usize; 3] {
    [0, 1, 2].map(|l| r_max[l].min(shape[l]))
}

fn approx_config(cfg: &ExperimentConfig, strategy: PivotStrategy) -> ApproxConfig {
    ApproxConfig {
        tol: cfg.tol,
        eps: cfg.eps,
        r_max: cfg.r_max,
        seed: cfg.seed,
        ..ApproxConfig::new(strategy)
    }
}

fn columns(m: &Matrix, r: usize) -> Matrix {
    m.columns(0, r.min(m.ncols())).into_owned()
}

/// Runs one algorithm on `t`.
pub fn run_experiment(t: &Tensor, cfg: &ExperimentConfig) -> Result<Experiment, ExperimentError> {
    let shape = t.shape();
    let dense = if cfg.oracle || cfg.algorithm == Algorithm::Hosvd {
        if t.dense_len() <= cfg.mem_budget {
            Some(t.to_dense())
        } else if cfg.algorithm == Algorithm::Hosvd {
            return Err(ExperimentError::TooLarge(
                "hosvd",
                t.dense_len(),
                cfg.mem_budget,
            ));
        } else {
            warn!(
                "oracle disabled: dense tensor has {} entries, budget is {}",
                t.dense_len(),
                cfg.mem_budget
            );
            None
        }
    } else {
        None
    };
    let oracle = if cfg.oracle { dense.as_ref() } else { None };

    let counting = CountingSource::new(t);
    let (mut report, factors) = match cfg.algorithm {
        Algorithm::Mkr => {
            let rank = capped(cfg.r_max, shape).into_iter().max().unwrap_or(1);
            let out = mkr(
                &counting,
                &MkrConfig {
                    tol: cfg.tol,
                    seed: cfg.seed,
                    ..MkrConfig::new(rank)
                },
            )?;
            (out.report, out.bases)
        }
        Algorithm::OptMkr => {
            let rc = RestrictedConfig {
                r_max: cfg.r_max,
                tol: cfg.tol,
                eps: cfg.eps,
                p_als: cfg.p_als,
                seed: cfg.seed,
                ..Default::default()
            };
            let out = optimized_mkr(&counting, &rc)?;
            (out.report, out.bases)
        }
        Algorithm::Wsvd | Algorithm::Wlnc | Algorithm::Wsvdr | Algorithm::Wlncr => {
            let strategy = match cfg.algorithm {
                Algorithm::Wsvd => PivotStrategy::Wsvd { p_als: cfg.p_als },
                Algorithm::Wlnc => PivotStrategy::Wlnc { p_pow: cfg.p_pow },
                Algorithm::Wsvdr => PivotStrategy::WsvdR { p_als: cfg.p_als },
                _ => PivotStrategy::WlncR,
            };
            let out = tucker_approximate(&counting, &approx_config(cfg, strategy))?;
            let factors = out.tucker.factors().clone();
            (out.report, factors)
        }
        Algorithm::Hosvd => {
            let d = dense.as_ref().expect("dense tensor formed above");
            run_hosvd(d, capped(cfg.r_max, shape))?
        }
        Algorithm::TuckerAls => run_als(&counting, oracle, cfg)?,
    };

    if let Some(d) = oracle {
        if cfg.algorithm != Algorithm::TuckerAls {
            for step in &mut report.steps {
                let [a, b, c] = step.ranks;
                let basis = [
                    columns(&factors[0], a),
                    columns(&factors[1], b),
                    columns(&factors[2], c),
                ];
                step.true_error = Some(projection_residual(d, [&basis[0], &basis[1], &basis[2]])?);
            }
        }
    }
    Ok(Experiment {
        config: cfg.clone(),
        report,
        factors,
        counted_tenvecs: counting.count(),
        norm: oracle.map(DenseTensor3::frobenius_norm),
    })
}

/// Truncated HOSVD as a single step; the estimate is the classical bound
/// `sqrt(Σ_l Σ_{k > r_l} σ_k^(l)²)`.
fn run_hosvd(
    d: &DenseTensor3,
    ranks: [usize; 3],
) -> Result<(RunReport, [Matrix; 3]), ExperimentError> {
    let start = Instant::now();
    let approx = hosvd(d, ranks)?;
    let svs = mode_singular_values(d);
    let bound: f64 = (0..3)
        .map(|l| svs[l].iter().skip(ranks[l]).map(|s| s * s).sum::<f64>())
        .sum();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let report = RunReport {
        algorithm: "hosvd".into(),
        steps: vec![StepRecord {
            step: 1,
            mode: None,
            ranks,
            err_estimate: bound.sqrt(),
            nrm: approx.core().frobenius_norm(),
            tenvecs: 0,
            elapsed_ms,
            true_error: None,
        }],
        final_ranks: ranks,
        tenvec_count: 0,
        wall_time_ms: elapsed_ms,
        termination: Termination::Converged,
        mode_outcomes: [ModeOutcome::Converged; 3],
        estimator: None,
    };
    Ok((report, approx.factors().clone()))
}

/// Tucker-ALS from seeded random orthonormal factors, one step per
/// iteration. There is no tenvec-only error estimate, so `err_estimate` is
/// NaN (an empty CSV field).
fn run_als<S: TenvecSource>(
    src: &CountingSource<S>,
    oracle: Option<&DenseTensor3>,
    cfg: &ExperimentConfig,
) -> Result<(RunReport, [Matrix; 3]), ExperimentError> {
    let start = Instant::now();
    let shape = src.shape();
    let ranks = capped(cfg.r_max, shape);
    let mut rng = seeded_rng(cfg.seed);
    let factors = [0, 1, 2].map(|l| random_orthonormal(&mut rng, shape[l], ranks[l]));
    let mut current = TuckerTensor::new(DenseTensor3::zeros(ranks), factors)?;
    let mut steps = Vec::with_capacity(cfg.als_iterations);
    for it in 0..cfg.als_iterations {
        current = tucker_als(src, &current, 1)?;
        let true_error = oracle.map(|d| dense_residual(d, &current)).transpose()?;
        steps.push(StepRecord {
            step: it + 1,
            mode: None,
            ranks: current.ranks(),
            err_estimate: f64::NAN,
            nrm: current.core().frobenius_norm(),
            tenvecs: src.count(),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            true_error,
        });
    }
    let report = RunReport {
        algorithm: "tucker-als".into(),
        steps,
        final_ranks: current.ranks(),
        tenvec_count: src.count(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        termination: Termination::Converged,
        mode_outcomes: [ModeOutcome::Converged; 3],
        estimator: None,
    };
    Ok((report, current.factors().clone()))
}

pub const CSV_HEADER: &str = "step,mode,rank,r1,r2,r3,err_estimate,true_error,tenvecs,ms";

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

/// Error-vs-rank table. `rank` is the size of the basis that grew (the
/// largest one for whole-tensor steps). Everything but `ms` is a
/// deterministic function of the configuration and seed.
pub fn csv(report: &RunReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in &report.steps {
        let rank = match s.mode {
            Some(m) => s.ranks[m.index()],
            None => s.ranks.into_iter().max().unwrap_or(0),
        };
        let mode = s.mode.map(|m| m.number().to_string()).unwrap_or_default();
        let truth = s.true_error.map(num).unwrap_or_default();
        let [r1, r2, r3] = s.ranks;
        writeln!(
            out,
            "{},{mode},{rank},{r1},{r2},{r3},{},{truth},{},{:.3}",
            s.step,
            num(s.err_estimate),
            s.tenvecs,
            s.elapsed_ms
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    algorithm: &'static str,
    input: &'a str,
    shape: [usize; 3],
    config: &'a ExperimentConfig,
    final_ranks: [usize; 3],
    tenvec_count: u64,
    counted_tenvecs: u64,
    wall_time_ms: f64,
    termination: Termination,
    exit_code: i32,
    mode_outcomes: [ModeOutcome; 3],
    estimator: Option<tenkrylov::Estimator>,
    oracle: bool,
    norm: Option<f64>,
    final_true_error: Option<f64>,
    final_relative_error: Option<f64>,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

/// JSON run summary; `extra` carries command-specific fields.
pub fn summary_json(
    exp: &Experiment,
    input: &str,
    shape: [usize; 3],
    extra: Option<serde_json::Value>,
) -> String {
    let mut cfg = exp.config.clone();
    // JSON has no infinity; uncapped modes are written as their size.
    cfg.r_max = capped(cfg.r_max, shape);
    let s = Summary {
        algorithm: exp.config.algorithm.name(),
        input,
        shape,
        config: &cfg,
        final_ranks: exp.report.final_ranks,
        tenvec_count: exp.report.tenvec_count,
        counted_tenvecs: exp.counted_tenvecs,
        wall_time_ms: exp.report.wall_time_ms,
        termination: exp.report.termination,
        exit_code: exp.report.termination.exit_code(),
        mode_outcomes: exp.report.mode_outcomes,
        estimator: exp.report.estimator,
        oracle: exp.oracle_used(),
        norm: exp.norm,
        final_true_error: exp.final_true_error(),
        final_relative_error: exp.final_relative_error(),
        steps: exp.report.steps.len(),
        extra,
    };
    serde_json::to_string_pretty(&s).expect("summary is serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{exact_tucker, two_slice};
    use tenkrylov::Mode;

    fn exact() -> Tensor {
        Tensor::Tucker(exact_tucker([12; 3], [3; 3], 4))
    }

    #[test]
    fn every_algorithm_runs_with_oracle() {
        let t = exact();
        for algorithm in Algorithm::KRYLOV
            .into_iter()
            .chain([Algorithm::Hosvd, Algorithm::TuckerAls])
        {
            let cfg = ExperimentConfig {
                algorithm,
                r_max: [3; 3],
                seed: 1,
                ..Default::default()
            };
            let exp = run_experiment(&t, &cfg).unwrap();
            assert!(
                exp.final_relative_error().unwrap() <= 1e-9,
                "{}",
                algorithm.name()
            );
            assert_eq!(
                exp.report.tenvec_count,
                exp.counted_tenvecs,
                "{}",
                algorithm.name()
            );
            assert!(exp.report.steps_increasing());
        }
    }

    #[test]
    fn oracle_respects_budget() {
        let cfg = ExperimentConfig {
            mem_budget: 100,
            ..Default::default()
        };
        let exp = run_experiment(&exact(), &cfg).unwrap();
        assert!(!exp.oracle_used());
        assert!(exp.report.steps.iter().all(|s| s.true_error.is_none()));
        let hosvd = ExperimentConfig {
            algorithm: Algorithm::Hosvd,
            ..cfg
        };
        assert!(matches!(
            run_experiment(&exact(), &hosvd),
            Err(ExperimentError::TooLarge(..))
        ));
    }

    #[test]
    fn oracle_off_skips_truth() {
        let cfg = ExperimentConfig {
            oracle: false,
            ..Default::default()
        };
        assert!(run_experiment(&exact(), &cfg).unwrap().norm.is_none());
    }

    #[test]
    fn two_slice_mkr_breaks_down() {
        let t = Tensor::Dense(two_slice(8, 1));
        let cfg = ExperimentConfig {
            algorithm: Algorithm::Mkr,
            ..Default::default()
        };
        let exp = run_experiment(&t, &cfg).unwrap();
        assert_eq!(
            exp.report.termination,
            Termination::Breakdown {
                mode: Mode::Three,
                step: 3
            }
        );
        assert_eq!(exp.report.termination.exit_code(), 3);
    }

    fn strip_ms(csv: &str) -> String {
        csv.lines()
            .map(|l| l.rsplit_once(',').unwrap().0)
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn csv_is_deterministic() {
        let t = exact();
        for algorithm in Algorithm::KRYLOV {
            let cfg = ExperimentConfig {
                algorithm,
                seed: 9,
                ..Default::default()
            };
            let a = csv(&run_experiment(&t, &cfg).unwrap().report);
            let b = csv(&run_experiment(&t, &cfg).unwrap().report);
            assert_eq!(strip_ms(&a), strip_ms(&b));
            assert!(a.starts_with(CSV_HEADER));
        }
    }

    #[test]
    fn csv_columns_carry_raw_values() {
        let exp = run_experiment(
            &exact(),
            &ExperimentConfig {
                algorithm: Algorithm::Wlncr,
                ..Default::default()
            },
        )
        .unwrap();
        let text = csv(&exp.report);
        for (line, step) in text.lines().skip(1).zip(&exp.report.steps) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 10);
            assert_eq!(f[6].parse::<f64>().unwrap(), step.err_estimate);
            assert_eq!(f[7].parse::<f64>().unwrap(), step.true_error.unwrap());
            assert_eq!(f[8].parse::<u64>().unwrap(), step.tenvecs);
        }
    }

    #[test]
    fn summary_is_valid_json() {
        let exp = run_experiment(&exact(), &ExperimentConfig::default()).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&summary_json(&exp, "gen", [12; 3], None)).unwrap();
        assert_eq!(v["algorithm"], "wsvd");
        assert_eq!(v["final_ranks"], serde_json::json!([3, 3, 3]));
        assert_eq!(v["config"]["r_max"], serde_json::json!([12, 12, 12]));
        assert_eq!(v["termination"]["kind"], "converged");
    }
}
