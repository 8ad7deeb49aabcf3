use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use tenkrylov::oracle::mode_singular_values;
use tenkrylov::{HadamardTuckerSource, TenvecSource};
use tenkrylov_cli::experiment::DEFAULT_MEM_BUDGET;
use tenkrylov_cli::{
    csv, generate, load_tensor, run_experiment, save_tensor, summary_json, Algorithm, Experiment,
    ExperimentConfig, Format, GeneratorSpec, Tensor,
};

// Fallible stdout writes, so a closed pipe ends the run instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => { write!(io::stdout(), $($arg)*)? };
}
macro_rules! outln {
    ($($arg:tt)*) => { writeln!(io::stdout(), $($arg)*)? };
}

#[derive(Parser)]
#[command(
    name = "tenkrylov",
    version,
    about = "Matrix-free Tucker approximation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write its CSV and JSON reports.
    Approximate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "wsvd")]
        algo: Algorithm,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run several algorithms on the same tensor.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "mkr,wsvd,wlnc,wsvdr,wlncr"
        )]
        algos: Vec<Algorithm>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic tensor to a file.
    Gen {
        /// Generator spec, e.g. `exact-tucker:12:3` or `two-slice:8`.
        spec: String,
        #[arg(long, env = "TENKRYLOV_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Output format (defaults to the generator's natural one).
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Recompress the elementwise square of a Tucker tensor.
    Hadamard {
        /// Tucker tensor file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long, value_enum, default_value = "wlncr")]
        algo: Algorithm,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Describe a tensor.
    Info {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, env = "TENKRYLOV_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MEM_BUDGET)]
        mem_budget: usize,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Tensor file.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    input: Option<PathBuf>,
    /// Generator spec instead of a file.
    #[arg(long)]
    gen: Option<String>,
    /// File format (guessed from the content when omitted; `coo4` must be given).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Rank cap: one value or three comma-separated ones.
    #[arg(long, value_parser = parse_rmax)]
    rmax: Option<[usize; 3]>,
    #[arg(long, default_value_t = 3)]
    pals: usize,
    #[arg(long, default_value_t = 3)]
    ppow: usize,
    /// Tucker-ALS iterations.
    #[arg(long, default_value_t = 10)]
    als_iters: usize,
    #[arg(long, env = "TENKRYLOV_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "on")]
    oracle: Switch,
    /// Largest dense tensor (entries) the oracle may build.
    #[arg(long, default_value_t = DEFAULT_MEM_BUDGET)]
    mem_budget: usize,
    /// Output directory for `<algo>.csv` and `<algo>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rmax(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{p}` is not a rank"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let r = match parts[..] {
        [r] => [r; 3],
        [a, b, c] => [a, b, c],
        _ => return Err("expected one or three ranks".into()),
    };
    if r.contains(&0) {
        return Err("ranks must be positive".into());
    }
    Ok(r)
}

impl RunArgs {
    fn config(&self, algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            algorithm,
            tol: self.tol,
            eps: self.eps,
            r_max: self.rmax.unwrap_or([usize::MAX; 3]),
            p_als: self.pals,
            p_pow: self.ppow,
            seed: self.seed,
            oracle: self.oracle == Switch::On,
            mem_budget: self.mem_budget,
            als_iterations: self.als_iters,
        }
    }
}

fn load_input(input: &InputArgs, seed: u64) -> Result<(Tensor, String)> {
    match (&input.input, &input.gen) {
        (Some(path), None) => {
            let t = load_tensor(path, input.format)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok((t, path.display().to_string()))
        }
        (None, Some(spec)) => {
            let parsed: GeneratorSpec = spec.parse()?;
            Ok((generate(&parsed, seed)?, spec.clone()))
        }
        _ => bail!("give exactly one of --input and --gen"),
    }
}

fn write_reports(
    out: &Path,
    exp: &Experiment,
    input: &str,
    shape: [usize; 3],
    extra: Option<serde_json::Value>,
) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let name = exp.config.algorithm.name();
    fs::write(out.join(format!("{name}.csv")), csv(&exp.report))?;
    fs::write(
        out.join(format!("{name}.json")),
        summary_json(exp, input, shape, extra),
    )?;
    Ok(())
}

fn describe(exp: &Experiment) -> String {
    let truth = match exp.final_relative_error() {
        Some(e) => format!("{e:.3e}"),
        None => "n/a".into(),
    };
    format!(
        "{:<10} ranks {:?}  tenvecs {:>7}  rel. error {:>10}  {:?}",
        exp.config.algorithm.name(),
        exp.report.final_ranks,
        exp.report.tenvec_count,
        truth,
        exp.report.termination
    )
}

fn approximate(input: &InputArgs, algo: Algorithm, run: &RunArgs) -> Result<i32> {
    let (t, label) = load_input(input, run.seed)?;
    let exp = run_experiment(&t, &run.config(algo))?;
    match &run.out {
        Some(dir) => {
            write_reports(dir, &exp, &label, t.shape(), None)?;
            outln!("{}", describe(&exp));
        }
        None => out!("{}", csv(&exp.report)),
    }
    Ok(exp.report.termination.exit_code())
}

fn compare(input: &InputArgs, algos: &[Algorithm], run: &RunArgs) -> Result<i32> {
    let (t, label) = load_input(input, run.seed)?;
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = algos
            .iter()
            .map(|&a| {
                let (t, cfg) = (&t, run.config(a));
                scope.spawn(move || run_experiment(t, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut code = 0;
    for res in results {
        let exp = res?;
        if let Some(dir) = &run.out {
            write_reports(dir, &exp, &label, t.shape(), None)?;
        }
        outln!("{}", describe(&exp));
        code = code.max(exp.report.termination.exit_code());
    }
    Ok(code)
}

fn gen(spec: &str, seed: u64, out: &Path, format: Option<Format>) -> Result<i32> {
    let t = generate(&spec.parse()?, seed)?;
    let format = format.unwrap_or(match t {
        Tensor::Tucker(_) => Format::Tucker,
        Tensor::Canonical(_) => Format::Canonical,
        Tensor::Sparse(_) => Format::Coo,
        Tensor::Dense(_) | Tensor::Hadamard(_) => Format::Dense,
    });
    if let Tensor::Hadamard(h) = t {
        // Only the densified product can be written.
        save_tensor(out, &Tensor::Dense(h.to_dense()), format)?;
    } else {
        save_tensor(out, &t, format)?;
    }
    info!("wrote {} as {format:?}", out.display());
    Ok(0)
}

fn hadamard(path: &Path, format: Option<Format>, algo: Algorithm, run: &RunArgs) -> Result<i32> {
    let tucker = match load_tensor(path, format)? {
        Tensor::Tucker(t) => t,
        other => bail!(
            "{} holds a {} tensor, expected Tucker",
            path.display(),
            other.kind()
        ),
    };
    let input_ranks = tucker.ranks();
    let t = Tensor::Hadamard(HadamardTuckerSource::square(tucker));
    let exp = run_experiment(&t, &run.config(algo))?;
    let Tensor::Hadamard(h) = &t else {
        unreachable!()
    };
    let extra = serde_json::json!({
        "input_ranks": input_ranks,
        "product_ranks": h.product_ranks(),
        "kron_core_len": h.kron_core_len(),
        "peak_scratch": h.peak_scratch(),
    });
    let label = format!("hadamard-square:{}", path.display());
    match &run.out {
        Some(dir) => write_reports(dir, &exp, &label, t.shape(), Some(extra))?,
        None => outln!("{extra}"),
    }
    outln!("{}", describe(&exp));
    Ok(exp.report.termination.exit_code())
}

fn show_info(input: &InputArgs, seed: u64, mem_budget: usize) -> Result<i32> {
    let (t, label) = load_input(input, seed)?;
    outln!("input:   {label}");
    outln!("kind:    {}", t.kind());
    outln!("shape:   {:?}", t.shape());
    match &t {
        Tensor::Sparse(s) => outln!("nnz:     {}", s.nnz()),
        Tensor::Canonical(c) => outln!("rank:    {}", c.rank()),
        Tensor::Tucker(tk) => outln!("ranks:   {:?}", tk.ranks()),
        Tensor::Hadamard(h) => outln!("ranks:   {:?} (implicit)", h.product_ranks()),
        Tensor::Dense(_) => {}
    }
    if t.dense_len() <= mem_budget {
        let d = t.to_dense();
        outln!("norm:    {:e}", d.frobenius_norm());
        for (l, sv) in mode_singular_values(&d).iter().enumerate() {
            let top: Vec<String> = sv.iter().take(8).map(|s| format!("{s:.3e}")).collect();
            outln!("mode {}:  {}", l + 1, top.join(" "));
        }
    } else {
        outln!("dense form exceeds the memory budget; skipping spectra");
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Approximate { input, algo, run } => approximate(input, *algo, run),
        Command::Compare { input, algos, run } => compare(input, algos, run),
        Command::Gen {
            spec,
            seed,
            out,
            format,
        } => gen(spec, *seed, out, *format),
        Command::Hadamard {
            input,
            format,
            algo,
            run,
        } => hadamard(input, *format, *algo, run),
        Command::Info {
            input,
            seed,
            mem_budget,
        } => show_info(input, *seed, *mem_budget),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
