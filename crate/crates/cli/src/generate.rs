//! Seeded synthetic tensors.
//!
//! Generator specs on the command line:
//!
//! - `exact-tucker:N:R[:SEED]`: random core and random orthonormal factors;
//!   `N` and `R` are a single size or three comma-separated ones.
//! - `two-slice:N[:SEED]`: `n × n × n` with only the first two mode-3 slices
//!   non-zero (random Gaussian).
//! - `decaying-spectrum:N[:RATE][:SEED]`: mode singular values decaying
//!   roughly like `RATE^k` (default 0.5).
//! - `hadamard-square:PATH`: implicit elementwise square of the Tucker
//!   tensor stored at `PATH`.
//!
//! Without an explicit seed the run seed is used.

use std::path::PathBuf;
use std::str::FromStr;

use tenkrylov::linalg::{random_gaussian, random_gaussian_matrix, random_orthonormal, seeded_rng};
use tenkrylov::{DenseTensor3, HadamardTuckerSource, TuckerTensor};

use crate::formats::{load_tensor, FormatError, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorSpec {
    ExactTucker {
        shape: [usize; 3],
        ranks: [usize; 3],
        seed: Option<u64>,
    },
    TwoSlice {
        n: usize,
        seed: Option<u64>,
    },
    DecayingSpectrum {
        n: usize,
        rate: f64,
        seed: Option<u64>,
    },
    HadamardSquare {
        path: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid generator spec `{spec}`: {msg}")]
    Spec { spec: String, msg: String },
    #[error("hadamard-square input: {0}")]
    Input(#[from] FormatError),
    #[error(transparent)]
    Tensor(#[from] tenkrylov::Error),
}

fn triple(s: &str, what: &str) -> Result<[usize; 3], String> {
    let parts = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("{what} `{p}` is not a size"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let t = match parts[..] {
        [n] => [n; 3],
        [a, b, c] => [a, b, c],
        _ => return Err(format!("{what} needs one or three values")),
    };
    if t.contains(&0) {
        return Err(format!("{what} must be positive"));
    }
    Ok(t)
}

fn seed(s: Option<&&str>) -> Result<Option<u64>, String> {
    s.map(|s| {
        s.parse()
            .map_err(|_| format!("seed `{s}` is not an integer"))
    })
    .transpose()
}

impl FromStr for GeneratorSpec {
    type Err = GenerateError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let fail = |msg: String| GenerateError::Spec {
            spec: spec.to_string(),
            msg,
        };
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        if name == "hadamard-square" {
            if rest.is_empty() {
                return Err(fail("missing Tucker file path".into()));
            }
            return Ok(GeneratorSpec::HadamardSquare { path: rest.into() });
        }
        let args: Vec<&str> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(':').collect()
        };
        let parsed = match name {
            "exact-tucker" => {
                if !(2..=3).contains(&args.len()) {
                    return Err(fail("expected exact-tucker:N:R[:SEED]".into()));
                }
                let shape = triple(args[0], "size").map_err(&fail)?;
                let ranks = triple(args[1], "rank").map_err(&fail)?;
                if (0..3).any(|l| ranks[l] > shape[l]) {
                    return Err(fail(format!("ranks {ranks:?} exceed sizes {shape:?}")));
                }
                GeneratorSpec::ExactTucker {
                    shape,
                    ranks,
                    seed: seed(args.get(2)).map_err(&fail)?,
                }
            }
            "two-slice" => {
                if !(1..=2).contains(&args.len()) {
                    return Err(fail("expected two-slice:N[:SEED]".into()));
                }
                let n = args[0]
                    .parse()
                    .map_err(|_| fail(format!("size `{}` is not an integer", args[0])))?;
                if n < 2 {
                    return Err(fail("two-slice needs n >= 2".into()));
                }
                GeneratorSpec::TwoSlice {
                    n,
                    seed: seed(args.get(1)).map_err(&fail)?,
                }
            }
            "decaying-spectrum" => {
                if !(1..=3).contains(&args.len()) {
                    return Err(fail("expected decaying-spectrum:N[:RATE][:SEED]".into()));
                }
                let n = args[0]
                    .parse()
                    .map_err(|_| fail(format!("size `{}` is not an integer", args[0])))?;
                if n == 0 {
                    return Err(fail("size must be positive".into()));
                }
                let rate = match args.get(1) {
                    Some(r) => r
                        .parse::<f64>()
                        .map_err(|_| fail(format!("rate `{r}` is not a number")))?,
                    None => 0.5,
                };
                if !(rate > 0.0 && rate < 1.0) {
                    return Err(fail("rate must lie in (0, 1)".into()));
                }
                GeneratorSpec::DecayingSpectrum {
                    n,
                    rate,
                    seed: seed(args.get(2)).map_err(&fail)?,
                }
            }
            other => return Err(fail(format!("unknown generator `{other}`"))),
        };
        Ok(parsed)
    }
}

/// Random Gaussian core with random orthonormal factors.
pub fn exact_tucker(shape: [usize; 3], ranks: [usize; 3], seed: u64) -> TuckerTensor {
    let mut rng = seeded_rng(seed);
    let core = random_gaussian(&mut rng, ranks.iter().product());
    let core =
        DenseTensor3::from_vec(ranks, core.as_slice().to_vec()).expect("core length matches");
    let factors = [0, 1, 2].map(|l| random_orthonormal(&mut rng, shape[l], ranks[l]));
    TuckerTensor::new(core, factors).expect("consistent shapes")
}

/// `A(:, :, 0) = A1`, `A(:, :, 1) = A2`, all other slices zero.
pub fn two_slice(n: usize, seed: u64) -> DenseTensor3 {
    let mut rng = seeded_rng(seed);
    let a1 = random_gaussian_matrix(&mut rng, n, n);
    let a2 = random_gaussian_matrix(&mut rng, n, n);
    DenseTensor3::from_fn([n, n, n], |i, j, k| match k {
        0 => a1[(i, j)],
        1 => a2[(i, j)],
        _ => 0.0,
    })
}

/// Superdiagonal core `rate^k` with a small off-diagonal perturbation that
/// decays even faster, rotated by random orthonormal factors. The mode
/// singular values follow `rate^k` closely.
pub fn decaying_spectrum(n: usize, rate: f64, seed: u64) -> DenseTensor3 {
    let mut rng = seeded_rng(seed);
    let noise = random_gaussian(&mut rng, n * n * n);
    let core = DenseTensor3::from_fn([n, n, n], |i, j, k| {
        if i == j && j == k {
            rate.powi(i as i32)
        } else {
            0.05 * noise[i + n * (j + n * k)] * rate.powi((i + j + k) as i32)
        }
    });
    let factors = [0, 1, 2].map(|_| random_orthonormal(&mut rng, n, n));
    TuckerTensor::new(core, factors)
        .expect("consistent shapes")
        .reconstruct()
}

pub fn generate(spec: &GeneratorSpec, default_seed: u64) -> Result<Tensor, GenerateError> {
    Ok(match spec {
        GeneratorSpec::ExactTucker { shape, ranks, seed } => {
            Tensor::Tucker(exact_tucker(*shape, *ranks, seed.unwrap_or(default_seed)))
        }
        GeneratorSpec::TwoSlice { n, seed } => {
            Tensor::Dense(two_slice(*n, seed.unwrap_or(default_seed)))
        }
        GeneratorSpec::DecayingSpectrum { n, rate, seed } => {
            Tensor::Dense(decaying_spectrum(*n, *rate, seed.unwrap_or(default_seed)))
        }
        GeneratorSpec::HadamardSquare { path } => match load_tensor(path, None)? {
            Tensor::Tucker(t) => Tensor::Hadamard(HadamardTuckerSource::square(t)),
            other => {
                return Err(GenerateError::Spec {
                    spec: path.display().to_string(),
                    msg: format!("expected a Tucker tensor, found {}", other.kind()),
                })
            }
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tenkrylov::linalg::numerical_rank;
    use tenkrylov::oracle::mode_singular_values;
    use tenkrylov::Mode;

    #[test]
    fn parses_specs() {
        assert_eq!(
            "exact-tucker:10:2".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::ExactTucker {
                shape: [10; 3],
                ranks: [2; 3],
                seed: None
            }
        );
        assert_eq!(
            "exact-tucker:10,9,8:2,3,4:7"
                .parse::<GeneratorSpec>()
                .unwrap(),
            GeneratorSpec::ExactTucker {
                shape: [10, 9, 8],
                ranks: [2, 3, 4],
                seed: Some(7)
            }
        );
        assert_eq!(
            "two-slice:8:1".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::TwoSlice {
                n: 8,
                seed: Some(1)
            }
        );
        assert_eq!(
            "decaying-spectrum:8:0.1".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::DecayingSpectrum {
                n: 8,
                rate: 0.1,
                seed: None
            }
        );
        assert_eq!(
            "hadamard-square:a/b.txt".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::HadamardSquare {
                path: "a/b.txt".into()
            }
        );
        for bad in [
            "exact-tucker:10",
            "exact-tucker:3:4",
            "exact-tucker:10:0",
            "exact-tucker:10,2:2",
            "two-slice:x",
            "decaying-spectrum:8:1.5",
            "mystery:3",
            "hadamard-square",
        ] {
            assert!(bad.parse::<GeneratorSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn exact_tucker_is_deterministic() {
        let spec: GeneratorSpec = "exact-tucker:10:2:7".parse().unwrap();
        let a = generate(&spec, 0).unwrap().to_dense();
        let b = generate(&spec, 99).unwrap().to_dense();
        assert_eq!(a, b);
        let c = generate(&"exact-tucker:10:2".parse().unwrap(), 8)
            .unwrap()
            .to_dense();
        assert_ne!(a, c);
    }

    #[test]
    fn two_slice_has_mode3_rank_two() {
        let t = two_slice(8, 1);
        assert_eq!(numerical_rank(&t.unfold(Mode::Three), 1e-12), 2);
        assert_eq!(numerical_rank(&t.unfold(Mode::One), 1e-12), 8);
    }

    #[test]
    fn decaying_spectrum_follows_rate() {
        for rate in [0.1, 0.5] {
            let t = decaying_spectrum(8, rate, 3);
            for sv in mode_singular_values(&t) {
                for k in 0..7 {
                    let ratio = sv[k + 1] / sv[k];
                    assert!(
                        (ratio - rate).abs() <= 0.2 * rate,
                        "rate {rate}, k {k}: {ratio}"
                    );
                }
            }
        }
    }
}
