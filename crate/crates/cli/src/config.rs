//! Command-line flags and their validation into a [`RunConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ising_quench::rug::Rational;
use ising_quench::{
    load_matrix, CouplingMatrix, Error, Execution, SamplerMethod, SpinConfiguration, Time,
};

/// Exact numerics for bipartite Ising quenches.
#[derive(Debug, Parser)]
#[command(name = "ising-quench", version, about)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Run every engine on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    InverseCdf,
    Alias,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Permanent of the coupling matrix by both engines.
    Permanent(MatrixArgs),
    /// One amplitude from the signed energy spectrum, with an error bar.
    Amplitude(AmplitudeArgs),
    /// All outcome probabilities.
    Distribution(DistributionArgs),
    /// Seeded samples from the outcome distribution.
    Sample(SampleArgs),
    /// Exact moments, the truncated series and the leading-coefficient check.
    Series(SeriesArgs),
    /// Checks the leading-order error bound on seeded random instances.
    Verify(VerifyArgs),
    /// Largest time at which the error bound stays below epsilon.
    Threshold(ThresholdArgs),
    /// Timing table for spectrum enumeration and the permanent.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Coupling matrix file (text, or JSON when the name ends in .json).
    #[arg(long)]
    pub matrix: PathBuf,
}

#[derive(Debug, Args)]
pub struct AmplitudeArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Evolution time, as a decimal or p/q.
    #[arg(long)]
    pub time: String,
    /// Outcome: a bitstring over all 2N sites, "all-up" or "all-down".
    #[arg(long, default_value = "all-up")]
    pub target: String,
    /// Working precision in bits.
    #[arg(long = "precision", default_value_t = 128)]
    pub precision_bits: u32,
    /// Double the precision from 53 bits up to --precision until resolved.
    #[arg(long)]
    pub adaptive: bool,
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long)]
    pub time: String,
    #[arg(long = "precision", default_value_t = 53)]
    pub precision_bits: u32,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub distribution: DistributionArgs,
    /// Number of samples.
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Method::InverseCdf)]
    pub method: Method,
    /// Compare the batch with the exact distribution.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long)]
    pub time: Option<String>,
    #[arg(long, default_value = "all-up")]
    pub target: String,
    /// Number of nonzero orders kept beyond the lowest one.
    #[arg(long, default_value_t = 0)]
    pub alpha_max: usize,
    /// Highest moment to compute; defaults to the top series order.
    #[arg(long)]
    pub moments: Option<usize>,
    #[arg(long = "precision", default_value_t = 128)]
    pub precision_bits: u32,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Register sizes, as "a..b" (inclusive), "a..=b" or a single size.
    #[arg(long, default_value = "1..4")]
    pub n: String,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Comma-separated entry set.
    #[arg(long, default_value = "-1,0,1", allow_hyphen_values = true)]
    pub entries: String,
    #[arg(long, default_value = "0.1")]
    pub epsilon: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ising_quench::bounds::DEFAULT_MAX_PRECISION)]
    pub max_precision: u32,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value = "1..10")]
    pub n: String,
    /// One or more comma-separated tolerances.
    #[arg(long, default_value = "0.1")]
    pub epsilon: String,
    #[arg(long, default_value_t = 1)]
    pub j_max: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "1..8")]
    pub n: String,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// An inclusive range of register sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeRange {
    pub start: usize,
    pub end: usize,
}

impl SizeRange {
    pub fn sizes(self) -> Vec<usize> {
        (self.start..=self.end).collect()
    }
}

impl FromStr for SizeRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| format!("'{x}' is not a register size"))
        };
        let (start, end) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
            None => {
                let n = parse(s)?;
                (n, n)
            }
        };
        if start == 0 || start > end || end > ising_quench::model::MAX_REGISTER {
            return Err(format!(
                "size range '{s}' must satisfy 1 <= start <= end <= {}",
                ising_quench::model::MAX_REGISTER
            ));
        }
        Ok(Self { start, end })
    }
}

impl fmt::Display for SizeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// A flag combination that was rejected before any computation.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Debug)]
pub struct RunConfig {
    pub format: Format,
    pub exec: Execution,
    pub task: Task,
}

#[derive(Debug)]
pub enum Task {
    Permanent {
        matrix: CouplingMatrix,
    },
    Amplitude {
        matrix: CouplingMatrix,
        time: Time,
        target: SpinConfiguration,
        precision_bits: u32,
        adaptive: bool,
    },
    Distribution {
        matrix: CouplingMatrix,
        time: Time,
        precision_bits: u32,
    },
    Sample {
        matrix: CouplingMatrix,
        time: Time,
        precision_bits: u32,
        samples: usize,
        seed: u64,
        method: SamplerMethod,
        check: bool,
    },
    Series {
        matrix: CouplingMatrix,
        time: Option<Time>,
        target: SpinConfiguration,
        alpha_max: usize,
        moments: Option<usize>,
        precision_bits: u32,
    },
    Verify {
        sizes: SizeRange,
        instances: usize,
        entries: Vec<i64>,
        epsilon: Rational,
        epsilon_text: String,
        seed: u64,
        max_precision: u32,
    },
    Threshold {
        sizes: SizeRange,
        epsilons: Vec<(String, Rational)>,
        j_max: u64,
    },
    Bench {
        sizes: SizeRange,
        repeats: usize,
        seed: u64,
    },
}

fn read_matrix(path: &Path) -> Result<CouplingMatrix, ConfigError> {
    match load_matrix(path) {
        Ok(parsed) => parsed.map_err(|e| ConfigError(format!("{}: {e}", path.display()))),
        Err(e) => Err(ConfigError(format!("cannot read {}: {e}", path.display()))),
    }
}

fn positive_rational(text: &str, what: &str) -> Result<Rational, ConfigError> {
    let value = Time::parse(text)
        .map_err(|e| ConfigError(format!("{what}: {e}")))?
        .as_rational()
        .clone();
    if value == 0 {
        return Err(ConfigError(format!("{what} must be positive")));
    }
    Ok(value)
}

fn sizes(text: &str) -> Result<SizeRange, ConfigError> {
    text.parse().map_err(ConfigError)
}

/// Upper limit on any precision flag; engines may impose lower ones.
const MAX_PRECISION_FLAG: u32 = 1 << 14;

fn precision(bits: u32) -> Result<u32, ConfigError> {
    let min = ising_quench::spectrum::MIN_PRECISION;
    let max = MAX_PRECISION_FLAG;
    if !(min..=max).contains(&bits) {
        return Err(ConfigError(format!(
            "precision {bits} outside {min}..={max}"
        )));
    }
    Ok(bits)
}

impl Cli {
    /// Checks every flag and loads inputs; nothing is computed yet.
    pub fn validate(self) -> Result<RunConfig, ConfigError> {
        let exec = if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        };
        let task = match self.command {
            Command::Permanent(a) => Task::Permanent {
                matrix: read_matrix(&a.matrix)?,
            },
            Command::Amplitude(a) => {
                let matrix = read_matrix(&a.matrix.matrix)?;
                Task::Amplitude {
                    target: SpinConfiguration::parse(matrix.n(), &a.target)?,
                    time: Time::parse(&a.time)?,
                    precision_bits: precision(a.precision_bits)?,
                    adaptive: a.adaptive,
                    matrix,
                }
            }
            Command::Distribution(a) => Task::Distribution {
                matrix: read_matrix(&a.matrix.matrix)?,
                time: Time::parse(&a.time)?,
                precision_bits: precision(a.precision_bits)?,
            },
            Command::Sample(a) => {
                if a.samples == 0 {
                    return Err(ConfigError("--samples must be positive".into()));
                }
                if a.check && a.samples < ising_quench::distribution::MIN_CHECK_COUNT {
                    return Err(ConfigError(format!(
                        "--check needs at least {} samples",
                        ising_quench::distribution::MIN_CHECK_COUNT
                    )));
                }
                Task::Sample {
                    matrix: read_matrix(&a.distribution.matrix.matrix)?,
                    time: Time::parse(&a.distribution.time)?,
                    precision_bits: precision(a.distribution.precision_bits)?,
                    samples: a.samples,
                    seed: a.seed,
                    method: match a.method {
                        Method::InverseCdf => SamplerMethod::InverseCdf,
                        Method::Alias => SamplerMethod::Alias,
                    },
                    check: a.check,
                }
            }
            Command::Series(a) => {
                let matrix = read_matrix(&a.matrix.matrix)?;
                Task::Series {
                    target: SpinConfiguration::parse(matrix.n(), &a.target)?,
                    time: a.time.as_deref().map(Time::parse).transpose()?,
                    alpha_max: a.alpha_max,
                    moments: a.moments,
                    precision_bits: precision(a.precision_bits)?,
                    matrix,
                }
            }
            Command::Verify(a) => {
                let entries = a
                    .entries
                    .split(',')
                    .map(|e| {
                        e.trim()
                            .parse::<i64>()
                            .map_err(|_| ConfigError(format!("entry '{e}' is not an integer")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if a.instances == 0 {
                    return Err(ConfigError("--instances must be positive".into()));
                }
                if entries.iter().all(|&e| e == 0) {
                    return Err(ConfigError("the entry set needs a nonzero value".into()));
                }
                Task::Verify {
                    sizes: sizes(&a.n)?,
                    instances: a.instances,
                    entries,
                    epsilon: positive_rational(&a.epsilon, "--epsilon")?,
                    epsilon_text: a.epsilon,
                    seed: a.seed,
                    max_precision: precision(a.max_precision)?,
                }
            }
            Command::Threshold(a) => {
                if a.j_max == 0 {
                    return Err(ConfigError("--j-max must be positive".into()));
                }
                let epsilons = a
                    .epsilon
                    .split(',')
                    .map(|e| {
                        Ok((
                            e.trim().to_string(),
                            positive_rational(e.trim(), "--epsilon")?,
                        ))
                    })
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                Task::Threshold {
                    sizes: sizes(&a.n)?,
                    epsilons,
                    j_max: a.j_max,
                }
            }
            Command::Bench(a) => {
                if a.repeats == 0 {
                    return Err(ConfigError("--repeats must be positive".into()));
                }
                Task::Bench {
                    sizes: sizes(&a.n)?,
                    repeats: a.repeats,
                    seed: a.seed,
                }
            }
        };
        Ok(RunConfig {
            format: self.format,
            exec,
            task,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_ranges() {
        assert_eq!(
            "1..4".parse::<SizeRange>().unwrap().sizes(),
            vec![1, 2, 3, 4]
        );
        assert_eq!("2..=3".parse::<SizeRange>().unwrap().sizes(), vec![2, 3]);
        assert_eq!("5".parse::<SizeRange>().unwrap().sizes(), vec![5]);
        for bad in ["0..3", "4..2", "x", "1..99", ""] {
            assert!(bad.parse::<SizeRange>().is_err(), "{bad}");
        }
    }

    #[test]
    fn rejects_bad_flags_before_running() {
        let parse = |args: &[&str]| Cli::try_parse_from(args).unwrap().validate();
        assert!(parse(&["q", "verify", "--epsilon", "0"]).is_err());
        assert!(parse(&["q", "verify", "--entries", "0,0"]).is_err());
        assert!(parse(&["q", "verify", "--entries", "1,a"]).is_err());
        assert!(parse(&["q", "verify", "--instances", "0"]).is_err());
        assert!(parse(&["q", "threshold", "--j-max", "0"]).is_err());
        assert!(parse(&["q", "bench", "--repeats", "0"]).is_err());
        assert!(parse(&["q", "permanent", "--matrix", "/nonexistent/m.txt"]).is_err());
        assert!(parse(&["q", "verify", "--entries", "-1,0,1", "--n", "1..2"]).is_ok());
    }
}
