//! `simjoin`: dataset statistics, ground truth, joins and sweeps.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input or
//! configuration, 3 recall target not reached (the report is still written).
//! Data goes to stdout (or `--output`), diagnostics to stderr.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simjoin_core::cpsjoin::{DEFAULT_EPSILON, DEFAULT_LIMIT};
use simjoin_core::embedding::DEFAULT_EMBEDDING_SIZE;
use simjoin_core::harness::{write_report, ReportFormat};
use simjoin_core::sketching::{DEFAULT_DELTA, DEFAULT_SKETCH_WORDS};
use simjoin_core::synthetic::{self, SyntheticConfig};
use simjoin_core::{
    run_single, run_until_recall, Algorithm, CpsJoinConfig, Dataset, Error, GroundTruth, JoinParams,
    LshParams, RecallTarget, RunReport,
};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RECALL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "simjoin", version, about = "Set similarity joins under Jaccard similarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print record count, average size, distinct tokens and max token frequency.
    Stats(InputArgs),
    /// Compute the exact join and store it as a ground-truth file.
    Groundtruth {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        lambda: f64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run one algorithm and write its report.
    Join(JoinArgs),
    /// Run every algorithm/threshold combination and print one CSV summary row each.
    Sweep(SweepArgs),
    /// Write a synthetic dataset with planted similar pairs.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Dataset: one record per line, whitespace-separated tokens.
    input: PathBuf,
    /// Treat tokens as arbitrary words instead of integers.
    #[arg(long)]
    tokenize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmName {
    Cpsjoin,
    Minhash,
    Allpairs,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatName {
    Csv,
    Json,
}

impl From<FormatName> for ReportFormat {
    fn from(f: FormatName) -> Self {
        match f {
            FormatName::Csv => ReportFormat::Csv,
            FormatName::Json => ReportFormat::Json,
        }
    }
}

/// Algorithm parameters shared by `join` and `sweep`.
#[derive(Debug, Clone, Args)]
struct AlgorithmArgs {
    /// Embedding size t.
    #[arg(long, default_value_t = DEFAULT_EMBEDDING_SIZE)]
    t: usize,
    /// Sketch length in 64-bit words.
    #[arg(long, default_value_t = DEFAULT_SKETCH_WORDS)]
    ell: usize,
    /// False-negative budget of the sketch filter.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Brute-force limit of the Chosen Path join.
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    limit: usize,
    /// MinHash values per LSH bucket key; 0 tunes it on the data.
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Target recall.
    #[arg(long, default_value_t = 0.9)]
    phi: f64,
    #[arg(long, default_value_t = 32)]
    max_reps: u32,
    #[arg(long, env = "SIMJOIN_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    no_sketch_filter: bool,
    /// Use the literal count-map engine instead of the heuristic one.
    #[arg(long)]
    reference_mode: bool,
    /// MinHash only: one pass with L derived from phi, no stopping rule.
    #[arg(long = "fixed-L")]
    fixed_l: bool,
    /// Repetitions run concurrently; reports do not depend on it.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct JoinArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long = "alg", value_enum, default_value_t = AlgorithmName::Cpsjoin)]
    algorithm: AlgorithmName,
    #[command(flatten)]
    params: AlgorithmArgs,
    /// Ground-truth file from `simjoin groundtruth`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Run exactly one repetition, without a stopping rule.
    #[arg(long)]
    single: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatName::Json)]
    format: FormatName,
    /// Zero all timing fields so reports compare byte for byte.
    #[arg(long)]
    mask_timing: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.6, 0.7, 0.8, 0.9])]
    lambdas: Vec<f64>,
    #[arg(long = "algs", value_enum, value_delimiter = ',', default_values_t = [AlgorithmName::Cpsjoin, AlgorithmName::Minhash, AlgorithmName::Allpairs])]
    algorithms: Vec<AlgorithmName>,
    #[command(flatten)]
    params: AlgorithmArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TokenDistributionName {
    Uniform,
    Zipf,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10_000)]
    records: usize,
    #[arg(long, default_value_t = 500)]
    planted: usize,
    /// Planted pairs get Jaccard similarity in [lambda, lambda + 0.2].
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = TokenDistributionName::Uniform)]
    tokens: TokenDistributionName,
    /// Average record size for Zipf data.
    #[arg(long, default_value_t = 100)]
    avg_size: usize,
    #[arg(long, env = "SIMJOIN_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Contract(_) => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_IO, message: e.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_CONFIG, message: message.into() }
}

fn with_path(path: &Path) -> impl Fn(Failure) -> Failure + '_ {
    move |f| Failure { code: f.code, message: format!("{}: {}", path.display(), f.message) }
}

fn load_dataset(input: &InputArgs) -> Result<Dataset, Failure> {
    let path = &input.input;
    let file = File::open(path).map_err(Failure::from).map_err(with_path(path))?;
    let reader = BufReader::new(file);
    let parsed = if input.tokenize { Dataset::parse_tokenized(reader) } else { Dataset::parse(reader) };
    parsed.map_err(Failure::from).map_err(with_path(path))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(Failure::from).map_err(with_path(p))?)),
        None => Box::new(io::stdout().lock()),
    })
}

impl AlgorithmArgs {
    fn validate(&self) -> Result<(), Failure> {
        if self.t == 0 {
            return Err(config_error("--t must be at least 1"));
        }
        if self.ell == 0 {
            return Err(config_error("--ell must be at least 1"));
        }
        if self.max_reps == 0 {
            return Err(config_error("--max-reps must be at least 1"));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return Err(config_error(format!("--phi must lie in (0, 1], got {}", self.phi)));
        }
        if self.threads == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        Ok(())
    }

    fn algorithm(&self, name: AlgorithmName, lambda: f64) -> Result<Algorithm, Failure> {
        self.validate()?;
        if self.fixed_l && name != AlgorithmName::Minhash {
            return Err(config_error("--fixed-L applies to --alg minhash only"));
        }
        let algorithm = match name {
            AlgorithmName::Cpsjoin => Algorithm::CpsJoin(CpsJoinConfig {
                params: JoinParams {
                    lambda,
                    epsilon: self.epsilon,
                    limit: self.limit,
                    delta: self.delta,
                    use_sketch_filter: !self.no_sketch_filter,
                    use_heuristics: !self.reference_mode,
                    seed: self.seed,
                },
                embedding_size: self.t,
                sketch_words: self.ell,
            }),
            AlgorithmName::Minhash => Algorithm::MinHash(LshParams {
                k: self.k,
                repetitions: if self.fixed_l { 0 } else { 1 },
                phi_target: self.phi,
                lambda,
                seed: self.seed,
                use_sketch_filter: !self.no_sketch_filter,
                delta: self.delta,
                sketch_words: self.ell,
            }),
            AlgorithmName::Allpairs => Algorithm::AllPairs { lambda },
            AlgorithmName::Naive => Algorithm::Naive { lambda },
        };
        algorithm.validate()?;
        Ok(algorithm)
    }

    fn target(&self) -> RecallTarget {
        RecallTarget { phi: self.phi, max_repetitions: self.max_reps }
    }
}

fn cmd_stats(input: &InputArgs) -> Result<(), Failure> {
    let ds = load_dataset(input)?;
    let max_frequency = ds.token_frequency().values().copied().max().unwrap_or(0);
    let mut out = io::stdout().lock();
    writeln!(out, "records\t{}", ds.len())?;
    writeln!(out, "average_size\t{:.3}", ds.average_record_size())?;
    writeln!(out, "distinct_tokens\t{}", ds.token_frequency().len())?;
    writeln!(out, "max_token_frequency\t{max_frequency}")?;
    Ok(())
}

fn cmd_groundtruth(input: &InputArgs, lambda: f64, output: &Path) -> Result<(), Failure> {
    let ds = load_dataset(input)?;
    let truth = GroundTruth::compute(&ds, lambda)?;
    truth.save(output).map_err(Failure::from).map_err(with_path(output))?;
    println!("{}", truth.pairs.len());
    Ok(())
}

fn cmd_join(args: &JoinArgs) -> Result<(), Failure> {
    let ds = load_dataset(&args.input)?;
    let algorithm = args.params.algorithm(args.algorithm, args.lambda)?;
    let truth = match &args.truth {
        Some(path) => Some(GroundTruth::load(path).map_err(Failure::from).map_err(with_path(path))?),
        None => None,
    };
    let seed = args.params.seed;
    let one_pass = args.single || args.params.fixed_l || algorithm.is_exact();
    let mut report = if one_pass {
        run_single(&algorithm, &ds, truth.as_ref(), seed)?
    } else {
        run_until_recall(&algorithm, &ds, truth.as_ref(), args.params.target(), seed, args.params.threads)?
    };
    if args.mask_timing {
        report.mask_timing();
    }
    emit(&report, args.format.into(), args.output.as_deref())?;
    if !report.reached_target {
        return Err(Failure {
            code: EXIT_RECALL,
            message: format!(
                "recall {:.4} below target {} after {} repetitions",
                report.final_recall.unwrap_or(0.0),
                args.params.phi,
                report.repetitions_used
            ),
        });
    }
    Ok(())
}

fn emit(report: &RunReport, format: ReportFormat, output: Option<&Path>) -> Result<(), Failure> {
    let bytes = write_report(report, format)?;
    let mut out = open_output(output)?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

const SWEEP_HEADER: &str =
    "algorithm,lambda,truth_pairs,repetitions,recall,results,pre_candidates,candidates,seconds";

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let ds = load_dataset(&args.input)?;
    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "{SWEEP_HEADER}")?;
    for &lambda in &args.lambdas {
        let truth = GroundTruth::compute(&ds, lambda)?;
        for &name in &args.algorithms {
            let algorithm = args.params.algorithm(name, lambda)?;
            let report = if algorithm.is_exact() || args.params.fixed_l {
                run_single(&algorithm, &ds, Some(&truth), args.params.seed)?
            } else {
                run_until_recall(
                    &algorithm,
                    &ds,
                    Some(&truth),
                    args.params.target(),
                    args.params.seed,
                    args.params.threads,
                )?
            };
            let pre: u64 = report.repetitions.iter().map(|r| r.pre_candidates).sum();
            let cand: u64 = report.repetitions.iter().map(|r| r.candidates).sum();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.6}",
                report.algorithm,
                lambda,
                truth.pairs.len(),
                report.repetitions_used,
                report.final_recall.unwrap_or(0.0),
                report.final_results,
                pre,
                cand,
                report.total_seconds
            )?;
            if !report.reached_target {
                eprintln!("warning: {} at lambda {lambda} stopped below the recall target", report.algorithm);
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let config = match args.tokens {
        TokenDistributionName::Uniform => {
            SyntheticConfig::planted_uniform(args.records, args.planted, args.lambda, args.seed)
        }
        TokenDistributionName::Zipf => {
            SyntheticConfig::planted_zipf(args.records, args.planted, args.lambda, args.avg_size, args.seed)
        }
    };
    let ds = synthetic::generate(&config)?;
    let mut out = open_output(args.output.as_deref())?;
    ds.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Stats(input) => cmd_stats(input),
        Command::Groundtruth { input, lambda, output } => cmd_groundtruth(input, *lambda, output),
        Command::Join(args) => cmd_join(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("simjoin: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
