//! Batch command line for building, calibrating, scoring, and
//! evaluating structure-weighted profile HMMs.
//!
//! Every output carries a provenance header (version, settings digest,
//! seed) and is byte-reproducible from the same inputs. Exit code 0
//! means success, 1 an input or usage problem, 2 a failure writing
//! results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use phmmw_core::evalharness::EvalError;
use phmmw_core::plan7::{BuildError, ModelIoError, WeightScheme};
use phmmw_core::scorer::ScoreError;
use phmmw_core::seqdata::SeqDataError;
use phmmw_core::seqweights::WeightError;
use phmmw_core::structweights::StructWeightError;
use phmmw_core::synthgen::SynthError;

mod cmd;
mod config;

/// Anything a subcommand can fail with. The message format is
/// `error-code: detail` so scripts can match on the code.
#[derive(thiserror::Error, Debug)]
pub enum CliError {
    #[error("config-error: {0}")]
    Config(String),
    #[error("read-error: `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("write-error: `{path}`: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] SeqDataError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Struct(#[from] StructWeightError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl CliError {
    /// 1 for anything the inputs caused, 2 when results could not be
    /// written.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Write { .. } => 2,
            CliError::Eval(EvalError::Io(_)) => 2,
            CliError::Synth(SynthError::Io(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "phmmw", version, about = "Profile HMMs trained under structural residue weights")]
struct Cli {
    /// Pseudocount settings as key=value text.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a training weight matrix as TSV, one row per sequence.
    Weights(WeightsArgs),
    /// Train a model, or the five-model library, from an alignment.
    Build(BuildArgs),
    /// Fit E-value parameters to a model's null score distribution.
    Calibrate(CalibrateArgs),
    /// Score sequences against a model or a model library.
    Score(ScoreArgs),
    /// Run the cross-validated scheme comparison over a dataset tree.
    Eval(EvalArgs),
    /// Generate a synthetic annotated benchmark corpus.
    Synth(SynthArgs),
}

/// Which matrix `weights` emits.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightKind {
    /// Tree-derived sequence weights broadcast across columns.
    Gsc,
    /// All-ones sequence weights.
    Uniform,
    /// Secondary-structure weights.
    Ss,
    /// Solvent-inaccessibility weights.
    Acc,
    /// Packing-count weights.
    Ooi,
    /// Core-structure proximity weights.
    Hcs,
}

impl WeightKind {
    fn tag(self) -> &'static str {
        match self {
            WeightKind::Gsc => "gsc",
            WeightKind::Uniform => "uniform",
            WeightKind::Ss => "ss",
            WeightKind::Acc => "acc",
            WeightKind::Ooi => "ooi",
            WeightKind::Hcs => "hcs",
        }
    }
}

/// Which model `build` trains.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    /// Sequence weights only.
    #[value(name = "1d")]
    OneD,
    /// Secondary-structure weighting.
    #[value(name = "2d")]
    TwoD,
    /// Solvent-inaccessibility weighting.
    Acc,
    /// Packing-count weighting.
    Ooi,
    /// Core-structure proximity weighting.
    #[value(name = "3d")]
    ThreeD,
    /// All five models plus a library manifest.
    Lib,
}

impl SchemeArg {
    fn single(self) -> Option<WeightScheme> {
        match self {
            SchemeArg::OneD => Some(WeightScheme::Baseline),
            SchemeArg::TwoD => Some(WeightScheme::SecondaryStructure),
            SchemeArg::Acc => Some(WeightScheme::Accessibility),
            SchemeArg::Ooi => Some(WeightScheme::ContactDensity),
            SchemeArg::ThreeD => Some(WeightScheme::CoreProximity),
            SchemeArg::Lib => None,
        }
    }
}

/// How a library combines member E-values into a verdict.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Accept when the best member passes the threshold.
    Best,
    /// Accept when a quorum of members passes the threshold.
    Vote,
}

impl PolicyArg {
    fn tag(self) -> &'static str {
        match self {
            PolicyArg::Best => "best",
            PolicyArg::Vote => "vote",
        }
    }
}

#[derive(Args)]
struct WeightsArgs {
    /// Aligned FASTA input.
    #[arg(long, value_name = "FILE")]
    aln: PathBuf,
    /// Per-residue annotation TSV.
    #[arg(long, value_name = "FILE")]
    ann: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: WeightKind,
    /// Contact radius for packing counts, in the coordinate unit.
    #[arg(long, value_name = "R", default_value_t = 14.0)]
    ooi_radius: f64,
    /// Weight carried by gap cells in structural matrices.
    #[arg(long, value_name = "W", default_value_t = 1.0)]
    gap_weight: f64,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    /// Aligned FASTA input.
    #[arg(long, value_name = "FILE")]
    aln: PathBuf,
    /// Per-residue annotation TSV; required by every scheme but 1d.
    #[arg(long, value_name = "FILE")]
    ann: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// Model name; the alignment file stem when omitted.
    #[arg(long, value_name = "NAME")]
    name: Option<String>,
    /// Model file to write; a directory under `--scheme lib`.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, value_name = "R", default_value_t = 14.0)]
    ooi_radius: f64,
    #[arg(long, value_name = "W", default_value_t = 1.0)]
    gap_weight: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Model file to calibrate; never modified in place.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Calibrated model file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Null scores drawn for the fit.
    #[arg(long, value_name = "N", default_value_t = 5000)]
    samples: usize,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["model", "library"]))]
struct ScoreArgs {
    /// Calibrated model file.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Directory of calibrated models scored as one library.
    #[arg(long, value_name = "DIR")]
    library: Option<PathBuf>,
    /// FASTA of sequences to score.
    #[arg(long, value_name = "FILE")]
    seqs: PathBuf,
    /// Database size for E-values; the scored count when omitted.
    #[arg(long, value_name = "N")]
    db_size: Option<f64>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Best)]
    policy: PolicyArg,
    /// E-value at or below which a sequence is accepted.
    #[arg(long, value_name = "E", default_value_t = 1.0)]
    threshold: f64,
    /// Members that must pass under the vote policy.
    #[arg(long, value_name = "Q", default_value_t = 3)]
    quorum: usize,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset tree: DIR/<superfamily>/<family>/{aln.fasta, ann.tsv}.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Report directory; receives curves.csv, auc.csv, ttest.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Comma-separated subset of 1d,2d,acc,ooi,3d,lib to report.
    #[arg(long, value_name = "LIST", default_value = "1d,2d,acc,ooi,3d,lib")]
    schemes: String,
    #[arg(long, value_enum, default_value_t = PolicyArg::Best)]
    policy: PolicyArg,
    /// Members that must pass under the vote policy.
    #[arg(long, value_name = "Q", default_value_t = 3)]
    quorum: usize,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Null scores drawn per model calibration.
    #[arg(long, value_name = "N", default_value_t = 500)]
    calib_samples: usize,
    /// Database size for E-values; each split's test-set size when
    /// omitted.
    #[arg(long, value_name = "N")]
    db_size: Option<f64>,
    /// Worker threads across splits; results never depend on it.
    #[arg(long, value_name = "J", default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_name = "R", default_value_t = 14.0)]
    ooi_radius: f64,
    #[arg(long, value_name = "W", default_value_t = 1.0)]
    gap_weight: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator settings as key=value text.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Dataset directory to write.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems are input errors; --help and --version
            // are successes.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match cmd::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
