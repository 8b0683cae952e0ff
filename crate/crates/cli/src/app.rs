//! Argument parsing and dispatch for the `tomo` binary.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tomography::estimator::{SettingSelection, WeigertConvention};
use tomography::Error;

use crate::config::{env_seed, parse_complex, ConfigFile, ExperimentConfig, QuorumSpec, StateSpec, TargetSpec, DEFAULT_SEED};
use crate::quorum::{default_trials, quorum_check, quorum_dual, DualMethod, QuorumSource};
use crate::simulate::{run_fig1, run_simulation, with_default_checkpoints, Fig1Params};
use crate::{usage, write_text, CliError, CliResult, EXIT_DOMAIN, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "tomo", version, about = "Quorum verification, dual frames and tomographic reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect quorums and compute dual frames.
    Quorum {
        #[command(subcommand)]
        action: QuorumAction,
    },
    /// Run one Monte Carlo reconstruction and print its statistics as JSON.
    Simulate(SimulateArgs),
    /// Continuous versus discrete reconstruction of ⟨Sz⟩ on the spin-1/2 coherent state.
    Fig1(Fig1Args),
}

#[derive(Debug, Subcommand)]
pub enum QuorumAction {
    /// Test completeness and the four spanning-set definitions.
    Check(CheckArgs),
    /// Compute the dual frame.
    Dual(DualArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct SourceArgs {
    /// The Pauli quorum {σx, σy, σz, 1}.
    #[arg(long, group = "source")]
    pub pauli: bool,
    /// A quorum JSON file.
    #[arg(long, value_name = "PATH", group = "source")]
    pub file: Option<PathBuf>,
    /// Projector quorum for spin two_s/2.
    #[arg(long, value_name = "TWO_S", group = "source")]
    pub weigert: Option<u32>,
}

#[derive(Debug, Args)]
pub struct DirectionArgs {
    /// Directions JSON for the projector quorum.
    #[arg(long, value_name = "PATH")]
    pub directions: Option<PathBuf>,
    /// Seed for random directions when no file is given.
    #[arg(long, value_name = "SEED")]
    pub direction_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub dirs: DirectionArgs,
    /// Dual frame JSON to test instead of the computed one.
    #[arg(long, value_name = "PATH")]
    pub dual: Option<PathBuf>,
    #[arg(long, default_value_t = default_trials())]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Gs,
    Gram,
}

#[derive(Debug, Args)]
pub struct DualArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub dirs: DirectionArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Gs)]
    pub method: MethodArg,
    /// Accept an incomplete quorum and return a dual on its span.
    #[arg(long)]
    pub subspace: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuorumArg {
    Pauli,
    Continuous,
    Weigert,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    Quota,
    Uniform,
}

impl From<SelectionArg> for SettingSelection {
    fn from(s: SelectionArg) -> Self {
        match s {
            SelectionArg::Quota => SettingSelection::FixedQuota,
            SelectionArg::Uniform => SettingSelection::UniformRandom,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Expansion,
    SpinScaled,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config; flags override its fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "TWO_S")]
    pub two_s: Option<u32>,
    /// coherent:RE[,IM], basis:M or density:PATH.
    #[arg(long, value_name = "SPEC")]
    pub state: Option<StateSpec>,
    #[arg(long, value_enum)]
    pub quorum: Option<QuorumArg>,
    #[command(flatten)]
    pub dirs: DirectionArgs,
    /// sx, sy, sz or matrix:PATH.
    #[arg(long, value_name = "SPEC")]
    pub target: Option<TargetSpec>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub n_blocks: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated sample counts for the convergence series.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub selection: Option<SelectionArg>,
    #[arg(long, value_enum)]
    pub weigert_convention: Option<ConventionArg>,
    /// Write the results JSON here instead of stdout.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Write the convergence series CSV here.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    /// Coherent-state amplitude RE[,IM].
    #[arg(long, default_value = "2", value_parser = parse_complex)]
    pub alpha: [f64; 2],
    #[arg(long, default_value_t = 100_000)]
    pub n_max: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = crate::config::DEFAULT_BLOCKS)]
    pub n_blocks: usize,
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = SelectionArg::Quota)]
    pub selection: SelectionArg,
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
    /// File name prefix: PREFIX.csv, PREFIX_means.csv, PREFIX_errors.csv.
    #[arg(long, default_value = "fig1")]
    pub prefix: String,
}

fn seed_or_env(flag: Option<u64>) -> CliResult<u64> {
    Ok(match flag {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    })
}

fn source_of(src: &SourceArgs, dirs: &DirectionArgs, seed: u64) -> CliResult<QuorumSource> {
    if src.weigert.is_none() && (dirs.directions.is_some() || dirs.direction_seed.is_some()) {
        return Err(usage("--directions and --direction-seed apply only to --weigert"));
    }
    Ok(if src.pauli {
        QuorumSource::Pauli
    } else if let Some(path) = &src.file {
        QuorumSource::File(path.clone())
    } else {
        QuorumSource::Weigert {
            two_s: src.weigert.expect("clap enforces one source"),
            directions_file: dirs.directions.clone(),
            direction_seed: dirs.direction_seed.unwrap_or(seed),
        }
    })
}

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

pub fn simulate_config(args: &SimulateArgs) -> CliResult<ExperimentConfig> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        spin_two_s: args.two_s,
        state: args.state.clone(),
        quorum: args.quorum.map(|q| match q {
            QuorumArg::Pauli => QuorumSpec::Pauli,
            QuorumArg::Continuous => QuorumSpec::Continuous,
            QuorumArg::Weigert => QuorumSpec::Weigert { directions_file: None, seed: None },
        }),
        target: args.target.clone(),
        n_samples: args.n_samples,
        n_blocks: args.n_blocks,
        seed: args.seed,
        checkpoints: args.checkpoints.clone(),
        threads: args.threads,
        selection: args.selection.map(Into::into),
        weigert_convention: args.weigert_convention.map(|c| match c {
            ConventionArg::Expansion => WeigertConvention::Expansion,
            ConventionArg::SpinScaled => WeigertConvention::SpinScaled,
        }),
    };
    // a bare `--quorum weigert` keeps direction settings from the file
    let file_weigert = match &file.quorum {
        Some(q @ QuorumSpec::Weigert { .. }) => Some(q.clone()),
        _ => None,
    };
    let mut merged = file.overlay(flags);
    if let (Some(QuorumSpec::Weigert { directions_file: None, seed: None }), Some(from_file)) = (&merged.quorum, file_weigert) {
        merged.quorum = Some(from_file);
    }
    if let Some(QuorumSpec::Weigert { directions_file, seed }) = &mut merged.quorum {
        if args.dirs.directions.is_some() {
            *directions_file = args.dirs.directions.clone();
        }
        if args.dirs.direction_seed.is_some() {
            *seed = args.dirs.direction_seed;
        }
    } else if args.dirs.directions.is_some() || args.dirs.direction_seed.is_some() {
        return Err(usage("--directions and --direction-seed apply only to the weigert quorum"));
    }
    let mut cfg = ExperimentConfig::resolve(merged, env_seed()?)?;
    if args.csv.is_some() {
        cfg = with_default_checkpoints(cfg);
    }
    Ok(cfg)
}

fn run_command(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Quorum { action: QuorumAction::Check(args) } => {
            let seed = seed_or_env(args.seed)?;
            let source = source_of(&args.source, &args.dirs, seed)?;
            let outcome = quorum_check(&source, args.dual.as_ref(), args.trials, seed)?;
            eprint!("{}", outcome.summary());
            emit(args.output.as_deref(), &pretty(&outcome.to_json()))?;
            Ok(if outcome.complete() { EXIT_OK } else { EXIT_DOMAIN })
        }
        Command::Quorum { action: QuorumAction::Dual(args) } => {
            let seed = seed_or_env(args.seed)?;
            let source = source_of(&args.source, &args.dirs, seed)?;
            let method = match args.method {
                MethodArg::Gs => DualMethod::GramSchmidt,
                MethodArg::Gram => DualMethod::GramInverse,
            };
            let outcome = quorum_dual(&source, method, args.subspace)?;
            eprint!("{}", outcome.summary());
            let text = serde_json::to_string(&outcome.doc).expect("frame serializes") + "\n";
            emit(args.output.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => {
            let cfg = simulate_config(&args)?;
            let out = run_simulation(&cfg)?;
            if let (Some(path), Some(csv)) = (&args.csv, out.csv()) {
                write_text(path, &csv)?;
            }
            emit(args.output.as_deref(), &out.results_json())?;
            Ok(EXIT_OK)
        }
        Command::Fig1(args) => {
            let params = Fig1Params {
                alpha: args.alpha,
                n_max: args.n_max,
                seed: seed_or_env(args.seed)?,
                n_blocks: args.n_blocks,
                checkpoints: args.checkpoints,
                threads: args.threads,
                selection: args.selection.into(),
            };
            let out = run_fig1(&params)?;
            std::fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io { path: args.out_dir.clone(), source })?;
            let files = [
                (format!("{}.csv", args.prefix), out.csv()),
                (format!("{}_means.csv", args.prefix), out.means_csv()),
                (format!("{}_errors.csv", args.prefix), out.errors_csv()),
            ];
            for (name, text) in &files {
                let path = args.out_dir.join(name);
                write_text(&path, text)?;
                eprintln!("wrote {}", path.display());
            }
            emit(None, &out.summary_json())?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_command(cli) {
        Ok(code) => code,
        Err(e) => {
            if let CliError::Domain(Error::Incomplete(report)) = &e {
                let _ = emit(None, &pretty(&report.to_json()));
            }
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
