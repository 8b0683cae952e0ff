//! Experiment configuration: JSON file, command-line overrides and validation.
//!
//! Precedence is flags, then the config file, then defaults. The seed
//! additionally falls back to `TOMO_SEED` before the built-in default of 42.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tomography::estimator::{DensityMatrix, SettingSelection, WeigertConvention};
use tomography::liouville::{Op, OpDoc, C64};
use tomography::spin::{coherent_state, directions_from_json, random_directions, Direction, SpinState, SpinSystem};

use crate::{read_json, read_text, usage, CliResult};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_BLOCKS: usize = tomography::estimator::DEFAULT_BLOCKS;
pub const SEED_ENV: &str = "TOMO_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Coherent { alpha: [f64; 2] },
    Basis { m: f64 },
    DensityFile { path: PathBuf },
}

impl FromStr for StateSpec {
    type Err = String;

    /// `coherent:RE[,IM]`, `basis:M` or `density:PATH`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("state `{s}`: expected KIND:VALUE"))?;
        match kind {
            "coherent" => Ok(Self::Coherent { alpha: parse_complex(rest)? }),
            "basis" => Ok(Self::Basis { m: parse_half_integer(rest)? }),
            "density" => Ok(Self::DensityFile { path: PathBuf::from(rest) }),
            _ => Err(format!("unknown state kind `{kind}` (coherent, basis, density)")),
        }
    }
}

pub fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let mut parts = s.split(',');
    let re = parts.next().unwrap_or("").trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?;
    let im = match parts.next() {
        Some(p) => p.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?,
        None => 0.0,
    };
    if parts.next().is_some() || !re.is_finite() || !im.is_finite() {
        return Err(format!("`{s}`: expected RE[,IM] with finite parts"));
    }
    Ok([re, im])
}

fn parse_half_integer(s: &str) -> Result<f64, String> {
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
        let den: f64 = den.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
        return Ok(num / den);
    }
    s.trim().parse().map_err(|e| format!("`{s}`: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QuorumSpec {
    Pauli,
    Continuous,
    Weigert {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        directions_file: Option<PathBuf>,
        /// Seed for random directions when no file is given; defaults to the run seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl QuorumSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pauli => "pauli",
            Self::Continuous => "continuous",
            Self::Weigert { .. } => "weigert",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Sx,
    Sy,
    Sz,
    MatrixFile { path: PathBuf },
}

impl FromStr for TargetSpec {
    type Err = String;

    /// `sx`, `sy`, `sz` or `matrix:PATH`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sx" => Ok(Self::Sx),
            "sy" => Ok(Self::Sy),
            "sz" => Ok(Self::Sz),
            _ => match s.split_once(':') {
                Some(("matrix", path)) => Ok(Self::MatrixFile { path: PathBuf::from(path) }),
                _ => Err(format!("unknown target `{s}` (sx, sy, sz, matrix:PATH)")),
            },
        }
    }
}

impl TargetSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Sx => "sx".into(),
            Self::Sy => "sy".into(),
            Self::Sz => "sz".into(),
            Self::MatrixFile { path } => format!("matrix:{}", path.display()),
        }
    }
}

/// The JSON config file; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub spin_two_s: Option<u32>,
    pub state: Option<StateSpec>,
    pub quorum: Option<QuorumSpec>,
    pub target: Option<TargetSpec>,
    pub n_samples: Option<usize>,
    pub n_blocks: Option<usize>,
    pub seed: Option<u64>,
    pub checkpoints: Option<Vec<usize>>,
    pub threads: Option<usize>,
    pub selection: Option<SettingSelection>,
    pub weigert_convention: Option<WeigertConvention>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            spin_two_s: over.spin_two_s.or(self.spin_two_s),
            state: over.state.or(self.state),
            quorum: over.quorum.or(self.quorum),
            target: over.target.or(self.target),
            n_samples: over.n_samples.or(self.n_samples),
            n_blocks: over.n_blocks.or(self.n_blocks),
            seed: over.seed.or(self.seed),
            checkpoints: over.checkpoints.or(self.checkpoints),
            threads: over.threads.or(self.threads),
            selection: over.selection.or(self.selection),
            weigert_convention: over.weigert_convention.or(self.weigert_convention),
        }
    }
}

/// Seed from `TOMO_SEED`, if set.
pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|e| usage(format!("{SEED_ENV}=`{v}`: {e}"))),
        Err(_) => Ok(None),
    }
}

/// A fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub spin_two_s: u32,
    pub state: StateSpec,
    pub quorum: QuorumSpec,
    pub target: TargetSpec,
    pub n_samples: usize,
    pub n_blocks: usize,
    pub seed: u64,
    pub checkpoints: Option<Vec<usize>>,
    pub threads: Option<usize>,
    pub selection: SettingSelection,
    pub weigert_convention: WeigertConvention,
}

impl ExperimentConfig {
    /// Fills defaults and checks the cheap invariants; nothing is sampled.
    pub fn resolve(file: ConfigFile, env_seed: Option<u64>) -> CliResult<Self> {
        let cfg = Self {
            spin_two_s: file.spin_two_s.unwrap_or(1),
            state: file.state.unwrap_or(StateSpec::Coherent { alpha: [2.0, 0.0] }),
            quorum: file.quorum.unwrap_or(QuorumSpec::Pauli),
            target: file.target.unwrap_or(TargetSpec::Sz),
            n_samples: file.n_samples.unwrap_or(DEFAULT_SAMPLES),
            n_blocks: file.n_blocks.unwrap_or(DEFAULT_BLOCKS),
            seed: file.seed.or(env_seed).unwrap_or(DEFAULT_SEED),
            checkpoints: file.checkpoints,
            threads: file.threads,
            selection: file.selection.unwrap_or(SettingSelection::FixedQuota),
            weigert_convention: file.weigert_convention.unwrap_or(WeigertConvention::Expansion),
        };
        if cfg.spin_two_s == 0 {
            return Err(usage("spin_two_s must be ≥ 1"));
        }
        if cfg.quorum == QuorumSpec::Pauli && cfg.spin_two_s != 1 {
            return Err(usage(format!("the pauli quorum requires spin_two_s = 1, got {}", cfg.spin_two_s)));
        }
        if cfg.n_blocks < 2 {
            return Err(usage(format!("n_blocks must be ≥ 2, got {}", cfg.n_blocks)));
        }
        if cfg.threads == Some(0) {
            return Err(usage("threads must be ≥ 1"));
        }
        let unit = cfg.samples_per_unit();
        let min = cfg.n_blocks * unit;
        if cfg.n_samples < min {
            return Err(usage(format!(
                "n_samples must be ≥ n_blocks ({} < {}{})",
                cfg.n_samples,
                cfg.n_blocks,
                if unit > 1 { format!(" rounds of {unit} samples") } else { String::new() }
            )));
        }
        if let Some(points) = &cfg.checkpoints {
            if let Some(&bad) = points.iter().find(|&&p| p < min || p > cfg.n_samples) {
                return Err(usage(format!("checkpoint {bad} outside [{min}, {}]", cfg.n_samples)));
            }
        }
        Ok(cfg)
    }

    pub fn system(&self) -> SpinSystem {
        SpinSystem::new(self.spin_two_s)
    }

    /// Measurements consumed by one estimation unit.
    pub fn samples_per_unit(&self) -> usize {
        let d = self.spin_two_s as usize + 1;
        match (&self.quorum, self.selection) {
            (QuorumSpec::Pauli, SettingSelection::FixedQuota) => 3,
            (QuorumSpec::Pauli, SettingSelection::UniformRandom) | (QuorumSpec::Continuous, _) => 1,
            (QuorumSpec::Weigert { .. }, _) => d * d,
        }
    }

    pub fn density(&self) -> CliResult<DensityMatrix> {
        load_state(&self.state, &self.system())
    }

    pub fn target_op(&self) -> CliResult<Op> {
        load_target(&self.target, &self.system())
    }

    pub fn directions(&self) -> CliResult<Vec<Direction>> {
        match &self.quorum {
            QuorumSpec::Weigert { directions_file, seed } => {
                let d = self.system().dim();
                load_directions(directions_file.as_deref(), seed.unwrap_or(self.seed), d * d)
            }
            _ => Ok(Vec::new()),
        }
    }
}

pub fn load_state(spec: &StateSpec, system: &SpinSystem) -> CliResult<DensityMatrix> {
    match spec {
        StateSpec::Coherent { alpha } => {
            let state = coherent_state(system, C64::new(alpha[0], alpha[1])).map_err(usage)?;
            Ok(DensityMatrix::from(&state))
        }
        StateSpec::Basis { m } => {
            let index = system
                .index_of(*m)
                .ok_or_else(|| usage(format!("basis m = {m} is not in {{−s, …, s}} for s = {}", system.spin())))?;
            Ok(DensityMatrix::from(&SpinState::basis(system.dim(), index)))
        }
        StateSpec::DensityFile { path } => {
            let op = load_op(path)?;
            if op.dim() != system.dim() {
                return Err(usage(format!("{}: density is {}x{}, expected dimension {}", path.display(), op.dim(), op.dim(), system.dim())));
            }
            DensityMatrix::new(op).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
    }
}

pub fn load_target(spec: &TargetSpec, system: &SpinSystem) -> CliResult<Op> {
    Ok(match spec {
        TargetSpec::Sx => system.sx().clone(),
        TargetSpec::Sy => system.sy().clone(),
        TargetSpec::Sz => system.sz().clone(),
        TargetSpec::MatrixFile { path } => {
            let op = load_op(path)?;
            if op.dim() != system.dim() {
                return Err(usage(format!("{}: operator has dimension {}, expected {}", path.display(), op.dim(), system.dim())));
            }
            op
        }
    })
}

pub fn load_op(path: &Path) -> CliResult<Op> {
    let doc: OpDoc = read_json(path)?;
    Op::try_from(doc).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Directions from a JSON file (exactly `count` entries) or `count` seeded random ones.
pub fn load_directions(file: Option<&Path>, seed: u64, count: usize) -> CliResult<Vec<Direction>> {
    match file {
        Some(path) => {
            let text = read_text(path)?;
            // syntax errors get line context, value errors the library message
            crate::parse_json::<serde_json::Value>(&text, &path.display().to_string())?;
            let dirs = directions_from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if dirs.len() != count {
                return Err(usage(format!("{}: expected exactly {count} directions, got {}", path.display(), dirs.len())));
            }
            Ok(dirs)
        }
        None => Ok(random_directions(count, seed)),
    }
}
