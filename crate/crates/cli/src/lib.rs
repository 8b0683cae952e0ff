//! Front end for the `tomo` binary: quorum verification, dual construction and
//! Monte Carlo reconstruction experiments with JSON and CSV output.

pub mod app;
pub mod config;
pub mod quorum;
pub mod simulate;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use thiserror::Error;

/// Exit status for a successful run or a complete quorum.
pub const EXIT_OK: i32 = 0;
/// Exit status for a negative domain result (incomplete quorum, singular Gram matrix).
pub const EXIT_DOMAIN: i32 = 1;
/// Exit status for malformed input or invalid configuration.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Domain(#[from] tomography::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io { .. } => EXIT_USAGE,
            Self::Domain(_) => EXIT_DOMAIN,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Parses a JSON file, reporting the failing line and column with the offending source line.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    parse_json(&text, &path.display().to_string())
}

pub(crate) fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| {
        let mut msg = format!("{origin}: parse error at line {}, column {}: {e}", e.line(), e.column());
        if let Some(line) = text.lines().nth(e.line().saturating_sub(1)) {
            let shown: String = line.chars().take(120).collect();
            let _ = write!(msg, "\n  {} | {shown}", e.line());
        }
        usage(msg)
    })
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs `f` on a pool with `threads` workers (`None` keeps the global pool)
/// and returns the worker count alongside the result.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<(T, usize)> {
    match threads {
        None => Ok((f(), rayon::current_num_threads())),
        Some(0) => Err(usage("threads must be ≥ 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(usage)?;
            Ok((pool.install(f), n))
        }
    }
}

/// 20 log-spaced points from `max(100, low)` to `n`, rounded and deduplicated.
pub fn default_checkpoints(n: usize, low: usize) -> Vec<usize> {
    let start = low.max(100);
    if n <= start {
        return vec![n];
    }
    let (a, b) = ((start as f64).log10(), (n as f64).log10());
    let mut points: Vec<usize> = (0..20)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / 19.0).round() as usize)
        .map(|p| p.clamp(start, n))
        .collect();
    points.dedup();
    *points.last_mut().unwrap() = n;
    points
}
