//! `quorum check` and `quorum dual`.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::json;
use tomography::frames::{
    completeness_check, dual_via_gram_inverse, dual_via_gram_schmidt, verify_spanning_definitions, DualFrame,
    FrameDoc, Quorum, SpanningReport, DEFAULT_TRIALS,
};
use tomography::spin::{pauli_quorum, top_projector, weigert_quorum, SpinSystem};
use tomography::Error;

use crate::config::load_directions;
use crate::{read_json, usage, CliError, CliResult};

/// Where a quorum comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum QuorumSource {
    Pauli,
    File(PathBuf),
    Weigert { two_s: u32, directions_file: Option<PathBuf>, direction_seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualMethod {
    GramSchmidt,
    GramInverse,
}

impl DualMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GramSchmidt => "gs",
            Self::GramInverse => "gram",
        }
    }
}

pub fn load_frame_doc(path: &std::path::Path) -> CliResult<FrameDoc> {
    read_json(path)
}

fn weigert_system(two_s: u32) -> CliResult<SpinSystem> {
    if two_s == 0 {
        return Err(usage("spin_two_s must be ≥ 1"));
    }
    Ok(SpinSystem::new(two_s))
}

/// Builds the quorum described by `source` without constructing a dual.
pub fn load_quorum(source: &QuorumSource) -> CliResult<Quorum> {
    match source {
        QuorumSource::Pauli => Ok(pauli_quorum().0),
        QuorumSource::File(path) => {
            let doc = load_frame_doc(path)?;
            Quorum::from_doc(doc).map_err(|e| usage(format!("{}: {e}", path.display())))
        }
        QuorumSource::Weigert { two_s, directions_file, direction_seed } => {
            let system = weigert_system(*two_s)?;
            let d = system.dim();
            let dirs = load_directions(directions_file.as_deref(), *direction_seed, d * d)?;
            let mut elements = Vec::with_capacity(dirs.len());
            let mut labels = Vec::with_capacity(dirs.len());
            for (k, n) in dirs.iter().enumerate() {
                elements.push(top_projector(&system, n)?);
                labels.push(format!("n_{k}({},{})", n.theta(), n.phi()));
            }
            Ok(Quorum::with_labels(elements, labels)?)
        }
    }
}

/// Outcome of `quorum check`.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub report: SpanningReport,
    /// Which dual the definition checks ran against.
    pub dual_source: String,
}

impl CheckOutcome {
    pub fn complete(&self) -> bool {
        self.report.complete
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = self.report.to_json();
        v["dual_source"] = json!(self.dual_source);
        v
    }

    pub fn summary(&self) -> String {
        let r = &self.report;
        let full = r.dim * r.dim;
        let mut s = format!(
            "quorum of dimension {}: {} (rank {} of {full})\n",
            r.dim,
            if r.complete { "complete" } else { "incomplete" },
            r.rank
        );
        if let Some(c) = &r.checks {
            let rows = [
                ("i   reconstruction", c.reconstruction),
                ("ii  completeness", c.completeness),
                ("iii identity resolution", c.identity_resolution),
                ("iv  parseval", c.parseval),
            ];
            for (name, check) in rows {
                let _ = writeln!(s, "  {name:<24} {} residual {:.3e}", if check.passed { "pass" } else { "FAIL" }, check.residual);
            }
            let _ = writeln!(
                s,
                "  definitions {} ({} trials, seed {}, dual from {})",
                if c.consistent { "agree" } else { "DISAGREE" },
                c.trials,
                c.seed,
                self.dual_source
            );
        }
        if let Some(w) = &r.defect_witness {
            let _ = writeln!(s, "  defect witness (orthogonal to every element): {:?}", w.to_pairs());
        }
        s
    }
}

/// Completeness rank test plus definitions i–iv against `dual` (or, when
/// absent, the Gram–Schmidt dual of the spanned subspace).
pub fn quorum_check(source: &QuorumSource, dual: Option<&PathBuf>, trials: usize, seed: u64) -> CliResult<CheckOutcome> {
    let q = load_quorum(source)?;
    let report = completeness_check(&q)?;
    let (dual, dual_source) = match dual {
        Some(path) => {
            let doc = load_frame_doc(path)?;
            let d = DualFrame::from_doc(doc).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            (d, path.display().to_string())
        }
        None => match dual_via_gram_schmidt(&q, true) {
            Ok(d) => (d, "gram_schmidt".to_string()),
            Err(Error::AllZeroQuorum) => return Ok(CheckOutcome { report, dual_source: "none".into() }),
            Err(e) => return Err(e.into()),
        },
    };
    let verified = verify_spanning_definitions(&q, &dual, trials, seed).map_err(|e| match e {
        Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => usage(format!("dual does not match quorum: {e}")),
        other => other.into(),
    })?;
    let report = SpanningReport { checks: verified.checks, ..report };
    Ok(CheckOutcome { report, dual_source })
}

pub fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// Outcome of `quorum dual`.
#[derive(Debug, Clone)]
pub struct DualOutcome {
    pub doc: FrameDoc,
    pub duality_residual: f64,
    pub frame_identity_residual: f64,
    pub method: DualMethod,
}

impl DualOutcome {
    pub fn summary(&self) -> String {
        format!(
            "dual by {}: duality residual {:.3e}, frame identity residual {:.3e}\n",
            self.method.name(),
            self.duality_residual,
            self.frame_identity_residual
        )
    }
}

/// Computes the dual of `source` by the chosen route.
///
/// Incomplete quorums fail with [`Error::Incomplete`] unless `subspace` is set.
/// Weigert sources on the Gram route go through the projector-quorum
/// constructor, which rejects coincident or nearly dependent directions.
pub fn quorum_dual(source: &QuorumSource, method: DualMethod, subspace: bool) -> CliResult<DualOutcome> {
    let (q, dual) = match (source, method) {
        (QuorumSource::Weigert { two_s, directions_file, direction_seed }, DualMethod::GramInverse) => {
            let system = weigert_system(*two_s)?;
            let d = system.dim();
            let dirs = load_directions(directions_file.as_deref(), *direction_seed, d * d)?;
            let wq = weigert_quorum(&system, &dirs)?;
            (wq.quorum().clone(), wq.dual().clone())
        }
        (_, DualMethod::GramSchmidt) => {
            let q = load_quorum(source)?;
            let dual = dual_via_gram_schmidt(&q, subspace)?;
            (q, dual)
        }
        (_, DualMethod::GramInverse) => {
            let q = load_quorum(source)?;
            let report = completeness_check(&q)?;
            if !report.complete && !subspace {
                return Err(CliError::Domain(Error::Incomplete(Box::new(report))));
            }
            let dual = dual_via_gram_inverse(&q)?;
            (q, dual)
        }
    };
    Ok(DualOutcome {
        doc: dual.to_doc(&q),
        duality_residual: dual.duality_residual(&q)?,
        frame_identity_residual: dual.frame_identity_residual(&q)?,
        method,
    })
}
