//! Quorums, dual frames and the spanning-set tests.
//!
//! A [`Quorum`] is a finite ordered family `C_n` of operators. Its dual
//! [`DualFrame`] holds operators `B_n` with `Σ_n |C_n⟩⟨B_n| = 1̂̂`, so every
//! operator expands as `A = Σ_n Tr[B_n†A]·C_n`.
//!
//! Two independent constructions are provided:
//!
//! * [`dual_via_gram_schmidt`] orthonormalizes the quorum, records each
//!   orthonormal vector as a combination of the original elements, and
//!   re-expands the identity resolution `Σ_k |y_k⟩⟨y_k|` as `Σ_n |C_n⟩⟨B_n|`.
//!   Linearly dependent elements are eliminated and receive a zero dual.
//! * [`dual_via_gram_inverse`] inverts the Gram matrix `G_nm = ⟨C_n|C_m⟩` and
//!   sets `B_n = Σ_m (G⁻¹)_mn C_m`. It requires linearly independent elements.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{
    canonicalize_phase, eig_hermitian, hs_inner, hs_norm, random_op, superop_from_frame, Op, OpDoc, C64, ONE, ZERO,
};

/// Singular values at or below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-10;
/// Gram-Schmidt residual norms at or below this fraction of the largest input norm are eliminated.
pub const ELIMINATION_RTOL: f64 = 1e-10;
/// Largest Gram condition number accepted by the inversion route.
pub const MAX_GRAM_CONDITION: f64 = 1e12;
/// Pass threshold for the randomized spanning-definition checks.
pub const DEFINITION_TOL: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct Quorum {
    dim: usize,
    elements: Vec<Op>,
    labels: Vec<String>,
}

impl Quorum {
    /// Builds a quorum with default labels `C_0, C_1, ...`.
    pub fn new(elements: Vec<Op>) -> Result<Self> {
        let labels = (0..elements.len()).map(|n| format!("C_{n}")).collect();
        Self::with_labels(elements, labels)
    }

    pub fn with_labels(elements: Vec<Op>, labels: Vec<String>) -> Result<Self> {
        let dim = elements.first().ok_or(Error::EmptyQuorum)?.dim();
        if let Some(bad) = elements.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch { left: dim, right: bad.dim() });
        }
        if labels.len() != elements.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} elements",
                labels.len(),
                elements.len()
            )));
        }
        Ok(Self { dim, elements, labels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Op] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Returns a copy with one extra element appended.
    pub fn push(&self, element: Op, label: impl Into<String>) -> Result<Self> {
        let mut elements = self.elements.clone();
        let mut labels = self.labels.clone();
        elements.push(element);
        labels.push(label.into());
        Self::with_labels(elements, labels)
    }

    pub fn to_doc(&self) -> FrameDoc {
        FrameDoc {
            dim: self.dim,
            elements: self.elements.iter().map(Op::to_pairs).collect(),
            labels: self.labels.clone(),
            kept_mask: None,
        }
    }

    pub fn from_doc(doc: FrameDoc) -> Result<Self> {
        let elements = doc.operators()?;
        let labels = if doc.labels.is_empty() {
            (0..elements.len()).map(|n| format!("C_{n}")).collect()
        } else {
            doc.labels
        };
        Self::with_labels(elements, labels)
    }
}

/// Dual operators `B_n`, index-aligned with the quorum they were built from.
#[derive(Debug, Clone)]
pub struct DualFrame {
    dim: usize,
    elements: Vec<Op>,
    kept_mask: Vec<bool>,
}

impl DualFrame {
    pub fn new(elements: Vec<Op>, kept_mask: Vec<bool>) -> Result<Self> {
        let dim = elements.first().ok_or(Error::EmptyQuorum)?.dim();
        if let Some(bad) = elements.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch { left: dim, right: bad.dim() });
        }
        if kept_mask.len() != elements.len() {
            return Err(Error::LengthMismatch { left: kept_mask.len(), right: elements.len() });
        }
        Ok(Self { dim, elements, kept_mask })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Op] {
        &self.elements
    }

    pub fn kept_mask(&self) -> &[bool] {
        &self.kept_mask
    }

    /// Largest `|Tr[B_n†C_m] − δ_nm|` over the retained indices.
    pub fn duality_residual(&self, quorum: &Quorum) -> Result<f64> {
        check_pair(quorum, self)?;
        let mut worst = 0.0f64;
        for (n, b) in self.elements.iter().enumerate() {
            if !self.kept_mask[n] {
                continue;
            }
            for (m, cm) in quorum.elements.iter().enumerate() {
                if !self.kept_mask[m] {
                    continue;
                }
                let target = if n == m { ONE } else { ZERO };
                worst = worst.max((hs_inner(b, cm)? - target).norm());
            }
        }
        Ok(worst)
    }

    /// `max |Σ_n |C_n⟩⟨B_n| − 1̂̂|`.
    pub fn frame_identity_residual(&self, quorum: &Quorum) -> Result<f64> {
        check_pair(quorum, self)?;
        Ok(superop_from_frame(&quorum.elements, &self.elements)?.identity_residual())
    }

    /// Expansion coefficients `Tr[B_n†A]`.
    pub fn coefficients(&self, a: &Op) -> Result<Vec<C64>> {
        self.elements.iter().map(|b| hs_inner(b, a)).collect()
    }

    /// `Σ_n Tr[B_n†A]·C_n`.
    pub fn reconstruct(&self, quorum: &Quorum, a: &Op) -> Result<Op> {
        check_pair(quorum, self)?;
        let mut acc = Op::zeros(self.dim);
        for (coef, cn) in self.coefficients(a)?.into_iter().zip(&quorum.elements) {
            acc = &acc + &cn.scale(coef);
        }
        Ok(acc)
    }

    pub fn to_doc(&self, quorum: &Quorum) -> FrameDoc {
        FrameDoc {
            dim: self.dim,
            elements: self.elements.iter().map(Op::to_pairs).collect(),
            labels: quorum.labels.iter().map(|l| format!("dual({l})")).collect(),
            kept_mask: Some(self.kept_mask.clone()),
        }
    }

    pub fn from_doc(doc: FrameDoc) -> Result<Self> {
        let elements = doc.operators()?;
        let mask = doc.kept_mask.unwrap_or_else(|| vec![true; elements.len()]);
        Self::new(elements, mask)
    }
}

fn check_pair(quorum: &Quorum, dual: &DualFrame) -> Result<()> {
    if quorum.dim != dual.dim {
        return Err(Error::DimensionMismatch { left: quorum.dim, right: dual.dim });
    }
    if quorum.len() != dual.len() {
        return Err(Error::LengthMismatch { left: quorum.len(), right: dual.len() });
    }
    Ok(())
}

/// JSON interchange for quorums and duals:
/// `{"dim": d, "elements": [[[re, im], ...], ...], "labels": [...]}` with row-major elements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameDoc {
    pub dim: usize,
    pub elements: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_mask: Option<Vec<bool>>,
}

impl FrameDoc {
    pub fn operators(&self) -> Result<Vec<Op>> {
        self.elements.iter().map(|e| Op::from_pairs(self.dim, e)).collect()
    }
}

/// Pass/fail plus residual for one spanning-set definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    pub residual: f64,
}

/// Results for the four equivalent spanning-set definitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefinitionChecks {
    /// i: `A = Σ Tr[B_n†A] C_n`; worst relative reconstruction residual.
    pub reconstruction: Check,
    /// ii: no nonzero operator is orthogonal to every `C_n` (nor to every `B_n`);
    /// residual is the smaller relative smallest singular value of the two.
    pub completeness: Check,
    /// iii: `Σ |C_n⟩⟨B_n| = 1̂̂`; max-entry residual.
    pub identity_resolution: Check,
    /// iv: `Σ ⟨A|C_n⟩⟨B_n|A⟩ = ‖A‖²`; worst relative residual.
    pub parseval: Check,
    pub trials: usize,
    pub seed: u64,
    /// False when the four verdicts disagree.
    pub consistent: bool,
}

impl DefinitionChecks {
    pub fn verdicts(&self) -> [bool; 4] {
        [
            self.reconstruction.passed,
            self.completeness.passed,
            self.identity_resolution.passed,
            self.parseval.passed,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SpanningReport {
    pub dim: usize,
    pub complete: bool,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Unit-norm operator orthogonal to every quorum element, present iff incomplete.
    pub defect_witness: Option<Op>,
    pub checks: Option<DefinitionChecks>,
}

#[derive(Serialize)]
struct SpanningReportDoc<'a> {
    dim: usize,
    complete: bool,
    rank: usize,
    singular_values: &'a [f64],
    defect_witness: Option<OpDoc>,
    checks: Option<&'a DefinitionChecks>,
}

impl SpanningReport {
    pub fn to_json(&self) -> serde_json::Value {
        let doc = SpanningReportDoc {
            dim: self.dim,
            complete: self.complete,
            rank: self.rank,
            singular_values: &self.singular_values,
            defect_witness: self.defect_witness.as_ref().map(OpDoc::from),
            checks: self.checks.as_ref(),
        };
        serde_json::to_value(doc).expect("report serializes")
    }
}

struct RankInfo {
    rank: usize,
    singular_values: Vec<f64>,
    witness: Option<Op>,
}

/// Rank of the span of `ops` in L(H) and, if deficient, a unit vector of its orthogonal complement.
fn span_rank(dim: usize, ops: &[Op]) -> Result<RankInfo> {
    let width = dim * dim;
    let rows = ops.len().max(width);
    // row n holds ⟨C_n|·, so M x = 0 iff x ⟂ every C_n
    let mut m = DMatrix::<C64>::zeros(rows, width);
    for (n, op) in ops.iter().enumerate() {
        let v = op.flatten();
        for k in 0..width {
            m[(n, k)] = v[k].conj();
        }
    }
    let svd = m.try_svd(false, true, f64::EPSILON, 10_000).ok_or_else(|| Error::Eigen("SVD did not converge".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let s_max = sv.iter().copied().fold(0.0, f64::max);
    let cut = RANK_RTOL * s_max;
    let rank = if s_max == 0.0 { 0 } else { sv.iter().filter(|&&s| s > cut).count() };

    let witness = if rank < width {
        let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
        let (k_min, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (k, &s)| if s < best.1 { (k, s) } else { best });
        let mut x: DVector<C64> = v_t.row(k_min).adjoint();
        x /= C64::new(x.norm(), 0.0);
        canonicalize_phase(&mut x);
        for z in x.iter_mut() {
            if z.re.abs() < 1e-14 {
                z.re = 0.0;
            }
            if z.im.abs() < 1e-14 {
                z.im = 0.0;
            }
        }
        Some(Op::unflatten(dim, &x)?)
    } else {
        None
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.truncate(width.min(ops.len()));
    Ok(RankInfo { rank, singular_values: sv, witness })
}

/// Rank test for completeness: the quorum is complete iff its span is all of L(H).
pub fn completeness_check(q: &Quorum) -> Result<SpanningReport> {
    let info = span_rank(q.dim, &q.elements)?;
    let full = q.dim * q.dim;
    Ok(SpanningReport {
        dim: q.dim,
        complete: info.rank == full,
        rank: info.rank,
        singular_values: info.singular_values,
        defect_witness: info.witness,
        checks: None,
    })
}

/// Output of [`gram_schmidt_basis`].
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    /// Orthonormal operators `y_k`, one per retained quorum element.
    pub basis: Vec<Op>,
    pub kept_mask: Vec<bool>,
    /// `coeffs[k][n]`: `y_k = Σ_n coeffs[k][n]·C_n`; zero for `n` beyond the k-th retained index.
    pub coeffs: Vec<Vec<C64>>,
}

/// Orthonormalizes the quorum in order, eliminating elements that are linear
/// combinations of earlier ones.
///
/// Each projection is applied twice (classical Gram-Schmidt with one
/// reorthogonalization pass) so the basis stays orthonormal to working precision.
pub fn gram_schmidt_basis(q: &Quorum) -> Result<GramSchmidt> {
    let count = q.len();
    let max_norm = q.elements.iter().map(hs_norm).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Err(Error::AllZeroQuorum);
    }
    let threshold = ELIMINATION_RTOL * max_norm;

    let mut ys: Vec<DVector<C64>> = Vec::new();
    let mut coeffs: Vec<Vec<C64>> = Vec::new();
    let mut kept_mask = Vec::with_capacity(count);

    for (n, element) in q.elements.iter().enumerate() {
        let mut v = element.flatten();
        let mut t = vec![ZERO; count];
        t[n] = ONE;
        for _ in 0..2 {
            for (y, ty) in ys.iter().zip(&coeffs) {
                let h = y.dotc(&v);
                v -= y * h;
                for (tn, tyn) in t.iter_mut().zip(ty) {
                    *tn -= h * tyn;
                }
            }
        }
        let residual = v.norm();
        if residual <= threshold {
            kept_mask.push(false);
            continue;
        }
        let inv = C64::new(1.0 / residual, 0.0);
        ys.push(v * inv);
        coeffs.push(t.into_iter().map(|z| z * inv).collect());
        kept_mask.push(true);
    }

    let basis = ys.iter().map(|y| Op::unflatten(q.dim, y)).collect::<Result<Vec<_>>>()?;
    Ok(GramSchmidt { basis, kept_mask, coeffs })
}

/// Dual frame from the Gram-Schmidt identity resolution.
///
/// With `y_k = Σ_n T_kn C_n`, the resolution `Σ_k |y_k⟩⟨y_k|` regroups into
/// `Σ_n |C_n⟩⟨B_n|` with `B_n = Σ_k conj(T_kn)·y_k`. Eliminated elements get `B_n = 0`.
///
/// An incomplete quorum is rejected unless `allow_subspace` is set, in which
/// case the result is a dual on the spanned subspace only.
pub fn dual_via_gram_schmidt(q: &Quorum, allow_subspace: bool) -> Result<DualFrame> {
    let report = completeness_check(q)?;
    if !report.complete && !allow_subspace {
        return Err(Error::Incomplete(Box::new(report)));
    }
    let gs = gram_schmidt_basis(q)?;
    let elements = (0..q.len())
        .map(|n| {
            let mut acc = Op::zeros(q.dim);
            for (y, t) in gs.basis.iter().zip(&gs.coeffs) {
                if t[n] != ZERO {
                    acc = &acc + &y.scale(t[n].conj());
                }
            }
            acc
        })
        .collect();
    DualFrame::new(elements, gs.kept_mask)
}

/// Gram matrix `G_nm = ⟨C_n|C_m⟩`.
pub fn gram_matrix(q: &Quorum) -> Result<DMatrix<C64>> {
    let n = q.len();
    let mut g = DMatrix::<C64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = hs_inner(&q.elements[a], &q.elements[b])?;
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
    }
    Ok(g)
}

/// Spectral condition number of the (positive semidefinite) Gram matrix; infinite when singular.
pub fn gram_condition(q: &Quorum) -> Result<f64> {
    let g = Op::new(gram_matrix(q)?)?;
    let eig = eig_hermitian(&g)?;
    Ok(condition_of(&eig.values))
}

fn condition_of(values: &[f64]) -> f64 {
    let lo = values.first().copied().unwrap_or(0.0);
    let hi = values.last().copied().unwrap_or(0.0);
    if lo <= 0.0 || hi <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Dual frame by Gram-matrix inversion, `B_n = Σ_m (G⁻¹)_mn C_m`, so that `Tr[B_n†C_m] = δ_nm`.
pub fn dual_via_gram_inverse(q: &Quorum) -> Result<DualFrame> {
    let g = Op::new(gram_matrix(q)?)?;
    let eig = eig_hermitian(&g)?;
    let condition = condition_of(&eig.values);
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let g_inv = eig.apply_fn(|lambda| C64::new(1.0 / lambda, 0.0));
    let elements = (0..q.len())
        .map(|n| {
            let mut acc = Op::zeros(q.dim);
            for (m, cm) in q.elements.iter().enumerate() {
                acc = &acc + &cm.scale(g_inv.get(m, n));
            }
            acc
        })
        .collect();
    DualFrame::new(elements, vec![true; q.len()])
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Evaluates spanning-set definitions i–iv for `(q, dual)` on `trials` random operators.
///
/// Trial `t` draws its operator from stream `t` of a seeded ChaCha generator,
/// so the report does not depend on evaluation order or thread count.
pub fn verify_spanning_definitions(q: &Quorum, dual: &DualFrame, trials: usize, seed: u64) -> Result<SpanningReport> {
    check_pair(q, dual)?;
    let dim = q.dim;

    let quorum_rank = span_rank(dim, &q.elements)?;
    let dual_rank = span_rank(dim, &dual.elements)?;
    let full = dim * dim;
    let relative_floor = |info: &RankInfo| -> f64 {
        if info.singular_values.len() < full {
            return 0.0;
        }
        let hi = info.singular_values.first().copied().unwrap_or(0.0);
        let lo = info.singular_values[full - 1];
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    };
    let completeness = Check {
        passed: quorum_rank.rank == full && dual_rank.rank == full,
        residual: relative_floor(&quorum_rank).min(relative_floor(&dual_rank)),
    };

    let identity = superop_from_frame(&q.elements, &dual.elements)?.identity_residual();

    let per_trial: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let a = random_op(dim, &mut trial_rng(seed, t));
            let norm = hs_norm(&a);
            let back = dual.reconstruct(q, &a)?;
            let recon = hs_norm(&(&a - &back)) / (1.0 + norm);
            let mut parseval = ZERO;
            for (cn, bn) in q.elements.iter().zip(&dual.elements) {
                parseval += hs_inner(&a, cn)? * hs_inner(bn, &a)?;
            }
            let pars = (parseval - C64::new(norm * norm, 0.0)).norm() / (1.0 + norm * norm);
            Ok((recon, pars))
        })
        .collect::<Result<Vec<_>>>()?;
    let recon = per_trial.iter().map(|r| r.0).fold(0.0, f64::max);
    let pars = per_trial.iter().map(|r| r.1).fold(0.0, f64::max);

    let reconstruction = Check { passed: trials > 0 && recon <= DEFINITION_TOL, residual: recon };
    let identity_resolution = Check { passed: identity <= DEFINITION_TOL, residual: identity };
    let parseval = Check { passed: trials > 0 && pars <= DEFINITION_TOL, residual: pars };

    let verdicts = [reconstruction.passed, completeness.passed, identity_resolution.passed, parseval.passed];
    let consistent = verdicts.iter().all(|&v| v == verdicts[0]);

    Ok(SpanningReport {
        dim,
        complete: quorum_rank.rank == full,
        rank: quorum_rank.rank,
        singular_values: quorum_rank.singular_values,
        defect_witness: quorum_rank.witness,
        checks: Some(DefinitionChecks {
            reconstruction,
            completeness,
            identity_resolution,
            parseval,
            trials,
            seed,
            consistent,
        }),
    })
}

/// Both reproducing-kernel residuals for the discrete kernel `δ(n,n') = Tr[B_n†C_n']`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelResiduals {
    /// `max_n' ‖Σ_n δ(n,n') C_n − C_n'‖`.
    pub quorum_side: f64,
    /// `max_n' ‖Σ_n δ(n,n')* B_n − B_n'‖`, i.e. `Σ_n δ(n,n')⟨B_n| = ⟨B_n'|` for bras.
    pub dual_side: f64,
}

impl KernelResiduals {
    pub fn max(&self) -> f64 {
        self.quorum_side.max(self.dual_side)
    }
}

pub fn reproducing_kernel_residuals(q: &Quorum, dual: &DualFrame) -> Result<KernelResiduals> {
    check_pair(q, dual)?;
    let n = q.len();
    let mut kernel = vec![vec![ZERO; n]; n];
    for (a, row) in kernel.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            *entry = hs_inner(&dual.elements[a], &q.elements[b])?;
        }
    }
    let mut quorum_side = 0.0f64;
    let mut dual_side = 0.0f64;
    for target in 0..n {
        let mut cq = q.elements[target].scale_real(-1.0);
        let mut bq = dual.elements[target].scale_real(-1.0);
        for (src, row) in kernel.iter().enumerate() {
            cq = &cq + &q.elements[src].scale(row[target]);
            bq = &bq + &dual.elements[src].scale(row[target].conj());
        }
        quorum_side = quorum_side.max(hs_norm(&cq));
        dual_side = dual_side.max(hs_norm(&bq));
    }
    Ok(KernelResiduals { quorum_side, dual_side })
}

/// Largest reproducing-kernel residual over the quorum and dual sides.
pub fn reproducing_kernel_residual(q: &Quorum, dual: &DualFrame) -> Result<f64> {
    Ok(reproducing_kernel_residuals(q, dual)?.max())
}
