//! Unbiased reconstruction of expectation values from simulated measurement data.
//!
//! Every estimator reduces to the same rule: measuring a quorum observable
//! `C(x)` and observing eigenvalue `λ` contributes `λ·Tr[B(x)†A]`, so that
//! averaging over outcomes gives `Σ_x Σ_m p(m,x) λ_m Tr[B(x)†A] = ⟨A⟩`.
//!
//! Contributions are generated in fixed-size chunks; chunk `c` draws from
//! stream `c` of a ChaCha generator seeded with the run seed. Chunks may be
//! simulated on any number of threads and are concatenated in index order, so
//! a run is bit-reproducible from its seed alone.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{DualFrame, Quorum};
use crate::liouville::{eig_hermitian, hs_inner, Eigensystem, Op, C64, HERMITIAN_ABS_TOL};
use crate::quadrature::{gauss_legendre_on, periodic_trapezoid};
use crate::spin::{Direction, SpinState, SpinSystem, WeigertQuorum};

pub const DEFAULT_BLOCKS: usize = 20;
/// Estimation units simulated per random stream.
pub const CHUNK: usize = 1024;

const PROB_SLACK: f64 = 1e-12;

/// A validated density operator: Hermitian, unit trace and positive semidefinite to 1e-10.
#[derive(Debug, Clone)]
pub struct DensityMatrix(Op);

impl DensityMatrix {
    pub fn new(rho: Op) -> Result<Self> {
        let eig = eig_hermitian(&rho).map_err(|_| Error::InvalidState("density matrix is not Hermitian".into()))?;
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {trace} is not 1")));
        }
        if eig.values[0] < -1e-10 {
            return Err(Error::InvalidState(format!("negative eigenvalue {}", eig.values[0])));
        }
        Ok(Self(rho))
    }

    pub fn op(&self) -> &Op {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `Tr[ρA]`.
    pub fn expectation(&self, a: &Op) -> C64 {
        (self.0.matrix() * a.matrix()).trace()
    }
}

impl From<&SpinState> for DensityMatrix {
    fn from(state: &SpinState) -> Self {
        Self(state.density())
    }
}

/// A Hermitian observable together with its spectrum.
#[derive(Debug, Clone)]
pub struct MeasurementSetting {
    pub observable: Op,
    pub label: String,
    pub eigensystem: Eigensystem,
}

impl MeasurementSetting {
    pub fn new(observable: Op, label: impl Into<String>) -> Result<Self> {
        let eigensystem = eig_hermitian(&observable)?;
        Ok(Self { observable, label: label.into(), eigensystem })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigensystem.values
    }

    /// True when every outcome has the same eigenvalue, i.e. the result is known in advance.
    pub fn is_trivial(&self) -> bool {
        let v = &self.eigensystem.values;
        v[v.len() - 1] - v[0] <= HERMITIAN_ABS_TOL
    }
}

/// Born-rule probabilities aligned with a setting's eigenvectors.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    pub setting: MeasurementSetting,
    pub probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    /// `(eigenvalue, probability)` with degenerate eigenvalues merged.
    pub fn by_eigenvalue(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (&lambda, &p) in self.setting.eigenvalues().iter().zip(&self.probabilities) {
            match out.last_mut() {
                Some((l, q)) if (lambda - *l).abs() <= 1e-9 => *q += p,
                _ => out.push((lambda, p)),
            }
        }
        out
    }

    /// `Σ_m p_m λ_m`.
    pub fn mean(&self) -> f64 {
        self.setting.eigenvalues().iter().zip(&self.probabilities).map(|(l, p)| l * p).sum()
    }
}

fn probabilities_from(rho: &DensityMatrix, eig: &Eigensystem) -> Result<Vec<f64>> {
    if rho.dim() != eig.dim() {
        return Err(Error::DimensionMismatch { left: rho.dim(), right: eig.dim() });
    }
    let mut probs = Vec::with_capacity(eig.dim());
    for k in 0..eig.dim() {
        let v = eig.vectors.column(k);
        let p = v.dotc(&(rho.op().matrix() * v)).re;
        if !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
            return Err(Error::InvalidState(format!("outcome probability {p} outside [0, 1]")));
        }
        probs.push(p.clamp(0.0, 1.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("probabilities sum to {total}")));
    }
    Ok(probs)
}

/// `p_m = ⟨v_m|ρ|v_m⟩` for each eigenvector `v_m` of the setting.
pub fn born_distribution(rho: &DensityMatrix, setting: &MeasurementSetting) -> Result<OutcomeDistribution> {
    let probabilities = probabilities_from(rho, &setting.eigensystem)?;
    Ok(OutcomeDistribution { setting: setting.clone(), probabilities })
}

/// One simulated measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub setting_index: usize,
    pub outcome_index: usize,
}

/// Inverse-CDF draw over clamped, renormalized probabilities.
fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = k;
        }
        acc += p;
        if u < acc {
            return k;
        }
    }
    last_nonzero
}

/// `count` i.i.d. outcomes from `dist`, reproducible for a fixed seed.
pub fn sample_outcomes(dist: &OutcomeDistribution, count: usize, seed: u64) -> Result<Vec<Sample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| Sample { setting_index: 0, outcome_index: draw(&dist.probabilities, &mut rng) }).collect())
}

/// Blocked Monte Carlo summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub n_samples: usize,
    pub n_blocks: usize,
    pub block_means: Vec<f64>,
    pub mean: f64,
    pub error_bar: f64,
}

/// Splits `contributions` into `n_blocks` contiguous blocks (the first
/// `len mod n_blocks` one element longer) and reports the weighted mean of the
/// block means with error bar `sd(block means)/√n_blocks`.
pub fn block_stats(contributions: &[f64], n_blocks: usize) -> Result<RunStats> {
    if n_blocks < 2 {
        return Err(Error::InvalidArgument(format!("n_blocks must be ≥ 2, got {n_blocks}")));
    }
    let len = contributions.len();
    if len < n_blocks {
        return Err(Error::InvalidArgument(format!("n_samples must be ≥ n_blocks ({len} < {n_blocks})")));
    }
    let base = len / n_blocks;
    let extra = len % n_blocks;
    let mut block_means = Vec::with_capacity(n_blocks);
    let mut start = 0;
    let mut weighted = 0.0;
    for b in 0..n_blocks {
        let size = base + usize::from(b < extra);
        let block = &contributions[start..start + size];
        let m = block.iter().sum::<f64>() / size as f64;
        weighted += m * size as f64;
        block_means.push(m);
        start += size;
    }
    let mean = weighted / len as f64;
    let plain = block_means.iter().sum::<f64>() / n_blocks as f64;
    let var = block_means.iter().map(|m| (m - plain).powi(2)).sum::<f64>() / (n_blocks - 1) as f64;
    Ok(RunStats { n_samples: len, n_blocks, block_means, mean, error_bar: (var / n_blocks as f64).sqrt() })
}

/// How measurement settings of a discrete quorum share the sample budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingSelection {
    /// Settings are cycled; each round measures every setting once and the
    /// per-setting averages are summed.
    FixedQuota,
    /// Every sample picks a setting uniformly; its term is scaled by the number of settings.
    UniformRandom,
}

impl SettingSelection {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FixedQuota => "fixed_quota",
            Self::UniformRandom => "uniform_random",
        }
    }
}

/// Per-unit single-shot estimates of `⟨A⟩`, in generation order.
///
/// A unit is one sample, or one round of samples across all settings, depending
/// on the estimator; `samples_per_unit` converts between the two.
#[derive(Debug, Clone)]
pub struct Contributions {
    pub values: Vec<f64>,
    pub samples_per_unit: usize,
    pub convention: String,
}

impl Contributions {
    pub fn n_samples(&self) -> usize {
        self.values.len() * self.samples_per_unit
    }

    pub fn stats(&self, n_blocks: usize) -> Result<RunStats> {
        let mut s = block_stats(&self.values, n_blocks)?;
        s.n_samples = self.n_samples();
        Ok(s)
    }

    /// Statistics over the first `n_samples` samples (rounded down to whole units).
    pub fn prefix_stats(&self, n_samples: usize, n_blocks: usize) -> Result<RunStats> {
        let units = (n_samples / self.samples_per_unit).min(self.values.len());
        let mut s = block_stats(&self.values[..units], n_blocks)?;
        s.n_samples = units * self.samples_per_unit;
        Ok(s)
    }
}

fn chunked<F>(units: usize, seed: u64, unit: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let chunks = units.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(units - c * CHUNK);
            (0..len).map(|_| unit(&mut rng)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

fn require_hermitian(a: &Op) -> Result<()> {
    let deviation = a.hermiticity_deviation();
    if deviation > HERMITIAN_ABS_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// A prepared discrete-quorum estimator for one target operator.
struct DiscretePlan {
    /// `(outcome probabilities, eigenvalue × weight)` for each non-trivial setting.
    random: Vec<(Vec<f64>, Vec<f64>)>,
    constant: f64,
}

fn discrete_plan(a: &Op, quorum: &Quorum, dual: &DualFrame, rho: &DensityMatrix) -> Result<DiscretePlan> {
    if quorum.len() != dual.len() {
        return Err(Error::LengthMismatch { left: quorum.len(), right: dual.len() });
    }
    if quorum.dim() != dual.dim() || quorum.dim() != a.dim() || quorum.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { left: quorum.dim(), right: dual.dim().max(a.dim()).max(rho.dim()) });
    }
    let mut random = Vec::new();
    let mut constant = 0.0;
    for (n, (cn, bn)) in quorum.elements().iter().zip(dual.elements()).enumerate() {
        let setting = MeasurementSetting::new(cn.clone(), quorum.labels()[n].clone()).map_err(|_| {
            Error::InvalidArgument(format!("quorum element {n} ({}) is not an observable", quorum.labels()[n]))
        })?;
        let weight = hs_inner(bn, a)?.re;
        if setting.is_trivial() {
            constant += setting.eigenvalues()[0] * weight;
            continue;
        }
        let probs = probabilities_from(rho, &setting.eigensystem)?;
        let terms = setting.eigenvalues().iter().map(|l| l * weight).collect();
        random.push((probs, terms));
    }
    Ok(DiscretePlan { random, constant })
}

/// `Σ_x Σ_m p(m,x) λ_m Tr[B(x)†A]` with exact probabilities.
pub fn exact_discrete(a: &Op, quorum: &Quorum, dual: &DualFrame, rho: &DensityMatrix) -> Result<f64> {
    require_hermitian(a)?;
    let plan = discrete_plan(a, quorum, dual, rho)?;
    let random: f64 = plan.random.iter().map(|(p, t)| p.iter().zip(t).map(|(p, t)| p * t).sum::<f64>()).sum();
    Ok(random + plan.constant)
}

/// Simulates the discrete estimator with a total budget of `n_samples` measurements.
///
/// Settings whose observable is proportional to the identity are never
/// measured; their term enters as a constant. Under [`SettingSelection::FixedQuota`]
/// the budget is spent in whole rounds over the remaining settings.
pub fn simulate_discrete(
    a: &Op,
    quorum: &Quorum,
    dual: &DualFrame,
    rho: &DensityMatrix,
    n_samples: usize,
    seed: u64,
    selection: SettingSelection,
) -> Result<Contributions> {
    require_hermitian(a)?;
    let plan = discrete_plan(a, quorum, dual, rho)?;
    let k = plan.random.len();
    let convention = selection.name().to_string();
    if k == 0 {
        return Ok(Contributions { values: vec![plan.constant; n_samples], samples_per_unit: 1, convention });
    }
    match selection {
        SettingSelection::FixedQuota => {
            let values = chunked(n_samples / k, seed, |rng| {
                Ok(plan.constant + plan.random.iter().map(|(p, t)| t[draw(p, rng)]).sum::<f64>())
            })?;
            Ok(Contributions { values, samples_per_unit: k, convention })
        }
        SettingSelection::UniformRandom => {
            let values = chunked(n_samples, seed, |rng| {
                let (p, t) = &plan.random[rng.random_range(0..k)];
                Ok(plan.constant + k as f64 * t[draw(p, rng)])
            })?;
            Ok(Contributions { values, samples_per_unit: 1, convention })
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_discrete(
    a: &Op,
    quorum: &Quorum,
    dual: &DualFrame,
    rho: &DensityMatrix,
    n_samples: usize,
    seed: u64,
    selection: SettingSelection,
    n_blocks: usize,
) -> Result<RunStats> {
    simulate_discrete(a, quorum, dual, rho, n_samples, seed, selection)?.stats(n_blocks)
}

/// Component-wise estimate of a non-Hermitian operator `A = H + iK`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexEstimate {
    pub re: RunStats,
    pub im: RunStats,
}

impl ComplexEstimate {
    pub fn mean(&self) -> C64 {
        C64::new(self.re.mean, self.im.mean)
    }
}

/// Splits `A` into `H = (A + A†)/2` and `K = (A − A†)/2i` and estimates both
/// from the same measurement record.
#[allow(clippy::too_many_arguments)]
pub fn estimate_discrete_complex(
    a: &Op,
    quorum: &Quorum,
    dual: &DualFrame,
    rho: &DensityMatrix,
    n_samples: usize,
    seed: u64,
    selection: SettingSelection,
    n_blocks: usize,
) -> Result<ComplexEstimate> {
    let (h, k) = hermitian_parts(a);
    Ok(ComplexEstimate {
        re: estimate_discrete(&h, quorum, dual, rho, n_samples, seed, selection, n_blocks)?,
        im: estimate_discrete(&k, quorum, dual, rho, n_samples, seed, selection, n_blocks)?,
    })
}

pub fn hermitian_parts(a: &Op) -> (Op, Op) {
    let adj = a.adjoint();
    let h = (a + &adj).scale_real(0.5);
    let k = (a - &adj).scale(C64::new(0.0, -0.5));
    (h, k)
}

/// Diagonal matrix elements `⟨m,n|A|m,n⟩` in the eigenbasis of `S·n`.
fn diagonal_in(a: &Op, eig: &Eigensystem) -> Vec<f64> {
    (0..eig.dim())
        .map(|k| {
            let v = eig.vectors.column(k);
            v.dotc(&(a.matrix() * v)).re
        })
        .collect()
}

/// `(2s+1)·(A_m − A_{m+1}/2 − A_{m−1}/2)` for every `m`, from the diagonal elements.
fn kernel_row(diag: &[f64]) -> Vec<f64> {
    let d = diag.len();
    (0..d)
        .map(|i| {
            let up = if i + 1 < d { diag[i + 1] } else { 0.0 };
            let down = if i > 0 { diag[i - 1] } else { 0.0 };
            d as f64 * (diag[i] - 0.5 * up - 0.5 * down)
        })
        .collect()
}

/// The `ψ`-integrated single-shot kernel of the continuous spin quorum.
///
/// With `A_{m'}` the diagonal elements of `A` in the `S·n` eigenbasis,
/// `∫₀^{2π} sin²(ψ/2) e^{−ikψ} dψ = π δ_{k0} − π/2 (δ_{k1} + δ_{k,−1})` collapses the
/// `ψ` integral to `(2s+1)·(A_m − A_{m+1}/2 − A_{m−1}/2)`. The normalization
/// makes the continuous reconstruction an average over uniformly sampled directions.
pub fn continuous_kernel(a: &Op, system: &SpinSystem, m: f64, n: &Direction) -> Result<f64> {
    require_hermitian(a)?;
    if a.dim() != system.dim() {
        return Err(Error::DimensionMismatch { left: a.dim(), right: system.dim() });
    }
    let index = system
        .index_of(m)
        .ok_or_else(|| Error::InvalidArgument(format!("m = {m} is not in {{−s, …, s}} for s = {}", system.spin())))?;
    let eig = eig_hermitian(&system.s_dot(n))?;
    Ok(kernel_row(&diagonal_in(a, &eig))[index])
}

fn continuous_checks(a: &Op, system: &SpinSystem, rho: &DensityMatrix) -> Result<()> {
    require_hermitian(a)?;
    if a.dim() != system.dim() || rho.dim() != system.dim() {
        return Err(Error::DimensionMismatch { left: system.dim(), right: a.dim().max(rho.dim()) });
    }
    Ok(())
}

/// One sample per unit: a uniform direction, a Born-rule outcome of `S·n`, and its kernel value.
pub fn simulate_continuous(
    a: &Op,
    system: &SpinSystem,
    rho: &DensityMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<Contributions> {
    continuous_checks(a, system, rho)?;
    let values = chunked(n_samples, seed, |rng| {
        let n = Direction::random(rng);
        let eig = eig_hermitian(&system.s_dot(&n))?;
        let probs = probabilities_from(rho, &eig)?;
        let outcome = draw(&probs, rng);
        Ok(kernel_row(&diagonal_in(a, &eig))[outcome])
    })?;
    Ok(Contributions { values, samples_per_unit: 1, convention: "uniform_direction".into() })
}

pub fn estimate_continuous(
    a: &Op,
    system: &SpinSystem,
    rho: &DensityMatrix,
    n_samples: usize,
    seed: u64,
    n_blocks: usize,
) -> Result<RunStats> {
    simulate_continuous(a, system, rho, n_samples, seed)?.stats(n_blocks)
}

/// Sphere average of `Σ_m p(m,n)·kernel(m,n)` with exact probabilities.
///
/// The integrand is a polynomial of degree at most `4s` in the components of
/// `n`, so a Gauss-Legendre × trapezoid rule with `2s + 4` and `4s + 4` nodes is exact.
pub fn exact_continuous(a: &Op, system: &SpinSystem, rho: &DensityMatrix) -> Result<f64> {
    continuous_checks(a, system, rho)?;
    let two_s = system.two_s() as usize;
    let (zs, wz) = gauss_legendre_on(two_s + 4, -1.0, 1.0);
    let (phis, wphi) = periodic_trapezoid(2 * two_s + 4, 2.0 * PI);
    let mut total = 0.0;
    for (z, wzv) in zs.iter().zip(&wz) {
        for (phi, wp) in phis.iter().zip(&wphi) {
            let n = Direction::new(z.acos(), *phi)?;
            let eig = eig_hermitian(&system.s_dot(&n))?;
            let probs = probabilities_from(rho, &eig)?;
            let kernel = kernel_row(&diagonal_in(a, &eig));
            total += wzv * wp * probs.iter().zip(&kernel).map(|(p, k)| p * k).sum::<f64>();
        }
    }
    Ok(total / (4.0 * PI))
}

/// Coefficient convention for the projector-quorum estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeigertConvention {
    /// `⟨A⟩ = Σ_k p(s, n_k) Tr[A Q^k]`, the expectation of the projector expansion.
    Expansion,
    /// The same sum multiplied by `s`; reproduces `⟨A⟩` only for `s = 1`.
    SpinScaled,
}

impl WeigertConvention {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Expansion => "expansion",
            Self::SpinScaled => "spin_scaled",
        }
    }

    fn factor(&self, system: &SpinSystem) -> f64 {
        match self {
            Self::Expansion => 1.0,
            Self::SpinScaled => system.spin(),
        }
    }
}

struct WeigertPlan {
    /// Probability of the top outcome and its weighted term, per direction.
    terms: Vec<(f64, f64)>,
}

fn weigert_plan(a: &Op, wq: &WeigertQuorum, rho: &DensityMatrix, convention: WeigertConvention) -> Result<WeigertPlan> {
    require_hermitian(a)?;
    let system = wq.system();
    if a.dim() != system.dim() || rho.dim() != system.dim() {
        return Err(Error::DimensionMismatch { left: system.dim(), right: a.dim().max(rho.dim()) });
    }
    let factor = convention.factor(system);
    let top = system.dim() - 1;
    let mut terms = Vec::with_capacity(wq.directions().len());
    for (n, b) in wq.directions().iter().zip(wq.dual().elements()) {
        let setting = MeasurementSetting::new(system.s_dot(n), "")?;
        let probs = probabilities_from(rho, &setting.eigensystem)?;
        // Tr[B_k† A], the coefficient of the k-th projector
        let weight = hs_inner(b, a)?.re;
        terms.push((probs[top], factor * weight));
    }
    Ok(WeigertPlan { terms })
}

pub fn exact_weigert(a: &Op, wq: &WeigertQuorum, rho: &DensityMatrix, convention: WeigertConvention) -> Result<f64> {
    let plan = weigert_plan(a, wq, rho, convention)?;
    Ok(plan.terms.iter().map(|(p, w)| p * w).sum())
}

/// Rounds of one `S·n_k` measurement per direction; a round scores `Σ_k 1[m_k = s]·Tr[A Q^k]`.
pub fn simulate_weigert(
    a: &Op,
    wq: &WeigertQuorum,
    rho: &DensityMatrix,
    n_samples: usize,
    seed: u64,
    convention: WeigertConvention,
) -> Result<Contributions> {
    let plan = weigert_plan(a, wq, rho, convention)?;
    let k = plan.terms.len();
    let values = chunked(n_samples / k, seed, |rng| {
        Ok(plan.terms.iter().map(|(p, w)| if rng.random::<f64>() < *p { *w } else { 0.0 }).sum())
    })?;
    Ok(Contributions { values, samples_per_unit: k, convention: convention.name().into() })
}

pub fn estimate_weigert(
    a: &Op,
    wq: &WeigertQuorum,
    rho: &DensityMatrix,
    n_samples: usize,
    seed: u64,
    convention: WeigertConvention,
    n_blocks: usize,
) -> Result<RunStats> {
    simulate_weigert(a, wq, rho, n_samples, seed, convention)?.stats(n_blocks)
}
