//! Spin-s operators and the three spin quorums.
//!
//! All operators are written in the `S_z` eigenbasis ordered `m = −s, …, +s`,
//! so index `i` carries `m = −s + i`.
//!
//! * [`pauli_quorum`]: `{σx, σy, σz, 1}` for spin 1/2, with `σ_α = 2S_α`.
//! * The continuous quorum `D(ψ, n) = exp(iψ S·n)`, whose dual follows from the
//!   SU(2) orthogonality relation checked by [`su2_orthogonality_residual`].
//! * [`weigert_quorum`]: `(2s+1)²` projectors onto the top eigenvector of `S·n_k`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{dual_via_gram_inverse, dual_via_gram_schmidt, gram_matrix, DualFrame, FrameDoc, Quorum};
use crate::liouville::{c, eig_hermitian, op_exp, Op, C64, I, ONE, ZERO};
use crate::quadrature::{gauss_legendre_on, periodic_trapezoid};

/// Haar volume of SU(2) in `(ψ, n)` coordinates.
pub const HAAR_VOLUME: f64 = 4.0 * PI * PI;
/// Largest Gram condition number accepted for a Weigert direction set.
pub const WEIGERT_MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct SpinSystem {
    two_s: u32,
    sx: Op,
    sy: Op,
    sz: Op,
    s_plus: Op,
    s_minus: Op,
}

impl SpinSystem {
    pub fn new(two_s: u32) -> Self {
        let d = two_s as usize + 1;
        let s = two_s as f64 / 2.0;
        let mut plus = vec![ZERO; d * d];
        for i in 0..d.saturating_sub(1) {
            let m = -s + i as f64;
            // ⟨m+1|S+|m⟩ sits at row i+1, column i
            plus[(i + 1) * d + i] = c((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
        let s_plus = Op::from_row_major(d, &plus).expect("square");
        let s_minus = s_plus.adjoint();
        let sx = (&s_plus + &s_minus).scale_real(0.5);
        let sy = (&s_plus - &s_minus).scale(c(0.0, -0.5));
        let sz_diag: Vec<C64> = (0..d).map(|i| c(-s + i as f64, 0.0)).collect();
        let sz = Op::diagonal(&sz_diag);
        Self { two_s, sx, sy, sz, s_plus, s_minus }
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn spin(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    /// `m` value carried by basis index `i`.
    pub fn m_of(&self, index: usize) -> f64 {
        -self.spin() + index as f64
    }

    /// Basis index for a half-integer `m`, if it lies in `{−s, …, s}`.
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let x = m + self.spin();
        let k = x.round();
        if (x - k).abs() > 1e-9 || k < 0.0 || k > self.two_s as f64 {
            None
        } else {
            Some(k as usize)
        }
    }

    pub fn sx(&self) -> &Op {
        &self.sx
    }

    pub fn sy(&self) -> &Op {
        &self.sy
    }

    pub fn sz(&self) -> &Op {
        &self.sz
    }

    pub fn s_plus(&self) -> &Op {
        &self.s_plus
    }

    pub fn s_minus(&self) -> &Op {
        &self.s_minus
    }

    /// `S·n`.
    pub fn s_dot(&self, n: &Direction) -> Op {
        let v = n.vector();
        &(&self.sx.scale_real(v[0]) + &self.sy.scale_real(v[1])) + &self.sz.scale_real(v[2])
    }
}

pub fn make_spin_system(two_s: u32) -> SpinSystem {
    SpinSystem::new(two_s)
}

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    theta: f64,
    phi: f64,
    n: [f64; 3],
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::Directions(format!("theta {theta} outside [0, π] or non-finite angle")));
        }
        let phi = phi.rem_euclid(2.0 * PI);
        let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        Ok(Self { theta, phi, n })
    }

    pub fn z() -> Self {
        Self::new(0.0, 0.0).unwrap()
    }

    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Directions("zero vector".into()));
        }
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        Self::new(z.acos(), v[1].atan2(v[0]))
    }

    /// Uniform on the sphere: `cos θ ~ U[−1, 1]`, `φ ~ U[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        Self::new(z.acos(), phi).unwrap()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn vector(&self) -> [f64; 3] {
        self.n
    }

    pub fn angle_to(&self, other: &Direction) -> f64 {
        let a = self.n;
        let b = other.n;
        let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

/// JSON form of a direction: `{"theta": t, "phi": p}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DirectionDoc {
    pub theta: f64,
    pub phi: f64,
}

impl From<&Direction> for DirectionDoc {
    fn from(d: &Direction) -> Self {
        Self { theta: d.theta, phi: d.phi }
    }
}

pub fn directions_from_json(text: &str) -> Result<Vec<Direction>> {
    let docs: Vec<DirectionDoc> = serde_json::from_str(text)?;
    docs.iter().map(|d| Direction::new(d.theta, d.phi)).collect()
}

pub fn directions_to_json(dirs: &[Direction]) -> String {
    let docs: Vec<DirectionDoc> = dirs.iter().map(DirectionDoc::from).collect();
    serde_json::to_string(&docs).expect("directions serialize")
}

/// The four vertices of the regular tetrahedron, one of them at the north pole.
pub fn tetrahedral_directions() -> Vec<Direction> {
    let t = (-1.0f64 / 3.0).acos();
    [(0.0, 0.0), (t, 0.0), (t, 2.0 * PI / 3.0), (t, 4.0 * PI / 3.0)]
        .iter()
        .map(|&(th, ph)| Direction::new(th, ph).unwrap())
        .collect()
}

pub fn random_directions(count: usize, seed: u64) -> Vec<Direction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Direction::random(&mut rng)).collect()
}

/// Pure spin state in the `m = −s … +s` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    amplitudes: DVector<C64>,
}

impl SpinState {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// `|m⟩` for the basis index `index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut a = DVector::from_element(dim, ZERO);
        a[index] = ONE;
        Self { amplitudes: a }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn density(&self) -> Op {
        Op::outer(&self.amplitudes, &self.amplitudes)
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, a: &Op) -> C64 {
        self.amplitudes.dotc(&(a.matrix() * &self.amplitudes))
    }
}

/// The quorum `{σx, σy, σz, 1}` (with `σ_α = 2S_α` in the `m`-ascending basis)
/// and its dual `{σx/2, σy/2, σz/2, 1/2}` built by Gram-Schmidt.
pub fn pauli_quorum() -> (Quorum, DualFrame) {
    let spin = SpinSystem::new(1);
    let elements = vec![
        spin.sx.scale_real(2.0),
        spin.sy.scale_real(2.0),
        spin.sz.scale_real(2.0),
        Op::identity(2),
    ];
    let labels = ["sigma_x", "sigma_y", "sigma_z", "identity"].map(String::from).to_vec();
    let q = Quorum::with_labels(elements, labels).expect("uniform dims");
    let dual = dual_via_gram_schmidt(&q, false).expect("Pauli quorum is complete");
    (q, dual)
}

/// `D(ψ, n) = exp(iψ S·n)`.
pub fn rotation_d(system: &SpinSystem, psi: f64, n: &Direction) -> Result<Op> {
    op_exp(&system.s_dot(n), psi)
}

/// Node counts for the product quadrature over `(cos θ, φ, ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub n_psi: usize,
}

impl QuadratureGrid {
    pub const MIN_NODES: usize = 8;

    pub fn new(n_theta: usize, n_phi: usize, n_psi: usize) -> Self {
        Self { n_theta, n_phi, n_psi }
    }

    fn validate(&self) -> Result<()> {
        if self.n_theta < Self::MIN_NODES || self.n_phi < Self::MIN_NODES || self.n_psi < Self::MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "quadrature grid {self:?} is degenerate; every count must be ≥ {}",
                Self::MIN_NODES
            )));
        }
        Ok(())
    }
}

/// `∫ sin²(ψ/2) sinθ dθ dφ dψ` on the grid; equals [`HAAR_VOLUME`] up to quadrature error.
pub fn haar_volume(grid: QuadratureGrid) -> Result<f64> {
    grid.validate()?;
    let (_, wz) = gauss_legendre_on(grid.n_theta, -1.0, 1.0);
    let (_, wphi) = periodic_trapezoid(grid.n_phi, 2.0 * PI);
    let (psi, wpsi) = gauss_legendre_on(grid.n_psi, 0.0, 2.0 * PI);
    let sphere: f64 = wz.iter().sum::<f64>() * wphi.iter().sum::<f64>();
    let weight: f64 = psi.iter().zip(&wpsi).map(|(p, w)| w * (p / 2.0).sin().powi(2)).sum();
    Ok(sphere * weight)
}

/// Largest deviation of
/// `(2s+1)/4π² ∫dn ∫₀^{2π}dψ sin²(ψ/2) ⟨j|D(ψ,n)|r⟩⟨t|D(ψ,n)†|k⟩` from `δ_jk δ_tr`.
///
/// Gauss-Legendre in `cos θ` and `ψ`, trapezoid in `φ`. Each `cos θ` slab is
/// summed in a fixed order and slabs are merged in index order, so the result
/// is independent of the thread count.
pub fn su2_orthogonality_residual(system: &SpinSystem, grid: QuadratureGrid) -> Result<f64> {
    let tensor = su2_orthogonality_tensor(system, grid)?;
    let d = system.dim();
    let mut worst = 0.0f64;
    for j in 0..d {
        for r in 0..d {
            for t in 0..d {
                for k in 0..d {
                    let target = if j == k && t == r { 1.0 } else { 0.0 };
                    let v = tensor[((j * d + r) * d + t) * d + k];
                    worst = worst.max((v - c(target, 0.0)).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// The full `d⁴` tensor of the orthogonality integral, indexed `[j][r][t][k]`.
pub fn su2_orthogonality_tensor(system: &SpinSystem, grid: QuadratureGrid) -> Result<Vec<C64>> {
    grid.validate()?;
    let d = system.dim();
    let (zs, wz) = gauss_legendre_on(grid.n_theta, -1.0, 1.0);
    let (phis, wphi) = periodic_trapezoid(grid.n_phi, 2.0 * PI);
    let (psis, wpsi) = gauss_legendre_on(grid.n_psi, 0.0, 2.0 * PI);
    let haar: Vec<f64> = psis.iter().zip(&wpsi).map(|(p, w)| w * (p / 2.0).sin().powi(2)).collect();
    let m_values: Vec<f64> = (0..d).map(|i| system.m_of(i)).collect();

    let slabs: Vec<Vec<C64>> = (0..zs.len())
        .into_par_iter()
        .map(|a| -> Result<Vec<C64>> {
            let mut acc = vec![ZERO; d * d * d * d];
            let theta = zs[a].clamp(-1.0, 1.0).acos();
            for (phi, wp) in phis.iter().zip(&wphi) {
                let n = Direction::new(theta, *phi)?;
                let eig = eig_hermitian(&system.s_dot(&n))?;
                // eigenvalues of S·n are exactly m = −s … s
                let v = &eig.vectors;
                for (psi, wh) in psis.iter().zip(&haar) {
                    let w = wz[a] * wp * wh;
                    let phases: Vec<C64> = m_values.iter().map(|&m| C64::from_polar(1.0, psi * m)).collect();
                    let mut dmat = vec![ZERO; d * d];
                    for row in 0..d {
                        for col in 0..d {
                            let mut s = ZERO;
                            for (e, ph) in phases.iter().enumerate() {
                                s += v[(row, e)] * ph * v[(col, e)].conj();
                            }
                            dmat[row * d + col] = s;
                        }
                    }
                    for j in 0..d {
                        for r in 0..d {
                            let djr = dmat[j * d + r] * w;
                            for t in 0..d {
                                for k in 0..d {
                                    // ⟨t|D†|k⟩ = conj(⟨k|D|t⟩)
                                    acc[((j * d + r) * d + t) * d + k] += djr * dmat[k * d + t].conj();
                                }
                            }
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = c(d as f64 / HAAR_VOLUME, 0.0);
    let mut total = vec![ZERO; d * d * d * d];
    for slab in &slabs {
        for (t, s) in total.iter_mut().zip(slab) {
            *t += s;
        }
    }
    Ok(total.into_iter().map(|z| z * scale).collect())
}

/// `|α⟩ = exp(αS₊ − α*S₋)|−s⟩`, evaluated as `exp(i·H)` with the Hermitian
/// generator `H = i(α*S₋ − αS₊)`.
pub fn coherent_state(system: &SpinSystem, alpha: C64) -> Result<SpinState> {
    let generator = (&system.s_minus.scale(alpha.conj()) - &system.s_plus.scale(alpha)).scale(I);
    let u = op_exp(&generator, 1.0)?;
    let amplitudes = u.matrix().column(0).into_owned();
    let norm = amplitudes.norm();
    SpinState::new(amplitudes / c(norm, 0.0))
}

#[derive(Debug, Clone)]
pub struct WeigertQuorum {
    system: SpinSystem,
    directions: Vec<Direction>,
    quorum: Quorum,
    dual: DualFrame,
    gram_condition: f64,
}

impl WeigertQuorum {
    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// The projectors `Q_k` as a quorum labelled `n_k(theta,phi)`.
    pub fn quorum(&self) -> &Quorum {
        &self.quorum
    }

    pub fn projectors(&self) -> &[Op] {
        self.quorum.elements()
    }

    /// The dual operators `Q^k` with `Tr[(Q^k)† Q_k'] = δ_kk'`.
    pub fn dual(&self) -> &DualFrame {
        &self.dual
    }

    pub fn gram_condition(&self) -> f64 {
        self.gram_condition
    }

    pub fn to_doc(&self) -> FrameDoc {
        self.quorum.to_doc()
    }
}

/// Projector onto the eigenvector of `S·n` with the largest eigenvalue `s`.
pub fn top_projector(system: &SpinSystem, n: &Direction) -> Result<Op> {
    let eig = eig_hermitian(&system.s_dot(n))?;
    let top = eig.vector(system.dim() - 1);
    Op::outer(&top, &top).with_hermitian_hint()
}

/// Builds the projector quorum on `(2s+1)²` directions and its dual by Gram inversion.
pub fn weigert_quorum(system: &SpinSystem, directions: &[Direction]) -> Result<WeigertQuorum> {
    let d = system.dim();
    if directions.len() != d * d {
        return Err(Error::Directions(format!(
            "spin {} needs exactly {} directions, got {}",
            system.spin(),
            d * d,
            directions.len()
        )));
    }
    for (a, da) in directions.iter().enumerate() {
        for (b, db) in directions.iter().enumerate().skip(a + 1) {
            if da.angle_to(db) <= 1e-12 {
                return Err(Error::SingularWeigert {
                    condition: f64::INFINITY,
                    detail: format!("directions {a} and {b} coincide"),
                });
            }
        }
    }
    let mut elements = Vec::with_capacity(d * d);
    let mut labels = Vec::with_capacity(d * d);
    for (k, n) in directions.iter().enumerate() {
        elements.push(top_projector(system, n)?);
        labels.push(format!("n_{k}({},{})", n.theta(), n.phi()));
    }
    let quorum = Quorum::with_labels(elements, labels)?;

    let gram = Op::new(gram_matrix(&quorum)?)?;
    let eig = eig_hermitian(&gram)?;
    let lo = eig.values[0];
    let hi = eig.values[eig.values.len() - 1];
    let gram_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(gram_condition < WEIGERT_MAX_CONDITION) {
        let v = eig.vector(0);
        let mut involved: Vec<(usize, f64)> = v.iter().map(|z| z.norm()).enumerate().collect();
        involved.sort_by(|x, y| y.1.total_cmp(&x.1));
        let names: Vec<String> =
            involved.iter().take_while(|(_, w)| *w > 0.1).map(|(k, w)| format!("Q_{k} ({w:.2})")).collect();
        return Err(Error::SingularWeigert {
            condition: gram_condition,
            detail: format!("near-dependence among {}", names.join(", ")),
        });
    }
    // the Gram matrix is real symmetric, so the exact duals are Hermitian
    let raw = dual_via_gram_inverse(&quorum)?;
    let hermitian = raw.elements().iter().map(|b| (b + &b.adjoint()).scale_real(0.5)).collect();
    let dual = DualFrame::new(hermitian, raw.kept_mask().to_vec())?;
    Ok(WeigertQuorum { system: system.clone(), directions: directions.to_vec(), quorum, dual, gram_condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{completeness_check, verify_spanning_definitions};
    use crate::liouville::{hs_inner, pauli_x, pauli_y, pauli_z, random_op};

    fn commutator(a: &Op, b: &Op) -> Op {
        &(a * b) - &(b * a)
    }

    #[test]
    fn su2_algebra_holds() {
        for two_s in 0..=6 {
            let sp = SpinSystem::new(two_s);
            let s = sp.spin();
            let (x, y, z) = (sp.sx(), sp.sy(), sp.sz());
            assert!(commutator(x, y).max_abs_diff(&z.scale(I)) < 1e-12);
            assert!(commutator(y, z).max_abs_diff(&x.scale(I)) < 1e-12);
            assert!(commutator(z, x).max_abs_diff(&y.scale(I)) < 1e-12);
            let casimir = &(&(x * x) + &(y * y)) + &(z * z);
            assert!(casimir.max_abs_diff(&Op::identity(sp.dim()).scale_real(s * (s + 1.0))) < 1e-12);
            assert!(sp.s_plus().adjoint().max_abs_diff(sp.s_minus()) == 0.0);
        }
    }

    #[test]
    fn spin_half_matrices() {
        let sp = SpinSystem::new(1);
        // in the m-ascending basis σ_α = 2S_α is the Pauli representation with
        // σx = standard σx, σy = −standard σy, σz = −standard σz
        assert!(sp.sx().max_abs_diff(&pauli_x().scale_real(0.5)) < 1e-15);
        assert!(sp.sy().max_abs_diff(&pauli_y().scale_real(-0.5)) < 1e-15);
        assert!(sp.sz().max_abs_diff(&pauli_z().scale_real(-0.5)) < 1e-15);
        let sp1 = SpinSystem::new(2);
        assert!(sp1.sz().max_abs_diff(&Op::diagonal(&[c(-1.0, 0.0), ZERO, ONE])) < 1e-15);
    }

    #[test]
    fn m_index_mapping() {
        let sp = SpinSystem::new(3);
        assert_eq!(sp.index_of(-1.5), Some(0));
        assert_eq!(sp.index_of(1.5), Some(3));
        assert_eq!(sp.index_of(2.5), None);
        assert_eq!(sp.index_of(0.0), None);
    }

    #[test]
    fn direction_unit_norm_and_parse() {
        let d = Direction::new(1.1, 7.0).unwrap();
        let v = d.vector();
        assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-14);
        assert!(d.phi() < 2.0 * PI);
        assert!(Direction::new(4.0, 0.0).is_err());
        let dirs = directions_from_json(r#"[{"theta": 0.5, "phi": 1.0}, {"theta": 2.0, "phi": 0.0}]"#).unwrap();
        assert_eq!(dirs.len(), 2);
        let back = directions_from_json(&directions_to_json(&dirs)).unwrap();
        assert_eq!(back, dirs);
    }

    #[test]
    fn pauli_quorum_dual_and_expansions() {
        let (q, dual) = pauli_quorum();
        for (b, e) in dual.elements().iter().zip(q.elements()) {
            assert!(b.max_abs_diff(&e.scale_real(0.5)) < 1e-12);
        }
        let checks = verify_spanning_definitions(&q, &dual, 50, 42).unwrap().checks.unwrap();
        assert_eq!(checks.verdicts(), [true; 4]);

        let sigma_z = q.elements()[2].clone();
        let coefs = dual.coefficients(&sigma_z).unwrap();
        for (k, want) in [0.0, 0.0, 1.0, 0.0].iter().enumerate() {
            assert!((coefs[k] - c(*want, 0.0)).norm() < 1e-12);
        }
        let proj = (&Op::identity(2) + &sigma_z).scale_real(0.5);
        let coefs = dual.coefficients(&proj).unwrap();
        for (k, want) in [0.0, 0.0, 0.5, 0.5].iter().enumerate() {
            assert!((coefs[k] - c(*want, 0.0)).norm() < 1e-12);
        }
        assert!(dual.frame_identity_residual(&q).unwrap() < 1e-12);
    }

    #[test]
    fn pauli_expansion_identity_random() {
        let (q, _) = pauli_quorum();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let a = random_op(2, &mut rng);
            let mut acc = Op::identity(2).scale(a.trace());
            for s in &q.elements()[..3] {
                acc = &acc + &s.scale((s * &a).trace());
            }
            assert!(a.max_abs_diff(&acc.scale_real(0.5)) < 1e-12);
        }
    }

    #[test]
    fn rotation_examples() {
        let n = Direction::new(0.7, 2.1).unwrap();
        let half = SpinSystem::new(1);
        let one = SpinSystem::new(2);
        assert!(rotation_d(&half, 0.0, &n).unwrap().max_abs_diff(&Op::identity(2)) < 1e-12);
        assert!(rotation_d(&half, 2.0 * PI, &n).unwrap().max_abs_diff(&Op::identity(2).scale_real(-1.0)) < 1e-10);
        assert!(rotation_d(&one, 2.0 * PI, &n).unwrap().max_abs_diff(&Op::identity(3)) < 1e-10);
        let u = rotation_d(&one, 1.3, &n).unwrap();
        assert!((&u.adjoint() * &u).max_abs_diff(&Op::identity(3)) < 1e-10);
    }

    #[test]
    fn haar_volume_is_four_pi_squared() {
        let v = haar_volume(QuadratureGrid::new(32, 32, 64)).unwrap();
        assert!((v - HAAR_VOLUME).abs() < 1e-12 * HAAR_VOLUME);
    }

    #[test]
    fn orthogonality_spin_half() {
        let r = su2_orthogonality_residual(&SpinSystem::new(1), QuadratureGrid::new(32, 32, 64)).unwrap();
        assert!(r <= 1e-6, "residual {r}");
    }

    #[test]
    fn degenerate_grid_rejected() {
        let err = su2_orthogonality_residual(&SpinSystem::new(1), QuadratureGrid::new(4, 32, 64));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        assert!(haar_volume(QuadratureGrid::new(8, 8, 7)).is_err());
    }

    /// `exp(αS₊ − α*S₋)` for spin 1/2 in closed form: `cos|α|·1 + sin|α|/|α|·G`.
    fn spin_half_coherent_oracle(alpha: C64) -> [C64; 2] {
        let r = alpha.norm();
        if r == 0.0 {
            return [ONE, ZERO];
        }
        [c(r.cos(), 0.0), alpha / r * r.sin()]
    }

    #[test]
    fn coherent_state_examples() {
        for two_s in [1, 2, 3] {
            let sp = SpinSystem::new(two_s);
            let st = coherent_state(&sp, ZERO).unwrap();
            assert!(st.amplitudes()[0].norm() > 1.0 - 1e-14);
        }
        let sp = SpinSystem::new(1);
        let st = coherent_state(&sp, c(2.0, 0.0)).unwrap();
        // m = −1/2 carries cos 2, m = +1/2 carries sin 2
        assert!((st.amplitudes()[0] - c(2f64.cos(), 0.0)).norm() < 1e-12);
        assert!((st.amplitudes()[1] - c(2f64.sin(), 0.0)).norm() < 1e-12);
        let sz = st.expectation(sp.sz());
        assert!((sz.re + 4f64.cos() / 2.0).abs() < 1e-12);

        for alpha in [c(0.3, -1.1), c(-2.5, 0.4), c(0.0, 1.0)] {
            let st = coherent_state(&sp, alpha).unwrap();
            let want = spin_half_coherent_oracle(alpha);
            assert!((st.amplitudes()[0] - want[0]).norm() < 1e-12);
            assert!((st.amplitudes()[1] - want[1]).norm() < 1e-12);
        }
        for two_s in [2, 5] {
            let st = coherent_state(&SpinSystem::new(two_s), c(0.8, 1.7)).unwrap();
            assert!((st.amplitudes().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_states_point_along_rotated_axis() {
        // the rotation takes −z to n(α) = (sin2|α| cos φ, −sin2|α| sin φ, −cos2|α|), α = |α|e^{iφ}
        for alpha in [c(2.0, 0.0), c(0.4, 0.9), c(-1.3, -0.2)] {
            let (r, phi) = (alpha.norm(), alpha.arg());
            let n = Direction::from_vector([(2.0 * r).sin() * phi.cos(), -(2.0 * r).sin() * phi.sin(), -(2.0 * r).cos()])
                .unwrap();
            for two_s in [1, 2, 3] {
                let sp = SpinSystem::new(two_s);
                let st = coherent_state(&sp, alpha).unwrap();
                let v = st.expectation(&sp.s_dot(&n));
                assert!((v.re - sp.spin()).abs() < 1e-10 && v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weigert_tetrahedral_spin_half() {
        let sp = SpinSystem::new(1);
        let wq = weigert_quorum(&sp, &tetrahedral_directions()).unwrap();
        assert!(wq.gram_condition() < 10.0);
        for q in wq.projectors() {
            assert!((q * q).max_abs_diff(q) < 1e-10);
            assert!((q.trace() - ONE).norm() < 1e-12);
        }
        for (k, b) in wq.dual().elements().iter().enumerate() {
            for (l, q) in wq.projectors().iter().enumerate() {
                let target = if k == l { ONE } else { ZERO };
                assert!((hs_inner(b, q).unwrap() - target).norm() < 1e-10);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = random_op(2, &mut rng);
            let back = wq.dual().reconstruct(wq.quorum(), &a).unwrap();
            assert!(back.max_abs_diff(&a) < 1e-10);
        }
        assert!(wq.quorum().labels()[0].starts_with("n_0("));
    }

    #[test]
    fn weigert_projectors_are_top_eigenvectors() {
        let sp = SpinSystem::new(2);
        let n = Direction::new(1.0, 0.3).unwrap();
        let q = top_projector(&sp, &n).unwrap();
        let sn = sp.s_dot(&n);
        assert!((&sn * &q).max_abs_diff(&q.scale_real(sp.spin())) < 1e-10);
    }

    #[test]
    fn weigert_random_directions_complete() {
        for (two_s, seed) in [(1u32, 11u64), (2, 12), (3, 13)] {
            let sp = SpinSystem::new(two_s);
            let d = sp.dim();
            let wq = weigert_quorum(&sp, &random_directions(d * d, seed)).unwrap();
            let report = completeness_check(wq.quorum()).unwrap();
            assert!(report.complete && report.rank == d * d);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let a = random_op(d, &mut rng);
                let back = wq.dual().reconstruct(wq.quorum(), &a).unwrap();
                assert!(hs_norm_diff(&back, &a) <= 1e-8 * (1.0 + a.hs_norm()));
            }
        }
    }

    fn hs_norm_diff(a: &Op, b: &Op) -> f64 {
        (a - b).hs_norm()
    }

    #[test]
    fn weigert_rejects_duplicates_and_wrong_counts() {
        let sp = SpinSystem::new(1);
        let mut dirs = tetrahedral_directions();
        dirs[2] = dirs[1];
        match weigert_quorum(&sp, &dirs) {
            Err(Error::SingularWeigert { condition, detail }) => {
                assert!(condition.is_infinite());
                assert!(detail.contains("1 and 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(weigert_quorum(&sp, &dirs[..3]), Err(Error::Directions(_))));
    }

    #[test]
    fn weigert_rejects_coplanar_degeneracy() {
        // four directions on one great circle leave σ_y unresolved for spin 1/2
        let sp = SpinSystem::new(1);
        let dirs: Vec<Direction> =
            [0.3, 1.1, 2.0, 2.9].iter().map(|&t| Direction::new(t, 0.0).unwrap()).collect();
        assert!(matches!(weigert_quorum(&sp, &dirs), Err(Error::SingularWeigert { .. })));
    }
}
