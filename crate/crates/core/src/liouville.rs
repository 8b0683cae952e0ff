//! Dense operator algebra on the Liouville space L(H).
//!
//! Operators on a `d`-dimensional Hilbert space are treated as vectors of a
//! `d²`-dimensional inner-product space with the Hilbert-Schmidt product
//! `⟨A|B⟩ = Tr[A†B]`. A ket `|A⟩` is the operator itself; the bra `⟨A|` is the
//! functional `X ↦ Tr[A†X]`.
//!
//! Flattening is row-major: entry `(i, j)` of a `d×d` operator lands at index
//! `i·d + j`. Super-operators are `d²×d²` matrices acting on flattened operators.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Absolute Hermiticity tolerance for operations that require Hermitian input.
pub const HERMITIAN_ABS_TOL: f64 = 1e-10;
/// Relative Hermiticity tolerance attached to `hermitian_hint`.
pub const HERMITIAN_REL_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A `d×d` complex matrix viewed as a vector of L(H).
#[derive(Clone, PartialEq)]
pub struct Op {
    entries: DMatrix<C64>,
    hermitian_hint: Option<bool>,
}

impl fmt::Debug for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Op")
            .field("dim", &self.dim())
            .field("entries", &self.entries)
            .field("hermitian_hint", &self.hermitian_hint)
            .finish()
    }
}

impl Op {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::NotSquare { rows: entries.nrows(), cols: entries.ncols() });
        }
        Ok(Self { entries, hermitian_hint: None })
    }

    /// Builds an operator from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::BadEntryCount { dim, got: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let flat: Vec<C64> = rows.iter().flat_map(|r| r.iter().map(|&x| c(x, 0.0))).collect();
        Self::from_row_major(dim, &flat)
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: DMatrix::zeros(dim, dim), hermitian_hint: Some(true) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: DMatrix::identity(dim, dim), hermitian_hint: Some(true) }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let d = DVector::from_column_slice(values);
        Self { entries: DMatrix::from_diagonal(&d), hermitian_hint: None }
    }

    /// The rank-1 operator `|u⟩⟨v|`.
    pub fn outer(u: &DVector<C64>, v: &DVector<C64>) -> Self {
        Self { entries: u * v.adjoint(), hermitian_hint: None }
    }

    /// Marks the operator as Hermitian after checking the relative tolerance.
    pub fn with_hermitian_hint(mut self) -> Result<Self> {
        let deviation = self.hermiticity_deviation();
        if deviation > HERMITIAN_REL_TOL * (1.0 + self.max_abs()) {
            return Err(Error::NotHermitian { deviation });
        }
        self.hermitian_hint = Some(true);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn hermitian_hint(&self) -> Option<bool> {
        self.hermitian_hint
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint(), hermitian_hint: self.hermitian_hint }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        let hint = if factor.im == 0.0 { self.hermitian_hint } else { None };
        Self { entries: &self.entries * factor, hermitian_hint: hint }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(c(factor, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Op) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |a_ij − conj(a_ji)|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Row-major flattening into a `d²` vector.
    pub fn flatten(&self) -> DVector<C64> {
        let d = self.dim();
        DVector::from_fn(d * d, |k, _| self.entries[(k / d, k % d)])
    }

    pub fn unflatten(dim: usize, v: &DVector<C64>) -> Result<Self> {
        if v.len() != dim * dim {
            return Err(Error::BadEntryCount { dim, got: v.len() });
        }
        Ok(Self { entries: DMatrix::from_fn(dim, dim, |i, j| v[i * dim + j]), hermitian_hint: None })
    }

    /// Row-major entries as `[re, im]` pairs.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.flatten().iter().map(|z| [z.re, z.im]).collect()
    }

    pub fn from_pairs(dim: usize, pairs: &[[f64; 2]]) -> Result<Self> {
        let flat: Vec<C64> = pairs.iter().map(|p| c(p[0], p[1])).collect();
        Self::from_row_major(dim, &flat)
    }

    /// `Tr[A†B]`.
    pub fn hs_inner(&self, other: &Op) -> Result<C64> {
        hs_inner(self, other)
    }

    pub fn hs_norm(&self) -> f64 {
        hs_norm(self)
    }

    fn check_dim(&self, other: &Op) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }
}

impl<'a> Add<&'a Op> for &'a Op {
    type Output = Op;
    fn add(self, rhs: &Op) -> Op {
        Op { entries: &self.entries + &rhs.entries, hermitian_hint: None }
    }
}

impl<'a> Sub<&'a Op> for &'a Op {
    type Output = Op;
    fn sub(self, rhs: &Op) -> Op {
        Op { entries: &self.entries - &rhs.entries, hermitian_hint: None }
    }
}

impl<'a> Mul<&'a Op> for &'a Op {
    type Output = Op;
    fn mul(self, rhs: &Op) -> Op {
        Op { entries: &self.entries * &rhs.entries, hermitian_hint: None }
    }
}

/// Serialized form of an [`Op`]: `{"dim": d, "entries": [[re, im], ...]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpDoc {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<&Op> for OpDoc {
    fn from(op: &Op) -> Self {
        Self { dim: op.dim(), entries: op.to_pairs() }
    }
}

impl TryFrom<OpDoc> for Op {
    type Error = Error;
    fn try_from(doc: OpDoc) -> Result<Op> {
        Op::from_pairs(doc.dim, &doc.entries)
    }
}

/// A `d²×d²` matrix acting on row-major flattened operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    dim: usize,
    entries: DMatrix<C64>,
}

impl SuperOp {
    pub fn identity(dim: usize) -> Self {
        Self { dim, entries: DMatrix::identity(dim * dim, dim * dim) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Entry at row `(i, j)`, column `(l, k)`.
    pub fn get(&self, i: usize, j: usize, l: usize, k: usize) -> C64 {
        self.entries[(i * self.dim + j, l * self.dim + k)]
    }

    pub fn apply(&self, a: &Op) -> Result<Op> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch { left: self.dim, right: a.dim() });
        }
        Op::unflatten(self.dim, &(&self.entries * a.flatten()))
    }

    /// `max |S − 1̂̂|` over all entries.
    pub fn identity_residual(&self) -> f64 {
        let n = self.dim * self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for col in 0..n {
                let target = if r == col { ONE } else { ZERO };
                worst = worst.max((self.entries[(r, col)] - target).norm());
            }
        }
        worst
    }
}

/// Hilbert-Schmidt product `⟨A|B⟩ = Tr[A†B]`.
pub fn hs_inner(a: &Op, b: &Op) -> Result<C64> {
    a.check_dim(b)?;
    Ok(a.entries.iter().zip(b.entries.iter()).map(|(x, y)| x.conj() * y).sum())
}

pub fn hs_norm(a: &Op) -> f64 {
    a.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectrum of a Hermitian operator: ascending eigenvalues and orthonormal
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    /// `V·diag(λ)·V†`.
    pub fn reconstruct(&self) -> Op {
        let d: Vec<C64> = self.values.iter().map(|&x| c(x, 0.0)).collect();
        let diag = DMatrix::from_diagonal(&DVector::from_vec(d));
        Op { entries: &self.vectors * diag * self.vectors.adjoint(), hermitian_hint: Some(true) }
    }

    /// `V·diag(f(λ))·V†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> Op {
        let d: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let diag = DMatrix::from_diagonal(&DVector::from_vec(d));
        Op { entries: &self.vectors * diag * self.vectors.adjoint(), hermitian_hint: None }
    }
}

fn require_hermitian(h: &Op) -> Result<()> {
    let deviation = h.hermiticity_deviation();
    if deviation > HERMITIAN_ABS_TOL + HERMITIAN_REL_TOL * h.max_abs() {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Diagonalizes a Hermitian operator.
///
/// Eigenvalues come out ascending. Each eigenvector is rotated so that its
/// largest-magnitude component (first such index on ties) is real and positive.
pub fn eig_hermitian(h: &Op) -> Result<Eigensystem> {
    require_hermitian(h)?;
    let sym = (&h.entries + h.entries.adjoint()) * c(0.5, 0.0);
    let d = h.dim();
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence for {d}x{d} operator")))?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<C64>::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        canonicalize_phase(&mut v);
        vectors.set_column(col, &v);
    }
    Ok(Eigensystem { values, vectors })
}

pub(crate) fn canonicalize_phase(v: &mut DVector<C64>) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
}

/// `exp(i·phase·h)` for Hermitian `h`, computed through its eigendecomposition.
pub fn op_exp(h: &Op, phase: f64) -> Result<Op> {
    let eig = eig_hermitian(h)?;
    Ok(eig.apply_fn(|lambda| C64::from_polar(1.0, phase * lambda)))
}

/// The frame super-operator `Σ_n |C_n⟩⟨B_n|`.
///
/// Row `(i, j)`, column `(l, k)` holds `Σ_n ⟨i|C_n|j⟩⟨k|B_n†|l⟩`; the result is
/// the identity exactly when `(quorum, dual)` resolves the identity on L(H).
pub fn superop_from_frame(quorum: &[Op], dual: &[Op]) -> Result<SuperOp> {
    if quorum.len() != dual.len() {
        return Err(Error::LengthMismatch { left: quorum.len(), right: dual.len() });
    }
    let first = quorum.first().ok_or(Error::EmptyQuorum)?;
    let dim = first.dim();
    let n = dim * dim;
    let mut entries = DMatrix::<C64>::zeros(n, n);
    for (cq, bq) in quorum.iter().zip(dual) {
        first.check_dim(cq)?;
        first.check_dim(bq)?;
        let cv = cq.flatten();
        let bv = bq.flatten();
        entries += &cv * bv.adjoint();
    }
    Ok(SuperOp { dim, entries })
}

pub fn pauli_x() -> Op {
    Op::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap().with_hermitian_hint().unwrap()
}

pub fn pauli_y() -> Op {
    Op::from_row_major(2, &[ZERO, c(0.0, -1.0), I, ZERO]).unwrap().with_hermitian_hint().unwrap()
}

pub fn pauli_z() -> Op {
    Op::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap().with_hermitian_hint().unwrap()
}

/// Operator with entries drawn uniformly from the unit square `[-1, 1] + i[-1, 1]`.
pub fn random_op<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Op {
    let entries = DMatrix::from_fn(dim, dim, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    Op { entries, hermitian_hint: None }
}

/// Hermitian part `(X + X†)/2` of a [`random_op`].
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Op {
    let x = random_op(dim, rng);
    Op { entries: (&x.entries + x.entries.adjoint()) * c(0.5, 0.0), hermitian_hint: Some(true) }
}

/// Random density matrix `XX†/Tr[XX†]`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Op {
    let x = random_op(dim, rng);
    let p = &x.entries * x.entries.adjoint();
    let tr = p.trace();
    Op { entries: p / tr, hermitian_hint: Some(true) }
}
