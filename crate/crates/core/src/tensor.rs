//! Dense complex matrices and the superoperator kernel.
//!
//! Vectorization stacks matrix *rows*: `vec([[a, b], [c, d]]) = (a, b, c, d)`.
//! Under this convention `vec(A X Bᵀ) = (A ⊗ B) vec(X)`, so the conjugation map
//! `X ↦ C X C*` is represented by `C ⊗ C̄`. Every other module relies on this
//! ordering; mixing in column stacking silently transposes superoperators.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{OqwError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default tolerances shared across the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Hermiticity, PSD, normalization and other structural checks.
    pub structural: f64,
    /// Comparison against values printed with truncated decimals.
    pub printed: f64,
    /// Residuals of algebraic identities.
    pub identity: f64,
    /// Distance to the unit circle when counting peripheral eigenvalues.
    pub spectral: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            structural: 1e-10,
            printed: 1e-3,
            identity: 1e-8,
            spectral: 1e-9,
        }
    }
}

/// Square matrix of complex scalars with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}", self.0)
    }
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(n, n, f))
    }

    /// Builds a matrix from rows, rejecting ragged, non-square or non-finite input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(OqwError::NotSquare { rows: n, cols: row.len() });
            }
        }
        Self::from_dmatrix(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(OqwError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let z = m[(r, c)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(OqwError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(ComplexMatrix(m))
    }

    /// Wraps without the finiteness scan; for results of arithmetic on finite inputs.
    pub(crate) fn from_dmatrix_unchecked(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        ComplexMatrix(m)
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0[(r, c)]
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix(self.0.map(|z| z * s))
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.map(|z| z.conj()))
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == ZERO)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff on mismatched dimensions");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(X + X*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part().0;
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Most negative eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Hermitian with every eigenvalue at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.min_eigenvalue() >= -tol
    }

    /// Matrix with the same dimension, checked.
    pub fn try_mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(self.dim(), rhs.dim())?;
        Ok(ComplexMatrix(&self.0 * &rhs.0))
    }

    pub fn pow(&self, r: usize) -> ComplexMatrix {
        let mut acc = ComplexMatrix::identity(self.dim());
        let mut base = self.clone();
        let mut e = r;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Dense inverse via LU; errors when the pivots collapse.
    pub fn inverse(&self) -> Result<ComplexMatrix> {
        self.0
            .clone()
            .lu()
            .try_inverse()
            .map(ComplexMatrix)
            .ok_or_else(|| OqwError::Singular(format!("{0}x{0} LU inverse failed", self.dim())))
    }

    /// Matrix-vector product on a plain slice.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim());
        let dv = DVector::from_column_slice(v);
        (&self.0 * dv).iter().copied().collect()
    }

    /// Eigenvalues from a complex Schur form.
    ///
    /// The unshifted QR iteration can stall on matrices with exact zero rows
    /// and repeated eigenvalues, so a stalled attempt is retried on a fixed
    /// unitary similarity of the input.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        const MAX_ITER: usize = 5_000;
        let n = self.dim();
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut m = self.0.clone();
        for attempt in 0..4 {
            if let Some(s) = m.clone().try_schur(f64::EPSILON, MAX_ITER) {
                if let Some(ev) = s.eigenvalues() {
                    return Ok(ev.iter().copied().collect());
                }
            }
            let u = fixed_unitary(n, attempt + 1);
            m = u.adjoint() * &self.0 * &u;
        }
        Err(OqwError::NoConvergence { iterations: MAX_ITER })
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.0.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix product on mismatched dimensions");
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix sum on mismatched dimensions");
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix difference on mismatched dimensions");
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(OqwError::DimensionMismatch { expected, found })
    }
}

/// Row-major flattening.
pub fn vec(m: &ComplexMatrix) -> Vec<C64> {
    let n = m.dim();
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            out.push(m.get(r, c));
        }
    }
    out
}

/// Inverse of [`vec`].
pub fn unvec(v: &[C64], n: usize) -> Result<ComplexMatrix> {
    check_dim(n * n, v.len())?;
    ComplexMatrix::from_dmatrix(DMatrix::from_row_slice(n, n, v))
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// `vec(I_n)` as a row functional: `⟨vec(I), vec(X)⟩ = Tr(X)`.
pub fn trace_functional(n: usize) -> Vec<C64> {
    let mut u = vec![ZERO; n * n];
    for a in 0..n {
        u[a * n + a] = ONE;
    }
    u
}

/// `C X C*`.
pub fn apply_conj(c: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_dim(c.dim(), x.dim())?;
    Ok(&(c * x) * &c.adjoint())
}

/// Linear map on `M_n(ℂ)` represented as an `n² × n²` matrix acting on `vec`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp {
    n: usize,
    mat: ComplexMatrix,
}

impl SuperOp {
    pub fn new(n: usize, mat: ComplexMatrix) -> Result<Self> {
        check_dim(n * n, mat.dim())?;
        Ok(SuperOp { n, mat })
    }

    pub fn identity(n: usize) -> Self {
        SuperOp { n, mat: ComplexMatrix::identity(n * n) }
    }

    pub fn zero(n: usize) -> Self {
        SuperOp { n, mat: ComplexMatrix::zeros(n * n) }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(self.n, x.dim())?;
        unvec(&self.mat.mul_vec(&vec(x)), self.n)
    }

    /// The row vector `vec(I)ᵀ · [S]`, so that `Tr(S(X)) = ⟨row, vec(X)⟩`.
    pub fn trace_row(&self) -> Vec<C64> {
        let d = self.n * self.n;
        let mut row = vec![ZERO; d];
        for a in 0..self.n {
            let r = a * self.n + a;
            for (c, slot) in row.iter_mut().enumerate() {
                *slot += self.mat.get(r, c);
            }
        }
        row
    }

    /// `Tr(S(X))`.
    pub fn trace_of(&self, x: &ComplexMatrix) -> C64 {
        assert_eq!(x.dim(), self.n);
        self.trace_row()
            .iter()
            .zip(vec(x))
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn compose(&self, rhs: &SuperOp) -> SuperOp {
        SuperOp { n: self.n, mat: &self.mat * &rhs.mat }
    }

    pub fn add(&self, rhs: &SuperOp) -> SuperOp {
        SuperOp { n: self.n, mat: &self.mat + &rhs.mat }
    }
}

/// Representation `C ⊗ C̄` of the conjugation map `X ↦ C X C*`.
pub fn conj_map_rep(c: &ComplexMatrix) -> SuperOp {
    SuperOp { n: c.dim(), mat: kron(c, &c.conj()) }
}

/// Pauli matrices, used throughout for order-2 densities.
pub fn pauli() -> [ComplexMatrix; 3] {
    let i = C64::new(0.0, 1.0);
    [
        ComplexMatrix::from_fn(2, |r, c| if r != c { ONE } else { ZERO }),
        ComplexMatrix::from_fn(2, |r, c| match (r, c) {
            (0, 1) => -i,
            (1, 0) => i,
            _ => ZERO,
        }),
        ComplexMatrix::from_fn(2, |r, c| match (r, c) {
            (0, 0) => ONE,
            (1, 1) => -ONE,
            _ => ZERO,
        }),
    ]
}

/// Order-2 density `½[[1 + x₃, x₁ + i x₂], [x₁ - i x₂, 1 - x₃]]`; positive
/// semidefinite whenever `x₁² + x₂² + x₃² ≤ 1`.
pub fn bloch_density(x1: f64, x2: f64, x3: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |r, c| match (r, c) {
        (0, 0) => C64::new(0.5 * (1.0 + x3), 0.0),
        (0, 1) => C64::new(0.5 * x1, 0.5 * x2),
        (1, 0) => C64::new(0.5 * x1, -0.5 * x2),
        _ => C64::new(0.5 * (1.0 - x3), 0.0),
    })
}

/// Inverse of [`bloch_density`] on Hermitian order-2 matrices; `x₁ = 2 Re ρ₁₂`.
pub fn bloch_vector(rho: &ComplexMatrix) -> (f64, f64, f64) {
    assert_eq!(rho.dim(), 2);
    let r01 = rho.get(0, 1);
    (2.0 * r01.re, 2.0 * r01.im, (rho.get(0, 0) - rho.get(1, 1)).re)
}

/// Hermitian basis of `M_n(ℂ)`: `E_aa`, `E_ab + E_ba` and `i(E_ab - E_ba)` for `a < b`.
///
/// Any linear functional identity that holds on these `n²` elements holds on
/// every density matrix.
pub fn hermitian_basis(n: usize) -> Vec<ComplexMatrix> {
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        out.push(ComplexMatrix::from_fn(n, |r, c| if r == a && c == a { ONE } else { ZERO }));
    }
    for a in 0..n {
        for b in (a + 1)..n {
            out.push(ComplexMatrix::from_fn(n, |r, c| {
                if (r, c) == (a, b) || (r, c) == (b, a) {
                    ONE
                } else {
                    ZERO
                }
            }));
            out.push(ComplexMatrix::from_fn(n, |r, c| {
                if (r, c) == (a, b) {
                    i
                } else if (r, c) == (b, a) {
                    -i
                } else {
                    ZERO
                }
            }));
        }
    }
    out
}

/// Deterministic unitary used to reshuffle a stalled eigenvalue iteration.
fn fixed_unitary(n: usize, seed: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, n, |r, c| {
        let t = (seed * 7919 + r * 131 + c * 17) as f64;
        C64::new((t * 0.618).sin(), (t * 0.414).cos())
    });
    g.qr().q()
}
