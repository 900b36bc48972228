//! Walk data model: transition effects, block states and the block operator.
//!
//! **Index convention.** `effect(i, j)` is `B_ij`, the effect of the jump from
//! source site `j` to target site `i`. Normalization sums over targets:
//! `Σ_i B_ij* B_ij = I` for every source `j`. Products of effects and block
//! indices read right to left, exactly like matrix products. All indices are
//! 0-based here; the file formats in the CLI are 1-based.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{OqwError, Result};
use crate::tensor::{conj_map_rep, unvec, vec, ComplexMatrix, SuperOp, C64, ZERO};

/// Default structural tolerance used by builders and [`block_rep`].
pub const MODEL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct OqwModel {
    k: usize,
    n: usize,
    effects: BTreeMap<(usize, usize), ComplexMatrix>,
    label: Option<String>,
}

/// Per-source normalization residuals `‖Σ_i B_ij* B_ij − I‖_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub offending: Vec<usize>,
    pub passed: bool,
}

impl OqwModel {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(OqwError::InvalidParameter(format!(
                "walk needs k ≥ 1 sites and degree n ≥ 1, got k={k}, n={n}"
            )));
        }
        Ok(OqwModel { k, n, effects: BTreeMap::new(), label: None })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Sets `B_{to,from}`. Overwrites any previous entry.
    pub fn set_effect(&mut self, to: usize, from: usize, b: ComplexMatrix) -> Result<()> {
        self.check_site(to)?;
        self.check_site(from)?;
        if b.dim() != self.n {
            return Err(OqwError::DimensionMismatch { expected: self.n, found: b.dim() });
        }
        self.effects.insert((to, from), b);
        Ok(())
    }

    pub fn with_effect(mut self, to: usize, from: usize, b: ComplexMatrix) -> Result<Self> {
        self.set_effect(to, from, b)?;
        Ok(self)
    }

    pub fn sites(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// `B_ij` (jump `j → i`), `None` for an absent (zero) effect.
    pub fn effect(&self, i: usize, j: usize) -> Option<&ComplexMatrix> {
        self.effects.get(&(i, j))
    }

    /// Nonzero effects leaving `from`, as `(to, B)`.
    pub fn effects_from(&self, from: usize) -> impl Iterator<Item = (usize, &ComplexMatrix)> {
        self.effects
            .iter()
            .filter(move |((_, j), _)| *j == from)
            .map(|((i, _), b)| (*i, b))
    }

    pub fn effects(&self) -> impl Iterator<Item = ((usize, usize), &ComplexMatrix)> {
        self.effects.iter().map(|(k, v)| (*k, v))
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let id = ComplexMatrix::identity(self.n);
        let residuals: Vec<f64> = (0..self.k)
            .map(|j| {
                let sum = self
                    .effects_from(j)
                    .fold(ComplexMatrix::zeros(self.n), |acc, (_, b)| &acc + &(&b.adjoint() * b));
                sum.max_abs_diff(&id)
            })
            .collect();
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        let offending: Vec<usize> = residuals
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > tol)
            .map(|(j, _)| j)
            .collect();
        ValidationReport { passed: offending.is_empty(), residuals, max_residual, offending }
    }

    pub(crate) fn ensure_valid(&self, tol: f64) -> Result<()> {
        let report = self.validate(tol);
        if report.passed {
            Ok(())
        } else {
            Err(OqwError::NotNormalized { sources: report.offending, max_residual: report.max_residual })
        }
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i < self.k {
            Ok(())
        } else {
            Err(OqwError::IndexOutOfRange { index: i, len: self.k })
        }
    }
}

/// Block density `Σ ρ_i ⊗ |i⟩⟨i|`, stored as the list of site blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteState {
    blocks: Vec<ComplexMatrix>,
}

impl SiteState {
    /// Validates Hermiticity, positivity and unit total trace within `tol`.
    pub fn new(blocks: Vec<ComplexMatrix>, tol: f64) -> Result<Self> {
        let state = SiteState { blocks };
        state.check(tol)?;
        Ok(state)
    }

    /// No validation; for intermediate linear-algebra results.
    pub fn from_blocks_unchecked(blocks: Vec<ComplexMatrix>) -> Self {
        SiteState { blocks }
    }

    /// `rho` placed at `site`, zero elsewhere.
    pub fn concentrated(k: usize, site: usize, rho: &ComplexMatrix) -> Result<Self> {
        if site >= k {
            return Err(OqwError::IndexOutOfRange { index: site, len: k });
        }
        let n = rho.dim();
        let blocks = (0..k)
            .map(|i| if i == site { rho.clone() } else { ComplexMatrix::zeros(n) })
            .collect();
        SiteState::new(blocks, MODEL_TOL)
    }

    /// `(1/kn)[I, …, I]`.
    pub fn uniform(k: usize, n: usize) -> Self {
        let b = ComplexMatrix::identity(n).scale_real(1.0 / (k * n) as f64);
        SiteState { blocks: vec![b; k] }
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let n = self.blocks.first().map(|b| b.dim()).unwrap_or(0);
        for (i, b) in self.blocks.iter().enumerate() {
            if b.dim() != n {
                return Err(OqwError::DimensionMismatch { expected: n, found: b.dim() });
            }
            if !b.is_hermitian(tol) {
                return Err(OqwError::InvalidState(format!("block {i} is not Hermitian")));
            }
            let min = b.min_eigenvalue();
            if min < -tol {
                return Err(OqwError::InvalidState(format!(
                    "block {i} is not positive semidefinite (min eigenvalue {min:.3e})"
                )));
            }
        }
        let total = self.total_trace();
        if (total - 1.0).abs() > tol {
            return Err(OqwError::InvalidState(format!("total trace {total} differs from 1")));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.blocks.len()
    }

    pub fn degree(&self) -> usize {
        self.blocks.first().map(|b| b.dim()).unwrap_or(0)
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    pub fn total_trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// Probability of finding the walk at site `i`: `Tr(ρ_i)`.
    pub fn site_prob(&self, i: usize) -> Result<f64> {
        self.blocks
            .get(i)
            .map(|b| b.trace().re)
            .ok_or(OqwError::IndexOutOfRange { index: i, len: self.blocks.len() })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    /// `[vec(ρ_1); …; vec(ρ_k)]`.
    pub fn to_vector(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(vec).collect()
    }

    pub fn from_vector(v: &[C64], k: usize, n: usize) -> Result<Self> {
        let d = n * n;
        if v.len() != k * d {
            return Err(OqwError::DimensionMismatch { expected: k * d, found: v.len() });
        }
        let blocks = v.chunks(d).map(|c| unvec(c, n)).collect::<Result<Vec<_>>>()?;
        Ok(SiteState { blocks })
    }

    pub fn max_abs_diff(&self, other: &SiteState) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `k × k` grid of `n² × n²` superoperator blocks, stored as one `kn² × kn²` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator {
    k: usize,
    n: usize,
    mat: ComplexMatrix,
}

impl BlockOperator {
    pub fn from_matrix(k: usize, n: usize, mat: ComplexMatrix) -> Result<Self> {
        let expected = k * n * n;
        if mat.dim() != expected {
            return Err(OqwError::DimensionMismatch { expected, found: mat.dim() });
        }
        Ok(BlockOperator { k, n, mat })
    }

    pub fn identity(k: usize, n: usize) -> Self {
        BlockOperator { k, n, mat: ComplexMatrix::identity(k * n * n) }
    }

    pub fn zero(k: usize, n: usize) -> Self {
        BlockOperator { k, n, mat: ComplexMatrix::zeros(k * n * n) }
    }

    /// Block-diagonal operator with the given diagonal superoperators.
    pub fn diagonal(blocks: &[SuperOp]) -> Result<Self> {
        let k = blocks.len();
        let n = blocks.first().map(|b| b.degree()).unwrap_or(1);
        let mut out = BlockOperator::zero(k, n);
        for (i, b) in blocks.iter().enumerate() {
            out.set_block(i, i, b)?;
        }
        Ok(out)
    }

    pub fn sites(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    /// Side length `n²` of each block.
    pub fn block_dim(&self) -> usize {
        self.n * self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn block(&self, i: usize, j: usize) -> SuperOp {
        let d = self.block_dim();
        let m = ComplexMatrix::from_fn(d, |r, c| self.mat.get(i * d + r, j * d + c));
        SuperOp::new(self.n, m).expect("block has n² rows")
    }

    pub fn set_block(&mut self, i: usize, j: usize, s: &SuperOp) -> Result<()> {
        if s.degree() != self.n {
            return Err(OqwError::DimensionMismatch { expected: self.n, found: s.degree() });
        }
        if i >= self.k || j >= self.k {
            return Err(OqwError::IndexOutOfRange { index: i.max(j), len: self.k });
        }
        let d = self.block_dim();
        let mut m = self.mat.clone().into_dmatrix();
        m.view_mut((i * d, j * d), (d, d)).copy_from(s.matrix().as_dmatrix());
        self.mat = ComplexMatrix::from_dmatrix_unchecked(m);
        Ok(())
    }

    /// Copy with the whole block row `i` set to zero.
    pub fn with_zero_row(&self, i: usize) -> Self {
        let d = self.block_dim();
        let mut m = self.mat.clone().into_dmatrix();
        m.view_mut((i * d, 0), (d, self.k * d)).fill(ZERO);
        BlockOperator { k: self.k, n: self.n, mat: ComplexMatrix::from_dmatrix_unchecked(m) }
    }

    pub fn compose(&self, rhs: &BlockOperator) -> BlockOperator {
        BlockOperator { k: self.k, n: self.n, mat: &self.mat * &rhs.mat }
    }

    pub fn add(&self, rhs: &BlockOperator) -> BlockOperator {
        BlockOperator { k: self.k, n: self.n, mat: &self.mat + &rhs.mat }
    }

    pub fn sub(&self, rhs: &BlockOperator) -> BlockOperator {
        BlockOperator { k: self.k, n: self.n, mat: &self.mat - &rhs.mat }
    }

    pub fn scale(&self, s: f64) -> BlockOperator {
        BlockOperator { k: self.k, n: self.n, mat: self.mat.scale_real(s) }
    }

    pub fn pow(&self, r: usize) -> BlockOperator {
        BlockOperator { k: self.k, n: self.n, mat: self.mat.pow(r) }
    }

    pub fn inverse(&self) -> Result<BlockOperator> {
        Ok(BlockOperator { k: self.k, n: self.n, mat: self.mat.inverse()? })
    }

    pub fn max_abs_diff(&self, other: &BlockOperator) -> f64 {
        self.mat.max_abs_diff(&other.mat)
    }

    pub fn apply_vector(&self, v: &[C64]) -> Vec<C64> {
        self.mat.mul_vec(v)
    }

    /// Block `(i, j)` applied to `x` and traced: `Tr(Â_ij x)`.
    pub fn block_trace(&self, i: usize, j: usize, x: &ComplexMatrix) -> C64 {
        let d = self.block_dim();
        let vx = vec(x);
        let mut acc = ZERO;
        for a in 0..self.n {
            let r = i * d + a * self.n + a;
            for (c, xc) in vx.iter().enumerate() {
                acc += self.mat.get(r, j * d + c) * xc;
            }
        }
        acc
    }
}

/// Blockwise matrix representation: block `(i, j)` is `B_ij ⊗ B̄_ij`.
pub fn block_rep(model: &OqwModel) -> Result<BlockOperator> {
    model.ensure_valid(MODEL_TOL)?;
    let mut op = BlockOperator::zero(model.sites(), model.degree());
    for ((i, j), b) in model.effects() {
        op.set_block(i, j, &conj_map_rep(b))?;
    }
    Ok(op)
}

/// One step at vec level, re-Hermitizing each output block.
///
/// Errors if a block needed a Hermitian correction above `MODEL_TOL`.
pub fn step(op: &BlockOperator, s: &SiteState) -> Result<SiteState> {
    check_state_shape(op, s)?;
    let out = SiteState::from_vector(&op.apply_vector(&s.to_vector()), op.sites(), op.degree())?;
    rehermitize(out)
}

/// One step applied directly through the effects: `ρ'_i = Σ_j B_ij ρ_j B_ij*`.
pub fn kraus_step(model: &OqwModel, s: &SiteState) -> Result<SiteState> {
    if s.sites() != model.sites() || s.degree() != model.degree() {
        return Err(OqwError::DimensionMismatch { expected: model.sites(), found: s.sites() });
    }
    let n = model.degree();
    let mut blocks = vec![ComplexMatrix::zeros(n); model.sites()];
    for ((i, j), b) in model.effects() {
        let term = &(b * s.block(j)) * &b.adjoint();
        blocks[i] = &blocks[i] + &term;
    }
    rehermitize(SiteState { blocks })
}

pub fn evolve(op: &BlockOperator, s: &SiteState, r: usize) -> Result<SiteState> {
    let mut cur = s.clone();
    for _ in 0..r {
        cur = step(op, &cur)?;
    }
    Ok(cur)
}

/// Probability of being at site `j` after `r` steps from `ρ_i` at site `i`:
/// `Tr(unvec([Φ^r]_{ji} vec(ρ_i)))`.
pub fn site_prob_via_rep(op: &BlockOperator, i: usize, j: usize, rho_i: &ComplexMatrix, r: usize) -> Result<f64> {
    for idx in [i, j] {
        if idx >= op.sites() {
            return Err(OqwError::IndexOutOfRange { index: idx, len: op.sites() });
        }
    }
    if rho_i.dim() != op.degree() {
        return Err(OqwError::DimensionMismatch { expected: op.degree(), found: rho_i.dim() });
    }
    Ok(op.pow(r).block_trace(j, i, rho_i).re)
}

fn check_state_shape(op: &BlockOperator, s: &SiteState) -> Result<()> {
    if s.sites() != op.sites() {
        return Err(OqwError::DimensionMismatch { expected: op.sites(), found: s.sites() });
    }
    if s.degree() != op.degree() {
        return Err(OqwError::DimensionMismatch { expected: op.degree(), found: s.degree() });
    }
    Ok(())
}

fn rehermitize(s: SiteState) -> Result<SiteState> {
    let mut drift: f64 = 0.0;
    let blocks = s
        .blocks
        .into_iter()
        .map(|b| {
            let h = b.hermitian_part();
            drift = drift.max(h.max_abs_diff(&b));
            h
        })
        .collect();
    if drift > MODEL_TOL {
        return Err(OqwError::HermitianDrift(drift));
    }
    Ok(SiteState { blocks })
}

/// Random density `G G* / Tr(G G*)` with complex Gaussian `G`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let p = &g * &g.adjoint();
    let t = p.trace().re;
    p.scale_real(1.0 / t).hermitian_part()
}

/// Random block state with total trace 1.
pub fn random_site_state<R: Rng + ?Sized>(rng: &mut R, k: usize, n: usize) -> SiteState {
    let weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let blocks = weights
        .iter()
        .map(|w| random_density(rng, n).scale_real(w / total))
        .collect();
    SiteState { blocks }
}

// --- builders -------------------------------------------------------------

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Classical chain: `B_ij = √p_ij` with `n = 1`. `p` must be column-stochastic
/// (`p[i][j]` is the probability of `j → i`).
pub fn build_classical(p: &[Vec<f64>]) -> Result<OqwModel> {
    let k = p.len();
    if k == 0 || p.iter().any(|row| row.len() != k) {
        return Err(OqwError::NotStochastic("matrix must be square and nonempty".into()));
    }
    for (j, col_sum) in (0..k).map(|j| (j, (0..k).map(|i| p[i][j]).sum::<f64>())) {
        if (col_sum - 1.0).abs() > MODEL_TOL {
            return Err(OqwError::NotStochastic(format!("column {j} sums to {col_sum}")));
        }
    }
    let mut model = OqwModel::new(k, 1)?.with_label("classical");
    for (i, row) in p.iter().enumerate() {
        for (j, &pij) in row.iter().enumerate() {
            if pij < 0.0 || !pij.is_finite() {
                return Err(OqwError::NotStochastic(format!("entry ({i}, {j}) = {pij}")));
            }
            if pij > 0.0 {
                model.set_effect(i, j, ComplexMatrix::from_fn(1, |_, _| real(pij.sqrt())))?;
            }
        }
    }
    Ok(model)
}

fn check_coin(l: &ComplexMatrix, r: &ComplexMatrix) -> Result<()> {
    if l.dim() != r.dim() {
        return Err(OqwError::DimensionMismatch { expected: l.dim(), found: r.dim() });
    }
    let sum = &(&l.adjoint() * l) + &(&r.adjoint() * r);
    let residual = sum.max_abs_diff(&ComplexMatrix::identity(l.dim()));
    if residual > MODEL_TOL {
        return Err(OqwError::NotNormalized { sources: vec![], max_residual: residual });
    }
    Ok(())
}

/// Walk on the `N`-path: interior vertices step left with `L` and right with
/// `R`; both ends reflect with the identity effect.
pub fn build_npath(l: &ComplexMatrix, r: &ComplexMatrix, sites: usize) -> Result<OqwModel> {
    check_coin(l, r)?;
    if sites < 2 {
        return Err(OqwError::InvalidParameter(format!("path needs at least 2 vertices, got {sites}")));
    }
    let n = l.dim();
    let id = ComplexMatrix::identity(n);
    let mut model = OqwModel::new(sites, n)?.with_label(format!("{sites}-path"));
    model.set_effect(1, 0, id.clone())?;
    model.set_effect(sites - 2, sites - 1, id)?;
    for v in 1..sites - 1 {
        model.set_effect(v - 1, v, l.clone())?;
        model.set_effect(v + 1, v, r.clone())?;
    }
    model.ensure_valid(MODEL_TOL)?;
    Ok(model)
}

/// Two-node gate: `B₁₁ = √λ I`, `B₂₂ = √ω I`, `B₂₁ = √ω U`, `B₁₂ = √λ U*`.
pub fn build_gate(u: &ComplexMatrix, lambda: f64, omega: f64) -> Result<OqwModel> {
    if lambda < 0.0 || omega < 0.0 || (lambda + omega - 1.0).abs() > MODEL_TOL {
        return Err(OqwError::InvalidParameter(format!(
            "gate weights must be nonnegative with λ + ω = 1, got λ={lambda}, ω={omega}"
        )));
    }
    let n = u.dim();
    let unitarity = (&u.adjoint() * u).max_abs_diff(&ComplexMatrix::identity(n));
    if unitarity > MODEL_TOL {
        return Err(OqwError::InvalidParameter(format!("U is not unitary (residual {unitarity:.3e})")));
    }
    let id = ComplexMatrix::identity(n);
    let (sl, so) = (lambda.sqrt(), omega.sqrt());
    let mut model = OqwModel::new(2, n)?.with_label("gate");
    for (to, from, b) in [
        (0, 0, id.scale_real(sl)),
        (1, 1, id.scale_real(so)),
        (1, 0, u.scale_real(so)),
        (0, 1, u.adjoint().scale_real(sl)),
    ] {
        if !b.is_zero() {
            model.set_effect(to, from, b)?;
        }
    }
    model.ensure_valid(MODEL_TOL)?;
    Ok(model)
}

/// Three sites with block layout `[0 R L; L 0 R; R L 0]`.
pub fn build_cycle3(l: &ComplexMatrix, r: &ComplexMatrix) -> Result<OqwModel> {
    check_coin(l, r)?;
    let mut model = OqwModel::new(3, l.dim())?.with_label("cycle3");
    for (to, from, b) in [(0, 1, r), (0, 2, l), (1, 0, l), (1, 2, r), (2, 0, r), (2, 1, l)] {
        model.set_effect(to, from, b.clone())?;
    }
    model.ensure_valid(MODEL_TOL)?;
    Ok(model)
}

/// Two sites driven by a diagonal `A` and an antidiagonal `B`:
/// `B₁₁ = B₂₂ = A`, `B₁₂ = B₂₁ = B`.
pub fn build_pq_two_site(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<OqwModel> {
    check_coin(a, b)?;
    let mut model = OqwModel::new(2, a.dim())?.with_label("pq");
    model.set_effect(0, 0, a.clone())?;
    model.set_effect(1, 1, a.clone())?;
    model.set_effect(0, 1, b.clone())?;
    model.set_effect(1, 0, b.clone())?;
    Ok(model)
}

/// The fixed two-site, order-2 walk with `B₁₁ = I/2`, `B₁₂ = (√3/2) I`,
/// `B₂₁ = (√3/2) σx`, `B₂₂ = (i/2)[[0, −1], [1, 0]]`.
pub fn build_two_site() -> OqwModel {
    let h = 3f64.sqrt() / 2.0;
    let i = C64::new(0.0, 1.0);
    let b11 = ComplexMatrix::identity(2).scale_real(0.5);
    let b12 = ComplexMatrix::identity(2).scale_real(h);
    let b21 = ComplexMatrix::from_fn(2, |r, c| if r != c { real(h) } else { ZERO });
    let b22 = ComplexMatrix::from_fn(2, |r, c| match (r, c) {
        (0, 1) => -i * 0.5,
        (1, 0) => i * 0.5,
        _ => ZERO,
    });
    OqwModel::new(2, 2)
        .and_then(|m| m.with_effect(0, 0, b11))
        .and_then(|m| m.with_effect(0, 1, b12))
        .and_then(|m| m.with_effect(1, 0, b21))
        .and_then(|m| m.with_effect(1, 1, b22))
        .expect("fixed example is well formed")
        .with_label("two-site")
}

/// Coin pairs used by the path and cycle experiments.
pub mod coins {
    use super::*;

    /// Hadamard matrix split into its rows: `L = [[1, 1], [0, 0]]/√2`, `R = [[0, 0], [1, −1]]/√2`.
    pub fn hadamard_split() -> (ComplexMatrix, ComplexMatrix) {
        general(1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt())
    }

    /// `L = [[x, y], [0, 0]]`, `R = [[0, 0], [z, w]]`.
    pub fn general(x: f64, y: f64, z: f64, w: f64) -> (ComplexMatrix, ComplexMatrix) {
        general_complex(real(x), real(y), real(z), real(w))
    }

    pub fn general_complex(x: C64, y: C64, z: C64, w: C64) -> (ComplexMatrix, ComplexMatrix) {
        let l = ComplexMatrix::from_fn(2, |r, c| match (r, c) {
            (0, 0) => x,
            (0, 1) => y,
            _ => ZERO,
        });
        let rr = ComplexMatrix::from_fn(2, |r, c| match (r, c) {
            (1, 0) => z,
            (1, 1) => w,
            _ => ZERO,
        });
        (l, rr)
    }

    /// `L = R = I/√2` in degree `n`: the fair classical coin.
    pub fn classical(n: usize) -> (ComplexMatrix, ComplexMatrix) {
        let c = ComplexMatrix::identity(n).scale_real(1.0 / 2f64.sqrt());
        (c.clone(), c)
    }

    /// `L = [[1, 1], [0, 1]]/√3`, `R = [[1, 0], [−1, 1]]/√3`.
    pub fn cycle_example() -> (ComplexMatrix, ComplexMatrix) {
        let s = 1.0 / 3f64.sqrt();
        let l = ComplexMatrix::from_fn(2, |r, c| if r == 1 && c == 0 { ZERO } else { real(s) });
        let rr = ComplexMatrix::from_fn(2, |r, c| match (r, c) {
            (0, 1) => ZERO,
            (1, 0) => real(-s),
            _ => real(s),
        });
        (l, rr)
    }

    pub fn is_normalized(l: &ComplexMatrix, r: &ComplexMatrix) -> bool {
        check_coin(l, r).is_ok()
    }
}
