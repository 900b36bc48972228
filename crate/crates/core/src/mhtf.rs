//! Mean hitting time formula checks and target times for ergodic walks.
//!
//! With `K̂` holding `k̂_ij` off the diagonal and first-return operators on
//! it, `D̂ = diag(k̂_ii)`, `N̂ = K̂ − D̂` and `L̂ = K̂ − N̂Φ̂`. For walks in the
//! ergodic class the functionals satisfy
//!
//! ```text
//! Tr(N̂_ij ρ) = Tr([(D̂Ẑ)_ii − (D̂Ẑ)_ij] ρ)
//! ```
//!
//! Every check here compares trace functionals, which are linear in `ρ`, so
//! running them over [`hermitian_basis`] certifies them for all densities.

use serde::Serialize;

use crate::ergodic::{ensure_ergodic, fundamental_unchecked};
use crate::error::{OqwError, Result};
use crate::exec::{par_map, Execution};
use crate::hitting::{all_bundles, HittingBundle};
use crate::model::BlockOperator;
use crate::tensor::{bloch_density, hermitian_basis, vec, ComplexMatrix, SuperOp, C64};

/// Operators entering the formula, all for one walk.
#[derive(Clone, Debug)]
pub struct MhtfOperators {
    pub phi: BlockOperator,
    pub z: BlockOperator,
    /// Off-diagonal `k̂_ij`, diagonal first-return `k̂_ii`.
    pub k: BlockOperator,
    pub d: BlockOperator,
    pub n_hat: BlockOperator,
    pub l: BlockOperator,
    pub dz: BlockOperator,
    pub lz: BlockOperator,
    pub bundles: Vec<HittingBundle>,
}

impl MhtfOperators {
    pub fn sites(&self) -> usize {
        self.phi.sites()
    }

    pub fn degree(&self) -> usize {
        self.phi.degree()
    }

    /// `Tr(N̂_ij ρ)`.
    pub fn mht(&self, i: usize, j: usize, rho: &ComplexMatrix) -> C64 {
        self.n_hat.block_trace(i, j, rho)
    }

    /// Right side of the formula, `Tr([(D̂Ẑ)_ii − (D̂Ẑ)_ij] ρ)`.
    pub fn formula(&self, i: usize, j: usize, rho: &ComplexMatrix) -> C64 {
        self.dz.block_trace(i, i, rho) - self.dz.block_trace(i, j, rho)
    }
}

/// Builds `Ẑ, K̂, D̂, N̂, L̂` and the products `D̂Ẑ`, `L̂Ẑ`; refuses non-ergodic walks.
pub fn assemble(phi: &BlockOperator, tol: f64, exec: Execution) -> Result<MhtfOperators> {
    ensure_ergodic(phi, tol)?;
    let k_sites = phi.sites();
    let n = phi.degree();
    let z = fundamental_unchecked(phi)?;
    let bundles = all_bundles(phi, exec)?;

    let mut k = BlockOperator::zero(k_sites, n);
    let mut diag = Vec::with_capacity(k_sites);
    for b in &bundles {
        let i = b.target;
        for j in 0..k_sites {
            if j == i {
                k.set_block(i, i, &b.k_return)?;
            } else {
                k.set_block(i, j, &b.k_row[j])?;
            }
        }
        diag.push(b.k_return.clone());
    }
    let d = BlockOperator::diagonal(&diag)?;
    let n_hat = k.sub(&d);
    let l = k.sub(&n_hat.compose(phi));
    let dz = d.compose(&z);
    let lz = l.compose(&z);
    Ok(MhtfOperators { phi: phi.clone(), z, k, d, n_hat, l, dz, lz, bundles })
}

/// The Hermitian basis of `M_n(ℂ)` followed by any extra densities.
pub fn probe_set(n: usize, extra: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let mut probes = hermitian_basis(n);
    probes.extend(extra.iter().cloned());
    probes
}

fn max_over_probes(
    ops: &MhtfOperators,
    probes: &[ComplexMatrix],
    f: impl Fn(usize, usize, &ComplexMatrix) -> f64,
) -> f64 {
    let k = ops.sites();
    let mut worst = 0.0f64;
    for rho in probes {
        for i in 0..k {
            for j in 0..k {
                worst = worst.max(f(i, j, rho));
            }
        }
    }
    worst
}

/// Residual of the mean hitting time formula over all `(i, j)` and probes.
pub fn mean_time_formula_residual(ops: &MhtfOperators, probes: &[ComplexMatrix]) -> f64 {
    max_over_probes(ops, probes, |i, j, rho| (ops.mht(i, j, rho) - ops.formula(i, j, rho)).norm())
}

/// Residual of `Tr(L̂_ij ρ) = Tr(ρ)`.
pub fn trace_preservation_residual(ops: &MhtfOperators, probes: &[ComplexMatrix]) -> f64 {
    max_over_probes(ops, probes, |i, j, rho| (ops.l.block_trace(i, j, rho) - rho.trace()).norm())
}

/// Residuals of the decomposition
/// `N̂_ij = (D̂Ẑ)_ii − (D̂Ẑ)_ij + [(L̂Ẑ)_ij − (L̂Ẑ)_ii]` and of `Tr((L̂Ẑ)_ij ρ) = Tr(ρ)`.
pub fn decomposition_residuals(ops: &MhtfOperators, probes: &[ComplexMatrix]) -> (f64, f64) {
    let full = max_over_probes(ops, probes, |i, j, rho| {
        let bracket = ops.lz.block_trace(i, j, rho) - ops.lz.block_trace(i, i, rho);
        (ops.mht(i, j, rho) - ops.formula(i, j, rho) - bracket).norm()
    });
    let cancel = max_over_probes(ops, probes, |i, j, rho| {
        (ops.lz.block_trace(i, j, rho) - rho.trace()).norm()
    });
    (full, cancel)
}

/// Whether `Tr(k̂_ii η) = c Tr(η)` for one `c` shared by all sites, and `D̂` is invertible.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantTrace {
    pub applicable: bool,
    /// `c_i` read off each first-return functional.
    pub per_site: Vec<f64>,
    pub c: Option<f64>,
    /// Largest distance of a first-return functional from `c_i · vec(I)ᵀ`.
    pub functional_residual: f64,
    pub d_invertible: bool,
    pub diagnostic: Option<String>,
}

pub fn constant_trace(ops: &MhtfOperators, tol: f64) -> ConstantTrace {
    let n = ops.degree();
    let id = vec(&ComplexMatrix::identity(n));
    let mut per_site = Vec::new();
    let mut functional_residual = 0.0f64;
    let mut imaginary = 0.0f64;
    for b in &ops.bundles {
        let row = b.k_return.trace_row();
        let ci: C64 = row.iter().zip(&id).map(|(a, u)| a * u).sum::<C64>() / n as f64;
        for (a, u) in row.iter().zip(&id) {
            functional_residual = functional_residual.max((a - ci * u).norm());
        }
        imaginary = imaginary.max(ci.im.abs());
        per_site.push(ci.re);
    }
    let spread = per_site
        .iter()
        .map(|c| (c - per_site[0]).abs())
        .fold(0.0, f64::max);

    let sv = ops.d.matrix().singular_values();
    let smallest = sv.last().copied().unwrap_or(0.0);
    let d_invertible = smallest > tol * sv.first().copied().unwrap_or(1.0).max(1.0);

    let diagnostic = if functional_residual > tol || imaginary > tol {
        Some(format!("first-return functional is not a multiple of the trace (residual {functional_residual:.3e})"))
    } else if spread > tol {
        Some(format!("return constants differ across sites (spread {spread:.3e})"))
    } else if !d_invertible {
        Some(format!("D̂ is singular (smallest singular value {smallest:.3e})"))
    } else {
        None
    };
    let applicable = diagnostic.is_none();
    ConstantTrace {
        applicable,
        c: applicable.then(|| per_site[0]),
        per_site,
        functional_residual,
        d_invertible,
        diagnostic,
    }
}

/// `D̂⁻¹N̂`, available once [`constant_trace`] passes.
pub fn scaled_times(ops: &MhtfOperators) -> Result<BlockOperator> {
    Ok(ops.d.inverse()?.compose(&ops.n_hat))
}

/// Residual of `Tr((D̂⁻¹N̂)_ij ρ) = Tr([Ẑ_ii − Ẑ_ij] ρ)`.
pub fn scaled_identity_residual(ops: &MhtfOperators, dinv_n: &BlockOperator, probes: &[ComplexMatrix]) -> f64 {
    max_over_probes(ops, probes, |i, j, rho| {
        let lhs = dinv_n.block_trace(i, j, rho);
        let rhs = ops.z.block_trace(i, i, rho) - ops.z.block_trace(i, j, rho);
        (lhs - rhs).norm()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MhtfReport {
    pub fundamental_formula_residual: f64,
    pub constant_trace_applicable: bool,
    pub c_value: Option<f64>,
    pub scaled_formula_residual: Option<f64>,
    pub constant_trace_diagnostic: Option<String>,
    pub trace_preservation_residual: f64,
    pub decomposition_residual: f64,
    pub bracket_cancellation_residual: f64,
    pub probes: usize,
}

impl MhtfReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.fundamental_formula_residual <= tol
            && self.trace_preservation_residual <= tol
            && self.decomposition_residual <= tol
            && self.bracket_cancellation_residual <= tol
            && self.scaled_formula_residual.is_none_or(|r| r <= tol)
    }
}

/// Runs every formula check over the Hermitian basis plus `densities`.
pub fn check_all(ops: &MhtfOperators, densities: &[ComplexMatrix], tol: f64) -> Result<MhtfReport> {
    let probes = probe_set(ops.degree(), densities);
    let ct = constant_trace(ops, tol);
    let scaled_formula_residual = if ct.applicable {
        Some(scaled_identity_residual(ops, &scaled_times(ops)?, &probes))
    } else {
        None
    };
    let (decomposition_residual, bracket_cancellation_residual) = decomposition_residuals(ops, &probes);
    Ok(MhtfReport {
        fundamental_formula_residual: mean_time_formula_residual(ops, &probes),
        constant_trace_applicable: ct.applicable,
        c_value: ct.c,
        scaled_formula_residual,
        constant_trace_diagnostic: ct.diagnostic,
        trace_preservation_residual: trace_preservation_residual(ops, &probes),
        decomposition_residual,
        bracket_cancellation_residual,
        probes: probes.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetTime {
    pub start: usize,
    /// `Σ_i Tr((D̂⁻¹N̂)_ij ρ)`.
    pub value: f64,
    /// `Σ_i Tr(Ẑ_ii ρ) − Tr ρ`.
    pub via_fundamental: f64,
    /// `Tr(Ẑ_ii ρ)` per site.
    pub diagonal_traces: Vec<f64>,
    /// The first sum for every start site.
    pub per_start: Vec<f64>,
    /// `max − min` of `per_start`.
    pub start_spread: f64,
    /// `|value − via_fundamental|`.
    pub formula_gap: f64,
    pub c: f64,
}

/// Target time from start site `j`; refused unless the constant-trace hypotheses hold.
pub fn target_time(ops: &MhtfOperators, rho: &ComplexMatrix, j: usize, tol: f64) -> Result<TargetTime> {
    let k = ops.sites();
    if j >= k {
        return Err(OqwError::IndexOutOfRange { index: j, len: k });
    }
    let ct = constant_trace(ops, tol);
    if !ct.applicable {
        return Err(OqwError::HypothesisFailed(ct.diagnostic.unwrap_or_default()));
    }
    let dinv_n = scaled_times(ops)?;
    Ok(target_time_with(ops, &dinv_n, rho, j, ct.c.unwrap_or(f64::NAN)))
}

fn target_time_with(ops: &MhtfOperators, dinv_n: &BlockOperator, rho: &ComplexMatrix, j: usize, c: f64) -> TargetTime {
    let k = ops.sites();
    let per_start: Vec<f64> = (0..k)
        .map(|s| (0..k).map(|i| dinv_n.block_trace(i, s, rho).re).sum())
        .collect();
    let diagonal_traces: Vec<f64> = (0..k).map(|i| ops.z.block_trace(i, i, rho).re).collect();
    let via_fundamental = diagonal_traces.iter().sum::<f64>() - rho.trace().re;
    let lo = per_start.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_start.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let value = per_start[j];
    TargetTime {
        start: j,
        value,
        via_fundamental,
        diagonal_traces,
        start_spread: hi - lo,
        formula_gap: (value - via_fundamental).abs(),
        per_start,
        c,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetSweep {
    pub points: usize,
    pub min: f64,
    pub max: f64,
    /// Bloch vector achieving the minimum and maximum.
    pub argmin: [f64; 3],
    pub argmax: [f64; 3],
}

/// `t_⊙` over a cubic grid of Bloch vectors inside the unit ball (order-2 walks only).
pub fn target_time_sweep(ops: &MhtfOperators, j: usize, per_axis: usize, tol: f64, exec: Execution) -> Result<TargetSweep> {
    if ops.degree() != 2 {
        return Err(OqwError::InvalidParameter("Bloch sweep needs degree 2".into()));
    }
    if per_axis < 2 {
        return Err(OqwError::InvalidParameter("sweep needs at least 2 points per axis".into()));
    }
    let ct = constant_trace(ops, tol);
    if !ct.applicable {
        return Err(OqwError::HypothesisFailed(ct.diagnostic.unwrap_or_default()));
    }
    let dinv_n = scaled_times(ops)?;
    let axis: Vec<f64> = (0..per_axis)
        .map(|t| -1.0 + 2.0 * t as f64 / (per_axis - 1) as f64)
        .collect();
    let mut grid = Vec::new();
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                if a * a + b * b + c * c <= 1.0 + 1e-12 {
                    grid.push([a, b, c]);
                }
            }
        }
    }
    let values = par_map(exec, grid.clone(), |x| {
        let rho = bloch_density(x[0], x[1], x[2]);
        target_time_with(ops, &dinv_n, &rho, j, 0.0).value
    });
    let mut out = TargetSweep {
        points: grid.len(),
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        argmin: [0.0; 3],
        argmax: [0.0; 3],
    };
    for (x, v) in grid.iter().zip(values) {
        if v < out.min {
            out.min = v;
            out.argmin = *x;
        }
        if v > out.max {
            out.max = v;
            out.argmax = *x;
        }
    }
    Ok(out)
}

/// `Tr(S ρ)` for a superoperator, as a real number.
pub fn functional(s: &SuperOp, rho: &ComplexMatrix) -> f64 {
    s.trace_of(rho).re
}
