//! Hitting probabilities and mean hitting times through taboo resolvents.
//!
//! For a target site `i`, the taboo operator `Q_i` is the block operator with
//! block row `i` set to zero. `(Q_i^m)_{lj}` sums the conjugation maps of all
//! length-`m` paths from `j` to `l` that never land on `i`, so
//!
//! ```text
//! ĥ_ij = [Φ̂ (Î − Q_i)⁻¹]_ij          k̂_ij = [Φ̂ (Î − Q_i)⁻²]_ij
//! ```
//!
//! whenever the spectral radius of `Q_i` is below one. Functionals are read as
//! `Tr(ŝ ρ) = ⟨vec(I), [ŝ] vec(ρ)⟩`.

use serde::Serialize;

use crate::error::{OqwError, Result};
use crate::exec::{par_map, Execution};
use crate::model::BlockOperator;
use crate::tensor::{vec, ComplexMatrix, SuperOp, ZERO};

/// Spectral radius margin below one required of a taboo operator.
pub const ABSORBING_MARGIN: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct TabooOperator {
    pub taboo_site: usize,
    pub q: BlockOperator,
    pub spectral_radius: f64,
}

pub fn taboo(op: &BlockOperator, i: usize) -> Result<TabooOperator> {
    let t = taboo_unchecked(op, i)?;
    if t.spectral_radius >= 1.0 - ABSORBING_MARGIN {
        return Err(OqwError::NonAbsorbing { site: i, radius: t.spectral_radius });
    }
    Ok(t)
}

fn taboo_unchecked(op: &BlockOperator, i: usize) -> Result<TabooOperator> {
    if i >= op.sites() {
        return Err(OqwError::IndexOutOfRange { index: i, len: op.sites() });
    }
    let q = op.with_zero_row(i);
    let spectral_radius = q.matrix().spectral_radius()?;
    Ok(TabooOperator { taboo_site: i, q, spectral_radius })
}

/// `b_r(ρ_j; i)` for `r = 0..=r_max`.
pub fn first_visit_dist(op: &BlockOperator, i: usize, j: usize, rho_j: &ComplexMatrix, r_max: usize) -> Result<Vec<f64>> {
    let k = op.sites();
    let n = op.degree();
    for idx in [i, j] {
        if idx >= k {
            return Err(OqwError::IndexOutOfRange { index: idx, len: k });
        }
    }
    if rho_j.dim() != n {
        return Err(OqwError::DimensionMismatch { expected: n, found: rho_j.dim() });
    }
    let mut out = vec![0.0; r_max + 1];
    if i == j {
        out[0] = 1.0;
        return Ok(out);
    }
    let d = n * n;
    let q = op.with_zero_row(i);
    let mut v = vec![ZERO; k * d];
    v[j * d..(j + 1) * d].copy_from_slice(&vec(rho_j));
    for slot in out.iter_mut().skip(1) {
        let w = op.apply_vector(&v);
        *slot = (0..n).map(|a| w[i * d + a * n + a].re).sum();
        v = q.apply_vector(&v);
    }
    Ok(out)
}

/// Row `i` of `Ĥ` and `K̂` plus the first-return operator `k̂_ii`.
#[derive(Clone, Debug)]
pub struct HittingBundle {
    pub target: usize,
    /// `ĥ_ij`; `ĥ_ii` is the identity map.
    pub h_row: Vec<SuperOp>,
    /// `k̂_ij` for `j ≠ i`; the entry at `i` is the zero map.
    pub k_row: Vec<SuperOp>,
    /// First-return operator `k̂_ii`.
    pub k_return: SuperOp,
    pub taboo_radius: f64,
}

impl HittingBundle {
    /// `h_ij(ρ) = Tr(ĥ_ij ρ)`.
    pub fn hit_value(&self, j: usize, rho: &ComplexMatrix) -> f64 {
        self.h_row[j].trace_of(rho).re
    }

    /// `k_ij(ρ) = Tr(k̂_ij ρ)`, and `0` for `j = i`.
    pub fn mht_value(&self, j: usize, rho: &ComplexMatrix) -> f64 {
        if j == self.target {
            0.0
        } else {
            self.k_row[j].trace_of(rho).re
        }
    }

    /// Mean return time `Tr(k̂_ii ρ)`.
    pub fn return_value(&self, rho: &ComplexMatrix) -> f64 {
        self.k_return.trace_of(rho).re
    }

    pub fn sites(&self) -> usize {
        self.h_row.len()
    }
}

pub fn hitting_bundle(op: &BlockOperator, i: usize) -> Result<HittingBundle> {
    let t = taboo(op, i)?;
    let id = BlockOperator::identity(op.sites(), op.degree());
    let resolvent = id.sub(&t.q).inverse()?;
    let h = op.compose(&resolvent);
    let kk = h.compose(&resolvent);
    Ok(assemble_bundle(op, i, &h, &kk, t.spectral_radius))
}

fn assemble_bundle(op: &BlockOperator, i: usize, h: &BlockOperator, kk: &BlockOperator, radius: f64) -> HittingBundle {
    let k = op.sites();
    let n = op.degree();
    let h_row: Vec<SuperOp> = (0..k)
        .map(|j| if j == i { SuperOp::identity(n) } else { h.block(i, j) })
        .collect();
    let k_row: Vec<SuperOp> = (0..k)
        .map(|j| if j == i { SuperOp::zero(n) } else { kk.block(i, j) })
        .collect();
    let mut k_return = op.block(i, i);
    for l in (0..k).filter(|&l| l != i) {
        let first_step = op.block(l, i);
        k_return = k_return.add(&h_row[l].add(&k_row[l]).compose(&first_step));
    }
    HittingBundle { target: i, h_row, k_row, k_return, taboo_radius: radius }
}

/// Bundles for every target site.
pub fn all_bundles(op: &BlockOperator, exec: Execution) -> Result<Vec<HittingBundle>> {
    par_map(exec, (0..op.sites()).collect(), |i| hitting_bundle(op, i))
        .into_iter()
        .collect()
}

/// Hard cap on series terms for [`series_bundle`].
pub const SERIES_TERM_CAP: usize = 200_000;

/// Same bundle from the truncated path-sum series `Σ_r r Φ̂ Q^{r−1}`.
///
/// Stops when a geometric tail estimate with ratio `max(ρ(Q), ½)`-style
/// buffering falls below `tol`.
pub fn series_bundle(op: &BlockOperator, i: usize, tol: f64) -> Result<HittingBundle> {
    let t = taboo(op, i)?;
    let q_ratio = t.spectral_radius.sqrt().max(t.spectral_radius);
    let mut h = BlockOperator::zero(op.sites(), op.degree());
    let mut kk = h.clone();
    let mut term = op.clone();
    for r in 1..=SERIES_TERM_CAP {
        h = h.add(&term);
        kk = kk.add(&term.scale(r as f64));
        term = term.compose(&t.q);
        let size = term.matrix().max_abs();
        if size == 0.0 {
            return Ok(assemble_bundle(op, i, &h, &kk, t.spectral_radius));
        }
        let m = r as f64;
        let tail = if q_ratio < 1.0 {
            size * ((m + 1.0) / (1.0 - q_ratio) + q_ratio / (1.0 - q_ratio).powi(2))
        } else {
            f64::INFINITY
        };
        if tail < tol {
            return Ok(assemble_bundle(op, i, &h, &kk, t.spectral_radius));
        }
    }
    Err(OqwError::NoConvergence { iterations: SERIES_TERM_CAP })
}

/// Summary of one target row, used for reports.
#[derive(Clone, Debug, Serialize)]
pub struct HittingSummary {
    pub target: usize,
    pub start: usize,
    pub hitting_probability: f64,
    pub mean_hitting_time: f64,
    pub taboo_radius: f64,
}

impl HittingBundle {
    pub fn summary(&self, start: usize, rho: &ComplexMatrix) -> HittingSummary {
        HittingSummary {
            target: self.target,
            start,
            hitting_probability: self.hit_value(start, rho),
            mean_hitting_time: self.mht_value(start, rho),
            taboo_radius: self.taboo_radius,
        }
    }
}
