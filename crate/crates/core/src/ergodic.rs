//! Membership in the ergodic class and the fundamental matrix.
//!
//! A walk is ergodic here when the powers of its block operator converge to
//! `Ω̂`, the rank-one projector `(1/kn) u uᵀ` with `u = [vec(I); …; vec(I)]`.
//! That is decided spectrally: exactly one eigenvalue on the unit circle,
//! equal to 1 with a one-dimensional eigenspace, and `Φ̂ u = u`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{OqwError, Result};
use crate::model::BlockOperator;
use crate::tensor::{ComplexMatrix, C64, ONE, ZERO};

/// Stacked identities `u = [vec(I_n); …; vec(I_n)]` of length `kn²`.
pub fn stacked_identity(k: usize, n: usize) -> Vec<C64> {
    let mut u = vec![ZERO; k * n * n];
    for site in 0..k {
        for a in 0..n {
            u[site * n * n + a * n + a] = ONE;
        }
    }
    u
}

/// `Ω̂`: every block equals `(1/kn) Σ_ab E_ab ⊗ E_ab`.
pub fn omega(k: usize, n: usize) -> BlockOperator {
    let u = stacked_identity(k, n);
    let s = 1.0 / (k * n) as f64;
    let m = ComplexMatrix::from_fn(k * n * n, |r, c| u[r] * u[c] * s);
    BlockOperator::from_matrix(k, n, m).expect("Ω̂ has kn² rows")
}

#[derive(Clone, Debug, Serialize)]
pub struct ErgodicityReport {
    pub is_ergodic: bool,
    /// Sorted by modulus, largest first.
    #[serde(serialize_with = "serialize_complex_list")]
    pub eigenvalues: Vec<C64>,
    /// `1 − |λ₂|`.
    pub spectral_gap: f64,
    /// `‖Φ̂u − u‖_max`.
    pub fixed_point_residual: f64,
    /// Eigenvalues within tolerance of the unit circle.
    pub peripheral_count: usize,
    /// Dimension of the eigenspace of 1.
    pub fixed_space_dim: usize,
    pub diagnostic: Option<String>,
}

fn serialize_complex_list<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

pub fn classify(op: &BlockOperator, tol: f64) -> Result<ErgodicityReport> {
    let mut eigenvalues = op.matrix().eigenvalues()?;
    eigenvalues.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let spectral_gap = 1.0 - eigenvalues.get(1).map(|z| z.norm()).unwrap_or(0.0);

    let peripheral: Vec<C64> = eigenvalues
        .iter()
        .copied()
        .filter(|z| (z.norm() - 1.0).abs() <= tol)
        .collect();

    let u = stacked_identity(op.sites(), op.degree());
    let fixed_point_residual = op
        .apply_vector(&u)
        .iter()
        .zip(&u)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    // Nullity of Φ̂ − Î from the singular values, relative to the largest.
    let dim = op.matrix().dim();
    let shifted = op.matrix().as_dmatrix() - DMatrix::<C64>::identity(dim, dim);
    let sv = ComplexMatrix::from_dmatrix(shifted)?.singular_values();
    let scale = sv.first().copied().unwrap_or(1.0).max(1.0);
    let fixed_space_dim = sv.iter().filter(|s| **s <= tol.sqrt() * scale).count();

    let mut diagnostic = None;
    if peripheral.len() != 1 {
        diagnostic = Some(format!("{} eigenvalues on the unit circle", peripheral.len()));
    } else if (peripheral[0] - ONE).norm() > tol {
        diagnostic = Some(format!("peripheral eigenvalue {} is not 1", peripheral[0]));
    } else if fixed_space_dim != 1 {
        diagnostic = Some(format!("eigenspace of 1 has dimension {fixed_space_dim}"));
    } else if fixed_point_residual > tol.sqrt() {
        diagnostic = Some(format!(
            "invariant state is not the uniform stack (residual {fixed_point_residual:.3e})"
        ));
    }

    Ok(ErgodicityReport {
        is_ergodic: diagnostic.is_none(),
        eigenvalues,
        spectral_gap,
        fixed_point_residual,
        peripheral_count: peripheral.len(),
        fixed_space_dim,
        diagnostic,
    })
}

pub(crate) fn ensure_ergodic(op: &BlockOperator, tol: f64) -> Result<()> {
    let report = classify(op, tol)?;
    if report.is_ergodic {
        Ok(())
    } else {
        Err(OqwError::NotErgodic(report.diagnostic.unwrap_or_default()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PowerConvergence {
    /// First `r` with `‖Φ̂ʳ − Ω̂‖_max ≤ tol`.
    pub converged_at: Option<usize>,
    /// `‖Φ̂ʳ − Ω̂‖_max` for `r = 1, 2, …`.
    pub residuals: Vec<f64>,
}

pub fn power_convergence(op: &BlockOperator, tol: f64, r_max: usize) -> PowerConvergence {
    let om = omega(op.sites(), op.degree());
    let mut power = op.clone();
    let mut residuals = Vec::new();
    for r in 1..=r_max {
        let res = power.max_abs_diff(&om);
        residuals.push(res);
        if res <= tol {
            return PowerConvergence { converged_at: Some(r), residuals };
        }
        power = power.compose(op);
    }
    PowerConvergence { converged_at: None, residuals }
}

/// `Ẑ = (Î − Φ̂ + Ω̂)⁻¹`, refused for walks outside the ergodic class.
pub fn fundamental(op: &BlockOperator, tol: f64) -> Result<BlockOperator> {
    ensure_ergodic(op, tol)?;
    fundamental_unchecked(op)
}

pub(crate) fn fundamental_unchecked(op: &BlockOperator) -> Result<BlockOperator> {
    let id = BlockOperator::identity(op.sites(), op.degree());
    let om = omega(op.sites(), op.degree());
    id.sub(op).add(&om).inverse()
}

/// `Î + Σ_{r=1}^{terms} (Φ̂ʳ − Ω̂)`, the truncated defining series of `Ẑ`.
pub fn fundamental_by_series(op: &BlockOperator, terms: usize) -> BlockOperator {
    let om = omega(op.sites(), op.degree());
    let mut acc = BlockOperator::identity(op.sites(), op.degree());
    let mut power = op.clone();
    for _ in 0..terms {
        acc = acc.add(&power.sub(&om));
        power = power.compose(op);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{block_rep, build_classical, build_two_site, build_gate, OqwModel, SiteState};
    use crate::model::step;

    #[test]
    fn omega_two_by_two_pattern() {
        let om = omega(2, 2);
        let pattern = [1., 0., 0., 1., 1., 0., 0., 1.];
        for r in 0..8 {
            for c in 0..8 {
                let expected = pattern[r] * pattern[c] / 4.0;
                assert_eq!(om.matrix().get(r, c), C64::new(expected, 0.0));
            }
        }
        assert!(om.compose(&om).max_abs_diff(&om) < 1e-15);
    }

    #[test]
    fn omega_sends_states_to_uniform() {
        let om = omega(3, 2);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let s = crate::model::random_site_state(&mut rng, 3, 2);
        let out = step(&om, &s).unwrap();
        assert!(out.max_abs_diff(&SiteState::uniform(3, 2)) < 1e-15);
    }

    #[test]
    fn two_site_is_ergodic() {
        let op = block_rep(&build_two_site()).unwrap();
        let rep = classify(&op, 1e-9).unwrap();
        assert!(rep.is_ergodic, "{:?}", rep.diagnostic);
        assert_eq!(rep.eigenvalues.len(), 8);
        // |λ₂| = √(5/8)
        assert!((rep.spectral_gap - (1.0 - (5.0f64 / 8.0).sqrt())).abs() < 1e-10);
    }

    #[test]
    fn gate_and_identity_are_not_ergodic() {
        let s = 1.0 / 2f64.sqrt();
        let u = ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]).unwrap();
        let gate = block_rep(&build_gate(&u, 0.4, 0.6).unwrap()).unwrap();
        let rep = classify(&gate, 1e-9).unwrap();
        assert!(!rep.is_ergodic);
        assert!(rep.fixed_space_dim > 1);

        let id = OqwModel::new(2, 2)
            .unwrap()
            .with_effect(0, 0, ComplexMatrix::identity(2))
            .unwrap()
            .with_effect(1, 1, ComplexMatrix::identity(2))
            .unwrap();
        let id_op = block_rep(&id).unwrap();
        assert!(!classify(&id_op, 1e-9).unwrap().is_ergodic);
        assert!(matches!(fundamental(&id_op, 1e-9), Err(OqwError::NotErgodic(_))));
        assert!(power_convergence(&id_op, 1e-8, 50).converged_at.is_none());
    }

    #[test]
    fn classical_chain_with_non_uniform_stationary_law_is_outside_the_class() {
        let p = vec![vec![0.9, 0.3], vec![0.1, 0.7]];
        let op = block_rep(&build_classical(&p).unwrap()).unwrap();
        let rep = classify(&op, 1e-9).unwrap();
        assert!(!rep.is_ergodic);
        assert!(rep.diagnostic.unwrap().contains("uniform"));
    }

    #[test]
    fn omega_converges_immediately_and_has_trivial_fundamental() {
        let om = omega(2, 2);
        assert_eq!(power_convergence(&om, 1e-12, 10).converged_at, Some(1));
        let z = fundamental_unchecked(&om).unwrap();
        assert!(z.max_abs_diff(&BlockOperator::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn fundamental_inverts() {
        let op = block_rep(&build_two_site()).unwrap();
        let z = fundamental(&op, 1e-9).unwrap();
        let id = BlockOperator::identity(2, 2);
        let m = id.sub(&op).add(&omega(2, 2));
        assert!(z.compose(&m).max_abs_diff(&id) < 1e-10);
    }
}
