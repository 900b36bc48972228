//! Minimal polynomial of a block operator and the finite hitting-time formula.
//!
//! When every entry of `[Φ]` is recognized as a Gaussian rational the
//! minimal polynomial is the first exact linear dependence among
//! `vec(I), vec(M), vec(M²), …`. Otherwise a singular-value rank test on the
//! same power sequence is used.

use log::info;
use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::ergodic::stacked_identity;
use crate::error::{OqwError, Result};
use crate::mhtf::MhtfOperators;
use crate::model::BlockOperator;
use crate::rational::{q_to_f64, ExactMatrix, GaussQ, RationalPolynomial, MAX_DENOMINATOR, Q, RECOGNITION_TOL};
use crate::tensor::{ComplexMatrix, C64, ZERO};

/// Relative singular-value threshold of the floating backend.
pub const FLOAT_RANK_TOL: f64 = 1e-9;
/// Largest `|p(1)|` accepted as a root by the floating backend.
pub const FLOAT_ROOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Floating,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Polynomial {
    Exact(RationalPolynomial),
    /// Monic, highest degree first.
    Floating(Vec<f64>),
}

impl Polynomial {
    pub fn degree(&self) -> usize {
        match self {
            Polynomial::Exact(p) => p.degree(),
            Polynomial::Floating(c) => c.len() - 1,
        }
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        match self {
            Polynomial::Exact(p) => p.coeffs_f64(),
            Polynomial::Floating(c) => c.clone(),
        }
    }

    pub fn exact(&self) -> Option<&RationalPolynomial> {
        match self {
            Polynomial::Exact(p) => Some(p),
            Polynomial::Floating(_) => None,
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs_f64().iter().fold(0.0, |acc, c| acc * x + c)
    }

    /// `Σ_l c_l M^{r−l}` by Horner's rule.
    pub fn eval_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(m.dim());
        for c in self.coeffs_f64() {
            acc = &(&acc * m) + &ComplexMatrix::identity(m.dim()).scale_real(c);
        }
        acc
    }

    /// `f` with `p(x) = (x − 1) f(x)`; errors when 1 is not a root.
    pub fn factor_root1(&self) -> Result<Polynomial> {
        match self {
            Polynomial::Exact(p) => {
                let (f, rem) = p.divide_linear(&Q::one());
                if !rem.is_zero() {
                    return Err(OqwError::NotErgodic(format!("1 is not a root of the minimal polynomial (p(1) = {rem})")));
                }
                Ok(Polynomial::Exact(f.unwrap_or_else(RationalPolynomial::one)))
            }
            Polynomial::Floating(c) => {
                let mut acc = 0.0;
                let mut quotient = Vec::with_capacity(c.len());
                for a in c {
                    acc += a;
                    quotient.push(acc);
                }
                let rem = quotient.pop().unwrap_or(0.0);
                if rem.abs() > FLOAT_ROOT_TOL {
                    return Err(OqwError::NotErgodic(format!("1 is not a root of the minimal polynomial (p(1) = {rem:.3e})")));
                }
                if quotient.is_empty() {
                    quotient.push(1.0);
                }
                Ok(Polynomial::Floating(quotient))
            }
        }
    }

    pub fn summary(&self) -> PolynomialSummary {
        PolynomialSummary {
            degree: self.degree(),
            coefficients: self.coeffs_f64(),
            fractions: self.exact().map(|p| p.fraction_strings()),
            text: self.to_string(),
        }
    }
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Polynomial::Exact(p) => write!(f, "{p}"),
            Polynomial::Floating(c) => {
                let r = c.len() - 1;
                let terms: Vec<String> = c
                    .iter()
                    .enumerate()
                    .map(|(t, a)| match r - t {
                        0 => format!("{a:+.12}"),
                        1 => format!("{a:+.12}*x"),
                        e => format!("{a:+.12}*x^{e}"),
                    })
                    .collect();
                write!(f, "{}", terms.join(" "))
            }
        }
    }
}

/// Serializable view of a polynomial.
#[derive(Clone, Debug, Serialize)]
pub struct PolynomialSummary {
    pub degree: usize,
    /// Decimal coefficients, highest degree first.
    pub coefficients: Vec<f64>,
    /// Exact fraction strings when available.
    pub fractions: Option<Vec<String>>,
    pub text: String,
}

#[derive(Clone, Debug)]
pub struct MinPolyReport {
    pub p: Polynomial,
    pub f: Option<Polynomial>,
    pub f_at_1: Option<f64>,
    pub f_at_1_exact: Option<Q>,
    pub backend: Backend,
    /// Why the exact backend was not used.
    pub fallback_reason: Option<String>,
    /// `max |p([Φ])|` in floating point.
    pub annihilation_residual: f64,
    pub factor_error: Option<String>,
}

/// Minimal polynomial of `m`, exact when its entries are recognized as rationals.
pub fn minimal_polynomial(m: &ComplexMatrix) -> Result<MinPolyReport> {
    let (p, backend, fallback_reason) = match exact_matrix(m) {
        Ok(e) => match exact_krylov(&e) {
            Ok(p) => (Polynomial::Exact(p), Backend::Exact, None),
            Err(reason) => (floating_krylov(m)?, Backend::Floating, Some(reason)),
        },
        Err(reason) => (floating_krylov(m)?, Backend::Floating, Some(reason)),
    };
    if let Some(r) = &fallback_reason {
        info!("minimal polynomial: floating backend ({r})");
    }
    let annihilation_residual = p.eval_matrix(m).max_abs();
    let (f, factor_error) = match p.factor_root1() {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let f_at_1_exact = f.as_ref().and_then(|f| f.exact()).map(|f| f.eval(&Q::one()));
    let f_at_1 = f.as_ref().map(|f| f.eval_f64(1.0));
    Ok(MinPolyReport { p, f, f_at_1, f_at_1_exact, backend, fallback_reason, annihilation_residual, factor_error })
}

pub fn minimal_polynomial_of(op: &BlockOperator) -> Result<MinPolyReport> {
    minimal_polynomial(op.matrix())
}

fn exact_matrix(m: &ComplexMatrix) -> std::result::Result<ExactMatrix, String> {
    let d = m.dim();
    let mut entries = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            let z = m.get(r, c);
            match GaussQ::recognize(z, MAX_DENOMINATOR, RECOGNITION_TOL) {
                Some(q) => entries.push(q),
                None => return Err(format!("entry ({r}, {c}) = {z} is not a recognizable rational")),
            }
        }
    }
    let mut it = entries.into_iter();
    Ok(ExactMatrix::from_fn(d, |_, _| it.next().expect("d² entries")))
}

/// First exact dependence among `vec(M^t)`, by incremental elimination.
fn exact_krylov(m: &ExactMatrix) -> std::result::Result<RationalPolynomial, String> {
    let d = m.dim();
    // rows: (reduced vector, pivot, combination of powers producing it)
    let mut basis: Vec<(Vec<GaussQ>, usize, Vec<GaussQ>)> = Vec::new();
    let mut power = ExactMatrix::identity(d);
    for s in 0..=d * d {
        let mut v: Vec<GaussQ> = power.entries().to_vec();
        let mut combo = vec![GaussQ::zero(); s + 1];
        combo[s] = GaussQ::one();
        for (row, pivot, row_combo) in &basis {
            if v[*pivot].is_zero() {
                continue;
            }
            let factor = &v[*pivot] * &row[*pivot].inv().expect("pivot is nonzero");
            for (x, y) in v.iter_mut().zip(row) {
                if !y.is_zero() {
                    *x = &*x - &(&factor * y);
                }
            }
            for (x, y) in combo.iter_mut().zip(row_combo) {
                if !y.is_zero() {
                    *x = &*x - &(&factor * y);
                }
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            Some(pivot) => basis.push((v, pivot, combo)),
            None => {
                if combo.iter().any(|c| !c.is_real()) {
                    return Err("minimal polynomial has non-real coefficients".into());
                }
                let coeffs: Vec<Q> = combo.into_iter().rev().map(|c| c.re).collect();
                return RationalPolynomial::new(coeffs).ok_or_else(|| "empty dependence".to_string());
            }
        }
        power = power.mul(m);
    }
    Err("no dependence found within d² + 1 powers".into())
}

fn floating_krylov(m: &ComplexMatrix) -> Result<Polynomial> {
    let d = m.dim();
    let mut powers: Vec<Vec<C64>> = vec![];
    let mut p = ComplexMatrix::identity(d);
    for s in 0..=d {
        powers.push(p.as_dmatrix().transpose().iter().copied().collect());
        let cols = DMatrix::from_fn(d * d, s + 1, |r, c| powers[c][r]);
        let sv = cols.singular_values();
        let hi = sv.iter().copied().fold(0.0, f64::max);
        let rank = sv.iter().filter(|x| **x > FLOAT_RANK_TOL * hi.max(1.0)).count();
        if s > 0 && rank <= s {
            let a = DMatrix::from_fn(d * d, s, |r, c| powers[c][r]);
            let b = DVector::from_iterator(d * d, powers[s].iter().map(|z| -z));
            let svd = a.svd(true, true);
            let c = svd
                .solve(&b, FLOAT_RANK_TOL)
                .map_err(|e| OqwError::Singular(format!("least-squares solve failed: {e}")))?;
            let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if c.iter().any(|z| z.im.abs() > FLOAT_ROOT_TOL * scale) {
                return Err(OqwError::HypothesisFailed("minimal polynomial has non-real coefficients".into()));
            }
            let mut coeffs = vec![1.0];
            coeffs.extend(c.iter().rev().map(|z| z.re));
            return Ok(Polynomial::Floating(coeffs));
        }
        p = &p * m;
    }
    Err(OqwError::NoConvergence { iterations: d + 1 })
}

/// Columns of `f([Φ])` against the span of the stacked identity.
#[derive(Clone, Debug, Serialize)]
pub struct ColumnSpanCheck {
    /// Largest distance of a column from `span{u}`.
    pub residual: f64,
    /// Numerical rank of `f([Φ])`.
    pub rank: usize,
}

pub fn check_column_span(op: &BlockOperator, f: &Polynomial) -> ColumnSpanCheck {
    let fm = f.eval_matrix(op.matrix());
    let u = stacked_identity(op.sites(), op.degree());
    let uu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let dim = fm.dim();
    let mut residual = 0.0f64;
    for c in 0..dim {
        let dot: C64 = (0..dim).map(|r| u[r].conj() * fm.get(r, c)).sum::<C64>() / uu;
        for (r, ur) in u.iter().enumerate() {
            residual = residual.max((fm.get(r, c) - dot * ur).norm());
        }
    }
    let sv = fm.singular_values();
    let scale = sv.first().copied().unwrap_or(0.0).max(1.0);
    let rank = sv.iter().filter(|s| **s > FLOAT_RANK_TOL * scale).count();
    ColumnSpanCheck { residual, rank }
}

/// Weights `Σ_{l=0}^{r−s−1} a_l / f(1)` for `s = 0..r`.
fn finite_weights(f: &Polynomial) -> Vec<f64> {
    let a = f.coeffs_f64();
    let r = a.len() - 1;
    let f1: f64 = a.iter().sum();
    (0..r).map(|s| a[..r - s].iter().sum::<f64>() / f1).collect()
}

/// Mean hitting time from the finite double sum over `s < deg f`.
pub fn finite_formula_value(ops: &MhtfOperators, i: usize, j: usize, rho: &ComplexMatrix, f: &Polynomial) -> f64 {
    if i == j {
        return 0.0;
    }
    let mut acc = ZERO;
    let mut dphi = ops.d.clone();
    for w in finite_weights(f) {
        acc += (dphi.block_trace(i, i, rho) - dphi.block_trace(i, j, rho)) * w;
        dphi = dphi.compose(&ops.phi);
    }
    acc.re
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
}

/// Term cap for [`series_formula_value`].
pub const SERIES_CAP: usize = 1_000_000;

/// `Σ_s Tr([(D̂Φ̂ˢ)_ii − (D̂Φ̂ˢ)_ij] ρ)`, stopped once `|term| · q/(1−q) < tol` with `q = |λ₂|`.
pub fn series_formula_value(ops: &MhtfOperators, i: usize, j: usize, rho: &ComplexMatrix, tol: f64) -> Result<SeriesValue> {
    if i == j {
        return Ok(SeriesValue { value: 0.0, terms: 0 });
    }
    let mut ev: Vec<f64> = ops.phi.matrix().eigenvalues()?.iter().map(|z| z.norm()).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let q = ev.get(1).copied().unwrap_or(0.0);
    if q >= 1.0 {
        return Err(OqwError::NotErgodic("second eigenvalue on the unit circle".into()));
    }
    let mut acc = 0.0;
    let mut dphi = ops.d.clone();
    for s in 0..SERIES_CAP {
        let term = (dphi.block_trace(i, i, rho) - dphi.block_trace(i, j, rho)).re;
        acc += term;
        if s > 0 && (term.abs() * q / (1.0 - q) < tol || term == 0.0 && q == 0.0) {
            return Ok(SeriesValue { value: acc, terms: s + 1 });
        }
        dphi = dphi.compose(&ops.phi);
    }
    Err(OqwError::NoConvergence { iterations: SERIES_CAP })
}

/// `b_n = −Σ_{l=r−n}^{r} a_l / f(1)`, exactly.
pub fn tail_coeffs_exact(f: &RationalPolynomial) -> Vec<Q> {
    let a = f.coeffs();
    let r = f.degree();
    let f1 = f.eval(&Q::one());
    (0..r)
        .map(|n| -(a[r - n..].iter().fold(Q::zero(), |acc, x| acc + x)) / &f1)
        .collect()
}

pub fn tail_coeffs(f: &Polynomial) -> Vec<f64> {
    match f {
        Polynomial::Exact(p) => tail_coeffs_exact(p).iter().map(q_to_f64).collect(),
        Polynomial::Floating(a) => {
            let r = a.len() - 1;
            let f1: f64 = a.iter().sum();
            (0..r).map(|n| -a[r - n..].iter().sum::<f64>() / f1).collect()
        }
    }
}

/// `max |Σ_{m=0}^{M} Δ(Φ̂^{r+m}) − Σ_n b_n Δ(Φ̂ⁿ)|` with `Δ(A) = A_ii − A_ij` as superoperators.
pub fn tail_coeffs_residual(op: &BlockOperator, i: usize, j: usize, f: &Polynomial, m_terms: usize) -> f64 {
    let diff = |a: &BlockOperator| -> ComplexMatrix { a.block(i, i).matrix() - a.block(i, j).matrix() };
    let b = tail_coeffs(f);
    let r = f.degree();
    let nn = op.block_dim();
    let mut rhs = ComplexMatrix::zeros(nn);
    let mut power = BlockOperator::identity(op.sites(), op.degree());
    for bn in &b {
        rhs = &rhs + &diff(&power).scale_real(*bn);
        power = power.compose(op);
    }
    // power is now Φ̂^r
    let mut lhs = ComplexMatrix::zeros(nn);
    for _ in 0..=m_terms {
        lhs = &lhs + &diff(&power);
        power = power.compose(op);
    }
    debug_assert_eq!(b.len(), r);
    lhs.max_abs_diff(&rhs)
}

/// `x^{r+m} mod f` has coefficient row `α₀Mᵐ` for the companion matrix `M`, checked exactly.
pub fn companion_reduction_holds(f: &RationalPolynomial, m_max: usize) -> bool {
    let r = f.degree();
    if r == 0 {
        return true;
    }
    let a = f.coeffs();
    let mut alpha: Vec<Q> = a[1..].iter().map(|x| -x.clone()).collect();
    for m in 0..=m_max {
        if alpha != f.power_remainder(r + m) {
            return false;
        }
        // row vector times companion: first row −a, subdiagonal ones
        let mut next = vec![Q::zero(); r];
        for (c, slot) in next.iter_mut().enumerate() {
            *slot = &alpha[0] * &(-a[c + 1].clone());
            if c + 1 < r {
                *slot += &alpha[c + 1];
            }
        }
        alpha = next;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::omega;
    use crate::exec::Execution;
    use crate::mhtf::assemble;
    use crate::model::{block_rep, build_two_site};
    use crate::rational::{q_frac, q_int};
    use crate::tensor::bloch_density;

    #[test]
    fn identity_has_linear_minimal_polynomial() {
        let rep = minimal_polynomial(&ComplexMatrix::identity(4)).unwrap();
        assert_eq!(rep.backend, Backend::Exact);
        assert_eq!(rep.p.exact().unwrap().coeffs(), &[q_int(1), q_int(-1)]);
        assert_eq!(rep.f_at_1_exact, Some(q_int(1)));
    }

    #[test]
    fn omega_is_idempotent() {
        let rep = minimal_polynomial_of(&omega(2, 2)).unwrap();
        assert_eq!(rep.p.exact().unwrap().coeffs(), &[q_int(1), q_int(-1), q_int(0)]);
        assert_eq!(rep.f.unwrap().exact().unwrap().coeffs(), &[q_int(1), q_int(0)]);
    }

    #[test]
    fn two_site_polynomial() {
        let op = block_rep(&build_two_site()).unwrap();
        let rep = minimal_polynomial_of(&op).unwrap();
        let expected = [
            q_int(1),
            q_int(-1),
            q_frac(1, 4),
            q_frac(1, 16),
            q_frac(-43, 64),
            q_frac(41, 128),
            q_frac(-5, 64),
            q_frac(5, 256),
            q_frac(25, 256),
        ];
        assert_eq!(rep.p.exact().unwrap().coeffs(), &expected);
        assert_eq!(rep.f_at_1_exact, Some(q_frac(243, 256)));
        assert!(rep.annihilation_residual < 1e-12);
        assert!(companion_reduction_holds(rep.f.as_ref().unwrap().exact().unwrap(), 3));
    }

    #[test]
    fn floating_backend_agrees_on_example() {
        let op = block_rep(&build_two_site()).unwrap();
        let fl = floating_krylov(op.matrix()).unwrap();
        let ex = minimal_polynomial_of(&op).unwrap().p;
        let a = fl.coeffs_f64();
        let b = ex.coeffs_f64();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn irrational_entries_fall_back() {
        let m = ComplexMatrix::from_real_rows(&[&[std::f64::consts::PI, 0.0], &[0.0, 1.0]]).unwrap();
        let rep = minimal_polynomial(&m).unwrap();
        assert_eq!(rep.backend, Backend::Floating);
        assert!(rep.fallback_reason.is_some());
        assert_eq!(rep.p.degree(), 2);
        assert!(rep.annihilation_residual < 1e-8);
    }

    #[test]
    fn finite_formula_on_example() {
        let op = block_rep(&build_two_site()).unwrap();
        let ops = assemble(&op, 1e-9, Execution::Sequential).unwrap();
        let f = minimal_polynomial_of(&op).unwrap().f.unwrap();
        let rho = bloch_density(0.1, 0.5, -0.3);
        assert!((finite_formula_value(&ops, 0, 1, &rho, &f) - 4.0 / 3.0).abs() < 1e-10);
        assert_eq!(finite_formula_value(&ops, 1, 1, &rho, &f), 0.0);
        let s = series_formula_value(&ops, 0, 1, &rho, 1e-12).unwrap();
        assert!((s.value - 4.0 / 3.0).abs() < 1e-9);
        assert!(tail_coeffs_residual(&op, 0, 1, &f, 300) < 1e-10);
        let span = check_column_span(&op, &f);
        assert!(span.residual < 1e-9);
        assert_eq!(span.rank, 1);
    }

    #[test]
    fn tail_coeffs_trivial_cases() {
        assert!(tail_coeffs(&Polynomial::Exact(RationalPolynomial::one())).is_empty());
        let x = RationalPolynomial::new(vec![q_int(1), q_int(0)]).unwrap();
        assert_eq!(tail_coeffs_exact(&x), vec![q_int(0)]);
    }
}
