mod common;

use common::*;
use oqw::ergodic::{classify, fundamental, omega};
use oqw::exec::Execution;
use oqw::hitting::{hitting_bundle, taboo};
use oqw::mhtf::{assemble, check_all, constant_trace, probe_set, target_time};
use oqw::minpoly::{minimal_polynomial, minimal_polynomial_of, finite_formula_value};
use oqw::model::{
    block_rep, build_classical, build_pq_two_site, evolve, kraus_step, random_density, random_site_state,
    site_prob_via_rep, step, BlockOperator, OqwModel, SiteState,
};
use oqw::tensor::{apply_conj, conj_map_rep, kron, trace_functional, unvec, vec, ComplexMatrix, C64};
use oqw::trajectory::Sampler;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn vec_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn ergodic_walk(seed: u64, k: usize) -> (OqwModel, BlockOperator) {
    let mut r = rng(seed);
    loop {
        let model = random_unital_walk(&mut r, k, 2);
        let op = block_rep(&model).unwrap();
        if classify(&op, 1e-9).unwrap().is_ergodic {
            return (model, op);
        }
    }
}

fn walk_strategy() -> impl Strategy<Value = (OqwModel, BlockOperator)> {
    (any::<u64>(), 2usize..=3).prop_map(|(seed, k)| ergodic_walk(seed, k))
}

fn fixed_walks() -> Vec<(OqwModel, BlockOperator)> {
    [two_site(), three_cycle()]
        .into_iter()
        .map(|m| {
            let op = block_rep(&m).unwrap();
            (m, op)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vec_round_trip_is_exact(seed in any::<u64>(), n in 1usize..=6) {
        let x = gaussian_matrix(&mut rng(seed), n);
        prop_assert_eq!(unvec(&vec(&x), n).unwrap(), x);
    }

    #[test]
    fn conjugation_rep_matches_direct_product(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let (c, x) = (gaussian_matrix(&mut r, n), gaussian_matrix(&mut r, n));
        let lhs = conj_map_rep(&c).matrix().mul_vec(&vec(&x));
        prop_assert!(vec_diff(&lhs, &vec(&apply_conj(&c, &x).unwrap())) <= 1e-12);
    }

    #[test]
    fn row_stacking_kron_identity(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let (a, b, x) = (gaussian_matrix(&mut r, n), gaussian_matrix(&mut r, n), gaussian_matrix(&mut r, n));
        let lhs = vec(&(&(&a * &x) * &b.transpose()));
        prop_assert!(vec_diff(&lhs, &kron(&a, &b).mul_vec(&vec(&x))) <= 1e-11);
    }

    #[test]
    fn conjugation_keeps_psd(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let c = gaussian_matrix(&mut r, n);
        let rho = random_density(&mut r, n);
        let out = apply_conj(&c, &rho).unwrap();
        let scale = out.max_abs().max(1.0);
        prop_assert!(out.min_eigenvalue() >= -1e-12 * scale);
    }

    #[test]
    fn conjugation_trace_identity(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let (c, x) = (gaussian_matrix(&mut r, n), gaussian_matrix(&mut r, n));
        let lhs = apply_conj(&c, &x).unwrap().trace();
        let rhs = (&(&c.adjoint() * &c) * &x).trace();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        let via_row: C64 = trace_functional(n).iter().zip(vec(&x)).map(|(a, b)| a * b).sum();
        prop_assert!((via_row - x.trace()).norm() <= 1e-12);
    }

    #[test]
    fn step_preserves_density_form(seed in any::<u64>(), k in 2usize..=4, n in 1usize..=3) {
        let mut r = rng(seed);
        let model = random_walk(&mut r, k, n);
        let op = block_rep(&model).unwrap();
        let mut s = random_site_state(&mut r, k, n);
        for _ in 0..5 {
            s = step(&op, &s).unwrap();
            prop_assert!((s.total_trace() - 1.0).abs() <= 1e-12);
            for b in s.blocks() {
                prop_assert!(b.is_hermitian(1e-12));
                prop_assert!(b.min_eigenvalue() >= -1e-10);
            }
        }
    }

    #[test]
    fn block_rep_matches_kraus_evolution(seed in any::<u64>(), k in 2usize..=4, n in 1usize..=3) {
        let mut r = rng(seed);
        let model = random_walk(&mut r, k, n);
        let op = block_rep(&model).unwrap();
        let s = random_site_state(&mut r, k, n);
        prop_assert!(step(&op, &s).unwrap().max_abs_diff(&kraus_step(&model, &s).unwrap()) <= 1e-12);
    }

    #[test]
    fn site_probability_via_rep_matches_evolution(seed in any::<u64>(), steps in 0usize..=5) {
        let mut r = rng(seed);
        let model = random_walk(&mut r, 3, 2);
        let op = block_rep(&model).unwrap();
        let rho = random_density(&mut r, 2);
        let start = SiteState::concentrated(3, 1, &rho).unwrap();
        let evolved = evolve(&op, &start, steps).unwrap();
        for i in 0..3 {
            let direct = evolved.site_prob(i).unwrap();
            prop_assert!((site_prob_via_rep(&op, 1, i, &rho, steps).unwrap() - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn classical_embedding_follows_matrix_powers(seed in any::<u64>(), k in 2usize..=5, steps in 1usize..=6) {
        let mut r = rng(seed);
        let p = random_positive_chain(&mut r, k);
        let op = block_rep(&build_classical(&p).unwrap()).unwrap();
        let raw: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let mut dist: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let blocks = dist.iter().map(|&x| ComplexMatrix::identity(1).scale_real(x)).collect();
        let evolved = evolve(&op, &SiteState::new(blocks, 1e-12).unwrap(), steps).unwrap();
        for _ in 0..steps {
            dist = (0..k).map(|i| (0..k).map(|j| p[i][j] * dist[j]).sum()).collect();
        }
        for (got, want) in evolved.probabilities().iter().zip(&dist) {
            prop_assert!((got - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn diagonal_effects_ignore_coherences(seed in any::<u64>(), steps in 1usize..=8) {
        let mut r = rng(seed);
        let phase = |r: &mut ChaCha8Rng| C64::from_polar(1.0, r.random::<f64>() * std::f64::consts::TAU);
        let (s, t) = (r.random::<f64>(), r.random::<f64>());
        let z = C64::new(0.0, 0.0);
        let a = ComplexMatrix::from_rows(&[vec![phase(&mut r) * s.sqrt(), z], vec![z, phase(&mut r) * t.sqrt()]]).unwrap();
        let b = ComplexMatrix::from_rows(&[
            vec![z, phase(&mut r) * (1.0 - t).sqrt()],
            vec![phase(&mut r) * (1.0 - s).sqrt(), z],
        ]).unwrap();
        let op = block_rep(&build_pq_two_site(&a, &b).unwrap()).unwrap();
        let full = random_site_state(&mut r, 2, 2);
        let stripped = SiteState::from_blocks_unchecked(
            full.blocks().iter().map(|m| ComplexMatrix::from_fn(2, |i, j| if i == j { m.get(i, j) } else { z })).collect(),
        );
        let (x, y) = (evolve(&op, &full, steps).unwrap(), evolve(&op, &stripped, steps).unwrap());
        for (p, q) in x.probabilities().iter().zip(y.probabilities()) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn taboo_operator_loses_mass(seed in any::<u64>(), i in 0usize..3) {
        let mut r = rng(seed);
        let model = random_walk(&mut r, 3, 2);
        let op = block_rep(&model).unwrap();
        let q = taboo(&op, i).map(|t| t.q).unwrap_or_else(|_| op.with_zero_row(i));
        let s = random_site_state(&mut r, 3, 2);
        let out = step(&q, &s).unwrap();
        prop_assert!(out.total_trace() <= s.total_trace() + 1e-12);
        prop_assert!(out.block(i).max_abs() == 0.0);
    }

    #[test]
    fn trajectories_stay_densities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_walk(&mut r, 3, 2);
        let sampler = Sampler::new(&model).unwrap();
        let rho = random_density(&mut r, 2);
        for (_, state) in sampler.path(0, &rho, 30, &mut r).unwrap() {
            prop_assert!((state.trace().re - 1.0).abs() <= 1e-10);
            prop_assert!(state.min_eigenvalue() >= -1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projector_identities_on_random_walks((_m, op) in walk_strategy()) {
        let (k, n) = (op.sites(), op.degree());
        let om = omega(k, n);
        prop_assert!(om.compose(&om).max_abs_diff(&om) <= 1e-15);
        prop_assert!(op.compose(&om).max_abs_diff(&om) <= 1e-12);
        prop_assert!(om.compose(&op).max_abs_diff(&om) <= 1e-12);
        let diff = op.sub(&om);
        let mut power = diff.clone();
        for r in 1..=6 {
            prop_assert!(power.max_abs_diff(&op.pow(r).sub(&om)) <= 1e-12, "r = {}", r);
            power = power.compose(&diff);
        }
    }

    #[test]
    fn fundamental_identities_on_random_walks((_m, op) in walk_strategy(), seed in any::<u64>()) {
        let (k, n) = (op.sites(), op.degree());
        let z = fundamental(&op, 1e-9).unwrap();
        let om = omega(k, n);
        let id = BlockOperator::identity(k, n);
        let i_minus_phi = id.sub(&op);
        prop_assert!(z.compose(&om).max_abs_diff(&om) <= 1e-10);
        prop_assert!(om.compose(&z).max_abs_diff(&om) <= 1e-10);
        prop_assert!(z.compose(&i_minus_phi).max_abs_diff(&id.sub(&om)) <= 1e-10);
        prop_assert!(i_minus_phi.compose(&z).max_abs_diff(&id.sub(&om)) <= 1e-10);
        let s = random_site_state(&mut rng(seed), k, n);
        prop_assert!((step(&z, &s).unwrap().total_trace() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn first_step_relations_on_random_walks((model, op) in walk_strategy(), seed in any::<u64>()) {
        first_step_relations(&model, &op, seed)?;
    }

    #[test]
    fn formula_identities_on_random_walks((_m, op) in walk_strategy(), seed in any::<u64>()) {
        let ops = assemble(&op, 1e-9, Execution::Sequential).unwrap();
        let report = check_all(&ops, &densities(seed, 5, 2), 1e-9).unwrap();
        prop_assert!(report.fundamental_formula_residual <= 1e-8);
        prop_assert!(report.trace_preservation_residual <= 1e-8);
        prop_assert!(report.decomposition_residual <= 1e-8);
        prop_assert!(report.bracket_cancellation_residual <= 1e-8);
        if report.constant_trace_applicable {
            prop_assert!(report.scaled_formula_residual.unwrap() <= 1e-8);
        }
    }

    #[test]
    fn minimal_polynomial_annihilates_real_matrices(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let m = ComplexMatrix::from_fn(n, |_, _| C64::new(r.sample(rand_distr::StandardNormal), 0.0));
        let rep = minimal_polynomial(&m).unwrap();
        prop_assert!(rep.annihilation_residual <= 1e-8 * m.max_abs().max(1.0).powi(n as i32));
    }

    #[test]
    fn non_real_minimal_polynomials_are_refused(seed in any::<u64>(), n in 1usize..=4) {
        let m = gaussian_matrix(&mut rng(seed), n);
        prop_assert!(minimal_polynomial(&m).is_err());
    }

    #[test]
    fn minimal_polynomial_of_integer_matrices_is_exact(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let m = ComplexMatrix::from_fn(n, |_, _| C64::new(r.random_range(-3..=3) as f64, 0.0));
        let rep = minimal_polynomial(&m).unwrap();
        prop_assert_eq!(rep.backend, oqw::minpoly::Backend::Exact);
        prop_assert_eq!(rep.annihilation_residual, 0.0);
    }

    #[test]
    fn finite_formula_matches_resolvent_on_random_walks((_m, op) in walk_strategy(), seed in any::<u64>()) {
        let ops = assemble(&op, 1e-9, Execution::Sequential).unwrap();
        let rep = minimal_polynomial_of(&op).unwrap();
        let f = rep.f.expect("walks have 1 as an eigenvalue");
        let rho = densities(seed, 1, 2).remove(0);
        for i in 0..op.sites() {
            for j in 0..op.sites() {
                let finite = finite_formula_value(&ops, i, j, &rho, &f);
                prop_assert!((finite - ops.mht(i, j, &rho).re).abs() <= 1e-8, "({}, {})", i, j);
            }
        }
    }
}

fn first_step_relations(model: &OqwModel, op: &BlockOperator, seed: u64) -> Result<(), TestCaseError> {
    let k = model.sites();
    let mut r = rng(seed);
    let rho = random_density(&mut r, model.degree());
    for i in 0..k {
        let b = hitting_bundle(op, i).unwrap();
        for j in 0..k {
            let h = b.hit_value(j, &rho);
            prop_assert!((-1e-12..=1.0 + 1e-10).contains(&h));
            prop_assert!((h - 1.0).abs() <= 1e-10);
            prop_assert!(b.mht_value(j, &rho) >= -1e-12);
            if j == i {
                continue;
            }
            // one step, then either land on i or continue from l
            let mut h_next = 0.0;
            let mut k_next = rho.trace().re;
            for (l, eff) in model.effects_from(j) {
                let moved = apply_conj(eff, &rho).unwrap();
                h_next += b.hit_value(l, &moved);
                k_next += b.mht_value(l, &moved);
            }
            prop_assert!((h - h_next).abs() <= 1e-10);
            prop_assert!((b.mht_value(j, &rho) - k_next).abs() <= 1e-10);
        }
        let mut ret = rho.trace().re;
        for (l, eff) in model.effects_from(i) {
            ret += b.mht_value(l, &apply_conj(eff, &rho).unwrap());
        }
        prop_assert!((b.return_value(&rho) - ret).abs() <= 1e-10);
    }
    Ok(())
}

#[test]
fn fixed_walk_identities_on_full_basis() {
    for (model, op) in fixed_walks() {
        let (k, n) = (op.sites(), op.degree());
        let om = omega(k, n);
        let id = BlockOperator::identity(k, n);
        let z = fundamental(&op, 1e-9).unwrap();
        assert!(op.compose(&om).max_abs_diff(&om) <= 1e-12);
        assert!(om.compose(&op).max_abs_diff(&om) <= 1e-12);
        assert!(z.compose(&om).max_abs_diff(&om) <= 1e-10);
        assert!(om.compose(&z).max_abs_diff(&om) <= 1e-10);
        assert!(z.compose(&id.sub(&op)).max_abs_diff(&id.sub(&om)) <= 1e-10);
        assert!(id.sub(&op).compose(&z).max_abs_diff(&id.sub(&om)) <= 1e-10);
        let diff = op.sub(&om);
        for r in 1..=6 {
            assert!(diff.pow(r).max_abs_diff(&op.pow(r).sub(&om)) <= 1e-12);
        }
        let ops = assemble(&op, 1e-9, Execution::Sequential).unwrap();
        let report = check_all(&ops, &densities(20, 20, n), 1e-9).unwrap();
        assert!(report.probes >= probe_set(n, &[]).len());
        assert!(report.passes(1e-8), "{report:?}");
        assert!(report.constant_trace_applicable);
        for seed in 0..5 {
            first_step_relations(&model, &op, seed).unwrap();
            let s = random_site_state(&mut rng(seed), k, n);
            assert!((step(&z, &s).unwrap().total_trace() - 1.0).abs() <= 1e-10);
        }
    }
}

#[test]
fn two_site_first_step_relations() {
    let model = two_site();
    let op = block_rep(&model).unwrap();
    let b = hitting_bundle(&op, 0).unwrap();
    let b21 = model.effect(1, 0).unwrap();
    let b22 = model.effect(1, 1).unwrap();
    for rho in densities(3, 20, 2) {
        let k11 = b.return_value(&rho);
        let k12 = |x: &ComplexMatrix| b.mht_value(1, x);
        assert!((k11 - (1.0 + k12(&apply_conj(b21, &rho).unwrap()))).abs() <= 1e-10);
        assert!((k12(&rho) - (1.0 + k12(&apply_conj(b22, &rho).unwrap()))).abs() <= 1e-10);
    }
}

#[test]
fn target_time_is_start_independent_on_fixed_walks() {
    for (_, op) in fixed_walks() {
        let ops = assemble(&op, 1e-9, Execution::Sequential).unwrap();
        assert!(constant_trace(&ops, 1e-9).applicable);
        for rho in densities(30, 10, 2) {
            let values: Vec<f64> = (0..op.sites()).map(|j| target_time(&ops, &rho, j, 1e-9).unwrap().value).collect();
            let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 1e-9);
            let t = target_time(&ops, &rho, 0, 1e-9).unwrap();
            assert!(t.formula_gap <= 1e-9);
        }
    }
}
