use std::path::Path;

use oqw::ergodic::{classify, power_convergence};
use oqw::exec::Execution;
use oqw::hitting::{hitting_bundle, series_bundle, HittingBundle};
use oqw::mhtf::{assemble, check_all, constant_trace, target_time, target_time_sweep, MhtfOperators};
use oqw::minpoly::{check_column_span, minimal_polynomial_of, finite_formula_value, Backend};
use oqw::model::{block_rep, coins, random_density, BlockOperator, OqwModel};
use oqw::tensor::{bloch_vector, ComplexMatrix};
use oqw::trajectory::{npath_experiment, sample_hitting_time, NpathMode, TrajectoryConfig};
use oqw::OqwError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::input::{DensityInput, WalkSpecFile};
use crate::report::{complex, fmt, sci, Report};
use crate::{
    Cli, CliError, Command, HittingArgs, Method, MhtfArgs, MinpolyArgs, NpathArgs, NpathModeArg, SamplingArgs,
    TargetTimeArgs,
};

/// Power-convergence horizon reported by `ergodic`.
const POWER_HORIZON: usize = 10_000;
/// Leading eigenvalues listed in text output.
const SHOWN_EIGENVALUES: usize = 4;

pub fn name(command: &Command) -> &'static str {
    match command {
        Command::Validate { .. } => "validate",
        Command::Ergodic { .. } => "ergodic",
        Command::Hitting(_) => "hitting",
        Command::Mhtf(_) => "mhtf",
        Command::TargetTime(_) => "target-time",
        Command::Minpoly(_) => "minpoly",
        Command::Npath(_) => "npath",
    }
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) || !(cli.check_tol > 0.0 && cli.check_tol.is_finite()) {
        return Err(CliError::Usage("tolerances must be positive and finite".into()));
    }
    configure_threads(cli.threads);
    let mut report = Report::new(name(&cli.command), cli.tol, cli.check_tol);
    match &cli.command {
        Command::Validate { file } => validate(file, cli, &mut report)?,
        Command::Ergodic { file } => ergodic(file, cli, &mut report)?,
        Command::Hitting(a) => hitting(a, cli, &mut report)?,
        Command::Mhtf(a) => mhtf(a, cli, &mut report)?,
        Command::TargetTime(a) => target(a, cli, &mut report)?,
        Command::Minpoly(a) => minpoly(a, cli, &mut report)?,
        Command::Npath(a) => npath(a, &mut report)?,
    }
    Ok(report)
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) {
    if threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_threads: usize) {}

fn execution(sampling: &SamplingArgs) -> Execution {
    if sampling.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn load(file: &Path, report: &mut Report) -> Result<OqwModel, CliError> {
    let spec = WalkSpecFile::load(file)?;
    let model = spec.to_model()?;
    report.inputs = json!({
        "file": file.display().to_string(),
        "label": model.label(),
        "k": model.sites(),
        "n": model.degree(),
    });
    report.line("walk", format!("{} ({} sites, degree {})", model.label().unwrap_or("unlabeled"), model.sites(), model.degree()));
    Ok(model)
}

/// Loads a walk and refuses it unless the effects are normalized.
fn load_valid(file: &Path, cli: &Cli, report: &mut Report) -> Result<(OqwModel, BlockOperator), CliError> {
    let model = load(file, report)?;
    let v = model.validate(cli.tol);
    if !v.passed {
        return Err(OqwError::NotNormalized { sources: v.offending.iter().map(|s| s + 1).collect(), max_residual: v.max_residual }.into());
    }
    let op = block_rep(&model)?;
    Ok((model, op))
}

fn site_arg(site: usize, k: usize, what: &str) -> Result<usize, CliError> {
    if site == 0 || site > k {
        Err(CliError::Usage(format!("{what} {site} outside 1..={k}")))
    } else {
        Ok(site - 1)
    }
}

fn density_or_mixed(arg: Option<&str>, n: usize, tol: f64) -> Result<(String, ComplexMatrix), CliError> {
    match arg {
        Some(a) => Ok((a.to_owned(), DensityInput::parse_arg(a)?.matrix(n, tol)?)),
        None => Ok(("maximally mixed".to_owned(), ComplexMatrix::identity(n).scale_real(1.0 / n as f64))),
    }
}

fn validate(file: &Path, cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    let model = load(file, report)?;
    let v = model.validate(cli.tol);
    for (j, r) in v.residuals.iter().enumerate() {
        report.line(format!("residual from site {}", j + 1), sci(*r));
    }
    report.line("max residual", sci(v.max_residual));
    report.results = json!({
        "residuals": v.residuals,
        "max_residual": v.max_residual,
        "offending": v.offending.iter().map(|s| s + 1).collect::<Vec<_>>(),
    });
    report.check("effects leaving every site sum to the identity", v.passed);
    Ok(())
}

fn ergodic(file: &Path, cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    let (_, op) = load_valid(file, cli, report)?;
    let e = classify(&op, cli.tol)?;
    let conv = if e.is_ergodic { power_convergence(&op, cli.check_tol, POWER_HORIZON).converged_at } else { None };
    report.line("ergodic", e.is_ergodic);
    report.line("spectral gap", fmt(e.spectral_gap));
    report.line("eigenvalues on unit circle", e.peripheral_count);
    report.line("fixed space dimension", e.fixed_space_dim);
    report.line("fixed point residual", sci(e.fixed_point_residual));
    let shown: Vec<String> = e
        .eigenvalues
        .iter()
        .take(SHOWN_EIGENVALUES)
        .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
        .collect();
    report.line("leading eigenvalues", shown.join(", "));
    if let Some(r) = conv {
        report.line("powers within check tolerance at", r);
    }
    if let Some(d) = &e.diagnostic {
        report.line("diagnostic", d);
    }
    report.results = json!({
        "is_ergodic": e.is_ergodic,
        "spectral_gap": e.spectral_gap,
        "peripheral_count": e.peripheral_count,
        "fixed_space_dim": e.fixed_space_dim,
        "fixed_point_residual": e.fixed_point_residual,
        "eigenvalues": e.eigenvalues.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
        "power_convergence_step": conv,
        "diagnostic": e.diagnostic,
    });
    report.check("walk is ergodic", e.is_ergodic);
    Ok(())
}

fn hitting(a: &HittingArgs, cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    let method = a.chosen_method()?;
    let (model, op) = load_valid(&a.file, cli, report)?;
    let (k, n) = (model.sites(), model.degree());
    let target = site_arg(a.target, k, "target")?;
    let (start, rho) = DensityInput::parse_arg(&a.rho)?.concentrated(k, n, cli.tol)?;
    report.inputs["target"] = json!(a.target);
    report.inputs["start"] = json!(start + 1);
    report.inputs["rho"] = json!(a.rho);
    report.inputs["method"] = json!(format!("{method:?}").to_lowercase());
    report.line("target", a.target);
    report.line("start", start + 1);

    let bundle_values = |b: &HittingBundle, report: &mut Report| {
        let (h, m, ret) = (b.hit_value(start, &rho), b.mht_value(start, &rho), b.return_value(&rho));
        report.line("hitting probability", fmt(h));
        report.line("mean hitting time", fmt(m));
        report.line("mean return time", fmt(ret));
        report.line("taboo spectral radius", fmt(b.taboo_radius));
        json!({
            "hitting_probability": h,
            "mean_hitting_time": m,
            "mean_return_time": ret,
            "taboo_radius": b.taboo_radius,
        })
    };

    match method {
        Method::Exact => {
            let b = hitting_bundle(&op, target)?;
            report.results = bundle_values(&b, report);
        }
        Method::Series => {
            let b = series_bundle(&op, target, cli.check_tol)?;
            report.results = bundle_values(&b, report);
        }
        Method::Simulate => {
            let mut cfg = TrajectoryConfig::new(target, start, rho.clone());
            cfg.n_traj = a.sampling.traj;
            cfg.master_seed = a.sampling.seed;
            cfg.max_steps = a.sampling.max_steps;
            cfg.exec = execution(&a.sampling);
            let est = sample_hitting_time(&model, &cfg)?;
            report.seed = Some(a.sampling.seed);
            report.line("trajectories", est.n_traj);
            report.line("mean hitting time", format!("{} ± {}", fmt(est.mean), fmt(est.stderr)));
            report.line("hit fraction", fmt(est.hit_fraction));
            report.line("timeouts", est.timeouts);
            let exact = hitting_bundle(&op, target).ok().map(|b| b.mht_value(start, &rho));
            let sigmas = exact.filter(|_| est.stderr > 0.0).map(|x| (est.mean - x).abs() / est.stderr);
            if let Some(x) = exact {
                report.line("exact value", fmt(x));
            }
            if let Some(s) = sigmas {
                report.line("distance in standard errors", format!("{s:.2}"));
            }
            if est.timeouts > 0 {
                report.note(format!("{} trajectories timed out and are excluded from the mean", est.timeouts));
            }
            report.results = json!({ "estimate": est, "exact": exact, "standard_errors_from_exact": sigmas });
        }
    }
    Ok(())
}

fn assembled(op: &BlockOperator, cli: &Cli) -> Result<MhtfOperators, CliError> {
    Ok(assemble(op, cli.tol, Execution::Parallel)?)
}

fn mhtf(a: &MhtfArgs, cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    let (model, op) = load_valid(&a.file, cli, report)?;
    let n = model.degree();
    let mut densities = Vec::new();
    for r in &a.rho {
        densities.push(DensityInput::parse_arg(r)?.matrix(n, cli.tol)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    densities.extend((0..a.random).map(|_| random_density(&mut rng, n)));
    report.seed = Some(a.seed);
    report.inputs["rho"] = json!(a.rho);
    report.inputs["random_densities"] = json!(a.random);

    let ops = assembled(&op, cli)?;
    let r = check_all(&ops, &densities, cli.tol)?;
    report.line("probe densities", r.probes);
    report.line("fundamental-matrix formula residual", sci(r.fundamental_formula_residual));
    report.line("trace-preservation residual (L̂)", sci(r.trace_preservation_residual));
    report.line("L̂Ẑ decomposition residual", sci(r.decomposition_residual));
    report.line("bracket cancellation residual", sci(r.bracket_cancellation_residual));
    report.line("constant return trace", r.constant_trace_applicable);
    if let Some(c) = r.c_value {
        report.line("return trace constant c", fmt(c));
    }
    if let Some(x) = r.scaled_formula_residual {
        report.line("scaled formula residual", sci(x));
    }
    if let Some(d) = &r.constant_trace_diagnostic {
        report.line("constant-trace diagnostic", d);
    }
    report.results = serde_json::to_value(&r).expect("serializable");
    report.check("identity residuals within check tolerance", r.passes(cli.check_tol));
    Ok(())
}

fn target(a: &TargetTimeArgs, cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    let (model, op) = load_valid(&a.file, cli, report)?;
    let (k, n) = (model.sites(), model.degree());
    let start = site_arg(a.start, k, "start")?;
    let (rho_name, rho) = density_or_mixed(a.rho.as_deref(), n, cli.tol)?;
    report.inputs["rho"] = json!(rho_name);
    report.inputs["start"] = json!(a.start);
    let ops = assembled(&op, cli)?;
    match target_time(&ops, &rho, start, cli.tol) {
        Err(OqwError::HypothesisFailed(msg)) => {
            let ct = constant_trace(&ops, cli.tol);
            report.line("applicable", false);
            report.line("diagnostic", &msg);
            report.results = json!({ "applicable": false, "diagnostic": msg, "constant_trace": ct });
            report.check("constant return trace across sites", false);
        }
        Err(e) => return Err(e.into()),
        Ok(t) => {
            report.line("target time", fmt(t.value));
            report.line("via trace of Ẑ", fmt(t.via_fundamental));
            report.line("formula gap", sci(t.formula_gap));
            let per: Vec<String> = t.per_start.iter().map(|v| fmt(*v)).collect();
            report.line("by start site", per.join(", "));
            report.line("start spread", sci(t.start_spread));
            report.line("return trace constant c", fmt(t.c));
            let mut results = json!({
                "applicable": true,
                "value": t.value,
                "via_fundamental": t.via_fundamental,
                "diagonal_traces": t.diagonal_traces,
                "per_start": t.per_start,
                "start_spread": t.start_spread,
                "formula_gap": t.formula_gap,
                "c": t.c,
            });
            if let Some(per_axis) = a.sweep {
                let s = target_time_sweep(&ops, start, per_axis, cli.tol, Execution::Parallel)?;
                report.line("sweep points", s.points);
                report.line("sweep range", format!("[{}, {}]", fmt(s.min), fmt(s.max)));
                results["sweep"] = serde_json::to_value(&s).expect("serializable");
            }
            report.results = results;
            report.check("start independence", t.start_spread <= cli.check_tol);
            report.check("two formulas agree", t.formula_gap <= cli.check_tol);
        }
    }
    Ok(())
}

fn minpoly(a: &MinpolyArgs, cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    let (model, op) = load_valid(&a.file, cli, report)?;
    let n = model.degree();
    let rep = minimal_polynomial_of(&op)?;
    report.line("backend", format!("{:?}", rep.backend).to_lowercase());
    if let Some(r) = &rep.fallback_reason {
        report.line("fallback reason", r);
    }
    report.line("p(x)", &rep.p);
    report.line("annihilation residual", sci(rep.annihilation_residual));
    let mut results = json!({
        "backend": rep.backend,
        "fallback_reason": rep.fallback_reason,
        "p": rep.p.summary(),
        "annihilation_residual": rep.annihilation_residual,
    });
    report.check("p annihilates the walk matrix", rep.annihilation_residual <= cli.check_tol);

    let Some(f) = &rep.f else {
        let err = rep.factor_error.clone().unwrap_or_default();
        report.line("factor error", &err);
        results["factor_error"] = json!(err);
        report.results = results;
        report.check("1 is a root of p", false);
        return Ok(());
    };
    report.line("f(x)", f);
    let f1_text = match (&rep.f_at_1_exact, rep.f_at_1) {
        (Some(q), _) => q.to_string(),
        (None, Some(x)) => fmt(x),
        _ => "n/a".into(),
    };
    report.line("f(1)", &f1_text);
    let span = check_column_span(&op, f);
    report.line("f(Φ) column span residual", sci(span.residual));
    results["f"] = serde_json::to_value(f.summary()).expect("serializable");
    results["f_at_1"] = json!(rep.f_at_1);
    results["f_at_1_exact"] = json!(rep.f_at_1_exact.as_ref().map(|q| q.to_string()));
    results["column_span"] = serde_json::to_value(&span).expect("serializable");

    if classify(&op, cli.tol)?.is_ergodic {
        let (rho_name, rho) = density_or_mixed(a.rho.as_deref(), n, cli.tol)?;
        report.inputs["rho"] = json!(rho_name);
        let ops = assembled(&op, cli)?;
        let k = model.sites();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                worst = worst.max((finite_formula_value(&ops, i, j, &rho, f) - ops.mht(i, j, &rho).re).abs());
            }
        }
        report.line("finite formula vs resolvent", sci(worst));
        results["finite_formula_gap"] = json!(worst);
        report.check("finite formula matches resolvent", worst <= cli.check_tol);
    } else {
        report.note("walk is not ergodic; finite-formula cross-check skipped");
    }
    if rep.backend == Backend::Floating {
        report.note("coefficients are floating point");
    }
    report.results = results;
    Ok(())
}

fn parse_coin(spec: &str) -> Result<(ComplexMatrix, ComplexMatrix), CliError> {
    let coin = match spec {
        "hadamard-split" => coins::hadamard_split(),
        "classical" => coins::classical(2),
        other => {
            let Some(rest) = other.strip_prefix("general:") else {
                return Err(CliError::Usage(format!("unknown coin `{other}`; use hadamard-split, classical or general:x,y,z,w")));
            };
            let v: Vec<f64> = rest
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("coin `{other}`: bad number `{p}`: {e}"))))
                .collect::<Result<_, _>>()?;
            let [x, y, z, w] = v[..] else {
                return Err(CliError::Usage(format!("coin `{other}`: expected four numbers")));
            };
            coins::general(x, y, z, w)
        }
    };
    if !coins::is_normalized(&coin.0, &coin.1) {
        return Err(CliError::Usage(format!("coin `{spec}` does not satisfy L*L + R*R = I")));
    }
    Ok(coin)
}

fn npath(a: &NpathArgs, report: &mut Report) -> Result<(), CliError> {
    if a.sites < 2 {
        return Err(CliError::Usage("--N must be at least 2".into()));
    }
    let (l, r) = parse_coin(&a.coin)?;
    let (site, rho) = DensityInput::parse_arg(&a.rho)?.concentrated(a.sites, 2, oqw::model::MODEL_TOL)?;
    if site != 0 {
        return Err(CliError::Usage("the path walk starts at site 1".into()));
    }
    let mode = match a.mode {
        NpathModeArg::Exact => NpathMode::Exact,
        NpathModeArg::Sampled => {
            report.seed = Some(a.sampling.seed);
            NpathMode::Sampled {
                n_traj: a.sampling.traj,
                master_seed: a.sampling.seed,
                max_steps: a.sampling.max_steps,
                exec: execution(&a.sampling),
            }
        }
    };
    let out = npath_experiment(&l, &r, a.sites, &rho, &mode)?;
    let (x1, x2, x3) = bloch_vector(&rho);
    report.inputs = json!({ "coin": a.coin, "N": a.sites, "rho": a.rho, "bloch": [x1, x2, x3], "mode": out.mode });
    report.line("coin", &a.coin);
    report.line("sites", a.sites);
    report.line("mean time from 1 to N", match out.stderr {
        Some(se) => format!("{} ± {}", fmt(out.value), fmt(se)),
        None => fmt(out.value),
    });
    report.line("(N−1)² + 2x₁", fmt(out.conjecture));
    report.line("residual", sci(out.conjecture_residual));
    report.line("classical (N−1)²", fmt(out.classical_baseline));
    if let Some(t) = out.timeouts.filter(|t| *t > 0) {
        report.note(format!("{t} trajectories timed out and are excluded from the mean"));
    }
    report.results = serde_json::to_value(&out).expect("serializable");
    Ok(())
}
