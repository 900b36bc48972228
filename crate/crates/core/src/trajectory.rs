//! Monte Carlo quantum trajectories and the path-walk experiments.
//!
//! A trajectory at site `j` with density `ρ` jumps to `i` with probability
//! `p(j, i) = Tr(B_ij ρ B_ij*)` and continues with `B_ij ρ B_ij* / p(j, i)`.
//! Every trajectory draws from its own ChaCha8 stream (the master seed picks
//! the key, the trajectory index picks the stream), so estimates do not depend
//! on how the work is split across threads.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{OqwError, Result};
use crate::exec::{par_map, Execution};
use crate::hitting::hitting_bundle;
use crate::model::{block_rep, build_npath, OqwModel};
use crate::tensor::{bloch_vector, ComplexMatrix};

/// Allowed drift of `Σ_i p(j, i)` from 1 before a warning is logged.
pub const RENORMALIZATION_GUARD: f64 = 1e-10;
/// Total jump probability below which a step is degenerate.
pub const DEGENERATE_MASS: f64 = 1e-14;

/// Effects grouped by source site, with their adjoints.
#[derive(Clone, Debug)]
pub struct Sampler {
    degree: usize,
    moves: Vec<Vec<(usize, ComplexMatrix, ComplexMatrix)>>,
}

impl Sampler {
    pub fn new(model: &OqwModel) -> Result<Self> {
        model.ensure_valid(crate::model::MODEL_TOL)?;
        let moves = (0..model.sites())
            .map(|j| {
                model
                    .effects_from(j)
                    .map(|(i, b)| (i, b.clone(), b.adjoint()))
                    .collect()
            })
            .collect();
        Ok(Sampler { degree: model.degree(), moves })
    }

    pub fn sites(&self) -> usize {
        self.moves.len()
    }

    /// One jump from site `j`.
    pub fn step<R: Rng + ?Sized>(&self, j: usize, rho: &ComplexMatrix, rng: &mut R) -> Result<(usize, ComplexMatrix)> {
        let candidates = &self.moves[j];
        let mut weights = Vec::with_capacity(candidates.len());
        let mut images = Vec::with_capacity(candidates.len());
        for (_, b, b_adj) in candidates {
            let img = &(b * rho) * b_adj;
            weights.push(img.trace().re.max(0.0));
            images.push(img);
        }
        let total: f64 = weights.iter().sum();
        if total <= DEGENERATE_MASS {
            return Err(OqwError::DegenerateStep { site: j });
        }
        if (total - rho.trace().re).abs() > RENORMALIZATION_GUARD {
            warn!("jump probabilities from site {j} sum to {total}; renormalizing");
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = weights.len() - 1;
        for (t, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = t;
                break;
            }
        }
        // skip zero-weight tails when rounding lands on the last slot
        while weights[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        let next = images.swap_remove(pick).scale_real(1.0 / weights[pick]).hermitian_part();
        Ok((candidates[pick].0, next))
    }

    /// Steps until `target` or `max_steps`; `None` on timeout.
    pub fn hitting_time<R: Rng + ?Sized>(
        &self,
        start: usize,
        rho: &ComplexMatrix,
        target: usize,
        max_steps: usize,
        rng: &mut R,
    ) -> Result<Option<usize>> {
        if start == target {
            return Ok(Some(0));
        }
        let mut site = start;
        let mut state = rho.clone();
        for r in 1..=max_steps {
            let (next, next_state) = self.step(site, &state, rng)?;
            if next == target {
                return Ok(Some(r));
            }
            site = next;
            state = next_state;
        }
        Ok(None)
    }

    /// Sites and densities along one trajectory of `steps` jumps.
    pub fn path<R: Rng + ?Sized>(&self, start: usize, rho: &ComplexMatrix, steps: usize, rng: &mut R) -> Result<Vec<(usize, ComplexMatrix)>> {
        let mut out = vec![(start, rho.clone())];
        for _ in 0..steps {
            let (s, r) = out.last().expect("nonempty");
            let next = self.step(*s, r, rng)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

/// One jump of `model` from site `j`.
pub fn sample_step<R: Rng + ?Sized>(model: &OqwModel, j: usize, rho: &ComplexMatrix, rng: &mut R) -> Result<(usize, ComplexMatrix)> {
    Sampler::new(model)?.step(j, rho, rng)
}

/// Random stream of trajectory `index`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug)]
pub struct TrajectoryConfig {
    pub n_traj: usize,
    pub max_steps: usize,
    pub master_seed: u64,
    pub target: usize,
    pub start_site: usize,
    pub start_rho: ComplexMatrix,
    /// Histogram bins `r = 0..=histogram_len`.
    pub histogram_len: usize,
    pub exec: Execution,
}

impl TrajectoryConfig {
    pub fn new(target: usize, start_site: usize, start_rho: ComplexMatrix) -> Self {
        TrajectoryConfig {
            n_traj: 100_000,
            max_steps: 10_000,
            master_seed: 0x5eed,
            target,
            start_site,
            start_rho,
            histogram_len: 10,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HittingEstimate {
    /// Mean over trajectories that reached the target.
    pub mean: f64,
    pub stderr: f64,
    pub timeouts: usize,
    /// Trajectories that reached the target.
    pub samples: usize,
    /// `samples / n_traj`.
    pub hit_fraction: f64,
    /// Count of first visits at each `r ≤ histogram_len`.
    pub histogram: Vec<u64>,
    pub n_traj: usize,
    pub master_seed: u64,
}

/// Timeout fraction that triggers a warning.
pub const TIMEOUT_WARNING: f64 = 1e-6;

pub fn sample_hitting_time(model: &OqwModel, config: &TrajectoryConfig) -> Result<HittingEstimate> {
    if config.n_traj == 0 || config.max_steps == 0 {
        return Err(OqwError::InvalidParameter("n_traj and max_steps must be positive".into()));
    }
    let k = model.sites();
    for idx in [config.target, config.start_site] {
        if idx >= k {
            return Err(OqwError::IndexOutOfRange { index: idx, len: k });
        }
    }
    if config.start_rho.dim() != model.degree() {
        return Err(OqwError::DimensionMismatch { expected: model.degree(), found: config.start_rho.dim() });
    }
    let sampler = Sampler::new(model)?;
    let times: Vec<Result<Option<usize>>> = par_map(config.exec, (0..config.n_traj as u64).collect(), |t| {
        let mut rng = trajectory_rng(config.master_seed, t);
        sampler.hitting_time(config.start_site, &config.start_rho, config.target, config.max_steps, &mut rng)
    });

    // integer accumulation keeps the result independent of scheduling
    let mut sum: u128 = 0;
    let mut sum_sq: u128 = 0;
    let mut samples = 0usize;
    let mut timeouts = 0usize;
    let mut histogram = vec![0u64; config.histogram_len + 1];
    for t in times {
        match t? {
            Some(r) => {
                samples += 1;
                sum += r as u128;
                sum_sq += (r as u128) * (r as u128);
                if let Some(slot) = histogram.get_mut(r) {
                    *slot += 1;
                }
            }
            None => timeouts += 1,
        }
    }
    let timeout_fraction = timeouts as f64 / config.n_traj as f64;
    if timeout_fraction > TIMEOUT_WARNING {
        warn!("{timeouts} of {} trajectories hit the {}-step cap", config.n_traj, config.max_steps);
    }
    let (mean, stderr) = if samples == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let m = samples as f64;
        let mean = sum as f64 / m;
        let var = if samples > 1 {
            ((sum_sq as f64) - m * mean * mean).max(0.0) / (m - 1.0)
        } else {
            0.0
        };
        (mean, (var / m).sqrt())
    };
    Ok(HittingEstimate {
        mean,
        stderr,
        timeouts,
        samples,
        hit_fraction: samples as f64 / config.n_traj as f64,
        histogram,
        n_traj: config.n_traj,
        master_seed: config.master_seed,
    })
}

#[derive(Clone, Debug)]
pub enum NpathMode {
    Exact,
    Sampled { n_traj: usize, master_seed: u64, max_steps: usize, exec: Execution },
}

#[derive(Clone, Debug, Serialize)]
pub struct NpathReport {
    pub sites: usize,
    pub x1: f64,
    /// `k_{N1}(ρ)`: mean time to reach site `N` from site 1.
    pub value: f64,
    pub stderr: Option<f64>,
    pub timeouts: Option<usize>,
    /// `(N − 1)² + 2 x₁`.
    pub conjecture: f64,
    pub conjecture_residual: f64,
    /// `(N − 1)²`.
    pub classical_baseline: f64,
    pub mode: &'static str,
}

/// Mean time for the `N`-path walk started at site 1 with `ρ` to reach site `N`.
pub fn npath_experiment(l: &ComplexMatrix, r: &ComplexMatrix, sites: usize, rho: &ComplexMatrix, mode: &NpathMode) -> Result<NpathReport> {
    let model = build_npath(l, r, sites)?;
    let x1 = if rho.dim() == 2 { bloch_vector(rho).0 } else { 0.0 };
    let target = sites - 1;
    let (value, stderr, timeouts, mode_name) = match mode {
        NpathMode::Exact => {
            let b = hitting_bundle(&block_rep(&model)?, target)?;
            (b.mht_value(0, rho), None, None, "exact")
        }
        NpathMode::Sampled { n_traj, master_seed, max_steps, exec } => {
            let mut cfg = TrajectoryConfig::new(target, 0, rho.clone());
            cfg.n_traj = *n_traj;
            cfg.master_seed = *master_seed;
            cfg.max_steps = *max_steps;
            cfg.exec = *exec;
            let est = sample_hitting_time(&model, &cfg)?;
            (est.mean, Some(est.stderr), Some(est.timeouts), "sampled")
        }
    };
    let baseline = ((sites - 1) * (sites - 1)) as f64;
    let conjecture = baseline + 2.0 * x1;
    Ok(NpathReport {
        sites,
        x1,
        value,
        stderr,
        timeouts,
        conjecture,
        conjecture_residual: (value - conjecture).abs(),
        classical_baseline: baseline,
        mode: mode_name,
    })
}

/// Coin families with a closed form for `Tr(C ρ C*)` over words `C = C_m ⋯ C_1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoinFamily {
    /// Rows of the Hadamard matrix.
    HadamardSplit,
    /// `L = [[x, y], [0, 0]]`, `R = [[0, 0], [z, w]]`.
    General { x: f64, y: f64, z: f64, w: f64 },
}

impl CoinFamily {
    fn entries(self) -> (f64, f64, f64, f64) {
        match self {
            CoinFamily::HadamardSplit => {
                let s = 1.0 / 2f64.sqrt();
                (s, s, s, -s)
            }
            CoinFamily::General { x, y, z, w } => (x, y, z, w),
        }
    }

    pub fn coins(self) -> (ComplexMatrix, ComplexMatrix) {
        let (x, y, z, w) = self.entries();
        crate::model::coins::general(x, y, z, w)
    }

    /// Closed form for the word whose letters are `true` for `L`, first letter applied first.
    pub fn closed_form(self, word: &[bool], rho: &ComplexMatrix) -> f64 {
        let (x, y, z, w) = self.entries();
        if word.is_empty() {
            return rho.trace().re;
        }
        if let CoinFamily::HadamardSplit = self {
            let sign = if word[0] { 1.0 } else { -1.0 };
            let x1 = bloch_vector(rho).0;
            return (1.0 + sign * x1) / 2f64.powi(word.len() as i32);
        }
        let mut weight = 1.0;
        for pair in word.windows(2) {
            let c = match (pair[0], pair[1]) {
                (true, true) => x,
                (false, true) => y,
                (true, false) => z,
                (false, false) => w,
            };
            weight *= c * c;
        }
        let (a, b) = if word[0] { (x, y) } else { (z, w) };
        let first = a * a * rho.get(0, 0).re + b * b * rho.get(1, 1).re + 2.0 * a * b * rho.get(0, 1).re;
        weight * first
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TracePatternReport {
    pub words_checked: usize,
    pub max_residual: f64,
}

/// Direct `Tr(C ρ C*)` against the closed form over all words up to `max_len`.
pub fn trace_pattern_check(family: CoinFamily, rho: &ComplexMatrix, max_len: usize) -> Result<TracePatternReport> {
    if rho.dim() != 2 {
        return Err(OqwError::DimensionMismatch { expected: 2, found: rho.dim() });
    }
    let (l, r) = family.coins();
    let mut words_checked = 0;
    let mut max_residual = 0.0f64;
    for len in 1..=max_len {
        for bits in 0u64..(1u64 << len) {
            let word: Vec<bool> = (0..len).map(|t| bits >> t & 1 == 1).collect();
            let mut c = ComplexMatrix::identity(2);
            for &is_left in &word {
                c = (if is_left { &l } else { &r }) * &c;
            }
            let direct = (&(&c * rho) * &c.adjoint()).trace().re;
            max_residual = max_residual.max((direct - family.closed_form(&word, rho)).abs());
            words_checked += 1;
        }
    }
    Ok(TracePatternReport { words_checked, max_residual })
}
