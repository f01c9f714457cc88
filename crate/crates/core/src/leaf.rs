//! Multi-client configuration optimizer.
//!
//! Block-coordinate descent over CPU frequency, relaxed model size and
//! bandwidth. Frequency and size blocks use projected gradient steps on their
//! latency-feasible intervals; the bandwidth block solves its convex
//! subproblem through the Lagrangian dual with the closed-form share
//! `b_k = sqrt(Phi_k / (r_max_slope * mu))`. Relaxed sizes are rounded to the
//! nearest available model at the end.

use serde::{Deserialize, Serialize};

use crate::energy::{self, ClientSpec, Configuration};
use crate::error::{Error, Result};
use crate::profile::DeviceProfile;

/// Relative slack when testing a latency bound.
const FEASIBILITY_SLACK: f64 = 1e-9;
/// Grid resolution used to locate the latency-feasible part of a block interval.
const FEASIBILITY_SAMPLES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial step for frequency updates, GHz^2/J.
    pub gamma: f64,
    /// Initial step for model-size updates, px^2/J.
    pub eta: f64,
    /// Relative change of Q that ends the outer loop.
    pub tau: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Absolute change of a block variable that ends its inner loop.
    pub inner_tol: f64,
    pub gradient: GradientMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            eta: 2000.0,
            tau: 1e-6,
            max_outer_iters: 200,
            max_inner_iters: 10_000,
            inner_tol: 1e-6,
            gradient: GradientMode::Analytic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let steps = [self.gamma, self.eta];
        if steps.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput("step sizes must be > 0".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidInput("tau must lie in (0, 1)".into()));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::InvalidInput("iteration caps must be >= 1".into()));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::InvalidInput("inner_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Lagrange multipliers of the bandwidth-sum and per-client latency constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub mu: f64,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Final per-client configurations with discrete model sizes.
    pub configs: Vec<Configuration>,
    /// Configurations before rounding the model sizes.
    pub relaxed: Vec<Configuration>,
    /// Q at `configs`, after re-tuning frequency and bandwidth for the rounded sizes.
    pub q_value: f64,
    /// Q at `relaxed`.
    pub relaxed_q: f64,
    /// `q_value - relaxed_q`.
    pub rounding_gap: f64,
    /// Q at the initial point.
    pub initial_q: f64,
    /// Q after each outer iteration, relaxed sizes.
    pub trace: Vec<f64>,
    pub duals: DualState,
    pub iterations: usize,
    /// False when the outer loop hit its iteration cap.
    pub converged: bool,
}

/// Default latency bound: twice the latency at `(f_max, s_min, b_max / clients)`.
pub fn default_latency_bound(profile: &DeviceProfile, clients: usize, b_max: f64) -> Result<f64> {
    if clients == 0 || !(b_max > 0.0) {
        return Err(Error::InvalidInput("need clients > 0 and b_max > 0".into()));
    }
    let cfg = Configuration::new(profile.cpu.f_max, profile.s_min(), b_max / clients as f64);
    Ok(2.0 * energy::latency_per_frame(profile, &cfg)?.total)
}

/// Sum of the objective terms of all clients.
pub fn total_objective(
    profile: &DeviceProfile,
    specs: &[ClientSpec],
    configs: &[Configuration],
) -> Result<f64> {
    specs
        .iter()
        .zip(configs)
        .map(|(spec, cfg)| energy::objective_term(profile, spec, cfg))
        .sum()
}

pub fn latency_within_bound(latency: f64, l_max: f64) -> bool {
    latency <= l_max * (1.0 + FEASIBILITY_SLACK)
}

#[derive(Clone, Copy)]
enum Block {
    Frequency,
    ModelSize,
}

impl Block {
    fn get(self, cfg: &Configuration) -> f64 {
        match self {
            Block::Frequency => cfg.f,
            Block::ModelSize => cfg.s,
        }
    }

    fn with(self, cfg: &Configuration, x: f64) -> Configuration {
        match self {
            Block::Frequency => Configuration { f: x, ..*cfg },
            Block::ModelSize => Configuration { s: x, ..*cfg },
        }
    }

    fn bounds(self, profile: &DeviceProfile) -> (f64, f64) {
        match self {
            Block::Frequency => (profile.cpu.f_min, profile.cpu.f_max),
            Block::ModelSize => (profile.s_min(), profile.s_max()),
        }
    }
}

fn block_gradient(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
    block: Block,
    mode: GradientMode,
) -> Result<f64> {
    match mode {
        GradientMode::Analytic => {
            let g = energy::objective_gradient(profile, spec, cfg)?;
            Ok(match block {
                Block::Frequency => g.f,
                Block::ModelSize => g.s,
            })
        }
        GradientMode::FiniteDifference => {
            let (lo, hi) = block.bounds(profile);
            let h = 1e-6 * (hi - lo);
            let x = block.get(cfg);
            let (a, b) = ((x - h).max(lo), (x + h).min(hi));
            let qa = energy::objective_term(profile, spec, &block.with(cfg, a))?;
            let qb = energy::objective_term(profile, spec, &block.with(cfg, b))?;
            Ok((qb - qa) / (b - a))
        }
    }
}

/// Union of closed intervals inside `[lo, hi]` where `latency(x) <= l_max`.
/// When no sample is feasible the least-latency sample is returned as a
/// degenerate interval so the block still has a well-defined projection.
fn feasible_intervals(
    lo: f64,
    hi: f64,
    l_max: f64,
    latency: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<(f64, f64)>> {
    let n = FEASIBILITY_SAMPLES;
    let xs: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let lat: Vec<f64> = xs.iter().map(|&x| latency(x)).collect::<Result<_>>()?;
    // Strict here so that the bandwidth block can always reproduce the
    // current shares; the slack only applies when checking results.
    let ok = |l: f64| l <= l_max;

    // Boundary between a feasible and an infeasible sample.
    let refine = |mut good: f64, mut bad: f64| -> Result<f64> {
        for _ in 0..80 {
            let mid = 0.5 * (good + bad);
            if ok(latency(mid)?) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(good)
    };

    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..=n {
        let feasible = ok(lat[i]);
        match (feasible, start) {
            (true, None) => {
                start = Some(if i == 0 {
                    xs[0]
                } else {
                    refine(xs[i], xs[i - 1])?
                });
            }
            (false, Some(a)) => {
                intervals.push((a, refine(xs[i - 1], xs[i])?));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        intervals.push((a, hi));
    }
    if intervals.is_empty() {
        let best = (0..=n)
            .min_by(|&a, &b| lat[a].total_cmp(&lat[b]))
            .expect("nonempty grid");
        intervals.push((xs[best], xs[best]));
    }
    Ok(intervals)
}

fn project(x: f64, intervals: &[(f64, f64)]) -> f64 {
    let mut best = intervals[0].0;
    let mut dist = f64::INFINITY;
    for &(a, b) in intervals {
        let p = x.clamp(a, b);
        let d = (p - x).abs();
        if d < dist {
            dist = d;
            best = p;
        }
    }
    best
}

fn update_block(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
    solver_cfg: &SolverConfig,
    block: Block,
) -> Result<f64> {
    let (lo, hi) = block.bounds(profile);
    let step0 = match block {
        Block::Frequency => solver_cfg.gamma,
        Block::ModelSize => solver_cfg.eta,
    };
    let intervals = feasible_intervals(lo, hi, spec.l_max, |x| {
        Ok(energy::latency_per_frame(profile, &block.with(cfg, x))?.total)
    })?;
    let q = |x: f64| energy::objective_term(profile, spec, &block.with(cfg, x));

    let mut x = project(block.get(cfg), &intervals);
    let mut qx = q(x)?;
    for _ in 0..solver_cfg.max_inner_iters {
        let g = block_gradient(
            profile,
            spec,
            &block.with(cfg, x),
            block,
            solver_cfg.gradient,
        )?;
        if g == 0.0 {
            break;
        }
        // Constant step, halved only when the projected step fails to descend.
        let mut step = step0;
        let mut accepted = None;
        for _ in 0..64 {
            let cand = project(x - step * g, &intervals);
            if cand == x {
                break;
            }
            let qc = q(cand)?;
            if qc <= qx {
                accepted = Some((cand, qc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, qc)) = accepted else { break };
        let moved = (cand - x).abs();
        x = cand;
        qx = qc;
        if moved < solver_cfg.inner_tol {
            break;
        }
    }
    Ok(x)
}

/// Projected-gradient minimization of one client's objective over CPU
/// frequency with model size and bandwidth held fixed.
pub fn update_frequency(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
    solver_cfg: &SolverConfig,
) -> Result<f64> {
    update_block(profile, spec, cfg, solver_cfg, Block::Frequency)
}

/// Projected-gradient minimization over the relaxed model size on
/// `[s_min, s_max]` with frequency and bandwidth held fixed.
pub fn update_model_size(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
    solver_cfg: &SolverConfig,
) -> Result<f64> {
    update_block(profile, spec, cfg, solver_cfg, Block::ModelSize)
}

/// Per-client data needed by the dual loop.
struct Share {
    /// Per-second multiplier of the transmission latency at beta = 0.
    base: f64,
    /// `payload / r*(f)`, Mb.
    weight: f64,
    /// Transmission latency budget `l_max - l_cv - l_inf`, s.
    budget: f64,
}

/// Smallest set of clients whose removal makes the latency bounds reachable,
/// found by dropping the largest minimum shares first.
fn violating_clients(min_share: &[f64], b_max: f64) -> Vec<usize> {
    let mut hopeless: Vec<usize> = (0..min_share.len())
        .filter(|&k| !min_share[k].is_finite())
        .collect();
    if !hopeless.is_empty() {
        return hopeless;
    }
    let mut order: Vec<usize> = (0..min_share.len()).collect();
    order.sort_by(|&a, &b| min_share[b].total_cmp(&min_share[a]));
    let mut total: f64 = min_share.iter().sum();
    for k in order {
        if total <= b_max {
            break;
        }
        total -= min_share[k];
        hopeless.push(k);
    }
    hopeless.sort_unstable();
    hopeless
}

/// Bandwidth block: minimizes the sum of objective terms over `b` subject to
/// the bandwidth budget and the latency bounds, with frequencies and relaxed
/// sizes fixed.
///
/// For a given budget multiplier `mu` the Lagrangian minimizer is
/// `b_k = max(b_min_k, sqrt(base_k * w_k / (kappa * mu)))`, and the latency
/// multiplier of a pinned client follows in closed form. The remaining dual
/// problem in `mu` is solved exactly by water-filling: clients whose free share
/// falls below `b_min_k` are pinned until the free set is stable.
pub fn allocate_bandwidth(
    profile: &DeviceProfile,
    specs: &[ClientSpec],
    configs: &[Configuration],
    b_max: f64,
) -> Result<(Vec<f64>, DualState)> {
    if specs.is_empty() || specs.len() != configs.len() {
        return Err(Error::InvalidInput(
            "specs and configs must be nonempty and aligned".into(),
        ));
    }
    if !(b_max > 0.0) {
        return Err(Error::InvalidInput(format!("b_max {b_max}")));
    }
    let kappa = profile.regression.r_max_slope;
    let shares: Vec<Share> = specs
        .iter()
        .zip(configs)
        .map(|(spec, cfg)| {
            let weight = energy::transmission_weight(profile, spec, cfg.f, cfg.s, 0.0)?;
            let per_second_unit =
                energy::transmission_weight(profile, spec, cfg.f, cfg.s, 1.0)? - weight;
            let lat = energy::latency_per_frame(profile, cfg)?;
            Ok(Share {
                base: weight / per_second_unit,
                weight: per_second_unit,
                budget: spec.l_max - lat.l_cv - lat.l_inf,
            })
        })
        .collect::<Result<_>>()?;

    let min_share: Vec<f64> = shares
        .iter()
        .map(|sh| {
            if sh.budget > 0.0 {
                sh.weight / (kappa * sh.budget)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if min_share.iter().sum::<f64>() > b_max * (1.0 + FEASIBILITY_SLACK) {
        return Err(Error::Infeasible {
            clients: violating_clients(&min_share, b_max),
        });
    }

    // b_k = scale_k / sqrt(mu) for a free client.
    let scale: Vec<f64> = shares
        .iter()
        .map(|sh| (sh.base * sh.weight / kappa).sqrt())
        .collect();
    let mut pinned = vec![false; shares.len()];
    let mut mu;
    let mut passes = 0;
    loop {
        passes += 1;
        let fixed: f64 = (0..shares.len())
            .filter(|&k| pinned[k])
            .map(|k| min_share[k])
            .sum();
        let free_scale: f64 = (0..shares.len())
            .filter(|&k| !pinned[k])
            .map(|k| scale[k])
            .sum();
        let room = b_max - fixed;
        mu = if free_scale > 0.0 && room > 0.0 {
            (free_scale / room).powi(2)
        } else {
            // No budget left for free clients: the largest mu pinning everyone.
            (0..shares.len())
                .map(|k| (scale[k] / min_share[k]).powi(2))
                .fold(0.0, f64::max)
        };
        let mut changed = false;
        for k in 0..shares.len() {
            if !pinned[k] && scale[k] / mu.sqrt() < min_share[k] {
                pinned[k] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let b: Vec<f64> = (0..shares.len())
        .map(|k| {
            if pinned[k] {
                min_share[k]
            } else {
                scale[k] / mu.sqrt()
            }
        })
        .collect();
    let beta = (0..shares.len())
        .map(|k| {
            if pinned[k] {
                (kappa * mu * min_share[k] * min_share[k] / shares[k].weight - shares[k].base)
                    .max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok((
        b,
        DualState {
            mu,
            beta,
            iterations: passes,
            converged: true,
        },
    ))
}

/// Nearest available size, ties to the smaller one.
pub fn nearest_model_size(profile: &DeviceProfile, s_hat: f64) -> f64 {
    let mut best = profile.detector.model_sizes[0];
    for &s in &profile.detector.model_sizes {
        if (s - s_hat).abs() < (best - s_hat).abs() {
            best = s;
        }
    }
    best
}

/// Rounds one client's relaxed size to the nearest available size and
/// re-tunes its frequency for it. When rounding up cannot meet the latency
/// bound, the largest size not above the relaxed one is used instead.
fn round_client(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
    solver_cfg: &SolverConfig,
) -> Result<Configuration> {
    let retune = |s: f64| -> Result<Configuration> {
        let c = Configuration { s, ..*cfg };
        Ok(Configuration {
            f: update_frequency(profile, spec, &c, solver_cfg)?,
            ..c
        })
    };
    let nearest = nearest_model_size(profile, cfg.s);
    let rounded = retune(nearest)?;
    if nearest <= cfg.s
        || latency_within_bound(
            energy::latency_per_frame(profile, &rounded)?.total,
            spec.l_max,
        )
    {
        return Ok(rounded);
    }
    // Latency grows with s, so a size not above the relaxed one stays feasible.
    let floor = profile
        .detector
        .model_sizes
        .iter()
        .copied()
        .rfind(|&s| s <= cfg.s)
        .unwrap_or(nearest);
    retune(floor)
}

/// Runs the full block-coordinate descent and rounds the relaxed sizes.
pub fn solve(
    profile: &DeviceProfile,
    specs: &[ClientSpec],
    solver_cfg: &SolverConfig,
    b_max: f64,
) -> Result<Allocation> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("no clients".into()));
    }
    if !(b_max > 0.0) {
        return Err(Error::InvalidInput(format!("b_max {b_max}")));
    }
    solver_cfg.validate()?;
    for spec in specs {
        spec.validate()?;
    }

    let even = b_max / specs.len() as f64;
    let mut configs =
        vec![Configuration::new(profile.cpu.f_min, profile.s_min(), even); specs.len()];
    let initial_q = total_objective(profile, specs, &configs)?;

    let mut trace = Vec::new();
    let mut prev = initial_q;
    let mut duals = DualState {
        mu: 0.0,
        beta: vec![0.0; specs.len()],
        iterations: 0,
        converged: false,
    };
    let mut converged = false;
    let mut iterations = 0;
    while iterations < solver_cfg.max_outer_iters {
        iterations += 1;
        for (spec, cfg) in specs.iter().zip(configs.iter_mut()) {
            cfg.f = update_frequency(profile, spec, cfg, solver_cfg)?;
        }
        for (spec, cfg) in specs.iter().zip(configs.iter_mut()) {
            cfg.s = update_model_size(profile, spec, cfg, solver_cfg)?;
        }
        let (b, d) = allocate_bandwidth(profile, specs, &configs, b_max)?;
        for (cfg, bk) in configs.iter_mut().zip(b) {
            cfg.b = bk;
        }
        duals = d;

        let q = total_objective(profile, specs, &configs)?;
        trace.push(q);
        if ((q - prev) / q).abs() <= solver_cfg.tau {
            converged = true;
            break;
        }
        prev = q;
    }

    let relaxed = configs.clone();
    let relaxed_q = *trace.last().expect("at least one outer iteration");
    for (spec, cfg) in specs.iter().zip(configs.iter_mut()) {
        *cfg = round_client(profile, spec, cfg, solver_cfg)?;
    }

    // Frequency and bandwidth blocks again with the sizes held discrete.
    let mut q_value = total_objective(profile, specs, &configs)?;
    for _ in 0..solver_cfg.max_outer_iters {
        for (spec, cfg) in specs.iter().zip(configs.iter_mut()) {
            cfg.f = update_frequency(profile, spec, cfg, solver_cfg)?;
        }
        let (b, d) = allocate_bandwidth(profile, specs, &configs, b_max)?;
        for (cfg, bk) in configs.iter_mut().zip(b) {
            cfg.b = bk;
        }
        duals = d;
        let q = total_objective(profile, specs, &configs)?;
        let done = ((q - q_value) / q).abs() <= solver_cfg.tau;
        q_value = q;
        if done {
            break;
        }
    }

    Ok(Allocation {
        configs,
        relaxed,
        q_value,
        relaxed_q,
        rounding_gap: q_value - relaxed_q,
        initial_q,
        trace,
        duals,
        iterations,
        converged,
    })
}
