//! Scenario runner: allocators (LEAF and two baselines) and per-frame
//! offloading policies, swept in parallel with deterministic output order.
//!
//! Baselines:
//! - `FACT_LIKE`: fixed governor frequency, even bandwidth split, model size
//!   chosen per client by minimizing `lambda1 * L - lambda2 * A` over the
//!   available sizes that meet the latency bound.
//! - `MINE`: the LEAF solver with both preference weights set to zero.
//!
//! Offloading policies all run on the LEAF configuration:
//! - `LEAF_AIO`: tracking budget from the orchestrator.
//! - `LEAF_FRUGAL`: offload when NCC to the last detected frame falls below a
//!   threshold.
//! - `LEAF_ONLY`: offload every frame.

use rayon::prelude::*;

use crate::aio::{self, Action, OffloadPreference, OrchestratorState, SceneModel};
use crate::energy::{self, ClientSpec, Configuration};
use crate::error::{Error, Result};
use crate::leaf::{self, Allocation};
use crate::metrics::{self, Frame};
use crate::profile::DeviceProfile;
use crate::report::{Aggregate, ClientRow, Report};
use crate::scenario::{AioSettings, Algorithm, Scenario, TraceSource};
use crate::trace;

/// PSNR stream with the frames it came from, when available.
///
/// `psnr[i]` is the similarity of frame `i + 1` to frame `i` for frame
/// sources, or the i-th trace value otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub psnr: Vec<f64>,
    pub frames: Option<Vec<Frame>>,
}

impl TraceData {
    pub fn from_psnr(psnr: Vec<f64>) -> Self {
        Self { psnr, frames: None }
    }

    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        let psnr = trace::consecutive_psnr(&frames)?;
        Ok(Self {
            psnr,
            frames: Some(frames),
        })
    }

    pub fn load(source: &TraceSource) -> Result<Self> {
        match source {
            TraceSource::Synthetic {
                seed,
                start,
                length,
                drift,
                noise,
            } => Ok(Self::from_psnr(trace::synth_trace(
                *seed, *start, *length, *drift, *noise,
            )?)),
            TraceSource::PsnrFile { path } => Ok(Self::from_psnr(trace::read_psnr_trace(path)?)),
            TraceSource::PgmDir { path } => Self::from_frames(trace::load_pgm_dir(path)?),
        }
    }
}

/// Model size minimizing `lambda1 * L - lambda2 * A` at fixed `f` and `b`
/// among the sizes that meet the client's latency bound; ties go to the
/// smaller size. Falls back to the smallest size when none meets the bound.
pub fn fact_like_size(profile: &DeviceProfile, spec: &ClientSpec, f: f64, b: f64) -> Result<f64> {
    let mut best = (f64::INFINITY, profile.s_min());
    for &s in &profile.detector.model_sizes {
        let lat = energy::latency_per_frame(profile, &Configuration::new(f, s, b))?.total;
        if lat > spec.l_max {
            continue;
        }
        let cost = spec.lambda1 * lat - spec.lambda2 * energy::accuracy(profile, s);
        if cost < best.0 {
            best = (cost, s);
        }
    }
    Ok(best.1)
}

/// FACT-like configurations for the given clients.
pub fn fact_like_configs(
    profile: &DeviceProfile,
    specs: &[ClientSpec],
    b_max: f64,
) -> Result<Vec<Configuration>> {
    if specs.is_empty() || !(b_max > 0.0) {
        return Err(Error::InvalidInput("need clients and b_max > 0".into()));
    }
    let f = profile.cpu.governor_default;
    let b = b_max / specs.len() as f64;
    specs
        .iter()
        .map(|spec| {
            Ok(Configuration::new(
                f,
                fact_like_size(profile, spec, f, b)?,
                b,
            ))
        })
        .collect()
}

/// FACT-like configurations for a scenario at one sweep point.
pub fn run_fact_like(
    profile: &DeviceProfile,
    scenario: &Scenario,
    b_max: f64,
    ratio: Option<f64>,
) -> Result<Vec<Configuration>> {
    fact_like_configs(
        profile,
        &scenario.client_specs(profile, b_max, ratio)?,
        b_max,
    )
}

/// Specs with both preference weights zeroed, as optimized by `MINE`.
pub fn energy_only(specs: &[ClientSpec]) -> Vec<ClientSpec> {
    specs
        .iter()
        .map(|s| ClientSpec {
            lambda1: 0.0,
            lambda2: 0.0,
            ..*s
        })
        .collect()
}

fn allocator_row(
    profile: &DeviceProfile,
    algorithm: Algorithm,
    point: &Point,
    client: usize,
    spec: &ClientSpec,
    cfg: &Configuration,
) -> Result<ClientRow> {
    let e = energy::energy_per_frame(profile, spec, cfg)?;
    Ok(ClientRow {
        algorithm,
        b_max: point.b_max,
        preference_ratio: point.preference_ratio,
        offload_ratio: point.offload_ratio,
        client,
        fps: spec.fps,
        lambda1: spec.lambda1,
        lambda2: spec.lambda2,
        l_max: spec.l_max,
        f: cfg.f,
        s: cfg.s,
        b: cfg.b,
        energy: e.total,
        latency: e.latency,
        accuracy: energy::accuracy(profile, cfg.s),
        q: energy::objective_term(profile, spec, cfg)?,
        offload_fraction: 1.0,
        offloaded_mb: energy::payload_megabits(profile, cfg.s),
        mean_iou: None,
        feasible: leaf::latency_within_bound(e.latency, spec.l_max),
        frames: None,
        detects: None,
        e_obj: None,
        e_trk: None,
        total_energy: None,
    })
}

/// Rows of NaN metrics for a run the solver could not satisfy.
fn infeasible_report(
    algorithm: Algorithm,
    point: &Point,
    specs: &[ClientSpec],
    clients: Vec<usize>,
) -> Report {
    let rows: Vec<ClientRow> = specs
        .iter()
        .enumerate()
        .map(|(k, spec)| ClientRow {
            algorithm,
            b_max: point.b_max,
            preference_ratio: point.preference_ratio,
            offload_ratio: point.offload_ratio,
            client: k,
            fps: spec.fps,
            lambda1: spec.lambda1,
            lambda2: spec.lambda2,
            l_max: spec.l_max,
            f: f64::NAN,
            s: f64::NAN,
            b: f64::NAN,
            energy: f64::NAN,
            latency: f64::NAN,
            accuracy: f64::NAN,
            q: f64::NAN,
            offload_fraction: f64::NAN,
            offloaded_mb: f64::NAN,
            mean_iou: None,
            feasible: false,
            frames: None,
            detects: None,
            e_obj: None,
            e_trk: None,
            total_energy: None,
        })
        .collect();
    Report {
        algorithm,
        b_max: point.b_max,
        preference_ratio: point.preference_ratio,
        offload_ratio: point.offload_ratio,
        aggregate: Aggregate::from_rows(&rows),
        rows,
        infeasible_clients: clients,
        allocation: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    b_max: f64,
    preference_ratio: Option<f64>,
    offload_ratio: Option<f64>,
}

/// Runs one allocator at one bandwidth and preference point.
pub fn run_allocator(
    profile: &DeviceProfile,
    scenario: &Scenario,
    algorithm: Algorithm,
    b_max: f64,
    preference_ratio: Option<f64>,
) -> Result<Report> {
    let point = Point {
        b_max,
        preference_ratio,
        offload_ratio: None,
    };
    let specs = scenario.client_specs(profile, b_max, preference_ratio)?;
    let solved = match algorithm {
        Algorithm::Leaf => leaf::solve(profile, &specs, &scenario.solver, b_max),
        Algorithm::Mine => leaf::solve(profile, &energy_only(&specs), &scenario.solver, b_max),
        Algorithm::FactLike => {
            let configs = fact_like_configs(profile, &specs, b_max)?;
            return finish_allocator(profile, algorithm, &point, &specs, &configs, None);
        }
        other => {
            return Err(Error::InvalidInput(format!("{other} is not an allocator")));
        }
    };
    match solved {
        Ok(alloc) => {
            let configs = alloc.configs.clone();
            finish_allocator(profile, algorithm, &point, &specs, &configs, Some(alloc))
        }
        Err(Error::Infeasible { clients }) => {
            Ok(infeasible_report(algorithm, &point, &specs, clients))
        }
        Err(e) => Err(e),
    }
}

fn finish_allocator(
    profile: &DeviceProfile,
    algorithm: Algorithm,
    point: &Point,
    specs: &[ClientSpec],
    configs: &[Configuration],
    allocation: Option<Allocation>,
) -> Result<Report> {
    let rows: Vec<ClientRow> = specs
        .iter()
        .zip(configs)
        .enumerate()
        .map(|(k, (spec, cfg))| allocator_row(profile, algorithm, point, k, spec, cfg))
        .collect::<Result<_>>()?;
    Ok(Report {
        algorithm,
        b_max: point.b_max,
        preference_ratio: point.preference_ratio,
        offload_ratio: point.offload_ratio,
        aggregate: Aggregate::from_rows(&rows),
        rows,
        infeasible_clients: Vec::new(),
        allocation,
    })
}

/// Every allocator in the scenario at every bandwidth and preference point.
/// Reports come back ordered by bandwidth, then preference, then algorithm.
pub fn run_leaf_scenario(profile: &DeviceProfile, scenario: &Scenario) -> Result<Vec<Report>> {
    scenario.validate()?;
    let algorithms: Vec<Algorithm> = scenario
        .algorithms
        .iter()
        .copied()
        .filter(|a| !a.is_offload_policy())
        .collect();
    if algorithms.is_empty() {
        return Err(Error::InvalidInput(
            "scenario lists no allocator algorithms".into(),
        ));
    }
    let mut points = Vec::new();
    for &b in &scenario.b_max {
        for r in scenario.preference_points() {
            for &a in &algorithms {
                points.push((b, r, a));
            }
        }
    }
    points
        .par_iter()
        .map(|&(b, r, a)| run_allocator(profile, scenario, a, b, r))
        .collect()
}

/// Outcome of simulating one client under one offloading policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyRun {
    pub frames: u64,
    pub detects: u64,
    /// `detects * e_obj + tracks * e_trk`, J.
    pub total_energy: f64,
    pub mean_latency: f64,
    pub mean_iou: f64,
}

/// Per-client inputs of a policy simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyCosts {
    pub fps: u32,
    /// Energy of one detection at the LEAF configuration, J.
    pub e_obj: f64,
    /// Service latency of one detection, s.
    pub l_obj: f64,
    /// Energy of one tracked frame, J.
    pub e_trk: f64,
    /// Latency of one tracked frame, s.
    pub l_trk: f64,
}

/// NCC to the last detected frame estimated from accumulated MSE, for traces
/// without pixels: `1 / sqrt(1 + sum_mse / variance)`.
pub fn ncc_from_drift(accumulated_mse: f64, variance: f64) -> f64 {
    1.0 / (1.0 + accumulated_mse / variance).sqrt()
}

fn frame_ncc(a: &Frame, b: &Frame) -> Result<f64> {
    match metrics::ncc(a, b) {
        Err(Error::DegenerateFrame) => Ok(if a == b { 1.0 } else { 0.0 }),
        other => other,
    }
}

/// Simulates one client over the trace. The first frame is always detected.
/// A detected frame scores IOU 1 (the detection is the reference box); a
/// tracked frame scores the scene fit at its observed consecutive-frame PSNR.
pub fn simulate_policy(
    policy: Algorithm,
    trace: &TraceData,
    costs: &PolicyCosts,
    settings: &AioSettings,
    pref: &OffloadPreference,
) -> Result<PolicyRun> {
    if !policy.is_offload_policy() {
        return Err(Error::InvalidInput(format!(
            "{policy} is not an offloading policy"
        )));
    }
    if trace.psnr.is_empty() {
        return Err(Error::Trace("empty trace".into()));
    }
    let scene: &SceneModel = &settings.scene;
    let mut state = OrchestratorState::new(
        aio::window_for_fps(costs.fps),
        settings.decay,
        costs.e_obj,
        costs.e_trk,
        settings.rho_max,
    )?;

    let mut next = Action::Detect;
    let (mut detects, mut tracks) = (0u64, 0u64);
    let (mut latency_sum, mut iou_sum) = (0.0, 0.0);
    let mut mse_since_detect = 0.0;
    let mut last_detected = 0usize;

    for (i, &p) in trace.psnr.iter().enumerate() {
        let action = match policy {
            Algorithm::LeafOnly => Action::Detect,
            Algorithm::LeafAio => next,
            _ if i == 0 => Action::Detect,
            _ => {
                let ncc = match &trace.frames {
                    Some(frames) => frame_ncc(&frames[i + 1], &frames[last_detected + 1])?,
                    None => ncc_from_drift(
                        mse_since_detect + metrics::mse_from_psnr(p),
                        settings.ncc_reference_variance,
                    ),
                };
                if ncc < settings.ncc_threshold {
                    Action::Detect
                } else {
                    Action::Track
                }
            }
        };

        match action {
            Action::Detect => {
                detects += 1;
                latency_sum += costs.l_obj;
                iou_sum += 1.0;
                mse_since_detect = 0.0;
                last_detected = i;
            }
            Action::Track => {
                tracks += 1;
                latency_sum += costs.l_trk;
                iou_sum += scene.iou(p.min(state.psnr_cap));
                mse_since_detect += metrics::mse_from_psnr(p);
            }
        }

        if policy == Algorithm::LeafAio {
            next = state.step(scene, pref, action == Action::Detect, p);
        }
    }

    let frames = detects + tracks;
    let n = frames as f64;
    Ok(PolicyRun {
        frames,
        detects,
        total_energy: detects as f64 * costs.e_obj + tracks as f64 * costs.e_trk,
        mean_latency: latency_sum / n,
        mean_iou: iou_sum / n,
    })
}

/// Per-client policy costs at the LEAF configuration.
pub fn policy_costs(
    profile: &DeviceProfile,
    spec: &ClientSpec,
    cfg: &Configuration,
) -> Result<PolicyCosts> {
    let e = energy::energy_per_frame(profile, spec, cfg)?;
    let trk = profile
        .tracking_cost(cfg.f)
        .ok_or_else(|| Error::InvalidProfile("profile has no tracking table".into()))?;
    Ok(PolicyCosts {
        fps: spec.fps,
        e_obj: e.total,
        l_obj: e.latency,
        e_trk: trk.energy,
        l_trk: trk.latency,
    })
}

/// Every offloading policy at every bandwidth and offload-preference point.
/// LEAF is solved once per bandwidth at the scenario's preferences. Reports
/// come back ordered by bandwidth, then offload ratio, then policy.
pub fn run_aio_scenario(profile: &DeviceProfile, scenario: &Scenario) -> Result<Vec<Report>> {
    scenario.validate()?;
    let source = scenario
        .trace
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("scenario has no trace source".into()))?;
    let trace = TraceData::load(source)?;
    let policies: Vec<Algorithm> = scenario
        .algorithms
        .iter()
        .copied()
        .filter(|a| a.is_offload_policy())
        .collect();
    if policies.is_empty() {
        return Err(Error::InvalidInput(
            "scenario lists no offloading policies".into(),
        ));
    }

    // Infeasible bandwidth points become flagged reports; other errors abort.
    type Solved = (
        f64,
        Vec<ClientSpec>,
        std::result::Result<Allocation, Vec<usize>>,
    );
    let solved: Vec<Solved> = scenario
        .b_max
        .par_iter()
        .map(|&b| {
            let specs = scenario.client_specs(profile, b, None)?;
            let alloc = match leaf::solve(profile, &specs, &scenario.solver, b) {
                Ok(a) => Ok(a),
                Err(Error::Infeasible { clients }) => Err(clients),
                Err(e) => return Err(e),
            };
            Ok((b, specs, alloc))
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for (b, specs, alloc) in &solved {
        for ratio in scenario.offload_points() {
            for &policy in &policies {
                jobs.push((*b, specs, alloc, ratio, policy));
            }
        }
    }
    jobs.par_iter()
        .map(|&(b, specs, alloc, ratio, policy)| {
            let point = Point {
                b_max: b,
                preference_ratio: None,
                offload_ratio: Some(ratio),
            };
            let alloc = match alloc {
                Ok(a) => a,
                Err(clients) => {
                    return Ok(infeasible_report(policy, &point, specs, clients.clone()))
                }
            };
            let pref = OffloadPreference::from_ratio(ratio)?;
            let rows: Vec<ClientRow> = specs
                .iter()
                .zip(&alloc.configs)
                .enumerate()
                .map(|(k, (spec, cfg))| {
                    let costs = policy_costs(profile, spec, cfg)?;
                    let run = simulate_policy(policy, &trace, &costs, &scenario.aio, &pref)?;
                    let mut row = allocator_row(profile, policy, &point, k, spec, cfg)?;
                    let n = run.frames as f64;
                    row.energy = run.total_energy / n;
                    row.latency = run.mean_latency;
                    row.offload_fraction = run.detects as f64 / n;
                    row.offloaded_mb =
                        run.detects as f64 * energy::payload_megabits(profile, cfg.s) / n;
                    row.mean_iou = Some(run.mean_iou);
                    row.frames = Some(run.frames);
                    row.detects = Some(run.detects);
                    row.e_obj = Some(costs.e_obj);
                    row.e_trk = Some(costs.e_trk);
                    row.total_energy = Some(run.total_energy);
                    Ok(row)
                })
                .collect::<Result<_>>()?;
            Ok(Report {
                algorithm: policy,
                b_max: b,
                preference_ratio: None,
                offload_ratio: Some(ratio),
                aggregate: Aggregate::from_rows(&rows),
                rows,
                infeasible_clients: Vec::new(),
                allocation: None,
            })
        })
        .collect()
}

/// Runs whatever the scenario lists: allocators, then offloading policies.
pub fn run_scenario(profile: &DeviceProfile, scenario: &Scenario) -> Result<Vec<Report>> {
    let mut out = Vec::new();
    if scenario.algorithms.iter().any(|a| !a.is_offload_policy()) {
        out.extend(run_leaf_scenario(profile, scenario)?);
    }
    if scenario.algorithms.iter().any(|a| a.is_offload_policy()) {
        out.extend(run_aio_scenario(profile, scenario)?);
    }
    Ok(out)
}
