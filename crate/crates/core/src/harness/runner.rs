//! Building the inference model for a scenario and running repeated chains.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{ConsistencyIndex, PairConsistency};
use crate::error::{Error, Result};
use crate::filter::{mix_key, BirthPrior, KalmanObjectFilter, LinearGaussianModel, ObjectFilter, ParticleObjectFilter};
use crate::harness::config::{RunConfig, SamplerChoice};
use crate::harness::metrics::{association_metrics, AssociationMetrics};
use crate::mcmc::{run_baseline, run_chain, Budget, ChainOutcome, TraceRecord};
use crate::model::{MultiObjectParams, Scenario, TargetPossibility, TrackSet};
use crate::sim::{GroundTruth, SimParams};

/// Inference model: the possibilistic counterpart of the simulation
/// parameters, with `α_nd = 1 − p_d` and `α_ns = 1 − p_s`.
#[derive(Debug, Clone)]
pub struct Inference {
    pub model: LinearGaussianModel<f64>,
    pub birth: BirthPrior<f64>,
    pub params: MultiObjectParams,
    pub tau_prime: f64,
    pub particles: usize,
    pub particle_seed: u64,
}

impl Inference {
    pub fn new(sim: &SimParams, cfg: &RunConfig) -> Result<Self> {
        let model = LinearGaussianModel::nearly_constant_velocity(2, sim.dt, sim.sigma_a, sim.sigma)?;
        let birth = BirthPrior::isotropic(cfg.sigma_v, 2)?;
        let params = MultiObjectParams::new(1.0 - sim.p_d, 1.0 - sim.p_s, cfg.alpha_fa, cfg.alpha_birth)?;
        Ok(Self { model, birth, params, tau_prime: cfg.tau_prime, particles: cfg.particles, particle_seed: cfg.seed })
    }

    pub fn index(&self, scenario: &Scenario) -> Result<ConsistencyIndex> {
        let pc = PairConsistency::new(
            self.model.clone(),
            self.birth.clone(),
            self.params.alpha_nd,
            self.tau_prime,
            scenario.horizon(),
        )?;
        Ok(ConsistencyIndex::build(scenario, &pc))
    }

    pub fn kalman_target(&self, scenario: Scenario) -> Result<TargetPossibility<KalmanObjectFilter<f64>>> {
        let f = KalmanObjectFilter::new(self.model.clone(), self.birth.clone())?;
        Ok(TargetPossibility::new(scenario, self.params, f))
    }

    pub fn particle_target(&self, scenario: Scenario) -> Result<TargetPossibility<ParticleObjectFilter<f64>>> {
        let f = ParticleObjectFilter::new(self.model.clone(), self.birth.clone(), self.particles, self.particle_seed)?;
        Ok(TargetPossibility::new(scenario, self.params, f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Hisp,
    Baseline,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Hisp => "hisp",
            SamplerKind::Baseline => "baseline",
        }
    }
}

/// One chain of a smoothing run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub sampler: SamplerKind,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: ChainOutcome,
    pub metrics: Option<AssociationMetrics>,
}

/// Summary of one chain, as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sampler: SamplerKind,
    pub repeat: usize,
    pub seed: u64,
    pub best_log_pi: f64,
    pub iterations: u64,
    pub accepted: u64,
    pub partial: bool,
    pub max_drift: f64,
    pub n_tracks: usize,
    pub metrics: Option<AssociationMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothSummary {
    pub runs: Vec<RunSummary>,
    pub mean_best_log_pi: Vec<(SamplerKind, f64)>,
    pub ground_truth_log_pi: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SmoothReport {
    pub runs: Vec<RunRecord>,
    pub ground_truth_log_pi: Option<f64>,
}

impl SmoothReport {
    pub fn summary(&self) -> SmoothSummary {
        let runs: Vec<RunSummary> = self
            .runs
            .iter()
            .map(|r| RunSummary {
                sampler: r.sampler,
                repeat: r.repeat,
                seed: r.seed,
                best_log_pi: r.outcome.best_log,
                iterations: r.outcome.iterations,
                accepted: r.outcome.accepted,
                partial: r.outcome.partial,
                max_drift: r.outcome.max_drift,
                n_tracks: r.outcome.best.len(),
                metrics: r.metrics,
            })
            .collect();
        let mut mean_best_log_pi = Vec::new();
        for kind in [SamplerKind::Hisp, SamplerKind::Baseline] {
            let v: Vec<f64> = runs.iter().filter(|r| r.sampler == kind).map(|r| r.best_log_pi).collect();
            if !v.is_empty() {
                mean_best_log_pi.push((kind, v.iter().sum::<f64>() / v.len() as f64));
            }
        }
        SmoothSummary { runs, mean_best_log_pi, ground_truth_log_pi: self.ground_truth_log_pi }
    }
}

pub fn budget(cfg: &RunConfig) -> Budget {
    Budget { iterations: cfg.iterations, wall: cfg.wall_secs.map(Duration::from_secs_f64) }
}

/// Seed of repeat `r` of a run seeded with `seed`.
pub fn repeat_seed(seed: u64, r: usize) -> u64 {
    mix_key(seed, r as u64)
}

fn run_all<F: ObjectFilter<f64>>(
    target: &TargetPossibility<F>,
    index: &ConsistencyIndex,
    cfg: &RunConfig,
    truth: Option<&GroundTruth>,
) -> Result<SmoothReport> {
    cfg.validate()?;
    let chain_cfg = cfg.chain_config()?;
    let base_cfg = cfg.baseline_config();
    let kinds: &[SamplerKind] = match cfg.sampler {
        SamplerChoice::Hisp => &[SamplerKind::Hisp],
        SamplerChoice::Baseline => &[SamplerKind::Baseline],
        SamplerChoice::Both => &[SamplerKind::Hisp, SamplerKind::Baseline],
    };
    let jobs: Vec<(SamplerKind, usize)> =
        kinds.iter().flat_map(|&k| (0..cfg.repeats).map(move |r| (k, r))).collect();
    let b = budget(cfg);
    let runs = jobs
        .into_par_iter()
        .map(|(kind, repeat)| {
            let seed = repeat_seed(cfg.seed, repeat);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outcome = match kind {
                SamplerKind::Hisp => run_chain(target, index, chain_cfg, b, &mut rng)?,
                SamplerKind::Baseline => run_baseline(target, index, base_cfg, b, &mut rng)?,
            };
            let metrics = truth.map(|t| association_metrics(&outcome.best, t));
            Ok(RunRecord { sampler: kind, repeat, seed, outcome, metrics })
        })
        .collect::<Result<Vec<_>>>()?;
    let ground_truth_log_pi = truth.map(|t| target.track_set_log_possibility(&t.track_set()?)).transpose()?;
    Ok(SmoothReport { runs, ground_truth_log_pi })
}

/// Runs the configured samplers on `scenario`, `repeats` times each.
pub fn smooth(scenario: Scenario, sim: &SimParams, cfg: &RunConfig, truth: Option<&GroundTruth>) -> Result<SmoothReport> {
    let inf = Inference::new(sim, cfg)?;
    let index = inf.index(&scenario)?;
    if cfg.particles > 0 {
        run_all(&inf.particle_target(scenario)?, &index, cfg, truth)
    } else {
        run_all(&inf.kalman_target(scenario)?, &index, cfg, truth)
    }
}

/// `log Π` of `tracks` under the inference model for `scenario`.
pub fn evaluate_log_pi(scenario: Scenario, sim: &SimParams, cfg: &RunConfig, tracks: &TrackSet) -> Result<f64> {
    let inf = Inference::new(sim, cfg)?;
    if cfg.particles > 0 {
        inf.particle_target(scenario)?.track_set_log_possibility(tracks)
    } else {
        inf.kalman_target(scenario)?.track_set_log_possibility(tracks)
    }
}

/// One point of the averaged trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedPoint {
    pub iteration: u64,
    pub mean_log_pi_best: f64,
    pub mean_log_pi_current: f64,
}

/// Pointwise mean over traces, truncated to the shortest one.
pub fn average_traces(traces: &[&[TraceRecord]]) -> Vec<AveragedPoint> {
    let Some(len) = traces.iter().map(|t| t.len()).min() else {
        return Vec::new();
    };
    let n = traces.len() as f64;
    (0..len)
        .map(|i| AveragedPoint {
            iteration: traces[0][i].iteration,
            mean_log_pi_best: traces.iter().map(|t| t[i].log_pi_best).sum::<f64>() / n,
            mean_log_pi_current: traces.iter().map(|t| t[i].log_pi_current).sum::<f64>() / n,
        })
        .collect()
}

/// A setting of the ablation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub parameter: String,
    pub value: String,
    pub final_mean_log_pi_best: f64,
    pub trace: Vec<AveragedPoint>,
}

/// The settings varied one at a time around the defaults: the cooling
/// constant, the mean number of reassigned paths and the four `p̃_c`
/// options.
pub fn sweep_settings(base: &RunConfig) -> Vec<(String, String, RunConfig)> {
    let mut out = Vec::new();
    for c in [0.0005, 0.001, 0.002] {
        out.push(("c".to_string(), c.to_string(), RunConfig { c, ..base.clone() }));
    }
    for lambda_r in [0.5, 1.0, 1.5] {
        out.push(("lambda_r".to_string(), lambda_r.to_string(), RunConfig { lambda_r, ..base.clone() }));
    }
    for focus in ["-1", "0", "+1", "uniform"] {
        out.push(("pc_focus".to_string(), focus.to_string(), RunConfig { pc_focus: focus.into(), ..base.clone() }));
    }
    out
}

/// Runs every sweep setting with the HISP sampler and averages the traces
/// over repeats.
pub fn sweep(scenario: &Scenario, sim: &SimParams, base: &RunConfig) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    for (parameter, value, cfg) in sweep_settings(base) {
        let cfg = RunConfig { sampler: SamplerChoice::Hisp, ..cfg };
        let report = smooth(scenario.clone(), sim, &cfg, None)?;
        let traces: Vec<&[TraceRecord]> = report.runs.iter().map(|r| r.outcome.trace.as_slice()).collect();
        let trace = average_traces(&traces);
        let final_mean_log_pi_best = trace.last().map(|p| p.mean_log_pi_best).ok_or(Error::Empty("sweep trace"))?;
        out.push(SweepEntry { parameter, value, final_mean_log_pi_best, trace });
    }
    Ok(out)
}
