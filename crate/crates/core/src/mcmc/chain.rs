//! Annealed Metropolis-Hastings over track sets or associations.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consistency::ConsistencyIndex;
use crate::error::{Error, Result};
use crate::filter::ObjectFilter;
use crate::mcmc::counts::ProposalConfig;
use crate::mcmc::intervals::IntervalProposal;
use crate::mcmc::proposal::{HispProposal, MoveRecord, Proposal, RejectReason};
use crate::mcmc::schedule::{accept, log_acceptance, AnnealSchedule};
use crate::mcmc::trace::{MoveKind, TraceRecord};
use crate::model::{Association, BestInterval, Path, TargetPossibility, Track, TrackSet};

const CACHE_LIMIT: usize = 400_000;
const DRIFT_CHECK_EVERY: u64 = 1000;

/// Memoised path terms of `log Π̂` and path cores of `log Π`.
pub(crate) struct CachedTarget<'a, F> {
    target: &'a TargetPossibility<F>,
    terms: HashMap<Path, (f64, BestInterval)>,
    cores: HashMap<(Path, usize), f64>,
}

impl<'a, F: ObjectFilter<f64>> CachedTarget<'a, F> {
    pub(crate) fn new(target: &'a TargetPossibility<F>) -> Self {
        Self { target, terms: HashMap::new(), cores: HashMap::new() }
    }

    pub(crate) fn target(&self) -> &'a TargetPossibility<F> {
        self.target
    }

    pub(crate) fn term(&mut self, p: &Path) -> Result<(f64, BestInterval)> {
        if let Some(v) = self.terms.get(p) {
            return Ok(*v);
        }
        if self.terms.len() > CACHE_LIMIT {
            self.terms.clear();
        }
        let v = self.target.path_term(p)?;
        self.terms.insert(p.clone(), v);
        Ok(v)
    }

    /// `log Π̂(A)`, summed in the same order as
    /// [`TargetPossibility::path_marginal_log`].
    pub(crate) fn marginal(&mut self, assoc: &Association) -> Result<f64> {
        let mut total = self.target.false_alarm_log(&Association::empty());
        for p in assoc.paths() {
            total += self.term(p)?.0;
        }
        Ok(total)
    }

    /// Track set attaining `Π̂(A)`.
    pub(crate) fn argmax(&mut self, assoc: &Association) -> Result<TrackSet> {
        let mut tracks = Vec::with_capacity(assoc.len());
        for p in assoc.paths() {
            let (_, b) = self.term(p)?;
            tracks.push(Track { path: p.clone(), appear: b.appear, last: b.last });
        }
        TrackSet::new(tracks)
    }

    /// `log Π(T)`, summed in the same order as
    /// [`TargetPossibility::track_set_log_possibility`].
    pub(crate) fn track_log(&mut self, tracks: &TrackSet) -> Result<f64> {
        let assoc = tracks.association();
        let log_nd = self.target.params().log_nd();
        let mut total = self.target.false_alarm_log(&assoc) + self.target.birth_log(tracks);
        for t in tracks.tracks() {
            let silent = t.path.first_time() - t.appear;
            let key = (t.path.clone(), silent);
            let core = match self.cores.get(&key) {
                Some(c) => *c,
                None => {
                    if self.cores.len() > CACHE_LIMIT {
                        self.cores.clear();
                    }
                    let c = self.target.path_core(&t.path, silent)?;
                    self.cores.insert(key, c);
                    c
                }
            };
            total += silent as f64 * log_nd + core + self.target.tail_log(t.path.last_time(), t.last);
        }
        Ok(total)
    }
}

/// State space explored by the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainLevel {
    /// Track sets `T` targeting `Π`, with intervals proposed by `Ψ`.
    Track,
    /// Associations `A` targeting the path marginal `Π̂`.
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub proposal: ProposalConfig,
    /// Cooling constant of the annealing schedule.
    pub c: f64,
    pub level: ChainLevel,
    /// Probability of a move that only redraws the intervals (track level).
    pub interval_refresh: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { proposal: ProposalConfig::default(), c: 0.001, level: ChainLevel::Track, interval_refresh: 0.2 }
    }
}

/// Stopping rule; the chain stops at whichever limit is reached first.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Budget {
    pub iterations: Option<u64>,
    pub wall: Option<Duration>,
}

impl Budget {
    pub fn iterations(n: u64) -> Self {
        Self { iterations: Some(n), wall: None }
    }

    pub fn wall(d: Duration) -> Self {
        Self { iterations: None, wall: Some(d) }
    }
}

/// What happened in one iteration.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub kind: MoveKind,
    pub accepted: bool,
    pub record: Option<MoveRecord>,
    pub rejected: Option<RejectReason>,
}

impl StepInfo {
    pub(crate) fn rejected(kind: MoveKind) -> Self {
        Self { kind, accepted: false, record: None, rejected: None }
    }
}

/// Common interface of the smoother chain and the baseline sampler.
pub trait Sampler {
    fn step(&mut self, rng: &mut dyn rand::RngCore) -> Result<StepInfo>;
    fn iteration(&self) -> u64;
    fn rho(&self) -> f64;
    fn current_log(&self) -> f64;
    fn best_log(&self) -> f64;
    fn n_tracks(&self) -> usize;
    /// `|cached − recomputed|` for the current state.
    fn drift(&mut self) -> Result<f64>;
    fn best(&mut self) -> Result<TrackSet>;
}

/// Result of a run.
#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub best: TrackSet,
    pub best_log: f64,
    pub trace: Vec<TraceRecord>,
    pub iterations: u64,
    pub accepted: u64,
    /// The wall-clock limit ended the run before the iteration limit.
    pub partial: bool,
    pub max_drift: f64,
}

/// Smoother chain with the multi-path proposal.
pub struct Chain<'a, F> {
    cache: CachedTarget<'a, F>,
    proposal: HispProposal<'a, F>,
    intervals: IntervalProposal,
    schedule: AnnealSchedule,
    cfg: ChainConfig,
    t: u64,
    assoc: Association,
    tracks: TrackSet,
    log_current: f64,
    best_log: f64,
    best_assoc: Association,
}

impl<'a, F: ObjectFilter<f64>> Chain<'a, F> {
    /// Starts from the empty association.
    pub fn new(target: &'a TargetPossibility<F>, index: &'a ConsistencyIndex, cfg: ChainConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.interval_refresh) {
            return Err(Error::InvalidParameter("interval_refresh must be a probability".into()));
        }
        let mut cache = CachedTarget::new(target);
        let empty = Association::empty();
        let log_empty = cache.marginal(&empty)?;
        Ok(Self {
            proposal: HispProposal::new(target, index, cfg.proposal)?,
            intervals: IntervalProposal::new(target.horizon(), target.params())?,
            schedule: AnnealSchedule::new(cfg.c)?,
            cfg,
            t: 0,
            assoc: empty.clone(),
            tracks: TrackSet::empty(),
            log_current: log_empty,
            best_log: log_empty,
            best_assoc: empty,
            cache,
        })
    }

    pub fn association(&self) -> &Association {
        &self.assoc
    }

    pub fn tracks(&self) -> &TrackSet {
        &self.tracks
    }

    pub fn proposal(&self) -> &HispProposal<'a, F> {
        &self.proposal
    }

    fn note_best(&mut self) -> Result<()> {
        let v = match self.cfg.level {
            ChainLevel::Path => self.log_current,
            ChainLevel::Track => self.cache.marginal(&self.assoc)?,
        };
        if v > self.best_log {
            self.best_log = v;
            self.best_assoc = self.assoc.clone();
        }
        Ok(())
    }

    fn step_inner<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepInfo> {
        self.t += 1;
        let rho = self.schedule.rho(self.t);
        if self.cfg.level == ChainLevel::Track && rng.random::<f64>() < self.cfg.interval_refresh {
            let (proposed, log_fwd) = self.intervals.propose(&self.assoc, rng);
            let log_rev = self.intervals.log_prob(&self.tracks)?;
            let new = self.cache.track_log(&proposed)?;
            let ok = accept(log_acceptance(rho, new - self.log_current, log_rev, log_fwd), rng);
            if ok {
                self.tracks = proposed;
                self.log_current = new;
            }
            return Ok(StepInfo { kind: MoveKind::Interval, accepted: ok, record: None, rejected: None });
        }
        let rec = match self.proposal.propose(&self.assoc, rng)? {
            Proposal::Move(r) => r,
            Proposal::Rejected(why) => {
                return Ok(StepInfo { kind: MoveKind::Hisp, accepted: false, record: None, rejected: Some(why) })
            }
        };
        let ok = match self.cfg.level {
            ChainLevel::Path => {
                let new = self.cache.marginal(&rec.proposed)?;
                let ok = accept(log_acceptance(rho, new - self.log_current, rec.log_rev, rec.log_fwd), rng);
                if ok {
                    self.log_current = new;
                }
                ok
            }
            ChainLevel::Track => {
                let (proposed, psi_fwd) = self.intervals.propose(&rec.proposed, rng);
                let psi_rev = self.intervals.log_prob(&self.tracks)?;
                let new = self.cache.track_log(&proposed)?;
                let ratio = log_acceptance(rho, new - self.log_current, rec.log_rev + psi_rev, rec.log_fwd + psi_fwd);
                let ok = accept(ratio, rng);
                if ok {
                    self.tracks = proposed;
                    self.log_current = new;
                }
                ok
            }
        };
        if ok {
            self.assoc = rec.proposed.clone();
            self.note_best()?;
        }
        Ok(StepInfo { kind: MoveKind::Hisp, accepted: ok, record: Some(rec), rejected: None })
    }
}

impl<F: ObjectFilter<f64>> Sampler for Chain<'_, F> {
    fn step(&mut self, rng: &mut dyn rand::RngCore) -> Result<StepInfo> {
        self.step_inner(rng)
    }

    fn iteration(&self) -> u64 {
        self.t
    }

    fn rho(&self) -> f64 {
        self.schedule.rho(self.t)
    }

    fn current_log(&self) -> f64 {
        self.log_current
    }

    fn best_log(&self) -> f64 {
        self.best_log
    }

    fn n_tracks(&self) -> usize {
        self.assoc.len()
    }

    fn drift(&mut self) -> Result<f64> {
        let target = self.cache.target();
        let fresh = match self.cfg.level {
            ChainLevel::Path => target.path_marginal_log(&self.assoc)?.0,
            ChainLevel::Track => target.track_set_log_possibility(&self.tracks)?,
        };
        Ok((fresh - self.log_current).abs())
    }

    fn best(&mut self) -> Result<TrackSet> {
        let assoc = self.best_assoc.clone();
        self.cache.argmax(&assoc)
    }
}

/// Runs `sampler` until the budget is spent, recording one trace row per
/// iteration plus an initial row.
pub fn drive<S: Sampler + ?Sized, R: Rng>(sampler: &mut S, budget: Budget, rng: &mut R) -> Result<ChainOutcome> {
    if budget.iterations.is_none() && budget.wall.is_none() {
        return Err(Error::Usage("a run needs an iteration or wall-clock budget".into()));
    }
    let start = Instant::now();
    let mut trace = Vec::with_capacity(budget.iterations.unwrap_or(10_000).min(1 << 22) as usize + 1);
    let row = |s: &S, kind, accepted, start: &Instant| TraceRecord {
        iteration: s.iteration(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        log_pi_current: s.current_log(),
        log_pi_best: s.best_log(),
        rho: s.rho(),
        move_kind: kind,
        accepted,
        n_tracks: s.n_tracks(),
    };
    trace.push(row(sampler, MoveKind::Init, true, &start));
    let mut accepted = 0u64;
    let mut max_drift = 0.0f64;
    let mut partial = false;
    loop {
        if budget.iterations.is_some_and(|n| sampler.iteration() >= n) {
            break;
        }
        if budget.wall.is_some_and(|w| start.elapsed() >= w) {
            partial = budget.iterations.is_some();
            break;
        }
        let info = sampler.step(rng)?;
        accepted += info.accepted as u64;
        trace.push(row(sampler, info.kind, info.accepted, &start));
        if sampler.iteration().is_multiple_of(DRIFT_CHECK_EVERY) {
            max_drift = max_drift.max(sampler.drift()?);
        }
    }
    max_drift = max_drift.max(sampler.drift()?);
    let best = sampler.best()?;
    Ok(ChainOutcome {
        best,
        best_log: sampler.best_log(),
        iterations: sampler.iteration(),
        accepted,
        partial,
        max_drift,
        trace,
    })
}

/// Runs the smoother from the empty association.
pub fn run_chain<F: ObjectFilter<f64>, R: Rng>(
    target: &TargetPossibility<F>,
    index: &ConsistencyIndex,
    cfg: ChainConfig,
    budget: Budget,
    rng: &mut R,
) -> Result<ChainOutcome> {
    let mut chain = Chain::new(target, index, cfg)?;
    drive(&mut chain, budget, rng)
}
