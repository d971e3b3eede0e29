//! Single-path baseline sampler with local moves over associations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consistency::ConsistencyIndex;
use crate::error::{Error, Result};
use crate::filter::ObjectFilter;
use crate::mcmc::chain::{drive, Budget, CachedTarget, ChainOutcome, Sampler, StepInfo};
use crate::mcmc::schedule::{accept, log_acceptance, AnnealSchedule};
use crate::mcmc::trace::MoveKind;
use crate::model::{Association, ObsId, Path, Scenario, TargetPossibility, TrackSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Largest number of scans between consecutive detections of a path.
    pub max_gap: usize,
    /// Smallest pair consistency for two consecutive detections.
    pub min_pair: f64,
    pub c: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { max_gap: 10, min_pair: 1e-4, c: 0.0 }
    }
}

const KINDS: [MoveKind; 7] = [
    MoveKind::Birth,
    MoveKind::Death,
    MoveKind::Extend,
    MoveKind::Reduce,
    MoveKind::Split,
    MoveKind::Merge,
    MoveKind::Switch,
];

/// Candidate move: new association with `log q(A'|A)` and `log q(A|A')`,
/// leaving out the common factor of the move-type choice.
struct Local {
    proposed: Association,
    log_fwd: f64,
    log_rev: f64,
}

/// Baseline chain targeting the path marginal `Π̂` with birth/death,
/// extend/reduce, split/merge and switch moves.
pub struct Baseline<'a, F> {
    cache: CachedTarget<'a, F>,
    scenario: &'a Scenario,
    index: &'a ConsistencyIndex,
    cfg: BaselineConfig,
    schedule: AnnealSchedule,
    t: u64,
    assoc: Association,
    used: Vec<bool>,
    log_current: f64,
    best_log: f64,
    best_assoc: Association,
}

impl<'a, F: ObjectFilter<f64>> Baseline<'a, F> {
    pub fn new(target: &'a TargetPossibility<F>, index: &'a ConsistencyIndex, cfg: BaselineConfig) -> Result<Self> {
        if cfg.max_gap == 0 || !(cfg.min_pair >= 0.0) {
            return Err(Error::InvalidParameter("baseline needs max_gap ≥ 1 and min_pair ≥ 0".into()));
        }
        let mut cache = CachedTarget::new(target);
        let empty = Association::empty();
        let log_empty = cache.marginal(&empty)?;
        Ok(Self {
            scenario: target.scenario(),
            index,
            schedule: AnnealSchedule::new(cfg.c)?,
            cfg,
            t: 0,
            used: vec![false; target.scenario().total()],
            assoc: empty.clone(),
            log_current: log_empty,
            best_log: log_empty,
            best_assoc: empty,
            cache,
        })
    }

    pub fn association(&self) -> &Association {
        &self.assoc
    }

    fn flat(&self, o: ObsId) -> usize {
        self.scenario.flat(o)
    }

    /// Unused observations that may follow the last detection of `p`.
    fn extensions(&self, p: &Path, used: &[bool]) -> Vec<usize> {
        let last = p.last();
        self.index
            .successors(self.flat(last))
            .iter()
            .filter(|&&(j, c)| {
                let j = j as usize;
                !used[j] && c >= self.cfg.min_pair && self.scenario.id_of(j).time() - last.time() <= self.cfg.max_gap
            })
            .map(|&(j, _)| j as usize)
            .collect()
    }

    /// Positions of paths in `assoc` that may be appended to `p`.
    fn merge_partners(&self, assoc: &Association, p: &Path) -> Vec<usize> {
        let last = p.last();
        assoc
            .paths()
            .iter()
            .enumerate()
            .filter(|(_, q)| {
                let gap = q.first_time() as i64 - last.time() as i64;
                gap >= 1
                    && gap as usize <= self.cfg.max_gap
                    && self.index.pair(self.flat(last), self.flat(q.first())) >= self.cfg.min_pair
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn used_after(&self, removed: &[&Path], added: &[&Path]) -> Vec<bool> {
        let mut used = self.used.clone();
        for p in removed {
            for &o in p.obs() {
                used[self.flat(o)] = false;
            }
        }
        for p in added {
            for &o in p.obs() {
                used[self.flat(o)] = true;
            }
        }
        used
    }

    fn propose<R: Rng + ?Sized>(&self, kind: MoveKind, rng: &mut R) -> Option<Local> {
        let a = &self.assoc;
        let ln = |n: usize| (n as f64).ln();
        match kind {
            MoveKind::Birth => {
                let free: Vec<usize> = (0..self.used.len()).filter(|&i| !self.used[i]).collect();
                if free.is_empty() {
                    return None;
                }
                let j = free[rng.random_range(0..free.len())];
                let np = Path::single(self.scenario.id_of(j));
                let proposed = a.replace(&[], std::slice::from_ref(&np))?;
                let singles = proposed.paths().iter().filter(|p| p.len() == 1).count();
                Some(Local { proposed, log_fwd: -ln(free.len()), log_rev: -ln(singles) })
            }
            MoveKind::Death => {
                let singles: Vec<&Path> = a.paths().iter().filter(|p| p.len() == 1).collect();
                if singles.is_empty() {
                    return None;
                }
                let p = singles[rng.random_range(0..singles.len())].clone();
                let free = self.used.iter().filter(|u| !**u).count() + 1;
                let proposed = a.replace(std::slice::from_ref(&p), &[])?;
                Some(Local { proposed, log_fwd: -ln(singles.len()), log_rev: -ln(free) })
            }
            MoveKind::Extend => {
                if a.is_empty() {
                    return None;
                }
                let p = &a.paths()[rng.random_range(0..a.len())];
                let cands = self.extensions(p, &self.used);
                if cands.is_empty() {
                    return None;
                }
                let j = cands[rng.random_range(0..cands.len())];
                let mut obs = p.obs().to_vec();
                obs.push(self.scenario.id_of(j));
                let np = Path::from_sorted(obs);
                let proposed = a.replace(std::slice::from_ref(p), std::slice::from_ref(&np))?;
                let long = proposed.paths().iter().filter(|q| q.len() >= 2).count();
                Some(Local { proposed, log_fwd: -ln(a.len()) - ln(cands.len()), log_rev: -ln(long) })
            }
            MoveKind::Reduce => {
                let long: Vec<&Path> = a.paths().iter().filter(|q| q.len() >= 2).collect();
                if long.is_empty() {
                    return None;
                }
                let p = long[rng.random_range(0..long.len())];
                let np = Path::from_sorted(p.obs()[..p.len() - 1].to_vec());
                let dropped = self.flat(p.last());
                let used = self.used_after(&[p], &[&np]);
                let cands = self.extensions(&np, &used);
                if !cands.contains(&dropped) {
                    return None;
                }
                let proposed = a.replace(std::slice::from_ref(p), std::slice::from_ref(&np))?;
                Some(Local {
                    log_fwd: -ln(long.len()),
                    log_rev: -ln(proposed.len()) - ln(cands.len()),
                    proposed,
                })
            }
            MoveKind::Split => {
                let long: Vec<&Path> = a.paths().iter().filter(|q| q.len() >= 2).collect();
                if long.is_empty() {
                    return None;
                }
                let p = long[rng.random_range(0..long.len())];
                let cut = rng.random_range(1..p.len());
                let head = Path::from_sorted(p.obs()[..cut].to_vec());
                let tail = Path::from_sorted(p.obs()[cut..].to_vec());
                let proposed = a.replace(std::slice::from_ref(p), &[head.clone(), tail.clone()])?;
                let partners = self.merge_partners(&proposed, &head);
                let tail_pos = proposed.paths().binary_search(&tail).ok()?;
                if !partners.contains(&tail_pos) {
                    return None;
                }
                Some(Local {
                    log_fwd: -ln(long.len()) - ln(p.len() - 1),
                    log_rev: -ln(proposed.len()) - ln(partners.len()),
                    proposed,
                })
            }
            MoveKind::Merge => {
                if a.is_empty() {
                    return None;
                }
                let p = &a.paths()[rng.random_range(0..a.len())];
                let partners = self.merge_partners(a, p);
                if partners.is_empty() {
                    return None;
                }
                let q = &a.paths()[partners[rng.random_range(0..partners.len())]];
                let mut obs = p.obs().to_vec();
                obs.extend_from_slice(q.obs());
                let merged = Path::from_sorted(obs);
                let proposed = a.replace(&[p.clone(), q.clone()], std::slice::from_ref(&merged))?;
                let long = proposed.paths().iter().filter(|x| x.len() >= 2).count();
                Some(Local {
                    log_fwd: -ln(a.len()) - ln(partners.len()),
                    log_rev: -ln(long) - ln(merged.len() - 1),
                    proposed,
                })
            }
            MoveKind::Switch => {
                let k = self.scenario.horizon();
                if a.len() < 2 || k < 2 {
                    return None;
                }
                let i = rng.random_range(0..a.len());
                let mut j = rng.random_range(0..a.len() - 1);
                if j >= i {
                    j += 1;
                }
                let t = rng.random_range(1..k);
                let (p, q) = (&a.paths()[i], &a.paths()[j]);
                let swap = |x: &Path, y: &Path| {
                    let mut obs: Vec<ObsId> = x.obs().iter().copied().filter(|o| o.time() <= t).collect();
                    obs.extend(y.obs().iter().copied().filter(|o| o.time() > t));
                    obs
                };
                let (u, v) = (swap(p, q), swap(q, p));
                if u.is_empty() || v.is_empty() {
                    return None;
                }
                let proposed =
                    a.replace(&[p.clone(), q.clone()], &[Path::from_sorted(u), Path::from_sorted(v)])?;
                Some(Local { proposed, log_fwd: 0.0, log_rev: 0.0 })
            }
            MoveKind::Init | MoveKind::Hisp | MoveKind::Interval => None,
        }
    }

    fn step_inner<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepInfo> {
        self.t += 1;
        let kind = KINDS[rng.random_range(0..KINDS.len())];
        let Some(mv) = self.propose(kind, rng) else {
            return Ok(StepInfo::rejected(kind));
        };
        let new = self.cache.marginal(&mv.proposed)?;
        let rho = self.schedule.rho(self.t);
        let ok = accept(log_acceptance(rho, new - self.log_current, mv.log_rev, mv.log_fwd), rng);
        if ok {
            let removed = self.assoc.difference(&mv.proposed);
            let added = mv.proposed.difference(&self.assoc);
            self.used = self.used_after(&removed.iter().collect::<Vec<_>>(), &added.iter().collect::<Vec<_>>());
            self.assoc = mv.proposed;
            self.log_current = new;
            if new > self.best_log {
                self.best_log = new;
                self.best_assoc = self.assoc.clone();
            }
        }
        Ok(StepInfo { kind, accepted: ok, record: None, rejected: None })
    }
}

impl<F: ObjectFilter<f64>> Sampler for Baseline<'_, F> {
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
        let fresh = self.cache.target().path_marginal_log(&self.assoc)?.0;
        Ok((fresh - self.log_current).abs())
    }

    fn best(&mut self) -> Result<TrackSet> {
        let assoc = self.best_assoc.clone();
        self.cache.argmax(&assoc)
    }
}

/// Runs the baseline from the empty association.
pub fn run_baseline<F: ObjectFilter<f64>, R: Rng>(
    target: &TargetPossibility<F>,
    index: &ConsistencyIndex,
    cfg: BaselineConfig,
    budget: Budget,
    rng: &mut R,
) -> Result<ChainOutcome> {
    let mut b = Baseline::new(target, index, cfg)?;
    drive(&mut b, budget, rng)
}
