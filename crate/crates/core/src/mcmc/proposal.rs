//! The multi-path proposal `Φ`: pick paths to reassign, seed new paths and
//! grow them with the proposal filter.

use rand::Rng;

use crate::consistency::ConsistencyIndex;
use crate::error::{Error, Result};
use crate::filter::ObjectFilter;
use crate::hisp::{Availability, ProposalFilter, SeedSet};
use crate::mcmc::counts::{counts_log_prob, sample_counts, ProposalConfig};
use crate::mcmc::selection::Selector;
use crate::model::{Association, Path, TargetPossibility};

/// Why a proposal was abandoned before reaching the acceptance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Not enough consistent paths to reassign.
    NoPaths,
    /// Not enough consistent seed candidates.
    NoSeeds,
    /// Two created paths drew the same observation.
    Overlap,
    /// A created path coincides with a reassigned one.
    Recreated,
    /// The reverse move has no proposal mass.
    NoReverse,
}

/// A proposed move `A → A'` with its forward and reverse log probabilities.
#[derive(Debug, Clone)]
pub struct MoveRecord {
    pub removed: Vec<Path>,
    pub created: Vec<Path>,
    pub proposed: Association,
    pub seeds: SeedSet,
    pub availability: Availability,
    /// `log P_c` as accumulated while sampling.
    pub log_pc: f64,
    pub log_fwd: f64,
    pub log_rev: f64,
}

#[derive(Debug, Clone)]
pub enum Proposal {
    Move(MoveRecord),
    Rejected(RejectReason),
}

pub struct HispProposal<'a, F> {
    target: &'a TargetPossibility<F>,
    selector: Selector<'a>,
    filter: ProposalFilter<'a, F>,
    cfg: ProposalConfig,
}

impl<'a, F: ObjectFilter<f64>> HispProposal<'a, F> {
    pub fn new(target: &'a TargetPossibility<F>, index: &'a ConsistencyIndex, cfg: ProposalConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            target,
            selector: Selector::new(target.scenario(), index),
            filter: ProposalFilter::new(target),
            cfg,
        })
    }

    pub fn config(&self) -> &ProposalConfig {
        &self.cfg
    }

    pub fn selector(&self) -> &Selector<'a> {
        &self.selector
    }

    pub fn filter(&self) -> &ProposalFilter<'a, F> {
        &self.filter
    }

    /// Samples `A' ~ Φ(· | A)`.
    pub fn propose<R: Rng + ?Sized>(&self, assoc: &Association, rng: &mut R) -> Result<Proposal> {
        let (n_r, n_c, log_counts) = sample_counts(assoc.len(), &self.cfg, rng);
        let Some((idx, log_pr)) = self.selector.select_reassign(assoc, n_r, rng) else {
            return Ok(Proposal::Rejected(RejectReason::NoPaths));
        };
        let removed: Vec<Path> = idx.iter().map(|&i| assoc.paths()[i].clone()).collect();
        let kept = assoc.paths().iter().filter(|p| !removed.contains(p));
        let avail = Availability::excluding(self.target.scenario(), kept);
        let removed_refs: Vec<&Path> = removed.iter().collect();
        let candidates = self.selector.seed_candidates(&removed_refs, &avail);
        let Some((seeds, log_seeds)) = self.selector.select_seeds(&candidates, n_c, rng) else {
            return Ok(Proposal::Rejected(RejectReason::NoSeeds));
        };
        let outcome = match self.filter.run(&seeds, &avail, rng)? {
            Ok(o) => o,
            Err(_) => return Ok(Proposal::Rejected(RejectReason::Overlap)),
        };
        if outcome.created.iter().any(|p| removed.contains(p)) {
            return Ok(Proposal::Rejected(RejectReason::Recreated));
        }
        let proposed = assoc
            .replace(&removed, &outcome.created)
            .ok_or_else(|| Error::InvalidAssociation("proposal produced overlapping paths".into()))?;
        let log_fwd = log_counts + log_pr + log_seeds + outcome.log_prob;
        let log_rev = self.log_prob(&proposed, &outcome.created, &removed)?;
        if log_rev == f64::NEG_INFINITY {
            return Ok(Proposal::Rejected(RejectReason::NoReverse));
        }
        Ok(Proposal::Move(MoveRecord {
            removed,
            created: outcome.created,
            proposed,
            seeds,
            availability: avail,
            log_pc: outcome.log_prob,
            log_fwd,
            log_rev,
        }))
    }

    /// `log Φ(A' | A)` for the move that removes `removed` from `from` and
    /// creates `created`, evaluated without randomness.
    pub fn log_prob(&self, from: &Association, removed: &[Path], created: &[Path]) -> Result<f64> {
        let mut idx = Vec::with_capacity(removed.len());
        for p in removed {
            match from.paths().binary_search(p) {
                Ok(i) => idx.push(i),
                Err(_) => return Err(Error::Usage("removed path is not in the association".into())),
            }
        }
        idx.sort_unstable();
        let mut lp = counts_log_prob(from.len(), removed.len(), created.len(), &self.cfg);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        lp += self.selector.reassign_log_prob(from, &idx);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let kept = from.paths().iter().filter(|p| !removed.contains(p));
        let avail = Availability::excluding(self.target.scenario(), kept);
        let removed_refs: Vec<&Path> = removed.iter().collect();
        let candidates = self.selector.seed_candidates(&removed_refs, &avail);
        let seeds = SeedSet::new(created.iter().map(Path::first).collect())?;
        lp += self.selector.seeds_log_prob(&candidates, &seeds);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp + self.filter.evaluate(created, &seeds, &avail)?)
    }
}
