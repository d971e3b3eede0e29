//! Choice of the reassigned paths `A_r` and of the seeds `Z_c`.

use rand::Rng;

use crate::consistency::ConsistencyIndex;
use crate::hisp::{Availability, SeedSet};
use crate::model::{Association, ObsId, Path, Scenario};
use crate::possibility::{log_add, ClippedSampler};

/// Largest set drawn without replacement whose probability is summed
/// exactly over orderings. Larger counts are treated as having zero mass in
/// both directions of a move.
pub const MAX_EXACT_SET: usize = 12;

/// Consistency data needed to select paths and seeds.
#[derive(Clone, Copy)]
pub struct Selector<'a> {
    pub scenario: &'a Scenario,
    pub index: &'a ConsistencyIndex,
}

impl<'a> Selector<'a> {
    pub fn new(scenario: &'a Scenario, index: &'a ConsistencyIndex) -> Self {
        Self { scenario, index }
    }

    /// Sampler over the paths of `assoc` weighted by their consistency with
    /// the path at position `anchor`, which is itself excluded.
    fn anchored(&self, assoc: &Association, anchor: usize) -> ClippedSampler<f64> {
        let near = self.index.to_paths(self.scenario, &[&assoc.paths()[anchor]]);
        let log_cred = assoc
            .paths()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i == anchor {
                    return f64::NEG_INFINITY;
                }
                let c = p
                    .obs()
                    .iter()
                    .filter_map(|&o| near.get(&self.scenario.flat(o)))
                    .fold(0.0f64, |a, &c| a.max(c));
                c.ln()
            })
            .collect();
        ClippedSampler::new(log_cred)
    }

    /// Draws `n_r` paths of `assoc` (as sorted positions) and returns the log
    /// probability of the resulting set. `None` when fewer than `n_r` paths
    /// are reachable through positive consistency.
    pub fn select_reassign<R: Rng + ?Sized>(
        &self,
        assoc: &Association,
        n_r: usize,
        rng: &mut R,
    ) -> Option<(Vec<usize>, f64)> {
        if n_r == 0 {
            return Some((Vec::new(), 0.0));
        }
        if n_r > assoc.len() || n_r > MAX_EXACT_SET {
            return None;
        }
        let anchor = rng.random_range(0..assoc.len());
        let mut chosen = vec![anchor];
        if n_r > 1 {
            let sampler = self.anchored(assoc, anchor);
            while chosen.len() < n_r {
                let (i, _) = sampler.draw(&chosen, rng)?;
                chosen.push(i);
            }
        }
        chosen.sort_unstable();
        let lp = self.reassign_log_prob(assoc, &chosen);
        Some((chosen, lp))
    }

    /// Log probability that [`Self::select_reassign`] returns the set of
    /// positions `chosen`, summed over which element served as the anchor.
    pub fn reassign_log_prob(&self, assoc: &Association, chosen: &[usize]) -> f64 {
        let s = assoc.len();
        match chosen.len() {
            0 => 0.0,
            n if n > s || n > MAX_EXACT_SET => f64::NEG_INFINITY,
            1 => -(s as f64).ln(),
            _ => {
                let log_anchor = -(s as f64).ln();
                let mut total = f64::NEG_INFINITY;
                for (a, &anchor) in chosen.iter().enumerate() {
                    let rest: Vec<usize> =
                        chosen.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &i)| i).collect();
                    let lp = self.anchored(assoc, anchor).log_prob_set(&rest, &[anchor]);
                    total = log_add(total, log_anchor + lp);
                }
                total
            }
        }
    }

    /// Seed candidates as `(flat index, log credibility)`, sorted by flat
    /// index. Without reassigned paths the credibility of an observation is
    /// its marginal consistency; otherwise it is its best consistency with
    /// any reassigned path. Only available observations with positive
    /// credibility are kept.
    pub fn seed_candidates(&self, removed: &[&Path], avail: &Availability) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = if removed.is_empty() {
            (0..self.scenario.total())
                .filter(|&i| avail.is_available(i) && self.index.marginal(i) > 0.0)
                .map(|i| (i, self.index.marginal(i).ln()))
                .collect()
        } else {
            self.index
                .to_paths(self.scenario, removed)
                .into_iter()
                .filter(|&(i, c)| avail.is_available(i) && c > 0.0)
                .map(|(i, c)| (i, c.ln()))
                .collect()
        };
        out.sort_unstable_by_key(|&(i, _)| i);
        out
    }

    /// Draws `n_c` distinct seeds from the candidates.
    pub fn select_seeds<R: Rng + ?Sized>(
        &self,
        candidates: &[(usize, f64)],
        n_c: usize,
        rng: &mut R,
    ) -> Option<(SeedSet, f64)> {
        if n_c == 0 {
            return Some((SeedSet::default(), 0.0));
        }
        if n_c > candidates.len() || n_c > MAX_EXACT_SET {
            return None;
        }
        let sampler = ClippedSampler::new(candidates.iter().map(|&(_, l)| l).collect());
        let mut chosen = Vec::with_capacity(n_c);
        while chosen.len() < n_c {
            let (i, _) = sampler.draw(&chosen, rng)?;
            chosen.push(i);
        }
        let lp = sampler.log_prob_set(&chosen, &[]);
        let ids: Vec<ObsId> = chosen.iter().map(|&i| self.scenario.id_of(candidates[i].0)).collect();
        let seeds = SeedSet::new(ids).expect("distinct candidates");
        Some((seeds, lp))
    }

    /// Log probability that [`Self::select_seeds`] returns exactly `seeds`.
    pub fn seeds_log_prob(&self, candidates: &[(usize, f64)], seeds: &SeedSet) -> f64 {
        if seeds.is_empty() {
            return 0.0;
        }
        if seeds.len() > MAX_EXACT_SET {
            return f64::NEG_INFINITY;
        }
        let mut pos = Vec::with_capacity(seeds.len());
        for &s in seeds.seeds() {
            let flat = self.scenario.flat(s);
            match candidates.binary_search_by_key(&flat, |&(i, _)| i) {
                Ok(p) => pos.push(p),
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        let sampler = ClippedSampler::new(candidates.iter().map(|&(_, l)| l).collect());
        sampler.log_prob_set(&pos, &[])
    }
}
