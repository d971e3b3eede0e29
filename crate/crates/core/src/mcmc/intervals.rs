//! Proposal `Ψ` of the intervals of existence given the paths.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Association, MultiObjectParams, Track, TrackSet};
use crate::possibility::max_entropy_log;

/// Max-entropy laws of the extra lifetime after the last detection and of
/// the silent steps before the first one. Both depend only on the horizon and
/// on the path's end points, so they are tabulated once.
#[derive(Debug, Clone)]
pub struct IntervalProposal {
    horizon: usize,
    /// `after[l_o][l]`: log-probability of `l` extra steps when the last
    /// detection is `l_o` steps before the horizon.
    after: Vec<Vec<f64>>,
    /// `before[k][l]`: log-probability of `l` silent steps before a first
    /// detection at time `k`.
    before: Vec<Vec<f64>>,
}

impl IntervalProposal {
    pub fn new(horizon: usize, params: &MultiObjectParams) -> Result<Self> {
        let (log_nd, log_ns) = (params.log_nd(), params.log_ns());
        let mut after = Vec::with_capacity(horizon);
        for l_o in 0..horizon {
            let bound: Vec<f64> = (0..=l_o)
                .map(|l| l as f64 * log_nd + if l < l_o { log_ns } else { 0.0 })
                .collect();
            after.push(max_entropy_log(&bound)?);
        }
        let mut before = vec![Vec::new()];
        for k in 1..=horizon {
            let bound: Vec<f64> = (0..k).map(|l| l as f64 * log_nd).collect();
            before.push(max_entropy_log(&bound)?);
        }
        Ok(Self { horizon, after, before })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Draws an interval for every path of `assoc`; returns the track set and
    /// `log Ψ(T | A)`.
    pub fn propose<R: Rng + ?Sized>(&self, assoc: &Association, rng: &mut R) -> (TrackSet, f64) {
        let mut tracks = Vec::with_capacity(assoc.len());
        let mut log_psi = 0.0;
        for p in assoc.paths() {
            let l_o = self.horizon - p.last_time();
            let k = p.first_time();
            let extra = draw(&self.after[l_o], rng);
            let silent = draw(&self.before[k], rng);
            log_psi += self.after[l_o][extra] + self.before[k][silent];
            tracks.push(Track { path: p.clone(), appear: k - silent, last: p.last_time() + extra });
        }
        let set = TrackSet::new(tracks).expect("paths of an association are disjoint");
        (set, log_psi)
    }

    /// `log Ψ(T | κ(T))`.
    pub fn log_prob(&self, tracks: &TrackSet) -> Result<f64> {
        let mut total = 0.0;
        for t in tracks.tracks() {
            if t.last > self.horizon || t.last < t.path.last_time() || t.appear < 1 || t.appear > t.path.first_time() {
                return Err(Error::InvalidInterval {
                    appear: t.appear,
                    last: t.last,
                    first: t.path.first_time(),
                    end: t.path.last_time(),
                    horizon: self.horizon,
                });
            }
            let l_o = self.horizon - t.path.last_time();
            let k = t.path.first_time();
            total += self.after[l_o][t.last - t.path.last_time()] + self.before[k][k - t.appear];
        }
        Ok(total)
    }
}

fn draw<R: Rng + ?Sized>(log_p: &[f64], rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, lp) in log_p.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_p.iter().rposition(|l| *l > f64::NEG_INFINITY).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObsId, Path};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laws_are_normalised_and_capped() {
        let params = MultiObjectParams::from_probabilities(0.9, 0.99).unwrap();
        let ip = IntervalProposal::new(10, &params).unwrap();
        for law in ip.after.iter().chain(ip.before.iter().skip(1)) {
            let s: f64 = law.iter().map(|l| l.exp()).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
        // a path ending at the horizon has no extra lifetime
        assert_eq!(ip.after[0], vec![0.0]);
        // first detection at time 1 leaves no silent steps
        assert_eq!(ip.before[1], vec![0.0]);
    }

    #[test]
    fn proposal_density_matches_evaluation() {
        let params = MultiObjectParams::from_probabilities(0.5, 0.9).unwrap();
        let ip = IntervalProposal::new(8, &params).unwrap();
        let assoc = Association::new(vec![
            Path::new(vec![ObsId::new(3, 0), ObsId::new(5, 1)]).unwrap(),
            Path::single(ObsId::new(7, 0)),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (t, lp) = ip.propose(&assoc, &mut rng);
            assert_eq!(t.association(), assoc);
            assert_abs_diff_eq!(ip.log_prob(&t).unwrap(), lp, epsilon = 1e-14);
        }
    }
}
