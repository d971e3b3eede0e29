//! Proposal filter: grows a set of new paths forward in time from seed
//! observations, drawing one feasible association per scan.
//!
//! Each live path draws its next observation (or the empty observation) from
//! the max-entropy pmf bounded by its marginal association credibility
//! `γ_k(·|o) ∝ Γ_k(Z ∖ {z} | O ∖ {o}) L_k(z|o)`. Draws that place two paths on
//! the same observation abandon the whole proposal. The same walk run in
//! replay mode returns the exact generation probability of a given set of
//! paths.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::ObjectFilter;
use crate::model::{path_key, predict_key, step_key, ObsId, Path, Scenario, TargetPossibility};
use crate::possibility::max_entropy_log;

/// `(log α̂_s, log α̂_ns)` after `gap` consecutive empty observations.
pub fn survival_log(gap: usize, log_nd: f64, log_ns: f64) -> (f64, f64) {
    let stay = gap as f64 * log_nd;
    let norm = stay.max(log_ns);
    (stay - norm, log_ns - norm)
}

/// `log L_k(φ | o) = log(α̂_ns ∨ α̂_s (α_ns ∨ α_nd))`.
pub fn log_likelihood_empty(gap: usize, log_nd: f64, log_ns: f64) -> f64 {
    let (s, ns) = survival_log(gap, log_nd, log_ns);
    ns.max(s + log_ns.max(log_nd))
}

/// Association scores of one live path at one scan: `log L_k(φ|o)` and
/// `log L_k(z|o)` for every available observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PathScores {
    pub log_empty: f64,
    pub log_obs: Vec<f64>,
}

impl PathScores {
    /// `log(L(φ|o) ∨ max_{z ∈ Z, z ≠ skip} L(z|o)/α_fa)`.
    fn factor(&self, log_fa: f64, skip: Option<usize>) -> f64 {
        let mut v = self.log_empty;
        for (z, &l) in self.log_obs.iter().enumerate() {
            if Some(z) != skip {
                v = v.max(l - log_fa);
            }
        }
        v
    }
}

/// `log Γ_k(Z | O)` in product form over the paths `paths` (indices into
/// `scores`) and the observations of the scan minus `skip_obs`.
///
/// The sum runs over `paths` in the given order; [`LeaveOneOut`] reproduces
/// this order so that its cells agree bit for bit.
pub fn gamma_product_log(scores: &[PathScores], paths: &[usize], n_obs: usize, skip_obs: Option<usize>, log_fa: f64) -> f64 {
    let count = n_obs - usize::from(skip_obs.is_some());
    let mut sum = 0.0;
    for &o in paths {
        sum += scores[o].factor(log_fa, skip_obs);
    }
    count as f64 * log_fa + sum
}

/// Exhaustive `log Γ_k(Z | O)`: maximum over mappings of the paths to
/// observations or `φ` that are injective on observations.
pub fn gamma_exhaustive_log(scores: &[PathScores], n_obs: usize, log_fa: f64) -> f64 {
    fn rec(scores: &[PathScores], o: usize, used: &mut Vec<bool>, n_used: usize, acc: f64, n_obs: usize, log_fa: f64) -> f64 {
        if o == scores.len() {
            return acc + (n_obs - n_used) as f64 * log_fa;
        }
        let mut best = rec(scores, o + 1, used, n_used, acc + scores[o].log_empty, n_obs, log_fa);
        for z in 0..n_obs {
            if !used[z] {
                used[z] = true;
                best = best.max(rec(scores, o + 1, used, n_used + 1, acc + scores[o].log_obs[z], n_obs, log_fa));
                used[z] = false;
            }
        }
        best
    }
    rec(scores, 0, &mut vec![false; n_obs], 0, 0.0, n_obs, log_fa)
}

/// Domination check under which the product form of `Γ_k` is exact.
///
/// For two paths this is the pairwise condition: whenever `z` has positive
/// likelihood under both `o` and `o'`, some other `z'` satisfies
/// `L(z|o') ≤ L(z'|o')`. With more paths one alternative is not enough
/// (three paths tied on the same two observations cannot all be served), so
/// `|O| − 1` distinct alternatives are required; then any collision among
/// the per-path maximisers can be resolved without lowering a factor.
pub fn domination_holds(scores: &[PathScores]) -> bool {
    let need = scores.len().saturating_sub(1);
    for (a, sa) in scores.iter().enumerate() {
        for (b, sb) in scores.iter().enumerate() {
            if a == b {
                continue;
            }
            for z in 0..sa.log_obs.len() {
                if sa.log_obs[z] == f64::NEG_INFINITY || sb.log_obs[z] == f64::NEG_INFINITY {
                    continue;
                }
                let alternatives = (0..sb.log_obs.len()).filter(|&z2| z2 != z && sb.log_obs[z] <= sb.log_obs[z2]).count();
                if alternatives < need {
                    return false;
                }
            }
        }
    }
    true
}

/// All `log Γ_k(Z ∖ {z} | O ∖ {o})` for `z ∈ Z ∪ {φ}` and live `o`.
///
/// Per path only the best and second-best observation matter: removing `z`
/// changes a path's factor only when `z` is its best observation. The
/// per-path sums over the other paths are shared across every `z` that is no
/// path's best, so the table costs `O(|O|² + |O||Z|)`.
#[derive(Debug, Clone)]
pub struct LeaveOneOut {
    n_obs: usize,
    log_fa: f64,
    /// `Σ_{o' ≠ o} factor(o')` in path order, per `o`.
    rest: Vec<f64>,
    /// Per path: best observation index.
    best: Vec<Option<usize>>,
    /// Cells for observations that are some path's best, keyed by `(o, z)`.
    special: HashMap<(usize, usize), f64>,
}

impl LeaveOneOut {
    pub fn new(scores: &[PathScores], n_obs: usize, log_fa: f64) -> Self {
        let n = scores.len();
        let full: Vec<f64> = scores.iter().map(|s| s.factor(log_fa, None)).collect();
        let best: Vec<Option<usize>> = scores
            .iter()
            .map(|s| {
                let mut arg = None;
                let mut v = f64::NEG_INFINITY;
                for (z, &l) in s.log_obs.iter().enumerate() {
                    if l > v {
                        v = l;
                        arg = Some(z);
                    }
                }
                arg
            })
            .collect();
        let rest = (0..n)
            .map(|o| {
                let mut sum = 0.0;
                for (o2, f) in full.iter().enumerate() {
                    if o2 != o {
                        sum += *f;
                    }
                }
                sum
            })
            .collect();
        let mut special = HashMap::new();
        let mut zs: Vec<usize> = best.iter().flatten().copied().collect();
        zs.sort_unstable();
        zs.dedup();
        for &z in &zs {
            for o in 0..n {
                let mut sum = 0.0;
                for o2 in 0..n {
                    if o2 != o {
                        sum += if best[o2] == Some(z) { scores[o2].factor(log_fa, Some(z)) } else { full[o2] };
                    }
                }
                special.insert((o, z), sum);
            }
        }
        Self { n_obs, log_fa, rest, best, special }
    }

    /// `log Γ_k(Z ∖ {z} | O ∖ {o})`; `z = None` stands for `φ`.
    pub fn get(&self, o: usize, z: Option<usize>) -> f64 {
        match z {
            None => self.n_obs as f64 * self.log_fa + self.rest[o],
            Some(z) => {
                let sum = self.special.get(&(o, z)).copied().unwrap_or(self.rest[o]);
                (self.n_obs - 1) as f64 * self.log_fa + sum
            }
        }
    }

    pub fn best(&self, o: usize) -> Option<usize> {
        self.best[o]
    }
}

/// Seed observations `Z_c`, kept sorted and distinct.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSet(Vec<ObsId>);

impl SeedSet {
    pub fn new(mut seeds: Vec<ObsId>) -> Result<Self> {
        seeds.sort();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Usage("seed observations must be distinct".into()));
        }
        Ok(Self(seeds))
    }

    pub fn seeds(&self) -> &[ObsId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Available observations `Z_k^-`, as a flag per flat index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Availability(Vec<bool>);

impl Availability {
    pub fn all(scenario: &Scenario) -> Self {
        Self(vec![true; scenario.total()])
    }

    /// Every observation not used by `kept`.
    pub fn excluding<'a>(scenario: &Scenario, kept: impl IntoIterator<Item = &'a Path>) -> Self {
        let mut a = Self::all(scenario);
        for p in kept {
            for &o in p.obs() {
                a.0[scenario.flat(o)] = false;
            }
        }
        a
    }

    pub fn is_available(&self, flat: usize) -> bool {
        self.0[flat]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }
}

/// Paths created by a filter run and their log generation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub created: Vec<Path>,
    pub log_prob: f64,
}

/// Signal that two paths drew the same observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapRejected;

struct Live<B> {
    obs: Vec<ObsId>,
    belief: B,
    gap: usize,
    key: u64,
}

enum Mode<'a, R: ?Sized> {
    Sample(&'a mut R),
    Replay(&'a [&'a Path]),
}

/// One forward walk over the scans. Returns the created paths (in seed
/// order) and the accumulated log-probability; replay failures give `-inf`.
fn walk<F: ObjectFilter<f64>, R: Rng + ?Sized>(
    target: &TargetPossibility<F>,
    seeds: &SeedSet,
    avail: &Availability,
    mut mode: Mode<'_, R>,
) -> Result<std::result::Result<(Vec<Live<F::Belief>>, f64), OverlapRejected>> {
    let scenario = target.scenario();
    let params = target.params();
    let filter = target.filter();
    let (log_nd, log_ns, log_fa) = (params.log_nd(), params.log_ns(), params.log_fa());
    let horizon = scenario.horizon();
    let mut live: Vec<Live<F::Belief>> = Vec::with_capacity(seeds.len());
    let mut log_prob = 0.0;
    let Some(start) = seeds.seeds().first().map(|s| s.time()) else {
        return Ok(Ok((live, 0.0)));
    };
    let mut next_seed = 0;
    let mut claimed: Vec<usize> = Vec::new();
    for k in start..=horizon {
        if !live.is_empty() {
            let seeds_now: Vec<usize> = seeds.seeds()[next_seed..]
                .iter()
                .take_while(|s| s.time() == k)
                .map(|&s| scenario.flat(s))
                .collect();
            let zk: Vec<usize> = scenario
                .flat_range(k)
                .filter(|&i| avail.is_available(i) && !seeds_now.contains(&i))
                .collect();
            let mut preds = Vec::with_capacity(live.len());
            let mut scores = Vec::with_capacity(live.len());
            for l in &live {
                let pred = filter.predict(&l.belief, predict_key(l.key, k));
                let scorer = filter.scorer(&pred)?;
                let (log_s, _) = survival_log(l.gap, log_nd, log_ns);
                let log_obs = zk
                    .iter()
                    .map(|&i| log_s + filter.log_marginal(&scorer, scenario.value(scenario.id_of(i))))
                    .collect();
                scores.push(PathScores { log_empty: log_likelihood_empty(l.gap, log_nd, log_ns), log_obs });
                preds.push((pred, scorer));
            }
            let table = LeaveOneOut::new(&scores, zk.len(), log_fa);
            claimed.clear();
            let mut choices = Vec::with_capacity(live.len());
            for (o, s) in scores.iter().enumerate() {
                let mut log_gamma = Vec::with_capacity(zk.len() + 1);
                log_gamma.push(table.get(o, None) + s.log_empty);
                for (z, &l) in s.log_obs.iter().enumerate() {
                    log_gamma.push(table.get(o, Some(z)) + l);
                }
                let log_p = max_entropy_log(&log_gamma)?;
                let choice = match &mut mode {
                    Mode::Sample(rng) => sample_index(&log_p, *rng),
                    Mode::Replay(targets) => match targets[o].at(k) {
                        None => 0,
                        Some(id) => match zk.iter().position(|&i| i == scenario.flat(id)) {
                            Some(z) => z + 1,
                            None => return Ok(Ok((Vec::new(), f64::NEG_INFINITY))),
                        },
                    },
                };
                log_prob += log_p[choice];
                if choice > 0 {
                    if claimed.contains(&choice) {
                        return Ok(match mode {
                            Mode::Sample(_) => Err(OverlapRejected),
                            Mode::Replay(_) => Ok((Vec::new(), f64::NEG_INFINITY)),
                        });
                    }
                    claimed.push(choice);
                }
                choices.push(choice);
            }
            if log_prob == f64::NEG_INFINITY {
                return Ok(Ok((Vec::new(), f64::NEG_INFINITY)));
            }
            for ((l, (pred, scorer)), choice) in live.iter_mut().zip(preds).zip(choices) {
                if choice == 0 {
                    l.belief = pred;
                    l.gap += 1;
                    l.key = step_key(l.key, None);
                } else {
                    let id = scenario.id_of(zk[choice - 1]);
                    l.belief = filter.update(&pred, &scorer, scenario.value(id));
                    l.gap = 0;
                    l.obs.push(id);
                    l.key = step_key(l.key, Some(id));
                }
            }
        }
        while next_seed < seeds.len() && seeds.seeds()[next_seed].time() == k {
            let s = seeds.seeds()[next_seed];
            let key = path_key(s, 0);
            let belief = filter.init(scenario.value(s), 0, key)?;
            live.push(Live { obs: vec![s], belief, gap: 0, key });
            next_seed += 1;
        }
    }
    Ok(Ok((live, log_prob)))
}

fn sample_index<R: Rng + ?Sized>(log_p: &[f64], rng: &mut R) -> usize {
    let probs: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Proposal filter over a target model.
pub struct ProposalFilter<'a, F> {
    target: &'a TargetPossibility<F>,
}

impl<'a, F: ObjectFilter<f64>> ProposalFilter<'a, F> {
    pub fn new(target: &'a TargetPossibility<F>) -> Self {
        Self { target }
    }

    fn check_seeds(&self, seeds: &SeedSet, avail: &Availability) -> Result<()> {
        let sc = self.target.scenario();
        for &s in seeds.seeds() {
            if !sc.contains(s) {
                return Err(Error::Usage(format!("seed {s} is not in the scenario")));
            }
            if !avail.is_available(sc.flat(s)) {
                return Err(Error::Usage(format!("seed {s} is not available")));
            }
        }
        Ok(())
    }

    /// Samples the created paths `A_c` and `log P_c(A_c | Z_c, Z^-)`.
    pub fn run<R: Rng + ?Sized>(
        &self,
        seeds: &SeedSet,
        avail: &Availability,
        rng: &mut R,
    ) -> Result<std::result::Result<FilterOutcome, OverlapRejected>> {
        self.check_seeds(seeds, avail)?;
        Ok(walk(self.target, seeds, avail, Mode::Sample(rng))?.map(|(live, log_prob)| FilterOutcome {
            created: live.into_iter().map(|l| Path::from_sorted(l.obs)).collect(),
            log_prob,
        }))
    }

    /// `log P_c(targets | seeds, Z^-)` by deterministic replay; `-inf` when a
    /// forced choice has no proposal mass, uses an unavailable observation or
    /// overlaps another path.
    pub fn evaluate(&self, targets: &[Path], seeds: &SeedSet, avail: &Availability) -> Result<f64> {
        if targets.len() != seeds.len() {
            return Err(Error::Usage(format!("{} target paths for {} seeds", targets.len(), seeds.len())));
        }
        let sc = self.target.scenario();
        let mut by_seed: Vec<&Path> = Vec::with_capacity(targets.len());
        for &s in seeds.seeds() {
            let t = targets
                .iter()
                .find(|p| p.first() == s)
                .ok_or_else(|| Error::Usage(format!("no target path starts at seed {s}")))?;
            by_seed.push(t);
        }
        for &s in seeds.seeds() {
            if !sc.contains(s) {
                return Err(Error::Usage(format!("seed {s} is not in the scenario")));
            }
            if !avail.is_available(sc.flat(s)) {
                return Ok(f64::NEG_INFINITY);
            }
        }
        let replay = walk::<F, rand_chacha::ChaCha8Rng>(self.target, seeds, avail, Mode::Replay(&by_seed))?;
        Ok(match replay {
            Ok((_, lp)) => lp,
            Err(OverlapRejected) => f64::NEG_INFINITY,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{BirthPrior, KalmanObjectFilter, LinearGaussianModel};
    use crate::model::MultiObjectParams;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn target(scans: Vec<Vec<[f64; 2]>>, alpha_nd: f64, alpha_ns: f64) -> TargetPossibility<KalmanObjectFilter<f64>> {
        let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, 0.3).unwrap();
        let filter = KalmanObjectFilter::new(model, BirthPrior::isotropic(1.0, 2).unwrap()).unwrap();
        let scans = scans
            .into_iter()
            .map(|s| s.into_iter().map(|z| DVector::from_vec(z.to_vec())).collect())
            .collect();
        TargetPossibility::new(
            Scenario::new(2, scans).unwrap(),
            MultiObjectParams::new(alpha_nd, alpha_ns, 1e-2, 1e-4).unwrap(),
            filter,
        )
    }

    #[test]
    fn survival_examples() {
        let (nd, ns) = (0.1f64.ln(), 0.001f64.ln());
        let (s, n) = survival_log(0, nd, ns);
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(n.exp(), 0.001, epsilon = 1e-15);
        let (s, n) = survival_log(2, nd, ns);
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(n.exp(), 0.1, epsilon = 1e-12);
        let (s, n) = survival_log(3, nd, ns);
        assert_abs_diff_eq!(s.exp(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.exp(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_likelihood_empty(0, nd, ns).exp(), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(log_likelihood_empty(3, nd, ns).exp(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma_degenerate_cases() {
        let log_fa = 0.01f64.ln();
        assert_abs_diff_eq!(gamma_product_log(&[], &[], 4, None, log_fa), 4.0 * log_fa, epsilon = 1e-15);
        let s = vec![
            PathScores { log_empty: -1.0, log_obs: vec![] },
            PathScores { log_empty: -2.0, log_obs: vec![] },
        ];
        assert_eq!(gamma_product_log(&s, &[0, 1], 0, None, log_fa), -3.0);
        let one = vec![PathScores { log_empty: -1.0, log_obs: vec![-0.5, -3.0, -4.0] }];
        let t = LeaveOneOut::new(&one, 3, log_fa);
        for z in 0..3 {
            assert_eq!(t.get(0, Some(z)), 2.0 * log_fa);
        }
    }

    #[test]
    fn seed_only_walk_is_deterministic() {
        let t = target(vec![vec![[0.0, 0.0]], vec![[0.0, 0.0]]], 0.1, 0.001);
        let pf = ProposalFilter::new(&t);
        let seeds = SeedSet::new(vec![ObsId::new(2, 0)]).unwrap();
        let avail = Availability::all(t.scenario());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = pf.run(&seeds, &avail, &mut rng).unwrap().unwrap();
        assert_eq!(out.created, vec![Path::single(ObsId::new(2, 0))]);
        assert_eq!(out.log_prob, 0.0);
        let empty = pf.run(&SeedSet::default(), &avail, &mut rng).unwrap().unwrap();
        assert!(empty.created.is_empty());
        assert_eq!(empty.log_prob, 0.0);
    }

    #[test]
    fn mode_observation_dominates() {
        let t = target(vec![vec![[0.0, 0.0]], vec![[0.0, 0.0]]], 0.1, 0.001);
        let pf = ProposalFilter::new(&t);
        let seeds = SeedSet::new(vec![ObsId::new(1, 0)]).unwrap();
        let avail = Availability::all(t.scenario());
        // hand computation: Γ(∅|∅) L(z) = 1; Γ({z}|∅) L(φ) = α_fa · 0.1 = 1e-3
        // sup-normalised (1, 1e-3) → pmf (0.999, 0.001)
        let full = Path::new(vec![ObsId::new(1, 0), ObsId::new(2, 0)]).unwrap();
        let lp = pf.evaluate(std::slice::from_ref(&full), &seeds, &avail).unwrap();
        assert_abs_diff_eq!(lp, 0.999f64.ln(), epsilon = 1e-12);
        let lp_phi = pf.evaluate(&[Path::single(ObsId::new(1, 0))], &seeds, &avail).unwrap();
        assert_abs_diff_eq!(lp_phi, 0.001f64.ln(), epsilon = 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let out = pf.run(&seeds, &avail, &mut rng).unwrap().unwrap();
            assert_eq!(pf.evaluate(&out.created, &seeds, &avail).unwrap(), out.log_prob);
        }
    }

    #[test]
    fn replay_overlap_and_unavailable() {
        let t = target(vec![vec![[0.0, 0.0], [1.0, 0.0]], vec![[0.5, 0.0]]], 0.1, 0.001);
        let pf = ProposalFilter::new(&t);
        let seeds = SeedSet::new(vec![ObsId::new(1, 0), ObsId::new(1, 1)]).unwrap();
        let avail = Availability::all(t.scenario());
        let a = Path::new(vec![ObsId::new(1, 0), ObsId::new(2, 0)]).unwrap();
        let b = Path::new(vec![ObsId::new(1, 1), ObsId::new(2, 0)]).unwrap();
        assert_eq!(pf.evaluate(&[a.clone(), b], &seeds, &avail).unwrap(), f64::NEG_INFINITY);
        let one = SeedSet::new(vec![ObsId::new(1, 0)]).unwrap();
        let blocked = Availability::excluding(t.scenario(), [&Path::single(ObsId::new(2, 0))]);
        assert_eq!(pf.evaluate(std::slice::from_ref(&a), &one, &blocked).unwrap(), f64::NEG_INFINITY);
        assert!(pf.evaluate(&[a], &SeedSet::new(vec![ObsId::new(1, 1)]).unwrap(), &avail).is_err());
    }
}
