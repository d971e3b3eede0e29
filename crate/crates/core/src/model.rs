//! Multi-object domain types and the unnormalised target possibility.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{mix_key, ObjectFilter};

/// Identifier of an observation: scan time (1-based) and index within the scan.
///
/// Ordered lexicographically by `(time, index)`; this is the total order used
/// for every tie-break on observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObsId {
    pub time: u32,
    pub index: u32,
}

impl ObsId {
    pub fn new(time: usize, index: usize) -> Self {
        Self { time: time as u32, index: index as u32 }
    }

    pub fn time(self) -> usize {
        self.time as usize
    }
}

impl fmt::Display for ObsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.time, self.index)
    }
}

/// Observation sets `Z_1..Z_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    obs_dim: usize,
    scans: Vec<Vec<DVector<f64>>>,
    offsets: Vec<usize>,
}

impl Scenario {
    pub fn new(obs_dim: usize, scans: Vec<Vec<DVector<f64>>>) -> Result<Self> {
        if scans.is_empty() {
            return Err(Error::Empty("scenario horizon"));
        }
        let mut offsets = Vec::with_capacity(scans.len() + 1);
        let mut total = 0;
        for scan in &scans {
            offsets.push(total);
            for z in scan {
                if z.len() != obs_dim {
                    return Err(Error::DimensionMismatch { expected: obs_dim, got: z.len() });
                }
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("observation is not finite".into()));
                }
            }
            total += scan.len();
        }
        offsets.push(total);
        Ok(Self { obs_dim, scans, offsets })
    }

    pub fn horizon(&self) -> usize {
        self.scans.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Observations at time `k` (1-based).
    pub fn scan(&self, k: usize) -> &[DVector<f64>] {
        &self.scans[k - 1]
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn contains(&self, id: ObsId) -> bool {
        id.time >= 1 && id.time() <= self.horizon() && (id.index as usize) < self.scans[id.time() - 1].len()
    }

    pub fn value(&self, id: ObsId) -> &DVector<f64> {
        &self.scans[id.time() - 1][id.index as usize]
    }

    /// Dense index of `id` in `0..total()`.
    pub fn flat(&self, id: ObsId) -> usize {
        self.offsets[id.time() - 1] + id.index as usize
    }

    pub fn id_of(&self, flat: usize) -> ObsId {
        let t = self.offsets.partition_point(|&o| o <= flat) - 1;
        ObsId::new(t + 1, flat - self.offsets[t])
    }

    /// Flat indices of scan `k`.
    pub fn flat_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k - 1]..self.offsets[k]
    }

    pub fn ids(&self) -> impl Iterator<Item = ObsId> + '_ {
        self.scans
            .iter()
            .enumerate()
            .flat_map(|(t, s)| (0..s.len()).map(move |i| ObsId::new(t + 1, i)))
    }
}

/// Element of `𝒪_K`: detected observations in increasing time order, with
/// the empty observation represented by absence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path(Vec<ObsId>);

impl Path {
    pub fn new(mut obs: Vec<ObsId>) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::InvalidAssociation("a path needs at least one observation".into()));
        }
        obs.sort();
        if obs.windows(2).any(|w| w[0].time == w[1].time) {
            return Err(Error::InvalidAssociation("a path holds at most one observation per scan".into()));
        }
        if obs[0].time == 0 {
            return Err(Error::InvalidAssociation("observation times start at 1".into()));
        }
        Ok(Self(obs))
    }

    pub fn single(id: ObsId) -> Self {
        Self(vec![id])
    }

    pub(crate) fn from_sorted(obs: Vec<ObsId>) -> Self {
        debug_assert!(!obs.is_empty() && obs.windows(2).all(|w| w[0].time < w[1].time));
        Self(obs)
    }

    pub fn obs(&self) -> &[ObsId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> ObsId {
        self.0[0]
    }

    pub fn last(&self) -> ObsId {
        *self.0.last().unwrap()
    }

    /// `k_+(o)`, time of the first detection.
    pub fn first_time(&self) -> usize {
        self.first().time()
    }

    pub fn last_time(&self) -> usize {
        self.last().time()
    }

    /// Number of trailing empty observations up to `horizon`.
    pub fn trailing_gap(&self, horizon: usize) -> usize {
        horizon - self.last_time()
    }

    pub fn at(&self, time: usize) -> Option<ObsId> {
        self.0
            .binary_search_by_key(&(time as u32), |o| o.time)
            .ok()
            .map(|i| self.0[i])
    }

    pub fn contains(&self, id: ObsId) -> bool {
        self.at(id.time()) == Some(id)
    }
}

/// Path with an appearance time `m` and last time of existence `n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Track {
    pub path: Path,
    pub appear: usize,
    pub last: usize,
}

impl Track {
    pub fn new(path: Path, appear: usize, last: usize, horizon: usize) -> Result<Self> {
        if appear < 1 || appear > path.first_time() || last < path.last_time() || last > horizon {
            return Err(Error::InvalidInterval {
                appear,
                last,
                first: path.first_time(),
                end: path.last_time(),
                horizon,
            });
        }
        Ok(Self { path, appear, last })
    }
}

/// Set of pairwise-disjoint paths, stored in canonical (sorted) order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Association {
    paths: Vec<Path>,
}

impl Association {
    pub fn new(mut paths: Vec<Path>) -> Result<Self> {
        paths.sort();
        let mut seen = HashSet::new();
        for p in &paths {
            for &o in p.obs() {
                if !seen.insert(o) {
                    return Err(Error::InvalidAssociation(format!("observation {o} is used by two paths")));
                }
            }
        }
        Ok(Self { paths })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub(crate) fn from_sorted_unchecked(paths: Vec<Path>) -> Self {
        debug_assert!(paths.windows(2).all(|w| w[0] < w[1]));
        Self { paths }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn contains(&self, p: &Path) -> bool {
        self.paths.binary_search(p).is_ok()
    }

    pub fn used(&self) -> BTreeSet<ObsId> {
        self.paths.iter().flat_map(|p| p.obs().iter().copied()).collect()
    }

    pub fn used_count(&self) -> usize {
        self.paths.iter().map(Path::len).sum()
    }

    /// Checks that every observation exists in `scenario`.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        for p in &self.paths {
            for &o in p.obs() {
                if !scenario.contains(o) {
                    return Err(Error::InvalidAssociation(format!("observation {o} is not in the scenario")));
                }
            }
        }
        Ok(())
    }

    /// `(A ∖ removed) ∪ added`; `None` when the result would not be disjoint.
    pub fn replace(&self, removed: &[Path], added: &[Path]) -> Option<Self> {
        let mut paths: Vec<Path> = self.paths.iter().filter(|p| !removed.contains(p)).cloned().collect();
        paths.extend(added.iter().cloned());
        Self::new(paths).ok()
    }

    /// Paths of `self` that are not in `other`.
    pub fn difference(&self, other: &Self) -> Vec<Path> {
        self.paths.iter().filter(|p| !other.contains(p)).cloned().collect()
    }
}

/// Element of `𝒯`: a set of tracks whose paths are disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrackSet {
    tracks: Vec<Track>,
}

impl TrackSet {
    pub fn new(mut tracks: Vec<Track>) -> Result<Self> {
        tracks.sort();
        Association::new(tracks.iter().map(|t| t.path.clone()).collect())?;
        Ok(Self { tracks })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// `κ(T)`.
    pub fn association(&self) -> Association {
        Association::from_sorted_unchecked(self.tracks.iter().map(|t| t.path.clone()).collect())
    }
}

/// Credibilities of the multi-object model. Detection and survival
/// credibilities are fixed to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiObjectParams {
    /// Credibility of a detection failure.
    pub alpha_nd: f64,
    /// Credibility of non-survival.
    pub alpha_ns: f64,
    /// Per-observation false-alarm credibility.
    pub alpha_fa: f64,
    /// Per-object appearance credibility.
    pub alpha_birth: f64,
}

impl MultiObjectParams {
    pub fn new(alpha_nd: f64, alpha_ns: f64, alpha_fa: f64, alpha_birth: f64) -> Result<Self> {
        for (name, v) in [("alpha_nd", alpha_nd), ("alpha_ns", alpha_ns), ("alpha_fa", alpha_fa), ("alpha_birth", alpha_birth)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(Self { alpha_nd, alpha_ns, alpha_fa, alpha_birth })
    }

    /// Credibilities matched to detection and survival probabilities, with
    /// `α_fa = 1e-2` and `α_+ = 1e-4`.
    pub fn from_probabilities(p_d: f64, p_s: f64) -> Result<Self> {
        Self::new(1.0 - p_d, 1.0 - p_s, 1e-2, 1e-4)
    }

    pub fn log_nd(&self) -> f64 {
        self.alpha_nd.ln()
    }
    pub fn log_ns(&self) -> f64 {
        self.alpha_ns.ln()
    }
    pub fn log_fa(&self) -> f64 {
        self.alpha_fa.ln()
    }
    pub fn log_birth(&self) -> f64 {
        self.alpha_birth.ln()
    }
}

/// Best interval of existence of a path under the product birth model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestInterval {
    pub log_cred: f64,
    pub appear: usize,
    pub last: usize,
}

/// Unnormalised log target possibility `log Π` and path marginal `log Π̂`.
#[derive(Debug, Clone)]
pub struct TargetPossibility<F> {
    scenario: Scenario,
    params: MultiObjectParams,
    filter: F,
}

/// Deterministic key of a path's first detection, used to seed stochastic
/// single-object filters.
pub fn path_key(seed: ObsId, silent: usize) -> u64 {
    mix_key(((seed.time as u64) << 32) | seed.index as u64, silent as u64 + 1)
}

pub(crate) fn predict_key(prev: u64, time: usize) -> u64 {
    mix_key(prev, time as u64)
}

pub(crate) fn step_key(prev: u64, obs: Option<ObsId>) -> u64 {
    match obs {
        Some(o) => mix_key(prev, ((o.time as u64) << 32) | o.index as u64),
        None => mix_key(prev, u64::MAX),
    }
}

impl<F: ObjectFilter<f64>> TargetPossibility<F> {
    pub fn new(scenario: Scenario, params: MultiObjectParams, filter: F) -> Self {
        Self { scenario, params, filter }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn params(&self) -> &MultiObjectParams {
        &self.params
    }

    pub fn filter(&self) -> &F {
        &self.filter
    }

    pub fn horizon(&self) -> usize {
        self.scenario.horizon()
    }

    /// Log-credibility of the detections of `path` from its first to its
    /// last detection, given `silent` undetected steps before the first one:
    /// the sum of log marginal likelihoods and `log α_nd` per gap.
    pub fn path_core(&self, path: &Path, silent: usize) -> Result<f64> {
        let first = path.first();
        let mut key = path_key(first, silent);
        let mut belief = self.filter.init(self.scenario.value(first), silent, key)?;
        let mut total = 0.0;
        let mut next = 1;
        for t in (first.time() + 1)..=path.last_time() {
            let pred = self.filter.predict(&belief, predict_key(key, t));
            match path.obs().get(next) {
                Some(&o) if o.time() == t => {
                    let z = self.scenario.value(o);
                    let scorer = self.filter.scorer(&pred)?;
                    total += self.filter.log_marginal(&scorer, z);
                    belief = self.filter.update(&pred, &scorer, z);
                    key = step_key(key, Some(o));
                    next += 1;
                }
                _ => {
                    total += self.params.log_nd();
                    belief = pred;
                    key = step_key(key, None);
                }
            }
        }
        Ok(total)
    }

    /// `log π(o, n | m)`.
    pub fn path_log_credibility(&self, path: &Path, appear: usize, last: usize) -> Result<f64> {
        let k = self.horizon();
        if appear < 1 || appear > path.first_time() || last < path.last_time() || last > k {
            return Err(Error::InvalidInterval {
                appear,
                last,
                first: path.first_time(),
                end: path.last_time(),
                horizon: k,
            });
        }
        let silent = path.first_time() - appear;
        let core = self.path_core(path, silent)?;
        Ok(silent as f64 * self.params.log_nd() + core + self.tail_log(path.last_time(), last))
    }

    pub(crate) fn tail_log(&self, last_obs: usize, last: usize) -> f64 {
        let mut v = (last - last_obs) as f64 * self.params.log_nd();
        if last < self.horizon() {
            v += self.params.log_ns();
        }
        v
    }

    /// Exhaustive maximisation of `log π(o, n | m)` over `m ≤ k_+(o)` and
    /// `n ≥` last detection. Scanning `m` downwards stops as soon as the
    /// detection-failure penalty alone rules out any improvement, since the
    /// remaining factors never exceed one.
    pub fn best_interval(&self, path: &Path) -> Result<BestInterval> {
        let k = self.horizon();
        let lo = path.last_time();
        let (mut tail, mut last) = (f64::NEG_INFINITY, lo);
        for n in lo..=k {
            let v = self.tail_log(lo, n);
            if v > tail {
                tail = v;
                last = n;
            }
        }
        let kp = path.first_time();
        let mut best = BestInterval { log_cred: f64::NEG_INFINITY, appear: kp, last };
        for silent in 0..kp {
            let penalty = silent as f64 * self.params.log_nd();
            if penalty + tail <= best.log_cred {
                break;
            }
            let v = penalty + self.path_core(path, silent)? + tail;
            if v > best.log_cred {
                best = BestInterval { log_cred: v, appear: kp - silent, last };
            }
        }
        Ok(best)
    }

    /// `Σ_k |Z_{k,fa}(A)| log α_fa`.
    pub fn false_alarm_log(&self, assoc: &Association) -> f64 {
        (self.scenario.total() - assoc.used_count()) as f64 * self.params.log_fa()
    }

    /// `log f_+(T) = |T| log α_+`.
    pub fn birth_log(&self, tracks: &TrackSet) -> f64 {
        tracks.len() as f64 * self.params.log_birth()
    }

    /// Unnormalised `log Π(T)`.
    pub fn track_set_log_possibility(&self, tracks: &TrackSet) -> Result<f64> {
        let assoc = tracks.association();
        assoc.validate(&self.scenario)?;
        let mut total = self.false_alarm_log(&assoc) + self.birth_log(tracks);
        for t in tracks.tracks() {
            total += self.path_log_credibility(&t.path, t.appear, t.last)?;
        }
        Ok(total)
    }

    /// Contribution of a single path to `log Π̂`: `log α_+ − |o| log α_fa +
    /// max_{m,n} log π(o, n | m)`, so that `log Π̂(A) = false_alarm_log(∅) +
    /// Σ_o path_term(o)`.
    pub fn path_term(&self, path: &Path) -> Result<(f64, BestInterval)> {
        let best = self.best_interval(path)?;
        Ok((self.params.log_birth() - path.len() as f64 * self.params.log_fa() + best.log_cred, best))
    }

    /// `log Π̂(A)` and the maximising track set.
    pub fn path_marginal_log(&self, assoc: &Association) -> Result<(f64, TrackSet)> {
        assoc.validate(&self.scenario)?;
        let mut total = self.false_alarm_log(&Association::empty());
        let mut tracks = Vec::with_capacity(assoc.len());
        for p in assoc.paths() {
            let (term, best) = self.path_term(p)?;
            total += term;
            tracks.push(Track { path: p.clone(), appear: best.appear, last: best.last });
        }
        Ok((total, TrackSet { tracks }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{BirthPrior, KalmanObjectFilter, LinearGaussianModel};
    use approx::assert_abs_diff_eq;

    fn target(scans: Vec<Vec<[f64; 2]>>) -> TargetPossibility<KalmanObjectFilter<f64>> {
        let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, 0.3).unwrap();
        let filter = KalmanObjectFilter::new(model, BirthPrior::isotropic(1.0, 2).unwrap()).unwrap();
        let scans = scans
            .into_iter()
            .map(|s| s.into_iter().map(|z| DVector::from_vec(z.to_vec())).collect())
            .collect();
        let scenario = Scenario::new(2, scans).unwrap();
        TargetPossibility::new(scenario, MultiObjectParams::new(0.1, 0.01, 1e-2, 1e-4).unwrap(), filter)
    }

    #[test]
    fn flat_indices_round_trip() {
        let t = target(vec![vec![[0.0, 0.0]; 2], vec![], vec![[1.0, 1.0]; 3]]);
        let sc = t.scenario();
        assert_eq!(sc.total(), 5);
        for (i, id) in sc.ids().enumerate() {
            assert_eq!(sc.flat(id), i);
            assert_eq!(sc.id_of(i), id);
        }
        assert!(!sc.contains(ObsId::new(2, 0)));
    }

    #[test]
    fn path_validation() {
        assert!(Path::new(vec![]).is_err());
        assert!(Path::new(vec![ObsId::new(1, 0), ObsId::new(1, 1)]).is_err());
        let p = Path::new(vec![ObsId::new(3, 0), ObsId::new(1, 2)]).unwrap();
        assert_eq!(p.first_time(), 1);
        assert_eq!(p.at(3), Some(ObsId::new(3, 0)));
        assert_eq!(p.at(2), None);
        assert_eq!(p.trailing_gap(5), 2);
    }

    #[test]
    fn single_observation_at_mode() {
        let t = target(vec![vec![[1.0, 2.0]]; 3]);
        let p = Path::single(ObsId::new(3, 0));
        assert_eq!(t.path_log_credibility(&p, 3, 3).unwrap(), 0.0);
        let p = Path::single(ObsId::new(2, 0));
        assert_abs_diff_eq!(t.path_log_credibility(&p, 2, 2).unwrap(), 0.01f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.path_log_credibility(&p, 1, 3).unwrap(), 2.0 * 0.1f64.ln(), epsilon = 1e-15);
        assert!(t.path_log_credibility(&p, 3, 3).is_err());
    }

    #[test]
    fn static_object_path_is_free() {
        let t = target(vec![vec![[1.0, 2.0]]; 4]);
        let p = Path::new((1..=4).map(|k| ObsId::new(k, 0)).collect()).unwrap();
        assert_abs_diff_eq!(t.path_log_credibility(&p, 1, 4).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn false_alarm_and_birth_terms() {
        let t = target(vec![vec![[0.0, 0.0]; 4]; 3]);
        let empty = Association::empty();
        assert_abs_diff_eq!(t.false_alarm_log(&empty), 12.0 * 1e-2f64.ln(), epsilon = 1e-12);
        let ts = TrackSet::empty();
        assert_eq!(t.birth_log(&ts), 0.0);
        assert_eq!(t.track_set_log_possibility(&ts).unwrap(), t.false_alarm_log(&empty));
        assert_eq!(t.path_marginal_log(&empty).unwrap(), (t.false_alarm_log(&empty), TrackSet::empty()));
    }

    #[test]
    fn overlapping_paths_rejected() {
        let a = Path::new(vec![ObsId::new(1, 0), ObsId::new(2, 0)]).unwrap();
        let b = Path::new(vec![ObsId::new(2, 0), ObsId::new(3, 0)]).unwrap();
        assert!(Association::new(vec![a.clone(), b.clone()]).is_err());
        let ta = Track::new(a, 1, 2, 3).unwrap();
        let tb = Track::new(b, 2, 3, 3).unwrap();
        assert!(TrackSet::new(vec![ta, tb]).is_err());
    }

    #[test]
    fn adding_clutter_track_changes_by_components() {
        let t = target(vec![vec![[0.0, 0.0], [30.0, 30.0]]; 3]);
        let base = Track::new(Path::new((1..=3).map(|k| ObsId::new(k, 0)).collect()).unwrap(), 1, 3, 3).unwrap();
        let clutter = Track::new(Path::single(ObsId::new(2, 1)), 2, 2, 3).unwrap();
        let one = TrackSet::new(vec![base.clone()]).unwrap();
        let two = TrackSet::new(vec![base, clutter.clone()]).unwrap();
        let diff = t.track_set_log_possibility(&two).unwrap() - t.track_set_log_possibility(&one).unwrap();
        let expected = 1e-4f64.ln() + t.path_log_credibility(&clutter.path, 2, 2).unwrap() - 1e-2f64.ln();
        assert_abs_diff_eq!(diff, expected, epsilon = 1e-12);
    }

    #[test]
    fn best_interval_matches_exhaustive_scan() {
        let t = target(vec![
            vec![[0.0, 0.0]],
            vec![[0.5, 0.1]],
            vec![[5.0, 5.0]],
            vec![[1.4, 0.2]],
            vec![[9.0, 9.0]],
            vec![[2.1, 0.4]],
        ]);
        let p = Path::new(vec![ObsId::new(2, 0), ObsId::new(4, 0)]).unwrap();
        let best = t.best_interval(&p).unwrap();
        let mut brute = f64::NEG_INFINITY;
        for m in 1..=2 {
            for n in 4..=6 {
                brute = brute.max(t.path_log_credibility(&p, m, n).unwrap());
            }
        }
        assert_eq!(best.log_cred, brute);
        assert_eq!(t.path_log_credibility(&p, best.appear, best.last).unwrap(), brute);
    }
}
