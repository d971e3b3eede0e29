//! Spatio-temporal consistency between observations and paths.
//!
//! The credibility that `z'` at time `k' = k + l` is the next detection of an
//! object first seen at `z` is `a_nd^{l-1} N̄(z'; H F^l m_z, H Σ_l Hᵀ + R)`,
//! where `(m_z, Σ_0)` is the posterior after the single detection `z` and
//! `Σ_l` follows `l` prediction steps of the upper-bounding transition. Pairs
//! with `a_nd^l < τ'` are not stored and count as zero.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{BirthPrior, LinearGaussianModel};
use crate::model::{ObsId, Path, Scenario};
use crate::possibility::QuadraticForm;

/// Default sparsification threshold `τ'`.
pub const DEFAULT_TAU_PRIME: f64 = 1e-3;

/// Log-credibilities below this are treated as zero.
const LOG_FLOOR: f64 = -700.0;

/// Per-gap quantities of the closed-form pair consistency.
#[derive(Debug, Clone)]
struct GapForm {
    /// `H F^l` restricted to the birth-posterior mean layout.
    h_fl: DMatrix<f64>,
    form: QuadraticForm<f64>,
    log_penalty: f64,
}

/// Pair consistency for a time-homogeneous linear-Gaussian bounding model.
#[derive(Debug, Clone)]
pub struct PairConsistency {
    model: LinearGaussianModel<f64>,
    birth: BirthPrior<f64>,
    a_nd: f64,
    tau_prime: f64,
    gaps: Vec<GapForm>,
}

impl PairConsistency {
    /// Precomputes every gap `l ≥ 1` with `a_nd^l ≥ tau_prime`, capped at
    /// `max_gap`.
    pub fn new(model: LinearGaussianModel<f64>, birth: BirthPrior<f64>, a_nd: f64, tau_prime: f64, max_gap: usize) -> Result<Self> {
        if !(tau_prime > 0.0 && tau_prime <= 1.0) {
            return Err(Error::InvalidParameter(format!("tau_prime must lie in (0, 1], got {tau_prime}")));
        }
        if !(a_nd > 0.0 && a_nd < 1.0) {
            return Err(Error::InvalidParameter(format!("a_nd must lie in (0, 1), got {a_nd}")));
        }
        let zero = DVector::zeros(model.obs_dim());
        let post = birth.posterior(&zero, 0, &model)?;
        let mut sigma = post.cov().clone();
        let mut f_l = DMatrix::identity(model.state_dim(), model.state_dim());
        let mut gaps = Vec::new();
        let mut l = 1;
        while l <= max_gap && a_nd.powi(l as i32) >= tau_prime {
            sigma = model.f() * &sigma * model.f().transpose() + model.q();
            sigma = (&sigma + sigma.transpose()) * 0.5;
            f_l = model.f() * f_l;
            let s = model.h() * &sigma * model.h().transpose() + model.r();
            let form = QuadraticForm::new(&s).ok_or(Error::SingularInnovation)?;
            gaps.push(GapForm { h_fl: model.h() * &f_l, form, log_penalty: (l - 1) as f64 * a_nd.ln() });
            l += 1;
        }
        Ok(Self { model, birth, a_nd, tau_prime, gaps })
    }

    /// Largest stored gap.
    pub fn max_gap(&self) -> usize {
        self.gaps.len()
    }

    pub fn a_nd(&self) -> f64 {
        self.a_nd
    }

    pub fn tau_prime(&self) -> f64 {
        self.tau_prime
    }

    /// `log f̂_{k'|k}(z' | z)` for a gap `l = k' − k`; `-inf` beyond the cut.
    pub fn log_pair(&self, z: &DVector<f64>, z_next: &DVector<f64>, gap: usize) -> Result<f64> {
        if gap == 0 {
            return Err(Error::Usage("pair consistency needs k < k'".into()));
        }
        let Some(g) = self.gaps.get(gap - 1) else {
            return Ok(f64::NEG_INFINITY);
        };
        let dz = self.model.obs_dim();
        let mut m = DVector::zeros(self.model.state_dim());
        m.rows_mut(0, dz).copy_from(z);
        let predicted = &g.h_fl * m;
        Ok(g.log_penalty + g.form.log_credibility(predicted.as_slice(), z_next.as_slice()))
    }

    pub fn pair(&self, z: &DVector<f64>, z_next: &DVector<f64>, gap: usize) -> Result<f64> {
        Ok(self.log_pair(z, z_next, gap)?.exp())
    }

    pub fn model(&self) -> &LinearGaussianModel<f64> {
        &self.model
    }

    pub fn birth(&self) -> &BirthPrior<f64> {
        &self.birth
    }
}

/// Pair consistency for a non-linear observation function `h`, linearised at
/// `F^l m_z` with a central finite-difference Jacobian.
pub fn linearized_log_pair(
    h: impl Fn(&DVector<f64>) -> DVector<f64>,
    m_z: &DVector<f64>,
    sigma0: &DMatrix<f64>,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    a_nd: f64,
    z_next: &DVector<f64>,
    gap: usize,
) -> Result<f64> {
    if gap == 0 {
        return Err(Error::Usage("pair consistency needs k < k'".into()));
    }
    let mut mean = m_z.clone();
    let mut sigma = sigma0.clone();
    for _ in 0..gap {
        mean = f * mean;
        sigma = f * &sigma * f.transpose() + q;
    }
    let jac = finite_difference_jacobian(&h, &mean);
    let s = &jac * sigma * jac.transpose() + r;
    let form = QuadraticForm::new(&s).ok_or(Error::SingularInnovation)?;
    let predicted = h(&mean);
    Ok((gap - 1) as f64 * a_nd.ln() + form.log_credibility(predicted.as_slice(), z_next.as_slice()))
}

/// Central differences with step `1e-5 · max(1, |x_i|)`.
pub fn finite_difference_jacobian(h: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let out = h(x).len();
    let mut jac = DMatrix::zeros(out, x.len());
    for j in 0..x.len() {
        let step = 1e-5 * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;
        let d = (h(&xp) - h(&xm)) / (2.0 * step);
        jac.set_column(j, &d);
    }
    jac
}

/// Sparse table of stored pair credibilities over a scenario.
#[derive(Debug, Clone)]
pub struct ConsistencyIndex {
    tau_prime: f64,
    /// Later observations per flat index, with credibility.
    succ: Vec<Vec<(u32, f64)>>,
    /// Earlier observations per flat index, with credibility.
    pred: Vec<Vec<(u32, f64)>>,
    marginal: Vec<f64>,
    pairs: HashMap<(u32, u32), f64>,
    ids: Vec<ObsId>,
}

impl ConsistencyIndex {
    /// Computes every stored pair (in parallel over source observations) and
    /// the marginal consistency of every observation.
    pub fn build(scenario: &Scenario, pc: &PairConsistency) -> Self {
        let total = scenario.total();
        let ids: Vec<ObsId> = scenario.ids().collect();
        let horizon = scenario.horizon();
        let succ: Vec<Vec<(u32, f64)>> = (0..total)
            .into_par_iter()
            .map(|i| {
                let id = ids[i];
                let z = scenario.value(id);
                let mut out = Vec::new();
                for gap in 1..=pc.max_gap() {
                    let k2 = id.time() + gap;
                    if k2 > horizon {
                        break;
                    }
                    for j in scenario.flat_range(k2) {
                        let lc = pc.log_pair(z, scenario.value(ids[j]), gap).expect("positive gap");
                        if lc > LOG_FLOOR {
                            out.push((j as u32, lc.exp()));
                        }
                    }
                }
                out
            })
            .collect();
        let mut pred = vec![Vec::new(); total];
        let mut pairs = HashMap::new();
        for (i, list) in succ.iter().enumerate() {
            for &(j, c) in list {
                pred[j as usize].push((i as u32, c));
                pairs.insert((i as u32, j), c);
            }
        }
        let marginal = succ.iter().map(|l| l.iter().fold(0.0f64, |a, &(_, c)| a.max(c))).collect();
        Self { tau_prime: pc.tau_prime, succ, pred, marginal, pairs, ids }
    }

    pub fn tau_prime(&self) -> f64 {
        self.tau_prime
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stored `f̂` from flat `i` to later flat `j`, zero when absent.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pairs.get(&(i as u32, j as u32)).copied().unwrap_or(0.0)
    }

    /// `f̂_k(z)`: credibility that `z` is followed by a later observation.
    pub fn marginal(&self, i: usize) -> f64 {
        self.marginal[i]
    }

    pub fn successors(&self, i: usize) -> &[(u32, f64)] {
        &self.succ[i]
    }

    pub fn predecessors(&self, i: usize) -> &[(u32, f64)] {
        &self.pred[i]
    }

    /// Credibility between `i` and any other observation, in both directions.
    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.succ[i].iter().chain(self.pred[i].iter()).map(|&(j, c)| (j as usize, c))
    }

    /// `f̂_k(z, o)`: best pair credibility between `z` and an observation of
    /// `o`, in either temporal direction.
    pub fn obs_path(&self, scenario: &Scenario, i: usize, path: &Path) -> f64 {
        let ti = self.ids[i].time();
        path.obs()
            .iter()
            .map(|&o| {
                let j = scenario.flat(o);
                match o.time().cmp(&ti) {
                    std::cmp::Ordering::Less => self.pair(j, i),
                    std::cmp::Ordering::Greater => self.pair(i, j),
                    std::cmp::Ordering::Equal => 0.0,
                }
            })
            .fold(0.0, f64::max)
    }

    /// `f̂(o, o')`: best pair credibility between the two paths.
    pub fn path_path(&self, scenario: &Scenario, a: &Path, b: &Path) -> f64 {
        a.obs()
            .iter()
            .map(|&o| self.obs_path(scenario, scenario.flat(o), b))
            .fold(0.0, f64::max)
    }

    /// `max_{o ∈ sources} f̂_k(z, o)` for every observation `z`, as a sparse map.
    pub fn to_paths(&self, scenario: &Scenario, sources: &[&Path]) -> HashMap<usize, f64> {
        let mut out: HashMap<usize, f64> = HashMap::new();
        for p in sources {
            for &o in p.obs() {
                for (j, c) in self.neighbours(scenario.flat(o)) {
                    let e = out.entry(j).or_insert(0.0);
                    if c > *e {
                        *e = c;
                    }
                }
            }
        }
        out
    }

    /// Writes one `from<TAB>to<TAB>credibility` row per stored pair, in
    /// flat-index order.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "from\tto\tcredibility")?;
        for (i, list) in self.succ.iter().enumerate() {
            for &(j, c) in list {
                writeln!(w, "{}\t{}\t{:e}", self.ids[i], self.ids[j as usize], c)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ncv() -> (LinearGaussianModel<f64>, BirthPrior<f64>) {
        (
            LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, 0.3).unwrap(),
            BirthPrior::isotropic(1.0, 2).unwrap(),
        )
    }

    fn v(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    #[test]
    fn static_point_is_fully_consistent() {
        let (m, b) = ncv();
        let pc = PairConsistency::new(m, b, 0.1, 1e-3, 50).unwrap();
        assert_eq!(pc.pair(&v(0.0, 0.0), &v(0.0, 0.0), 1).unwrap(), 1.0);
        assert_abs_diff_eq!(pc.pair(&v(2.0, 1.0), &v(2.0, 1.0), 2).unwrap(), 0.1, epsilon = 1e-15);
        assert!(pc.pair(&v(0.0, 0.0), &v(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn threshold_controls_stored_gaps() {
        let (m, b) = ncv();
        assert_eq!(PairConsistency::new(m.clone(), b.clone(), 0.1, 1.0, 50).unwrap().max_gap(), 0);
        assert_eq!(PairConsistency::new(m.clone(), b.clone(), 0.1, 0.05, 50).unwrap().max_gap(), 1);
        assert_eq!(PairConsistency::new(m.clone(), b.clone(), 0.1, 0.1, 50).unwrap().max_gap(), 1);
        assert_eq!(PairConsistency::new(m, b, 0.1, 1e-3, 50).unwrap().max_gap(), 3);
    }

    #[test]
    fn index_marginals_and_queries() {
        let (m, b) = ncv();
        let pc = PairConsistency::new(m, b, 0.1, 1e-3, 50).unwrap();
        let sc = Scenario::new(2, vec![vec![v(0.0, 0.0), v(500.0, 0.0)], vec![v(0.5, 0.0)], vec![v(1.0, 0.0)]]).unwrap();
        let idx = ConsistencyIndex::build(&sc, &pc);
        for i in sc.flat_range(3) {
            assert_eq!(idx.marginal(i), 0.0);
        }
        // brute-force marginal
        for (i, id) in sc.ids().enumerate() {
            let mut best = 0.0f64;
            for id2 in sc.ids() {
                if id2.time > id.time {
                    best = best.max(pc.pair(sc.value(id), sc.value(id2), id2.time() - id.time()).unwrap());
                }
            }
            assert_abs_diff_eq!(idx.marginal(i), best, epsilon = 1e-300);
        }
        let p = Path::new(vec![ObsId::new(1, 0), ObsId::new(3, 0)]).unwrap();
        let i = sc.flat(ObsId::new(2, 0));
        let expected = idx.pair(0, i).max(idx.pair(i, sc.flat(ObsId::new(3, 0))));
        assert_eq!(idx.obs_path(&sc, i, &p), expected);
        let q = Path::single(ObsId::new(2, 0));
        assert_eq!(idx.path_path(&sc, &p, &q), idx.path_path(&sc, &q, &p));
        let far = Path::single(ObsId::new(1, 1));
        assert_eq!(idx.path_path(&sc, &far, &Path::single(ObsId::new(3, 0))), 0.0);
        let mut buf = Vec::new();
        idx.dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), idx.len() + 1);
    }
}
