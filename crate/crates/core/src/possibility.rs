//! Possibility-function algebra.
//!
//! A possibility function assigns every outcome a credibility in `[0, 1]`
//! with supremum one. Marginalisation is a supremum and conditioning divides
//! by the supremum of the joint, so Gaussian-shaped possibility functions
//! (`exp(-q/2)` without the probabilistic normalising constant) are closed
//! under the Kalman recursions used elsewhere in the crate.
//!
//! Discrete possibility functions are converted into sampling distributions
//! with [`max_entropy_log`]: the maximum-entropy pmf that is bounded
//! pointwise by the possibility function. Its solution is the clipped form
//! `p(x) = min(f(x), λ)`, found here by sorting and scanning suffix sums.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gaussian-shaped possibility function `N̄(x; m, Σ) = exp(-½ (x-m)ᵀ Σ⁻¹ (x-m))`.
///
/// Its value at the mean is exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPossibility<T: Real> {
    mean: DVector<T>,
    cov: DMatrix<T>,
}

impl<T: Real> GaussianPossibility<T> {
    pub fn new(mean: DVector<T>, cov: DMatrix<T>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        check_spd(&cov, "covariance")?;
        Ok(Self { mean, cov })
    }

    /// Builds without validation. The caller guarantees symmetry and positive
    /// definiteness (e.g. output of a Kalman recursion).
    pub(crate) fn from_parts_unchecked(mean: DVector<T>, cov: DMatrix<T>) -> Self {
        Self { mean, cov }
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Natural log of the credibility of `x`.
    pub fn log_eval(&self, x: &DVector<T>) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let form = QuadraticForm::new(&self.cov).ok_or(Error::NotPositiveDefinite("covariance"))?;
        Ok(form.log_credibility(self.mean.as_slice(), x.as_slice()))
    }

    pub fn eval(&self, x: &DVector<T>) -> Result<T> {
        Ok(self.log_eval(x)?.exp())
    }

    /// Maximum expected value: the mode.
    pub fn argmax(&self) -> &DVector<T> {
        &self.mean
    }

    /// Possibilistic variance `(-Δf(E*))⁻¹`, only defined here for scalar
    /// functions where it equals `σ²`.
    pub fn scalar_variance(&self) -> Option<T> {
        (self.dim() == 1).then(|| self.cov[(0, 0)])
    }
}

/// Cached Cholesky factor of a covariance for repeated `-½ dᵀ Σ⁻¹ d` evaluation.
#[derive(Debug, Clone)]
pub struct QuadraticForm<T: Real> {
    chol: Cholesky<T, Dyn>,
}

impl<T: Real> QuadraticForm<T> {
    /// Returns `None` when `cov` is not positive definite.
    pub fn new(cov: &DMatrix<T>) -> Option<Self> {
        Cholesky::new(cov.clone()).map(|chol| Self { chol })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Squared Mahalanobis distance between `x` and `center`.
    pub fn mahalanobis_sq(&self, center: &[T], x: &[T]) -> T {
        let l = self.chol.l_dirty();
        let d = center.len();
        debug_assert_eq!(x.len(), d);
        // forward substitution on a stack buffer for the usual small dimensions
        let mut buf = [T::zero(); 8];
        let mut heap;
        let y: &mut [T] = if d <= 8 {
            &mut buf[..d]
        } else {
            heap = vec![T::zero(); d];
            &mut heap[..]
        };
        let mut q = T::zero();
        for i in 0..d {
            let mut s = x[i] - center[i];
            for j in 0..i {
                s -= l[(i, j)] * y[j];
            }
            y[i] = s / l[(i, i)];
            q += y[i] * y[i];
        }
        q
    }

    pub fn log_credibility(&self, center: &[T], x: &[T]) -> T {
        -T::lit(0.5) * self.mahalanobis_sq(center, x)
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.chol.inverse()
    }

    pub fn solve(&self, b: &DMatrix<T>) -> DMatrix<T> {
        self.chol.solve(b)
    }
}

pub(crate) fn check_spd<T: Real>(m: &DMatrix<T>, what: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite(what));
    }
    let scale = m.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let tol = T::lit(1e-9) * scale;
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::NotPositiveDefinite(what));
            }
        }
    }
    if Cholesky::new(m.clone()).is_none() {
        return Err(Error::NotPositiveDefinite(what));
    }
    Ok(())
}

/// Symmetric positive semi-definite check, for noise matrices such as the
/// rank-deficient process noise of the nearly-constant-velocity model.
pub(crate) fn check_psd<T: Real>(m: &DMatrix<T>, what: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite(what));
    }
    let scale = m.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let tol = T::lit(1e-9) * scale;
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::NotPositiveDefinite(what));
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| l < -tol || !l.is_finite()) {
        return Err(Error::NotPositiveDefinite(what));
    }
    Ok(())
}

/// Finite discrete possibility function keyed by an ordered outcome type.
///
/// Ties between outcomes are always resolved in favour of the smallest key.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePossibility<K: Ord + Clone, T: Real> {
    entries: BTreeMap<K, T>,
}

impl<K: Ord + Clone, T: Real> DiscretePossibility<K, T> {
    /// Accepts any credibilities in `[0, 1]`; call [`Self::normalized`] to
    /// enforce a supremum of one.
    pub fn new(entries: impl IntoIterator<Item = (K, T)>) -> Result<Self> {
        let entries: BTreeMap<K, T> = entries.into_iter().collect();
        if entries.is_empty() {
            return Err(Error::Empty("discrete possibility function"));
        }
        for v in entries.values() {
            if !(*v >= T::zero() && *v <= T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "credibility {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn normalized(&self) -> Result<Self> {
        let max = self.sup();
        if max <= T::zero() {
            return Err(Error::Empty("possibility function with zero supremum"));
        }
        Ok(Self {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), *v / max)).collect(),
        })
    }

    pub fn get(&self, k: &K) -> T {
        self.entries.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &T)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sup(&self) -> T {
        self.entries.values().fold(T::zero(), |a, v| a.max(*v))
    }

    /// Outcome of maximal credibility, smallest key on ties.
    pub fn argmax(&self) -> &K {
        let mut best: Option<(&K, T)> = None;
        for (k, v) in &self.entries {
            match best {
                Some((_, b)) if *v <= b => {}
                _ => best = Some((k, *v)),
            }
        }
        best.expect("non-empty by construction").0
    }

    /// `sup_x φ(x) f(x)`.
    pub fn max_expectation(&self, phi: impl Fn(&K) -> T) -> Result<T> {
        let mut best = T::zero();
        for (k, v) in &self.entries {
            let p = phi(k);
            if !(p >= T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "expectation argument must be nonnegative, got {p}"
                )));
            }
            best = best.max(p * *v);
        }
        Ok(best)
    }

    /// Lower and upper bounds on the probability of `subset`: one minus the
    /// credibility of the complement, and the credibility of the subset.
    pub fn probability_bounds(&self, subset: &BTreeSet<K>) -> Result<(T, T)> {
        if subset.iter().any(|k| !self.entries.contains_key(k)) {
            return Err(Error::Usage("subset contains unknown outcomes".into()));
        }
        let mut inside = T::zero();
        let mut outside = T::zero();
        for (k, v) in &self.entries {
            if subset.contains(k) {
                inside = inside.max(*v);
            } else {
                outside = outside.max(*v);
            }
        }
        Ok((T::one() - outside, inside))
    }

    /// Maximum-entropy pmf bounded pointwise by this (normalised) function.
    pub fn max_entropy_pmf(&self) -> Result<Pmf<K, T>> {
        let keys: Vec<K> = self.entries.keys().cloned().collect();
        let logs: Vec<T> = self.entries.values().map(|v| v.ln()).collect();
        let lp = max_entropy_log(&logs)?;
        Ok(Pmf {
            entries: keys.into_iter().zip(lp.into_iter().map(|l| l.exp())).collect(),
        })
    }
}

/// Probability mass function over a finite ordered outcome set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<K: Ord + Clone, T: Real> {
    entries: BTreeMap<K, T>,
}

impl<K: Ord + Clone, T: Real> Pmf<K, T> {
    pub fn get(&self, k: &K) -> T {
        self.entries.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &T)> {
        self.entries.iter()
    }

    pub fn total(&self) -> T {
        self.entries.values().fold(T::zero(), |a, v| a + *v)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> T {
        entropy(self.entries.values().copied())
    }
}

pub fn entropy<T: Real>(p: impl IntoIterator<Item = T>) -> T {
    p.into_iter()
        .filter(|v| *v > T::zero())
        .fold(T::zero(), |acc, v| acc - v * v.ln())
}

/// Maximum-entropy pmf bounded by `exp(log_bound)`, returned as log
/// probabilities in the input order.
///
/// The bound is sup-normalised first. Entries with a `-inf` bound get `-inf`.
/// Fails when every entry is `-inf` (no positive credibility to spread).
pub fn max_entropy_log<T: Real>(log_bound: &[T]) -> Result<Vec<T>> {
    let log_max = log_bound.iter().copied().fold(T::neg_inf(), |a, b| a.max(b));
    if log_bound.is_empty() || log_max == T::neg_inf() {
        return Err(Error::Empty("bound with no positive credibility"));
    }
    let norm: Vec<T> = log_bound.iter().map(|l| *l - log_max).collect();
    let log_lambda = clip_level(&norm);
    Ok(norm.iter().map(|l| l.min(log_lambda)).collect())
}

/// Log of the water level `λ` with `Σ min(f_i, λ) = 1`, for `f = exp(norm)`
/// whose maximum is exactly one.
fn clip_level<T: Real>(norm: &[T]) -> T {
    let mut vals: Vec<T> = norm.iter().map(|l| l.exp()).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let n = vals.len();
    // suffix[j] = sum of vals[j..], accumulated from the smallest values up
    let mut suffix = vec![T::zero(); n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + vals[j];
    }
    for j in 1..=n {
        let lambda = (T::one() - suffix[j]) / T::from_usize_lossy(j);
        if j == n || lambda >= vals[j] {
            return lambda.ln();
        }
    }
    unreachable!("loop returns at j == n")
}

/// Incremental version of the clipped max-entropy transform used when the
/// same bound is queried repeatedly with small sets of excluded outcomes
/// (sampling without replacement).
#[derive(Debug, Clone)]
pub struct ClippedSampler<T: Real> {
    /// Candidates with positive credibility, sorted by decreasing credibility.
    order: Vec<usize>,
    log_cred: Vec<T>,
}

impl<T: Real> ClippedSampler<T> {
    /// `log_cred[i]` is the log-credibility of candidate `i` (not necessarily
    /// normalised; `-inf` for impossible candidates).
    pub fn new(log_cred: Vec<T>) -> Self {
        let mut order: Vec<usize> = (0..log_cred.len())
            .filter(|&i| log_cred[i] > T::neg_inf())
            .collect();
        order.sort_by(|&a, &b| {
            log_cred[b]
                .partial_cmp(&log_cred[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Self { order, log_cred }
    }

    pub fn len(&self) -> usize {
        self.log_cred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_cred.is_empty()
    }

    /// Log water level and log normaliser (log of the largest remaining
    /// credibility) after removing `excluded`; `None` when nothing with positive
    /// credibility remains.
    ///
    /// The level is recomputed from the remaining candidates rather than by
    /// subtracting excluded mass from a running total, which would cancel
    /// catastrophically once the dominant candidates are gone.
    fn level(&self, excluded: &[usize]) -> Option<(T, T)> {
        let mut live = self.order.iter().copied().filter(|i| !excluded.contains(i)).peekable();
        let log_top = self.log_cred[*live.peek()?];
        let norm: Vec<T> = live.map(|i| self.log_cred[i] - log_top).collect();
        Some((clip_level(&norm), log_top))
    }

    /// Log probability of drawing `candidate` once `excluded` have been
    /// removed. `-inf` when impossible.
    pub fn log_prob(&self, candidate: usize, excluded: &[usize]) -> T {
        if excluded.contains(&candidate) || !(self.log_cred[candidate] > T::neg_inf()) {
            return T::neg_inf();
        }
        match self.level(excluded) {
            Some((log_lambda, log_top)) => (self.log_cred[candidate] - log_top).min(log_lambda),
            None => T::neg_inf(),
        }
    }

    /// Draws one candidate given the exclusions, together with its log
    /// probability.
    pub fn draw<R: rand::Rng + ?Sized>(&self, excluded: &[usize], rng: &mut R) -> Option<(usize, T)> {
        let (log_lambda, log_top) = self.level(excluded)?;
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0f64;
        let mut last = None;
        for &i in &self.order {
            if excluded.contains(&i) {
                continue;
            }
            let lp = (self.log_cred[i] - log_top).min(log_lambda);
            acc += lp.as_f64().exp();
            last = Some((i, lp));
            if u < acc {
                return last;
            }
        }
        // rounding left a sliver of mass at the end of the support
        last
    }

    /// Log probability of drawing exactly the set `chosen` (in any order)
    /// sequentially without replacement, starting with `pre_excluded` already
    /// removed. Sums over all orders through a subset recursion.
    pub fn log_prob_set(&self, chosen: &[usize], pre_excluded: &[usize]) -> T {
        let n = chosen.len();
        if n == 0 {
            return T::zero();
        }
        assert!(n < 20, "set too large for exact permutation sum");
        let full = (1usize << n) - 1;
        let mut table = vec![T::neg_inf(); full + 1];
        table[0] = T::zero();
        let mut excl = Vec::with_capacity(pre_excluded.len() + n);
        for mask in 1..=full {
            let mut acc = T::neg_inf();
            for b in 0..n {
                if mask & (1 << b) == 0 {
                    continue;
                }
                let prev = mask & !(1 << b);
                if table[prev] == T::neg_inf() {
                    continue;
                }
                excl.clear();
                excl.extend_from_slice(pre_excluded);
                excl.extend((0..n).filter(|c| prev & (1 << c) != 0).map(|c| chosen[c]));
                let lp = self.log_prob(chosen[b], &excl);
                acc = log_add(acc, table[prev] + lp);
            }
            table[mask] = acc;
        }
        table[full]
    }
}

/// `log(exp(a) + exp(b))`.
pub fn log_add<T: Real>(a: T, b: T) -> T {
    if a == T::neg_inf() {
        return b;
    }
    if b == T::neg_inf() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn disc(pairs: &[(&'static str, f64)]) -> DiscretePossibility<&'static str, f64> {
        DiscretePossibility::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn gaussian_eval_examples() {
        let g = GaussianPossibility::new(DVector::from_vec(vec![0.0]), DMatrix::identity(1, 1)).unwrap();
        assert_eq!(g.eval(&DVector::from_vec(vec![0.0])).unwrap(), 1.0);
        assert_abs_diff_eq!(g.eval(&DVector::from_vec(vec![2.0])).unwrap(), (-2.0f64).exp(), epsilon = 1e-15);
        let g2 = GaussianPossibility::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let v = g2.eval(&DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(v, (-12.5f64).exp(), epsilon = 1e-18);
    }

    #[test]
    fn gaussian_rejects_bad_input() {
        let g = GaussianPossibility::<f64>::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            g.eval(&DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let not_spd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianPossibility::new(DVector::zeros(2), not_spd).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(GaussianPossibility::new(DVector::zeros(2), asym).is_err());
    }

    #[test]
    fn gaussian_mode_and_variance() {
        let m = DVector::from_vec(vec![1.5, -2.0]);
        let g = GaussianPossibility::new(m.clone(), DMatrix::identity(2, 2) * 3.0).unwrap();
        assert_eq!(g.argmax(), &m);
        assert_eq!(g.eval(&m).unwrap(), 1.0);
        assert_eq!(g.scalar_variance(), None);
        let s = GaussianPossibility::new(DVector::from_vec(vec![0.0]), DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_eq!(s.scalar_variance(), Some(4.0));
    }

    #[test]
    fn f32_evaluation() {
        let g = GaussianPossibility::<f32>::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        let v = g.eval(&DVector::from_vec(vec![2.0f32])).unwrap();
        assert!((v - (-2.0f32).exp()).abs() < 1e-6);
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(*disc(&[("a", 1.0), ("b", 0.3)]).argmax(), "a");
        assert_eq!(*disc(&[("b", 1.0), ("a", 1.0)]).argmax(), "a");
        assert!(DiscretePossibility::<&str, f64>::new(Vec::new()).is_err());
    }

    #[test]
    fn max_expectation_examples() {
        let f = disc(&[("a", 1.0), ("b", 0.5)]);
        assert_eq!(f.max_expectation(|_| 1.0).unwrap(), 1.0);
        assert_eq!(f.max_expectation(|k| if *k == "a" { 2.0 } else { 10.0 }).unwrap(), 5.0);
        assert_eq!(disc(&[("a", 1.0)]).max_expectation(|_| 0.0).unwrap(), 0.0);
        assert!(f.max_expectation(|_| -1.0).is_err());
    }

    #[test]
    fn probability_bounds_examples() {
        let f = disc(&[("a", 1.0), ("b", 0.2)]);
        let all: BTreeSet<_> = ["a", "b"].into_iter().collect();
        assert_eq!(f.probability_bounds(&all).unwrap(), (1.0, 1.0));
        let b: BTreeSet<_> = ["b"].into_iter().collect();
        assert_eq!(f.probability_bounds(&b).unwrap(), (0.0, 0.2));
        let flat = disc(&[("a", 1.0), ("b", 1.0), ("c", 1.0)]);
        assert_eq!(flat.probability_bounds(&b).unwrap(), (0.0, 1.0));
        let unknown: BTreeSet<_> = ["z"].into_iter().collect();
        assert!(f.probability_bounds(&unknown).is_err());
    }

    #[test]
    fn max_entropy_examples() {
        let p = disc(&[("a", 1.0)]).max_entropy_pmf().unwrap();
        assert_eq!(p.get(&"a"), 1.0);
        let p = disc(&[("a", 1.0), ("b", 1.0)]).max_entropy_pmf().unwrap();
        assert_abs_diff_eq!(p.get(&"a"), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(&"b"), 0.5, epsilon = 1e-15);
        let p = disc(&[("a", 1.0), ("b", 0.2), ("c", 0.2)]).max_entropy_pmf().unwrap();
        assert_abs_diff_eq!(p.get(&"a"), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p.get(&"b"), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.get(&"c"), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn max_entropy_handles_underflow_in_log_space() {
        let lp = max_entropy_log(&[0.0, -2000.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(lp[0], 0.0);
        assert_eq!(lp[1], -2000.0);
        assert_eq!(lp[2], f64::NEG_INFINITY);
        assert!(max_entropy_log::<f64>(&[f64::NEG_INFINITY]).is_err());
        assert!(max_entropy_log::<f64>(&[]).is_err());
    }

    #[test]
    fn clipped_sampler_matches_direct_transform() {
        let logs = vec![-0.1, 0.0, -3.0, f64::NEG_INFINITY, -0.5];
        let s = ClippedSampler::new(logs.clone());
        let direct = max_entropy_log(&logs).unwrap();
        for i in 0..logs.len() {
            assert_abs_diff_eq!(s.log_prob(i, &[]).exp(), direct[i].exp(), epsilon = 1e-14);
        }
        // excluding the top candidate renormalises by the next largest
        let rest: Vec<f64> = vec![-0.1, -3.0, f64::NEG_INFINITY, -0.5];
        let direct = max_entropy_log(&rest).unwrap();
        let map = [0usize, 2, 3, 4];
        for (j, &i) in map.iter().enumerate() {
            assert_abs_diff_eq!(s.log_prob(i, &[1]).exp(), direct[j].exp(), epsilon = 1e-14);
        }
        assert_eq!(s.log_prob(1, &[1]), f64::NEG_INFINITY);
        assert!(s.level(&[0, 1, 2, 4]).is_none());
    }

    #[test]
    fn clipped_sampler_set_probability_is_a_pmf() {
        let s = ClippedSampler::new(vec![0.0f64, -0.2, -1.0, -2.5]);
        let mut total = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                total += s.log_prob_set(&[a, b], &[]).exp();
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..20000 {
            let (i, _) = s.draw(&[], &mut rng).unwrap();
            counts[i] += 1;
        }
        for i in 0..4 {
            let p = s.log_prob(i, &[]).exp();
            let f = counts[i] as f64 / 20000.0;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / 20000.0).sqrt() + 1e-3);
        }
    }
}
