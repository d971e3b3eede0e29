//! Single-object possibilistic filtering.
//!
//! With Gaussian possibility functions the sup-based prediction and Bayes-like
//! update reproduce the Kalman recursions. The only departure from the
//! probabilistic filter is the marginal likelihood, `N̄(z; Hm, HΣHᵀ+R)`,
//! which carries no determinant prefactor and therefore equals one when the
//! observation sits at the predicted mode.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::possibility::{check_psd, check_spd, GaussianPossibility, QuadraticForm};
use crate::scalar::Real;

/// Linear transition `N̄(x; F x', Q)` with linear observation `N̄(z; H x, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel<T: Real> {
    f: DMatrix<T>,
    q: DMatrix<T>,
    h: DMatrix<T>,
    r: DMatrix<T>,
}

impl<T: Real> LinearGaussianModel<T> {
    pub fn new(f: DMatrix<T>, q: DMatrix<T>, h: DMatrix<T>, r: DMatrix<T>) -> Result<Self> {
        let dx = f.nrows();
        if f.ncols() != dx {
            return Err(Error::DimensionMismatch { expected: dx, got: f.ncols() });
        }
        if q.nrows() != dx || q.ncols() != dx {
            return Err(Error::DimensionMismatch { expected: dx, got: q.nrows() });
        }
        if h.ncols() != dx {
            return Err(Error::DimensionMismatch { expected: dx, got: h.ncols() });
        }
        let dz = h.nrows();
        if r.nrows() != dz || r.ncols() != dz {
            return Err(Error::DimensionMismatch { expected: dz, got: r.nrows() });
        }
        check_psd(&q, "process noise Q")?;
        check_spd(&r, "observation noise R")?;
        Ok(Self { f, q, h, r })
    }

    /// Nearly-constant-velocity model in `dims` spatial dimensions with state
    /// `(positions..., velocities...)` and direct position observations.
    pub fn nearly_constant_velocity(dims: usize, dt: T, sigma_a: T, sigma: T) -> Result<Self> {
        let n = 2 * dims;
        let mut f = DMatrix::identity(n, n);
        let mut q = DMatrix::zeros(n, n);
        let s2 = sigma_a * sigma_a;
        let dt2 = dt * dt;
        let dt3 = dt2 * dt;
        let dt4 = dt3 * dt;
        for i in 0..dims {
            f[(i, dims + i)] = dt;
            q[(i, i)] = s2 * dt4 / T::lit(4.0);
            q[(i, dims + i)] = s2 * dt3 / T::lit(2.0);
            q[(dims + i, i)] = s2 * dt3 / T::lit(2.0);
            q[(dims + i, dims + i)] = s2 * dt2;
        }
        let mut h = DMatrix::zeros(dims, n);
        for i in 0..dims {
            h[(i, i)] = T::one();
        }
        let r = DMatrix::identity(dims, dims) * (sigma * sigma);
        Self::new(f, q, h, r)
    }

    pub fn f(&self) -> &DMatrix<T> {
        &self.f
    }
    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }
    pub fn h(&self) -> &DMatrix<T> {
        &self.h
    }
    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }
    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }
    pub fn obs_dim(&self) -> usize {
        self.h.nrows()
    }

    /// True when `H = [I 0]`, i.e. the first `d_Z` state components are
    /// observed directly.
    pub fn observes_leading_block(&self) -> bool {
        let dz = self.obs_dim();
        (0..dz).all(|i| {
            (0..self.state_dim()).all(|j| {
                let want = if i == j { T::one() } else { T::zero() };
                self.h[(i, j)] == want
            })
        })
    }

    /// Covariance block of `Q` for the unobserved components.
    pub fn q_hidden(&self) -> DMatrix<T> {
        let dz = self.obs_dim();
        let k = self.state_dim() - dz;
        self.q.view((dz, dz), (k, k)).into_owned()
    }
}

fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    (&m + m.transpose()) * T::lit(0.5)
}

/// Sup-propagation through the transition: `N̄(F m, F Σ Fᵀ + Q)`.
pub fn predict<T: Real>(belief: &GaussianPossibility<T>, model: &LinearGaussianModel<T>) -> GaussianPossibility<T> {
    let mean = &model.f * belief.mean();
    let cov = symmetrize(&model.f * belief.cov() * model.f.transpose() + &model.q);
    GaussianPossibility::from_parts_unchecked(mean, cov)
}

/// Observation-step scorer for a predicted belief: predicted observation and
/// factorised innovation covariance.
#[derive(Debug, Clone)]
pub struct InnovationScorer<T: Real> {
    predicted: DVector<T>,
    form: QuadraticForm<T>,
}

impl<T: Real> InnovationScorer<T> {
    pub fn new(belief: &GaussianPossibility<T>, model: &LinearGaussianModel<T>) -> Result<Self> {
        let predicted = &model.h * belief.mean();
        let s = symmetrize(&model.h * belief.cov() * model.h.transpose() + &model.r);
        let form = QuadraticForm::new(&s).ok_or(Error::SingularInnovation)?;
        Ok(Self { predicted, form })
    }

    /// `log N̄(z; Hm, HΣHᵀ + R)`.
    pub fn log_marginal(&self, z: &[T]) -> T {
        self.form.log_credibility(self.predicted.as_slice(), z)
    }

    pub fn predicted(&self) -> &DVector<T> {
        &self.predicted
    }
}

/// Kalman update in Joseph form. Returns the posterior and the log marginal
/// likelihood `sup_x log(ℓ(z|x) f(x)) ≤ 0`.
pub fn update<T: Real>(
    belief: &GaussianPossibility<T>,
    z: &DVector<T>,
    model: &LinearGaussianModel<T>,
) -> Result<(GaussianPossibility<T>, T)> {
    if z.len() != model.obs_dim() {
        return Err(Error::DimensionMismatch { expected: model.obs_dim(), got: z.len() });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("observation is not finite".into()));
    }
    let scorer = InnovationScorer::new(belief, model)?;
    let log_marginal = scorer.log_marginal(z.as_slice());
    Ok((update_with(belief, &scorer, z, model), log_marginal))
}

pub(crate) fn update_with<T: Real>(
    belief: &GaussianPossibility<T>,
    scorer: &InnovationScorer<T>,
    z: &DVector<T>,
    model: &LinearGaussianModel<T>,
) -> GaussianPossibility<T> {
    let p = belief.cov();
    let pht = p * model.h.transpose();
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ
    let gain = scorer.form.solve(&pht.transpose()).transpose();
    let innovation = z - &scorer.predicted;
    let mean = belief.mean() + &gain * innovation;
    let n = p.nrows();
    let i_kh = DMatrix::identity(n, n) - &gain * &model.h;
    let cov = symmetrize(&i_kh * p * i_kh.transpose() + &gain * &model.r * gain.transpose());
    GaussianPossibility::from_parts_unchecked(mean, cov)
}

/// Possibility function of an appearing object: uninformative on the
/// observed (position) components and `N̄(0, V)` on the remaining ones.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthPrior<T: Real> {
    hidden_cov: DMatrix<T>,
}

impl<T: Real> BirthPrior<T> {
    /// Isotropic `σ_v² I` on `dim` hidden components.
    pub fn isotropic(sigma_v: T, dim: usize) -> Result<Self> {
        if !(sigma_v > T::zero()) {
            return Err(Error::InvalidParameter(format!("sigma_v must be positive, got {sigma_v}")));
        }
        Ok(Self { hidden_cov: DMatrix::identity(dim, dim) * (sigma_v * sigma_v) })
    }

    pub fn new(hidden_cov: DMatrix<T>) -> Result<Self> {
        check_spd(&hidden_cov, "birth prior covariance")?;
        Ok(Self { hidden_cov })
    }

    pub fn hidden_cov(&self) -> &DMatrix<T> {
        &self.hidden_cov
    }

    /// Posterior after the first detection `z`, for an object that appeared
    /// `silent` steps earlier and went undetected since.
    ///
    /// Propagating an uninformative position leaves it uninformative, so only
    /// the hidden block accumulates `silent · Q_hidden`. The detection then
    /// pins the position to `N̄(z, R)`, and the marginal likelihood of that
    /// first detection is exactly one.
    pub fn posterior(&self, z: &DVector<T>, silent: usize, model: &LinearGaussianModel<T>) -> Result<GaussianPossibility<T>> {
        let dz = model.obs_dim();
        let dx = model.state_dim();
        if !model.observes_leading_block() {
            return Err(Error::InvalidParameter(
                "birth prior needs an observation matrix of the form [I 0]".into(),
            ));
        }
        if self.hidden_cov.nrows() != dx - dz {
            return Err(Error::DimensionMismatch { expected: dx - dz, got: self.hidden_cov.nrows() });
        }
        if z.len() != dz {
            return Err(Error::DimensionMismatch { expected: dz, got: z.len() });
        }
        let mut mean = DVector::zeros(dx);
        mean.rows_mut(0, dz).copy_from(z);
        let mut cov = DMatrix::zeros(dx, dx);
        cov.view_mut((0, 0), (dz, dz)).copy_from(model.r());
        let hidden = &self.hidden_cov + model.q_hidden() * T::from_usize_lossy(silent);
        cov.view_mut((dz, dz), (dx - dz, dx - dz)).copy_from(&hidden);
        Ok(GaussianPossibility::from_parts_unchecked(mean, cov))
    }
}

/// Weighted particles `{(w_i, x_i)}` approximating a possibility function
/// through `sup_x φ(x) f(x) ≈ max_i w_i φ(x_i)`. Weights are kept in log form
/// and renormalised so that the largest is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleBelief<T: Real> {
    log_weights: Vec<T>,
    states: Vec<DVector<T>>,
}

impl<T: Real> ParticleBelief<T> {
    pub fn new(weights: Vec<T>, states: Vec<DVector<T>>) -> Result<Self> {
        if weights.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: weights.len(), got: states.len() });
        }
        if weights.is_empty() {
            return Err(Error::Empty("particle belief"));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let mut b = Self { log_weights, states };
        b.renormalize()?;
        Ok(b)
    }

    pub(crate) fn from_log_weights(log_weights: Vec<T>, states: Vec<DVector<T>>) -> Result<Self> {
        let mut b = Self { log_weights, states };
        b.renormalize()?;
        Ok(b)
    }

    fn renormalize(&mut self) -> Result<T> {
        let top = self.log_weights.iter().copied().fold(T::neg_inf(), |a, b| a.max(b));
        if top == T::neg_inf() {
            return Err(Error::DegenerateBelief);
        }
        for w in &mut self.log_weights {
            *w -= top;
        }
        Ok(top)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn weights(&self) -> Vec<T> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn log_weights(&self) -> &[T] {
        &self.log_weights
    }

    pub fn states(&self) -> &[DVector<T>] {
        &self.states
    }

    /// Particle estimate of the maximum expected value of `φ`.
    pub fn max_expectation(&self, phi: impl Fn(&DVector<T>) -> T) -> T {
        self.log_weights
            .iter()
            .zip(&self.states)
            .fold(T::zero(), |acc, (lw, x)| acc.max(lw.exp() * phi(x)))
    }

    /// State of the heaviest particle.
    pub fn argmax(&self) -> &DVector<T> {
        let mut best = 0;
        for (i, w) in self.log_weights.iter().enumerate() {
            if *w > self.log_weights[best] {
                best = i;
            }
        }
        &self.states[best]
    }
}

/// Proposal kernel for moving particles. Returns the new state and the
/// log-credibility of the move under the transition possibility function.
pub trait TransitionKernel<T: Real> {
    fn sample<R: Rng + ?Sized>(&self, x: &DVector<T>, rng: &mut R) -> (DVector<T>, T);
}

/// Leaves every particle in place.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityKernel;

impl<T: Real> TransitionKernel<T> for IdentityKernel {
    fn sample<R: Rng + ?Sized>(&self, x: &DVector<T>, _rng: &mut R) -> (DVector<T>, T) {
        (x.clone(), T::zero())
    }
}

/// Samples `x' = F x + L ε` with `L Lᵀ = Q` and scores it by `N̄(x'; Fx, Q)`.
///
/// `Q` may be singular; `L` then only spans its range and the score is the
/// pseudo-inverse quadratic form, which equals `-½ εᵀε`.
#[derive(Debug, Clone)]
pub struct GaussianKernel<T: Real> {
    f: DMatrix<T>,
    chol_q: DMatrix<T>,
}

impl<T: Real> GaussianKernel<T> {
    pub fn new(model: &LinearGaussianModel<T>) -> Self {
        Self { f: model.f.clone(), chol_q: range_factor(&model.q) }
    }
}

/// `L` with `L Lᵀ = M` whose columns span the range of a PSD matrix `M`.
fn range_factor<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(T::zero(), |a, &b| a.max(b));
    let cut = top * T::lit(1e-12);
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > cut).collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| {
        let i = keep[c];
        eig.eigenvectors[(r, i)] * eig.eigenvalues[i].sqrt()
    })
}

impl<T: Real> TransitionKernel<T> for GaussianKernel<T> {
    fn sample<R: Rng + ?Sized>(&self, x: &DVector<T>, rng: &mut R) -> (DVector<T>, T) {
        let n = self.chol_q.ncols();
        let eps = DVector::from_fn(n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
        let log_g = -T::lit(0.5) * eps.dot(&eps);
        (&self.f * x + &self.chol_q * eps, log_g)
    }
}

/// Moves every particle through `kernel`, multiplies its weight by the
/// transition credibility of the move and renormalises by the maximum.
pub fn particle_predict<T: Real, K: TransitionKernel<T>, R: Rng + ?Sized>(
    belief: &ParticleBelief<T>,
    kernel: &K,
    rng: &mut R,
) -> ParticleBelief<T> {
    let mut states = Vec::with_capacity(belief.len());
    let mut log_weights = Vec::with_capacity(belief.len());
    for (lw, x) in belief.log_weights.iter().zip(&belief.states) {
        let (next, log_g) = kernel.sample(x, rng);
        states.push(next);
        log_weights.push(*lw + log_g);
    }
    ParticleBelief::from_log_weights(log_weights, states).expect("finite kernel scores keep a positive weight")
}

/// `w_i ← w_i ℓ(z|x_i)`; the log marginal likelihood is `log max_i w_i`.
pub fn particle_update<T: Real>(
    belief: &ParticleBelief<T>,
    log_likelihood: impl Fn(&DVector<T>) -> T,
) -> Result<(ParticleBelief<T>, T)> {
    let log_weights: Vec<T> = belief
        .log_weights
        .iter()
        .zip(&belief.states)
        .map(|(lw, x)| *lw + log_likelihood(x))
        .collect();
    let mut post = ParticleBelief { log_weights, states: belief.states.clone() };
    let top = post.renormalize()?;
    Ok((post, top))
}

/// Single-object filter as used by the multi-object evaluation and the
/// proposal filter.
///
/// `key` values are deterministic functions of the path prefix, so filters
/// that need randomness (particles) reproduce identical beliefs whenever the
/// same path is walked again.
pub trait ObjectFilter<T: Real>: Sync {
    type Belief: Clone + Send + Sync;
    type Scorer;

    /// Belief after the first detection `z`, for an object that appeared
    /// `silent` steps before it.
    fn init(&self, z: &DVector<T>, silent: usize, key: u64) -> Result<Self::Belief>;

    fn predict(&self, belief: &Self::Belief, key: u64) -> Self::Belief;

    fn scorer(&self, predicted: &Self::Belief) -> Result<Self::Scorer>;

    /// `log sup_x ℓ(z|x) f(x)` for the predicted belief behind `scorer`.
    fn log_marginal(&self, scorer: &Self::Scorer, z: &DVector<T>) -> T;

    fn update(&self, predicted: &Self::Belief, scorer: &Self::Scorer, z: &DVector<T>) -> Self::Belief;
}

/// Closed-form filter for linear-Gaussian models.
#[derive(Debug, Clone)]
pub struct KalmanObjectFilter<T: Real> {
    model: LinearGaussianModel<T>,
    birth: BirthPrior<T>,
}

impl<T: Real> KalmanObjectFilter<T> {
    pub fn new(model: LinearGaussianModel<T>, birth: BirthPrior<T>) -> Result<Self> {
        if !model.observes_leading_block() {
            return Err(Error::InvalidParameter("observation matrix must be [I 0]".into()));
        }
        if birth.hidden_cov.nrows() != model.state_dim() - model.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.state_dim() - model.obs_dim(),
                got: birth.hidden_cov.nrows(),
            });
        }
        Ok(Self { model, birth })
    }

    pub fn model(&self) -> &LinearGaussianModel<T> {
        &self.model
    }

    pub fn birth(&self) -> &BirthPrior<T> {
        &self.birth
    }
}

impl<T: Real> ObjectFilter<T> for KalmanObjectFilter<T> {
    type Belief = GaussianPossibility<T>;
    type Scorer = InnovationScorer<T>;

    fn init(&self, z: &DVector<T>, silent: usize, _key: u64) -> Result<Self::Belief> {
        self.birth.posterior(z, silent, &self.model)
    }

    fn predict(&self, belief: &Self::Belief, _key: u64) -> Self::Belief {
        predict(belief, &self.model)
    }

    fn scorer(&self, predicted: &Self::Belief) -> Result<Self::Scorer> {
        InnovationScorer::new(predicted, &self.model)
    }

    fn log_marginal(&self, scorer: &Self::Scorer, z: &DVector<T>) -> T {
        scorer.log_marginal(z.as_slice())
    }

    fn update(&self, predicted: &Self::Belief, scorer: &Self::Scorer, z: &DVector<T>) -> Self::Belief {
        update_with(predicted, scorer, z, &self.model)
    }
}

/// Particle analogue of [`KalmanObjectFilter`], without resampling.
#[derive(Debug, Clone)]
pub struct ParticleObjectFilter<T: Real> {
    kalman: KalmanObjectFilter<T>,
    kernel: GaussianKernel<T>,
    obs_form: QuadraticForm<T>,
    n: usize,
    seed: u64,
}

impl<T: Real> ParticleObjectFilter<T> {
    pub fn new(model: LinearGaussianModel<T>, birth: BirthPrior<T>, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("particle count must be positive".into()));
        }
        let kernel = GaussianKernel::new(&model);
        let obs_form = QuadraticForm::new(model.r()).ok_or(Error::NotPositiveDefinite("R"))?;
        Ok(Self { kalman: KalmanObjectFilter::new(model, birth)?, kernel, obs_form, n, seed })
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    fn rng(&self, key: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix_key(self.seed, key))
    }
}

/// Predicted observations of every particle.
pub struct ParticleScorer<T: Real> {
    log_weights: Vec<T>,
    predicted: Vec<DVector<T>>,
}

impl<T: Real> ObjectFilter<T> for ParticleObjectFilter<T> {
    type Belief = ParticleBelief<T>;
    type Scorer = ParticleScorer<T>;

    fn init(&self, z: &DVector<T>, silent: usize, key: u64) -> Result<Self::Belief> {
        let post = self.kalman.init(z, silent, key)?;
        let form = QuadraticForm::new(post.cov()).ok_or(Error::NotPositiveDefinite("birth posterior"))?;
        let chol = nalgebra::Cholesky::new(post.cov().clone())
            .ok_or(Error::NotPositiveDefinite("birth posterior"))?
            .l();
        let mut rng = self.rng(key);
        let d = post.dim();
        let mut states = Vec::with_capacity(self.n);
        let mut log_weights = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let eps = DVector::from_fn(d, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
            let x = post.mean() + &chol * eps;
            log_weights.push(form.log_credibility(post.mean().as_slice(), x.as_slice()));
            states.push(x);
        }
        ParticleBelief::from_log_weights(log_weights, states)
    }

    fn predict(&self, belief: &Self::Belief, key: u64) -> Self::Belief {
        let mut rng = self.rng(key);
        particle_predict(belief, &self.kernel, &mut rng)
    }

    fn scorer(&self, predicted: &Self::Belief) -> Result<Self::Scorer> {
        let h = self.kalman.model.h();
        Ok(ParticleScorer {
            log_weights: predicted.log_weights.clone(),
            predicted: predicted.states.iter().map(|x| h * x).collect(),
        })
    }

    fn log_marginal(&self, scorer: &Self::Scorer, z: &DVector<T>) -> T {
        scorer
            .log_weights
            .iter()
            .zip(&scorer.predicted)
            .fold(T::neg_inf(), |acc, (lw, hx)| {
                acc.max(*lw + self.obs_form.log_credibility(hx.as_slice(), z.as_slice()))
            })
    }

    fn update(&self, predicted: &Self::Belief, scorer: &Self::Scorer, z: &DVector<T>) -> Self::Belief {
        let log_weights: Vec<T> = scorer
            .log_weights
            .iter()
            .zip(&scorer.predicted)
            .map(|(lw, hx)| *lw + self.obs_form.log_credibility(hx.as_slice(), z.as_slice()))
            .collect();
        ParticleBelief::from_log_weights(log_weights, predicted.states.clone())
            .unwrap_or_else(|_| predicted.clone())
    }
}

/// SplitMix64 finaliser used to derive per-step keys.
pub fn mix_key(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_model(q: f64, r: f64) -> LinearGaussianModel<f64> {
        LinearGaussianModel::new(
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, q),
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, r),
        )
        .unwrap()
    }

    fn g1(m: f64, p: f64) -> GaussianPossibility<f64> {
        GaussianPossibility::new(DVector::from_vec(vec![m]), DMatrix::from_element(1, 1, p)).unwrap()
    }

    /// Grid supremum of `N̄(x; x', q) N̄(x'; m, P)` over `x'`.
    fn grid_predict(x: f64, m: f64, p: f64, q: f64) -> f64 {
        let mut best = 0.0f64;
        let n = 400_000;
        for i in 0..=n {
            let xp = -20.0 + 40.0 * i as f64 / n as f64;
            let v = (-0.5 * (x - xp).powi(2) / q - 0.5 * (xp - m).powi(2) / p).exp();
            best = best.max(v);
        }
        best
    }

    #[test]
    fn predict_identity_with_tiny_noise_keeps_belief() {
        let model = scalar_model(1e-300, 1.0);
        let b = g1(1.3, 0.7);
        let out = predict(&b, &model);
        assert_eq!(out.mean()[0], 1.3);
        assert_abs_diff_eq!(out.cov()[(0, 0)], 0.7, epsilon = 1e-15);
    }

    #[test]
    fn predict_scalar_matches_grid_sup() {
        let (m, p, q) = (0.4, 1.5, 0.6);
        let out = predict(&g1(m, p), &scalar_model(q, 1.0));
        assert_abs_diff_eq!(out.cov()[(0, 0)], p + q, epsilon = 1e-14);
        for x in [-2.0, 0.0, 0.4, 1.7, 3.5] {
            let closed = out.eval(&DVector::from_vec(vec![x])).unwrap();
            assert_abs_diff_eq!(closed, grid_predict(x, m, p, q), epsilon = 1e-6);
        }
    }

    #[test]
    fn predict_ncv_identity_prior() {
        let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, 0.3).unwrap();
        let b = GaussianPossibility::new(DVector::zeros(4), DMatrix::identity(4, 4)).unwrap();
        let out = predict(&b, &model);
        // matrix oracle: F Fᵀ + Q written out by hand
        let s2 = 0.05f64 * 0.05;
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0 + s2 / 4.0, 0.0, 1.0 + s2 / 2.0, 0.0,
                0.0, 2.0 + s2 / 4.0, 0.0, 1.0 + s2 / 2.0,
                1.0 + s2 / 2.0, 0.0, 1.0 + s2, 0.0,
                0.0, 1.0 + s2 / 2.0, 0.0, 1.0 + s2,
            ],
        );
        assert!((out.cov() - expected).abs().max() < 1e-15);
        assert_eq!(out.mean(), &DVector::zeros(4));
    }

    #[test]
    fn update_at_mode_is_free() {
        let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, 0.3).unwrap();
        let b = GaussianPossibility::new(DVector::from_vec(vec![1.0, 2.0, 0.5, -0.5]), DMatrix::identity(4, 4)).unwrap();
        let z = model.h() * b.mean();
        let (post, lm) = update(&b, &z, &model).unwrap();
        assert_eq!(lm, 0.0);
        assert!((post.mean() - b.mean()).abs().max() < 1e-15);
    }

    #[test]
    fn update_scalar_example() {
        let (post, lm) = update(&g1(0.0, 1.0), &DVector::from_vec(vec![2.0]), &scalar_model(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(lm, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post.mean()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post.cov()[(0, 0)], 0.5, epsilon = 1e-15);
        // grid sup of the product ℓ(z|x) f(x)
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0.0;
        for i in 0..=200_000 {
            let x = -5.0 + 10.0 * i as f64 / 200_000.0;
            let v = -0.5 * (2.0 - x).powi(2) - 0.5 * x * x;
            if v > best {
                best = v;
                arg = x;
            }
        }
        assert_abs_diff_eq!(lm, best, epsilon = 1e-8);
        assert_abs_diff_eq!(post.mean()[0], arg, epsilon = 1e-4);
    }

    #[test]
    fn update_mahalanobis_two() {
        let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, 0.3).unwrap();
        let b = GaussianPossibility::new(DVector::zeros(4), DMatrix::identity(4, 4) * 1e-12).unwrap();
        // innovation covariance ≈ R = 0.09 I; Mahalanobis distance 2 means offset 0.6
        let s: f64 = 0.09 + 1e-12;
        let z = DVector::from_vec(vec![2.0 * s.sqrt(), 0.0]);
        let (_, lm) = update(&b, &z, &model).unwrap();
        assert_abs_diff_eq!(lm, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn update_rejects_bad_observation() {
        let model = scalar_model(1.0, 1.0);
        assert!(update(&g1(0.0, 1.0), &DVector::from_vec(vec![f64::NAN]), &model).is_err());
        assert!(update(&g1(0.0, 1.0), &DVector::zeros(2), &model).is_err());
    }

    #[test]
    fn birth_posterior_layout() {
        let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, 0.3).unwrap();
        let birth = BirthPrior::isotropic(1.0, 2).unwrap();
        let z = DVector::from_vec(vec![3.0, -1.0]);
        let p0 = birth.posterior(&z, 0, &model).unwrap();
        assert_eq!(p0.mean().as_slice(), &[3.0, -1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p0.cov()[(0, 0)], 0.09, epsilon = 1e-15);
        assert_eq!(p0.cov()[(2, 2)], 1.0);
        assert_eq!(p0.cov()[(0, 2)], 0.0);
        let p3 = birth.posterior(&z, 3, &model).unwrap();
        assert_abs_diff_eq!(p3.cov()[(2, 2)], 1.0 + 3.0 * 0.0025, epsilon = 1e-15);
        assert!(BirthPrior::<f64>::isotropic(0.0, 2).is_err());
    }

    #[test]
    fn particle_identity_and_single() {
        let states = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-2.0])];
        let b = ParticleBelief::new(vec![1.0, 0.5], states.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let moved = particle_predict(&b, &IdentityKernel, &mut rng);
        assert_eq!(moved.states(), &states[..]);
        assert_eq!(moved.weights(), vec![1.0, 0.5]);

        let single = ParticleBelief::new(vec![1.0], vec![DVector::from_vec(vec![0.0])]).unwrap();
        let model = scalar_model(1.0, 1.0);
        let moved = particle_predict(&single, &GaussianKernel::new(&model), &mut rng);
        assert_eq!(moved.weights(), vec![1.0]);
    }

    #[test]
    fn particle_update_examples() {
        let b = ParticleBelief::new(vec![1.0, 0.25], vec![DVector::zeros(1), DVector::zeros(1)]).unwrap();
        let (post, lm) = particle_update(&b, |_| 0.0).unwrap();
        assert_eq!(lm, 0.0);
        assert_eq!(post.weights(), vec![1.0, 0.25]);

        let one = ParticleBelief::new(vec![1.0], vec![DVector::zeros(1)]).unwrap();
        let (_, lm) = particle_update(&one, |_| 0.5f64.ln()).unwrap();
        assert_abs_diff_eq!(lm, 0.5f64.ln(), epsilon = 1e-15);

        assert!(matches!(
            particle_update(&one, |_| f64::NEG_INFINITY),
            Err(Error::DegenerateBelief)
        ));
    }

    #[test]
    fn mix_key_spreads_bits() {
        assert_ne!(mix_key(0, 1), mix_key(0, 2));
        assert_ne!(mix_key(1, 0), mix_key(2, 0));
    }
}
