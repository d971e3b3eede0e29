//! Annealing schedule and Metropolis-Hastings acceptance.

use rand::Rng;

use crate::error::{Error, Result};

/// Inverse temperature `ρ_t = ρ_{t-1} / (1 − c)` with `ρ_0 = 1`.
///
/// Evaluated in closed form as `exp(−t · ln(1 − c))` so that the value at any
/// `t` does not accumulate rounding from the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    c: f64,
    log_rate: f64,
}

impl AnnealSchedule {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!("cooling constant c must lie in [0, 1), got {c}")));
        }
        Ok(Self { c, log_rate: -(1.0 - c).ln() })
    }

    /// Constant `ρ = 1`.
    pub fn constant() -> Self {
        Self { c: 0.0, log_rate: 0.0 }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn log_rho(&self, t: u64) -> f64 {
        t as f64 * self.log_rate
    }

    pub fn rho(&self, t: u64) -> f64 {
        self.log_rho(t).exp()
    }
}

/// Log acceptance ratio `ρ Δ + log q_rev − log q_fwd`. A zero target gap
/// contributes nothing, even when `ρ` has overflowed to infinity.
pub fn log_acceptance(rho: f64, log_target_gap: f64, log_rev: f64, log_fwd: f64) -> f64 {
    let tempered = if log_target_gap == 0.0 { 0.0 } else { rho * log_target_gap };
    tempered + log_rev - log_fwd
}

/// `min(1, exp(log_ratio))`, with NaN treated as zero.
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.min(0.0).exp()
    }
}

pub fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
        return false;
    }
    rng.random::<f64>() < log_ratio.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_examples() {
        let s = AnnealSchedule::new(0.0).unwrap();
        assert_eq!(s.rho(12345), 1.0);
        let s = AnnealSchedule::new(0.001).unwrap();
        assert_eq!(s.rho(0), 1.0);
        assert_relative_eq!(s.rho(1), 1.0 / 0.999, max_relative = 1e-15);
        assert!(s.rho(10) < s.rho(11));
        assert!(AnnealSchedule::new(1.0).is_err());
        assert!(AnnealSchedule::new(-0.1).is_err());
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(log_acceptance(1.0, 0.0, -0.3, -0.3)), 1.0);
        assert_relative_eq!(acceptance_probability(log_acceptance(1.0, -1.0, 0.0, 0.0)), (-1.0f64).exp());
        assert_relative_eq!(log_acceptance(2.0, -1.0, 0.0, 0.0), 2.0 * log_acceptance(1.0, -1.0, 0.0, 0.0));
        assert_eq!(log_acceptance(f64::INFINITY, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(acceptance_probability(f64::NAN), 0.0);
    }
}
