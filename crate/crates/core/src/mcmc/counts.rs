//! Numbers of reassigned and created paths.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named choices of the pmf `p̃_c` on the change `δ ∈ {−1, 0, +1}` in the
/// number of paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcFocus {
    Uniform,
    /// `(½, ¼, ¼)`: favours merging fragmented tracks.
    Reduce,
    Keep,
    Grow,
}

impl PcFocus {
    pub const ALL: [PcFocus; 4] = [PcFocus::Uniform, PcFocus::Reduce, PcFocus::Keep, PcFocus::Grow];

    /// Probabilities of `δ = −1, 0, +1`.
    pub fn pmf(self) -> [f64; 3] {
        match self {
            PcFocus::Uniform => [1.0 / 3.0; 3],
            PcFocus::Reduce => [0.5, 0.25, 0.25],
            PcFocus::Keep => [0.25, 0.5, 0.25],
            PcFocus::Grow => [0.25, 0.25, 0.5],
        }
    }
}

impl fmt::Display for PcFocus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PcFocus::Uniform => "uniform",
            PcFocus::Reduce => "-1",
            PcFocus::Keep => "0",
            PcFocus::Grow => "+1",
        })
    }
}

impl FromStr for PcFocus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PcFocus::Uniform),
            "-1" | "reduce" => Ok(PcFocus::Reduce),
            "0" | "keep" => Ok(PcFocus::Keep),
            "+1" | "1" | "grow" => Ok(PcFocus::Grow),
            _ => Err(Error::Usage(format!("unknown p_c focus '{s}' (expected -1, 0, +1 or uniform)"))),
        }
    }
}

/// Parameters of the count stage of the proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Mean of the truncated Poisson law of `N_r`.
    pub lambda_r: f64,
    pub pc: [f64; 3],
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self { lambda_r: 1.0, pc: PcFocus::Reduce.pmf() }
    }
}

impl ProposalConfig {
    pub fn new(lambda_r: f64, focus: PcFocus) -> Result<Self> {
        let cfg = Self { lambda_r, pc: focus.pmf() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_r > 0.0 && self.lambda_r.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda_r must be positive, got {}", self.lambda_r)));
        }
        if self.pc.iter().any(|p| !(*p >= 0.0)) || (self.pc.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("p_c must be a pmf on {-1, 0, +1}".into()));
        }
        Ok(())
    }
}

/// Log pmf of a Poisson(`lambda`) variable truncated to `{0, …, s}`.
pub fn truncated_poisson_log_pmf(n: usize, s: usize, lambda: f64) -> f64 {
    if n > s {
        return f64::NEG_INFINITY;
    }
    let log_term = |k: usize| k as f64 * lambda.ln() - ln_factorial(k);
    let mut norm = f64::NEG_INFINITY;
    for k in 0..=s {
        norm = crate::possibility::log_add(norm, log_term(k));
    }
    log_term(n) - norm
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Draws `(N_r, N_c)` for a current association of size `s` and returns the
/// log of their joint probability.
pub fn sample_counts<R: Rng + ?Sized>(s: usize, cfg: &ProposalConfig, rng: &mut R) -> (usize, usize, f64) {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut n_r = s;
    for k in 0..=s {
        acc += truncated_poisson_log_pmf(k, s, cfg.lambda_r).exp();
        if u < acc {
            n_r = k;
            break;
        }
    }
    let n_c = if n_r == 0 {
        1
    } else {
        let v = rng.random::<f64>();
        let delta = if v < cfg.pc[0] {
            -1
        } else if v < cfg.pc[0] + cfg.pc[1] {
            0
        } else {
            1
        };
        (n_r as i64 + delta) as usize
    };
    (n_r, n_c, counts_log_prob(s, n_r, n_c, cfg))
}

/// `log p_r(N_r | s) + log p_c(N_c | N_r)`.
pub fn counts_log_prob(s: usize, n_r: usize, n_c: usize, cfg: &ProposalConfig) -> f64 {
    let lr = truncated_poisson_log_pmf(n_r, s, cfg.lambda_r);
    let lc = if n_r == 0 {
        if n_c == 1 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        match n_c as i64 - n_r as i64 {
            -1 => cfg.pc[0].ln(),
            0 => cfg.pc[1].ln(),
            1 => cfg.pc[2].ln(),
            _ => f64::NEG_INFINITY,
        }
    };
    lr + lc
}
