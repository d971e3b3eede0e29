//! Run configuration, read from a flat TOML file and/or command-line flags.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::consistency::DEFAULT_TAU_PRIME;
use crate::error::{Error, Result};
use crate::mcmc::{BaselineConfig, ChainConfig, ChainLevel, PcFocus, ProposalConfig};
use crate::sim::{Preset, SimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerChoice {
    Hisp,
    Baseline,
    Both,
}

impl std::str::FromStr for SamplerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hisp" => Ok(Self::Hisp),
            "baseline" => Ok(Self::Baseline),
            "both" => Ok(Self::Both),
            _ => Err(Error::Usage(format!("unknown sampler '{s}' (expected hisp, baseline or both)"))),
        }
    }
}

/// Every key is optional in the file; missing keys take the defaults below.
/// Simulation keys left unset fall back to the preset or to the parameters
/// stored in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub scenario: Option<PathBuf>,
    pub sampler: SamplerChoice,
    pub iterations: Option<u64>,
    pub wall_secs: Option<f64>,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,

    pub lambda_r: f64,
    pub c: f64,
    /// `-1`, `0`, `+1` or `uniform`.
    pub pc_focus: String,
    pub level: ChainLevel,
    pub interval_refresh: f64,
    pub tau_prime: f64,
    /// Particles per object filter; 0 selects the Kalman filter.
    pub particles: usize,

    /// Initial velocity scale of the inference birth model.
    pub sigma_v: f64,
    pub alpha_fa: f64,
    pub alpha_birth: f64,

    pub baseline_max_gap: usize,
    pub baseline_min_pair: f64,

    pub horizon: Option<usize>,
    pub dt: Option<f64>,
    pub sigma_a: Option<f64>,
    pub sigma: Option<f64>,
    pub window: Option<[f64; 4]>,
    pub p_d: Option<f64>,
    pub p_s: Option<f64>,
    pub lambda_fa: Option<f64>,
    pub lambda_b: Option<f64>,
    pub sim_sigma_v: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: None,
            scenario: None,
            sampler: SamplerChoice::Hisp,
            iterations: Some(50_000),
            wall_secs: None,
            repeats: 1,
            seed: 0,
            out: PathBuf::from("out"),
            lambda_r: 1.0,
            c: 0.001,
            pc_focus: "-1".into(),
            level: ChainLevel::Track,
            interval_refresh: 0.2,
            tau_prime: DEFAULT_TAU_PRIME,
            particles: 0,
            sigma_v: 1.0,
            alpha_fa: 1e-2,
            alpha_birth: 1e-4,
            baseline_max_gap: 10,
            baseline_min_pair: 1e-4,
            horizon: None,
            dt: None,
            sigma_a: None,
            sigma: None,
            window: None,
            p_d: None,
            p_s: None,
            lambda_fa: None,
            lambda_b: None,
            sim_sigma_v: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Usage("repeats must be at least 1".into()));
        }
        match (self.iterations, self.wall_secs) {
            (None, None) => return Err(Error::Usage("a budget (iterations or wall_secs) is required".into())),
            (Some(0), _) if self.wall_secs.is_none() => {}
            (_, Some(w)) if !(w > 0.0 && w.is_finite()) => {
                return Err(Error::Usage("wall_secs must be positive".into()))
            }
            _ => {}
        }
        self.chain_config()?;
        Ok(())
    }

    pub fn preset(&self) -> Result<Option<Preset>> {
        self.preset.as_deref().map(str::parse).transpose()
    }

    pub fn pc_focus(&self) -> Result<PcFocus> {
        self.pc_focus.parse()
    }

    pub fn chain_config(&self) -> Result<ChainConfig> {
        let proposal = ProposalConfig::new(self.lambda_r, self.pc_focus()?)?;
        if !(0.0..1.0).contains(&self.c) {
            return Err(Error::Usage(format!("c must lie in [0, 1), got {}", self.c)));
        }
        Ok(ChainConfig { proposal, c: self.c, level: self.level, interval_refresh: self.interval_refresh })
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig { max_gap: self.baseline_max_gap, min_pair: self.baseline_min_pair, c: self.c }
    }

    /// Simulation parameters: `base` with this configuration's overrides.
    pub fn sim_params(&self, base: SimParams) -> SimParams {
        SimParams {
            horizon: self.horizon.unwrap_or(base.horizon),
            dt: self.dt.unwrap_or(base.dt),
            sigma_a: self.sigma_a.unwrap_or(base.sigma_a),
            sigma: self.sigma.unwrap_or(base.sigma),
            window: self.window.unwrap_or(base.window),
            p_d: self.p_d.unwrap_or(base.p_d),
            p_s: self.p_s.unwrap_or(base.p_s),
            lambda_fa: self.lambda_fa.unwrap_or(base.lambda_fa),
            lambda_b: self.lambda_b.unwrap_or(base.lambda_b),
            sigma_v: self.sim_sigma_v.unwrap_or(base.sigma_v),
        }
    }
}
