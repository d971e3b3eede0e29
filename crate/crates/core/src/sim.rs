//! Probabilistic scenario generator: nearly-constant-velocity objects in a
//! 2-D window with Poisson births and clutter and Bernoulli detections.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Association, ObsId, Path, Scenario, Track, TrackSet};

/// Parameters of the data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub horizon: usize,
    pub dt: f64,
    pub sigma_a: f64,
    pub sigma: f64,
    /// `[x_min, x_max, y_min, y_max]`.
    pub window: [f64; 4],
    pub p_d: f64,
    pub p_s: f64,
    pub lambda_fa: f64,
    pub lambda_b: f64,
    /// Standard deviation of the initial velocity components.
    pub sigma_v: f64,
}

/// Named scenario settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Simple,
    HighFa,
    LowPd,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Simple, Preset::HighFa, Preset::LowPd];

    pub fn params(self) -> SimParams {
        let (lambda_fa, lambda_b, p_d) = match self {
            Preset::Simple => (10.0, 0.1, 0.9),
            Preset::HighFa => (100.0, 0.5, 0.8),
            Preset::LowPd => (25.0, 0.5, 0.5),
        };
        SimParams { lambda_fa, lambda_b, p_d, ..SimParams::default() }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Simple => "simple",
            Preset::HighFa => "high_fa",
            Preset::LowPd => "low_pd",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Preset::Simple),
            "high_fa" => Ok(Preset::HighFa),
            "low_pd" => Ok(Preset::LowPd),
            _ => Err(Error::Usage(format!("unknown preset '{s}' (expected simple, high_fa or low_pd)"))),
        }
    }
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            horizon: 50,
            dt: 1.0,
            sigma_a: 0.05,
            sigma: 0.3,
            window: [-60.0, 60.0, -60.0, 60.0],
            p_d: 0.9,
            p_s: 0.99,
            lambda_fa: 10.0,
            lambda_b: 0.1,
            sigma_v: 0.5,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if !(self.p_d > 0.0 && self.p_d <= 1.0) || !(self.p_s > 0.0 && self.p_s <= 1.0) {
            return bad("p_d and p_s must lie in (0, 1]");
        }
        if !(self.lambda_fa >= 0.0 && self.lambda_b >= 0.0) {
            return bad("Poisson rates must be non-negative");
        }
        if !(self.window[0] < self.window[1] && self.window[2] < self.window[3]) {
            return bad("window must be non-empty");
        }
        if !(self.dt > 0.0 && self.sigma > 0.0 && self.sigma_a >= 0.0 && self.sigma_v >= 0.0) {
            return bad("dt and sigma must be positive, sigma_a and sigma_v non-negative");
        }
        Ok(())
    }
}

/// State history of one simulated object. `states[i]` is the state
/// `(x, y, vx, vy)` at time `birth + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub birth: usize,
    pub states: Vec<[f64; 4]>,
}

impl Trajectory {
    /// Last time step at which the object exists.
    pub fn death(&self) -> usize {
        self.birth + self.states.len() - 1
    }
}

/// Origin of every observation and the object trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub objects: Vec<Trajectory>,
    /// `labels[k-1][i]`: object index of observation `i` at time `k`, `None`
    /// for clutter.
    pub labels: Vec<Vec<Option<usize>>>,
}

impl GroundTruth {
    /// Observations of each object, in time order; objects never detected
    /// have an empty list.
    pub fn detections(&self) -> Vec<Vec<ObsId>> {
        let mut out = vec![Vec::new(); self.objects.len()];
        for (k0, scan) in self.labels.iter().enumerate() {
            for (i, l) in scan.iter().enumerate() {
                if let Some(j) = l {
                    out[*j].push(ObsId::new(k0 + 1, i));
                }
            }
        }
        out
    }

    pub fn association(&self) -> Result<Association> {
        Association::new(self.detections().into_iter().filter(|d| !d.is_empty()).map(Path::new).collect::<Result<_>>()?)
    }

    /// Detected objects with their true interval of existence.
    pub fn track_set(&self) -> Result<TrackSet> {
        let horizon = self.labels.len();
        let mut tracks = Vec::new();
        for (obj, det) in self.objects.iter().zip(self.detections()) {
            if det.is_empty() {
                continue;
            }
            tracks.push(Track::new(Path::new(det)?, obj.birth, obj.death().min(horizon), horizon)?);
        }
        TrackSet::new(tracks)
    }

    /// Number of objects with at least one detection.
    pub fn detected_objects(&self) -> usize {
        self.detections().iter().filter(|d| !d.is_empty()).count()
    }
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as usize
}

/// Draws a scenario. Reproducible per `(params, seed)`; observations are
/// shuffled within each scan so that their order carries no label.
pub fn simulate(params: &SimParams, seed: u64) -> Result<(Scenario, GroundTruth)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [x0, x1, y0, y1] = params.window;
    let normal = |s: f64| Normal::new(0.0, s).expect("finite std");
    let (acc, vel, noise) = (normal(params.sigma_a), normal(params.sigma_v), normal(params.sigma));
    let dt = params.dt;
    let mut objects: Vec<Trajectory> = Vec::new();
    let mut alive: Vec<usize> = Vec::new();
    let mut scans = Vec::with_capacity(params.horizon);
    let mut labels = Vec::with_capacity(params.horizon);
    for k in 1..=params.horizon {
        // survival and motion of existing objects
        let mut still = Vec::with_capacity(alive.len());
        for &j in &alive {
            if rng.random::<f64>() >= params.p_s {
                continue;
            }
            let [x, y, vx, vy] = *objects[j].states.last().expect("non-empty");
            let (ax, ay) = (acc.sample(&mut rng), acc.sample(&mut rng));
            let h = 0.5 * dt * dt;
            objects[j].states.push([x + dt * vx + h * ax, y + dt * vy + h * ay, vx + dt * ax, vy + dt * ay]);
            still.push(j);
        }
        alive = still;
        for _ in 0..poisson(params.lambda_b, &mut rng) {
            let s = [
                rng.random_range(x0..x1),
                rng.random_range(y0..y1),
                vel.sample(&mut rng),
                vel.sample(&mut rng),
            ];
            objects.push(Trajectory { birth: k, states: vec![s] });
            alive.push(objects.len() - 1);
        }
        let mut scan: Vec<(DVector<f64>, Option<usize>)> = Vec::new();
        for &j in &alive {
            if rng.random::<f64>() < params.p_d {
                let [x, y, _, _] = *objects[j].states.last().expect("non-empty");
                scan.push((DVector::from_vec(vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)]), Some(j)));
            }
        }
        for _ in 0..poisson(params.lambda_fa, &mut rng) {
            scan.push((DVector::from_vec(vec![rng.random_range(x0..x1), rng.random_range(y0..y1)]), None));
        }
        scan.shuffle(&mut rng);
        let (z, l): (Vec<_>, Vec<_>) = scan.into_iter().unzip();
        scans.push(z);
        labels.push(l);
    }
    let scenario = Scenario::new(2, scans)?;
    Ok((scenario, GroundTruth { objects, labels }))
}
