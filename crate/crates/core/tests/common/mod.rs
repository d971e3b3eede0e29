#![allow(dead_code)]

use nalgebra::DVector;
use possmc::consistency::{ConsistencyIndex, PairConsistency};
use possmc::filter::{BirthPrior, KalmanObjectFilter, LinearGaussianModel};
use possmc::{Association, MultiObjectParams, ObsId, Path, Scenario, TargetPossibility};

pub type Target = TargetPossibility<KalmanObjectFilter<f64>>;

/// Nearly-constant-velocity target over hand-placed 2-D observations.
pub fn toy_target(scans: &[Vec<[f64; 2]>], params: MultiObjectParams, sigma: f64) -> Target {
    let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, sigma).unwrap();
    let filter = KalmanObjectFilter::new(model, BirthPrior::isotropic(1.0, 2).unwrap()).unwrap();
    let scans = scans.iter().map(|s| s.iter().map(|z| DVector::from_vec(z.to_vec())).collect()).collect();
    TargetPossibility::new(Scenario::new(2, scans).unwrap(), params, filter)
}

pub fn index_for(target: &Target, sigma: f64, tau_prime: f64) -> ConsistencyIndex {
    let model = LinearGaussianModel::nearly_constant_velocity(2, 1.0, 0.05, sigma).unwrap();
    let pc = PairConsistency::new(
        model,
        BirthPrior::isotropic(1.0, 2).unwrap(),
        target.params().alpha_nd,
        tau_prime,
        target.horizon(),
    )
    .unwrap();
    ConsistencyIndex::build(target.scenario(), &pc)
}

/// Every element of `𝒜` for a small scenario: each observation is a false
/// alarm or joins a path, and a path holds at most one observation per scan.
pub fn enumerate_associations(scenario: &Scenario) -> Vec<Association> {
    fn rec(ids: &[ObsId], i: usize, blocks: &mut Vec<Vec<ObsId>>, out: &mut Vec<Association>) {
        if i == ids.len() {
            let paths = blocks.iter().map(|b| Path::new(b.clone()).unwrap()).collect();
            out.push(Association::new(paths).unwrap());
            return;
        }
        let id = ids[i];
        rec(ids, i + 1, blocks, out);
        for b in 0..blocks.len() {
            if blocks[b].iter().all(|o| o.time() != id.time()) {
                blocks[b].push(id);
                rec(ids, i + 1, blocks, out);
                blocks[b].pop();
            }
        }
        blocks.push(vec![id]);
        rec(ids, i + 1, blocks, out);
        blocks.pop();
    }
    let ids: Vec<ObsId> = scenario.ids().collect();
    let mut out = Vec::new();
    rec(&ids, 0, &mut Vec::new(), &mut out);
    out
}
