//! Association-quality metrics against simulator ground truth.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{ObsId, TrackSet};
use crate::sim::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationMetrics {
    /// Fraction of object-originated observations that sit in the estimated
    /// path holding the plurality of their object's observations.
    pub accuracy: f64,
    /// `|#estimated tracks − #detected objects|`.
    pub track_count_error: usize,
    pub clutter_precision: f64,
    pub clutter_recall: f64,
}

pub fn association_metrics(estimate: &TrackSet, truth: &GroundTruth) -> AssociationMetrics {
    let mut path_of: HashMap<ObsId, usize> = HashMap::new();
    for (i, t) in estimate.tracks().iter().enumerate() {
        for &o in t.path.obs() {
            path_of.insert(o, i);
        }
    }
    let detections = truth.detections();
    let (mut hit, mut total) = (0usize, 0usize);
    for det in &detections {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for o in det {
            if let Some(&p) = path_of.get(o) {
                *counts.entry(p).or_default() += 1;
            }
        }
        hit += counts.values().copied().max().unwrap_or(0);
        total += det.len();
    }
    let true_clutter: HashSet<ObsId> = truth
        .labels
        .iter()
        .enumerate()
        .flat_map(|(k0, s)| s.iter().enumerate().filter(|(_, l)| l.is_none()).map(move |(i, _)| ObsId::new(k0 + 1, i)))
        .collect();
    let all = truth.labels.iter().enumerate().flat_map(|(k0, s)| (0..s.len()).map(move |i| ObsId::new(k0 + 1, i)));
    let predicted: HashSet<ObsId> = all.filter(|o| !path_of.contains_key(o)).collect();
    let both = predicted.intersection(&true_clutter).count();
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    AssociationMetrics {
        accuracy: ratio(hit, total),
        track_count_error: estimate.len().abs_diff(truth.detected_objects()),
        clutter_precision: ratio(both, predicted.len()),
        clutter_recall: ratio(both, true_clutter.len()),
    }
}
