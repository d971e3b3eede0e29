use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use possmc::filter::{update, LinearGaussianModel};
use possmc::harness::{read_scenario, write_scenario, ScenarioFile};
use possmc::mcmc::intervals::IntervalProposal;
use possmc::possibility::{max_entropy_log, ClippedSampler, DiscretePossibility};
use possmc::sim::{simulate, Preset};
use possmc::{Association, GaussianPossibility, MultiObjectParams, ObsId, Path, Track, TrackSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn log_bounds(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(f64::NEG_INFINITY), 6 => -20.0..0.0f64], 1..max_len)
        .prop_filter("some positive credibility", |v| v.iter().any(|l| l.is_finite()))
}

/// Paths over scans `1..=horizon`, disjoint, each observation index 0.
fn association(horizon: usize) -> impl Strategy<Value = Association> {
    prop::collection::vec(0..4usize, horizon).prop_map(|labels| {
        let mut paths = Vec::new();
        for owner in 1..4 {
            let obs: Vec<ObsId> =
                labels.iter().enumerate().filter(|(_, &l)| l == owner).map(|(k, _)| ObsId::new(k + 1, 0)).collect();
            if !obs.is_empty() {
                paths.push(Path::new(obs).unwrap());
            }
        }
        Association::new(paths).unwrap()
    })
}

proptest! {
    #[test]
    fn max_entropy_is_bounded_and_normalised(bound in log_bounds(60)) {
        let top = bound.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lp = max_entropy_log(&bound).unwrap();
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (l, b) in lp.iter().zip(&bound) {
            prop_assert!(*l <= b - top + 1e-12);
        }
        // the level set: every clipped entry shares the largest probability
        let level = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (l, b) in lp.iter().zip(&bound) {
            prop_assert!(*l == b - top || (*l - level).abs() < 1e-12);
        }
    }

    #[test]
    fn max_entropy_agrees_across_precisions(bound in log_bounds(20)) {
        let wide = max_entropy_log(&bound).unwrap();
        let narrow: Vec<f32> = bound.iter().map(|&l| l as f32).collect();
        let narrow = max_entropy_log(&narrow).unwrap();
        for (a, b) in wide.iter().zip(&narrow) {
            prop_assert!((a.exp() - f64::from(b.exp())).abs() < 1e-5);
        }
    }

    #[test]
    fn clipped_sampler_is_a_distribution(bound in log_bounds(12), drop in prop::collection::vec(any::<bool>(), 12)) {
        let sampler = ClippedSampler::new(bound.clone());
        let excluded: Vec<usize> = (0..bound.len()).filter(|&i| drop[i]).collect();
        let lp: Vec<f64> = (0..bound.len()).map(|i| sampler.log_prob(i, &excluded)).collect();
        let live = (0..bound.len()).any(|i| !drop[i] && bound[i].is_finite());
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        if live {
            prop_assert!((total - 1.0).abs() < 1e-12);
            let kept: Vec<f64> = (0..bound.len()).filter(|&i| !drop[i]).map(|i| bound[i]).collect();
            let direct = max_entropy_log(&kept).unwrap();
            let from_sampler: Vec<f64> = (0..bound.len()).filter(|&i| !drop[i]).map(|i| lp[i]).collect();
            for (a, b) in direct.iter().zip(&from_sampler) {
                prop_assert!((a.exp() - b.exp()).abs() < 1e-12);
            }
        } else {
            prop_assert_eq!(total, 0.0);
        }
    }

    #[test]
    fn unordered_pairs_sum_to_one(bound in log_bounds(7)) {
        let sampler = ClippedSampler::new(bound.clone());
        let live = bound.iter().filter(|l| l.is_finite()).count();
        prop_assume!(live >= 2);
        let mut total = 0.0;
        for a in 0..bound.len() {
            for b in a + 1..bound.len() {
                total += sampler.log_prob_set(&[a, b], &[]).exp();
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probability_bounds_are_ordered(values in prop::collection::vec(0.0..1.0f64, 2..10), mask in prop::collection::vec(any::<bool>(), 10)) {
        let f = DiscretePossibility::new(values.iter().cloned().enumerate()).unwrap().normalized().unwrap();
        let subset: BTreeSet<usize> = (0..values.len()).filter(|&i| mask[i]).collect();
        let complement: BTreeSet<usize> = (0..values.len()).filter(|&i| !mask[i]).collect();
        let (lo, hi) = f.probability_bounds(&subset).unwrap();
        let (clo, chi) = f.probability_bounds(&complement).unwrap();
        prop_assert!(lo <= hi + 1e-15);
        prop_assert!((lo - (1.0 - chi)).abs() < 1e-15 && (clo - (1.0 - hi)).abs() < 1e-15);
        let pmf = f.max_entropy_pmf().unwrap();
        for (k, v) in f.iter() {
            let (_, single) = f.probability_bounds(&BTreeSet::from([*k])).unwrap();
            prop_assert_eq!(single, *v);
            prop_assert!(pmf.get(k) <= v + 1e-15);
        }
    }

    #[test]
    fn kalman_posterior_is_a_valid_gaussian(seed in any::<u64>(), dx in 1..6usize) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dz = rng.random_range(1..=dx);
        let a = DMatrix::from_fn(dx, dx, |_, _| rng.random_range(-1.0..1.0));
        let p = &a * a.transpose() + DMatrix::identity(dx, dx) * 0.1;
        let h = DMatrix::from_fn(dz, dx, |_, _| rng.random_range(-1.0..1.0));
        let model = LinearGaussianModel::new(DMatrix::identity(dx, dx), DMatrix::identity(dx, dx), h, DMatrix::identity(dz, dz) * 0.5).unwrap();
        let prior = GaussianPossibility::new(DVector::zeros(dx), p.clone()).unwrap();
        let z = DVector::from_fn(dz, |_, _| rng.random_range(-3.0..3.0));
        let (post, log_marginal) = update(&prior, &z, &model).unwrap();
        prop_assert!(log_marginal <= 0.0);
        let cov = post.cov();
        prop_assert!((cov - cov.transpose()).amax() == 0.0);
        prop_assert!(cov.clone().cholesky().is_some());
        // conditioning never increases uncertainty
        prop_assert!((&p - cov).symmetric_eigenvalues().min() > -1e-10);
    }

    #[test]
    fn interval_probability_matches_the_draw(assoc in association(8), seed in any::<u64>()) {
        let params = MultiObjectParams::from_probabilities(0.8, 0.95).unwrap();
        let psi = IntervalProposal::new(8, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tracks, log_psi) = psi.propose(&assoc, &mut rng);
        prop_assert_eq!(tracks.association(), assoc);
        prop_assert_eq!(psi.log_prob(&tracks).unwrap(), log_psi);
    }

    #[test]
    fn interval_law_is_normalised(first in 1..=6usize, len in 0..3usize) {
        let last = (first + len).min(6);
        let params = MultiObjectParams::from_probabilities(0.7, 0.9).unwrap();
        let psi = IntervalProposal::new(6, &params).unwrap();
        let path = Path::new(vec![ObsId::new(first, 0), ObsId::new(last, 0)].into_iter().collect::<BTreeSet<_>>().into_iter().collect()).unwrap();
        let mut total = 0.0;
        for appear in 1..=first {
            for end in last..=6 {
                let t = TrackSet::new(vec![Track { path: path.clone(), appear, last: end }]).unwrap();
                total += psi.log_prob(&t).unwrap().exp();
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn replacement_keeps_paths_disjoint(assoc in association(8), extra in 1..=8usize) {
        let added = Path::single(ObsId::new(extra, 0));
        let owner = assoc.paths().iter().find(|p| p.contains(ObsId::new(extra, 0))).cloned();
        match owner {
            Some(p) => {
                prop_assert!(assoc.replace(&[], std::slice::from_ref(&added)).is_none());
                let swapped = assoc.replace(&[p], std::slice::from_ref(&added)).unwrap();
                prop_assert!(swapped.contains(&added));
                prop_assert_eq!(swapped.used_count(), swapped.paths().iter().map(Path::len).sum::<usize>());
            }
            None => {
                let grown = assoc.replace(&[], &[added]).unwrap();
                prop_assert_eq!(grown.used_count(), assoc.used_count() + 1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenario_files_round_trip(seed in any::<u64>(), preset in prop::sample::select(Preset::ALL.to_vec())) {
        let params = possmc::sim::SimParams { horizon: 6, ..preset.params() };
        let (scenario, truth) = simulate(&params, seed).unwrap();
        let file = ScenarioFile { scenario, params: Some(params), seed: Some(seed), truth: Some(truth) };
        let mut buf = Vec::new();
        write_scenario(&file, &mut buf).unwrap();
        let back = read_scenario(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        write_scenario(&back, &mut again).unwrap();
        prop_assert_eq!(&buf, &again);
        prop_assert_eq!(back.scenario, file.scenario);
        prop_assert_eq!(back.seed, Some(seed));
    }
}
