mod common;

use censored_svm::censoring::ipcw_weights;
use censored_svm::model_selection::{cv_select, cv_select_with_folds, rfe_select};
use censored_svm::simulation::{generate, SimulationSetting};
use censored_svm::solver::{fit, predict};
use censored_svm::{CensoringMethod, CvGrid, CvSetup, Dataset, FitConfig, KernelSpec, LossSpec, ResponseTransform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setting1(n: usize, seed: u64) -> Dataset {
    let s = SimulationSetting::new(1).unwrap().with_c0(3.08).unwrap();
    generate(&s, n, seed).unwrap().data
}

fn setup() -> CvSetup {
    CvSetup::new(ResponseTransform::Identity, LossSpec::absolute(), CensoringMethod::Km, FitConfig::default())
}

/// Fold split, fits and IPCW validation recomputed with a plain loop.
#[test]
fn selection_matches_direct_recomputation() {
    let data = setting1(200, 3);
    let grid = CvGrid::new(vec![0.1, 1.0, 10.0], vec![0.1, 0.4], 5, 21).unwrap();
    let report = cv_select(&data, &grid, &setup()).unwrap();

    let mut idx: Vec<usize> = (0..200).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(21));
    let folds: Vec<Vec<usize>> = idx.chunks(40).map(<[usize]>::to_vec).collect();
    assert_eq!(folds, report.folds);

    let full_g = CensoringMethod::Km.fit(&data, 0.05).unwrap();
    let all_w = ipcw_weights(&full_g, &data).unwrap();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &il in &grid.inv_lambdas {
        for &sigma in &grid.sigmas {
            let mut total = 0.0;
            for held in &folds {
                let train_idx: Vec<usize> = (0..200).filter(|i| !held.contains(i)).collect();
                let train = data.subset(&train_idx);
                let g = CensoringMethod::Km.fit(&train, 0.05).unwrap();
                let w = ipcw_weights(&g, &train).unwrap();
                let kernel = KernelSpec::gaussian(sigma).unwrap();
                let m = fit(&train, &w, ResponseTransform::Identity, LossSpec::absolute(), kernel, 1.0 / il, &FitConfig::default())
                    .unwrap();
                let mut fold_risk = 0.0;
                for &i in held {
                    let s = &data.samples()[i];
                    let f = predict(&m, &s.z, true).unwrap();
                    fold_risk += all_w[i] * common::loss("absolute", 0.0, s.u, f);
                }
                total += fold_risk / held.len() as f64;
            }
            let mean = total / folds.len() as f64;
            let reported = report.pairs.iter().find(|p| p.inv_lambda == il && p.sigma == sigma).unwrap().mean_risk;
            assert!((mean - reported).abs() < 1e-9, "({il}, {sigma}): {mean} vs {reported}");
            if mean < best.0 {
                best = (mean, il, sigma);
            }
        }
    }
    assert_eq!(report.selected_pair(), (best.1, best.2));
}

#[test]
fn selection_invariant_to_row_order() {
    let data = setting1(120, 4);
    let grid = CvGrid::new(vec![0.1, 1.0, 10.0], vec![0.1, 0.4], 4, 5).unwrap();
    let report = cv_select(&data, &grid, &setup()).unwrap();

    let mut perm: Vec<usize> = (0..120).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    let permuted = data.subset(&perm);
    let mut pos = vec![0; 120];
    for (new, &old) in perm.iter().enumerate() {
        pos[old] = new;
    }
    let folds: Vec<Vec<usize>> = report.folds.iter().map(|f| f.iter().map(|&i| pos[i]).collect()).collect();
    let again = cv_select_with_folds(&permuted, &folds, &grid, &setup()).unwrap();
    assert_eq!(again.selected_pair(), report.selected_pair());
    for (a, b) in again.pairs.iter().zip(&report.pairs) {
        assert!((a.mean_risk - b.mean_risk).abs() < 1e-4, "{} vs {}", a.mean_risk, b.mean_risk);
    }
}

#[test]
fn cv_is_deterministic() {
    let data = setting1(60, 6);
    let grid = CvGrid::geometric(0.05, 5, 8).unwrap();
    let a = cv_select(&data, &grid, &setup()).unwrap();
    let b = cv_select(&data, &grid, &setup()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rfe_drops_appended_noise_feature_first() {
    let grid = CvGrid::geometric(0.05, 5, 0).unwrap();
    let mut hits = 0;
    for rep in 0..20u64 {
        let base = setting1(400, 100 + rep);
        let mut rng = ChaCha8Rng::seed_from_u64(500 + rep);
        let z: Vec<Vec<f64>> = base.samples().iter().map(|s| vec![s.z[0], rng.random_range(-1.0..1.0)]).collect();
        let data = Dataset::from_columns(z, base.times(), base.samples().iter().map(|s| s.delta).collect()).unwrap();
        let grid = CvGrid { seed: rep, ..grid.clone() };
        let r = rfe_select(&data, 1, &grid, &setup()).unwrap();
        hits += usize::from(r.steps[0].removed == 1);
    }
    assert!(hits >= 16, "noise removed first in {hits}/20");
}

#[test]
fn rfe_trivial_targets() {
    let data = setting1(30, 7);
    let grid = CvGrid::new(vec![1.0], vec![0.4], 3, 0).unwrap();
    let r = rfe_select(&data, 1, &grid, &setup()).unwrap();
    assert_eq!(r.selected, vec![0]);
    assert!(r.steps.is_empty());
    assert!(rfe_select(&data, 2, &grid, &setup()).is_err());
}
