use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use stance_causal::classify::{
    calibrate_with_holdout, fit_gbm, fit_logistic, BaseModel, CalibratedModel, Classifier, ClassWeights,
    GbmOptions, LinearModel, LogisticObjective, LogisticOptions, Model,
};
use stance_causal::metrics::cross_entropy;

fn blobs(m: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<usize> = (0..m).map(|i| i % k).collect();
    let x = Array2::from_shape_fn((m, 3), |(i, j)| {
        let center = if j == y[i] % 3 { 1.5 } else { 0.0 };
        center + rng.gen_range(-1.0..1.0)
    });
    (x, y)
}

#[test]
fn fitted_logistic_is_a_stationary_point() {
    let (x, y) = blobs(120, 3, 1);
    let opts = LogisticOptions::default();
    let model = fit_logistic(x.view(), &y, &opts, None).unwrap();
    assert!(model.converged, "stopped after {} iterations", model.iterations);
    let counts = [40usize, 40, 40];
    let w = opts.class_weights.resolve(&counts).unwrap();
    let sw: Vec<f64> = y.iter().map(|&c| w[c]).collect();
    let obj = LogisticObjective::new(x.view(), &y, 3, opts.c, sw);
    let (_, g) = obj.value_and_gradient(&model.params());
    assert!(g.iter().all(|v| v.abs() < 1e-5), "{g:?}");
}

#[test]
fn balanced_weights_follow_the_count_formula() {
    // n / (k * n_c) for counts (90, 10): 100 / 180 and 100 / 20.
    let w = ClassWeights::Balanced.resolve(&[90, 10]).unwrap();
    assert!((w[0] - 100.0 / 180.0).abs() < 1e-15 && (w[1] - 5.0).abs() < 1e-15);
}

#[test]
fn models_survive_a_json_round_trip() {
    let (x, y) = blobs(90, 2, 2);
    let lin = fit_logistic(x.view(), &y, &LogisticOptions::default(), None).unwrap();
    let gbm = fit_gbm(x.view(), &y, &GbmOptions { rounds: 20, ..GbmOptions::default() }, None).unwrap();
    let cal = calibrate_with_holdout(x.view(), &y, 0.3, 4, |xs, ys| {
        Ok(BaseModel::Linear(fit_logistic(xs, ys, &LogisticOptions::default(), None)?))
    })
    .unwrap();
    for model in [Model::Linear(lin), Model::Boosted(gbm), Model::Calibrated(cal)] {
        let back = Model::from_json(&model.to_json().unwrap()).unwrap();
        for row in x.outer_iter() {
            let r = row.to_vec();
            assert_eq!(model.predict_proba(&r).unwrap(), back.predict_proba(&r).unwrap());
        }
    }
}

#[test]
fn boosting_improves_on_its_prior() {
    let (x, y) = blobs(200, 2, 3);
    let m = fit_gbm(x.view(), &y, &GbmOptions::default(), None).unwrap();
    assert_eq!(m.trees.len(), 100);
    assert!(m.loss_history.last().unwrap() < &(m.loss_history[0] * 0.8));
    assert!(m.trees.iter().all(|t| t.depth() <= 3));
}

#[test]
fn xor_needs_trees() {
    let x = Array2::from_shape_vec((4, 2), vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
    let y = [0, 1, 1, 0];
    let accuracy = |m: &dyn Classifier| {
        x.outer_iter()
            .zip(&y)
            .filter(|(r, &c)| {
                let p = m.predict_proba(&r.to_vec()).unwrap();
                (p[1] > 0.5) as usize == c
            })
            .count() as f64
            / 4.0
    };
    let opts = GbmOptions { rounds: 50, max_depth: 2, learning_rate: 0.1, min_samples_leaf: 1 };
    let gbm = fit_gbm(x.view(), &y, &opts, None).unwrap();
    assert_eq!(accuracy(&gbm), 1.0);
    let lin = fit_logistic(x.view(), &y, &LogisticOptions::default(), None).unwrap();
    assert!(accuracy(&lin) <= 0.75);
    // No half-plane labels all four points correctly.
    let mut best = 0;
    for a in 0..72 {
        let t = a as f64 * std::f64::consts::PI / 36.0;
        for b in -40..=40 {
            let off = b as f64 / 20.0;
            let hits = x
                .outer_iter()
                .zip(&y)
                .filter(|(r, &c)| ((t.cos() * r[0] + t.sin() * r[1] > off) as usize) == c)
                .count();
            best = best.max(hits);
        }
    }
    assert_eq!(best, 3);
}

#[test]
fn calibrating_a_calibrated_model_changes_little() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (w_true, b_true) = ([1.0, -0.5, 0.8], 0.2);
    let mut sample = |m: usize| {
        let x = Array2::from_shape_fn((m, 3), |_| normal.sample(&mut rng));
        let y: Vec<usize> = x
            .outer_iter()
            .map(|r| {
                let z: f64 = b_true + r.iter().zip(&w_true).map(|(a, b)| a * b).sum::<f64>();
                rng.gen_bool(1.0 / (1.0 + (-z).exp())) as usize
            })
            .collect();
        (x, y)
    };
    let (x_hold, y_hold) = sample(5000);
    let (x_test, y_test) = sample(20000);
    let exact = LinearModel {
        n_classes: 2,
        weights: Array2::from_shape_vec((1, 3), w_true.to_vec()).unwrap(),
        bias: Array1::from_vec(vec![b_true]),
        c: 1.0,
        class_weights: vec![1.0, 1.0],
        iterations: 0,
        converged: true,
    };
    let probs = |m: &dyn Classifier| -> Vec<Vec<f64>> {
        x_test.outer_iter().map(|r| m.predict_proba(&r.to_vec()).unwrap()).collect()
    };
    let before = cross_entropy(&y_test, &probs(&exact)).unwrap();
    let cal = CalibratedModel::fit(BaseModel::Linear(exact), x_hold.view(), &y_hold).unwrap();
    let after = cross_entropy(&y_test, &probs(&cal)).unwrap();
    assert!(after - before <= 1e-3, "{before} -> {after}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probabilities_form_simplices(seed in 0u64..500, k in 2usize..5) {
        let (x, y) = blobs(40, k, seed);
        let model = fit_logistic(x.view(), &y, &LogisticOptions::default(), None).unwrap();
        for row in x.outer_iter() {
            let p = model.predict_proba(&row.to_vec()).unwrap();
            prop_assert_eq!(p.len(), k);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn boosting_loss_never_rises(seed in 0u64..500, lr in 0.05f64..1.0, depth in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((60, 2), |_| rng.gen_range(-1.0..1.0));
        let y: Vec<usize> = (0..60).map(|_| rng.gen_bool(0.4) as usize).collect();
        let w: Vec<f64> = (0..60).map(|_| rng.gen_range(0.1..3.0)).collect();
        let opts = GbmOptions { rounds: 30, max_depth: depth, learning_rate: lr, min_samples_leaf: 1 };
        let m = fit_gbm(x.view(), &y, &opts, Some(&w)).unwrap();
        prop_assert!(m.loss_history.windows(2).all(|p| p[1] <= p[0]), "{:?}", m.loss_history);
    }

    #[test]
    fn calibrated_multiclass_outputs_are_simplices(seed in 0u64..200) {
        let (x, y) = blobs(150, 3, seed);
        let cal = calibrate_with_holdout(x.view(), &y, 0.3, seed, |xs, ys| {
            Ok(BaseModel::Linear(fit_logistic(xs, ys, &LogisticOptions::default(), None)?))
        })
        .unwrap();
        prop_assert!(cal.maps.iter().all(|m| m.a >= 0.0));
        for row in x.outer_iter() {
            let p = cal.predict_proba(&row.to_vec()).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
