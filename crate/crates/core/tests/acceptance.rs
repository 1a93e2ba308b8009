//! Exit-gate checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use stance_causal::causal::{
    ate_iptw, ate_matched, draw_users, estimate, iptw_weights, median, nnm_match, CiMode,
    EstimateReport, EstimationConfig, MatchResult, Method, StudyCorpus,
};
use stance_causal::classify::{
    fit_gbm, BaseModel, CalibratedModel, Classifier, GbmOptions, LinearModel, LogisticObjective,
};
use stance_causal::cohort::{assign_groups, select_population, Group};
use stance_causal::corpus::{Dataset, StateCode, Tweet};
use stance_causal::metrics::{cross_entropy, krippendorff_alpha, macro_f1, observed_agreement, roc_auc};
use stance_causal::pipeline::{run_all, RunConfig, Stage};
use stance_causal::stance::{sample_stance, tweet_rng};
use stance_causal::synth::{generate, policy_gradient_fixture, GeneratorSpec, SynthCorpus, TierEffects, TierMass};
use stance_causal::weaklabel::{train_personal_classifier, PersonalThresholds, SubjectivityLexicon, WeakLabelOptions};

// Tolerances.
const RECOVERY_TOL: f64 = 0.03;
const NAIVE_MISS: f64 = 0.05;
const RECOVERY_BUDGET_SECS: f64 = 300.0;
const NULL_MIN_COVERED: usize = 17;
const ASMD_AFTER_MAX: f64 = 0.1;
const ASMD_BEFORE_MIN: f64 = 0.3;
const ORDERING_MIN_RUNS: usize = 18;
const C4_NEAR_ZERO: f64 = 0.05;
const EXACT_TOL: f64 = 1e-12;
const GRAD_REL_TOL: f64 = 1e-6;
const WEAK_F1_MIN: f64 = 0.90;
const METRIC_TOL: f64 = 1e-9;
const FREQ_TOL: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn estimation_for(corpus: &SynthCorpus, n_sims: usize, methods: Vec<Method>) -> (StudyCorpus, EstimationConfig) {
    let spec = &corpus.spec;
    let study = StudyCorpus::from_tweets(&corpus.tweets, spec.legalization_date, true).unwrap();
    let mut cfg = EstimationConfig::new(spec.treatment_state.clone(), spec.legalization_date);
    cfg.study_end = spec.study_end;
    cfg.n_sims = n_sims;
    cfg.methods = methods;
    cfg.master_seed = spec.seed;
    (study, cfg)
}

fn confounded_spec() -> GeneratorSpec {
    GeneratorSpec {
        n_users: 5000,
        seed: 7,
        gamma: 1.5,
        tau: TierEffects::uniform(0.15),
        tier_mass: TierMass {
            t: 0.35,
            c1: 0.35,
            c2: 0.1,
            c3: 0.1,
            c4: 0.1,
        },
        ..GeneratorSpec::default()
    }
}

/// Mean over simulations of the raw T minus C1 difference in outcome
/// rates, using the same stance draws as the estimator.
fn naive_difference(study: &StudyCorpus, cfg: &EstimationConfig, corpus: &SynthCorpus, group: Group) -> Vec<f64> {
    let mut sums = vec![0.0; cfg.horizons.len()];
    for sim in 0..cfg.n_sims {
        let draws = draw_users(study, cfg, sim);
        let eligible = select_population(&draws, cfg.legalization_date);
        let units = assign_groups(
            &eligible,
            &cfg.treatment_state,
            cfg.legalization_date,
            &corpus.policy,
            &cfg.horizons,
        )
        .unwrap();
        for (k, s) in sums.iter_mut().enumerate() {
            let rate = |g: Group| {
                let ys: Vec<f64> = units
                    .iter()
                    .filter(|u| u.group == g)
                    .map(|u| u.outcomes[k] as u8 as f64)
                    .collect();
                ys.iter().sum::<f64>() / ys.len() as f64
            };
            *s += rate(Group::T) - rate(group);
        }
    }
    sums.iter().map(|s| s / cfg.n_sims as f64).collect()
}

struct Confounded {
    corpus: SynthCorpus,
    report: EstimateReport,
    naive: Vec<f64>,
    secs: f64,
}

fn confounded_run() -> Confounded {
    let start = Instant::now();
    let corpus = generate(&confounded_spec()).unwrap();
    let (study, cfg) = estimation_for(&corpus, 50, vec![Method::IptwLr]);
    let report = estimate(&study, &cfg, &corpus.policy).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let naive = naive_difference(&study, &cfg, &corpus, Group::C1);
    Confounded {
        corpus,
        report,
        naive,
        secs,
    }
}

fn c1_recovery(run: &Confounded) -> Outcome {
    let mut worst_err: f64 = 0.0;
    let mut min_miss = f64::INFINITY;
    let mut parts = Vec::new();
    for (k, n) in (1..=6u32).enumerate() {
        let truth = run.corpus.truth.get(Group::C1, n).unwrap().ate;
        let est = run.report.row(Method::IptwLr, Group::C1, n).and_then(|r| r.ate_mean);
        let Some(est) = est else {
            return outcome(false, format!("no IPTW-LR estimate at N={n}"));
        };
        worst_err = worst_err.max((est - truth).abs());
        min_miss = min_miss.min((run.naive[k] - truth).abs());
        parts.push(format!("N={n}: est {est:.4} truth {truth:.4} naive {:.4}", run.naive[k]));
    }
    let pass = worst_err <= RECOVERY_TOL && min_miss > NAIVE_MISS && run.secs <= RECOVERY_BUDGET_SECS;
    outcome(
        pass,
        format!(
            "max |IPTW-LR - truth| {worst_err:.4} (<= {RECOVERY_TOL}), min naive miss {min_miss:.4} (> {NAIVE_MISS}), {:.1}s; {}",
            run.secs,
            parts.join("; ")
        ),
    )
}

fn c2_null_coverage() -> Outcome {
    let mut covered = 0;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let spec = GeneratorSpec {
            n_users: 2000,
            seed: 1000 + seed,
            gamma: 0.0,
            tau: TierEffects::uniform(0.0),
            ..GeneratorSpec::default()
        };
        let corpus = generate(&spec).unwrap();
        let (study, mut cfg) = estimation_for(&corpus, 50, vec![Method::IptwLr]);
        cfg.horizons = vec![6];
        cfg.ci_mode = CiMode::StandardError;
        let report = estimate(&study, &cfg, &corpus.policy).unwrap();
        let row = report.row(Method::IptwLr, Group::C1, 6).unwrap();
        match (row.ci_lo, row.ci_hi) {
            (Some(lo), Some(hi)) if lo <= 0.0 && 0.0 <= hi => covered += 1,
            (lo, hi) => misses.push(format!("seed {}: [{lo:?}, {hi:?}]", spec.seed)),
        }
    }
    outcome(
        covered >= NULL_MIN_COVERED,
        format!("{covered}/20 standard-error intervals cover 0 (need >= {NULL_MIN_COVERED}) {}", misses.join(" ")),
    )
}

fn c3_balance(run: &Confounded) -> Outcome {
    let rows = run.report.balance_of(Method::IptwLr, Group::C1);
    let before: Vec<f64> = rows.iter().map(|r| r.asmd_before).collect();
    let after: Vec<f64> = rows.iter().map(|r| r.asmd_after).collect();
    let (Some(mb), Some(ma)) = (median(&before), median(&after)) else {
        return outcome(false, "no balance rows");
    };
    outcome(
        ma < ASMD_AFTER_MAX && mb > ASMD_BEFORE_MIN,
        format!("median ASMD before {mb:.4} (> {ASMD_BEFORE_MIN}), after {ma:.4} (< {ASMD_AFTER_MAX})"),
    )
}

fn c4_ordering() -> Outcome {
    let mut good = 0;
    let mut notes = Vec::new();
    for seed in 0..20u64 {
        let base = GeneratorSpec {
            n_users: 5000,
            seed: 2000 + seed,
            ..GeneratorSpec::default()
        };
        let corpus = policy_gradient_fixture(&base).unwrap();
        let (study, cfg) = estimation_for(&corpus, 50, vec![Method::IptwLr]);
        let report = estimate(&study, &cfg, &corpus.policy).unwrap();
        let at = |g: Group| report.row(Method::IptwLr, g, 6).and_then(|r| r.ate_mean);
        let ates: Vec<Option<f64>> = Group::CONTROLS.iter().map(|&g| at(g)).collect();
        let ok = match ates[..] {
            [Some(c1), Some(c2), Some(c3), Some(c4)] => c1 > c2 && c1 > c3 && c1 > c4 && c4.abs() <= C4_NEAR_ZERO,
            _ => false,
        };
        if ok {
            good += 1;
        } else {
            notes.push(format!("seed {}: {ates:.3?}", base.seed));
        }
    }
    outcome(
        good >= ORDERING_MIN_RUNS,
        format!(
            "{good}/20 runs with ATE(C1) largest and |ATE(C4)| <= {C4_NEAR_ZERO} at N=6 (need >= {ORDERING_MIN_RUNS}) {}",
            notes.join(" ")
        ),
    )
}

fn exhaustive_cosine(treated: &[Vec<f64>], controls: &[Vec<f64>]) -> Vec<usize> {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    treated
        .iter()
        .map(|t| {
            let mut best = (f64::INFINITY, 0);
            for (j, c) in controls.iter().enumerate() {
                let dot: f64 = t.iter().zip(c).map(|(a, b)| a * b).sum();
                let d = 1.0 - dot / (norm(t) * norm(c));
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

fn c5_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut agree = 0;
    for _ in 0..20 {
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..8).map(|_| normal.sample(&mut rng)).collect()).collect()
        };
        let treated = draw(50);
        let controls = draw(200);
        let m = nnm_match(&treated, &controls).unwrap();
        let got: Vec<usize> = m.controls().collect();
        if got == exhaustive_cosine(&treated, &controls) {
            agree += 1;
        }
    }

    // Treated e = (0.8, 0.4), y = (1, 0): weights 5/4 and 5/2, mean 1/3.
    // Control e = (0.5, 0.2), y = (1, 0): weights 2 and 5/4, mean 8/13.
    let t = [true, true, false, false];
    let w = iptw_weights(&[0.8, 0.4, 0.5, 0.2], &t, (0.05, 0.95)).unwrap();
    let iptw = ate_iptw(&t, &[true, false, true, false], &w).unwrap();
    let iptw_err = (iptw - (-11.0 / 39.0)).abs();

    // Pairs (0 -> 1), (1 -> 0): differences 1 - 1 and 1 - 0.
    let m = MatchResult {
        method: "NNM".into(),
        pairs: vec![(0, 1), (1, 0)],
        distances: vec![0.0, 0.0],
    };
    let matched = ate_matched(&m, &[true, true], &[false, true]).unwrap();

    outcome(
        agree == 20 && iptw_err <= EXACT_TOL && matched == 0.5,
        format!("nnm {agree}/20 instances agree; ate_iptw error {iptw_err:.2e} vs -11/39; ate_matched {matched} vs 1/2"),
    )
}

fn c6_constant_propensity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(4..200);
        let mut t: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        t[0] = true;
        t[1] = false;
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let w = iptw_weights(&vec![0.5; n], &t, (0.05, 0.95)).unwrap();
        let got = ate_iptw(&t, &y, &w).unwrap();
        let mean = |flag: bool| {
            let v: Vec<f64> = (0..n).filter(|&i| t[i] == flag).map(|i| y[i] as u8 as f64).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        worst = worst.max((got - (mean(true) - mean(false))).abs());
    }
    outcome(worst <= EXACT_TOL, format!("max |IPTW - difference of means| {worst:.2e} over 50 draws"))
}

fn c7_numerical() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for k in [2usize, 3] {
        let (m, d) = (60, 4);
        let x = Array2::from_shape_fn((m, d), |_| normal.sample(&mut rng));
        let y: Vec<usize> = (0..m).map(|i| i % k).collect();
        let sw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
        let obj = LogisticObjective::new(x.view(), &y, k, 0.7, sw);
        let params: Vec<f64> = (0..obj.n_params()).map(|_| normal.sample(&mut rng)).collect();
        let (_, grad) = obj.value_and_gradient(&params);
        let h = 1e-5;
        for j in 0..params.len() {
            let mut p = params.clone();
            p[j] += h;
            let up = obj.value(&p);
            p[j] -= 2.0 * h;
            let down = obj.value(&p);
            let fd = (up - down) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }

    let m = 400;
    let x = Array2::from_shape_fn((m, 3), |_| normal.sample(&mut rng));
    let y: Vec<usize> = x
        .outer_iter()
        .map(|r| ((r[0] * r[1] + 0.5 * normal.sample(&mut rng)) > 0.0) as usize)
        .collect();
    let gbm = fit_gbm(x.view(), &y, &GbmOptions::default(), None).unwrap();
    let monotone = gbm.loss_history.windows(2).all(|w| w[1] <= w[0]);
    let rounds = gbm.loss_history.len() - 1;
    outcome(
        worst < GRAD_REL_TOL && monotone && rounds == 100,
        format!(
            "max gradient relative error {worst:.2e}; GBM loss {:.4} -> {:.4} over {rounds} rounds, monotone: {monotone}",
            gbm.loss_history[0],
            gbm.loss_history[rounds]
        ),
    )
}

fn c8_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let w_true = [1.0, -0.5, 0.8];
    let b_true = 0.2;
    let temperature = 4.0;
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
    let (x_hold, y_hold) = sample(1000);
    let (x_test, y_test) = sample(5000);
    // An overconfident model: the true logits scaled up.
    let distorted = LinearModel {
        n_classes: 2,
        weights: Array2::from_shape_vec((1, 3), w_true.iter().map(|w| w * temperature).collect()).unwrap(),
        bias: Array1::from_vec(vec![b_true * temperature]),
        c: 1.0,
        class_weights: vec![1.0, 1.0],
        iterations: 0,
        converged: true,
    };
    let probs = |m: &dyn Classifier| -> Vec<Vec<f64>> {
        x_test.outer_iter().map(|r| m.predict_proba(&r.to_vec()).unwrap()).collect()
    };
    let before = cross_entropy(&y_test, &probs(&distorted)).unwrap();
    let calibrated = CalibratedModel::fit(BaseModel::Linear(distorted), x_hold.view(), &y_hold).unwrap();
    let after = cross_entropy(&y_test, &probs(&calibrated)).unwrap();
    outcome(
        after < before,
        format!("held-out cross-entropy {before:.4} -> {after:.4}"),
    )
}

/// 200 tweets whose LF cues follow the gold label, each cue flipped
/// independently with probability 0.1.
fn weak_fixture() -> (Vec<Tweet>, HashMap<String, f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let date = NaiveDate::from_ymd_opt(2018, 3, 1).unwrap();
    let mut tweets = Vec::new();
    let mut scores = HashMap::new();
    let mut gold = Vec::new();
    for i in 0..200 {
        let personal = rng.gen_bool(0.5);
        let mut cue = |on: bool| if rng.gen_bool(0.1) { !on } else { on };
        let url = cue(!personal);
        let pronoun = cue(personal);
        let subjective = cue(personal);
        let external = cue(personal);
        let mut text = String::from("cannabis edibles pack");
        if pronoun {
            text = format!("i {text}");
        }
        if subjective {
            text.push_str(" amazing awesome best");
        }
        if url {
            text.push_str(" https://shop.example/item");
        }
        let id = format!("t{i:04}");
        scores.insert(id.clone(), if external { 0.8 } else { 0.05 });
        let sign = if personal { 1.0 } else { -1.0 };
        tweets.push(Tweet {
            id,
            user_id: format!("u{i:04}"),
            date,
            text,
            dataset: Dataset::Cannabis,
            is_retweet: false,
            lang: "en".into(),
            location: "Denver, CO".into(),
            state: StateCode::new("CO").unwrap(),
            embedding: Some((0..5).map(|_| sign + normal.sample(&mut rng)).collect()),
            p_personal: None,
            stance: None,
        });
        gold.push(personal as usize);
    }
    (tweets, scores, gold)
}

fn c9_weak_supervision() -> Outcome {
    let (tweets, scores, gold) = weak_fixture();
    let lexicon = SubjectivityLexicon::builtin();
    assert_eq!(lexicon.score("i cannabis edibles pack https://shop.example/item"), 0);
    let out = train_personal_classifier(&tweets, &lexicon, Some(&scores), &WeakLabelOptions::default(), 9).unwrap();
    let cut = PersonalThresholds::default().for_dataset(Dataset::Cannabis);
    let pred: Vec<usize> = tweets
        .iter()
        .map(|t| (out.classifier.predict_proba(t.embedding.as_ref().unwrap()).unwrap()[1] >= cut) as usize)
        .collect();
    let f1 = macro_f1(2, &gold, &pred).unwrap();
    outcome(f1 >= WEAK_F1_MIN, format!("macro-F1 {f1:.4} (>= {WEAK_F1_MIN})"))
}

fn c10_metrics() -> Outcome {
    // Units (a,a), (a,b), (b,b), (b,b): coincidences o_aa = 2, o_ab = o_ba = 1,
    // o_bb = 4; n_a = 3, n_b = 5, n = 8. D_o = 2/8, D_e = 2*3*5/(8*7), so
    // alpha = 1 - (1/4)/(15/28) = 8/15.
    let units = vec![
        vec![Some('a'), Some('a')],
        vec![Some('a'), Some('b')],
        vec![Some('b'), Some('b')],
        vec![Some('b'), Some('b')],
    ];
    let alpha = krippendorff_alpha(&units).unwrap();
    let alpha_err = (alpha - 8.0 / 15.0).abs();

    // Positives 0.35, 0.8 against negatives 0.1, 0.4: three of four pairs
    // ordered correctly.
    let auc = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
    let auc_err = (auc - 0.75).abs();

    // 98 units agree on "no", 2 split: agreement 98%, alpha = 1 - 0.02 /
    // (2*2*198/(200*199)) = -1/198.
    let mut skewed = vec![vec![Some("no"), Some("no")]; 98];
    skewed.extend(vec![vec![Some("no"), Some("yes")]; 2]);
    let skew_alpha = krippendorff_alpha(&skewed).unwrap();
    let skew_agree = observed_agreement(&skewed).unwrap();
    let skew_err = (skew_alpha - (-1.0 / 198.0)).abs();

    outcome(
        alpha_err <= METRIC_TOL && auc_err <= METRIC_TOL && skew_err <= METRIC_TOL && (skew_agree - 98.0).abs() <= METRIC_TOL && skew_alpha <= 0.0,
        format!(
            "alpha {alpha:.12} vs 8/15; auc {auc} vs 0.75; skewed agreement {skew_agree:.3}% with alpha {skew_alpha:.6} vs -1/198"
        ),
    )
}

fn report_bytes(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        out.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path).unwrap(),
        );
    }
    out
}

fn c11_determinism() -> Outcome {
    let spec = GeneratorSpec {
        n_users: 600,
        seed: 11,
        ..GeneratorSpec::default()
    };
    let data = tempfile::tempdir().unwrap();
    let corpus = generate(&spec).unwrap();
    corpus.write_files(data.path()).unwrap();
    let mut cfg = RunConfig::for_synth(&spec);
    cfg.base_dir = data.path().to_path_buf();
    cfg.estimate.n_sims = 5;
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let out = tempfile::tempdir().unwrap();
            run_all(&cfg, out.path()).unwrap();
            let bytes = report_bytes(&Stage::Report.dir(out.path()));
            (out, bytes)
        })
        .collect();
    let identical = runs[0].1 == runs[1].1 && !runs[0].1.is_empty();

    let p = [0.2, 0.5, 0.3];
    let draws = 30_000;
    let mut counts = [0usize; 3];
    for sim in 0..draws {
        let mut rng = tweet_rng(11, sim, "t0000042");
        counts[sample_stance(&p, &mut rng).index()] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    let worst = freq.iter().zip(&p).map(|(f, q)| (f - q).abs()).fold(0.0, f64::max);
    outcome(
        identical && worst <= FREQ_TOL,
        format!(
            "{} report files byte-identical across runs: {identical}; stance frequencies {freq:.4?} vs {p:?}, max gap {worst:.4}",
            runs[0].1.len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let confounded = confounded_run();
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("confounded recovery", Box::new(|| c1_recovery(&confounded))),
        ("null coverage", Box::new(c2_null_coverage)),
        ("balance", Box::new(|| c3_balance(&confounded))),
        ("policy ordering", Box::new(c4_ordering)),
        ("oracle equivalence", Box::new(c5_oracles)),
        ("constant propensity", Box::new(c6_constant_propensity)),
        ("numerical", Box::new(c7_numerical)),
        ("calibration", Box::new(c8_calibration)),
        ("weak supervision", Box::new(c9_weak_supervision)),
        ("metrics", Box::new(c10_metrics)),
        ("determinism", Box::new(c11_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<20} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", checks.len() - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
