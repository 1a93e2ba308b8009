use std::collections::BTreeMap;

use proptest::prelude::*;

use stance_causal::metrics::{
    cross_entropy, evaluate_classifier, krippendorff_alpha, load_annotations, macro_f1, observed_agreement, roc_auc,
};

/// Nominal alpha from the coincidence matrix, written independently.
fn alpha_oracle(units: &[Vec<Option<u8>>]) -> Option<f64> {
    let mut o: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    for unit in units {
        let vals: Vec<u8> = unit.iter().flatten().copied().collect();
        let m = vals.len();
        if m < 2 {
            continue;
        }
        for (i, &a) in vals.iter().enumerate() {
            for (j, &b) in vals.iter().enumerate() {
                if i != j {
                    *o.entry((a, b)).or_default() += 1.0 / (m - 1) as f64;
                }
            }
        }
    }
    let mut marg: BTreeMap<u8, f64> = BTreeMap::new();
    for (&(a, _), &v) in &o {
        *marg.entry(a).or_default() += v;
    }
    let n: f64 = marg.values().sum();
    if n <= 1.0 {
        return None;
    }
    let d_o: f64 = o.iter().filter(|((a, b), _)| a != b).map(|(_, v)| v).sum::<f64>() / n;
    let mut d_e = 0.0;
    for (&a, &na) in &marg {
        for (&b, &nb) in &marg {
            if a != b {
                d_e += na * nb;
            }
        }
    }
    d_e /= n * (n - 1.0);
    (d_e > 0.0).then(|| 1.0 - d_o / d_e)
}

fn grid() -> impl Strategy<Value = Vec<Vec<Option<u8>>>> {
    prop::collection::vec(prop::collection::vec(prop::option::weighted(0.85, 0u8..3), 3), 2..40)
}

proptest! {
    #[test]
    fn alpha_matches_coincidence_oracle(units in grid()) {
        if let Some(want) = alpha_oracle(&units) {
            let got = krippendorff_alpha(&units).unwrap();
            prop_assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
        }
    }

    #[test]
    fn alpha_ignores_label_names(units in grid()) {
        let renamed: Vec<Vec<Option<char>>> = units
            .iter()
            .map(|u| u.iter().map(|v| v.map(|x| ['z', 'a', 'm'][x as usize])).collect())
            .collect();
        if let (Ok(a), Ok(b)) = (krippendorff_alpha(&units), krippendorff_alpha(&renamed)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_reverses_and_ignores_monotone_maps(
        rows in prop::collection::vec((0u32..1000, any::<bool>()), 2..60),
    ) {
        let scores: Vec<f64> = rows.iter().map(|r| f64::from(r.0) / 1000.0).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let Some(auc) = roc_auc(&scores, &labels) else { return Ok(()); };
        prop_assert!((0.0..=1.0).contains(&auc));
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((roc_auc(&neg, &labels).unwrap() - (1.0 - auc)).abs() < 1e-12);
        let cubed: Vec<f64> = scores.iter().map(|s| (s - 0.3).powi(3) * 7.0).collect();
        prop_assert!((roc_auc(&cubed, &labels).unwrap() - auc).abs() < 1e-12);
        // Pairwise definition with half credit for ties.
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        prop_assert!((auc - wins / pairs).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_one(y in prop::collection::vec(0usize..3, 1..50)) {
        prop_assert_eq!(macro_f1(3, &y, &y).unwrap(), 1.0);
        let probs: Vec<Vec<f64>> = y.iter().map(|&c| (0..3).map(|k| (k == c) as u8 as f64).collect()).collect();
        prop_assert!(cross_entropy(&y, &probs).unwrap() < 1e-9);
    }
}

#[test]
fn macro_f1_hand_example() {
    // Class 0: tp 2, fp 1, fn 0 -> 0.8. Class 1: tp 1, fp 0, fn 1 -> 2/3.
    let f1 = macro_f1(2, &[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap();
    assert!((f1 - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
}

#[test]
fn evaluation_bundle_is_consistent() {
    let y = [0, 1, 2, 1, 0, 2];
    let p: Vec<Vec<f64>> = vec![
        vec![0.7, 0.2, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.2, 0.2, 0.6],
        vec![0.3, 0.4, 0.3],
        vec![0.5, 0.25, 0.25],
        vec![0.1, 0.3, 0.6],
    ];
    let e = evaluate_classifier(&y, &p).unwrap();
    assert_eq!(e.macro_f1, 1.0);
    let ce = -(0.7f64.ln() + 0.8f64.ln() + 0.6f64.ln() + 0.4f64.ln() + 0.5f64.ln() + 0.6f64.ln()) / 6.0;
    assert!((e.cross_entropy - ce).abs() < 1e-12);
    assert_eq!(e.confusion.total(), 6);
}

#[test]
fn skewed_annotations_from_csv() {
    let mut csv = String::from("unit_id,annotator_id,label\n");
    for i in 0..100 {
        csv.push_str(&format!("u{i},a,no\n"));
        csv.push_str(&format!("u{i},b,{}\n", if i < 2 { "yes" } else { "no" }));
    }
    let table = load_annotations(csv.as_bytes()).unwrap();
    assert_eq!(table.annotators, vec!["a", "b"]);
    let agreement = observed_agreement(&table.labels).unwrap();
    let alpha = krippendorff_alpha(&table.labels).unwrap();
    assert!((agreement - 98.0).abs() < 1e-9);
    assert!((alpha + 1.0 / 198.0).abs() < 1e-12);
}

#[test]
fn ten_unit_fixture_by_hand() {
    // Coincidences: xx 10, yy 4, xy 2 + 2, yz 1 + 1; n = 20.
    // D_o = 6/20, D_e = 2 (12*7 + 12*1 + 7*1) / (20*19) = 206/380.
    let pair = |a: char, b: char| vec![Some(a), Some(b)];
    let mut units = vec![pair('x', 'x'); 5];
    units.extend(vec![pair('y', 'y'); 2]);
    units.extend(vec![pair('x', 'y'); 2]);
    units.push(pair('y', 'z'));
    let alpha = krippendorff_alpha(&units).unwrap();
    assert!((alpha - 46.0 / 103.0).abs() < 1e-12, "{alpha}");
    assert!((observed_agreement(&units).unwrap() - 70.0).abs() < 1e-9);
}
