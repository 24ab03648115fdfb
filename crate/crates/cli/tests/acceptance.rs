//! Release gate: end-to-end checks of the whole stack against independent
//! oracles, plus determinism checks driven through the installed binary.
//! Every check is offline and seeded.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use domwatch_core::eval::{
    compute_metrics, resample, run_experiments, split, ExperimentConfig, RatioSpec,
    ResampleConfig, ResampleMethod, SplitConfig, SplitIndices, TrainSeeds,
};
use domwatch_core::features::{
    build_reputation, f10_entropy, f5_dot_count, f6_hyphen_count, f7_vowel_count,
    f8_digit_fraction, f9_unique_alnum, featurize, whois_lifetimes, FeatureMask, FeatureRow,
    LifetimeMode,
};
use domwatch_core::ingest::Dataset;
use domwatch_core::ml::forest::{ForestConfig, MaxFeatures};
use domwatch_core::ml::knn::KnnConfig;
use domwatch_core::ml::linear::{
    logistic_gradient, logistic_loss, svm_objective, svm_subgradient,
};
use domwatch_core::ml::tree::{best_split, TreeConfig};
use domwatch_core::ml::{
    feature_importance, predict, train_decision_tree, train_knn, train_linear_svm,
    train_logistic_regression, train_random_forest, vote_ensemble, ModelKind,
};
use domwatch_core::model::{Label, WhoisRecord};
use domwatch_core::synth::{generate, write_ingest_files, SynthConfig};
use domwatch_core::wordseg::{segment, Lexicon};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coin(rng: &mut ChaCha8Rng, p_malicious: f64) -> Label {
    if rng.random_bool(p_malicious) {
        Label::Malicious
    } else {
        Label::Benign
    }
}

#[test]
fn gate_01_metrics_match_a_counting_oracle() {
    let start = Instant::now();
    let mut rng = rng(101);
    for _ in 0..1_000 {
        let len = rng.random_range(1..=500);
        let bias = rng.random_range(0.05..0.95);
        let predictions: Vec<Label> = (0..len).map(|_| coin(&mut rng, bias)).collect();
        let truth: Vec<Label> = (0..len).map(|_| coin(&mut rng, bias)).collect();
        let got = compute_metrics(&predictions, &truth).unwrap();

        let (mut tp, mut tn, mut fp, mut missed) = (0usize, 0usize, 0usize, 0usize);
        for (p, t) in predictions.iter().zip(&truth) {
            match (p, t) {
                (Label::Malicious, Label::Malicious) => tp += 1,
                (Label::Benign, Label::Benign) => tn += 1,
                (Label::Malicious, Label::Benign) => fp += 1,
                (Label::Benign, Label::Malicious) => missed += 1,
            }
        }
        assert_eq!(
            (got.confusion.tp, got.confusion.tn, got.confusion.fp, got.confusion.r#fn),
            (tp, tn, fp, missed)
        );
        let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        assert!((got.acc - rate(tp + tn, len)).abs() <= 1e-12);
        assert!((got.fpr - rate(fp, fp + tn)).abs() <= 1e-12);
        assert!((got.fnr - rate(missed, missed + tp)).abs() <= 1e-12);
        assert!((got.f1 - rate(2 * tp, 2 * tp + fp + missed)).abs() <= 1e-12);
    }
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn gate_02_lexical_features_match_hand_derived_fixtures() {
    let start = Instant::now();
    // (hostname, dots, hyphens, vowels, digit fraction, distinct alphanumerics)
    let fixtures: [(&str, usize, usize, usize, f64, usize); 6] = [
        ("any.com", 1, 0, 2, 0.0, 6),
        ("example.com", 1, 0, 4, 0.0, 8),
        ("aeiou.com", 1, 0, 6, 0.0, 7),
        ("covid19.com", 1, 0, 3, 0.2, 8),
        ("covid-masks-sale.top", 1, 2, 6, 0.0, 13),
        ("a-b1.cc", 1, 1, 1, 0.2, 4),
    ];
    for (s, dots, hyphens, vowels, digit_fraction, distinct) in fixtures {
        assert_eq!(f5_dot_count(s), dots, "{s}");
        assert_eq!(f6_hyphen_count(s), hyphens, "{s}");
        assert_eq!(f7_vowel_count(s), vowels, "{s}");
        assert_eq!(f8_digit_fraction(s), digit_fraction, "{s}");
        assert_eq!(f9_unique_alnum(s), distinct, "{s}");
    }
    assert_eq!(f10_entropy("aaaa"), 0.0);
    assert_eq!(f10_entropy("ab"), 1.0);
    assert_eq!(f10_entropy("abcd"), 2.0);
    assert_eq!(f10_entropy("aabb"), 1.0);
    assert!((f10_entropy("any.com") - 7.0f64.log2()).abs() <= 1e-12);

    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz0123456789.-".chars().collect();
    let mut rng = rng(102);
    for _ in 0..10_000 {
        let len = rng.random_range(1..=40);
        let s: String = (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        let h = f10_entropy(&s);
        assert!(h >= 0.0, "{s}");
        assert!(h <= (len as f64).log2() + 1e-12, "{s}");
        let mut chars: Vec<char> = s.chars().collect();
        chars.shuffle(&mut rng);
        let shuffled: String = chars.into_iter().collect();
        assert!((h - f10_entropy(&shuffled)).abs() <= 1e-12, "{s} vs {shuffled}");
        let uniform: String = std::iter::repeat_n(s.chars().next().unwrap(), len).collect();
        assert_eq!(f10_entropy(&uniform), 0.0);
    }
    assert!(start.elapsed() < Duration::from_secs(5));
}

// Era-based civil-calendar day count, written independently of any date
// library (Gregorian, days since 1970-01-01).
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

#[test]
fn gate_03_lifetime_days_match_calendar_arithmetic() {
    let mut rng = rng(103);
    let random_date = |rng: &mut ChaCha8Rng| {
        let y = rng.random_range(1990..=2030);
        let m = rng.random_range(1..=12u32);
        let d = rng.random_range(1..=28u32);
        (
            NaiveDate::from_ymd_opt(y, m, d).unwrap(),
            days_from_civil(y as i64, m as i64, d as i64),
        )
    };
    for _ in 0..1_000 {
        let mut a = random_date(&mut rng);
        let mut reference = random_date(&mut rng);
        if a.1 > reference.1 {
            std::mem::swap(&mut a, &mut reference);
        }
        let mut updated = random_date(&mut rng);
        if updated.1 > reference.1 {
            updated = a;
        }
        let expiration = random_date(&mut rng);

        let whois = WhoisRecord {
            registrar_name: Some("Any Registrar".to_string()),
            creation_date: Some(a.0),
            expiration_date: Some(expiration.0),
            updated_date: Some(updated.0),
        };
        let got = whois_lifetimes(&whois, reference.0, LifetimeMode::Strict).unwrap();
        assert_eq!(got.days_since_creation, (reference.1 - a.1) as f64);
        assert_eq!(got.days_to_expiration, (expiration.1 - reference.1) as f64);
        assert_eq!(got.days_since_update, (reference.1 - updated.1) as f64);
        assert!(!got.clamped);
    }
}

#[test]
fn gate_04_segmentation_cost_equals_exhaustive_minimum() {
    let start = Instant::now();
    let words = [
        "the", "of", "and", "covid", "virus", "help", "fund", "shop", "care", "a", "in", "test",
        "mask", "home", "work", "data", "line", "inter", "nation", "international",
    ];
    let lexicon = Lexicon::from_words(&words).unwrap();
    assert_eq!(lexicon.len(), 20);
    // every split of a string this short stays inside the DP window
    assert!(lexicon.max_word_len() >= 12);

    let piece_cost = |piece: &str| {
        lexicon
            .word_cost(piece)
            .unwrap_or_else(|| lexicon.unknown_cost(piece.len()))
    };
    // brute force over all 2^(len-1) cut patterns
    let exhaustive_min = |s: &str| {
        let chars: Vec<char> = s.chars().collect();
        let n = chars.len();
        let mut best = f64::INFINITY;
        for cuts in 0..(1u32 << (n - 1)) {
            let mut cost = 0.0;
            let mut from = 0;
            for i in 0..n {
                if i == n - 1 || cuts >> i & 1 == 1 {
                    let piece: String = chars[from..=i].iter().collect();
                    cost += piece_cost(&piece);
                    from = i + 1;
                }
            }
            if cost < best {
                best = cost;
            }
        }
        best
    };

    // letters weighted toward the lexicon so the DP faces real choices
    let pool: Vec<char> = words
        .iter()
        .flat_map(|w| w.chars())
        .chain("abcdefghijklmnopqrstuvwxyz".chars())
        .collect();
    let mut rng = rng(104);
    for _ in 0..500 {
        let len = rng.random_range(1..=12);
        let s: String = (0..len)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect();
        let got = segment(&s, &lexicon);
        assert_eq!(got.pieces.concat(), s);
        let want = exhaustive_min(&s);
        assert!(
            (got.total_cost - want).abs() <= 1e-9,
            "{s}: dp {} vs exhaustive {want}",
            got.total_cost
        );
    }
    assert!(start.elapsed() < Duration::from_secs(30));
}

fn entropy2(malicious: usize, benign: usize) -> f64 {
    let total = malicious + benign;
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let mut h = 0.0;
    for count in [malicious, benign] {
        if count == 0 {
            continue;
        }
        let p = count as f64 / total;
        h -= p * p.log2();
    }
    h
}

// Every (feature, midpoint) candidate scored directly; first strict maximum
// wins, scanning features then thresholds in ascending order.
fn oracle_root_split(matrix: &[Vec<f64>], labels: &[Label]) -> Option<(usize, f64, f64)> {
    let n = matrix.len();
    let (mal, ben) = count_labels(labels);
    let parent = entropy2(mal, ben);
    let mut best: Option<(usize, f64, f64)> = None;
    for feature in 0..matrix[0].len() {
        let mut vals: Vec<f64> = matrix.iter().map(|r| r[feature]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let (mut lm, mut lb, mut rm, mut rb) = (0usize, 0usize, 0usize, 0usize);
            for (row, label) in matrix.iter().zip(labels) {
                match (row[feature] <= threshold, label) {
                    (true, Label::Malicious) => lm += 1,
                    (true, Label::Benign) => lb += 1,
                    (false, Label::Malicious) => rm += 1,
                    (false, Label::Benign) => rb += 1,
                }
            }
            let ln = lm + lb;
            let rn = rm + rb;
            let weighted = ln as f64 / n as f64 * entropy2(lm, lb)
                + rn as f64 / n as f64 * entropy2(rm, rb);
            let gain = parent - weighted;
            if best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((feature, threshold, gain));
            }
        }
    }
    best
}

fn count_labels(labels: &[Label]) -> (usize, usize) {
    let mal = labels.iter().filter(|l| **l == Label::Malicious).count();
    (mal, labels.len() - mal)
}

#[test]
fn gate_05_root_split_and_single_tree_forest_match_oracles() {
    let mut rng = rng(105);
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let f = rng.random_range(1..=3);
        // small value grid so equal-gain ties and constant columns show up
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.random_range(0..4) as f64).collect())
            .collect();
        let labels: Vec<Label> = (0..n).map(|_| coin(&mut rng, 0.5)).collect();
        let rows: Vec<usize> = (0..n).collect();
        let features: Vec<usize> = (0..f).collect();

        let got = best_split(&matrix, &labels, &rows, &features);
        let want = oracle_root_split(&matrix, &labels);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some((feature, threshold, gain))) => {
                assert_eq!(g.feature, feature);
                assert_eq!(g.threshold, threshold);
                assert!((g.gain - gain).abs() <= 1e-12);
            }
            (got, want) => panic!("split disagreement: {got:?} vs {want:?}"),
        }
    }

    let mask = FeatureMask::from_names(&["f5", "f7", "f9"]).unwrap();
    for _ in 0..50 {
        let n = rng.random_range(20..=60);
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<Label> = matrix
            .iter()
            .map(|r| {
                if r[0] + r[1] > 0.0 {
                    Label::Malicious
                } else {
                    Label::Benign
                }
            })
            .collect();
        let tree =
            train_decision_tree(&matrix, &labels, mask.clone(), TreeConfig::default()).unwrap();
        let forest_cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            min_samples_split: 2,
            seed: rng.random(),
        };
        let forest = train_random_forest(&matrix, &labels, mask.clone(), forest_cfg).unwrap();

        let mut queries = matrix.clone();
        queries.extend((0..20).map(|_| {
            (0..3)
                .map(|_| rng.random_range(-2.5..2.5))
                .collect::<Vec<f64>>()
        }));
        assert_eq!(
            predict(&tree, &queries).unwrap(),
            predict(&forest, &queries).unwrap()
        );
    }
}

#[test]
fn gate_06_knn_matches_brute_force_search() {
    let mut rng = rng(106);
    for _ in 0..100 {
        let n = rng.random_range(10..=200);
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..11).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let labels: Vec<Label> = (0..n).map(|_| coin(&mut rng, 0.5)).collect();
        let cfg = KnnConfig::default();
        let model = train_knn(&matrix, &labels, FeatureMask::all(), cfg).unwrap();

        // the oracle standardizes for itself with the same population stats
        let cols = 11;
        let mut means = vec![0.0; cols];
        for row in &matrix {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut vars = vec![0.0; cols];
        for row in &matrix {
            for ((v, x), m) in vars.iter_mut().zip(row).zip(&means) {
                let d = x - m;
                *v += d * d;
            }
        }
        let stds: Vec<f64> = vars.into_iter().map(|v| (v / n as f64).sqrt()).collect();
        let scale = |row: &[f64]| -> Vec<f64> {
            row.iter()
                .zip(means.iter().zip(&stds))
                .map(|(x, (m, s))| if *s == 0.0 { 0.0 } else { (x - m) / s })
                .collect()
        };
        let scaled_train: Vec<Vec<f64>> = matrix.iter().map(|r| scale(r)).collect();

        let mut queries: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..11).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        queries.push(matrix[0].clone());
        let got = predict(&model, &queries).unwrap();

        for (query, prediction) in queries.iter().zip(got) {
            let sq = scale(query);
            let mut dists: Vec<(f64, usize)> = scaled_train
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let d = t
                        .iter()
                        .zip(&sq)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt();
                    (d, i)
                })
                .collect();
            dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mal = dists[..cfg.k]
                .iter()
                .filter(|(_, i)| labels[*i] == Label::Malicious)
                .count();
            let want = if 2 * mal >= cfg.k {
                Label::Malicious
            } else {
                Label::Benign
            };
            assert_eq!(prediction, want);
        }
    }
}

#[test]
fn gate_07_gradients_match_central_differences() {
    let close = |analytic: f64, numeric: f64| {
        (analytic - numeric).abs() <= 1e-5 * analytic.abs().max(1.0)
    };
    let mut rng = rng(107);

    for _ in 0..100 {
        let f = rng.random_range(1..=6);
        let n = rng.random_range(3..=30);
        let w: Vec<f64> = (0..f).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: f64 = rng.random_range(-2.0..2.0);
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let y01: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
            .collect();
        let lambda = [0.0, 1e-4, 1e-2][rng.random_range(0..3)];

        let (grad_w, grad_b) = logistic_gradient(&w, b, &matrix, &y01, lambda);
        let h = 1e-5;
        for j in 0..f {
            let mut up = w.clone();
            let mut down = w.clone();
            up[j] += h;
            down[j] -= h;
            let numeric = (logistic_loss(&up, b, &matrix, &y01, lambda)
                - logistic_loss(&down, b, &matrix, &y01, lambda))
                / (2.0 * h);
            assert!(close(grad_w[j], numeric), "w[{j}]: {} vs {numeric}", grad_w[j]);
        }
        let numeric = (logistic_loss(&w, b + h, &matrix, &y01, lambda)
            - logistic_loss(&w, b - h, &matrix, &y01, lambda))
            / (2.0 * h);
        assert!(close(grad_b, numeric), "b: {grad_b} vs {numeric}");
    }

    let mut checked = 0;
    while checked < 100 {
        let f = rng.random_range(1..=6);
        let n = rng.random_range(3..=30);
        let w: Vec<f64> = (0..f).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: f64 = rng.random_range(-2.0..2.0);
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let ypm: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let lambda = [0.0, 1e-4, 1e-2][rng.random_range(0..3)];

        // the hinge objective is only non-differentiable at margin 1; stay off it
        let near_kink = matrix.iter().zip(&ypm).any(|(row, y)| {
            let z: f64 = w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>() + b;
            (1.0 - y * z).abs() <= 1e-2
        });
        if near_kink {
            continue;
        }
        checked += 1;

        let (grad_w, grad_b) = svm_subgradient(&w, b, &matrix, &ypm, lambda);
        let h = 1e-4;
        for j in 0..f {
            let mut up = w.clone();
            let mut down = w.clone();
            up[j] += h;
            down[j] -= h;
            let numeric = (svm_objective(&up, b, &matrix, &ypm, lambda)
                - svm_objective(&down, b, &matrix, &ypm, lambda))
                / (2.0 * h);
            assert!(close(grad_w[j], numeric), "w[{j}]: {} vs {numeric}", grad_w[j]);
        }
        let numeric = (svm_objective(&w, b + h, &matrix, &ypm, lambda)
            - svm_objective(&w, b - h, &matrix, &ypm, lambda))
            / (2.0 * h);
        assert!(close(grad_b, numeric), "b: {grad_b} vs {numeric}");
    }
}

#[test]
fn gate_08_synthetic_corpus_end_to_end() {
    let start = Instant::now();
    let cfg = SynthConfig {
        seed: 8,
        ..SynthConfig::default()
    };
    let records = generate(&cfg);
    assert_eq!(records.len(), 5_000);
    let (dataset, _) = Dataset::from_records(records, cfg.reference_date);
    assert_eq!(dataset.len(), 5_000);

    let rep = build_reputation(&dataset).unwrap();
    let rows: Vec<FeatureRow> = dataset
        .records
        .iter()
        .map(|r| {
            let featurized = featurize(r, &rep, cfg.reference_date, LifetimeMode::Strict).unwrap();
            FeatureRow {
                domain: r.domain.canonical().to_string(),
                vector: featurized.vector,
            }
        })
        .collect();

    let reports = run_experiments(
        &rows,
        &ExperimentConfig {
            seed: 8,
            test_fraction: 0.2,
            method: ResampleMethod::Oversample,
            ratio: RatioSpec::new(1.67, 1.0),
        },
    )
    .unwrap();
    let outcome = |experiment: &str, kind: ModelKind| {
        reports
            .iter()
            .find(|r| r.experiment == experiment && r.classifier == kind)
            .unwrap_or_else(|| panic!("missing row {experiment}/{kind}"))
            .outcome
    };

    let forest = outcome("exp3", ModelKind::RandomForest);
    assert!(forest.acc >= 0.95, "forest accuracy {}", forest.acc);
    assert!(forest.f1 >= 0.95, "forest f1 {}", forest.f1);

    // registration features must help every classifier, not just the forest
    for kind in ModelKind::MEMBERS.into_iter().chain([ModelKind::Ensemble]) {
        let lexical_only = outcome("exp1", kind).f1;
        let combined = outcome("exp3", kind).f1;
        assert!(
            combined >= lexical_only - 0.01,
            "{kind}: combined f1 {combined} vs lexical {lexical_only}"
        );
    }
    assert!(start.elapsed() < Duration::from_secs(120));
}

fn hash_test_side(indices: &SplitIndices, labels: &[Label]) -> String {
    let mut hasher = Sha256::new();
    for &i in &indices.test {
        hasher.update(i.to_le_bytes());
        hasher.update([labels[i] as u8]);
    }
    hex::encode(hasher.finalize())
}

#[test]
fn gate_09_resampling_hits_targets_within_one_record() {
    let mut rng = rng(109);
    for case in 0..500u64 {
        let method = if case % 2 == 0 {
            ResampleMethod::Oversample
        } else {
            ResampleMethod::Undersample
        };
        let n_mal = rng.random_range(5..=200);
        let n_ben = rng.random_range(5..=200);
        let mut labels = vec![Label::Malicious; n_mal];
        labels.extend(vec![Label::Benign; n_ben]);
        labels.shuffle(&mut rng);

        let indices = split(
            &labels,
            &SplitConfig {
                test_fraction: 0.2,
                seed: case,
                stratified: true,
            },
        )
        .unwrap();
        let before = hash_test_side(&indices, &labels);
        let train_labels: Vec<Label> = indices.train.iter().map(|&i| labels[i]).collect();
        let (train_mal, train_ben) = count_labels(&train_labels);

        // equal counts treat benign as the minority, like the implementation
        let malicious_is_minority = train_mal < train_ben;
        let (minority, majority) = if malicious_is_minority {
            (train_mal, train_ben)
        } else {
            (train_ben, train_mal)
        };
        // integer target keeps the ratio exactly reachable
        let target = match method {
            ResampleMethod::Oversample => rng.random_range(minority..=majority * 3),
            ResampleMethod::Undersample => rng.random_range(1..=majority),
            ResampleMethod::None => unreachable!(),
        };
        let ratio = match (method, malicious_is_minority) {
            (ResampleMethod::Oversample, true) => {
                RatioSpec::new(target as f64, majority as f64)
            }
            (ResampleMethod::Oversample, false) => {
                RatioSpec::new(majority as f64, target as f64)
            }
            (ResampleMethod::Undersample, true) => {
                RatioSpec::new(minority as f64, target as f64)
            }
            (ResampleMethod::Undersample, false) => {
                RatioSpec::new(target as f64, minority as f64)
            }
            (ResampleMethod::None, _) => unreachable!(),
        };

        let picked = resample(
            &train_labels,
            &ResampleConfig {
                method,
                ratio,
                seed: case,
            },
        )
        .unwrap();
        let (got_mal, got_ben) = count_labels(
            &picked.iter().map(|&i| train_labels[i]).collect::<Vec<_>>(),
        );
        let (got_minority, got_majority) = if malicious_is_minority {
            (got_mal, got_ben)
        } else {
            (got_ben, got_mal)
        };
        match method {
            ResampleMethod::Oversample => {
                assert_eq!(got_majority, majority, "majority side must not move");
                let ideal = majority as f64 * target as f64 / majority as f64;
                assert!((got_minority as f64 - ideal).abs() <= 1.0, "case {case}");
            }
            ResampleMethod::Undersample => {
                assert_eq!(got_minority, minority, "minority side must not move");
                let ideal = minority as f64 * target as f64 / minority as f64;
                assert!((got_majority as f64 - ideal).abs() <= 1.0, "case {case}");
            }
            ResampleMethod::None => unreachable!(),
        }
        assert_eq!(before, hash_test_side(&indices, &labels));
    }
}

struct BinRunner {
    bin: &'static str,
}

impl BinRunner {
    fn run(&self, args: &[&str]) {
        let output = Command::new(self.bin)
            .args(args)
            .env_remove("DOMWATCH_JOBS")
            .env_remove("DOMWATCH_REFERENCE_DATE")
            .output()
            .expect("spawn domwatch");
        assert!(
            output.status.success(),
            "domwatch {args:?} failed:\n{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
}

fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn gate_10_pipeline_is_byte_identical_across_reruns_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let records = generate(&SynthConfig {
        records: 400,
        seed: 10,
        ..SynthConfig::default()
    });
    let inputs = tmp.path().join("inputs");
    std::fs::create_dir_all(&inputs).unwrap();
    let files = write_ingest_files(&inputs, &records).unwrap();
    let domwatch = BinRunner {
        bin: env!("CARGO_BIN_EXE_domwatch"),
    };

    let pipeline = |dir: &Path, jobs: &str| -> (PathBuf, PathBuf, PathBuf) {
        std::fs::create_dir_all(dir).unwrap();
        let data = dir.join("data");
        let mut ingest = vec!["--reference-date", "2020-07-01", "ingest"];
        for feed in &files.malicious_csvs {
            ingest.extend(["--malicious", feed.to_str().unwrap()]);
        }
        let benign = files.benign_csv.to_str().unwrap().to_string();
        let whois = files.whois_jsonl.to_str().unwrap().to_string();
        let data_str = data.to_str().unwrap().to_string();
        ingest.extend(["--benign", &benign, "--whois", &whois, "--out", &data_str]);
        domwatch.run(&ingest);

        let dataset = data.join("dataset.jsonl");
        let features = dir.join("features.csv");
        domwatch.run(&[
            "featurize",
            "--dataset",
            dataset.to_str().unwrap(),
            "--out",
            features.to_str().unwrap(),
        ]);

        let model = dir.join("ensemble.json");
        domwatch.run(&[
            "--seed",
            "11",
            "--jobs",
            jobs,
            "train",
            "--features",
            features.to_str().unwrap(),
            "--model",
            "ensemble",
            "--mask",
            "exp3",
            "--out",
            model.to_str().unwrap(),
        ]);

        let report = dir.join("report.csv");
        domwatch.run(&[
            "--seed",
            "11",
            "--jobs",
            jobs,
            "experiment",
            "--features",
            features.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
            "--omit-timing",
        ]);
        (features, model, report)
    };

    let (features_a, model_a, report_a) = pipeline(&tmp.path().join("a"), "2");
    let (features_b, model_b, report_b) = pipeline(&tmp.path().join("b"), "2");
    assert!(!read_bytes(&features_a).is_empty());
    assert_eq!(read_bytes(&features_a), read_bytes(&features_b));
    assert_eq!(read_bytes(&model_a), read_bytes(&model_b));
    assert_eq!(read_bytes(&report_a), read_bytes(&report_b));

    // forest growth is parallel; thread count must not leak into the model
    let single = tmp.path().join("jobs1.json");
    let many = tmp.path().join("jobs8.json");
    for (jobs, out) in [("1", &single), ("8", &many)] {
        domwatch.run(&[
            "--seed",
            "11",
            "--jobs",
            jobs,
            "train",
            "--features",
            features_a.to_str().unwrap(),
            "--model",
            "rf",
            "--mask",
            "exp3",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(read_bytes(&single), read_bytes(&many));
}

#[test]
fn gate_11_degraded_members_drag_the_vote_below_the_best_member() {
    let mut rng = rng(111);
    // heavily overlapping clusters so the sound members disagree on the fringe
    let mut blob = |n: usize| -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut matrix = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let label = coin(&mut rng, 0.5);
            let center = if label == Label::Malicious { 0.8 } else { -0.8 };
            matrix.push(vec![
                center + rng.random_range(-1.5..1.5),
                center + rng.random_range(-1.5..1.5),
            ]);
            labels.push(label);
        }
        (matrix, labels)
    };
    let (train_m, train_l) = blob(400);
    let (test_m, test_l) = blob(400);
    let flipped: Vec<Label> = train_l
        .iter()
        .map(|l| match l {
            Label::Malicious => Label::Benign,
            Label::Benign => Label::Malicious,
        })
        .collect();

    let mask = FeatureMask::from_names(&["f5", "f7"]).unwrap();
    let seeds = TrainSeeds::derive(111);
    // two members learn inverted labels on purpose
    let members = vec![
        train_decision_tree(&train_m, &train_l, mask.clone(), TreeConfig::default()).unwrap(),
        train_random_forest(
            &train_m,
            &train_l,
            mask.clone(),
            ForestConfig {
                seed: seeds.forest,
                ..ForestConfig::default()
            },
        )
        .unwrap(),
        train_knn(&train_m, &train_l, mask.clone(), KnnConfig::default()).unwrap(),
        train_logistic_regression(
            &train_m,
            &flipped,
            mask.clone(),
            domwatch_core::ml::linear::LogisticConfig::default(),
        )
        .unwrap(),
        train_linear_svm(
            &train_m,
            &flipped,
            mask.clone(),
            domwatch_core::ml::linear::SvmConfig {
                seed: seeds.svm,
                ..domwatch_core::ml::linear::SvmConfig::default()
            },
        )
        .unwrap(),
    ];

    let best_member_f1 = members
        .iter()
        .map(|m| {
            let preds = predict(m, &test_m).unwrap();
            compute_metrics(&preds, &test_l).unwrap().f1
        })
        .fold(0.0f64, f64::max);
    let votes = vote_ensemble(&members, &test_m).unwrap();
    let ensemble_f1 = compute_metrics(&votes, &test_l).unwrap().f1;

    assert!(
        ensemble_f1 < best_member_f1,
        "ensemble {ensemble_f1} vs best member {best_member_f1}"
    );
}

#[test]
fn gate_12_forest_importance_is_a_distribution_over_features() {
    let mut rng = rng(112);
    let names = ["f1", "f2", "f3", "f4", "f5"];
    for round in 0..20u64 {
        let n = rng.random_range(30..=60);
        let f = rng.random_range(2..=5);
        let informative = rng.random_range(0..f);
        let matrix: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<Label> = matrix
            .iter()
            .map(|row| {
                let truth = row[informative] > 0.0;
                let flip = rng.random_bool(0.05);
                if truth != flip {
                    Label::Malicious
                } else {
                    Label::Benign
                }
            })
            .collect();
        let mask = FeatureMask::from_names(&names[..f]).unwrap();
        let model = train_random_forest(
            &matrix,
            &labels,
            mask,
            ForestConfig {
                seed: round,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let importance = feature_importance(&model).unwrap();
        assert_eq!(importance.scores.len(), f);
        assert!(importance.scores.iter().all(|s| *s >= 0.0));
        let total: f64 = importance.scores.iter().sum();
        assert!((total - 1.0).abs() <= 1e-9, "round {round}: total {total}");
    }

    // one informative column among constants takes all the credit
    let matrix: Vec<Vec<f64>> = (0..80)
        .map(|i| {
            let signal = if i % 2 == 0 { 2.0 } else { -2.0 };
            vec![1.0, signal + rng.random_range(-0.5..0.5), 7.0]
        })
        .collect();
    let labels: Vec<Label> = (0..80)
        .map(|i| {
            if i % 2 == 0 {
                Label::Malicious
            } else {
                Label::Benign
            }
        })
        .collect();
    let mask = FeatureMask::from_names(&["f5", "f7", "f9"]).unwrap();
    let model = train_random_forest(&matrix, &labels, mask, ForestConfig::default()).unwrap();
    let importance = feature_importance(&model).unwrap();
    assert!((importance.scores[1] - 1.0).abs() <= 1e-9);
    assert_eq!(importance.scores[0], 0.0);
    assert_eq!(importance.scores[2], 0.0);
}
