use langsup_core::evalkit::*;
use langsup_core::rng::stream;
use langsup_core::synthworld::*;
use langsup_core::trainer::{desk_config, train};
use langsup_core::{ContrastiveMode, EncoderConfig};
use proptest::prelude::*;

fn mc(classes: usize, y: Vec<usize>) -> Labels {
    Labels::Multiclass { classes, y }
}

/// Mean per-class recall, written out directly.
fn recall_oracle(p: &[usize], y: &[usize], classes: usize) -> f64 {
    let mut recalls = Vec::new();
    for c in 0..classes {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if !rows.is_empty() {
            recalls.push(rows.iter().filter(|&&i| p[i] == c).count() as f64 / rows.len() as f64);
        }
    }
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

fn pairs() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..6).prop_flat_map(|k| (Just(k), prop::collection::vec((0..k, 0..k), 1..60)))
}

proptest! {
    #[test]
    fn balanced_accuracy_matches_oracle((k, py) in pairs()) {
        let (p, y): (Vec<usize>, Vec<usize>) = py.into_iter().unzip();
        let got = class_balanced_accuracy(&Predictions::Multiclass(p.clone()), &mc(k, y.clone())).unwrap();
        prop_assert!((got - recall_oracle(&p, &y, k)).abs() < 1e-12);
        let w = balanced_weights(&y, k);
        let weighted: f64 = (0..y.len()).filter(|&i| p[i] == y[i]).map(|i| w[i]).sum();
        prop_assert!((weighted - got).abs() < 1e-12);
    }

    #[test]
    fn duplicating_a_class_leaves_score_unchanged((k, py) in pairs(), reps in 2usize..5) {
        let (mut p, mut y): (Vec<usize>, Vec<usize>) = py.into_iter().unzip();
        let before = class_balanced_accuracy(&Predictions::Multiclass(p.clone()), &mc(k, y.clone())).unwrap();
        let target = y[0];
        let extra: Vec<(usize, usize)> = p.iter().zip(&y).filter(|(_, &c)| c == target).map(|(&a, &b)| (a, b)).collect();
        for _ in 1..reps {
            for &(a, b) in &extra {
                p.push(a);
                y.push(b);
            }
        }
        let after = class_balanced_accuracy(&Predictions::Multiclass(p), &mc(k, y)).unwrap();
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn multilabel_score_is_invariant_to_whole_set_duplication(
        flags in prop::collection::vec((any::<bool>(), any::<bool>()), 3..40), reps in 2usize..4,
    ) {
        let l = 3;
        let n = flags.len() / l;
        prop_assume!(n > 0);
        let (p, y): (Vec<bool>, Vec<bool>) = flags[..n * l].iter().copied().unzip();
        let one = class_balanced_accuracy(
            &Predictions::Multilabel { labels: l, y: p.clone() },
            &Labels::Multilabel { labels: l, y: y.clone() },
        ).unwrap();
        let many = class_balanced_accuracy(
            &Predictions::Multilabel { labels: l, y: p.repeat(reps) },
            &Labels::Multilabel { labels: l, y: y.repeat(reps) },
        ).unwrap();
        prop_assert!((one - many).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&one));
    }
}

#[test]
fn pooled_point_equals_balanced_accuracy() {
    let y = vec![0, 0, 0, 1, 2, 2];
    let p = vec![0, 1, 0, 1, 0, 2];
    let pooled = PooledOutcomes::new(&[Predictions::Multiclass(p.clone())], &mc(3, y.clone())).unwrap();
    let direct = class_balanced_accuracy(&Predictions::Multiclass(p), &mc(3, y)).unwrap();
    assert!((pooled.point() - direct).abs() < 1e-15);
    // (2/3 + 1 + 1/2) / 3
    assert!((direct - 13.0 / 18.0).abs() < 1e-15);
}

#[test]
fn bootstrap_width_tracks_binomial_standard_error() {
    for (n, p) in [(400usize, 0.5), (1600, 0.8)] {
        let hits = (n as f64 * p) as usize;
        let values: Vec<f64> = (0..n).map(|i| (i < hits) as u8 as f64).collect();
        let (lo, hi) = bootstrap_ci(&values, 0.95, 4000, &mut stream(3, "t", 0)).unwrap();
        let normal = 2.0 * 1.959964 * (p * (1.0 - p) / n as f64).sqrt();
        assert!(((hi - lo) / normal - 1.0).abs() < 0.1, "{n} {lo} {hi} {normal}");
        assert!(lo <= p && p <= hi);
    }
    let constant = vec![1.0; 50];
    assert_eq!(bootstrap_ci(&constant, 0.95, 200, &mut stream(0, "t", 0)).unwrap(), (1.0, 1.0));
    assert!(bootstrap_ci(&[], 0.95, 200, &mut stream(0, "t", 0)).is_err());
    assert!(bootstrap_ci(&constant, 1.0, 200, &mut stream(0, "t", 0)).is_err());
}

#[test]
fn quantiles_interpolate() {
    let s = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(quantile_sorted(&s, 0.0), 1.0);
    assert_eq!(quantile_sorted(&s, 0.5), 3.0);
    assert_eq!(quantile_sorted(&s, 0.125), 1.5);
    let mut v = vec![5.0, 1.0, 3.0, 2.0, 4.0];
    assert_eq!(percentile_interval(&mut v, 0.5), (2.0, 4.0));
}

#[test]
fn evaluation_leaves_the_encoder_untouched_and_is_seeded() {
    let u = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
    let vocab = Vocabulary::new(&u);
    let ds = build_dataset(&DatasetSpec::new(256, 1, CaptionKnobs::default(), 2), &u).unwrap();
    let mut cfg = desk_config(ContrastiveMode::Clip).with_epochs(2);
    cfg.warmup_epochs = 0;
    let model = train(&ds, &cfg, &EncoderConfig::desk(u.embed_dim(), vocab.len()), &vocab).unwrap();
    let before = model.clone();
    let features = extract_features(&model, &ds).unwrap();

    let suite = build_suite(&u).unwrap();
    let probe = ProbeConfig { epochs: 5, lr_grid: vec![0.1], seeds: 1, resamples: 200, ..ProbeConfig::desk() };
    let a = evaluate(&model, &suite, &probe, 4).unwrap();
    assert_eq!(model, before);
    assert_eq!(extract_features(&model, &ds).unwrap(), features);
    assert_eq!(features.cols(), model.arch.feature_dim);

    assert_eq!(a, evaluate(&model, &suite, &probe, 4).unwrap());
    assert_eq!(a.per_task_accuracy.len(), suite.len());
    let mu = a.per_task_accuracy.iter().map(|t| t.estimate.mean).sum::<f64>() / suite.len() as f64;
    assert!((a.mu_tx.mean - mu).abs() < 1e-12);
    for t in &a.per_task_accuracy {
        assert!(t.estimate.ci_low <= t.estimate.mean && t.estimate.mean <= t.estimate.ci_high);
    }
}

#[test]
fn suite_is_reproducible() {
    let u = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
    let a = build_suite(&u).unwrap();
    assert_eq!(a, build_suite(&u).unwrap());
    assert_eq!(a.len(), 6);
    for t in &a {
        assert!(!t.train.labels.is_empty() && !t.val.labels.is_empty() && !t.test.labels.is_empty());
    }
}
