mod common;

use std::collections::BTreeMap;

use common::*;
use mtadv::adversarial::{batch_gradients, compute_losses, TaskConfig};
use mtadv::corpus::{
    manifest_from_jsonl, manifest_to_jsonl, qwk, snr_estimate, speaker_disjoint_split,
    tfidf_top_terms, CorpusManifest, RaterTable, Sample, SplitRatios,
};
use mtadv::eval::evaluate;
use mtadv::meta::{meta_update, Hypergradient, MetaConfig};
use mtadv::model::{EncoderConfig, ModelState};
use mtadv::synth::{generate, SynthConfig};
use mtadv::{Attribute, Dialect, Role};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn labelled_pairs(max_classes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_classes).prop_flat_map(|c| (Just(c), prop::collection::vec((0..c, 0..c), 1..40)))
}

proptest! {
    #[test]
    fn evaluate_is_permutation_invariant((c, pairs) in labelled_pairs(5), seed in any::<u64>()) {
        let (p, l): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let base = evaluate(&p, &l, c).unwrap();
        let mut shuffled = pairs.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (p2, l2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        let other = evaluate(&p2, &l2, c).unwrap();
        prop_assert_eq!(base.accuracy, other.accuracy);
        prop_assert_eq!(base.confusion, other.confusion);
        prop_assert_eq!(base.f1, other.f1);
    }

    #[test]
    fn confusion_rows_sum_to_hundred_or_zero((c, pairs) in labelled_pairs(5)) {
        let (p, l): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let r = evaluate(&p, &l, c).unwrap();
        for (k, row) in r.confusion.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if r.zero_support.contains(&k) {
                prop_assert_eq!(s, 0.0);
            } else {
                prop_assert!((s - 100.0).abs() < 1e-9);
            }
        }
        for m in [r.precision, r.recall, r.f1, r.accuracy] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn qwk_is_bounded_and_order_free((k, pairs) in labelled_pairs(5), seed in any::<u64>()) {
        let items: Vec<_> = pairs.iter().enumerate().map(|(i, &(a, b))| (format!("i{i}"), a, b)).collect();
        let t = RaterTable::new(items.clone(), k).unwrap();
        if let Ok(v) = qwk(&t) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v), "{}", v);
            let mut rev = items;
            use rand::seq::SliceRandom;
            rev.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let v2 = qwk(&RaterTable::new(rev, k).unwrap()).unwrap();
            prop_assert!((v - v2).abs() < 1e-12);
        }
    }

    #[test]
    fn tfidf_scores_are_non_negative(docs in prop::collection::vec(
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 1..15), 2..5)) {
        let input: Vec<(String, Vec<String>)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("c{i}"), d.iter().map(|s| s.to_string()).collect()))
            .collect();
        for class in tfidf_top_terms(&input, 10).unwrap() {
            prop_assert!(class.terms.iter().all(|(_, s)| *s >= 0.0));
            prop_assert!(class.terms.windows(2).all(|w| w[0].1 >= w[1].1));
        }
    }

    #[test]
    fn splits_never_share_speakers(sizes in prop::collection::vec(1usize..8, 3..30), seed in any::<u64>()) {
        let mut samples = Vec::new();
        for (s, &n) in sizes.iter().enumerate() {
            for u in 0..n {
                samples.push(Sample {
                    id: format!("s{s}u{u}"),
                    speaker_id: format!("s{s}"),
                    dialect: Some(Dialect::ALL[s % 2]),
                    gender: None,
                    age: None,
                    duration_seconds: 1.0,
                    transcript: None,
                    features_path: None,
                    frames: None,
                });
            }
        }
        let m = CorpusManifest::new(samples).unwrap();
        let a = speaker_disjoint_split(&m, SplitRatios::new(0.6, 0.2, 0.2).unwrap(), seed).unwrap();
        let mut seen = BTreeMap::new();
        for s in &m.samples {
            let sp = a[&s.id];
            prop_assert_eq!(*seen.entry(s.speaker_id.clone()).or_insert(sp), sp);
        }
        let used: std::collections::BTreeSet<_> = seen.values().collect();
        prop_assert_eq!(used.len(), 3);
    }

    #[test]
    fn snr_ignores_power_of_two_gain(seed in any::<u64>(), exp in -8i32..8) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wave: Vec<f64> = (0..4000).map(|i| {
            let gap = (i / 200) % 5 == 0;
            rng.random_range(-0.01..0.01) + if gap { 0.0 } else { (i as f64 * 0.1).sin() }
        }).collect();
        let gain = 2f64.powi(exp);
        let scaled: Vec<f64> = wave.iter().map(|x| x * gain).collect();
        prop_assert_eq!(snr_estimate(&wave, 200, 100).unwrap(), snr_estimate(&scaled, 200, 100).unwrap());
    }

    #[test]
    fn zero_gamma_adversary_matches_removed_head(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_config(&mut rng);
        let gamma: BTreeMap<_, _> = [(Attribute::Age, 0.0)].into_iter().collect();
        let state = ModelState::init(cfg, gamma, seed).unwrap();
        let samples = random_batch(&mut rng, cfg.input_dim, 3);
        let batch: Vec<&Sample> = samples.iter().collect();
        let on = batch_gradients(&batch, &state, &roles(Role::Off, Role::Primary, Role::Adversarial)).unwrap();
        let off = batch_gradients(&batch, &state, &roles(Role::Off, Role::Primary, Role::Off)).unwrap();
        prop_assert_eq!(on.1.encoder_flat(), off.1.encoder_flat());
        prop_assert_eq!(&on.1.heads[Attribute::Gender], &off.1.heads[Attribute::Gender]);
        prop_assert_eq!(on.0.task_loss, off.0.task_loss);
        prop_assert_eq!(on.0.combined, off.0.combined);
    }

    #[test]
    fn combined_loss_is_task_plus_weighted_adversaries(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_config(&mut rng);
        let gammas = random_gammas(&mut rng, &[Attribute::Dialect, Attribute::Age], 0.0, 3.0);
        let state = ModelState::init(cfg, gammas.clone(), seed).unwrap();
        let samples = random_batch(&mut rng, cfg.input_dim, 3);
        let batch: Vec<&Sample> = samples.iter().collect();
        let task = TaskConfig::new(roles(Role::Adversarial, Role::Primary, Role::Adversarial));
        let b = compute_losses(&batch, &state, &task).unwrap();
        let expected = b.task_loss + b.adv_losses.iter().map(|(a, l)| gammas[a] * l).sum::<f64>();
        prop_assert!((b.combined - expected).abs() < 1e-12);
    }

    #[test]
    fn synthetic_speakers_keep_their_labels(speakers in 3usize..15, per in 1usize..6, seed in any::<u64>()) {
        let m = generate(&SynthConfig { num_speakers: speakers, samples_per_speaker: per, seed, ..SynthConfig::default() }).unwrap();
        prop_assert_eq!(m.len(), speakers * per);
        let mut labels = BTreeMap::new();
        for s in &m.samples {
            let l = (s.dialect, s.gender, s.age);
            prop_assert_eq!(*labels.entry(s.speaker_id.clone()).or_insert(l), l);
            prop_assert!(s.frames().unwrap().rows() >= 1);
        }
    }

    #[test]
    fn manifest_jsonl_round_trips(speakers in 3usize..8, seed in any::<u64>()) {
        let m = generate(&SynthConfig { num_speakers: speakers, samples_per_speaker: 2, seed, ..SynthConfig::default() }).unwrap();
        let mut m = m;
        m.split_assignment = Some(speaker_disjoint_split(&m, SplitRatios::default(), seed).unwrap());
        let text = manifest_to_jsonl(&m).unwrap();
        let back = manifest_from_jsonl(&text).unwrap();
        prop_assert_eq!(manifest_to_jsonl(&back).unwrap(), text);
        prop_assert_eq!(back.split_assignment, m.split_assignment);
    }

    #[test]
    fn meta_update_stays_in_bounds(start in 0.0f64..=5.0, h in -1e6f64..1e6, eta in 0.0f64..100.0) {
        let gamma: BTreeMap<_, _> = [(Attribute::Gender, start)].into_iter().collect();
        let state = ModelState::init(EncoderConfig { input_dim: 1, hidden_dim: 1, num_layers: 1 }, gamma, 0).unwrap();
        let hg = Hypergradient([(Attribute::Gender, h)].into_iter().collect());
        let meta = MetaConfig { meta_learning_rate: eta, ..MetaConfig::default() };
        let next = meta_update(&state, &hg, &meta, 5.0, 0).unwrap();
        let g = next.gamma[&Attribute::Gender];
        prop_assert!((0.0..=5.0).contains(&g));
        prop_assert_eq!(g, (start - eta * h).clamp(0.0, 5.0));
    }
}

#[test]
fn non_finite_hypergradient_is_divergence() {
    let gamma: BTreeMap<_, _> = [(Attribute::Gender, 1.0)].into_iter().collect();
    let state = ModelState::init(EncoderConfig { input_dim: 1, hidden_dim: 1, num_layers: 1 }, gamma, 0).unwrap();
    let hg = Hypergradient([(Attribute::Gender, f64::NAN)].into_iter().collect());
    let err = meta_update(&state, &hg, &MetaConfig::default(), 5.0, 7).unwrap_err();
    assert!(matches!(err, mtadv::Error::Divergence { step: 7, .. }), "{err}");
}
