use std::collections::HashSet;

use proptest::prelude::*;
use textent::corpus::{build_dataset, CorpusConfig};
use textent::linalg::norm;
use textent::sgns::{train_skipgram, SgnsConfig};
use textent::synthetic::toy_kb;
use textent::textent::{train, TrainConfig, Variant};

fn toy_dataset() -> textent::corpus::CompiledDataset {
    let config = CorpusConfig {
        min_word_count: 1,
        min_entity_count: 1,
        min_links: 0,
        ..Default::default()
    };
    build_dataset(&toy_kb(50, 200, 20, 40, 5, 1), &HashSet::new(), &config).unwrap()
}

fn toy_config(variant: Variant) -> TrainConfig {
    TrainConfig {
        variant,
        dim: 16,
        negatives: 10,
        dropout: 0.2,
        batch_size: 10,
        epochs: 60,
        ..Default::default()
    }
}

#[test]
fn smoothed_loss_does_not_rise() {
    let data = toy_dataset();
    for variant in Variant::ALL {
        let losses = train(&data, None, &toy_config(variant)).unwrap().epoch_losses;
        let smoothed: Vec<f64> = losses.chunks(5).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
        // Sampled negatives and dropout leave some epoch-to-epoch noise once
        // the loss is small, so windows may wobble within a margin.
        for w in smoothed.windows(2) {
            assert!(w[1] <= 1.2 * w[0], "{variant}: {smoothed:?}");
        }
        assert!(smoothed[smoothed.len() - 1] < 0.75 * smoothed[0], "{variant}: {smoothed:?}");
    }
}

#[test]
fn single_thread_training_is_bit_reproducible() {
    let data = toy_dataset();
    let cfg = TrainConfig {
        epochs: 5,
        ..toy_config(Variant::Full)
    };
    let a = train(&data, None, &cfg).unwrap();
    let b = train(&data, None, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.epoch_losses, b.epoch_losses);

    let stream: Vec<Vec<String>> = toy_kb(20, 30, 5, 20, 0, 2).into_iter().map(|d| d.tokens).collect();
    let sgns = SgnsConfig {
        dim: 8,
        min_count: 1,
        epochs: 2,
        ..Default::default()
    };
    assert_eq!(train_skipgram(&stream, sgns.clone()).unwrap(), train_skipgram(&stream, sgns).unwrap());
}

#[test]
fn parallel_training_stays_finite() {
    let data = toy_dataset();
    let cfg = TrainConfig {
        epochs: 5,
        threads: 4,
        ..toy_config(Variant::Full)
    };
    assert!(train(&data, None, &cfg).unwrap().params.is_finite());
    let stream: Vec<Vec<String>> = toy_kb(40, 30, 5, 20, 0, 2).into_iter().map(|d| d.tokens).collect();
    let store = train_skipgram(
        &stream,
        SgnsConfig {
            dim: 8,
            min_count: 1,
            threads: 4,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(store.iter().all(|(_, v)| norm(v).is_finite()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn skipgram_vectors_stay_finite(
        stream in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "ENTITY/X"]), 0..15), 1..12),
        window in 1usize..6,
        negatives in 1usize..6,
        lr in 0.001f64..1.0,
    ) {
        let stream: Vec<Vec<String>> = stream.into_iter().map(|s| s.into_iter().map(str::to_owned).collect()).collect();
        prop_assume!(stream.iter().any(|s| !s.is_empty()));
        let cfg = SgnsConfig { dim: 4, window, negatives, min_count: 1, epochs: 2, initial_lr: lr, ..Default::default() };
        let store = train_skipgram(&stream, cfg).unwrap();
        for (_, v) in store.iter() {
            prop_assert!(norm(v).is_finite());
        }
    }
}
