//! Trains all three TextEnt variants on a small generated KB and reports how
//! often each document ranks its own entity first among all entities.
//!
//! cargo run --release --example train_textent

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use textent::corpus::{build_dataset, CorpusConfig};
use textent::synthetic::toy_kb;
use textent::textent::{encode, full_softmax_rank, train, TrainConfig, Variant};

fn main() -> textent::Result<()> {
    let corpus = toy_kb(50, 200, 20, 40, 5, 1);
    let config = CorpusConfig {
        min_word_count: 1,
        min_entity_count: 1,
        min_links: 0,
        ..Default::default()
    };
    let data = build_dataset(&corpus, &HashSet::new(), &config)?;
    println!(
        "{} documents, {} words, {} contextual entities",
        data.documents.len(),
        data.vocab.words.len(),
        data.vocab.ctx_entities.len()
    );

    for variant in Variant::ALL {
        let cfg = TrainConfig {
            variant,
            dim: 16,
            negatives: 10,
            dropout: 0.2,
            batch_size: 10,
            epochs: 200,
            ..Default::default()
        };
        let out = train(&data, None, &cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let top1 = (0..data.documents.len())
            .filter(|&i| {
                let v = encode(&data.documents[i], &out.params, 0.0, &mut rng).vector;
                full_softmax_rank(&v, &out.params.targets, data.target(i)) == 1
            })
            .count();
        let losses = &out.epoch_losses;
        println!(
            "{:>6}: loss {:.3} -> {:.3}, rank-1 on {top1}/{} documents",
            variant.as_str(),
            losses[0],
            losses[losses.len() - 1],
            data.documents.len()
        );
    }
    Ok(())
}
