//! Entity typing on a generated world where a hidden type shapes each
//! entity's KB document. Skip-gram vectors over the entity-replaced corpus
//! initialize TextEnt, which then learns entity vectors from the documents
//! alone; an MLP finally predicts the (never seen) types from those vectors.
//!
//! cargo run --release --example entity_typing

use std::collections::{HashMap, HashSet};

use textent::corpus::{build_dataset, emit_pretrain_stream, prepare, CorpusConfig};
use textent::sgns::{train_skipgram, SgnsConfig};
use textent::synthetic::{LatentConfig, LatentWorld};
use textent::textent::{train, TrainConfig, Variant};
use textent::typing::{evaluate_typing, BepMode, TypingConfig};

fn main() -> textent::Result<()> {
    let world = LatentWorld::generate(LatentConfig::default());
    let corpus = world.kb_corpus();
    let config = CorpusConfig {
        min_links: 0,
        ..Default::default()
    };
    let data = build_dataset(&corpus, &HashSet::new(), &config)?;
    let typing = world.typing_dataset();
    println!(
        "{} entities, {} types: {}",
        typing.entities.len(),
        typing.n_types(),
        typing.types.join(", ")
    );

    let stream = emit_pretrain_stream(&prepare(&corpus, config.min_score));
    let pretrained = train_skipgram(
        &stream,
        SgnsConfig {
            dim: 32,
            window: 5,
            negatives: 5,
            min_count: 1,
            ..Default::default()
        },
    )?;

    for variant in Variant::ALL {
        let cfg = TrainConfig {
            variant,
            dim: 32,
            negatives: 20,
            batch_size: 10,
            ..Default::default()
        };
        let model = train(&data, Some(&pretrained), &cfg)?.params;
        let vectors: HashMap<String, Vec<f64>> = data
            .vocab
            .target_entities
            .tokens()
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), model.targets.row(i).to_vec()))
            .collect();
        let typing_cfg = TypingConfig {
            epochs: 300,
            ..Default::default()
        };
        let (_, report) = evaluate_typing(&vectors, &typing, &typing_cfg, BepMode::Entity)?;
        println!(
            "{:>6}: P@1 {:.3}  BEP {:.3}  acc {:.3}  micro-F1 {:.3}  macro-F1 {:.3}  (best epoch {})",
            variant.as_str(),
            report.p_at_1,
            report.bep,
            report.accuracy,
            report.micro_f1,
            report.macro_f1,
            report.best_epoch
        );
    }
    Ok(())
}
