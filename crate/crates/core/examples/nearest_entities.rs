//! Encodes a short annotated text with a trained model and lists the
//! entities whose target vectors lie closest to it.
//!
//! cargo run --release --example nearest_entities

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use textent::corpus::{
    build_dataset, compile_document, filter_annotations, normalize, Annotation, CompileOptions, CorpusConfig,
    RawDocument, ENTITY_PREFIX,
};
use textent::synthetic::{LatentConfig, LatentWorld, LATENT_TYPES};
use textent::textent::{encode, train, TrainConfig};
use textent::vectors::{nearest_entities, VectorStore};

fn main() -> textent::Result<()> {
    let world = LatentWorld::generate(LatentConfig {
        n_entities: 300,
        ..Default::default()
    });
    let config = CorpusConfig {
        min_links: 0,
        ..Default::default()
    };
    let data = build_dataset(&world.kb_corpus(), &HashSet::new(), &config)?;
    let params = train(
        &data,
        None,
        &TrainConfig {
            dim: 32,
            negatives: 20,
            batch_size: 10,
            ..Default::default()
        },
    )?
    .params;

    let mut store = VectorStore::new(params.dim);
    for (i, name) in data.vocab.target_entities.tokens().iter().enumerate() {
        store.insert(format!("{ENTITY_PREFIX}{name}"), params.targets.row(i))?;
    }

    // A query written in the vocabulary of latent type 2 ("location").
    let query = RawDocument {
        doc_id: "query".into(),
        target_entity: None,
        tokens: ["T2W1", "w5", "t2w4", "mention7", "t2w9", "w12", "t2w3"]
            .map(str::to_owned)
            .to_vec(),
        annotations: vec![Annotation {
            start: 3,
            end: 4,
            entity: world.entity_names[7].clone(),
            score: 0.8,
        }],
        incoming_links: 0,
    };
    let prepared = normalize(&filter_annotations(&query, config.min_score));
    let doc = compile_document(&prepared, &data.vocab, &CompileOptions::unbounded())?;
    let v = encode(&doc, &params, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).vector;

    println!("query: {}", query.tokens.join(" "));
    for (name, cos) in nearest_entities(&v, &store, 8)? {
        let id: usize = name.trim_start_matches("Entity_").parse().expect("generated name");
        println!("  {name}  {cos:.3}  ({})", LATENT_TYPES[world.latent[id]]);
    }
    Ok(())
}
