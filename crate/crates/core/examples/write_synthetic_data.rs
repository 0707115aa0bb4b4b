//! Writes a generated world to disk in the formats the `textent` binary
//! reads, so the whole command-line pipeline can be tried end to end:
//!
//! cargo run --release --example write_synthetic_data -- demo
//! textent build-corpus --input demo/kb.jsonl --min-links 0 --output demo/data.txe
//! textent pretrain --corpus demo/data.txe --dim 32 --window 5 --negatives 5 --min-count 1 --output demo/pre.vec
//! textent train --data demo/data.txe --init demo/pre.vec --dim 32 --negatives 20 --batch-size 10 --output demo/model.txm
//! textent eval-typing --model demo/model.txm --dataset demo/types.tsv --epochs 300
//! textent eval-classify --model demo/model.txm --corpus demo/labeled.jsonl
//! textent nn --model demo/model.txm --text "t0w1 w4 mention0 t0w7" --annotations demo/query.json

use std::path::PathBuf;

use textent::corpus::write_jsonl;
use textent::synthetic::{LatentConfig, LatentWorld};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    std::fs::create_dir_all(&dir)?;
    let world = LatentWorld::generate(LatentConfig::default());

    let kb = world.kb_corpus();
    write_jsonl(&dir.join("kb.jsonl"), &kb)?;
    let types = dir.join("types.tsv");
    std::fs::write(&types, world.typing_dataset().to_tsv())?;
    let labeled = world.labeled_corpus(&[0, 2, 3, 4], 100, 5, 99);
    write_jsonl(&dir.join("labeled.jsonl"), &labeled)?;
    let query = dir.join("query.json");
    std::fs::write(&query, r#"[{"start": 2, "end": 3, "entity": "Entity_000", "score": 1.0}]"#)?;

    println!(
        "wrote {} KB documents, {} typed entities and {} labeled documents to {}",
        kb.len(),
        world.entity_names.len(),
        labeled.len(),
        dir.display()
    );
    Ok(())
}
