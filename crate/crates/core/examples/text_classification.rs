//! Classifies generated documents by topic with a softmax layer over frozen
//! TextEnt encodings, reporting the dev curve used for epoch selection.
//!
//! cargo run --release --example text_classification

use std::collections::HashSet;

use textent::classify::{run_classification, ClassifierConfig, PreprocessConfig};
use textent::corpus::{build_dataset, emit_pretrain_stream, prepare, CompileOptions, CorpusConfig};
use textent::sgns::{train_skipgram, SgnsConfig};
use textent::synthetic::{LatentConfig, LatentWorld};
use textent::textent::{train, TrainConfig};

fn main() -> textent::Result<()> {
    let world = LatentWorld::generate(LatentConfig::default());
    let corpus = world.kb_corpus();
    let config = CorpusConfig {
        min_links: 0,
        ..Default::default()
    };
    let data = build_dataset(&corpus, &HashSet::new(), &config)?;
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
    let train_cfg = TrainConfig {
        dim: 32,
        negatives: 20,
        batch_size: 10,
        ..Default::default()
    };
    let model = train(&data, Some(&pretrained), &train_cfg)?.params;

    // Four topics, 100 documents each; every fifth document is held out.
    let labeled = world.labeled_corpus(&[0, 2, 3, 4], 100, 5, 99);
    let report = run_classification(
        &labeled,
        &model,
        &data.vocab,
        &CompileOptions::default(),
        &PreprocessConfig::default(),
        &ClassifierConfig::default(),
        (train_cfg.adadelta_rho, train_cfg.adadelta_eps),
    )?;
    println!(
        "train {} / dev {} / test {} documents, {} encoder",
        report.n_train, report.n_dev, report.n_test, report.encoder
    );
    println!("test accuracy {:.3}, macro F1 {:.3}", report.accuracy, report.macro_f1);
    for (class, f1) in &report.per_class_f1 {
        println!("  {class:<14} F1 {f1:.3}");
    }
    let curve: Vec<String> = report.dev_accuracy.iter().map(|a| format!("{a:.2}")).collect();
    println!("dev accuracy by epoch: {}", curve.join(" "));
    println!("best epoch {}", report.best_epoch);
    Ok(())
}
