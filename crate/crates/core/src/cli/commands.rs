use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::args::*;
use super::manifest::{with_suffix, write_json};
use super::CliError;
use crate::adam::AdamConfig;
use crate::classify::{read_labeled_corpus, run_classification, ClassifierConfig, PreprocessConfig};
use crate::corpus::{
    build_dataset, compile_document, emit_pretrain_stream, filter_annotations, normalize, prepare, read_corpus,
    read_entity_list, read_jsonl, write_jsonl, Annotation, CompileOptions, CorpusConfig, RawDocument, Vocabulary,
    ENTITY_PREFIX,
};
use crate::error::Error;
use crate::sgns::{SgnsConfig, SkipGram};
use crate::textent::{self, encode, load_model, save_model, ModelParameters, NegativeDistribution, TrainConfig, Variant};
use crate::txe::{is_dataset_file, load_dataset, save_dataset, vocabulary_hash};
use crate::typing::{evaluate_typing, BepMode, TypingConfig, TypingDataset};
use crate::vectors::{load_vectors, nearest_entities, save_vectors, VectorStore};

/// What a finished subcommand read and wrote.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    /// The main output; the manifest is written next to it.
    pub anchor: Option<PathBuf>,
    pub seed: Option<u64>,
}

type CmdResult = std::result::Result<RunRecord, CliError>;

fn need<'a, T>(value: &'a Option<T>, flag: &str) -> std::result::Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("the following required argument was not provided: --{flag}")))
}

fn write_text(path: &Path, text: &str) -> crate::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct DatasetSidecar<'a> {
    input: &'a Path,
    documents: usize,
    words: usize,
    ctx_entities: usize,
    target_entities: usize,
    vocab_hash: String,
    config: &'a CorpusConfig,
}

pub fn build_corpus(a: &BuildCorpusArgs) -> CmdResult {
    let input = need(&a.input, "input")?;
    let output = need(&a.output, "output")?;
    let corpus = read_corpus(input)?;
    let keep = match &a.keep_entities {
        Some(p) => read_entity_list(p)?,
        None => Default::default(),
    };
    let config = CorpusConfig {
        min_word_count: a.min_word_count,
        min_entity_count: a.min_entity_count,
        min_links: a.min_links,
        min_score: a.min_score,
        compile: CompileOptions {
            max_words: a.max_words,
            max_entities: a.max_entities,
            truncate_before_oov: a.truncate_before_oov,
            dedup_entities: a.dedup_entities,
        },
    };
    let data = build_dataset(&corpus, &keep, &config)?;
    save_dataset(output, &data)?;

    let stream_path = with_suffix(output, ".pretrain.jsonl");
    write_jsonl(&stream_path, &emit_pretrain_stream(&prepare(&corpus, a.min_score)))?;

    let sidecar_path = with_suffix(output, ".json");
    write_json(
        &sidecar_path,
        &DatasetSidecar {
            input,
            documents: data.documents.len(),
            words: data.vocab.words.len(),
            ctx_entities: data.vocab.ctx_entities.len(),
            target_entities: data.vocab.target_entities.len(),
            vocab_hash: vocabulary_hash(&data.vocab),
            config: &config,
        },
    )?;
    let mut inputs = vec![input.clone()];
    inputs.extend(a.keep_entities.clone());
    Ok(RunRecord {
        inputs,
        artifacts: vec![output.clone(), stream_path, sidecar_path],
        anchor: Some(output.clone()),
        seed: None,
    })
}

#[derive(Debug, Serialize)]
struct PretrainSidecar<'a> {
    config: &'a SgnsConfig,
    vocabulary_size: usize,
    epoch_losses: Vec<f64>,
}

pub fn pretrain(a: &PretrainArgs) -> CmdResult {
    let corpus = need(&a.corpus, "corpus")?;
    let output = need(&a.output, "output")?;
    let mut inputs = vec![corpus.clone()];
    let stream: Vec<Vec<String>> = if is_dataset_file(corpus) {
        let stream_path = with_suffix(corpus, ".pretrain.jsonl");
        inputs.push(stream_path.clone());
        read_jsonl(&stream_path)?
    } else {
        emit_pretrain_stream(&prepare(&read_corpus(corpus)?, a.min_score))
    };
    let config = SgnsConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        min_count: a.min_count,
        epochs: a.epochs,
        subsample_threshold: a.subsample,
        initial_lr: a.lr,
        seed: a.seed,
        threads: a.threads,
        ..Default::default()
    };
    let mut model = SkipGram::new(&stream, config.clone())?;
    let epoch_losses = model.train(&stream);
    save_vectors(&model.to_store(), output)?;
    let sidecar_path = with_suffix(output, ".json");
    write_json(
        &sidecar_path,
        &PretrainSidecar {
            config: &config,
            vocabulary_size: model.vocab().len(),
            epoch_losses,
        },
    )?;
    Ok(RunRecord {
        inputs,
        artifacts: vec![output.clone(), sidecar_path],
        anchor: Some(output.clone()),
        seed: Some(a.seed),
    })
}

/// JSON written next to a model file.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelSidecar {
    /// Dataset the model was trained on; its vocabulary decodes the model.
    pub data: PathBuf,
    pub init: Option<PathBuf>,
    pub vocab_hash: String,
    pub config: TrainConfig,
    pub epoch_losses: Vec<f64>,
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let data_path = need(&a.data, "data")?;
    let output = need(&a.output, "output")?;
    let data = load_dataset(data_path)?;
    let pretrained = a.init.as_deref().map(load_vectors).transpose()?;
    let config = TrainConfig {
        variant: match a.variant {
            VariantArg::Full => Variant::Full,
            VariantArg::Word => Variant::Word,
            VariantArg::Entity => Variant::Entity,
        },
        dim: a.dim,
        negatives: a.negatives,
        dropout: a.dropout,
        batch_size: a.batch_size,
        epochs: a.epochs,
        adadelta_rho: a.adadelta_rho,
        adadelta_eps: a.adadelta_eps,
        negative_distribution: match a.negative_sampling {
            NegativeArg::Uniform => NegativeDistribution::Uniform,
            NegativeArg::Unigram => NegativeDistribution::Unigram,
        },
        seed: a.seed,
        threads: a.threads,
    };
    let outcome = textent::train(&data, pretrained.as_ref(), &config)?;
    let vocab_hash = vocabulary_hash(&data.vocab);
    save_model(output, &outcome.params, &vocab_hash)?;
    let sidecar_path = with_suffix(output, ".json");
    write_json(
        &sidecar_path,
        &ModelSidecar {
            data: data_path.clone(),
            init: a.init.clone(),
            vocab_hash,
            config,
            epoch_losses: outcome.epoch_losses,
        },
    )?;
    let mut inputs = vec![data_path.clone()];
    inputs.extend(a.init.clone());
    Ok(RunRecord {
        inputs,
        artifacts: vec![output.clone(), sidecar_path],
        anchor: Some(output.clone()),
        seed: Some(a.seed),
    })
}

struct LoadedModel {
    params: ModelParameters,
    vocab: Vocabulary,
    vocab_path: PathBuf,
}

/// Loads a model with its vocabulary, from `vocab` or else the dataset
/// recorded in the model's sidecar, and checks that the two match.
fn load_model_with_vocab(model: &Path, vocab: Option<&Path>) -> crate::Result<LoadedModel> {
    let (header, params) = load_model(model)?;
    let vocab_path = match vocab {
        Some(p) => p.to_path_buf(),
        None => {
            let sidecar_path = with_suffix(model, ".json");
            let text = std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
            let sidecar: ModelSidecar = serde_json::from_str(&text)
                .map_err(|e| Error::malformed(format!("{}: {e}", sidecar_path.display())))?;
            let beside_model = model.parent().map(|dir| dir.join(&sidecar.data));
            match beside_model {
                Some(p) if sidecar.data.is_relative() && !sidecar.data.exists() && p.exists() => p,
                _ => sidecar.data,
            }
        }
    };
    let data = load_dataset(&vocab_path)?;
    let found = vocabulary_hash(&data.vocab);
    if found != header.vocab_hash {
        return Err(Error::VocabMismatch {
            expected: header.vocab_hash,
            found,
        });
    }
    Ok(LoadedModel {
        params,
        vocab: data.vocab,
        vocab_path,
    })
}

fn encode_raw(doc: &RawDocument, loaded: &LoadedModel, min_score: f64, opts: &CompileOptions) -> crate::Result<Vec<f64>> {
    let mut prepared = normalize(&filter_annotations(doc, min_score));
    prepared.target_entity = None;
    let compiled = compile_document(&prepared, &loaded.vocab, opts)?;
    // Inference draws nothing from the rng.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    Ok(encode(&compiled, &loaded.params, 0.0, &mut rng).vector)
}

pub fn encode_cmd(a: &EncodeArgs) -> CmdResult {
    let model = need(&a.model, "model")?;
    let input = need(&a.input, "input")?;
    let output = need(&a.output, "output")?;
    let loaded = load_model_with_vocab(model, a.vocab.as_deref())?;
    let docs: Vec<RawDocument> = read_jsonl(input)?;
    let opts = CompileOptions {
        max_words: a.max_words,
        max_entities: a.max_entities,
        ..Default::default()
    };
    let mut out = String::new();
    for doc in &docs {
        doc.validate()?;
        let v = encode_raw(doc, &loaded, a.min_score, &opts)?;
        out.push_str(&doc.doc_id);
        for x in v {
            write!(out, "\t{x:?}").unwrap();
        }
        out.push('\n');
    }
    write_text(output, &out)?;
    Ok(RunRecord {
        inputs: vec![model.clone(), loaded.vocab_path, input.clone()],
        artifacts: vec![output.clone()],
        anchor: Some(output.clone()),
        seed: None,
    })
}

fn entity_vectors_from_store(store: &VectorStore) -> HashMap<String, Vec<f64>> {
    let mut map = HashMap::new();
    for (name, v) in store.iter() {
        if !name.starts_with(ENTITY_PREFIX) {
            map.insert(name.to_owned(), v.to_vec());
        }
    }
    // Prefixed entity vectors win over same-named bare tokens.
    for (name, v) in store.iter() {
        if let Some(bare) = name.strip_prefix(ENTITY_PREFIX) {
            map.insert(bare.to_owned(), v.to_vec());
        }
    }
    map
}

fn print_or_write<T: Serialize>(path: Option<&Path>, value: &T) -> crate::Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            super::emit(&format!("{}\n", serde_json::to_string_pretty(value).expect("serializable")));
            Ok(())
        }
    }
}

pub fn eval_typing(a: &EvalTypingArgs) -> CmdResult {
    let dataset_path = need(&a.dataset, "dataset")?;
    let mut inputs = Vec::new();
    let vectors = match (&a.model, &a.vectors) {
        (Some(model), _) => {
            let loaded = load_model_with_vocab(model, a.vocab.as_deref())?;
            inputs.extend([model.clone(), loaded.vocab_path.clone()]);
            loaded
                .vocab
                .target_entities
                .tokens()
                .iter()
                .enumerate()
                .map(|(i, name)| (name.clone(), loaded.params.targets.row(i).to_vec()))
                .collect()
        }
        (None, Some(path)) => {
            inputs.push(path.clone());
            entity_vectors_from_store(&load_vectors(path)?)
        }
        (None, None) => return Err(CliError::Usage("one of --model or --vectors is required".into())),
    };
    inputs.push(dataset_path.clone());
    let dataset = TypingDataset::read(dataset_path)?;
    let config = TypingConfig {
        hidden: a.hidden,
        epochs: a.epochs,
        batch_size: a.batch_size,
        adam: AdamConfig {
            lr: a.lr,
            ..Default::default()
        },
        seed: a.seed,
    };
    let bep = match a.bep {
        BepArg::Entity => BepMode::Entity,
        BepArg::Global => BepMode::Global,
    };
    let (_, report) = evaluate_typing(&vectors, &dataset, &config, bep)?;
    print_or_write(a.report.as_deref(), &report)?;
    Ok(RunRecord {
        inputs,
        artifacts: a.report.iter().cloned().collect(),
        anchor: a.report.clone(),
        seed: Some(a.seed),
    })
}

pub fn eval_classify(a: &EvalClassifyArgs) -> CmdResult {
    let model = need(&a.model, "model")?;
    let corpus = need(&a.corpus, "corpus")?;
    let loaded = load_model_with_vocab(model, a.vocab.as_deref())?;
    let docs = read_labeled_corpus(corpus)?;
    let defaults = TrainConfig::default();
    let report = run_classification(
        &docs,
        &loaded.params,
        &loaded.vocab,
        &CompileOptions {
            max_words: a.max_words,
            max_entities: a.max_entities,
            ..Default::default()
        },
        &PreprocessConfig {
            min_count: a.min_count,
            min_score: a.min_score,
        },
        &ClassifierConfig {
            epochs: a.epochs,
            batch_size: a.batch_size,
            adam: AdamConfig {
                lr: a.lr,
                ..Default::default()
            },
            dev_frac: a.dev_frac,
            seed: a.seed,
            finetune: a.finetune,
        },
        (defaults.adadelta_rho, defaults.adadelta_eps),
    )?;
    print_or_write(a.report.as_deref(), &report)?;
    Ok(RunRecord {
        inputs: vec![model.clone(), loaded.vocab_path, corpus.clone()],
        artifacts: a.report.iter().cloned().collect(),
        anchor: a.report.clone(),
        seed: Some(a.seed),
    })
}

pub fn nn(a: &NnArgs) -> CmdResult {
    let model = need(&a.model, "model")?;
    let text = need(&a.text, "text")?;
    let loaded = load_model_with_vocab(model, a.vocab.as_deref())?;
    let mut inputs = vec![model.clone(), loaded.vocab_path.clone()];
    let annotations: Vec<Annotation> = match &a.annotations {
        Some(p) => {
            inputs.push(p.clone());
            let raw = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&raw).map_err(|e| Error::malformed(format!("{}: {e}", p.display())))?
        }
        None => Vec::new(),
    };
    let query = RawDocument {
        doc_id: "query".into(),
        target_entity: None,
        tokens: text.split_whitespace().map(str::to_owned).collect(),
        annotations,
        incoming_links: 0,
    };
    query.validate()?;
    let v = encode_raw(&query, &loaded, a.min_score, &CompileOptions::default())?;
    let mut store = VectorStore::new(loaded.params.dim);
    for (i, name) in loaded.vocab.target_entities.tokens().iter().enumerate() {
        store.insert(format!("{ENTITY_PREFIX}{name}"), loaded.params.targets.row(i))?;
    }
    let neighbors = nearest_entities(&v, &store, a.top)?;
    let mut shown = String::new();
    let mut out = String::new();
    for (name, cos) in &neighbors {
        writeln!(shown, "{name}\t{cos:.4}").unwrap();
        writeln!(out, "{name}\t{cos:?}").unwrap();
    }
    super::emit(&shown);
    if let Some(path) = &a.output {
        write_text(path, &out)?;
    }
    Ok(RunRecord {
        inputs,
        artifacts: a.output.iter().cloned().collect(),
        anchor: a.output.clone(),
        seed: None,
    })
}
