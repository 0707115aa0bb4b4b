use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "textent", version, about = "Joint word, entity and document embeddings")]
pub struct Cli {
    /// TOML file of flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter an annotated corpus and compile it into a binary dataset.
    BuildCorpus(BuildCorpusArgs),
    /// Train skip-gram vectors over the entity-replaced corpus.
    Pretrain(PretrainArgs),
    /// Train a TextEnt model on a compiled dataset.
    Train(TrainArgs),
    /// Encode documents into vectors with a trained model.
    Encode(EncodeArgs),
    /// Fine-grained entity typing on top of entity vectors.
    EvalTyping(EvalTypingArgs),
    /// Document classification on top of document encodings.
    EvalClassify(EvalClassifyArgs),
    /// Nearest target entities to an encoded sentence.
    Nn(NnArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BuildCorpus(_) => "build-corpus",
            Command::Pretrain(_) => "pretrain",
            Command::Train(_) => "train",
            Command::Encode(_) => "encode",
            Command::EvalTyping(_) => "eval-typing",
            Command::EvalClassify(_) => "eval-classify",
            Command::Nn(_) => "nn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Full,
    Word,
    Entity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeArg {
    Uniform,
    Unigram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BepArg {
    Entity,
    Global,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BuildCorpusArgs {
    /// Annotated corpus, JSON lines.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub min_word_count: u64,
    #[arg(long, default_value_t = 3)]
    pub min_entity_count: u64,
    #[arg(long, default_value_t = 5)]
    pub min_links: u64,
    /// Entities kept regardless of link count, one per line.
    #[arg(long)]
    pub keep_entities: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub min_score: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_words: usize,
    #[arg(long, default_value_t = 300)]
    pub max_entities: usize,
    /// Truncate before dropping out-of-vocabulary items.
    #[arg(long)]
    pub truncate_before_oov: bool,
    /// Count each contextual entity once per document.
    #[arg(long)]
    pub dedup_entities: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PretrainArgs {
    /// A compiled dataset (its token stream is read from the companion
    /// `.pretrain.jsonl`) or a raw annotated corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 15)]
    pub negatives: usize,
    #[arg(long, default_value_t = 3)]
    pub min_count: u64,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub subsample: f64,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    /// Annotation cutoff when reading a raw corpus.
    #[arg(long, default_value_t = 0.05)]
    pub min_score: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pretrained vectors in text format.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::Full)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.95)]
    pub adadelta_rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub adadelta_eps: f64,
    #[arg(long, value_enum, default_value_t = NegativeArg::Uniform)]
    pub negative_sampling: NegativeArg,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Compiled dataset holding the model's vocabulary; defaults to the
    /// one recorded next to the model.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Documents, JSON lines.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub min_score: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_words: usize,
    #[arg(long, default_value_t = 300)]
    pub max_entities: usize,
    /// Output TSV: id, then one column per dimension.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalTypingArgs {
    /// Use the model's target-entity vectors.
    #[arg(long, conflicts_with = "vectors")]
    pub model: Option<PathBuf>,
    /// Use entity vectors from a text vector file instead of a model.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Typing dataset TSV: entity, split, comma-separated types.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub hidden: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = BepArg::Entity)]
    pub bep: BepArg,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalClassifyArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Labeled corpus, JSON lines.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub dev_frac: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = 0.05)]
    pub min_score: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_words: usize,
    #[arg(long, default_value_t = 300)]
    pub max_entities: usize,
    /// Update the encoder jointly with the classifier.
    #[arg(long)]
    pub finetune: bool,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct NnArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Query sentence; tokens are split on whitespace.
    #[arg(long)]
    pub text: Option<String>,
    /// JSON array of annotations over the query's tokens.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, default_value_t = 0.05)]
    pub min_score: f64,
    /// Also write the neighbors as TSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
