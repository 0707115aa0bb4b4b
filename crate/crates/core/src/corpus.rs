//! Annotated corpus ingestion.
//!
//! Raw documents come in as JSON lines: tokens plus entity annotations over
//! token spans. The pipeline here selects training documents, drops
//! low-relevance annotations, lowercases, builds frequency-cut vocabularies
//! for words, contextual entities and target entities, and compiles each
//! document into id space. It also produces the entity-replaced token stream
//! consumed by skip-gram pretraining.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefix that marks entity tokens in the pretraining stream and in vector files.
pub const ENTITY_PREFIX: &str = "ENTITY/";

/// Optional prefix for word tokens in vector files.
pub const WORD_PREFIX: &str = "WORD/";

fn full_score() -> f64 {
    1.0
}

/// A token span `[start, end)` linked to an entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub entity: String,
    /// Linker relevance; gold markup carries 1.0.
    #[serde(default = "full_score")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    #[serde(rename = "id")]
    pub doc_id: String,
    /// Entity the document describes; `None` for documents outside the KB.
    #[serde(default)]
    pub target_entity: Option<String>,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub incoming_links: u64,
}

impl RawDocument {
    /// Checks span bounds, ordering, and score range.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidDocument {
            id: self.doc_id.clone(),
            reason,
        };
        let mut prev_end = 0;
        for (i, ann) in self.annotations.iter().enumerate() {
            if ann.start >= ann.end {
                return Err(bad(format!("annotation {i} has empty span")));
            }
            if ann.end > self.tokens.len() {
                return Err(bad(format!(
                    "annotation {i} ends at {} past {} tokens",
                    ann.end,
                    self.tokens.len()
                )));
            }
            if ann.start < prev_end {
                return Err(bad(format!("annotation {i} overlaps or is out of order")));
            }
            if !(0.0..=1.0).contains(&ann.score) {
                return Err(bad(format!("annotation {i} score {} outside [0,1]", ann.score)));
            }
            prev_end = ann.end;
        }
        Ok(())
    }

    /// Entity names of the annotations, in order.
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.annotations.iter().map(|a| a.entity.as_str())
    }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_owned(),
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("serializable value");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads and validates an annotated corpus.
pub fn read_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    let docs: Vec<RawDocument> = read_jsonl(path)?;
    for doc in &docs {
        doc.validate()?;
    }
    Ok(docs)
}

/// Reads an entity list, one name per line.
pub fn read_entity_list(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Keeps annotations scoring at least `min_score`.
pub fn filter_annotations(doc: &RawDocument, min_score: f64) -> RawDocument {
    RawDocument {
        annotations: doc
            .annotations
            .iter()
            .filter(|a| a.score >= min_score)
            .cloned()
            .collect(),
        ..doc.clone()
    }
}

/// Keeps documents with enough incoming links, or whose target is in `keep`.
pub fn select_training_documents(
    corpus: &[RawDocument],
    min_links: u64,
    keep: &HashSet<String>,
) -> Vec<RawDocument> {
    corpus
        .iter()
        .filter(|d| {
            d.incoming_links >= min_links
                || d.target_entity.as_ref().is_some_and(|t| keep.contains(t))
        })
        .cloned()
        .collect()
}

/// Lowercases every token. Entity names are left alone.
pub fn normalize(doc: &RawDocument) -> RawDocument {
    RawDocument {
        tokens: doc.tokens.iter().map(|t| t.to_lowercase()).collect(),
        ..doc.clone()
    }
}

/// Token to dense-id map with corpus counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Namespace {
    tokens: Vec<String>,
    counts: Vec<u64>,
    ids: HashMap<String, u32>,
}

impl Namespace {
    /// Keeps tokens with `count >= min_count`; ids go by descending count,
    /// ties in lexicographic order.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Self {
        let mut kept: Vec<(String, u64)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_entries(kept)
    }

    /// Builds a namespace keeping the given order.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let mut ns = Namespace::default();
        for (token, count) in entries {
            ns.push(token, count);
        }
        ns
    }

    fn push(&mut self, token: String, count: u64) {
        let id = self.tokens.len() as u32;
        self.ids.insert(token.clone(), id);
        self.tokens.push(token);
        self.counts.push(count);
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn lookup(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.counts.get(id as usize).copied()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, u64)> {
        self.tokens
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (t, &c))| (i as u32, t.as_str(), c))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    pub words: Namespace,
    pub ctx_entities: Namespace,
    pub target_entities: Namespace,
}

/// Counts words, annotated entities and targets, then applies the cutoffs.
///
/// Every token counts as a word occurrence, including tokens inside
/// annotated spans.
pub fn build_vocabularies(
    corpus: &[RawDocument],
    min_word_count: u64,
    min_entity_count: u64,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut words: HashMap<String, u64> = HashMap::new();
    let mut entities: HashMap<String, u64> = HashMap::new();
    let mut targets: HashMap<String, u64> = HashMap::new();
    for doc in corpus {
        for tok in &doc.tokens {
            *words.entry(tok.clone()).or_default() += 1;
        }
        for ent in doc.entities() {
            *entities.entry(ent.to_owned()).or_default() += 1;
        }
        if let Some(t) = &doc.target_entity {
            *targets.entry(t.clone()).or_default() += 1;
        }
    }
    Ok(Vocabulary {
        words: Namespace::from_counts(words, min_word_count),
        ctx_entities: Namespace::from_counts(entities, min_entity_count),
        target_entities: Namespace::from_counts(targets, 1),
    })
}

/// A document in id space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    /// `None` for documents outside the KB.
    pub target: Option<u32>,
    pub words: Vec<u32>,
    pub ctx_entities: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub max_words: usize,
    pub max_entities: usize,
    /// Truncate the raw token/annotation lists before dropping
    /// out-of-vocabulary items instead of after.
    pub truncate_before_oov: bool,
    /// Keep only the first occurrence of each contextual entity.
    pub dedup_entities: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_words: 2000,
            max_entities: 300,
            truncate_before_oov: false,
            dedup_entities: false,
        }
    }
}

impl CompileOptions {
    /// No truncation; used when encoding documents at inference time.
    pub fn unbounded() -> Self {
        CompileOptions {
            max_words: usize::MAX,
            max_entities: usize::MAX,
            ..Default::default()
        }
    }
}

fn to_ids<'a>(
    items: impl Iterator<Item = &'a str>,
    ns: &Namespace,
    limit: usize,
    truncate_before_oov: bool,
    dedup: bool,
) -> Vec<u32> {
    let mut seen = BTreeSet::new();
    let mut keep = |id: u32| !dedup || seen.insert(id);
    if truncate_before_oov {
        items
            .take(limit)
            .filter_map(|t| ns.id_of(t))
            .filter(|&id| keep(id))
            .collect()
    } else {
        items
            .filter_map(|t| ns.id_of(t))
            .filter(|&id| keep(id))
            .take(limit)
            .collect()
    }
}

/// Maps a document into id space. Out-of-vocabulary items are dropped.
pub fn compile_document(
    doc: &RawDocument,
    vocab: &Vocabulary,
    opts: &CompileOptions,
) -> Result<Document> {
    let target = match &doc.target_entity {
        Some(name) => Some(
            vocab
                .target_entities
                .id_of(name)
                .ok_or_else(|| Error::UnknownTarget(name.clone()))?,
        ),
        None => None,
    };
    let words = to_ids(
        doc.tokens.iter().map(String::as_str),
        &vocab.words,
        opts.max_words,
        opts.truncate_before_oov,
        false,
    );
    let ctx_entities = to_ids(
        doc.entities(),
        &vocab.ctx_entities,
        opts.max_entities,
        opts.truncate_before_oov,
        opts.dedup_entities,
    );
    Ok(Document {
        target,
        words,
        ctx_entities,
    })
}

/// Training documents in id space, one per target entity.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledDataset {
    pub vocab: Vocabulary,
    pub documents: Vec<Document>,
}

impl CompiledDataset {
    /// Target id of document `i`. Compiled datasets always carry targets.
    pub fn target(&self, i: usize) -> u32 {
        self.documents[i].target.expect("compiled documents have targets")
    }
}

/// Compiles every document; each must name a distinct target entity.
pub fn compile_dataset(
    corpus: &[RawDocument],
    vocab: Vocabulary,
    opts: &CompileOptions,
) -> Result<CompiledDataset> {
    let mut seen = HashSet::new();
    let mut documents = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let name = doc
            .target_entity
            .as_ref()
            .ok_or_else(|| Error::MissingTarget(doc.doc_id.clone()))?;
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateTarget(name.clone()));
        }
        documents.push(compile_document(doc, &vocab, opts)?);
    }
    Ok(CompiledDataset { vocab, documents })
}

/// Settings for [`build_dataset`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub min_word_count: u64,
    pub min_entity_count: u64,
    pub min_links: u64,
    pub min_score: f64,
    pub compile: CompileOptions,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_word_count: 5,
            min_entity_count: 3,
            min_links: 5,
            min_score: 0.05,
            compile: CompileOptions::default(),
        }
    }
}

/// Applies annotation filtering and lowercasing to every document.
pub fn prepare(corpus: &[RawDocument], min_score: f64) -> Vec<RawDocument> {
    corpus
        .iter()
        .map(|d| normalize(&filter_annotations(d, min_score)))
        .collect()
}

/// Full training-corpus pipeline: select, filter, normalize, count, compile.
pub fn build_dataset(
    corpus: &[RawDocument],
    keep: &HashSet<String>,
    config: &CorpusConfig,
) -> Result<CompiledDataset> {
    let selected = select_training_documents(corpus, config.min_links, keep);
    let prepared = prepare(&selected, config.min_score);
    let vocab = build_vocabularies(&prepared, config.min_word_count, config.min_entity_count)?;
    compile_dataset(&prepared, vocab, &config.compile)
}

/// Replaces each annotated span with a single `ENTITY/<name>` token.
pub fn entity_replaced_tokens(doc: &RawDocument) -> Vec<String> {
    let mut out = Vec::with_capacity(doc.tokens.len());
    let mut anns = doc.annotations.iter().peekable();
    let mut i = 0;
    while i < doc.tokens.len() {
        match anns.peek() {
            Some(a) if a.start == i => {
                out.push(format!("{ENTITY_PREFIX}{}", a.entity));
                i = a.end;
                anns.next();
            }
            _ => {
                out.push(doc.tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// One entity-replaced token sequence per document.
pub fn emit_pretrain_stream(corpus: &[RawDocument]) -> Vec<Vec<String>> {
    corpus.iter().map(entity_replaced_tokens).collect()
}
