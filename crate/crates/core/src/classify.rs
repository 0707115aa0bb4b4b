//! Multiclass document classification on top of TextEnt encodings.
//!
//! Documents are encoded without dropout and fed to a softmax layer with a
//! bias, trained by Adam. A random fraction of the training split serves
//! as dev data for picking the best epoch. With `finetune` the encoder
//! parameters are updated jointly.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::corpus::{compile_document, read_jsonl, Annotation, CompileOptions, Document, RawDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::{argmax, softmax, Matrix};
use crate::metrics::classification_report;
use crate::textent::{adadelta_update, backward_from_vector, encode, AdadeltaState, Gradients, ModelParameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocSplit {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub id: String,
    pub label: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub split: DocSplit,
}

impl LabeledDocument {
    pub fn to_raw(&self) -> RawDocument {
        RawDocument {
            doc_id: self.id.clone(),
            target_entity: None,
            tokens: self.tokens.clone(),
            annotations: self.annotations.clone(),
            incoming_links: 0,
        }
    }
}

/// Reads a labeled corpus and validates every document.
pub fn read_labeled_corpus(path: &Path) -> Result<Vec<LabeledDocument>> {
    let docs: Vec<LabeledDocument> = read_jsonl(path)?;
    for d in &docs {
        d.to_raw().validate()?;
    }
    Ok(docs)
}

/// Sorted distinct labels.
pub fn class_list(docs: &[LabeledDocument]) -> Vec<String> {
    let mut classes: Vec<String> = docs.iter().map(|d| d.label.clone()).collect();
    classes.sort();
    classes.dedup();
    classes
}

fn preprocess_pass(docs: &[LabeledDocument], min_count: u64) -> Vec<LabeledDocument> {
    let mut words: HashMap<&str, u64> = HashMap::new();
    let mut entities: HashMap<&str, u64> = HashMap::new();
    for d in docs {
        for t in &d.tokens {
            *words.entry(t).or_default() += 1;
        }
        for a in &d.annotations {
            *entities.entry(&a.entity).or_default() += 1;
        }
    }
    docs.iter()
        .map(|d| {
            // new_index[i] is the position of token i after removal.
            let mut new_index = Vec::with_capacity(d.tokens.len() + 1);
            let mut tokens = Vec::with_capacity(d.tokens.len());
            for t in &d.tokens {
                new_index.push(tokens.len());
                if words[t.as_str()] >= min_count {
                    tokens.push(t.clone());
                }
            }
            new_index.push(tokens.len());
            let annotations = d
                .annotations
                .iter()
                .filter(|a| entities[a.entity.as_str()] >= min_count)
                .map(|a| Annotation {
                    start: new_index[a.start],
                    end: new_index[a.end],
                    ..a.clone()
                })
                .filter(|a| a.start < a.end)
                .collect();
            LabeledDocument {
                tokens,
                annotations,
                ..d.clone()
            }
        })
        .collect()
}

/// Drops annotations scored below `min_score`, lowercases, and removes words
/// and entities occurring fewer than `min_count` times in this corpus.
/// Spans shrink around removed tokens; annotations left empty are dropped.
/// Repeats until nothing changes, so the result is idempotent.
pub fn preprocess_corpus(docs: &[LabeledDocument], min_count: u64, min_score: f64) -> Vec<LabeledDocument> {
    let mut current: Vec<LabeledDocument> = docs
        .iter()
        .map(|d| LabeledDocument {
            tokens: d.tokens.iter().map(|t| t.to_lowercase()).collect(),
            annotations: d.annotations.iter().filter(|a| a.score >= min_score).cloned().collect(),
            ..d.clone()
        })
        .collect();
    loop {
        let next = preprocess_pass(&current, min_count);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Compiles documents against the TextEnt vocabulary, without targets.
pub fn compile_labeled(docs: &[LabeledDocument], vocab: &Vocabulary, opts: &CompileOptions) -> Result<Vec<Document>> {
    docs.iter().map(|d| compile_document(&d.to_raw(), vocab, opts)).collect()
}

/// Inference-time encodings (no dropout).
pub fn encode_documents(docs: &[Document], params: &ModelParameters) -> Vec<Vec<f64>> {
    // Dropout 0 draws nothing, so the rng is never consulted.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    docs.iter().map(|d| encode(d, params, 0.0, &mut rng).vector).collect()
}

/// Compiles and encodes labeled documents.
pub fn encode_corpus(
    docs: &[LabeledDocument],
    params: &ModelParameters,
    vocab: &Vocabulary,
    opts: &CompileOptions,
) -> Result<Vec<Vec<f64>>> {
    Ok(encode_documents(&compile_labeled(docs, vocab, opts)?, params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    /// `classes × d`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        SoftmaxClassifier {
            weights: Matrix::zeros(n_classes, dim),
            bias: vec![0.0; n_classes],
        }
    }

    pub fn logits(&self, v: &[f64]) -> Vec<f64> {
        let mut z = self.weights.mul_vec(v);
        z.iter_mut().zip(&self.bias).for_each(|(z, b)| *z += b);
        z
    }
}

/// Most probable class (ties to the lower index) and the class probabilities.
pub fn classify(v: &[f64], clf: &SoftmaxClassifier) -> (usize, Vec<f64>) {
    let (probs, _) = softmax(&clf.logits(v));
    (argmax(&probs), probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub dev_frac: f64,
    pub seed: u64,
    pub finetune: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig::default(),
            dev_frac: 0.1,
            seed: 7,
            finetune: false,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dev_frac) {
            return Err(Error::InvalidArgument("dev fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierOutcome {
    pub classifier: SoftmaxClassifier,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
    /// Dev accuracy after each epoch.
    pub dev_curve: Vec<f64>,
}

/// Splits off `round(dev_frac · n)` random training indices as dev, keeping
/// at least one training example. Both lists come back sorted.
pub fn dev_split(n: usize, dev_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_dev = ((dev_frac * n as f64).round() as usize).min(n.saturating_sub(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut dev = order[..n_dev].to_vec();
    let mut train = order[n_dev..].to_vec();
    dev.sort_unstable();
    train.sort_unstable();
    (train, dev)
}

fn accuracy(clf: &SoftmaxClassifier, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
    let hits = xs.iter().zip(ys).filter(|(x, &y)| classify(x, clf).0 == y).count();
    hits as f64 / xs.len() as f64
}

/// Cross-entropy gradient at the logits: `p − onehot(y)`.
fn logit_gradient(clf: &SoftmaxClassifier, x: &[f64], y: usize) -> Vec<f64> {
    let (mut dz, _) = softmax(&clf.logits(x));
    dz[y] -= 1.0;
    dz
}

/// Softmax regression over fixed vectors. The epoch with the best dev
/// accuracy is kept (ties to the earliest; the last epoch without dev data).
pub fn train_classifier(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    dev_x: &[Vec<f64>],
    dev_y: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
) -> Result<ClassifierOutcome> {
    config.validate()?;
    if train_x.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if train_x.len() != train_y.len() || dev_x.len() != dev_y.len() {
        return Err(Error::LengthMismatch {
            left: train_x.len() + dev_x.len(),
            right: train_y.len() + dev_y.len(),
        });
    }
    let dim = train_x[0].len();
    if let Some(bad) = train_x.iter().chain(dev_x).find(|x| x.len() != dim) {
        return Err(Error::ShapeMismatch(format!("vector of length {}, expected {dim}", bad.len())));
    }
    if let Some(&bad) = train_y.iter().chain(dev_y).find(|&&y| y >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} outside {n_classes} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut clf = SoftmaxClassifier::zeros(n_classes, dim);
    let mut adam = Adam::new(config.adam, &[n_classes * dim, n_classes]);
    let mut best = (clf.clone(), 0, f64::NEG_INFINITY);
    let mut dev_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut gw = Matrix::zeros(n_classes, dim);
            let mut gb = vec![0.0; n_classes];
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let dz = logit_gradient(&clf, &train_x[i], train_y[i]);
                gw.add_outer(scale, &dz, &train_x[i]);
                gb.iter_mut().zip(&dz).for_each(|(g, d)| *g += scale * d);
            }
            adam.update(&mut [clf.weights.as_mut_slice(), &mut clf.bias], &[gw.as_slice(), &gb]);
        }
        let score = if dev_x.is_empty() { 0.0 } else { accuracy(&clf, dev_x, dev_y) };
        dev_curve.push(score);
        if score > best.2 || dev_x.is_empty() {
            best = (clf.clone(), epoch, score);
        }
    }
    Ok(ClassifierOutcome {
        classifier: best.0,
        best_epoch: best.1,
        dev_curve,
    })
}

/// Joint training of the classifier and the encoder. The classifier uses
/// Adam; the encoder keeps its own Adadelta rule with the given `rho`/`eps`.
#[allow(clippy::too_many_arguments)]
pub fn finetune_classifier(
    params: &ModelParameters,
    train_docs: &[Document],
    train_y: &[usize],
    dev_docs: &[Document],
    dev_y: &[usize],
    n_classes: usize,
    config: &ClassifierConfig,
    adadelta: (f64, f64),
) -> Result<(ClassifierOutcome, ModelParameters)> {
    config.validate()?;
    if train_docs.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let dim = params.dim;
    let mut params = params.clone();
    let mut state = AdadeltaState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut clf = SoftmaxClassifier::zeros(n_classes, dim);
    let mut adam = Adam::new(config.adam, &[n_classes * dim, n_classes]);
    let mut best = (clf.clone(), params.clone(), 0, f64::NEG_INFINITY);
    let mut dev_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_docs.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut gw = Matrix::zeros(n_classes, dim);
            let mut gb = vec![0.0; n_classes];
            let mut grads = Gradients::new();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let enc = encode(&train_docs[i], &params, 0.0, &mut rng);
                let dz = logit_gradient(&clf, &enc.vector, train_y[i]);
                gw.add_outer(scale, &dz, &enc.vector);
                gb.iter_mut().zip(&dz).for_each(|(g, d)| *g += scale * d);
                let grad_v: Vec<f64> = clf.weights.transpose_mul_vec(&dz).iter().map(|g| g * scale).collect();
                backward_from_vector(&enc, &grad_v, &params, &mut grads);
            }
            adam.update(&mut [clf.weights.as_mut_slice(), &mut clf.bias], &[gw.as_slice(), &gb]);
            adadelta_update(&mut params, &mut state, &grads, adadelta.0, adadelta.1)?;
        }
        let score = if dev_docs.is_empty() {
            0.0
        } else {
            accuracy(&clf, &encode_documents(dev_docs, &params), dev_y)
        };
        dev_curve.push(score);
        if score > best.3 || dev_docs.is_empty() {
            best = (clf.clone(), params.clone(), epoch, score);
        }
    }
    let outcome = ClassifierOutcome {
        classifier: best.0,
        best_epoch: best.2,
        dev_curve,
    };
    Ok((outcome, best.1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: BTreeMap<String, f64>,
    pub best_epoch: usize,
    pub dev_accuracy: Vec<f64>,
    /// `"frozen"` or `"finetuned"`.
    pub encoder: String,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
}

/// Preprocessing settings for [`run_classification`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub min_count: u64,
    pub min_score: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_count: 5,
            min_score: 0.05,
        }
    }
}

/// Preprocess, encode, split, train and score on the test split.
pub fn run_classification(
    docs: &[LabeledDocument],
    params: &ModelParameters,
    vocab: &Vocabulary,
    compile: &CompileOptions,
    preprocess: &PreprocessConfig,
    config: &ClassifierConfig,
    adadelta: (f64, f64),
) -> Result<ClassifyReport> {
    let docs = preprocess_corpus(docs, preprocess.min_count, preprocess.min_score);
    let classes = class_list(&docs);
    let class_id: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let labels: Vec<usize> = docs.iter().map(|d| class_id[d.label.as_str()]).collect();
    let compiled = compile_labeled(&docs, vocab, compile)?;

    let pool: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].split == DocSplit::Train).collect();
    let test: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].split == DocSplit::Test).collect();
    if pool.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument("corpus has no test documents".into()));
    }
    let (train_pos, dev_pos) = dev_split(pool.len(), config.dev_frac, config.seed);
    let train: Vec<usize> = train_pos.iter().map(|&p| pool[p]).collect();
    let dev: Vec<usize> = dev_pos.iter().map(|&p| pool[p]).collect();
    let pick_docs = |idx: &[usize]| idx.iter().map(|&i| compiled[i].clone()).collect::<Vec<_>>();
    let pick_labels = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();

    let (outcome, encoder_params) = if config.finetune {
        let (o, p) = finetune_classifier(
            params,
            &pick_docs(&train),
            &pick_labels(&train),
            &pick_docs(&dev),
            &pick_labels(&dev),
            classes.len(),
            config,
            adadelta,
        )?;
        (o, std::borrow::Cow::Owned(p))
    } else {
        let vectors = encode_documents(&compiled, params);
        let pick_vecs = |idx: &[usize]| idx.iter().map(|&i| vectors[i].clone()).collect::<Vec<_>>();
        let o = train_classifier(
            &pick_vecs(&train),
            &pick_labels(&train),
            &pick_vecs(&dev),
            &pick_labels(&dev),
            classes.len(),
            config,
        )?;
        (o, std::borrow::Cow::Borrowed(params))
    };
    let test_vecs = encode_documents(&pick_docs(&test), &encoder_params);
    let predicted: Vec<usize> = test_vecs.iter().map(|v| classify(v, &outcome.classifier).0).collect();
    let report = classification_report(&predicted, &pick_labels(&test), classes.len())?;
    Ok(ClassifyReport {
        accuracy: report.accuracy,
        macro_f1: report.macro_f1,
        per_class_f1: classes.iter().cloned().zip(report.per_class_f1).collect(),
        best_epoch: outcome.best_epoch,
        dev_accuracy: outcome.dev_curve,
        encoder: if config.finetune { "finetuned" } else { "frozen" }.into(),
        n_train: train.len(),
        n_dev: dev.len(),
        n_test: test.len(),
    })
}
