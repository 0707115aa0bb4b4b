//! Fine-grained entity typing over fixed entity vectors.
//!
//! A one-hidden-layer MLP `σ(W_o tanh(W_h x))` is trained with per-type
//! binary cross-entropy and Adam. The epoch with the best dev P@1 is kept,
//! then a probability threshold is tuned per type on dev to maximize that
//! type's F1.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, Matrix};
use crate::metrics::{
    breakeven_point, f1_from_counts, global_breakeven_point, macro_f1_entities, micro_f1,
    precision_at_1, rank_types, strict_accuracy, TypeSet,
};

/// Probability clamp applied before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-7;

/// Threshold that assigns nothing, since every probability is at most 1.
pub const NO_ASSIGNMENT: f64 = 1.0 + f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::malformed(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypingDataset {
    /// Type inventory; type ids index into it.
    pub types: Vec<String>,
    pub entities: Vec<String>,
    pub gold: Vec<TypeSet>,
    pub splits: Vec<Split>,
}

impl TypingDataset {
    /// Parses `entity<TAB>split<TAB>type,type,...` lines. Blank lines and
    /// lines starting with `#` are skipped. The inventory is the sorted set
    /// of type names seen.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::malformed(format!("line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            let [entity, split, types] = fields[..] else {
                return Err(at(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            if entity.is_empty() {
                return Err(at("empty entity name".into()));
            }
            if !seen.insert(entity.to_owned()) {
                return Err(at(format!("duplicate entity {entity:?}")));
            }
            let split: Split = split.parse().map_err(|e: Error| at(e.to_string()))?;
            let types: Vec<&str> = types.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
            if types.is_empty() {
                return Err(at(format!("entity {entity:?} has no types")));
            }
            rows.push((entity.to_owned(), split, types.into_iter().map(str::to_owned).collect::<Vec<_>>()));
        }
        let mut types: Vec<String> = rows.iter().flat_map(|r| r.2.iter().cloned()).collect();
        types.sort();
        types.dedup();
        let index: HashMap<&str, usize> = types.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let gold = rows
            .iter()
            .map(|r| r.2.iter().map(|t| index[t.as_str()]).collect())
            .collect();
        Ok(TypingDataset {
            entities: rows.iter().map(|r| r.0.clone()).collect(),
            splits: rows.iter().map(|r| r.1).collect(),
            types,
            gold,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::MalformedFile(m) => Error::MalformedFile(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for ((entity, split), gold) in self.entities.iter().zip(&self.splits).zip(&self.gold) {
            let split = match split {
                Split::Train => "train",
                Split::Dev => "dev",
                Split::Test => "test",
            };
            let types: Vec<&str> = gold.iter().map(|&t| self.types[t].as_str()).collect();
            out.push_str(&format!("{entity}\t{split}\t{}\n", types.join(",")));
        }
        out
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.entities.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypingModel {
    /// `h × d`.
    pub hidden: Matrix,
    /// `|T| × h`.
    pub output: Matrix,
}

impl TypingModel {
    /// Glorot-uniform initialization.
    pub fn glorot(dim: usize, hidden: usize, n_types: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        TypingModel {
            hidden: Matrix::uniform(hidden, dim, bound(dim, hidden), rng),
            output: Matrix::uniform(n_types, hidden, bound(hidden, n_types), rng),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.is_finite() && self.output.is_finite()
    }
}

fn forward(x: &[f64], model: &TypingModel) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != model.hidden.cols() || model.output.cols() != model.hidden.rows() {
        return Err(Error::ShapeMismatch(format!(
            "input of length {} into hidden {:?} and output {:?}",
            x.len(),
            model.hidden.shape(),
            model.output.shape()
        )));
    }
    let h: Vec<f64> = model.hidden.mul_vec(x).into_iter().map(f64::tanh).collect();
    let probs = model.output.mul_vec(&h).into_iter().map(sigmoid).collect();
    Ok((h, probs))
}

/// Per-type probabilities for one entity vector.
pub fn mlp_forward(x: &[f64], model: &TypingModel) -> Result<Vec<f64>> {
    forward(x, model).map(|(_, p)| p)
}

/// Binary cross-entropy summed over types, with clamped probabilities.
pub fn bce_loss(probs: &[f64], gold: &TypeSet) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if gold.contains(&t) {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}

/// Loss and gradients with respect to `(hidden, output)`, accumulated into
/// the given matrices with weight `scale`.
pub fn mlp_backward(
    x: &[f64],
    gold: &TypeSet,
    model: &TypingModel,
    scale: f64,
    grad_hidden: &mut Matrix,
    grad_output: &mut Matrix,
) -> Result<f64> {
    let (h, probs) = forward(x, model)?;
    let loss = bce_loss(&probs, gold);
    let dz: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(t, &p)| p - if gold.contains(&t) { 1.0 } else { 0.0 })
        .collect();
    grad_output.add_outer(scale, &dz, &h);
    let dh = model.output.transpose_mul_vec(&dz);
    let da: Vec<f64> = dh.iter().zip(&h).map(|(g, hv)| g * (1.0 - hv * hv)).collect();
    grad_hidden.add_outer(scale, &da, x);
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TypingConfig {
    fn default() -> Self {
        TypingConfig {
            hidden: 200,
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TypingOutcome {
    /// Snapshot from the best dev epoch.
    pub model: TypingModel,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
    /// Dev P@1 after each epoch.
    pub dev_curve: Vec<f64>,
    /// Mean train loss of each epoch.
    pub train_losses: Vec<f64>,
}

fn vector_for<'a>(vectors: &'a HashMap<String, Vec<f64>>, name: &str, dim: usize) -> Result<&'a [f64]> {
    let v = vectors.get(name).ok_or_else(|| Error::MissingVector(name.to_owned()))?;
    if v.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "vector for {name:?} has length {}, expected {dim}",
            v.len()
        )));
    }
    Ok(v)
}

fn dev_p_at_1(model: &TypingModel, xs: &[&[f64]], gold: &[TypeSet]) -> Result<f64> {
    let ranked = xs
        .iter()
        .map(|x| mlp_forward(x, model).map(|p| rank_types(&p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(precision_at_1(&ranked, gold))
}

/// Trains the MLP on the train split, keeping the best dev-P@1 epoch (ties
/// to the earliest; the last epoch when dev is empty).
pub fn train_typing(
    vectors: &HashMap<String, Vec<f64>>,
    data: &TypingDataset,
    config: &TypingConfig,
) -> Result<TypingOutcome> {
    let train_idx = data.indices(Split::Train);
    let dev_idx = data.indices(Split::Dev);
    if train_idx.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::InvalidArgument("batch size and hidden units must be positive".into()));
    }
    let dim = vectors
        .get(&data.entities[train_idx[0]])
        .ok_or_else(|| Error::MissingVector(data.entities[train_idx[0]].clone()))?
        .len();
    let train_x = train_idx
        .iter()
        .map(|&i| vector_for(vectors, &data.entities[i], dim))
        .collect::<Result<Vec<_>>>()?;
    let dev_x = dev_idx
        .iter()
        .map(|&i| vector_for(vectors, &data.entities[i], dim))
        .collect::<Result<Vec<_>>>()?;
    let dev_gold: Vec<TypeSet> = dev_idx.iter().map(|&i| data.gold[i].clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = TypingModel::glorot(dim, config.hidden, data.n_types(), &mut rng);
    let mut adam = Adam::new(config.adam, &[model.hidden.as_slice().len(), model.output.as_slice().len()]);
    let mut best = (model.clone(), 0usize, f64::NEG_INFINITY);
    let mut dev_curve = Vec::with_capacity(config.epochs);
    let mut train_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_idx.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut gh = Matrix::zeros(model.hidden.rows(), model.hidden.cols());
            let mut go = Matrix::zeros(model.output.rows(), model.output.cols());
            let scale = 1.0 / batch.len() as f64;
            for &j in batch {
                total += mlp_backward(train_x[j], &data.gold[train_idx[j]], &model, scale, &mut gh, &mut go)?;
            }
            adam.update(
                &mut [model.hidden.as_mut_slice(), model.output.as_mut_slice()],
                &[gh.as_slice(), go.as_slice()],
            );
        }
        train_losses.push(total / train_idx.len() as f64);
        let score = if dev_x.is_empty() {
            0.0
        } else {
            dev_p_at_1(&model, &dev_x, &dev_gold)?
        };
        dev_curve.push(score);
        if score > best.2 || dev_x.is_empty() {
            best = (model.clone(), epoch, score);
        }
    }
    Ok(TypingOutcome {
        model: best.0,
        best_epoch: best.1,
        dev_curve,
        train_losses,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeThresholds {
    pub thresholds: Vec<f64>,
    /// Dev F1 achieved by each threshold.
    pub dev_f1: Vec<f64>,
}

/// Per type, the threshold among the distinct dev probabilities and
/// [`NO_ASSIGNMENT`] that maximizes F1 of `p ≥ θ` against gold membership.
/// Ties go to the larger threshold.
pub fn tune_thresholds(probs: &[Vec<f64>], gold: &[TypeSet], n_types: usize) -> TypeThresholds {
    assert_eq!(probs.len(), gold.len());
    let mut thresholds = Vec::with_capacity(n_types);
    let mut dev_f1 = Vec::with_capacity(n_types);
    for t in 0..n_types {
        let mut scored: Vec<(f64, bool)> = probs.iter().zip(gold).map(|(p, g)| (p[t], g.contains(&t))).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let positives = scored.iter().filter(|s| s.1).count();
        let (mut best_theta, mut best_f1) = (NO_ASSIGNMENT, 0.0);
        let (mut tp, mut fp) = (0, 0);
        let mut i = 0;
        while i < scored.len() {
            let theta = scored[i].0;
            while i < scored.len() && scored[i].0 == theta {
                if scored[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            let f1 = f1_from_counts(tp, fp, positives - tp);
            if f1 > best_f1 {
                best_theta = theta;
                best_f1 = f1;
            }
        }
        thresholds.push(best_theta);
        dev_f1.push(best_f1);
    }
    TypeThresholds { thresholds, dev_f1 }
}

/// `{t : p_t ≥ θ_t}`.
pub fn predict_types(probs: &[f64], thresholds: &[f64]) -> TypeSet {
    probs
        .iter()
        .zip(thresholds)
        .enumerate()
        .filter(|(_, (p, theta))| p >= theta)
        .map(|(t, _)| t)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BepMode {
    /// Per-entity R-precision, averaged.
    #[default]
    Entity,
    /// One pooled ranking over all entity–type pairs.
    Global,
}

impl FromStr for BepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity" => Ok(BepMode::Entity),
            "global" => Ok(BepMode::Global),
            other => Err(Error::InvalidArgument(format!("unknown BEP mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingReport {
    pub p_at_1: f64,
    pub bep: f64,
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub best_epoch: usize,
    pub per_type_thresholds: BTreeMap<String, f64>,
    pub bep_mode: BepMode,
    pub n_test: usize,
    /// Test entities scored from the zero vector for lack of an embedding.
    pub missing_test_vectors: usize,
    pub dev_p_at_1: Vec<f64>,
}

/// Trains, tunes thresholds on dev and scores the test split.
pub fn evaluate_typing(
    vectors: &HashMap<String, Vec<f64>>,
    data: &TypingDataset,
    config: &TypingConfig,
    bep_mode: BepMode,
) -> Result<(TypingOutcome, TypingReport)> {
    let outcome = train_typing(vectors, data, config)?;
    let model = &outcome.model;
    let dim = model.hidden.cols();
    let probs_for = |idx: &[usize], missing: &mut usize| -> Result<Vec<Vec<f64>>> {
        idx.iter()
            .map(|&i| match vectors.get(&data.entities[i]) {
                Some(v) => mlp_forward(v, model),
                None => {
                    *missing += 1;
                    mlp_forward(&vec![0.0; dim], model)
                }
            })
            .collect()
    };
    let dev_idx = data.indices(Split::Dev);
    let test_idx = data.indices(Split::Test);
    let mut unused = 0;
    let dev_probs = probs_for(&dev_idx, &mut unused)?;
    let dev_gold: Vec<TypeSet> = dev_idx.iter().map(|&i| data.gold[i].clone()).collect();
    let thresholds = tune_thresholds(&dev_probs, &dev_gold, data.n_types());

    let mut missing = 0;
    let test_probs = probs_for(&test_idx, &mut missing)?;
    let test_gold: Vec<TypeSet> = test_idx.iter().map(|&i| data.gold[i].clone()).collect();
    let ranked: Vec<Vec<usize>> = test_probs.iter().map(|p| rank_types(p)).collect();
    let predicted: Vec<TypeSet> = test_probs
        .iter()
        .map(|p| predict_types(p, &thresholds.thresholds))
        .collect();
    let bep = match bep_mode {
        BepMode::Entity => breakeven_point(&ranked, &test_gold),
        BepMode::Global => global_breakeven_point(&test_probs, &test_gold),
    };
    let report = TypingReport {
        p_at_1: precision_at_1(&ranked, &test_gold),
        bep,
        accuracy: strict_accuracy(&predicted, &test_gold),
        micro_f1: micro_f1(&predicted, &test_gold),
        macro_f1: macro_f1_entities(&predicted, &test_gold),
        best_epoch: outcome.best_epoch,
        per_type_thresholds: data.types.iter().cloned().zip(thresholds.thresholds.iter().copied()).collect(),
        bep_mode,
        n_test: test_idx.len(),
        missing_test_vectors: missing,
        dev_p_at_1: outcome.dev_curve.clone(),
    };
    Ok((outcome, report))
}
