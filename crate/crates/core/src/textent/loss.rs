use std::collections::BTreeMap;

use rand::Rng;

use super::{DocumentEncoding, ModelParameters, Variant};
use crate::linalg::{axpy, dot, softmax, Matrix};
use crate::sgns::SamplingTable;

/// `k` target ids drawn uniformly from `[0, n_targets)`, redrawing hits on
/// `target`. Duplicates are allowed.
pub fn sample_negatives<R: Rng + ?Sized>(target: u32, k: usize, n_targets: usize, rng: &mut R) -> Vec<u32> {
    assert!(n_targets >= 2, "negative sampling needs at least two target entities");
    (0..k)
        .map(|_| loop {
            let id = rng.gen_range(0..n_targets as u32);
            if id != target {
                break id;
            }
        })
        .collect()
}

/// Like [`sample_negatives`], drawing from a frequency-shaped table.
pub fn sample_negatives_weighted<R: Rng + ?Sized>(
    target: u32,
    k: usize,
    table: &SamplingTable,
    rng: &mut R,
) -> Vec<u32> {
    table.sample_excluding(target, k, rng)
}

/// Cross-entropy of the target against the candidate set
/// `{target} ∪ negatives`. Returns the loss and the candidate probabilities,
/// target first.
pub fn sampled_softmax_loss(v: &[f64], target: u32, negatives: &[u32], c: &Matrix) -> (f64, Vec<f64>) {
    let scores: Vec<f64> = std::iter::once(target)
        .chain(negatives.iter().copied())
        .map(|id| dot(c.row(id as usize), v))
        .collect();
    let (probs, log_z) = softmax(&scores);
    ((log_z - scores[0]).max(0.0), probs)
}

/// Gradient rows for a subset of a matrix, keyed by row id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    rows: BTreeMap<u32, Vec<f64>>,
}

impl SparseRows {
    /// `row[id] += scale · v`.
    pub fn add(&mut self, id: u32, scale: f64, v: &[f64]) {
        let row = self.rows.entry(id).or_insert_with(|| vec![0.0; v.len()]);
        axpy(scale, v, row);
    }

    pub fn get(&self, id: u32) -> Option<&[f64]> {
        self.rows.get(&id).map(Vec::as_slice)
    }

    /// Rows in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.rows.iter().map(|(&id, r)| (id, r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    pub fn merge(&mut self, other: &SparseRows) {
        for (id, row) in other.iter() {
            self.add(id, 1.0, row);
        }
    }
}

/// Loss gradients with respect to the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub words: SparseRows,
    pub ctx_entities: SparseRows,
    pub targets: SparseRows,
    /// Dense projection gradient; `None` when no full-variant document
    /// contributed.
    pub projection: Option<Matrix>,
}

impl Gradients {
    pub fn new() -> Self {
        Gradients {
            words: SparseRows::default(),
            ctx_entities: SparseRows::default(),
            targets: SparseRows::default(),
            projection: None,
        }
    }

    pub fn clear(&mut self) {
        self.words.clear();
        self.ctx_entities.clear();
        self.targets.clear();
        self.projection = None;
    }

    pub fn merge(&mut self, other: &Gradients) {
        self.words.merge(&other.words);
        self.ctx_entities.merge(&other.ctx_entities);
        self.targets.merge(&other.targets);
        if let Some(p) = &other.projection {
            match &mut self.projection {
                Some(mine) => axpy(1.0, p.as_slice(), mine.as_mut_slice()),
                None => self.projection = Some(p.clone()),
            }
        }
    }
}

impl Default for Gradients {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of the sampled softmax loss through the encoder.
/// Returns the loss alongside.
pub fn backward(
    encoding: &DocumentEncoding,
    target: u32,
    negatives: &[u32],
    params: &ModelParameters,
) -> (f64, Gradients) {
    let mut grads = Gradients::new();
    let loss = backward_into(encoding, target, negatives, params, &mut grads);
    (loss, grads)
}

/// Accumulating form of [`backward`].
pub(crate) fn backward_into(
    encoding: &DocumentEncoding,
    target: u32,
    negatives: &[u32],
    params: &ModelParameters,
    grads: &mut Gradients,
) -> f64 {
    let v = &encoding.vector;
    let (loss, probs) = sampled_softmax_loss(v, target, negatives, &params.targets);
    let mut grad_v = vec![0.0; params.dim];
    let candidates = std::iter::once(target).chain(negatives.iter().copied());
    for (i, (id, p)) in candidates.zip(&probs).enumerate() {
        let coeff = if i == 0 { p - 1.0 } else { *p };
        axpy(coeff, params.targets.row(id as usize), &mut grad_v);
        grads.targets.add(id, coeff, v);
    }
    backward_from_vector(encoding, &grad_v, params, grads);
    loss
}

/// Propagates `∂L/∂v` into the projection and the kept word and entity
/// rows. Empty bags receive nothing.
pub fn backward_from_vector(
    encoding: &DocumentEncoding,
    grad_v: &[f64],
    params: &ModelParameters,
    grads: &mut Gradients,
) {
    let d = params.dim;
    let (grad_words, grad_entities) = match params.variant {
        Variant::Word => (Some(grad_v.to_vec()), None),
        Variant::Entity => (None, Some(grad_v.to_vec())),
        Variant::Full => {
            let w = params
                .projection
                .as_ref()
                .expect("full variant carries a projection");
            let zeros = vec![0.0; d];
            let mut concat = Vec::with_capacity(2 * d);
            concat.extend_from_slice(encoding.word_avg.as_deref().unwrap_or(&zeros));
            concat.extend_from_slice(encoding.entity_avg.as_deref().unwrap_or(&zeros));
            grads
                .projection
                .get_or_insert_with(|| Matrix::zeros(d, 2 * d))
                .add_outer(1.0, grad_v, &concat);
            let grad_concat = w.transpose_mul_vec(grad_v);
            (
                Some(grad_concat[..d].to_vec()),
                Some(grad_concat[d..].to_vec()),
            )
        }
    };
    if let (Some(g), Some(_)) = (grad_words, &encoding.word_avg) {
        let scale = 1.0 / encoding.kept_words.len() as f64;
        for &id in &encoding.kept_words {
            grads.words.add(id, scale, &g);
        }
    }
    if let (Some(g), Some(_)) = (grad_entities, &encoding.entity_avg) {
        let scale = 1.0 / encoding.kept_entities.len() as f64;
        for &id in &encoding.kept_entities {
            grads.ctx_entities.add(id, scale, &g);
        }
    }
}

/// 1-based rank of `target` among all rows of `c` by score `c_e·v`,
/// descending, ties to the lower id.
pub fn full_softmax_rank(v: &[f64], c: &Matrix, target: u32) -> usize {
    let t = target as usize;
    let target_score = dot(c.row(t), v);
    1 + (0..c.rows())
        .filter(|&e| {
            let s = dot(c.row(e), v);
            s > target_score || (s == target_score && e < t)
        })
        .count()
}
