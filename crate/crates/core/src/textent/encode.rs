use rand::Rng;

use super::{ModelParameters, Variant};
use crate::corpus::Document;
use crate::linalg::{axpy, Matrix};

/// Forward pass of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentEncoding {
    /// Word ids that survived dropout.
    pub kept_words: Vec<u32>,
    /// Contextual-entity ids that survived dropout.
    pub kept_entities: Vec<u32>,
    /// Average of the kept word vectors; `None` for an empty bag.
    pub word_avg: Option<Vec<f64>>,
    /// Average of the kept entity vectors; `None` for an empty bag.
    pub entity_avg: Option<Vec<f64>>,
    /// Document vector fed to target scoring.
    pub vector: Vec<f64>,
}

/// Mean of the given rows, or `None` when `ids` is empty.
pub fn bag_average(ids: &[u32], table: &Matrix) -> Option<Vec<f64>> {
    if ids.is_empty() {
        return None;
    }
    let mut sum = vec![0.0; table.cols()];
    for &id in ids {
        axpy(1.0, table.row(id as usize), &mut sum);
    }
    let n = ids.len() as f64;
    sum.iter_mut().for_each(|x| *x /= n);
    Some(sum)
}

/// Keeps each id independently with probability `1 - p`, preserving order.
/// Draws nothing from `rng` when `p == 0`.
pub fn apply_word_dropout<R: Rng + ?Sized>(ids: &[u32], p: f64, rng: &mut R) -> Vec<u32> {
    if p <= 0.0 {
        return ids.to_vec();
    }
    ids.iter().copied().filter(|_| rng.gen::<f64>() >= p).collect()
}

/// Encodes `doc`. Pass `dropout = 0` for inference.
pub fn encode<R: Rng + ?Sized>(
    doc: &Document,
    params: &ModelParameters,
    dropout: f64,
    rng: &mut R,
) -> DocumentEncoding {
    let kept_words = apply_word_dropout(&doc.words, dropout, rng);
    let kept_entities = apply_word_dropout(&doc.ctx_entities, dropout, rng);
    let word_avg = bag_average(&kept_words, &params.words);
    let entity_avg = bag_average(&kept_entities, &params.ctx_entities);
    let d = params.dim;
    let vector = match params.variant {
        Variant::Word => word_avg.clone().unwrap_or_else(|| vec![0.0; d]),
        Variant::Entity => entity_avg.clone().unwrap_or_else(|| vec![0.0; d]),
        Variant::Full => {
            let w = params
                .projection
                .as_ref()
                .expect("full variant carries a projection");
            let mut concat = Vec::with_capacity(2 * d);
            concat.extend_from_slice(word_avg.as_deref().unwrap_or(&vec![0.0; d]));
            concat.extend_from_slice(entity_avg.as_deref().unwrap_or(&vec![0.0; d]));
            w.mul_vec(&concat)
        }
    };
    DocumentEncoding {
        kept_words,
        kept_entities,
        word_avg,
        entity_avg,
        vector,
    }
}
