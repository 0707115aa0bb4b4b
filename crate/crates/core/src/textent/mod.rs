//! The document/entity model.
//!
//! A document is a bag of words and a bag of contextual entities. Each bag
//! is averaged into a `d`-vector, and the full variant projects the
//! concatenation of the two averages back to `d` dimensions with a learned
//! `d × 2d` matrix. The resulting document vector scores target entities by
//! dot product; training maximizes the softmax probability of the
//! document's own target against `k` uniformly drawn negatives, with word
//! dropout on both bags and Adadelta updates applied per mini-batch.

mod adadelta;
mod encode;
mod loss;
mod model_file;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use adadelta::{adadelta_update, AdadeltaState, DenseAccumulators};
pub use encode::{apply_word_dropout, bag_average, encode, DocumentEncoding};
pub use loss::{
    backward, backward_from_vector, full_softmax_rank, sample_negatives, sample_negatives_weighted,
    sampled_softmax_loss, Gradients, SparseRows,
};
pub use model_file::{load_model, read_model, save_model, write_model, ModelHeader};
pub use train::{initialize, train, train_from, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Projection of the concatenated word and entity averages.
    Full,
    /// Word average only.
    Word,
    /// Contextual-entity average only.
    Entity,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::Word, Variant::Entity];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Word => "word",
            Variant::Entity => "entity",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "word" => Ok(Variant::Word),
            "entity" => Ok(Variant::Entity),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

/// How negative target entities are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeDistribution {
    Uniform,
    /// Proportional to target count^0.75.
    Unigram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub variant: Variant,
    pub dim: usize,
    /// Word vectors, one row per word id.
    pub words: Matrix,
    /// Contextual-entity vectors.
    pub ctx_entities: Matrix,
    /// Target-entity vectors scored against documents.
    pub targets: Matrix,
    /// `d × 2d` projection, present only for [`Variant::Full`].
    pub projection: Option<Matrix>,
}

impl ModelParameters {
    /// All-zero parameters of the given shape.
    pub fn zeros(variant: Variant, dim: usize, n_words: usize, n_entities: usize, n_targets: usize) -> Self {
        ModelParameters {
            variant,
            dim,
            words: Matrix::zeros(n_words, dim),
            ctx_entities: Matrix::zeros(n_entities, dim),
            targets: Matrix::zeros(n_targets, dim),
            projection: (variant == Variant::Full).then(|| Matrix::zeros(dim, 2 * dim)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("words", &self.words),
            ("ctx_entities", &self.ctx_entities),
            ("targets", &self.targets),
        ] {
            if m.cols() != self.dim {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has {} columns, expected {}",
                    m.cols(),
                    self.dim
                )));
            }
        }
        match (&self.projection, self.variant) {
            (Some(w), Variant::Full) if w.shape() == (self.dim, 2 * self.dim) => {}
            (None, Variant::Word | Variant::Entity) => {}
            _ => {
                return Err(Error::ShapeMismatch(
                    "projection must be d×2d for the full variant and absent otherwise".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.words.is_finite()
            && self.ctx_entities.is_finite()
            && self.targets.is_finite()
            && self.projection.as_ref().is_none_or(Matrix::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: Variant,
    pub dim: usize,
    /// Negative target entities per document.
    pub negatives: usize,
    /// Word dropout probability, applied to words and contextual entities.
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
    pub negative_distribution: NegativeDistribution,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Full,
            dim: 300,
            negatives: 100,
            dropout: 0.5,
            batch_size: 100,
            epochs: 50,
            adadelta_rho: 0.95,
            adadelta_eps: 1e-6,
            negative_distribution: NegativeDistribution::Uniform,
            seed: 42,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidArgument(msg.to_owned()))
            }
        };
        check(self.dim > 0, "dim must be positive")?;
        check((0.0..1.0).contains(&self.dropout), "dropout must lie in [0, 1)")?;
        check(self.negatives >= 1, "negatives must be at least 1")?;
        check(self.batch_size >= 1, "batch size must be at least 1")?;
        check(self.threads >= 1, "threads must be at least 1")?;
        check((0.0..1.0).contains(&self.adadelta_rho), "rho must lie in [0, 1)")?;
        check(self.adadelta_eps > 0.0, "eps must be positive")
    }
}
