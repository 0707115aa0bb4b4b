//! TextEnt: joint embeddings of words, entities and documents, learned by
//! predicting which knowledge-base entity a document describes.
//!
//! The crate covers the whole pipeline: corpus compilation ([`corpus`],
//! [`txe`]), skip-gram pretraining ([`sgns`]), the model itself
//! ([`textent`]), downstream evaluation ([`typing`], [`classify`],
//! [`metrics`]) and vector I/O with nearest-entity queries ([`vectors`]).
//! The `textent` binary exposes the same steps as subcommands ([`cli`]).

pub mod adam;
pub mod classify;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod sgns;
pub mod synthetic;
pub mod textent;
pub mod txe;
pub mod typing;
pub mod vectors;

mod binio;
mod hogwild;

pub use error::{Error, Result};
