use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::backward_into;
use super::{
    adadelta_update, encode, sample_negatives, AdadeltaState, Gradients, ModelParameters,
    NegativeDistribution, TrainConfig, Variant,
};
use crate::corpus::{CompiledDataset, ENTITY_PREFIX, WORD_PREFIX};
use crate::error::{Error, Result};
use crate::hogwild::{worker_seed, Hogwild};
use crate::linalg::Matrix;
use crate::sgns::{build_sampling_table, SamplingTable};
use crate::vectors::VectorStore;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    /// Mean per-document loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

fn copy_pretrained(table: &mut Matrix, names: &[String], store: &VectorStore, lookup: impl Fn(&str) -> Vec<String>) {
    for (row, name) in names.iter().enumerate() {
        if let Some(v) = lookup(name).iter().find_map(|key| store.get(key)) {
            table.row_mut(row).copy_from_slice(v);
        }
    }
}

/// Initial parameters: uniform `[-0.5/d, 0.5/d]` embeddings overwritten by
/// matching pretrained vectors, and a Glorot-uniform projection. Contextual
/// and target rows of the same entity share its pretrained `ENTITY/` vector.
pub fn initialize(
    dataset: &CompiledDataset,
    pretrained: Option<&VectorStore>,
    config: &TrainConfig,
) -> Result<ModelParameters> {
    config.validate()?;
    let d = config.dim;
    if let Some(store) = pretrained {
        if store.dim() != d {
            return Err(Error::ShapeMismatch(format!(
                "pretrained vectors have dimension {}, model has {d}",
                store.dim()
            )));
        }
    }
    let vocab = &dataset.vocab;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / d as f64;
    let mut words = Matrix::uniform(vocab.words.len(), d, bound, &mut rng);
    let mut ctx_entities = Matrix::uniform(vocab.ctx_entities.len(), d, bound, &mut rng);
    let mut targets = Matrix::uniform(vocab.target_entities.len(), d, bound, &mut rng);
    let glorot = (6.0 / (3 * d) as f64).sqrt();
    let projection = Matrix::uniform(d, 2 * d, glorot, &mut rng);

    if let Some(store) = pretrained {
        let as_word = |w: &str| vec![w.to_owned(), format!("{WORD_PREFIX}{w}")];
        let as_entity = |e: &str| vec![format!("{ENTITY_PREFIX}{e}")];
        copy_pretrained(&mut words, vocab.words.tokens(), store, as_word);
        copy_pretrained(&mut ctx_entities, vocab.ctx_entities.tokens(), store, as_entity);
        copy_pretrained(&mut targets, vocab.target_entities.tokens(), store, as_entity);
    }
    Ok(ModelParameters {
        variant: config.variant,
        dim: d,
        words,
        ctx_entities,
        targets,
        projection: (config.variant == Variant::Full).then_some(projection),
    })
}

/// Initializes and trains.
pub fn train(
    dataset: &CompiledDataset,
    pretrained: Option<&VectorStore>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let params = initialize(dataset, pretrained, config)?;
    train_from(params, dataset, config)
}

struct Negatives<'a> {
    n_targets: usize,
    k: usize,
    table: Option<&'a SamplingTable>,
}

impl Negatives<'_> {
    fn draw(&self, target: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
        match self.table {
            Some(t) => t.sample_excluding(target, self.k, rng),
            None => sample_negatives(target, self.k, self.n_targets, rng),
        }
    }
}

/// Processes a run of mini-batches. Returns the summed loss.
fn run_batches(
    batches: &[&[usize]],
    dataset: &CompiledDataset,
    params: &mut ModelParameters,
    state: &mut AdadeltaState,
    config: &TrainConfig,
    negatives: &Negatives<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut total = 0.0;
    let mut grads = Gradients::new();
    for batch in batches {
        grads.clear();
        for &i in *batch {
            let doc = &dataset.documents[i];
            let target = dataset.target(i);
            let enc = encode(doc, params, config.dropout, rng);
            let negs = negatives.draw(target, rng);
            total += backward_into(&enc, target, &negs, params, &mut grads);
        }
        adadelta_update(params, state, &grads, config.adadelta_rho, config.adadelta_eps)?;
    }
    Ok(total)
}

/// Trains from the given parameters. Each epoch shuffles the documents and
/// applies one Adadelta step per mini-batch with summed batch gradients.
pub fn train_from(
    mut params: ModelParameters,
    dataset: &CompiledDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    params.validate()?;
    if dataset.documents.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(i) = dataset.documents.iter().position(|d| d.target.is_none()) {
        return Err(Error::MissingTarget(format!("document #{i}")));
    }
    let n_targets = params.targets.rows();
    if n_targets < 2 {
        return Err(Error::InvalidArgument(
            "negative sampling needs at least two target entities".into(),
        ));
    }
    let table = match config.negative_distribution {
        NegativeDistribution::Uniform => None,
        NegativeDistribution::Unigram => Some(build_sampling_table(dataset.vocab.target_entities.counts(), 0.75)?),
    };
    let negatives = Negatives {
        n_targets,
        k: config.negatives,
        table: table.as_ref(),
    };
    let mut state = AdadeltaState::new(&params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(worker_seed(config.seed, usize::MAX, usize::MAX));
    let mut order: Vec<usize> = (0..dataset.documents.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let batches: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        let total = if config.threads == 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(config.seed, epoch, 0));
            run_batches(&batches, dataset, &mut params, &mut state, config, &negatives, &mut rng)?
        } else {
            let per_worker = batches.len().div_ceil(config.threads).max(1);
            let shared_params = Hogwild::new(&mut params);
            let shared_state = Hogwild::new(&mut state);
            std::thread::scope(|scope| {
                let handles: Vec<_> = batches
                    .chunks(per_worker)
                    .enumerate()
                    .map(|(worker, part)| {
                        let (sp, ss, negatives) = (&shared_params, &shared_state, &negatives);
                        scope.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(config.seed, epoch, worker));
                            // SAFETY: both referents outlive the scope; unsynchronized
                            // element updates are the hogwild contract.
                            let (params, state) = unsafe { (sp.get(), ss.get()) };
                            run_batches(part, dataset, params, state, config, negatives, &mut rng)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker panicked"))
                    .try_fold(0.0, |acc, r| r.map(|l| acc + l))
            })?
        };
        epoch_losses.push(total / dataset.documents.len() as f64);
    }
    Ok(TrainOutcome {
        params,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabularies, compile_dataset, CompileOptions, RawDocument};

    fn tiny_dataset() -> CompiledDataset {
        let docs: Vec<RawDocument> = (0..4)
            .map(|i| RawDocument {
                doc_id: i.to_string(),
                target_entity: Some(format!("T{i}")),
                tokens: vec![format!("w{i}"), "shared".into()],
                annotations: vec![],
                incoming_links: 10,
            })
            .collect();
        let vocab = build_vocabularies(&docs, 1, 1).unwrap();
        compile_dataset(&docs, vocab, &CompileOptions::default()).unwrap()
    }

    fn config() -> TrainConfig {
        TrainConfig {
            dim: 4,
            negatives: 2,
            dropout: 0.0,
            batch_size: 2,
            epochs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_return_initialization() {
        let data = tiny_dataset();
        let cfg = TrainConfig { epochs: 0, ..config() };
        let init = initialize(&data, None, &cfg).unwrap();
        let out = train(&data, None, &cfg).unwrap();
        assert_eq!(out.params, init);
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn initialization_ranges() {
        let data = tiny_dataset();
        let p = initialize(&data, None, &config()).unwrap();
        let bound = 0.5 / 4.0;
        assert!(p.words.as_slice().iter().all(|x| x.abs() <= bound));
        let glorot = (6.0f64 / 12.0).sqrt();
        assert!(p.projection.unwrap().as_slice().iter().all(|x| x.abs() <= glorot));
    }

    #[test]
    fn pretrained_entity_vector_seeds_both_tables() {
        let docs = vec![
            RawDocument {
                doc_id: "a".into(),
                target_entity: Some("A".into()),
                tokens: vec!["x".into()],
                annotations: vec![crate::corpus::Annotation {
                    start: 0,
                    end: 1,
                    entity: "B".into(),
                    score: 1.0,
                }],
                incoming_links: 10,
            },
            RawDocument {
                doc_id: "b".into(),
                target_entity: Some("B".into()),
                tokens: vec!["y".into()],
                annotations: vec![],
                incoming_links: 10,
            },
        ];
        let vocab = build_vocabularies(&docs, 1, 1).unwrap();
        let data = compile_dataset(&docs, vocab, &CompileOptions::default()).unwrap();
        let mut store = VectorStore::new(2);
        store.insert("ENTITY/B", &[0.25, -0.75]).unwrap();
        store.insert("x", &[1.0, 2.0]).unwrap();
        let cfg = TrainConfig { dim: 2, ..config() };
        let p = initialize(&data, Some(&store), &cfg).unwrap();
        let v = &data.vocab;
        assert_eq!(p.words.row(v.words.id_of("x").unwrap() as usize), &[1.0, 2.0]);
        assert_eq!(p.ctx_entities.row(v.ctx_entities.id_of("B").unwrap() as usize), &[0.25, -0.75]);
        assert_eq!(p.targets.row(v.target_entities.id_of("B").unwrap() as usize), &[0.25, -0.75]);

        let wrong = TrainConfig { dim: 3, ..config() };
        assert!(matches!(initialize(&data, Some(&store), &wrong), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn single_thread_is_reproducible() {
        let data = tiny_dataset();
        let cfg = TrainConfig { dropout: 0.3, ..config() };
        let a = train(&data, None, &cfg).unwrap();
        let b = train(&data, None, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert!(a.params.is_finite());
    }

    #[test]
    fn multi_thread_training_stays_finite() {
        let data = tiny_dataset();
        let cfg = TrainConfig {
            threads: 2,
            batch_size: 1,
            ..config()
        };
        let out = train(&data, None, &cfg).unwrap();
        assert!(out.params.is_finite());
        assert_eq!(out.epoch_losses.len(), 3);
    }

    #[test]
    fn empty_dataset_rejected() {
        let mut data = tiny_dataset();
        data.documents.clear();
        assert!(matches!(train(&data, None, &config()), Err(Error::EmptyDataset)));
    }
}
