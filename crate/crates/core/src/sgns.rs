//! Skip-gram with negative sampling over the entity-replaced token stream.
//!
//! Words and `ENTITY/` tokens share one vocabulary and one vector space.
//! The trainer follows the usual word2vec recipe: unigram^0.75 noise,
//! frequent-token subsampling, a dynamic window radius drawn per center
//! token, and a learning rate that decays linearly to 1e-4 of its initial
//! value. Input vectors start uniform in `[-0.5/d, 0.5/d]`, output vectors
//! at zero.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Namespace;
use crate::error::{Error, Result};
use crate::hogwild::{worker_seed, Hogwild};
use crate::linalg::{axpy, dot, neg_log_sigmoid, sigmoid, Matrix};
use crate::vectors::VectorStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub subsample_threshold: f64,
    pub initial_lr: f64,
    /// Exponent of the noise distribution.
    pub power: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            window: 10,
            negatives: 15,
            min_count: 3,
            epochs: 5,
            subsample_threshold: 1e-3,
            initial_lr: 0.025,
            power: 0.75,
            seed: 42,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidArgument(msg.to_owned()))
            }
        };
        check(self.dim > 0, "dim must be positive")?;
        check(self.window >= 1, "window must be at least 1")?;
        check(self.negatives >= 1, "negatives must be at least 1")?;
        check(self.threads >= 1, "threads must be at least 1")?;
        check(self.initial_lr >= 0.0, "learning rate must be non-negative")
    }
}

/// Noise distribution over token ids, `P(i) ∝ count_i^power`.
#[derive(Debug, Clone)]
pub struct SamplingTable {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

pub fn build_sampling_table(counts: &[u64], power: f64) -> Result<SamplingTable> {
    if counts.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("token {i} has zero count")));
    }
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    *cumulative.last_mut().expect("non-empty") = 1.0;
    Ok(SamplingTable { probs, cumulative })
}

impl SamplingTable {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probability(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.probs.len() - 1) as u32
    }

    /// `k` draws, redrawing any that hit `exclude`.
    pub fn sample_excluding<R: Rng + ?Sized>(&self, exclude: u32, k: usize, rng: &mut R) -> Vec<u32> {
        assert!(self.len() >= 2, "cannot exclude the only token");
        (0..k)
            .map(|_| loop {
                let id = self.sample(rng);
                if id != exclude {
                    break id;
                }
            })
            .collect()
    }
}

/// Input (center) and output (context) tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsParams {
    pub input: Matrix,
    pub output: Matrix,
}

/// Loss and gradients of one (center, context, negatives) instance.
#[derive(Debug, Clone)]
pub struct PairGradients {
    pub loss: f64,
    pub input: Vec<f64>,
    /// One entry per output row in candidate order: context first, then negatives.
    pub output: Vec<(u32, Vec<f64>)>,
}

/// `-ln σ(u_ctx·v_c) - Σ ln σ(-u_neg·v_c)` and its gradients.
pub fn sgns_gradients(center: u32, context: u32, negatives: &[u32], params: &SgnsParams) -> PairGradients {
    let h = params.input.row(center as usize);
    let mut grad_input = vec![0.0; h.len()];
    let mut output = Vec::with_capacity(1 + negatives.len());
    let mut loss = 0.0;
    let candidates = std::iter::once((context, true)).chain(negatives.iter().map(|&n| (n, false)));
    for (id, positive) in candidates {
        let u = params.output.row(id as usize);
        let s = dot(u, h);
        let (term, g) = if positive {
            (neg_log_sigmoid(s), sigmoid(s) - 1.0)
        } else {
            (neg_log_sigmoid(-s), sigmoid(s))
        };
        loss += term;
        axpy(g, u, &mut grad_input);
        output.push((id, h.iter().map(|x| g * x).collect()));
    }
    PairGradients {
        loss,
        input: grad_input,
        output,
    }
}

/// One SGD step on a (center, context) pair. Returns the pre-update loss.
pub fn sgns_pair_step(center: u32, context: u32, negatives: &[u32], params: &mut SgnsParams, lr: f64) -> f64 {
    let grads = sgns_gradients(center, context, negatives, params);
    for (id, g) in &grads.output {
        axpy(-lr, g, params.output.row_mut(*id as usize));
    }
    axpy(-lr, &grads.input, params.input.row_mut(center as usize));
    grads.loss
}

/// A skip-gram model with its vocabulary.
#[derive(Debug, Clone)]
pub struct SkipGram {
    vocab: Namespace,
    params: SgnsParams,
    table: SamplingTable,
    config: SgnsConfig,
    total_tokens: u64,
}

impl SkipGram {
    /// Builds the vocabulary from `stream` and initializes parameters.
    pub fn new(stream: &[Vec<String>], config: SgnsConfig) -> Result<Self> {
        config.validate()?;
        let mut counts: HashMap<String, u64> = HashMap::new();
        for sentence in stream {
            for tok in sentence {
                *counts.entry(tok.clone()).or_default() += 1;
            }
        }
        let vocab = Namespace::from_counts(counts, config.min_count);
        if vocab.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let table = build_sampling_table(vocab.counts(), config.power)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dim = config.dim;
        let params = SgnsParams {
            input: Matrix::uniform(vocab.len(), dim, 0.5 / dim as f64, &mut rng),
            output: Matrix::zeros(vocab.len(), dim),
        };
        let total_tokens = vocab.counts().iter().sum();
        Ok(SkipGram {
            vocab,
            params,
            table,
            config,
            total_tokens,
        })
    }

    pub fn vocab(&self) -> &Namespace {
        &self.vocab
    }

    pub fn params(&self) -> &SgnsParams {
        &self.params
    }

    pub fn config(&self) -> &SgnsConfig {
        &self.config
    }

    /// Runs all configured epochs over `stream`. Returns the mean pair loss
    /// per epoch.
    pub fn train(&mut self, stream: &[Vec<String>]) -> Vec<f64> {
        let sentences: Vec<Vec<u32>> = stream
            .iter()
            .map(|s| s.iter().filter_map(|t| self.vocab.id_of(t)).collect())
            .collect();
        let keep_probs = self.keep_probabilities();
        let threads = self.config.threads;
        let total_steps = (self.config.epochs as u64 * self.total_tokens).max(1);
        let progress = AtomicUsize::new(0);
        let mut epoch_losses = Vec::with_capacity(self.config.epochs);

        for epoch in 0..self.config.epochs {
            let chunk = sentences.len().div_ceil(threads).max(1);
            let (loss, pairs) = if threads == 1 {
                let ctx = EpochContext {
                    config: &self.config,
                    table: &self.table,
                    keep_probs: &keep_probs,
                    progress: &progress,
                    total_steps,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(self.config.seed, epoch, 0));
                ctx.run(&sentences, &mut self.params, &mut rng)
            } else {
                let shared = Hogwild::new(&mut self.params);
                let ctx = EpochContext {
                    config: &self.config,
                    table: &self.table,
                    keep_probs: &keep_probs,
                    progress: &progress,
                    total_steps,
                };
                std::thread::scope(|scope| {
                    let handles: Vec<_> = sentences
                        .chunks(chunk)
                        .enumerate()
                        .map(|(worker, part)| {
                            let shared = &shared;
                            let ctx = &ctx;
                            scope.spawn(move || {
                                let mut rng =
                                    ChaCha8Rng::seed_from_u64(worker_seed(ctx.config.seed, epoch, worker));
                                // SAFETY: `params` outlives the scope; races are the hogwild contract.
                                let params = unsafe { shared.get() };
                                ctx.run(part, params, &mut rng)
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("worker panicked"))
                        .fold((0.0, 0usize), |(l, n), (dl, dn)| (l + dl, n + dn))
                })
            };
            epoch_losses.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
        }
        epoch_losses
    }

    fn keep_probabilities(&self) -> Vec<f64> {
        let t = self.config.subsample_threshold;
        if t <= 0.0 {
            return vec![1.0; self.vocab.len()];
        }
        let scaled = t * self.total_tokens as f64;
        self.vocab
            .counts()
            .iter()
            .map(|&c| {
                let c = c as f64;
                (((c / scaled).sqrt() + 1.0) * scaled / c).min(1.0)
            })
            .collect()
    }

    /// Input vectors keyed by token.
    pub fn to_store(&self) -> VectorStore {
        let mut store = VectorStore::new(self.config.dim);
        for (id, token, _) in self.vocab.iter() {
            store
                .insert(token, self.params.input.row(id as usize))
                .expect("vocabulary tokens are unique");
        }
        store
    }
}

struct EpochContext<'a> {
    config: &'a SgnsConfig,
    table: &'a SamplingTable,
    keep_probs: &'a [f64],
    progress: &'a AtomicUsize,
    total_steps: u64,
}

impl EpochContext<'_> {
    fn run(&self, sentences: &[Vec<u32>], params: &mut SgnsParams, rng: &mut ChaCha8Rng) -> (f64, usize) {
        let cfg = self.config;
        let mut loss = 0.0;
        let mut pairs = 0;
        let mut kept = Vec::new();
        for sentence in sentences {
            kept.clear();
            kept.extend(
                sentence
                    .iter()
                    .copied()
                    .filter(|&id| rng.gen::<f64>() < self.keep_probs[id as usize]),
            );
            for pos in 0..kept.len() {
                let done = self.progress.fetch_add(1, Ordering::Relaxed) as f64;
                let lr = cfg.initial_lr * (1.0 - done / self.total_steps as f64).max(1e-4);
                let radius = rng.gen_range(1..=cfg.window);
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(kept.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = kept[ctx_pos];
                    if self.table.len() < 2 {
                        continue;
                    }
                    let negatives = self.table.sample_excluding(context, cfg.negatives, rng);
                    loss += sgns_pair_step(kept[pos], context, &negatives, params, lr);
                    pairs += 1;
                }
            }
            // Sentences dropped whole by subsampling still count toward decay.
            let skipped = sentence.len() - kept.len();
            self.progress.fetch_add(skipped, Ordering::Relaxed);
        }
        (loss, pairs)
    }
}

/// Trains skip-gram vectors and returns the input table keyed by token.
pub fn train_skipgram(stream: &[Vec<String>], config: SgnsConfig) -> Result<VectorStore> {
    let mut model = SkipGram::new(stream, config)?;
    model.train(stream);
    Ok(model.to_store())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_probabilities() {
        let t = build_sampling_table(&[1, 1], 0.75).unwrap();
        assert_eq!(t.probabilities(), &[0.5, 0.5]);
        let t = build_sampling_table(&[16, 1], 0.75).unwrap();
        assert!((t.probability(0) - 8.0 / 9.0).abs() < 1e-15);
        assert!((t.probability(1) - 1.0 / 9.0).abs() < 1e-15);
        let t = build_sampling_table(&[5, 100, 7], 0.0).unwrap();
        assert!(t.probabilities().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(build_sampling_table(&[], 0.75), Err(Error::EmptyVocabulary)));
        assert!(build_sampling_table(&[3, 0], 0.75).is_err());
    }

    #[test]
    fn zero_parameters_give_closed_form_loss() {
        let mut params = SgnsParams {
            input: Matrix::zeros(20, 4),
            output: Matrix::zeros(20, 4),
        };
        let negatives: Vec<u32> = (2..17).collect();
        let loss = sgns_pair_step(0, 1, &negatives, &mut params, 0.0);
        assert_eq!(loss, 16.0 * std::f64::consts::LN_2);
        assert!((loss - 11.0904).abs() < 1e-4);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = SgnsParams {
            input: Matrix::uniform(6, 3, 1.0, &mut rng),
            output: Matrix::uniform(6, 3, 1.0, &mut rng),
        };
        let before = params.clone();
        let loss = sgns_pair_step(0, 1, &[2, 3, 3], &mut params, 0.0);
        assert!(loss >= 0.0);
        assert_eq!(params, before);
    }

    #[test]
    fn step_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = SgnsParams {
            input: Matrix::uniform(6, 3, 1.0, &mut rng),
            output: Matrix::uniform(6, 3, 1.0, &mut rng),
        };
        let first = sgns_pair_step(0, 1, &[2, 4], &mut params, 0.05);
        let second = sgns_gradients(0, 1, &[2, 4], &params).loss;
        assert!(second < first);
    }

    #[test]
    fn empty_stream_is_rejected() {
        let config = SgnsConfig {
            min_count: 1,
            ..Default::default()
        };
        assert!(matches!(SkipGram::new(&[], config), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let stream: Vec<Vec<String>> = vec!["a b c a b c".split(' ').map(String::from).collect()];
        let config = SgnsConfig {
            dim: 8,
            min_count: 1,
            epochs: 0,
            ..Default::default()
        };
        let mut model = SkipGram::new(&stream, config).unwrap();
        let init = model.params().clone();
        model.train(&stream);
        assert_eq!(model.params(), &init);
        let bound = 0.5 / 8.0;
        assert!(init.input.as_slice().iter().all(|x| x.abs() <= bound));
        assert!(init.output.as_slice().iter().all(|&x| x == 0.0));
    }
}
