//! Generated corpora with known structure, for tests and examples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{DocSplit, LabeledDocument};
use crate::corpus::{Annotation, RawDocument};
use crate::typing::{Split, TypingDataset};

/// A KB of `n_targets` documents, each a uniform random bag of `doc_len`
/// words drawn from `n_words` words, with `mentions` of its tokens
/// annotated as random contextual entities out of `n_entities`.
pub fn toy_kb(
    n_targets: usize,
    n_words: usize,
    n_entities: usize,
    doc_len: usize,
    mentions: usize,
    seed: u64,
) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_targets)
        .map(|t| {
            let tokens: Vec<String> = (0..doc_len).map(|_| format!("w{}", rng.gen_range(0..n_words))).collect();
            let mut positions: Vec<usize> = (0..doc_len).collect();
            positions.shuffle(&mut rng);
            positions.truncate(mentions.min(doc_len));
            positions.sort_unstable();
            let annotations = positions
                .into_iter()
                .map(|p| Annotation {
                    start: p,
                    end: p + 1,
                    entity: format!("C{}", rng.gen_range(0..n_entities)),
                    score: 1.0,
                })
                .collect();
            RawDocument {
                doc_id: format!("doc{t}"),
                target_entity: Some(format!("T{t}")),
                tokens,
                annotations,
                incoming_links: 10,
            }
        })
        .collect()
}

/// Two disjoint vocabularies; each sentence draws all its tokens from one.
/// Returns the stream and the two token lists.
pub fn two_clique_stream(
    clique_size: usize,
    sentences: usize,
    sentence_len: usize,
    seed: u64,
) -> (Vec<Vec<String>>, Vec<String>, Vec<String>) {
    let a: Vec<String> = (0..clique_size).map(|i| format!("a{i}")).collect();
    let b: Vec<String> = (0..clique_size).map(|i| format!("b{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = (0..sentences)
        .map(|s| {
            let clique = if s % 2 == 0 { &a } else { &b };
            (0..sentence_len).map(|_| clique.choose(&mut rng).unwrap().clone()).collect()
        })
        .collect();
    (stream, a, b)
}

/// Type names of [`LatentWorld`]. Latent types 1 and 3 also carry their
/// parent type, so gold sets have one or two members.
pub const LATENT_TYPES: [&str; 5] = ["person", "person/artist", "location", "location/city", "organization"];

#[derive(Debug, Clone, PartialEq)]
pub struct LatentConfig {
    pub n_entities: usize,
    /// Topical words per latent type.
    pub words_per_type: usize,
    /// Words shared by all types.
    pub shared_words: usize,
    pub doc_len: usize,
    pub mentions: usize,
    /// Probability that a word is drawn from the document's own type
    /// rather than from the shared pool.
    pub topical_words: f64,
    /// Probability that a mention names an entity of the document's own
    /// type rather than a uniformly drawn one.
    pub topical_mentions: f64,
    pub seed: u64,
}

impl Default for LatentConfig {
    fn default() -> Self {
        LatentConfig {
            n_entities: 1000,
            words_per_type: 30,
            shared_words: 100,
            doc_len: 60,
            mentions: 6,
            topical_words: 0.5,
            topical_mentions: 0.5,
            seed: 11,
        }
    }
}

/// Entities with a hidden type that shapes the words and entities of
/// every document about them.
#[derive(Debug, Clone)]
pub struct LatentWorld {
    pub config: LatentConfig,
    pub entity_names: Vec<String>,
    pub latent: Vec<usize>,
}

impl LatentWorld {
    pub fn generate(config: LatentConfig) -> Self {
        let entity_names = (0..config.n_entities).map(|i| format!("Entity_{i:03}")).collect();
        let latent = (0..config.n_entities).map(|i| i % LATENT_TYPES.len()).collect();
        LatentWorld {
            config,
            entity_names,
            latent,
        }
    }

    /// Gold type names of latent type `t`.
    pub fn gold_types(t: usize) -> Vec<&'static str> {
        match t {
            1 => vec![LATENT_TYPES[0], LATENT_TYPES[1]],
            3 => vec![LATENT_TYPES[2], LATENT_TYPES[3]],
            _ => vec![LATENT_TYPES[t]],
        }
    }

    fn sample_document(&self, t: usize, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<Annotation>) {
        let c = &self.config;
        let members: Vec<usize> = (0..c.n_entities).filter(|&e| self.latent[e] == t).collect();
        let mut tokens: Vec<String> = (0..c.doc_len)
            .map(|_| {
                if rng.gen::<f64>() < c.topical_words {
                    format!("t{t}w{}", rng.gen_range(0..c.words_per_type))
                } else {
                    format!("w{}", rng.gen_range(0..c.shared_words))
                }
            })
            .collect();
        let mut slots: Vec<usize> = (0..=tokens.len()).collect();
        slots.shuffle(rng);
        slots.truncate(c.mentions);
        slots.sort_unstable_by(|a, b| b.cmp(a));
        // Insert mention tokens back to front so earlier slots stay valid.
        for slot in slots {
            let e = if rng.gen::<f64>() < c.topical_mentions {
                *members.choose(rng).unwrap()
            } else {
                rng.gen_range(0..c.n_entities)
            };
            tokens.insert(slot, format!("mention{e}"));
        }
        let annotations = tokens
            .iter()
            .enumerate()
            .filter_map(|(i, tok)| {
                let e: usize = tok.strip_prefix("mention")?.parse().ok()?;
                Some(Annotation {
                    start: i,
                    end: i + 1,
                    entity: self.entity_names[e].clone(),
                    score: 1.0,
                })
            })
            .collect();
        (tokens, annotations)
    }

    /// One KB document per entity.
    pub fn kb_corpus(&self) -> Vec<RawDocument> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        (0..self.config.n_entities)
            .map(|e| {
                let (tokens, annotations) = self.sample_document(self.latent[e], &mut rng);
                RawDocument {
                    doc_id: format!("kb{e}"),
                    target_entity: Some(self.entity_names[e].clone()),
                    tokens,
                    annotations,
                    incoming_links: 10,
                }
            })
            .collect()
    }

    /// Typing data over all entities, split 60/20/20 in a seeded shuffle.
    pub fn typing_dataset(&self) -> TypingDataset {
        let mut order: Vec<usize> = (0..self.config.n_entities).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x7459));
        let n = order.len();
        let mut splits = vec![Split::Train; n];
        for (rank, &e) in order.iter().enumerate() {
            splits[e] = match rank * 5 / n {
                0..=2 => Split::Train,
                3 => Split::Dev,
                _ => Split::Test,
            };
        }
        let types: Vec<String> = {
            let mut t: Vec<String> = LATENT_TYPES.iter().map(|s| s.to_string()).collect();
            t.sort();
            t
        };
        let gold = self
            .latent
            .iter()
            .map(|&t| {
                Self::gold_types(t)
                    .into_iter()
                    .map(|name| types.iter().position(|x| x == name).unwrap())
                    .collect()
            })
            .collect();
        TypingDataset {
            types,
            entities: self.entity_names.clone(),
            gold,
            splits,
        }
    }

    /// `per_class` documents for each latent type in `classes`, labeled by
    /// type name; every `test_every`-th document is a test document.
    pub fn labeled_corpus(&self, classes: &[usize], per_class: usize, test_every: usize, seed: u64) -> Vec<LabeledDocument> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut docs = Vec::with_capacity(classes.len() * per_class);
        for i in 0..per_class {
            for &t in classes {
                let (tokens, annotations) = self.sample_document(t, &mut rng);
                let n = docs.len();
                docs.push(LabeledDocument {
                    id: format!("doc{n}"),
                    label: LATENT_TYPES[t].to_owned(),
                    tokens,
                    annotations,
                    split: if i % test_every == test_every - 1 {
                        DocSplit::Test
                    } else {
                        DocSplit::Train
                    },
                });
            }
        }
        docs
    }
}
