//! Property tests for the invariants of each module.

mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use textent::classify::{classify, preprocess_corpus, LabeledDocument, SoftmaxClassifier};
use textent::corpus::{
    build_dataset, build_vocabularies, emit_pretrain_stream, select_training_documents, Annotation, CompileOptions,
    CorpusConfig, Document, RawDocument,
};
use textent::linalg::{softmax, Matrix};
use textent::metrics::{
    breakeven_point, macro_f1_entities, micro_f1, precision_at_1, r_precision, rank_types, strict_accuracy, TypeSet,
};
use textent::textent::{encode, sampled_softmax_loss, ModelParameters, Variant};
use textent::typing::{mlp_forward, predict_types, tune_thresholds, TypingModel};
use textent::vectors::{cosine, nearest_entities, VectorStore};

const TOKENS: [&str; 10] = ["a", "b", "c", "d", "e", "F", "G", "h", "i", "j"];

fn raw_document(id: usize) -> impl Strategy<Value = RawDocument> {
    (
        prop::collection::vec(prop::sample::select(&TOKENS[..]), 0..30),
        prop::collection::vec((0usize..3, 1usize..3, 0usize..6, 0.0f64..1.0), 0..6),
        0u64..10,
        any::<bool>(),
    )
        .prop_map(move |(tokens, spans, links, has_target)| {
            let tokens: Vec<String> = tokens.into_iter().map(str::to_owned).collect();
            let mut annotations = Vec::new();
            let mut pos = 0;
            for (gap, len, ent, score) in spans {
                let start = pos + gap;
                let end = start + len;
                if end > tokens.len() {
                    break;
                }
                annotations.push(Annotation {
                    start,
                    end,
                    entity: format!("E{ent}"),
                    score,
                });
                pos = end;
            }
            RawDocument {
                doc_id: format!("d{id}"),
                target_entity: has_target.then(|| format!("T{id}")),
                tokens,
                annotations,
                incoming_links: links,
            }
        })
}

fn corpus() -> impl Strategy<Value = Vec<RawDocument>> {
    (1usize..8).prop_flat_map(|n| (0..n).map(raw_document).collect::<Vec<_>>())
}

fn kb_corpus() -> impl Strategy<Value = Vec<RawDocument>> {
    corpus().prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, mut d)| {
                d.target_entity = Some(format!("T{i}"));
                d
            })
            .collect()
    })
}

fn unit_interval() -> impl Strategy<Value = f64> {
    (0u32..=10).prop_map(|x| x as f64 / 10.0)
}

fn typing_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<TypeSet>)> {
    (1usize..6, 1usize..10).prop_flat_map(|(t, n)| {
        (
            prop::collection::vec(prop::collection::vec(unit_interval(), t), n),
            prop::collection::vec(prop::collection::btree_set(0..t, 1..=t), n),
        )
    })
}

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

fn random_params(variant: Variant, seed: u64) -> ModelParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 4;
    ModelParameters {
        variant,
        dim: d,
        words: Matrix::uniform(10, d, 1.0, &mut rng),
        ctx_entities: Matrix::uniform(5, d, 1.0, &mut rng),
        targets: Matrix::uniform(6, d, 1.0, &mut rng),
        projection: (variant == Variant::Full).then(|| Matrix::uniform(d, 2 * d, 1.0, &mut rng)),
    }
}

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dataset_build_is_deterministic(docs in kb_corpus()) {
        let config = CorpusConfig { min_word_count: 1, min_entity_count: 1, min_links: 0, ..Default::default() };
        let a = build_dataset(&docs, &HashSet::new(), &config);
        let b = build_dataset(&docs, &HashSet::new(), &config);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn compiled_documents_respect_caps(docs in kb_corpus(), max_words in 0usize..10, max_entities in 0usize..4, before in any::<bool>()) {
        let config = CorpusConfig {
            min_word_count: 1,
            min_entity_count: 1,
            min_links: 0,
            compile: CompileOptions { max_words, max_entities, truncate_before_oov: before, dedup_entities: false },
            ..Default::default()
        };
        let data = build_dataset(&docs, &HashSet::new(), &config).unwrap();
        for d in &data.documents {
            prop_assert!(d.words.len() <= max_words);
            prop_assert!(d.ctx_entities.len() <= max_entities);
        }
    }

    #[test]
    fn vocabulary_ids_round_trip(docs in corpus(), min_count in 1u64..3) {
        let vocab = build_vocabularies(&docs, min_count, min_count).unwrap();
        for ns in [&vocab.words, &vocab.ctx_entities, &vocab.target_entities] {
            for id in 0..ns.len() as u32 {
                prop_assert_eq!(ns.id_of(ns.lookup(id).unwrap()), Some(id));
            }
        }
    }

    #[test]
    fn pretrain_stream_length_matches_recount(docs in corpus()) {
        let stream = emit_pretrain_stream(&docs);
        for (doc, seq) in docs.iter().zip(&stream) {
            let covered: usize = doc.annotations.iter().map(|a| a.end - a.start).sum();
            prop_assert_eq!(seq.len(), doc.tokens.len() - covered + doc.annotations.len());
        }
    }

    #[test]
    fn zero_link_selection_keeps_everything(docs in corpus()) {
        prop_assert_eq!(select_training_documents(&docs, 0, &HashSet::new()), docs);
    }

    #[test]
    fn sampled_softmax_normalizes_and_is_shift_invariant(
        v in vector(4),
        seed in any::<u64>(),
        alpha in -50.0f64..50.0,
        negatives in prop::collection::vec(1u32..6, 1..6),
    ) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let c = random_params(Variant::Word, seed).targets;
        let (loss, probs) = sampled_softmax_loss(&v, 0, &negatives, &c);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // Adding alpha·v/|v|² to every candidate row shifts every score by alpha.
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let mut shifted = c.clone();
        for r in 0..shifted.rows() {
            for (x, vi) in shifted.row_mut(r).iter_mut().zip(&v) {
                *x += alpha * vi / norm2;
            }
        }
        let (loss2, _) = sampled_softmax_loss(&v, 0, &negatives, &shifted);
        prop_assert!((loss - loss2).abs() < 1e-9, "{} vs {}", loss, loss2);
    }

    #[test]
    fn softmax_shift_invariance(scores in prop::collection::vec(-40.0f64..40.0, 1..20), alpha in -1e3f64..1e3) {
        let (p, z) = softmax(&scores);
        let shifted: Vec<f64> = scores.iter().map(|s| s + alpha).collect();
        let (q, zs) = softmax(&shifted);
        prop_assert!(((z - scores[0]) - (zs - shifted[0])).abs() < 1e-9);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn inference_encoding_ignores_the_rng(
        variant in variant(),
        words in prop::collection::vec(0u32..10, 0..8),
        ents in prop::collection::vec(0u32..5, 0..4),
        s1 in any::<u64>(),
        s2 in any::<u64>(),
    ) {
        let params = random_params(variant, 3);
        let doc = Document { target: None, words, ctx_entities: ents };
        let a = encode(&doc, &params, 0.0, &mut ChaCha8Rng::seed_from_u64(s1));
        let b = encode(&doc, &params, 0.0, &mut ChaCha8Rng::seed_from_u64(s2));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn encoding_is_permutation_invariant(
        variant in variant(),
        words in prop::collection::vec(0u32..10, 1..8),
        ents in prop::collection::vec(0u32..5, 0..4),
        seed in any::<u64>(),
    ) {
        let params = random_params(variant, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = Document { target: None, words: words.clone(), ctx_entities: ents.clone() };
        rand::seq::SliceRandom::shuffle(shuffled.words.as_mut_slice(), &mut rng);
        rand::seq::SliceRandom::shuffle(shuffled.ctx_entities.as_mut_slice(), &mut rng);
        let doc = Document { target: None, words, ctx_entities: ents };
        let a = encode(&doc, &params, 0.0, &mut rng).vector;
        let b = encode(&shuffled, &params, 0.0, &mut rng).vector;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_outputs_are_probabilities(x in vector(3), seed in any::<u64>()) {
        let model = TypingModel::glorot(3, 5, 4, &mut ChaCha8Rng::seed_from_u64(seed));
        for p in mlp_forward(&x, &model).unwrap() {
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn raising_a_threshold_never_adds_types(
        probs in prop::collection::vec(unit_interval(), 1..6),
        base in prop::collection::vec(unit_interval(), 6),
        t in 0usize..6,
        delta in 0.0f64..1.0,
    ) {
        let thresholds = &base[..probs.len()];
        let t = t % probs.len();
        let mut raised = thresholds.to_vec();
        raised[t] += delta;
        let before = predict_types(&probs, thresholds);
        let after = predict_types(&probs, &raised);
        prop_assert!(after.is_subset(&before));
    }

    #[test]
    fn tuned_thresholds_beat_every_candidate((probs, gold) in typing_case()) {
        let n_types = probs[0].len();
        let tuned = tune_thresholds(&probs, &gold, n_types);
        for t in 0..n_types {
            for p in &probs {
                let f = common::reference::threshold_f1(&probs, &gold, t, p[t]);
                prop_assert!(tuned.dev_f1[t] >= f - 1e-12);
            }
        }
    }

    #[test]
    fn classifier_probabilities_normalize(v in vector(3), w in prop::collection::vec(-3.0f64..3.0, 12), b in vector(4)) {
        let clf = SoftmaxClassifier { weights: Matrix::from_vec(4, 3, w).unwrap(), bias: b };
        let (label, probs) = classify(&v, &clf);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(probs.iter().all(|&p| p <= probs[label]));
    }

    #[test]
    fn preprocessing_is_idempotent(docs in corpus(), min_count in 1u64..4, min_score in 0.0f64..0.5) {
        let labeled: Vec<LabeledDocument> = docs
            .into_iter()
            .map(|d| LabeledDocument {
                id: d.doc_id,
                label: "x".into(),
                tokens: d.tokens,
                annotations: d.annotations,
                split: Default::default(),
            })
            .collect();
        let once = preprocess_corpus(&labeled, min_count, min_score);
        prop_assert_eq!(preprocess_corpus(&once, min_count, min_score), once);
    }

    #[test]
    fn metrics_lie_in_unit_interval((probs, gold) in typing_case()) {
        let ranked: Vec<Vec<usize>> = probs.iter().map(|p| rank_types(p)).collect();
        let tuned = tune_thresholds(&probs, &gold, probs[0].len());
        let pred: Vec<TypeSet> = probs.iter().map(|p| predict_types(p, &tuned.thresholds)).collect();
        for m in [
            precision_at_1(&ranked, &gold),
            breakeven_point(&ranked, &gold),
            strict_accuracy(&pred, &gold),
            micro_f1(&pred, &gold),
            macro_f1_entities(&pred, &gold),
        ] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn micro_and_macro_agree_on_singletons(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..12)) {
        let pred: Vec<TypeSet> = pairs.iter().map(|&(p, _)| [p].into()).collect();
        let gold: Vec<TypeSet> = pairs.iter().map(|&(_, g)| [g].into()).collect();
        prop_assert_eq!(micro_f1(&pred, &gold), macro_f1_entities(&pred, &gold));
    }

    #[test]
    fn breakeven_precision_equals_recall((probs, gold) in typing_case()) {
        for (p, g) in probs.iter().zip(&gold) {
            let ranked = rank_types(p);
            let cutoff = g.len();
            let hits = ranked[..cutoff].iter().filter(|t| g.contains(t)).count() as f64;
            let (precision, recall) = (hits / cutoff as f64, hits / g.len() as f64);
            let f1 = if hits == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            let bep = r_precision(&ranked, g);
            prop_assert!((bep - precision).abs() < 1e-12);
            prop_assert!((bep - recall).abs() < 1e-12);
            prop_assert!((bep - f1).abs() < 1e-12);
        }
    }

    #[test]
    fn p_at_1_ignores_order_below_the_top((probs, gold) in typing_case(), seed in any::<u64>()) {
        let ranked: Vec<Vec<usize>> = probs.iter().map(|p| rank_types(p)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let permuted: Vec<Vec<usize>> = ranked
            .iter()
            .map(|r| {
                let mut r = r.clone();
                rand::seq::SliceRandom::shuffle(&mut r[1..], &mut rng);
                r
            })
            .collect();
        prop_assert_eq!(precision_at_1(&ranked, &gold), precision_at_1(&permuted, &gold));
    }

    #[test]
    fn cosine_is_symmetric(a in vector(5), b in vector(5)) {
        prop_assert!((cosine(&a, &b) - cosine(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn nearest_entities_are_sorted_and_scale_invariant(
        rows in prop::collection::vec(vector(3), 1..12),
        q in vector(3),
        alpha in 0.01f64..100.0,
        n in 1usize..15,
    ) {
        prop_assume!(q.iter().any(|x| x.abs() > 1e-3));
        let mut store = VectorStore::new(3);
        for (i, r) in rows.iter().enumerate() {
            store.insert(format!("ENTITY/e{i}"), r).unwrap();
            store.insert(format!("WORD/w{i}"), r).unwrap();
        }
        let hits = nearest_entities(&q, &store, n).unwrap();
        prop_assert_eq!(hits.len(), n.min(rows.len()));
        for w in hits.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
        }
        for (_, c) in &hits {
            prop_assert!((-1.0..=1.0).contains(c));
        }
        let scaled: Vec<f64> = q.iter().map(|x| x * alpha).collect();
        let hits2 = nearest_entities(&scaled, &store, n).unwrap();
        let names = |h: &[(String, f64)]| h.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
        prop_assert_eq!(names(&hits), names(&hits2));
    }

    #[test]
    fn vectors_round_trip_exactly(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 1..10)) {
        let mut store = VectorStore::new(3);
        for (i, r) in rows.iter().enumerate() {
            store.insert(format!("ENTITY/e{i}"), r).unwrap();
        }
        let mut buf = Vec::new();
        store.write_to(&mut buf).unwrap();
        prop_assert_eq!(VectorStore::read_from(buf.as_slice()).unwrap(), store);
    }
}
