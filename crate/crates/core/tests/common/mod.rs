//! Oracles and fixtures shared by the integration tests and the acceptance
//! runner. Everything here is written independently of the library's own
//! implementations of the same quantities.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use textent::corpus::{write_jsonl, Document};
use textent::linalg::Matrix;
use textent::metrics::TypeSet;
use textent::sgns::{sgns_gradients, SgnsParams};
use textent::synthetic::{LatentConfig, LatentWorld};
use textent::textent::{backward, encode, sample_negatives, sampled_softmax_loss, ModelParameters, Variant};
use textent::typing::{bce_loss, mlp_backward, mlp_forward, TypingModel, NO_ASSIGNMENT};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradient magnitudes below this are compared absolutely rather than
/// relatively, since finite differences carry ~1e-10 absolute error.
pub const REL_FLOOR: f64 = 1e-4;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::uniform(rows, cols, 1.0, rng)
}

/// Max relative error between `analytic` and central differences of `loss`
/// over every entry of `m`.
fn check_matrix<F>(m: &mut Matrix, analytic: &Matrix, mut loss: F) -> f64
where
    F: FnMut(&Matrix) -> f64,
{
    let mut worst: f64 = 0.0;
    for i in 0..m.as_slice().len() {
        let orig = m.as_slice()[i];
        m.as_mut_slice()[i] = orig + FD_STEP;
        let up = loss(m);
        m.as_mut_slice()[i] = orig - FD_STEP;
        let down = loss(m);
        m.as_mut_slice()[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_error(analytic.as_slice()[i], numeric));
    }
    worst
}

fn densify<'a>(rows: impl Iterator<Item = (u32, &'a [f64])>, shape: (usize, usize)) -> Matrix {
    let mut m = Matrix::zeros(shape.0, shape.1);
    for (id, row) in rows {
        for (c, v) in row.iter().enumerate() {
            m.set(id as usize, c, m.get(id as usize, c) + v);
        }
    }
    m
}

/// One random sampled-softmax instance at `d = 5` with up to 4 words,
/// 3 contextual entities and 5 negatives; returns the worst relative
/// gradient error over all parameters.
pub fn textent_gradient_error(variant: Variant, rng: &mut ChaCha8Rng) -> f64 {
    let d = 5;
    let (n_words, n_entities, n_targets) = (6, 4, 8);
    let mut params = ModelParameters {
        variant,
        dim: d,
        words: random_matrix(n_words, d, rng),
        ctx_entities: random_matrix(n_entities, d, rng),
        targets: random_matrix(n_targets, d, rng),
        projection: (variant == Variant::Full).then(|| random_matrix(d, 2 * d, rng)),
    };
    let n = rng.gen_range(0..=4);
    let k = rng.gen_range(0..=3);
    let doc = Document {
        target: None,
        words: (0..n).map(|_| rng.gen_range(0..n_words as u32)).collect(),
        ctx_entities: (0..k).map(|_| rng.gen_range(0..n_entities as u32)).collect(),
    };
    let target = rng.gen_range(0..n_targets as u32);
    let negatives = sample_negatives(target, rng.gen_range(1..=5), n_targets, rng);

    let loss_of = |p: &ModelParameters| {
        let v = encode(&doc, p, 0.0, &mut rand::rngs::mock::StepRng::new(0, 0)).vector;
        sampled_softmax_loss(&v, target, &negatives, &p.targets).0
    };
    let enc = encode(&doc, &params, 0.0, &mut rand::rngs::mock::StepRng::new(0, 0));
    let (_, grads) = backward(&enc, target, &negatives, &params);

    let g_words = densify(grads.words.iter(), (n_words, d));
    let g_ents = densify(grads.ctx_entities.iter(), (n_entities, d));
    let g_targets = densify(grads.targets.iter(), (n_targets, d));
    let mut worst: f64 = 0.0;

    let mut m = params.words.clone();
    worst = worst.max(check_matrix(&mut m, &g_words, |m| {
        let mut p = params.clone();
        p.words = m.clone();
        loss_of(&p)
    }));
    let mut m = params.ctx_entities.clone();
    worst = worst.max(check_matrix(&mut m, &g_ents, |m| {
        let mut p = params.clone();
        p.ctx_entities = m.clone();
        loss_of(&p)
    }));
    let mut m = params.targets.clone();
    worst = worst.max(check_matrix(&mut m, &g_targets, |m| {
        let mut p = params.clone();
        p.targets = m.clone();
        loss_of(&p)
    }));
    if let Some(w) = params.projection.take() {
        let g_w = grads.projection.clone().unwrap_or_else(|| Matrix::zeros(d, 2 * d));
        let mut m = w.clone();
        params.projection = Some(w);
        worst = worst.max(check_matrix(&mut m, &g_w, |m| {
            let mut p = params.clone();
            p.projection = Some(m.clone());
            loss_of(&p)
        }));
    }
    worst
}

/// Worst relative gradient error of one random SGNS instance at `d = 5`.
pub fn sgns_gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let (n, d) = (7, 5);
    let params = SgnsParams {
        input: random_matrix(n, d, rng),
        output: random_matrix(n, d, rng),
    };
    let center = rng.gen_range(0..n as u32);
    let context = rng.gen_range(0..n as u32);
    let negatives: Vec<u32> = (0..rng.gen_range(1..=5)).map(|_| rng.gen_range(0..n as u32)).collect();
    let g = sgns_gradients(center, context, &negatives, &params);
    let mut g_in = Matrix::zeros(n, d);
    g_in.row_mut(center as usize).copy_from_slice(&g.input);
    let g_out = densify(g.output.iter().map(|(id, r)| (*id, r.as_slice())), (n, d));

    let mut m = params.input.clone();
    let a = check_matrix(&mut m, &g_in, |m| {
        let p = SgnsParams {
            input: m.clone(),
            output: params.output.clone(),
        };
        sgns_gradients(center, context, &negatives, &p).loss
    });
    let mut m = params.output.clone();
    let b = check_matrix(&mut m, &g_out, |m| {
        let p = SgnsParams {
            input: params.input.clone(),
            output: m.clone(),
        };
        sgns_gradients(center, context, &negatives, &p).loss
    });
    a.max(b)
}

/// Worst relative gradient error of BCE through the typing MLP on random
/// small shapes.
pub fn mlp_gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.gen_range(1..=5);
    let h = rng.gen_range(1..=6);
    let t = rng.gen_range(1..=4);
    let model = TypingModel {
        hidden: random_matrix(h, d, rng),
        output: random_matrix(t, h, rng),
    };
    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gold: TypeSet = (0..t).filter(|_| rng.gen_bool(0.5)).collect();
    let mut gh = Matrix::zeros(h, d);
    let mut go = Matrix::zeros(t, h);
    mlp_backward(&x, &gold, &model, 1.0, &mut gh, &mut go).unwrap();
    let loss = |m: &TypingModel| bce_loss(&mlp_forward(&x, m).unwrap(), &gold);

    let mut m = model.hidden.clone();
    let a = check_matrix(&mut m, &gh, |m| {
        loss(&TypingModel {
            hidden: m.clone(),
            output: model.output.clone(),
        })
    });
    let mut m = model.output.clone();
    let b = check_matrix(&mut m, &go, |m| {
        loss(&TypingModel {
            hidden: model.hidden.clone(),
            output: m.clone(),
        })
    });
    a.max(b)
}

/// A random typing instance with heavily tied probabilities.
pub struct TypingCase {
    pub probs: Vec<Vec<f64>>,
    pub gold: Vec<TypeSet>,
    pub pred: Vec<TypeSet>,
    pub n_types: usize,
}

pub fn random_typing_case(rng: &mut ChaCha8Rng) -> TypingCase {
    let n_types = rng.gen_range(1..=8);
    let n = rng.gen_range(1..=12);
    let probs = (0..n)
        .map(|_| (0..n_types).map(|_| rng.gen_range(0..6) as f64 / 5.0).collect())
        .collect();
    let gold = (0..n)
        .map(|_| {
            let mut g: TypeSet = (0..n_types).filter(|_| rng.gen_bool(0.3)).collect();
            if g.is_empty() {
                g.insert(rng.gen_range(0..n_types));
            }
            g
        })
        .collect();
    let pred = (0..n)
        .map(|_| (0..n_types).filter(|_| rng.gen_bool(0.3)).collect())
        .collect();
    TypingCase {
        probs,
        gold,
        pred,
        n_types,
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Position of type `t` in the ranking of `probs`: the number of types
/// strictly ahead of it.
fn position(probs: &[f64], t: usize) -> usize {
    (0..probs.len())
        .filter(|&j| probs[j] > probs[t] || (probs[j] == probs[t] && j < t))
        .count()
}

pub mod reference {
    use super::*;

    pub fn ranking(probs: &[f64]) -> Vec<usize> {
        let mut r = vec![0; probs.len()];
        for t in 0..probs.len() {
            r[position(probs, t)] = t;
        }
        r
    }

    pub fn p_at_1(probs: &[Vec<f64>], gold: &[TypeSet]) -> f64 {
        let hits = probs
            .iter()
            .zip(gold)
            .filter(|(p, g)| (0..p.len()).any(|t| position(p, t) == 0 && g.contains(&t)))
            .count();
        hits as f64 / gold.len() as f64
    }

    pub fn bep(probs: &[Vec<f64>], gold: &[TypeSet]) -> f64 {
        let total: f64 = probs
            .iter()
            .zip(gold)
            .map(|(p, g)| {
                let cutoff = g.len();
                let hits = g.iter().filter(|&&t| position(p, t) < cutoff).count();
                hits as f64 / cutoff as f64
            })
            .sum();
        total / gold.len() as f64
    }

    pub fn global_bep(probs: &[Vec<f64>], gold: &[TypeSet]) -> f64 {
        let pairs: Vec<(usize, usize, f64)> = probs
            .iter()
            .enumerate()
            .flat_map(|(e, p)| p.iter().enumerate().map(move |(t, &x)| (e, t, x)))
            .collect();
        let cutoff: usize = gold.iter().map(BTreeSet::len).sum();
        let hits = pairs
            .iter()
            .filter(|&&(e, t, x)| {
                let ahead = pairs
                    .iter()
                    .filter(|&&(e2, t2, x2)| x2 > x || (x2 == x && (e2, t2) < (e, t)))
                    .count();
                ahead < cutoff && gold[e].contains(&t)
            })
            .count();
        safe_div(hits as f64, cutoff as f64)
    }

    pub fn strict_accuracy(pred: &[TypeSet], gold: &[TypeSet]) -> f64 {
        let exact = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
        exact as f64 / gold.len() as f64
    }

    pub fn micro_f1(pred: &[TypeSet], gold: &[TypeSet], n_types: usize) -> f64 {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (p, g) in pred.iter().zip(gold) {
            for t in 0..n_types {
                match (p.contains(&t), g.contains(&t)) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fn_ += 1.0,
                    (false, false) => {}
                }
            }
        }
        f1(safe_div(tp, tp + fp), safe_div(tp, tp + fn_))
    }

    pub fn macro_f1(pred: &[TypeSet], gold: &[TypeSet]) -> f64 {
        let total: f64 = pred
            .iter()
            .zip(gold)
            .map(|(p, g)| {
                let tp = p.intersection(g).count() as f64;
                f1(safe_div(tp, p.len() as f64), safe_div(tp, g.len() as f64))
            })
            .sum();
        total / gold.len() as f64
    }

    /// Accuracy, macro F1 and per-class F1 from a confusion matrix.
    pub fn classification(pred: &[usize], gold: &[usize], n_classes: usize) -> (f64, f64, Vec<f64>) {
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&p, &g) in pred.iter().zip(gold) {
            confusion[g][p] += 1;
        }
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        let per_class: Vec<f64> = (0..n_classes)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let predicted: usize = (0..n_classes).map(|g| confusion[g][c]).sum();
                let actual: usize = confusion[c].iter().sum();
                f1(safe_div(tp, predicted as f64), safe_div(tp, actual as f64))
            })
            .collect();
        let macro_f1 = per_class.iter().sum::<f64>() / n_classes as f64;
        (correct as f64 / gold.len() as f64, macro_f1, per_class)
    }

    /// Best dev F1 of type `t` over every distinct probability cutoff and
    /// the assign-nothing cutoff, by exhaustive evaluation.
    pub fn best_threshold_f1(probs: &[Vec<f64>], gold: &[TypeSet], t: usize) -> f64 {
        let mut cutoffs: Vec<f64> = probs.iter().map(|p| p[t]).collect();
        cutoffs.push(NO_ASSIGNMENT);
        cutoffs
            .into_iter()
            .map(|theta| threshold_f1(probs, gold, t, theta))
            .fold(0.0, f64::max)
    }

    pub fn threshold_f1(probs: &[Vec<f64>], gold: &[TypeSet], t: usize, theta: f64) -> f64 {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (p, g) in probs.iter().zip(gold) {
            match (p[t] >= theta, g.contains(&t)) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                (false, false) => {}
            }
        }
        f1(safe_div(tp, tp + fp), safe_div(tp, tp + fn_))
    }
}

/// Input files for end-to-end CLI runs, generated from a small latent
/// world.
pub struct Fixture {
    pub dir: PathBuf,
    pub corpus: PathBuf,
    pub typing: PathBuf,
    pub labeled: PathBuf,
    pub annotations: PathBuf,
    pub text: String,
}

impl Fixture {
    pub fn write(dir: &Path) -> Fixture {
        let world = LatentWorld::generate(LatentConfig {
            n_entities: 60,
            ..Default::default()
        });
        let corpus = dir.join("kb.jsonl");
        write_jsonl(&corpus, &world.kb_corpus()).unwrap();
        let typing = dir.join("types.tsv");
        std::fs::write(&typing, world.typing_dataset().to_tsv()).unwrap();
        let labeled = dir.join("labeled.jsonl");
        write_jsonl(&labeled, &world.labeled_corpus(&[0, 2, 4], 12, 4, 5)).unwrap();
        let annotations = dir.join("ann.json");
        std::fs::write(
            &annotations,
            r#"[{"start": 1, "end": 2, "entity": "Entity_000", "score": 0.9}]"#,
        )
        .unwrap();
        Fixture {
            dir: dir.to_path_buf(),
            corpus,
            typing,
            labeled,
            annotations,
            text: "t0w1 mention0 w3 t0w2 w7".into(),
        }
    }

    pub fn path(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }
}

pub fn textent_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_textent"))
}

pub fn run_cli(args: &[&str]) -> Output {
    textent_bin().args(args).output().expect("binary runs")
}

/// Small-model flags so that CLI runs finish in well under a second.
pub const FAST_TRAIN: [&str; 8] = ["--dim", "8", "--negatives", "5", "--epochs", "3", "--batch-size", "10"];

/// Runs every subcommand once inside the fixture directory, writing
/// outputs whose names carry `tag`. Returns the output paths that must be
/// byte-identical across runs with the same seed.
pub fn run_pipeline(fx: &Fixture, tag: &str) -> Vec<PathBuf> {
    let data = fx.path(&format!("data{tag}.txe"));
    let vec = fx.path(&format!("pre{tag}.vec"));
    let model = fx.path(&format!("model{tag}.txm"));
    let enc = fx.path(&format!("enc{tag}.tsv"));
    let typing = fx.path(&format!("typing{tag}.json"));
    let classify = fx.path(&format!("classify{tag}.json"));
    let nn = fx.path(&format!("nn{tag}.tsv"));
    let corpus = fx.corpus.display().to_string();
    let steps: Vec<Vec<String>> = vec![
        strings(&["build-corpus", "--input", &corpus, "--min-links", "0", "--output", &data]),
        strings(&["pretrain", "--corpus", &data, "--dim", "8", "--epochs", "2", "--min-count", "1", "--threads", "1", "--seed", "3", "--output", &vec]),
        [
            strings(&["train", "--data", &data, "--init", &vec, "--threads", "1", "--seed", "3", "--output", &model]),
            strings(&FAST_TRAIN),
        ]
        .concat(),
        strings(&["encode", "--model", &model, "--input", &corpus, "--output", &enc]),
        strings(&["eval-typing", "--model", &model, "--dataset", &fx.typing.display().to_string(), "--epochs", "5", "--hidden", "8", "--seed", "3", "--report", &typing]),
        strings(&["eval-classify", "--model", &model, "--corpus", &fx.labeled.display().to_string(), "--epochs", "5", "--min-count", "1", "--seed", "3", "--report", &classify]),
        strings(&["nn", "--model", &model, "--text", &fx.text, "--annotations", &fx.annotations.display().to_string(), "--top", "5", "--output", &nn]),
    ];
    for step in &steps {
        let out = textent_bin().args(step).output().expect("binary runs");
        assert!(
            out.status.success(),
            "{step:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    [data, vec, model, enc, typing, classify, nn].into_iter().map(PathBuf::from).collect()
}

fn strings(args: &[&str]) -> Vec<String> {
    args.iter().map(|s| s.to_string()).collect()
}
