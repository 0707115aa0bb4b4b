//! Evaluation measures for multi-label typing and multiclass classification.
//!
//! Every ratio with a zero denominator evaluates to 0, and F1 is 0 whenever
//! precision and recall are both 0.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of type ids.
pub type TypeSet = BTreeSet<usize>;

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// F1 from raw counts, as `2tp / (2tp + fp + fn)`; 0 when `tp = 0`.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Type ids by descending probability, ties by ascending id.
pub fn rank_types(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

/// Fraction of entities whose top-ranked type is gold.
pub fn precision_at_1(ranked: &[Vec<usize>], gold: &[TypeSet]) -> f64 {
    assert_eq!(ranked.len(), gold.len());
    let hits = ranked
        .iter()
        .zip(gold)
        .filter(|(r, g)| r.first().is_some_and(|t| g.contains(t)))
        .count();
    ratio(hits, gold.len())
}

/// Precision of one ranking at cutoff `|gold|`, where precision equals recall.
pub fn r_precision(ranked: &[usize], gold: &TypeSet) -> f64 {
    let hits = ranked.iter().take(gold.len()).filter(|t| gold.contains(t)).count();
    ratio(hits, gold.len())
}

/// Breakeven point computed per entity and averaged.
pub fn breakeven_point(ranked: &[Vec<usize>], gold: &[TypeSet]) -> f64 {
    assert_eq!(ranked.len(), gold.len());
    mean(ranked.iter().zip(gold).map(|(r, g)| r_precision(r, g)))
}

/// Breakeven point of a single pooled ranking of all (entity, type) pairs
/// by probability, cut at the total number of gold assignments. Ties are
/// ordered by entity index, then type id.
pub fn global_breakeven_point(probs: &[Vec<f64>], gold: &[TypeSet]) -> f64 {
    assert_eq!(probs.len(), gold.len());
    let mut pairs: Vec<(f64, usize, usize)> = probs
        .iter()
        .enumerate()
        .flat_map(|(e, p)| p.iter().enumerate().map(move |(t, &x)| (x, e, t)))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let total: usize = gold.iter().map(BTreeSet::len).sum();
    let hits = pairs
        .iter()
        .take(total)
        .filter(|&&(_, e, t)| gold[e].contains(&t))
        .count();
    ratio(hits, total)
}

/// Fraction of entities whose predicted set equals the gold set.
pub fn strict_accuracy(pred: &[TypeSet], gold: &[TypeSet]) -> f64 {
    assert_eq!(pred.len(), gold.len());
    ratio(pred.iter().zip(gold).filter(|(p, g)| p == g).count(), gold.len())
}

fn set_counts(pred: &TypeSet, gold: &TypeSet) -> (usize, usize, usize) {
    let tp = pred.intersection(gold).count();
    (tp, pred.len() - tp, gold.len() - tp)
}

/// F1 over all pooled type–entity decisions.
pub fn micro_f1(pred: &[TypeSet], gold: &[TypeSet]) -> f64 {
    assert_eq!(pred.len(), gold.len());
    let (tp, fp, fn_) = pred
        .iter()
        .zip(gold)
        .map(|(p, g)| set_counts(p, g))
        .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    f1_from_counts(tp, fp, fn_)
}

/// Per-entity F1 averaged over entities.
pub fn macro_f1_entities(pred: &[TypeSet], gold: &[TypeSet]) -> f64 {
    assert_eq!(pred.len(), gold.len());
    mean(pred.iter().zip(gold).map(|(p, g)| {
        let (tp, fp, fn_) = set_counts(p, g);
        f1_from_counts(tp, fp, fn_)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// One-vs-rest F1 per class index.
    pub per_class_f1: Vec<f64>,
}

/// Accuracy, macro F1 and per-class F1 for labels in `0..n_classes`.
pub fn classification_report(pred: &[usize], gold: &[usize], n_classes: usize) -> Result<ClassificationReport> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if let Some(&bad) = pred.iter().chain(gold).find(|&&l| l >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} outside {n_classes} classes")));
    }
    let mut tp = vec![0; n_classes];
    let mut fp = vec![0; n_classes];
    let mut fn_ = vec![0; n_classes];
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let per_class_f1: Vec<f64> = (0..n_classes)
        .map(|c| f1_from_counts(tp[c], fp[c], fn_[c]))
        .collect();
    Ok(ClassificationReport {
        accuracy: ratio(tp.iter().sum(), gold.len()),
        macro_f1: mean(per_class_f1.iter().copied()),
        per_class_f1,
    })
}
