//! Evaluation metrics.

use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Test-set metrics. For more than two classes, balanced accuracy is the
/// mean per-class recall, AUROC is the one-vs-rest macro average and the
/// confusion counts are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub auroc: f64,
    pub confusion: Option<Confusion>,
}

fn check_binary(labels: &[usize], n: usize) -> Result<(usize, usize)> {
    if labels.len() != n {
        return Err(Error::invalid(format!("{n} predictions for {} labels", labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("label {l} is not binary")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    Ok((pos, neg))
}

pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<Confusion> {
    check_binary(labels, preds.len())?;
    let mut c = Confusion { tp: 0, tn: 0, fp: 0, fn_: 0 };
    for (&p, &l) in preds.iter().zip(labels) {
        match (p == 1, l == 1) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `(TPR + TNR) / 2` for binary labels.
pub fn balanced_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    let c = confusion(preds, labels)?;
    let tpr = c.tp as f64 / (c.tp + c.fn_) as f64;
    let tnr = c.tn as f64 / (c.tn + c.fp) as f64;
    Ok(0.5 * (tpr + tnr))
}

/// Area under the ROC curve via the Mann–Whitney statistic with mid-ranks.
pub fn auroc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    let (pos, neg) = check_binary(labels, scores.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Mean recall over the classes present in `labels`.
pub fn mean_class_recall(preds: &[usize], labels: &[usize], n_classes: usize) -> f64 {
    let mut hit = vec![0usize; n_classes];
    let mut tot = vec![0usize; n_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        tot[l] += 1;
        hit[l] += usize::from(p == l);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| tot[c] > 0).collect();
    present.iter().map(|&c| hit[c] as f64 / tot[c] as f64).sum::<f64>() / present.len().max(1) as f64
}

pub fn evaluate(spec: &ModelSpec, w: &[f64], data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let probs: Vec<Vec<f64>> = (0..data.len()).map(|i| spec.predict(w, data.row(i))).collect();
    let binary = spec.n_outputs() == 1;
    let preds: Vec<usize> = probs
        .iter()
        .map(|p| {
            if binary {
                usize::from(p[0] >= 0.5)
            } else {
                p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap()
            }
        })
        .collect();
    let accuracy = preds.iter().zip(&data.labels).filter(|(p, l)| p == l).count() as f64 / data.len() as f64;
    if binary {
        let scores: Vec<f64> = probs.iter().map(|p| p[0]).collect();
        // Single-class test sets leave the class-conditional metrics undefined.
        let (balanced_accuracy, auroc, confusion) = match check_binary(&data.labels, preds.len()) {
            Ok(_) => (
                balanced_accuracy(&preds, &data.labels)?,
                auroc(&scores, &data.labels)?,
                Some(confusion(&preds, &data.labels)?),
            ),
            Err(_) => (f64::NAN, f64::NAN, None),
        };
        return Ok(EvalReport { accuracy, balanced_accuracy, auroc, confusion });
    }
    let classes = spec.n_outputs();
    let mut aucs = Vec::new();
    for c in 0..classes {
        let onehot: Vec<usize> = data.labels.iter().map(|&l| usize::from(l == c)).collect();
        if onehot.contains(&1) && onehot.contains(&0) {
            let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
            aucs.push(auroc(&scores, &onehot)?);
        }
    }
    Ok(EvalReport {
        accuracy,
        balanced_accuracy: mean_class_recall(&preds, &data.labels, classes),
        auroc: if aucs.is_empty() { f64::NAN } else { aucs.iter().sum::<f64>() / aucs.len() as f64 },
        confusion: None,
    })
}
