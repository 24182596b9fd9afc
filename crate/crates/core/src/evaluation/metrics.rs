use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::SentimentLabel;
use crate::error::{Error, Result};

/// Fraction of positions where the prediction equals the gold label.
pub fn accuracy(preds: &[SentimentLabel], golds: &[SentimentLabel]) -> Result<f64> {
    if preds.len() != golds.len() {
        return Err(Error::input(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::input("accuracy of an empty set"));
    }
    let correct = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Entity counts summed over texts, with the derived scores.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EntityMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EntityMetrics {
    /// Scores from summed counts; every undefined ratio is 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |n: usize, d: usize| if d > 0 { n as f64 / d as f64 } else { 0.0 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EntityMetrics {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Micro-averaged entity precision, recall and F1 over paired per-text sets.
pub fn entity_prf<S: AsRef<str> + Ord>(pred_sets: &[BTreeSet<S>], gold_sets: &[BTreeSet<S>]) -> Result<EntityMetrics> {
    if pred_sets.len() != gold_sets.len() {
        return Err(Error::input(format!(
            "{} predicted sets for {} gold sets",
            pred_sets.len(),
            gold_sets.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (pred, gold) in pred_sets.iter().zip(gold_sets) {
        let hit = pred.intersection(gold).count();
        tp += hit;
        fp += pred.len() - hit;
        fn_ += gold.len() - hit;
    }
    Ok(EntityMetrics::from_counts(tp, fp, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use SentimentLabel::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[Negative, Positive], &[Negative, Positive]).unwrap(), 1.0);
        assert_eq!(
            accuracy(&[Negative, Positive, Negative, Negative], &[Negative, Positive, Positive, Negative]).unwrap(),
            0.75
        );
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[Negative], &[]).is_err());
    }

    #[test]
    fn worked_example() {
        let m = entity_prf(&[set(&["A", "C"]), set(&["D"])], &[set(&["A", "B"]), set(&["D"])]).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (2, 1, 1));
        for v in [m.precision, m.recall, m.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_denominators() {
        let m = entity_prf(&[set(&[]), set(&[])], &[set(&["A"]), set(&[])]).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 1));
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let empty = entity_prf::<String>(&[], &[]).unwrap();
        assert_eq!(empty.f1, 0.0);
        assert!(entity_prf(&[set(&[])], &[]).is_err());
    }
}
