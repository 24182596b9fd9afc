use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::losses::cross_entropy;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_SPAN_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPrediction {
    /// Inclusive token indices inside the context segment.
    pub start_token: usize,
    pub end_token: usize,
    pub text: String,
}

/// The `(i, j)` maximising `start[i] + end[j]` with `i ≤ j < i + max_span_len`
/// and both in `valid` (sorted ascending). Ties go to the smaller `i`, then
/// the smaller `j`.
pub fn best_span(
    start: &[f64],
    end: &[f64],
    valid: &[usize],
    max_span_len: usize,
) -> Result<(usize, usize)> {
    if max_span_len == 0 {
        return Err(Error::config("max_span_len must be ≥ 1"));
    }
    if valid.is_empty() {
        return Err(Error::input("no context tokens to extract a span from"));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (a, &i) in valid.iter().enumerate() {
        for &j in valid[a..].iter().take_while(|&&j| j < i + max_span_len) {
            let score = start[i] + end[j];
            if best.map_or(true, |(b, _, _)| score > b) {
                best = Some((score, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("valid is non-empty");
    Ok((i, j))
}

/// Mean of the start and end cross-entropies, each restricted to the `valid`
/// positions. Returns the loss and gradients over all positions (zero outside
/// `valid`).
pub fn span_loss(
    start: &Array1<f64>,
    end: &Array1<f64>,
    valid: &[usize],
    gold_start: usize,
    gold_end: usize,
) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let locate = |pos: usize| {
        valid
            .iter()
            .position(|&v| v == pos)
            .ok_or_else(|| Error::input(format!("gold position {pos} is outside the context")))
    };
    let gs = locate(gold_start)?;
    let ge = locate(gold_end)?;
    let s: Vec<f64> = valid.iter().map(|&i| start[i]).collect();
    let e: Vec<f64> = valid.iter().map(|&i| end[i]).collect();
    let (ls, gs_grad) = cross_entropy(&s, gs);
    let (le, ge_grad) = cross_entropy(&e, ge);
    let mut d_start = Array1::zeros(start.len());
    let mut d_end = Array1::zeros(end.len());
    for (k, &i) in valid.iter().enumerate() {
        d_start[i] = 0.5 * gs_grad[k];
        d_end[i] = 0.5 * ge_grad[k];
    }
    Ok((0.5 * (ls + le), d_start, d_end))
}
