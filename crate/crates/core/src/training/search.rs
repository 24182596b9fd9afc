use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::kfold::kfold_split;
use super::trainer::train_documents;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tasks::LossKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub train_docs: usize,
    pub dev_docs: usize,
    pub dev_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<FoldScore>,
    pub mean_score: f64,
    /// One checkpoint per fold, in fold order.
    pub checkpoints: Vec<Checkpoint>,
}

/// Splits documents into `k` folds (seeded by `cfg.seed`) and trains one
/// model per held-out fold. Folds run in parallel; results are in fold order.
pub fn cross_validate(docs: &[Document], cfg: &TrainConfig, k: usize) -> Result<CrossValidation> {
    let split = kfold_split(docs.len(), k, cfg.seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| docs[i].clone()).collect::<Vec<_>>();
    let runs: Vec<(FoldScore, Checkpoint)> = (0..k)
        .into_par_iter()
        .map(|f| {
            let tr = pick(split.train_indices(f));
            let dev = pick(split.dev_indices(f));
            let out = train_documents(&tr, cfg, &dev)?;
            Ok((
                FoldScore {
                    fold: f,
                    train_docs: tr.len(),
                    dev_docs: dev.len(),
                    dev_score: out.checkpoint.dev_score,
                },
                out.checkpoint,
            ))
        })
        .collect::<Result<_>>()?;
    let (folds, checkpoints): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mean_score = folds.iter().map(|f| f.dev_score).sum::<f64>() / k as f64;
    Ok(CrossValidation {
        folds,
        mean_score,
        checkpoints,
    })
}

/// A hyperparameter the neighborhood search can scale. Variant order is the
/// lexicographic order of the names, used to break ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperParam {
    BatchSize,
    DropoutRate,
    Epochs,
    FocalGamma,
    LearningRate,
    Threshold,
}

impl HyperParam {
    pub fn as_str(self) -> &'static str {
        match self {
            HyperParam::BatchSize => "batch_size",
            HyperParam::DropoutRate => "dropout_rate",
            HyperParam::Epochs => "epochs",
            HyperParam::FocalGamma => "focal_gamma",
            HyperParam::LearningRate => "learning_rate",
            HyperParam::Threshold => "threshold",
        }
    }
}

/// Multiplicative factors tried for one parameter (e.g. `{0.5, 1, 2}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDelta {
    pub param: HyperParam,
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    /// Factor applied to each searched parameter, in parameter order.
    pub factors: Vec<(HyperParam, f64)>,
    /// Number of parameters whose value differs from the base config.
    pub changed: usize,
    pub config: TrainConfig,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: TrainConfig,
    pub best_row: usize,
    pub table: Vec<SearchRow>,
}

fn scale_count(n: usize, f: f64) -> usize {
    ((n as f64 * f).round() as usize).max(1)
}

/// Applies `factor` to `param` of `cfg`. Returns whether the value changed.
pub fn apply_factor(cfg: &mut TrainConfig, param: HyperParam, factor: f64) -> Result<bool> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::config(format!("search factor {factor} must be positive")));
    }
    Ok(match param {
        HyperParam::BatchSize => {
            let old = cfg.batch_size;
            cfg.batch_size = scale_count(old, factor);
            cfg.batch_size != old
        }
        HyperParam::Epochs => {
            let old = cfg.epochs;
            cfg.epochs = scale_count(old, factor);
            cfg.epochs != old
        }
        HyperParam::LearningRate => {
            cfg.learning_rate *= factor;
            factor != 1.0
        }
        HyperParam::DropoutRate => {
            let old = cfg.encoder.dropout_rate;
            cfg.encoder.dropout_rate = (old * factor).min(0.95);
            cfg.encoder.dropout_rate != old
        }
        HyperParam::Threshold => {
            let old = cfg.threshold;
            cfg.threshold = (old * factor).min(1.0);
            cfg.threshold != old
        }
        HyperParam::FocalGamma => match &mut cfg.loss {
            LossKind::Focal(f) => {
                let old = f.gamma;
                f.gamma *= factor;
                f.gamma != old
            }
            LossKind::CrossEntropy => {
                return Err(Error::config("focal_gamma searched but the loss is cross-entropy"));
            }
        },
    })
}

/// Enumerates the grid implied by `deltas`. The base point (all factors 1)
/// is always part of the grid.
pub fn search_grid(base: &TrainConfig, deltas: &[ParamDelta]) -> Result<Vec<(Vec<(HyperParam, f64)>, usize, TrainConfig)>> {
    let mut deltas = deltas.to_vec();
    deltas.sort_by_key(|d| d.param);
    if deltas.windows(2).any(|w| w[0].param == w[1].param) {
        return Err(Error::config("a parameter appears twice in the search grid"));
    }
    let mut points: Vec<Vec<(HyperParam, f64)>> = vec![Vec::new()];
    for d in &deltas {
        if d.factors.is_empty() {
            return Err(Error::config(format!("empty factor list for {}", d.param.as_str())));
        }
        let mut factors = d.factors.clone();
        if !factors.contains(&1.0) {
            factors.push(1.0);
        }
        factors.sort_by(f64::total_cmp);
        factors.dedup();
        points = points
            .into_iter()
            .flat_map(|p| {
                factors.iter().map(move |&f| {
                    let mut q = p.clone();
                    q.push((d.param, f));
                    q
                })
            })
            .collect();
    }
    points
        .into_iter()
        .map(|p| {
            let mut cfg = base.clone();
            let mut changed = 0;
            for &(param, f) in &p {
                changed += apply_factor(&mut cfg, param, f)? as usize;
            }
            cfg.validate()?;
            Ok((p, changed, cfg))
        })
        .collect()
}

/// Cross-validates every grid point and returns the best mean score. Ties go
/// to the candidate with fewer changed parameters, then to the
/// lexicographically smallest factor list.
pub fn neighborhood_search(base: &TrainConfig, deltas: &[ParamDelta], docs: &[Document], k: usize) -> Result<SearchResult> {
    let grid = search_grid(base, deltas)?;
    if grid.is_empty() {
        return Err(Error::config("empty search grid"));
    }
    let table: Vec<SearchRow> = grid
        .into_par_iter()
        .map(|(factors, changed, config)| {
            let cv = cross_validate(docs, &config, k)?;
            Ok(SearchRow {
                factors,
                changed,
                config,
                fold_scores: cv.folds.iter().map(|f| f.dev_score).collect(),
                mean_score: cv.mean_score,
            })
        })
        .collect::<Result<_>>()?;
    let best_row = (0..table.len())
        .min_by(|&a, &b| {
            let (ra, rb) = (&table[a], &table[b]);
            rb.mean_score
                .total_cmp(&ra.mean_score)
                .then(ra.changed.cmp(&rb.changed))
                .then_with(|| {
                    let fa: Vec<f64> = ra.factors.iter().map(|x| x.1).collect();
                    let fb: Vec<f64> = rb.factors.iter().map(|x| x.1).collect();
                    fa.iter()
                        .zip(&fb)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        })
        .expect("non-empty table");
    Ok(SearchResult {
        best: table[best_row].config.clone(),
        best_row,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_base_and_counts() {
        let base = TrainConfig::default();
        let g = search_grid(&base, &[]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].2, base);
        let deltas = [
            ParamDelta {
                param: HyperParam::LearningRate,
                factors: vec![0.5, 2.0],
            },
            ParamDelta {
                param: HyperParam::BatchSize,
                factors: vec![0.5, 1.0, 2.0],
            },
        ];
        let g = search_grid(&base, &deltas).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.iter().filter(|p| p.1 == 0).count(), 1);
        assert!(g.iter().any(|p| p.2 == base));
    }

    #[test]
    fn grid_errors() {
        let base = TrainConfig::default();
        let empty = [ParamDelta {
            param: HyperParam::Epochs,
            factors: vec![],
        }];
        assert!(search_grid(&base, &empty).is_err());
        let gamma = [ParamDelta {
            param: HyperParam::FocalGamma,
            factors: vec![2.0],
        }];
        assert!(search_grid(&base, &gamma).is_err());
        let dup = [
            ParamDelta {
                param: HyperParam::Epochs,
                factors: vec![2.0],
            },
            ParamDelta {
                param: HyperParam::Epochs,
                factors: vec![0.5],
            },
        ];
        assert!(search_grid(&base, &dup).is_err());
    }
}
