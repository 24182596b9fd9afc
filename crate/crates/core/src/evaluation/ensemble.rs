use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SentimentLabel;
use crate::error::{Error, Result};
use crate::tasks::{check_threshold, score_entity, sentiment_prob_negative, MatchPrediction, SentimentPrediction};
use crate::training::{train, Checkpoint, TaskDataset, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSpec {
    pub seeds: Vec<u64>,
    pub top_m: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            seeds: (0..12).collect(),
            top_m: 10,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::config("ensemble seeds must be distinct"));
        }
        if self.top_m == 0 || self.top_m > self.seeds.len() {
            return Err(Error::config(format!(
                "top_m {} must lie in 1..={}",
                self.top_m,
                self.seeds.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberScore {
    pub seed: u64,
    pub dev_score: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSelection {
    /// Top members, best first.
    pub kept: Vec<Checkpoint>,
    /// Every trained member in ranking order.
    pub members: Vec<MemberScore>,
}

/// Ranks checkpoints by dev score (descending, ties to the smaller seed) and
/// keeps the first `top_m`.
pub fn select_top(mut checkpoints: Vec<Checkpoint>, top_m: usize) -> EnsembleSelection {
    checkpoints.sort_by(|a, b| b.dev_score.total_cmp(&a.dev_score).then(a.seed.cmp(&b.seed)));
    let members = checkpoints
        .iter()
        .enumerate()
        .map(|(i, c)| MemberScore {
            seed: c.seed,
            dev_score: c.dev_score,
            kept: i < top_m,
        })
        .collect();
    checkpoints.truncate(top_m);
    EnsembleSelection {
        kept: checkpoints,
        members,
    }
}

/// Trains one model per seed (configs identical apart from the seed) and
/// keeps the `top_m` best on the dev set. Seeds train in parallel.
pub fn ensemble_train_select(
    train_data: &TaskDataset,
    cfg: &TrainConfig,
    spec: &EnsembleSpec,
    dev_data: &TaskDataset,
) -> Result<EnsembleSelection> {
    spec.validate()?;
    let checkpoints: Vec<Checkpoint> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let member_cfg = TrainConfig {
                seed,
                ..cfg.clone()
            };
            train(train_data, &member_cfg, dev_data).map(|o| o.checkpoint)
        })
        .collect::<Result<_>>()?;
    Ok(select_top(checkpoints, spec.top_m))
}

/// Majority vote; an exact tie goes to Negative iff the mean negative
/// probability is at least 0.5. The output probability is that mean.
pub fn vote_sentiment(members: &[SentimentPrediction]) -> Result<SentimentPrediction> {
    if members.is_empty() {
        return Err(Error::input("cannot vote over zero members"));
    }
    let negative = members.iter().filter(|m| m.label == SentimentLabel::Negative).count();
    let positive = members.len() - negative;
    let mean = members.iter().map(|m| m.prob_negative).sum::<f64>() / members.len() as f64;
    let label = match negative.cmp(&positive) {
        std::cmp::Ordering::Greater => SentimentLabel::Negative,
        std::cmp::Ordering::Less => SentimentLabel::Positive,
        std::cmp::Ordering::Equal if mean >= 0.5 => SentimentLabel::Negative,
        std::cmp::Ordering::Equal => SentimentLabel::Positive,
    };
    Ok(SentimentPrediction {
        label,
        prob_negative: mean,
    })
}

/// How matcher ensemble members are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchVoting {
    /// Each member thresholds its score; strict majority decides.
    #[default]
    Majority,
    /// The mean member score is thresholded.
    MeanScore,
}

fn check_same_entities(members: &[Vec<MatchPrediction>]) -> Result<()> {
    let Some(first) = members.first() else {
        return Err(Error::input("cannot vote over zero members"));
    };
    for (i, m) in members.iter().enumerate().skip(1) {
        if m.len() != first.len() || m.iter().zip(first).any(|(a, b)| a.entity != b.entity) {
            return Err(Error::input(format!(
                "member {i} scored a different entity list than member 0"
            )));
        }
    }
    Ok(())
}

/// Entities that strictly more than half of the members score at or above
/// `score_threshold`, in entity-list order.
pub fn vote_key_entities(members: &[Vec<MatchPrediction>], score_threshold: f64) -> Result<Vec<String>> {
    check_threshold(score_threshold)?;
    check_same_entities(members)?;
    let n = members.len();
    Ok((0..members[0].len())
        .filter(|&j| 2 * members.iter().filter(|m| m[j].score >= score_threshold).count() > n)
        .map(|j| members[0][j].entity.clone())
        .collect())
}

/// Entities whose mean member score is at least `score_threshold`.
pub fn mean_score_key_entities(members: &[Vec<MatchPrediction>], score_threshold: f64) -> Result<Vec<String>> {
    check_threshold(score_threshold)?;
    check_same_entities(members)?;
    let n = members.len() as f64;
    Ok((0..members[0].len())
        .filter(|&j| members.iter().map(|m| m[j].score).sum::<f64>() / n >= score_threshold)
        .map(|j| members[0][j].entity.clone())
        .collect())
}

/// Each member's sentiment prediction for `text`, in member order.
pub fn member_sentiments(members: &[Checkpoint], text: &str) -> Result<Vec<SentimentPrediction>> {
    members
        .iter()
        .map(|c| sentiment_prob_negative(&c.model, text).map(SentimentPrediction::from_prob_negative))
        .collect()
}

/// Each member's scores for every entity of `text`.
pub fn member_matches(
    members: &[Checkpoint],
    entities: &[String],
    text: &str,
    threshold: f64,
) -> Result<Vec<Vec<MatchPrediction>>> {
    members
        .iter()
        .map(|c| {
            entities
                .iter()
                .map(|e| {
                    let score = score_entity(&c.model, e, text)?;
                    Ok(MatchPrediction {
                        entity: e.clone(),
                        score,
                        is_key: score >= threshold,
                    })
                })
                .collect()
        })
        .collect()
}

/// Combined key-entity decision of a matcher ensemble.
pub fn ensemble_key_entities(
    members: &[Checkpoint],
    entities: &[String],
    text: &str,
    threshold: f64,
    voting: MatchVoting,
) -> Result<Vec<String>> {
    let preds = member_matches(members, entities, text, threshold)?;
    match voting {
        MatchVoting::Majority => vote_key_entities(&preds, threshold),
        MatchVoting::MeanScore => mean_score_key_entities(&preds, threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SentimentLabel::*;

    fn pred(label: SentimentLabel, p: f64) -> SentimentPrediction {
        SentimentPrediction { label, prob_negative: p }
    }

    fn mp(entity: &str, score: f64) -> MatchPrediction {
        MatchPrediction {
            entity: entity.into(),
            score,
            is_key: score >= 0.5,
        }
    }

    #[test]
    fn sentiment_votes() {
        let mut m = vec![pred(Negative, 0.9); 7];
        m.extend(vec![pred(Positive, 0.1); 3]);
        assert_eq!(vote_sentiment(&m).unwrap().label, Negative);
        let tie: Vec<_> = (0..10)
            .map(|i| if i < 5 { pred(Negative, 0.9) } else { pred(Positive, 0.32) })
            .collect();
        let v = vote_sentiment(&tie).unwrap();
        assert!((v.prob_negative - 0.61).abs() < 1e-12);
        assert_eq!(v.label, Negative);
        assert!(vote_sentiment(&[]).is_err());
    }

    #[test]
    fn entity_votes() {
        let members = vec![
            vec![mp("A", 0.9), mp("B", 0.1)],
            vec![mp("A", 0.7), mp("B", 0.3)],
            vec![mp("A", 0.2), mp("B", 0.9)],
        ];
        assert_eq!(vote_key_entities(&members, 0.5).unwrap(), vec!["A"]);
        assert_eq!(vote_key_entities(&members, 0.25).unwrap(), vec!["A", "B"]);
        assert_eq!(mean_score_key_entities(&members, 0.5).unwrap(), vec!["A"]);
        let single = vec![vec![mp("A", 0.3), mp("B", 0.6)]];
        assert_eq!(vote_key_entities(&single, 0.5).unwrap(), vec!["B"]);
        let bad = vec![vec![mp("A", 0.3)], vec![mp("B", 0.3)]];
        assert!(vote_key_entities(&bad, 0.5).is_err());
        assert!(vote_key_entities(&[], 0.5).is_err());
    }

    #[test]
    fn spec_validation() {
        EnsembleSpec::default().validate().unwrap();
        assert!(EnsembleSpec { seeds: vec![1, 1], top_m: 1 }.validate().is_err());
        assert!(EnsembleSpec { seeds: vec![1, 2], top_m: 3 }.validate().is_err());
        assert!(EnsembleSpec { seeds: vec![1, 2], top_m: 0 }.validate().is_err());
    }
}
