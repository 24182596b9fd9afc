//! Seeded synthetic corpora for the three tasks.
//!
//! Sentiment texts pair a main clause carrying a polar adjective with a
//! neutral side clause. A negator appears directly before the polar word
//! (flipping the label), before the neutral word (no effect) or nowhere, each
//! with probability 1/3. Both negated variants contain the same words, so a
//! bag-of-words model cannot tell them apart and is capped near 2/3 accuracy.
//!
//! Matcher documents name key companies in negative-event clauses and list
//! them alongside noise entities. In MRC texts exactly one clause names the tagged
//! event and its company is the answer.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, SentimentLabel};

const PREFIXES: &[&str] = &[
    "acme", "zeta", "orion", "vega", "nova", "apex", "delta", "summit", "harbor", "crest", "pioneer", "atlas",
    "beacon", "cobalt", "ember", "falcon", "granite", "horizon", "ivory", "jade", "keystone", "lumen", "meridian",
    "northway", "onyx", "polaris", "quartz", "redwood", "sterling", "titan",
];
const SUFFIXES: &[&str] = &["bank", "capital", "holdings", "finance", "group", "trust"];

const POSITIVE: &[&str] = &["strong", "solid", "robust", "healthy", "impressive", "stable"];
const NEGATIVE: &[&str] = &["weak", "poor", "disappointing", "shaky", "dismal", "fragile"];
const NEUTRAL: &[&str] = &["busy", "quiet", "cautious", "unchanged", "mixed", "patient"];
const NEGATORS: &[&str] = &["not", "never", "hardly"];
const SUBJECTS: &[&str] = &["profits", "earnings", "sales", "margins", "revenues"];
const OTHERS: &[&str] = &["rivals", "markets", "investors", "regulators", "traders"];

const NEG_EVENTS: &[&str] = &[
    "{e} was fined by regulators",
    "{e} defaulted on its bonds",
    "{e} faces a fraud lawsuit",
    "{e} was accused of bribery",
    "{e} missed a loan payment",
    "regulators froze the accounts of {e}",
];
const NEUTRAL_EVENTS: &[&str] = &[
    "{e} reported steady sales",
    "{e} opened a new office",
    "{e} hired a new chief",
    "{e} held its annual meeting",
    "analysts mentioned {e}",
    "{e} kept its guidance",
];

/// Negative events that carry no tag word.
const UNTAGGED_EVENTS: &[&str] = &[
    "{e} missed a loan payment",
    "{e} was fined by regulators",
    "{e} cut its forecast",
    "shares of {e} slumped",
];
const TAGS: &[&str] = &[
    "fraud", "bribery", "pollution", "default", "embezzlement", "layoffs", "insolvency", "sanctions",
];
const TAG_CLAUSES: &[&str] = &[
    "{e} was linked to {t}",
    "{t} claims hit {e}",
    "{e} denied {t} reports",
    "investigators tied {e} to {t}",
];

/// Where the negator sits in a synthetic sentiment text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegationScope {
    /// Directly before the polar adjective: flips the label.
    InScope,
    /// Before the neutral adjective of the side clause: no effect.
    OutOfScope,
    Absent,
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty word list")
}

/// `n` distinct company names whose first words are all different.
fn companies<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    PREFIXES
        .choose_multiple(rng, n)
        .map(|p| format!("{} {}", capitalize(p), capitalize(pick(rng, SUFFIXES))))
        .collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn fill(template: &str, entity: &str) -> String {
    template.replace("{e}", entity)
}

/// One sentiment text with its label and negation placement.
pub fn sentiment_text<R: Rng>(rng: &mut R) -> (String, SentimentLabel, NegationScope) {
    let company = companies(rng, 1).remove(0);
    let polar_positive = rng.gen_bool(0.5);
    let polar = pick(rng, if polar_positive { POSITIVE } else { NEGATIVE });
    let scope = match rng.gen_range(0..3) {
        0 => NegationScope::InScope,
        1 => NegationScope::OutOfScope,
        _ => NegationScope::Absent,
    };
    let negator = pick(rng, NEGATORS);
    let (main_neg, side_neg) = match scope {
        NegationScope::InScope => (format!("{negator} "), String::new()),
        NegationScope::OutOfScope => (String::new(), format!("{negator} ")),
        NegationScope::Absent => (String::new(), String::new()),
    };
    let main = format!(
        "{company} said {} were {main_neg}{polar}",
        pick(rng, SUBJECTS)
    );
    let side = format!("while {} were {side_neg}{}", pick(rng, OTHERS), pick(rng, NEUTRAL));
    let text = if rng.gen_bool(0.5) {
        format!("{main} , {side} .")
    } else {
        format!("{side} , {main} .")
    };
    let positive = polar_positive != (scope == NegationScope::InScope);
    let label = if positive {
        SentimentLabel::Positive
    } else {
        SentimentLabel::Negative
    };
    (text, label, scope)
}

/// Labeled sentiment documents with ids `sent-00000`, `sent-00001`, ...
pub fn sentiment_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (text, label, _) = sentiment_text(&mut rng);
            Document::new(format!("sent-{i:05}"), text).with_sentiment(label)
        })
        .collect()
}

/// Chance that a negative document also mentions a company in a neutral clause.
const BYSTANDER_RATE: f64 = 0.1;
/// Chance that a key entity's shortened name is also listed.
const SHORT_FORM_RATE: f64 = 0.5;
/// Chance that the list holds a company the text never mentions.
const ABSENT_RATE: f64 = 0.3;

/// Entity list, key entities and text of one negative event document.
///
/// Key entities are the full names in negative-event clauses. The list also
/// carries noise: the bare first word of a key name (a substring of it, never
/// key), companies absent from the text and occasional bystanders that only
/// appear in a neutral clause.
fn negative_event_doc<R: Rng>(rng: &mut R) -> (Vec<String>, Vec<String>, String) {
    let n_keys = rng.gen_range(1..=2);
    let bystander = rng.gen_bool(BYSTANDER_RATE) as usize;
    let names = companies(rng, n_keys + bystander + 1);
    let (keys, rest) = names.split_at(n_keys);
    let (bystanders, absent) = rest.split_at(bystander);
    let mut clauses: Vec<String> = keys.iter().map(|e| fill(pick(rng, NEG_EVENTS), e)).collect();
    clauses.extend(bystanders.iter().map(|e| fill(pick(rng, NEUTRAL_EVENTS), e)));
    clauses.shuffle(rng);
    let mut list: Vec<String> = keys.iter().chain(bystanders).cloned().collect();
    for k in keys {
        if rng.gen_bool(SHORT_FORM_RATE) {
            list.push(k.split(' ').next().expect("non-empty name").to_string());
        }
    }
    if rng.gen_bool(ABSENT_RATE) {
        list.push(absent[0].clone());
    }
    list.shuffle(rng);
    (list, keys.to_vec(), clauses.join(" , ") + " .")
}

/// Entity list and text of a document with only neutral events.
fn neutral_event_doc<R: Rng>(rng: &mut R) -> (Vec<String>, String) {
    let n = rng.gen_range(2..=3);
    let names = companies(rng, n);
    let clauses: Vec<String> = names.iter().map(|e| fill(pick(rng, NEUTRAL_EVENTS), e)).collect();
    (names, clauses.join(" , ") + " .")
}

/// Negative documents with entity lists and at least one key entity each.
pub fn matcher_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (list, keys, text) = negative_event_doc(&mut rng);
            Document::new(format!("match-{i:05}"), text)
                .with_sentiment(SentimentLabel::Negative)
                .with_entities(list, keys)
        })
        .collect()
}

/// Documents with a tag and exactly one key entity: the company in the one
/// clause that mentions the tagged event. The other companies appear in
/// neutral or untagged negative clauses.
pub fn mrc_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.gen_range(2..=3);
            let entities = companies(&mut rng, k);
            let tag = pick(&mut rng, TAGS);
            let target = rng.gen_range(0..k);
            let clauses: Vec<String> = entities
                .iter()
                .enumerate()
                .map(|(j, e)| {
                    if j == target {
                        pick(&mut rng, TAG_CLAUSES).replace("{t}", tag).replace("{e}", e)
                    } else {
                        let pool = if rng.gen_bool(0.5) { NEUTRAL_EVENTS } else { UNTAGGED_EVENTS };
                        fill(pick(&mut rng, pool), e)
                    }
                })
                .collect();
            Document::new(format!("mrc-{i:05}"), clauses.join(" , ") + " .")
                .with_sentiment(SentimentLabel::Negative)
                .with_entities(entities.clone(), vec![entities[target].clone()])
                .with_tag(tag)
        })
        .collect()
}

/// Mixed documents for the full pipeline: negative ones are matcher
/// documents; positive ones only carry neutral events and no key entities.
pub fn pipeline_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let id = format!("doc-{i:05}");
            if rng.gen_bool(0.5) {
                let (list, keys, text) = negative_event_doc(&mut rng);
                Document::new(id, text)
                    .with_sentiment(SentimentLabel::Negative)
                    .with_entities(list, keys)
            } else {
                let (list, text) = neutral_event_doc(&mut rng);
                Document::new(id, text)
                    .with_sentiment(SentimentLabel::Positive)
                    .with_entities(list, Vec::<String>::new())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn corpora_are_seeded_and_valid() {
        for f in [sentiment_corpus, matcher_corpus, mrc_corpus, pipeline_corpus] {
            let a = f(50, 7);
            assert_eq!(a, f(50, 7));
            assert_ne!(a, f(50, 8));
            for d in &a {
                d.validate().unwrap();
                if let Some(keys) = &d.key_entities {
                    for k in keys {
                        assert!(d.cleaned_text.contains(k.as_str()));
                    }
                }
            }
        }
    }

    #[test]
    fn negated_variants_share_a_bag_of_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = BTreeMap::new();
        for _ in 0..3000 {
            let (text, label, scope) = sentiment_text(&mut rng);
            *counts.entry(format!("{scope:?}")).or_insert(0) += 1;
            let polar_positive = POSITIVE.iter().any(|w| text.split(' ').any(|t| t == *w));
            let expected_positive = polar_positive != (scope == NegationScope::InScope);
            assert_eq!(label == SentimentLabel::Positive, expected_positive);
            let has_negator = text.split(' ').any(|t| NEGATORS.contains(&t));
            assert_eq!(has_negator, scope != NegationScope::Absent);
        }
        for v in counts.values() {
            assert!((900..1100).contains(v), "{counts:?}");
        }
    }

    #[test]
    fn matcher_and_mrc_shapes() {
        for d in matcher_corpus(200, 3) {
            let list = d.entity_list.as_ref().unwrap();
            let keys = d.key_entities.as_ref().unwrap();
            assert!(!keys.is_empty() && keys.len() <= 2);
            assert!(keys.iter().all(|k| list.contains(k)));
        }
        for d in mrc_corpus(200, 3) {
            assert!(d.tag.is_some());
            assert_eq!(d.key_entities.as_ref().unwrap().len(), 1);
        }
        let p = pipeline_corpus(200, 3);
        for d in &p {
            let has_keys = !d.key_entities.as_ref().unwrap().is_empty();
            assert_eq!(has_keys, d.sentiment == Some(SentimentLabel::Negative));
        }
    }
}
