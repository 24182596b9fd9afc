//! Documents, corpus files, text cleaning and the derived pair / reading
//! comprehension datasets.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::build_question;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative,
    Positive,
}

impl SentimentLabel {
    /// Class index used by the sentiment head (negative = 0).
    pub fn index(self) -> usize {
        match self {
            SentimentLabel::Negative => 0,
            SentimentLabel::Positive => 1,
        }
    }

    pub fn from_index(idx: usize) -> Self {
        if idx == 0 {
            SentimentLabel::Negative
        } else {
            SentimentLabel::Positive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(SentimentLabel::Negative),
            "positive" => Ok(SentimentLabel::Positive),
            other => Err(Error::input(format!("unknown sentiment {other:?}"))),
        }
    }
}

/// Which record layout a corpus file follows.
///
/// `Dataset1` carries sentiment and an entity list with key entities;
/// `Dataset2` is all-negative and carries an event tag plus its key entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    Dataset1,
    Dataset2,
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dataset-1" | "dataset1" => Ok(Schema::Dataset1),
            "dataset-2" | "dataset2" => Ok(Schema::Dataset2),
            other => Err(Error::input(format!("unknown schema {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub cleaned_text: String,
    pub sentiment: Option<SentimentLabel>,
    pub entity_list: Option<Vec<String>>,
    pub key_entities: Option<Vec<String>>,
    pub tag: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        Document {
            id: id.into(),
            cleaned_text: clean_text(&raw_text),
            raw_text,
            sentiment: None,
            entity_list: None,
            key_entities: None,
            tag: None,
        }
    }

    pub fn with_sentiment(mut self, label: SentimentLabel) -> Self {
        self.sentiment = Some(label);
        self
    }

    pub fn with_entities<S: Into<String>>(
        mut self,
        entity_list: impl IntoIterator<Item = S>,
        key_entities: impl IntoIterator<Item = S>,
    ) -> Self {
        self.entity_list = Some(entity_list.into_iter().map(Into::into).collect());
        self.key_entities = Some(key_entities.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    /// Checks the per-document invariants that do not depend on the rest of
    /// the corpus.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let (Some(list), Some(keys)) = (&self.entity_list, &self.key_entities) {
            let known: HashSet<&str> = list.iter().map(String::as_str).collect();
            if let Some(missing) = keys.iter().find(|k| !known.contains(k.as_str())) {
                return Err(format!("key entity {missing:?} is not in the entity list"));
            }
        }
        Ok(())
    }

    /// Gold key entities as a set (empty when absent).
    pub fn key_set(&self) -> BTreeSet<String> {
        self.key_entities
            .iter()
            .flatten()
            .cloned()
            .collect()
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<SentimentLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_list: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_entities: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl From<&Document> for CorpusRecord {
    fn from(doc: &Document) -> Self {
        CorpusRecord {
            id: doc.id.clone(),
            text: doc.raw_text.clone(),
            sentiment: doc.sentiment,
            entity_list: doc.entity_list.clone(),
            key_entities: doc.key_entities.clone(),
            tag: doc.tag.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub records: usize,
    pub accepted: usize,
    pub errors: Vec<RecordError>,
    pub warnings: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub(crate) fn warn(&mut self, key: &str) {
        *self.warnings.entry(key.to_string()).or_default() += 1;
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    /// Documents that passed validation, in file order.
    pub documents: Vec<Document>,
    pub report: ValidationReport,
}

/// Normalises raw text: drops URLs, control and other non-printable
/// characters, collapses whitespace runs to one space and trims the ends.
///
/// A URL is a maximal run starting at `http://`, `https://`, `ftp://` or
/// `www.` (ASCII case-insensitive) and ending before the next whitespace.
pub fn clean_text(raw: &str) -> String {
    let printable: String = raw
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if is_non_printable(c) {
                None
            } else {
                Some(c)
            }
        })
        .collect();

    let without_urls = strip_urls(&printable);

    let mut out = String::with_capacity(without_urls.len());
    for word in without_urls.split(' ').filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

const URL_PREFIXES: [&str; 4] = ["http://", "https://", "ftp://", "www."];

fn strip_urls(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < bytes.len() {
        let starts_url = URL_PREFIXES.iter().any(|p| {
            bytes.len() - i >= p.len() && bytes[i..i + p.len()].eq_ignore_ascii_case(p.as_bytes())
        });
        if starts_url {
            // prefixes are ASCII, so i is a char boundary and so is the next space
            let end = text[i..].find(' ').map_or(text.len(), |off| i + off);
            i = end;
        } else {
            let ch = text[i..].chars().next().expect("char boundary");
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

fn is_non_printable(c: char) -> bool {
    c.is_control()
        || matches!(
            c,
            '\u{FFFD}'
                | '\u{200B}'..='\u{200F}'
                | '\u{202A}'..='\u{202E}'
                | '\u{2060}'..='\u{2064}'
                | '\u{FEFF}'
        )
}

/// Reads a line-delimited JSON corpus and validates it against `schema`.
///
/// Malformed lines abort the load. Record-level problems (duplicate ids,
/// key entities outside the entity list, a missing tag for dataset-2) are
/// collected in the report and the offending record is left out.
pub fn load_corpus(path: impl AsRef<Path>, schema: Schema) -> Result<LoadedCorpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), schema).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_corpus(reader: impl BufRead, schema: Schema) -> Result<LoadedCorpus> {
    let mut report = ValidationReport::default();
    let mut documents = Vec::new();
    let mut seen_ids = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: line_no,
                message: e.to_string(),
            })?;
        report.records += 1;

        let reject = |report: &mut ValidationReport, message: String| {
            report.errors.push(RecordError {
                line: line_no,
                id: record.id.clone(),
                message,
            });
        };

        if !seen_ids.insert(record.id.clone()) {
            reject(&mut report, "duplicate id".to_string());
            continue;
        }

        let mut doc = Document::new(record.id.clone(), record.text.clone());
        match schema {
            Schema::Dataset1 => {
                doc.sentiment = record.sentiment;
                doc.entity_list = record.entity_list.clone();
                doc.key_entities = record.key_entities.clone();
                if record.tag.is_some() {
                    report.warn("ignored_tag_field");
                }
            }
            Schema::Dataset2 => {
                if record.entity_list.is_some() {
                    report.warn("ignored_entity_list_field");
                }
                let Some(tag) = record.tag.clone() else {
                    reject(&mut report, "dataset-2 record has no tag".to_string());
                    continue;
                };
                if record.sentiment == Some(SentimentLabel::Positive) {
                    reject(&mut report, "dataset-2 records are negative".to_string());
                    continue;
                }
                doc.sentiment = record.sentiment;
                doc.key_entities = record.key_entities.clone();
                doc.tag = Some(tag);
            }
        }
        if let Err(message) = doc.validate() {
            reject(&mut report, message);
            continue;
        }
        if doc.cleaned_text.is_empty() {
            report.warn("empty_text_after_cleaning");
        }
        documents.push(doc);
    }
    report.accepted = documents.len();
    Ok(LoadedCorpus { documents, report })
}

/// Writes documents back out in the corpus file format.
pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(&CorpusRecord::from(doc)).expect("record serializes"));
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Dictionary of entity surface forms used for rule matching.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for entry in entries {
            let trimmed = entry.as_ref().trim();
            if trimmed.is_empty() {
                return Err(Error::input("lexicon entries must be non-empty"));
            }
            set.insert(trimmed.to_string());
        }
        Ok(Lexicon { entries: set })
    }

    /// One entry per line; blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::new(text.lines().filter(|l| !l.trim().is_empty()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// All lexicon entries occurring verbatim in `text`, sorted and de-duplicated.
pub fn rule_match_entities(text: &str, lexicon: &Lexicon) -> Vec<String> {
    // BTreeSet iteration is already sorted and unique
    lexicon
        .entries
        .iter()
        .filter(|e| text.contains(e.as_str()))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub doc_id: String,
    pub entity: String,
    pub text: String,
    /// `Some(true)` for a key entity; `None` when the document is unlabeled.
    pub label: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct PairDataset {
    pub examples: Vec<PairExample>,
    pub skipped_without_entity_list: usize,
}

/// Pairs every entity of every document with the document text.
pub fn build_pair_dataset(docs: &[Document]) -> PairDataset {
    let mut out = PairDataset::default();
    for doc in docs {
        let Some(list) = &doc.entity_list else {
            out.skipped_without_entity_list += 1;
            continue;
        };
        let keys: Option<HashSet<&str>> = doc
            .key_entities
            .as_ref()
            .map(|k| k.iter().map(String::as_str).collect());
        for entity in list.iter().filter(|e| !e.is_empty()) {
            out.examples.push(PairExample {
                doc_id: doc.id.clone(),
                entity: entity.clone(),
                text: doc.cleaned_text.clone(),
                label: keys.as_ref().map(|k| k.contains(entity.as_str())),
            });
        }
    }
    out
}

/// Half-open character span `[start_char, end_char)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpan {
    pub start_char: usize,
    pub end_char: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrcExample {
    pub doc_id: String,
    pub question: String,
    pub context: String,
    pub answer: Option<CharSpan>,
}

impl MrcExample {
    pub fn answer_text(&self) -> Option<String> {
        self.answer
            .map(|a| char_slice(&self.context, a.start_char, a.end_char))
    }
}

#[derive(Debug, Clone, Default)]
pub struct MrcDataset {
    pub examples: Vec<MrcExample>,
    pub dropped_answer_not_found: usize,
}

/// Rewrites each document's tag into a question and locates the gold answer
/// as the first occurrence of the key entity in the cleaned text.
pub fn build_mrc_dataset(docs: &[Document], template: &str) -> Result<MrcDataset> {
    let mut out = MrcDataset::default();
    for doc in docs {
        let tag = doc.tag.as_deref().ok_or_else(|| Error::InvalidRecord {
            id: doc.id.clone(),
            message: "missing tag".to_string(),
        })?;
        let question = build_question(tag, template)?;
        let answer = match doc.key_entities.as_deref() {
            None => None,
            Some([gold]) => match find_char_span(&doc.cleaned_text, gold) {
                Some(span) => Some(span),
                None => {
                    out.dropped_answer_not_found += 1;
                    continue;
                }
            },
            Some(other) => {
                return Err(Error::InvalidRecord {
                    id: doc.id.clone(),
                    message: format!("expected exactly one key entity, found {}", other.len()),
                })
            }
        };
        out.examples.push(MrcExample {
            doc_id: doc.id.clone(),
            question,
            context: doc.cleaned_text.clone(),
            answer,
        });
    }
    Ok(out)
}

/// Character span of the first occurrence of `needle` in `haystack`.
pub fn find_char_span(haystack: &str, needle: &str) -> Option<CharSpan> {
    if needle.is_empty() {
        return None;
    }
    let byte_start = haystack.find(needle)?;
    let start_char = haystack[..byte_start].chars().count();
    Some(CharSpan {
        start_char,
        end_char: start_char + needle.chars().count(),
    })
}

pub(crate) fn char_slice(s: &str, start: usize, end: usize) -> String {
    s.chars().skip(start).take(end.saturating_sub(start)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clean_text_examples() {
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("A  B\tC"), "A B C");
        assert_eq!(
            clean_text("Firm X defaulted, see https://ex.co/a now"),
            "Firm X defaulted, see now"
        );
    }

    #[test]
    fn clean_text_drops_garbled_and_other_schemes() {
        assert_eq!(clean_text("a\u{0}b\u{FFFD}c"), "abc");
        assert_eq!(clean_text("x www.foo.cn/y ftp://h z"), "x z");
        assert_eq!(clean_text("  WWW.Example.com tail "), "tail");
        assert_eq!(clean_text("gain\u{200B}s"), "gains");
    }

    /// Applies the three cleaning rules one at a time with plain loops.
    fn reference_clean(raw: &str) -> String {
        let mut chars: Vec<char> = Vec::new();
        for c in raw.chars() {
            if c.is_whitespace() {
                chars.push(' ');
            } else if !is_non_printable(c) {
                chars.push(c);
            }
        }
        let mut kept = Vec::new();
        let mut i = 0;
        'outer: while i < chars.len() {
            for p in URL_PREFIXES {
                let pc: Vec<char> = p.chars().collect();
                if i + pc.len() <= chars.len()
                    && chars[i..i + pc.len()]
                        .iter()
                        .zip(&pc)
                        .all(|(a, b)| a.to_ascii_lowercase() == *b)
                {
                    while i < chars.len() && chars[i] != ' ' {
                        i += 1;
                    }
                    continue 'outer;
                }
            }
            kept.push(chars[i]);
            i += 1;
        }
        let joined: String = kept.into_iter().collect();
        joined.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn clean_text_matches_reference_on_url_example() {
        let raw = "Firm X defaulted, see https://ex.co/a now";
        assert_eq!(clean_text(raw), reference_clean(raw));
    }

    proptest! {
        #[test]
        fn clean_text_is_idempotent(s in "\\PC*|[ \\t\\nhtpsw:/.a-z\u{0}\u{FFFD}]{0,40}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
        }

        #[test]
        fn clean_text_agrees_with_reference(s in "[ \\t\\nhtpsfw:/.A-Za-z\u{0}\u{7}\u{FFFD}中文]{0,40}") {
            prop_assert_eq!(clean_text(&s), reference_clean(&s));
        }

        #[test]
        fn cleaned_text_has_no_runs_or_controls(s in any::<String>()) {
            let c = clean_text(&s);
            prop_assert!(!c.contains("  "));
            prop_assert!(!c.chars().any(|ch| ch.is_control()));
            prop_assert_eq!(c.trim(), c.as_str());
        }

        #[test]
        fn rule_match_equals_brute_force(
            text in "[ab ]{0,12}",
            entries in proptest::collection::vec("[ab]{1,3}", 0..6),
        ) {
            let lex = Lexicon::new(&entries).unwrap();
            let mut expected: Vec<String> = entries
                .iter()
                .filter(|e| text.contains(e.as_str()))
                .cloned()
                .collect();
            expected.sort();
            expected.dedup();
            prop_assert_eq!(rule_match_entities(&text, &lex), expected);
        }

        #[test]
        fn pair_dataset_counts(
            lists in proptest::collection::vec(
                (proptest::collection::btree_set("[a-e]", 0..5), proptest::collection::btree_set("[a-e]", 0..5)),
                0..6,
            )
        ) {
            let docs: Vec<Document> = lists
                .iter()
                .enumerate()
                .map(|(i, (ents, keys))| {
                    let keys: Vec<&String> = keys.intersection(ents).collect();
                    Document::new(format!("d{i}"), "text").with_entities(ents.iter(), keys)
                })
                .map(|d| Document {
                    entity_list: d.entity_list.map(|l| l.into_iter().collect()),
                    ..d
                })
                .collect();
            let pairs = build_pair_dataset(&docs).examples;
            let total: usize = docs.iter().map(|d| d.entity_list.as_ref().unwrap().len()).sum();
            prop_assert_eq!(pairs.len(), total);
            let positives = pairs.iter().filter(|p| p.label == Some(true)).count();
            let expected: usize = docs.iter().map(|d| d.key_entities.as_ref().unwrap().len()).sum();
            prop_assert_eq!(positives, expected);
        }
    }

    #[test]
    fn rule_match_examples() {
        let lex = Lexicon::new(["bank A", "bank B", "bank C"]).unwrap();
        assert_eq!(
            rule_match_entities("bank A sued bank B", &lex),
            vec!["bank A".to_string(), "bank B".to_string()]
        );
        assert!(rule_match_entities("anything", &Lexicon::default()).is_empty());
        let lex = Lexicon::new(["x"]).unwrap();
        assert!(rule_match_entities("", &lex).is_empty());
    }

    #[test]
    fn lexicon_trims_and_rejects_empty() {
        let lex = Lexicon::new([" a ", "a", "b"]).unwrap();
        assert_eq!(lex.entries().collect::<Vec<_>>(), vec!["a", "b"]);
        assert!(Lexicon::new(["  "]).is_err());
    }

    #[test]
    fn pair_dataset_labels_and_order() {
        let docs = vec![
            Document::new("1", "t1").with_entities(["A", "B", "C"], ["A"]),
            Document::new("2", "t2").with_entities(["D", "E"], ["E"]),
            Document::new("3", "t3").with_entities(Vec::<String>::new(), vec![]),
            Document::new("4", "t4"),
        ];
        let ds = build_pair_dataset(&docs);
        let got: Vec<(&str, &str, Option<bool>)> = ds
            .examples
            .iter()
            .map(|p| (p.doc_id.as_str(), p.entity.as_str(), p.label))
            .collect();
        assert_eq!(
            got,
            vec![
                ("1", "A", Some(true)),
                ("1", "B", Some(false)),
                ("1", "C", Some(false)),
                ("2", "D", Some(false)),
                ("2", "E", Some(true)),
            ]
        );
        assert_eq!(ds.skipped_without_entity_list, 1);
    }

    #[test]
    fn pair_dataset_unlabeled() {
        let mut doc = Document::new("1", "t").with_entities(["A"], []);
        doc.key_entities = None;
        let ds = build_pair_dataset(&[doc]);
        assert_eq!(ds.examples[0].label, None);
    }

    const TEMPLATE: &str = "Which company involves {tag}?";

    #[test]
    fn mrc_first_occurrence() {
        let doc = Document::new("1", "at Acme and Acme again")
            .with_tag("fraud")
            .with_entities(Vec::<String>::new(), vec!["Acme".to_string()]);
        let doc = Document {
            entity_list: None,
            ..doc
        };
        let ds = build_mrc_dataset(&[doc], TEMPLATE).unwrap();
        let ex = &ds.examples[0];
        assert_eq!(ex.question, "Which company involves fraud?");
        assert_eq!(
            ex.answer,
            Some(CharSpan {
                start_char: 3,
                end_char: 7
            })
        );
        assert_eq!(ex.answer_text().as_deref(), Some("Acme"));
    }

    #[test]
    fn mrc_drops_missing_answer_and_requires_tag() {
        let mut doc = Document::new("1", "nothing here").with_tag("fraud");
        doc.key_entities = Some(vec!["Acme".into()]);
        let ds = build_mrc_dataset(&[doc.clone()], TEMPLATE).unwrap();
        assert!(ds.examples.is_empty());
        assert_eq!(ds.dropped_answer_not_found, 1);

        doc.tag = None;
        assert!(matches!(
            build_mrc_dataset(&[doc], TEMPLATE),
            Err(Error::InvalidRecord { .. })
        ));
    }

    #[test]
    fn mrc_spans_are_character_based() {
        let mut doc = Document::new("1", "公司甲涉嫌欺诈 Acme").with_tag("欺诈");
        doc.key_entities = Some(vec!["公司甲".into()]);
        let ds = build_mrc_dataset(&[doc], TEMPLATE).unwrap();
        assert_eq!(
            ds.examples[0].answer,
            Some(CharSpan {
                start_char: 0,
                end_char: 3
            })
        );
    }

    #[test]
    fn parse_corpus_cases() {
        let empty = parse_corpus("".as_bytes(), Schema::Dataset1).unwrap();
        assert!(empty.documents.is_empty());
        assert!(empty.report.is_clean());

        let line = r#"{"id":"a","text":"x  y","sentiment":"negative","entity_list":["A","B"],"key_entities":["A"]}"#;
        let c = parse_corpus(line.as_bytes(), Schema::Dataset1).unwrap();
        let d = &c.documents[0];
        assert_eq!(d.cleaned_text, "x y");
        assert_eq!(d.entity_list.as_deref(), Some(&["A".to_string(), "B".to_string()][..]));
        assert_eq!(d.key_entities.as_deref(), Some(&["A".to_string()][..]));

        let no_tag = r#"{"id":"a","text":"x"}"#;
        let c = parse_corpus(no_tag.as_bytes(), Schema::Dataset2).unwrap();
        assert!(c.documents.is_empty());
        assert_eq!(c.report.errors[0].id, "a");

        let bad_keys = r#"{"id":"k","text":"x","entity_list":["A"],"key_entities":["B"]}"#;
        let c = parse_corpus(bad_keys.as_bytes(), Schema::Dataset1).unwrap();
        assert_eq!(c.report.errors.len(), 1);
        assert_eq!(c.report.errors[0].id, "k");

        let dupes = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        let c = parse_corpus(dupes.as_bytes(), Schema::Dataset1).unwrap();
        assert_eq!(c.documents.len(), 1);
        assert_eq!(c.report.errors[0].line, 2);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = "{\"id\":\"a\",\"text\":\"x\"}\nnot json\n";
        match parse_corpus(text.as_bytes(), Schema::Dataset1) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
