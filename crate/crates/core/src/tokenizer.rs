//! Character-level CJK / word-level Latin tokenizer, vocabulary and
//! fixed-length encodings for single texts and text pairs.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const RESERVED_TOKENS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// Half-open character range into a source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

pub fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{20000}'..='\u{2A6DF}'
        | '\u{2A700}'..='\u{2EBEF}'
        | '\u{30000}'..='\u{3134F}')
}

/// Splits `text` into tokens with character spans.
///
/// CJK ideographs are single tokens, runs of other alphanumerics form one
/// lowercased token, and every remaining non-space character stands alone.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut word_start = 0;

    let flush = |word: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !word.is_empty() {
            tokens.push(Token {
                text: std::mem::take(word),
                span: Span::new(start, end),
            });
        }
    };

    let mut pos = 0;
    for (i, c) in text.chars().enumerate() {
        pos = i + 1;
        if c.is_alphanumeric() && !is_cjk(c) {
            if word.is_empty() {
                word_start = i;
            }
            word.extend(c.to_lowercase());
            continue;
        }
        flush(&mut word, word_start, i, &mut tokens);
        if !c.is_whitespace() {
            tokens.push(Token {
                text: c.to_string(),
                span: Span::new(i, i + 1),
            });
        }
    }
    flush(&mut word, word_start, pos, &mut tokens);
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// A vocabulary holding only the reserved tokens.
    pub fn reserved() -> Self {
        Vocab::from_tokens(RESERVED_TOKENS.iter().map(|s| s.to_string()))
            .expect("reserved tokens are distinct")
    }

    /// Builds a vocabulary from tokens listed in id order. The first four must
    /// be the reserved tokens.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().collect();
        if tokens.len() < RESERVED_TOKENS.len()
            || tokens.iter().zip(RESERVED_TOKENS).any(|(a, b)| a != b)
        {
            return Err(Error::input("vocabulary must start with the reserved tokens"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::input(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Serializes as `token<TAB>id` lines, in id order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, tok) in self.tokens.iter().enumerate() {
            out.push_str(tok);
            out.push('\t');
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let (tok, id) = line.rsplit_once('\t').ok_or_else(|| Error::MalformedLine {
                line: n + 1,
                message: "expected token<TAB>id".into(),
            })?;
            let id: usize = id.parse().map_err(|_| Error::MalformedLine {
                line: n + 1,
                message: format!("bad id {id:?}"),
            })?;
            if id != tokens.len() {
                return Err(Error::MalformedLine {
                    line: n + 1,
                    message: format!("ids must be contiguous, expected {}", tokens.len()),
                });
            }
            tokens.push(tok.to_string());
        }
        Vocab::from_tokens(tokens)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_tsv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocab::from_tsv(&text)
    }
}

/// Builds a vocabulary from a token stream: reserved tokens first, then
/// tokens with frequency ≥ `min_freq` by (frequency desc, token asc), cut at
/// `max_size` entries in total.
pub fn build_vocab<I, S>(tokens: I, min_freq: usize, max_size: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if max_size < RESERVED_TOKENS.len() {
        return Err(Error::config(format!(
            "max_size must be at least {}, got {max_size}",
            RESERVED_TOKENS.len()
        )));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for tok in tokens {
        let tok = tok.as_ref();
        if RESERVED_TOKENS.contains(&tok) {
            continue;
        }
        *counts.entry(tok.to_string()).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(_, n)| *n >= min_freq.max(1))
        .collect();
    ranked.sort_by(|(ta, na), (tb, nb)| nb.cmp(na).then_with(|| ta.cmp(tb)));
    ranked.truncate(max_size - RESERVED_TOKENS.len());

    Vocab::from_tokens(
        RESERVED_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t)),
    )
}

/// A padded, fixed-length encoding of one text or a text pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub segment_ids: Vec<u8>,
    pub attention_mask: Vec<u8>,
    /// Character span into the source string of the token's segment; `None`
    /// for `[CLS]`, `[SEP]` and padding.
    pub offsets: Vec<Option<Span>>,
}

impl TokenSequence {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// Number of non-padding positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    /// Positions holding real tokens of the second segment.
    pub fn context_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.ids.len()).filter(|&i| {
            self.segment_ids[i] == 1 && self.attention_mask[i] == 1 && self.offsets[i].is_some()
        })
    }

    /// Checks the structural invariants every encoding must satisfy.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.ids.len();
        if self.segment_ids.len() != n || self.attention_mask.len() != n || self.offsets.len() != n
        {
            return Err("list lengths differ".into());
        }
        if self.attention_mask.windows(2).any(|w| w[1] > w[0]) {
            return Err("attention mask is not monotone".into());
        }
        let first_sep = self.ids.iter().position(|&id| id == SEP_ID);
        for i in 0..n {
            let real = self.attention_mask[i] == 1;
            let expected_seg = match first_sep {
                Some(s) if real && i > s => 1,
                _ => 0,
            };
            if self.segment_ids[i] != expected_seg {
                return Err(format!("segment id at {i} should be {expected_seg}"));
            }
            let special = !real || self.ids[i] == CLS_ID || self.ids[i] == SEP_ID;
            if special && self.offsets[i].is_some() {
                return Err(format!("special position {i} carries an offset"));
            }
            if !special && self.offsets[i].is_none() {
                return Err(format!("token position {i} lacks an offset"));
            }
        }
        for seg in 0..2u8 {
            let spans: Vec<Span> = (0..n)
                .filter(|&i| self.segment_ids[i] == seg)
                .filter_map(|i| self.offsets[i])
                .collect();
            if spans.windows(2).any(|w| w[1].start < w[0].end) {
                return Err(format!("offsets overlap or decrease in segment {seg}"));
            }
        }
        Ok(())
    }
}

struct Builder {
    seq: TokenSequence,
}

impl Builder {
    fn new(max_len: usize) -> Self {
        Builder {
            seq: TokenSequence {
                ids: Vec::with_capacity(max_len),
                segment_ids: Vec::with_capacity(max_len),
                attention_mask: Vec::with_capacity(max_len),
                offsets: Vec::with_capacity(max_len),
            },
        }
    }

    fn push(&mut self, id: u32, segment: u8, offset: Option<Span>) {
        self.seq.ids.push(id);
        self.seq.segment_ids.push(segment);
        self.seq.attention_mask.push(1);
        self.seq.offsets.push(offset);
    }

    fn push_tokens(&mut self, tokens: &[Token], vocab: &Vocab, segment: u8) {
        for t in tokens {
            self.push(vocab.id(&t.text), segment, Some(t.span));
        }
    }

    fn finish(mut self, max_len: usize) -> TokenSequence {
        while self.seq.ids.len() < max_len {
            self.seq.ids.push(PAD_ID);
            self.seq.segment_ids.push(0);
            self.seq.attention_mask.push(0);
            self.seq.offsets.push(None);
        }
        self.seq
    }
}

/// Encodes `[CLS] text [SEP]`, dropping tokens from the end if needed.
pub fn encode_single(text: &str, vocab: &Vocab, max_len: usize) -> Result<TokenSequence> {
    if max_len < 3 {
        return Err(Error::config(format!("max_len must be ≥ 3, got {max_len}")));
    }
    let mut tokens = tokenize(text);
    tokens.truncate(max_len - 2);
    let mut b = Builder::new(max_len);
    b.push(CLS_ID, 0, None);
    b.push_tokens(&tokens, vocab, 0);
    b.push(SEP_ID, 0, None);
    Ok(b.finish(max_len))
}

/// Encodes `[CLS] a [SEP] b [SEP]`. Only `b` is truncated; `a` must fit whole.
pub fn encode_pair(a: &str, b: &str, vocab: &Vocab, max_len: usize) -> Result<TokenSequence> {
    if max_len < 4 {
        return Err(Error::config(format!("max_len must be ≥ 4, got {max_len}")));
    }
    let a_tokens = tokenize(a);
    if a_tokens.len() + 3 > max_len {
        return Err(Error::input(format!(
            "first segment has {} tokens and cannot fit in max_len {max_len}",
            a_tokens.len()
        )));
    }
    let mut b_tokens = tokenize(b);
    b_tokens.truncate(max_len - 3 - a_tokens.len());

    let mut builder = Builder::new(max_len);
    builder.push(CLS_ID, 0, None);
    builder.push_tokens(&a_tokens, vocab, 0);
    builder.push(SEP_ID, 0, None);
    builder.push_tokens(&b_tokens, vocab, 1);
    builder.push(SEP_ID, 1, None);
    Ok(builder.finish(max_len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(text: &str) -> Vec<(String, usize, usize)> {
        tokenize(text)
            .into_iter()
            .map(|t| (t.text, t.span.start, t.span.end))
            .collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(pairs("Ab1 c"), vec![("ab1".into(), 0, 3), ("c".into(), 4, 5)]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            pairs("X,Y"),
            vec![("x".into(), 0, 1), (",".into(), 1, 2), ("y".into(), 2, 3)]
        );
    }

    #[test]
    fn tokenize_cjk_per_character() {
        assert_eq!(
            pairs("公司A1涉嫌"),
            vec![
                ("公".into(), 0, 1),
                ("司".into(), 1, 2),
                ("a1".into(), 2, 4),
                ("涉".into(), 4, 5),
                ("嫌".into(), 5, 6),
            ]
        );
    }

    fn vocab_of(words: &[&str]) -> Vocab {
        build_vocab(words.iter().copied(), 1, 100).unwrap()
    }

    #[test]
    fn build_vocab_examples() {
        let empty = build_vocab(Vec::<String>::new(), 1, 10).unwrap();
        assert_eq!(empty.len(), 4);
        assert_eq!(empty.tokens(), &RESERVED_TOKENS.map(String::from));

        let toks = ["c", "b", "a", "a", "b", "b", "a"];
        let v = build_vocab(toks, 2, 10).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.id("c"), UNK_ID);
        assert_eq!(v.len(), 6);

        let toks = ["x", "x", "x", "y", "y", "z"];
        let v = build_vocab(toks, 1, 5).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("x"), 4);
        assert_eq!(v.id("y"), UNK_ID);

        assert!(build_vocab(["a"], 1, 3).is_err());
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let v = vocab_of(&["alpha", "beta", "beta"]);
        let text = v.to_tsv();
        assert!(text.starts_with("[PAD]\t0\n[UNK]\t1\n[CLS]\t2\n[SEP]\t3\n"));
        assert_eq!(Vocab::from_tsv(&text).unwrap(), v);
        assert!(Vocab::from_tsv("[PAD]\t0\n[UNK]\t2\n").is_err());
    }

    #[test]
    fn encode_single_layout() {
        let v = vocab_of(&["a"]);
        let s = encode_single("", &v, 8).unwrap();
        assert_eq!(&s.ids[..3], &[CLS_ID, SEP_ID, PAD_ID]);
        assert_eq!(s.real_len(), 2);
        s.check_invariants().unwrap();

        let long = vec!["a"; 200].join(" ");
        let s = encode_single(&long, &v, 128).unwrap();
        assert_eq!(s.ids.iter().filter(|&&id| id == v.id("a")).count(), 126);
        assert_eq!(s.ids[127], SEP_ID);
        s.check_invariants().unwrap();
    }

    #[test]
    fn encode_single_offsets_decode_to_source_tokens() {
        let text = "Acme bank, 公司 fined";
        let v = build_vocab(tokenize(text).into_iter().map(|t| t.text), 1, 100).unwrap();
        let s = encode_single(text, &v, 16).unwrap();
        let chars: Vec<char> = text.chars().collect();
        for (id, off) in s.ids.iter().zip(&s.offsets) {
            if let Some(sp) = off {
                let src: String = chars[sp.start..sp.end].iter().collect::<String>().to_lowercase();
                assert_eq!(v.token(*id), Some(src.as_str()));
            }
        }
    }

    #[test]
    fn encode_pair_layout() {
        let v = vocab_of(&["e", "t"]);
        let s = encode_pair("e", "", &v, 8).unwrap();
        assert_eq!(s.real_len(), 4);
        assert_eq!(s.segment_ids, vec![0, 0, 0, 1, 0, 0, 0, 0]);
        s.check_invariants().unwrap();

        let b = vec!["t"; 500].join(" ");
        let s = encode_pair("e e e e", &b, &v, 64).unwrap();
        assert_eq!(s.context_positions().count(), 57);
        assert_eq!(s.real_len(), 64);
        s.check_invariants().unwrap();

        assert_eq!(
            encode_pair("e", "t t", &v, 10).unwrap(),
            encode_pair("e", "t t", &v, 10).unwrap()
        );
        assert!(encode_pair("e e e e e e", "t", &v, 8).is_err());
    }

    proptest! {
        #[test]
        fn encodings_satisfy_invariants(
            a in "[a-c ,公司]{0,12}",
            b in "[a-c ,。欺诈]{0,40}",
            max_len in 4usize..24,
        ) {
            let v = build_vocab(tokenize(&format!("{a} {b}")).into_iter().map(|t| t.text), 1, 50).unwrap();
            let single = encode_single(&b, &v, max_len).unwrap();
            prop_assert_eq!(single.ids.len(), max_len);
            prop_assert!(single.check_invariants().is_ok());
            if let Ok(pair) = encode_pair(&a, &b, &v, max_len) {
                prop_assert_eq!(pair.ids.len(), max_len);
                prop_assert!(pair.check_invariants().is_ok(), "{:?}", pair.check_invariants());
            } else {
                prop_assert!(tokenize(&a).len() + 3 > max_len);
            }
        }

        #[test]
        fn trailing_spaces_do_not_change_token_count(s in "\\PC{0,30}", pad in 0usize..5) {
            let padded = format!("{s}{}", " ".repeat(pad));
            prop_assert_eq!(tokenize(&s).len(), tokenize(&padded).len());
        }

        #[test]
        fn vocab_is_deterministic(words in proptest::collection::vec("[a-d]{1,2}", 0..40)) {
            let a = build_vocab(&words, 1, 12).unwrap();
            let b = build_vocab(&words, 1, 12).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
