//! Tokenization, vocabulary construction, dataset loading and sentence
//! splitting.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{IcnnError, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Smallest kernel width; encoded sentences are padded up to it.
pub const MIN_SENTENCE_LEN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    Word,
    Char,
}

impl TokenizerMode {
    pub fn tag(self) -> u8 {
        match self {
            TokenizerMode::Word => 0,
            TokenizerMode::Char => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(TokenizerMode::Word),
            1 => Some(TokenizerMode::Char),
            _ => None,
        }
    }
}

impl fmt::Display for TokenizerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenizerMode::Word => "word",
            TokenizerMode::Char => "char",
        })
    }
}

impl FromStr for TokenizerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(TokenizerMode::Word),
            "char" => Ok(TokenizerMode::Char),
            other => Err(format!("unknown tokenizer mode `{other}` (expected word or char)")),
        }
    }
}

fn is_detachable(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Word mode lowercases and splits on whitespace, peeling leading and
/// trailing punctuation off as one token per character. Char mode yields one
/// token per non-whitespace scalar value.
pub fn tokenize(text: &str, mode: TokenizerMode) -> Vec<String> {
    match mode {
        TokenizerMode::Char => text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
        TokenizerMode::Word => {
            let mut out = Vec::new();
            for raw in text.split_whitespace() {
                let word = raw.to_lowercase();
                let chars: Vec<char> = word.chars().collect();
                let start = chars.iter().position(|&c| !is_detachable(c));
                let Some(start) = start else {
                    out.extend(chars.iter().map(|c| c.to_string()));
                    continue;
                };
                let end = chars.iter().rposition(|&c| !is_detachable(c)).unwrap() + 1;
                out.extend(chars[..start].iter().map(|c| c.to_string()));
                out.push(chars[start..end].iter().collect());
                out.extend(chars[end..].iter().map(|c| c.to_string()));
            }
            out
        }
    }
}

/// Token/id mapping. Ids 0 and 1 are reserved for padding and unknown
/// tokens; the rest are ordered by descending frequency, then by first
/// occurrence.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    mode: TokenizerMode,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its id-ordered token list (reserved
    /// entries included).
    pub fn from_tokens(mode: TokenizerMode, tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(IcnnError::ShapeInconsistency(
                "vocabulary must contain the two reserved tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate().skip(2) {
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(IcnnError::ShapeInconsistency(format!(
                    "duplicate vocabulary token `{tok}`"
                )));
            }
        }
        Ok(Self { mode, tokens, index })
    }

    pub fn mode(&self) -> TokenizerMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> EncodedSentence {
        encode(tokens, self)
    }

    pub fn encode_text(&self, text: &str) -> EncodedSentence {
        encode(&tokenize(text, self.mode), self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: String,
}

impl LabeledText {
    pub fn new(label: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
        }
    }
}

pub fn build_vocab(corpus: &[LabeledText], mode: TokenizerMode, min_freq: usize) -> Vocabulary {
    build_vocab_from_texts(corpus.iter().map(|ex| ex.text.as_str()), mode, min_freq)
}

pub fn build_vocab_from_texts<'a, I>(texts: I, mode: TokenizerMode, min_freq: usize) -> Vocabulary
where
    I: IntoIterator<Item = &'a str>,
{
    let min_freq = min_freq.max(1);
    // token -> (count, first occurrence)
    let mut stats: HashMap<String, (usize, usize)> = HashMap::new();
    let mut seen = 0usize;
    for text in texts {
        for tok in tokenize(text, mode) {
            let entry = stats.entry(tok).or_insert((0, seen));
            entry.0 += 1;
            seen += 1;
        }
    }
    let mut ranked: Vec<(String, usize, usize)> = stats
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_freq)
        .map(|(tok, (count, first))| (tok, count, first))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let mut tokens = Vec::with_capacity(ranked.len() + 2);
    tokens.push(PAD_TOKEN.to_string());
    tokens.push(UNK_TOKEN.to_string());
    tokens.extend(ranked.into_iter().map(|(tok, _, _)| tok));
    Vocabulary::from_tokens(mode, tokens).expect("ranked tokens are distinct")
}

/// Token ids for one sentence, right-padded to [`MIN_SENTENCE_LEN`].
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSentence {
    pub ids: Vec<u32>,
    pub tokens: Vec<String>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn pad_mask(&self) -> Vec<bool> {
        self.ids.iter().map(|&id| id == PAD_ID).collect()
    }
}

pub fn encode(tokens: &[String], vocab: &Vocabulary) -> EncodedSentence {
    let mut ids: Vec<u32> = tokens.iter().map(|t| vocab.id(t)).collect();
    let mut toks = tokens.to_vec();
    while ids.len() < MIN_SENTENCE_LEN {
        ids.push(PAD_ID);
        toks.push(PAD_TOKEN.to_string());
    }
    EncodedSentence { ids, tokens: toks }
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | ';' | '。' | '！' | '？' | '；')
}

/// Splits after each run of sentence delimiters, keeping the delimiters with
/// the sentence they end.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !is_sentence_end(c) {
            continue;
        }
        if matches!(iter.peek(), Some(&(_, next)) if is_sentence_end(next)) {
            continue;
        }
        let end = i + c.len_utf8();
        let piece = text[start..end].trim();
        if !piece.is_empty() {
            out.push(piece.to_string());
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    /// `LABEL:fine text ...` per line.
    Trec,
    /// `label<TAB>text` per line.
    Tsv,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trec" => Ok(DatasetFormat::Trec),
            "tsv" => Ok(DatasetFormat::Tsv),
            other => Err(format!("unknown dataset format `{other}` (expected trec or tsv)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<LabeledText>,
    /// Distinct labels in order of first appearance.
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn from_examples(examples: Vec<LabeledText>) -> Self {
        let mut labels: Vec<String> = Vec::new();
        for ex in &examples {
            if !labels.contains(&ex.label) {
                labels.push(ex.label.clone());
            }
        }
        Self { examples, labels }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

fn decode_line(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        // Latin-1: every byte is its own code point.
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

pub fn parse_dataset(content: &[u8], format: DatasetFormat, path: &Path) -> Result<Dataset> {
    let mut examples = Vec::new();
    for (idx, raw) in content.split(|&b| b == b'\n').enumerate() {
        let line = decode_line(raw);
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: &str| IcnnError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: message.to_string(),
        };
        let example = match format {
            DatasetFormat::Trec => {
                let line = line.trim_start();
                let (field, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
                let (label, _) = field
                    .split_once(':')
                    .ok_or_else(|| malformed("expected `LABEL:fine` as the first field"))?;
                if label.is_empty() {
                    return Err(malformed("empty label"));
                }
                LabeledText::new(label, rest.trim())
            }
            DatasetFormat::Tsv => {
                let (label, text) = line
                    .split_once('\t')
                    .ok_or_else(|| malformed("expected `label<TAB>text`"))?;
                let label = label.trim();
                if label.is_empty() {
                    return Err(malformed("empty label"));
                }
                LabeledText::new(label, text.trim())
            }
        };
        examples.push(example);
    }
    Ok(Dataset::from_examples(examples))
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let content = std::fs::read(path).map_err(|e| IcnnError::io(path, e))?;
    parse_dataset(&content, format, path)
}
