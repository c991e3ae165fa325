//! Corpus, token-stream and downstream-score fixture loading.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    PlaintextLines,
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plaintext" | "plaintext-lines" | "txt" => Ok(CorpusFormat::PlaintextLines),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format {other:?}"
            ))),
        }
    }
}

/// Ordered token ids produced by one tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<TokenId>,
    pub source_tokenizer: String,
    pub vocab_size: Option<usize>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<TokenId>, source_tokenizer: impl Into<String>) -> Self {
        TokenSequence {
            tokens,
            source_tokenizer: source_tokenizer.into(),
            vocab_size: None,
        }
    }

    /// Attaches a vocabulary size, rejecting ids outside it.
    pub fn with_vocab_size(mut self, size: usize) -> Result<Self> {
        if let Some(&bad) = self.tokens.iter().find(|&&t| t as usize >= size) {
            return Err(Error::UnknownId(bad));
        }
        self.vocab_size = Some(size);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Appends another sequence; the result covers the concatenated corpus.
    pub fn extend(&mut self, other: &TokenSequence) {
        self.tokens.extend_from_slice(&other.tokens);
    }
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

#[derive(Deserialize)]
struct JsonlRecord {
    text: String,
    #[serde(default)]
    id: Option<serde_json::Value>,
}

/// Loads one document per non-empty line (plaintext) or per record (JSONL).
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let content = read_utf8(path)?;
    parse_corpus(&content, format, path)
}

pub(crate) fn parse_corpus(
    content: &str,
    format: CorpusFormat,
    path: &Path,
) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in content.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let doc = match format {
            CorpusFormat::PlaintextLines => Document {
                id: line_no.to_string(),
                text: line.to_string(),
            },
            CorpusFormat::Jsonl => {
                let rec: JsonlRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })?;
                let id = match rec.id {
                    None | Some(serde_json::Value::Null) => line_no.to_string(),
                    Some(serde_json::Value::String(s)) => s,
                    Some(other) => other.to_string(),
                };
                Document { id, text: rec.text }
            }
        };
        if !seen.insert(doc.id.clone()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("duplicate document id {:?}", doc.id),
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Reads whitespace-separated decimal token ids.
pub fn load_token_stream(path: impl AsRef<Path>) -> Result<TokenSequence> {
    let path = path.as_ref();
    let content = read_utf8(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tokens = parse_token_stream(&content, path)?;
    Ok(TokenSequence::new(tokens, name))
}

pub(crate) fn parse_token_stream(content: &str, path: &Path) -> Result<Vec<TokenId>> {
    content
        .split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<TokenId>().map_err(|_| Error::TokenEntry {
                path: path.to_path_buf(),
                entry: i + 1,
                text: tok.to_string(),
            })
        })
        .collect()
}

/// Writes ids space-separated on a single LF-terminated line.
pub fn write_token_stream(path: impl AsRef<Path>, seq: &TokenSequence) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(seq.tokens.len() * 6);
    for (i, t) in seq.tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.to_string());
    }
    out.push('\n');
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Translating out of English.
    #[serde(rename = "en->xx")]
    FromEnglish,
    /// Translating into English.
    #[serde(rename = "xx->en")]
    IntoEnglish,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::FromEnglish, Direction::IntoEnglish];
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::FromEnglish => "en->xx",
            Direction::IntoEnglish => "xx->en",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "en->xx" | "en→xx" | "en-xx" => Ok(Direction::FromEnglish),
            "xx->en" | "xx→en" | "xx-en" => Ok(Direction::IntoEnglish),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub tokenizer: String,
    pub scale: String,
    pub language: String,
    pub direction: Direction,
    /// Lower is better.
    pub metricx: f64,
    /// Higher is better.
    pub chrf: f64,
}

type FixtureKey = (String, String, String, Direction);

/// Downstream translation scores, one record per
/// (tokenizer, scale, language, direction).
#[derive(Debug, Clone, Default)]
pub struct DownstreamFixture {
    records: Vec<FixtureRecord>,
    index: BTreeMap<FixtureKey, usize>,
}

impl PartialEq for DownstreamFixture {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

pub const FIXTURE_COLUMNS: [&str; 6] = [
    "tokenizer",
    "scale",
    "language",
    "direction",
    "metricx",
    "chrf",
];

impl DownstreamFixture {
    pub fn from_records(records: Vec<FixtureRecord>) -> Result<Self> {
        let mut fixture = DownstreamFixture::default();
        for r in records {
            fixture.insert(r)?;
        }
        Ok(fixture)
    }

    fn insert(&mut self, r: FixtureRecord) -> Result<()> {
        let key = (
            r.tokenizer.clone(),
            r.scale.clone(),
            r.language.clone(),
            r.direction,
        );
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateKey {
                tokenizer: r.tokenizer,
                scale: r.scale,
                language: r.language,
                direction: r.direction.to_string(),
            });
        }
        self.index.insert(key, self.records.len());
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[FixtureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(
        &self,
        tokenizer: &str,
        scale: &str,
        language: &str,
        direction: Direction,
    ) -> Option<&FixtureRecord> {
        let key = (
            tokenizer.to_string(),
            scale.to_string(),
            language.to_string(),
            direction,
        );
        self.index.get(&key).map(|&i| &self.records[i])
    }

    /// Mean MetricX over both translation directions.
    pub fn mean_metricx(&self, tokenizer: &str, scale: &str, language: &str) -> Result<f64> {
        let mut sum = 0.0;
        for d in Direction::ALL {
            let rec =
                self.get(tokenizer, scale, language, d)
                    .ok_or_else(|| Error::MissingCell {
                        tokenizer: tokenizer.to_string(),
                        scale: scale.to_string(),
                        language: language.to_string(),
                        direction: d.to_string(),
                    })?;
            sum += rec.metricx;
        }
        Ok(sum / 2.0)
    }

    /// Tokenizer names in order of first appearance.
    pub fn tokenizers(&self) -> Vec<String> {
        unique_in_order(self.records.iter().map(|r| r.tokenizer.as_str()))
    }

    pub fn languages(&self) -> Vec<String> {
        unique_in_order(self.records.iter().map(|r| r.language.as_str()))
    }

    pub fn scales(&self) -> Vec<String> {
        unique_in_order(self.records.iter().map(|r| r.scale.as_str()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(FIXTURE_COLUMNS).expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.tokenizer.clone(),
                r.scale.clone(),
                r.language.clone(),
                r.direction.to_string(),
                r.metricx.to_string(),
                r.chrf.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn from_csv_str(content: &str, path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(content.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| parse_err(path, 1, e.to_string()))?
            .clone();
        let mut cols = [0usize; 6];
        for (slot, name) in cols.iter_mut().zip(FIXTURE_COLUMNS) {
            *slot = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                })?;
        }

        let mut fixture = DownstreamFixture::default();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| parse_err(path, line, e.to_string()))?;
            let field = |c: usize| row.get(cols[c]).unwrap_or("");
            let number = |c: usize| -> Result<f64> {
                let v: f64 = field(c).parse().map_err(|_| {
                    parse_err(
                        path,
                        line,
                        format!("{}: not a number: {:?}", FIXTURE_COLUMNS[c], field(c)),
                    )
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(parse_err(
                        path,
                        line,
                        format!("{} must be finite and >= 0", FIXTURE_COLUMNS[c]),
                    ));
                }
                Ok(v)
            };
            let record = FixtureRecord {
                tokenizer: field(0).to_string(),
                scale: field(1).to_string(),
                language: field(2).to_string(),
                direction: field(3)
                    .parse()
                    .map_err(|e: Error| parse_err(path, line, e.to_string()))?,
                metricx: number(4)?,
                chrf: number(5)?,
            };
            fixture.insert(record)?;
        }
        Ok(fixture)
    }
}

fn parse_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn unique_in_order<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .filter(|s| seen.insert(*s))
        .map(str::to_string)
        .collect()
}

pub fn load_downstream_fixture(path: impl AsRef<Path>) -> Result<DownstreamFixture> {
    let path = path.as_ref();
    let content = read_utf8(path)?;
    DownstreamFixture::from_csv_str(&content, path)
}

/// The machine-translation table (MetricX and chrF for six tokenizers, two
/// model scales, four languages, both directions) bundled with the crate.
pub const MT_FIXTURE_CSV: &str = include_str!("../data/mt_scores.csv");

pub fn builtin_mt_fixture() -> DownstreamFixture {
    DownstreamFixture::from_csv_str(MT_FIXTURE_CSV, Path::new("<builtin mt_scores.csv>"))
        .expect("bundled fixture is valid")
}
