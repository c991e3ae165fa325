//! Byte-level BPE inference over GPT-2-style `vocab.json` / `merges.txt`
//! files.
//!
//! Text is split into pre-tokens by a regular expression, every byte of a
//! pre-token is mapped to a printable code point, and merges are applied by
//! repeatedly taking the lowest-rank adjacent pair and merging all of its
//! occurrences left to right.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use fancy_regex::Regex;
use serde_json::Value;

use crate::corpus::{TokenId, TokenSequence};
use crate::error::{Error, Result};

/// The GPT-2 pre-tokenization pattern.
pub const GPT2_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

/// Bijection between the 256 byte values and printable code points.
///
/// Printable Latin-1 bytes map to themselves; the remaining 68 bytes map to
/// `256 + k` in increasing byte order.
#[derive(Debug, Clone)]
pub struct ByteMap {
    encode: [char; 256],
    decode: HashMap<char, u8>,
}

impl ByteMap {
    pub fn gpt2() -> Self {
        let printable = |b: u32| {
            (u32::from('!')..=u32::from('~')).contains(&b)
                || (0xA1..=0xAC).contains(&b)
                || (0xAE..=0xFF).contains(&b)
        };
        let mut encode = ['\0'; 256];
        let mut shifted = 0u32;
        for b in 0u32..256 {
            let cp = if printable(b) {
                b
            } else {
                shifted += 1;
                255 + shifted
            };
            encode[b as usize] = char::from_u32(cp).expect("valid code point");
        }
        let decode = encode
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect();
        ByteMap { encode, decode }
    }

    #[inline]
    pub fn char_for(&self, byte: u8) -> char {
        self.encode[byte as usize]
    }

    #[inline]
    pub fn byte_for(&self, c: char) -> Option<u8> {
        self.decode.get(&c).copied()
    }
}

/// Bidirectional token-string / id mapping.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: HashMap<TokenId, String>,
}

impl Vocabulary {
    pub fn new(entries: impl IntoIterator<Item = (String, TokenId)>) -> Result<Self> {
        let mut token_to_id = HashMap::new();
        let mut id_to_token = HashMap::new();
        for (tok, id) in entries {
            if let Some(prev) = id_to_token.insert(id, tok.clone()) {
                return Err(Error::InvalidTokenizer(format!(
                    "duplicate vocabulary id {id} for {prev:?} and {tok:?}"
                )));
            }
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::InvalidTokenizer(format!(
                    "duplicate vocabulary entry {tok:?}"
                )));
            }
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    pub fn size(&self) -> usize {
        self.token_to_id.len()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(&id).map(String::as_str)
    }

    /// One past the largest id, i.e. the bound token ids must stay below.
    pub fn id_bound(&self) -> usize {
        self.id_to_token.keys().max().map_or(0, |&m| m as usize + 1)
    }
}

#[derive(Debug, Clone)]
pub struct BpeTokenizer {
    name: String,
    vocab: Vocabulary,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    byte_map: ByteMap,
    pattern: Regex,
    pattern_src: String,
}

impl BpeTokenizer {
    /// Builds a tokenizer from an in-memory vocabulary and ordered merges,
    /// using the GPT-2 byte map and pre-tokenization pattern.
    pub fn new(vocab: Vocabulary, merges: Vec<(String, String)>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let joined = format!("{l}{r}");
            if vocab.id(&joined).is_none() {
                return Err(Error::InvalidTokenizer(format!(
                    "merge {} ({l:?} {r:?}) produces {joined:?}, which is not in the vocabulary",
                    rank
                )));
            }
            // first occurrence keeps the lower rank
            ranks.entry((l.clone(), r.clone())).or_insert(rank);
        }
        Ok(BpeTokenizer {
            name: "bpe".to_string(),
            vocab,
            merges,
            ranks,
            byte_map: ByteMap::gpt2(),
            pattern: compile(GPT2_PATTERN)?,
            pattern_src: GPT2_PATTERN.to_string(),
        })
    }

    pub fn with_pattern(mut self, pattern: &str) -> Result<Self> {
        self.pattern = compile(pattern)?;
        self.pattern_src = pattern.to_string();
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn pattern(&self) -> &str {
        &self.pattern_src
    }

    pub fn byte_map(&self) -> &ByteMap {
        &self.byte_map
    }

    /// Applies merges to a single pre-token and returns its symbols.
    pub fn bpe_symbols(&self, piece: &str) -> Vec<String> {
        let mut symbols: Vec<String> = piece
            .bytes()
            .map(|b| self.byte_map.char_for(b).to_string())
            .collect();

        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];

            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == *left && symbols[i + 1] == *right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
            if symbols.len() == 1 {
                break;
            }
        }
        symbols
    }

    pub fn encode_ids(&self, text: &str) -> Result<Vec<TokenId>> {
        let mut ids = Vec::new();
        for piece in pretokenize_with(&self.pattern, text)? {
            for sym in self.bpe_symbols(piece) {
                let id = self.vocab.id(&sym).ok_or(Error::UnknownSymbol(sym))?;
                ids.push(id);
            }
        }
        Ok(ids)
    }

    pub fn encode(&self, text: &str) -> Result<TokenSequence> {
        Ok(TokenSequence {
            tokens: self.encode_ids(text)?,
            source_tokenizer: self.name.clone(),
            vocab_size: Some(self.vocab.id_bound()),
        })
    }

    pub fn decode_bytes(&self, tokens: &[TokenId]) -> Result<Vec<u8>> {
        let mut bytes = Vec::new();
        for &id in tokens {
            let tok = self.vocab.token(id).ok_or(Error::UnknownId(id))?;
            for c in tok.chars() {
                match self.byte_map.byte_for(c) {
                    Some(b) => bytes.push(b),
                    // tokens outside the byte alphabet (special tokens) decode verbatim
                    None => bytes.extend_from_slice(c.encode_utf8(&mut [0; 4]).as_bytes()),
                }
            }
        }
        Ok(bytes)
    }

    /// Inverse of [`encode`](Self::encode); invalid UTF-8 (only possible for
    /// hand-built id lists) is replaced with U+FFFD.
    pub fn decode(&self, tokens: &[TokenId]) -> Result<String> {
        let bytes = self.decode_bytes(tokens)?;
        Ok(match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        })
    }
}

fn compile(pattern: &str) -> Result<Regex> {
    Regex::new(pattern).map_err(|e| Error::Regex(e.to_string()))
}

fn pretokenize_with<'t>(re: &Regex, text: &'t str) -> Result<Vec<&'t str>> {
    let mut pieces = Vec::new();
    let mut last = 0;
    for m in re.find_iter(text) {
        let m = m.map_err(|e| Error::Regex(e.to_string()))?;
        if m.start() == m.end() {
            continue;
        }
        if m.start() > last {
            pieces.push(&text[last..m.start()]);
        }
        pieces.push(m.as_str());
        last = m.end();
    }
    if last < text.len() {
        pieces.push(&text[last..]);
    }
    Ok(pieces)
}

/// Splits `text` into pre-tokens. Stretches the pattern does not match are
/// kept as their own pieces, so the pieces always concatenate to `text`.
pub fn pretokenize<'t>(text: &'t str, pattern: &str) -> Result<Vec<&'t str>> {
    pretokenize_with(&compile(pattern)?, text)
}

fn parse_vocab(content: &str, origin: &Path) -> Result<Vocabulary> {
    let value: Value = serde_json::from_str(content).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(Error::InvalidTokenizer(
            "vocab file must be a JSON object".into(),
        ));
    };
    let mut entries = Vec::with_capacity(map.len());
    for (tok, id) in map {
        let id = id
            .as_u64()
            .and_then(|v| TokenId::try_from(v).ok())
            .ok_or_else(|| {
                Error::InvalidTokenizer(format!("vocab entry {tok:?} has a non-integer id {id}"))
            })?;
        entries.push((tok, id));
    }
    Vocabulary::new(entries)
}

fn parse_merges(content: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut merges = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || (i == 0 && line.starts_with('#')) {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                merges.push((l.to_string(), r.to_string()))
            }
            _ => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    message: format!("expected \"left right\", got {line:?}"),
                })
            }
        }
    }
    Ok(merges)
}

/// Loads a tokenizer from a JSON vocabulary and a merges file.
pub fn load_bpe(
    vocab_path: impl AsRef<Path>,
    merges_path: impl AsRef<Path>,
) -> Result<BpeTokenizer> {
    let vocab_path = vocab_path.as_ref();
    let merges_path = merges_path.as_ref();
    let vocab_src = fs::read_to_string(vocab_path).map_err(|e| Error::io(vocab_path, e))?;
    let merges_src = fs::read_to_string(merges_path).map_err(|e| Error::io(merges_path, e))?;
    let tok = BpeTokenizer::new(
        parse_vocab(&vocab_src, vocab_path)?,
        parse_merges(&merges_src, merges_path)?,
    )?;
    let name = vocab_path
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bpe".to_string());
    Ok(tok.with_name(name))
}

/// Parses tokenizer files already held in memory.
pub fn bpe_from_strings(vocab_json: &str, merges_txt: &str) -> Result<BpeTokenizer> {
    BpeTokenizer::new(
        parse_vocab(vocab_json, Path::new("<vocab>"))?,
        parse_merges(merges_txt, Path::new("<merges>"))?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BpeTokenizer {
        bpe_from_strings(r#"{"a":0,"b":1,"ab":2,"abab":3}"#, "a b\nab ab\n")
            .unwrap()
            .with_pattern(r"(?s).+")
            .unwrap()
    }

    #[test]
    fn byte_map_is_bijective() {
        let m = ByteMap::gpt2();
        let mut seen = std::collections::HashSet::new();
        for b in 0..=255u8 {
            let c = m.char_for(b);
            assert!(seen.insert(c));
            assert_eq!(m.byte_for(c), Some(b));
        }
        assert_eq!(m.char_for(b'a'), 'a');
        assert_eq!(m.char_for(b' '), 'Ġ');
        assert_eq!(m.char_for(b'\n'), 'Ċ');
    }

    #[test]
    fn load_single_merge() {
        let t = bpe_from_strings(r#"{"a":0,"b":1,"ab":2}"#, "a b\n").unwrap();
        assert_eq!(t.merges().len(), 1);
        assert_eq!(t.vocab().size(), 3);
    }

    #[test]
    fn header_line_is_skipped() {
        let t = bpe_from_strings(r#"{"a":0,"b":1,"ab":2}"#, "#version: 0.2\na b\n").unwrap();
        assert_eq!(t.merges().len(), 1);
    }

    #[test]
    fn merge_outside_vocab_rejected() {
        let err = bpe_from_strings(r#"{"x":0,"y":1}"#, "x y\n").unwrap_err();
        assert!(matches!(err, Error::InvalidTokenizer(_)));
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = bpe_from_strings(r#"{"a":0,"b":0}"#, "").unwrap_err();
        assert!(matches!(err, Error::InvalidTokenizer(_)));
    }

    #[test]
    fn malformed_merge_line() {
        let err = bpe_from_strings(r#"{"a":0}"#, "a\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn gpt2_pretokenize_examples() {
        assert_eq!(
            pretokenize("hello world", GPT2_PATTERN).unwrap(),
            ["hello", " world"]
        );
        assert!(pretokenize("", GPT2_PATTERN).unwrap().is_empty());
        assert_eq!(pretokenize("don't", GPT2_PATTERN).unwrap(), ["don", "'t"]);
        assert_eq!(
            pretokenize("a  b\n\n12!?", GPT2_PATTERN).unwrap(),
            ["a", " ", " b", "\n", "\n", "12", "!?"]
        );
    }

    #[test]
    fn pretokenize_keeps_unmatched_gaps() {
        assert_eq!(pretokenize("ab12cd", r"\d+").unwrap(), ["ab", "12", "cd"]);
    }

    #[test]
    fn toy_encode_decode() {
        let t = toy();
        assert_eq!(t.encode_ids("abab").unwrap(), vec![3]);
        assert_eq!(t.encode_ids("aba").unwrap(), vec![2, 0]);
        assert!(t.encode_ids("").unwrap().is_empty());
        assert_eq!(t.decode(&[3]).unwrap(), "abab");
        assert_eq!(t.decode(&[]).unwrap(), "");
        assert!(matches!(t.decode(&[99]), Err(Error::UnknownId(99))));
    }

    #[test]
    fn symbol_missing_from_vocab() {
        let err = toy().encode_ids("abc").unwrap_err();
        assert!(matches!(err, Error::UnknownSymbol(s) if s == "c"));
    }
}
