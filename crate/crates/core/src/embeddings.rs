//! Pretrained static embeddings: loading, token lookup and frequency slices.
//!
//! Two on-disk formats are supported:
//!
//! * GloVe text: one `token v1 v2 ... vD` line per entry.
//! * word2vec binary: an ASCII `<count> <dim>\n` header followed by records
//!   of `token<space>` and `dim` little-endian `f32`s, each optionally
//!   followed by a single `\n`.
//!
//! Entries keep file order. For frequency-sorted files (GloVe 6B, Google
//! News) that order doubles as a frequency rank.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Immutable token → vector table in file order.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    tokens: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    /// Builds a store from `(token, vector)` pairs, checking dimension,
    /// finiteness and token uniqueness.
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f32>)>,
    {
        let mut builder: Option<Builder> = None;
        for (i, (token, vector)) in entries.into_iter().enumerate() {
            let b = builder.get_or_insert_with(|| Builder::new(vector.len(), 0));
            b.push(token, &vector).map_err(|message| match message {
                PushError::Duplicate(token) => Error::DuplicateToken {
                    token,
                    position: i + 1,
                },
                PushError::Invalid(message) => Error::InvalidArgument(format!(
                    "entry {}: {message}",
                    i + 1
                )),
            })?;
        }
        builder
            .ok_or_else(|| Error::InvalidArgument("no embedding entries".into()))?
            .finish()
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    pub fn token(&self, position: usize) -> &str {
        &self.tokens[position]
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, position: usize) -> &[f32] {
        &self.data[position * self.dim..(position + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.position(token).map(|i| self.vector(i))
    }

    /// Looks up `token`, falling back to its lowercase form.
    pub fn get_case_insensitive(&self, token: &str) -> Option<&[f32]> {
        self.get(token).or_else(|| {
            let lower = token.to_lowercase();
            if lower == token {
                None
            } else {
                self.get(&lower)
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.tokens
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), self.vector(i)))
    }

    /// The first `k` tokens in store order.
    pub fn frequency_slice(&self, k: usize) -> Result<Vec<&str>> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "frequency slice of {k} tokens from a store of {}",
                self.len()
            )));
        }
        Ok(self.tokens[..k].iter().map(String::as_str).collect())
    }

    /// Resolves an entity name to a vector under `strategy`.
    ///
    /// Returns `None` when the token (exact mode) or any constituent word
    /// (averaging modes) cannot be found.
    pub fn lookup_entity(&self, name: &str, strategy: &LookupStrategy) -> Option<Vec<f64>> {
        let name = name.trim();
        if name.is_empty() {
            return None;
        }
        match strategy.mode {
            LookupMode::Exact => self.lookup_token(name, strategy.case).map(widen),
            LookupMode::PhraseThenAverage => {
                let phrase = name.split_whitespace().collect::<Vec<_>>().join("_");
                self.lookup_token(&phrase, strategy.case)
                    .map(widen)
                    .or_else(|| self.average_constituents(name, strategy.case))
            }
            LookupMode::AverageOnly => self.average_constituents(name, strategy.case),
        }
    }

    fn lookup_token(&self, token: &str, case: CasePolicy) -> Option<&[f32]> {
        match case {
            CasePolicy::Lowercase => self.get(&token.to_lowercase()),
            CasePolicy::Preserve => self.get_case_insensitive(token),
        }
    }

    fn average_constituents(&self, name: &str, case: CasePolicy) -> Option<Vec<f64>> {
        let mut sum = vec![0.0f64; self.dim];
        let mut count = 0usize;
        for word in name.split_whitespace() {
            let v = self.lookup_token(word, case)?;
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let inv = 1.0 / count as f64;
        sum.iter_mut().for_each(|s| *s *= inv);
        Some(sum)
    }

    /// Writes the store in GloVe text format with round-trip float precision.
    pub fn write_glove_text<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        let werr = |e| Error::io("<writer>", e);
        for (token, v) in self.iter() {
            out.write_all(token.as_bytes()).map_err(werr)?;
            for x in v {
                write!(out, " {x}").map_err(werr)?;
            }
            out.write_all(b"\n").map_err(werr)?;
        }
        out.flush().map_err(werr)
    }

    /// Writes the store in word2vec binary format (newline after each record).
    pub fn write_word2vec_binary<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        let werr = |e| Error::io("<writer>", e);
        writeln!(out, "{} {}", self.len(), self.dim).map_err(werr)?;
        for (token, v) in self.iter() {
            out.write_all(token.as_bytes()).map_err(werr)?;
            out.write_all(b" ").map_err(werr)?;
            for x in v {
                out.write_all(&x.to_le_bytes()).map_err(werr)?;
            }
            out.write_all(b"\n").map_err(werr)?;
        }
        out.flush().map_err(werr)
    }
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

enum PushError {
    Duplicate(String),
    Invalid(String),
}

struct Builder {
    dim: usize,
    tokens: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn new(dim: usize, capacity: usize) -> Self {
        Builder {
            dim,
            tokens: Vec::with_capacity(capacity),
            data: Vec::with_capacity(capacity * dim),
            index: HashMap::with_capacity(capacity),
        }
    }

    fn push(&mut self, token: String, vector: &[f32]) -> std::result::Result<(), PushError> {
        if vector.len() != self.dim {
            return Err(PushError::Invalid(format!(
                "expected {} components, found {}",
                self.dim,
                vector.len()
            )));
        }
        if self.dim == 0 {
            return Err(PushError::Invalid("zero-dimensional vector".into()));
        }
        if let Some(x) = vector.iter().find(|x| !x.is_finite()) {
            return Err(PushError::Invalid(format!("non-finite component {x}")));
        }
        if self.index.contains_key(&token) {
            return Err(PushError::Duplicate(token));
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    fn finish(self) -> Result<EmbeddingStore> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidArgument("no embedding entries".into()));
        }
        Ok(EmbeddingStore {
            dim: self.dim,
            tokens: self.tokens,
            data: self.data,
            index: self.index,
        })
    }
}

/// How an entity name is turned into a token lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LookupMode {
    /// The whole name must be a token.
    Exact,
    /// Try the underscore-joined phrase, then average the words.
    PhraseThenAverage,
    /// Average the whitespace-separated words.
    AverageOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CasePolicy {
    /// Lowercase before lookup (GloVe vocabularies are lowercase).
    Lowercase,
    /// Try the name as written, then its lowercase form.
    Preserve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupStrategy {
    pub mode: LookupMode,
    pub case: CasePolicy,
}

impl LookupStrategy {
    pub fn new(mode: LookupMode, case: CasePolicy) -> Self {
        LookupStrategy { mode, case }
    }

    /// Multi-word names are averaged over lowercase words.
    pub fn glove() -> Self {
        Self::new(LookupMode::AverageOnly, CasePolicy::Lowercase)
    }

    /// Phrase tokens like `New_York` first, case preserved with lowercase fallback.
    pub fn word2vec() -> Self {
        Self::new(LookupMode::PhraseThenAverage, CasePolicy::Preserve)
    }
}

/// Embedding file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingFormat {
    GloveText,
    Word2vecBin,
}

impl EmbeddingFormat {
    pub fn default_strategy(self) -> LookupStrategy {
        match self {
            EmbeddingFormat::GloveText => LookupStrategy::glove(),
            EmbeddingFormat::Word2vecBin => LookupStrategy::word2vec(),
        }
    }
}

pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingStore> {
    match format {
        EmbeddingFormat::GloveText => load_glove_text(path),
        EmbeddingFormat::Word2vecBin => load_word2vec_binary(path),
    }
}

pub fn load_glove_text(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_glove_text(BufReader::with_capacity(1 << 20, file))
}

/// Parses GloVe text. Line numbers in errors are 1-based.
pub fn read_glove_text<R: BufRead>(mut reader: R) -> Result<EmbeddingStore> {
    let mut builder: Option<Builder> = None;
    let mut line = String::new();
    let mut values: Vec<f32> = Vec::new();
    let mut line_no = 0usize;
    loop {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::io("<glove text>", e))?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(' ');
        let token = fields.next().unwrap_or_default();
        if token.is_empty() {
            return Err(Error::TextFormat {
                line: line_no,
                message: "empty token".into(),
            });
        }
        values.clear();
        for field in fields.filter(|f| !f.is_empty()) {
            let x: f32 = field.parse().map_err(|_| Error::TextFormat {
                line: line_no,
                message: format!("unparsable float {field:?}"),
            })?;
            values.push(x);
        }
        let b = builder.get_or_insert_with(|| Builder::new(values.len(), 1024));
        b.push(token.to_string(), &values).map_err(|e| match e {
            PushError::Duplicate(token) => Error::DuplicateToken {
                token,
                position: line_no,
            },
            PushError::Invalid(message) => Error::TextFormat {
                line: line_no,
                message,
            },
        })?;
    }
    builder
        .ok_or_else(|| Error::TextFormat {
            line: 0,
            message: "empty file".into(),
        })?
        .finish()
}

pub fn load_word2vec_binary(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word2vec_binary(BufReader::with_capacity(1 << 20, file))
}

/// Parses word2vec binary. Record numbers in errors are 1-based.
pub fn read_word2vec_binary<R: BufRead>(mut reader: R) -> Result<EmbeddingStore> {
    let mut header = Vec::new();
    reader
        .read_until(b'\n', &mut header)
        .map_err(|e| Error::io("<word2vec>", e))?;
    let header = String::from_utf8_lossy(&header);
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match parts.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if c > 0 && d > 0 => (c, d),
            _ => return Err(Error::Header(format!("expected two positive integers, got {:?}", header.trim()))),
        },
        _ => return Err(Error::Header(format!("expected two integers, got {:?}", header.trim()))),
    };

    let mut builder = Builder::new(dim, count.min(1 << 22));
    let mut token = Vec::with_capacity(64);
    let mut raw = vec![0u8; dim * 4];
    let mut vector = vec![0f32; dim];
    for record in 1..=count {
        let truncated = |what: &str| Error::BinaryRecord {
            record,
            message: format!("truncated file while reading {what}"),
        };
        token.clear();
        let n = reader
            .read_until(b' ', &mut token)
            .map_err(|e| Error::io("<word2vec>", e))?;
        if n == 0 || token.last() != Some(&b' ') {
            return Err(truncated("token"));
        }
        token.pop();
        // Separator newline left over from the previous record.
        if token.first() == Some(&b'\n') {
            token.remove(0);
        }
        if token.is_empty() {
            return Err(Error::BinaryRecord {
                record,
                message: "empty token".into(),
            });
        }
        reader.read_exact(&mut raw).map_err(|_| truncated("vector"))?;
        for (v, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        let token = String::from_utf8_lossy(&token).into_owned();
        builder.push(token, &vector).map_err(|e| match e {
            PushError::Duplicate(token) => Error::DuplicateToken {
                token,
                position: record,
            },
            PushError::Invalid(message) => Error::BinaryRecord { record, message },
        })?;
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> EmbeddingStore {
        EmbeddingStore::from_entries(vec![
            ("new".to_string(), vec![1.0, 2.0, 3.0, 4.0]),
            ("york".to_string(), vec![3.0, 0.0, -1.0, 2.0]),
            ("paris".to_string(), vec![0.5, 0.5, 0.5, 0.5]),
            ("New_York".to_string(), vec![9.0, 9.0, 9.0, 9.0]),
            ("lake".to_string(), vec![1.0, 1.0, 1.0, 1.0]),
            ("city".to_string(), vec![2.0, 2.0, 2.0, 2.0]),
        ])
        .unwrap()
    }

    #[test]
    fn glove_three_lines_keep_file_order() {
        let text = "the 0.1 0.2 0.3 0.4\nof 1 2 3 4\nand -1 -2 -3 -4\n";
        let store = read_glove_text(text.as_bytes()).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(store.dim(), 4);
        assert_eq!(store.tokens(), ["the", "of", "and"]);
        assert_eq!(store.get("of").unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn glove_dimension_mismatch_names_line() {
        let err = read_glove_text("the 0.1 0.2 0.3\na 0.1 0.2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TextFormat { line: 2, .. }), "{err}");
    }

    #[test]
    fn glove_rejects_duplicates_and_bad_floats() {
        let err = read_glove_text("a 1 2\nb 1 2\na 3 4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateToken { position: 3, .. }));
        let err = read_glove_text("a 1 2\nb 1 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TextFormat { line: 2, .. }));
        let err = read_glove_text("a 1 NaN\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::TextFormat { line: 1, .. }));
    }

    fn w2v_bytes(records: &[(&str, &[f32])], dim: usize, newline: bool) -> Vec<u8> {
        let mut out = format!("{} {}\n", records.len(), dim).into_bytes();
        for (t, v) in records {
            out.extend_from_slice(t.as_bytes());
            out.push(b' ');
            for x in *v {
                out.extend_from_slice(&x.to_le_bytes());
            }
            if newline {
                out.push(b'\n');
            }
        }
        out
    }

    #[test]
    fn word2vec_two_records() {
        for newline in [true, false] {
            let bytes = w2v_bytes(
                &[("New_York", &[1.0, 2.0, 3.0]), ("cold", &[-1.0, 0.5, 0.25])],
                3,
                newline,
            );
            let store = read_word2vec_binary(&bytes[..]).unwrap();
            assert_eq!(store.len(), 2);
            assert_eq!(store.dim(), 3);
            assert_eq!(store.tokens(), ["New_York", "cold"]);
            assert_eq!(store.get("cold").unwrap(), &[-1.0, 0.5, 0.25]);
        }
    }

    #[test]
    fn word2vec_truncated_mid_vector() {
        let mut bytes = w2v_bytes(&[("a", &[1.0, 2.0, 3.0]), ("b", &[4.0, 5.0, 6.0])], 3, true);
        bytes.truncate(bytes.len() - 6);
        let err = read_word2vec_binary(&bytes[..]).unwrap_err();
        assert!(matches!(err, Error::BinaryRecord { record: 2, .. }), "{err}");
    }

    #[test]
    fn word2vec_bad_header() {
        for header in ["3\n", "three 4\n", "1 2 3\n", "0 3\n"] {
            let err = read_word2vec_binary(header.as_bytes()).unwrap_err();
            assert!(matches!(err, Error::Header(_)), "{header:?}: {err}");
        }
    }

    #[test]
    fn binary_writer_round_trips_bit_exact() {
        let store = fixture();
        let mut buf = Vec::new();
        store.write_word2vec_binary(&mut buf).unwrap();
        let back = read_word2vec_binary(&buf[..]).unwrap();
        assert_eq!(back.tokens(), store.tokens());
        for (a, b) in back.iter().zip(store.iter()) {
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn exact_lookup_is_identity() {
        let store = fixture();
        let s = LookupStrategy::new(LookupMode::Exact, CasePolicy::Lowercase);
        assert_eq!(store.lookup_entity("paris", &s).unwrap(), vec![0.5; 4]);
        assert_eq!(store.lookup_entity("Paris", &s).unwrap(), vec![0.5; 4]);
        assert!(store.lookup_entity("london", &s).is_none());
    }

    #[test]
    fn average_of_two_words() {
        let store = fixture();
        let v = store.lookup_entity("new york", &LookupStrategy::glove()).unwrap();
        assert_eq!(v, vec![2.0, 1.0, 1.0, 3.0]);
        let w = store.lookup_entity("york new", &LookupStrategy::glove()).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn missing_constituent_is_not_found() {
        let store = fixture();
        assert!(store
            .lookup_entity("salt lake city", &LookupStrategy::glove())
            .is_none());
        assert!(store.lookup_entity("   ", &LookupStrategy::glove()).is_none());
    }

    #[test]
    fn phrase_token_preferred_when_present() {
        let store = fixture();
        let v = store.lookup_entity("New York", &LookupStrategy::word2vec()).unwrap();
        assert_eq!(v, vec![9.0; 4]);
        // Lowercasing loses the phrase token, so the words are averaged.
        let lower = LookupStrategy::new(LookupMode::PhraseThenAverage, CasePolicy::Lowercase);
        assert_eq!(store.lookup_entity("New York", &lower).unwrap(), vec![2.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn frequency_slice_bounds() {
        let store = fixture();
        assert_eq!(store.frequency_slice(1).unwrap(), ["new"]);
        assert_eq!(store.frequency_slice(store.len()).unwrap().len(), store.len());
        assert!(store.frequency_slice(store.len() + 1).is_err());
    }
}
