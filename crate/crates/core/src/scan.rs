//! Vocabulary-wide similarity/correlation scans and antonym composites.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::dataset::JoinedDesign;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided p-value for Pearson `r` on `n` pairs under the t distribution
/// with `n − 2` degrees of freedom.
pub fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let r2 = r * r;
    if r2 >= 1.0 {
        return 0.0;
    }
    // P(|T| ≥ t) = I_{df/(df+t²)}(df/2, 1/2) with t² = df·r²/(1−r²).
    let x = (1.0 - r2).clamp(0.0, 1.0);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

fn centered(v: &[f64]) -> (Vec<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let ss = c.iter().map(|x| x * x).sum();
    (c, ss)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 4 {
        return Err(Error::TooFewRows { needed: 4, got: n });
    }
    let (xc, sxx) = centered(x);
    let (yc, syy) = centered(y);
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance("x".into()));
    }
    if syy <= 0.0 {
        return Err(Error::ZeroVariance("y".into()));
    }
    let sxy: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        p_value: t_test_p(r, n),
        n,
    })
}

/// Monte Carlo two-sided permutation p-value, `(b + 1) / (m + 1)` where `b`
/// counts shuffles of `y` with `|r| ≥ |r_observed|`.
pub fn permutation_p(x: &[f64], y: &[f64], permutations: usize, seed: u64) -> Result<f64> {
    let observed = pearson(x, y)?.r.abs();
    let (xc, _) = centered(x);
    let (mut yc, _) = centered(y);
    let scale = {
        let sxx: f64 = xc.iter().map(|v| v * v).sum();
        let syy: f64 = yc.iter().map(|v| v * v).sum();
        (sxx * syy).sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..permutations {
        yc.shuffle(&mut rng);
        let r = xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / scale;
        if r.abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (permutations + 1) as f64)
}

/// Vocabulary restrictions applied before a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabFilter {
    /// Only the first `top_k` store entries are considered.
    pub top_k: usize,
    pub min_length: usize,
    /// Drop tokens containing anything but letters (numbers, punctuation).
    pub alphabetic_only: bool,
    pub exclusions: BTreeMap<String, HashSet<String>>,
}

impl Default for VocabFilter {
    fn default() -> Self {
        VocabFilter {
            top_k: 20_000,
            min_length: 4,
            alphabetic_only: true,
            exclusions: BTreeMap::new(),
        }
    }
}

impl VocabFilter {
    fn excluded(&self, word: &str) -> bool {
        let lower = word.to_lowercase();
        self.exclusions.values().any(|set| set.contains(&lower))
    }
}

/// Reads a one-word-per-line list; blank lines and `#` comments are skipped
/// and entries are lowercased.
pub fn read_word_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// Loads every `*.txt` file in `dir` as a named exclusion list.
pub fn load_exclusions(dir: impl AsRef<Path>) -> Result<BTreeMap<String, HashSet<String>>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let words: HashSet<String> = read_word_list(&path)?.into_iter().flat_map(split_phrase).collect();
        out.insert(name, words);
    }
    Ok(out)
}

// Multi-word entries ("new york") exclude each constituent token.
fn split_phrase(entry: String) -> Vec<String> {
    if entry.contains(char::is_whitespace) || entry.contains('_') {
        entry
            .split(|c: char| c.is_whitespace() || c == '_')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .chain(std::iter::once(entry.clone()))
            .collect()
    } else {
        vec![entry]
    }
}

/// Surviving words in store order.
pub fn filter_vocabulary(store: &EmbeddingStore, filter: &VocabFilter) -> Result<Vec<String>> {
    let top = store.frequency_slice(filter.top_k.min(store.len()))?;
    let words: Vec<String> = top
        .into_iter()
        .filter(|w| w.chars().count() >= filter.min_length)
        .filter(|w| !filter.alphabetic_only || w.chars().all(char::is_alphabetic))
        .filter(|w| !filter.excluded(w))
        .map(str::to_string)
        .collect();
    if words.is_empty() {
        return Err(Error::InvalidArgument("vocabulary filter left no words".into()));
    }
    Ok(words)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCorrelation {
    pub word: String,
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub target: String,
    pub n_entities: usize,
    pub vocabulary_size: usize,
    /// Words whose similarity profile was constant (or vector zero).
    pub skipped: Vec<String>,
    /// Sorted by `r` descending, ties by word.
    pub correlations: Vec<WordCorrelation>,
}

fn unit_rows(rows: impl Iterator<Item = Vec<f64>>, d: usize) -> (DMatrix<f64>, Vec<bool>) {
    let rows: Vec<Vec<f64>> = rows.collect();
    let m = DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]);
    let ok = m.row_iter().map(|r| r.norm() > 0.0).collect();
    (normalize_rows(&m), ok)
}

fn design_rows_for(design: &JoinedDesign, target: &str) -> Result<(Vec<usize>, Vec<f64>)> {
    let column = design.target(target)?;
    let rows = design.rows_with(target)?;
    let values = rows.iter().map(|&i| column[i].unwrap_or_default()).collect();
    Ok((rows, values))
}

/// Correlates each vocabulary word's cosine-similarity profile over the
/// design's entities with `target`.
pub fn scan(
    store: &EmbeddingStore,
    design: &JoinedDesign,
    target: &str,
    filter: &VocabFilter,
) -> Result<ScanResult> {
    if design.dim() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            got: design.dim(),
        });
    }
    let (rows, y) = design_rows_for(design, target)?;
    if rows.len() < 10 {
        return Err(Error::TooFewRows {
            needed: 10,
            got: rows.len(),
        });
    }
    let d = store.dim();
    let (entities, entity_ok) = unit_rows(
        rows.iter()
            .map(|&i| design.x.row(i).iter().copied().collect()),
        d,
    );
    if let Some(bad) = entity_ok.iter().position(|ok| !ok) {
        return Err(Error::InvalidArgument(format!(
            "entity {:?} has a zero embedding",
            design.names[rows[bad]]
        )));
    }
    let vocab = filter_vocabulary(store, filter)?;
    let (words, word_ok) = unit_rows(
        vocab.iter().map(|w| {
            store
                .get(w)
                .expect("filtered words come from the store")
                .iter()
                .map(|&x| f64::from(x))
                .collect()
        }),
        d,
    );
    // sims[(entity, word)]
    let sims = &entities * words.transpose();

    let outcomes: Vec<Option<WordCorrelation>> = (0..vocab.len())
        .into_par_iter()
        .map(|j| {
            if !word_ok[j] {
                return None;
            }
            let s: Vec<f64> = sims.column(j).iter().copied().collect();
            pearson(&s, &y).ok().map(|c| WordCorrelation {
                word: vocab[j].clone(),
                r: c.r,
                p_value: c.p_value,
                n: c.n,
            })
        })
        .collect();
    let mut skipped = Vec::new();
    let mut correlations = Vec::with_capacity(vocab.len());
    for (j, o) in outcomes.into_iter().enumerate() {
        match o {
            Some(c) => correlations.push(c),
            None => skipped.push(vocab[j].clone()),
        }
    }
    sort_by_r(&mut correlations, Direction::Positive);
    Ok(ScanResult {
        target: target.to_string(),
        n_entities: rows.len(),
        vocabulary_size: vocab.len(),
        skipped,
        correlations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

fn sort_by_r(list: &mut [WordCorrelation], direction: Direction) {
    list.sort_by(|a, b| {
        let ord = match direction {
            Direction::Positive => b.r.total_cmp(&a.r),
            Direction::Negative => a.r.total_cmp(&b.r),
        };
        ord.then_with(|| a.word.cmp(&b.word))
    });
}

/// The `k` most extreme correlations in `direction`, ties by word.
pub fn top_k(
    correlations: &[WordCorrelation],
    k: usize,
    direction: Direction,
) -> Result<Vec<WordCorrelation>> {
    if k > correlations.len() {
        return Err(Error::InvalidArgument(format!(
            "top {k} requested from {} correlations",
            correlations.len()
        )));
    }
    let mut list = correlations.to_vec();
    sort_by_r(&mut list, direction);
    list.truncate(k);
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeScore {
    pub pos_word: String,
    pub neg_word: String,
    pub target: String,
    pub names: Vec<String>,
    /// `cos(entity, pos) − cos(entity, neg)` per entity.
    pub scores: Vec<f64>,
    pub target_values: Vec<f64>,
    pub correlation: Correlation,
}

fn word_vector(store: &EmbeddingStore, word: &str) -> Result<Vec<f64>> {
    store
        .get_case_insensitive(word)
        .map(|v| v.iter().map(|&x| f64::from(x)).collect())
        .ok_or_else(|| Error::OutOfVocabulary(vec![word.to_string()]))
}

/// Antonym-pair composite and its correlation with `target`.
pub fn composite(
    store: &EmbeddingStore,
    design: &JoinedDesign,
    pos_word: &str,
    neg_word: &str,
    target: &str,
) -> Result<CompositeScore> {
    let pos = word_vector(store, pos_word);
    let neg = word_vector(store, neg_word);
    let (pos, neg) = match (pos, neg) {
        (Ok(p), Ok(n)) => (p, n),
        (Err(_), Err(_)) => {
            return Err(Error::OutOfVocabulary(vec![pos_word.into(), neg_word.into()]))
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    if pos_word == neg_word {
        return Err(Error::InvalidArgument(
            "composite words are identical; every score is zero".into(),
        ));
    }
    let (rows, y) = design_rows_for(design, target)?;
    let mut scores = Vec::with_capacity(rows.len());
    for &i in &rows {
        let e: Vec<f64> = design.x.row(i).iter().copied().collect();
        scores.push(cosine(&e, &pos)? - cosine(&e, &neg)?);
    }
    let correlation = pearson(&scores, &y)?;
    Ok(CompositeScore {
        pos_word: pos_word.to_string(),
        neg_word: neg_word.to_string(),
        target: target.to_string(),
        names: rows.iter().map(|&i| design.names[i].clone()).collect(),
        scores,
        target_values: y,
        correlation,
    })
}

/// Unit-normalized rows of a matrix (zero rows stay zero).
pub fn normalize_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    out
}
