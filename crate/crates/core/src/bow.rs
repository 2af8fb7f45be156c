//! Bag-of-words features: word and character n-grams, the fitted
//! vocabulary, the four weighting modes, and chi-square K-best selection.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVec, WeightMode};
use crate::par::{self, Execution};

pub const MAX_WORD_ORDER: usize = 4;
pub const MAX_CHAR_ORDER: usize = 3;
const CHAR_PREFIX: &str = "c:";

/// Which n-gram streams feed a document's term list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NgramSpec {
    pub word_orders: BTreeSet<usize>,
    #[serde(default)]
    pub char_orders: BTreeSet<usize>,
}

impl NgramSpec {
    pub fn new(
        word_orders: impl IntoIterator<Item = usize>,
        char_orders: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let spec = NgramSpec {
            word_orders: word_orders.into_iter().collect(),
            char_orders: char_orders.into_iter().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn words(orders: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(orders, [])
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_orders.is_empty() && self.char_orders.is_empty() {
            return Err(Error::invalid("n-gram spec has neither word nor char orders"));
        }
        if let Some(&n) = self.word_orders.iter().find(|&&n| n == 0 || n > MAX_WORD_ORDER) {
            return Err(Error::invalid(format!("word n-gram order {n} outside 1..={MAX_WORD_ORDER}")));
        }
        if let Some(&n) = self.char_orders.iter().find(|&&n| n == 0 || n > MAX_CHAR_ORDER) {
            return Err(Error::invalid(format!("char n-gram order {n} outside 1..={MAX_CHAR_ORDER}")));
        }
        Ok(())
    }

    /// All n-gram terms of a token list, word orders first.
    pub fn terms(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        for &n in &self.word_orders {
            out.extend(word_ngrams(tokens, n).expect("validated order"));
        }
        for &n in &self.char_orders {
            out.extend(char_ngrams(tokens, n).expect("validated order"));
        }
        out
    }
}

/// Comma-joined orders, e.g. `1,2,3`; empty set prints as empty.
pub fn format_orders(orders: &BTreeSet<usize>) -> String {
    orders.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_orders(s: &str) -> Result<BTreeSet<usize>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(BTreeSet::new());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad n-gram order `{p}`")))
        })
        .collect()
}

impl fmt::Display for NgramSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "word={} char={}", format_orders(&self.word_orders), format_orders(&self.char_orders))
    }
}

pub fn word_ngrams(tokens: &[String], n: usize) -> Result<Vec<String>> {
    if n == 0 {
        return Err(Error::invalid("n-gram order must be >= 1"));
    }
    if tokens.len() < n {
        return Ok(Vec::new());
    }
    Ok(tokens.windows(n).map(|w| w.join(" ")).collect())
}

/// Windows of `n` code points inside each token, tagged `c:` so they never
/// collide with word terms.
pub fn char_ngrams(tokens: &[String], n: usize) -> Result<Vec<String>> {
    if n == 0 {
        return Err(Error::invalid("n-gram order must be >= 1"));
    }
    let mut out = Vec::new();
    for tok in tokens {
        let chars: Vec<char> = tok.chars().collect();
        if chars.len() < n {
            continue;
        }
        for w in chars.windows(n) {
            let mut s = String::with_capacity(CHAR_PREFIX.len() + 4 * n);
            s.push_str(CHAR_PREFIX);
            s.extend(w);
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    spec: NgramSpec,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs_fit: usize,
    min_count: usize,
    raw_size: usize,
}

/// Term to column map fitted on training documents. Columns follow
/// lexicographic term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    spec: NgramSpec,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs_fit: usize,
    min_count: usize,
    raw_size: usize,
    index: HashMap<String, usize>,
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            spec: v.spec,
            terms: v.terms,
            doc_freq: v.doc_freq,
            n_docs_fit: v.n_docs_fit,
            min_count: v.min_count,
            raw_size: v.raw_size,
        }
    }
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;
    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_parts(r.spec, r.terms, r.doc_freq, r.n_docs_fit, r.min_count, r.raw_size)
    }
}

impl Vocabulary {
    fn from_parts(
        spec: NgramSpec,
        terms: Vec<String>,
        doc_freq: Vec<usize>,
        n_docs_fit: usize,
        min_count: usize,
        raw_size: usize,
    ) -> Result<Self> {
        if terms.len() != doc_freq.len() {
            return Err(Error::Validation("vocabulary terms and doc_freq differ in length".into()));
        }
        let index: HashMap<String, usize> =
            terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != terms.len() {
            return Err(Error::Validation("vocabulary has duplicate terms".into()));
        }
        Ok(Vocabulary {
            spec,
            terms,
            doc_freq,
            n_docs_fit,
            min_count,
            raw_size,
            index,
        })
    }

    pub fn spec(&self) -> &NgramSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, col: usize) -> usize {
        self.doc_freq[col]
    }

    pub fn n_docs_fit(&self) -> usize {
        self.n_docs_fit
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Distinct training terms before the `min_count` filter.
    pub fn raw_size(&self) -> usize {
        self.raw_size
    }

    /// `term<TAB>index<TAB>doc_freq` rows under a one-line header.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "#vocabulary n_docs_fit={} min_count={} raw_size={} word={} char={}",
            self.n_docs_fit,
            self.min_count,
            self.raw_size,
            format_orders(&self.spec.word_orders),
            format_orders(&self.spec.char_orders)
        )?;
        for (i, (t, df)) in self.terms.iter().zip(&self.doc_freq).enumerate() {
            writeln!(out, "{t}\t{i}\t{df}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or(Error::Parse { line: 1, message: "missing header".into() })?
            .map_err(|e| Error::io("<vocabulary>", e))?;
        let header = header
            .strip_prefix("#vocabulary ")
            .ok_or(Error::Parse { line: 1, message: "missing `#vocabulary` header".into() })?;
        let mut kv: HashMap<&str, &str> = HashMap::new();
        for part in header.split(' ') {
            if let Some((k, v)) = part.split_once('=') {
                kv.insert(k, v);
            }
        }
        let num = |k: &str| -> Result<usize> {
            kv.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or(Error::Parse { line: 1, message: format!("header field `{k}` missing or invalid") })
        };
        let spec = NgramSpec {
            word_orders: parse_orders(kv.get("word").copied().unwrap_or(""))?,
            char_orders: parse_orders(kv.get("char").copied().unwrap_or(""))?,
        };
        let (n_docs_fit, min_count, raw_size) = (num("n_docs_fit")?, num("min_count")?, num("raw_size")?);
        let mut terms = Vec::new();
        let mut doc_freq = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::io("<vocabulary>", e))?;
            let mut f = line.split('\t');
            let (Some(t), Some(idx), Some(df), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(Error::Parse { line: line_no, message: "expected term, index, doc_freq".into() });
            };
            let bad = |m: &str| Error::Parse { line: line_no, message: m.to_string() };
            let idx: usize = idx.parse().map_err(|_| bad("bad index"))?;
            if idx != terms.len() {
                return Err(bad("indices must be dense and in order"));
            }
            terms.push(t.to_owned());
            doc_freq.push(df.parse().map_err(|_| bad("bad doc_freq"))?);
        }
        Self::from_parts(spec, terms, doc_freq, n_docs_fit, min_count, raw_size)
    }
}

/// Fits a vocabulary on training token lists. `min_count` filters on total
/// occurrences; `doc_freq` counts documents.
pub fn build_vocabulary<T: AsRef<[String]>>(
    docs: &[T],
    spec: &NgramSpec,
    min_count: usize,
) -> Result<Vocabulary> {
    spec.validate()?;
    if docs.is_empty() {
        return Err(Error::Empty("cannot fit a vocabulary on an empty corpus".into()));
    }
    if min_count == 0 {
        return Err(Error::invalid("min_count must be >= 1"));
    }
    let mut stats: HashMap<String, (usize, usize)> = HashMap::new();
    for doc in docs {
        let terms = spec.terms(doc.as_ref());
        let mut seen: HashSet<&str> = HashSet::with_capacity(terms.len());
        for t in &terms {
            let first = seen.insert(t.as_str());
            let e = stats.entry(t.clone()).or_insert((0, 0));
            e.0 += 1;
            if first {
                e.1 += 1;
            }
        }
    }
    let raw_size = stats.len();
    let mut kept: Vec<(String, usize)> = stats
        .into_iter()
        .filter(|(_, (occ, _))| *occ >= min_count)
        .map(|(t, (_, df))| (t, df))
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty(format!(
            "vocabulary is empty after applying min_count={min_count}"
        )));
    }
    kept.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let (terms, doc_freq) = kept.into_iter().unzip();
    Vocabulary::from_parts(spec.clone(), terms, doc_freq, docs.len(), min_count, raw_size)
}

/// `ln(1 + n_docs / (1 + df))`
pub fn idf(n_docs: usize, doc_freq: usize) -> f64 {
    (1.0 + n_docs as f64 / (1.0 + doc_freq as f64)).ln()
}

/// `1 + ln(count)` for positive counts, else 0.
pub fn tf(count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        1.0 + (count as f64).ln()
    }
}

fn weight_row(counts: &HashMap<usize, usize>, vocab: &Vocabulary, mode: WeightMode) -> SparseVec {
    let total: usize = counts.values().sum();
    let pairs = counts
        .iter()
        .map(|(&col, &c)| {
            let v = match mode {
                WeightMode::Count => c as f64,
                WeightMode::Binary => 1.0,
                WeightMode::Freq => c as f64 / total as f64,
                WeightMode::Tfidf => tf(c) * idf(vocab.n_docs_fit, vocab.doc_freq[col]),
            };
            (col as u32, v)
        })
        .collect();
    SparseVec::from_pairs(pairs)
}

/// Vectorizes against a fitted vocabulary. Unknown terms are ignored, so the
/// width always equals `vocab.len()`.
pub fn vectorize<T: AsRef<[String]> + Sync>(
    docs: &[T],
    vocab: &Vocabulary,
    mode: WeightMode,
) -> FeatureMatrix {
    vectorize_with(docs, vocab, mode, Execution::default())
}

pub fn vectorize_with<T: AsRef<[String]> + Sync>(
    docs: &[T],
    vocab: &Vocabulary,
    mode: WeightMode,
    exec: Execution,
) -> FeatureMatrix {
    let rows = par::map(docs, exec, |doc| {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for t in vocab.spec.terms(doc.as_ref()) {
            if let Some(col) = vocab.index_of(&t) {
                *counts.entry(col).or_insert(0) += 1;
            }
        }
        weight_row(&counts, vocab, mode)
    });
    FeatureMatrix::new(vocab.len(), rows, Some(mode)).expect("weights are finite and in range")
}

fn check_labels(x: &FeatureMatrix, y: &[u8]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    Ok(())
}

/// Chi-square statistic of each column against the binary labels, with the
/// column's mass playing the role of counts.
pub fn chi2_scores(x: &FeatureMatrix, y: &[u8]) -> Result<Vec<f64>> {
    check_labels(x, y)?;
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("no rows".into()));
    }
    let mut observed = vec![[0.0f64; 2]; x.n_cols()];
    let mut class_rows = [0usize; 2];
    for (row, &label) in x.rows().iter().zip(y) {
        class_rows[label as usize] += 1;
        for (j, v) in row.iter() {
            if v < 0.0 {
                return Err(Error::invalid(format!("negative value {v} in column {j}")));
            }
            observed[j][label as usize] += v;
        }
    }
    let frac = [class_rows[0] as f64 / n as f64, class_rows[1] as f64 / n as f64];
    Ok(observed
        .iter()
        .map(|o| {
            let total = o[0] + o[1];
            if total == 0.0 {
                return 0.0;
            }
            (0..2)
                .map(|c| {
                    let e = frac[c] * total;
                    if e > 0.0 {
                        (o[c] - e) * (o[c] - e) / e
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect())
}

/// Column indices (ascending) of the `k` highest chi-square scores; ties go
/// to the lower column.
pub fn select_k_best(x: &FeatureMatrix, y: &[u8], k: usize) -> Result<(Vec<usize>, FeatureMatrix)> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let scores = chi2_scores(x, y)?;
    let cols = top_k(&scores, k);
    let reduced = x.select_columns(&cols);
    Ok((cols, reduced))
}

pub(crate) fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k.min(scores.len()));
    order.sort_unstable();
    order
}
