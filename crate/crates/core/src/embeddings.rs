//! Pre-trained word vectors in word2vec text format, and document vectors
//! formed by averaging the vectors of a document's terms.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::bow::NgramSpec;
use crate::corpus::open_text;
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVec};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    /// Rows skipped because their word had already been seen.
    pub duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    /// Inserts unless the word is already present (first occurrence wins).
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector has {} components, table dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite vector component"));
        }
        let word = word.into();
        if self.vectors.contains_key(&word) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.vectors.insert(word, vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io("<embeddings>", e))?,
            None => return Err(Error::Parse { line: 1, message: "empty embedding file".into() }),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().ok();
        let (n_words, dim) = match fields.as_slice() {
            [n, d] => match (parse_usize(n), parse_usize(d)) {
                (Some(n), Some(d)) if d > 0 => (n, d),
                _ => return Err(Error::Parse { line: 1, message: format!("bad header `{header}`") }),
            },
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "header must be `<n_words> <dim>`".into(),
                })
            }
        };

        let mut table = EmbeddingTable::new(dim);
        table.vectors.reserve(n_words);
        let mut rows = 0usize;
        let mut line_no = 1;
        for line in lines {
            line_no += 1;
            let line = line.map_err(|e| Error::io("<embeddings>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let vector: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: line_no, message: format!("bad component: {e}") })?;
            if vector.len() != dim {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {dim} components, found {}", vector.len()),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse { line: line_no, message: "non-finite component".into() });
            }
            rows += 1;
            table.insert(word, vector)?;
        }
        if rows != n_words {
            return Err(Error::Parse {
                line: line_no,
                message: format!("header declares {n_words} rows, file has {rows}"),
            });
        }
        if table.duplicates > 0 {
            log::warn!("embedding table: {} duplicate words ignored", table.duplicates);
        }
        Ok(table)
    }

    /// Word2vec text format, words in sorted order.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<embeddings>", e);
        writeln!(out, "{} {}", self.len(), self.dim).map_err(io)?;
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        for w in words {
            let comps: Vec<String> = self.vectors[w].iter().map(f64::to_string).collect();
            writeln!(out, "{w} {}", comps.join(" ")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    EmbeddingTable::read(BufReader::new(open_text(path)?))
}

/// Looks a term up; multi-word terms missing from the table fall back to
/// the average of whichever component words are present.
fn resolve(term: &str, table: &EmbeddingTable) -> Option<Vec<f64>> {
    if let Some(v) = table.get(term) {
        return Some(v.to_vec());
    }
    if !term.contains(' ') {
        return None;
    }
    let mut acc = vec![0.0; table.dim()];
    let mut n = 0usize;
    for w in term.split(' ') {
        if let Some(v) = table.get(w) {
            acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Some(acc)
}

/// Column-wise average of the resolvable terms' vectors; the zero vector
/// when nothing resolves.
pub fn doc_vector<S: AsRef<str>>(terms: &[S], table: &EmbeddingTable) -> Vec<f64> {
    let mut acc = vec![0.0; table.dim()];
    let mut n = 0usize;
    for t in terms {
        if let Some(v) = resolve(t.as_ref(), table) {
            acc.iter_mut().zip(&v).for_each(|(a, x)| *a += x);
            n += 1;
        }
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

/// One averaged embedding row per document over the word n-gram stream.
pub fn vectorize_dataset_w2v<T: AsRef<[String]> + Sync>(
    docs: &[T],
    spec: &NgramSpec,
    table: &EmbeddingTable,
) -> Result<FeatureMatrix> {
    vectorize_dataset_w2v_with(docs, spec, table, Execution::default())
}

pub fn vectorize_dataset_w2v_with<T: AsRef<[String]> + Sync>(
    docs: &[T],
    spec: &NgramSpec,
    table: &EmbeddingTable,
    exec: Execution,
) -> Result<FeatureMatrix> {
    if !spec.char_orders.is_empty() {
        return Err(Error::invalid(
            "character n-grams have no word embeddings; use word orders only",
        ));
    }
    spec.validate()?;
    let rows = par::map(docs, exec, |d| doc_vector(&spec.terms(d.as_ref()), table));
    let unresolved = rows.iter().filter(|r| r.iter().all(|&x| x == 0.0)).count();
    if unresolved > 0 {
        log::warn!(
            "{unresolved} of {} documents had no term in the embedding table (zero vectors)",
            rows.len()
        );
    }
    FeatureMatrix::new(
        table.dim(),
        rows.iter().map(|r| SparseVec::from_dense(r)).collect(),
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> EmbeddingTable {
        let text = "3 3\na 1 0 2\nb 3 4 0\nc -1 -1 -1\n";
        EmbeddingTable::read(text.as_bytes()).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_small_file() {
        let t = EmbeddingTable::read("2 3\nx 1 2 3\ny 4 5 6\n".as_bytes()).unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert_eq!(t.get("y").unwrap(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn arity_error_has_line() {
        match EmbeddingTable::read("2 3\nx 1 2 3\ny 4 5\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            EmbeddingTable::read("1 2\nx 1 NaN\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(EmbeddingTable::read("3 2\nx 1 2\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(EmbeddingTable::read("x y\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicates_keep_first() {
        let t = EmbeddingTable::read("2 1\nx 1\nx 2\n".as_bytes()).unwrap();
        assert_eq!(t.get("x").unwrap(), &[1.0]);
        assert_eq!(t.duplicates, 1);
    }

    #[test]
    fn averaging() {
        let t = table();
        assert_eq!(doc_vector(&["a"], &t), vec![1.0, 0.0, 2.0]);
        assert_eq!(doc_vector(&["a", "b"], &t), vec![2.0, 2.0, 1.0]);
        assert_eq!(doc_vector(&["zz", "yy"], &t), vec![0.0; 3]);
        // bigram fallback skips missing components
        assert_eq!(doc_vector(&["a zz"], &t), vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn unigram_bigram_stream() {
        let t = table();
        let spec = NgramSpec::words([1, 2]).unwrap();
        let m = vectorize_dataset_w2v(&[toks("a b")], &spec, &t).unwrap().to_dense();
        // mean of a, b and the bigram fallback (a+b)/2 is (a+b)/2
        assert_eq!(m[0], vec![2.0, 2.0, 1.0]);
        let m = vectorize_dataset_w2v(&[toks("c"), Vec::new()], &NgramSpec::words([1]).unwrap(), &t)
            .unwrap()
            .to_dense();
        assert_eq!(m[0], vec![-1.0, -1.0, -1.0]);
        assert_eq!(m[1], vec![0.0; 3]);
        assert!(vectorize_dataset_w2v(&[toks("a")], &NgramSpec::new([1], [2]).unwrap(), &t).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(mut idx in proptest::collection::vec(0usize..5, 0..12), seed in 0u64..1000) {
            let words = ["a", "b", "c", "zz", "a b"];
            let t = table();
            let terms: Vec<&str> = idx.iter().map(|&i| words[i]).collect();
            let v1 = doc_vector(&terms, &t);
            // deterministic shuffle
            let n = idx.len();
            for i in 0..n {
                let j = ((seed as usize).wrapping_mul(31).wrapping_add(i * 17)) % n;
                idx.swap(i, j);
            }
            let shuffled: Vec<&str> = idx.iter().map(|&i| words[i]).collect();
            let v2 = doc_vector(&shuffled, &t);
            for (a, b) in v1.iter().zip(&v2) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a.is_finite() && a.abs() <= 4.0);
            }
        }

        #[test]
        fn repeated_word_is_exact(k in 1usize..40) {
            let t = table();
            let terms = vec!["b"; k];
            prop_assert_eq!(doc_vector(&terms, &t), vec![3.0, 4.0, 0.0]);
        }
    }
}
