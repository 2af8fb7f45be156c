//! Row-sparse design matrix shared by every feature source and classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted-index sparse vector. Explicit zeros are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(xs: &[f64]) -> Self {
        let mut v = SparseVec::default();
        for (i, &x) in xs.iter().enumerate() {
            if x != 0.0 {
                v.indices.push(i as u32);
                v.values.push(x);
            }
        }
        v
    }

    /// Builds from unsorted `(index, value)` pairs, summing duplicates.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut v = SparseVec::default();
        for (i, x) in pairs {
            if v.indices.last() == Some(&i) {
                *v.values.last_mut().unwrap() += x;
            } else {
                v.indices.push(i);
                v.values.push(x);
            }
        }
        v.prune();
        v
    }

    fn prune(&mut self) {
        if self.values.iter().all(|&x| x != 0.0) {
            return;
        }
        let (idx, val): (Vec<u32>, Vec<f64>) = self
            .indices
            .iter()
            .zip(&self.values)
            .filter(|(_, &x)| x != 0.0)
            .map(|(&i, &x)| (i, x))
            .unzip();
        self.indices = idx;
        self.values = val;
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &x)| (i as usize, x))
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.indices.binary_search(&(col as u32)) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cols];
        for (i, x) in self.iter() {
            out[i] = x;
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Squared Euclidean distance computed by index merge (no cancellation
    /// from the `|a|^2 + |b|^2 - 2ab` expansion).
    pub fn dist_sq(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        loop {
            let ia = self.indices.get(a);
            let ib = other.indices.get(b);
            match (ia, ib) {
                (None, None) => break,
                (Some(_), None) => {
                    acc += self.values[a] * self.values[a];
                    a += 1;
                }
                (None, Some(_)) => {
                    acc += other.values[b] * other.values[b];
                    b += 1;
                }
                (Some(&i), Some(&j)) if i < j => {
                    acc += self.values[a] * self.values[a];
                    a += 1;
                }
                (Some(&i), Some(&j)) if i > j => {
                    acc += other.values[b] * other.values[b];
                    b += 1;
                }
                _ => {
                    let d = self.values[a] - other.values[b];
                    acc += d * d;
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// `self + t * (other - self)`, evaluated per coordinate.
    pub fn lerp(&self, other: &SparseVec, t: f64) -> SparseVec {
        let mut pairs: Vec<(u32, f64)> = Vec::with_capacity(self.nnz() + other.nnz());
        let (mut a, mut b) = (0, 0);
        loop {
            let (idx, x, z) = match (self.indices.get(a), other.indices.get(b)) {
                (None, None) => break,
                (Some(&i), None) => {
                    a += 1;
                    (i, self.values[a - 1], 0.0)
                }
                (None, Some(&j)) => {
                    b += 1;
                    (j, 0.0, other.values[b - 1])
                }
                (Some(&i), Some(&j)) if i < j => {
                    a += 1;
                    (i, self.values[a - 1], 0.0)
                }
                (Some(&i), Some(&j)) if i > j => {
                    b += 1;
                    (j, 0.0, other.values[b - 1])
                }
                (Some(&i), Some(_)) => {
                    a += 1;
                    b += 1;
                    (i, self.values[a - 1], other.values[b - 1])
                }
            };
            let v = x + t * (z - x);
            if v != 0.0 {
                pairs.push((idx, v));
            }
        }
        let (indices, values) = pairs.into_iter().unzip();
        SparseVec { indices, values }
    }

    /// Keeps only `cols` (sorted ascending), renumbering them `0..cols.len()`.
    pub fn select(&self, cols: &[usize]) -> SparseVec {
        let mut out = SparseVec::default();
        for (new, &c) in cols.iter().enumerate() {
            let x = self.get(c);
            if x != 0.0 {
                out.indices.push(new as u32);
                out.values.push(x);
            }
        }
        out
    }
}

/// Term weighting applied by the bag-of-words vectorizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Count,
    Binary,
    Freq,
    Tfidf,
}

impl WeightMode {
    pub const ALL: [WeightMode; 4] = [WeightMode::Freq, WeightMode::Count, WeightMode::Binary, WeightMode::Tfidf];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::Count => "count",
            WeightMode::Binary => "binary",
            WeightMode::Freq => "freq",
            WeightMode::Tfidf => "tfidf",
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "count" => Ok(WeightMode::Count),
            "binary" => Ok(WeightMode::Binary),
            "freq" => Ok(WeightMode::Freq),
            "tfidf" => Ok(WeightMode::Tfidf),
            other => Err(Error::invalid(format!(
                "unknown weighting mode `{other}` (expected count, binary, freq or tfidf)"
            ))),
        }
    }
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_cols: usize,
    rows: Vec<SparseVec>,
    /// Weighting that produced the matrix; `None` for embedding or
    /// sequence features.
    pub mode: Option<WeightMode>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize, rows: Vec<SparseVec>, mode: Option<WeightMode>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if let Some(&last) = row.indices.last() {
                if last as usize >= n_cols {
                    return Err(Error::invalid(format!(
                        "row {r} has column {last} but matrix width is {n_cols}"
                    )));
                }
            }
            if row.values.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("row {r} has a non-finite value")));
            }
        }
        Ok(FeatureMatrix { n_cols, rows, mode })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("ragged dense rows"));
        }
        Self::new(n_cols, rows.iter().map(|r| SparseVec::from_dense(r)).collect(), None)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseVec {
        &self.rows[i]
    }

    pub fn into_rows(self) -> Vec<SparseVec> {
        self.rows
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_dense(self.n_cols)).collect()
    }

    pub fn push_row(&mut self, row: SparseVec) {
        debug_assert!(row.indices.last().map_or(true, |&i| (i as usize) < self.n_cols));
        self.rows.push(row);
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            n_cols: cols.len(),
            rows: self.rows.iter().map(|r| r.select(cols)).collect(),
            mode: self.mode,
        }
    }

    /// Population variance over every entry, zeros included.
    pub fn entry_variance(&self) -> f64 {
        let n = (self.n_rows() * self.n_cols) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let (s, s2) = self
            .rows
            .iter()
            .flat_map(|r| r.values.iter())
            .fold((0.0, 0.0), |(s, s2), &x| (s + x, s2 + x * x));
        let mean = s / n;
        (s2 / n - mean * mean).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_vec() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], 6)
    }

    proptest! {
        #[test]
        fn sparse_ops_match_dense(a in dense_vec(), b in dense_vec(), t in 0.0..1.0f64) {
            let sa = SparseVec::from_dense(&a);
            let sb = SparseVec::from_dense(&b);
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            prop_assert!((sa.dot(&sb) - dot).abs() < 1e-9);
            prop_assert!((sa.dist_sq(&sb) - d2).abs() < 1e-9);
            let l = sa.lerp(&sb, t).to_dense(6);
            for i in 0..6 {
                prop_assert!((l[i] - (a[i] + t * (b[i] - a[i]))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn select_and_pairs() {
        let v = SparseVec::from_pairs(vec![(3, 1.0), (0, 2.0), (3, 1.5), (5, 0.0)]);
        assert_eq!(v.indices, vec![0, 3]);
        assert_eq!(v.values, vec![2.0, 2.5]);
        let s = v.select(&[1, 3]);
        assert_eq!(s.to_dense(2), vec![0.0, 2.5]);
    }

    #[test]
    fn rejects_out_of_range() {
        let r = SparseVec::from_dense(&[0.0, 0.0, 1.0]);
        assert!(FeatureMatrix::new(2, vec![r], None).is_err());
    }

    #[test]
    fn mode_parse() {
        assert_eq!("TFIDF".parse::<WeightMode>().unwrap(), WeightMode::Tfidf);
        assert!("bm25".parse::<WeightMode>().is_err());
    }
}
