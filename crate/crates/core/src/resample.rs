//! SMOTE oversampling of the minority class.
//!
//! Synthetic rows interpolate between a minority row and one of its k
//! nearest minority neighbours. Parents are drawn uniformly with replacement
//! until both classes have the majority count. Sample `i` draws from its own
//! ChaCha stream (seed, stream `i`), so the output is identical whether the
//! samples are generated sequentially or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVec};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BalanceTarget {
    MatchMajority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
    pub target: BalanceTarget,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            seed: 0,
            target: BalanceTarget::MatchMajority,
        }
    }
}

/// Where a synthetic row came from, as indices into the input matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub parent: usize,
    pub neighbor: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
    /// One entry per appended row, in row order.
    pub origins: Vec<SyntheticOrigin>,
}

/// For each row, the `k` nearest other rows by Euclidean distance; ties go
/// to the lower index. `k` is clamped to `rows.len() - 1`.
pub fn knn_minority(rows: &[&SparseVec], k: usize) -> Result<Vec<Vec<usize>>> {
    knn_minority_with(rows, k, Execution::default())
}

pub fn knn_minority_with(rows: &[&SparseVec], k: usize, exec: Execution) -> Result<Vec<Vec<usize>>> {
    if rows.is_empty() {
        return Err(Error::Empty("no minority rows".into()));
    }
    if k == 0 {
        return Err(Error::invalid("k_neighbors must be >= 1"));
    }
    let k = k.min(rows.len() - 1);
    Ok(par::map_range(rows.len(), exec, |i| {
        let mut d: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, r)| (rows[i].dist_sq(r), j))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, j)| j).collect()
    }))
}

pub fn smote(x: &FeatureMatrix, y: &[u8], cfg: &SmoteConfig) -> Result<Resampled> {
    smote_with(x, y, cfg, Execution::default())
}

pub fn smote_with(x: &FeatureMatrix, y: &[u8], cfg: &SmoteConfig, exec: Execution) -> Result<Resampled> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if cfg.k_neighbors == 0 {
        return Err(Error::invalid("k_neighbors must be >= 1"));
    }
    let mut counts = [0usize; 2];
    for &l in y {
        if l > 1 {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        counts[l as usize] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::invalid("SMOTE needs both classes present"));
    }
    let unchanged = || Resampled {
        x: x.clone(),
        y: y.to_vec(),
        origins: Vec::new(),
    };
    if counts[0] == counts[1] {
        return Ok(unchanged());
    }
    let minority: u8 = if counts[0] < counts[1] { 0 } else { 1 };
    let n_min = counts[minority as usize];
    let n_new = counts[1 - minority as usize] - n_min;
    if n_min < 2 {
        return Err(Error::invalid("SMOTE needs at least 2 minority rows"));
    }

    let min_idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority).collect();
    let min_rows: Vec<&SparseVec> = min_idx.iter().map(|&i| x.row(i)).collect();
    let neighbors = knn_minority_with(&min_rows, cfg.k_neighbors, exec)?;

    let synth: Vec<(SparseVec, SyntheticOrigin)> = par::map_range(n_new, exec, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s as u64);
        let p = rng.gen_range(0..n_min);
        let nbrs = &neighbors[p];
        let q = nbrs[rng.gen_range(0..nbrs.len())];
        let gap: f64 = rng.gen_range(0.0..=1.0);
        let row = min_rows[p].lerp(min_rows[q], gap);
        (
            row,
            SyntheticOrigin {
                parent: min_idx[p],
                neighbor: min_idx[q],
                gap,
            },
        )
    });

    let mut out = x.clone();
    out.mode = x.mode;
    let mut labels = y.to_vec();
    let mut origins = Vec::with_capacity(n_new);
    for (row, origin) in synth {
        out.push_row(row);
        labels.push(minority);
        origins.push(origin);
    }
    Ok(Resampled {
        x: out,
        y: labels,
        origins,
    })
}
