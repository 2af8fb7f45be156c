//! Discrete AdaBoost over axis-aligned decision stumps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVec};
use crate::svm::{label_of, signed_labels};

/// Errors closer than this count as ties; prefix sums drift by a few ulps.
const TIE_EPS: f64 = 1e-12;

/// `h(x) = polarity` if `x[feature] > threshold`, else `-polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    pub fn predict_value(&self, x: f64) -> f64 {
        if x > self.threshold {
            self.polarity as f64
        } else {
            -(self.polarity as f64)
        }
    }

    pub fn predict(&self, x: &SparseVec) -> f64 {
        self.predict_value(x.get(self.feature))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpFit {
    pub stump: Stump,
    pub error: f64,
}

/// Nonzero entries of each column, sorted by value.
struct Columns {
    n_rows: usize,
    cols: Vec<Vec<(f64, u32)>>,
}

impl Columns {
    fn build(x: &FeatureMatrix) -> Self {
        let mut cols = vec![Vec::new(); x.n_cols()];
        for (r, row) in x.rows().iter().enumerate() {
            for (c, v) in row.iter() {
                cols[c].push((v, r as u32));
            }
        }
        for c in &mut cols {
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Columns { n_rows: x.n_rows(), cols }
    }
}

fn exact_error(x: &FeatureMatrix, ys: &[f64], w: &[f64], stump: &Stump) -> f64 {
    x.rows()
        .iter()
        .zip(ys)
        .zip(w)
        .filter(|((r, &y), _)| stump.predict(r) != y)
        .map(|(_, &wi)| wi)
        .sum()
}

fn fit_indexed(x: &FeatureMatrix, cols: &Columns, ys: &[f64], w: &[f64]) -> StumpFit {
    let (tot_pos, tot_neg) = ys.iter().zip(w).fold((0.0, 0.0), |(p, n), (&y, &wi)| {
        if y > 0.0 {
            (p + wi, n)
        } else {
            (p, n + wi)
        }
    });
    let mut best: Option<(f64, Stump)> = None;
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for (f, col) in cols.cols.iter().enumerate() {
        // (value, positive weight, negative weight) per distinct value,
        // with the implicit zeros inserted in order
        groups.clear();
        let n_zero = cols.n_rows - col.len();
        let (mut zp, mut zn) = (tot_pos, tot_neg);
        for &(v, r) in col {
            let (p, n) = if ys[r as usize] > 0.0 { (w[r as usize], 0.0) } else { (0.0, w[r as usize]) };
            zp -= p;
            zn -= n;
            match groups.last_mut() {
                Some(g) if g.0 == v => {
                    g.1 += p;
                    g.2 += n;
                }
                _ => groups.push((v, p, n)),
            }
        }
        if n_zero > 0 {
            let at = groups.partition_point(|g| g.0 < 0.0);
            groups.insert(at, (0.0, zp.max(0.0), zn.max(0.0)));
        }
        let (mut lp, mut ln) = (0.0, 0.0);
        for g in 0..groups.len().saturating_sub(1) {
            lp += groups[g].1;
            ln += groups[g].2;
            let thr = (groups[g].0 + groups[g + 1].0) / 2.0;
            let rp = (tot_pos - lp).max(0.0);
            let rn = (tot_neg - ln).max(0.0);
            for (pol, err) in [(1i8, lp + rn), (-1i8, ln + rp)] {
                if best.map_or(true, |(e, _)| err < e - TIE_EPS) {
                    best = Some((err, Stump { feature: f, threshold: thr, polarity: pol }));
                }
            }
        }
    }
    let stump = match best {
        Some((_, s)) => s,
        None => Stump {
            feature: 0,
            threshold: f64::MIN,
            polarity: if tot_pos > tot_neg { 1 } else { -1 },
        },
    };
    StumpFit { stump, error: exact_error(x, ys, w, &stump) }
}

/// Exhaustive stump search. Thresholds are midpoints between sorted distinct
/// values; ties go to the lowest feature, then the lowest threshold, then
/// polarity +1.
pub fn stump_fit(x: &FeatureMatrix, y: &[u8], weights: &[f64]) -> Result<StumpFit> {
    if x.n_rows() != y.len() || y.len() != weights.len() {
        return Err(Error::invalid("rows, labels and weights differ in length"));
    }
    if x.n_rows() == 0 {
        return Err(Error::Empty("stump_fit on no rows".into()));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("sample weights must be finite and non-negative"));
    }
    let ys = y
        .iter()
        .map(|&l| match l {
            0 => Ok(-1.0),
            1 => Ok(1.0),
            _ => Err(Error::invalid(format!("label {l} is not 0 or 1"))),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(fit_indexed(x, &Columns::build(x), &ys, weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams { n_estimators: 50, learning_rate: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub n_features: usize,
    pub stumps: Vec<Stump>,
    pub stage_weights: Vec<f64>,
    /// Weighted error of each stump at the round it was fitted.
    pub stage_errors: Vec<f64>,
}

impl fmt::Display for AdaBoostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AdaBoost ({} stumps)", self.stumps.len())
    }
}

pub fn adaboost_train(x: &FeatureMatrix, y: &[u8], params: &AdaBoostParams) -> Result<AdaBoostModel> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if x.n_rows() < 2 {
        return Err(Error::invalid("AdaBoost needs at least 2 rows"));
    }
    if params.n_estimators == 0 || !(params.learning_rate > 0.0) {
        return Err(Error::invalid("n_estimators and learning_rate must be positive"));
    }
    let ys = signed_labels(y)?;
    let cols = Columns::build(x);
    let n = x.n_rows();
    let mut w = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        n_features: x.n_cols(),
        stumps: Vec::new(),
        stage_weights: Vec::new(),
        stage_errors: Vec::new(),
    };
    for _ in 0..params.n_estimators {
        let fit = fit_indexed(x, &cols, &ys, &w);
        let err = fit.error;
        let e = err.clamp(1e-10, 1.0 - 1e-10);
        let alpha = params.learning_rate * 0.5 * ((1.0 - e) / e).ln();
        if err >= 0.5 - 1e-12 {
            if model.stumps.is_empty() {
                model.stumps.push(fit.stump);
                model.stage_weights.push(alpha);
                model.stage_errors.push(err);
            }
            break;
        }
        model.stumps.push(fit.stump);
        model.stage_weights.push(alpha);
        model.stage_errors.push(err);
        if err == 0.0 {
            break;
        }
        let mut total = 0.0;
        for ((wi, row), &yi) in w.iter_mut().zip(x.rows()).zip(&ys) {
            *wi *= (-alpha * yi * fit.stump.predict(row)).exp();
            total += *wi;
        }
        w.iter_mut().for_each(|wi| *wi /= total);
    }
    Ok(model)
}

impl AdaBoostModel {
    pub fn score(&self, x: &SparseVec) -> f64 {
        self.stumps.iter().zip(&self.stage_weights).map(|(s, &a)| a * s.predict(x)).sum()
    }

    /// Ensemble score after only the first `rounds` stumps.
    pub fn staged_score(&self, x: &SparseVec, rounds: usize) -> f64 {
        self.stumps
            .iter()
            .zip(&self.stage_weights)
            .take(rounds)
            .map(|(s, &a)| a * s.predict(x))
            .sum()
    }

    pub fn score_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::WidthMismatch { expected: self.n_features, found: x.n_cols() });
        }
        Ok(x.rows().iter().map(|r| self.score(r)).collect())
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        Ok(self.score_matrix(x)?.into_iter().map(label_of).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn separable_1d() {
        let x = mat(&[&[1.0], &[2.0], &[5.0], &[6.0]]);
        let f = stump_fit(&x, &[0, 0, 1, 1], &[0.25; 4]).unwrap();
        assert_eq!(f.error, 0.0);
        assert_eq!(f.stump, Stump { feature: 0, threshold: 3.5, polarity: 1 });
    }

    #[test]
    fn symmetric_pair_half() {
        let x = mat(&[&[1.0], &[1.0]]);
        let f = stump_fit(&x, &[0, 1], &[0.5, 0.5]).unwrap();
        assert_eq!(f.error, 0.5);
        assert_eq!(f.stump.threshold, f64::MIN);
    }

    #[test]
    fn zeros_and_negatives_grouped() {
        let x = mat(&[&[-2.0], &[0.0], &[0.0], &[3.0]]);
        let f = stump_fit(&x, &[1, 0, 0, 1], &[0.25; 4]).unwrap();
        assert_eq!(f.error, 0.25);
        assert_eq!(f.stump, Stump { feature: 0, threshold: -1.0, polarity: -1 });
    }

    #[test]
    fn separable_single_round() {
        let x = mat(&[&[0.0, 1.0], &[0.0, 2.0], &[1.0, 2.0], &[1.0, 1.0]]);
        let y = [0, 0, 1, 1];
        let m = adaboost_train(&x, &y, &AdaBoostParams::default()).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.predict(&x).unwrap(), y.to_vec());
        assert!(m.stage_weights[0].is_finite() && m.stage_weights[0] > 0.0);
    }

    #[test]
    fn hopeless_keeps_one_stump() {
        let x = mat(&[&[1.0], &[1.0], &[2.0], &[2.0]]);
        let m = adaboost_train(&x, &[0, 1, 0, 1], &AdaBoostParams::default()).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.stage_weights[0], 0.0);
        // zero score ties to class 0
        assert_eq!(m.predict(&x).unwrap(), vec![0; 4]);
    }

    #[test]
    fn errors() {
        let x = mat(&[&[1.0], &[2.0]]);
        assert!(adaboost_train(&x, &[1, 1], &AdaBoostParams::default()).is_err());
        assert!(adaboost_train(&mat(&[&[1.0]]), &[1], &AdaBoostParams::default()).is_err());
        let m = adaboost_train(&x, &[0, 1], &AdaBoostParams::default()).unwrap();
        assert!(m.predict(&mat(&[&[1.0, 2.0]])).is_err());
    }
}
