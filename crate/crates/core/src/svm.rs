//! Soft-margin kernel SVM trained with sequential minimal optimization.
//!
//! The solver works on the dual
//!
//! ```text
//! max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! and picks the maximal violating pair each iteration (first-order working
//! set selection). The pair update and the bias rule follow LIBSVM's solver.
//! Kernel rows are computed on demand, data-parallel across training rows, and
//! kept in a bounded FIFO cache.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVec};
use crate::par::{self, Execution};

const TAU: f64 = 1e-12;
/// Multipliers at or below this are not support vectors.
pub const SV_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Sigmoid,
    Poly,
}

/// Kernel choice before `gamma` is resolved against training data.
/// `gamma: None` means "scale": `1 / (n_features * var(X))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default = "one")]
    pub degree: u32,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub coef0: f64,
}

fn one() -> u32 {
    1
}

impl KernelSpec {
    pub fn rbf() -> Self {
        KernelSpec { kind: KernelKind::Rbf, degree: 1, gamma: None, coef0: 0.0 }
    }

    pub fn sigmoid() -> Self {
        KernelSpec { kind: KernelKind::Sigmoid, ..Self::rbf() }
    }

    pub fn poly(degree: u32) -> Self {
        KernelSpec { kind: KernelKind::Poly, degree, ..Self::rbf() }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        KernelSpec { gamma: Some(gamma), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Poly && !(1..=3).contains(&self.degree) {
            return Err(Error::invalid(format!("polynomial degree {} outside 1..=3", self.degree)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("gamma must be positive, got {g}")));
            }
        }
        if !self.coef0.is_finite() {
            return Err(Error::invalid("coef0 must be finite"));
        }
        Ok(())
    }

    /// Fixes `gamma`, computing the "scale" default from `x` when unset.
    pub fn resolve(&self, x: &FeatureMatrix) -> Result<Kernel> {
        self.validate()?;
        let gamma = match self.gamma {
            Some(g) => g,
            None => {
                let v = x.entry_variance() * x.n_cols() as f64;
                if v > 0.0 {
                    1.0 / v
                } else {
                    1.0
                }
            }
        };
        Ok(Kernel { kind: self.kind, degree: self.degree, gamma, coef0: self.coef0 })
    }

    /// Display name used in result tables, e.g. `SVM-POLY-2`.
    pub fn model_name(&self) -> String {
        match self.kind {
            KernelKind::Rbf => "SVM-RBF".into(),
            KernelKind::Sigmoid => "SVM-SIGMOID".into(),
            KernelKind::Poly => format!("SVM-POLY-{}", self.degree),
        }
    }
}

/// A kernel with every parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
}

impl Kernel {
    pub fn eval(&self, x: &SparseVec, z: &SparseVec) -> f64 {
        match self.kind {
            KernelKind::Rbf => (-self.gamma * x.dist_sq(z)).exp(),
            KernelKind::Sigmoid => (self.gamma * x.dot(z) + self.coef0).tanh(),
            KernelKind::Poly => (self.gamma * x.dot(z) + self.coef0).powi(self.degree as i32),
        }
    }

    /// `eval` with `x` already scattered into a dense buffer: O(nnz(z)).
    /// Dot products match `eval` bit for bit; RBF goes through the norm
    /// expansion instead of the index merge.
    fn eval_scattered(&self, x: &[f64], x_norm: f64, z: &SparseVec, z_norm: f64) -> f64 {
        let dot: f64 = z.iter().map(|(k, v)| x[k] * v).sum();
        match self.kind {
            KernelKind::Rbf => (-self.gamma * (x_norm + z_norm - 2.0 * dot).max(0.0)).exp(),
            KernelKind::Sigmoid => (self.gamma * dot + self.coef0).tanh(),
            KernelKind::Poly => (self.gamma * dot + self.coef0).powi(self.degree as i32),
        }
    }
}

fn scatter(dense: &mut [f64], x: &SparseVec) {
    for (k, v) in x.iter() {
        dense[k] = v;
    }
}

fn unscatter(dense: &mut [f64], x: &SparseVec) {
    for (k, _) in x.iter() {
        dense[k] = 0.0;
    }
}

/// Dense kernel evaluation with a dimension check.
pub fn kernel_eval(kernel: &Kernel, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", x.len(), z.len())));
    }
    Ok(kernel.eval(&SparseVec::from_dense(x), &SparseVec::from_dense(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: KernelSpec,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Kernel row cache budget in MiB.
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: KernelSpec::rbf(),
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
            cache_mb: 256,
        }
    }
}

impl SvmParams {
    pub fn with_kernel(kernel: KernelSpec) -> Self {
        SvmParams { kernel, ..Self::default() }
    }
}

struct KernelRows<'a> {
    rows: &'a [SparseVec],
    kernel: Kernel,
    cache: Vec<Option<Arc<[f64]>>>,
    fifo: VecDeque<usize>,
    capacity: usize,
    exec: Execution,
    norms: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> KernelRows<'a> {
    fn new(rows: &'a [SparseVec], kernel: Kernel, cache_mb: usize, exec: Execution) -> Self {
        let n = rows.len().max(1);
        let capacity = ((cache_mb << 20) / (8 * n)).max(2);
        let width = rows.iter().filter_map(|r| r.indices.last()).max().map_or(0, |&m| m as usize + 1);
        KernelRows {
            rows,
            kernel,
            cache: vec![None; rows.len()],
            fifo: VecDeque::new(),
            capacity,
            exec,
            norms: rows.iter().map(SparseVec::norm_sq).collect(),
            scratch: vec![0.0; width],
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        if let Some(r) = &self.cache[i] {
            return r.clone();
        }
        let mut out = vec![0.0; self.rows.len()];
        let (rows, kernel) = (self.rows, self.kernel);
        let mut dense = std::mem::take(&mut self.scratch);
        scatter(&mut dense, &rows[i]);
        let (norms, ni) = (&self.norms, self.norms[i]);
        par::fill(&mut out, self.exec, |t| kernel.eval_scattered(&dense, ni, &rows[t], norms[t]));
        unscatter(&mut dense, &rows[i]);
        self.scratch = dense;
        let row: Arc<[f64]> = out.into();
        if self.fifo.len() >= self.capacity {
            if let Some(old) = self.fifo.pop_front() {
                self.cache[old] = None;
            }
        }
        self.fifo.push_back(i);
        self.cache[i] = Some(row.clone());
        row
    }
}

/// Raw solver output over every training row.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub gap: f64,
}

/// Dual objective `sum(a) - 1/2 a^T Q a` for labels in {-1, +1}.
pub fn dual_objective(alpha: &[f64], y: &[f64], x: &[SparseVec], kernel: &Kernel) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alpha[j] != 0.0 {
                quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel.eval(&x[i], &x[j]);
            }
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Solves the dual for labels `y` in {-1, +1}.
pub fn smo_solve(
    x: &[SparseVec],
    y: &[f64],
    kernel: &Kernel,
    params: &SvmParams,
    exec: Execution,
) -> DualSolution {
    let n = x.len();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = par::map(x, exec, |xi| kernel.eval(xi, xi));
    let mut rows = KernelRows::new(x, *kernel, params.cache_mb, exec);

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    while iterations < params.max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        gap = g_max - g_min;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let ki = rows.row(i);
        let kj = rows.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = ki[j];
        let mut quad = diag[i] + diag[j] - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (yi, yj) = (y[i], y[j]);
        for t in 0..n {
            grad[t] += y[t] * (yi * ki[t] * di + yj * kj[t] * dj);
        }
    }
    if !converged {
        log::warn!("SMO stopped at max_iter={} with KKT gap {gap:.3e}", params.max_iter);
    }

    // bias: mean over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    DualSolution { alpha, bias: -rho, iterations, converged, gap }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel_spec: KernelSpec,
    pub kernel: Kernel,
    pub c: f64,
    pub n_features: usize,
    pub support_vectors: Vec<SparseVec>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl fmt::Display for SvmModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (C={}, gamma={:.6}, {} support vectors)",
            self.kernel_spec.model_name(),
            self.c,
            self.kernel.gamma,
            self.support_vectors.len()
        )
    }
}

pub(crate) fn signed_labels(y: &[u8]) -> Result<Vec<f64>> {
    let mut seen = [false; 2];
    let out = y
        .iter()
        .map(|&l| match l {
            0 | 1 => {
                seen[l as usize] = true;
                Ok(if l == 1 { 1.0 } else { -1.0 })
            }
            _ => Err(Error::invalid(format!("label {l} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if !(seen[0] && seen[1]) {
        return Err(Error::invalid("training labels contain a single class"));
    }
    Ok(out)
}

pub fn svm_train(x: &FeatureMatrix, y: &[u8], params: &SvmParams) -> Result<SvmModel> {
    svm_train_with(x, y, params, Execution::default())
}

pub fn svm_train_with(x: &FeatureMatrix, y: &[u8], params: &SvmParams, exec: Execution) -> Result<SvmModel> {
    if x.n_rows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if x.n_rows() < 2 {
        return Err(Error::invalid("SVM training needs at least 2 rows"));
    }
    if !(params.c > 0.0) || !(params.tol > 0.0) {
        return Err(Error::invalid("C and tol must be positive"));
    }
    let ys = signed_labels(y)?;
    let kernel = params.kernel.resolve(x)?;
    let sol = smo_solve(x.rows(), &ys, &kernel, params, exec);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (t, &a) in sol.alpha.iter().enumerate() {
        if a > SV_EPS {
            support_vectors.push(x.row(t).clone());
            dual_coefs.push(a * ys[t]);
        }
    }
    Ok(SvmModel {
        kernel_spec: params.kernel,
        kernel,
        c: params.c,
        n_features: x.n_cols(),
        support_vectors,
        dual_coefs,
        bias: sol.bias,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

impl SvmModel {
    /// `f(x) = sum_i a_i y_i K(x_i, x) + b`
    pub fn decision(&self, x: &SparseVec) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn decision_dense(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::WidthMismatch { expected: self.n_features, found: x.len() });
        }
        Ok(self.decision(&SparseVec::from_dense(x)))
    }

    pub fn predict_dense(&self, x: &[f64]) -> Result<u8> {
        Ok(label_of(self.decision_dense(x)?))
    }

    pub fn decision_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::WidthMismatch { expected: self.n_features, found: x.n_cols() });
        }
        let norms: Vec<f64> = self.support_vectors.iter().map(SparseVec::norm_sq).collect();
        Ok(par::map(x.rows(), Execution::default(), |r| {
            let mut dense = vec![0.0; self.n_features];
            scatter(&mut dense, r);
            let nr = r.norm_sq();
            self.support_vectors
                .iter()
                .zip(&self.dual_coefs)
                .zip(&norms)
                .map(|((sv, &c), &ns)| c * self.kernel.eval_scattered(&dense, nr, sv, ns))
                .sum::<f64>()
                + self.bias
        }))
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        Ok(self.decision_matrix(x)?.into_iter().map(label_of).collect())
    }
}

/// Positive decision values are class 1; exactly zero is class 0.
pub fn label_of(decision: f64) -> u8 {
    (decision > 0.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn kernel_values() {
        let rbf = Kernel { kind: KernelKind::Rbf, degree: 1, gamma: 0.7, coef0: 0.0 };
        assert_eq!(kernel_eval(&rbf, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        let lin = Kernel { kind: KernelKind::Poly, degree: 1, gamma: 1.0, coef0: 0.0 };
        assert_eq!(kernel_eval(&lin, &[1.0, 2.0], &[3.0, -4.0]).unwrap(), -5.0);
        let sig = Kernel { kind: KernelKind::Sigmoid, degree: 1, gamma: 2.0, coef0: 0.0 };
        assert_eq!(kernel_eval(&sig, &[0.0, 0.0], &[3.0, 1.0]).unwrap(), 0.0);
        let p3 = Kernel { kind: KernelKind::Poly, degree: 3, gamma: 0.5, coef0: 1.0 };
        assert!((kernel_eval(&p3, &[1.0, 1.0], &[2.0, 0.0]).unwrap() - 8.0).abs() < 1e-12);
        assert!(kernel_eval(&rbf, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::poly(4).validate().is_err());
        assert!(KernelSpec::rbf().with_gamma(-1.0).validate().is_err());
        assert_eq!(KernelSpec::poly(2).model_name(), "SVM-POLY-2");
    }

    #[test]
    fn gamma_scale() {
        let x = mat(&[&[0.0, 2.0], &[2.0, 0.0]]);
        // entries {0,2,2,0}: var = 1, n_features = 2
        let k = KernelSpec::rbf().resolve(&x).unwrap();
        assert!((k.gamma - 0.5).abs() < 1e-15);
        let z = mat(&[&[0.0], &[0.0]]);
        assert_eq!(KernelSpec::rbf().resolve(&z).unwrap().gamma, 1.0);
    }

    #[test]
    fn two_point_analytic() {
        // a1 = a2 = 1/2, b = 0 for the linear kernel with gamma 1
        let x = mat(&[&[-1.0], &[1.0]]);
        let params = SvmParams { c: 1e6, ..SvmParams::with_kernel(KernelSpec::poly(1).with_gamma(1.0)) };
        let m = svm_train(&x, &[0, 1], &params).unwrap();
        assert!(m.decision_dense(&[0.0]).unwrap().abs() < 1e-6);
        assert!(m.decision_dense(&[1.0]).unwrap() > 0.0);
        assert!(m.decision_dense(&[-1.0]).unwrap() < 0.0);
        let mut coefs = m.dual_coefs.clone();
        coefs.sort_by(f64::total_cmp);
        assert!((coefs[0] + 0.5).abs() < 1e-9 && (coefs[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn xor_rbf() {
        let x = mat(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let y = [0, 0, 1, 1];
        let params = SvmParams { c: 10.0, ..SvmParams::with_kernel(KernelSpec::rbf().with_gamma(1.0)) };
        let m = svm_train(&x, &y, &params).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y.to_vec());
        assert!(m.converged);
    }

    #[test]
    fn far_point_decays_to_bias() {
        let x = mat(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let params = SvmParams::with_kernel(KernelSpec::rbf().with_gamma(1.0));
        let m = svm_train(&x, &[0, 0, 1, 1], &params).unwrap();
        assert!((m.decision_dense(&[100.0, 100.0]).unwrap() - m.bias).abs() < 1e-12);
    }

    #[test]
    fn margin_vectors_on_margin() {
        let x = mat(&[&[0.0, 0.0], &[0.2, 0.1], &[2.0, 2.0], &[2.2, 1.9], &[1.0, 1.2], &[1.1, 0.8]]);
        let y = [0, 0, 1, 1, 0, 1];
        let params = SvmParams { c: 5.0, ..SvmParams::with_kernel(KernelSpec::rbf().with_gamma(0.5)) };
        let m = svm_train(&x, &y, &params).unwrap();
        for (sv, &coef) in m.support_vectors.iter().zip(&m.dual_coefs) {
            let a = coef.abs();
            assert!(a > 0.0 && a <= m.c + 1e-12);
            if a < m.c - 1e-9 {
                let yi = coef.signum();
                assert!((m.decision(sv) - yi).abs() <= params.tol + 1e-9);
            }
        }
        let s: f64 = m.dual_coefs.iter().sum();
        assert!(s.abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let x = mat(&[&[0.0], &[1.0]]);
        assert!(svm_train(&x, &[1, 1], &SvmParams::default()).is_err());
        assert!(svm_train(&mat(&[&[0.0]]), &[1], &SvmParams::default()).is_err());
        let m = svm_train(&x, &[0, 1], &SvmParams::default()).unwrap();
        assert!(matches!(m.decision_dense(&[0.0, 1.0]), Err(Error::WidthMismatch { expected: 1, found: 2 })));
        assert_eq!(label_of(0.0), 0);
    }

    #[test]
    fn tiny_cache_same_result() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<u8> = (0..30).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let x = FeatureMatrix::from_dense(&rows).unwrap();
        let base = SvmParams::with_kernel(KernelSpec::rbf().with_gamma(2.0));
        let a = svm_train_with(&x, &y, &base, Execution::Sequential).unwrap();
        let b = svm_train_with(&x, &y, &SvmParams { cache_mb: 0, ..base }, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
