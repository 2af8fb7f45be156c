//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hatepipe::adaboost::Stump;
use hatepipe::cnn::{backward, loss, CnnModel};
use hatepipe::matrix::SparseVec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---- SVM dual: accelerated projected gradient ----

/// Projection onto {0 <= a <= c, y.a = 0} by bisection on the multiplier.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(&vi, &yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let h = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn dual_value(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let qa: f64 = (0..a.len()).map(|i| a[i] * q[i].iter().zip(a).map(|(x, y)| x * y).sum::<f64>()).sum();
    a.iter().sum::<f64>() - 0.5 * qa
}

/// Maximizes `sum(a) - a^T Q a / 2` over the SVM dual feasible set with
/// FISTA, restarting momentum whenever the objective drops. Returns the
/// best objective seen.
pub fn oracle_dual(q: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> f64 {
    let n = y.len();
    let lip: f64 = q.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| q[i].iter().zip(a).map(|(x, y)| x * y).sum::<f64>() - 1.0).collect() };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t: f64 = 1.0;
    let mut best = dual_value(q, &a);
    // true when z == a, i.e. the next step is a plain projected-gradient step
    let mut plain = true;
    for _ in 0..iters {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let next = project(&step, y, c);
        let val = dual_value(q, &next);
        let moved: f64 = next.iter().zip(&a).map(|(p, o)| (p - o).abs()).sum();
        if val < best || moved < 1e-13 {
            // a stalled plain step means a is a fixed point
            if plain {
                break;
            }
            t = 1.0;
            z = a.clone();
            plain = true;
            continue;
        }
        best = val;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&a).map(|(nx, o)| nx + (t - 1.0) / t_next * (nx - o)).collect();
        plain = t == 1.0;
        a = next;
        t = t_next;
    }
    best
}

/// Largest KKT violation `max_up(-y g) - min_low(-y g)` recomputed from `Q`.
pub fn kkt_gap(q: &[Vec<f64>], y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = y.len();
    let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * alpha[j]).sum::<f64>() - 1.0).collect();
    let up = (0..n).filter(|&t| (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0));
    let low = (0..n).filter(|&t| (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c));
    let m = up.map(|t| -y[t] * g[t]).fold(f64::NEG_INFINITY, f64::max);
    let mm = low.map(|t| -y[t] * g[t]).fold(f64::INFINITY, f64::min);
    m - mm
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<SparseVec>, Vec<f64>) {
    let rows: Vec<SparseVec> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(-1.5..1.5) }).collect();
            SparseVec::from_dense(&v)
        })
        .collect();
    let mut y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    (rows, y)
}

// ---- decision stumps: brute-force enumeration ----

pub fn brute_stump(x: &[Vec<f64>], y: &[u8], w: &[f64]) -> (Stump, f64) {
    let mut best: Option<(Stump, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let thr = (pair[0] + pair[1]) / 2.0;
            for pol in [1i8, -1] {
                let s = Stump { feature: f, threshold: thr, polarity: pol };
                let err: f64 = x
                    .iter()
                    .zip(y)
                    .zip(w)
                    .filter(|((r, &l), _)| (s.predict_value(r[f]) > 0.0) != (l == 1))
                    .map(|(_, &wi)| wi)
                    .sum();
                if best.map_or(true, |(_, e)| err < e - 1e-12) {
                    best = Some((s, err));
                }
            }
        }
    }
    best.unwrap()
}

// ---- CNN: central finite differences on every parameter ----

fn slots(m: &mut CnnModel) -> Vec<&mut f64> {
    let mut out: Vec<&mut f64> = Vec::new();
    for c in m.channels.iter_mut() {
        out.extend(c.embedding.iter_mut());
        out.extend(c.conv_w.iter_mut());
        out.extend(c.conv_b.iter_mut());
    }
    out.extend(m.dense_w.iter_mut());
    out.extend(m.dense_b.iter_mut());
    out.extend(m.out_w.iter_mut());
    out.push(&mut m.out_b);
    out
}

/// Worst relative error between `backward` and central differences of
/// `loss`, over every parameter. Gradients both below 1e-9 count as equal.
pub fn cnn_fd_worst(model: &CnnModel, seqs: &[Vec<u32>], labels: &[u8], eps: f64) -> f64 {
    let g = backward(model, seqs, labels).unwrap();
    let e = model.config.embed_dim;
    let mut analytic = Vec::new();
    for ci in 0..model.channels.len() {
        for r in 0..(model.vocab_size + 2) as u32 {
            analytic.extend(g.embedding_row(ci, r, e));
        }
        analytic.extend(&g.channels[ci].conv_w);
        analytic.extend(&g.channels[ci].conv_b);
    }
    analytic.extend(&g.dense_w);
    analytic.extend(&g.dense_b);
    analytic.extend(&g.out_w);
    analytic.push(g.out_b);
    assert_eq!(analytic.len(), model.n_params());

    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        *slots(&mut plus)[i] += eps;
        let mut minus = model.clone();
        *slots(&mut minus)[i] -= eps;
        let numeric = (loss(&plus, seqs, labels).unwrap() - loss(&minus, seqs, labels).unwrap()) / (2.0 * eps);
        let scale = a.abs().max(numeric.abs());
        let rel = if scale < 1e-9 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
        worst = worst.max(rel);
    }
    worst
}

/// Moves biases off the ReLU kink and spreads embeddings so that no
/// pre-activation sits within `eps` of zero.
pub fn cnn_fd_ready(model: &mut CnnModel, rng: &mut ChaCha8Rng) {
    let e = model.config.embed_dim;
    for c in model.channels.iter_mut() {
        c.conv_b.iter_mut().for_each(|b| *b = rng.gen_range(0.05..0.2) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        c.embedding.iter_mut().skip(e).for_each(|v| *v *= 10.0);
    }
    model.dense_b.iter_mut().for_each(|b| *b = rng.gen_range(0.05..0.2));
    model.out_b = 0.1;
}

/// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi).
pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}
