use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1_positive: f64,
    pub f1_macro: f64,
    pub accuracy: f64,
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!("{} truths but {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let mut c = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            (0, 0) => c.tn += 1,
            _ => return Err(Error::invalid(format!("non-binary label pair ({t}, {p})"))),
        }
    }
    Ok(c)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(c: &Confusion) -> Metrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1_positive = f1(precision, recall);
    // the negative class sees tn as its hits
    let f1_negative = f1(ratio(c.tn, c.tn + c.fn_), ratio(c.tn, c.tn + c.fp));
    Metrics {
        precision,
        recall,
        f1_positive,
        f1_macro: (f1_positive + f1_negative) / 2.0,
        accuracy: ratio(c.tp + c.tn, c.tp + c.fp + c.fn_ + c.tn),
    }
}
