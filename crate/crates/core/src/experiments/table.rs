//! Ranked result tables in CSV or markdown, plus the full results CSV.

use std::fmt::Write as _;
use std::str::FromStr;

use super::config::FeatureSource;
use super::grid::{GridRow, RunStats};
use super::pipeline::EvalResult;
use crate::bow::format_orders;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(Error::Validation(format!("unknown table format `{other}`"))),
        }
    }
}

/// Four decimals, rounding half up on the shortest decimal form of `x`, so
/// `0.83175` prints as `0.8318`.
pub fn format_f1(x: f64) -> String {
    let s = format!("{x}");
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let mut digits: Vec<u8> = int.bytes().chain(frac.bytes().chain(std::iter::repeat(b'0')).take(4)).collect();
    if frac.as_bytes().get(4).is_some_and(|&d| d >= b'5') {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, b'1');
                break;
            }
            i -= 1;
            if digits[i] == b'9' {
                digits[i] = b'0';
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - 4;
    let d = String::from_utf8(digits).expect("ascii digits");
    format!("{}.{}", &d[..split], &d[split..])
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

struct Column {
    name: &'static str,
    cell: fn(&EvalResult) -> String,
    used: fn(&EvalResult) -> bool,
}

const OPTIONAL: [&str; 5] = ["Word ngrams", "Char ngrams", "Mode", "Top K", "SMOTE"];

fn always(_: &EvalResult) -> bool {
    true
}

fn columns() -> Vec<Column> {
    vec![
        Column { name: "STW Removed", cell: |r| yes_no(r.config.remove_stopwords).into(), used: always },
        Column { name: "Lemmatized", cell: |r| yes_no(r.config.lemmatize).into(), used: always },
        Column {
            name: "Word ngrams",
            cell: |r| format_orders(&r.config.word_orders),
            used: |r| r.config.features != FeatureSource::Sequence,
        },
        Column {
            name: "Char ngrams",
            cell: |r| {
                if r.config.char_orders.is_empty() {
                    "Not used".into()
                } else {
                    format_orders(&r.config.char_orders)
                }
            },
            used: |r| !r.config.char_orders.is_empty(),
        },
        Column { name: "Mode", cell: |r| r.config.mode.map_or(String::new(), |m| m.to_string()), used: |r| r.config.mode.is_some() },
        Column { name: "Model", cell: |r| r.config.classifier.name(), used: always },
        Column { name: "Vocab size", cell: |r| r.vocab_size.to_string(), used: always },
        Column { name: "Vector size", cell: |r| r.vector_size.to_string(), used: always },
        Column {
            name: "Top K",
            cell: |r| r.config.k_best.map_or(String::new(), |k| k.to_string()),
            used: |r| r.config.k_best.is_some(),
        },
        Column { name: "SMOTE", cell: |r| yes_no(r.config.smote).into(), used: |r| r.config.smote },
        Column { name: "F1", cell: |r| format_f1(r.metrics.f1_positive), used: always },
    ]
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(header: &[String], body: &[Vec<String>], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            for line in std::iter::once(header).chain(body.iter().map(Vec::as_slice)) {
                let cells: Vec<String> = line.iter().map(|c| csv_field(c)).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
        }
        TableFormat::Markdown => {
            let row = |cells: &[String]| format!("| {} |", cells.iter().map(|c| c.replace('|', "\\|")).collect::<Vec<_>>().join(" | "));
            writeln!(out, "{}", row(header)).unwrap();
            writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
            for b in body {
                writeln!(out, "{}", row(b)).unwrap();
            }
        }
    }
    out
}

/// Ranked table of the successful rows with F1 at or above `threshold`.
/// Columns no emitted row uses are dropped.
pub fn emit_table(rows: &[GridRow], format: TableFormat, threshold: Option<f64>) -> String {
    let kept: Vec<&EvalResult> = rows
        .iter()
        .filter_map(GridRow::result)
        .filter(|r| threshold.map_or(true, |t| r.metrics.f1_positive >= t))
        .collect();
    let cols: Vec<Column> = columns()
        .into_iter()
        .filter(|c| if kept.is_empty() { OPTIONAL.iter().all(|&o| o != c.name) } else { kept.iter().any(|r| (c.used)(r)) })
        .collect();
    let header: Vec<String> = cols.iter().map(|c| c.name.to_string()).collect();
    let body: Vec<Vec<String>> = kept.iter().map(|r| cols.iter().map(|c| (c.cell)(r)).collect()).collect();
    render(&header, &body, format)
}

/// Mean / max / min / sample stdev table for averaged runs, one column per
/// labelled series.
pub fn emit_stats_table(series: &[(String, RunStats)], format: TableFormat) -> String {
    let mut header = vec![String::new()];
    header.extend(series.iter().map(|(name, _)| name.clone()));
    let stat_rows: [(&str, fn(&RunStats) -> f64); 4] = [
        ("Average", |s| s.mean),
        ("Maximum", |s| s.max),
        ("Minimum", |s| s.min),
        ("Std. dev.", |s| s.stdev),
    ];
    let body: Vec<Vec<String>> = stat_rows
        .iter()
        .map(|(label, f)| {
            let mut row = vec![label.to_string()];
            row.extend(series.iter().map(|(_, s)| format_f1(f(s))));
            row
        })
        .collect();
    render(&header, &body, format)
}

/// Every row with all metrics, for machine consumption. Wall times are left
/// out so reruns produce identical bytes.
pub fn results_csv(rows: &[GridRow]) -> String {
    let header = [
        "rank", "status", "config", "model", "f1_positive", "f1_macro", "precision", "recall", "accuracy", "tp", "fp", "fn",
        "tn", "vocab_size", "vector_size", "converged", "error",
    ]
    .map(String::from);
    let mut body = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        body.push(match &r.outcome {
            Ok(e) => vec![
                (i + 1).to_string(),
                "ok".into(),
                r.key.clone(),
                e.config.classifier.name(),
                e.metrics.f1_positive.to_string(),
                e.metrics.f1_macro.to_string(),
                e.metrics.precision.to_string(),
                e.metrics.recall.to_string(),
                e.metrics.accuracy.to_string(),
                e.confusion.tp.to_string(),
                e.confusion.fp.to_string(),
                e.confusion.fn_.to_string(),
                e.confusion.tn.to_string(),
                e.vocab_size.to_string(),
                e.vector_size.to_string(),
                e.converged.to_string(),
                String::new(),
            ],
            Err(msg) => {
                let mut v = vec![(i + 1).to_string(), "failed".into(), r.key.clone()];
                v.extend(std::iter::repeat(String::new()).take(13));
                v.push(msg.clone());
                v
            }
        });
    }
    render(&header, &body, TableFormat::Csv)
}

/// Just the failed rows: `config,error`.
pub fn failures_csv(rows: &[GridRow]) -> String {
    let header = ["config".to_string(), "error".to_string()];
    let body: Vec<Vec<String>> =
        rows.iter().filter_map(|r| r.outcome.as_ref().err().map(|e| vec![r.key.clone(), e.clone()])).collect();
    render(&header, &body, TableFormat::Csv)
}
