//! Labeled tweet datasets and the canonical `id,text,label` CSV format.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tweet. `tokens` stays empty until preprocessing fills it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    pub label: Option<u8>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, label: Option<u8>) -> Self {
        Document {
            id: id.into(),
            raw_text: raw_text.into(),
            tokens: Vec::new(),
            label,
        }
    }
}

impl AsRef<[String]> for Document {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    documents: Vec<Document>,
    pub positive_label_name: String,
    counts: [usize; 2],
}

impl LabeledDataset {
    /// Validates labels and id uniqueness, then computes class counts.
    pub fn new(documents: Vec<Document>, positive_label_name: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        let mut counts = [0usize; 2];
        for (i, doc) in documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::Validation(format!("row {}: empty id", i + 1)));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Validation(format!(
                    "row {}: duplicate id `{}`",
                    i + 1,
                    doc.id
                )));
            }
            match doc.label {
                Some(l @ (0 | 1)) => counts[l as usize] += 1,
                Some(other) => {
                    return Err(Error::InvalidLabel {
                        row: i + 1,
                        value: other.to_string(),
                    })
                }
                None => {
                    return Err(Error::Validation(format!(
                        "row {}: document `{}` has no label",
                        i + 1,
                        doc.id
                    )))
                }
            }
        }
        Ok(LabeledDataset {
            documents,
            positive_label_name: positive_label_name.into(),
            counts,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn labels(&self) -> Vec<u8> {
        self.documents
            .iter()
            .map(|d| d.label.expect("labeled dataset"))
            .collect()
    }

    /// Replaces token lists while keeping ids, texts and labels.
    pub fn with_tokens(&self, tokens: Vec<Vec<String>>) -> LabeledDataset {
        assert_eq!(tokens.len(), self.documents.len());
        let documents = self
            .documents
            .iter()
            .zip(tokens)
            .map(|(d, t)| Document {
                tokens: t,
                ..d.clone()
            })
            .collect();
        LabeledDataset {
            documents,
            positive_label_name: self.positive_label_name.clone(),
            counts: self.counts,
        }
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }
}

/// Column mapping for [`load_dataset`].
#[derive(Debug, Clone)]
pub struct Schema {
    pub id_column: String,
    pub text_column: String,
    pub label_column: String,
    pub delimiter: u8,
    pub positive_label_name: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id_column: "id".into(),
            text_column: "text".into(),
            label_column: "label".into(),
            delimiter: b',',
            positive_label_name: "positive".into(),
        }
    }
}

impl Schema {
    pub fn tsv() -> Self {
        Schema {
            delimiter: b'\t',
            ..Schema::default()
        }
    }

    /// Picks TSV when the file name (ignoring a trailing `.gz`) ends in `.tsv`.
    pub fn for_path(path: &Path) -> Self {
        let name = path.to_string_lossy();
        let name = name.strip_suffix(".gz").unwrap_or(&name);
        if name.ends_with(".tsv") {
            Schema::tsv()
        } else {
            Schema::default()
        }
    }
}

/// Opens a file for reading, transparently gunzipping `*.gz`.
pub fn open_text(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(reader)))
    } else {
        Ok(Box::new(reader))
    }
}

fn read_rows(
    path: &Path,
    schema: &Schema,
    require_label: bool,
) -> Result<Vec<Document>> {
    let mut raw = String::new();
    open_text(path)?
        .read_to_string(&mut raw)
        .map_err(|e| Error::io(path, e))?;
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .from_reader(raw.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = find(&schema.id_column).ok_or_else(|| Error::MissingColumn(schema.id_column.clone()))?;
    let text_col =
        find(&schema.text_column).ok_or_else(|| Error::MissingColumn(schema.text_column.clone()))?;
    let label_col = match find(&schema.label_column) {
        Some(c) => Some(c),
        None if require_label => return Err(Error::MissingColumn(schema.label_column.clone())),
        None => None,
    };

    let mut docs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let get = |c: usize| record.get(c).unwrap_or("");
        let label = match label_col {
            Some(c) => {
                let value = get(c).trim();
                match value {
                    "0" => Some(0),
                    "1" => Some(1),
                    "" if !require_label => None,
                    other => {
                        return Err(Error::InvalidLabel {
                            row,
                            value: other.to_string(),
                        })
                    }
                }
            }
            None => None,
        };
        docs.push(Document::new(get(id_col).trim(), get(text_col), label));
    }
    Ok(docs)
}

/// Loads a labeled CSV/TSV dataset. Row numbers in errors are 1-based data
/// rows (the header is not counted).
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<LabeledDataset> {
    let docs = read_rows(path, schema, true)?;
    LabeledDataset::new(docs, schema.positive_label_name.clone())
}

/// Loads prediction inputs. The label column is optional; ids must still be
/// unique.
pub fn load_unlabeled(path: &Path, schema: &Schema) -> Result<Vec<Document>> {
    let docs = read_rows(path, schema, false)?;
    let mut seen = HashSet::new();
    for (i, d) in docs.iter().enumerate() {
        if d.id.is_empty() || !seen.insert(d.id.as_str()) {
            return Err(Error::Validation(format!(
                "row {}: empty or duplicate id `{}`",
                i + 1,
                d.id
            )));
        }
    }
    Ok(docs)
}

/// Writes the canonical `id,text,label` format.
pub fn write_dataset<W: Write>(ds: &LabeledDataset, out: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record(["id", "text", "label"])?;
    for d in ds.documents() {
        let label = d.label.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([d.id.as_str(), d.raw_text.as_str(), label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(ds, std::io::BufWriter::new(file), Schema::for_path(path).delimiter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub counts: [usize; 2],
    pub ratios: [f64; 2],
}

pub fn class_distribution(ds: &LabeledDataset) -> Result<ClassDistribution> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset has no documents".into()));
    }
    let counts = ds.counts();
    let n = (counts[0] + counts[1]) as f64;
    Ok(ClassDistribution {
        counts,
        ratios: [counts[0] as f64 / n, counts[1] as f64 / n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_rows() {
        let f = write_tmp("id,text,label\na,hello,0\nb,\"x, y\",1\n", ".csv");
        let ds = load_dataset(f.path(), &Schema::default()).unwrap();
        assert_eq!(ds.counts(), [1, 1]);
        assert_eq!(ds.documents()[1].raw_text, "x, y");
    }

    #[test]
    fn bad_label_cites_row() {
        let f = write_tmp("id,text,label\na,x,0\nb,y,1\nc,z,2\n", ".csv");
        match load_dataset(f.path(), &Schema::default()) {
            Err(Error::InvalidLabel { row, value }) => {
                assert_eq!(row, 3);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let f = write_tmp("id,body,label\na,x,0\n", ".csv");
        match load_dataset(f.path(), &Schema::default()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "text"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let f = write_tmp("id,text,label\na,x,0\na,y,1\n", ".csv");
        assert!(matches!(
            load_dataset(f.path(), &Schema::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn tsv_and_gzip() {
        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all("id\ttext\tlabel\n1\tا ب\t1\n".as_bytes()).unwrap();
        let bytes = gz.finish().unwrap();
        let mut f = tempfile::Builder::new().suffix(".tsv.gz").tempfile().unwrap();
        f.write_all(&bytes).unwrap();
        let ds = load_dataset(f.path(), &Schema::for_path(f.path())).unwrap();
        assert_eq!(ds.documents()[0].raw_text, "ا ب");
        assert_eq!(ds.counts(), [0, 1]);
    }

    #[test]
    fn task_a_shaped_counts() {
        let mut s = String::from("id,text,label\n");
        for i in 0..2400 {
            let label = if i < 1213 { 0 } else { 1 };
            s.push_str(&format!("d{i},tweet {i},{label}\n"));
        }
        let f = write_tmp(&s, ".csv");
        let ds = load_dataset(f.path(), &Schema::default()).unwrap();
        assert_eq!(ds.counts(), [1213, 1187]);
    }

    #[test]
    fn distribution_ratios() {
        let mk = |n0: usize, n1: usize| {
            let docs = (0..n0 + n1)
                .map(|i| Document::new(format!("{i}"), "t", Some((i >= n0) as u8)))
                .collect();
            LabeledDataset::new(docs, "pos").unwrap()
        };
        let d = class_distribution(&mk(4929, 1071)).unwrap();
        assert_eq!(d.counts, [4929, 1071]);
        assert!((d.ratios[0] - 0.8215).abs() < 1e-12);
        assert!((d.ratios[1] - 0.1785).abs() < 1e-12);
        assert_eq!(class_distribution(&mk(5, 5)).unwrap().ratios, [0.5, 0.5]);
        assert_eq!(class_distribution(&mk(3, 1)).unwrap().ratios, [0.75, 0.25]);
        assert!(class_distribution(&mk(0, 0)).is_err());
    }

    #[test]
    fn round_trip() {
        let docs = vec![
            Document::new("a", "کِتاب, \"quoted\"\nline", Some(1)),
            Document::new("b", "plain", Some(0)),
        ];
        let ds = LabeledDataset::new(docs, "abusive").unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf, b',').unwrap();
        let f = write_tmp(std::str::from_utf8(&buf).unwrap(), ".csv");
        let back = load_dataset(f.path(), &Schema { positive_label_name: "abusive".into(), ..Schema::default() }).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn unlabeled_empty_file() {
        let f = write_tmp("", ".csv");
        assert!(load_unlabeled(f.path(), &Schema::default()).unwrap().is_empty());
        let f = write_tmp("id,text\nx,hello\n", ".csv");
        let docs = load_unlabeled(f.path(), &Schema::default()).unwrap();
        assert_eq!(docs[0].label, None);
    }
}
