//! One configuration end to end: preprocess, featurize (fitted on the
//! training split only), optionally select and oversample, train, predict.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ClassifierSpec, FeatureSource, PipelineConfig};
use super::metrics::{confusion, metrics, Confusion, Metrics};
use crate::adaboost::{adaboost_train, AdaBoostModel};
use crate::bow::{build_vocabulary, select_k_best, vectorize_with, NgramSpec, Vocabulary};
use crate::cnn::{encode_sequences, forward_with, train_cnn_with, CnnConfig, CnnModel};
use crate::corpus::{Document, LabeledDataset};
use crate::embeddings::{load_embeddings, vectorize_dataset_w2v_with, EmbeddingTable};
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, SparseVec, WeightMode};
use crate::par::Execution;
use crate::persist::Persist;
use crate::preprocess::{FoldingTable, LemmaLexicon, Preprocessor, StopwordList};
use crate::resample::{smote_with, SmoteConfig};
use crate::svm::{label_of, svm_train_with, SvmModel};

pub const STOPWORDS_FILE: &str = "stopwords.txt";
pub const LEMMAS_FILE: &str = "lemmas.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";

/// Where the external resources live. `None` means "not supplied".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResourcePaths {
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

impl ResourcePaths {
    /// Conventional file names inside a resource directory. Embeddings may
    /// be gzipped.
    pub fn from_dir(dir: &Path) -> Self {
        let emb = dir.join(EMBEDDINGS_FILE);
        let emb_gz = dir.join(format!("{EMBEDDINGS_FILE}.gz"));
        ResourcePaths {
            stopwords: Some(dir.join(STOPWORDS_FILE)),
            lemmas: Some(dir.join(LEMMAS_FILE)),
            embeddings: Some(if !emb.exists() && emb_gz.exists() { emb_gz } else { emb }),
        }
    }
}

/// Which resources a set of configurations touches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Needs {
    pub stopwords: bool,
    pub lemmas: bool,
    pub embeddings: bool,
}

impl Needs {
    pub fn of<'a>(configs: impl IntoIterator<Item = &'a PipelineConfig>) -> Self {
        let mut n = Needs::default();
        for c in configs {
            n.stopwords |= c.remove_stopwords;
            n.lemmas |= c.lemmatize;
            n.embeddings |= c.features == FeatureSource::Word2vec;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceFile {
    pub kind: String,
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Loaded resources shared (read-only) by every run of a grid.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub preprocessor: Preprocessor,
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub files: Vec<ResourceFile>,
    has_stopwords: bool,
    has_lemmas: bool,
}

impl Resources {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_stopwords(mut self, list: StopwordList) -> Self {
        self.preprocessor.stopwords = list;
        self.has_stopwords = true;
        self
    }

    pub fn with_lexicon(mut self, lex: LemmaLexicon) -> Self {
        self.preprocessor.lexicon = lex;
        self.has_lemmas = true;
        self
    }

    pub fn with_embeddings(mut self, table: EmbeddingTable) -> Self {
        self.embeddings = Some(Arc::new(table));
        self
    }

    /// Loads what `needs` asks for; anything requested but absent is a
    /// missing-resource error naming the expected path.
    pub fn load(paths: &ResourcePaths, needs: Needs) -> Result<Self> {
        fn existing(kind: &str, p: &Option<PathBuf>) -> Result<PathBuf> {
            match p {
                Some(p) if p.is_file() => Ok(p.clone()),
                other => Err(Error::MissingResource { kind: kind.into(), path: other.clone() }),
            }
        }
        let folding = FoldingTable::default();
        let mut r = Resources::empty();
        if needs.stopwords {
            let p = existing("stopwords", &paths.stopwords)?;
            r = r.with_stopwords(StopwordList::load(&p, &folding)?);
            r.files.push(ResourceFile { kind: "stopwords".into(), sha256: sha256_file(&p)?, path: p });
        }
        if needs.lemmas {
            let p = existing("lemmas", &paths.lemmas)?;
            r = r.with_lexicon(LemmaLexicon::load(&p, &folding)?);
            r.files.push(ResourceFile { kind: "lemmas".into(), sha256: sha256_file(&p)?, path: p });
        }
        if needs.embeddings {
            let p = existing("embeddings", &paths.embeddings)?;
            r = r.with_embeddings(load_embeddings(&p)?);
            r.files.push(ResourceFile { kind: "embeddings".into(), sha256: sha256_file(&p)?, path: p });
        }
        Ok(r)
    }

    pub fn check(&self, cfg: &PipelineConfig) -> Result<()> {
        let missing = |kind: &str| Err(Error::MissingResource { kind: kind.into(), path: None });
        if cfg.remove_stopwords && !self.has_stopwords {
            return missing("stopwords");
        }
        if cfg.lemmatize && !self.has_lemmas {
            return missing("lemmas");
        }
        if cfg.features == FeatureSource::Word2vec && self.embeddings.is_none() {
            return missing("embeddings");
        }
        Ok(())
    }

    fn table(&self) -> Result<&EmbeddingTable> {
        self.embeddings
            .as_deref()
            .ok_or_else(|| Error::MissingResource { kind: "embeddings".into(), path: None })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FittedFeatures {
    Bow { vocab: Vocabulary, mode: WeightMode, selected: Option<Vec<usize>> },
    Word2vec { spec: NgramSpec, dim: usize },
    Sequence { vocab: Vocabulary, seq_len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TrainedClassifier {
    Svm(SvmModel),
    Adaboost(AdaBoostModel),
    Cnn(CnnModel),
}

/// Featurized documents.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureData {
    Matrix(FeatureMatrix),
    Sequences(Vec<Vec<u32>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub features: FittedFeatures,
    pub classifier: TrainedClassifier,
    pub vocab_size: usize,
    pub vector_size: usize,
    pub resources: Vec<ResourceFile>,
}

impl Persist for TrainedPipeline {
    const KIND: &'static str = "pipeline";
}

fn cnn_config(cfg: &PipelineConfig, c: &CnnConfig) -> CnnConfig {
    CnnConfig { seed: cfg.seed, channels: cfg.word_orders.iter().copied().collect(), ..c.clone() }
}

/// Index sequences as float rows, so SMOTE can interpolate them; the
/// synthetic rows are rounded back to valid indices.
fn smote_sequences(seqs: &[Vec<u32>], y: &[u8], n_rows: usize, cfg: &SmoteConfig, exec: Execution) -> Result<(Vec<Vec<u32>>, Vec<u8>)> {
    let width = seqs.first().map_or(0, Vec::len);
    let rows = seqs
        .iter()
        .map(|s| SparseVec::from_dense(&s.iter().map(|&t| t as f64).collect::<Vec<_>>()))
        .collect();
    let x = FeatureMatrix::new(width, rows, None)?;
    let r = smote_with(&x, y, cfg, exec)?;
    let max = (n_rows - 1) as f64;
    let out = r
        .x
        .to_dense()
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.round().clamp(0.0, max) as u32).collect())
        .collect();
    Ok((out, r.y))
}

fn distinct_terms(tokens: &[Vec<String>], spec: &NgramSpec) -> usize {
    let mut seen: HashSet<String> = HashSet::new();
    for t in tokens {
        seen.extend(spec.terms(t));
    }
    seen.len()
}

pub fn fit_pipeline(cfg: &PipelineConfig, train: &LabeledDataset, res: &Resources) -> Result<TrainedPipeline> {
    fit_pipeline_with(cfg, train, res, Execution::default())
}

pub fn fit_pipeline_with(
    cfg: &PipelineConfig,
    train: &LabeledDataset,
    res: &Resources,
    exec: Execution,
) -> Result<TrainedPipeline> {
    cfg.validate()?;
    res.check(cfg)?;
    let tokens = res.preprocessor.token_lists(train.documents(), cfg.preprocess(), exec);
    let mut y = train.labels();
    let spec = cfg.ngrams()?;
    let smote_cfg = SmoteConfig { seed: cfg.seed, ..SmoteConfig::default() };

    let (features, mut data, vocab_size, vector_size) = match cfg.features {
        FeatureSource::Bow => {
            let mode = cfg.mode.expect("validated");
            let vocab = build_vocabulary(&tokens, &spec, cfg.min_count)?;
            let mut x = vectorize_with(&tokens, &vocab, mode, exec);
            let mut selected = None;
            if let Some(k) = cfg.k_best {
                let (cols, reduced) = select_k_best(&x, &y, k)?;
                selected = Some(cols);
                x = reduced;
            }
            let (vs, vc) = (vocab.raw_size(), vocab.len());
            (FittedFeatures::Bow { vocab, mode, selected }, FeatureData::Matrix(x), vs, vc)
        }
        FeatureSource::Word2vec => {
            let table = res.table()?;
            let x = vectorize_dataset_w2v_with(&tokens, &spec, table, exec)?;
            let raw = distinct_terms(&tokens, &spec);
            (FittedFeatures::Word2vec { spec, dim: table.dim() }, FeatureData::Matrix(x), raw, table.dim())
        }
        FeatureSource::Sequence => {
            let ClassifierSpec::Cnn(c) = &cfg.classifier else { unreachable!("validated") };
            let vocab = build_vocabulary(&tokens, &NgramSpec::words([1])?, cfg.min_count)?;
            let seqs = encode_sequences(&tokens, &vocab, c.seq_len);
            let v = vocab.len();
            (FittedFeatures::Sequence { vocab, seq_len: c.seq_len }, FeatureData::Sequences(seqs), v, c.seq_len)
        }
    };

    if cfg.smote {
        data = match data {
            FeatureData::Matrix(x) => {
                let r = smote_with(&x, &y, &smote_cfg, exec)?;
                y = r.y;
                FeatureData::Matrix(r.x)
            }
            FeatureData::Sequences(s) => {
                let FittedFeatures::Sequence { vocab, .. } = &features else { unreachable!() };
                let (s2, y2) = smote_sequences(&s, &y, vocab.len() + 2, &smote_cfg, exec)?;
                y = y2;
                FeatureData::Sequences(s2)
            }
        };
    }

    let classifier = match (&cfg.classifier, &data) {
        (ClassifierSpec::Svm(p), FeatureData::Matrix(x)) => TrainedClassifier::Svm(svm_train_with(x, &y, p, exec)?),
        (ClassifierSpec::Adaboost(p), FeatureData::Matrix(x)) => TrainedClassifier::Adaboost(adaboost_train(x, &y, p)?),
        (ClassifierSpec::Cnn(c), FeatureData::Sequences(s)) => {
            let FittedFeatures::Sequence { vocab, .. } = &features else { unreachable!() };
            TrainedClassifier::Cnn(train_cnn_with(&cnn_config(cfg, c), s, &y, vocab.len(), exec)?)
        }
        _ => unreachable!("validated feature/classifier pairing"),
    };
    Ok(TrainedPipeline {
        config: cfg.clone(),
        features,
        classifier,
        vocab_size,
        vector_size,
        resources: res.files.clone(),
    })
}

impl TrainedPipeline {
    pub fn transform(&self, docs: &[Document], res: &Resources, exec: Execution) -> Result<FeatureData> {
        let tokens = res.preprocessor.token_lists(docs, self.config.preprocess(), exec);
        Ok(match &self.features {
            FittedFeatures::Bow { vocab, mode, selected } => {
                let x = vectorize_with(&tokens, vocab, *mode, exec);
                FeatureData::Matrix(match selected {
                    Some(cols) => x.select_columns(cols),
                    None => x,
                })
            }
            FittedFeatures::Word2vec { spec, .. } => {
                FeatureData::Matrix(vectorize_dataset_w2v_with(&tokens, spec, res.table()?, exec)?)
            }
            FittedFeatures::Sequence { vocab, seq_len } => FeatureData::Sequences(encode_sequences(&tokens, vocab, *seq_len)),
        })
    }

    /// Decision value (SVM), weighted vote (AdaBoost) or probability (CNN).
    pub fn scores(&self, data: &FeatureData, exec: Execution) -> Result<Vec<f64>> {
        match (&self.classifier, data) {
            (TrainedClassifier::Svm(m), FeatureData::Matrix(x)) => m.decision_matrix(x),
            (TrainedClassifier::Adaboost(m), FeatureData::Matrix(x)) => m.score_matrix(x),
            (TrainedClassifier::Cnn(m), FeatureData::Sequences(s)) => forward_with(m, s, exec),
            _ => Err(Error::invalid("feature data does not match the classifier")),
        }
    }

    pub fn label_for(&self, score: f64) -> u8 {
        match self.classifier {
            TrainedClassifier::Cnn(_) => (score > 0.5) as u8,
            _ => label_of(score),
        }
    }

    pub fn predict(&self, docs: &[Document], res: &Resources, exec: Execution) -> Result<(Vec<u8>, Vec<f64>)> {
        if docs.is_empty() {
            return Ok((Vec::new(), Vec::new()));
        }
        res.check(&self.config)?;
        for f in &self.resources {
            if let Some(cur) = res.files.iter().find(|r| r.kind == f.kind) {
                if cur.sha256 != f.sha256 {
                    log::warn!("{} file {} differs from the one used in training", f.kind, cur.path.display());
                }
            }
        }
        let data = self.transform(docs, res, exec)?;
        let scores = self.scores(&data, exec)?;
        Ok((scores.iter().map(|&s| self.label_for(s)).collect(), scores))
    }

    pub fn converged(&self) -> bool {
        match &self.classifier {
            TrainedClassifier::Svm(m) => m.converged,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub config: PipelineConfig,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub vocab_size: usize,
    pub vector_size: usize,
    pub converged: bool,
    /// Seconds; excluded from result tables so they stay reproducible.
    pub wall_time: f64,
}

pub fn run_config(cfg: &PipelineConfig, train: &LabeledDataset, test: &LabeledDataset, res: &Resources) -> Result<EvalResult> {
    run_config_with(cfg, train, test, res, Execution::default())
}

pub fn run_config_with(
    cfg: &PipelineConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    res: &Resources,
    exec: Execution,
) -> Result<EvalResult> {
    let start = Instant::now();
    let model = fit_pipeline_with(cfg, train, res, exec)?;
    let (pred, _) = model.predict(test.documents(), res, exec)?;
    let c = confusion(&test.labels(), &pred)?;
    Ok(EvalResult {
        config: cfg.clone(),
        confusion: c,
        metrics: metrics(&c),
        vocab_size: model.vocab_size,
        vector_size: model.vector_size,
        converged: model.converged(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}
