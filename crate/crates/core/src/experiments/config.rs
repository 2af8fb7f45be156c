//! Pipeline configuration and its flat `key=value` text form.
//!
//! ```text
//! stopwords=yes lemmatize=yes features=bow word=1,2 char=none mode=freq classifier=SVM-POLY-1 seed=0
//! ```
//!
//! Every key is optional; missing keys take the defaults of
//! [`PipelineConfig::default`]. A line starting with `{` is read as JSON.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adaboost::AdaBoostParams;
use crate::bow::{format_orders, parse_orders, NgramSpec};
use crate::cnn::CnnConfig;
use crate::error::{Error, Result};
use crate::matrix::WeightMode;
use crate::preprocess::PreprocessConfig;
use crate::svm::{KernelKind, KernelSpec, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Bow,
    Word2vec,
    /// Padded token-index sequences for the CNN.
    Sequence,
}

impl FeatureSource {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSource::Bow => "bow",
            FeatureSource::Word2vec => "word2vec",
            FeatureSource::Sequence => "sequence",
        }
    }
}

impl FromStr for FeatureSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bow" => Ok(FeatureSource::Bow),
            "word2vec" | "w2v" => Ok(FeatureSource::Word2vec),
            "sequence" | "seq" => Ok(FeatureSource::Sequence),
            other => Err(Error::Validation(format!("unknown feature source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Svm(SvmParams),
    Adaboost(AdaBoostParams),
    Cnn(CnnConfig),
}

impl ClassifierSpec {
    pub fn svm(kernel: KernelSpec) -> Self {
        ClassifierSpec::Svm(SvmParams::with_kernel(kernel))
    }

    /// The five SVM variants plus AdaBoost.
    pub fn traditional() -> Vec<ClassifierSpec> {
        let mut v = Self::svms();
        v.push(ClassifierSpec::Adaboost(AdaBoostParams::default()));
        v
    }

    pub fn svms() -> Vec<ClassifierSpec> {
        vec![
            Self::svm(KernelSpec::poly(1)),
            Self::svm(KernelSpec::poly(2)),
            Self::svm(KernelSpec::poly(3)),
            Self::svm(KernelSpec::rbf()),
            Self::svm(KernelSpec::sigmoid()),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            ClassifierSpec::Svm(p) => p.kernel.model_name(),
            ClassifierSpec::Adaboost(_) => "AdaBoost".into(),
            ClassifierSpec::Cnn(_) => "CNN".into(),
        }
    }

    /// Parses a table model name such as `SVM-POLY-2`, `AdaBoost` or `CNN`.
    pub fn from_name(name: &str) -> Result<Self> {
        let up = name.trim().to_ascii_uppercase();
        Ok(match up.as_str() {
            "SVM-RBF" => Self::svm(KernelSpec::rbf()),
            "SVM-SIGMOID" => Self::svm(KernelSpec::sigmoid()),
            "ADABOOST" => ClassifierSpec::Adaboost(AdaBoostParams::default()),
            "CNN" => ClassifierSpec::Cnn(CnnConfig::default()),
            _ => match up.strip_prefix("SVM-POLY-").and_then(|d| d.parse::<u32>().ok()) {
                Some(d) => Self::svm(KernelSpec::poly(d)),
                None => {
                    return Err(Error::Validation(format!(
                        "unknown classifier `{name}` (expected SVM-POLY-1/2/3, SVM-RBF, SVM-SIGMOID, AdaBoost or CNN)"
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub remove_stopwords: bool,
    pub lemmatize: bool,
    pub features: FeatureSource,
    pub word_orders: BTreeSet<usize>,
    #[serde(default)]
    pub char_orders: BTreeSet<usize>,
    #[serde(default)]
    pub mode: Option<WeightMode>,
    #[serde(default = "one")]
    pub min_count: usize,
    #[serde(default)]
    pub k_best: Option<usize>,
    #[serde(default)]
    pub smote: bool,
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            remove_stopwords: false,
            lemmatize: false,
            features: FeatureSource::Bow,
            word_orders: BTreeSet::from([1]),
            char_orders: BTreeSet::new(),
            mode: Some(WeightMode::Freq),
            min_count: 1,
            k_best: None,
            smote: false,
            classifier: ClassifierSpec::svm(KernelSpec::poly(1)),
            seed: 0,
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "yes" | "true" | "1" | "y" => Ok(true),
        "no" | "false" | "0" | "n" => Ok(false),
        _ => Err(Error::Validation(format!("`{key}` expects yes/no, got `{v}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Validation(format!("`{key}` has invalid value `{v}`")))
}

impl PipelineConfig {
    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig { remove_stopwords: self.remove_stopwords, lemmatize: self.lemmatize }
    }

    pub fn ngrams(&self) -> Result<NgramSpec> {
        NgramSpec::new(self.word_orders.iter().copied(), self.char_orders.iter().copied())
            .map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        self.ngrams()?;
        if self.min_count == 0 {
            return bad("min_count must be >= 1".into());
        }
        if self.k_best == Some(0) {
            return bad("k_best must be >= 1".into());
        }
        match self.features {
            FeatureSource::Bow => {
                if self.mode.is_none() {
                    return bad("bag-of-words features need a weighting mode".into());
                }
            }
            FeatureSource::Word2vec | FeatureSource::Sequence => {
                let name = self.features.as_str();
                if !self.char_orders.is_empty() {
                    return bad(format!("{name} features cannot use character n-grams"));
                }
                if self.mode.is_some() {
                    return bad(format!("{name} features take no weighting mode"));
                }
                if self.k_best.is_some() {
                    return bad("k_best requires bag-of-words features".into());
                }
            }
        }
        match (&self.classifier, self.features) {
            (ClassifierSpec::Cnn(c), FeatureSource::Sequence) => {
                c.validate().map_err(|e| Error::Validation(e.to_string()))?;
                let channels: BTreeSet<usize> = c.channels.iter().copied().collect();
                if channels != self.word_orders {
                    return bad("CNN channels must equal the word n-gram orders".into());
                }
            }
            (ClassifierSpec::Cnn(_), _) => return bad("the CNN reads sequence features".into()),
            (_, FeatureSource::Sequence) => return bad("sequence features are only for the CNN".into()),
            (ClassifierSpec::Svm(p), _) => {
                p.kernel.validate().map_err(|e| Error::Validation(e.to_string()))?;
                if !(p.c > 0.0 && p.tol > 0.0) {
                    return bad("SVM C and tol must be positive".into());
                }
            }
            (ClassifierSpec::Adaboost(p), _) => {
                if p.n_estimators == 0 || !(p.learning_rate > 0.0) {
                    return bad("AdaBoost n_estimators and learning_rate must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Canonical flat form; also the tie-break key when sorting results.
    pub fn to_flat(&self) -> String {
        let mut parts = vec![
            format!("stopwords={}", yes_no(self.remove_stopwords)),
            format!("lemmatize={}", yes_no(self.lemmatize)),
            format!("features={}", self.features.as_str()),
            format!("word={}", format_orders(&self.word_orders)),
            format!("char={}", if self.char_orders.is_empty() { "none".into() } else { format_orders(&self.char_orders) }),
            format!("mode={}", self.mode.map_or("none", |m| m.as_str())),
            format!("min_count={}", self.min_count),
            format!("k_best={}", self.k_best.map_or("none".into(), |k| k.to_string())),
            format!("smote={}", yes_no(self.smote)),
            format!("classifier={}", self.classifier.name()),
        ];
        match &self.classifier {
            ClassifierSpec::Svm(p) => {
                parts.push(format!("c={}", p.c));
                parts.push(format!("gamma={}", p.kernel.gamma.map_or("scale".into(), |g| g.to_string())));
                parts.push(format!("coef0={}", p.kernel.coef0));
                parts.push(format!("tol={}", p.tol));
                parts.push(format!("max_iter={}", p.max_iter));
            }
            ClassifierSpec::Adaboost(p) => {
                parts.push(format!("n_estimators={}", p.n_estimators));
                parts.push(format!("learning_rate={}", p.learning_rate));
            }
            ClassifierSpec::Cnn(c) => {
                parts.push(format!("seq_len={}", c.seq_len));
                parts.push(format!("embed_dim={}", c.embed_dim));
                parts.push(format!("filters={}", c.filters));
                parts.push(format!("dense_units={}", c.dense_units));
                parts.push(format!("epochs={}", c.epochs));
                parts.push(format!("batch_size={}", c.batch_size));
                parts.push(format!("learning_rate={}", c.learning_rate));
            }
        }
        parts.push(format!("seed={}", self.seed));
        parts.join(" ")
    }

    /// Reads a flat `key=value` config (whitespace separated) or a JSON
    /// object. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.starts_with('{') {
            let cfg: PipelineConfig =
                serde_json::from_str(t).map_err(|e| Error::Validation(format!("bad JSON config: {e}")))?;
            cfg.validate()?;
            return Ok(cfg);
        }
        let pairs = t
            .split_whitespace()
            .filter(|w| !w.starts_with('#'))
            .map(|w| {
                w.split_once('=')
                    .ok_or_else(|| Error::Validation(format!("expected key=value, got `{w}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(Self::default(), pairs.iter().map(|&(k, v)| (k, v)))
    }

    /// Applies `key=value` overrides on top of `base`.
    pub fn from_pairs<'a>(base: Self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = base;
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        // classifier first so its parameters can be overridden afterwards
        for &(k, v) in &pairs {
            if k == "classifier" || k == "model" {
                cfg.classifier = ClassifierSpec::from_name(v)?;
                if matches!(cfg.classifier, ClassifierSpec::Cnn(_)) {
                    cfg.features = FeatureSource::Sequence;
                    cfg.mode = None;
                    cfg.word_orders = (1..=4).collect();
                }
            }
        }
        for &(k, v) in &pairs {
            match k {
                "classifier" | "model" => {}
                "stopwords" | "remove_stopwords" => cfg.remove_stopwords = parse_bool(k, v)?,
                "lemmatize" | "lemma" => cfg.lemmatize = parse_bool(k, v)?,
                "features" => {
                    cfg.features = v.parse()?;
                    if cfg.features != FeatureSource::Bow {
                        cfg.mode = None;
                    }
                }
                "word" => cfg.word_orders = parse_orders(v).map_err(|e| Error::Validation(e.to_string()))?,
                "char" => cfg.char_orders = parse_orders(v).map_err(|e| Error::Validation(e.to_string()))?,
                "mode" => {
                    cfg.mode = match v {
                        "none" => None,
                        m => Some(m.parse().map_err(|e: Error| Error::Validation(e.to_string()))?),
                    }
                }
                "min_count" => cfg.min_count = parse_num(k, v)?,
                "k_best" | "k" => cfg.k_best = if v == "none" { None } else { Some(parse_num(k, v)?) },
                "smote" => cfg.smote = parse_bool(k, v)?,
                "seed" => cfg.seed = parse_num(k, v)?,
                _ => apply_classifier_key(&mut cfg.classifier, k, v)?,
            }
        }
        if let ClassifierSpec::Cnn(c) = &mut cfg.classifier {
            c.channels = cfg.word_orders.iter().copied().collect();
            c.seed = cfg.seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_classifier_key(spec: &mut ClassifierSpec, k: &str, v: &str) -> Result<()> {
    let name = spec.name();
    let unknown = || Err(Error::Validation(format!("unknown config key `{k}` for classifier {name}")));
    match spec {
        ClassifierSpec::Svm(p) => match k {
            "c" | "C" => p.c = parse_num(k, v)?,
            "gamma" => p.kernel.gamma = if v == "scale" { None } else { Some(parse_num(k, v)?) },
            "coef0" => p.kernel.coef0 = parse_num(k, v)?,
            "degree" if p.kernel.kind == KernelKind::Poly => p.kernel.degree = parse_num(k, v)?,
            "tol" => p.tol = parse_num(k, v)?,
            "max_iter" => p.max_iter = parse_num(k, v)?,
            "cache_mb" => p.cache_mb = parse_num(k, v)?,
            _ => return unknown(),
        },
        ClassifierSpec::Adaboost(p) => match k {
            "n_estimators" => p.n_estimators = parse_num(k, v)?,
            "learning_rate" => p.learning_rate = parse_num(k, v)?,
            _ => return unknown(),
        },
        ClassifierSpec::Cnn(c) => match k {
            "seq_len" => c.seq_len = parse_num(k, v)?,
            "embed_dim" => c.embed_dim = parse_num(k, v)?,
            "filters" => c.filters = parse_num(k, v)?,
            "dense_units" => c.dense_units = parse_num(k, v)?,
            "epochs" => c.epochs = parse_num(k, v)?,
            "batch_size" => c.batch_size = parse_num(k, v)?,
            "learning_rate" => c.learning_rate = parse_num(k, v)?,
            _ => return unknown(),
        },
    }
    Ok(())
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_flat())
    }
}

impl FromStr for PipelineConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}
