use hatepipe::corpus::{Document, LabeledDataset};
use hatepipe::experiments::grid::{average_runs, average_runs_with};
use hatepipe::experiments::{
    emit_table, fit_pipeline, results_csv, run_config, run_grid, EvalResult, PipelineConfig, Preset, Resources,
    TableFormat,
};
use hatepipe::par::Execution;
use hatepipe::preprocess::{LemmaLexicon, StopwordList};
use hatepipe::synthdata::{generate, SynthSpec};

fn corpora(p_marker: f64) -> (SynthSpec, LabeledDataset, LabeledDataset) {
    let tr = SynthSpec { p_marker, noise_vocab: 120, id_prefix: "tr".into(), ..SynthSpec::new(150, 110, 21) };
    let te = SynthSpec { id_prefix: "te".into(), seed: 22, ..SynthSpec::new(80, 70, 22) };
    let te = SynthSpec { p_marker, noise_vocab: 120, ..te };
    (tr.clone(), generate(&tr).unwrap(), generate(&te).unwrap())
}

fn resources(spec: &SynthSpec) -> Resources {
    Resources::empty()
        .with_stopwords(StopwordList::from_words(spec.stopwords(10)))
        .with_lexicon(LemmaLexicon::from_pairs(spec.lemma_pairs(10)))
}

fn cfg(flat: &str) -> PipelineConfig {
    PipelineConfig::parse(flat).unwrap()
}

/// Everything but wall time.
fn same_result(a: &EvalResult, b: &EvalResult) -> bool {
    EvalResult { wall_time: 0.0, ..a.clone() } == EvalResult { wall_time: 0.0, ..b.clone() }
}

#[test]
fn marker_corpus_is_learned() {
    let (spec, train, test) = corpora(0.95);
    let r = run_config(&cfg("word=1 mode=freq classifier=SVM-POLY-1"), &train, &test, &resources(&spec)).unwrap();
    assert!(r.metrics.f1_positive >= 0.95, "{:?}", r.metrics);
    assert!(r.vector_size <= r.vocab_size);
}

#[test]
fn certain_markers_give_perfect_f1() {
    let (spec, train, test) = corpora(1.0);
    let res = resources(&spec);
    for flat in ["word=1 mode=binary classifier=SVM-POLY-1", "word=1 mode=count classifier=AdaBoost"] {
        let r = run_config(&cfg(flat), &train, &test, &res).unwrap();
        assert_eq!(r.metrics.f1_positive, 1.0, "{flat}");
        assert_eq!(r.metrics.f1_macro, 1.0, "{flat}");
    }
}

#[test]
fn same_config_same_result() {
    let (spec, train, test) = corpora(0.7);
    let res = resources(&spec);
    let c = cfg("stopwords=yes lemmatize=yes word=1,2 mode=tfidf k_best=50 smote=yes classifier=SVM-RBF seed=3");
    let a = run_config(&c, &train, &test, &res).unwrap();
    let b = run_config(&c, &train, &test, &res).unwrap();
    assert!(same_result(&a, &b));
}

#[test]
fn test_documents_never_reach_the_fit() {
    let (spec, train, test) = corpora(0.9);
    let res = resources(&spec);
    let c = cfg("word=1,2 char=2 mode=tfidf k_best=100 classifier=SVM-POLY-2");
    let model = fit_pipeline(&c, &train, &res).unwrap();
    let docs = test.documents();
    let (_, alone) = model.predict(docs, &res, Execution::Sequential).unwrap();
    // unseen words in extra documents change nothing for the originals
    let mut extended = docs.to_vec();
    for i in 0..30 {
        extended.push(Document::new(format!("new{i}"), format!("qqq{i} www{i} {}", docs[i].raw_text), None));
    }
    let (_, with_new) = model.predict(&extended, &res, Execution::Parallel).unwrap();
    assert_eq!(alone, with_new[..docs.len()]);

    // a test set full of novel words yields the same fitted sizes
    let mut noisy: Vec<Document> = docs.to_vec();
    for d in noisy.iter_mut() {
        d.raw_text.push_str(" zzunseen qqnovel");
    }
    let noisy = LabeledDataset::new(noisy, "1").unwrap();
    let a = run_config(&c, &train, &test, &res).unwrap();
    let b = run_config(&c, &train, &noisy, &res).unwrap();
    assert_eq!((a.vocab_size, a.vector_size), (b.vocab_size, b.vector_size));
    assert_eq!(a.vocab_size, model.vocab_size);
}

#[test]
fn grid_order_does_not_matter() {
    let (spec, train, test) = corpora(0.8);
    let res = resources(&spec);
    let configs: Vec<PipelineConfig> = Preset::A1.configs(0).into_iter().step_by(17).collect();
    let mut reversed = configs.clone();
    reversed.reverse();
    let a = run_grid(&configs, &train, &test, &res, 1);
    let b = run_grid(&reversed, &train, &test, &res, 2);
    for fmt in [TableFormat::Csv, TableFormat::Markdown] {
        assert_eq!(emit_table(&a, fmt, None), emit_table(&b, fmt, None));
    }
    assert_eq!(results_csv(&a), results_csv(&b));
    let f1: Vec<f64> = a.iter().filter_map(|r| r.result()).map(|r| r.metrics.f1_positive).collect();
    assert!(f1.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn metrics_follow_from_confusion_counts() {
    let (spec, train, test) = corpora(0.6);
    let res = resources(&spec);
    let configs: Vec<PipelineConfig> = Preset::A1.configs(0).into_iter().step_by(29).collect();
    for row in run_grid(&configs, &train, &test, &res, 1) {
        let r = row.result().unwrap();
        let c = r.confusion;
        assert_eq!(c.tp + c.fp + c.fn_ + c.tn, test.len());
        let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rc = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
        let p0 = if tn + fn_ > 0.0 { tn / (tn + fn_) } else { 0.0 };
        let r0 = if tn + fp > 0.0 { tn / (tn + fp) } else { 0.0 };
        let f0 = if p0 + r0 > 0.0 { 2.0 * p0 * r0 / (p0 + r0) } else { 0.0 };
        let m = r.metrics;
        assert!((m.precision - p).abs() < 1e-12 && (m.recall - rc).abs() < 1e-12);
        assert!((m.f1_positive - f1).abs() < 1e-12, "{} vs {f1}", m.f1_positive);
        assert!((m.f1_macro - (f0 + f1) / 2.0).abs() < 1e-12);
        assert!((m.accuracy - (tp + tn) / test.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn invalid_combinations_are_rejected() {
    for flat in ["features=w2v char=2", "features=w2v mode=tfidf", "features=w2v k_best=10", "word=9", "classifier=SVM-POLY-4"] {
        assert!(PipelineConfig::parse(flat).is_err(), "{flat}");
    }
}

#[test]
fn averaging_a_seed_free_config_has_zero_spread() {
    let (spec, train, test) = corpora(0.8);
    let stats = average_runs(&cfg("word=1 mode=freq classifier=SVM-POLY-1"), 5, &train, &test, &resources(&spec)).unwrap();
    assert_eq!(stats.runs.len(), 5);
    assert_eq!(stats.stdev, 0.0);
    assert_eq!(stats.min, stats.max);
    let s = average_runs_with(4, 10, |seed| Ok(seed as f64)).unwrap();
    assert_eq!((s.mean, s.min, s.max), (11.5, 10.0, 13.0));
    assert!((s.stdev - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
}

#[test]
fn missing_resources_fail_the_config() {
    let (_, train, test) = corpora(0.8);
    let err = run_config(&cfg("stopwords=yes"), &train, &test, &Resources::empty()).unwrap_err();
    assert!(err.to_string().contains("stopwords"), "{err}");
    let err = run_config(&cfg("features=w2v"), &train, &test, &Resources::empty()).unwrap_err();
    assert!(err.to_string().contains("embeddings"), "{err}");
}
