//! `hatepipe` command line. Exit codes: 0 success, 1 bad input or
//! configuration, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{load_dataset, load_unlabeled, save_dataset, Document, LabeledDataset, Schema};
use crate::error::{Error, Result};
use crate::experiments::grid::timed;
use crate::experiments::pipeline::{sha256_file, EMBEDDINGS_FILE, LEMMAS_FILE, STOPWORDS_FILE};
use crate::experiments::{
    confusion, emit_stats_table, emit_table, failures_csv, fit_pipeline_with, metrics, results_csv, run_grid,
    GridRow, Manifest, Needs, PipelineConfig, Preset, ResourceFile, ResourcePaths, Resources, RunStats,
    TableFormat, TrainedPipeline, AVERAGED_RUNS,
};
use crate::par::Execution;
use crate::persist::{load_model, save_model};
use crate::preprocess::PreprocessConfig;
use crate::synthdata::{embedding_table, generate, Script, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "hatepipe", version, about = "Abusive and threatening tweet classification pipelines")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed for every stochastic step; overrides seeds in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Directory holding stopwords.txt, lemmas.tsv and embeddings.txt.
    #[arg(long, global = true, env = "HATEPIPE_RESOURCES")]
    resources: Option<PathBuf>,
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    #[arg(long, global = true)]
    lemmas: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Log progress to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize, tokenize and optionally filter a dataset; writes id,text,label.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        remove_stopwords: bool,
        #[arg(long)]
        lemmatize: bool,
    },
    /// Fit one pipeline and save it.
    Train {
        #[arg(long)]
        train: PathBuf,
        /// Config file (flat key=value or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Inline override, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Score a dataset with a saved model; writes id,label,score.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Metrics of a saved model on a labeled dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Also write the metrics as JSON.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Run a preset or a grid file and write ranked tables.
    Sweep {
        #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
        preset: Option<String>,
        /// One config per line; blank and `#` lines skipped.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Minimum F1 for table rows; defaults to the preset's.
        #[arg(long)]
        threshold: Option<f64>,
        /// Runs per averaged (CNN) preset.
        #[arg(long, default_value_t = AVERAGED_RUNS)]
        runs: usize,
    },
    /// List the presets, the resources each needs and their published targets.
    Reproduce {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Write a synthetic corpus with matching resource files.
    Synth {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ScriptArg::Latin)]
        script: ScriptArg,
        #[arg(long, default_value_t = 0.95)]
        p_marker: f64,
        #[arg(long, default_value_t = 0.0)]
        p_cross: f64,
        #[arg(long, default_value_t = 16)]
        embedding_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        signal: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Task {
    A,
    B,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScriptArg {
    Latin,
    Urdu,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if g.jobs == 0 {
        return Err(Error::Validation("--jobs must be >= 1".into()));
    }
    match &cli.command {
        Command::Preprocess { input, output, remove_stopwords, lemmatize } => {
            let cfg = PreprocessConfig { remove_stopwords: *remove_stopwords, lemmatize: *lemmatize };
            cmd_preprocess(g, input, output, cfg)
        }
        Command::Train { train, config, set, model_out } => cmd_train(g, train, config.as_deref(), set, model_out),
        Command::Predict { model, input, output } => cmd_predict(g, model, input, output),
        Command::Evaluate { model, test, metrics_out } => cmd_evaluate(g, model, test, metrics_out.as_deref()),
        Command::Sweep { preset, grid, train, test, out, threshold, runs } => {
            let source = match (preset, grid) {
                (Some(p), _) => Source::Preset(p.parse()?),
                (None, Some(path)) => Source::Grid(path.clone()),
                (None, None) => unreachable!("clap requires one"),
            };
            cmd_sweep(g, &source, train, test, out, *threshold, *runs)
        }
        Command::Reproduce { preset } => cmd_reproduce(g, preset.as_deref()),
        Command::Synth { task, out, script, p_marker, p_cross, embedding_dim, signal } => {
            let script = match script {
                ScriptArg::Latin => Script::Latin,
                ScriptArg::Urdu => Script::Urdu,
            };
            cmd_synth(g, *task, out, script, *p_marker, *p_cross, *embedding_dim, *signal)
        }
    }
}

fn resource_paths(g: &Global) -> ResourcePaths {
    let dir = g.resources.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut p = ResourcePaths::from_dir(&dir);
    if let Some(s) = &g.stopwords {
        p.stopwords = Some(s.clone());
    }
    if let Some(s) = &g.lemmas {
        p.lemmas = Some(s.clone());
    }
    if let Some(s) = &g.embeddings {
        p.embeddings = Some(s.clone());
    }
    p
}

fn load_resources(g: &Global, needs: Needs) -> Result<Resources> {
    Resources::load(&resource_paths(g), needs)
}

fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    load_dataset(path, &Schema::for_path(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_preprocess(g: &Global, input: &Path, output: &Path, cfg: PreprocessConfig) -> Result<()> {
    let res = load_resources(g, Needs { stopwords: cfg.remove_stopwords, lemmas: cfg.lemmatize, embeddings: false })?;
    let docs = load_unlabeled(input, &Schema::for_path(input))?;
    let tokens = res.preprocessor.token_lists(&docs, cfg, Execution::default());
    let file = fs::File::create(output).map_err(|e| Error::io(output, e))?;
    let mut w = csv::WriterBuilder::new().delimiter(Schema::for_path(output).delimiter).from_writer(BufWriter::new(file));
    w.write_record(["id", "text", "label"])?;
    for (d, t) in docs.iter().zip(&tokens) {
        let label = d.label.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([d.id.as_str(), t.join(" ").as_str(), label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    println!("preprocessed {} documents -> {}", docs.len(), output.display());
    Ok(())
}

fn build_config(g: &Global, config: Option<&Path>, set: &[String]) -> Result<PipelineConfig> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            PipelineConfig::parse(&text)?
        }
        None => PipelineConfig::default(),
    };
    let mut pairs = Vec::new();
    for s in set {
        pairs.push(s.split_once('=').ok_or_else(|| Error::Validation(format!("--set expects KEY=VALUE, got `{s}`")))?);
    }
    let seed = g.seed.map(|s| s.to_string());
    if let Some(s) = &seed {
        pairs.push(("seed", s.as_str()));
    }
    if !pairs.is_empty() {
        cfg = PipelineConfig::from_pairs(cfg, pairs)?;
    }
    Ok(cfg)
}

fn cmd_train(g: &Global, train: &Path, config: Option<&Path>, set: &[String], model_out: &Path) -> Result<()> {
    let cfg = build_config(g, config, set)?;
    let res = load_resources(g, Needs::of([&cfg]))?;
    let ds = read_dataset(train)?;
    let exec = Execution::default();
    let model = fit_pipeline_with(&cfg, &ds, &res, exec)?;
    let (pred, _) = model.predict(ds.documents(), &res, exec)?;
    let m = metrics(&confusion(&ds.labels(), &pred)?);
    save_model(&model, model_out)?;
    println!(
        "trained {} on {} documents: vocab_size={} vector_size={} train_f1={:.4} converged={} -> {}",
        cfg.classifier.name(),
        ds.len(),
        model.vocab_size,
        model.vector_size,
        m.f1_positive,
        model.converged(),
        model_out.display()
    );
    Ok(())
}

fn load_pipeline(g: &Global, path: &Path) -> Result<(TrainedPipeline, Resources)> {
    let model: TrainedPipeline = load_model(path)?;
    let res = load_resources(g, Needs::of([&model.config]))?;
    Ok((model, res))
}

fn cmd_predict(g: &Global, model: &Path, input: &Path, output: &Path) -> Result<()> {
    let (model, res) = load_pipeline(g, model)?;
    let docs: Vec<Document> = load_unlabeled(input, &Schema::for_path(input))?;
    let (labels, scores) = model.predict(&docs, &res, Execution::default())?;
    let file = fs::File::create(output).map_err(|e| Error::io(output, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["id", "label", "score"])?;
    for ((d, l), s) in docs.iter().zip(&labels).zip(&scores) {
        w.write_record([d.id.clone(), l.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    println!("predicted {} documents ({pos} positive) -> {}", docs.len(), output.display());
    Ok(())
}

fn cmd_evaluate(g: &Global, model: &Path, test: &Path, metrics_out: Option<&Path>) -> Result<()> {
    let (model, res) = load_pipeline(g, model)?;
    let ds = read_dataset(test)?;
    let (pred, _) = model.predict(ds.documents(), &res, Execution::default())?;
    let c = confusion(&ds.labels(), &pred)?;
    let m = metrics(&c);
    if let Some(p) = metrics_out {
        let json = serde_json::json!({ "config": model.config.to_flat(), "confusion": c, "metrics": m });
        write_text(p, &format!("{json}\n"))?;
    }
    println!(
        "f1_positive={:.4} f1_macro={:.4} precision={:.4} recall={:.4} accuracy={:.4} (tp={} fp={} fn={} tn={})",
        m.f1_positive, m.f1_macro, m.precision, m.recall, m.accuracy, c.tp, c.fp, c.fn_, c.tn
    );
    Ok(())
}

enum Source {
    Preset(Preset),
    Grid(PathBuf),
}

/// Grid file rows: valid configs, plus rows that failed to parse (kept as
/// failed grid rows).
fn read_grid(path: &Path, seed: Option<u64>) -> Result<(Vec<PipelineConfig>, Vec<GridRow>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let parsed = PipelineConfig::parse(line).and_then(|c| match seed {
            Some(s) => PipelineConfig::from_pairs(c, [("seed", s.to_string().as_str())]),
            None => Ok(c),
        });
        match parsed {
            Ok(c) => ok.push(c),
            Err(e) => bad.push(GridRow { key: line.to_string(), outcome: Err(e.to_string()) }),
        }
    }
    Ok((ok, bad))
}

fn dataset_file(kind: &str, path: &Path) -> Result<ResourceFile> {
    Ok(ResourceFile { kind: kind.into(), path: path.to_path_buf(), sha256: sha256_file(path)? })
}

fn stats_series(configs: &[PipelineConfig], runs: usize, rows: &[GridRow]) -> Vec<(String, std::result::Result<RunStats, String>)> {
    configs
        .iter()
        .map(|base| {
            let name = match (configs.len(), base.smote) {
                (1, _) => "F1".to_string(),
                (_, true) => "With SMOTE F1".to_string(),
                (_, false) => "Without SMOTE F1".to_string(),
            };
            let f1s: std::result::Result<Vec<f64>, String> = (0..runs as u64)
                .map(|i| {
                    let key = seeded(base, base.seed + i).to_flat();
                    match rows.iter().find(|r| r.key == key).map(|r| &r.outcome) {
                        Some(Ok(e)) => Ok(e.metrics.f1_positive),
                        Some(Err(msg)) => Err(msg.clone()),
                        None => Err(format!("run missing: {key}")),
                    }
                })
                .collect();
            (name, f1s.and_then(|v| RunStats::from_values(v).map_err(|e| e.to_string())))
        })
        .collect()
}

fn seeded(cfg: &PipelineConfig, seed: u64) -> PipelineConfig {
    PipelineConfig::from_pairs(cfg.clone(), [("seed", seed.to_string().as_str())]).expect("seed override of a valid config")
}

fn cmd_sweep(
    g: &Global,
    source: &Source,
    train: &Path,
    test: &Path,
    out: &Path,
    threshold: Option<f64>,
    runs: usize,
) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let (configs, mut failed, averaged, threshold, label) = match source {
        Source::Preset(p) => (p.configs(seed), Vec::new(), p.averaged(), threshold.or(p.threshold()), format!("preset {p}")),
        Source::Grid(path) => {
            let (ok, bad) = read_grid(path, g.seed)?;
            (ok, bad, false, threshold, format!("grid {}", path.display()))
        }
    };
    if averaged && runs < 2 {
        return Err(Error::Validation("--runs must be >= 2 for averaged presets".into()));
    }
    let res = load_resources(g, Needs::of(&configs))?;
    let train_ds = read_dataset(train)?;
    let test_ds = read_dataset(test)?;
    let expanded: Vec<PipelineConfig> = if averaged {
        configs.iter().flat_map(|c| (0..runs as u64).map(move |i| seeded(c, c.seed + i))).collect()
    } else {
        configs.clone()
    };
    let (mut rows, wall) = timed(|| run_grid(&expanded, &train_ds, &test_ds, &res, g.jobs));
    rows.append(&mut failed);
    crate::experiments::sort_rows(&mut rows);

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_text(&out.join("results.csv"), &results_csv(&rows))?;
    write_text(&out.join("failures.csv"), &failures_csv(&rows))?;
    if averaged {
        let series = stats_series(&configs, runs, &rows);
        let good: Vec<(String, RunStats)> =
            series.iter().filter_map(|(n, s)| s.as_ref().ok().map(|s| (n.clone(), s.clone()))).collect();
        for (n, s) in &series {
            if let Err(e) = s {
                log::warn!("{n}: no statistics: {e}");
            }
        }
        write_text(&out.join("table.md"), &emit_stats_table(&good, TableFormat::Markdown))?;
        write_text(&out.join("table.csv"), &emit_stats_table(&good, TableFormat::Csv))?;
    } else {
        write_text(&out.join("table.md"), &emit_table(&rows, TableFormat::Markdown, threshold))?;
        write_text(&out.join("table.csv"), &emit_table(&rows, TableFormat::Csv, threshold))?;
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        source: label.clone(),
        seed,
        jobs: g.jobs,
        train: dataset_file("train", train)?,
        test: dataset_file("test", test)?,
        resources: res.files.clone(),
        rows: Manifest::rows_from(&rows, &expanded),
        wall_time: wall,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    write_text(&out.join("manifest.json"), &format!("{json}\n"))?;

    let n_failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    println!("{label}: {} runs, {n_failed} failed, {wall:.1}s -> {}", rows.len(), out.display());
    if let Some(best) = rows.first().and_then(GridRow::result) {
        println!("best f1_positive={:.4}: {}", best.metrics.f1_positive, best.config.to_flat());
    }
    Ok(())
}

fn cmd_reproduce(g: &Global, preset: Option<&str>) -> Result<()> {
    let presets = match preset {
        Some(p) => vec![p.parse::<Preset>()?],
        None => Preset::ALL.to_vec(),
    };
    let paths = resource_paths(g);
    let status = |p: &Option<PathBuf>| match p {
        Some(p) if p.is_file() => format!("found {}", p.display()),
        Some(p) => format!("missing {}", p.display()),
        None => "missing".into(),
    };
    for p in presets {
        let needs = p.needs();
        println!("{p} (task {}): {}", p.task(), p.summary());
        let mut req = Vec::new();
        if needs.stopwords {
            req.push(format!("{STOPWORDS_FILE}: {}", status(&paths.stopwords)));
        }
        if needs.lemmas {
            req.push(format!("{LEMMAS_FILE}: {}", status(&paths.lemmas)));
        }
        if needs.embeddings {
            req.push(format!("{EMBEDDINGS_FILE}: {}", status(&paths.embeddings)));
        }
        println!("  resources: {}", req.join("; "));
        for t in p.targets() {
            println!("  table {} target: {} F1 = {:.4}", t.table, t.description, t.f1);
        }
        println!(
            "  run: hatepipe sweep --preset {p} --train <task {} train> --test <task {} test> --out <dir>",
            p.task(),
            p.task()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    g: &Global,
    task: Task,
    out: &Path,
    script: Script,
    p_marker: f64,
    p_cross: f64,
    dim: usize,
    signal: f64,
) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let (train, test) = match task {
        Task::A => SynthSpec::task_a(seed),
        Task::B => SynthSpec::task_b(seed),
    };
    let adjust = |s: SynthSpec| SynthSpec { script, p_marker, p_cross, ..s };
    let (train, test) = (adjust(train), adjust(test));
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_dataset(&generate(&train)?, &out.join("train.csv"))?;
    save_dataset(&generate(&test)?, &out.join("test.csv"))?;
    write_text(&out.join(STOPWORDS_FILE), &(train.stopwords(20).join("\n") + "\n"))?;
    let lemmas: Vec<String> = train.lemma_pairs(20).into_iter().map(|(f, l)| format!("{f}\t{l}")).collect();
    write_text(&out.join(LEMMAS_FILE), &(lemmas.join("\n") + "\n"))?;
    let table = embedding_table(&train, dim, signal, seed)?;
    let path = out.join(EMBEDDINGS_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    table.write(BufWriter::new(file))?;
    println!("wrote synthetic task {task:?} corpus and resources -> {}", out.display());
    Ok(())
}
