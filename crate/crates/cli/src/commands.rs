use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;

use tsrep_core::aggregate::{AggregationConfig, LayerPooling, SequencePooling, VariatePooling};
use tsrep_core::augment::{embed_dataset, AugmentConfig, PATCH_GRID};
use tsrep_core::config::PipelineConfig;
use tsrep_core::dataset::{
    generate_blobs, generate_sine_toy, load_dataset, load_split_pair, write_dataset, write_suite_member,
    DatasetFormat, LabeledDataset, Split,
};
use tsrep_core::dtw::DtwConfig;
use tsrep_core::evaluate::{
    accuracy, balanced_accuracy, cd_analysis, parse_table_csv, pca_project, render_cdplot, render_markdown,
    render_report, score_correlation, BenchmarkMethod, BenchmarkOptions, CdAnalysis, CellStatus, Correlation,
    DtwMethod, EmbeddingMethod, EvaluationReport, Metric, ModelMeta, ReportStyle, ResultsTable, RunResult,
    NO_AUG_SUFFIX, STAT_DIFF_SUFFIX,
};
use tsrep_core::{seed, Error};

use crate::pipeline::{init_threads, load_suites, usage, write_output, PipelineArgs};

fn fmt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_line(fields: &[String]) -> anyhow::Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(fields)?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

// ---------------------------------------------------------------- gen-toy

#[derive(Args, Debug)]
pub struct GenToyArgs {
    /// Samples per split
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file, or directory with `--suite`
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Write a suite of train/test toy datasets instead of one file
    #[arg(long)]
    pub suite: bool,
    /// Number of datasets in suite mode
    #[arg(long, default_value_t = 3)]
    pub datasets: usize,
    /// Also write `index,baseline` for single-file output
    #[arg(long, value_name = "PATH")]
    pub baselines: Option<PathBuf>,
}

fn renamed(d: &LabeledDataset, name: &str, split: Split) -> tsrep_core::Result<LabeledDataset> {
    LabeledDataset::new(name, split, d.samples().to_vec(), d.labels().to_vec(), d.classes().to_vec())
}

pub fn gen_toy(a: &GenToyArgs) -> anyhow::Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be >= 1"));
    }
    if !a.suite {
        let toy = generate_sine_toy(a.n, a.seed)?;
        write_output(Some(&a.out), &write_dataset(&toy.dataset))?;
        if let Some(path) = &a.baselines {
            let mut text = String::from("index,baseline\n");
            for (i, b) in toy.baselines.iter().enumerate() {
                let _ = writeln!(text, "{i},{b}");
            }
            write_output(Some(path), &text)?;
        }
        return Ok(());
    }
    if a.datasets == 0 {
        return Err(usage("--datasets must be >= 1"));
    }
    for i in 0..a.datasets {
        let name = format!("SineToy{}", i + 1);
        for (s, split) in [(0, Split::Train), (1, Split::Test)] {
            let toy = generate_sine_toy(a.n, seed::derive(a.seed, (2 * i + s) as u64))?;
            write_suite_member(&a.out, &renamed(&toy.dataset, &name, split)?)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- gen-blobs

#[derive(Args, Debug)]
pub struct GenBlobsArgs {
    #[arg(long = "n-per-class", default_value_t = 100)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 16)]
    pub dims: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    /// Train seed; the test split uses seed + 1
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    #[arg(long, default_value = "Blobs")]
    pub name: String,
    /// Suite directory to write into
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn gen_blobs(a: &GenBlobsArgs) -> anyhow::Result<()> {
    for (s, split) in [(a.seed, Split::Train), (a.seed.wrapping_add(1), Split::Test)] {
        let blobs = generate_blobs(a.n_per_class, a.dims, a.separation, s).map_err(|e| usage(e.to_string()))?;
        write_suite_member(&a.out, &blobs.to_dataset(&a.name, split)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- embed

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Dataset file
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,
    /// CSV of `label,f0,f1,...`; stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn embed(a: &EmbedArgs) -> anyhow::Result<()> {
    let cfg = a.pipeline.resolve(false)?;
    init_threads(Some(1));
    let ds = load_dataset(&a.dataset, DatasetFormat::Text)?;
    let provider = cfg.provider.build()?;
    let x = embed_dataset(&ds, provider.as_ref(), &cfg.aggregation, &cfg.augment)?;
    let width = x.first().map_or(0, Vec::len);
    let mut header = vec!["label".to_string()];
    header.extend((0..width).map(|j| format!("f{j}")));
    let mut text = csv_line(&header)?;
    for (row, &label) in x.iter().zip(ds.labels()) {
        let mut rec = vec![ds.classes()[label].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        text.push_str(&csv_line(&rec)?);
    }
    write_output(a.out.as_deref(), &text)
}

// ---------------------------------------------------------------- train-eval

#[derive(Args, Debug)]
pub struct TrainEvalArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub test: PathBuf,
    /// Dataset name; defaults to the train file stem without `_TRAIN`
    #[arg(long)]
    pub name: Option<String>,
    /// Use the DTW baseline instead of an embedding pipeline
    #[arg(long, value_parser = ["dtw"])]
    pub model: Option<String>,
    /// RunResult JSON; stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// `model@noaug`, `model@statdiff`, or `model@<augmentation label>`.
pub fn method_id(model: &str, aug: &AugmentConfig) -> String {
    match (aug.stats, aug.diff) {
        (false, false) => format!("{model}{NO_AUG_SUFFIX}"),
        _ if *aug == AugmentConfig::stat_diff() => format!("{model}{STAT_DIFF_SUFFIX}"),
        _ => format!("{model}@{}", aug.label()),
    }
}

fn embedding_method(cfg: &PipelineConfig, id: String, agg: AggregationConfig, aug: AugmentConfig) -> anyhow::Result<Arc<dyn BenchmarkMethod>> {
    Ok(Arc::new(EmbeddingMethod {
        id,
        provider: cfg.provider.build()?,
        aggregation: agg,
        augment: aug,
        classifier: cfg.classifier_config(),
    }))
}

fn stem_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for suffix in ["_TRAIN", "_train", "_TEST", "_test"] {
        if let Some(s) = stem.strip_suffix(suffix) {
            return s.to_string();
        }
    }
    stem
}

pub fn train_eval(a: &TrainEvalArgs) -> anyhow::Result<()> {
    let dtw = a.model.is_some();
    let mut cfg = a.pipeline.resolve(dtw)?;
    cfg.jobs = Some(1);
    init_threads(Some(1));
    let name = a.name.clone().unwrap_or_else(|| stem_name(&a.train));
    let (train, test) = load_split_pair(&a.train, &a.test, &name)?;
    let method: Arc<dyn BenchmarkMethod> = if dtw {
        Arc::new(DtwMethod { config: cfg.dtw })
    } else {
        let id = method_id(cfg.provider.model_id(), &cfg.augment);
        embedding_method(&cfg, id, cfg.aggregation, cfg.augment)?
    };
    let start = Instant::now();
    let pred = method.predict(&train, &test)?;
    let result = RunResult {
        dataset: name,
        model_config: method.id(),
        accuracy: Some(accuracy(&pred, test.labels())?),
        balanced_accuracy: Some(balanced_accuracy(&pred, test.labels())?),
        status: CellStatus::Ok,
        wall_time: start.elapsed().as_secs_f64(),
        error: None,
    };
    write_output(a.out.as_deref(), &(serde_json::to_string_pretty(&result)? + "\n"))
}

// ---------------------------------------------------------------- benchmark

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Suite directory; repeatable, adds to the config's `suites`
    #[arg(long, value_name = "DIR")]
    pub suite: Vec<PathBuf>,
    /// Benchmark only the DTW baseline with `--k` neighbours
    #[arg(long, value_parser = ["dtw"])]
    pub model: Option<String>,
    /// Output directory; finished cells under `<out>/cells` are reused
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn options(cfg: &PipelineConfig, cell_dir: Option<PathBuf>) -> BenchmarkOptions {
    BenchmarkOptions {
        fallback: DtwConfig { k: 1, mode: cfg.dtw.mode },
        alpha: cfg.alpha,
        timeout: (cfg.timeout_secs > 0.0).then(|| Duration::from_secs_f64(cfg.timeout_secs)),
        jobs: cfg.jobs,
        cell_dir,
    }
}

fn suite_dirs(cfg: &PipelineConfig, extra: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs = cfg.suites.clone();
    for d in extra {
        if !d.is_dir() {
            bail!("suite directory {} does not exist", d.display());
        }
        dirs.push(d.clone());
    }
    Ok(dirs)
}

fn results_csv(report: &EvaluationReport) -> anyhow::Result<String> {
    let mut text = csv_line(&["dataset", "model_config", "accuracy", "balanced_accuracy", "status", "error"].map(String::from))?;
    for row in &report.results {
        for r in row {
            text.push_str(&csv_line(&[
                r.dataset.clone(),
                r.model_config.clone(),
                fmt_f64(r.accuracy),
                fmt_f64(r.balanced_accuracy),
                r.status.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?);
        }
    }
    Ok(text)
}

/// Wide accuracy matrix, one row per dataset: the input format of `analyze`.
fn scores_csv(report: &EvaluationReport) -> anyhow::Result<String> {
    let mut header = vec!["dataset".to_string()];
    header.extend(report.configs.iter().cloned());
    let mut text = csv_line(&header)?;
    let scores = report.scores(Metric::Accuracy);
    for (d, info) in report.datasets.iter().enumerate() {
        let mut rec = vec![info.name.clone()];
        rec.extend(scores.iter().map(|row| row[d].to_string()));
        text.push_str(&csv_line(&rec)?);
    }
    Ok(text)
}

pub fn benchmark(a: &BenchmarkArgs) -> anyhow::Result<()> {
    let dtw_only = a.model.is_some();
    let cfg = a.pipeline.resolve(dtw_only)?;
    init_threads(cfg.jobs);
    let suite = load_suites(&suite_dirs(&cfg, &a.suite)?, cfg.max_len)?;
    let mut methods: Vec<Arc<dyn BenchmarkMethod>> = Vec::new();
    if dtw_only {
        methods.push(Arc::new(DtwMethod { config: cfg.dtw }));
    } else {
        let model = cfg.provider.model_id();
        let none = AugmentConfig { stats: false, diff: false, k: cfg.augment.k };
        let both = AugmentConfig { stats: true, diff: true, k: cfg.augment.k };
        methods.push(embedding_method(&cfg, method_id(model, &none), cfg.aggregation, none)?);
        methods.push(embedding_method(&cfg, method_id(model, &both), cfg.aggregation, both)?);
        methods.push(Arc::new(DtwMethod { config: DtwConfig { k: 1, mode: cfg.dtw.mode } }));
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let report = tsrep_core::evaluate::run_benchmark(&suite, &methods, &options(&cfg, Some(a.out.join("cells"))))?;

    let meta = BTreeMap::new();
    write_output(Some(&a.out.join("report.json")), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write_output(Some(&a.out.join("results.csv")), &results_csv(&report)?)?;
    write_output(Some(&a.out.join("scores.csv")), &scores_csv(&report)?)?;
    let md = render_report(&report, ReportStyle::Markdown, Metric::Accuracy, &meta)?;
    write_output(Some(&a.out.join("report.md")), &md)?;
    write_output(Some(&a.out.join("report.cdplot")), &render_cdplot(&report.analysis))?;
    print!("{md}");
    Ok(())
}

// ---------------------------------------------------------------- ablate

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_parser = ["aggregation", "variate", "augmentation", "patches"])]
    pub grid: String,
    #[arg(long, value_name = "DIR")]
    pub suite: Vec<PathBuf>,
    /// Directory of reusable cell status files
    #[arg(long, value_name = "DIR")]
    pub cells: Option<PathBuf>,
    /// CSV output; stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// `(id, aggregation, augmentation)` for every point of a grid.
pub fn grid_points(grid: &str, cfg: &PipelineConfig) -> anyhow::Result<Vec<(String, AggregationConfig, AugmentConfig)>> {
    let agg = cfg.aggregation;
    let aug = cfg.augment;
    let points = match grid {
        "aggregation" => SequencePooling::ALL
            .iter()
            .flat_map(|&s| {
                LayerPooling::ALL.iter().map(move |&l| {
                    (format!("seq={s} layer={l}"), AggregationConfig { sequence: s, layer: l, ..agg }, aug)
                })
            })
            .collect(),
        "variate" => VariatePooling::ALL
            .iter()
            .map(|&v| (format!("variate={v}"), AggregationConfig { variate: v, ..agg }, aug))
            .collect(),
        "augmentation" => [(false, false), (true, false), (false, true), (true, true)]
            .iter()
            .map(|&(stats, diff)| {
                let a = AugmentConfig { stats, diff, k: aug.k };
                (a.label(), agg, a)
            })
            .collect(),
        "patches" => PATCH_GRID
            .iter()
            .map(|&k| (format!("k={k}"), agg, AugmentConfig { stats: true, diff: aug.diff, k }))
            .collect(),
        other => return Err(usage(format!("unknown grid {other:?}"))),
    };
    Ok(points)
}

pub fn ablate(a: &AblateArgs) -> anyhow::Result<()> {
    let cfg = a.pipeline.resolve(false)?;
    init_threads(cfg.jobs);
    let suite = load_suites(&suite_dirs(&cfg, &a.suite)?, cfg.max_len)?;
    let points = grid_points(&a.grid, &cfg)?;
    let methods = points
        .iter()
        .map(|(id, agg, aug)| embedding_method(&cfg, id.clone(), *agg, *aug))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = tsrep_core::evaluate::run_benchmark(&suite, &methods, &options(&cfg, a.cells.clone()))?;

    let mut header: Vec<String> = [
        "grid", "config", "sequence", "layer", "variate", "stats", "diff", "k",
        "mean_accuracy", "mean_balanced_accuracy", "average_rank",
    ]
    .map(String::from)
    .to_vec();
    header.extend(report.datasets.iter().map(|d| d.name.clone()));
    let mut text = csv_line(&header)?;
    for (c, (id, agg, aug)) in points.iter().enumerate() {
        let mut rec = vec![
            a.grid.clone(),
            id.clone(),
            agg.sequence.to_string(),
            agg.layer.to_string(),
            agg.variate.to_string(),
            aug.stats.to_string(),
            aug.diff.to_string(),
            aug.k.to_string(),
            fmt_f64(report.accuracy_means[c].overall),
            fmt_f64(report.balanced_accuracy_means[c].overall),
            report.analysis.average_ranks[c].to_string(),
        ];
        rec.extend(report.results[c].iter().map(|r| fmt_f64(r.accuracy)));
        text.push_str(&csv_line(&rec)?);
    }
    write_output(a.out.as_deref(), &text)
}

// ---------------------------------------------------------------- analyze

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Wide scores CSV: `dataset,<config>,...`, one row per dataset
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// External `model_id,crps` scores to correlate with mean accuracy
    #[arg(long, value_name = "PATH")]
    pub crps: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = ["json", "cdplot"])]
    pub format: String,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CrpsCorrelation {
    models: Vec<String>,
    mean_accuracy: Vec<f64>,
    crps: Vec<f64>,
    #[serde(flatten)]
    correlation: Correlation,
}

#[derive(Debug, Serialize)]
struct Analysis {
    #[serde(flatten)]
    cd: CdAnalysis,
    #[serde(skip_serializing_if = "Option::is_none")]
    correlation: Option<CrpsCorrelation>,
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Returns config names and the configs × datasets score matrix.
pub fn read_scores(text: &str) -> anyhow::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        bail!("scores CSV needs a dataset column and at least one configuration");
    }
    let configs = header[1..].to_vec();
    let mut scores = vec![Vec::new(); configs.len()];
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        for (c, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line: i + 2, message: format!("invalid score {field:?}") })?;
            scores[c].push(v);
        }
    }
    if scores[0].is_empty() {
        bail!("scores CSV has no datasets");
    }
    Ok((configs, scores))
}

fn crps_correlation(configs: &[String], scores: &[Vec<f64>], text: &str) -> anyhow::Result<CrpsCorrelation> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = CrpsCorrelation {
        models: Vec::new(),
        mean_accuracy: Vec::new(),
        crps: Vec::new(),
        correlation: Correlation { pearson: f64::NAN, spearman: f64::NAN },
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            bail!("crps line {} needs model_id,crps", i + 2);
        }
        let model = rec[0].to_string();
        let crps: f64 = rec[1]
            .parse()
            .map_err(|_| Error::Parse { line: i + 2, message: format!("invalid crps {:?}", &rec[1]) })?;
        let noaug = format!("{model}{NO_AUG_SUFFIX}");
        let Some(c) = configs.iter().position(|c| *c == model).or_else(|| configs.iter().position(|c| *c == noaug)) else {
            log::warn!("no scores for CRPS model {model}");
            continue;
        };
        out.models.push(model);
        out.mean_accuracy.push(scores[c].iter().sum::<f64>() / scores[c].len() as f64);
        out.crps.push(crps);
    }
    out.correlation = score_correlation(&out.mean_accuracy, &out.crps)?;
    Ok(out)
}

pub fn analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    init_threads(Some(1));
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let (configs, scores) = read_scores(&read_text(&a.input)?)?;
    let cd = cd_analysis(&configs, &scores, a.alpha)?;
    let text = if a.format == "cdplot" {
        render_cdplot(&cd)
    } else {
        let correlation = match &a.crps {
            Some(p) => Some(crps_correlation(&configs, &scores, &read_text(p)?)?),
            None => None,
        };
        serde_json::to_string_pretty(&Analysis { cd, correlation })? + "\n"
    };
    write_output(a.out.as_deref(), &text)
}

// ---------------------------------------------------------------- pca

#[derive(Args, Debug)]
pub struct PcaArgs {
    /// Embedding CSV as written by `embed`
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn pca(a: &PcaArgs) -> anyhow::Result<()> {
    init_threads(Some(1));
    let text = read_text(&a.input)?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut labels = Vec::new();
    let mut x = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        labels.push(rec.get(0).unwrap_or_default().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse { line: i + 2, message: "invalid feature value".into() })?;
        x.push(row);
    }
    if a.dims == 0 {
        return Err(usage("--dims must be >= 1"));
    }
    let p = pca_project(&x, a.dims)?;
    let mut header = vec!["label".to_string()];
    header.extend((1..=a.dims).map(|d| format!("pc{d}")));
    let mut out = csv_line(&header)?;
    for (label, row) in labels.iter().zip(&p.projection) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.push_str(&csv_line(&rec)?);
    }
    write_output(a.out.as_deref(), &out)
}

// ---------------------------------------------------------------- report

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `report.json` from `benchmark`, or a table CSV in the `--style csv` layout
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, default_value = "markdown", value_parser = ["markdown", "md", "csv", "cdplot"])]
    pub style: String,
    #[arg(long, default_value = "accuracy", value_parser = ["accuracy", "balanced-accuracy"])]
    pub metric: String,
    /// JSON map of model name to `{"type": ..., "zero_shot": ...}`
    #[arg(long, value_name = "PATH")]
    pub meta: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn report(a: &ReportArgs) -> anyhow::Result<()> {
    init_threads(Some(1));
    let style: ReportStyle = a.style.parse().map_err(|e: Error| usage(e.to_string()))?;
    let metric = if a.metric == "accuracy" { Metric::Accuracy } else { Metric::BalancedAccuracy };
    let meta: BTreeMap<String, ModelMeta> = match &a.meta {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let text = read_text(&a.input)?;
    let is_json = a.input.extension().is_some_and(|e| e == "json");
    let out = if is_json {
        let report: EvaluationReport = serde_json::from_str(&text)?;
        render_report(&report, style, metric, &meta)?
    } else {
        let mut table: ResultsTable = parse_table_csv(&text)?;
        for row in &mut table.rows {
            if let Some(m) = meta.get(&row.model) {
                row.meta = m.clone();
            }
        }
        match style {
            ReportStyle::Markdown => render_markdown(&table),
            ReportStyle::Csv => tsrep_core::evaluate::render_csv(&table)?,
            ReportStyle::CdPlot => return Err(usage("cdplot output needs a report.json input")),
        }
    };
    write_output(a.out.as_deref(), &out)
}
