//! Runs a set of methods over a suite, one cell per (method, dataset).

use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, balanced_accuracy};
use super::stats::{cd_analysis, CdAnalysis};
use crate::aggregate::AggregationConfig;
use crate::augment::{embed_dataset, AugmentConfig};
use crate::classify::{train_classifier, ClassifierConfig};
use crate::dataset::{BenchmarkEntry, BenchmarkSuite, LabeledDataset, SuiteKind};
use crate::dtw::{dtw_knn_classify, DtwConfig};
use crate::provider::EmbeddingProvider;
use crate::{seed, Error, Result};

/// Something that can be trained on a train split and predict a test split.
pub trait BenchmarkMethod: Send + Sync {
    fn id(&self) -> String;

    fn predict(&self, train: &LabeledDataset, test: &LabeledDataset) -> Result<Vec<usize>>;

    /// Baseline rows are never replaced by the fallback.
    fn is_baseline(&self) -> bool {
        false
    }
}

/// Frozen-provider embeddings followed by a classifier head.
pub struct EmbeddingMethod {
    pub id: String,
    pub provider: Arc<dyn EmbeddingProvider>,
    pub aggregation: AggregationConfig,
    pub augment: AugmentConfig,
    pub classifier: ClassifierConfig,
}

impl BenchmarkMethod for EmbeddingMethod {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn predict(&self, train: &LabeledDataset, test: &LabeledDataset) -> Result<Vec<usize>> {
        let p = self.provider.as_ref();
        let xtr = embed_dataset(train, p, &self.aggregation, &self.augment)?;
        let xte = embed_dataset(test, p, &self.aggregation, &self.augment)?;
        let cfg = ClassifierConfig {
            seed: seed::derive(self.classifier.seed, seed::hash_str(&train.name)),
            ..self.classifier.clone()
        };
        let model = train_classifier(&xtr, train.labels(), train.n_classes(), &cfg)?;
        model.predict(&xte)
    }
}

pub struct DtwMethod {
    pub config: DtwConfig,
}

impl BenchmarkMethod for DtwMethod {
    fn id(&self) -> String {
        self.config.label()
    }

    fn predict(&self, train: &LabeledDataset, test: &LabeledDataset) -> Result<Vec<usize>> {
        dtw_knn_classify(train, test, &self.config)
    }

    fn is_baseline(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
    Fallback,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
            CellStatus::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub model_config: String,
    pub accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub status: CellStatus,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunResult {
    fn failed(dataset: &str, config: &str, wall_time: f64, error: String) -> Self {
        Self {
            dataset: dataset.into(),
            model_config: config.into(),
            accuracy: None,
            balanced_accuracy: None,
            status: CellStatus::Failed,
            wall_time,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    BalancedAccuracy,
}

impl Metric {
    pub fn of(self, r: &RunResult) -> Option<f64> {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::BalancedAccuracy => r.balanced_accuracy,
        }
    }
}

/// Means over the univariate datasets, the multivariate ones and all of them.
/// A group with no datasets is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupMeans {
    pub univariate: Option<f64>,
    pub multivariate: Option<f64>,
    pub overall: Option<f64>,
}

impl GroupMeans {
    pub fn get(&self, kind: Option<SuiteKind>) -> Option<f64> {
        match kind {
            Some(SuiteKind::Univariate) => self.univariate,
            Some(SuiteKind::Multivariate) => self.multivariate,
            None => self.overall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub kind: SuiteKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub configs: Vec<String>,
    pub datasets: Vec<DatasetInfo>,
    /// `results[config][dataset]`.
    pub results: Vec<Vec<RunResult>>,
    pub accuracy_means: Vec<GroupMeans>,
    pub balanced_accuracy_means: Vec<GroupMeans>,
    /// Ranks and pairwise tests on accuracy over all datasets.
    pub analysis: CdAnalysis,
}

impl EvaluationReport {
    pub fn scores(&self, metric: Metric) -> Vec<Vec<f64>> {
        self.results
            .iter()
            .map(|row| row.iter().map(|r| metric.of(r).unwrap_or(f64::NAN)).collect())
            .collect()
    }

    pub fn means(&self, metric: Metric) -> &[GroupMeans] {
        match metric {
            Metric::Accuracy => &self.accuracy_means,
            Metric::BalancedAccuracy => &self.balanced_accuracy_means,
        }
    }

    pub fn cell(&self, config: &str, dataset: &str) -> Option<&RunResult> {
        let c = self.configs.iter().position(|c| c == config)?;
        let d = self.datasets.iter().position(|d| d.name == dataset)?;
        Some(&self.results[c][d])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    /// Replacement for failed cells.
    pub fallback: DtwConfig,
    pub alpha: f64,
    /// Per-cell limit; `None` waits indefinitely.
    pub timeout: Option<Duration>,
    /// Concurrent cells; `None` uses one per available core.
    pub jobs: Option<usize>,
    /// Directory holding one status file per finished cell. Existing files
    /// are reused instead of recomputing the cell.
    pub cell_dir: Option<PathBuf>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            fallback: DtwConfig::new(1),
            alpha: 0.1,
            timeout: Some(Duration::from_secs(300)),
            jobs: None,
            cell_dir: None,
        }
    }
}

fn slug(s: &str) -> String {
    let clean: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{clean}-{:08x}", seed::hash_str(s) as u32)
}

pub fn cell_path(dir: &Path, config: &str, dataset: &str) -> PathBuf {
    dir.join(format!("{}__{}.json", slug(config), slug(dataset)))
}

fn load_cell(path: &Path, config: &str, dataset: &str) -> Option<RunResult> {
    let text = std::fs::read_to_string(path).ok()?;
    let r: RunResult = serde_json::from_str(&text).ok()?;
    (r.model_config == config && r.dataset == dataset && r.status != CellStatus::Fallback).then_some(r)
}

fn store_cell(path: &Path, r: &RunResult) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(r)?).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn score(entry: &BenchmarkEntry, config: &str, pred: &[usize], wall_time: f64) -> Result<RunResult> {
    let truth = entry.test.labels();
    if pred.iter().any(|&p| p >= entry.test.n_classes()) {
        return Err(Error::invalid("prediction outside the class range"));
    }
    Ok(RunResult {
        dataset: entry.name().into(),
        model_config: config.into(),
        accuracy: Some(accuracy(pred, truth)?),
        balanced_accuracy: Some(balanced_accuracy(pred, truth)?),
        status: CellStatus::Ok,
        wall_time,
        error: None,
    })
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

/// Runs one cell on its own thread so a hang or panic is contained.
fn run_cell(method: Arc<dyn BenchmarkMethod>, entry: Arc<BenchmarkEntry>, timeout: Option<Duration>) -> RunResult {
    let id = method.id();
    let name = entry.name().to_string();
    let start = Instant::now();
    let (tx, rx) = mpsc::channel();
    let worker = {
        let entry = Arc::clone(&entry);
        thread::Builder::new().name(format!("cell-{name}")).spawn(move || {
            let out = panic::catch_unwind(AssertUnwindSafe(|| method.predict(&entry.train, &entry.test)));
            let _ = tx.send(out);
        })
    };
    if let Err(e) = worker {
        return RunResult::failed(&name, &id, 0.0, format!("could not start worker: {e}"));
    }
    let received = match timeout {
        Some(t) => rx.recv_timeout(t).map_err(|e| match e {
            mpsc::RecvTimeoutError::Timeout => Error::Timeout(t.as_secs_f64()),
            mpsc::RecvTimeoutError::Disconnected => Error::invalid("worker vanished"),
        }),
        None => rx.recv().map_err(|_| Error::invalid("worker vanished")),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let outcome = match received {
        Ok(Ok(Ok(pred))) => score(&entry, &id, &pred, elapsed),
        Ok(Ok(Err(e))) => Err(e),
        Ok(Err(p)) => Err(Error::invalid(format!("panicked: {}", panic_message(p)))),
        Err(e) => Err(e),
    };
    match outcome {
        Ok(r) => r,
        Err(e) => {
            log::warn!("{id} on {name} failed: {e}");
            RunResult::failed(&name, &id, elapsed, e.to_string())
        }
    }
}

fn group_means(row: &[RunResult], datasets: &[DatasetInfo], metric: Metric) -> GroupMeans {
    let mean = |kind: Option<SuiteKind>| {
        let vals: Vec<f64> = row
            .iter()
            .zip(datasets)
            .filter(|(_, d)| kind.is_none_or(|k| d.kind == k))
            .filter_map(|(r, _)| metric.of(r))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    GroupMeans {
        univariate: mean(Some(SuiteKind::Univariate)),
        multivariate: mean(Some(SuiteKind::Multivariate)),
        overall: mean(None),
    }
}

/// Evaluates every method on every dataset (train on train, score on test).
/// A failed cell, whether by error, panic or timeout, takes the fallback
/// DTW scores for its dataset and is marked [`CellStatus::Fallback`].
pub fn run_benchmark(
    suite: &BenchmarkSuite,
    methods: &[Arc<dyn BenchmarkMethod>],
    options: &BenchmarkOptions,
) -> Result<EvaluationReport> {
    if suite.is_empty() {
        return Err(Error::Empty("benchmark suite has no datasets".into()));
    }
    if methods.is_empty() {
        return Err(Error::Empty("no methods to benchmark".into()));
    }
    let configs: Vec<String> = methods.iter().map(|m| m.id()).collect();
    for (i, c) in configs.iter().enumerate() {
        if configs[..i].contains(c) {
            return Err(Error::invalid(format!("duplicate configuration id {c:?}")));
        }
    }
    options.fallback.validate()?;
    if let Some(dir) = &options.cell_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let entries: Vec<Arc<BenchmarkEntry>> = suite.datasets.iter().cloned().map(Arc::new).collect();
    let datasets: Vec<DatasetInfo> = entries
        .iter()
        .map(|e| DatasetInfo {
            name: e.name().into(),
            kind: e.kind,
        })
        .collect();

    let cells: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| (0..entries.len()).map(move |d| (m, d)))
        .collect();
    let run_all = || -> Result<Vec<RunResult>> {
        cells
            .par_iter()
            .map(|&(m, d)| {
                let path = options.cell_dir.as_ref().map(|dir| cell_path(dir, &configs[m], entries[d].name()));
                if let Some(r) = path.as_deref().and_then(|p| load_cell(p, &configs[m], entries[d].name())) {
                    log::info!("{} on {}: reusing finished cell", configs[m], entries[d].name());
                    return Ok(r);
                }
                let r = run_cell(Arc::clone(&methods[m]), Arc::clone(&entries[d]), options.timeout);
                if let Some(p) = path {
                    store_cell(&p, &r)?;
                }
                Ok(r)
            })
            .collect()
    };
    // Cell waiters block, so they get their own pool; the work inside a cell
    // runs on the global pool.
    let jobs = options
        .jobs
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()));
    let flat = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
        .install(run_all)?;
    let mut results: Vec<Vec<RunResult>> = flat.chunks(entries.len()).map(|c| c.to_vec()).collect();

    let needs_fallback: Vec<usize> = (0..entries.len())
        .filter(|&d| {
            (0..methods.len()).any(|m| results[m][d].status == CellStatus::Failed && !methods[m].is_baseline())
        })
        .collect();
    for d in needs_fallback {
        let e = &entries[d];
        let pred = dtw_knn_classify(&e.train, &e.test, &options.fallback)?;
        let base = score(e, &options.fallback.label(), &pred, 0.0)?;
        for m in 0..methods.len() {
            let r = &mut results[m][d];
            if r.status == CellStatus::Failed && !methods[m].is_baseline() {
                r.accuracy = base.accuracy;
                r.balanced_accuracy = base.balanced_accuracy;
                r.status = CellStatus::Fallback;
            }
        }
    }
    for (m, row) in results.iter().enumerate() {
        if let Some(r) = row.iter().find(|r| r.status == CellStatus::Failed) {
            return Err(Error::invalid(format!(
                "baseline {} failed on {}: {}",
                configs[m],
                r.dataset,
                r.error.as_deref().unwrap_or("unknown error")
            )));
        }
    }

    let accuracy_means = results.iter().map(|r| group_means(r, &datasets, Metric::Accuracy)).collect();
    let balanced_accuracy_means = results
        .iter()
        .map(|r| group_means(r, &datasets, Metric::BalancedAccuracy))
        .collect();
    let scores: Vec<Vec<f64>> = results
        .iter()
        .map(|row| row.iter().map(|r| r.accuracy.unwrap_or(f64::NAN)).collect())
        .collect();
    let analysis = cd_analysis(&configs, &scores, options.alpha)?;
    Ok(EvaluationReport {
        configs,
        datasets,
        results,
        accuracy_means,
        balanced_accuracy_means,
        analysis,
    })
}
