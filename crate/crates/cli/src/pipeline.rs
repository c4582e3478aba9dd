//! Shared pipeline flags and their merge onto the TOML config.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::Args;

use tsrep_core::aggregate::{LayerPooling, SequencePooling, VariatePooling};
use tsrep_core::classify::ClassifierKind;
use tsrep_core::config::PipelineConfig;
use tsrep_core::dataset::{filter_by_length, load_suite, BenchmarkSuite};
use tsrep_core::provider::{FileSpec, MockSpec, ProviderSpec};

/// Bad flags, unreadable or invalid configuration. Exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn choice<T>(names: &'static [&'static str]) -> impl TypedValueParser<Value = T>
where
    T: FromStr + Clone + Send + Sync + 'static,
    T::Err: fmt::Debug,
{
    PossibleValuesParser::new(names).map(|s| s.parse::<T>().expect("listed value parses"))
}

#[derive(Args, Debug, Clone, Default)]
pub struct PipelineArgs {
    /// TOML pipeline configuration; flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (benchmark and ablate only)
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Drop datasets with any series longer than N (0 keeps all)
    #[arg(long = "max-len", value_name = "N")]
    pub max_len: Option<usize>,
    #[arg(long, value_name = "F")]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = ["mock", "file"])]
    pub provider: Option<String>,
    /// Hidden-state directory for the file provider
    #[arg(long, value_name = "DIR")]
    pub states: Option<PathBuf>,
    #[arg(long = "model-id", value_name = "ID")]
    pub model_id: Option<String>,
    #[arg(long, value_parser = choice::<SequencePooling>(&["mean", "max", "last"]))]
    pub seq: Option<SequencePooling>,
    #[arg(long, value_parser = choice::<LayerPooling>(&["concat", "mean", "max", "last"]))]
    pub layer: Option<LayerPooling>,
    #[arg(long, value_parser = choice::<VariatePooling>(&["concat", "mean", "max"]))]
    pub variate: Option<VariatePooling>,
    /// Append patch statistics
    #[arg(long)]
    pub stats: bool,
    /// Append the differenced-series embedding
    #[arg(long)]
    pub diff: bool,
    /// Patch count; neighbour count when used with `--model dtw`
    #[arg(long, value_name = "N")]
    pub k: Option<usize>,
    #[arg(long, value_parser = choice::<ClassifierKind>(&["forest", "linear", "knn"]))]
    pub classifier: Option<ClassifierKind>,
    /// Trees in the random forest
    #[arg(long, value_name = "N")]
    pub trees: Option<usize>,
    /// Neighbours for the cosine k-NN head
    #[arg(long, value_name = "N")]
    pub neighbors: Option<usize>,
    /// Per-cell timeout in seconds (0 disables)
    #[arg(long, value_name = "SECS")]
    pub timeout: Option<f64>,
}

impl PipelineArgs {
    /// Reads the config file if given, then applies every flag that was set.
    /// `dtw_k` routes `--k` to the DTW neighbour count instead of the patch
    /// count.
    pub fn resolve(&self, dtw_k: bool) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };

        if let Some(v) = self.jobs {
            cfg.jobs = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.max_len {
            cfg.max_len = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.timeout {
            cfg.timeout_secs = v;
        }
        self.apply_provider(&mut cfg)?;
        if let Some(v) = self.seq {
            cfg.aggregation.sequence = v;
        }
        if let Some(v) = self.layer {
            cfg.aggregation.layer = v;
        }
        if let Some(v) = self.variate {
            cfg.aggregation.variate = v;
        }
        cfg.augment.stats |= self.stats;
        cfg.augment.diff |= self.diff;
        if let Some(k) = self.k {
            if dtw_k {
                cfg.dtw.k = k;
            } else {
                cfg.augment.k = k;
            }
        }
        if let Some(v) = self.classifier {
            cfg.classifier.kind = v;
        }
        if let Some(v) = self.trees {
            cfg.classifier.n_trees = v;
        }
        if let Some(v) = self.neighbors {
            cfg.classifier.neighbors = v;
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }

    fn apply_provider(&self, cfg: &mut PipelineConfig) -> anyhow::Result<()> {
        match self.provider.as_deref() {
            Some("mock") => {
                if !matches!(cfg.provider, ProviderSpec::Mock(_)) {
                    cfg.provider = ProviderSpec::Mock(MockSpec::default());
                }
            }
            Some("file") => {
                let (old_dir, old_id) = match &cfg.provider {
                    ProviderSpec::File(f) => (Some(f.dir.clone()), f.model_id.clone()),
                    ProviderSpec::Mock(_) => (None, "file".to_string()),
                };
                let dir = self
                    .states
                    .clone()
                    .or(old_dir)
                    .ok_or_else(|| usage("--provider file needs --states DIR"))?;
                cfg.provider = ProviderSpec::File(FileSpec { model_id: old_id, dir });
            }
            _ => {
                if let (Some(dir), ProviderSpec::File(f)) = (&self.states, &mut cfg.provider) {
                    f.dir = dir.clone();
                }
            }
        }
        if let Some(id) = &self.model_id {
            match &mut cfg.provider {
                ProviderSpec::Mock(m) => m.model_id = id.clone(),
                ProviderSpec::File(f) => f.model_id = id.clone(),
            }
        }
        Ok(())
    }
}

/// Loads and length-filters every suite directory, in order.
pub fn load_suites(dirs: &[PathBuf], max_len: usize) -> anyhow::Result<BenchmarkSuite> {
    if dirs.is_empty() {
        return Err(usage("no suite given; pass --suite DIR or set `suites` in the config"));
    }
    let mut all = Vec::new();
    for dir in dirs {
        let suite = load_suite(dir)?;
        all.extend(filter_by_length(&suite, max_len).datasets);
    }
    let suite = BenchmarkSuite::new(all);
    if suite.is_empty() {
        anyhow::bail!("no datasets left after loading and length filtering");
    }
    Ok(suite)
}

/// Sets the global rayon pool. `None` keeps rayon's default size.
pub fn init_threads(n: Option<usize>) {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        b = b.num_threads(n);
    }
    if let Err(e) = b.build_global() {
        log::debug!("global thread pool already set: {e}");
    }
}

pub fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(
            &path,
            "seed = 4\nalpha = 0.05\n[aggregation]\nsequence = \"max\"\n[augment]\nk = 4\n[classifier]\nkind = \"linear\"\n",
        )
        .unwrap();
        let args = PipelineArgs {
            config: Some(path),
            seed: Some(9),
            k: Some(16),
            ..Default::default()
        };
        let cfg = args.resolve(false).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.aggregation.sequence, SequencePooling::Max);
        assert_eq!(cfg.augment.k, 16);
        assert_eq!(cfg.classifier.kind, ClassifierKind::Linear);

        let cfg = PipelineArgs { k: Some(3), ..Default::default() }.resolve(true).unwrap();
        assert_eq!(cfg.dtw.k, 3);
        assert_eq!(cfg.augment.k, 8);
    }

    #[test]
    fn bad_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "nonsense = 1\n").unwrap();
        let err = PipelineArgs { config: Some(path), ..Default::default() }.resolve(false).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
        let err = PipelineArgs { provider: Some("file".into()), ..Default::default() }
            .resolve(false)
            .unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }
}
