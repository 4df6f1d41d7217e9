//! Pipeline plumbing shared by the command-line binary and the Python
//! bindings: config file schema, the run pipeline (split, federate, select,
//! score), and output emission.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{stratified_split, Dataset, Partition};
use crate::error::Error;
use crate::eval::{baseline_no_fc, constructed_accuracy, feature_reduction};
use crate::federation::{run_ffc, ClientData, RunConfig, RunOutput};
use crate::genome::{ExpressionTree, Operator};
use crate::rng::{derive_seed, tag};
use crate::Result;

/// On-disk run configuration. Unknown keys are rejected so typos surface
/// instead of silently falling back to defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: String,
    #[serde(default)]
    pub label_column: Option<String>,
    pub partition: String,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Must match the partition file when present.
    #[serde(default)]
    pub clients: Option<usize>,
    #[serde(default = "default_s_local")]
    pub s_local: usize,
    #[serde(default = "default_local_iters")]
    pub local_iters: usize,
    #[serde(default = "default_global_rounds")]
    pub global_rounds: usize,
    #[serde(default = "default_ns_min")]
    pub ns_min: usize,
    #[serde(default = "default_ns_max")]
    pub ns_max: usize,
    #[serde(default = "default_pd")]
    pub pd: usize,
    #[serde(default = "default_no")]
    pub no: usize,
    #[serde(default = "default_operators")]
    pub operators: Vec<Operator>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub beta_max: Option<usize>,
    #[serde(default = "default_igr_threshold")]
    pub igr_threshold: f64,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_g0")]
    pub g0: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
}

fn default_test_fraction() -> f64 {
    0.3
}
fn default_s_local() -> usize {
    30
}
fn default_local_iters() -> usize {
    5
}
fn default_global_rounds() -> usize {
    100
}
fn default_ns_min() -> usize {
    3
}
fn default_ns_max() -> usize {
    10
}
fn default_pd() -> usize {
    3
}
fn default_no() -> usize {
    2
}
fn default_operators() -> Vec<Operator> {
    Operator::ALL.to_vec()
}
fn default_bins() -> usize {
    5
}
fn default_igr_threshold() -> f64 {
    0.01
}
fn default_master_seed() -> u64 {
    42
}
fn default_g0() -> f64 {
    100.0
}
fn default_alpha() -> f64 {
    20.0
}
fn default_epsilon() -> f64 {
    1e-9
}
fn default_min_leaf() -> usize {
    2
}

impl FileConfig {
    /// Parse from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: FileConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_run_config(&self, clients: usize) -> RunConfig {
        RunConfig {
            clients,
            s_local: self.s_local,
            local_iters: self.local_iters,
            global_rounds: self.global_rounds,
            ns_min: self.ns_min,
            ns_max: self.ns_max,
            pd: self.pd,
            no: self.no,
            operators: self.operators.clone(),
            bins: self.bins,
            beta_max: self.beta_max,
            igr_threshold: self.igr_threshold,
            master_seed: self.master_seed,
            g0: self.g0,
            alpha: self.alpha,
            epsilon: self.epsilon,
        }
    }
}

/// Final scores plus the fully resolved configuration, for reproducibility.
#[derive(Debug, Serialize, Deserialize)]
pub struct Results {
    pub dataset: String,
    pub tf: usize,
    pub cf: usize,
    pub fr: f64,
    pub acc_constructed: f64,
    pub acc_baseline: f64,
    pub seed: u64,
    pub rounds: usize,
    pub config: FileConfig,
}

/// Interpret `target` relative to the directory holding `base` unless it is
/// already absolute.
pub fn resolve_relative(base: &Path, target: &str) -> PathBuf {
    let candidate = PathBuf::from(target);
    if candidate.is_absolute() {
        candidate
    } else {
        base.parent().unwrap_or_else(|| Path::new(".")).join(candidate)
    }
}

pub fn dataset_name(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_owned())
}

/// Load the dataset and partition a config points at, with paths resolved
/// relative to `anchor` (the config file's own location, or the working
/// directory for in-memory configs).
pub fn load_inputs(file_cfg: &FileConfig, anchor: &Path) -> Result<(Dataset, Partition)> {
    let dataset_path = resolve_relative(anchor, &file_cfg.dataset);
    let partition_path = resolve_relative(anchor, &file_cfg.partition);
    let ds = Dataset::load_csv(&dataset_path, file_cfg.label_column.as_deref())?;
    let partition_text = std::fs::read_to_string(&partition_path).map_err(|e| {
        Error::Config(format!(
            "cannot read partition file {}: {e}",
            partition_path.display()
        ))
    })?;
    let partition = Partition::from_json(&partition_text)?;
    if let Some(expected) = file_cfg.clients {
        if expected != partition.n_clients() {
            return Err(Error::Config(format!(
                "config names {expected} clients but partition file has {}",
                partition.n_clients()
            )));
        }
    }
    Ok((ds, partition))
}

/// Split, federate, select, and score. Everything downstream of the config is
/// deterministic in (config, data, master_seed).
pub fn run_pipeline(
    file_cfg: &FileConfig,
    ds: &Dataset,
    partition: &Partition,
) -> Result<(Results, RunOutput)> {
    let cfg = file_cfg.to_run_config(partition.n_clients());
    let split_seed = derive_seed(cfg.master_seed, &[tag::SPLIT]);
    let split = stratified_split(ds, file_cfg.test_fraction, split_seed)?;

    let client_data: Vec<ClientData> = (0..partition.n_clients())
        .map(|id| {
            let train_view: Vec<usize> = partition
                .client(id)
                .iter()
                .copied()
                .filter(|i| split.train_indices.binary_search(i).is_ok())
                .collect();
            if train_view.is_empty() {
                return Err(Error::EmptyLocalData(id));
            }
            ClientData::from_dataset(ds, &train_view)
        })
        .collect::<Result<_>>()?;

    let output = run_ffc(&cfg, &client_data)?;

    let trees: Vec<ExpressionTree> = output
        .features
        .iter()
        .map(|f| f.tree())
        .collect::<Result<_>>()?;
    let tree_refs: Vec<&ExpressionTree> = trees.iter().collect();
    let acc_constructed = constructed_accuracy(ds, &split, &tree_refs, file_cfg.min_leaf)?;
    let acc_baseline = baseline_no_fc(ds, &split, file_cfg.min_leaf)?;

    let tf = ds.n_features();
    let cf = output.features.len();
    let mut resolved = file_cfg.clone();
    resolved.clients = Some(partition.n_clients());
    let results = Results {
        dataset: dataset_name(&file_cfg.dataset),
        tf,
        cf,
        fr: feature_reduction(tf, cf)?,
        acc_constructed,
        acc_baseline,
        seed: cfg.master_seed,
        rounds: cfg.global_rounds,
        config: resolved,
    };
    Ok((results, output))
}

/// Render the round log as JSON lines.
pub fn rounds_jsonl(output: &RunOutput) -> Result<String> {
    let mut lines = String::new();
    for record in &output.rounds {
        lines.push_str(&serde_json::to_string(record)?);
        lines.push('\n');
    }
    Ok(lines)
}

/// Write results.json, rounds.jsonl, and features.json; on any failure,
/// remove whatever was already written so no partial outputs linger.
pub fn write_outputs(out_dir: &Path, results: &Results, output: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut attempt = || -> Result<()> {
        let results_path = out_dir.join("results.json");
        std::fs::write(&results_path, serde_json::to_string_pretty(results)?)?;
        written.push(results_path);

        let rounds_path = out_dir.join("rounds.jsonl");
        std::fs::write(&rounds_path, rounds_jsonl(output)?)?;
        written.push(rounds_path);

        let features_path = out_dir.join("features.json");
        std::fs::write(&features_path, serde_json::to_string_pretty(&output.features)?)?;
        written.push(features_path);
        Ok(())
    };
    let result = attempt();
    if result.is_err() {
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
    }
    result
}
