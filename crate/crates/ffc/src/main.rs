//! Command-line front end: partition a dataset across simulated clients, run
//! the federated feature-construction loop, and score the results against a
//! no-construction baseline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ffc::cli::{dataset_name, load_inputs, run_pipeline, write_outputs, FileConfig};
use ffc::data::{partition_iid, partition_noniid, stratified_split, Dataset};
use ffc::error::Error;
use ffc::eval::{baseline_no_fc, constructed_accuracy, feature_reduction};
use ffc::federation::SelectedFeature;
use ffc::genome::ExpressionTree;
use ffc::rng::{derive_seed, tag};

#[derive(Parser)]
#[command(name = "ffc", version, about = "Federated feature construction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Iid,
    Noniid,
}

#[derive(Subcommand)]
enum Command {
    /// Assign dataset samples to simulated clients and write the partition file.
    Partition {
        /// Input CSV (header row, label column last unless --label-column).
        #[arg(long)]
        input: PathBuf,
        /// Label column name (defaults to the last column).
        #[arg(long)]
        label_column: Option<String>,
        /// Number of clients.
        #[arg(long)]
        clients: usize,
        /// iid deals shuffled samples round-robin; noniid assigns
        /// label-sorted shards.
        #[arg(long, value_enum, default_value = "iid")]
        mode: Mode,
        /// Shards per client (noniid only).
        #[arg(long, default_value_t = 2)]
        shards: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output partition JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full federated loop from a JSON config and write
    /// results.json, rounds.jsonl, and features.json.
    Run {
        /// JSON config file; see README for the schema.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for client phases (default: available
        /// parallelism, or FFC_THREADS). Thread count never changes results.
        #[arg(long)]
        threads: Option<usize>,
        /// Override the config's master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's global_rounds.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Score a saved features.json on a dataset.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label_column: Option<String>,
        /// features.json produced by `ffc run`.
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
        /// Master seed; the train/test split matches an `ffc run` with the
        /// same seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        min_leaf: usize,
    },
    /// Train on the original features only and report test accuracy.
    Baseline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label_column: Option<String>,
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        min_leaf: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> ffc::Result<()> {
    match command {
        Command::Partition {
            input,
            label_column,
            clients,
            mode,
            shards,
            seed,
            out,
        } => cmd_partition(&input, label_column.as_deref(), clients, mode, shards, seed, &out),
        Command::Run {
            config,
            out,
            threads,
            seed,
            rounds,
        } => cmd_run(&config, &out, threads, seed, rounds),
        Command::Evaluate {
            input,
            label_column,
            features,
            test_fraction,
            seed,
            min_leaf,
        } => cmd_evaluate(
            &input,
            label_column.as_deref(),
            &features,
            test_fraction,
            seed,
            min_leaf,
        ),
        Command::Baseline {
            input,
            label_column,
            test_fraction,
            seed,
            min_leaf,
        } => cmd_baseline(&input, label_column.as_deref(), test_fraction, seed, min_leaf),
    }
}

fn cmd_partition(
    input: &Path,
    label_column: Option<&str>,
    clients: usize,
    mode: Mode,
    shards: usize,
    seed: u64,
    out: &Path,
) -> ffc::Result<()> {
    let ds = Dataset::load_csv(input, label_column)?;
    let partition = match mode {
        Mode::Iid => partition_iid(&ds, clients, seed)?,
        Mode::Noniid => partition_noniid(&ds, clients, shards, seed)?,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, partition.to_json()?)?;

    for id in 0..partition.n_clients() {
        let members = partition.client(id);
        let mut histogram = vec![0usize; ds.n_classes()];
        for &i in members {
            histogram[ds.labels()[i]] += 1;
        }
        let labels: Vec<String> = histogram
            .iter()
            .enumerate()
            .filter(|(_, &count)| count > 0)
            .map(|(class, count)| format!("{class}:{count}"))
            .collect();
        println!(
            "client {id}: {} samples, labels {{{}}}",
            members.len(),
            labels.join(", ")
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    threads: Option<usize>,
    seed_override: Option<u64>,
    rounds_override: Option<usize>,
) -> ffc::Result<()> {
    let mut file_cfg = FileConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        file_cfg.master_seed = seed;
    }
    if let Some(rounds) = rounds_override {
        file_cfg.global_rounds = rounds;
    }
    let (ds, partition) = load_inputs(&file_cfg, config_path)?;

    let threads = threads
        .or_else(|| {
            std::env::var("FFC_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
        });
    if threads == 0 {
        return Err(Error::Config("--threads must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let (results, output) = pool.install(|| run_pipeline(&file_cfg, &ds, &partition))?;
    write_outputs(out_dir, &results, &output)?;
    println!("{}", serde_json::to_string_pretty(&results)?);
    Ok(())
}

fn cmd_evaluate(
    input: &Path,
    label_column: Option<&str>,
    features_path: &Path,
    test_fraction: f64,
    seed: u64,
    min_leaf: usize,
) -> ffc::Result<()> {
    let ds = Dataset::load_csv(input, label_column)?;
    let text = std::fs::read_to_string(features_path).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", features_path.display()))
    })?;
    let records: Vec<SelectedFeature> = serde_json::from_str(&text)?;
    if records.is_empty() {
        return Err(Error::Config("features file is empty".into()));
    }
    let trees: Vec<ExpressionTree> = records
        .iter()
        .map(SelectedFeature::tree)
        .collect::<ffc::Result<_>>()?;
    let tree_refs: Vec<&ExpressionTree> = trees.iter().collect();

    let split_seed = derive_seed(seed, &[tag::SPLIT]);
    let split = stratified_split(&ds, test_fraction, split_seed)?;
    let acc_constructed = constructed_accuracy(&ds, &split, &tree_refs, min_leaf)?;
    let acc_baseline = baseline_no_fc(&ds, &split, min_leaf)?;

    let tf = ds.n_features();
    let cf = trees.len();
    let summary = serde_json::json!({
        "dataset": dataset_name(&input.to_string_lossy()),
        "tf": tf,
        "cf": cf,
        "fr": feature_reduction(tf, cf)?,
        "acc_constructed": acc_constructed,
        "acc_baseline": acc_baseline,
        "seed": seed,
        "test_fraction": test_fraction,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_baseline(
    input: &Path,
    label_column: Option<&str>,
    test_fraction: f64,
    seed: u64,
    min_leaf: usize,
) -> ffc::Result<()> {
    let ds = Dataset::load_csv(input, label_column)?;
    let split_seed = derive_seed(seed, &[tag::SPLIT]);
    let split = stratified_split(&ds, test_fraction, split_seed)?;
    let acc_baseline = baseline_no_fc(&ds, &split, min_leaf)?;
    let summary = serde_json::json!({
        "dataset": dataset_name(&input.to_string_lossy()),
        "tf": ds.n_features(),
        "acc_baseline": acc_baseline,
        "seed": seed,
        "test_fraction": test_fraction,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
