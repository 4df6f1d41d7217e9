//! Python bindings for the federated feature-construction simulator.
//!
//! Exposes dataset loading, splitting, client partitioning, the genome and
//! fitness primitives, and the full pipeline (`run`) to Python. Build with
//! `cargo build -p ffc-py --release`; the resulting `libffc_py.so` imports as
//! `ffc_py` once renamed/copied (see python/smoke_test.py).

use std::collections::BTreeMap;
use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ffc::cli::{load_inputs, run_pipeline, write_outputs, FileConfig};
use ffc::data;
use ffc::federation::RunConfig;
use ffc::fitness;
use ffc::genome;

fn err(e: ffc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An in-memory tabular dataset: numeric sample matrix plus integer class
/// labels.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Load a CSV file with a header row; the label column defaults to the
    /// last column and is mapped to contiguous integer classes in
    /// first-appearance order.
    #[staticmethod]
    #[pyo3(signature = (path, label_column=None))]
    fn load_csv(path: &str, label_column: Option<&str>) -> PyResult<Self> {
        Ok(Self {
            inner: data::Dataset::load_csv(path, label_column).map_err(err)?,
        })
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    fn class_counts(&self) -> Vec<usize> {
        self.inner.class_counts()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        self.inner
            .rows()
            .get(i)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("row {i} out of range")))
    }

    fn __len__(&self) -> usize {
        self.inner.n_samples()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_samples={}, n_features={}, n_classes={})",
            self.inner.n_samples(),
            self.inner.n_features(),
            self.inner.n_classes()
        )
    }
}

/// Class-stratified train/test split; returns (train_indices, test_indices).
#[pyfunction]
fn stratified_split(
    dataset: &PyDataset,
    test_fraction: f64,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let split = data::stratified_split(&dataset.inner, test_fraction, seed).map_err(err)?;
    Ok((split.train_indices, split.test_indices))
}

fn partition_to_dict(partition: &data::Partition) -> BTreeMap<usize, Vec<usize>> {
    (0..partition.n_clients())
        .map(|id| (id, partition.client(id).to_vec()))
        .collect()
}

/// Shuffle samples and deal them round-robin across clients; returns
/// {client_id: [sample indices]}.
#[pyfunction]
fn partition_iid(
    dataset: &PyDataset,
    clients: usize,
    seed: u64,
) -> PyResult<BTreeMap<usize, Vec<usize>>> {
    Ok(partition_to_dict(
        &data::partition_iid(&dataset.inner, clients, seed).map_err(err)?,
    ))
}

/// Label-sorted shard assignment producing skewed client label distributions.
#[pyfunction]
fn partition_noniid(
    dataset: &PyDataset,
    clients: usize,
    shards_per_client: usize,
    seed: u64,
) -> PyResult<BTreeMap<usize, Vec<usize>>> {
    Ok(partition_to_dict(
        &data::partition_noniid(&dataset.inner, clients, shards_per_client, seed).map_err(err)?,
    ))
}

/// Partition file content (JSON) in the exact on-disk schema `ffc run`
/// consumes.
#[pyfunction]
#[pyo3(signature = (dataset, clients, mode="iid", shards_per_client=2, seed=0))]
fn partition_json(
    dataset: &PyDataset,
    clients: usize,
    mode: &str,
    shards_per_client: usize,
    seed: u64,
) -> PyResult<String> {
    let partition = match mode {
        "iid" => data::partition_iid(&dataset.inner, clients, seed).map_err(err)?,
        "noniid" => data::partition_noniid(&dataset.inner, clients, shards_per_client, seed)
            .map_err(err)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "mode must be 'iid' or 'noniid', got '{other}'"
            )))
        }
    };
    partition.to_json().map_err(err)
}

/// Equal-frequency discretization into at most `bins` bin ids.
#[pyfunction]
fn discretize_equal_frequency(values: Vec<f64>, bins: usize) -> PyResult<Vec<usize>> {
    data::discretize_equal_frequency(&values, bins).map_err(err)
}

/// Shannon entropy of integer class labels, in bits.
#[pyfunction]
fn entropy(labels: Vec<usize>, n_classes: usize) -> PyResult<f64> {
    fitness::entropy(&labels, n_classes).map_err(err)
}

/// Information gain ratio of a real-valued feature against class labels
/// after equal-frequency binning.
#[pyfunction]
fn igr(values: Vec<f64>, labels: Vec<usize>, n_classes: usize, bins: usize) -> PyResult<f64> {
    fitness::igr(&values, &labels, n_classes, bins).map_err(err)
}

/// Program-string length for a feature count, tree depth, and operand arity.
#[pyfunction]
fn dimension(n_features: usize, depth: usize, arity: usize) -> PyResult<usize> {
    genome::dimension(n_features, depth, arity).map_err(err)
}

/// Evaluate a constructed-feature expression like "(div (add f3 f7) f1)"
/// over every sample of a dataset.
#[pyfunction]
fn evaluate_expression(expr: &str, dataset: &PyDataset) -> PyResult<Vec<f64>> {
    let tree = genome::parse_expression(expr).map_err(err)?;
    let max = tree.max_feature_index();
    if max >= dataset.inner.n_features() {
        return Err(PyValueError::new_err(format!(
            "expression references f{max} but the dataset has {} features",
            dataset.inner.n_features()
        )));
    }
    Ok(genome::evaluate_feature(&tree, dataset.inner.rows()))
}

/// Run the full federated pipeline from a config file (same JSON schema as
/// `ffc run`). Returns a JSON string with keys "results", "rounds", and
/// "features"; when `out_dir` is given, also writes results.json,
/// rounds.jsonl, and features.json there.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir=None))]
fn run(config_path: &str, out_dir: Option<&str>) -> PyResult<String> {
    let path = Path::new(config_path);
    let file_cfg = FileConfig::load(path).map_err(err)?;
    let (ds, partition) = load_inputs(&file_cfg, path).map_err(err)?;
    let (results, output) = run_pipeline(&file_cfg, &ds, &partition).map_err(err)?;
    if let Some(dir) = out_dir {
        write_outputs(Path::new(dir), &results, &output).map_err(err)?;
    }
    let combined = serde_json::json!({
        "results": results,
        "rounds": output.rounds,
        "features": output.features,
    });
    serde_json::to_string(&combined).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Stock run configuration as a JSON string (the defaults `ffc run` fills in).
#[pyfunction]
fn default_config() -> PyResult<String> {
    serde_json::to_string_pretty(&RunConfig::default())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn ffc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(partition_iid, m)?)?;
    m.add_function(wrap_pyfunction!(partition_noniid, m)?)?;
    m.add_function(wrap_pyfunction!(partition_json, m)?)?;
    m.add_function(wrap_pyfunction!(discretize_equal_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(igr, m)?)?;
    m.add_function(wrap_pyfunction!(dimension, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_expression, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
