//! Downstream evaluation: transform a dataset through constructed features,
//! fit a gain-ratio decision tree on the training part, and report accuracy
//! and feature-reduction percentages.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::Error;
use crate::fitness::{feature_entropy, info_gain, BinnedFeature};
use crate::genome::{evaluate_feature, ExpressionTree};
use crate::Result;

/// A dataset re-expressed as constructed-feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedDataset {
    /// One column per constructed feature, each of length `n_samples`.
    columns: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl TransformedDataset {
    pub fn new(columns: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("at least one column required".into()));
        }
        for (k, col) in columns.iter().enumerate() {
            if col.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    expected: labels.len(),
                    got: col.len(),
                });
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "non-finite value in column {k}, row {i}"
                )));
            }
        }
        Ok(Self {
            columns,
            labels,
            n_classes,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Row-major view of one sample.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|col| col[i]).collect()
    }

    /// Restrict to the given sample indices.
    pub fn subset(&self, indices: &[usize]) -> TransformedDataset {
        TransformedDataset {
            columns: self
                .columns
                .iter()
                .map(|col| indices.iter().map(|&i| col[i]).collect())
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

/// Evaluate every constructed feature over every sample of a dataset.
/// The same frozen trees must be applied to train and test parts alike.
pub fn transform(ds: &Dataset, features: &[&ExpressionTree]) -> Result<TransformedDataset> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("no constructed features supplied".into()));
    }
    for tree in features {
        let max = tree.max_feature_index();
        if max >= ds.n_features() {
            return Err(Error::InvalidArgument(format!(
                "feature index f{max} out of range for {} original features",
                ds.n_features()
            )));
        }
    }
    let columns = features
        .iter()
        .map(|tree| evaluate_feature(tree, ds.rows()))
        .collect();
    TransformedDataset::new(columns, ds.labels().to_vec(), ds.n_classes())
}

/// Transform the original columns unchanged (the no-construction baseline
/// path shares the tree-training code this way).
fn identity_transform(ds: &Dataset) -> TransformedDataset {
    let columns = (0..ds.n_features())
        .map(|j| ds.rows().iter().map(|row| row[j]).collect())
        .collect();
    TransformedDataset {
        columns,
        labels: ds.labels().to_vec(),
        n_classes: ds.n_classes(),
    }
}

/// Binary decision tree with threshold splits chosen by gain ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DecisionTree {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<DecisionTree>,
        right: Box<DecisionTree>,
    },
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 1,
            DecisionTree::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Majority class; ties resolve to the lowest class id.
fn majority_class(labels: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(class, _)| class)
        .unwrap_or(0)
}

fn is_pure(labels: &[usize]) -> bool {
    labels.windows(2).all(|w| w[0] == w[1])
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain_ratio: f64,
}

/// Best gain-ratio split over all columns, candidate thresholds at midpoints
/// between consecutive distinct sorted values. Splits leaving fewer than
/// `min_leaf` samples on a side are discarded, as are splits without positive
/// information gain. Ties keep the first candidate in (column, threshold)
/// scan order.
fn best_split(tds: &TransformedDataset, min_leaf: usize) -> Option<SplitChoice> {
    let n = tds.n_samples();
    let labels = tds.labels();
    let mut best: Option<SplitChoice> = None;
    for (feature, col) in tds.columns().iter().enumerate() {
        let mut values: Vec<f64> = col.clone();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for pair in values.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let membership: Vec<usize> = col.iter().map(|&v| usize::from(v > threshold)).collect();
            let left_count = membership.iter().filter(|&&m| m == 0).count();
            if left_count < min_leaf || n - left_count < min_leaf {
                continue;
            }
            let binned = BinnedFeature::new(membership, 2).expect("binary membership");
            let split_entropy = feature_entropy(&binned);
            if split_entropy == 0.0 {
                continue;
            }
            let gain = info_gain(&binned, labels, tds.n_classes()).expect("lengths match");
            if gain <= 1e-12 {
                continue;
            }
            let gain_ratio = gain / split_entropy;
            if best.as_ref().is_none_or(|b| gain_ratio > b.gain_ratio) {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    gain_ratio,
                });
            }
        }
    }
    best
}

/// Fit an unpruned gain-ratio decision tree. Recursion stops on purity, on
/// nodes smaller than `2 * min_leaf`, or when no valid split has positive
/// gain; leaves take the majority class.
pub fn train_c45(tds: &TransformedDataset, min_leaf: usize) -> Result<DecisionTree> {
    if tds.n_samples() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if min_leaf == 0 {
        return Err(Error::InvalidArgument("min_leaf must be >= 1".into()));
    }
    Ok(grow(tds, min_leaf))
}

fn grow(tds: &TransformedDataset, min_leaf: usize) -> DecisionTree {
    let labels = tds.labels();
    if is_pure(labels) || tds.n_samples() < 2 * min_leaf {
        return DecisionTree::Leaf(majority_class(labels, tds.n_classes()));
    }
    match best_split(tds, min_leaf) {
        Some(choice) => {
            let col = &tds.columns()[choice.feature];
            let left_idx: Vec<usize> = (0..tds.n_samples())
                .filter(|&i| col[i] <= choice.threshold)
                .collect();
            let right_idx: Vec<usize> = (0..tds.n_samples())
                .filter(|&i| col[i] > choice.threshold)
                .collect();
            DecisionTree::Split {
                feature: choice.feature,
                threshold: choice.threshold,
                left: Box::new(grow(&tds.subset(&left_idx), min_leaf)),
                right: Box::new(grow(&tds.subset(&right_idx), min_leaf)),
            }
        }
        None => DecisionTree::Leaf(majority_class(labels, tds.n_classes())),
    }
}

/// Route one row to a leaf: values at or below the threshold go left.
pub fn predict(tree: &DecisionTree, row: &[f64]) -> usize {
    match tree {
        DecisionTree::Leaf(class) => *class,
        DecisionTree::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if row[*feature] <= *threshold {
                predict(left, row)
            } else {
                predict(right, row)
            }
        }
    }
}

/// Test-set accuracy as a percentage: `100 * correct / total`.
pub fn accuracy(tree: &DecisionTree, tds: &TransformedDataset) -> Result<f64> {
    if tds.n_samples() == 0 {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let correct = (0..tds.n_samples())
        .filter(|&i| predict(tree, &tds.row(i)) == tds.labels()[i])
        .count();
    Ok(100.0 * correct as f64 / tds.n_samples() as f64)
}

/// Feature reduction as a percentage: `100 * (TF - CF) / TF`. Negative when
/// more features were constructed than existed originally.
pub fn feature_reduction(total_features: usize, constructed_features: usize) -> Result<f64> {
    if total_features == 0 {
        return Err(Error::InvalidArgument("total feature count must be >= 1".into()));
    }
    Ok(100.0 * (total_features as f64 - constructed_features as f64) / total_features as f64)
}

/// Train on the original feature columns and report test accuracy: the
/// comparison anchor for every constructed-feature run.
pub fn baseline_no_fc(ds: &Dataset, split: &Split, min_leaf: usize) -> Result<f64> {
    let tds = identity_transform(ds);
    let tree = train_c45(&tds.subset(&split.train_indices), min_leaf)?;
    accuracy(&tree, &tds.subset(&split.test_indices))
}

/// Train on constructed-feature columns and report test accuracy.
pub fn constructed_accuracy(
    ds: &Dataset,
    split: &Split,
    features: &[&ExpressionTree],
    min_leaf: usize,
) -> Result<f64> {
    let tds = transform(ds, features)?;
    let tree = train_c45(&tds.subset(&split.train_indices), min_leaf)?;
    accuracy(&tree, &tds.subset(&split.test_indices))
}
