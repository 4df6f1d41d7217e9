//! Filter-based fitness: entropy, information gain, and information gain
//! ratio of a constructed feature against class labels. All entropies are in
//! bits (log base 2).

use crate::data::discretize_equal_frequency;
use crate::error::Error;
use crate::Result;

/// A feature reduced to discrete bin ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedFeature {
    bin_ids: Vec<usize>,
    bin_count: usize,
}

impl BinnedFeature {
    pub fn new(bin_ids: Vec<usize>, bin_count: usize) -> Result<Self> {
        if bin_count < 1 {
            return Err(Error::InvalidArgument("bin_count must be >= 1".into()));
        }
        if bin_count > bin_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "bin_count {bin_count} exceeds sample count {}",
                bin_ids.len()
            )));
        }
        if let Some(&bad) = bin_ids.iter().find(|&&id| id >= bin_count) {
            return Err(Error::InvalidArgument(format!(
                "bin id {bad} out of range [0, {bin_count})"
            )));
        }
        Ok(Self { bin_ids, bin_count })
    }

    /// Bin a real-valued feature with equal-frequency cuts.
    pub fn from_values(values: &[f64], max_bins: usize) -> Result<Self> {
        let bin_ids = discretize_equal_frequency(values, max_bins)?;
        let bin_count = bin_ids.iter().max().map_or(1, |&m| m + 1);
        Ok(Self { bin_ids, bin_count })
    }

    pub fn bin_ids(&self) -> &[usize] {
        &self.bin_ids
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn len(&self) -> usize {
        self.bin_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_ids.is_empty()
    }
}

fn entropy_of_counts(counts: &[usize], total: usize) -> f64 {
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Shannon entropy of the class labels, `H(Y)`.
pub fn entropy(labels: &[usize], n_classes: usize) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("entropy of an empty label vector".into()));
    }
    let mut counts = vec![0usize; n_classes];
    for &label in labels {
        if label >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range [0, {n_classes})"
            )));
        }
        counts[label] += 1;
    }
    Ok(entropy_of_counts(&counts, labels.len()))
}

/// Entropy of the feature's bin distribution, `H(f)`.
pub fn feature_entropy(feature: &BinnedFeature) -> f64 {
    let mut counts = vec![0usize; feature.bin_count()];
    for &id in feature.bin_ids() {
        counts[id] += 1;
    }
    entropy_of_counts(&counts, feature.len())
}

/// Conditional entropy of the labels given the binned feature, `H(Y|f)`.
pub fn conditional_entropy(
    feature: &BinnedFeature,
    labels: &[usize],
    n_classes: usize,
) -> Result<f64> {
    if feature.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: feature.len(),
            got: labels.len(),
        });
    }
    let n = labels.len() as f64;
    let mut joint = vec![vec![0usize; n_classes]; feature.bin_count()];
    let mut bin_totals = vec![0usize; feature.bin_count()];
    for (&bin, &label) in feature.bin_ids().iter().zip(labels) {
        if label >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range [0, {n_classes})"
            )));
        }
        joint[bin][label] += 1;
        bin_totals[bin] += 1;
    }
    let mut h = 0.0;
    for (bin, counts) in joint.iter().enumerate() {
        if bin_totals[bin] == 0 {
            continue;
        }
        let p_bin = bin_totals[bin] as f64 / n;
        h += p_bin * entropy_of_counts(counts, bin_totals[bin]);
    }
    Ok(h)
}

/// Information gain of the binned feature: `H(Y) - H(Y|f)`, floored at zero
/// against floating-point round-off.
pub fn info_gain(feature: &BinnedFeature, labels: &[usize], n_classes: usize) -> Result<f64> {
    let h_y = entropy(labels, n_classes)?;
    let h_cond = conditional_entropy(feature, labels, n_classes)?;
    Ok((h_y - h_cond).max(0.0))
}

/// Information gain ratio of a real-valued constructed feature: the feature
/// is equal-frequency binned, then `IG / H(f)` is returned. A constant
/// feature (`H(f) = 0`) carries no information and scores zero.
pub fn igr(values: &[f64], labels: &[usize], n_classes: usize, max_bins: usize) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            got: labels.len(),
        });
    }
    let feature = BinnedFeature::from_values(values, max_bins)?;
    let h_f = feature_entropy(&feature);
    if h_f == 0.0 {
        return Ok(0.0);
    }
    Ok(info_gain(&feature, labels, n_classes)? / h_f)
}
