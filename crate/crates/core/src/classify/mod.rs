//! Pixel classification: stratified splits, KNN, LDA, K-means and accuracy
//! metrics.

mod kmeans;
mod knn;
mod lda;
mod metrics;

pub use kmeans::{kmeans, KMeansResult};
pub use knn::{knn_classify, DistanceMetric};
pub use lda::{lda_fit, lda_predict, LdaModel};
pub use metrics::{confusion_matrix, overall_accuracy, per_class_accuracy, ClassificationMetrics};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};

/// Per-pixel class labels; 0 marks an unlabeled pixel, classes are `1..=C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(HsiError::DimMismatch(format!(
                "{} labels for a {height}x{width} map",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
            class_names: None,
        })
    }

    /// Number of classes `C`, the largest label present.
    pub fn classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0) as usize
    }

    /// Indices of labeled pixels, ascending.
    pub fn labeled(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Pixel count per class, index `c - 1` for class `c`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for &l in &self.labels {
            if l != 0 {
                counts[l as usize - 1] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of labeled pixels used for training, in `(0, 1]`.
    pub train_fraction: f64,
    pub seed: u64,
    /// Sample each class separately.
    pub stratified: bool,
}

fn take_count(fraction: f64, available: usize) -> usize {
    ((fraction * available as f64).round() as usize).clamp(1, available)
}

/// Splits labeled pixels into sorted, disjoint train and test index lists.
///
/// Stratified splits take `round(fraction * n_c)` pixels of every class
/// (at least one). Every class `1..=C` must end up with a training pixel.
pub fn split(labels: &LabelMap, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(HsiError::InvalidConfig(format!(
            "train fraction {} outside (0, 1]",
            spec.train_fraction
        )));
    }
    let labeled = labels.labeled();
    if labeled.is_empty() {
        return Err(HsiError::EmptyTrainSet);
    }
    let classes = labels.classes();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    if spec.stratified {
        for c in 1..=classes as u32 {
            let mut members: Vec<usize> = labeled
                .iter()
                .copied()
                .filter(|&i| labels.labels[i] == c)
                .collect();
            if members.is_empty() {
                return Err(HsiError::EmptyClass(c));
            }
            members.shuffle(&mut rng);
            let t = take_count(spec.train_fraction, members.len());
            train.extend_from_slice(&members[..t]);
        }
    } else {
        let mut pool = labeled.clone();
        pool.shuffle(&mut rng);
        let t = take_count(spec.train_fraction, pool.len());
        train.extend_from_slice(&pool[..t]);
        let mut seen = vec![false; classes];
        for &i in &train {
            seen[labels.labels[i] as usize - 1] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(HsiError::EmptyClass(c as u32 + 1));
        }
    }
    train.sort_unstable();
    let mut in_train = vec![false; labels.labels.len()];
    for &i in &train {
        in_train[i] = true;
    }
    let test = labeled.into_iter().filter(|&i| !in_train[i]).collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(per_class: usize, classes: u32) -> LabelMap {
        let mut labels: Vec<u32> = (1..=classes)
            .flat_map(|c| std::iter::repeat_n(c, per_class))
            .collect();
        labels.push(0);
        let n = labels.len();
        LabelMap::new(1, n, labels).unwrap()
    }

    fn spec(train_fraction: f64, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction,
            seed,
            stratified: true,
        }
    }

    #[test]
    fn full_fraction_trains_everything() {
        let m = blocks(4, 3);
        let (train, test) = split(&m, &spec(1.0, 0)).unwrap();
        assert_eq!(train, m.labeled());
        assert!(test.is_empty());
    }

    #[test]
    fn stratified_counts() {
        let m = blocks(10, 3);
        let (train, test) = split(&m, &spec(0.3, 5)).unwrap();
        for c in 1..=3 {
            assert_eq!(train.iter().filter(|&&i| m.labels[i] == c).count(), 3);
        }
        assert_eq!(train.len() + test.len(), 30);
        assert!(train.iter().all(|i| !test.contains(i)));
        assert!(!train.contains(&30) && !test.contains(&30));
    }

    #[test]
    fn deterministic_per_seed() {
        let m = blocks(20, 2);
        let a = split(&m, &spec(0.5, 9)).unwrap();
        assert_eq!(a, split(&m, &spec(0.5, 9)).unwrap());
        let distinct = (10..15)
            .filter(|&s| split(&m, &spec(0.5, s)).unwrap() != a)
            .count();
        assert!(distinct > 0);
    }

    #[test]
    fn missing_class_is_reported() {
        let m = LabelMap::new(1, 3, vec![1, 3, 3]).unwrap();
        assert!(matches!(
            split(&m, &spec(0.5, 0)),
            Err(HsiError::EmptyClass(2))
        ));
        let unstrat = SplitSpec {
            stratified: false,
            ..spec(0.01, 0)
        };
        assert!(matches!(
            split(&blocks(50, 2), &unstrat),
            Err(HsiError::EmptyClass(_))
        ));
    }
}
