use serde::Serialize;

use crate::error::{HsiError, Result};

/// `{oa, per_class, confusion}` as written to metrics files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub oa: f64,
    /// `NaN` (serialized as `null`) for classes absent from the truth.
    pub per_class: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
}

impl ClassificationMetrics {
    pub fn compute(pred: &[u32], truth: &[u32], classes: usize) -> Result<Self> {
        let confusion = confusion_matrix(pred, truth, classes)?;
        Ok(Self {
            oa: overall_accuracy(pred, truth)?,
            per_class: per_class_accuracy(&confusion),
            confusion,
        })
    }
}

fn check_lengths(pred: &[u32], truth: &[u32]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(HsiError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    Ok(())
}

/// Fraction of labeled (`truth != 0`) pixels predicted correctly.
pub fn overall_accuracy(pred: &[u32], truth: &[u32]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let (mut hit, mut total) = (0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        if t != 0 {
            total += 1;
            hit += usize::from(p == t);
        }
    }
    if total == 0 {
        return Err(HsiError::DegenerateInput(
            "no labeled pixels to score".into(),
        ));
    }
    Ok(hit as f64 / total as f64)
}

/// `confusion[i][j]` counts pixels of true class `i + 1` predicted as `j + 1`.
/// Unlabeled truth pixels are skipped.
pub fn confusion_matrix(pred: &[u32], truth: &[u32], classes: usize) -> Result<Vec<Vec<u64>>> {
    check_lengths(pred, truth)?;
    let mut m = vec![vec![0u64; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if t == 0 {
            continue;
        }
        if t as usize > classes {
            return Err(HsiError::InvalidLabel(t));
        }
        if p == 0 || p as usize > classes {
            return Err(HsiError::InvalidLabel(p));
        }
        m[t as usize - 1][p as usize - 1] += 1;
    }
    Ok(m)
}

/// Row-wise recall from a confusion matrix.
pub fn per_class_accuracy(confusion: &[Vec<u64>]) -> Vec<f64> {
    confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                f64::NAN
            } else {
                row[i] as f64 / total as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_hopeless() {
        let t = [1, 2, 3, 0];
        assert_eq!(overall_accuracy(&t, &t).unwrap(), 1.0);
        let c = confusion_matrix(&t, &t, 3).unwrap();
        assert_eq!(c, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(overall_accuracy(&[2, 3, 1, 1], &t).unwrap(), 0.0);
    }

    #[test]
    fn hand_case() {
        let truth = [1, 1, 2, 2];
        let pred = [1, 2, 2, 2];
        assert_eq!(overall_accuracy(&pred, &truth).unwrap(), 0.75);
        let c = confusion_matrix(&pred, &truth, 2).unwrap();
        assert_eq!(c, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(per_class_accuracy(&c), vec![0.5, 1.0]);
    }

    #[test]
    fn trace_agrees_with_oa() {
        let truth = [1, 2, 3, 1, 2, 3, 0, 3];
        let pred = [1, 3, 3, 2, 2, 3, 1, 1];
        let c = confusion_matrix(&pred, &truth, 3).unwrap();
        let diag: u64 = (0..3).map(|i| c[i][i]).sum();
        let total: u64 = c.iter().flatten().sum();
        assert_eq!(
            diag as f64 / total as f64,
            overall_accuracy(&pred, &truth).unwrap()
        );
    }

    #[test]
    fn mismatched_lengths() {
        assert!(matches!(
            overall_accuracy(&[1], &[1, 2]),
            Err(HsiError::LengthMismatch { left: 1, right: 2 })
        ));
    }
}
