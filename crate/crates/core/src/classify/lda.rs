use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};
use crate::linalg::spd_solve;

/// Shared-covariance Gaussian discriminant.
///
/// Class `classes[j]` scores `weights[:, j]^T x + bias[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub classes: Vec<u32>,
    pub weights: DMatrix<f64>,
    pub bias: Vec<f64>,
}

/// Fits class means, pooled within-class covariance (ridge `1e-6 trace/f`)
/// and empirical priors from columns of `train_x`.
pub fn lda_fit(train_x: &DMatrix<f64>, train_y: &[u32]) -> Result<LdaModel> {
    let (f, m) = train_x.shape();
    if m == 0 {
        return Err(HsiError::EmptyTrainSet);
    }
    if train_y.len() != m {
        return Err(HsiError::LengthMismatch {
            left: m,
            right: train_y.len(),
        });
    }
    let mut classes: Vec<u32> = train_y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(HsiError::SingleClass(classes.len()));
    }
    let slot = |y: u32| classes.binary_search(&y).expect("class collected above");
    let c = classes.len();
    let mut means = DMatrix::zeros(f, c);
    let mut counts = vec![0usize; c];
    for (col, &y) in train_x.column_iter().zip(train_y) {
        let j = slot(y);
        counts[j] += 1;
        let mut mj = means.column_mut(j);
        mj += col;
    }
    for (j, &n) in counts.iter().enumerate() {
        let mut mj = means.column_mut(j);
        mj /= n as f64;
    }
    let mut centered = train_x.clone();
    for (mut col, &y) in centered.column_iter_mut().zip(train_y) {
        col -= means.column(slot(y));
    }
    let dof = m.saturating_sub(c).max(1) as f64;
    let mut cov = &centered * centered.transpose() / dof;
    cov = (&cov + cov.transpose()) * 0.5;
    let eps = 1e-6 * cov.trace() / f as f64;
    let eps = if eps > 0.0 { eps } else { 1e-12 };
    for i in 0..f {
        cov[(i, i)] += eps;
    }
    let weights = spd_solve(&cov, &means)?;
    let bias = (0..c)
        .map(|j| {
            let prior = counts[j] as f64 / m as f64;
            -0.5 * means.column(j).dot(&weights.column(j)) + prior.ln()
        })
        .collect();
    Ok(LdaModel {
        classes,
        weights,
        bias,
    })
}

/// Highest-scoring class per column; ties go to the lower class id.
pub fn lda_predict(model: &LdaModel, x: &DMatrix<f64>) -> Result<Vec<u32>> {
    if x.nrows() != model.weights.nrows() {
        return Err(HsiError::DimMismatch(format!(
            "model has {} features, data has {}",
            model.weights.nrows(),
            x.nrows()
        )));
    }
    let scores = model.weights.transpose() * x
        + DMatrix::from_columns(&vec![DVector::from_vec(model.bias.clone()); x.ncols()]);
    Ok(scores
        .column_iter()
        .map(|s| {
            let mut best = 0;
            for j in 1..s.len() {
                if s[j] > s[best] {
                    best = j;
                }
            }
            model.classes[best]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_pair() -> (DMatrix<f64>, Vec<u32>) {
        // class 1 around -e1, class 2 around +e1, identical spread
        let pts = [
            (-1.0, 0.0),
            (-1.5, 0.5),
            (-0.5, -0.5),
            (-1.0, 0.0),
            (1.0, 0.0),
            (1.5, 0.5),
            (0.5, -0.5),
            (1.0, 0.0),
        ];
        let x = DMatrix::from_fn(
            2,
            pts.len(),
            |r, c| if r == 0 { pts[c].0 } else { pts[c].1 },
        );
        (x, vec![1, 1, 1, 1, 2, 2, 2, 2])
    }

    #[test]
    fn symmetric_boundary() {
        let (x, y) = symmetric_pair();
        let m = lda_fit(&x, &y).unwrap();
        let q = DMatrix::from_column_slice(2, 4, &[-0.1, 0.0, 0.1, 0.0, -0.1, 3.0, 0.1, -3.0]);
        assert_eq!(lda_predict(&m, &q).unwrap(), vec![1, 2, 1, 2]);
    }

    #[test]
    fn class_means_classify_as_themselves() {
        let (x, y) = symmetric_pair();
        let m = lda_fit(&x, &y).unwrap();
        let means = DMatrix::from_column_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]);
        assert_eq!(lda_predict(&m, &means).unwrap(), vec![1, 2]);
    }

    #[test]
    fn single_class_rejected() {
        let x = DMatrix::from_element(2, 3, 1.0);
        assert!(matches!(
            lda_fit(&x, &[4, 4, 4]),
            Err(HsiError::SingleClass(1))
        ));
    }
}
