//! Dimensionality reduction: PCA, MNF and band selection.

mod bands;
mod mnf;
mod pca;

pub use bands::{select_bands, BandCriterion, BandSubset, ENTROPY_BINS};
pub use mnf::{estimate_noise_covariance, mnf_fit};
pub use pca::pca_fit;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionKind {
    Pca,
    Mnf,
}

/// Linear map from `l` bands to `k` components.
///
/// `basis` holds the forward transform: scores are
/// `basis^T (x - mean)`. For PCA its columns are orthonormal and the inverse
/// is `basis` itself; MNF stores a separate `inverse`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjection {
    pub mean: DVector<f64>,
    pub basis: DMatrix<f64>,
    /// Eigenvalues (PCA) or signal-to-noise ratios (MNF), descending.
    pub scores: Vec<f64>,
    pub kind: ProjectionKind,
    pub inverse: Option<DMatrix<f64>>,
}

impl LinearProjection {
    pub fn bands(&self) -> usize {
        self.basis.nrows()
    }

    pub fn components(&self) -> usize {
        self.basis.ncols()
    }

    /// `k x n` component scores of the columns of `x`.
    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.bands() {
            return Err(HsiError::DimMismatch(format!(
                "data has {} bands, projection expects {}",
                x.nrows(),
                self.bands()
            )));
        }
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(self.basis.transpose() * centered)
    }

    /// Maps `k x n` scores back to band space.
    pub fn reconstruct(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.nrows() != self.components() {
            return Err(HsiError::DimMismatch(format!(
                "{} score rows, projection has {} components",
                z.nrows(),
                self.components()
            )));
        }
        let inv = self.inverse.as_ref().unwrap_or(&self.basis);
        let mut x = inv * z;
        for mut col in x.column_iter_mut() {
            col += &self.mean;
        }
        Ok(x)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProjectionFile::from(self))
            .expect("plain numeric data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ProjectionFile = serde_json::from_str(text).map_err(|e| HsiError::TextParse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        f.try_into()
    }
}

/// Serialized form; matrices are row-major.
#[derive(Debug, Serialize, Deserialize)]
struct ProjectionFile {
    kind: ProjectionKind,
    bands: usize,
    components: usize,
    mean: Vec<f64>,
    basis: Vec<f64>,
    scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inverse: Option<Vec<f64>>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl From<&LinearProjection> for ProjectionFile {
    fn from(p: &LinearProjection) -> Self {
        Self {
            kind: p.kind,
            bands: p.bands(),
            components: p.components(),
            mean: p.mean.as_slice().to_vec(),
            basis: row_major(&p.basis),
            scores: p.scores.clone(),
            inverse: p.inverse.as_ref().map(row_major),
        }
    }
}

impl TryFrom<ProjectionFile> for LinearProjection {
    type Error = HsiError;

    fn try_from(f: ProjectionFile) -> Result<Self> {
        let (l, k) = (f.bands, f.components);
        let bad = |what: &str| {
            HsiError::DimMismatch(format!("projection file: {what} has the wrong length"))
        };
        if f.mean.len() != l {
            return Err(bad("mean"));
        }
        if f.basis.len() != l * k {
            return Err(bad("basis"));
        }
        if f.scores.len() != k {
            return Err(bad("scores"));
        }
        let inverse = match f.inverse {
            Some(v) if v.len() == l * k => Some(DMatrix::from_row_slice(l, k, &v)),
            Some(_) => return Err(bad("inverse")),
            None => None,
        };
        Ok(Self {
            mean: DVector::from_vec(f.mean),
            basis: DMatrix::from_row_slice(l, k, &f.basis),
            scores: f.scores,
            kind: f.kind,
            inverse,
        })
    }
}
