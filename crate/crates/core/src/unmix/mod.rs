//! Linear mixture model: endmember extraction, abundance estimation, joint
//! NMF unmixing and library matching.

mod assignment;
mod least_squares;
mod nfindr;
mod nmf;
mod ppi;
mod vca;

pub use assignment::{hungarian, match_endmembers, EndmemberMatch};
pub use least_squares::{fcls, fcls_with_report, project_to_simplex, ucls, FclsReport};
pub use nfindr::{nfindr, simplex_volume, NfindrResult, NFINDR_RESTARTS};
pub use nmf::{nmf_unmix, NmfConfig, NmfInit, NmfResult, ASC_DELTA};
pub use ppi::{ppi, PpiResult};
pub use vca::{vca, VcaMode, VcaResult};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calib::resample_spectrum;
use crate::cube::SpectralAxis;
use crate::error::{HsiError, Result};
use crate::textio::SpectraTable;

/// Entry tolerance below zero accepted by the fully constrained invariant.
pub const ANC_TOL: f64 = 1e-9;
/// Column-sum tolerance accepted by the fully constrained invariant.
pub const ASC_TOL: f64 = 1e-6;

/// Endmember spectra, one per column (`l x p`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndmemberSet {
    pub spectra: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    /// Source pixel of each column, for extractors that pick data pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<Vec<usize>>,
}

impl EndmemberSet {
    pub fn new(spectra: DMatrix<f64>) -> Result<Self> {
        if spectra.ncols() == 0 || spectra.nrows() == 0 {
            return Err(HsiError::DegenerateInput("endmember set is empty".into()));
        }
        Ok(Self {
            spectra,
            names: None,
            pixels: None,
        })
    }

    /// Columns `pixels` of `x`.
    pub fn from_pixels(x: &DMatrix<f64>, pixels: Vec<usize>) -> Result<Self> {
        let spectra = x.select_columns(&pixels);
        let mut set = Self::new(spectra)?;
        set.pixels = Some(pixels);
        Ok(set)
    }

    pub fn bands(&self) -> usize {
        self.spectra.nrows()
    }

    pub fn count(&self) -> usize {
        self.spectra.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintMode {
    Unconstrained,
    /// Columns sum to one.
    SumToOne,
    /// Columns are nonnegative and sum to one.
    Full,
}

/// Abundance coefficients, one column per pixel (`p x n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbundanceMaps {
    pub coefficients: DMatrix<f64>,
    pub mode: ConstraintMode,
}

impl AbundanceMaps {
    /// Checks nonnegativity and sum-to-one within `ANC_TOL` and `ASC_TOL`.
    pub fn satisfies_full(&self) -> bool {
        satisfies_full(&self.coefficients)
    }
}

pub(crate) fn satisfies_full(a: &DMatrix<f64>) -> bool {
    a.iter().all(|&v| v >= -ANC_TOL) && a.column_iter().all(|c| (c.sum() - 1.0).abs() <= ASC_TOL)
}

/// `E A` plus seeded white Gaussian noise of standard deviation `noise_sigma`.
pub fn lmm_synthesize(
    e: &EndmemberSet,
    a: &AbundanceMaps,
    noise_sigma: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if e.count() != a.coefficients.nrows() {
        return Err(HsiError::DimMismatch(format!(
            "{} endmembers but {} abundance rows",
            e.count(),
            a.coefficients.nrows()
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(HsiError::InvalidConfig(format!(
            "noise sigma {noise_sigma}"
        )));
    }
    let mut x = &e.spectra * &a.coefficients;
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma checked");
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(x)
}

/// Spectral angle in radians, in `[0, pi]`.
pub fn sad(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(HsiError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(HsiError::ZeroVector);
    }
    // half-angle form keeps precision for nearly parallel spectra
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub name: String,
    pub axis: SpectralAxis,
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralLibrary {
    pub entries: Vec<LibraryEntry>,
}

impl From<&SpectraTable> for SpectralLibrary {
    fn from(t: &SpectraTable) -> Self {
        let entries = t
            .names
            .iter()
            .zip(t.spectra.column_iter())
            .map(|(name, col)| LibraryEntry {
                name: name.clone(),
                axis: t.axis.clone(),
                spectrum: col.iter().copied().collect(),
            })
            .collect();
        Self { entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMetric {
    SpectralAngle,
    Euclidean,
}

/// Library ranking for one endmember; lower scores are closer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LibraryMatch {
    pub best: String,
    pub best_score: f64,
    /// Every entry, closest first.
    pub ranking: Vec<(String, f64)>,
}

/// Ranks library entries against each endmember after resampling them onto
/// `axis`, the wavelength grid of `e`.
pub fn library_match(
    e: &EndmemberSet,
    axis: &SpectralAxis,
    lib: &SpectralLibrary,
    metric: MatchMetric,
) -> Result<Vec<LibraryMatch>> {
    if axis.len() != e.bands() {
        return Err(HsiError::BandCountMismatch {
            cube: e.bands(),
            reference: axis.len(),
        });
    }
    if lib.entries.is_empty() {
        return Err(HsiError::DegenerateInput(
            "spectral library is empty".into(),
        ));
    }
    let resampled: Vec<Vec<f64>> = lib
        .entries
        .iter()
        .map(|en| resample_spectrum(&en.axis, &en.spectrum, axis))
        .collect::<Result<_>>()?;
    e.spectra
        .column_iter()
        .map(|col| {
            let s: Vec<f64> = col.iter().copied().collect();
            let mut ranking = lib
                .entries
                .iter()
                .zip(&resampled)
                .map(|(en, r)| {
                    let score = match metric {
                        MatchMetric::SpectralAngle => sad(&s, r)?,
                        MatchMetric::Euclidean => s
                            .iter()
                            .zip(r)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt(),
                    };
                    Ok((en.name.clone(), score))
                })
                .collect::<Result<Vec<_>>>()?;
            ranking.sort_by(|a, b| a.1.total_cmp(&b.1));
            Ok(LibraryMatch {
                best: ranking[0].0.clone(),
                best_score: ranking[0].1,
                ranking,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn sad_basics() {
        let s = [0.2, 0.5, 0.9];
        assert_eq!(sad(&s, &s).unwrap(), 0.0);
        let twice: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        assert!(sad(&s, &twice).unwrap() < 1e-15);
        assert!((sad(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(matches!(
            sad(&[0.0, 0.0], &[1.0, 0.0]),
            Err(HsiError::ZeroVector)
        ));
    }

    #[test]
    fn synthesize_hand_case() {
        let e = EndmemberSet::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        ))
        .unwrap();
        let a = AbundanceMaps {
            coefficients: DMatrix::from_row_slice(2, 2, &[0.25, 1.0, 0.75, 0.0]),
            mode: ConstraintMode::Full,
        };
        let x = lmm_synthesize(&e, &a, 0.0, 0).unwrap();
        // column 0: 0.25*[1,3,5] + 0.75*[2,4,6]
        assert_eq!(x.column(0).as_slice(), &[1.75, 3.75, 5.75]);
        assert_eq!(x.column(1).as_slice(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn single_endmember_everywhere() {
        let e = EndmemberSet::new(DMatrix::from_column_slice(2, 1, &[0.3, 0.7])).unwrap();
        let a = AbundanceMaps {
            coefficients: DMatrix::from_element(1, 5, 1.0),
            mode: ConstraintMode::Full,
        };
        let x = lmm_synthesize(&e, &a, 0.0, 0).unwrap();
        assert!(x.column_iter().all(|c| c.as_slice() == [0.3, 0.7]));
        let bad = AbundanceMaps {
            coefficients: DMatrix::from_element(2, 5, 0.5),
            mode: ConstraintMode::Full,
        };
        assert!(matches!(
            lmm_synthesize(&e, &bad, 0.0, 0),
            Err(HsiError::DimMismatch(_))
        ));
    }

    #[test]
    fn library_names_recovered() {
        let axis = SpectralAxis::linspace(400.0, 700.0, 4).unwrap();
        let truth = DMatrix::from_column_slice(4, 2, &[0.1, 0.2, 0.3, 0.4, 0.9, 0.5, 0.2, 0.1]);
        let lib_axis = SpectralAxis::linspace(400.0, 700.0, 7).unwrap();
        // library sampled twice as densely; linear spectra survive resampling exactly
        let entries = vec![
            LibraryEntry {
                name: "flat".into(),
                axis: lib_axis.clone(),
                spectrum: vec![0.5; 7],
            },
            LibraryEntry {
                name: "rising".into(),
                axis: lib_axis.clone(),
                spectrum: (0..7).map(|i| 0.1 + 0.05 * i as f64).collect(),
            },
            LibraryEntry {
                name: "falling".into(),
                axis: axis.clone(),
                spectrum: vec![0.9, 0.5, 0.2, 0.1],
            },
        ];
        let lib = SpectralLibrary { entries };
        let m = library_match(
            &EndmemberSet::new(truth).unwrap(),
            &axis,
            &lib,
            MatchMetric::SpectralAngle,
        )
        .unwrap();
        assert_eq!(m[0].best, "rising");
        assert_eq!(m[1].best, "falling");
        assert_eq!(m[0].ranking.len(), 3);
    }
}
