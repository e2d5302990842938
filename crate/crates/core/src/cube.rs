//! In-memory hyperspectral cube model.
//!
//! Samples are stored as `f64` in band-interleaved-by-pixel order: the
//! spectrum of pixel `(row, col)` occupies the contiguous slice starting at
//! `(row * width + col) * bands`. Pixels are enumerated row-major, and the
//! matrix view used by every linear-algebra routine in this crate has one
//! column per pixel in that same order.

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HsiError, Result};

/// Slack above 1.0 tolerated for reflectance samples.
///
/// Matches the calibration clip ceiling, so freshly calibrated cubes always
/// pass [`HyperCube::check_reflectance_range`].
pub const REFLECTANCE_CLIP_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    DigitalNumber,
    Radiance,
    Reflectance,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::DigitalNumber => "digital number",
            Quantity::Radiance => "radiance",
            Quantity::Reflectance => "reflectance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "digital number" | "dn" | "digitalnumber" => Some(Quantity::DigitalNumber),
            "radiance" => Some(Quantity::Radiance),
            "reflectance" => Some(Quantity::Reflectance),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interleave {
    Bsq,
    Bil,
    Bip,
}

impl Interleave {
    pub const ALL: [Interleave; 3] = [Interleave::Bsq, Interleave::Bil, Interleave::Bip];

    pub fn as_str(self) -> &'static str {
        match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bsq" => Some(Interleave::Bsq),
            "bil" => Some(Interleave::Bil),
            "bip" => Some(Interleave::Bip),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ByteOrder {
    LittleEndian,
    BigEndian,
}

/// Wavelength grid of the spectral axis, in nanometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAxis {
    wavelengths: Vec<f64>,
    fwhm: Option<Vec<f64>>,
}

impl SpectralAxis {
    pub fn new(wavelengths: Vec<f64>) -> Result<Self> {
        Self::with_fwhm(wavelengths, None)
    }

    pub fn with_fwhm(wavelengths: Vec<f64>, fwhm: Option<Vec<f64>>) -> Result<Self> {
        if let Some(w) = wavelengths.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(HsiError::InvalidAxis(format!(
                "wavelength {w} is not a non-negative number"
            )));
        }
        if let Some(i) = wavelengths.windows(2).position(|p| p[1] <= p[0]) {
            return Err(HsiError::InvalidAxis(format!(
                "wavelengths not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(f) = &fwhm {
            if f.len() != wavelengths.len() {
                return Err(HsiError::InvalidAxis(format!(
                    "{} fwhm values for {} wavelengths",
                    f.len(),
                    wavelengths.len()
                )));
            }
        }
        Ok(Self { wavelengths, fwhm })
    }

    /// Axis labelled by band index `0..bands`, used when a file carries no
    /// wavelength information.
    pub fn band_indices(bands: usize) -> Self {
        Self {
            wavelengths: (0..bands).map(|b| b as f64).collect(),
            fwhm: None,
        }
    }

    /// Evenly spaced grid from `start` to `end` inclusive.
    pub fn linspace(start: f64, end: f64, bands: usize) -> Result<Self> {
        let wl = match bands {
            0 => Vec::new(),
            1 => vec![start],
            _ => {
                let step = (end - start) / (bands - 1) as f64;
                (0..bands).map(|i| start + step * i as f64).collect()
            }
        };
        Self::new(wl)
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn fwhm(&self) -> Option<&[f64]> {
        self.fwhm.as_deref()
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    /// `(first, last)` wavelength, if any.
    pub fn range(&self) -> Option<(f64, f64)> {
        Some((*self.wavelengths.first()?, *self.wavelengths.last()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub sensor_name: String,
    pub acquisition_time: Option<String>,
    pub interleave: Interleave,
    pub data_type_code: u32,
    pub byte_order: ByteOrder,
    pub description: String,
    /// Header fields this crate does not interpret, in file order, with their
    /// raw value text.
    pub extra: IndexMap<String, String>,
    /// Set when the wavelength axis was synthesized from band indices.
    pub synthetic_wavelengths: bool,
}

impl Default for MetadataRecord {
    fn default() -> Self {
        Self {
            sensor_name: String::new(),
            acquisition_time: None,
            interleave: Interleave::Bsq,
            data_type_code: 4,
            byte_order: ByteOrder::LittleEndian,
            description: String::new(),
            extra: IndexMap::new(),
            synthetic_wavelengths: false,
        }
    }
}

/// Per-pixel observation flags; `true` means observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlane {
    height: usize,
    width: usize,
    flags: Vec<bool>,
}

impl MaskPlane {
    pub fn new(height: usize, width: usize, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != height * width {
            return Err(HsiError::DimMismatch(format!(
                "mask has {} flags for {}x{} pixels",
                flags.len(),
                height,
                width
            )));
        }
        Ok(Self {
            height,
            width,
            flags,
        })
    }

    pub fn all_observed(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            flags: vec![true; height * width],
        }
    }

    /// Mask with whole columns missing, the stripe pattern of push-broom
    /// sensors with dead detector elements.
    pub fn striped(height: usize, width: usize, missing_cols: &[usize]) -> Self {
        let mut m = Self::all_observed(height, width);
        for r in 0..height {
            for &c in missing_cols.iter().filter(|&&c| c < width) {
                m.flags[r * width + c] = false;
            }
        }
        m
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.flags[row * self.width + col]
    }

    pub fn observed_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
    pub quantity: Quantity,
    axis: SpectralAxis,
    pub metadata: MetadataRecord,
}

impl HyperCube {
    /// Builds a cube from band-interleaved-by-pixel samples.
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        values: Vec<f64>,
        quantity: Quantity,
        axis: SpectralAxis,
        metadata: MetadataRecord,
    ) -> Result<Self> {
        if values.len() != height * width * bands {
            return Err(HsiError::DimMismatch(format!(
                "{} samples for a {}x{}x{} cube",
                values.len(),
                height,
                width,
                bands
            )));
        }
        if axis.len() != bands {
            return Err(HsiError::DimMismatch(format!(
                "axis has {} wavelengths for {} bands",
                axis.len(),
                bands
            )));
        }
        Ok(Self {
            height,
            width,
            bands,
            values,
            quantity,
            axis,
            metadata,
        })
    }

    /// Cube with band-index wavelengths and default metadata.
    pub fn from_values(
        height: usize,
        width: usize,
        bands: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            height,
            width,
            bands,
            values,
            Quantity::Reflectance,
            SpectralAxis::band_indices(bands),
            MetadataRecord::default(),
        )
    }

    pub fn filled(height: usize, width: usize, bands: usize, value: f64) -> Self {
        Self::from_values(height, width, bands, vec![value; height * width * bands])
            .expect("sizes consistent by construction")
    }

    /// Same geometry, axis, quantity and metadata as `self`, with new samples.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.bands,
            values,
            self.quantity,
            self.axis.clone(),
            self.metadata.clone(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn axis(&self) -> &SpectralAxis {
        &self.axis
    }

    pub fn set_axis(&mut self, axis: SpectralAxis) -> Result<()> {
        if axis.len() != self.bands {
            return Err(HsiError::DimMismatch(format!(
                "axis has {} wavelengths for {} bands",
                axis.len(),
                self.bands
            )));
        }
        self.axis = axis;
        Ok(())
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, band: usize) -> usize {
        (row * self.width + col) * self.bands + band
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[self.index(row, col, band)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, band: usize, value: f64) {
        let i = self.index(row, col, band);
        self.values[i] = value;
    }

    /// Borrowed spectrum of a pixel.
    pub fn spectrum(&self, row: usize, col: usize) -> Result<&[f64]> {
        if row >= self.height || col >= self.width {
            return Err(HsiError::OutOfBounds {
                row,
                col,
                height: self.height,
                width: self.width,
            });
        }
        let start = self.index(row, col, 0);
        Ok(&self.values[start..start + self.bands])
    }

    pub fn get_spectrum(&self, row: usize, col: usize) -> Result<Vec<f64>> {
        self.spectrum(row, col).map(<[f64]>::to_vec)
    }

    /// Copy of one band as a row-major `height * width` plane.
    pub fn band_plane(&self, band: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(band)
            .step_by(self.bands.max(1))
            .copied()
            .collect()
    }

    /// `bands x pixels` matrix, column `j` holding the spectrum of pixel
    /// `(j / width, j % width)`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.bands, self.pixels(), &self.values)
    }

    /// Inverse of [`HyperCube::to_matrix`].
    pub fn from_matrix(matrix: &DMatrix<f64>, height: usize, width: usize) -> Result<Self> {
        if matrix.ncols() != height * width {
            return Err(HsiError::DimMismatch(format!(
                "matrix has {} columns for {}x{} pixels",
                matrix.ncols(),
                height,
                width
            )));
        }
        Self::from_values(height, width, matrix.nrows(), matrix.as_slice().to_vec())
    }

    /// Checks the reflectance range invariant, `[0, 1 + tolerance]`.
    pub fn check_reflectance_range(&self) -> Result<()> {
        if self.quantity != Quantity::Reflectance {
            return Ok(());
        }
        let hi = 1.0 + REFLECTANCE_CLIP_TOLERANCE;
        match self.values.iter().position(|v| !(0.0..=hi).contains(v)) {
            None => Ok(()),
            Some(i) => Err(HsiError::InvalidConfig(format!(
                "reflectance sample {} at offset {i} outside [0, {hi}]",
                self.values[i]
            ))),
        }
    }

    /// Per-band `(min, mean, max)`.
    pub fn band_stats(&self) -> Vec<(f64, f64, f64)> {
        let n = self.pixels().max(1) as f64;
        let mut stats = vec![(f64::INFINITY, 0.0, f64::NEG_INFINITY); self.bands];
        for px in self.values.chunks_exact(self.bands.max(1)) {
            for (s, &v) in stats.iter_mut().zip(px) {
                s.0 = s.0.min(v);
                s.1 += v;
                s.2 = s.2.max(v);
            }
        }
        for s in &mut stats {
            s.1 /= n;
        }
        stats
    }

    /// Cube restricted to a subset of bands, in the given order.
    pub fn select_bands(&self, bands: &[usize]) -> Result<Self> {
        if let Some(&b) = bands.iter().find(|&&b| b >= self.bands) {
            return Err(HsiError::DimMismatch(format!("band {b} of {}", self.bands)));
        }
        let mut values = Vec::with_capacity(self.pixels() * bands.len());
        for px in self.values.chunks_exact(self.bands) {
            values.extend(bands.iter().map(|&b| px[b]));
        }
        let wl = bands.iter().map(|&b| self.axis.wavelengths[b]).collect();
        let fwhm = self
            .axis
            .fwhm
            .as_ref()
            .map(|f| bands.iter().map(|&b| f[b]).collect());
        let axis = SpectralAxis::with_fwhm(wl, fwhm)
            .unwrap_or_else(|_| SpectralAxis::band_indices(bands.len()));
        Self::new(
            self.height,
            self.width,
            bands.len(),
            values,
            self.quantity,
            axis,
            self.metadata.clone(),
        )
    }
}
