//! Radiometric calibration against dark/white reference panels and
//! wavelength resampling.

use crate::cube::{HyperCube, Quantity, SpectralAxis};
use crate::error::{HsiError, Result};

/// Upper clip for calibrated reflectance.
pub const REFLECTANCE_CEILING: f64 = 1.05;

/// Per-band dark and white reference levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePanels {
    pub dark: Vec<f64>,
    pub white: Vec<f64>,
    /// Certified reflectance of the white panel, in `(0, 1]`.
    pub white_reflectance: f64,
}

fn spatial_mean(cube: &HyperCube) -> Vec<f64> {
    let n = cube.pixels() as f64;
    let mut mean = vec![0.0; cube.bands()];
    for px in cube.values().chunks_exact(cube.bands().max(1)) {
        for (m, v) in mean.iter_mut().zip(px) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

impl ReferencePanels {
    pub fn new(dark: Vec<f64>, white: Vec<f64>, white_reflectance: f64) -> Result<Self> {
        if dark.len() != white.len() {
            return Err(HsiError::BandCountMismatch {
                cube: white.len(),
                reference: dark.len(),
            });
        }
        if !(white_reflectance > 0.0 && white_reflectance <= 1.0) {
            return Err(HsiError::InvalidConfig(format!(
                "white panel reflectance {white_reflectance} outside (0, 1]"
            )));
        }
        Ok(Self {
            dark,
            white,
            white_reflectance,
        })
    }

    /// Panels imaged as cubes; each is averaged over its pixels.
    pub fn from_cubes(dark: &HyperCube, white: &HyperCube, white_reflectance: f64) -> Result<Self> {
        Self::new(spatial_mean(dark), spatial_mean(white), white_reflectance)
    }

    pub fn bands(&self) -> usize {
        self.dark.len()
    }

    /// Bands where the white level does not exceed the dark level.
    pub fn dead_bands(&self) -> Vec<usize> {
        self.dark
            .iter()
            .zip(&self.white)
            .enumerate()
            .filter(|(_, (d, w))| !(*w > *d))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Unclipped reflectance of one sample.
#[inline]
pub fn reflectance(dn: f64, dark: f64, white: f64, white_reflectance: f64) -> f64 {
    white_reflectance * (dn - dark) / (white - dark)
}

/// Converts digital numbers to reflectance, clipped to `[0, 1.05]`.
///
/// Dead bands are zero-filled and listed in `metadata.extra["dead_bands"]`.
pub fn calibrate_reflectance(raw: &HyperCube, panels: &ReferencePanels) -> Result<HyperCube> {
    if raw.bands() != panels.bands() {
        return Err(HsiError::BandCountMismatch {
            cube: raw.bands(),
            reference: panels.bands(),
        });
    }
    let dead = panels.dead_bands();
    if !dead.is_empty() && dead.len() == panels.bands() {
        return Err(HsiError::AllBandsDead);
    }
    if raw.quantity != Quantity::DigitalNumber {
        log::warn!("calibrating a cube labelled {}", raw.quantity.as_str());
    }
    let mut alive = vec![true; raw.bands()];
    for &b in &dead {
        alive[b] = false;
    }
    let l = raw.bands();
    let values: Vec<f64> = raw
        .values()
        .iter()
        .enumerate()
        .map(|(i, &dn)| {
            let b = i % l;
            if alive[b] {
                reflectance(
                    dn,
                    panels.dark[b],
                    panels.white[b],
                    panels.white_reflectance,
                )
                .clamp(0.0, REFLECTANCE_CEILING)
            } else {
                0.0
            }
        })
        .collect();
    let mut out = raw.with_values(values)?;
    out.quantity = Quantity::Reflectance;
    if !dead.is_empty() {
        let list = dead
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        out.metadata
            .extra
            .insert("dead_bands".into(), format!("{{{list}}}"));
    }
    Ok(out)
}

/// `(lower node, weight of upper node)` per target wavelength.
fn interp_plan(src: &SpectralAxis, target: &SpectralAxis) -> Result<Vec<(usize, f64)>> {
    let nodes = src.wavelengths();
    let (lo, hi) = src
        .range()
        .ok_or_else(|| HsiError::DegenerateInput("source axis has no bands".into()))?;
    let mut plan = Vec::with_capacity(target.len());
    for &t in target.wavelengths() {
        if t < lo || t > hi {
            return Err(HsiError::ExtrapolationRequested(t));
        }
        let j = nodes.partition_point(|&w| w <= t).saturating_sub(1);
        if j + 1 >= nodes.len() || nodes[j] == t {
            plan.push((j, 0.0));
        } else {
            plan.push((j, (t - nodes[j]) / (nodes[j + 1] - nodes[j])));
        }
    }
    Ok(plan)
}

fn apply_plan(plan: &[(usize, f64)], px: &[f64], out: &mut Vec<f64>) {
    for &(j, w) in plan {
        out.push(if w == 0.0 {
            px[j]
        } else {
            px[j] * (1.0 - w) + px[j + 1] * w
        });
    }
}

/// Piecewise-linear interpolation of one spectrum onto `target`.
pub fn resample_spectrum(
    axis: &SpectralAxis,
    values: &[f64],
    target: &SpectralAxis,
) -> Result<Vec<f64>> {
    if values.len() != axis.len() {
        return Err(HsiError::LengthMismatch {
            left: values.len(),
            right: axis.len(),
        });
    }
    let plan = interp_plan(axis, target)?;
    let mut out = Vec::with_capacity(target.len());
    apply_plan(&plan, values, &mut out);
    Ok(out)
}

/// Piecewise-linear interpolation of every pixel spectrum onto `target`.
pub fn resample_wavelengths(cube: &HyperCube, target: &SpectralAxis) -> Result<HyperCube> {
    let plan = interp_plan(cube.axis(), target)?;
    let l = cube.bands();
    let mut values = Vec::with_capacity(cube.pixels() * target.len());
    for px in cube.values().chunks_exact(l) {
        apply_plan(&plan, px, &mut values);
    }
    HyperCube::new(
        cube.height(),
        cube.width(),
        target.len(),
        values,
        cube.quantity,
        target.clone(),
        cube.metadata.clone(),
    )
}
