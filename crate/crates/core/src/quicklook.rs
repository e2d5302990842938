//! 8-bit binary PGM (P5) quicklooks.

use std::fs;
use std::path::Path;

use crate::error::{HsiError, Result};

/// Grey levels for class ids 1, 2, ...; unlabeled pixels are black.
pub const LABEL_PALETTE: [u8; 12] = [255, 128, 64, 192, 32, 160, 96, 224, 48, 176, 112, 240];

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Min-max stretch of a row-major plane to 0..=255. Constant planes map to 0.
pub fn stretch(plane: &[f64]) -> Vec<u8> {
    let finite = plane.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let span = hi - lo;
    plane
        .iter()
        .map(|&v| {
            if !v.is_finite() || !(span > 0.0) {
                0
            } else {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

pub fn label_levels(labels: &[u32]) -> Vec<u8> {
    labels
        .iter()
        .map(|&l| match l {
            0 => 0,
            l => LABEL_PALETTE[(l as usize - 1) % LABEL_PALETTE.len()],
        })
        .collect()
}

pub fn write_plane_pgm(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    plane: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(width, height, &stretch(plane))).map_err(|e| HsiError::io(path, e))
}

pub fn write_labels_pgm(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    labels: &[u32],
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(width, height, &label_levels(labels)))
        .map_err(|e| HsiError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout() {
        let bytes = encode_pgm(2, 1, &[0, 255]);
        assert_eq!(&bytes[..], b"P5\n2 1\n255\n\x00\xff");
    }

    #[test]
    fn stretch_extremes() {
        assert_eq!(stretch(&[1.0, 2.0, 3.0]), vec![0, 128, 255]);
        assert_eq!(stretch(&[4.0, 4.0]), vec![0, 0]);
    }

    #[test]
    fn palette_is_fixed() {
        assert_eq!(label_levels(&[0, 1, 2, 13]), vec![0, 255, 128, 255]);
    }
}
