//! Small CSV formats: single spectra, spectral libraries and dense matrices.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::cube::SpectralAxis;
use crate::error::{HsiError, Result};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_row(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim().parse::<f64>().map_err(|_| HsiError::TextParse {
                line,
                reason: format!("`{}` is not a number", f.trim()),
            })
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HsiError::io(path, e))
}

/// `wavelength,value` per line; an optional non-numeric header line is skipped.
pub fn parse_spectrum_csv(text: &str) -> Result<(SpectralAxis, Vec<f64>)> {
    let mut wl = Vec::new();
    let mut vals = Vec::new();
    for (idx, (n, line)) in data_lines(text).enumerate() {
        let row = match parse_row(n, line) {
            Ok(r) => r,
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(e),
        };
        if row.len() != 2 {
            return Err(HsiError::TextParse {
                line: n,
                reason: format!("expected 2 fields, found {}", row.len()),
            });
        }
        wl.push(row[0]);
        vals.push(row[1]);
    }
    Ok((SpectralAxis::new(wl)?, vals))
}

pub fn read_spectrum_csv(path: impl AsRef<Path>) -> Result<(SpectralAxis, Vec<f64>)> {
    parse_spectrum_csv(&read_text(path.as_ref())?)
}

/// Named spectra sharing one wavelength axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraTable {
    pub axis: SpectralAxis,
    pub names: Vec<String>,
    /// `bands x names.len()`, one spectrum per column.
    pub spectra: DMatrix<f64>,
}

/// CSV with header `wavelength,name1,name2,...` and one row per band.
pub fn parse_spectra_table(text: &str) -> Result<SpectraTable> {
    let mut lines = data_lines(text);
    let (_, header) = lines.next().ok_or(HsiError::TextParse {
        line: 1,
        reason: "empty table".into(),
    })?;
    let mut cols = header.split(',').map(|s| s.trim().to_string());
    let first = cols.next().unwrap_or_default();
    if !first.eq_ignore_ascii_case("wavelength") {
        return Err(HsiError::TextParse {
            line: 1,
            reason: "first column must be `wavelength`".into(),
        });
    }
    let names: Vec<String> = cols.collect();
    let mut wl = Vec::new();
    let mut data = Vec::new();
    for (n, line) in lines {
        let row = parse_row(n, line)?;
        if row.len() != names.len() + 1 {
            return Err(HsiError::TextParse {
                line: n,
                reason: format!("expected {} fields, found {}", names.len() + 1, row.len()),
            });
        }
        wl.push(row[0]);
        data.extend_from_slice(&row[1..]);
    }
    let spectra = DMatrix::from_row_slice(wl.len(), names.len(), &data);
    Ok(SpectraTable {
        axis: SpectralAxis::new(wl)?,
        names,
        spectra,
    })
}

pub fn read_spectra_table(path: impl AsRef<Path>) -> Result<SpectraTable> {
    parse_spectra_table(&read_text(path.as_ref())?)
}

pub fn format_spectra_table(table: &SpectraTable) -> String {
    let mut s = String::from("wavelength");
    for n in &table.names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (b, w) in table.axis.wavelengths().iter().enumerate() {
        s.push_str(&format!("{w}"));
        for j in 0..table.spectra.ncols() {
            s.push_str(&format!(",{}", table.spectra[(b, j)]));
        }
        s.push('\n');
    }
    s
}

pub fn write_spectra_table(path: impl AsRef<Path>, table: &SpectraTable) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_spectra_table(table)).map_err(|e| HsiError::io(path, e))
}

/// Plain numeric CSV, one matrix row per line.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows = Vec::new();
    for (n, line) in data_lines(text) {
        let row = parse_row(n, line)?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(HsiError::TextParse {
                    line: n,
                    reason: format!("expected {first} fields, found {}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_text(path.as_ref())?)
}
