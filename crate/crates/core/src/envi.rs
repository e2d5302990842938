//! ENVI header + raw binary reader and writer.
//!
//! The header is a text file whose first line is `ENVI`, followed by
//! `key = value` lines. Values wrapped in `{ ... }` may span several lines.
//! Keys are matched case-insensitively; fields this module does not
//! interpret are kept verbatim, in order, in [`MetadataRecord::extra`].

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use crate::cube::{ByteOrder, HyperCube, Interleave, MetadataRecord, Quantity, SpectralAxis};
use crate::error::{HsiError, Result};

/// On-disk sample type, keyed by its ENVI `data type` code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    F32,
    F64,
    U16,
}

impl DataType {
    pub const ALL: [DataType; 5] = [
        DataType::U8,
        DataType::I16,
        DataType::F32,
        DataType::F64,
        DataType::U16,
    ];

    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            1 => Ok(DataType::U8),
            2 => Ok(DataType::I16),
            4 => Ok(DataType::F32),
            5 => Ok(DataType::F64),
            12 => Ok(DataType::U16),
            other => Err(HsiError::UnsupportedDataType(other)),
        }
    }

    pub fn code(self) -> u32 {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::F32 => 4,
            DataType::F64 => 5,
            DataType::U16 => 12,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }

    fn decode(self, bytes: &[u8], order: ByteOrder) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(bytes);
                match order {
                    ByteOrder::LittleEndian => <$t>::from_le_bytes(a),
                    ByteOrder::BigEndian => <$t>::from_be_bytes(a),
                }
            }};
        }
        match self {
            DataType::U8 => bytes[0] as f64,
            DataType::I16 => num!(i16, 2) as f64,
            DataType::U16 => num!(u16, 2) as f64,
            DataType::F32 => num!(f32, 4) as f64,
            DataType::F64 => num!(f64, 8),
        }
    }

    /// Appends the encoding of `v`. Integer types round to nearest and
    /// saturate at the type bounds.
    fn encode(self, v: f64, order: ByteOrder, out: &mut Vec<u8>) {
        macro_rules! put {
            ($x:expr) => {
                match order {
                    ByteOrder::LittleEndian => out.extend_from_slice(&$x.to_le_bytes()),
                    ByteOrder::BigEndian => out.extend_from_slice(&$x.to_be_bytes()),
                }
            };
        }
        match self {
            DataType::U8 => out.push(v.round() as u8),
            DataType::I16 => put!(v.round() as i16),
            DataType::U16 => put!(v.round() as u16),
            DataType::F32 => put!(v as f32),
            DataType::F64 => put!(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteOptions {
    pub interleave: Interleave,
    pub data_type: DataType,
    pub byte_order: ByteOrder,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            interleave: Interleave::Bsq,
            data_type: DataType::F32,
            byte_order: ByteOrder::LittleEndian,
        }
    }
}

impl WriteOptions {
    pub fn interleave(interleave: Interleave) -> Self {
        Self {
            interleave,
            ..Self::default()
        }
    }
}

/// Paths produced by a write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnviPaths {
    pub header: PathBuf,
    pub binary: PathBuf,
}

#[derive(Debug, Clone)]
struct Field {
    key: String,
    value: String,
    line: usize,
}

fn normalize_key(key: &str) -> String {
    key.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_lowercase()
}

fn parse_fields(text: &str) -> Result<Vec<Field>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, first)) if first.trim() == "ENVI" => {}
        Some((n, first)) => {
            return Err(HsiError::HeaderParse {
                line: n,
                text: first.to_string(),
                reason: "first line must be `ENVI`".into(),
            })
        }
        None => {
            return Err(HsiError::HeaderParse {
                line: 1,
                text: String::new(),
                reason: "empty header".into(),
            })
        }
    }

    let mut fields = Vec::new();
    while let Some((n, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HsiError::HeaderParse {
                line: n,
                text: raw.to_string(),
                reason: "expected `key = value`".into(),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(HsiError::HeaderParse {
                line: n,
                text: raw.to_string(),
                reason: "empty key".into(),
            });
        }
        let mut value = value.trim().to_string();
        if value.starts_with('{') {
            while !value.contains('}') {
                match lines.next() {
                    Some((_, more)) => {
                        value.push('\n');
                        value.push_str(more.trim_end());
                    }
                    None => {
                        return Err(HsiError::HeaderParse {
                            line: n,
                            text: raw.to_string(),
                            reason: "unterminated `{` list".into(),
                        })
                    }
                }
            }
        }
        fields.push(Field {
            key: key.to_string(),
            value,
            line: n,
        });
    }
    Ok(fields)
}

fn brace_inner(value: &str) -> &str {
    let v = value.trim();
    let v = v.strip_prefix('{').unwrap_or(v);
    let v = v.rfind('}').map_or(v, |i| &v[..i]);
    v.trim()
}

fn parse_error(field: &Field, reason: impl Into<String>) -> HsiError {
    HsiError::HeaderParse {
        line: field.line,
        text: format!("{} = {}", field.key, field.value),
        reason: reason.into(),
    }
}

fn parse_usize(field: &Field) -> Result<usize> {
    field
        .value
        .trim()
        .parse()
        .map_err(|_| parse_error(field, "expected a non-negative integer"))
}

fn parse_list(field: &Field) -> Result<Vec<f64>> {
    brace_inner(&field.value)
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| parse_error(field, format!("bad number `{s}`")))
        })
        .collect()
}

/// Parsed header, before the binary is touched.
#[derive(Debug, Clone)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub header_offset: usize,
    pub data_type: DataType,
    pub interleave: Interleave,
    pub byte_order: ByteOrder,
    pub quantity: Option<Quantity>,
    pub axis: SpectralAxis,
    pub synthetic_wavelengths: bool,
    pub sensor_name: String,
    pub acquisition_time: Option<String>,
    pub description: String,
    pub extra: IndexMap<String, String>,
}

impl EnviHeader {
    pub fn parse(text: &str) -> Result<Self> {
        let fields = parse_fields(text)?;
        let find = |name: &str| fields.iter().rev().find(|f| normalize_key(&f.key) == name);
        let required =
            |name: &str| find(name).ok_or_else(|| HsiError::MissingField(name.to_string()));

        let samples = parse_usize(required("samples")?)?;
        let lines = parse_usize(required("lines")?)?;
        let bands = parse_usize(required("bands")?)?;
        let dt_field = required("data type")?;
        let data_type = DataType::from_code(
            dt_field
                .value
                .trim()
                .parse()
                .map_err(|_| parse_error(dt_field, "expected an integer type code"))?,
        )?;
        let il_field = required("interleave")?;
        let interleave = Interleave::parse(&il_field.value)
            .ok_or_else(|| parse_error(il_field, "interleave must be bsq, bil or bip"))?;
        let header_offset = find("header offset")
            .map(parse_usize)
            .transpose()?
            .unwrap_or(0);
        let byte_order = match find("byte order") {
            None => ByteOrder::LittleEndian,
            Some(f) => match f.value.trim() {
                "0" => ByteOrder::LittleEndian,
                "1" => ByteOrder::BigEndian,
                _ => return Err(parse_error(f, "byte order must be 0 or 1")),
            },
        };
        let quantity = match find("quantity") {
            None => None,
            Some(f) => {
                Some(Quantity::parse(&f.value).ok_or_else(|| parse_error(f, "unknown quantity"))?)
            }
        };

        let units = find("wavelength units").map(|f| f.value.trim().to_ascii_lowercase());
        let scale = match units.as_deref() {
            Some("micrometers") | Some("micrometer") | Some("um") | Some("µm") => 1000.0,
            Some("millimeters") | Some("mm") => 1.0e6,
            _ => 1.0,
        };
        let index_units = units.as_deref() == Some("index");
        let (axis, synthetic_wavelengths) = match find("wavelength") {
            Some(f) => {
                let wl: Vec<f64> = parse_list(f)?.into_iter().map(|w| w * scale).collect();
                if wl.len() != bands {
                    return Err(parse_error(
                        f,
                        format!("{} wavelengths for {} bands", wl.len(), bands),
                    ));
                }
                let fwhm = match find("fwhm") {
                    Some(ff) => {
                        let v: Vec<f64> = parse_list(ff)?.into_iter().map(|w| w * scale).collect();
                        if v.len() != bands {
                            return Err(parse_error(
                                ff,
                                format!("{} fwhm values for {} bands", v.len(), bands),
                            ));
                        }
                        Some(v)
                    }
                    None => None,
                };
                let axis =
                    SpectralAxis::with_fwhm(wl, fwhm).map_err(|e| parse_error(f, e.to_string()))?;
                (axis, index_units)
            }
            None => {
                log::warn!("header has no wavelength list; using band indices");
                (SpectralAxis::band_indices(bands), true)
            }
        };

        const KNOWN: [&str; 14] = [
            "samples",
            "lines",
            "bands",
            "header offset",
            "file type",
            "data type",
            "interleave",
            "byte order",
            "wavelength",
            "fwhm",
            "wavelength units",
            "sensor type",
            "description",
            "acquisition time",
        ];
        let mut extra = IndexMap::new();
        for f in &fields {
            let k = normalize_key(&f.key);
            if !KNOWN.contains(&k.as_str()) && k != "quantity" {
                extra.insert(f.key.clone(), f.value.clone());
            }
        }

        Ok(Self {
            samples,
            lines,
            bands,
            header_offset,
            data_type,
            interleave,
            byte_order,
            quantity,
            axis,
            synthetic_wavelengths,
            sensor_name: find("sensor type")
                .map(|f| f.value.trim().to_string())
                .unwrap_or_default(),
            acquisition_time: find("acquisition time").map(|f| f.value.trim().to_string()),
            description: find("description")
                .map(|f| brace_inner(&f.value).to_string())
                .unwrap_or_default(),
            extra,
        })
    }

    pub fn binary_len(&self) -> u64 {
        (self.samples * self.lines * self.bands * self.data_type.size()) as u64
    }
}

/// Offset of sample `(row, col, band)` in an interleaved stream.
#[inline]
fn file_index(
    il: Interleave,
    lines: usize,
    samples: usize,
    bands: usize,
    r: usize,
    c: usize,
    b: usize,
) -> usize {
    match il {
        Interleave::Bsq => (b * lines + r) * samples + c,
        Interleave::Bil => (r * bands + b) * samples + c,
        Interleave::Bip => (r * samples + c) * bands + b,
    }
}

/// Locates the binary next to a header: same stem with no extension, or
/// `.img`, `.dat`, `.raw`.
pub fn find_binary(header_path: &Path) -> Result<PathBuf> {
    let stem = header_path.with_extension("");
    let mut candidates = vec![
        stem.with_extension("img"),
        stem.with_extension("dat"),
        stem.with_extension("raw"),
    ];
    candidates.push(stem.clone());
    candidates
        .into_iter()
        .find(|p| p.is_file() && p != header_path)
        .ok_or_else(|| HsiError::MissingBinary(header_path.to_path_buf()))
}

pub fn read_header(header_path: &Path) -> Result<EnviHeader> {
    let text = fs::read_to_string(header_path).map_err(|e| HsiError::io(header_path, e))?;
    EnviHeader::parse(&text)
}

pub fn read_envi(header_path: impl AsRef<Path>) -> Result<HyperCube> {
    let header_path = header_path.as_ref();
    let hdr = read_header(header_path)?;
    let bin_path = find_binary(header_path)?;
    let bytes = fs::read(&bin_path).map_err(|e| HsiError::io(&bin_path, e))?;
    decode_cube(&hdr, &bytes)
}

/// Builds a cube from a parsed header and the full binary file contents.
pub fn decode_cube(hdr: &EnviHeader, bytes: &[u8]) -> Result<HyperCube> {
    let payload = bytes.get(hdr.header_offset..).unwrap_or(&[]);
    let expected = hdr.binary_len();
    if payload.len() as u64 != expected {
        return Err(HsiError::SizeMismatch {
            expected,
            actual: payload.len() as u64,
        });
    }
    let (h, w, l) = (hdr.lines, hdr.samples, hdr.bands);
    let size = hdr.data_type.size();
    let mut values = vec![0.0; h * w * l];
    for r in 0..h {
        for c in 0..w {
            for b in 0..l {
                let fi = file_index(hdr.interleave, h, w, l, r, c, b) * size;
                values[(r * w + c) * l + b] = hdr
                    .data_type
                    .decode(&payload[fi..fi + size], hdr.byte_order);
            }
        }
    }
    let metadata = MetadataRecord {
        sensor_name: hdr.sensor_name.clone(),
        acquisition_time: hdr.acquisition_time.clone(),
        interleave: hdr.interleave,
        data_type_code: hdr.data_type.code(),
        byte_order: hdr.byte_order,
        description: hdr.description.clone(),
        extra: hdr.extra.clone(),
        synthetic_wavelengths: hdr.synthetic_wavelengths,
    };
    HyperCube::new(
        h,
        w,
        l,
        values,
        hdr.quantity.unwrap_or(Quantity::DigitalNumber),
        hdr.axis.clone(),
        metadata,
    )
}

fn join_numbers(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Header text for `cube` stored with `opts`.
pub fn header_text(cube: &HyperCube, opts: &WriteOptions) -> String {
    let md = &cube.metadata;
    let mut s = String::from("ENVI\n");
    s.push_str(&format!("description = {{{}}}\n", md.description));
    s.push_str(&format!("samples = {}\n", cube.width()));
    s.push_str(&format!("lines = {}\n", cube.height()));
    s.push_str(&format!("bands = {}\n", cube.bands()));
    s.push_str("header offset = 0\n");
    s.push_str("file type = ENVI Standard\n");
    s.push_str(&format!("data type = {}\n", opts.data_type.code()));
    s.push_str(&format!("interleave = {}\n", opts.interleave.as_str()));
    let bo = match opts.byte_order {
        ByteOrder::LittleEndian => 0,
        ByteOrder::BigEndian => 1,
    };
    s.push_str(&format!("byte order = {bo}\n"));
    if !md.sensor_name.is_empty() {
        s.push_str(&format!("sensor type = {}\n", md.sensor_name));
    }
    if let Some(t) = &md.acquisition_time {
        s.push_str(&format!("acquisition time = {t}\n"));
    }
    s.push_str(&format!("quantity = {}\n", cube.quantity.as_str()));
    let units = if md.synthetic_wavelengths {
        "Index"
    } else {
        "Nanometers"
    };
    s.push_str(&format!("wavelength units = {units}\n"));
    s.push_str(&format!(
        "wavelength = {{{}}}\n",
        join_numbers(cube.axis().wavelengths())
    ));
    if let Some(f) = cube.axis().fwhm() {
        s.push_str(&format!("fwhm = {{{}}}\n", join_numbers(f)));
    }
    for (k, v) in &md.extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

/// Raw binary for `cube` stored with `opts`.
pub fn encode_cube(cube: &HyperCube, opts: &WriteOptions) -> Vec<u8> {
    let (h, w, l) = (cube.height(), cube.width(), cube.bands());
    let mut order = vec![0usize; h * w * l];
    for r in 0..h {
        for c in 0..w {
            for b in 0..l {
                order[file_index(opts.interleave, h, w, l, r, c, b)] = (r * w + c) * l + b;
            }
        }
    }
    let mut out = Vec::with_capacity(order.len() * opts.data_type.size());
    let vals = cube.values();
    for i in order {
        opts.data_type.encode(vals[i], opts.byte_order, &mut out);
    }
    out
}

/// Writes `<stem>.hdr` and `<stem>.img` as little-endian `f32`.
pub fn write_envi(
    cube: &HyperCube,
    stem: impl AsRef<Path>,
    interleave: Interleave,
) -> Result<EnviPaths> {
    write_envi_with(cube, stem, &WriteOptions::interleave(interleave))
}

pub fn write_envi_with(
    cube: &HyperCube,
    stem: impl AsRef<Path>,
    opts: &WriteOptions,
) -> Result<EnviPaths> {
    let stem = stem.as_ref();
    let header = stem.with_extension("hdr");
    let binary = stem.with_extension("img");
    fs::write(&header, header_text(cube, opts)).map_err(|e| HsiError::io(&header, e))?;
    fs::write(&binary, encode_cube(cube, opts)).map_err(|e| HsiError::io(&binary, e))?;
    Ok(EnviPaths { header, binary })
}
