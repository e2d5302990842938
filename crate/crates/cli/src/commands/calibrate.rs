use std::path::PathBuf;

use hsi_core::calib::{calibrate_reflectance, ReferencePanels};
use hsi_core::envi::DataType;
use serde::Serialize;

use super::{quicklook_band, read_cube, settings, Ctx};

settings!(Settings {
    /// Raw digital-number cube.
    raw,
    /// Dark reference frame.
    dark,
    /// White panel frame.
    white,
    /// Certified reflectance of the white panel, in (0, 1].
    white_reflectance,
});

#[derive(Debug, Serialize)]
struct Options {
    raw: PathBuf,
    dark: PathBuf,
    white: PathBuf,
    white_reflectance: f64,
}

#[derive(Debug, Serialize)]
struct Metrics {
    dead_bands: Vec<usize>,
    min: f64,
    max: f64,
    mean: f64,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let p = &ctx.params;
    let opts = Options {
        raw: p.require("raw")?,
        dark: p.require("dark")?,
        white: p.require("white")?,
        white_reflectance: p.get_or("white_reflectance", 1.0)?,
    };
    let mut out = ctx.open("calibrate")?;
    let raw = read_cube(&mut out, &opts.raw)?;
    let dark = read_cube(&mut out, &opts.dark)?;
    let white = read_cube(&mut out, &opts.white)?;
    let panels = ReferencePanels::from_cubes(&dark, &white, opts.white_reflectance)?;
    let refl = calibrate_reflectance(&raw, &panels)?;

    out.write_cube("reflectance", &refl, DataType::F64)?;
    quicklook_band(&mut out, "reflectance.pgm", &refl, refl.bands() / 2)?;
    let v = refl.values();
    let metrics = Metrics {
        dead_bands: panels.dead_bands(),
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
    };
    ctx.finish(out, "calibrate", &opts, &metrics)
}
