use std::path::{Path, PathBuf};

use hsi_core::classify::ClassificationMetrics;
use hsi_core::restore::psnr;
use hsi_core::unmix::match_endmembers;
use hsi_core::HsiError;
use serde::Serialize;

use super::classify::{SplitFile, SPLIT};
use super::{read_cube, read_labels, read_table, settings, Ctx};
use crate::error::CliError;

settings!(Settings {
    /// Ground-truth directory written by `synth`.
    truth,
    /// Predicted label map.
    predictions,
    /// Estimated abundance cube.
    abundances,
    /// Estimated endmember table.
    endmembers,
    /// Reconstructed cube scored against the clean truth cube.
    cube,
    /// Peak value for PSNR; defaults to the clean cube maximum.
    peak,
});

#[derive(Debug, Serialize)]
struct Options {
    truth: PathBuf,
    predictions: Option<PathBuf>,
    abundances: Option<PathBuf>,
    endmembers: Option<PathBuf>,
    cube: Option<PathBuf>,
    peak: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Metrics {
    oa: Option<f64>,
    per_class: Option<Vec<f64>>,
    sad_per_endmember: Option<Vec<f64>>,
    abundance_rmse: Option<f64>,
    psnr: Option<f64>,
    /// Estimated endmember paired with each true endmember.
    permutation: Option<Vec<usize>>,
    evaluated_pixels: Option<usize>,
}

/// Explicit setting, else `fallback` if that file exists.
fn optional_input(ctx: &Ctx, key: &str, fallback: PathBuf) -> Result<Option<PathBuf>, CliError> {
    Ok(match ctx.params.get::<PathBuf>(key)? {
        Some(p) => Some(p),
        None => fallback.is_file().then_some(fallback),
    })
}

fn split_next_to(predictions: &Path) -> anyhow::Result<Option<(PathBuf, SplitFile)>> {
    let path = predictions.with_file_name(SPLIT);
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| HsiError::io(&path, e))?;
    Ok(Some((path, serde_json::from_str(&text)?)))
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let opts = Options {
        truth: ctx.path_or("truth", ctx.stage("synth"))?,
        predictions: optional_input(
            ctx,
            "predictions",
            ctx.stage("classify").join("predictions.hdr"),
        )?,
        abundances: optional_input(ctx, "abundances", ctx.stage("unmix").join("abundances.hdr"))?,
        endmembers: optional_input(ctx, "endmembers", ctx.stage("unmix").join("endmembers.csv"))?,
        cube: ctx.params.get("cube")?,
        peak: ctx.params.get("peak")?,
    };
    let mut out = ctx.open("eval")?;
    let mut m = Metrics {
        oa: None,
        per_class: None,
        sad_per_endmember: None,
        abundance_rmse: None,
        psnr: None,
        permutation: None,
        evaluated_pixels: None,
    };

    if let Some(path) = &opts.predictions {
        let truth = read_labels(&mut out, &opts.truth.join("labels.hdr"))?;
        let pred = read_labels(&mut out, path)?;
        if pred.labels.len() != truth.labels.len() {
            return Err(HsiError::LengthMismatch {
                left: pred.labels.len(),
                right: truth.labels.len(),
            }
            .into());
        }
        // score held-out pixels only when the classifier recorded its split
        let pixels: Vec<usize> = match split_next_to(path)? {
            Some((split_path, split)) => {
                out.input(&split_path);
                split.test
            }
            None => truth.labeled(),
        };
        let p: Vec<u32> = pixels.iter().map(|&i| pred.labels[i]).collect();
        let t: Vec<u32> = pixels.iter().map(|&i| truth.labels[i]).collect();
        let scores = ClassificationMetrics::compute(&p, &t, truth.classes())?;
        m.oa = Some(scores.oa);
        m.per_class = Some(scores.per_class);
        m.evaluated_pixels = Some(pixels.len());
    }

    let mut permutation = None;
    if let Some(path) = &opts.endmembers {
        let truth = read_table(&mut out, &opts.truth.join("endmembers.csv"))?;
        let est = read_table(&mut out, path)?;
        let matched = match_endmembers(&truth.spectra, &est.spectra)?;
        m.sad_per_endmember = Some(matched.sad.clone());
        permutation = Some(matched.permutation.clone());
        m.permutation = Some(matched.permutation);
    }

    if let Some(path) = &opts.abundances {
        let truth = read_cube(&mut out, &opts.truth.join("abundances.hdr"))?;
        let est = read_cube(&mut out, path)?;
        if est.pixels() != truth.pixels() {
            return Err(HsiError::ShapeMismatch(format!(
                "abundances cover {} pixels, truth {}",
                est.pixels(),
                truth.pixels()
            ))
            .into());
        }
        let perm = permutation.unwrap_or_else(|| (0..truth.bands()).collect());
        if perm.len() != truth.bands() || perm.iter().any(|&k| k >= est.bands()) {
            return Err(HsiError::DimMismatch(format!(
                "{} estimated abundance bands for {} true endmembers",
                est.bands(),
                truth.bands()
            ))
            .into());
        }
        let (a, b) = (truth.to_matrix(), est.to_matrix());
        let mut sq = 0.0;
        for (k, &e) in perm.iter().enumerate() {
            sq += (a.row(k) - b.row(e)).norm_squared();
        }
        m.abundance_rmse = Some((sq / a.len().max(1) as f64).sqrt());
    }

    if let Some(path) = &opts.cube {
        let clean = read_cube(&mut out, &opts.truth.join("clean.hdr"))?;
        let est = read_cube(&mut out, path)?;
        let peak = opts
            .peak
            .unwrap_or_else(|| clean.values().iter().copied().fold(0.0, f64::max));
        m.psnr = Some(psnr(&clean, &est, peak)?);
    }

    ctx.finish(out, "eval", &opts, &m)
}
