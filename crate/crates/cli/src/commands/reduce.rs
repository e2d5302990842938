use std::path::PathBuf;

use hsi_core::dimred::{estimate_noise_covariance, mnf_fit, pca_fit, select_bands, BandCriterion};
use hsi_core::envi::DataType;
use hsi_core::HyperCube;
use serde::Serialize;

use super::{quicklook_band, read_cube, settings, Ctx};

settings!(Settings {
    /// Cube to reduce; defaults to the synth output in the same root.
    input,
    /// `pca`, `mnf` or `bands`.
    method,
    /// Number of components or bands kept.
    k,
    /// Band selection criterion: `min_correlation` or `max_entropy`.
    criterion,
});

#[derive(Debug, Serialize)]
struct Options {
    input: PathBuf,
    method: String,
    k: usize,
    criterion: Option<String>,
}

#[derive(Debug, Serialize)]
struct Metrics {
    method: String,
    components: usize,
    /// Eigenvalues (pca), signal-to-noise ratios (mnf) or the subset
    /// objective (bands).
    scores: Vec<f64>,
    /// Share of total variance in the kept components (pca only).
    explained: Option<f64>,
    bands: Option<Vec<usize>>,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let p = &ctx.params;
    let method = p.choice("method", &["pca", "mnf", "bands"], "pca")?;
    let criterion = if method == "bands" {
        Some(p.choice(
            "criterion",
            &["min_correlation", "max_entropy"],
            "min_correlation",
        )?)
    } else {
        None
    };
    let opts = Options {
        input: ctx.path_or("input", ctx.stage("synth").join("cube.hdr"))?,
        method,
        k: p.get_or("k", 5)?,
        criterion,
    };
    let mut out = ctx.open("reduce")?;
    let cube = read_cube(&mut out, &opts.input)?;
    let x = cube.to_matrix();

    let (reduced, metrics) = match opts.method.as_str() {
        "bands" => {
            let criterion = match opts.criterion.as_deref() {
                Some("max_entropy") => BandCriterion::MaxEntropy,
                _ => BandCriterion::MinCorrelation,
            };
            let subset = select_bands(&x, opts.k, criterion)?;
            out.write_json("bands.json", &subset)?;
            let reduced = cube.select_bands(&subset.indices)?;
            let metrics = Metrics {
                method: opts.method.clone(),
                components: subset.indices.len(),
                scores: vec![subset.score],
                explained: None,
                bands: Some(subset.indices),
            };
            (reduced, metrics)
        }
        method => {
            let projection = if method == "mnf" {
                mnf_fit(&x, &estimate_noise_covariance(&cube)?, opts.k)?
            } else {
                pca_fit(&x, opts.k)?
            };
            let mut json = projection.to_json();
            json.push('\n');
            out.write_bytes("projection.json", json.as_bytes())?;
            let z = projection.project(&x)?;
            let mut reduced = HyperCube::from_matrix(&z, cube.height(), cube.width())?;
            reduced.metadata.description = format!("{method} components");
            let explained = (method == "pca").then(|| {
                let total = pca_total_variance(&x);
                if total > 0.0 {
                    projection.scores.iter().sum::<f64>() / total
                } else {
                    0.0
                }
            });
            let metrics = Metrics {
                method: opts.method.clone(),
                components: projection.components(),
                scores: projection.scores.clone(),
                explained,
                bands: None,
            };
            (reduced, metrics)
        }
    };
    out.write_cube("components", &reduced, DataType::F64)?;
    if reduced.bands() > 0 {
        quicklook_band(&mut out, "component_1.pgm", &reduced, 0)?;
    }
    ctx.finish(out, "reduce", &opts, &metrics)
}

/// Trace of the covariance with the `1/n` normalization PCA uses.
fn pca_total_variance(x: &nalgebra::DMatrix<f64>) -> f64 {
    let n = x.ncols().max(1);
    x.row_iter()
        .map(|r| {
            let m = r.mean();
            r.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        })
        .sum::<f64>()
        / n as f64
}
