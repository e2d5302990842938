use std::path::PathBuf;

use hsi_core::enhance::{
    fuse, nearest_upsample, spatial_downsample, spectral_project, FusionOperators,
    DEFAULT_FUSION_LAMBDA,
};
use hsi_core::envi::DataType;
use hsi_core::restore::{mse, psnr};
use hsi_core::textio::read_matrix_csv;
use serde::Serialize;

use super::{quicklook_band, read_cube, settings, Ctx, KernelSettings, SolverSettings};

settings!(Settings {
    /// Low-resolution hyperspectral cube.
    lr,
    /// High-resolution cube with the sensor's few broad bands.
    pan,
    /// High-resolution hyperspectral cube to simulate `lr` and `pan` from.
    simulate_from,
    /// Spatial ratio between the two inputs.
    scale,
    /// `box`, `gaussian` or `csv`; defaults to a `scale x scale` box.
    kernel,
    kernel_size,
    kernel_sigma,
    kernel_csv,
    /// CSV of the `m x l` spectral response; defaults to the band mean.
    response,
    lambda,
    max_iters,
    tol,
    step,
});

#[derive(Debug, Serialize)]
struct Options {
    lr: Option<PathBuf>,
    pan: Option<PathBuf>,
    simulate_from: Option<PathBuf>,
    scale: usize,
    kernel: KernelSettings,
    response: Option<PathBuf>,
    solver: SolverSettings,
}

#[derive(Debug, Serialize)]
struct Metrics {
    iterations: usize,
    converged: bool,
    initial_residuals: (f64, f64),
    final_residuals: (f64, f64),
    mse: Option<f64>,
    psnr: Option<f64>,
    baseline_mse: Option<f64>,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let p = &ctx.params;
    let scale: usize = p.get_or("scale", 2)?;
    let opts = Options {
        lr: p.get("lr")?,
        pan: p.get("pan")?,
        simulate_from: p.get("simulate_from")?,
        scale,
        kernel: KernelSettings::read(p, "box", scale)?,
        response: p.get("response")?,
        solver: SolverSettings::read(p, DEFAULT_FUSION_LAMBDA)?,
    };
    let cfg = opts.solver.config()?;
    let mut out = ctx.open("fuse")?;
    let kernel = opts.kernel.build(&mut out)?;

    let truth = match &opts.simulate_from {
        Some(path) => Some(read_cube(&mut out, path)?),
        None => None,
    };
    let bands = match (&truth, &opts.lr) {
        (Some(t), _) => t.bands(),
        (None, Some(path)) => hsi_core::envi::read_header(path)?.bands,
        (None, None) => return Err(crate::error::CliError::MissingKey("fuse.lr".into()).into()),
    };
    let response = match &opts.response {
        Some(path) => {
            out.input(path);
            read_matrix_csv(path)?
        }
        None => FusionOperators::uniform_pan_response(bands),
    };
    let ops = FusionOperators {
        kernel,
        scale,
        spectral_response: response,
    };
    ops.validate()?;

    let (lr, pan) = match &truth {
        Some(t) => {
            let lr = spatial_downsample(t, &ops)?;
            let pan = spectral_project(t, &ops)?;
            out.write_cube("lr", &lr, DataType::F64)?;
            out.write_cube("pan", &pan, DataType::F64)?;
            (lr, pan)
        }
        None => {
            let lr = read_cube(&mut out, opts.lr.as_ref().expect("checked above"))?;
            let pan_path = p.require::<PathBuf>("pan")?;
            (lr, read_cube(&mut out, &pan_path)?)
        }
    };

    let outcome = fuse(&lr, &pan, &ops, opts.solver.lambda, &cfg)?;
    out.write_cube("fused", &outcome.fused, DataType::F64)?;
    quicklook_band(
        &mut out,
        "fused.pgm",
        &outcome.fused,
        outcome.fused.bands() / 2,
    )?;

    let (mse_value, psnr_value, baseline) = match &truth {
        Some(t) => {
            let peak = t.values().iter().copied().fold(0.0, f64::max);
            let base = nearest_upsample(&lr, scale)?;
            (
                Some(mse(t, &outcome.fused)?),
                Some(psnr(t, &outcome.fused, peak)?),
                Some(mse(t, &base)?),
            )
        }
        None => (None, None, None),
    };
    let metrics = Metrics {
        iterations: outcome.report.iterations,
        converged: outcome.report.converged,
        initial_residuals: outcome.initial_residuals,
        final_residuals: outcome.final_residuals,
        mse: mse_value,
        psnr: psnr_value,
        baseline_mse: baseline,
    };
    ctx.finish(out, "fuse", &opts, &metrics)
}
