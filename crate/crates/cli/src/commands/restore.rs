use std::path::PathBuf;

use hsi_core::envi::DataType;
use hsi_core::restore::{degrade, mse, psnr, restore, DegradationOperator, DegradationSpec};
use hsi_core::{HyperCube, MaskPlane};
use serde::Serialize;

use super::{quicklook_band, read_cube, settings, Ctx, KernelSettings, SolverSettings};

settings!(Settings {
    /// Observed cube, or the clean cube when `simulate` is set.
    input,
    /// `identity`, `mask` or `blur`.
    operator,
    /// Comma-separated unobserved columns for the mask operator.
    missing_cols,
    /// `gaussian`, `box` or `csv` for the blur operator.
    kernel,
    kernel_size,
    kernel_sigma,
    /// Row-per-line CSV of kernel weights when `kernel = csv`.
    kernel_csv,
    /// Degrade `input` first and score the result against it.
    simulate,
    /// Noise standard deviation used by `simulate`.
    noise_sigma,
    /// Clean cube for PSNR when not simulating.
    reference,
    /// Peak value for PSNR; defaults to the reference maximum.
    peak,
    lambda,
    max_iters,
    tol,
    step,
});

#[derive(Debug, Serialize)]
struct Options {
    input: PathBuf,
    operator: String,
    missing_cols: Vec<usize>,
    kernel: Option<KernelSettings>,
    simulate: bool,
    noise_sigma: f64,
    seed: u64,
    reference: Option<PathBuf>,
    peak: Option<f64>,
    solver: SolverSettings,
}

#[derive(Debug, Serialize)]
struct Metrics {
    iterations: usize,
    converged: bool,
    initial_objective: f64,
    final_objective: f64,
    step: f64,
    mse: Option<f64>,
    psnr: Option<f64>,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let p = &ctx.params;
    let operator = p.choice("operator", &["identity", "mask", "blur"], "identity")?;
    let opts = Options {
        input: ctx.path_or("input", ctx.stage("synth").join("clean.hdr"))?,
        missing_cols: p.list("missing_cols")?.unwrap_or_default(),
        kernel: if operator == "blur" {
            Some(KernelSettings::read(p, "gaussian", 3)?)
        } else {
            None
        },
        operator,
        simulate: p.get_or("simulate", false)?,
        noise_sigma: p.get_or("noise_sigma", 0.0)?,
        seed: ctx.seed,
        reference: p.get("reference")?,
        peak: p.get("peak")?,
        solver: SolverSettings::read(p, 0.1)?,
    };
    let cfg = opts.solver.config()?;
    let mut out = ctx.open("restore")?;
    let input = read_cube(&mut out, &opts.input)?;

    let op = match opts.operator.as_str() {
        "identity" => DegradationOperator::Identity,
        "mask" => DegradationOperator::Mask(MaskPlane::striped(
            input.height(),
            input.width(),
            &opts.missing_cols,
        )),
        _ => DegradationOperator::Blur(
            opts.kernel
                .as_ref()
                .expect("blur settings read above")
                .build(&mut out)?,
        ),
    };
    let spec = DegradationSpec {
        operator: op,
        noise_sigma: opts.noise_sigma,
        seed: opts.seed,
    };
    spec.validate(input.height(), input.width())?;

    let (observed, reference): (HyperCube, Option<HyperCube>) = if opts.simulate {
        let observed = degrade(&input, &spec)?;
        out.write_cube("observed", &observed, DataType::F64)?;
        (observed, Some(input))
    } else {
        let reference = match &opts.reference {
            Some(path) => Some(read_cube(&mut out, path)?),
            None => None,
        };
        (input, reference)
    };

    let (restored, report) = restore(&observed, &spec, &cfg)?;
    out.write_cube("restored", &restored, DataType::F64)?;
    quicklook_band(&mut out, "restored.pgm", &restored, restored.bands() / 2)?;

    let (mse_value, psnr_value) = match &reference {
        Some(r) => {
            let peak = opts
                .peak
                .unwrap_or_else(|| r.values().iter().copied().fold(0.0, f64::max));
            (Some(mse(r, &restored)?), Some(psnr(r, &restored, peak)?))
        }
        None => (None, None),
    };
    let metrics = Metrics {
        iterations: report.iterations,
        converged: report.converged,
        initial_objective: report
            .objective_trace
            .first()
            .copied()
            .unwrap_or(report.final_objective),
        final_objective: report.final_objective,
        step: report.step,
        mse: mse_value,
        psnr: psnr_value,
    };
    ctx.finish(out, "restore", &opts, &metrics)
}
