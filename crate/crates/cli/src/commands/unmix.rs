use std::path::PathBuf;

use hsi_core::envi::DataType;
use hsi_core::textio::{write_spectra_table, SpectraTable};
use hsi_core::unmix::{
    fcls_with_report, library_match, nfindr, nmf_unmix, ppi, vca, AbundanceMaps, ConstraintMode,
    EndmemberSet, LibraryMatch, MatchMetric, NmfConfig, NmfInit, SpectralLibrary,
};
use hsi_core::{HsiError, HyperCube};
use serde::Serialize;

use super::{quicklook_abundances, read_cube, read_table, settings, Ctx};

settings!(Settings {
    /// Cube to unmix; defaults to the synth output in the same root.
    input,
    /// `vca`, `nfindr`, `ppi`, `nmf` or `given`.
    extractor,
    /// Number of endmembers.
    p,
    /// Abundance constraints: `full`, `sum_to_one` or `unconstrained`.
    mode,
    /// Spectra table of known endmembers for `extractor = given`.
    endmembers,
    /// Spectra table to match the extracted endmembers against.
    library,
    /// `spectral_angle` or `euclidean`.
    match_metric,
    /// Random projections used by `ppi`.
    skewers,
    /// Hits needed to count as a `ppi` candidate.
    ppi_threshold,
    nmf_iters,
    nmf_tol,
    /// `vca` or `random` starting endmembers for `nmf`.
    nmf_init,
});

pub const ENDMEMBERS: &str = "endmembers.csv";
pub const ABUNDANCES: &str = "abundances";

#[derive(Debug, Serialize)]
struct Options {
    input: PathBuf,
    extractor: String,
    p: usize,
    mode: String,
    endmembers: Option<PathBuf>,
    library: Option<PathBuf>,
    match_metric: String,
    skewers: usize,
    ppi_threshold: u32,
    nmf_iters: usize,
    nmf_tol: f64,
    nmf_init: String,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Metrics {
    extractor: String,
    endmembers: usize,
    /// Root mean square of `X - E A` over all samples.
    reconstruction_rmse: f64,
    /// Pixels where the active-set solver fell back to simplex projection.
    stalled_pixels: usize,
    /// Data pixels chosen as endmembers, when the extractor picks pixels.
    pixels: Option<Vec<usize>>,
    nmf_iterations: Option<usize>,
    library_best: Option<Vec<String>>,
}

fn mode_of(name: &str) -> ConstraintMode {
    match name {
        "sum_to_one" => ConstraintMode::SumToOne,
        "unconstrained" => ConstraintMode::Unconstrained,
        _ => ConstraintMode::Full,
    }
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let p = &ctx.params;
    let extractor = p.choice(
        "extractor",
        &["vca", "nfindr", "ppi", "nmf", "given"],
        "vca",
    )?;
    let d = NmfConfig::default();
    let opts = Options {
        input: ctx.path_or("input", ctx.stage("synth").join("cube.hdr"))?,
        endmembers: if extractor == "given" {
            Some(p.require("endmembers")?)
        } else {
            p.get("endmembers")?
        },
        extractor,
        p: p.get_or("p", 3)?,
        mode: p.choice("mode", &["full", "sum_to_one", "unconstrained"], "full")?,
        library: p.get("library")?,
        match_metric: p.choice(
            "match_metric",
            &["spectral_angle", "euclidean"],
            "spectral_angle",
        )?,
        skewers: p.get_or("skewers", 1000)?,
        ppi_threshold: p.get_or("ppi_threshold", 1)?,
        nmf_iters: p.get_or("nmf_iters", d.max_iters)?,
        nmf_tol: p.get_or("nmf_tol", d.tol)?,
        nmf_init: p.choice("nmf_init", &["vca", "random"], "vca")?,
        seed: ctx.seed,
    };
    let mut out = ctx.open("unmix")?;
    let cube = read_cube(&mut out, &opts.input)?;
    let x = cube.to_matrix();

    let mut nmf_iterations = None;
    let (endmembers, abundances, stalled): (EndmemberSet, AbundanceMaps, usize) =
        if opts.extractor == "nmf" {
            let init = match opts.nmf_init.as_str() {
                "random" => NmfInit::Random { seed: opts.seed },
                _ => NmfInit::Vca { seed: opts.seed },
            };
            let cfg = NmfConfig {
                max_iters: opts.nmf_iters,
                tol: opts.nmf_tol,
                ..d
            };
            let res = nmf_unmix(&x, opts.p, &init, &cfg)?;
            nmf_iterations = Some(res.iterations);
            (res.endmembers, res.abundances, 0)
        } else {
            let e = match opts.extractor.as_str() {
                "vca" => vca(&x, opts.p, opts.seed)?.endmembers,
                "nfindr" => nfindr(&x, opts.p, opts.seed, None)?.endmembers,
                "ppi" => {
                    let res = ppi(&x, opts.skewers, opts.seed, opts.ppi_threshold)?;
                    if res.candidates.len() < opts.p {
                        return Err(HsiError::KTooLarge {
                            k: opts.p,
                            available: res.candidates.len(),
                        }
                        .into());
                    }
                    EndmemberSet::from_pixels(&x, res.candidates[..opts.p].to_vec())?
                }
                _ => {
                    let path = opts.endmembers.as_ref().expect("required above");
                    let table = read_table(&mut out, path)?;
                    let mut set = EndmemberSet::new(table.spectra)?;
                    set.names = Some(table.names);
                    set
                }
            };
            let (a, report) = fcls_with_report(&e.spectra, &x, mode_of(&opts.mode))?;
            (e, a, report.stalled.len())
        };

    let residual = &x - &endmembers.spectra * &abundances.coefficients;
    let reconstruction_rmse = (residual.norm_squared() / residual.len().max(1) as f64).sqrt();

    let names = endmembers
        .names
        .clone()
        .unwrap_or_else(|| (1..=endmembers.count()).map(|k| format!("em{k}")).collect());
    let table = SpectraTable {
        axis: cube.axis().clone(),
        names,
        spectra: endmembers.spectra.clone(),
    };
    write_spectra_table(out.path(ENDMEMBERS), &table)?;
    out.adopt(ENDMEMBERS);
    let maps = HyperCube::from_matrix(&abundances.coefficients, cube.height(), cube.width())?;
    out.write_cube(ABUNDANCES, &maps, DataType::F64)?;
    quicklook_abundances(&mut out, "abundance_", &maps)?;

    let library_best = match &opts.library {
        Some(path) => {
            let lib = SpectralLibrary::from(&read_table(&mut out, path)?);
            let metric = match opts.match_metric.as_str() {
                "euclidean" => MatchMetric::Euclidean,
                _ => MatchMetric::SpectralAngle,
            };
            let matches: Vec<LibraryMatch> = library_match(&endmembers, cube.axis(), &lib, metric)?;
            out.write_json("library_matches.json", &matches)?;
            Some(matches.into_iter().map(|m| m.best).collect())
        }
        None => None,
    };

    let metrics = Metrics {
        extractor: opts.extractor.clone(),
        endmembers: endmembers.count(),
        reconstruction_rmse,
        stalled_pixels: stalled,
        pixels: endmembers.pixels.clone(),
        nmf_iterations,
        library_best,
    };
    ctx.finish(out, "unmix", &opts, &metrics)
}
