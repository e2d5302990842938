use hsi_core::envi::DataType;
use hsi_core::synth::{generate_scene, NoiseProfile, SceneSpec};
use hsi_core::textio::{write_spectra_table, SpectraTable};
use hsi_core::HyperCube;
use serde::Serialize;

use super::{labels_cube, quicklook_abundances, quicklook_band, quicklook_labels, settings, Ctx};

settings!(Settings {
    height,
    width,
    bands,
    /// Number of endmembers.
    p,
    pure_pixels,
    max_abundance,
    /// Signal-to-noise ratio in dB; `inf` for a noiseless cube.
    snr_db,
    class_regions,
    /// `sensor` or `white`.
    noise_profile,
});

pub const CUBE: &str = "cube";
pub const CLEAN: &str = "clean";
pub const LABELS: &str = "labels";
pub const ABUNDANCES: &str = "abundances";
pub const ENDMEMBERS: &str = "endmembers.csv";

#[derive(Debug, Serialize)]
struct Metrics {
    noise_sigma: f64,
    class_counts: Vec<usize>,
    endmembers: usize,
}

pub fn scene_spec(ctx: &Ctx) -> anyhow::Result<SceneSpec> {
    let p = &ctx.params;
    let d = SceneSpec::default();
    let profile = match p
        .choice("noise_profile", &["sensor", "white"], "sensor")?
        .as_str()
    {
        "white" => NoiseProfile::White,
        _ => NoiseProfile::Sensor,
    };
    let snr_db = if p.has("snr_db") {
        p.optional_real("snr_db")?
    } else {
        d.snr_db
    };
    let spec = SceneSpec {
        height: p.get_or("height", d.height)?,
        width: p.get_or("width", d.width)?,
        bands: p.get_or("bands", d.bands)?,
        p: p.get_or("p", d.p)?,
        seed: ctx.seed,
        pure_pixels: p.get_or("pure_pixels", d.pure_pixels)?,
        max_abundance: p.get_or("max_abundance", d.max_abundance)?,
        snr_db,
        class_regions: p.get_or("class_regions", d.class_regions)?,
        noise_profile: profile,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let spec = scene_spec(ctx)?;
    let scene = generate_scene(&spec)?;
    let truth = &scene.truth;
    let mut out = ctx.open("synth")?;

    out.write_cube(CUBE, &scene.cube, DataType::F64)?;
    out.write_cube(CLEAN, &truth.clean_cube, DataType::F64)?;
    out.write_cube(LABELS, &labels_cube(&truth.labels)?, DataType::U16)?;
    let mut maps = HyperCube::from_matrix(&truth.abundances.coefficients, spec.height, spec.width)?;
    maps.metadata.description = "abundance maps, one band per endmember".into();
    out.write_cube(ABUNDANCES, &maps, DataType::F64)?;
    let table = SpectraTable {
        axis: scene.cube.axis().clone(),
        names: (1..=spec.p).map(|k| format!("em{k}")).collect(),
        spectra: truth.endmembers.spectra.clone(),
    };
    write_spectra_table(out.path(ENDMEMBERS), &table)?;
    out.adopt(ENDMEMBERS);
    out.write_json("scene.json", &spec)?;

    quicklook_band(&mut out, "cube.pgm", &scene.cube, spec.bands / 2)?;
    quicklook_labels(&mut out, "labels.pgm", &truth.labels)?;
    quicklook_abundances(&mut out, "abundance_", &maps)?;

    let metrics = Metrics {
        noise_sigma: scene.noise_sigma,
        class_counts: truth.labels.class_counts(),
        endmembers: spec.p,
    };
    ctx.finish(out, "synth", &spec, &metrics)
}
