//! Subcommands. Each one reads its `[section]` of the config, writes into
//! `<out>/<command>/` and finishes with `metrics.json` and `manifest.json`.

use std::path::{Path, PathBuf};

use anyhow::Context as _;
use hsi_core::classify::LabelMap;
use hsi_core::envi::{find_binary, read_envi};
use hsi_core::ops::Kernel2d;
use hsi_core::quicklook::{encode_pgm, label_levels, stretch};
use hsi_core::solver::{RestoreConfig, StepRule};
use hsi_core::textio::{read_spectra_table, SpectraTable};
use hsi_core::HyperCube;
use serde::Serialize;

use crate::config::{ConfigFile, Params};
use crate::error::CliError;
use crate::output::OutputDir;

pub mod calibrate;
pub mod classify;
pub mod eval;
pub mod fuse;
pub mod info;
pub mod reduce;
pub mod restore;
pub mod synth;
pub mod unmix;

/// Declares a subcommand's settings once: each becomes a `--flag` and a
/// config key of the same name (underscores in keys, dashes in flags).
macro_rules! settings {
    ($name:ident { $($(#[$doc:meta])* $field:ident),* $(,)? }) => {
        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct $name {
            $(
                $(#[$doc])*
                #[arg(long, value_name = "VALUE")]
                pub $field: Option<String>,
            )*
            /// Any setting of this command, as KEY=VALUE.
            #[arg(long = "set", value_name = "KEY=VALUE")]
            pub set: Vec<String>,
        }

        impl $name {
            /// Config keys accepted in this command's section.
            pub const KEYS: &'static [&'static str] = &["seed", $(stringify!($field)),*];

            pub fn overrides(&self) -> Result<Vec<(String, String)>, $crate::error::CliError> {
                let mut out = Vec::new();
                for s in &self.set {
                    let (k, v) = s
                        .split_once('=')
                        .ok_or_else(|| $crate::error::CliError::BadOverride(s.clone()))?;
                    out.push((k.trim().to_string(), v.trim().to_string()));
                }
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field).to_string(), v.clone()));
                    }
                )*
                Ok(out)
            }
        }
    };
}
pub(crate) use settings;

/// Section names and their accepted keys.
pub fn sections() -> [(&'static str, &'static [&'static str]); 8] {
    [
        ("synth", synth::Settings::KEYS),
        ("calibrate", calibrate::Settings::KEYS),
        ("restore", restore::Settings::KEYS),
        ("fuse", fuse::Settings::KEYS),
        ("reduce", reduce::Settings::KEYS),
        ("classify", classify::Settings::KEYS),
        ("unmix", unmix::Settings::KEYS),
        ("eval", eval::Settings::KEYS),
    ]
}

/// Rejects unknown sections and unknown keys anywhere in the file, so a
/// typo fails even when the misspelled section is not the one being run.
pub fn validate_file(file: &ConfigFile) -> Result<(), CliError> {
    let known = sections();
    let names: Vec<&str> = known.iter().map(|(n, _)| *n).collect();
    file.check_sections(&names)?;
    for (name, keys) in known {
        Params::new(name, Some(file), &[], keys)?;
    }
    Ok(())
}

/// Everything a command needs besides its inputs.
pub struct Ctx {
    /// Output root shared by a pipeline; each command uses `root/<name>`.
    pub root: PathBuf,
    /// Seed after applying the section's own `seed`, if any.
    pub seed: u64,
    pub params: Params,
    /// Resolved global settings, echoed into manifests.
    pub global: serde_json::Value,
}

impl Ctx {
    /// Output directory of another command in the same root.
    pub fn stage(&self, command: &str) -> PathBuf {
        self.root.join(command)
    }

    /// Path setting `key`, or `fallback` when unset.
    pub fn path_or(&self, key: &str, fallback: PathBuf) -> Result<PathBuf, CliError> {
        Ok(self.params.get::<PathBuf>(key)?.unwrap_or(fallback))
    }

    pub fn open(&self, command: &str) -> Result<OutputDir, CliError> {
        OutputDir::create(self.stage(command))
    }

    /// Writes metrics and the manifest echoing `options`.
    pub fn finish<O: Serialize, M: Serialize>(
        &self,
        mut out: OutputDir,
        command: &str,
        options: &O,
        metrics: &M,
    ) -> anyhow::Result<()> {
        out.write_json(crate::output::METRICS_NAME, metrics)?;
        let mut config = self.global.clone();
        config[command] = serde_json::to_value(options)?;
        let manifest = out.finish(command, &config)?;
        log::info!("wrote {}", manifest.display());
        Ok(())
    }
}

/// Reads an ENVI cube and records header and binary as inputs.
pub fn read_cube(out: &mut OutputDir, header: &Path) -> anyhow::Result<HyperCube> {
    let cube = read_envi(header).with_context(|| format!("reading {}", header.display()))?;
    out.input(header);
    out.input(&find_binary(header)?);
    Ok(cube)
}

/// Reads a single-band label cube.
pub fn read_labels(out: &mut OutputDir, header: &Path) -> anyhow::Result<LabelMap> {
    let cube = read_cube(out, header)?;
    if cube.bands() != 1 {
        return Err(hsi_core::HsiError::ShapeMismatch(format!(
            "label file {} has {} bands, expected 1",
            header.display(),
            cube.bands()
        ))
        .into());
    }
    let labels = cube
        .values()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(hsi_core::HsiError::InvalidLabel(v as u32))
            }
        })
        .collect::<Result<Vec<u32>, _>>()?;
    Ok(LabelMap::new(cube.height(), cube.width(), labels)?)
}

pub fn read_table(out: &mut OutputDir, path: &Path) -> anyhow::Result<SpectraTable> {
    let table = read_spectra_table(path).with_context(|| format!("reading {}", path.display()))?;
    out.input(path);
    Ok(table)
}

/// Label map stored as a one-band cube.
pub fn labels_cube(labels: &LabelMap) -> anyhow::Result<HyperCube> {
    let values = labels.labels.iter().map(|&l| l as f64).collect();
    Ok(HyperCube::from_values(
        labels.height,
        labels.width,
        1,
        values,
    )?)
}

/// Min-max stretched PGM of one band.
pub fn quicklook_band(
    out: &mut OutputDir,
    name: &str,
    cube: &HyperCube,
    band: usize,
) -> anyhow::Result<()> {
    let plane = cube.band_plane(band.min(cube.bands().saturating_sub(1)));
    out.write_bytes(
        name,
        &encode_pgm(cube.width(), cube.height(), &stretch(&plane)),
    )?;
    Ok(())
}

pub fn quicklook_labels(out: &mut OutputDir, name: &str, labels: &LabelMap) -> anyhow::Result<()> {
    out.write_bytes(
        name,
        &encode_pgm(labels.width, labels.height, &label_levels(&labels.labels)),
    )?;
    Ok(())
}

/// One quicklook per abundance band, `<prefix><k>.pgm` with 1-based `k`.
pub fn quicklook_abundances(
    out: &mut OutputDir,
    prefix: &str,
    maps: &HyperCube,
) -> anyhow::Result<()> {
    for k in 0..maps.bands() {
        quicklook_band(out, &format!("{prefix}{}.pgm", k + 1), maps, k)?;
    }
    Ok(())
}

/// Solver settings shared by `restore` and `fuse`.
#[derive(Debug, Clone, Serialize)]
pub struct SolverSettings {
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// `auto` or a fixed positive step.
    pub step: String,
}

impl SolverSettings {
    pub fn read(p: &Params, default_lambda: f64) -> Result<Self, CliError> {
        let d = RestoreConfig::default();
        Ok(Self {
            lambda: p.get_or("lambda", default_lambda)?,
            max_iters: p.get_or("max_iters", d.max_iters)?,
            tol: p.get_or("tol", d.tol)?,
            step: p.get_or("step", "auto".to_string())?,
        })
    }

    pub fn config(&self) -> Result<RestoreConfig, CliError> {
        let step = match self.step.trim().to_ascii_lowercase().as_str() {
            "auto" => StepRule::Auto,
            s => StepRule::Fixed(s.parse::<f64>().map_err(|e| CliError::InvalidValue {
                key: "step".into(),
                value: self.step.clone(),
                reason: e.to_string(),
            })?),
        };
        Ok(RestoreConfig {
            lambda: self.lambda,
            max_iters: self.max_iters,
            tol: self.tol,
            step,
        })
    }
}

/// Blur kernel settings shared by `restore` and `fuse`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSettings {
    /// `gaussian`, `box` or `csv`.
    pub kernel: String,
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    pub kernel_csv: Option<PathBuf>,
}

impl KernelSettings {
    pub fn read(p: &Params, default_kind: &str, default_size: usize) -> Result<Self, CliError> {
        Ok(Self {
            kernel: p.choice("kernel", &["gaussian", "box", "csv"], default_kind)?,
            kernel_size: p.get_or("kernel_size", default_size)?,
            kernel_sigma: p.get_or("kernel_sigma", 1.0)?,
            kernel_csv: p.get("kernel_csv")?,
        })
    }

    pub fn build(&self, out: &mut OutputDir) -> anyhow::Result<Kernel2d> {
        Ok(match self.kernel.as_str() {
            "gaussian" => Kernel2d::gaussian(self.kernel_size, self.kernel_sigma)?,
            "box" => Kernel2d::boxed(self.kernel_size)?,
            _ => {
                let path = self
                    .kernel_csv
                    .as_ref()
                    .ok_or_else(|| CliError::MissingKey("kernel_csv".into()))?;
                let m = hsi_core::textio::read_matrix_csv(path)?;
                out.input(path);
                // nalgebra is column-major; kernels are row-major
                Kernel2d::new(
                    m.nrows(),
                    m.ncols(),
                    m.transpose().iter().copied().collect(),
                )?
            }
        })
    }
}
