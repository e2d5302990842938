//! Seeded ground-truth scenes: endmembers, abundance fields, class maps and
//! noisy cubes.
//!
//! One seed drives everything. Endmembers, abundances and noise draw from
//! separate ChaCha streams of that seed, so changing e.g. the SNR leaves the
//! endmembers and abundances untouched.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::classify::LabelMap;
use crate::cube::{HyperCube, SpectralAxis};
use crate::error::{HsiError, Result};
use crate::ops::reflect;
use crate::unmix::{lmm_synthesize, sad, AbundanceMaps, ConstraintMode, EndmemberSet};

/// Minimum pairwise spectral angle between generated endmembers.
pub const MIN_ENDMEMBER_SAD: f64 = 0.15;
/// Candidate spectra tried before giving up.
pub const MAX_ATTEMPTS: usize = 1000;
/// Exclusive upper bound on generated endmember values.
pub const ENDMEMBER_CEILING: f64 = 1.2;
/// Wavelength range assigned to synthetic cubes, in nanometres.
pub const WAVELENGTH_RANGE: (f64, f64) = (400.0, 2500.0);

const ENDMEMBER_STREAM: u64 = 0;
const ABUNDANCE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    /// Number of endmembers.
    pub p: usize,
    pub seed: u64,
    /// Plant one pure pixel per endmember; otherwise cap abundances.
    pub pure_pixels: bool,
    /// Largest abundance allowed when `pure_pixels` is false.
    pub max_abundance: f64,
    /// Signal-to-noise ratio in dB; `None` means noiseless.
    pub snr_db: Option<f64>,
    /// Side of the square blocks sharing one abundance draw; 1 draws per pixel.
    pub class_regions: usize,
    #[serde(default)]
    pub noise_profile: NoiseProfile,
}

/// Spectral shape of the additive noise. Either way the mean noise power
/// over all samples matches the requested SNR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseProfile {
    /// Same standard deviation in every band.
    White,
    /// Variance rising toward both ends of the range plus strong peaks at
    /// the 1400 nm and 1900 nm water absorption bands, where real sensors
    /// receive little light.
    #[default]
    Sensor,
}

/// Centre and width (nm) of the water absorption features.
const ABSORPTION_BANDS: [(f64, f64); 2] = [(1400.0, 60.0), (1900.0, 80.0)];
const ABSORPTION_GAIN: f64 = 40.0;

impl NoiseProfile {
    /// Per-band standard deviation multipliers with mean square one.
    pub fn band_scales(self, axis: &SpectralAxis) -> Vec<f64> {
        let (lo, hi) = axis.range().unwrap_or((0.0, 0.0));
        let var: Vec<f64> = axis
            .wavelengths()
            .iter()
            .map(|&wl| match self {
                NoiseProfile::White => 1.0,
                NoiseProfile::Sensor => {
                    let u = if hi > lo {
                        2.0 * (wl - lo) / (hi - lo) - 1.0
                    } else {
                        0.0
                    };
                    let water: f64 = ABSORPTION_BANDS
                        .iter()
                        .map(|&(c, w)| (-((wl - c) / w).powi(2)).exp())
                        .sum();
                    1.0 + 3.0 * u * u + ABSORPTION_GAIN * water
                }
            })
            .collect();
        let mean = var.iter().sum::<f64>() / var.len().max(1) as f64;
        var.iter().map(|v| (v / mean).sqrt()).collect()
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            bands: 50,
            p: 3,
            seed: 0,
            pure_pixels: true,
            max_abundance: 1.0,
            snr_db: None,
            class_regions: 8,
            noise_profile: NoiseProfile::default(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(HsiError::InvalidConfig(
                "scene needs at least one endmember".into(),
            ));
        }
        if self.p > self.bands {
            return Err(HsiError::KTooLarge {
                k: self.p,
                available: self.bands,
            });
        }
        if self.height * self.width < self.p {
            return Err(HsiError::InvalidConfig(format!(
                "{}x{} scene cannot hold {} pure pixels",
                self.height, self.width, self.p
            )));
        }
        if self.class_regions == 0 {
            return Err(HsiError::InvalidConfig(
                "class_regions must be at least 1".into(),
            ));
        }
        if !(self.max_abundance > 0.0 && self.max_abundance <= 1.0) {
            return Err(HsiError::InvalidConfig(format!(
                "max_abundance {} outside (0, 1]",
                self.max_abundance
            )));
        }
        if !self.pure_pixels && self.max_abundance * (self.p as f64) < 1.0 - 1e-12 {
            return Err(HsiError::InfeasibleCap {
                cap: self.max_abundance,
                p: self.p,
            });
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return Err(HsiError::InvalidConfig("snr_db is NaN".into()));
            }
        }
        Ok(())
    }

    pub fn axis(&self) -> SpectralAxis {
        SpectralAxis::linspace(WAVELENGTH_RANGE.0, WAVELENGTH_RANGE.1, self.bands)
            .expect("increasing grid")
    }
}

fn candidate_spectrum(bands: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let baseline = rng.random_range(0.1..0.5);
    let slope = rng.random_range(-0.2..0.2);
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(2..=4))
        .map(|_| {
            let centre = rng.random_range(0.0..1.0);
            let width = rng.random_range(0.04..0.25);
            let amp = rng.random_range(0.15..0.6) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (centre, width, amp)
        })
        .collect();
    (0..bands)
        .map(|b| {
            let t = if bands > 1 {
                b as f64 / (bands - 1) as f64
            } else {
                0.5
            };
            let bumps: f64 = bumps
                .iter()
                .map(|&(c, w, a)| a * (-0.5 * ((t - c) / w).powi(2)).exp())
                .sum();
            baseline + slope * (t - 0.5) + bumps
        })
        .collect()
}

/// `p` smooth positive spectra, pairwise at least `MIN_ENDMEMBER_SAD` apart.
pub fn generate_endmembers(bands: usize, p: usize, seed: u64) -> Result<EndmemberSet> {
    if p == 0 || bands == 0 {
        return Err(HsiError::InvalidConfig(
            "need at least one band and one endmember".into(),
        ));
    }
    let mut rng = stream(seed, ENDMEMBER_STREAM);
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut attempts = 0;
    while accepted.len() < p {
        if attempts == MAX_ATTEMPTS {
            return Err(HsiError::RejectionExhausted(MAX_ATTEMPTS));
        }
        attempts += 1;
        let s = candidate_spectrum(bands, &mut rng);
        if s.iter().any(|&v| !(v > 0.01 && v < ENDMEMBER_CEILING)) {
            continue;
        }
        let distinct = accepted
            .iter()
            .all(|o| sad(o, &s).is_ok_and(|a| a >= MIN_ENDMEMBER_SAD));
        if distinct {
            accepted.push(s);
        }
    }
    let flat: Vec<f64> = accepted.concat();
    let mut set = EndmemberSet::new(DMatrix::from_column_slice(bands, p, &flat))?;
    set.names = Some((1..=p).map(|i| format!("em{i}")).collect());
    Ok(set)
}

fn dirichlet_ones(p: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..p).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Spatially coherent abundance field satisfying nonnegativity and
/// sum-to-one.
///
/// Each `class_regions`-sided block shares one flat Dirichlet draw; the
/// planes are then smoothed with a 3x3 mean filter. Pure-pixel scenes
/// overwrite, for every endmember, the pixel where it is most abundant with
/// a one-hot column. Capped scenes shrink each column toward the barycenter
/// until its largest entry is `max_abundance`.
pub fn generate_abundances(spec: &SceneSpec) -> Result<AbundanceMaps> {
    spec.validate()?;
    let (h, w, p) = (spec.height, spec.width, spec.p);
    let block = spec.class_regions;
    let (bh, bw) = (h.div_ceil(block), w.div_ceil(block));
    let mut rng = stream(spec.seed, ABUNDANCE_STREAM);
    let draws: Vec<Vec<f64>> = (0..bh * bw).map(|_| dirichlet_ones(p, &mut rng)).collect();
    let raw = DMatrix::from_fn(p, h * w, |k, j| {
        draws[(j / w / block) * bw + (j % w) / block][k]
    });
    let mut a = DMatrix::zeros(p, h * w);
    for r in 0..h {
        for c in 0..w {
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    let rr = reflect(r as isize + dr, h);
                    let cc = reflect(c as isize + dc, w);
                    for k in 0..p {
                        a[(k, r * w + c)] += raw[(k, rr * w + cc)] / 9.0;
                    }
                }
            }
        }
    }
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    if spec.pure_pixels {
        let mut used = vec![false; h * w];
        for k in 0..p {
            let mut best: Option<usize> = None;
            for j in 0..h * w {
                if !used[j] && best.is_none_or(|b| a[(k, j)] > a[(k, b)]) {
                    best = Some(j);
                }
            }
            let j = best.expect("validated: at least p pixels");
            used[j] = true;
            a.column_mut(j).fill(0.0);
            a[(k, j)] = 1.0;
        }
    } else {
        let cap = spec.max_abundance;
        let centre = 1.0 / p as f64;
        for mut col in a.column_iter_mut() {
            let top = col.max();
            if top > cap {
                let t = (cap - centre).max(0.0) / (top - centre);
                col.iter_mut().for_each(|v| *v = centre + t * (*v - centre));
            }
        }
    }
    Ok(AbundanceMaps {
        coefficients: a,
        mode: ConstraintMode::Full,
    })
}

/// Class `k + 1` where endmember `k` is most abundant (lowest index on ties).
pub fn argmax_labels(a: &AbundanceMaps, height: usize, width: usize) -> Result<LabelMap> {
    let labels = a
        .coefficients
        .column_iter()
        .map(|c| {
            let mut best = 0;
            for k in 1..c.len() {
                if c[k] > c[best] {
                    best = k;
                }
            }
            best as u32 + 1
        })
        .collect();
    LabelMap::new(height, width, labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub endmembers: EndmemberSet,
    pub abundances: AbundanceMaps,
    pub labels: LabelMap,
    pub clean_cube: HyperCube,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub truth: GroundTruth,
    /// Clean cube plus noise at the requested SNR.
    pub cube: HyperCube,
    pub noise_sigma: f64,
}

/// Noise standard deviation giving `snr_db` against the mean signal power of
/// `x`.
pub fn noise_sigma_for(x: &[f64], snr_db: f64) -> f64 {
    let power = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    (power / 10f64.powf(snr_db / 10.0)).sqrt()
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let endmembers = generate_endmembers(spec.bands, spec.p, spec.seed)?;
    let abundances = generate_abundances(spec)?;
    let x = lmm_synthesize(&endmembers, &abundances, 0.0, 0)?;
    let mut clean_cube = HyperCube::from_matrix(&x, spec.height, spec.width)?;
    clean_cube.set_axis(spec.axis())?;
    clean_cube.metadata.description = format!("synthetic scene, seed {}", spec.seed);
    let labels = argmax_labels(&abundances, spec.height, spec.width)?;
    let (cube, noise_sigma) = match spec.snr_db {
        Some(snr) if snr.is_finite() => {
            let sigma = noise_sigma_for(clean_cube.values(), snr);
            let mut rng = stream(spec.seed, NOISE_STREAM);
            let normal =
                Normal::new(0.0, sigma).map_err(|e| HsiError::InvalidConfig(e.to_string()))?;
            let scales = spec.noise_profile.band_scales(clean_cube.axis());
            let noisy = clean_cube
                .values()
                .iter()
                .zip(scales.iter().cycle())
                .map(|(v, g)| v + g * normal.sample(&mut rng))
                .collect();
            (clean_cube.with_values(noisy)?, sigma)
        }
        _ => (clean_cube.clone(), 0.0),
    };
    Ok(Scene {
        truth: GroundTruth {
            endmembers,
            abundances,
            labels,
            clean_cube,
        },
        cube,
        noise_sigma,
    })
}
