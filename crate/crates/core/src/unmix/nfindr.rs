use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{vca, EndmemberSet};
use crate::dimred::{pca_fit, LinearProjection};
use crate::error::{HsiError, Result};

/// Random starts tried besides the VCA start.
pub const NFINDR_RESTARTS: usize = 10;
const MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct NfindrResult {
    pub endmembers: EndmemberSet,
    /// Simplex volume after each accepted swap of the winning start.
    pub volume_trace: Vec<f64>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `[1; Z]` for the chosen columns of the reduced data `z`.
fn augmented(z: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let d = z.nrows();
    DMatrix::from_fn(d + 1, cols.len(), |r, c| {
        if r == 0 {
            1.0
        } else {
            z[(r - 1, cols[c])]
        }
    })
}

/// Volume of the simplex spanned by the `p` columns of a `(p - 1) x p`
/// matrix.
pub fn simplex_volume(vertices: &DMatrix<f64>) -> f64 {
    let cols: Vec<usize> = (0..vertices.ncols()).collect();
    augmented(vertices, &cols).determinant().abs() / factorial(vertices.nrows())
}

/// Best-single-swap ascent from `start`. Returns the final vertex set and
/// the volume after each accepted swap.
fn ascend(z: &DMatrix<f64>, start: Vec<usize>) -> Option<(Vec<usize>, Vec<f64>)> {
    let p = start.len();
    let norm = factorial(p - 1);
    let mut set = start;
    let mut m = augmented(z, &set);
    let mut trace = vec![m.determinant().abs() / norm];
    let all = augmented(z, &(0..z.ncols()).collect::<Vec<_>>());
    for _ in 0..MAX_SWEEPS {
        let inv = m.clone().try_inverse()?;
        // replacing vertex j by pixel i scales the determinant by w[j, i]
        let w = inv * &all;
        let mut best = (0, 0, 1.0 + 1e-12);
        for i in 0..w.ncols() {
            for j in 0..p {
                let gain = w[(j, i)].abs();
                if gain > best.2 {
                    best = (j, i, gain);
                }
            }
        }
        if best.2 <= 1.0 + 1e-12 {
            break;
        }
        set[best.0] = best.1;
        m = augmented(z, &set);
        let vol = m.determinant().abs() / norm;
        if vol < *trace.last().expect("non-empty") {
            break;
        }
        trace.push(vol);
    }
    Some((set, trace))
}

/// N-FINDR on the columns of `x`, searched in the `p - 1` dimensional space
/// of `projection` (a fresh PCA when `None`). Starts from the VCA pixels
/// and from `NFINDR_RESTARTS` random pixel sets; the largest final simplex
/// wins.
pub fn nfindr(
    x: &DMatrix<f64>,
    p: usize,
    seed: u64,
    projection: Option<&LinearProjection>,
) -> Result<NfindrResult> {
    let n = x.ncols();
    if p < 2 {
        return Err(HsiError::InvalidConfig(
            "N-FINDR needs at least two endmembers".into(),
        ));
    }
    if p > n {
        return Err(HsiError::KTooLarge { k: p, available: n });
    }
    let fitted;
    let proj = match projection {
        Some(pr) => pr,
        None => {
            fitted = pca_fit(x, p - 1)?;
            &fitted
        }
    };
    if proj.components() != p - 1 {
        return Err(HsiError::DimMismatch(format!(
            "N-FINDR with {p} endmembers needs {} components, projection has {}",
            p - 1,
            proj.components()
        )));
    }
    let z = proj.project(x)?;
    let scale = z.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let min_volume = 1e-12 * scale.powi(p as i32 - 1) / factorial(p - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(NFINDR_RESTARTS + 1);
    match vca(x, p, seed) {
        Ok(v) => starts.push(v.endmembers.pixels.expect("vca records pixels")),
        Err(e) => log::debug!("VCA start unavailable: {e}"),
    }
    for _ in 0..NFINDR_RESTARTS {
        starts.push(sample(&mut rng, n, p).into_vec());
    }
    let mut best: Option<(Vec<usize>, Vec<f64>)> = None;
    for start in starts {
        if simplex_volume(&z.select_columns(&start)) <= min_volume {
            continue;
        }
        if let Some((set, trace)) = ascend(&z, start) {
            let vol = *trace.last().expect("non-empty");
            if best
                .as_ref()
                .is_none_or(|(_, t)| vol > *t.last().expect("non-empty"))
            {
                best = Some((set, trace));
            }
        }
    }
    let (set, volume_trace) = best.ok_or(HsiError::DegenerateSimplex(NFINDR_RESTARTS))?;
    Ok(NfindrResult {
        endmembers: EndmemberSet::from_pixels(x, set)?,
        volume_trace,
    })
}
