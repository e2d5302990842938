use std::fmt::Write as _;
use std::path::Path;

use hsi_core::envi::read_envi;
use hsi_core::HyperCube;

/// Human-readable summary of a cube.
pub fn report(path: &Path, cube: &HyperCube) -> String {
    let mut s = String::new();
    let m = &cube.metadata;
    let _ = writeln!(s, "{}", path.display());
    let _ = writeln!(
        s,
        "{} rows x {} cols x {} bands ({}, data type {}, {:?})",
        cube.height(),
        cube.width(),
        cube.bands(),
        m.interleave.as_str(),
        m.data_type_code,
        m.byte_order
    );
    let axis = cube.axis();
    match axis.range() {
        Some((lo, hi)) if !m.synthetic_wavelengths => {
            let _ = writeln!(s, "{} bands, {}\u{2013}{} nm", cube.bands(), lo, hi);
        }
        _ => {
            let _ = writeln!(s, "{} bands, no wavelength information", cube.bands());
        }
    }
    let _ = writeln!(s, "quantity: {}", cube.quantity.as_str());
    let _ = writeln!(s, "band\twavelength\tmin\tmean\tmax");
    for (b, (min, mean, max)) in cube.band_stats().into_iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{min}\t{mean}\t{max}",
            b + 1,
            axis.wavelengths()[b]
        );
    }
    s
}

pub fn run(path: &Path) -> anyhow::Result<()> {
    let cube = read_envi(path)?;
    print!("{}", report(path, &cube));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use hsi_core::SpectralAxis;

    #[test]
    fn wavelength_range_line() {
        let mut cube = HyperCube::from_values(1, 1, 242, vec![0.5; 242]).unwrap();
        cube.set_axis(SpectralAxis::linspace(420.0, 2450.0, 242).unwrap())
            .unwrap();
        let r = report(Path::new("x.hdr"), &cube);
        assert!(r.contains("242 bands, 420\u{2013}2450 nm"), "{r}");
        assert_eq!(r.lines().count(), 5 + 242);
    }

    #[test]
    fn single_sample_cube_has_one_stats_line() {
        let cube = HyperCube::from_values(1, 1, 1, vec![3.0]).unwrap();
        let r = report(Path::new("x.hdr"), &cube);
        assert_eq!(r.lines().last().unwrap(), "1\t0\t3\t3\t3");
    }
}
