use hsi_core::calib::{
    calibrate_reflectance, resample_wavelengths, ReferencePanels, REFLECTANCE_CEILING,
};
use hsi_core::synth::{generate_scene, NoiseProfile, SceneSpec};
use hsi_core::unmix::{fcls, ConstraintMode};
use hsi_core::{HsiError, HyperCube, Quantity, SpectralAxis};
use hsi_testkit::{rng, spectral_angle};
use proptest::prelude::*;
use rand::Rng;

fn small(seed: u64, snr: Option<f64>, profile: NoiseProfile) -> SceneSpec {
    SceneSpec {
        height: 32,
        width: 32,
        bands: 40,
        seed,
        snr_db: snr,
        noise_profile: profile,
        ..SceneSpec::default()
    }
}

#[test]
fn measured_snr_matches_request() {
    for profile in [NoiseProfile::White, NoiseProfile::Sensor] {
        for (seed, snr) in [(1, 10.0), (2, 20.0), (3, 30.0)] {
            let s = generate_scene(&small(seed, Some(snr), profile)).unwrap();
            let clean = s.truth.clean_cube.values();
            let signal = clean.iter().map(|v| v * v).sum::<f64>();
            let noise = clean
                .iter()
                .zip(s.cube.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            let measured = 10.0 * (signal / noise).log10();
            assert!(
                (measured - snr).abs() < 0.5,
                "{profile:?} seed {seed}: {measured:.3} dB"
            );
        }
    }
}

#[test]
fn scenes_are_reproducible_and_seed_dependent() {
    let a = generate_scene(&small(5, Some(25.0), NoiseProfile::Sensor)).unwrap();
    let b = generate_scene(&small(5, Some(25.0), NoiseProfile::Sensor)).unwrap();
    let c = generate_scene(&small(6, Some(25.0), NoiseProfile::Sensor)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.cube.values(), c.cube.values());
}

#[test]
fn endmembers_are_distinct_and_bounded() {
    let s = generate_scene(&SceneSpec {
        p: 6,
        ..small(7, None, NoiseProfile::White)
    })
    .unwrap();
    let e = &s.truth.endmembers.spectra;
    assert!(e.iter().all(|&v| v > 0.0 && v < 1.2));
    for i in 0..6 {
        for j in i + 1..6 {
            let a: Vec<f64> = e.column(i).iter().copied().collect();
            let b: Vec<f64> = e.column(j).iter().copied().collect();
            assert!(spectral_angle(&a, &b) >= 0.15);
        }
    }
}

#[test]
fn fcls_recovers_noiseless_abundances() {
    let s = generate_scene(&small(8, None, NoiseProfile::White)).unwrap();
    let a = fcls(
        &s.truth.endmembers.spectra,
        &s.cube.to_matrix(),
        ConstraintMode::Full,
    )
    .unwrap();
    assert!((a.coefficients - &s.truth.abundances.coefficients).amax() < 1e-6);
}

#[test]
fn abundance_caps_and_pure_pixels() {
    let pure = generate_scene(&small(9, None, NoiseProfile::White)).unwrap();
    let a = &pure.truth.abundances;
    assert!(a.satisfies_full());
    for k in 0..3 {
        assert!(
            a.coefficients.row(k).max() > 1.0 - 1e-12,
            "endmember {k} has a pure pixel"
        );
    }
    let capped = generate_scene(&SceneSpec {
        pure_pixels: false,
        max_abundance: 0.8,
        ..small(9, None, NoiseProfile::White)
    })
    .unwrap();
    assert!(capped.truth.abundances.coefficients.max() <= 0.8 + 1e-12);
    let infeasible = SceneSpec {
        pure_pixels: false,
        max_abundance: 0.3,
        ..small(9, None, NoiseProfile::White)
    };
    assert!(matches!(
        generate_scene(&infeasible),
        Err(HsiError::InfeasibleCap { .. })
    ));
}

#[test]
fn default_scene_classes_are_balanced() {
    for seed in 0..5 {
        let s = generate_scene(&SceneSpec {
            seed,
            ..SceneSpec::default()
        })
        .unwrap();
        let present = s.truth.labels.class_counts();
        assert_eq!(present.len(), 3);
        let (lo, hi) = (
            *present.iter().min().unwrap(),
            *present.iter().max().unwrap(),
        );
        assert!(lo > 0 && hi <= 5 * lo, "seed {seed}: {present:?}");
    }
}

#[test]
fn spec_rejects_unknown_keys() {
    let err = serde_json::from_str::<SceneSpec>(
        r#"{"height":4,"width":4,"bands":5,"p":2,"seed":0,"pure_pixels":true,"max_abundance":1.0,"snr_db":null,"class_regions":2,"colour":1}"#,
    );
    assert!(err.unwrap_err().to_string().contains("colour"));
}

fn dn_frame(values: Vec<f64>, bands: usize) -> HyperCube {
    let mut c = HyperCube::from_values(1, values.len() / bands, bands, values).unwrap();
    c.quantity = Quantity::DigitalNumber;
    c
}

#[test]
fn reference_frames_map_exactly() {
    let mut r = rng(1);
    let l = 16;
    let dark: Vec<f64> = (0..l).map(|_| r.random_range(0.0..500.0)).collect();
    let white: Vec<f64> = dark
        .iter()
        .map(|d| d + r.random_range(1.0..4000.0))
        .collect();
    let panels = ReferencePanels::new(dark.clone(), white.clone(), 1.0).unwrap();
    let w = calibrate_reflectance(&dn_frame(white.repeat(3), l), &panels).unwrap();
    let d = calibrate_reflectance(&dn_frame(dark.repeat(3), l), &panels).unwrap();
    assert!(w.values().iter().all(|&v| v == 1.0));
    assert!(d.values().iter().all(|&v| v == 0.0));
    assert_eq!(w.quantity, Quantity::Reflectance);
}

#[test]
fn dead_bands_are_flagged() {
    let panels = ReferencePanels::new(vec![10.0, 20.0, 5.0], vec![100.0, 20.0, 90.0], 1.0).unwrap();
    let out = calibrate_reflectance(&dn_frame(vec![50.0, 60.0, 40.0], 3), &panels).unwrap();
    assert_eq!(out.values()[1], 0.0);
    assert_eq!(out.metadata.extra["dead_bands"], "{1}");
    let all_dead = ReferencePanels::new(vec![1.0], vec![1.0], 1.0).unwrap();
    assert!(matches!(
        calibrate_reflectance(&dn_frame(vec![3.0], 1), &all_dead),
        Err(HsiError::AllBandsDead)
    ));
}

#[test]
fn resampling_reproduces_linear_spectra() {
    let src = SpectralAxis::linspace(400.0, 1000.0, 31).unwrap();
    let values: Vec<f64> = src
        .wavelengths()
        .iter()
        .flat_map(|w| [0.001 * w, 2.0 - 0.0005 * w])
        .collect();
    let mut cube = HyperCube::from_values(1, 2, 31, {
        // two pixels, band-interleaved
        let mut v = vec![0.0; 62];
        for b in 0..31 {
            v[b] = values[2 * b];
            v[31 + b] = values[2 * b + 1];
        }
        v
    })
    .unwrap();
    cube.set_axis(src).unwrap();
    let target = SpectralAxis::new(vec![400.0, 433.3, 777.7, 1000.0]).unwrap();
    let out = resample_wavelengths(&cube, &target).unwrap();
    for (i, &t) in target.wavelengths().iter().enumerate() {
        assert!((out.get(0, 0, i) - 0.001 * t).abs() < 1e-12);
        assert!((out.get(0, 1, i) - (2.0 - 0.0005 * t)).abs() < 1e-12);
    }
    let outside = SpectralAxis::new(vec![1200.0]).unwrap();
    assert!(matches!(
        resample_wavelengths(&cube, &outside),
        Err(HsiError::ExtrapolationRequested(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn calibration_is_monotone_and_clipped(seed in any::<u64>(), rho in 0.2f64..=1.0) {
        let mut r = rng(seed);
        let l = 8;
        let dark: Vec<f64> = (0..l).map(|_| r.random_range(0.0..200.0)).collect();
        let white: Vec<f64> = dark.iter().map(|d| d + r.random_range(10.0..3000.0)).collect();
        let panels = ReferencePanels::new(dark, white, rho).unwrap();
        let frame: Vec<f64> = (0..4 * l).map(|_| r.random_range(-100.0..4000.0)).collect();
        let brighter: Vec<f64> = frame.iter().map(|v| v + r.random_range(0.0..300.0)).collect();
        let a = calibrate_reflectance(&dn_frame(frame, l), &panels).unwrap();
        let b = calibrate_reflectance(&dn_frame(brighter, l), &panels).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(x <= y);
            prop_assert!((0.0..=REFLECTANCE_CEILING).contains(x));
        }
        prop_assert!(a.check_reflectance_range().is_ok());
    }
}
