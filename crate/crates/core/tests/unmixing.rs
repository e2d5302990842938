use hsi_core::dimred::pca_fit;
use hsi_core::synth::{generate_scene, NoiseProfile, SceneSpec};
use hsi_core::unmix::{
    fcls, fcls_with_report, library_match, match_endmembers, nfindr, nmf_unmix, ppi,
    project_to_simplex, sad, simplex_volume, ucls, vca, ConstraintMode, EndmemberSet, LibraryEntry,
    MatchMetric, NmfConfig, NmfInit, SpectralLibrary, ANC_TOL, ASC_TOL,
};
use hsi_core::{HsiError, SpectralAxis};
use hsi_testkit::{least_squares, rng, simplex_grid_search3, spectral_angle, uniform_matrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn pixels_around(e: &DMatrix<f64>, n: usize, seed: u64) -> DMatrix<f64> {
    // abundances in [-0.3, 1.3] so many pixels fall outside the simplex
    let mut r = rng(seed);
    let mut x = DMatrix::zeros(e.nrows(), n);
    for j in 0..n {
        let a = DVector::from_fn(e.ncols(), |_, _| r.random_range(-0.3..1.3));
        let noise = DVector::from_fn(e.nrows(), |_, _| r.random_range(-0.02..0.02));
        x.set_column(j, &(e * a + noise));
    }
    x
}

#[test]
fn fcls_matches_simplex_grid_search() {
    let e = uniform_matrix(10, 3, 0.05, 1.0, 1);
    let x = pixels_around(&e, 200, 2);
    let a = fcls(&e, &x, ConstraintMode::Full).unwrap();
    assert!(a.satisfies_full());
    let mut sq = 0.0;
    for j in 0..200 {
        let g = simplex_grid_search3(&e, &x.column(j).into_owned());
        for (k, gk) in g.iter().enumerate() {
            let c = a.coefficients[(k, j)];
            assert!(c >= -ANC_TOL);
            sq += (c - gk).powi(2);
        }
        assert!((a.coefficients.column(j).sum() - 1.0).abs() <= ASC_TOL);
    }
    let rmse = (sq / 600.0).sqrt();
    assert!(rmse < 1e-3, "rmse {rmse:e}");
}

#[test]
fn ucls_solves_normal_equations() {
    let e = uniform_matrix(12, 4, 0.0, 1.0, 3);
    let x = pixels_around(&e, 30, 4);
    let a = ucls(&e, &x).unwrap();
    for j in 0..30 {
        let oracle = least_squares(&e, &x.column(j).into_owned());
        assert!((a.coefficients.column(j) - oracle).amax() < 1e-9);
    }
}

#[test]
fn constraints_never_fit_better_than_ucls() {
    let e = uniform_matrix(8, 3, 0.1, 1.0, 5);
    let x = pixels_around(&e, 50, 6);
    let free = ucls(&e, &x).unwrap().coefficients;
    let sto = fcls(&e, &x, ConstraintMode::SumToOne).unwrap().coefficients;
    let full = fcls(&e, &x, ConstraintMode::Full).unwrap().coefficients;
    for j in 0..50 {
        let r = |a: &DMatrix<f64>| (&e * a.column(j) - x.column(j)).norm();
        assert!(r(&free) <= r(&sto) + 1e-12);
        assert!(r(&sto) <= r(&full) + 1e-12);
        assert!((sto.column(j).sum() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn interior_points_agree_across_modes() {
    let e = uniform_matrix(9, 3, 0.1, 1.0, 7);
    let mut r = rng(8);
    let mut x = DMatrix::zeros(9, 20);
    for j in 0..20 {
        let raw: Vec<f64> = (0..3).map(|_| r.random_range(0.2..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let a = DVector::from_iterator(3, raw.iter().map(|v| v / s));
        x.set_column(j, &(&e * a));
    }
    let u = ucls(&e, &x).unwrap().coefficients;
    let f = fcls(&e, &x, ConstraintMode::Full).unwrap().coefficients;
    assert!((u - f).amax() < 1e-9);
}

#[test]
fn ill_conditioned_endmembers_rejected() {
    let mut e = uniform_matrix(6, 3, 0.1, 1.0, 9);
    let c0 = e.column(0).into_owned();
    e.set_column(2, &c0);
    let x = pixels_around(&e, 3, 1);
    assert!(matches!(ucls(&e, &x), Err(HsiError::IllConditioned(_))));
}

#[test]
fn fcls_reports_no_stalls_on_ordinary_data() {
    let e = uniform_matrix(15, 5, 0.0, 1.0, 10);
    let x = pixels_around(&e, 100, 11);
    let (a, report) = fcls_with_report(&e, &x, ConstraintMode::Full).unwrap();
    assert!(report.stalled.is_empty());
    assert!(a.satisfies_full());
}

fn scene(p: usize, seed: u64, snr: Option<f64>, pure: bool) -> hsi_core::synth::Scene {
    generate_scene(&SceneSpec {
        height: 32,
        width: 32,
        bands: 30,
        p,
        seed,
        pure_pixels: pure,
        max_abundance: if pure { 1.0 } else { 0.8 },
        snr_db: snr,
        class_regions: 8,
        noise_profile: NoiseProfile::White,
    })
    .unwrap()
}

#[test]
fn vca_and_nfindr_find_pure_pixels() {
    let s = scene(4, 3, None, true);
    let x = s.cube.to_matrix();
    let truth = &s.truth.endmembers.spectra;
    let v = vca(&x, 4, 1).unwrap();
    assert!(
        match_endmembers(truth, &v.endmembers.spectra)
            .unwrap()
            .max_sad()
            < 1e-6
    );
    let n = nfindr(&x, 4, 1, None).unwrap();
    assert!(
        match_endmembers(truth, &n.endmembers.spectra)
            .unwrap()
            .max_sad()
            < 1e-6
    );
    assert!(n.volume_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn nfindr_volume_beats_random_pixel_sets() {
    let s = scene(3, 4, Some(30.0), true);
    let x = s.cube.to_matrix();
    let n = nfindr(&x, 3, 2, None).unwrap();
    let z = pca_fit(&x, 2).unwrap().project(&x).unwrap();
    let vertices = |cols: &[usize]| DMatrix::from_fn(2, 3, |i, k| z[(i, cols[k])]);
    let best = simplex_volume(&vertices(n.endmembers.pixels.as_ref().unwrap()));
    assert!((best - n.volume_trace.last().unwrap()).abs() < 1e-9 * best);
    let mut r = rng(99);
    for _ in 0..200 {
        let cols: Vec<usize> = (0..3).map(|_| r.random_range(0..x.ncols())).collect();
        assert!(simplex_volume(&vertices(&cols)) <= best * (1.0 + 1e-12));
    }
}

#[test]
fn ppi_skips_interior_points() {
    // corners of a triangle plus strictly interior mixtures
    let e = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let mut x = DMatrix::zeros(3, 33);
    x.columns_mut(0, 3).copy_from(&e);
    let mut r = rng(12);
    for j in 3..33 {
        let raw: Vec<f64> = (0..3).map(|_| r.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        for k in 0..3 {
            x[(k, j)] = raw[k] / s;
        }
    }
    let res = ppi(&x, 500, 3, 1).unwrap();
    assert!(res.counts[3..].iter().all(|&c| c == 0));
    let mut top = res.candidates.clone();
    top.sort_unstable();
    assert_eq!(top, vec![0, 1, 2]);
}

#[test]
fn nmf_objective_is_monotone() {
    for seed in 0..5u64 {
        let e = uniform_matrix(12, 3, 0.05, 1.0, seed);
        let x = pixels_around(&e, 80, seed + 100).map(|v| v.max(0.0));
        let cfg = NmfConfig {
            max_iters: 200,
            tol: 0.0,
            ..NmfConfig::default()
        };
        let res = nmf_unmix(&x, 3, &NmfInit::Random { seed }, &cfg).unwrap();
        assert_eq!(res.objective_trace.len(), 201);
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert!(res.endmembers.spectra.iter().all(|&v| v >= 0.0));
        assert!(res.abundances.coefficients.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn library_match_finds_resampled_entry() {
    let fine = SpectralAxis::linspace(400.0, 1000.0, 61).unwrap();
    let coarse = SpectralAxis::linspace(450.0, 950.0, 11).unwrap();
    let curve = |f: f64| {
        (0..61)
            .map(move |i| 0.3 + 0.2 * ((400.0 + 10.0 * i as f64) * f).sin())
            .collect::<Vec<_>>()
    };
    let lib = SpectralLibrary {
        entries: vec![
            LibraryEntry {
                name: "slow".into(),
                axis: fine.clone(),
                spectrum: curve(0.004),
            },
            LibraryEntry {
                name: "fast".into(),
                axis: fine.clone(),
                spectrum: curve(0.02),
            },
        ],
    };
    let target: Vec<f64> = coarse
        .wavelengths()
        .iter()
        .map(|w| 0.3 + 0.2 * (w * 0.02).sin())
        .collect();
    let e = EndmemberSet::new(DMatrix::from_column_slice(11, 1, &target)).unwrap();
    for metric in [MatchMetric::SpectralAngle, MatchMetric::Euclidean] {
        let m = library_match(&e, &coarse, &lib, metric).unwrap();
        assert_eq!(m[0].best, "fast");
        assert!(m[0].best_score < 1e-9);
    }
}

proptest! {
    #[test]
    fn sad_agrees_with_arccos_form(a in prop::collection::vec(0.01f64..1.0, 6), b in prop::collection::vec(0.01f64..1.0, 6), k in 0.1f64..10.0) {
        let s = sad(&a, &b).unwrap();
        prop_assert!((s - spectral_angle(&a, &b)).abs() < 1e-7);
        let scaled: Vec<f64> = b.iter().map(|v| v * k).collect();
        prop_assert!((sad(&a, &scaled).unwrap() - s).abs() < 1e-12);
    }

    #[test]
    fn simplex_projection_is_feasible_and_idempotent(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let p = project_to_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = project_to_simplex(&p);
        for (x, y) in p.iter().zip(&q) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
