use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hsi_bench::scene;
use hsi_core::dimred::pca_fit;
use hsi_core::envi::{read_envi, write_envi};
use hsi_core::ops::Kernel2d;
use hsi_core::restore::{degrade, restore, DegradationOperator, DegradationSpec};
use hsi_core::solver::RestoreConfig;
use hsi_core::unmix::{fcls, ConstraintMode};
use hsi_core::Interleave;

fn fcls_bench(c: &mut Criterion) {
    let s = scene(64, 64, 50, 4);
    let x = s.cube.to_matrix();
    let e = s.truth.endmembers.spectra.clone();
    c.bench_function("fcls 64x64x50 p4", |b| {
        b.iter(|| fcls(black_box(&e), black_box(&x), ConstraintMode::Full))
    });
}

fn pca_bench(c: &mut Criterion) {
    let x = scene(64, 64, 100, 3).cube.to_matrix();
    c.bench_function("pca 4096x100 k5", |b| b.iter(|| pca_fit(black_box(&x), 5)));
}

fn restore_bench(c: &mut Criterion) {
    let clean = scene(32, 32, 10, 3).cube;
    let spec = DegradationSpec {
        operator: DegradationOperator::Blur(Kernel2d::gaussian(5, 1.0).expect("odd kernel")),
        noise_sigma: 0.01,
        seed: 0,
    };
    let observed = degrade(&clean, &spec).expect("degrade");
    let cfg = RestoreConfig {
        max_iters: 200,
        ..RestoreConfig::default()
    };
    c.bench_function("restore blur 32x32x10 200 iters", |b| {
        b.iter(|| restore(black_box(&observed), &spec, &cfg))
    });
}

fn envi_bench(c: &mut Criterion) {
    let cube = scene(128, 128, 50, 3).cube;
    let dir = std::env::temp_dir().join(format!("hsi-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let stem = dir.join("cube");
    let mut group = c.benchmark_group("envi 128x128x50");
    for il in Interleave::ALL {
        let paths = write_envi(&cube, &stem, il).expect("write");
        group.bench_function(format!("write {}", il.as_str()), |b| {
            b.iter(|| write_envi(black_box(&cube), &stem, il))
        });
        group.bench_function(format!("read {}", il.as_str()), |b| {
            b.iter(|| read_envi(black_box(&paths.header)))
        });
    }
    group.finish();
    let _ = std::fs::remove_dir_all(&dir);
}

criterion_group!(benches, fcls_bench, pca_bench, restore_bench, envi_bench);
criterion_main!(benches);
