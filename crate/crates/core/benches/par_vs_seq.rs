use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use surfdyn::domination::{certify_cones, CertifyOptions};
use surfdyn::forge::c1_distance;
use surfdyn::linalg::Rect;
use surfdyn::maps::{CatMap, Henon};
use surfdyn::periodic::{scan_periodic, ScanOptions};
use surfdyn::{Exec, SurfaceMap};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn cones(c: &mut Criterion) {
    let cat = CatMap::linear();
    let mut group = c.benchmark_group("certify_cones_cat_128");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut opts = CertifyOptions::new(Rect::unit(), (128, 128));
        opts.exec = exec;
        group.bench_function(name, |b| b.iter(|| black_box(certify_cones(&cat, &opts).unwrap())));
    }
    group.finish();
}

fn periodic(c: &mut Criterion) {
    let cat = CatMap::new(0.02).unwrap();
    let mut group = c.benchmark_group("scan_periodic_perturbed_cat");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut opts = ScanOptions::new(Rect::unit(), 3);
        opts.grid = (24, 24);
        opts.exec = exec;
        group.bench_function(name, |b| b.iter(|| black_box(scan_periodic(&cat, &opts))));
    }
    group.finish();
}

fn c1(c: &mut Criterion) {
    let h: Arc<dyn SurfaceMap> = Arc::new(Henon::new(1.4, 0.3).unwrap());
    let s: Arc<dyn SurfaceMap> = Arc::new(Henon::new(1.39, 0.3).unwrap());
    let region = Rect::new(-1.0, 1.0, -0.4, 0.4).unwrap();
    let mut group = c.benchmark_group("c1_distance_256");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(c1_distance(h.as_ref(), s.as_ref(), region, 256, exec)))
        });
    }
    group.finish();
}

criterion_group!(benches, cones, periodic, c1);
criterion_main!(benches);
