use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use polyaniso::calibrate::{loss_and_gradient, GradScratch};
use polyaniso::diagnostics::ellipticity_scan;
use polyaniso::invariants::polyconvex_invariants;
use polyaniso::kinematics::bundle;
use polyaniso::pann::Scratch;
use polyaniso::{GroupId, Hyperelastic, PreferredFrame, Variant};
use polyaniso_bench::{cached_calibration, cubic_model, deformations};

fn invariants(c: &mut Criterion) {
    let fs = deformations(64, 1);
    let frame = PreferredFrame::standard();
    c.bench_function("polyconvex_invariants/cub x64", |b| {
        b.iter(|| {
            for f in &fs {
                let kb = bundle(f).unwrap();
                black_box(polyconvex_invariants(GroupId::Cub, &kb, &frame));
            }
        })
    });
}

fn stress(c: &mut Criterion) {
    let fs = deformations(64, 2);
    let mut group = c.benchmark_group("stress x64");
    for v in Variant::ALL {
        let m = cubic_model(v);
        let feats: Vec<_> = fs.iter().map(|f| m.features(f).unwrap()).collect();
        let mut sc = Scratch::default();
        group.bench_function(v.name(), |b| {
            b.iter(|| {
                for pf in &feats {
                    black_box(m.stress_from(pf, &mut sc));
                }
            })
        });
    }
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("loss_and_gradient batch 32");
    for v in Variant::ALL {
        let m = cubic_model(v);
        let data = cached_calibration(&m);
        let batch: Vec<usize> = (0..32).collect();
        let mut gs = GradScratch::default();
        let mut grad = vec![0.0; m.parameter_count()];
        group.bench_function(v.name(), |b| b.iter(|| black_box(loss_and_gradient(&m, &data, &batch, &mut gs, &mut grad))));
    }
    group.finish();
}

fn set_params(c: &mut Criterion) {
    let m = cubic_model(Variant::C);
    let flat = m.params().to_flat();
    c.bench_function("set_flat_params/C", |b| {
        b.iter_batched(|| m.clone(), |mut mm| mm.set_flat_params(black_box(&flat)).unwrap(), BatchSize::SmallInput)
    });
}

fn ellipticity(c: &mut Criterion) {
    let m = cubic_model(Variant::I);
    let fs = deformations(8, 3);
    c.bench_function("ellipticity_scan/I 8 points", |b| b.iter(|| black_box(ellipticity_scan(&m, &fs, 100, 1e-5).unwrap())));
    c.bench_function("tangent/I", |b| b.iter(|| black_box(m.tangent(&fs[0]).unwrap())));
}

criterion_group!(benches, invariants, stress, training_step, set_params, ellipticity);
criterion_main!(benches);
