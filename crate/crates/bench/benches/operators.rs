//! Criterion benches over the toolkit's hot paths: stencil operators,
//! composition residuals, compatibility checks, potential
//! reconstruction, and Betti-number computation.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use tcx_bench::{annulus, box3, probe, shell, vortex};
use tcx_core::calculus::{self, OperatorId};
use tcx_core::cohomology;
use tcx_core::compat::{self, CheckKind, CheckOptions};
use tcx_core::fields::Valence;
use tcx_core::potentials::{self, GradKind};

fn bench_operators(c: &mut Criterion) {
    let d = box3(33);
    let v = probe(&d, Valence::Vector, 11);
    let t = probe(&d, Valence::Tensor20, 12);
    let mut g = c.benchmark_group("apply-33cubed");
    g.bench_function("gradT", |b| {
        b.iter(|| calculus::apply(OperatorId::GradT, black_box(&v), None).unwrap())
    });
    g.bench_function("curlT", |b| {
        b.iter(|| calculus::apply(OperatorId::CurlT, black_box(&t), None).unwrap())
    });
    g.bench_function("divT", |b| {
        b.iter(|| calculus::apply(OperatorId::DivT, black_box(&t), None).unwrap())
    });
    g.finish();
}

fn bench_composition(c: &mut Criterion) {
    let d = box3(33);
    let v = probe(&d, Valence::Vector, 21);
    c.bench_function("composition-gcd-33cubed", |b| {
        b.iter(|| {
            calculus::composition_residual(
                OperatorId::GradT,
                OperatorId::CurlT,
                black_box(&v),
                None,
            )
            .unwrap()
        })
    });
}

fn bench_compat(c: &mut Criterion) {
    let d = annulus(65);
    let field = vortex(&d);
    let opts = CheckOptions::default();
    let mut g = c.benchmark_group("compat");
    g.sample_size(20);
    g.bench_function("vortex-grad2d-65sq", |b| {
        b.iter(|| compat::check(CheckKind::GradRows2, black_box(&field), None, &opts).unwrap())
    });
    g.finish();
}

fn bench_potentials(c: &mut Criterion) {
    let mut g = c.benchmark_group("potential");
    g.sample_size(10);

    let d2 = annulus(65);
    let y = probe(&d2, Valence::Vector, 31);
    let rows = calculus::apply(OperatorId::GradT, &y, None).unwrap();
    let opts = CheckOptions::default();
    g.bench_function("tree-grad-65sq", |b| {
        b.iter(|| {
            potentials::reconstruct_grad(GradKind::Rows, black_box(&rows), &[16, 32], &opts)
                .unwrap()
        })
    });

    let d3 = box3(17);
    let w = probe(&d3, Valence::Tensor20, 32);
    let t = calculus::apply(OperatorId::CurlT, &w, None).unwrap();
    g.bench_function("homotopy-curlT-17cubed", |b| {
        b.iter(|| {
            potentials::reconstruct_curlT(black_box(&t), Some(&[0.0, 0.0, 0.0]), 16, &opts)
                .unwrap()
        })
    });
    g.finish();
}

fn bench_cohomology(c: &mut Criterion) {
    let d = shell(17);
    let mut g = c.benchmark_group("cohomology");
    g.sample_size(10);
    g.bench_function("betti-shell-17cubed", |b| {
        b.iter(|| cohomology::betti(black_box(&d)).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    bench_operators,
    bench_composition,
    bench_compat,
    bench_potentials,
    bench_cohomology
);
criterion_main!(benches);
