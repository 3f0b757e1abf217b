//! Compares the case runner with parallel scheduling on and off over a
//! fixed catalog subset, plus the cost of a single chart build.

use criterion::{criterion_group, criterion_main, Criterion};

use fermi_coords::chart::SignatureType;
use fermi_coords::config::RunConfig;
use fermi_coords::fermi::{FermiChart, GeodesicSolverConfig};
use fermi_coords::frame::adapted_frame;
use fermi_coords::runner::run_cases;

fn subset_config(parallel: bool) -> RunConfig {
    let mut cfg = RunConfig::default_catalog();
    cfg.cases.retain(|c| {
        matches!(
            c.name.as_str(),
            "flat-affine" | "circle-in-plane" | "sphere2-in-r3" | "saddle-in-r3" | "greatcircle-in-s3"
        )
    });
    cfg.parallel = parallel;
    cfg
}

fn bench_runner(c: &mut Criterion) {
    let mut group = c.benchmark_group("runner");
    group.sample_size(10);
    let seq = subset_config(false);
    group.bench_function("sequential", |b| {
        b.iter(|| run_cases(&seq).unwrap());
    });
    let par = subset_config(true);
    group.bench_function("parallel", |b| {
        b.iter(|| run_cases(&par).unwrap());
    });
    group.finish();
}

fn bench_chart_build(c: &mut Criterion) {
    let case = fermi_coords::catalog::resolve("sphere2-in-r3", None, None, None).unwrap();
    let (metric, sub) = case.build().unwrap();
    let sig = SignatureType::new((2, 0), (1, 0));
    let frame = adapted_frame(&metric, &sub, &sig).unwrap();
    let solver = GeodesicSolverConfig::default();
    c.bench_function("sphere_chart_order5", |b| {
        b.iter(|| FermiChart::build(&metric, &sub, &frame, &solver, 5, 0.5).unwrap());
    });
}

criterion_group!(benches, bench_runner, bench_chart_build);
criterion_main!(benches);
