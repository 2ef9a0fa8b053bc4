use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ffg_core::ffg::{perfect_sample, Budget};
use ffg_core::models::WidomRowlinson;
use ffg_core::parallel::{run_replicas, ExecMode};
use ffg_core::{RngStreams, Window};

fn replicas(c: &mut Criterion) {
    let m = WidomRowlinson::continuum(2, 0.05, 0.05, 1.0);
    let w = Window::continuum_box(&[0.0, 0.0], &[6.0, 6.0]);
    let s = RngStreams::new(1, 0);
    let mut g = c.benchmark_group("perfect_sample_replicas");
    g.sample_size(20);
    for (name, mode) in [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)] {
        g.bench_with_input(BenchmarkId::new(name, 2000), &mode, |b, &mode| {
            b.iter(|| {
                run_replicas(2000, mode, |r| perfect_sample(&m, &w, None, &Budget::default(), &s.replica(r)).unwrap())
            })
        });
    }
    g.finish();
}

criterion_group!(benches, replicas);
criterion_main!(benches);
