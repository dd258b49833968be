// Grid evaluation of u_n through the library's data-parallel map against a
// plain loop over the same phases. Build with `--no-default-features` to see
// the library path fall back to its sequential map.

use std::hint::black_box;

use cocycle_lab::cocycle::{u_n, u_values, CocycleSpec};
use cocycle_lab::models::{schrodinger_cocycle, SchrodingerParams};
use cocycle_lab::reduction::random_low_rank_cocycle;
use cocycle_lab::torus::{phase_grid, Frequency};
use cocycle_lab::trig::TrigPoly;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn cases() -> Vec<(&'static str, CocycleSpec)> {
    vec![
        ("schrodinger", schrodinger_cocycle(SchrodingerParams::new(TrigPoly::cos1(1), 10.0, 0.5), Frequency::golden()).unwrap()),
        ("low_rank_4x4", random_low_rank_cocycle(4, 2, Frequency::golden(), 1).unwrap()),
    ]
}

fn grid_u_n(c: &mut Criterion) {
    let phases = phase_grid(1, 512);
    let n = 500;
    let mut group = c.benchmark_group("grid_u_n");
    group.sample_size(10);
    for (name, cocycle) in cases() {
        let label = if cocycle_lab::par::is_parallel() { "library_rayon" } else { "library_sequential" };
        group.bench_with_input(BenchmarkId::new(label, name), &cocycle, |b, c| {
            b.iter(|| black_box(u_values(c, &phases, n)))
        });
        group.bench_with_input(BenchmarkId::new("plain_loop", name), &cocycle, |b, c| {
            b.iter(|| black_box(phases.iter().map(|x| u_n(c, x, n).unwrap()).collect::<Vec<_>>()))
        });
    }
    group.finish();
}

criterion_group!(benches, grid_u_n);
criterion_main!(benches);
