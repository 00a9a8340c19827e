use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use std::hint::black_box;

use prioq::sim::{simulate, Discipline, SimConfig};
use prioq_bench::{bursty, two_class_iid};

const SLOTS: u64 = 100_000;

fn slots(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.throughput(Throughput::Elements(SLOTS));
    group.sample_size(20);
    for (name, sys) in [("iid-2", two_class_iid()), ("bursty-3", bursty(3))] {
        for d in Discipline::ALL {
            let cfg = SimConfig::new(d, SLOTS, 1, 7);
            group.bench_function(format!("{name}/{d}"), |b| {
                b.iter(|| simulate(black_box(&sys), &cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, slots);
criterion_main!(benches);
