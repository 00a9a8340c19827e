use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use prioq::PriorityModel;
use prioq_bench::{bursty, two_class_iid};

fn report(c: &mut Criterion) {
    let iid = two_class_iid();
    c.bench_function("report/iid-2", |b| {
        b.iter(|| {
            PriorityModel::new(black_box(&iid))
                .unwrap()
                .report()
                .unwrap()
        })
    });
    for k in [3, 8] {
        let sys = bursty(k);
        c.bench_function(&format!("report/bursty-{k}"), |b| {
            b.iter(|| {
                PriorityModel::new(black_box(&sys))
                    .unwrap()
                    .report()
                    .unwrap()
            })
        });
    }
}

criterion_group!(benches, report);
criterion_main!(benches);
