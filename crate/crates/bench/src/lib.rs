//! Systems shared by the benchmarks.

use prioq::{build_iid_stream, build_on_off_stream, Pmf, ServiceSpec, SystemSpec};

/// Bernoulli(0.2) with unit service, then Bernoulli(0.25) with two-slot service.
pub fn two_class_iid() -> SystemSpec {
    SystemSpec::from_pairs(vec![
        (
            build_iid_stream(&Pmf::bernoulli(0.2).unwrap()).unwrap(),
            ServiceSpec::deterministic(1).unwrap(),
        ),
        (
            build_iid_stream(&Pmf::bernoulli(0.25).unwrap()).unwrap(),
            ServiceSpec::deterministic(2).unwrap(),
        ),
    ])
}

/// `classes` on-off streams with total load around 0.6.
pub fn bursty(classes: usize) -> SystemSpec {
    let share = 0.6 / classes as f64;
    SystemSpec::from_pairs(
        (0..classes)
            .map(|k| {
                let batch = Pmf::uniform(1, 1 + (k as u64 % 3)).unwrap();
                let service =
                    ServiceSpec::new(Pmf::uniform(1, 2 + (k as u64 % 3)).unwrap()).unwrap();
                // active periods of mean 4 slots; p sets the load
                let per_active = batch.mean() * service.mean();
                let pi_on = share / per_active;
                let idle_mean = 4.0 * (1.0 - pi_on) / pi_on;
                let p = 1.0 - 1.0 / idle_mean;
                (build_on_off_stream(p, 0.75, &batch).unwrap(), service)
            })
            .collect(),
    )
}
