//! Seeded generators of random valid systems.
#![allow(dead_code)]

use prioq::{
    build_iid_active_stream, build_iid_stream, build_on_off_stream, ArrivalStreamSpec, Pmf,
    PriorityModel, ServiceSpec, SystemSpec, TransitionEntry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random law on `lo..=hi`, every value with positive mass.
pub fn random_pmf(rng: &mut impl Rng, lo: u64, hi: u64) -> Pmf {
    let w: Vec<f64> = (lo..=hi).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    Pmf::new((lo..=hi).collect(), w.iter().map(|x| x / total).collect()).unwrap()
}

fn random_simplex(rng: &mut impl Rng, n: usize, mass: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| mass * x / total).collect()
}

/// General stream: `m` active states, every move positive, a distinct
/// batch law on every move.
pub fn random_stream(rng: &mut impl Rng, m: usize) -> ArrivalStreamSpec {
    let p = rng.random_range(0.75..0.99);
    let alpha = random_simplex(rng, m, 1.0)
        .into_iter()
        .map(|a| TransitionEntry::new(a, random_pmf(rng, 1, 3)))
        .collect();
    let transitions = (0..m)
        .map(|_| {
            let stay = rng.random_range(0.2..0.9);
            random_simplex(rng, m, stay)
                .into_iter()
                .map(|t| TransitionEntry::new(t, random_pmf(rng, 1, 3)))
                .collect()
        })
        .collect();
    ArrivalStreamSpec::new(p, alpha, transitions).unwrap()
}

fn load(sys: &SystemSpec) -> f64 {
    PriorityModel::new(sys)
        .unwrap()
        .system_moments()
        .map(|m| m.rho_total)
        .unwrap_or(f64::INFINITY)
}

/// Draws until the total load is below `max_rho`.
fn draw(
    rng: &mut ChaCha8Rng,
    max_rho: f64,
    mut make: impl FnMut(&mut ChaCha8Rng) -> SystemSpec,
) -> SystemSpec {
    loop {
        let sys = make(rng);
        if load(&sys) < max_rho {
            return sys;
        }
    }
}

/// K in {1,2,3}, M_k in {1,2,3}, services on {1..4}.
pub fn random_system(seed: u64) -> SystemSpec {
    let mut r = rng(seed);
    let k = r.random_range(1..=3);
    random_system_with(&mut r, k)
}

pub fn random_system_with(r: &mut ChaCha8Rng, k: usize) -> SystemSpec {
    draw(r, 0.95, |r| {
        SystemSpec::from_pairs(
            (0..k)
                .map(|_| {
                    let m = r.random_range(1..=3);
                    let hi = r.random_range(1..=4);
                    (
                        random_stream(r, m),
                        ServiceSpec::new(random_pmf(r, 1, hi)).unwrap(),
                    )
                })
                .collect(),
        )
    })
}

pub fn random_single(seed: u64) -> SystemSpec {
    random_system_with(&mut rng(seed), 1)
}

pub fn random_unit_service(seed: u64) -> SystemSpec {
    let mut r = rng(seed);
    let k = r.random_range(1..=3);
    draw(&mut r, 0.95, |r| {
        SystemSpec::from_pairs(
            (0..k)
                .map(|_| {
                    let m = r.random_range(1..=3);
                    (random_stream(r, m), ServiceSpec::deterministic(1).unwrap())
                })
                .collect(),
        )
    })
}

pub fn random_iid(seed: u64) -> SystemSpec {
    let mut r = rng(seed);
    let k = r.random_range(1..=3);
    draw(&mut r, 0.95, |r| {
        SystemSpec::from_pairs(
            (0..k)
                .map(|_| {
                    let positive = random_pmf(r, 1, 3);
                    let a0 = r.random_range(0.6..0.95);
                    let mut pairs = vec![(0, a0)];
                    pairs.extend(positive.iter().map(|(v, p)| (v, (1.0 - a0) * p)));
                    let hi = r.random_range(1..=4);
                    (
                        build_iid_stream(&Pmf::from_pairs(&pairs).unwrap()).unwrap(),
                        ServiceSpec::new(random_pmf(r, 1, hi)).unwrap(),
                    )
                })
                .collect(),
        )
    })
}

pub fn random_iid_active(seed: u64) -> SystemSpec {
    let mut r = rng(seed);
    let k = r.random_range(1..=3);
    draw(&mut r, 0.95, |r| {
        SystemSpec::from_pairs(
            (0..k)
                .map(|_| {
                    let m = r.random_range(1..=3);
                    let p = r.random_range(0.75..0.99);
                    let alpha = random_simplex(r, m, 1.0);
                    let t: Vec<Vec<f64>> = (0..m)
                        .map(|_| {
                            let stay = r.random_range(0.2..0.9);
                            random_simplex(r, m, stay)
                        })
                        .collect();
                    let batch = random_pmf(r, 1, 3);
                    let hi = r.random_range(1..=4);
                    (
                        build_iid_active_stream(p, &alpha, &t, &batch).unwrap(),
                        ServiceSpec::new(random_pmf(r, 1, hi)).unwrap(),
                    )
                })
                .collect(),
        )
    })
}

/// Geometric active periods, batches on {1,2,3}, services on {1..4}, total
/// load between 0.4 and 0.8.
pub fn random_bursty(seed: u64) -> SystemSpec {
    let mut r = rng(seed);
    let k = r.random_range(2..=3);
    loop {
        let target = r.random_range(0.4..0.8);
        let shares = random_simplex(&mut r, k, target);
        let sys = SystemSpec::from_pairs(
            shares
                .iter()
                .map(|&share| {
                    let stay: f64 = r.random_range(0.3..0.8);
                    let batch = random_pmf(&mut r, 1, 3);
                    let hi = r.random_range(1..=4);
                    let service = ServiceSpec::new(random_pmf(&mut r, 1, hi)).unwrap();
                    (on_off_with_load(share, stay, &batch, &service), service)
                })
                .collect(),
        );
        if sys
            .classes
            .iter()
            .all(|c| (0.0..1.0).contains(&c.stream.idle_self_prob))
        {
            return sys;
        }
    }
}

/// On-off stream with the given load; the idle probability absorbs the target.
pub fn on_off_with_load(
    rho: f64,
    stay: f64,
    batch: &Pmf,
    service: &ServiceSpec,
) -> ArrivalStreamSpec {
    let pi_on = rho / (batch.mean() * service.mean());
    let active = 1.0 / (1.0 - stay);
    let idle = active * (1.0 - pi_on) / pi_on;
    let p = 1.0 - 1.0 / idle;
    build_on_off_stream(p, stay, batch).unwrap()
}

/// The two-class fixture: Bernoulli(0.2) with unit service, Bernoulli(0.25)
/// with two-slot service.
pub fn fixture() -> SystemSpec {
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
