mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use prioq::{
    active_period_moments, build_iid_stream, stationary_split, stream_moments,
    total_unfinished_mean, validate_system, ArrivalStreamSpec, Pmf, PriorityModel,
};

use common::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Stationary vector of the full chain by a direct solve of `pi P = pi`, `pi e = 1`.
fn direct_stationary(stream: &ArrivalStreamSpec) -> Vec<f64> {
    let full = stream.full_matrix();
    let n = full.len();
    let p = DMatrix::from_fn(n, n, |i, j| full[i][j]);
    let mut a = (p.transpose() - DMatrix::identity(n, n)).clone_owned();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

/// Active-period moments by a forward recursion over slots of the active
/// period, tracking the law of the state and the first two moments of the
/// running arrival count; no matrix inverse involved.
struct Forward {
    ec: f64,
    elam: f64,
    eclam: f64,
    etc: f64,
    elam_tc: f64,
    etlam: f64,
}

fn forward_moments(stream: &ArrivalStreamSpec) -> Forward {
    let m = stream.active_states();
    let exit = stream.exit_probs();
    let b1 = |e: &prioq::TransitionEntry| e.batch.mean();
    let b2 = |e: &prioq::TransitionEntry| e.batch.factorial_moment(2).unwrap();

    // expected future arrivals from each state, by value iteration
    let mut future = vec![0.0; m];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let e = &stream.transitions[i][j];
                        e.prob * (b1(e) + future[j])
                    })
                    .sum()
            })
            .collect();
        let delta = next
            .iter()
            .zip(&future)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        future = next;
        if delta < 1e-15 {
            break;
        }
    }

    let mut u: Vec<f64> = stream.alpha.iter().map(|e| e.prob).collect();
    let mut w: Vec<f64> = stream.alpha.iter().map(|e| e.prob * b1(e)).collect();
    let mut w2: Vec<f64> = stream
        .alpha
        .iter()
        .map(|e| e.prob * (b2(e) + b1(e)))
        .collect();
    let (mut ec, mut ecc, mut elam, mut elam2, mut eclam, mut after) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut n = 1.0;
    loop {
        for i in 0..m {
            ec += n * exit[i] * u[i];
            ecc += n * (n - 1.0) * exit[i] * u[i];
            elam += exit[i] * w[i];
            elam2 += exit[i] * (w2[i] - w[i]);
            eclam += n * exit[i] * w[i];
            after += u[i] * future[i];
        }
        let mass: f64 = u.iter().sum();
        if mass < 1e-18 {
            break;
        }
        let (mut u2, mut wn, mut w2n) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            for j in 0..m {
                let e = &stream.transitions[i][j];
                let (t, a1, a2) = (e.prob, b1(e), b2(e));
                u2[j] += t * u[i];
                wn[j] += t * (w[i] + u[i] * a1);
                w2n[j] += t * (w2[i] + 2.0 * w[i] * a1 + u[i] * (a2 + a1));
            }
        }
        u = u2;
        w = wn;
        w2 = w2n;
        n += 1.0;
    }
    Forward {
        ec,
        elam,
        eclam,
        etc: ecc / (2.0 * ec),
        elam_tc: after / ec,
        etlam: elam2 / (2.0 * elam),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn active_period_moments_match_forward_recursion(seed in any::<u64>(), m in 1usize..=3) {
        let stream = random_stream(&mut rng(seed), m);
        let a = active_period_moments(&stream).unwrap();
        let f = forward_moments(&stream);
        prop_assert!(rel_close(a.mean_len, f.ec, 1e-9), "{} {}", a.mean_len, f.ec);
        prop_assert!(rel_close(a.mean_arrivals, f.elam, 1e-9));
        prop_assert!(rel_close(a.mean_len_arrivals, f.eclam, 1e-9));
        prop_assert!(rel_close(a.eq_len_mean, f.etc, 1e-9));
        prop_assert!(rel_close(a.residual_arrivals_mean, f.elam_tc, 1e-9));
        prop_assert!(rel_close(a.eq_arrivals_mean, f.etlam, 1e-9));
    }

    #[test]
    fn stationary_split_matches_direct_solve(seed in any::<u64>(), m in 1usize..=3) {
        let stream = random_stream(&mut rng(seed), m);
        let (pi0, pi1) = stationary_split(&stream).unwrap();
        let direct = direct_stationary(&stream);
        prop_assert!((pi0 - direct[0]).abs() < 1e-10);
        for (a, b) in pi1.iter().zip(&direct[1..]) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!((pi0 + pi1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stream_moment_invariants(seed in any::<u64>(), m in 1usize..=3) {
        let sys = random_system_with(&mut rng(seed), 1);
        let c = &sys.classes[0];
        let _ = m;
        let s = stream_moments(&c.stream, &c.service).unwrap();
        let a = &s.active;
        prop_assert!((s.pi_on - s.pi1.iter().sum::<f64>()).abs() < 1e-15);
        prop_assert!((s.lambda - s.pi_on * a.mean_arrivals / a.mean_len).abs() < 1e-10);
        prop_assert!((s.rho - s.lambda * s.mean_h).abs() < 1e-15);
        prop_assert!(a.mean_len >= 1.0 - 1e-12 && a.mean_arrivals >= 1.0 - 1e-12);
        prop_assert!(a.eq_len_mean >= -1e-12 && a.eq_arrivals_mean >= -1e-12);

        // lambda = pi A1 e with A1 assembled entrywise from the full chain
        let direct = direct_stationary(&c.stream);
        let full = c.stream.full_matrix();
        let mut rate = 0.0;
        for (i, row) in full.iter().enumerate() {
            for (j, p) in row.iter().enumerate().skip(1) {
                rate += direct[i] * p * c.stream.batch(i, j).unwrap().mean();
            }
        }
        prop_assert!((rate - s.lambda).abs() < 1e-10);
    }

    #[test]
    fn valid_streams_are_stochastic_and_irreducible(seed in any::<u64>()) {
        let sys = random_system(seed);
        let report = validate_system(&sys);
        prop_assert!(report.is_valid(), "{}", report);
        for c in &sys.classes {
            for row in c.stream.full_matrix() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn system_identities(seed in any::<u64>()) {
        let sys = random_system(seed);
        let model = PriorityModel::new(&sys).unwrap();
        let r = model.report().unwrap();
        let m = model.system_moments().unwrap();

        // total load two ways
        let rho_a: f64 = m.per_class.iter().map(|c| c.lambda * c.mean_h).sum();
        prop_assert!((rho_a - r.rho).abs() < 1e-12);

        let residual: f64 = r.classes.iter().map(|c| c.rho * c.eq_mean_h).sum();
        prop_assert!(rel_close(r.conservation_rhs + r.rho + residual, r.eu, 1e-12));
        let weighted: f64 = r.classes.iter().map(|c| c.rho * c.w_np).sum();
        prop_assert!(rel_close(weighted, r.conservation_rhs, 1e-10));
        prop_assert!(rel_close(r.classes.iter().map(|c| c.u_pr).sum(), r.eu, 1e-10));
        prop_assert!(rel_close(r.classes.iter().map(|c| c.u_np).sum(), r.eu, 1e-10));
        prop_assert!((r.f1 - 1.0 / (1.0 - r.rho)).abs() < 1e-12 * r.f1);
        prop_assert!(r.f1 >= 1.0);
        prop_assert!(m.rho_plus.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(m.rho_plus[0], 0.0);

        let k_max = r.classes.len();
        for k in 1..=k_max {
            let c = &r.classes[k - 1];
            prop_assert!(rel_close(c.u_pr, model.u_pr_via_wait(k).unwrap(), 1e-10));
            prop_assert!(rel_close(c.u_np, model.u_np_via_wait(k).unwrap(), 1e-10));
            prop_assert!(c.w_np >= c.w_pr - 1e-10);
            for v in [c.w_pr, c.w_np, c.d_pr, c.u_pr, c.u_np, c.h_pr_mean, c.r_pr_mean] {
                prop_assert!(v >= -1e-10, "negative field {}", v);
            }
        }
        prop_assert!((r.classes[k_max - 1].w_np - r.classes[k_max - 1].w_pr).abs() < 1e-12);
    }

    #[test]
    fn pr_classes_ignore_lower_classes(seed in any::<u64>()) {
        let sys = random_system_with(&mut rng(seed), 3);
        let full = PriorityModel::new(&sys).unwrap();
        for k in 1..=2 {
            let top = PriorityModel::new(&sys.truncated(k)).unwrap();
            for j in 1..=k {
                prop_assert!((full.w_pr_mean(j).unwrap() - top.w_pr_mean(j).unwrap()).abs() < 1e-12);
                prop_assert!((full.u_pr_mean(j).unwrap() - top.u_pr_mean(j).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn iid_active_period_identities(seed in any::<u64>()) {
        let sys = random_iid(seed);
        for c in &sys.classes {
            let a0 = c.stream.idle_self_prob;
            let s = stream_moments(&c.stream, &c.service).unwrap();
            let a = &s.active;
            let lam = s.lambda;
            // arrival law of one slot
            let mut pairs = vec![(0, a0)];
            pairs.extend(c.stream.alpha[0].batch.iter().map(|(v, p)| (v, (1.0 - a0) * p)));
            let law = Pmf::from_pairs(&pairs).unwrap();
            prop_assert!((lam - law.mean()).abs() < 1e-12);
            prop_assert!((a.eq_len_mean - (1.0 - a0) / a0).abs() < 1e-10);
            prop_assert!((a.residual_arrivals_mean - lam / a0).abs() < 1e-10);
            let ratio = a.mean_len_arrivals / a.mean_len;
            prop_assert!((ratio - lam * (2.0 - a0) / (a0 * (1.0 - a0))).abs() < 1e-10);
            let eq_a = law.equilibrium_mean().unwrap();
            prop_assert!((a.eq_arrivals_mean - (eq_a + lam / a0)).abs() < 1e-10);
        }
    }

    #[test]
    fn iid_stream_round_trips_its_law(weights in proptest::collection::vec(0.05f64..1.0, 2..6)) {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let input = Pmf::new((0..probs.len() as u64).collect(), probs).unwrap();
        let stream = build_iid_stream(&input).unwrap();
        let pi = direct_stationary(&stream);
        let full = stream.full_matrix();
        // one-step marginal of the arrival count
        let mut mass = vec![0.0; input.max_value() as usize + 1];
        for (i, row) in full.iter().enumerate() {
            mass[0] += pi[i] * row[0];
            for (j, p) in row.iter().enumerate().skip(1) {
                for (v, q) in stream.batch(i, j).unwrap().iter() {
                    mass[v as usize] += pi[i] * p * q;
                }
            }
        }
        let marginal = Pmf::new((0..mass.len() as u64).collect(), mass.clone())
            .unwrap_or_else(|_| panic!("{mass:?}"));
        prop_assert!(marginal.total_variation(&input) < 1e-12);
    }
}

#[test]
fn bursty_stream_examples() {
    let stream = prioq::build_on_off_stream(0.5, 0.5, &Pmf::point(1)).unwrap();
    let f = forward_moments(&stream);
    assert!((f.ec - 2.0).abs() < 1e-12);
    assert!((f.eclam - 6.0).abs() < 1e-12);
    assert!((f.etlam - 1.0).abs() < 1e-12);
    let sys = prioq::SystemSpec::from_pairs(vec![(
        stream,
        prioq::ServiceSpec::deterministic(1).unwrap(),
    )]);
    assert!((total_unfinished_mean(&sys).unwrap() - 0.5).abs() < 1e-14);
}
