//! Direct closed forms for three special shapes of the model, used as an
//! independent path to cross-check the general machinery:
//!
//! * unit service: every service time is one slot;
//! * i.i.d. arrivals: per-slot arrival counts are i.i.d.;
//! * i.i.d. arrivals during active periods: every move into an active state
//!   carries the same batch law.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analytic::{active_period_moments, class_moments, ensure_stable, stationary_split};
use crate::error::{Error, Result};
use crate::model::{ArrivalStreamSpec, SystemSpec};
use crate::pmf::{Pmf, MASS_TOLERANCE};
use crate::priority::{ClassReport, SystemReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialCase {
    UnitService,
    Iid,
    IidActive,
}

impl SpecialCase {
    pub const ALL: [SpecialCase; 3] = [
        SpecialCase::UnitService,
        SpecialCase::Iid,
        SpecialCase::IidActive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpecialCase::UnitService => "unit-service",
            SpecialCase::Iid => "iid",
            SpecialCase::IidActive => "iid-active",
        }
    }

    /// The first condition `system` violates for this shape, if any.
    pub fn mismatch(self, system: &SystemSpec) -> Option<String> {
        system
            .classes
            .iter()
            .enumerate()
            .find_map(|(i, c)| match self {
                SpecialCase::UnitService => (c.service.pmf != Pmf::point(1))
                    .then(|| format!("class {} service is not exactly one slot", i + 1)),
                SpecialCase::Iid => {
                    iid_mismatch(&c.stream).map(|r| format!("class {}: {r}", i + 1))
                }
                SpecialCase::IidActive => shared_batch(&c.stream)
                    .err()
                    .map(|r| format!("class {}: {r}", i + 1)),
            })
    }

    pub fn matches(self, system: &SystemSpec) -> bool {
        self.mismatch(system).is_none()
    }
}

impl fmt::Display for SpecialCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpecialCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpecialCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown special case {s:?}")))
    }
}

fn iid_mismatch(stream: &ArrivalStreamSpec) -> Option<String> {
    if stream.active_states() != 1 {
        return Some("more than one active state".into());
    }
    let (a, t) = (&stream.alpha[0], &stream.transitions[0][0]);
    if (a.prob - 1.0).abs() > MASS_TOLERANCE {
        return Some("entry law is not a point mass".into());
    }
    if (t.prob - (1.0 - stream.idle_self_prob)).abs() > MASS_TOLERANCE {
        return Some("active row differs from the idle row".into());
    }
    if a.batch != t.batch {
        return Some("batch laws differ between idle and active rows".into());
    }
    None
}

fn shared_batch(stream: &ArrivalStreamSpec) -> std::result::Result<&Pmf, String> {
    let mut laws = stream
        .active_entries()
        .filter(|(_, _, e)| e.prob > 0.0)
        .map(|(_, _, e)| &e.batch);
    let first = laws.next().ok_or("no active-targeting move")?;
    if laws.any(|b| b != first) {
        return Err("active-slot batch law depends on the transition".into());
    }
    Ok(first)
}

/// Scalars a special-case display needs for one class.
struct Inputs {
    lambda: f64,
    rho: f64,
    mean_h: f64,
    eq_mean_h: f64,
    pi_on: f64,
    eq_len: f64,
    /// Second derivative at one of the arrival eigenvalue.
    delta2: f64,
    /// Shape-specific extras.
    extra: Extra,
}

enum Extra {
    Unit {
        burst: f64,
        residual: f64,
    },
    /// `E[A~]`.
    Iid {
        eq_a: f64,
    },
    /// `E[A+]`, `E[A+~]`.
    Active {
        mean_plus: f64,
        eq_plus: f64,
    },
}

fn unit_inputs(system: &SystemSpec) -> Result<Vec<Inputs>> {
    Ok(class_moments(system)?
        .into_iter()
        .map(|c| Inputs {
            lambda: c.lambda,
            rho: c.rho,
            mean_h: 1.0,
            eq_mean_h: 0.0,
            pi_on: c.pi_on,
            eq_len: c.active.eq_len_mean,
            delta2: c.delta2,
            extra: Extra::Unit {
                burst: c.burst_term(),
                residual: c.active.residual_arrivals_mean,
            },
        })
        .collect())
}

fn iid_inputs(system: &SystemSpec) -> Result<Vec<Inputs>> {
    system
        .classes
        .iter()
        .map(|c| {
            let a0 = c.stream.idle_self_prob;
            let b = &c.stream.alpha[0].batch;
            // per-slot count law: 0 w.p. a0, else the batch law
            let mut pairs = vec![(0u64, a0)];
            pairs.extend(b.iter().map(|(v, p)| (v, (1.0 - a0) * p)));
            let a = Pmf::from_pairs(&pairs)?;
            let lambda = a.mean();
            let eq_a = a.equilibrium_mean()?;
            let mean_h = c.service.mean();
            Ok(Inputs {
                lambda,
                rho: lambda * mean_h,
                mean_h,
                eq_mean_h: c.service.equilibrium_mean(),
                pi_on: 1.0 - a0,
                eq_len: (1.0 - a0) / a0,
                // the idle-state slope vanishes and the curvature is 2 lambda E[A~]
                delta2: 2.0 * lambda * eq_a,
                extra: Extra::Iid { eq_a },
            })
        })
        .collect()
}

fn active_inputs(system: &SystemSpec) -> Result<Vec<Inputs>> {
    system
        .classes
        .iter()
        .map(|c| {
            let batch = shared_batch(&c.stream).map_err(|reason| Error::ShapeMismatch {
                case: "iid-active",
                reason,
            })?;
            let (_, pi1) = stationary_split(&c.stream)?;
            let pi_on: f64 = pi1.iter().sum();
            let eq_len = active_period_moments(&c.stream)?.eq_len_mean;
            let mean_plus = batch.mean();
            let eq_plus = batch.equilibrium_mean()?;
            let lambda = pi_on * mean_plus;
            let mean_h = c.service.mean();
            let eq_arrivals = eq_plus + mean_plus * eq_len;
            let ratio = 2.0 * mean_plus * eq_len + mean_plus;
            Ok(Inputs {
                lambda,
                rho: lambda * mean_h,
                mean_h,
                eq_mean_h: c.service.equilibrium_mean(),
                pi_on,
                eq_len,
                delta2: 2.0 * lambda * eq_arrivals - 2.0 * lambda * pi_on * ratio
                    + 2.0 * lambda * lambda * pi_on * (1.0 + eq_len),
                extra: Extra::Active { mean_plus, eq_plus },
            })
        })
        .collect()
}

fn conservation(case: SpecialCase, xs: &[Inputs]) -> f64 {
    let rho: f64 = xs.iter().map(|x| x.rho).sum();
    let gap = 1.0 - rho;
    let residual: f64 = xs.iter().map(|x| x.rho * x.eq_mean_h).sum();
    let cross: f64 = xs.iter().map(|x| x.rho * (rho - x.rho)).sum();
    match case {
        SpecialCase::UnitService => {
            cross / (2.0 * gap)
                + xs.iter()
                    .map(|x| match x.extra {
                        Extra::Unit { burst, residual } => {
                            x.rho * burst / gap
                                + x.pi_on * x.rho * (1.0 + x.rho / gap) * (1.0 + x.eq_len)
                                - x.pi_on * residual
                        }
                        _ => unreachable!(),
                    })
                    .sum::<f64>()
        }
        SpecialCase::Iid => {
            rho / gap * residual
                + cross / (2.0 * gap)
                + xs.iter()
                    .map(|x| match x.extra {
                        Extra::Iid { eq_a } => x.rho * x.mean_h * eq_a,
                        _ => unreachable!(),
                    })
                    .sum::<f64>()
                    / gap
        }
        SpecialCase::IidActive => {
            let (second, third) = xs.iter().fold((0.0, 0.0), |(s, t), x| match x.extra {
                Extra::Active { mean_plus, eq_plus } => (
                    s + x.rho * (2.0 * x.mean_h * (eq_plus - mean_plus) + 2.0 - rho + x.rho),
                    t + x.rho
                        * (x.mean_h * mean_plus - 1.0 + rho - x.rho)
                        * (1.0 - x.lambda / mean_plus)
                        * (1.0 + x.eq_len),
                ),
                _ => unreachable!(),
            });
            rho * residual / gap + second / (2.0 * gap) + third / gap
        }
    }
}

fn w_pr(case: SpecialCase, xs: &[Inputs], rho_plus: &[f64], k: usize) -> f64 {
    let hi = &xs[..k];
    let c = &xs[k - 1];
    let (before, upto) = (rho_plus[k - 1], rho_plus[k]);
    let d = (1.0 - upto) * (1.0 - before);
    let residual: f64 = hi.iter().map(|l| l.rho * l.eq_mean_h).sum();
    match (case, &c.extra) {
        (SpecialCase::UnitService, Extra::Unit { burst, residual }) => {
            let first: f64 = hi
                .iter()
                .map(|l| match l.extra {
                    Extra::Unit { burst, .. } => {
                        l.rho * (l.pi_on * l.rho * (1.0 + l.eq_len) + burst)
                    }
                    _ => unreachable!(),
                })
                .sum();
            let cross: f64 = hi.iter().map(|l| l.rho * (upto - l.rho)).sum();
            first / d
                + cross / (2.0 * d)
                + (before + burst) / (1.0 - before)
                + c.pi_on
                    * ((1.0 + c.rho / (1.0 - before)) * (1.0 + c.eq_len) - residual / c.lambda)
        }
        (SpecialCase::Iid, Extra::Iid { eq_a }) => {
            let second: f64 = hi
                .iter()
                .map(|l| match l.extra {
                    Extra::Iid { eq_a } => l.rho * (upto - l.rho + 2.0 * l.mean_h * eq_a),
                    _ => unreachable!(),
                })
                .sum();
            residual / d + second / (2.0 * d) + (before + c.mean_h * eq_a) / (1.0 - before)
        }
        (SpecialCase::IidActive, Extra::Active { mean_plus, eq_plus }) => {
            let (second, third) = hi.iter().fold((0.0, 0.0), |(s, t), l| match l.extra {
                Extra::Active { mean_plus, eq_plus } => (
                    s + l.rho * (2.0 * l.mean_h * (eq_plus - mean_plus) + upto + l.rho),
                    t + l.rho
                        * (l.mean_h * mean_plus - l.rho)
                        * (1.0 - l.lambda / mean_plus)
                        * (1.0 + l.eq_len),
                ),
                _ => unreachable!(),
            });
            residual / d
                + second / (2.0 * d)
                + third / d
                + (c.mean_h * (eq_plus - mean_plus) + 1.0 + c.rho) / (1.0 - before)
                + (c.mean_h * mean_plus - 1.0 + before - c.rho)
                    * (1.0 - c.lambda / mean_plus)
                    * (1.0 + c.eq_len)
                    / (1.0 - before)
        }
        _ => unreachable!(),
    }
}

/// Evaluates the special-case closed forms for `system`, which must have the
/// declared shape.
pub fn special_case_report(system: &SystemSpec, which: SpecialCase) -> Result<SystemReport> {
    // structural validity first, so a broken model is reported as such
    class_moments(system)?;
    if let Some(reason) = which.mismatch(system) {
        return Err(Error::ShapeMismatch {
            case: which.name(),
            reason,
        });
    }
    let xs = match which {
        SpecialCase::UnitService => unit_inputs(system)?,
        SpecialCase::Iid => iid_inputs(system)?,
        SpecialCase::IidActive => active_inputs(system)?,
    };
    let rho_plus = cumulative_loads_of(&xs);
    let rho = *rho_plus.last().expect("at least one class");
    ensure_stable(rho)?;
    let gap = 1.0 - rho;

    let conservation_rhs = conservation(which, &xs);
    let eu = conservation_rhs + rho + xs.iter().map(|x| x.rho * x.eq_mean_h).sum::<f64>();
    let curvature: f64 = xs
        .iter()
        .map(|x| 2.0 * x.rho * x.eq_mean_h + x.rho * (rho - x.rho) + x.mean_h * x.mean_h * x.delta2)
        .sum();
    let f1 = 1.0 / gap;
    let f2 = 2.0 * rho / (gap * gap) + curvature / (gap * gap * gap);

    let big_k = xs.len();
    let classes = (1..=big_k)
        .map(|k| {
            let x = &xs[k - 1];
            let (before, upto) = (rho_plus[k - 1], rho_plus[k]);
            let wp = w_pr(which, &xs, &rho_plus, k);
            let wn = match which {
                SpecialCase::UnitService => wp,
                _ => {
                    let lower: f64 = xs[k..].iter().map(|l| l.rho * l.eq_mean_h).sum();
                    wp + lower / ((1.0 - upto) * (1.0 - before))
                }
            };
            let h_pr = (x.mean_h - before) / (1.0 - before);
            ClassReport {
                class: k,
                lambda: x.lambda,
                rho: x.rho,
                eq_mean_h: x.eq_mean_h,
                w_pr: wp,
                w_np: wn,
                d_pr: wp + h_pr,
                u_pr: x.rho * wp + x.rho * (1.0 + x.eq_mean_h / (1.0 - before)),
                u_np: x.rho * wn + x.rho * (1.0 + x.eq_mean_h),
                h_pr_mean: h_pr,
                r_pr_mean: x.mean_h / h_pr * (1.0 + x.eq_mean_h / (1.0 - before)),
            }
        })
        .collect();

    Ok(SystemReport {
        rho,
        eu,
        conservation_rhs,
        f1,
        f2,
        classes,
    })
}

fn cumulative_loads_of(xs: &[Inputs]) -> Vec<f64> {
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(xs.iter().map(|x| {
            acc += x.rho;
            acc
        }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_iid_stream, build_on_off_stream, ServiceSpec};
    use crate::priority::PriorityModel;

    fn fixture() -> SystemSpec {
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

    #[test]
    fn iid_fixture_by_display() {
        let r = special_case_report(&fixture(), SpecialCase::Iid).unwrap();
        assert!((r.classes[1].w_pr - 41.0 / 24.0).abs() < 1e-12);
        assert!((r.conservation_rhs - 11.0 / 12.0).abs() < 1e-12);
        let general = PriorityModel::new(&fixture()).unwrap().report().unwrap();
        assert!(r.max_scaled_diff(&general) < 1e-12);
    }

    #[test]
    fn unit_service_pr_equals_np() {
        let sys = SystemSpec::from_pairs(vec![
            (
                build_on_off_stream(0.6, 0.5, &Pmf::point(1)).unwrap(),
                ServiceSpec::deterministic(1).unwrap(),
            ),
            (
                build_on_off_stream(0.85, 0.3, &Pmf::point(2)).unwrap(),
                ServiceSpec::deterministic(1).unwrap(),
            ),
        ]);
        let r = special_case_report(&sys, SpecialCase::UnitService).unwrap();
        assert!(r.classes.iter().all(|c| c.w_pr == c.w_np));
        let general = PriorityModel::new(&sys).unwrap().report().unwrap();
        assert!(r.max_scaled_diff(&general) < 1e-12, "{r:?}\n{general:?}");
    }

    #[test]
    fn iid_active_single_bursty() {
        let sys = SystemSpec::from_pairs(vec![(
            build_on_off_stream(0.5, 0.5, &Pmf::point(1)).unwrap(),
            ServiceSpec::deterministic(1).unwrap(),
        )]);
        let r = special_case_report(&sys, SpecialCase::IidActive).unwrap();
        assert!(r.classes[0].w_pr.abs() < 1e-12);
        let general = PriorityModel::new(&sys).unwrap().report().unwrap();
        assert!(r.max_scaled_diff(&general) < 1e-12);
    }

    #[test]
    fn shape_mismatch_names_condition() {
        let err = special_case_report(&fixture(), SpecialCase::UnitService).unwrap_err();
        assert!(err.to_string().contains("class 2 service"), "{err}");
        let bursty = SystemSpec::from_pairs(vec![(
            build_on_off_stream(0.5, 0.2, &Pmf::point(1)).unwrap(),
            ServiceSpec::deterministic(1).unwrap(),
        )]);
        assert!(matches!(
            special_case_report(&bursty, SpecialCase::Iid),
            Err(Error::ShapeMismatch { case: "iid", .. })
        ));
    }

    #[test]
    fn names_round_trip() {
        for c in SpecialCase::ALL {
            assert_eq!(c.name().parse::<SpecialCase>().unwrap(), c);
        }
    }
}
