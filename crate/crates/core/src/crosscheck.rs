//! Validation suite: exact identities between analytic quantities, and
//! coverage of analytic values by simulation estimates.

use serde::Serialize;

use crate::analytic::{single_class_unfinished, single_class_wait};
use crate::error::Result;
use crate::model::SystemSpec;
use crate::priority::{PriorityModel, SystemReport};
use crate::sim::{simulate, Discipline, Metric, SimConfig, SimEstimate, SimRun};
use crate::special::{special_case_report, SpecialCase};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub reference: f64,
    pub gap: f64,
    /// Allowed gap (absolute).
    pub tolerance: f64,
}

impl Check {
    /// `|value - reference| <= tol * max(1, |reference|)`.
    pub fn exact(name: impl Into<String>, value: f64, reference: f64, tol: f64) -> Self {
        let tolerance = tol * reference.abs().max(1.0);
        let gap = (value - reference).abs();
        Check {
            name: name.into(),
            passed: gap <= tolerance,
            value,
            reference,
            gap,
            tolerance,
        }
    }

    /// Passes when `value >= reference - tol`.
    pub fn at_least(name: impl Into<String>, value: f64, reference: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            passed: value >= reference - tol,
            value,
            reference,
            gap: (reference - value).max(0.0),
            tolerance: tol,
        }
    }

    /// Passes when the estimate is within three standard errors of `reference`.
    pub fn covers(name: impl Into<String>, est: &SimEstimate, reference: f64) -> Self {
        let tolerance = est.std_error.map_or(0.0, |se| 3.0 * se).max(1e-9);
        Check {
            name: name.into(),
            passed: est.covers(reference),
            value: est.mean,
            reference,
            gap: (est.mean - reference).abs(),
            tolerance,
        }
    }
}

/// Tolerance for identities that hold to rounding.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Exact analytic identities for `system`.
pub fn identity_checks(system: &SystemSpec) -> Result<Vec<Check>> {
    let model = PriorityModel::new(system)?;
    let report = model.report()?;
    let k_max = model.num_classes();
    let mut out = Vec::new();

    let weighted_np: f64 = report.classes.iter().map(|c| c.rho * c.w_np).sum();
    out.push(Check::exact(
        "conservation: sum rho_k W_np(k) = rhs",
        weighted_np,
        report.conservation_rhs,
        IDENTITY_TOL,
    ));
    let residual: f64 = report.classes.iter().map(|c| c.rho * c.eq_mean_h).sum();
    out.push(Check::exact(
        "unfinished work: rhs + rho + sum rho_k E[H~_k] = E[U]",
        report.conservation_rhs + report.rho + residual,
        report.eu,
        1e-12,
    ));
    out.push(Check::exact(
        "sum U_pr(k) = E[U]",
        report.classes.iter().map(|c| c.u_pr).sum(),
        report.eu,
        IDENTITY_TOL,
    ));
    out.push(Check::exact(
        "sum U_np(k) = E[U]",
        report.classes.iter().map(|c| c.u_np).sum(),
        report.eu,
        IDENTITY_TOL,
    ));
    out.push(Check::exact(
        "f1 = 1/(1 - rho)",
        report.f1,
        1.0 / (1.0 - report.rho),
        1e-12,
    ));
    for k in 1..=k_max {
        let c = &report.classes[k - 1];
        out.push(Check::exact(
            format!("U_pr({k}) closed form = via wait"),
            c.u_pr,
            model.u_pr_via_wait(k)?,
            IDENTITY_TOL,
        ));
        out.push(Check::exact(
            format!("U_np({k}) closed form = via wait"),
            c.u_np,
            model.u_np_via_wait(k)?,
            IDENTITY_TOL,
        ));
        if k < k_max {
            out.push(Check::at_least(
                format!("W_np({k}) >= W_pr({k})"),
                c.w_np,
                c.w_pr,
                IDENTITY_TOL,
            ));
        } else {
            out.push(Check::exact(
                format!("W_np({k}) = W_pr({k})"),
                c.w_np,
                c.w_pr,
                IDENTITY_TOL,
            ));
        }
    }
    let first = &system.classes[0];
    out.push(Check::exact(
        "W_pr(1) = single-class wait",
        report.classes[0].w_pr,
        single_class_wait(&first.stream, &first.service)?,
        IDENTITY_TOL,
    ));
    out.push(Check::exact(
        "U_pr(1) = single-class unfinished work",
        report.classes[0].u_pr,
        single_class_unfinished(&first.stream, &first.service)?,
        IDENTITY_TOL,
    ));
    for case in SpecialCase::ALL {
        if case.matches(system) {
            out.extend(special_case_checks(&report, system, case)?);
        }
    }
    Ok(out)
}

fn special_case_checks(
    general: &SystemReport,
    system: &SystemSpec,
    case: SpecialCase,
) -> Result<Vec<Check>> {
    let special = special_case_report(system, case)?;
    let mut out = vec![Check::exact(
        format!("{case}: direct forms = general path"),
        special.max_scaled_diff(general),
        0.0,
        IDENTITY_TOL,
    )];
    if case == SpecialCase::UnitService {
        for c in &special.classes {
            out.push(Check::exact(
                format!("{case}: W_pr({}) = W_np({})", c.class, c.class),
                c.w_pr,
                c.w_np,
                IDENTITY_TOL,
            ));
        }
    }
    Ok(out)
}

/// Simulation settings for [`simulation_checks`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuiteConfig {
    pub slots: u64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            slots: 1_000_000,
            replications: 20,
            seed: 1,
        }
    }
}

/// Analytic values against simulation estimates under all three disciplines.
pub fn simulation_checks(system: &SystemSpec, suite: &SuiteConfig) -> Result<Vec<Check>> {
    let model = PriorityModel::new(system)?;
    let report = model.report()?;
    let mut out = Vec::new();
    for d in Discipline::ALL {
        let cfg = SimConfig::new(d, suite.slots, suite.replications, suite.seed);
        let run = simulate(system, &cfg)?;
        out.extend(discipline_checks(&run, &model, &report)?);
    }
    Ok(out)
}

fn discipline_checks(
    run: &SimRun,
    model: &PriorityModel,
    report: &SystemReport,
) -> Result<Vec<Check>> {
    let d = run.config.discipline;
    let mut out = Vec::new();
    let mut cover = |metric: Metric, reference: f64| -> Result<()> {
        let est = run.estimate(metric)?;
        out.push(Check::covers(
            format!("{d}: {}", metric.label()),
            &est,
            reference,
        ));
        Ok(())
    };
    cover(Metric::UnfinishedTotal, report.eu)?;
    cover(Metric::BusyCycleMean, report.f1)?;
    cover(Metric::BusyCycleSecond, report.f2)?;
    for c in &report.classes {
        let k = c.class;
        match d {
            Discipline::PreemptiveResume => {
                cover(Metric::Wait(k), c.w_pr)?;
                cover(Metric::Unfinished(k), c.u_pr)?;
                cover(Metric::CompletionTime(k), model.completion_time_mean(k)?)?;
            }
            Discipline::NonPreemptive => {
                cover(Metric::Wait(k), c.w_np)?;
                cover(Metric::Unfinished(k), c.u_np)?;
            }
            Discipline::Fcfs => {}
        }
    }
    // Little's law per replication: waiting count against empirical rate times wait
    for k in 1..=run.num_classes {
        let gaps = run
            .replications
            .iter()
            .map(|r| {
                r.value(Metric::WaitingCount(k))
                    - r.value(Metric::ArrivalRate(k)) * r.value(Metric::Wait(k))
            })
            .collect();
        out.push(Check::covers(
            format!("{d}: Little Q[{k}] - lambda W[{k}]"),
            &SimEstimate::from_values(gaps),
            0.0,
        ));
    }
    Ok(out)
}

/// Share of passing checks (1 for an empty list).
pub fn pass_rate(checks: &[Check]) -> f64 {
    if checks.is_empty() {
        1.0
    } else {
        checks.iter().filter(|c| c.passed).count() as f64 / checks.len() as f64
    }
}
