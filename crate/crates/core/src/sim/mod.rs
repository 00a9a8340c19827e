//! Slot-exact simulation of the model under FCFS, preemptive-resume and
//! nonpreemptive priority, with replication-based confidence intervals.

mod engine;
mod stats;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use engine::{class_rng, Completion, Engine, ServiceStart, SlotEvents};
pub use stats::SimEstimate;

use crate::error::{Error, Result};
use crate::model::SystemSpec;
use crate::validate::validate_system;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discipline {
    Fcfs,
    PreemptiveResume,
    NonPreemptive,
}

impl Discipline {
    pub const ALL: [Discipline; 3] = [
        Discipline::Fcfs,
        Discipline::PreemptiveResume,
        Discipline::NonPreemptive,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Discipline::Fcfs => "fcfs",
            Discipline::PreemptiveResume => "pr",
            Discipline::NonPreemptive => "np",
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Discipline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcfs" => Ok(Discipline::Fcfs),
            "pr" | "preemptive-resume" => Ok(Discipline::PreemptiveResume),
            "np" | "nonpreemptive" => Ok(Discipline::NonPreemptive),
            other => Err(Error::Config(format!("unknown discipline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub slots_per_replication: u64,
    pub warmup_slots: u64,
    pub replications: usize,
    pub seed: u64,
    pub discipline: Discipline,
}

impl SimConfig {
    pub fn new(discipline: Discipline, slots: u64, replications: usize, seed: u64) -> Self {
        SimConfig {
            slots_per_replication: slots,
            warmup_slots: slots / 10,
            replications,
            seed,
            discipline,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots_per_replication <= self.warmup_slots {
            return Err(Error::Config(format!(
                "slots per replication ({}) must exceed warmup ({})",
                self.slots_per_replication, self.warmup_slots
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is needed".into()));
        }
        if self.replications as u64 >= 1 << 48 {
            return Err(Error::Config("too many replications".into()));
        }
        Ok(())
    }
}

/// A simulated quantity. Class indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "metric", content = "class", rename_all = "snake_case")]
pub enum Metric {
    /// Mean wait of class `k` customers that start service in the window.
    Wait(usize),
    /// Time-average unfinished work.
    UnfinishedTotal,
    /// Time-average unfinished work of class `k`.
    Unfinished(usize),
    /// Mean busy-cycle length.
    BusyCycleMean,
    /// `E[F(F-1)]` of the busy-cycle length.
    BusyCycleSecond,
    /// Mean PR service completion time of class `k`.
    CompletionTime(usize),
    /// Time-average number of class `k` customers that have not started
    /// service, sampled between the service step and the arrivals.
    WaitingCount(usize),
    /// Class `k` arrivals per slot.
    ArrivalRate(usize),
}

impl Metric {
    pub fn class(&self) -> Option<usize> {
        match *self {
            Metric::Wait(k)
            | Metric::Unfinished(k)
            | Metric::CompletionTime(k)
            | Metric::WaitingCount(k)
            | Metric::ArrivalRate(k) => Some(k),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Metric::Wait(k) => format!("W[{k}]"),
            Metric::UnfinishedTotal => "U".into(),
            Metric::Unfinished(k) => format!("U[{k}]"),
            Metric::BusyCycleMean => "F mean".into(),
            Metric::BusyCycleSecond => "F(F-1) mean".into(),
            Metric::CompletionTime(k) => format!("H_PR[{k}]"),
            Metric::WaitingCount(k) => format!("Q[{k}]"),
            Metric::ArrivalRate(k) => format!("lambda[{k}]"),
        }
    }

    /// The standard metric set for a `k`-class system under `discipline`.
    pub fn standard(k: usize, discipline: Discipline) -> Vec<Metric> {
        let mut out: Vec<Metric> = (1..=k).map(Metric::Wait).collect();
        out.push(Metric::UnfinishedTotal);
        out.extend((1..=k).map(Metric::Unfinished));
        out.push(Metric::BusyCycleMean);
        out.push(Metric::BusyCycleSecond);
        if discipline == Discipline::PreemptiveResume {
            out.extend((1..=k).map(Metric::CompletionTime));
        }
        out
    }
}

/// Per-class accumulators of one replication.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClassStats {
    pub wait_sum: u64,
    pub wait_count: u64,
    pub work_sum: u64,
    pub waiting_sum: u64,
    pub arrivals: u64,
    pub completion_sum: u64,
    pub completion_count: u64,
}

/// Everything measured in one replication after warmup.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub slots: u64,
    pub work_sum: u64,
    pub cycles: u64,
    pub cycle_sum: u64,
    pub cycle_second_sum: u64,
    pub classes: Vec<ClassStats>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

impl ReplicationStats {
    pub fn value(&self, metric: Metric) -> f64 {
        let c = |k: usize| &self.classes[k - 1];
        match metric {
            Metric::Wait(k) => ratio(c(k).wait_sum, c(k).wait_count),
            Metric::UnfinishedTotal => ratio(self.work_sum, self.slots),
            Metric::Unfinished(k) => ratio(c(k).work_sum, self.slots),
            Metric::BusyCycleMean => ratio(self.cycle_sum, self.cycles),
            Metric::BusyCycleSecond => ratio(self.cycle_second_sum, self.cycles),
            Metric::CompletionTime(k) => ratio(c(k).completion_sum, c(k).completion_count),
            Metric::WaitingCount(k) => ratio(c(k).waiting_sum, self.slots),
            Metric::ArrivalRate(k) => ratio(c(k).arrivals, self.slots),
        }
    }
}

/// Runs one replication; `trace`, if given, receives every service start
/// in the measurement window, in order.
fn replicate(
    system: &SystemSpec,
    config: &SimConfig,
    rep: usize,
    mut trace: Option<&mut Vec<ServiceStart>>,
) -> ReplicationStats {
    let k = system.num_classes();
    let mut engine = Engine::new(system, config.discipline, config.seed, rep as u64);
    let mut st = ReplicationStats {
        classes: vec![ClassStats::default(); k],
        ..Default::default()
    };
    let mut last_empty: Option<u64> = None;
    for n in 0..config.slots_per_replication {
        let measuring = n >= config.warmup_slots;
        engine.serve();
        if measuring {
            if let Some(s) = engine.last_start {
                let c = &mut st.classes[s.class];
                c.wait_sum += s.wait();
                c.wait_count += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(s);
                }
            }
            if let Some(done) = engine.last_completion {
                if done.started >= config.warmup_slots {
                    let c = &mut st.classes[done.class];
                    c.completion_sum += done.slot - done.started + 1;
                    c.completion_count += 1;
                }
            }
            for (j, c) in st.classes.iter_mut().enumerate() {
                c.waiting_sum += engine.class_waiting(j);
            }
        }
        let (arrivals, _) = engine.arrive();
        if measuring {
            st.slots += 1;
            st.work_sum += engine.unfinished();
            for (j, c) in st.classes.iter_mut().enumerate() {
                c.work_sum += engine.class_work(j);
                c.arrivals += arrivals[j];
            }
            if engine.unfinished() == 0 {
                if let Some(prev) = last_empty {
                    let f = n - prev;
                    st.cycles += 1;
                    st.cycle_sum += f;
                    st.cycle_second_sum += f * (f - 1);
                }
                last_empty = Some(n);
            }
        }
    }
    st
}

fn check_inputs(system: &SystemSpec, config: &SimConfig) -> Result<()> {
    config.validate()?;
    let report = validate_system(system);
    if report.has_structural_findings() {
        return Err(Error::Invalid(report));
    }
    if let Some(rho) = report.rho.filter(|_| report.is_unstable()) {
        return Err(Error::Unstable {
            rho,
            margin: crate::analytic::STABILITY_MARGIN,
        });
    }
    Ok(())
}

pub fn run_replication(
    system: &SystemSpec,
    config: &SimConfig,
    rep_index: usize,
) -> Result<ReplicationStats> {
    check_inputs(system, config)?;
    Ok(replicate(system, config, rep_index, None))
}

/// One replication together with its sequence of service starts.
pub fn run_replication_traced(
    system: &SystemSpec,
    config: &SimConfig,
    rep_index: usize,
) -> Result<(ReplicationStats, Vec<ServiceStart>)> {
    check_inputs(system, config)?;
    let mut trace = Vec::new();
    let stats = replicate(system, config, rep_index, Some(&mut trace));
    Ok((stats, trace))
}

/// All replications of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRun {
    pub config: SimConfig,
    pub num_classes: usize,
    pub replications: Vec<ReplicationStats>,
}

impl SimRun {
    pub fn estimate(&self, metric: Metric) -> Result<SimEstimate> {
        if let Some(k) = metric.class() {
            if k == 0 || k > self.num_classes {
                return Err(Error::ClassOutOfRange(k, self.num_classes));
            }
        }
        if matches!(metric, Metric::CompletionTime(_))
            && self.config.discipline != Discipline::PreemptiveResume
        {
            return Err(Error::UnsupportedMetric {
                metric: metric.label(),
                discipline: self.config.discipline.short_name(),
            });
        }
        Ok(SimEstimate::from_values(
            self.replications.iter().map(|r| r.value(metric)).collect(),
        ))
    }
}

/// Runs every replication, in parallel on the current rayon pool. Results
/// are in replication order whatever the scheduling.
pub fn simulate(system: &SystemSpec, config: &SimConfig) -> Result<SimRun> {
    check_inputs(system, config)?;
    let replications = (0..config.replications)
        .into_par_iter()
        .map(|rep| replicate(system, config, rep, None))
        .collect();
    Ok(SimRun {
        config: *config,
        num_classes: system.num_classes(),
        replications,
    })
}

pub fn estimate(system: &SystemSpec, config: &SimConfig, metric: Metric) -> Result<SimEstimate> {
    // reject before paying for the run
    if matches!(metric, Metric::CompletionTime(_))
        && config.discipline != Discipline::PreemptiveResume
    {
        return Err(Error::UnsupportedMetric {
            metric: metric.label(),
            discipline: config.discipline.short_name(),
        });
    }
    simulate(system, config)?.estimate(metric)
}
