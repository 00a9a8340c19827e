//! Structural and stability checks on a [`SystemSpec`].
//!
//! Validation never fails: it returns a [`ValidationReport`] listing every
//! violated condition. The total load is only computed once the structure
//! is sound, since the closed forms are meaningless otherwise.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::analytic::{condition_number, stream_moments, CONDITION_WARNING, STABILITY_MARGIN};
use crate::model::{ArrivalStreamSpec, SystemSpec};
use crate::pmf::MASS_TOLERANCE;

/// A violated model condition. Class indices are 1-based; state indices are
/// in full-chain numbering where 0 is the idle state.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    NoClasses,
    IdleProbability {
        class: usize,
        p: f64,
    },
    NegativeProbability {
        class: usize,
        from: usize,
        to: usize,
        prob: f64,
    },
    RowSum {
        class: usize,
        row: usize,
        sum: f64,
    },
    NoExit {
        class: usize,
    },
    Reducible {
        class: usize,
        state: usize,
    },
    BatchAtZero {
        class: usize,
        from: usize,
        to: usize,
    },
    ServiceSupport {
        class: usize,
        min: u64,
    },
    Singular {
        class: usize,
    },
    Unstable {
        rho: f64,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::NoClasses => write!(f, "the system has no classes"),
            Finding::IdleProbability { class, p } => {
                write!(f, "class {class}: idle self-probability p = {p} is outside [0, 1)")
            }
            Finding::NegativeProbability {
                class,
                from,
                to,
                prob,
            } => write!(
                f,
                "class {class}: transition {from} -> {to} has probability {prob} outside [0, 1]"
            ),
            Finding::RowSum { class, row, sum } => write!(
                f,
                "class {class}: row {row} of the transition matrix sums to {sum}, not 1"
            ),
            Finding::NoExit { class } => write!(
                f,
                "class {class}: no active state can return to idle, (I−T)e = 0"
            ),
            Finding::Reducible { class, state } => write!(
                f,
                "class {class}: transition matrix is reducible (state {state} is not mutually reachable with the idle state)"
            ),
            Finding::BatchAtZero { class, from, to } => write!(
                f,
                "class {class}: batch law of active-targeting move {from} -> {to} puts mass on 0 customers (arrivals must occur exactly on moves into active states)"
            ),
            Finding::ServiceSupport { class, min } => write!(
                f,
                "class {class}: service time must be at least one slot, support starts at {min}"
            ),
            Finding::Singular { class } => write!(
                f,
                "class {class}: (I−T) is singular or T has spectral radius >= 1"
            ),
            Finding::Unstable { rho } => write!(
                f,
                "unstable: total traffic intensity rho = {rho} is not below 1"
            ),
        }
    }
}

/// A condition that does not invalidate the model but deserves attention.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    IllConditioned { class: usize, condition: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::IllConditioned { class, condition } => write!(
                f,
                "class {class}: (I−T) has condition number {condition:.3e}; results may lose accuracy"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub warnings: Vec<Warning>,
    /// Total load, present once the structure is valid.
    pub rho: Option<f64>,
    /// Per-class loads, empty unless `rho` is present.
    pub class_rho: Vec<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    /// Structurally sound but overloaded.
    pub fn is_unstable(&self) -> bool {
        !self.has_structural_findings()
            && self
                .findings
                .iter()
                .any(|f| matches!(f, Finding::Unstable { .. }))
    }

    pub fn has_structural_findings(&self) -> bool {
        self.findings
            .iter()
            .any(|f| !matches!(f, Finding::Unstable { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            write!(f, "valid")?;
            if let Some(rho) = self.rho {
                write!(f, ", rho = {rho}")?;
            }
        } else {
            let lines: Vec<String> = self.findings.iter().map(|x| format!("  - {x}")).collect();
            write!(f, "{}", lines.join("\n"))?;
        }
        for w in &self.warnings {
            write!(f, "\n  warning: {w}")?;
        }
        Ok(())
    }
}

pub fn validate_system(spec: &SystemSpec) -> ValidationReport {
    let mut findings = Vec::new();
    let mut warnings = Vec::new();
    if spec.classes.is_empty() {
        findings.push(Finding::NoClasses);
    }
    for (idx, class) in spec.classes.iter().enumerate() {
        let k = idx + 1;
        let before = findings.len();
        check_stream(k, &class.stream, &mut findings);
        let min = class.service.pmf.min_value();
        if min < 1 {
            findings.push(Finding::ServiceSupport { class: k, min });
        }
        if findings.len() == before {
            match condition_number(&class.stream) {
                None => findings.push(Finding::Singular { class: k }),
                Some(c) if c > CONDITION_WARNING => warnings.push(Warning::IllConditioned {
                    class: k,
                    condition: c,
                }),
                Some(_) => {}
            }
        }
    }

    let mut report = ValidationReport {
        findings,
        warnings,
        rho: None,
        class_rho: Vec::new(),
    };
    if report.findings.is_empty() {
        let loads: Option<Vec<f64>> = spec
            .classes
            .iter()
            .map(|c| stream_moments(&c.stream, &c.service).ok().map(|m| m.rho))
            .collect();
        if let Some(loads) = loads {
            let rho: f64 = loads.iter().sum();
            if rho.is_nan() || rho >= 1.0 - STABILITY_MARGIN {
                report.findings.push(Finding::Unstable { rho });
            }
            report.rho = Some(rho);
            report.class_rho = loads;
        }
    }
    report
}

fn check_stream(k: usize, stream: &ArrivalStreamSpec, findings: &mut Vec<Finding>) {
    let p = stream.idle_self_prob;
    if !(0.0..1.0).contains(&p) {
        findings.push(Finding::IdleProbability { class: k, p });
    }
    for (from, to, e) in stream.active_entries() {
        if !(0.0..=1.0).contains(&e.prob) || !e.prob.is_finite() {
            findings.push(Finding::NegativeProbability {
                class: k,
                from,
                to,
                prob: e.prob,
            });
        }
        if e.prob > 0.0 && e.batch.mass_at(0) > 0.0 {
            findings.push(Finding::BatchAtZero { class: k, from, to });
        }
    }
    let full = stream.full_matrix();
    for (row, r) in full.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        let negative_exit = row > 0 && r[0] < -MASS_TOLERANCE;
        if (sum - 1.0).abs() > MASS_TOLERANCE || negative_exit {
            let sum = if negative_exit { 1.0 - r[0] } else { sum };
            findings.push(Finding::RowSum { class: k, row, sum });
        }
    }
    let exits = stream.exit_probs();
    if exits.iter().all(|x| *x <= MASS_TOLERANCE) {
        findings.push(Finding::NoExit { class: k });
        return;
    }
    if let Some(state) = unreachable_state(&full) {
        findings.push(Finding::Reducible { class: k, state });
    }
}

/// First state not in the strongly connected component of state 0, if any.
fn unreachable_state(full: &[Vec<f64>]) -> Option<usize> {
    let n = full.len();
    // exits are row deficits, so rounding noise must not count as an edge
    let edge = |i: usize, j: usize| {
        let w = full[i][j];
        if j == 0 && i > 0 {
            w > MASS_TOLERANCE
        } else {
            w > 0.0
        }
    };
    let forward = reach(n, edge);
    let backward = reach(n, |i, j| edge(j, i));
    (0..n).find(|&s| !forward[s] || !backward[s])
}

fn reach(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for (j, s) in seen.iter_mut().enumerate() {
            if !*s && edge(i, j) {
                *s = true;
                queue.push_back(j);
            }
        }
    }
    seen
}
