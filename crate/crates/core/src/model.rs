//! Input model: per-class arrival streams with geometric idle periods and
//! general service-time laws.
//!
//! Each stream is driven by a chain on `{0, 1, ..., M}` where state 0 is the
//! idle state. Row 0 of the chain is `(p, (1 - p) alpha)`, rows `1..=M` are
//! `((I - T) e, T)`. Every transition into an active state carries its own
//! batch-size law (support in `{1, 2, ...}`); transitions into the idle state
//! bring no customers.

use crate::error::{Error, Result};
use crate::pmf::Pmf;

/// One positive-probability move of an arrival chain together with the
/// number of customers it delivers.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEntry {
    pub prob: f64,
    pub batch: Pmf,
}

impl TransitionEntry {
    pub fn new(prob: f64, batch: Pmf) -> Self {
        TransitionEntry { prob, batch }
    }

    /// A single customer per transition.
    pub fn unit(prob: f64) -> Self {
        TransitionEntry::new(prob, Pmf::point(1))
    }

    /// Probability-weighted first factorial moment of the batch law.
    pub fn weighted_mean(&self) -> f64 {
        self.prob * self.batch.mean()
    }

    /// Probability-weighted second factorial moment of the batch law.
    pub fn weighted_second(&self) -> f64 {
        self.prob
            * self
                .batch
                .factorial_moment(2)
                .expect("order 2 is always supported")
    }
}

/// Service-time law of one class, on the positive integers (slots).
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSpec {
    pub pmf: Pmf,
}

impl ServiceSpec {
    pub fn new(pmf: Pmf) -> Result<Self> {
        if pmf.min_value() < 1 {
            return Err(Error::Degenerate(
                "service times must be at least one slot".into(),
            ));
        }
        Ok(ServiceSpec { pmf })
    }

    pub fn deterministic(slots: u64) -> Result<Self> {
        ServiceSpec::new(Pmf::point(slots))
    }

    pub fn mean(&self) -> f64 {
        self.pmf.mean()
    }

    /// `E[H~] = E[H(H-1)] / (2 E[H])`.
    pub fn equilibrium_mean(&self) -> f64 {
        self.pmf.equilibrium_mean().unwrap_or(0.0)
    }
}

/// Batch Markovian arrival stream with a geometric idle period.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalStreamSpec {
    /// Probability of staying idle for another slot.
    pub idle_self_prob: f64,
    /// Entry law into the active states (probabilities sum to one).
    pub alpha: Vec<TransitionEntry>,
    /// Active-to-active moves; the row deficit is the exit probability.
    pub transitions: Vec<Vec<TransitionEntry>>,
}

impl ArrivalStreamSpec {
    pub fn new(
        idle_self_prob: f64,
        alpha: Vec<TransitionEntry>,
        transitions: Vec<Vec<TransitionEntry>>,
    ) -> Result<Self> {
        let m = alpha.len();
        if m == 0 {
            return Err(Error::Shape(
                "a stream needs at least one active state".into(),
            ));
        }
        if transitions.len() != m || transitions.iter().any(|row| row.len() != m) {
            return Err(Error::Shape(format!(
                "alpha has {m} entries but T is not {m}x{m}"
            )));
        }
        Ok(ArrivalStreamSpec {
            idle_self_prob,
            alpha,
            transitions,
        })
    }

    /// Number of active states `M`.
    pub fn active_states(&self) -> usize {
        self.alpha.len()
    }

    /// `(I - T) e`, the per-state probability of returning to idle.
    pub fn exit_probs(&self) -> Vec<f64> {
        self.transitions
            .iter()
            .map(|row| 1.0 - row.iter().map(|e| e.prob).sum::<f64>())
            .collect()
    }

    /// The full `(M+1) x (M+1)` transition matrix, idle state first.
    pub fn full_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.active_states();
        let p = self.idle_self_prob;
        let mut rows = Vec::with_capacity(m + 1);
        let mut row0 = vec![p];
        row0.extend(self.alpha.iter().map(|e| (1.0 - p) * e.prob));
        rows.push(row0);
        for (row, exit) in self.transitions.iter().zip(self.exit_probs()) {
            let mut r = vec![exit];
            r.extend(row.iter().map(|e| e.prob));
            rows.push(r);
        }
        rows
    }

    /// Batch law of the move `from -> to` in full-chain indexing (0 = idle).
    /// Moves into the idle state deliver no customers.
    pub fn batch(&self, from: usize, to: usize) -> Option<&Pmf> {
        match (from, to) {
            (_, 0) => None,
            (0, j) => Some(&self.alpha[j - 1].batch),
            (i, j) => Some(&self.transitions[i - 1][j - 1].batch),
        }
    }

    /// Every active-targeting entry, with full-chain `(from, to)` indices.
    pub fn active_entries(&self) -> impl Iterator<Item = (usize, usize, &TransitionEntry)> {
        let from_idle = self.alpha.iter().enumerate().map(|(j, e)| (0, j + 1, e));
        let from_active = self
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, e)| (i + 1, j + 1, e)));
        from_idle.chain(from_active)
    }
}

/// Stream whose per-slot arrival counts are i.i.d. with law `batch_pmf`
/// (mass at zero strictly inside (0, 1)).
pub fn build_iid_stream(batch_pmf: &Pmf) -> Result<ArrivalStreamSpec> {
    let a0 = batch_pmf.mass_at(0);
    if a0 <= 0.0 || a0 >= 1.0 {
        return Err(Error::Degenerate(format!(
            "i.i.d. stream needs 0 < Pr(A = 0) < 1, got {a0}"
        )));
    }
    let positive = batch_pmf.conditional_positive()?;
    ArrivalStreamSpec::new(
        a0,
        vec![TransitionEntry::new(1.0, positive.clone())],
        vec![vec![TransitionEntry::new(1.0 - a0, positive)]],
    )
}

/// Stream whose active-slot batch size is independent of the chain state:
/// every active-targeting move carries `batch_pmf`.
pub fn build_iid_active_stream(
    p: f64,
    alpha_probs: &[f64],
    t_probs: &[Vec<f64>],
    batch_pmf: &Pmf,
) -> Result<ArrivalStreamSpec> {
    if batch_pmf.mass_at(0) > 0.0 {
        return Err(Error::BatchRule(
            "active-slot batch law puts mass on zero customers".into(),
        ));
    }
    let alpha = alpha_probs
        .iter()
        .map(|&a| TransitionEntry::new(a, batch_pmf.clone()))
        .collect();
    let transitions = t_probs
        .iter()
        .map(|row| {
            row.iter()
                .map(|&t| TransitionEntry::new(t, batch_pmf.clone()))
                .collect()
        })
        .collect();
    ArrivalStreamSpec::new(p, alpha, transitions)
}

/// Stream with a geometric active period: one active state left with
/// probability `1 - stay` each slot.
pub fn build_on_off_stream(p: f64, stay: f64, batch_pmf: &Pmf) -> Result<ArrivalStreamSpec> {
    build_iid_active_stream(p, &[1.0], &[vec![stay]], batch_pmf)
}

/// One priority class: its arrival stream and its service law.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub stream: ArrivalStreamSpec,
    pub service: ServiceSpec,
}

/// The whole system. Index order is priority order (index 0 = class 1, highest).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub classes: Vec<ClassSpec>,
}

impl SystemSpec {
    pub fn new(classes: Vec<ClassSpec>) -> Self {
        SystemSpec { classes }
    }

    pub fn from_pairs(pairs: Vec<(ArrivalStreamSpec, ServiceSpec)>) -> Self {
        SystemSpec {
            classes: pairs
                .into_iter()
                .map(|(stream, service)| ClassSpec { stream, service })
                .collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// The subsystem fed only by classes `1..=top_k`.
    pub fn truncated(&self, top_k: usize) -> SystemSpec {
        SystemSpec {
            classes: self.classes[..top_k.min(self.classes.len())].to_vec(),
        }
    }
}
