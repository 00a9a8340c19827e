//! Per-class means under preemptive-resume (PR) and nonpreemptive (NP)
//! priority: waiting time, system delay, unfinished work, completion time
//! and remaining service time.
//!
//! Classes are 1-based in this API, class 1 having the highest priority.
//! `rho_plus(k)` is the load of classes `1..=k`, with `rho_plus(0) = 0`.

use serde::Serialize;

use crate::analytic::{
    busy_cycle_from, class_moments, conservation_from, cumulative_loads, ensure_stable,
    unfinished_from, StreamMoments, SystemMoments,
};
use crate::error::{Error, Result};
use crate::model::SystemSpec;

/// Analytic results for one class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: usize,
    pub lambda: f64,
    pub rho: f64,
    pub eq_mean_h: f64,
    pub w_pr: f64,
    pub w_np: f64,
    pub d_pr: f64,
    pub u_pr: f64,
    pub u_np: f64,
    /// Mean PR service completion time.
    pub h_pr_mean: f64,
    /// Mean PR remaining service time seen by a random observer in service.
    pub r_pr_mean: f64,
}

/// Per-class results plus the system-wide aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemReport {
    pub rho: f64,
    pub eu: f64,
    pub conservation_rhs: f64,
    pub f1: f64,
    pub f2: f64,
    pub classes: Vec<ClassReport>,
}

impl SystemReport {
    /// Largest difference over every numeric field, each scaled by
    /// `max(1, |other|)` so large moments are compared relatively.
    pub fn max_scaled_diff(&self, other: &SystemReport) -> f64 {
        let agg = [
            (self.rho, other.rho),
            (self.eu, other.eu),
            (self.conservation_rhs, other.conservation_rhs),
            (self.f1, other.f1),
            (self.f2, other.f2),
        ];
        let per_class = self.classes.iter().zip(&other.classes).flat_map(|(a, b)| {
            [
                (a.lambda, b.lambda),
                (a.rho, b.rho),
                (a.eq_mean_h, b.eq_mean_h),
                (a.w_pr, b.w_pr),
                (a.w_np, b.w_np),
                (a.d_pr, b.d_pr),
                (a.u_pr, b.u_pr),
                (a.u_np, b.u_np),
                (a.h_pr_mean, b.h_pr_mean),
                (a.r_pr_mean, b.r_pr_mean),
            ]
        });
        if self.classes.len() != other.classes.len() {
            return f64::INFINITY;
        }
        agg.into_iter()
            .chain(per_class)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// A structurally valid system with its per-class moments precomputed.
#[derive(Debug, Clone)]
pub struct PriorityModel {
    classes: Vec<StreamMoments>,
    rho_plus: Vec<f64>,
}

impl PriorityModel {
    /// Fails if the system is structurally invalid. Load is checked per
    /// query, since PR quantities of class `k` only need classes `1..=k` stable.
    pub fn new(system: &SystemSpec) -> Result<Self> {
        let classes = class_moments(system)?;
        let rho_plus = cumulative_loads(&classes);
        Ok(PriorityModel { classes, rho_plus })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_moments(&self, k: usize) -> Result<&StreamMoments> {
        self.check_class(k)?;
        Ok(&self.classes[k - 1])
    }

    pub fn rho_plus(&self, k: usize) -> f64 {
        self.rho_plus[k]
    }

    pub fn system_moments(&self) -> Result<SystemMoments> {
        let rho_total = self.rho_total();
        ensure_stable(rho_total)?;
        let (f1, f2) = busy_cycle_from(&self.classes);
        Ok(SystemMoments {
            rho_total,
            rho_plus: self.rho_plus.clone(),
            eu: unfinished_from(&self.classes),
            conservation_rhs: conservation_from(&self.classes),
            f1,
            f2,
            per_class: self.classes.clone(),
        })
    }

    fn rho_total(&self) -> f64 {
        *self.rho_plus.last().expect("at least one class")
    }

    fn check_class(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.classes.len() {
            Err(Error::ClassOutOfRange(k, self.classes.len()))
        } else {
            Ok(())
        }
    }

    /// Checks `k` and that classes `1..=k` alone are stable.
    fn check_pr(&self, k: usize) -> Result<&StreamMoments> {
        self.check_class(k)?;
        ensure_stable(self.rho_plus[k])?;
        Ok(&self.classes[k - 1])
    }

    fn check_np(&self, k: usize) -> Result<&StreamMoments> {
        self.check_class(k)?;
        ensure_stable(self.rho_total())?;
        Ok(&self.classes[k - 1])
    }

    /// Mean time from the start of a class-`k` PR service to its completion.
    pub fn completion_time_mean(&self, k: usize) -> Result<f64> {
        let c = self.check_pr(k)?;
        let before = self.rho_plus[k - 1];
        Ok((c.mean_h - before) / (1.0 - before))
    }

    /// Mean remaining PR completion time of a class-`k` customer found in service.
    pub fn remaining_service_mean(&self, k: usize) -> Result<f64> {
        let c = self.check_pr(k)?;
        let before = self.rho_plus[k - 1];
        let h_pr = self.completion_time_mean(k)?;
        Ok(c.mean_h / h_pr * (1.0 + c.eq_mean_h / (1.0 - before)))
    }

    fn higher_sums(&self, k: usize) -> (f64, f64, f64) {
        let hi = &self.classes[..k];
        let rk = self.rho_plus[k];
        (
            hi.iter().map(|l| l.rho * l.eq_mean_h).sum(),
            hi.iter().map(|l| l.rho * (rk - l.rho)).sum(),
            hi.iter().map(|l| l.work_curvature()).sum(),
        )
    }

    pub fn w_pr_mean(&self, k: usize) -> Result<f64> {
        let c = self.check_pr(k)?;
        let before = self.rho_plus[k - 1];
        let d = (1.0 - self.rho_plus[k]) * (1.0 - before);
        let (residual, cross, _) = self.higher_sums(k);
        let burst: f64 = self.classes[..k]
            .iter()
            .map(|l| {
                l.rho * (l.pi_on * l.rho * (1.0 + l.active.eq_len_mean) + l.mean_h * l.burst_term())
            })
            .sum();
        Ok(residual / d
            + cross / (2.0 * d)
            + before / (1.0 - before)
            + burst / d
            + c.mean_h / (1.0 - before) * c.burst_term()
            + c.pi_on
                * ((1.0 + c.rho / (1.0 - before)) * (1.0 + c.active.eq_len_mean)
                    - c.residual_ratio()))
    }

    pub fn d_pr_mean(&self, k: usize) -> Result<f64> {
        Ok(self.w_pr_mean(k)? + self.completion_time_mean(k)?)
    }

    /// Mean class-`k` unfinished work under PR, from its own closed form.
    pub fn u_pr_mean(&self, k: usize) -> Result<f64> {
        let c = self.check_pr(k)?;
        let before = self.rho_plus[k - 1];
        let d = (1.0 - self.rho_plus[k]) * (1.0 - before);
        let (residual, cross, curvature) = self.higher_sums(k);
        Ok(c.rho
            + c.rho * residual / d
            + c.rho * c.eq_mean_h / (1.0 - before)
            + c.rho * cross / (2.0 * d)
            + c.rho * before / (1.0 - before)
            + c.rho * curvature / (2.0 * d)
            + c.work_curvature() / (2.0 * (1.0 - before))
            + c.v0_prime * c.mean_h)
    }

    /// Mean class-`k` PR unfinished work through the mean wait: waiting
    /// customers hold their full service, the one in service its remainder.
    pub fn u_pr_via_wait(&self, k: usize) -> Result<f64> {
        let c = self.check_pr(k)?;
        let before = self.rho_plus[k - 1];
        Ok(c.rho * self.w_pr_mean(k)? + c.rho * (1.0 + c.eq_mean_h / (1.0 - before)))
    }

    /// Extra NP wait caused by lower classes already in service.
    fn np_penalty(&self, k: usize) -> f64 {
        let lower: f64 = self.classes[k..].iter().map(|l| l.rho * l.eq_mean_h).sum();
        lower / ((1.0 - self.rho_plus[k]) * (1.0 - self.rho_plus[k - 1]))
    }

    pub fn w_np_mean(&self, k: usize) -> Result<f64> {
        self.check_np(k)?;
        Ok(self.w_pr_mean(k)? + self.np_penalty(k))
    }

    /// Mean class-`k` unfinished work under NP. Class `K` is obtained by
    /// work conservation from the total.
    pub fn u_np_mean(&self, k: usize) -> Result<f64> {
        let c = self.check_np(k)?;
        let big_k = self.classes.len();
        if k == big_k {
            let higher = (1..big_k).map(|j| self.u_np_mean(j)).sum::<Result<f64>>()?;
            return Ok(unfinished_from(&self.classes) - higher);
        }
        let before = self.rho_plus[k - 1];
        Ok(
            self.u_pr_mean(k)? - before / (1.0 - before) * c.rho * c.eq_mean_h
                + c.rho * self.np_penalty(k),
        )
    }

    pub fn u_np_via_wait(&self, k: usize) -> Result<f64> {
        let c = self.check_np(k)?;
        Ok(c.rho * self.w_np_mean(k)? + c.rho * (1.0 + c.eq_mean_h))
    }

    /// The full report; needs the whole system stable.
    pub fn report(&self) -> Result<SystemReport> {
        let sys = self.system_moments()?;
        let classes = (1..=self.classes.len())
            .map(|k| {
                let c = &self.classes[k - 1];
                Ok(ClassReport {
                    class: k,
                    lambda: c.lambda,
                    rho: c.rho,
                    eq_mean_h: c.eq_mean_h,
                    w_pr: self.w_pr_mean(k)?,
                    w_np: self.w_np_mean(k)?,
                    d_pr: self.d_pr_mean(k)?,
                    u_pr: self.u_pr_mean(k)?,
                    u_np: self.u_np_mean(k)?,
                    h_pr_mean: self.completion_time_mean(k)?,
                    r_pr_mean: self.remaining_service_mean(k)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SystemReport {
            rho: sys.rho_total,
            eu: sys.eu,
            conservation_rhs: sys.conservation_rhs,
            f1: sys.f1,
            f2: sys.f2,
            classes,
        })
    }
}
