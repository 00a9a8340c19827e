//! Per-stream and system-wide quantities: stationary split of the arrival
//! chain, arrival rate and load, moments of the active period, the second
//! derivative of the Perron-Frobenius eigenvalue at one (`delta2`) and the
//! idle-state eigenvector slope (`v0_prime`), mean unfinished work, the
//! conservation-law right-hand side and busy-cycle factorial moments.
//!
//! Everything is a closed form evaluated at `z = 1`; no generating function
//! is ever solved for.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ArrivalStreamSpec, ServiceSpec, SystemSpec};
use crate::validate::validate_system;

/// Loads at or above `1 - STABILITY_MARGIN` are rejected.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Condition number of `I - T` above which validation warns.
pub const CONDITION_WARNING: f64 = 1e12;

/// Vectors and matrices of one stream with the batch factorial moments
/// folded in entrywise (`alpha1 = alpha_j E[a_0j]`, `t2 = T_ij E[a_ij(a_ij - 1)]`, ...).
pub(crate) struct StreamMatrices {
    pub alpha: RowDVector<f64>,
    pub alpha1: RowDVector<f64>,
    pub alpha2: RowDVector<f64>,
    pub t: DMatrix<f64>,
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
    /// `(I - T)^-1`
    pub fundamental: DMatrix<f64>,
}

impl StreamMatrices {
    pub fn build(stream: &ArrivalStreamSpec) -> Option<Self> {
        let m = stream.active_states();
        let alpha = RowDVector::from_iterator(m, stream.alpha.iter().map(|e| e.prob));
        let alpha1 = RowDVector::from_iterator(m, stream.alpha.iter().map(|e| e.weighted_mean()));
        let alpha2 = RowDVector::from_iterator(m, stream.alpha.iter().map(|e| e.weighted_second()));
        let entry = |f: &dyn Fn(&crate::model::TransitionEntry) -> f64| {
            DMatrix::from_fn(m, m, |i, j| f(&stream.transitions[i][j]))
        };
        let t = entry(&|e| e.prob);
        let t1 = entry(&|e| e.weighted_mean());
        let t2 = entry(&|e| e.weighted_second());
        let fundamental = fundamental_matrix(&t)?;
        Some(StreamMatrices {
            alpha,
            alpha1,
            alpha2,
            t,
            t1,
            t2,
            fundamental,
        })
    }

    fn ones(&self) -> DVector<f64> {
        DVector::from_element(self.t.nrows(), 1.0)
    }
}

/// `(I - T)^-1` by LU with partial pivoting; `None` when singular or when the
/// result is not entrywise nonnegative (spectral radius of `T` not below one).
pub(crate) fn fundamental_matrix(t: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = t.nrows();
    let n = (DMatrix::identity(m, m) - t).lu().try_inverse()?;
    if n.iter().any(|x| !x.is_finite() || *x < -1e-9) {
        return None;
    }
    Some(n)
}

/// `||I - T||_inf * ||(I - T)^-1||_inf`.
pub fn condition_number(stream: &ArrivalStreamSpec) -> Option<f64> {
    let m = stream.active_states();
    let t = DMatrix::from_fn(m, m, |i, j| stream.transitions[i][j].prob);
    let a = DMatrix::identity(m, m) - &t;
    let n = fundamental_matrix(&t)?;
    let inf_norm = |x: &DMatrix<f64>| {
        x.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Some(inf_norm(&a) * inf_norm(&n))
}

/// Moments of a randomly chosen active period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActivePeriodMoments {
    /// `E[C]`, mean active-period length in slots.
    pub mean_len: f64,
    /// `E[Lambda]`, mean number of customers per active period.
    pub mean_arrivals: f64,
    /// `E[C Lambda]`.
    pub mean_len_arrivals: f64,
    /// `E[C~]`, mean forward recurrence time of the active period.
    pub eq_len_mean: f64,
    /// `E[Lambda(C~)]`, customers arriving in the forward recurrence time.
    pub residual_arrivals_mean: f64,
    /// `E[Lambda~]`.
    pub eq_arrivals_mean: f64,
}

/// Stationary probability of the idle state and of each active state.
pub fn stationary_split(stream: &ArrivalStreamSpec) -> Result<(f64, Vec<f64>)> {
    let mx = StreamMatrices::build(stream).ok_or(Error::Singular(0))?;
    Ok(split_from(stream.idle_self_prob, &mx))
}

fn split_from(p: f64, mx: &StreamMatrices) -> (f64, Vec<f64>) {
    let row = &mx.alpha * &mx.fundamental;
    let idle_weight = 1.0 / (1.0 - p);
    let denom = idle_weight + row.sum();
    (idle_weight / denom, row.iter().map(|x| x / denom).collect())
}

pub fn active_period_moments(stream: &ArrivalStreamSpec) -> Result<ActivePeriodMoments> {
    let mx = StreamMatrices::build(stream).ok_or(Error::Singular(0))?;
    Ok(active_from(&mx))
}

fn active_from(mx: &StreamMatrices) -> ActivePeriodMoments {
    let e = mx.ones();
    let n = &mx.fundamental;
    let alpha_n = &mx.alpha * n;
    let n_e = n * &e;
    let t1_e = &mx.t1 * &e;
    let n_t1_e = n * &t1_e;

    let mean_len = (&mx.alpha * &n_e)[0];
    let mean_arrivals = mx.alpha1.sum() + (&alpha_n * &t1_e)[0];
    let mean_len_arrivals =
        (&mx.alpha1 * &n_e)[0] + (&alpha_n * &mx.t1 * &n_e)[0] + (&alpha_n * &n_t1_e)[0];
    let start = &alpha_n / mean_len;
    let eq_len_mean = (&start * n * &mx.t * &e)[0];
    let residual_arrivals_mean = (&start * &n_t1_e)[0];
    let second = mx.alpha2.sum()
        + 2.0 * (&mx.alpha1 * &n_t1_e)[0]
        + 2.0 * (&alpha_n * &mx.t1 * &n_t1_e)[0]
        + (&alpha_n * &mx.t2 * &e)[0];
    let eq_arrivals_mean = second / (2.0 * mean_arrivals);

    ActivePeriodMoments {
        mean_len,
        mean_arrivals,
        mean_len_arrivals,
        eq_len_mean,
        residual_arrivals_mean,
        eq_arrivals_mean,
    }
}

/// Every per-class scalar used by the waiting-time and unfinished-work formulas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamMoments {
    pub pi0: f64,
    pub pi1: Vec<f64>,
    /// Stationary probability that the stream is active.
    pub pi_on: f64,
    /// Customers per slot.
    pub lambda: f64,
    pub rho: f64,
    pub mean_h: f64,
    /// `E[H~]`.
    pub eq_mean_h: f64,
    pub active: ActivePeriodMoments,
    /// Second derivative at one of the Perron-Frobenius eigenvalue of the
    /// arrival-count generating matrix.
    pub delta2: f64,
    /// Derivative at one of the idle component of the matching right eigenvector.
    pub v0_prime: f64,
}

impl StreamMoments {
    /// `E[Lambda~] - pi_on E[C Lambda] / E[C]`, the burstiness term shared by
    /// the conservation law and both waiting-time formulas.
    pub fn burst_term(&self) -> f64 {
        self.active.eq_arrivals_mean
            - self.pi_on * self.active.mean_len_arrivals / self.active.mean_len
    }

    /// `E[Lambda(C~)] / lambda`.
    pub fn residual_ratio(&self) -> f64 {
        self.active.residual_arrivals_mean / self.lambda
    }

    /// `E[H]^2 delta2`, the class's contribution to the work eigenvalue curvature.
    pub fn work_curvature(&self) -> f64 {
        self.mean_h * self.mean_h * self.delta2
    }
}

pub fn stream_moments(stream: &ArrivalStreamSpec, service: &ServiceSpec) -> Result<StreamMoments> {
    let mx = StreamMatrices::build(stream).ok_or(Error::Singular(0))?;
    let (pi0, pi1) = split_from(stream.idle_self_prob, &mx);
    let pi_on: f64 = pi1.iter().sum();
    let active = active_from(&mx);
    let lambda = pi_on * active.mean_arrivals / active.mean_len;
    let mean_h = service.mean();
    let eq_mean_h = service.equilibrium_mean();

    let delta2 = 2.0 * lambda * active.eq_arrivals_mean
        - 2.0 * lambda * pi_on * active.mean_len_arrivals / active.mean_len
        + 2.0 * lambda * lambda * pi_on * (1.0 + active.eq_len_mean);
    let v0_prime =
        lambda * pi_on * (1.0 + active.eq_len_mean) - pi_on * active.residual_arrivals_mean;

    Ok(StreamMoments {
        pi0,
        pi1,
        pi_on,
        lambda,
        rho: lambda * mean_h,
        mean_h,
        eq_mean_h,
        active,
        delta2,
        v0_prime,
    })
}

pub(crate) fn ensure_stable(rho: f64) -> Result<()> {
    if rho.is_finite() && rho < 1.0 - STABILITY_MARGIN {
        Ok(())
    } else {
        Err(Error::Unstable {
            rho,
            margin: STABILITY_MARGIN,
        })
    }
}

/// Moments of every class of a structurally valid system (load not checked).
pub fn class_moments(system: &SystemSpec) -> Result<Vec<StreamMoments>> {
    let report = validate_system(system);
    if report.has_structural_findings() {
        return Err(Error::Invalid(report));
    }
    system
        .classes
        .iter()
        .enumerate()
        .map(|(k, c)| {
            stream_moments(&c.stream, &c.service).map_err(|e| match e {
                Error::Singular(_) => Error::Singular(k + 1),
                other => other,
            })
        })
        .collect()
}

/// Mean unfinished work over the given classes, all served by one
/// work-conserving server.
pub(crate) fn unfinished_from(classes: &[StreamMoments]) -> f64 {
    let rho: f64 = classes.iter().map(|c| c.rho).sum();
    let gap = 1.0 - rho;
    rho + classes.iter().map(|c| c.rho * c.eq_mean_h).sum::<f64>() / gap
        + classes.iter().map(|c| c.rho * (rho - c.rho)).sum::<f64>() / (2.0 * gap)
        + classes.iter().map(|c| c.work_curvature()).sum::<f64>() / (2.0 * gap)
        + classes.iter().map(|c| c.mean_h * c.v0_prime).sum::<f64>()
}

/// Right-hand side of the conservation law for `sum_k rho_k E[W_k]`, from
/// its own display rather than from the unfinished-work identity.
pub(crate) fn conservation_from(classes: &[StreamMoments]) -> f64 {
    let rho: f64 = classes.iter().map(|c| c.rho).sum();
    let gap = 1.0 - rho;
    rho * classes.iter().map(|c| c.rho * c.eq_mean_h).sum::<f64>() / gap
        + classes.iter().map(|c| c.rho * (rho - c.rho)).sum::<f64>() / (2.0 * gap)
        + classes
            .iter()
            .map(|c| c.rho * c.mean_h * c.burst_term())
            .sum::<f64>()
            / gap
        + classes
            .iter()
            .map(|c| c.pi_on * c.rho * (1.0 + c.rho / gap) * (1.0 + c.active.eq_len_mean))
            .sum::<f64>()
        - classes
            .iter()
            .map(|c| c.pi_on * c.mean_h * c.active.residual_arrivals_mean)
            .sum::<f64>()
}

/// First two factorial moments of the busy-cycle length of the queue fed
/// by the given classes.
pub(crate) fn busy_cycle_from(classes: &[StreamMoments]) -> (f64, f64) {
    let rho: f64 = classes.iter().map(|c| c.rho).sum();
    let gap = 1.0 - rho;
    let curvature: f64 = classes
        .iter()
        .map(|c| 2.0 * c.rho * c.eq_mean_h + c.rho * (rho - c.rho) + c.work_curvature())
        .sum();
    (
        1.0 / gap,
        2.0 * rho / (gap * gap) + curvature / (gap * gap * gap),
    )
}

/// Mean unfinished work in steady state.
pub fn total_unfinished_mean(system: &SystemSpec) -> Result<f64> {
    let classes = class_moments(system)?;
    ensure_stable(classes.iter().map(|c| c.rho).sum())?;
    Ok(unfinished_from(&classes))
}

/// Right-hand side of the conservation law for nonpreemptive work-conserving service.
pub fn conservation_rhs(system: &SystemSpec) -> Result<f64> {
    let classes = class_moments(system)?;
    ensure_stable(classes.iter().map(|c| c.rho).sum())?;
    Ok(conservation_from(&classes))
}

/// `(f1, f2)` for the queue fed only by classes `1..=top_k`.
pub fn busy_cycle_moments(system: &SystemSpec, top_k: usize) -> Result<(f64, f64)> {
    let k = system.num_classes();
    if top_k == 0 || top_k > k {
        return Err(Error::ClassOutOfRange(top_k, k));
    }
    let classes = class_moments(&system.truncated(top_k))?;
    ensure_stable(classes.iter().map(|c| c.rho).sum())?;
    Ok(busy_cycle_from(&classes))
}

/// Mean wait of a single-class queue, evaluated from its own closed form.
pub fn single_class_wait(stream: &ArrivalStreamSpec, service: &ServiceSpec) -> Result<f64> {
    let c = stream_moments(stream, service)?;
    ensure_stable(c.rho)?;
    Ok(single_wait_from(&c))
}

/// Mean unfinished work of a single-class queue, from its own closed form.
pub fn single_class_unfinished(stream: &ArrivalStreamSpec, service: &ServiceSpec) -> Result<f64> {
    let c = stream_moments(stream, service)?;
    ensure_stable(c.rho)?;
    Ok(single_unfinished_from(&c))
}

pub(crate) fn single_wait_from(c: &StreamMoments) -> f64 {
    let gap = 1.0 - c.rho;
    (c.rho * c.eq_mean_h + c.mean_h * c.burst_term()) / gap
        + c.pi_on * ((1.0 + c.active.eq_len_mean) / gap - c.residual_ratio())
}

pub(crate) fn single_unfinished_from(c: &StreamMoments) -> f64 {
    let gap = 1.0 - c.rho;
    c.rho
        + c.rho / gap * (c.eq_mean_h + c.mean_h * c.burst_term())
        + c.rho * c.pi_on * ((1.0 + c.active.eq_len_mean) / gap - c.residual_ratio())
}

/// System-wide aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemMoments {
    pub rho_total: f64,
    /// Cumulative loads, `rho_plus[0] = 0`, `rho_plus[k] = rho_1 + ... + rho_k`.
    pub rho_plus: Vec<f64>,
    /// Mean unfinished work `E[U]`.
    pub eu: f64,
    pub conservation_rhs: f64,
    /// Mean busy-cycle length.
    pub f1: f64,
    /// Second factorial moment of the busy-cycle length.
    pub f2: f64,
    pub per_class: Vec<StreamMoments>,
}

impl SystemMoments {
    pub fn compute(system: &SystemSpec) -> Result<Self> {
        let per_class = class_moments(system)?;
        let rho_plus = cumulative_loads(&per_class);
        let rho_total = *rho_plus.last().expect("at least one class");
        ensure_stable(rho_total)?;
        let (f1, f2) = busy_cycle_from(&per_class);
        Ok(SystemMoments {
            rho_total,
            eu: unfinished_from(&per_class),
            conservation_rhs: conservation_from(&per_class),
            f1,
            f2,
            rho_plus,
            per_class,
        })
    }
}

pub(crate) fn cumulative_loads(classes: &[StreamMoments]) -> Vec<f64> {
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(classes.iter().map(|c| {
            acc += c.rho;
            acc
        }))
        .collect()
}
