//! Exact mean-value analysis and slot-level simulation of discrete-time
//! multi-class priority queues.
//!
//! Each class is fed by its own batch Markovian arrival stream whose idle
//! periods are geometric, and brings customers with a general integer
//! service-time law. One server does one unit of work per slot. The crate
//! evaluates closed forms for mean unfinished work, the conservation law,
//! busy-cycle factorial moments, and per-class mean waits, delays and
//! unfinished work under preemptive-resume and nonpreemptive priority, and
//! checks all of them against a simulator of the same model.
//!
//! ```
//! use prioq::{build_iid_stream, Pmf, PriorityModel, ServiceSpec, SystemSpec};
//!
//! let sys = SystemSpec::from_pairs(vec![
//!     (build_iid_stream(&Pmf::bernoulli(0.2)?)?, ServiceSpec::deterministic(1)?),
//!     (build_iid_stream(&Pmf::bernoulli(0.25)?)?, ServiceSpec::deterministic(2)?),
//! ]);
//! let model = PriorityModel::new(&sys)?;
//! assert!((model.w_pr_mean(2)? - 41.0 / 24.0).abs() < 1e-12);
//! # Ok::<(), prioq::Error>(())
//! ```

pub mod analytic;
pub mod crosscheck;
pub mod error;
pub mod format;
pub mod model;
pub mod pmf;
pub mod priority;
pub mod sim;
pub mod special;
pub mod validate;

pub use analytic::{
    active_period_moments, busy_cycle_moments, conservation_rhs, single_class_unfinished,
    single_class_wait, stationary_split, stream_moments, total_unfinished_mean,
    ActivePeriodMoments, StreamMoments, SystemMoments,
};
pub use error::{Error, Result};
pub use format::{load_model, parse_model};
pub use model::{
    build_iid_active_stream, build_iid_stream, build_on_off_stream, ArrivalStreamSpec, ClassSpec,
    ServiceSpec, SystemSpec, TransitionEntry,
};
pub use pmf::{equilibrium_mean, factorial_moment, Pmf};
pub use priority::{ClassReport, PriorityModel, SystemReport};
pub use sim::{estimate, Discipline, Metric, SimConfig, SimEstimate};
pub use special::{special_case_report, SpecialCase};
pub use validate::{validate_system, ValidationReport};
