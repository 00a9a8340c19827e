//! Finite-support probability mass functions on the nonnegative integers.
//!
//! Batch-size laws and service-time laws are both stored as a `Pmf`. Every
//! closed form downstream needs only the first two factorial moments, so
//! infinite families enter through a truncating constructor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a mass function.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Tail mass below which infinite-support families are cut off.
pub const TRUNCATION_TAIL: f64 = 1e-14;

/// A probability mass function with explicit, strictly increasing support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfDoc", into = "PmfDoc")]
pub struct Pmf {
    values: Vec<u64>,
    probs: Vec<f64>,
}

/// Wire form used in model files: `{"values": [...], "probs": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmfDoc {
    pub values: Vec<u64>,
    pub probs: Vec<f64>,
}

impl TryFrom<PmfDoc> for Pmf {
    type Error = Error;

    fn try_from(doc: PmfDoc) -> Result<Self> {
        Pmf::new(doc.values, doc.probs)
    }
}

impl From<Pmf> for PmfDoc {
    fn from(pmf: Pmf) -> Self {
        PmfDoc {
            values: pmf.values,
            probs: pmf.probs,
        }
    }
}

impl Pmf {
    pub fn new(values: Vec<u64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::InvalidPmf(format!(
                "{} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        if let Some(w) = values.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPmf(format!(
                "support values must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(p) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::InvalidPmf(format!("probability {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Pmf { values, probs })
    }

    /// Builds from `(value, probability)` pairs.
    pub fn from_pairs(pairs: &[(u64, f64)]) -> Result<Self> {
        Pmf::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    pub fn point(value: u64) -> Self {
        Pmf {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    /// Bernoulli law on {0, 1} with success probability `q`.
    pub fn bernoulli(q: f64) -> Result<Self> {
        Pmf::new(vec![0, 1], vec![1.0 - q, q])
    }

    /// Uniform law on `lo..=hi`.
    pub fn uniform(lo: u64, hi: u64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidPmf(format!("empty range {lo}..={hi}")));
        }
        let n = (hi - lo + 1) as f64;
        Pmf::new((lo..=hi).collect(), vec![1.0 / n; (hi - lo + 1) as usize])
    }

    /// Geometric law on `{start, start+1, ...}` with `Pr(start + n) = (1 - ratio) ratio^n`,
    /// cut where the remaining tail mass drops below [`TRUNCATION_TAIL`] and renormalized.
    pub fn geometric(start: u64, ratio: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidPmf(format!(
                "geometric ratio {ratio} outside [0, 1)"
            )));
        }
        let mut values = Vec::new();
        let mut probs = Vec::new();
        let mut mass = 1.0 - ratio;
        let mut tail = 1.0;
        let mut v = start;
        loop {
            values.push(v);
            probs.push(mass);
            tail -= mass;
            if tail < TRUNCATION_TAIL || mass == 0.0 {
                break;
            }
            mass *= ratio;
            v += 1;
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Pmf::new(values, probs)
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    /// Smallest support value carrying positive mass.
    pub fn min_value(&self) -> u64 {
        self.iter()
            .find(|(_, p)| *p > 0.0)
            .map(|(v, _)| v)
            .unwrap_or(self.values[0])
    }

    pub fn max_value(&self) -> u64 {
        *self.values.last().expect("support is non-empty")
    }

    pub fn mass_at(&self, value: u64) -> f64 {
        match self.values.binary_search(&value) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(v, p)| v as f64 * p).sum()
    }

    /// `E[V]` for order 1, `E[V(V-1)]` for order 2.
    pub fn factorial_moment(&self, order: u32) -> Result<f64> {
        match order {
            1 => Ok(self.mean()),
            2 => Ok(self
                .iter()
                .map(|(v, p)| {
                    let v = v as f64;
                    v * (v - 1.0) * p
                })
                .sum()),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    /// Mean of the equilibrium (forward-recurrence) variable, `E[F(F-1)] / (2 E[F])`.
    pub fn equilibrium_mean(&self) -> Result<f64> {
        let mean = self.mean();
        if mean <= 0.0 {
            return Err(Error::Degenerate(
                "equilibrium mean of a law with zero mean".into(),
            ));
        }
        Ok(self.factorial_moment(2)? / (2.0 * mean))
    }

    /// Law of `V` given `V >= 1`.
    pub fn conditional_positive(&self) -> Result<Pmf> {
        let zero = self.mass_at(0);
        if zero >= 1.0 {
            return Err(Error::Degenerate("no mass on positive values".into()));
        }
        let (values, probs): (Vec<u64>, Vec<f64>) = self
            .iter()
            .filter(|(v, _)| *v >= 1)
            .map(|(v, p)| (v, p / (1.0 - zero)))
            .unzip();
        let total: f64 = probs.iter().sum();
        Pmf::new(values, probs.into_iter().map(|p| p / total).collect())
    }

    /// Total-variation distance to another mass function.
    pub fn total_variation(&self, other: &Pmf) -> f64 {
        let mut support: Vec<u64> = self
            .values
            .iter()
            .chain(other.values.iter())
            .copied()
            .collect();
        support.sort_unstable();
        support.dedup();
        0.5 * support
            .into_iter()
            .map(|v| (self.mass_at(v) - other.mass_at(v)).abs())
            .sum::<f64>()
    }
}

/// Free-function form of [`Pmf::factorial_moment`].
pub fn factorial_moment(pmf: &Pmf, order: u32) -> Result<f64> {
    pmf.factorial_moment(order)
}

/// Free-function form of [`Pmf::equilibrium_mean`].
pub fn equilibrium_mean(pmf: &Pmf) -> Result<f64> {
    pmf.equilibrium_mean()
}
