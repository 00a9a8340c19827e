use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Between-replication point estimate with a Student-t interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    pub mean: f64,
    /// Half-width of the 95% confidence interval; `None` with one replication.
    pub half_width_95: Option<f64>,
    /// Standard error of the mean; `None` with one replication.
    pub std_error: Option<f64>,
    pub replications: usize,
    pub values: Vec<f64>,
}

impl SimEstimate {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let (std_error, half_width_95) = if n >= 2 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975);
            (Some(se), Some(t * se))
        } else {
            (None, None)
        };
        SimEstimate {
            mean,
            half_width_95,
            std_error,
            replications: n,
            values,
        }
    }

    /// `|mean - value| <= max(3 SE, 1e-9)`.
    pub fn covers(&self, value: f64) -> bool {
        let tol = self.std_error.map_or(0.0, |se| 3.0 * se).max(1e-9);
        (self.mean - value).abs() <= tol
    }

    /// Distance to `value` in standard errors (infinite if SE is zero or missing).
    pub fn z_score(&self, value: f64) -> f64 {
        let gap = (self.mean - value).abs();
        match self.std_error {
            Some(se) if se > 0.0 => gap / se,
            _ if gap <= 1e-9 => 0.0,
            _ => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_values() {
        let e = SimEstimate::from_values(vec![1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.std_error.unwrap() - 1.0).abs() < 1e-15);
        // t_{0.975, 1} = 12.706
        assert!((e.half_width_95.unwrap() - 12.7062047).abs() < 1e-6);
        assert!(e.covers(4.9));
        assert!(!e.covers(5.1));
    }

    #[test]
    fn single_replication_has_no_interval() {
        let e = SimEstimate::from_values(vec![0.5]);
        assert_eq!(e.half_width_95, None);
        assert!(e.covers(0.5));
        assert!(!e.covers(0.6));
    }
}
