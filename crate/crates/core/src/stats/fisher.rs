use serde::{Deserialize, Serialize};

use crate::dist::{normal_cdf, normal_quantile};
use crate::error::StatsError;

/// Outcome of comparing two independent correlation coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherZ {
    pub z_stat: f64,
    pub p_value: f64,
    pub critical: f64,
    pub significant: bool,
}

/// Two-tailed test of `r1 != r2` via the Fisher transform, with `n1`, `n2`
/// the number of paired observations behind each coefficient.
pub fn fisher_z_test(r1: f64, n1: usize, r2: f64, n2: usize, alpha: f64) -> Result<FisherZ, StatsError> {
    for r in [r1, r2] {
        if !r.is_finite() {
            return Err(StatsError::NonFinite);
        }
        if r.abs() >= 1.0 {
            return Err(StatsError::UnitCorrelation(r));
        }
    }
    for n in [n1, n2] {
        if n < 4 {
            return Err(StatsError::TooFew { needed: 4, got: n });
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Alpha(alpha));
    }
    let se = libm::sqrt(1.0 / (n1 - 3) as f64 + 1.0 / (n2 - 3) as f64);
    let z_stat = (libm::atanh(r1) - libm::atanh(r2)) / se;
    let critical = normal_quantile(1.0 - alpha / 2.0);
    let p_value = 2.0 * normal_cdf(-z_stat.abs());
    Ok(FisherZ {
        z_stat,
        p_value,
        critical,
        significant: z_stat.abs() > critical,
    })
}
