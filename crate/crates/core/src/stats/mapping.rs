//! First- and third-order polynomial mapping between two score sets.
//!
//! The fit is ordinary least squares solved with a Householder QR of the
//! Vandermonde matrix. Third-order maps are not constrained to be monotone.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::correlation::rmse;
use crate::error::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingModel {
    pub order: usize,
    /// Coefficients in ascending powers: `c0 + c1 x + c2 x^2 + ...`.
    pub coefficients: Vec<f64>,
    pub fit_rmse: f64,
}

impl MappingModel {
    pub fn apply(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn apply_all(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.apply(*v)).collect()
    }
}

/// Least-squares polynomial of `order` (1 or 3) mapping `x` onto `y`.
pub fn fit_mapping(x: &[f64], y: &[f64], order: usize) -> Result<MappingModel, StatsError> {
    if order != 1 && order != 3 {
        return Err(StatsError::MappingOrder(order));
    }
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let p = order + 1;
    if x.len() < p {
        return Err(StatsError::TooFew {
            needed: p,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut distinct: Vec<f64> = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < p {
        return Err(StatsError::RankDeficient);
    }

    let coefficients = least_squares(x, y, p)?;
    let model = MappingModel {
        order,
        coefficients,
        fit_rmse: 0.0,
    };
    let fit_rmse = rmse(&model.apply_all(x), y)?;
    Ok(MappingModel { fit_rmse, ..model })
}

fn least_squares(x: &[f64], y: &[f64], p: usize) -> Result<Vec<f64>, StatsError> {
    let n = x.len();
    // column-major Vandermonde
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|j| x.iter().map(|v| libm::pow(*v, j as f64)).collect())
        .collect();
    let mut b = y.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));

    for k in 0..p {
        let norm = libm::sqrt(a[k][k..].iter().map(|v| v * v).sum());
        if norm <= 1e-12 * scale.max(1.0) {
            return Err(StatsError::RankDeficient);
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(k) {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(s, t)| s * t).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[k..]).map(|(s, t)| s * t).sum();
        let f = 2.0 * dot / vnorm2;
        for (c, vi) in b[k..].iter_mut().zip(&v) {
            *c -= f * vi;
        }
    }
    debug_assert!(n >= p);

    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = b[i];
        for j in i + 1..p {
            s -= a[j][i] * coef[j];
        }
        let d = a[i][i];
        if libm::fabs(d) <= 1e-12 * scale.max(1.0) {
            return Err(StatsError::RankDeficient);
        }
        coef[i] = s / d;
    }
    Ok(coef)
}
