//! ICC(2,1): two-way random effects, absolute agreement, single measures.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

/// Targets (conditions) by runs. Every cell must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMatrix {
    rows: Vec<Vec<f64>>,
}

impl RunMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<RunMatrix, StatsError> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(StatsError::IncompleteMatrix);
        }
        if n < 2 {
            return Err(StatsError::TooFew { needed: 2, got: n });
        }
        if k < 2 {
            return Err(StatsError::TooFewRuns { needed: 2, got: k });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(RunMatrix { rows })
    }

    /// Builds the matrix from per-run columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<RunMatrix, StatsError> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(StatsError::IncompleteMatrix);
        }
        RunMatrix::new((0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
    }

    pub fn targets(&self) -> usize {
        self.rows.len()
    }

    pub fn runs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    /// No between-target variance; `icc` is reported as 0.
    pub degenerate: bool,
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
}

pub fn icc_2_1(matrix: &RunMatrix) -> IccResult {
    let n = matrix.targets();
    let k = matrix.runs();
    let (nf, kf) = (n as f64, k as f64);
    let grand = matrix.rows.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = matrix.rows.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| matrix.rows.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();

    let ss_rows = kf * row_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let mut ss_error = 0.0;
    for (i, row) in matrix.rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let e = v - row_means[i] - col_means[j] + grand;
            ss_error += e * e;
        }
    }
    let ms_rows = ss_rows / (nf - 1.0);
    let ms_cols = ss_cols / (kf - 1.0);
    let ms_error = ss_error / ((nf - 1.0) * (kf - 1.0));

    let denom = ms_rows + (kf - 1.0) * ms_error + (kf / nf) * (ms_cols - ms_error);
    let scale = grand.abs().max(1.0);
    let degenerate = ms_rows <= 1e-24 * scale * scale || denom <= 0.0;
    let icc = if degenerate { 0.0 } else { (ms_rows - ms_error) / denom };
    IccResult {
        icc,
        degenerate,
        ms_rows,
        ms_cols,
        ms_error,
    }
}
