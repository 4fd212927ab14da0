//! Two-factor ANOVA without replication.
//!
//! Rows are the factor under test (technologies), columns the blocking
//! levels (criteria). Each cell holds exactly one observation, so there is
//! no interaction term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{f_critical, f_sf, SpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnovaError {
    #[error("need at least 2 rows and 2 columns, got {rows}x{cols}")]
    Dimensions { rows: usize, cols: usize },
    #[error("row {0} has a different length")]
    Ragged(usize),
    #[error("cell ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// How an F ratio was obtained when the residual variance vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// Residual and numerator both zero: F = 0, p = 1.
    NoVariation,
    /// Residual zero, numerator positive: F = +inf, p = 0.
    ExactFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: usize,
    pub cols: usize,
    pub ss_rows: f64,
    pub ss_cols: f64,
    pub ss_error: f64,
    pub ss_total: f64,
    pub df_rows: usize,
    pub df_cols: usize,
    pub df_error: usize,
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
    /// `+inf` when flagged [`Degeneracy::ExactFit`]; serialized as `null`.
    #[serde(with = "f_ratio")]
    pub f_rows: f64,
    #[serde(with = "f_ratio")]
    pub f_cols: f64,
    pub p_rows: f64,
    pub p_cols: f64,
    pub degenerate_rows: Option<Degeneracy>,
    pub degenerate_cols: Option<Degeneracy>,
}

mod f_ratio {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaDecision {
    pub alpha: f64,
    pub reject_rows: bool,
    pub f_critical_rows: f64,
    pub reject_cols: bool,
    pub f_critical_cols: f64,
}

/// Order-independent sum: sort, then compensated accumulation. Gives
/// bit-identical results for any permutation of the same values.
fn stable_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values.iter() {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn f_test(
    ss: f64,
    df: usize,
    ms_error: f64,
    df_error: usize,
    residual_zero: bool,
    ss_zero: bool,
) -> Result<(f64, f64, Option<Degeneracy>), AnovaError> {
    if residual_zero {
        return Ok(if ss_zero {
            (0.0, 1.0, Some(Degeneracy::NoVariation))
        } else {
            (f64::INFINITY, 0.0, Some(Degeneracy::ExactFit))
        });
    }
    let f = (ss / df as f64) / ms_error;
    let p = f_sf(f, df as f64, df_error as f64)?;
    Ok((f, p, None))
}

pub fn anova_two_factor_no_rep(grid: &[Vec<f64>]) -> Result<AnovaTable, AnovaError> {
    let r = grid.len();
    let c = grid.first().map(Vec::len).unwrap_or(0);
    for (i, row) in grid.iter().enumerate() {
        if row.len() != c {
            return Err(AnovaError::Ragged(i));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(AnovaError::NonFinite { row: i, col: j });
        }
    }
    if r < 2 || c < 2 {
        return Err(AnovaError::Dimensions { rows: r, cols: c });
    }

    let row_means: Vec<f64> = grid
        .iter()
        .map(|row| stable_sum(&mut row.clone()) / c as f64)
        .collect();
    let col_means: Vec<f64> = (0..c)
        .map(|j| stable_sum(&mut grid.iter().map(|row| row[j]).collect::<Vec<_>>()) / r as f64)
        .collect();
    let mut cells: Vec<f64> = grid.iter().flatten().copied().collect();
    let grand = stable_sum(&mut cells.clone()) / (r * c) as f64;

    let ss_rows = c as f64
        * stable_sum(
            &mut row_means
                .iter()
                .map(|m| (m - grand).powi(2))
                .collect::<Vec<_>>(),
        );
    let ss_cols = r as f64
        * stable_sum(
            &mut col_means
                .iter()
                .map(|m| (m - grand).powi(2))
                .collect::<Vec<_>>(),
        );
    let mut residuals: Vec<f64> = Vec::with_capacity(r * c);
    for (i, row) in grid.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            residuals.push((x - (row_means[i] + col_means[j]) + grand).powi(2));
        }
    }
    let ss_error = stable_sum(&mut residuals);
    let ss_total = stable_sum(
        &mut cells
            .iter_mut()
            .map(|x| (*x - grand).powi(2))
            .collect::<Vec<_>>(),
    );

    // Rounding leaves ~eps²·x² of spurious variation in constant data.
    let scale = stable_sum(&mut grid.iter().flatten().map(|x| x * x).collect::<Vec<_>>());
    let zero_tol = 1e-20 * scale;
    let clean = |ss: f64| if ss <= zero_tol { 0.0 } else { ss };
    let (ss_rows, ss_cols, ss_error, ss_total) = (
        clean(ss_rows),
        clean(ss_cols),
        clean(ss_error),
        clean(ss_total),
    );

    let df_rows = r - 1;
    let df_cols = c - 1;
    let df_error = df_rows * df_cols;
    let ms_rows = ss_rows / df_rows as f64;
    let ms_cols = ss_cols / df_cols as f64;
    let ms_error = ss_error / df_error as f64;
    let residual_zero = ss_error == 0.0;

    let (f_rows, p_rows, degenerate_rows) = f_test(
        ss_rows,
        df_rows,
        ms_error,
        df_error,
        residual_zero,
        ss_rows == 0.0,
    )?;
    let (f_cols, p_cols, degenerate_cols) = f_test(
        ss_cols,
        df_cols,
        ms_error,
        df_error,
        residual_zero,
        ss_cols == 0.0,
    )?;

    Ok(AnovaTable {
        rows: r,
        cols: c,
        ss_rows,
        ss_cols,
        ss_error,
        ss_total,
        df_rows,
        df_cols,
        df_error,
        ms_rows,
        ms_cols,
        ms_error,
        f_rows,
        f_cols,
        p_rows,
        p_cols,
        degenerate_rows,
        degenerate_cols,
    })
}

/// Upper-tail F test of both factors at `alpha`.
pub fn decide(table: &AnovaTable, alpha: f64) -> Result<AnovaDecision, AnovaError> {
    let df_e = table.df_error as f64;
    Ok(AnovaDecision {
        alpha,
        reject_rows: table.p_rows < alpha,
        f_critical_rows: f_critical(alpha, table.df_rows as f64, df_e)?,
        reject_cols: table.p_cols < alpha,
        f_critical_cols: f_critical(alpha, table.df_cols as f64, df_e)?,
    })
}
