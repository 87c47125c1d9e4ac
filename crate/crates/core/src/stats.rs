//! Covariate linear model and per-covariate F tests for emphysema scores.
//!
//! The model is `score ~ b0 + b1*age + b2*sex + b3*smoking + b4*vendor + e`,
//! fit by QR least squares. The ANOVA is Type II: each covariate's F
//! statistic compares the full model against the model with that single
//! column dropped,
//! `F = ((rss_reduced - rss_full)/q) / (rss_full/(n - p))` with `q = 1`.
//! P-values come from the F survival function evaluated through the
//! regularized incomplete beta function.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantify::EmphysemaRecord;

/// Covariates in the reporting order of the study's summary table.
pub const COVARIATES: [&str; 4] = ["vendor", "age", "sex", "smoking"];
/// Column order of the design matrix (intercept first).
const DESIGN_ORDER: [&str; 4] = ["age", "sex", "smoking", "vendor"];

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub covariate: String,
    pub f_statistic: f64,
    pub p_value: f64,
    /// p < 0.05.
    pub significant: bool,
}

/// Fitted model: coefficients (intercept, age, sex, smoking, vendor),
/// residuals, fit diagnostics and the per-covariate ANOVA table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionResult {
    /// `[b0, b_age, b_sex, b_smoking, b_vendor]`.
    pub beta: [f64; 5],
    pub std_errors: [f64; 5],
    pub residuals: Vec<f64>,
    pub n: usize,
    pub rss: f64,
    pub anova: Vec<AnovaRow>,
}

impl RegressionResult {
    pub fn anova_row(&self, covariate: &str) -> Option<&AnovaRow> {
        self.anova.iter().find(|r| r.covariate == covariate)
    }
}

fn design_matrix(records: &[EmphysemaRecord], drop: Option<usize>) -> DMatrix<f64> {
    let n = records.len();
    let keep: Vec<usize> = (0..4).filter(|i| Some(*i) != drop).collect();
    let mut x = DMatrix::zeros(n, 1 + keep.len());
    for (row, r) in records.iter().enumerate() {
        x[(row, 0)] = 1.0;
        let values = [r.age, r.sex as f64, r.smoking as f64, r.vendor as f64];
        for (col, &i) in keep.iter().enumerate() {
            x[(row, col + 1)] = values[i];
        }
    }
    x
}

fn solve_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    // Thin QR least squares: beta = R^{-1} Q' y.
    let qr = x.clone().qr();
    let r = qr.r();
    // Guard against rank deficiency the column checks did not already name.
    let max_diag = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].abs())
        .fold(0.0f64, f64::max);
    for i in 0..r.ncols() {
        if r[(i, i)].abs() <= max_diag * 1e-12 {
            return Err(Error::Collinear(format!("design column {i}")));
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinear("design matrix".into()))?;
    let fitted = x * &beta;
    let residuals = y - &fitted;
    let rss = residuals.dot(&residuals);
    Ok((beta, residuals, rss))
}

/// F survival function via the regularized incomplete beta function:
/// `P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)`.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::Stats(format!(
            "degenerate degrees of freedom: d1={d1}, d2={d2}"
        )));
    }
    if f <= 0.0 {
        return Ok(1.0);
    }
    let x = d2 / (d2 + d1 * f);
    Ok(statrs::function::beta::beta_reg(d2 / 2.0, d1 / 2.0, x).clamp(0.0, 1.0))
}

fn check_zero_variance(records: &[EmphysemaRecord]) -> Result<()> {
    let column = |name: &str, f: &dyn Fn(&EmphysemaRecord) -> f64| -> Result<()> {
        let first = f(&records[0]);
        if records.iter().all(|r| f(r) == first) {
            return Err(Error::Collinear(name.to_string()));
        }
        Ok(())
    };
    column("age", &|r| r.age)?;
    column("sex", &|r| r.sex as f64)?;
    column("smoking", &|r| r.smoking as f64)?;
    column("vendor", &|r| r.vendor as f64)?;
    Ok(())
}

/// Ordinary-least-squares fit of the five-parameter covariate model,
/// including the Type II ANOVA table.
pub fn fit_linear_model(records: &[EmphysemaRecord]) -> Result<RegressionResult> {
    let n = records.len();
    let p = 5usize;
    if n < p + 1 {
        return Err(Error::Stats(format!(
            "need at least {} records to fit 5 parameters, got {n}",
            p + 1
        )));
    }
    for r in records {
        if !r.score.is_finite() || !r.age.is_finite() {
            return Err(Error::Stats(format!(
                "non-finite score/age for subject `{}`",
                r.subject_id
            )));
        }
    }
    // Constant columns are rejected, never silently dropped.
    check_zero_variance(records)?;

    let y = DVector::from_iterator(n, records.iter().map(|r| r.score));
    let x_full = design_matrix(records, None);
    let (beta, residuals, rss_full) = solve_ols(&x_full, &y).map_err(|e| match e {
        // Map anonymous column indices onto covariate names.
        Error::Collinear(c) => {
            let name = c
                .strip_prefix("design column ")
                .and_then(|i| i.parse::<usize>().ok())
                .and_then(|i| i.checked_sub(1))
                .map(|i| DESIGN_ORDER[i].to_string())
                .unwrap_or(c);
            Error::Collinear(name)
        }
        other => other,
    })?;

    let dof = (n - p) as f64;
    let sigma2 = rss_full / dof;
    // Standard errors from (X'X)^{-1} via the R factor.
    let xtx = x_full.transpose() * &x_full;
    let xtx_inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Collinear("design matrix".into()))?;
    let mut std_errors = [0.0f64; 5];
    for i in 0..p {
        std_errors[i] = (sigma2 * xtx_inv[(i, i)]).sqrt();
    }

    // Type II: drop one covariate at a time.
    let mut anova = Vec::with_capacity(4);
    for name in COVARIATES {
        let drop_idx = DESIGN_ORDER.iter().position(|&d| d == name).expect("known covariate");
        let x_red = design_matrix(records, Some(drop_idx));
        let (_, _, rss_red) = solve_ols(&x_red, &y)?;
        let q = 1.0;
        let f_stat = ((rss_red - rss_full) / q) / (rss_full / dof);
        let f_stat = f_stat.max(0.0);
        let p_value = f_survival(f_stat, q, dof)?;
        anova.push(AnovaRow {
            covariate: name.to_string(),
            f_statistic: f_stat,
            p_value,
            significant: p_value < SIGNIFICANCE_LEVEL,
        });
    }

    Ok(RegressionResult {
        beta: [beta[0], beta[1], beta[2], beta[3], beta[4]],
        std_errors,
        residuals: residuals.iter().copied().collect(),
        n,
        rss: rss_full,
        anova,
    })
}

/// Side-by-side ANOVA of two conditions (e.g. before/after harmonization)
/// in the study's table layout.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionComparison {
    pub covariate: String,
    pub p_before: f64,
    pub p_after: f64,
}

pub fn compare_conditions(before: &RegressionResult, after: &RegressionResult) -> Vec<ConditionComparison> {
    COVARIATES
        .iter()
        .map(|&name| ConditionComparison {
            covariate: name.to_string(),
            p_before: before.anova_row(name).map_or(f64::NAN, |r| r.p_value),
            p_after: after.anova_row(name).map_or(f64::NAN, |r| r.p_value),
        })
        .collect()
}

/// Renders the comparison as a fixed-width text table.
pub fn render_comparison(rows: &[ConditionComparison]) -> String {
    let fmt_p = |p: f64| {
        if p < 0.001 {
            "p < 0.001".to_string()
        } else {
            format!("p = {p:.3}")
        }
    };
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<22} {:<22}\n",
        "Parameters", "Before harmonization", "After harmonization"
    ));
    for row in rows {
        let label = match row.covariate.as_str() {
            "smoking" => "Smoking status",
            "vendor" => "Vendor",
            "age" => "Age",
            "sex" => "Sex",
            other => other,
        };
        out.push_str(&format!(
            "{:<16} {:<22} {:<22}\n",
            label,
            fmt_p(row.p_before),
            fmt_p(row.p_after)
        ));
    }
    out
}
