use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::linalg::{check_full_rank, cluster_meat, matrix_from_columns, ols, to_rows};
use super::panel::{estimation_sample, FixedEffect, PanelDataset, RegressionSpec, Sample};
use super::{Coefficient, Diagnostics, Estimator, FitResult};
use crate::{Error, Result};

/// Alternating demeaning stops once no group mean exceeds this, relative
/// to the column's largest absolute value.
pub const DEMEAN_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;

/// Estimation sample after the within transformation.
pub(crate) struct Within {
    pub sample: Sample,
    /// Transformed columns in `RegressionSpec::used_columns()` order.
    pub columns: Vec<Vec<f64>>,
    /// Σx² of each untransformed column, the scale for rank checks.
    pub raw_ss: Vec<f64>,
    /// No fixed effects: an explicit intercept is needed.
    pub intercept: bool,
    /// Number of parameters absorbed by the fixed effects.
    pub absorbed: usize,
    pub sweeps: usize,
}

fn demean_column(v: &mut [f64], groups: &[(&[usize], usize)]) -> Result<usize> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(0);
    }
    let counts: Vec<Vec<f64>> = groups
        .iter()
        .map(|(g, k)| {
            let mut c = alloc::vec![0.0; *k];
            g.iter().for_each(|&i| c[i] += 1.0);
            c
        })
        .collect();
    for sweep in 1..=MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for ((g, k), cnt) in groups.iter().zip(&counts) {
            let mut sums = alloc::vec![0.0; *k];
            for (x, &gi) in v.iter().zip(g.iter()) {
                sums[gi] += x;
            }
            for (s, c) in sums.iter_mut().zip(cnt) {
                *s /= c;
                max_change = max_change.max(s.abs());
            }
            for (x, &gi) in v.iter_mut().zip(g.iter()) {
                *x -= sums[gi];
            }
        }
        if groups.len() == 1 || max_change < DEMEAN_TOL * scale {
            return Ok(sweep);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
        objective: f64::NAN,
    })
}

pub(crate) fn within(spec: &RegressionSpec, data: &PanelDataset) -> Result<Within> {
    let sample = estimation_sample(spec, data)?;
    if sample.rows.is_empty() {
        return Err(Error::invalid("estimation sample is empty"));
    }
    let raw_ss = sample
        .columns
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum())
        .collect();
    let mut groups: Vec<(&[usize], usize)> = Vec::new();
    if spec.has_fe(FixedEffect::Firm) {
        groups.push((&sample.firm, sample.n_firms));
    }
    if spec.has_fe(FixedEffect::Year) {
        groups.push((&sample.year, sample.n_years));
    }
    let absorbed = match groups.len() {
        0 => 0,
        1 => groups[0].1,
        // One restriction links the two sets of effects (connected panel).
        _ => sample.n_firms + sample.n_years - 1,
    };
    let mut columns = sample.columns.clone();
    let mut sweeps = 0;
    if !groups.is_empty() {
        for c in &mut columns {
            sweeps = sweeps.max(demean_column(c, &groups)?);
        }
    }
    Ok(Within {
        intercept: groups.is_empty(),
        sample,
        columns,
        raw_ss,
        absorbed,
        sweeps,
    })
}

/// Finite-sample factor for firm-clustered covariance.
pub(crate) fn cluster_factor(g: usize, n: usize, k: usize) -> f64 {
    let (g, n, k) = (g as f64, n as f64, k as f64);
    (g / (g - 1.0)) * ((n - 1.0) / (n - k))
}

/// Sandwich or classical covariance plus the t reference df.
pub(crate) fn covariance(
    spec: &RegressionSpec,
    w: &Within,
    x: &DMatrix<f64>,
    u: &DVector<f64>,
    bread: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64, Option<usize>)> {
    let n = x.nrows();
    let k = x.ncols();
    let df_resid = n as f64 - k as f64 - w.absorbed as f64;
    if df_resid <= 0.0 {
        return Err(Error::invalid("no residual degrees of freedom"));
    }
    match spec.cluster {
        Some(_) => {
            let g = w.sample.n_firms;
            if g < 2 {
                return Err(Error::invalid("clustered covariance needs at least two clusters"));
            }
            let meat = cluster_meat(x, u, &w.sample.firm, g);
            let v = bread * meat * bread * cluster_factor(g, n, k);
            Ok((v, (g - 1) as f64, Some(g)))
        }
        None => {
            let sigma2 = u.dot(u) / df_resid;
            Ok((bread * sigma2, df_resid, None))
        }
    }
}

pub(crate) fn coefficients(names: &[String], beta: &DVector<f64>, v: &DMatrix<f64>, df: f64) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient::new(name.clone(), beta[j], libm::sqrt(v[(j, j)].max(0.0)), df))
        .collect()
}

pub(crate) fn total_ss(y: &[f64], centered: bool) -> f64 {
    let mean = if centered {
        y.iter().sum::<f64>() / y.len() as f64
    } else {
        0.0
    };
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Fixed-effects OLS.
///
/// Firm and/or year effects are swept out by alternating demeaning; without
/// fixed effects an intercept `_cons` is added. Covariance is clustered by
/// firm when the spec asks for it, classical otherwise.
pub fn fit_fe_ols(spec: &RegressionSpec, data: &PanelDataset) -> Result<FitResult> {
    if spec.endogenous.is_some() {
        return Err(Error::invalid("specification has an endogenous regressor; use 2SLS"));
    }
    let w = within(spec, data)?;
    let n = w.sample.rows.len();
    let ones = alloc::vec![1.0; n];
    let mut names = spec.regressors.clone();
    let mut cols: Vec<&[f64]> = w.columns[1..].iter().map(Vec::as_slice).collect();
    let mut refs: Vec<f64> = w.raw_ss[1..].to_vec();
    if w.intercept {
        names.insert(0, String::from("_cons"));
        cols.insert(0, &ones);
        refs.insert(0, n as f64);
    }
    if cols.is_empty() {
        return Err(Error::invalid("no regressors"));
    }
    check_full_rank(&cols, &refs, &names)?;
    let x = matrix_from_columns(n, &cols);
    let y = DVector::from_column_slice(&w.columns[0]);
    let (beta, bread) = ols(&x, &y)?;
    let u = &y - &x * &beta;
    let (v, df, n_clusters) = covariance(spec, &w, &x, &u, &bread)?;
    let sst = total_ss(&w.columns[0], w.intercept);
    Ok(FitResult {
        estimator: Estimator::FeOls,
        dependent: spec.dependent.clone(),
        coefficients: coefficients(&names, &beta, &v, df),
        covariance: to_rows(&v),
        n_obs: n,
        n_clusters,
        df,
        r2_within: if sst > 0.0 { 1.0 - u.dot(&u) / sst } else { f64::NAN },
        tau: None,
        diagnostics: Diagnostics {
            demean_sweeps: w.sweeps,
            ..Diagnostics::default()
        },
    })
}
