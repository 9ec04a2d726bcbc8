use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::fe::{cluster_factor, coefficients, covariance, total_ss, within};
use super::linalg::{check_full_rank, cluster_meat, hetero_meat, matrix_from_columns, ols, spd_inverse, to_rows};
use super::panel::{PanelDataset, RegressionSpec};
use super::{Diagnostics, Estimator, FitResult};
use crate::{Error, Result};

/// Rule-of-thumb cutoff below which instruments are reported as weak.
pub const WEAK_F_THRESHOLD: f64 = 10.0;

/// Residual maker for the columns of `x1`: v ↦ v − X1 (X1'X1)⁻¹ X1'v.
fn partial_out(x1: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x1.ncols() == 0 {
        return Ok(v.clone());
    }
    let inv = spd_inverse(&(x1.transpose() * x1), "exogenous regressors")?;
    Ok(v - x1 * (inv * (x1.transpose() * v)))
}

/// Two-stage least squares for one endogenous regressor.
///
/// Fixed effects are swept out of every variable first. The second-stage
/// residuals use the observed endogenous column. Diagnostics:
/// - first-stage F on the excluded instruments (classical);
/// - Cragg-Donald Wald F from the canonical correlation between the
///   endogenous regressor and the instruments, both net of the exogenous
///   regressors;
/// - Kleibergen-Paap rk Wald F, the robust Wald test on the excluded
///   instruments divided by their number (firm-clustered when the spec
///   clusters, heteroskedasticity-robust otherwise).
pub fn fit_2sls(spec: &RegressionSpec, data: &PanelDataset) -> Result<FitResult> {
    let endog = spec
        .endogenous
        .clone()
        .ok_or_else(|| Error::invalid("2SLS needs an endogenous regressor"))?;
    let w = within(spec, data)?;
    let n = w.sample.rows.len();
    let k1 = spec.regressors.len();
    let l2 = spec.instruments.len();
    let ones = alloc::vec![1.0; n];

    let mut x1_names: Vec<String> = spec.regressors.clone();
    let mut x1_cols: Vec<&[f64]> = w.columns[1..=k1].iter().map(Vec::as_slice).collect();
    let mut x1_refs: Vec<f64> = w.raw_ss[1..=k1].to_vec();
    if w.intercept {
        x1_names.insert(0, String::from("_cons"));
        x1_cols.insert(0, &ones);
        x1_refs.insert(0, n as f64);
    }
    let x2_col = &w.columns[k1 + 1];
    let z_cols: Vec<&[f64]> = w.columns[k1 + 2..].iter().map(Vec::as_slice).collect();

    let mut names: Vec<String> = x1_names.clone();
    names.push(endog.clone());
    let mut cols = x1_cols.clone();
    cols.push(x2_col);
    let mut refs = x1_refs.clone();
    refs.push(w.raw_ss[k1 + 1]);
    check_full_rank(&cols, &refs, &names)?;

    let mut names_z = x1_names.clone();
    names_z.extend(spec.instruments.iter().cloned());
    let mut cols_z = x1_cols.clone();
    cols_z.extend(z_cols.iter().copied());
    let mut refs_z = x1_refs.clone();
    refs_z.extend_from_slice(&w.raw_ss[k1 + 2..]);
    check_full_rank(&cols_z, &refs_z, &names_z)?;

    let x1 = matrix_from_columns(n, &x1_cols);
    let x2 = DVector::from_column_slice(x2_col);
    let z2 = matrix_from_columns(n, &z_cols);
    let x2p: DVector<f64> = partial_out(&x1, &DMatrix::from_column_slice(n, 1, x2.as_slice()))?.column(0).into();
    let z2p = partial_out(&x1, &z2)?;

    // First stage on the partialled variables.
    let (pi, zz_inv) = ols(&z2p, &x2p)?;
    let fitted = &z2p * &pi;
    let resid = &x2p - &fitted;
    let ess = fitted.dot(&fitted);
    let rss = resid.dot(&resid);
    let sxx = x2p.dot(&x2p);
    if !(ess > 1e-12 * sxx) {
        return Err(Error::WeakInstrument(alloc::format!(
            "instruments leave no first-stage variation in {endog}"
        )));
    }
    let k_first = x1.ncols() + l2;
    let df_fs = n as f64 - k_first as f64 - w.absorbed as f64;
    if df_fs <= 0.0 {
        return Err(Error::invalid("no residual degrees of freedom in the first stage"));
    }
    let first_stage_f = (ess / l2 as f64) / (rss / df_fs);
    let r2 = ess / sxx;
    let cragg_donald_f = r2 / (1.0 - r2) * df_fs / l2 as f64;
    let (meat, factor) = match spec.cluster {
        Some(_) => (
            cluster_meat(&z2p, &resid, &w.sample.firm, w.sample.n_firms),
            cluster_factor(w.sample.n_firms, n, k_first),
        ),
        None => (hetero_meat(&z2p, &resid), n as f64 / df_fs),
    };
    let v_pi = &zz_inv * meat * &zz_inv * factor;
    // An exact first stage leaves no residual variance: the Wald statistic
    // is unbounded.
    let kleibergen_paap_f = match spd_inverse(&v_pi, "first-stage covariance") {
        Ok(inv) => (pi.transpose() * inv * &pi)[(0, 0)] / l2 as f64,
        Err(_) => f64::INFINITY,
    };

    // Second stage: [X1, x̂2] with x̂2 the fitted first-stage values.
    let x2_hat = &x2 - &resid;
    let mut xh = x1.clone().insert_column(x1.ncols(), 0.0);
    xh.set_column(x1.ncols(), &x2_hat);
    let mut xo = x1.insert_column(k1 + usize::from(w.intercept), 0.0);
    xo.set_column(xo.ncols() - 1, &x2);
    let y = DVector::from_column_slice(&w.columns[0]);
    let (beta, bread) = ols(&xh, &y)?;
    let u = &y - &xo * &beta;
    let (v, df, n_clusters) = covariance(spec, &w, &xh, &u, &bread)?;
    let sst = total_ss(&w.columns[0], w.intercept);

    // Report the endogenous coefficient first.
    let k = names.len();
    let order: Vec<usize> = core::iter::once(k - 1).chain(0..k - 1).collect();
    let beta_o = DVector::from_iterator(k, order.iter().map(|&i| beta[i]));
    let v_o = DMatrix::from_fn(k, k, |i, j| v[(order[i], order[j])]);
    let names_o: Vec<String> = order.iter().map(|&i| names[i].clone()).collect();

    Ok(FitResult {
        estimator: Estimator::Tsls,
        dependent: spec.dependent.clone(),
        coefficients: coefficients(&names_o, &beta_o, &v_o, df),
        covariance: to_rows(&v_o),
        n_obs: n,
        n_clusters,
        df,
        r2_within: if sst > 0.0 { 1.0 - u.dot(&u) / sst } else { f64::NAN },
        tau: None,
        diagnostics: Diagnostics {
            first_stage_f: Some(first_stage_f),
            cragg_donald_f: Some(cragg_donald_f),
            kleibergen_paap_f: Some(kleibergen_paap_f),
            weak_instrument: Some(first_stage_f < WEAK_F_THRESHOLD),
            demean_sweeps: w.sweeps,
            ..Diagnostics::default()
        },
    })
}
