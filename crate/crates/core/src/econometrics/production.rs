use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fe::fit_fe_ols;
use super::panel::{PanelDataset, RegressionSpec};
use super::FitResult;
use crate::{Error, Result};

/// Names of the output, capital and labour columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionColumns {
    pub output: String,
    pub capital: String,
    pub labor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// False when the estimate is not a valid capital share.
    pub in_unit_interval: bool,
    /// Rows dropped for non-positive output, capital or labour.
    pub dropped: usize,
    pub fit: FitResult,
}

/// Capital elasticity under constant returns to scale: the slope of
/// ln(Y/L) on ln(K/L) with firm and year effects.
pub fn estimate_alpha(data: &PanelDataset, cols: &ProductionColumns) -> Result<AlphaEstimate> {
    let y = data.column(&cols.output)?;
    let k = data.column(&cols.capital)?;
    let l = data.column(&cols.labor)?;
    let mut dropped = 0;
    let mut lhs = Vec::with_capacity(data.len());
    let mut rhs = Vec::with_capacity(data.len());
    for r in 0..data.len() {
        match (y[r], k[r], l[r]) {
            (Some(y), Some(k), Some(l)) if y > 0.0 && k > 0.0 && l > 0.0 => {
                lhs.push(Some(libm::log(y / l)));
                rhs.push(Some(libm::log(k / l)));
            }
            (Some(_), Some(_), Some(_)) => {
                dropped += 1;
                lhs.push(None);
                rhs.push(None);
            }
            _ => {
                lhs.push(None);
                rhs.push(None);
            }
        }
    }
    let mut work = data.clone();
    work.add_column("_ln_y_per_l", lhs)?;
    work.add_column("_ln_k_per_l", rhs)?;
    let fit = fit_fe_ols(&RegressionSpec::two_way("_ln_y_per_l", &["_ln_k_per_l"]), &work).map_err(|e| match e {
        Error::Collinear(_) => Error::invalid("capital intensity has no variation within the fixed effects"),
        other => other,
    })?;
    let alpha = fit.coefficients[0].estimate;
    if !(alpha > 0.0 && alpha < 1.0) {
        log::warn!("estimated capital elasticity {alpha} lies outside (0, 1)");
    }
    Ok(AlphaEstimate {
        alpha,
        in_unit_interval: alpha > 0.0 && alpha < 1.0,
        dropped,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfpColumn {
    pub values: Vec<Option<f64>>,
    /// Rows with a non-positive input, set to missing.
    pub dropped: usize,
}

/// TFP = Y / (K^α L^(1−α)), row by row.
pub fn compute_tfp(y: &[Option<f64>], k: &[Option<f64>], l: &[Option<f64>], alpha: f64) -> Result<TfpColumn> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("capital elasticity {alpha} outside (0, 1)")));
    }
    if y.len() != k.len() || y.len() != l.len() {
        return Err(Error::invalid("output, capital and labour columns differ in length"));
    }
    let mut dropped = 0;
    let values = y
        .iter()
        .zip(k)
        .zip(l)
        .map(|((y, k), l)| match (*y, *k, *l) {
            (Some(y), Some(k), Some(l)) if y > 0.0 && k > 0.0 && l > 0.0 => {
                Some(y / (libm::pow(k, alpha) * libm::pow(l, 1.0 - alpha)))
            }
            (Some(_), Some(_), Some(_)) => {
                dropped += 1;
                None
            }
            _ => None,
        })
        .collect();
    if dropped > 0 {
        log::warn!("{dropped} rows with non-positive output, capital or labour dropped from TFP");
    }
    Ok(TfpColumn { values, dropped })
}
