//! Panel estimators: two-way fixed-effects OLS with firm-clustered
//! covariance, 2SLS with weak-instrument diagnostics, quantile regression,
//! production-function helpers and the regression suites built on them.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

mod describe;
mod fe;
mod iv;
mod linalg;
mod panel;
mod production;
mod quantile;
pub mod simulate;
pub mod special;
mod suites;

pub use describe::{describe, DescribeRow};
pub use fe::{fit_fe_ols, DEMEAN_TOL};
pub use iv::{fit_2sls, WEAK_F_THRESHOLD};
pub use panel::{
    estimation_sample, lag, quantile_sorted, winsor_bounds, winsorize, ClusterDim, ColumnMeta,
    FixedEffect, OutlierMode, PanelDataset, RegressionSpec, Sample, SampleFilter,
};
pub use production::{compute_tfp, estimate_alpha, AlphaEstimate, ProductionColumns, TfpColumn};
pub use quantile::{check_loss, fit_quantile, solve_quantile, QuantileOptions, QuantileSolution, DEFAULT_TAUS};
pub use suites::{channel_suite, per_technology_suite, ChannelColumns, ChannelReport, ChannelRow, TechnologyFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Estimator {
    FeOls,
    Tsls,
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

impl Coefficient {
    fn new(name: String, estimate: f64, std_error: f64, df: f64) -> Self {
        let t_stat = estimate / std_error;
        Self {
            name,
            estimate,
            std_error,
            t_stat,
            p_value: special::t_two_sided_p(t_stat, df),
        }
    }

    /// Stars at the 10/5/1% levels.
    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub first_stage_f: Option<f64>,
    pub cragg_donald_f: Option<f64>,
    pub kleibergen_paap_f: Option<f64>,
    /// Set when the first-stage F falls below the rule-of-thumb threshold.
    pub weak_instrument: Option<bool>,
    /// Alternating-projection sweeps used by the within transformation.
    pub demean_sweeps: usize,
    /// Successful bootstrap replications (quantile fits).
    pub bootstrap_reps: Option<usize>,
    /// Check-loss objective at the solution (quantile fits).
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: Estimator,
    pub dependent: String,
    pub coefficients: Vec<Coefficient>,
    /// Covariance of the reported coefficients, row-major, same order.
    pub covariance: Vec<Vec<f64>>,
    pub n_obs: usize,
    pub n_clusters: Option<usize>,
    /// Degrees of freedom used for t reference distributions.
    pub df: f64,
    /// Within R² (for 2SLS it can be negative and lacks the OLS reading).
    pub r2_within: f64,
    pub tau: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}
