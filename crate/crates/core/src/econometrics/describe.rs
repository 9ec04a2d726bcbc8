use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::panel::PanelDataset;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeRow {
    pub column: String,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for one value.
    pub std: f64,
    pub max: f64,
    pub min: f64,
    pub n: usize,
}

/// Summary moments over the non-missing values of each column. Columns
/// with no values report NaN moments and n = 0.
pub fn describe(data: &PanelDataset, columns: &[&str]) -> Result<Vec<DescribeRow>> {
    columns
        .iter()
        .map(|&name| {
            let v: Vec<f64> = data.column(name)?.iter().flatten().copied().collect();
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            Ok(DescribeRow {
                column: String::from(name),
                mean,
                std: libm::sqrt(var),
                max: v.iter().copied().fold(f64::NAN, f64::max),
                min: v.iter().copied().fold(f64::NAN, f64::min),
                n,
            })
        })
        .collect()
}
