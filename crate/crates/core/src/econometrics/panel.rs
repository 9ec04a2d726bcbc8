use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::indicators::FirmYearIndicators;
use crate::{Error, Result, Technology};

/// Free-form description of a column: units and any transform applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub units: Option<String>,
    pub transform: Option<String>,
}

/// Rectangular firm-year data. Missing values are `None`, never zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelDataset {
    firm_ids: Vec<String>,
    years: Vec<i32>,
    index: BTreeMap<(String, i32), usize>,
    columns: BTreeMap<String, Vec<Option<f64>>>,
    labels: BTreeMap<String, Vec<Option<String>>>,
    meta: BTreeMap<String, ColumnMeta>,
}

impl PanelDataset {
    pub fn new(keys: Vec<(String, i32)>) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut firm_ids = Vec::with_capacity(keys.len());
        let mut years = Vec::with_capacity(keys.len());
        for (i, (firm, year)) in keys.into_iter().enumerate() {
            if firm.is_empty() {
                return Err(Error::Row {
                    row: i + 1,
                    message: "empty firm_id".into(),
                });
            }
            if index.insert((firm.clone(), year), i).is_some() {
                return Err(Error::Duplicate(format!("({firm}, {year})")));
            }
            firm_ids.push(firm);
            years.push(year);
        }
        Ok(Self {
            firm_ids,
            years,
            index,
            ..Self::default()
        })
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn firm_ids(&self) -> &[String] {
        &self.firm_ids
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn row_of(&self, firm: &str, year: i32) -> Option<usize> {
        self.index.get(&(String::from(firm), year)).copied()
    }

    pub fn add_column(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "column {name} has {} values for {} rows",
                values.len(),
                self.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("column {name} has non-finite values")));
        }
        self.columns.insert(name.to_string(), values);
        Ok(())
    }

    pub fn add_label_column(&mut self, name: &str, values: Vec<Option<String>>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!("label column {name} has wrong length")));
        }
        self.labels.insert(name.to_string(), values);
        Ok(())
    }

    pub fn set_meta(&mut self, name: &str, meta: ColumnMeta) {
        self.meta.insert(name.to_string(), meta);
    }

    pub fn meta(&self, name: &str) -> Option<&ColumnMeta> {
        self.meta.get(name)
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn label_column(&self, name: &str) -> Result<&[Option<String>]> {
        self.labels
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn label_names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    /// Adds `{name}_lag{k}`: the value at (firm, year − k), missing when
    /// that row does not exist. Returns the new column's name.
    pub fn add_lag(&mut self, name: &str, k: u32) -> Result<String> {
        let values = lag(self, name, k)?;
        let new = format!("{name}_lag{k}");
        self.columns.insert(new.clone(), values);
        self.meta.insert(
            new.clone(),
            ColumnMeta {
                units: self.meta.get(name).and_then(|m| m.units.clone()),
                transform: Some(format!("lag {k} of {name}")),
            },
        );
        Ok(new)
    }

    /// Adds `dt` and the six technology dummies from matching firm-years;
    /// rows without indicators are left missing.
    pub fn attach_indicators(&mut self, indicators: &[FirmYearIndicators]) -> Result<()> {
        let mut dt = alloc::vec![None; self.len()];
        let mut techs = alloc::vec![alloc::vec![None; self.len()]; 6];
        for ind in indicators {
            if let Some(r) = self.row_of(&ind.firm_id, ind.year) {
                dt[r] = Some(if ind.dt { 1.0 } else { 0.0 });
                for t in Technology::ALL {
                    techs[t.index()][r] = Some(if ind.flag(t) { 1.0 } else { 0.0 });
                }
            }
        }
        self.add_column("dt", dt)?;
        for t in Technology::ALL {
            let name = t.code().to_ascii_lowercase();
            self.add_column(&name, core::mem::take(&mut techs[t.index()]))?;
        }
        Ok(())
    }
}

/// Lagged copy of a column; gaps in the year sequence stay missing.
pub fn lag(data: &PanelDataset, name: &str, k: u32) -> Result<Vec<Option<f64>>> {
    if k == 0 {
        return Err(Error::invalid("lag order must be at least 1"));
    }
    let col = data.column(name)?;
    Ok((0..data.len())
        .map(|r| {
            data.row_of(&data.firm_ids[r], data.years[r] - k as i32)
                .and_then(|src| col[src])
        })
        .collect())
}

/// Sample quantile with linear interpolation between order statistics
/// (the default definition in R and NumPy). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Clip bounds at the p and 1 − p quantiles of the non-missing values.
pub fn winsor_bounds(values: &[Option<f64>], p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::invalid(format!("winsorizing share {p} outside (0, 0.5)")));
    }
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.len() < 2 {
        return Err(Error::invalid("winsorizing needs at least two non-missing values"));
    }
    v.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&v, p), quantile_sorted(&v, 1.0 - p)))
}

pub fn winsorize(values: &[Option<f64>], p: f64) -> Result<Vec<Option<f64>>> {
    let (lo, hi) = winsor_bounds(values, p)?;
    Ok(values.iter().map(|v| v.map(|x| x.clamp(lo, hi))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FixedEffect {
    Firm,
    Year,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClusterDim {
    Firm,
}

/// How extreme values named in `RegressionSpec::winsorize` are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutlierMode {
    #[default]
    Clip,
    /// Drop rows outside the bounds instead of clipping.
    Trim,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleFilter {
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    /// Label column holding sector codes, e.g. "naics".
    pub sector_column: Option<String>,
    /// Rows whose sector code starts with any of these are dropped.
    pub exclude_sectors: Vec<String>,
}

impl SampleFilter {
    fn keeps(&self, data: &PanelDataset, row: usize) -> Result<bool> {
        let y = data.years[row];
        if self.year_min.is_some_and(|m| y < m) || self.year_max.is_some_and(|m| y > m) {
            return Ok(false);
        }
        if !self.exclude_sectors.is_empty() {
            let col = self
                .sector_column
                .as_deref()
                .ok_or_else(|| Error::invalid("sector exclusion needs sector_column"))?;
            if let Some(code) = &data.label_column(col)?[row] {
                if self.exclude_sectors.iter().any(|s| code.starts_with(s.as_str())) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub dependent: String,
    #[serde(default)]
    pub regressors: Vec<String>,
    #[serde(default)]
    pub endogenous: Option<String>,
    #[serde(default)]
    pub instruments: Vec<String>,
    #[serde(default)]
    pub fixed_effects: Vec<FixedEffect>,
    #[serde(default)]
    pub cluster: Option<ClusterDim>,
    #[serde(default)]
    pub winsorize: BTreeMap<String, f64>,
    #[serde(default)]
    pub outliers: OutlierMode,
    #[serde(default)]
    pub sample_filter: SampleFilter,
}

impl RegressionSpec {
    /// Two-way FE, firm-clustered: the default shape of the baseline model.
    pub fn two_way(dependent: &str, regressors: &[&str]) -> Self {
        Self {
            dependent: dependent.into(),
            regressors: regressors.iter().map(|s| String::from(*s)).collect(),
            endogenous: None,
            instruments: Vec::new(),
            fixed_effects: alloc::vec![FixedEffect::Firm, FixedEffect::Year],
            cluster: Some(ClusterDim::Firm),
            winsorize: BTreeMap::new(),
            outliers: OutlierMode::Clip,
            sample_filter: SampleFilter::default(),
        }
    }

    pub fn has_fe(&self, fe: FixedEffect) -> bool {
        self.fixed_effects.contains(&fe)
    }

    pub fn validate(&self) -> Result<()> {
        if self.endogenous.is_some() && self.instruments.is_empty() {
            return Err(Error::invalid("endogenous regressor given without instruments"));
        }
        if self.endogenous.is_none() && !self.instruments.is_empty() {
            return Err(Error::invalid("instruments given without an endogenous regressor"));
        }
        let mut seen = BTreeSet::new();
        for c in core::iter::once(&self.dependent)
            .chain(&self.regressors)
            .chain(&self.endogenous)
            .chain(&self.instruments)
        {
            if !seen.insert(c.as_str()) {
                return Err(Error::invalid(format!("column {c} used twice in the specification")));
            }
        }
        Ok(())
    }

    /// Numeric columns the estimation needs, dependent first.
    pub fn used_columns(&self) -> Vec<&str> {
        core::iter::once(&self.dependent)
            .chain(&self.regressors)
            .chain(&self.endogenous)
            .chain(&self.instruments)
            .map(String::as_str)
            .collect()
    }
}

/// Complete-case estimation sample after filters and outlier handling.
#[derive(Debug, Clone)]
pub struct Sample {
    pub rows: Vec<usize>,
    /// Dense firm index per sample row.
    pub firm: Vec<usize>,
    /// Dense year index per sample row.
    pub year: Vec<usize>,
    pub n_firms: usize,
    pub n_years: usize,
    /// `columns[j]` follows `RegressionSpec::used_columns()` order.
    pub columns: Vec<Vec<f64>>,
}

pub fn estimation_sample(spec: &RegressionSpec, data: &PanelDataset) -> Result<Sample> {
    spec.validate()?;
    let names = spec.used_columns();
    let cols: Vec<&[Option<f64>]> = names
        .iter()
        .map(|n| data.column(n))
        .collect::<Result<_>>()?;
    for w in spec.winsorize.keys() {
        if !names.contains(&w.as_str()) {
            data.column(w)?;
        }
    }
    let mut rows = Vec::new();
    for r in 0..data.len() {
        if spec.sample_filter.keeps(data, r)? && cols.iter().all(|c| c[r].is_some()) {
            rows.push(r);
        }
    }
    let mut values: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| rows.iter().map(|&r| c[r].unwrap_or(f64::NAN)).collect())
        .collect();

    if !spec.winsorize.is_empty() {
        let mut keep = alloc::vec![true; rows.len()];
        for (name, &p) in &spec.winsorize {
            let Some(j) = names.iter().position(|n| n == name) else {
                continue;
            };
            let as_opt: Vec<Option<f64>> = values[j].iter().map(|v| Some(*v)).collect();
            let (lo, hi) = winsor_bounds(&as_opt, p)?;
            match spec.outliers {
                OutlierMode::Clip => values[j].iter_mut().for_each(|v| *v = v.clamp(lo, hi)),
                OutlierMode::Trim => {
                    for (k, v) in keep.iter_mut().zip(&values[j]) {
                        if *v < lo || *v > hi {
                            *k = false;
                        }
                    }
                }
            }
        }
        if keep.iter().any(|k| !k) {
            rows = rows.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect();
            for col in &mut values {
                *col = col.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect();
            }
        }
    }

    let mut firm_ix: BTreeMap<&str, usize> = BTreeMap::new();
    let mut year_ix: BTreeMap<i32, usize> = BTreeMap::new();
    for &r in &rows {
        firm_ix.entry(data.firm_ids[r].as_str()).or_insert(0);
        year_ix.entry(data.years[r]).or_insert(0);
    }
    for (i, v) in firm_ix.values_mut().enumerate() {
        *v = i;
    }
    for (i, v) in year_ix.values_mut().enumerate() {
        *v = i;
    }
    Ok(Sample {
        firm: rows.iter().map(|&r| firm_ix[data.firm_ids[r].as_str()]).collect(),
        year: rows.iter().map(|&r| year_ix[&data.years[r]]).collect(),
        n_firms: firm_ix.len(),
        n_years: year_ix.len(),
        rows,
        columns: values,
    })
}
