use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fe::fit_fe_ols;
use super::panel::{PanelDataset, RegressionSpec};
use super::production::{compute_tfp, estimate_alpha, AlphaEstimate, ProductionColumns};
use super::FitResult;
use crate::{Error, Result, Technology};

/// Column names consumed by [`channel_suite`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelColumns {
    pub income: String,
    pub cost: String,
    pub production: ProductionColumns,
    /// Economic value added, used as output for a second TFP measure.
    #[serde(default)]
    pub eva: Option<String>,
    #[serde(default)]
    pub controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRow {
    /// ln_tfp_sales, ln_tfp_eva, ln_income, ln_cost or cost_income.
    pub outcome: String,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub alpha_sales: AlphaEstimate,
    pub alpha_eva: Option<AlphaEstimate>,
    pub rows: Vec<ChannelRow>,
}

impl ChannelReport {
    pub fn row(&self, outcome: &str) -> Option<&ChannelRow> {
        self.rows.iter().find(|r| r.outcome == outcome)
    }
}

fn require_variation(data: &PanelDataset, name: &str) -> Result<()> {
    let col = data.column(name)?;
    let mut vals = col.iter().flatten();
    let Some(first) = vals.next() else {
        return Err(Error::invalid(format!("{name} has no observations")));
    };
    if vals.all(|v| v == first) {
        return Err(Error::invalid(format!("{name} has no variation")));
    }
    Ok(())
}

fn log_positive(col: &[Option<f64>]) -> Vec<Option<f64>> {
    col.iter()
        .map(|v| v.filter(|x| *x > 0.0).map(libm::log))
        .collect()
}

fn key_spec(dependent: &str, key: &str, controls: &[String]) -> RegressionSpec {
    let mut regs: Vec<&str> = alloc::vec![key];
    regs.extend(controls.iter().map(String::as_str));
    RegressionSpec::two_way(dependent, &regs)
}

/// Productivity, income and cost regressions on `dt` with two-way effects
/// and firm clustering. `data` must already carry the `dt` column.
pub fn channel_suite(data: &PanelDataset, cols: &ChannelColumns) -> Result<ChannelReport> {
    for c in [&cols.income, &cols.cost]
        .into_iter()
        .chain([&cols.production.output, &cols.production.capital, &cols.production.labor])
        .chain(cols.eva.as_ref())
        .chain(&cols.controls)
    {
        data.column(c)?;
    }
    require_variation(data, "dt")?;

    let mut work = data.clone();
    let prod = &cols.production;
    let alpha_sales = estimate_alpha(data, prod)?;
    let k = data.column(&prod.capital)?;
    let l = data.column(&prod.labor)?;
    let tfp = compute_tfp(data.column(&prod.output)?, k, l, alpha_sales.alpha)?;
    work.add_column("ln_tfp_sales", log_positive(&tfp.values))?;
    let mut outcomes = alloc::vec!["ln_tfp_sales"];

    let alpha_eva = match &cols.eva {
        Some(eva) => {
            let est = estimate_alpha(
                data,
                &ProductionColumns {
                    output: eva.clone(),
                    capital: prod.capital.clone(),
                    labor: prod.labor.clone(),
                },
            )?;
            let tfp = compute_tfp(data.column(eva)?, k, l, est.alpha)?;
            work.add_column("ln_tfp_eva", log_positive(&tfp.values))?;
            outcomes.push("ln_tfp_eva");
            Some(est)
        }
        None => None,
    };

    let income = data.column(&cols.income)?;
    let cost = data.column(&cols.cost)?;
    work.add_column("ln_income", log_positive(income))?;
    work.add_column("ln_cost", log_positive(cost))?;
    let ratio = income
        .iter()
        .zip(cost)
        .map(|(i, c)| match (i, c) {
            (Some(i), Some(c)) if *i > 0.0 => Some(c / i),
            _ => None,
        })
        .collect();
    work.add_column("cost_income", ratio)?;
    outcomes.extend(["ln_income", "ln_cost", "cost_income"]);

    let rows = outcomes
        .into_iter()
        .map(|o| {
            Ok(ChannelRow {
                outcome: String::from(o),
                fit: fit_fe_ols(&key_spec(o, "dt", &cols.controls), &work)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ChannelReport {
        alpha_sales,
        alpha_eva,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyFit {
    pub technology: Technology,
    /// Name of the treatment dummy, e.g. `treat_ai`.
    pub treatment: String,
    pub n_treated: usize,
    pub n_control: usize,
    pub fit: FitResult,
}

/// One regression per technology. Treated rows are firm-years flagged for
/// that technology; controls are firm-years with no digital technology at
/// all; rows flagged only for other technologies are left out. `data`
/// must carry `dt` and the six technology dummies.
pub fn per_technology_suite(data: &PanelDataset, dependent: &str, controls: &[String]) -> Result<Vec<TechnologyFit>> {
    let dt = data.column("dt")?;
    Technology::ALL
        .into_iter()
        .map(|t| {
            let code = t.code().to_ascii_lowercase();
            let flag = data.column(&code)?;
            let treat: Vec<Option<f64>> = flag
                .iter()
                .zip(dt)
                .map(|(f, d)| match (f, d) {
                    (Some(f), _) if *f > 0.5 => Some(1.0),
                    (Some(_), Some(d)) if *d < 0.5 => Some(0.0),
                    _ => None,
                })
                .collect();
            let n_treated = treat.iter().filter(|v| **v == Some(1.0)).count();
            let n_control = treat.iter().filter(|v| **v == Some(0.0)).count();
            if n_treated == 0 || n_control == 0 {
                return Err(Error::invalid(format!("{t}: empty treatment or control group")));
            }
            let name = format!("treat_{code}");
            let mut work = data.clone();
            work.add_column(&name, treat)?;
            let fit = fit_fe_ols(&key_spec(dependent, &name, controls), &work)?;
            Ok(TechnologyFit {
                technology: t,
                treatment: name,
                n_treated,
                n_control,
                fit,
            })
        })
        .collect()
}
