//! Plain-text and CSV renderings of the pipeline's results, laid out like
//! the published tables: classifier comparison, adoption trend, industry
//! shares and regression tables with standard errors in parentheses.

use std::fmt::Write as _;
use std::path::Path;

use dtmeasure_core::econometrics::{stars, Estimator, FitResult};
use dtmeasure_core::indicators::{IndustryTable, OverlapRow, SizeBinTable, TrendRow};
use dtmeasure_core::Technology;

use crate::formats::write_csv;
use crate::pipeline::{Analytics, EvaluationArtifact, ModelRun, RegressionArtifact};
use crate::Result;

/// Fixed-width text table. The first column is left-aligned, the rest
/// right-aligned.
#[derive(Debug, Clone, Default)]
pub struct TextTable {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl TextTable {
    pub fn new(title: &str, header: &[&str]) -> Self {
        Self {
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let ncol = self.header.len();
        let mut width = vec![0usize; ncol];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let total: usize = width.iter().sum::<usize>() + 2 * ncol.saturating_sub(1);
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "{c:>w$}");
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(out, "{}", "=".repeat(total));
        let _ = writeln!(out, "{}", line(&self.header));
        let _ = writeln!(out, "{}", "-".repeat(total));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        let _ = writeln!(out, "{}", "-".repeat(total));
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn tech_header() -> Vec<&'static str> {
    Technology::ALL.iter().map(|t| t.code()).collect()
}

fn beta_label(beta: f64) -> String {
    format!("F{beta}")
}

pub fn table1(eval: &EvaluationArtifact) -> TextTable {
    let mut header = vec!["Model", "Accuracy", "Precision", "Recall"];
    let betas: Vec<String> = eval.betas.iter().map(|&b| beta_label(b)).collect();
    header.extend(betas.iter().map(String::as_str));
    let mut t = TextTable::new("Classification performance (test split)", &header);
    for m in &eval.models {
        let r = &m.report;
        let mut row = vec![m.model.clone(), pct(r.accuracy), pct(r.macro_precision), pct(r.macro_recall)];
        row.extend(r.f_beta.iter().map(|f| f4(f.value)));
        t.row(row);
    }
    t.notes.push(format!(
        "Accuracy, Precision and Recall in %; macro averages over classes. Train n = {}, test n = {}.",
        eval.n_train, eval.n_test
    ));
    t.notes.push("F<b> is (1+b^2)PR/(b^2 P+R) from the macro P and R.".into());
    t
}

pub fn trend_table(rows: &[TrendRow]) -> TextTable {
    let mut header = vec!["Year", "Firms"];
    header.extend(tech_header());
    header.push("DT");
    let mut t = TextTable::new("Cumulative adoption share by year (%)", &header);
    for r in rows {
        let mut row = vec![r.year.to_string(), r.n_firms.to_string()];
        row.extend(r.shares.iter().map(|&s| pct(s)));
        row.push(pct(r.dt_share));
        t.row(row);
    }
    t
}

pub fn industry_text(table: &IndustryTable) -> TextTable {
    let mut header = vec!["Sector", "Firms"];
    header.extend(tech_header());
    header.push("DT");
    let mut t = TextTable::new("Adoption share by two-digit NAICS sector (%)", &header);
    for r in &table.rows {
        let mut row = vec![r.sector.clone(), r.n_firms.to_string()];
        row.extend(r.shares.iter().map(|&s| pct(s)));
        row.push(pct(r.dt_share));
        t.row(row);
    }
    let mut mean = vec!["Mean".to_string(), String::new()];
    mean.extend(table.mean.iter().map(|&s| pct(s)));
    mean.push(pct(table.mean_dt));
    t.row(mean);
    t.notes
        .push("Shares use each firm's last cumulative row. Mean is the unweighted mean over known sectors.".into());
    t
}

pub fn overlap_text(rows: &[OverlapRow]) -> TextTable {
    let mut t = TextTable::new(
        "Patent holders also flagged by the text indicators",
        &["Technology", "Patentees", "Flagged", "Rate (%)"],
    );
    for r in rows {
        t.row(vec![
            r.technology.code().into(),
            r.n_patentees.to_string(),
            r.n_flagged.to_string(),
            r.rate.map_or_else(|| "n/a".into(), pct),
        ]);
    }
    t
}

fn bin_label(lower: u64, upper: Option<u64>) -> String {
    match upper {
        Some(u) => format!("{lower}-{}", u - 1),
        None => format!("{lower}+"),
    }
}

pub fn size_bin_text(table: &SizeBinTable) -> TextTable {
    let mut t = TextTable::new(
        &format!("{} use by employee count, {}", table.technology.code(), table.year),
        &["Employees", "Firms", "Share (%)"],
    );
    for r in &table.rows {
        t.row(vec![bin_label(r.lower, r.upper), r.n_firms.to_string(), pct(r.share)]);
    }
    t.notes.push(format!(
        "{} firms without an employee count, {} below the first bin.",
        table.missing_employees, table.below_range
    ));
    t
}

/// One regression column: a fit plus the labels shown under it.
struct Column<'a> {
    title: String,
    fit: &'a FitResult,
    firm_fe: bool,
    year_fe: bool,
}

fn regression_text(title: &str, columns: &[Column<'_>], notes: &[String]) -> TextTable {
    let mut header = vec![String::new()];
    header.extend(columns.iter().map(|c| c.title.clone()));
    let mut t = TextTable {
        title: title.into(),
        header,
        ..Default::default()
    };
    let mut vars: Vec<&str> = Vec::new();
    for c in columns {
        for coef in &c.fit.coefficients {
            if !vars.contains(&coef.name.as_str()) {
                vars.push(&coef.name);
            }
        }
    }
    for v in vars {
        let mut est = vec![v.to_string()];
        let mut se = vec![String::new()];
        for c in columns {
            match c.fit.coefficient(v) {
                Some(k) => {
                    est.push(format!("{:.4}{}", k.estimate, stars(k.p_value)));
                    se.push(format!("({:.4})", k.std_error));
                }
                None => {
                    est.push(String::new());
                    se.push(String::new());
                }
            }
        }
        t.row(est);
        t.row(se);
    }
    let yes = |b: bool| if b { "Yes" } else { "No" }.to_string();
    let mut firm = vec!["Firm FE".to_string()];
    let mut year = vec!["Year FE".to_string()];
    let mut n = vec!["Observations".to_string()];
    let mut r2 = vec!["R2 (within / pseudo)".to_string()];
    for c in columns {
        firm.push(yes(c.firm_fe));
        year.push(yes(c.year_fe));
        n.push(c.fit.n_obs.to_string());
        r2.push(format!("{:.3}", c.fit.r2_within));
    }
    t.rows.extend([firm, year, n, r2]);
    let diag = |get: &dyn Fn(&FitResult) -> Option<f64>| columns.iter().any(|c| get(c.fit).is_some());
    let first: &dyn Fn(&FitResult) -> Option<f64> = &|f| f.diagnostics.first_stage_f;
    let cd: &dyn Fn(&FitResult) -> Option<f64> = &|f| f.diagnostics.cragg_donald_f;
    let kp: &dyn Fn(&FitResult) -> Option<f64> = &|f| f.diagnostics.kleibergen_paap_f;
    for (label, get) in [("First-stage F", first), ("Cragg-Donald Wald F", cd), ("Kleibergen-Paap rk Wald F", kp)] {
        if diag(get) {
            let mut row = vec![label.to_string()];
            row.extend(columns.iter().map(|c| get(c.fit).map_or_else(String::new, |v| format!("{v:.3}"))));
            t.row(row);
        }
    }
    t.notes.extend(notes.iter().cloned());
    t.notes
        .push("Standard errors in parentheses. * p<0.10, ** p<0.05, *** p<0.01.".into());
    t
}

fn model_columns(run: &ModelRun) -> Vec<Column<'_>> {
    let Some(fits) = &run.outcome.value else {
        return Vec::new();
    };
    fits.iter()
        .map(|fit| Column {
            title: match fit.tau {
                Some(tau) => format!("{} q{:.0}", run.name, 100.0 * tau),
                None => run.name.clone(),
            },
            fit,
            firm_fe: run.firm_fe,
            year_fe: run.year_fe,
        })
        .collect()
}

fn se_note(fits: &[&FitResult]) -> String {
    if fits.iter().any(|f| f.estimator == Estimator::Quantile) {
        "Quantile columns: firm-cluster bootstrap standard errors.".into()
    } else if fits.iter().all(|f| f.n_clusters.is_some()) {
        "Standard errors clustered by firm.".into()
    } else {
        "Classical standard errors.".into()
    }
}

pub fn render_regression(reg: &RegressionArtifact) -> String {
    let mut out = String::new();
    if !reg.describe.is_empty() {
        let mut t = TextTable::new("Descriptive statistics", &["Variable", "Mean", "Std", "Max", "Min", "Obs"]);
        for d in &reg.describe {
            t.row(vec![d.column.clone(), f4(d.mean), f4(d.std), f4(d.max), f4(d.min), d.n.to_string()]);
        }
        out.push_str(&t.render());
        out.push('\n');
    }
    for run in &reg.models {
        if let Some(e) = &run.outcome.error {
            let _ = writeln!(out, "Model {}: not estimated ({e})\n", run.name);
            continue;
        }
        let cols = model_columns(run);
        let fits: Vec<&FitResult> = cols.iter().map(|c| c.fit).collect();
        let mut notes = vec![format!("Dependent variable: {}.", fits.first().map_or("", |f| f.dependent.as_str()))];
        notes.push(se_note(&fits));
        if run.estimator == Estimator::Tsls {
            if let Some(iv) = &reg.instrument {
                notes.push(format!("Instrument {iv} built with rho = {}.", reg.rho));
            }
            if fits.iter().any(|f| f.diagnostics.weak_instrument == Some(true)) {
                notes.push("Weak instrument: first-stage F below 10.".into());
            }
        }
        out.push_str(&regression_text(&format!("Model: {}", run.name), &cols, &notes).render());
        out.push('\n');
    }
    if let Some(ch) = &reg.channel {
        match (&ch.value, &ch.error) {
            (Some(report), _) => {
                let cols: Vec<Column<'_>> = report
                    .rows
                    .iter()
                    .map(|r| Column {
                        title: r.outcome.clone(),
                        fit: &r.fit,
                        firm_fe: true,
                        year_fe: true,
                    })
                    .collect();
                let mut notes = vec![format!(
                    "TFP = Y/(K^a L^(1-a)); a = {:.4} from sales{}.",
                    report.alpha_sales.alpha,
                    if report.alpha_sales.in_unit_interval { "" } else { " (outside (0,1))" }
                )];
                if let Some(a) = &report.alpha_eva {
                    notes.push(format!("a = {:.4} from EVA.", a.alpha));
                }
                notes.push("Standard errors clustered by firm.".into());
                out.push_str(&regression_text("Channels: productivity, income and cost", &cols, &notes).render());
                out.push('\n');
            }
            (None, Some(e)) => {
                let _ = writeln!(out, "Channel suite: not estimated ({e})\n");
            }
            _ => {}
        }
    }
    if let Some(tech) = &reg.technology {
        match (&tech.value, &tech.error) {
            (Some(fits), _) => {
                let cols: Vec<Column<'_>> = fits
                    .iter()
                    .map(|f| Column {
                        title: f.technology.code().into(),
                        fit: &f.fit,
                        firm_fe: true,
                        year_fe: true,
                    })
                    .collect();
                let counts = fits
                    .iter()
                    .map(|f| format!("{} {}/{}", f.technology.code(), f.n_treated, f.n_control))
                    .collect::<Vec<_>>()
                    .join(", ");
                let notes = vec![
                    "Treated: firm-years using the technology; control: firm-years using none.".into(),
                    format!("Treated/control firm-years: {counts}."),
                    "Standard errors clustered by firm.".into(),
                ];
                out.push_str(&regression_text("Effect by technology", &cols, &notes).render());
                out.push('\n');
            }
            (None, Some(e)) => {
                let _ = writeln!(out, "Technology suite: not estimated ({e})\n");
            }
            _ => {}
        }
    }
    out
}

/// Full text report. Contains no timestamps or paths, so identical
/// inputs give identical bytes.
pub fn render(
    seed: u64,
    evaluation: Option<&EvaluationArtifact>,
    analytics: &Analytics,
    regression: Option<&RegressionArtifact>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dtmeasure report");
    let _ = writeln!(out, "seed: {seed}");
    let _ = writeln!(out, "indicator mode: {}", analytics.mode.as_str());
    let _ = writeln!(out, "firm-years: {}\n", analytics.n_firm_years);
    match evaluation {
        Some(e) => out.push_str(&table1(e).render()),
        None => out.push_str("Classification performance: not evaluated.\n"),
    }
    out.push('\n');
    out.push_str(&trend_table(&analytics.trend).render());
    out.push('\n');
    out.push_str(&industry_text(&analytics.industry).render());
    out.push('\n');
    if let Some(o) = &analytics.patent_overlap {
        out.push_str(&overlap_text(o).render());
        out.push('\n');
    }
    if let Some(b) = &analytics.size_bins {
        out.push_str(&size_bin_text(b).render());
        out.push('\n');
    }
    match regression {
        Some(r) => out.push_str(&render_regression(r)),
        None => out.push_str("Regressions: not run.\n"),
    }
    out
}

pub fn write_trend_csv(path: &Path, rows: &[TrendRow]) -> Result<()> {
    let mut header = vec!["year", "n_firms", "ai", "bd", "cc", "iot", "bc", "mi"];
    header.push("dt");
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            let mut c = vec![r.year.to_string(), r.n_firms.to_string()];
            c.extend(r.shares.iter().map(|&s| f4(s)));
            c.push(f4(r.dt_share));
            c
        }),
    )
}

pub fn write_industry_csv(path: &Path, table: &IndustryTable) -> Result<()> {
    let header = ["sector", "n_firms", "ai", "bd", "cc", "iot", "bc", "mi", "dt"];
    let mut rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut c = vec![r.sector.clone(), r.n_firms.to_string()];
            c.extend(r.shares.iter().map(|&s| f4(s)));
            c.push(f4(r.dt_share));
            c
        })
        .collect();
    let mut mean = vec!["mean".to_string(), String::new()];
    mean.extend(table.mean.iter().map(|&s| f4(s)));
    mean.push(f4(table.mean_dt));
    rows.push(mean);
    write_csv(path, &header, rows)
}

pub fn write_overlap_csv(path: &Path, rows: &[OverlapRow]) -> Result<()> {
    write_csv(
        path,
        &["technology", "n_patentees", "n_flagged", "rate"],
        rows.iter().map(|r| {
            vec![
                r.technology.code().to_string(),
                r.n_patentees.to_string(),
                r.n_flagged.to_string(),
                r.rate.map_or_else(String::new, f4),
            ]
        }),
    )
}

pub fn write_size_bins_csv(path: &Path, table: &SizeBinTable) -> Result<()> {
    write_csv(
        path,
        &["year", "technology", "lower", "upper", "n_firms", "share"],
        table.rows.iter().map(|r| {
            vec![
                table.year.to_string(),
                table.technology.code().to_string(),
                r.lower.to_string(),
                r.upper.map_or_else(String::new, |u| u.to_string()),
                r.n_firms.to_string(),
                f4(r.share),
            ]
        }),
    )
}

pub fn write_table1_csv(path: &Path, eval: &EvaluationArtifact) -> Result<()> {
    let mut header = vec!["model".to_string(), "accuracy".into(), "precision".into(), "recall".into()];
    header.extend(eval.betas.iter().map(|b| format!("f_beta_{b}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        eval.models.iter().map(|m| {
            let r = &m.report;
            let mut c = vec![m.model.clone(), f4(r.accuracy), f4(r.macro_precision), f4(r.macro_recall)];
            c.extend(r.f_beta.iter().map(|f| f4(f.value)));
            c
        }),
    )
}

pub fn write_regression_csv(path: &Path, reg: &RegressionArtifact) -> Result<()> {
    let mut rows = Vec::new();
    let mut push = |model: &str, fit: &FitResult| {
        for c in &fit.coefficients {
            rows.push(vec![
                model.to_string(),
                fit.tau.map_or_else(String::new, |t| t.to_string()),
                fit.dependent.clone(),
                c.name.clone(),
                format!("{:.6}", c.estimate),
                format!("{:.6}", c.std_error),
                format!("{:.4}", c.t_stat),
                format!("{:.4}", c.p_value),
                stars(c.p_value).to_string(),
                fit.n_obs.to_string(),
            ]);
        }
    };
    for run in &reg.models {
        for fit in run.outcome.value.iter().flatten() {
            push(&run.name, fit);
        }
    }
    if let Some(report) = reg.channel.as_ref().and_then(|c| c.value.as_ref()) {
        for r in &report.rows {
            push(&format!("channel:{}", r.outcome), &r.fit);
        }
    }
    if let Some(fits) = reg.technology.as_ref().and_then(|t| t.value.as_ref()) {
        for f in fits {
            push(&format!("technology:{}", f.technology.code()), &f.fit);
        }
    }
    write_csv(
        path,
        &["model", "tau", "dependent", "variable", "estimate", "std_error", "t", "p", "stars", "n_obs"],
        rows,
    )
}
