//! One function per acceptance criterion. Each returns a one-line summary
//! of what it measured, or the reason it failed.

use std::path::Path;

use dtmeasure::config::RunConfig;
use dtmeasure::formats;
use dtmeasure::montecarlo::{channel_signs, fe_coverage, iv_experiment};
use dtmeasure::pipeline::{EvaluationArtifact, Pipeline, EVALUATION, INDICATORS, REPORT_TXT};
use dtmeasure_core::classify::f_beta;
use dtmeasure_core::econometrics::simulate::normal;
use dtmeasure_core::econometrics::{fit_2sls, fit_fe_ols, solve_quantile, FitResult, RegressionSpec};
use dtmeasure_core::instruments::{build_iv_column, Roster};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::*;

pub type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn table1_f1() -> Outcome {
    let mut worst = 0.0f64;
    for (name, p, r, f1, _) in TABLE1 {
        let ours = f_beta(p / 100.0, r / 100.0, 1.0);
        if (ours - f_beta_oracle(p / 100.0, r / 100.0, 1.0)).abs() > 1e-12 {
            return Err(format!("{name}: library F1 disagrees with the textbook formula"));
        }
        worst = worst.max((ours - f1).abs());
    }
    ensure(worst <= 0.0005, format!("max |F1 - published| = {worst:.5} over 7 rows (tol 0.0005)"))
}

pub fn table1_f_beta() -> Outcome {
    let (mut worst_08, mut misses_07) = (0.0f64, 0);
    for (_, p, r, _, f07) in TABLE1 {
        worst_08 = worst_08.max((f_beta(p / 100.0, r / 100.0, 0.8) - f07).abs());
        if (f_beta(p / 100.0, r / 100.0, 0.7) - f07).abs() > 0.001 {
            misses_07 += 1;
        }
    }
    ensure(
        worst_08 <= 0.001 && misses_07 > 0,
        format!(
            "max |F(0.8) - published \"F0.7\"| = {worst_08:.5} (tol 0.001); beta = 0.7 misses {misses_07}/7 rows"
        ),
    )
}

pub fn fe_oracle() -> Outcome {
    let spec = RegressionSpec::two_way("y", &["x1", "x2"]);
    let (mut coef_err, mut cov_err) = (0.0f64, 0.0f64);
    for k in 0..50u64 {
        let p = random_panel(k, 20, 10, k % 2 == 0);
        let fit = fit_fe_ols(&spec, &p.data).map_err(|e| format!("panel {k}: {e}"))?;
        let o = dummy_ols(&p.y, &[&p.x1, &p.x2], &p.dummies());
        let v = brute_force_sandwich(&o.projector, &o.resid, &p.firm, 2);
        for j in 0..2 {
            coef_err = coef_err.max((fit.coefficients[j].estimate - o.beta[j]).abs());
            for l in 0..2 {
                cov_err = cov_err.max((fit.covariance[j][l] - v[(j, l)]).abs());
            }
        }
    }
    ensure(
        coef_err <= 1e-8 && cov_err <= 1e-10,
        format!("50 panels: max coef diff {coef_err:.1e} (tol 1e-8), max cluster cov diff {cov_err:.1e} (tol 1e-10)"),
    )
}

fn coefficient(fit: &FitResult, name: &str) -> f64 {
    fit.coefficient(name).map_or(f64::NAN, |c| c.estimate)
}

pub fn tsls_oracles() -> Outcome {
    let mut iv_spec = RegressionSpec::two_way("y", &["x2", "c"]);
    iv_spec.endogenous = Some("x1".into());
    iv_spec.instruments = vec!["z".into()];
    let (mut closed, mut to_ols, mut cd, mut fs) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..50u64 {
        let mut p = random_panel(1000 + k, 20, 10, k % 2 == 0);
        let fit = fit_2sls(&iv_spec, &p.data).map_err(|e| format!("panel {k}: {e}"))?;
        let d = p.dummies();
        let b = iv_closed_form(&p.y, &[&p.x1, &p.x2, &p.c], &[&p.z, &p.x2, &p.c], &d);
        for (name, want) in ["x1", "x2", "c"].iter().zip(&b) {
            closed = closed.max((coefficient(&fit, name) - want).abs());
        }
        let diag = &fit.diagnostics;
        let (first, cragg) = (diag.first_stage_f.unwrap(), diag.cragg_donald_f.unwrap());
        cd = cd.max(rel(cragg, first));
        let mut base: Vec<&[f64]> = vec![&p.x2, &p.c];
        base.extend(d.iter().map(Vec::as_slice));
        fs = fs.max(rel(first, nested_f(&p.x1, &base, &[&p.z])));

        p.data.add_column("x1_copy", p.x1.iter().copied().map(Some).collect()).unwrap();
        let mut same = iv_spec.clone();
        same.instruments = vec!["x1_copy".into()];
        let a = fit_2sls(&same, &p.data).map_err(|e| format!("panel {k}: {e}"))?;
        let o = fit_fe_ols(&RegressionSpec::two_way("y", &["x2", "c", "x1"]), &p.data).map_err(|e| e.to_string())?;
        for name in ["x1", "x2", "c"] {
            let (ca, co) = (a.coefficient(name).unwrap(), o.coefficient(name).unwrap());
            to_ols = to_ols.max((ca.estimate - co.estimate).abs()).max((ca.std_error - co.std_error).abs());
        }
    }
    ensure(
        closed <= 1e-10 && to_ols <= 1e-8 && cd <= 1e-8 && fs <= 1e-8,
        format!(
            "50 panels: closed form {closed:.1e} (tol 1e-10), Z=X vs OLS {to_ols:.1e} (tol 1e-8), \
             CD vs first-stage F {cd:.1e} (tol 1e-8), first-stage F vs dummy F {fs:.1e}"
        ),
    )
}

pub fn iv_monte_carlo() -> Outcome {
    let e = iv_experiment(2024, 500, 100, 5, 1.0);
    let z = e.ols.bias_z(e.beta);
    let tsls_err = (e.tsls.mean - e.beta).abs();
    ensure(
        z > 5.0 && tsls_err <= 0.02 && (0.92..=0.98).contains(&e.tsls.coverage),
        format!(
            "500 reps: OLS bias {:.4} = {z:.1} MC SEs (need > 5); 2SLS mean {:.4} (|err| {tsls_err:.4}, tol 0.02); \
             2SLS 95% coverage {:.1}% (95 +/- 3)",
            e.ols.bias(e.beta),
            e.tsls.mean,
            100.0 * e.tsls.coverage
        ),
    )
}

pub fn fe_monte_carlo() -> Outcome {
    let s = fe_coverage(77, 500, 200, 10, 1.0);
    ensure(
        (0.92..=0.98).contains(&s.coverage),
        format!("500 reps, N=200, T=10: clustered 95% CI coverage {:.1}% (95 +/- 3)", 100.0 * s.coverage),
    )
}

pub fn quantile() -> Outcome {
    let mut worst = 0.0f64;
    let instances = quantile_instances();
    for (i, (x, y, tau)) in instances.iter().enumerate() {
        let sol = solve_quantile(x, y, *tau).map_err(|e| format!("instance {i}: {e}"))?;
        let oracle = quantile_oracle(x, y, *tau);
        let recomputed = check_loss_oracle(&(y - x * DVector::from_vec(sol.beta.clone())).iter().copied().collect::<Vec<_>>(), *tau);
        worst = worst.max((sol.objective - oracle).abs()).max((recomputed - oracle).abs());
    }
    let mut median_exact = true;
    for k in 0..20u64 {
        let mut r = rng(k, 6);
        let n = 2 * r.random_range(2..40) + 1;
        let ys: Vec<f64> = (0..n).map(|_| normal(&mut r) * 10.0).collect();
        let sol = solve_quantile(&DMatrix::from_element(n, 1, 1.0), &DVector::from_vec(ys.clone()), 0.5)
            .map_err(|e| e.to_string())?;
        let mut sorted = ys;
        sorted.sort_by(f64::total_cmp);
        median_exact &= sol.beta[0] == sorted[n / 2];
    }
    // y = 1 + 2x + e, e ~ N(0,1): the tau-quantile line is (1 + z_tau, 2).
    let mut r = rng(9, 7);
    let n = 5000;
    let x = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { normal(&mut r) });
    let y = DVector::from_fn(n, |i, _| 1.0 + 2.0 * x[(i, 1)] + normal(&mut r));
    let mut shift = 0.0f64;
    for (tau, z) in [(0.25, -0.674_489_750_196_081_7), (0.5, 0.0), (0.75, 0.674_489_750_196_081_7)] {
        let b = solve_quantile(&x, &y, tau).map_err(|e| e.to_string())?.beta;
        shift = shift.max((b[0] - (1.0 + z)).abs()).max((b[1] - 2.0).abs());
    }
    ensure(
        worst <= 1e-6 && median_exact && shift <= 0.05,
        format!(
            "{} instances: max |objective - LP oracle| {worst:.1e} (tol 1e-6); median exact: {median_exact}; \
             location shift n=5000 max err {shift:.4} (tol 0.05)",
            instances.len()
        ),
    )
}

pub fn rho_invariance() -> Outcome {
    let dir = data_dir();
    let roster = Roster::new(formats::read_roster(&dir.join("roster.csv")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let locations = formats::read_locations(&dir.join("locations.csv")).map_err(|e| e.to_string())?;
    let base = formats::read_panel(&dir.join("panel.csv"), &["naics".to_string()]).map_err(|e| e.to_string())?;
    let keys: Vec<(String, i32)> = base.firm_ids().iter().cloned().zip(base.years().iter().copied()).collect();
    let iv100 = build_iv_column(&locations, &keys, &roster, 100.0).map_err(|e| e.to_string())?;
    let mut r = rng(3, 8);
    let mut firm_effect = std::collections::BTreeMap::new();
    for (f, _) in &keys {
        firm_effect.entry(f.as_str()).or_insert_with(|| normal(&mut r));
    }
    let (mut x, mut y) = (vec![], vec![]);
    for (i, (f, _)) in keys.iter().enumerate() {
        let e = normal(&mut r);
        let xi = 20.0 * iv100[i] + firm_effect[f.as_str()] + 0.5 * e + normal(&mut r);
        x.push(Some(xi));
        y.push(Some(0.5 * xi + e));
    }
    let mut spec = RegressionSpec::two_way("y", &["size"]);
    spec.endogenous = Some("x".into());
    spec.instruments = vec!["iv".into()];
    let fit_at = |rho: f64| -> Result<FitResult, String> {
        let mut d = base.clone();
        d.add_column("x", x.clone()).unwrap();
        d.add_column("y", y.clone()).unwrap();
        let iv = build_iv_column(&locations, &keys, &roster, rho).map_err(|e| e.to_string())?;
        d.add_column("iv", iv.into_iter().map(Some).collect()).unwrap();
        fit_2sls(&spec, &d).map_err(|e| e.to_string())
    };
    let reference = fit_at(100.0)?;
    let mut worst = 0.0f64;
    for rho in [1.0, 37.5, 250.0, 1.0e4] {
        let f = fit_at(rho)?;
        for (a, b) in f.coefficients.iter().zip(&reference.coefficients) {
            worst = worst.max(rel(a.t_stat, b.t_stat));
        }
        let (da, db) = (&f.diagnostics, &reference.diagnostics);
        for (a, b) in [
            (da.first_stage_f, db.first_stage_f),
            (da.cragg_donald_f, db.cragg_donald_f),
            (da.kleibergen_paap_f, db.kleibergen_paap_f),
        ] {
            worst = worst.max(rel(a.unwrap(), b.unwrap()));
        }
    }
    ensure(
        worst <= 1e-8,
        format!(
            "rho in {{1, 37.5, 250, 1e4}} vs 100 on the bundled panel: max relative change in t and F {worst:.1e} (tol 1e-8)"
        ),
    )
}

fn run_pipeline(out: &Path, seed: u64) -> Result<Pipeline, String> {
    let mut cfg = RunConfig::load(&data_dir().join("config.toml")).map_err(|e| e.to_string())?;
    cfg.out = out.to_path_buf();
    cfg.seed = seed;
    cfg.serve.event_log = out.join("events.jsonl");
    let p = Pipeline::new(cfg).map_err(|e| e.to_string())?;
    p.run_all().map_err(|e| e.to_string())?;
    Ok(p)
}

pub fn pipeline_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_pipeline(&tmp.path().join("a"), 42)?;
    let b = run_pipeline(&tmp.path().join("b"), 42)?;
    let read = |p: &Pipeline, name: &str| std::fs::read(p.artifact(name)).map_err(|e| e.to_string());
    let same_ind = read(&a, INDICATORS)? == read(&b, INDICATORS)?;
    let same_rep = read(&a, REPORT_TXT)? == read(&b, REPORT_TXT)?;
    let eval: EvaluationArtifact = formats::read_json(&a.artifact(EVALUATION)).map_err(|e| e.to_string())?;
    let acc = |m: &str| eval.model(m).map_or(f64::NAN, |r| r.accuracy);
    let (nb, major) = (acc("naive_bayes"), acc("majority"));
    let filings = a.load_filings().map_err(|e| e.to_string())?.len();
    ensure(
        filings == 20 && same_ind && same_rep && nb > 0.9 && major <= 0.5,
        format!(
            "{filings} filings, two runs: indicators identical {same_ind}, report identical {same_rep}; \
             NB accuracy {nb:.3} (> 0.9) vs majority {major:.3} (<= 0.5) on {} test sentences",
            eval.n_test
        ),
    )
}

pub fn channel_sign_recovery() -> Outcome {
    let s = channel_signs(11, 200, 150, 8);
    ensure(
        s.rate() >= 0.95,
        format!("{}/{} replications match the planted signs ({:.1}%, need >= 95%)", s.matched, s.reps, 100.0 * s.rate()),
    )
}

pub fn annotation_sequences() -> Outcome {
    let mut r = rng(5, 9);
    let mut events = 0usize;
    for k in 0..1000 {
        let ops = random_ops(&mut r, 4, 40);
        events += ops.len();
        run_sequence(&ops, 4).map_err(|e| format!("sequence {k}: {e}"))?;
    }
    Ok(format!("1000 random sequences ({events} operations): invariants hold, every prefix replays identically"))
}
