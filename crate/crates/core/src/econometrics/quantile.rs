//! Quantile regression.
//!
//! The check loss is minimized in two phases. Smoothed iteratively
//! reweighted least squares gets close to the optimum cheaply; an exact
//! descent over basic solutions (fits interpolating p observations) then
//! lands on an optimal vertex, so the reported objective is the true
//! minimum rather than a smoothed approximation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::linalg::{check_full_rank, dot, matrix_from_columns, to_rows};
use super::panel::{estimation_sample, FixedEffect, PanelDataset, RegressionSpec};
use super::{Coefficient, Diagnostics, Estimator, FitResult};
use crate::sampling::substream;
use crate::{Error, Result};

pub const DEFAULT_TAUS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

const IRLS_MAX: usize = 100;
const IRLS_TOL: f64 = 1e-9;

/// Σ ρ_τ(u) with ρ_τ(u) = u·(τ − 1{u<0}).
pub fn check_loss(residuals: &[f64], tau: f64) -> f64 {
    residuals
        .iter()
        .map(|&u| if u < 0.0 { u * (tau - 1.0) } else { u * tau })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub irls_iterations: usize,
    pub pivots: usize,
}

fn residuals(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> Vec<f64> {
    (y - x * beta).iter().copied().collect()
}

fn irls(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Result<(DVector<f64>, usize)> {
    let xtx = x.transpose() * x;
    let mut beta = xtx
        .cholesky()
        .ok_or_else(|| Error::Collinear(String::from("design matrix")))?
        .solve(&(x.transpose() * y));
    let mut r = residuals(x, y, &beta);
    let scale = r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64;
    let floor = 1e-10 * scale.max(1e-300);
    let mut eps = (0.1 * scale).max(floor);
    let mut prev = check_loss(&r, tau);
    for it in 1..=IRLS_MAX {
        let w: Vec<f64> = r
            .iter()
            .map(|&u| (if u < 0.0 { 1.0 - tau } else { tau }) / u.abs().max(eps))
            .collect();
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let Some(chol) = (xw.transpose() * x).cholesky() else {
            return Ok((beta, it));
        };
        let cand = chol.solve(&(xw.transpose() * y));
        let rc = residuals(x, y, &cand);
        let obj = check_loss(&rc, tau);
        if obj <= prev {
            beta = cand;
            r = rc;
        }
        if (prev - obj).abs() < IRLS_TOL * prev.max(1.0) {
            if eps <= floor {
                return Ok((beta, it));
            }
            eps = (eps * 0.1).max(floor);
        }
        prev = prev.min(obj);
    }
    Ok((beta, IRLS_MAX))
}

/// Greedily picks p linearly independent rows, preferring small |r|.
fn initial_basis(x: &DMatrix<f64>, r: &[f64]) -> Result<Vec<usize>> {
    let p = x.ncols();
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut basis = Vec::with_capacity(p);
    for i in order {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        let norm0 = dot(&row, &row);
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row;
        for b in &q {
            let d = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
        }
        let nn = dot(&v, &v);
        if nn > 1e-10 * norm0 {
            let s = libm::sqrt(nn);
            v.iter_mut().for_each(|a| *a /= s);
            q.push(v);
            basis.push(i);
            if basis.len() == p {
                return Ok(basis);
            }
        }
    }
    Err(Error::Collinear(String::from("design matrix")))
}

/// Descends along edges between basic solutions until no edge improves.
fn vertex_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    start: &DVector<f64>,
) -> Result<(DVector<f64>, usize)> {
    let (n, p) = x.shape();
    let mut basis = initial_basis(x, &residuals(x, y, start))?;
    let zero_tol = 1e-12 * y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let max_pivots = 50 * n + 1000;
    let mut in_basis = alloc::vec![false; n];
    for pivot in 0..=max_pivots {
        in_basis.iter_mut().for_each(|b| *b = false);
        basis.iter().for_each(|&i| in_basis[i] = true);
        let xh = DMatrix::from_fn(p, p, |a, b| x[(basis[a], b)]);
        let inv = xh
            .try_inverse()
            .ok_or_else(|| Error::Collinear(String::from("design matrix")))?;
        let yh = DVector::from_fn(p, |a, _| y[basis[a]]);
        let beta = &inv * yh;
        let mut r = residuals(x, y, &beta);
        for &i in &basis {
            r[i] = 0.0;
        }
        // a[(i, j)] = x_i'd_j where d_j moves basis point j off its fit.
        let a = x * &inv;

        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..p {
            for s in [1.0, -1.0] {
                let mut g = if s > 0.0 { 1.0 - tau } else { tau };
                for i in 0..n {
                    if in_basis[i] {
                        continue;
                    }
                    let ai = s * a[(i, j)];
                    g += if r[i] > zero_tol {
                        -ai * tau
                    } else if r[i] < -zero_tol {
                        ai * (1.0 - tau)
                    } else {
                        (-ai * tau).max(ai * (1.0 - tau))
                    };
                }
                if best.is_none_or(|(bg, _, _)| g < bg) {
                    best = Some((g, j, s));
                }
            }
        }
        let (g, j, s) = best.expect("p >= 1");
        if g >= -1e-12 {
            return Ok((beta, pivot));
        }
        let mut breaks: Vec<(f64, f64, usize)> = (0..n)
            .filter(|&i| !in_basis[i])
            .filter_map(|i| {
                let ai = s * a[(i, j)];
                if ai == 0.0 || r[i].abs() <= zero_tol {
                    return None;
                }
                let t = r[i] / ai;
                (t > 0.0).then_some((t, ai.abs(), i))
            })
            .collect();
        breaks.sort_by(|u, v| u.0.total_cmp(&v.0).then(u.2.cmp(&v.2)));
        let mut slope = g;
        let mut entering = None;
        for &(_, w, i) in &breaks {
            slope += w;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        match entering {
            Some(i) => basis[j] = i,
            None => return Err(Error::invalid("check loss unbounded along a descent edge")),
        }
    }
    let beta = start.clone();
    Err(Error::NoConvergence {
        iterations: max_pivots,
        objective: check_loss(&residuals(x, y, &beta), tau),
    })
}

/// Minimizes Σ ρ_τ(y − Xb) over b.
pub fn solve_quantile(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Result<QuantileSolution> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("quantile {tau} outside (0, 1)")));
    }
    if x.nrows() < x.ncols() || x.ncols() == 0 {
        return Err(Error::invalid("quantile fit needs at least as many rows as columns"));
    }
    let (warm, irls_iterations) = irls(x, y, tau)?;
    let (beta, pivots) = vertex_descent(x, y, tau, &warm)?;
    let objective = check_loss(&residuals(x, y, &beta), tau);
    Ok(QuantileSolution {
        beta: beta.iter().copied().collect(),
        objective,
        irls_iterations,
        pivots,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileOptions {
    pub taus: Vec<f64>,
    /// Adds firm dummies. Off by default: with few years per firm the
    /// firm intercepts are poorly identified at each quantile.
    pub firm_dummies: bool,
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for QuantileOptions {
    fn default() -> Self {
        Self {
            taus: DEFAULT_TAUS.to_vec(),
            firm_dummies: false,
            bootstrap_reps: 200,
            seed: 0,
        }
    }
}

/// Quantile regressions of the spec's dependent variable, one per τ.
///
/// The design is an intercept, the regressors, year dummies when the spec
/// lists YEAR effects and firm dummies when `options.firm_dummies` is set;
/// a FIRM entry in the spec alone does not add firm dummies. Standard
/// errors come from a firm-cluster bootstrap: each replication resamples
/// whole firms with replacement from the seeded substream (seed, rep).
/// Dummy coefficients are not reported. `r2_within` holds the
/// Koenker-Machado pseudo R² (1 − V(τ)/V₀(τ) against an intercept-only fit).
pub fn fit_quantile(spec: &RegressionSpec, data: &PanelDataset, options: &QuantileOptions) -> Result<Vec<FitResult>> {
    if spec.endogenous.is_some() {
        return Err(Error::invalid("quantile regression does not take an endogenous regressor"));
    }
    if let Some(t) = options.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::invalid(format!("quantile {t} outside (0, 1)")));
    }
    if options.bootstrap_reps < 2 {
        return Err(Error::invalid("at least two bootstrap replications are needed"));
    }
    let sample = estimation_sample(spec, data)?;
    let n = sample.rows.len();
    let ones = alloc::vec![1.0; n];
    let mut names: Vec<String> = alloc::vec![String::from("_cons")];
    names.extend(spec.regressors.iter().cloned());
    let n_report = names.len();
    let mut cols: Vec<Vec<f64>> = alloc::vec![ones];
    cols.extend(sample.columns[1..].iter().cloned());
    if spec.has_fe(FixedEffect::Year) {
        for t in 1..sample.n_years {
            cols.push(sample.year.iter().map(|&y| f64::from(u8::from(y == t))).collect());
            names.push(format!("_year{t}"));
        }
    }
    if options.firm_dummies {
        for f in 1..sample.n_firms {
            cols.push(sample.firm.iter().map(|&g| f64::from(u8::from(g == f))).collect());
            names.push(format!("_firm{f}"));
        }
    }
    let col_refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let refs: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    check_full_rank(&col_refs, &refs, &names)?;
    let x = matrix_from_columns(n, &col_refs);
    let y = DVector::from_column_slice(&sample.columns[0]);

    let mut by_firm: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &f) in sample.firm.iter().enumerate() {
        by_firm.entry(f).or_default().push(i);
    }
    let clusters: Vec<Vec<usize>> = by_firm.into_values().collect();
    let g = clusters.len();
    if g < 2 {
        return Err(Error::invalid("cluster bootstrap needs at least two firms"));
    }

    let mut out = Vec::with_capacity(options.taus.len());
    for &tau in &options.taus {
        let sol = solve_quantile(&x, &y, tau)?;
        let v0 = {
            let yv: Vec<f64> = y.iter().copied().collect();
            let mut sorted = yv.clone();
            sorted.sort_by(f64::total_cmp);
            // An intercept-only optimum sits at an order statistic.
            let k = libm::ceil(tau * n as f64) as usize;
            let q = sorted[k.clamp(1, n) - 1];
            check_loss(&yv.iter().map(|v| v - q).collect::<Vec<_>>(), tau)
        };
        let mut draws: Vec<Vec<f64>> = Vec::with_capacity(options.bootstrap_reps);
        for rep in 0..options.bootstrap_reps {
            let mut rng = substream(options.seed, rep as u64);
            let rows: Vec<usize> = (0..g)
                .flat_map(|_| clusters[rng.random_range(0..g)].iter().copied())
                .collect();
            let xb = DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]);
            let yb = DVector::from_fn(rows.len(), |i, _| y[rows[i]]);
            // A replicate that drops every observation of some year is
            // rank deficient; it is skipped and the count reported.
            if let Ok(s) = solve_quantile(&xb, &yb, tau) {
                draws.push(s.beta[..n_report].to_vec());
            }
        }
        if draws.len() < 2 {
            return Err(Error::invalid("too few usable bootstrap replications"));
        }
        let m = draws.len() as f64;
        let means: Vec<f64> = (0..n_report).map(|j| draws.iter().map(|d| d[j]).sum::<f64>() / m).collect();
        let cov = DMatrix::from_fn(n_report, n_report, |a, b| {
            draws.iter().map(|d| (d[a] - means[a]) * (d[b] - means[b])).sum::<f64>() / (m - 1.0)
        });
        let df = (g - 1) as f64;
        let coefficients = (0..n_report)
            .map(|j| Coefficient::new(names[j].clone(), sol.beta[j], libm::sqrt(cov[(j, j)]), df))
            .collect();
        out.push(FitResult {
            estimator: Estimator::Quantile,
            dependent: spec.dependent.clone(),
            coefficients,
            covariance: to_rows(&cov),
            n_obs: n,
            n_clusters: Some(g),
            df,
            r2_within: if v0 > 0.0 { 1.0 - sol.objective / v0 } else { f64::NAN },
            tau: Some(tau),
            diagnostics: Diagnostics {
                bootstrap_reps: Some(draws.len()),
                objective: Some(sol.objective),
                ..Diagnostics::default()
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    /// Every basic solution through `p` observations; the best one is a
    /// global optimum of the check loss.
    fn enumerate_oracle(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> f64 {
        let (n, p) = x.shape();
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..p).collect();
        loop {
            let xh = DMatrix::from_fn(p, p, |a, b| x[(idx[a], b)]);
            if let Some(inv) = xh.try_inverse() {
                let b = inv * DVector::from_fn(p, |a, _| y[idx[a]]);
                best = best.min(check_loss(&residuals(x, y, &b), tau));
            }
            // next combination
            let mut k = p;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                if idx[k] < n - p + k {
                    idx[k] += 1;
                    for m in k + 1..p {
                        idx[m] = idx[m - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn median_of_odd_sample() {
        let v = [7.0, -1.0, 3.5, 10.0, 2.0, 2.5, 100.0];
        let s = solve_quantile(&col(&[1.0; 7]), &DVector::from_column_slice(&v), 0.5).unwrap();
        assert_eq!(s.beta[0], 3.5);
    }

    #[test]
    fn first_quartile_of_one_to_hundred() {
        let y: Vec<f64> = (1..=100).map(f64::from).collect();
        let x = col(&[1.0; 100]);
        let yv = DVector::from_column_slice(&y);
        let s = solve_quantile(&x, &yv, 0.25).unwrap();
        // Any point in [25, 26] is optimal; the oracle enumerates all.
        assert!((s.objective - enumerate_oracle(&x, &yv, 0.25)).abs() < 1e-6);
        assert!((25.0..=26.0).contains(&s.beta[0]));
        let u: Vec<f64> = y.iter().map(|v| v - s.beta[0]).collect();
        let neg = u.iter().filter(|r| **r < 0.0).count() as f64;
        let nonpos = u.iter().filter(|r| **r <= 0.0).count() as f64;
        assert!(neg <= 25.0 && 25.0 <= nonpos);
    }

    #[test]
    fn bad_tau_rejected() {
        assert!(solve_quantile(&col(&[1.0]), &DVector::from_column_slice(&[1.0]), 1.0).is_err());
    }

    fn lcg_points(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { next() * 3.0 });
        let y = DVector::from_fn(n, |i, _| {
            let mut v = 1.0;
            for j in 1..p {
                v += 0.7 * x[(i, j)];
            }
            v + next() * next().abs() * 4.0
        });
        (x, y)
    }

    #[test]
    fn bivariate_twenty_points() {
        let (x, y) = lcg_points(42, 20, 2);
        for tau in DEFAULT_TAUS {
            let s = solve_quantile(&x, &y, tau).unwrap();
            assert!((s.objective - enumerate_oracle(&x, &y, tau)).abs() < 1e-6, "tau {tau}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn matches_subset_oracle(seed in 0u64..1_000_000, n in 6usize..30, p in 1usize..4, tau in 0.05f64..0.95) {
            let (x, y) = lcg_points(seed, n, p);
            let s = solve_quantile(&x, &y, tau).unwrap();
            prop_assert!(s.objective <= enumerate_oracle(&x, &y, tau) + 1e-6);
        }

        #[test]
        fn intercept_only_sign_counts(v in proptest::collection::vec(-50.0f64..50.0, 1..40), tau in 0.02f64..0.98) {
            let n = v.len();
            let s = solve_quantile(&col(&vec![1.0; n]), &DVector::from_column_slice(&v), tau).unwrap();
            let neg = v.iter().filter(|y| **y < s.beta[0]).count() as f64;
            let nonpos = v.iter().filter(|y| **y <= s.beta[0]).count() as f64;
            prop_assert!(neg <= n as f64 * tau + 1e-9 && n as f64 * tau <= nonpos + 1e-9);
        }
    }
}
