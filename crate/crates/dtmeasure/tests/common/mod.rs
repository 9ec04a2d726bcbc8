//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls the estimators under test: each oracle rebuilds its
//! answer from explicit dummy matrices or brute-force enumeration.

#![allow(dead_code)]

pub mod criteria;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dtmeasure_core::annotation::{Board, EventKind, Label, Status};
use dtmeasure_core::econometrics::simulate::normal;
use dtmeasure_core::econometrics::PanelDataset;
use dtmeasure_core::sampling::substream;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data_dir() -> PathBuf {
    workspace_root().join("data")
}

/// Copies the bundled data directory under `dest` so a test can edit it.
/// The copied config writes its outputs to `dest/out`.
pub fn copy_data(dest: &Path) -> PathBuf {
    fn copy(from: &Path, to: &Path) {
        std::fs::create_dir_all(to).unwrap();
        for entry in std::fs::read_dir(from).unwrap() {
            let entry = entry.unwrap();
            let target = to.join(entry.file_name());
            if entry.file_type().unwrap().is_dir() {
                copy(&entry.path(), &target);
            } else {
                std::fs::copy(entry.path(), target).unwrap();
            }
        }
    }
    let data = dest.join("data");
    copy(&data_dir(), &data);
    data
}

// ------------------------------------------------------------ Table 1

/// Published rows: model, precision %, recall %, F1, "F0.7".
pub const TABLE1: [(&str, f64, f64, f64, f64); 7] = [
    ("GaussianNB", 49.63, 52.63, 0.5109, 0.5076),
    ("SVM", 65.75, 56.29, 0.6065, 0.6170),
    ("Voting", 66.59, 58.44, 0.6225, 0.6315),
    ("NN", 62.96, 61.89, 0.6242, 0.6254),
    ("KNN", 64.12, 54.72, 0.5905, 0.6009),
    ("BERT", 76.84, 73.56, 0.7517, 0.7553),
    ("LLaMA3", 82.77, 76.35, 0.7943, 0.8014),
];

/// Textbook F-beta, written out independently of the library.
pub fn f_beta_oracle(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (b2 * p + r)
}

/// Parses Table 1 out of paper.md when the file is present.
pub fn table1_from_paper() -> Option<Vec<(String, f64, f64, f64, f64)>> {
    let text = std::fs::read_to_string(workspace_root().join("paper.md")).ok()?;
    let pct = |s: &str| s.trim().trim_end_matches('%').parse::<f64>().ok();
    let rows = text
        .lines()
        .filter_map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            if c.len() != 6 || !TABLE1.iter().any(|t| t.0 == c[0]) {
                return None;
            }
            Some((c[0].to_string(), pct(c[2])?, pct(c[3])?, pct(c[4])?, pct(c[5])?))
        })
        .collect();
    Some(rows)
}

// ------------------------------------------------------------- panels

pub fn rng(seed: u64, stream: u64) -> impl Rng {
    substream(seed, stream)
}

/// Small random panel: every firm is seen in the first year (so the
/// two-way effects are connected), other firm-years drop out at random.
/// Columns `y`, `x1`, `x2`, `z`, `c`, with `x1` endogenous and `z` its
/// instrument.
pub struct RandomPanel {
    pub data: PanelDataset,
    pub firm: Vec<usize>,
    pub year: Vec<usize>,
    pub n_firms: usize,
    pub n_years: usize,
    pub y: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
}

pub fn random_panel(seed: u64, max_firms: usize, max_years: usize, balanced: bool) -> RandomPanel {
    let mut r = rng(seed, 77);
    let n_firms = r.random_range(3..=max_firms);
    let n_years = r.random_range(3..=max_years);
    let (mut keys, mut firm, mut year) = (vec![], vec![], vec![]);
    for f in 0..n_firms {
        for t in 0..n_years {
            if t == 0 || balanced || r.random_bool(0.8) {
                keys.push((format!("f{f:02}"), 2000 + t as i32));
                firm.push(f);
                year.push(t);
            }
        }
    }
    let fe: Vec<f64> = (0..n_firms).map(|_| normal(&mut r)).collect();
    let te: Vec<f64> = (0..n_years).map(|_| normal(&mut r)).collect();
    let n = keys.len();
    let (mut y, mut x1, mut x2, mut z, mut c) = (vec![], vec![], vec![], vec![], vec![]);
    for i in 0..n {
        let (a, g) = (fe[firm[i]], te[year[i]]);
        let zi = normal(&mut r);
        let ci = normal(&mut r);
        let e = normal(&mut r);
        let xi = 0.8 * zi + 0.3 * ci + a + 0.5 * e + normal(&mut r);
        let x2i = normal(&mut r) + 0.5 * g;
        x1.push(xi);
        x2.push(x2i);
        z.push(zi);
        c.push(ci);
        y.push(1.5 * xi - 0.7 * x2i + 0.4 * ci + a + g + e * (1.0 + 0.5 * zi.abs()));
    }
    let mut data = PanelDataset::new(keys).unwrap();
    for (name, col) in [("y", &y), ("x1", &x1), ("x2", &x2), ("z", &z), ("c", &c)] {
        data.add_column(name, col.iter().copied().map(Some).collect()).unwrap();
    }
    RandomPanel {
        data,
        firm,
        year,
        n_firms,
        n_years,
        y,
        x1,
        x2,
        z,
        c,
    }
}

impl RandomPanel {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Firm dummies for every firm and year dummies for all but the first
    /// year.
    pub fn dummies(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut cols = Vec::new();
        for f in 0..self.n_firms {
            cols.push((0..n).map(|i| f64::from(u8::from(self.firm[i] == f))).collect());
        }
        for t in 1..self.n_years {
            cols.push((0..n).map(|i| f64::from(u8::from(self.year[i] == t))).collect());
        }
        cols
    }
}

pub fn matrix(n: usize, cols: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Dummy-variable OLS: coefficients of the leading `k` columns, the rows
/// of (X'X)⁻¹X' belonging to them, and the residuals.
pub struct DummyOls {
    pub beta: Vec<f64>,
    pub projector: DMatrix<f64>,
    pub resid: DVector<f64>,
}

pub fn dummy_ols(y: &[f64], regressors: &[&[f64]], dummies: &[Vec<f64>]) -> DummyOls {
    let n = y.len();
    let k = regressors.len();
    let mut cols: Vec<&[f64]> = regressors.to_vec();
    cols.extend(dummies.iter().map(Vec::as_slice));
    let x = matrix(n, &cols);
    let yv = DVector::from_column_slice(y);
    let xtx_inv = (x.transpose() * &x).try_inverse().expect("dummy design has full rank");
    let proj = &xtx_inv * x.transpose();
    let b = &proj * &yv;
    let resid = &yv - &x * &b;
    DummyOls {
        beta: b.rows(0, k).iter().copied().collect(),
        projector: proj.rows(0, k).into_owned(),
        resid,
    }
}

/// Σ_g (A_g u_g)(A_g u_g)' assembled cluster by cluster, times the
/// G/(G−1)·(N−1)/(N−K) factor.
pub fn brute_force_sandwich(proj: &DMatrix<f64>, resid: &DVector<f64>, cluster: &[usize], k_reported: usize) -> DMatrix<f64> {
    let k = proj.nrows();
    let n = resid.len();
    let groups: BTreeSet<usize> = cluster.iter().copied().collect();
    let mut v = DMatrix::zeros(k, k);
    for g in &groups {
        let mut s = DVector::zeros(k);
        for i in (0..n).filter(|&i| cluster[i] == *g) {
            s += proj.column(i) * resid[i];
        }
        v += &s * s.transpose();
    }
    let (g, n, kk) = (groups.len() as f64, n as f64, k_reported as f64);
    v * (g / (g - 1.0) * (n - 1.0) / (n - kk))
}

/// Just-identified IV ratio (Z'X)⁻¹Z'y with dummies among both Z and X.
pub fn iv_closed_form(y: &[f64], x: &[&[f64]], z: &[&[f64]], dummies: &[Vec<f64>]) -> Vec<f64> {
    let n = y.len();
    let mut xc: Vec<&[f64]> = x.to_vec();
    xc.extend(dummies.iter().map(Vec::as_slice));
    let mut zc: Vec<&[f64]> = z.to_vec();
    zc.extend(dummies.iter().map(Vec::as_slice));
    let (xm, zm) = (matrix(n, &xc), matrix(n, &zc));
    let b = (zm.transpose() * &xm).try_inverse().expect("Z'X invertible") * zm.transpose() * DVector::from_column_slice(y);
    b.rows(0, x.len()).iter().copied().collect()
}

/// Classical F for adding `extra` to a regression of `y` on `base`.
pub fn nested_f(y: &[f64], base: &[&[f64]], extra: &[&[f64]]) -> f64 {
    let rss = |cols: &[&[f64]]| {
        let x = matrix(y.len(), cols);
        let yv = DVector::from_column_slice(y);
        let b = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &yv;
        let u = &yv - x * b;
        u.dot(&u)
    };
    let mut full = base.to_vec();
    full.extend_from_slice(extra);
    let (r0, r1) = (rss(base), rss(&full));
    let df = y.len() as f64 - full.len() as f64;
    ((r0 - r1) / extra.len() as f64) / (r1 / df)
}

// ----------------------------------------------------------- quantile

pub fn check_loss_oracle(u: &[f64], tau: f64) -> f64 {
    u.iter().map(|&v| if v < 0.0 { (tau - 1.0) * v } else { tau * v }).sum()
}

/// Minimum check loss over all basic solutions: every p-subset of rows
/// with an invertible design fits its points exactly, and some such
/// vertex is optimal for the linear program.
pub fn quantile_oracle(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> f64 {
    let (n, p) = x.shape();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let xs = DMatrix::from_fn(p, p, |i, j| x[(idx[i], j)]);
        let ys = DVector::from_fn(p, |i, _| y[idx[i]]);
        if let Some(inv) = xs.try_inverse() {
            let b = inv * ys;
            let u: Vec<f64> = (y - x * b).iter().copied().collect();
            best = best.min(check_loss_oracle(&u, tau));
        }
        // Next combination in lexicographic order.
        let mut i = p;
        while i > 0 && idx[i - 1] == n - p + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for j in i..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Seeded small quantile instances: (design with intercept, response, tau).
pub fn quantile_instances() -> Vec<(DMatrix<f64>, DVector<f64>, f64)> {
    let mut out = Vec::new();
    for k in 0..40u64 {
        let mut r = rng(k, 5);
        let n = r.random_range(8..=30);
        let p = 1 + (k as usize % 3);
        let tau = [0.1, 0.25, 0.5, 0.75, 0.9][k as usize % 5];
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { normal(&mut r) });
        let y = DVector::from_fn(n, |i, _| {
            let signal: f64 = (1..p).map(|j| x[(i, j)] * j as f64).sum();
            // Heavy tails every other instance.
            let e = if k % 2 == 0 { normal(&mut r) } else { normal(&mut r) / normal(&mut r).abs().max(0.2) };
            signal + e
        });
        out.push((x, y, tau));
    }
    out
}

// --------------------------------------------------------- annotation

#[derive(Debug, Clone, Copy)]
pub enum Op {
    Label(usize, usize, usize),
    Adjudicate(usize, usize),
    Assign(usize),
}

pub fn all_labels() -> Vec<Label> {
    Label::CLASSES.into_iter().chain([Label::Excluded]).collect()
}

pub fn random_ops(r: &mut impl Rng, sentences: usize, max_len: usize) -> Vec<Op> {
    let len = r.random_range(0..=max_len);
    (0..len)
        .map(|_| match r.random_range(0..6) {
            0..=3 => Op::Label(r.random_range(0..sentences), r.random_range(0..3), r.random_range(0..9)),
            4 => Op::Adjudicate(r.random_range(0..sentences), r.random_range(0..9)),
            _ => Op::Assign(r.random_range(0..3)),
        })
        .collect()
}

/// Status rules stated directly from the event log, checked for every task.
pub fn annotation_invariants(b: &Board) -> Result<(), String> {
    for (i, st) in b.states().enumerate() {
        let labels: Vec<_> = b
            .events()
            .iter()
            .filter(|e| e.sentence_id == st.sentence_id && e.kind == EventKind::Label)
            .collect();
        let adj = b
            .events()
            .iter()
            .filter(|e| e.sentence_id == st.sentence_id && e.kind == EventKind::Adjudicate)
            .count();
        let fail = |what: &str| Err(format!("{}: {what} ({:?})", st.sentence_id, st));
        if labels.len() > 2 || adj > 1 {
            return fail("too many events");
        }
        let agreed = labels.len() == 2 && labels[0].label == labels[1].label;
        if (st.status == Status::Agreed) != (agreed && labels[0].label.is_substantive()) {
            return fail("agreed status");
        }
        if (st.status == Status::Disputed) != (labels.len() == 2 && !agreed && adj == 0) {
            return fail("disputed status");
        }
        if st.final_label.is_some() != matches!(st.status, Status::Agreed | Status::Adjudicated) {
            return fail("final label presence");
        }
        if st.final_label == Some(Label::Excluded) {
            return fail("excluded final label");
        }
        let distinct: BTreeSet<&str> = labels.iter().map(|e| e.annotator_id.as_str()).collect();
        if distinct.len() != labels.len() {
            return fail("annotator labelled twice");
        }
        if b.pool()[i] != st.sentence_id {
            return fail("pool order");
        }
    }
    let p = b.progress();
    if p.unlabeled + p.single + p.agreed + p.disputed + p.adjudicated + p.excluded != p.total {
        return Err("progress counts do not add up".into());
    }
    Ok(())
}

/// Runs one random sequence, checking invariants after every operation and
/// prefix replay at the end.
pub fn run_sequence(ops: &[Op], sentences: usize) -> Result<(), String> {
    let labels = all_labels();
    let pool: Vec<String> = (1..=sentences).map(|i| format!("s{i}")).collect();
    let mut b = Board::new(pool.clone()).map_err(|e| e.to_string())?;
    let mut snapshots = vec![b.states().collect::<Vec<_>>()];
    for op in ops {
        let sid = |i: usize| format!("s{}", i + 1);
        let accepted = match *op {
            Op::Label(s, a, l) => b.submit_label(&sid(s), &format!("a{a}"), labels[l], 0).is_ok(),
            Op::Adjudicate(s, l) => b.adjudicate(&sid(s), "judge", labels[l], 0).is_ok(),
            Op::Assign(a) => {
                let who = format!("a{a}");
                if let Some(got) = b.assign_next(&who) {
                    let st = b.state(&got.sentence_id).unwrap();
                    if !matches!(st.status, Status::Unlabeled | Status::Single) {
                        return Err(format!("assigned a {:?} task", st.status));
                    }
                    if b.labels(&got.sentence_id).unwrap().iter().any(|(x, _)| *x == who) {
                        return Err("assigned a task the annotator already labelled".into());
                    }
                }
                false
            }
        };
        annotation_invariants(&b)?;
        if accepted {
            snapshots.push(b.states().collect());
        }
    }
    for (k, snap) in snapshots.iter().enumerate() {
        let replayed = Board::replay(pool.clone(), &b.events()[..k]).map_err(|e| e.to_string())?;
        if &replayed.states().collect::<Vec<_>>() != snap {
            return Err(format!("replay of the first {k} events differs"));
        }
    }
    Ok(())
}
