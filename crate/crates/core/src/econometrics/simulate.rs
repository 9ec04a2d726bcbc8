//! Synthetic panels with known data-generating processes, used to check
//! that the estimators recover planted parameters.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::panel::PanelDataset;
use super::production::ProductionColumns;
use super::suites::ChannelColumns;
use crate::indicators::{FirmYearIndicators, IndicatorMode};
use crate::sampling::substream;

/// Standard normal draw (Box-Muller).
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn keys(firms: usize, years: usize) -> Vec<(String, i32)> {
    (0..firms)
        .flat_map(|f| (0..years).map(move |t| (format!("F{f:04}"), 2010 + t as i32)))
        .collect()
}

fn some(v: Vec<f64>) -> Vec<Option<f64>> {
    v.into_iter().map(Some).collect()
}

/// y = β·x + a_i + g_t + e with errors and regressor both correlated
/// within firm, so that clustering matters. Columns `y`, `x`.
pub fn clustered_panel(seed: u64, firms: usize, years: usize, beta: f64) -> PanelDataset {
    let mut rng = substream(seed, 10);
    let g: Vec<f64> = (0..years).map(|_| normal(&mut rng)).collect();
    let (mut y, mut x) = (Vec::new(), Vec::new());
    for _ in 0..firms {
        let a = normal(&mut rng);
        let cx = normal(&mut rng);
        let ce = normal(&mut rng);
        for gt in &g {
            let xi = 0.7 * cx + normal(&mut rng) + 0.5 * a;
            let e = 0.7 * ce * xi.abs().min(2.0) + normal(&mut rng);
            x.push(xi);
            y.push(beta * xi + a + gt + e);
        }
    }
    let mut d = PanelDataset::new(keys(firms, years)).expect("unique keys");
    d.add_column("y", some(y)).expect("length");
    d.add_column("x", some(x)).expect("length");
    d
}

/// y = β·x + 0.5·c + a_i + e where corr(x, e) = 0.5 net of effects and
/// x = strength·z + 0.3·c + a_i + v. Columns `y`, `x`, `z`, `c`.
pub fn endogenous_panel(seed: u64, firms: usize, years: usize, beta: f64, strength: f64) -> PanelDataset {
    let mut rng = substream(seed, 11);
    let rho = core::f64::consts::FRAC_1_SQRT_2;
    let (mut y, mut x, mut z, mut c) = (vec![], vec![], vec![], vec![]);
    for _ in 0..firms {
        let a = normal(&mut rng);
        for _ in 0..years {
            let zi = normal(&mut rng);
            let ci = normal(&mut rng);
            let e = normal(&mut rng);
            // var(strength·z + v) = 2 at unit strength; cov(x, e) = rho.
            let v = rho * e + libm::sqrt(1.0 - rho * rho) * normal(&mut rng);
            let xi = strength * zi + 0.3 * ci + a + v;
            y.push(beta * xi + 0.5 * ci + a + e);
            x.push(xi);
            z.push(zi);
            c.push(ci);
        }
    }
    let mut d = PanelDataset::new(keys(firms, years)).expect("unique keys");
    for (name, col) in [("y", y), ("x", x), ("z", z), ("c", c)] {
        d.add_column(name, some(col)).expect("length");
    }
    d
}

/// Staggered adoption: about 60% of firms adopt in a random year.
fn adoption(rng: &mut impl Rng, years: usize) -> Option<usize> {
    rng.random_bool(0.6).then(|| rng.random_range(1..years.max(2)))
}

fn indicator(firm: &str, year: i32, flags: [bool; 6]) -> FirmYearIndicators {
    FirmYearIndicators {
        firm_id: String::from(firm),
        year,
        flags,
        dt: flags.iter().any(|f| *f),
        mode: IndicatorMode::Cumulative,
    }
}

/// Planted channel effects of adoption: +5% TFP, −3% cost, no effect on
/// income. Columns `revenue`, `cost`, `sales`, `capital`, `labor`,
/// `size`, plus the indicator columns.
pub fn channel_panel(seed: u64, firms: usize, years: usize) -> PanelDataset {
    let mut rng = substream(seed, 12);
    let g: Vec<f64> = (0..years).map(|_| 0.1 * normal(&mut rng)).collect();
    let ks = keys(firms, years);
    let mut inds = Vec::with_capacity(ks.len());
    let mut cols: [Vec<f64>; 6] = Default::default();
    for _ in 0..firms {
        let adopt = adoption(&mut rng, years);
        let (ai, ac, ay) = (normal(&mut rng), normal(&mut rng), normal(&mut rng));
        for (t, gt) in g.iter().enumerate() {
            let dt = adopt.is_some_and(|a| t >= a);
            let d = f64::from(u8::from(dt));
            let size = 2.0 + 0.3 * ai + 0.2 * normal(&mut rng);
            let ln_income = 3.0 + ai + gt + 0.8 * size + 0.05 * normal(&mut rng);
            let ln_cost = 2.8 + ac + gt + 0.8 * size - 0.03 * d + 0.05 * normal(&mut rng);
            let ln_k = 2.0 + size + 0.5 * normal(&mut rng);
            let ln_l = 1.0 + 0.5 * size + 0.5 * normal(&mut rng);
            let ln_y = 0.5 * ay + gt + 0.05 * d + 0.3 * ln_k + 0.7 * ln_l + 0.05 * normal(&mut rng);
            for (c, v) in cols.iter_mut().zip([ln_income, ln_cost, ln_y, ln_k, ln_l]) {
                c.push(libm::exp(v));
            }
            cols[5].push(size);
            inds.push(indicator(&ks[inds.len()].0, ks[inds.len()].1, [dt, false, false, false, false, false]));
        }
    }
    let mut data = PanelDataset::new(ks).expect("unique keys");
    for (name, col) in ["revenue", "cost", "sales", "capital", "labor", "size"].iter().zip(cols) {
        data.add_column(name, some(col)).expect("length");
    }
    data.attach_indicators(&inds).expect("fresh columns");
    data
}

/// Column mapping for [`channel_panel`].
pub fn channel_columns() -> ChannelColumns {
    ChannelColumns {
        income: "revenue".into(),
        cost: "cost".into(),
        production: ProductionColumns {
            output: "sales".into(),
            capital: "capital".into(),
            labor: "labor".into(),
        },
        eva: None,
        controls: vec!["size".into()],
    }
}

/// Per-technology effects on `roa`: +0.02 for every technology except
/// blockchain, which has none. Adopters use one technology, or AI together
/// with big data. Columns `roa`, `size`, plus the indicator columns.
pub fn technology_panel(seed: u64, firms: usize, years: usize) -> PanelDataset {
    let mut rng = substream(seed, 13);
    let effect = [0.02, 0.02, 0.02, 0.02, 0.0, 0.02];
    let g: Vec<f64> = (0..years).map(|_| 0.01 * normal(&mut rng)).collect();
    let ks = keys(firms, years);
    let (mut roa, mut size, mut inds) = (vec![], vec![], vec![]);
    for f in 0..firms {
        let a = 0.03 * normal(&mut rng);
        let adopt = adoption(&mut rng, years);
        let mut techs = [false; 6];
        // Firms 0..6 cover every single technology; the rest draw.
        let pick = if f < 6 { f } else { rng.random_range(0..7) };
        if pick == 6 {
            techs[0] = true;
            techs[1] = true;
        } else {
            techs[pick] = true;
        }
        for (t, gt) in g.iter().enumerate() {
            let on = adopt.is_some_and(|s| t >= s) || (f < 6 && t + 1 == years);
            let flags = if on { techs } else { [false; 6] };
            let s = 1.0 + 0.5 * normal(&mut rng);
            let lift: f64 = flags.iter().zip(effect).filter(|p| *p.0).map(|p| p.1).sum();
            roa.push(a + gt + 0.01 * s + lift + 0.01 * normal(&mut rng));
            size.push(s);
            let k = inds.len();
            inds.push(indicator(&ks[k].0, ks[k].1, flags));
        }
    }
    let mut data = PanelDataset::new(ks).expect("unique keys");
    data.add_column("roa", some(roa)).expect("length");
    data.add_column("size", some(size)).expect("length");
    data.attach_indicators(&inds).expect("fresh columns");
    data
}
