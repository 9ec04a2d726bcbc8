//! Firm-year technology indicators and their validation tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classify::Prediction;
use crate::corpus::Sentence;
use crate::{Error, Result, Technology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IndicatorMode {
    Contemporaneous,
    /// A flag switches on at first detected use and stays on.
    #[default]
    Cumulative,
}

impl IndicatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorMode::Contemporaneous => "CONTEMPORANEOUS",
            IndicatorMode::Cumulative => "CUMULATIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmYearIndicators {
    pub firm_id: String,
    pub year: i32,
    /// Indexed by [`Technology::index`].
    pub flags: [bool; 6],
    pub dt: bool,
    pub mode: IndicatorMode,
}

impl FirmYearIndicators {
    pub fn flag(&self, tech: Technology) -> bool {
        self.flags[tech.index()]
    }
}

/// Turns sentence predictions into firm-year dummies.
///
/// `firm_years` lists every filing; each gets a row even when none of its
/// sentences is predicted as a technology. A technology is flagged for a
/// firm-year when at least `min_sentences` of its sentences carry that label;
/// in cumulative mode flags are then OR-ed forward over the firm's years.
/// Rows come out sorted by (firm, year).
pub fn build_indicators(
    predictions: &[Prediction],
    sentences: &[Sentence],
    firm_years: &[(String, i32)],
    mode: IndicatorMode,
    min_sentences: usize,
) -> Result<Vec<FirmYearIndicators>> {
    let min_sentences = min_sentences.max(1);
    let by_id: BTreeMap<&str, &Sentence> =
        sentences.iter().map(|s| (s.sentence_id.as_str(), s)).collect();
    let unknown: Vec<String> = predictions
        .iter()
        .filter(|p| !by_id.contains_key(p.sentence_id.as_str()))
        .map(|p| p.sentence_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownIds(unknown));
    }
    let mut counts: BTreeMap<(&str, i32), [usize; 6]> = BTreeMap::new();
    for (firm, year) in firm_years {
        counts.entry((firm.as_str(), *year)).or_default();
    }
    let mut seen = BTreeSet::new();
    for p in predictions {
        if !seen.insert(p.sentence_id.as_str()) {
            return Err(Error::Duplicate(p.sentence_id.clone()));
        }
        let s = by_id[p.sentence_id.as_str()];
        let row = counts.entry((s.firm_id.as_str(), s.year)).or_default();
        if let Some(t) = p.label.technology() {
            row[t.index()] += 1;
        }
    }
    let mut out = Vec::with_capacity(counts.len());
    let mut running: Option<(&str, [bool; 6])> = None;
    for ((firm, year), c) in counts {
        let mut flags = c.map(|n| n >= min_sentences);
        if mode == IndicatorMode::Cumulative {
            if let Some((prev_firm, prev)) = running {
                if prev_firm == firm {
                    for (f, p) in flags.iter_mut().zip(prev) {
                        *f |= p;
                    }
                }
            }
            running = Some((firm, flags));
        }
        out.push(FirmYearIndicators {
            firm_id: String::from(firm),
            year,
            dt: flags.iter().any(|&f| f),
            flags,
            mode,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub year: i32,
    pub n_firms: usize,
    /// Share of firms flagged, per technology.
    pub shares: [f64; 6],
    pub dt_share: f64,
}

/// Share of firms with each flag set, per year.
pub fn adoption_trend(indicators: &[FirmYearIndicators]) -> Result<Vec<TrendRow>> {
    if indicators
        .iter()
        .any(|r| r.mode != IndicatorMode::Cumulative)
    {
        return Err(Error::invalid("adoption trend needs cumulative indicators"));
    }
    let mut by_year: BTreeMap<i32, (usize, [usize; 6], usize)> = BTreeMap::new();
    for r in indicators {
        let e = by_year.entry(r.year).or_default();
        e.0 += 1;
        for (c, f) in e.1.iter_mut().zip(r.flags) {
            *c += f as usize;
        }
        e.2 += r.dt as usize;
    }
    Ok(by_year
        .into_iter()
        .map(|(year, (n, c, dt))| TrendRow {
            year,
            n_firms: n,
            shares: c.map(|k| k as f64 / n as f64),
            dt_share: dt as f64 / n as f64,
        })
        .collect())
}

pub const UNKNOWN_SECTOR: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    pub sector: String,
    pub n_firms: usize,
    pub shares: [f64; 6],
    pub dt_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryTable {
    pub rows: Vec<SectorRow>,
    /// Unweighted mean of sector shares, excluding the residual sector.
    pub mean: [f64; 6],
    pub mean_dt: f64,
}

fn final_rows(indicators: &[FirmYearIndicators]) -> BTreeMap<&str, &FirmYearIndicators> {
    let mut last: BTreeMap<&str, &FirmYearIndicators> = BTreeMap::new();
    for r in indicators {
        let e = last.entry(r.firm_id.as_str()).or_insert(r);
        if r.year > e.year {
            *e = r;
        }
    }
    last
}

/// Adoption share per two-digit sector, using each firm's last cumulative
/// row. Firms missing from `sectors` go to the `unknown` row.
pub fn industry_table(
    indicators: &[FirmYearIndicators],
    sectors: &BTreeMap<String, String>,
) -> Result<IndustryTable> {
    if indicators
        .iter()
        .any(|r| r.mode != IndicatorMode::Cumulative)
    {
        return Err(Error::invalid("industry table needs cumulative indicators"));
    }
    let mut acc: BTreeMap<&str, (usize, [usize; 6], usize)> = BTreeMap::new();
    for (firm, row) in final_rows(indicators) {
        let sector = sectors
            .get(firm)
            .map(String::as_str)
            .filter(|s| !s.is_empty())
            .unwrap_or(UNKNOWN_SECTOR);
        let e = acc.entry(sector).or_default();
        e.0 += 1;
        for (c, f) in e.1.iter_mut().zip(row.flags) {
            *c += f as usize;
        }
        e.2 += row.dt as usize;
    }
    let rows: Vec<SectorRow> = acc
        .into_iter()
        .filter(|(_, (n, _, _))| *n > 0)
        .map(|(sector, (n, c, dt))| SectorRow {
            sector: String::from(sector),
            n_firms: n,
            shares: c.map(|k| k as f64 / n as f64),
            dt_share: dt as f64 / n as f64,
        })
        .collect();
    let known: Vec<&SectorRow> = rows.iter().filter(|r| r.sector != UNKNOWN_SECTOR).collect();
    let mut mean = [0.0; 6];
    let mut mean_dt = 0.0;
    if !known.is_empty() {
        let k = known.len() as f64;
        for r in &known {
            for (m, s) in mean.iter_mut().zip(r.shares) {
                *m += s / k;
            }
            mean_dt += r.dt_share / k;
        }
    }
    Ok(IndustryTable {
        rows,
        mean,
        mean_dt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patent {
    pub firm_id: String,
    pub technology: Technology,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub technology: Technology,
    pub n_patentees: usize,
    pub n_flagged: usize,
    /// `None` when no firm holds a patent for the technology.
    pub rate: Option<f64>,
}

/// Share of patent-holding firms that the text indicators also flag (in any
/// year) for the same technology. Only this direction is meaningful: a
/// patent implies use, but use does not imply a patent.
pub fn patent_overlap(indicators: &[FirmYearIndicators], patents: &[Patent]) -> Vec<OverlapRow> {
    let mut flagged: [BTreeSet<&str>; 6] = Default::default();
    for r in indicators {
        for t in Technology::ALL {
            if r.flag(t) {
                flagged[t.index()].insert(r.firm_id.as_str());
            }
        }
    }
    let mut holders: [BTreeSet<&str>; 6] = Default::default();
    for p in patents {
        holders[p.technology.index()].insert(p.firm_id.as_str());
    }
    Technology::ALL
        .into_iter()
        .map(|t| {
            let h = &holders[t.index()];
            let hit = h.iter().filter(|f| flagged[t.index()].contains(*f)).count();
            OverlapRow {
                technology: t,
                n_patentees: h.len(),
                n_flagged: hit,
                rate: (!h.is_empty()).then(|| hit as f64 / h.len() as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBinRow {
    pub lower: u64,
    /// Exclusive; `None` for the open top bin.
    pub upper: Option<u64>,
    pub n_firms: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBinTable {
    pub year: i32,
    pub technology: Technology,
    pub rows: Vec<SizeBinRow>,
    /// Firms with a row in `year` but no employee count.
    pub missing_employees: usize,
    /// Firms below the first edge.
    pub below_range: usize,
}

/// Share of firms flagged for `technology` in `year`, by employee-count bin.
/// `bin_edges` are ascending lower bounds; the last bin is open-ended.
pub fn size_bins(
    indicators: &[FirmYearIndicators],
    employees: &BTreeMap<String, u64>,
    bin_edges: &[u64],
    year: i32,
    technology: Technology,
) -> Result<SizeBinTable> {
    if bin_edges.is_empty() || bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("bin edges must be non-empty and strictly increasing"));
    }
    let mut counts = alloc::vec![(0usize, 0usize); bin_edges.len()];
    let mut missing = 0;
    let mut below = 0;
    for r in indicators.iter().filter(|r| r.year == year) {
        let Some(&emp) = employees.get(&r.firm_id) else {
            missing += 1;
            continue;
        };
        match bin_edges.iter().rposition(|&e| emp >= e) {
            Some(b) => {
                counts[b].0 += 1;
                counts[b].1 += r.flag(technology) as usize;
            }
            None => below += 1,
        }
    }
    if missing > 0 {
        log::info!("{missing} firms without employee counts excluded from size bins");
    }
    let rows = counts
        .iter()
        .enumerate()
        .filter(|(_, (n, _))| *n > 0)
        .map(|(b, &(n, k))| SizeBinRow {
            lower: bin_edges[b],
            upper: bin_edges.get(b + 1).copied(),
            n_firms: n,
            share: k as f64 / n as f64,
        })
        .collect();
    Ok(SizeBinTable {
        year,
        technology,
        rows,
        missing_employees: missing,
        below_range: below,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Label;
    use crate::corpus::{sentence_id, SectionKind};
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn sent(firm: &str, year: i32, ord: usize) -> Sentence {
        Sentence {
            sentence_id: sentence_id(firm, year, SectionKind::Mda, ord),
            firm_id: firm.into(),
            year,
            section_kind: SectionKind::Mda,
            ordinal: ord,
            text: "x".into(),
        }
    }

    fn pred(s: &Sentence, l: Label) -> Prediction {
        Prediction {
            sentence_id: s.sentence_id.clone(),
            label: l,
            confidence: 1.0,
        }
    }

    fn row(firm: &str, year: i32, ai: bool) -> FirmYearIndicators {
        let mut flags = [false; 6];
        flags[0] = ai;
        FirmYearIndicators {
            firm_id: firm.into(),
            year,
            flags,
            dt: ai,
            mode: IndicatorMode::Cumulative,
        }
    }

    #[test]
    fn single_ai_sentence_flags_firm_year() {
        let s = sent("F1", 2015, 0);
        let fy = vec![("F1".into(), 2015)];
        let out = build_indicators(&[pred(&s, Label::Ai)], &[s], &fy, IndicatorMode::Contemporaneous, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].flag(Technology::Ai) && out[0].dt);
    }

    #[test]
    fn cumulative_carries_forward() {
        let s15 = sent("F1", 2015, 0);
        let s16 = sent("F1", 2016, 0);
        let fy = vec![("F1".into(), 2015), ("F1".into(), 2016), ("F1".into(), 2014)];
        let preds = vec![pred(&s15, Label::Ai), pred(&s16, Label::NonDigital)];
        let sents = vec![s15, s16];
        let cum = build_indicators(&preds, &sents, &fy, IndicatorMode::Cumulative, 1).unwrap();
        let ai: Vec<bool> = cum.iter().map(|r| r.flag(Technology::Ai)).collect();
        assert_eq!(ai, vec![false, true, true]);
        let con = build_indicators(&preds, &sents, &fy, IndicatorMode::Contemporaneous, 1).unwrap();
        let ai: Vec<bool> = con.iter().map(|r| r.flag(Technology::Ai)).collect();
        assert_eq!(ai, vec![false, true, false]);
    }

    #[test]
    fn zero_rows_and_thresholds() {
        let s = sent("F1", 2015, 0);
        let fy = vec![("F1".into(), 2015), ("F2".into(), 2015)];
        let out = build_indicators(&[pred(&s, Label::Ai)], core::slice::from_ref(&s), &fy, IndicatorMode::Cumulative, 2).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|r| !r.dt && r.flags == [false; 6]));
        let bad = Prediction { sentence_id: "nope".into(), label: Label::Ai, confidence: 1.0 };
        assert!(matches!(
            build_indicators(&[bad], &[s], &fy, IndicatorMode::Cumulative, 1),
            Err(Error::UnknownIds(_))
        ));
    }

    #[test]
    fn trend_examples() {
        let rows = vec![row("F1", 2014, false), row("F1", 2015, true), row("F1", 2016, true)];
        let t = adoption_trend(&rows).unwrap();
        let ai: Vec<f64> = t.iter().map(|r| r.shares[0]).collect();
        assert_eq!(ai, vec![0.0, 1.0, 1.0]);
        let t = adoption_trend(&[row("F1", 2015, true), row("F2", 2015, false)]).unwrap();
        assert_eq!(t[0].shares[0], 0.5);
        let mut con = row("F1", 2015, true);
        con.mode = IndicatorMode::Contemporaneous;
        assert!(adoption_trend(&[con]).is_err());
    }

    #[test]
    fn industry_examples() {
        let rows = vec![row("F1", 2019, true), row("F2", 2019, false), row("F3", 2018, true), row("F3", 2019, true), row("F4", 2019, true)];
        let mut sectors = BTreeMap::new();
        sectors.insert("F1".into(), "51".into());
        sectors.insert("F2".into(), "51".into());
        sectors.insert("F3".into(), "33".into());
        let t = industry_table(&rows, &sectors).unwrap();
        let names: Vec<_> = t.rows.iter().map(|r| r.sector.as_str()).collect();
        assert_eq!(names, vec!["33", "51", "unknown"]);
        assert_eq!(t.rows[1].shares[0], 0.5);
        assert_eq!(t.rows[0].n_firms, 1);
        assert!((t.mean[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let rows = vec![row("F1", 2015, true), row("F2", 2015, true), row("F3", 2015, false), row("F4", 2015, false)];
        let pats: Vec<Patent> = ["F1", "F2", "F3", "F4"]
            .iter()
            .map(|f| Patent { firm_id: (*f).into(), technology: Technology::Ai, year: 2015 })
            .collect();
        let o = patent_overlap(&rows, &pats);
        assert_eq!(o[0].rate, Some(0.5));
        assert_eq!(o[1].rate, None);
        assert_eq!(patent_overlap(&rows, &pats[..2])[0].rate, Some(1.0));
        assert_eq!(patent_overlap(&rows, &pats[2..])[0].rate, Some(0.0));
    }

    #[test]
    fn size_bin_examples() {
        let rows = vec![row("F1", 2015, true), row("F2", 2015, true), row("F3", 2015, true), row("F4", 2015, false), row("F5", 2015, true)];
        let emp: BTreeMap<String, u64> = (1..=4).map(|i| (format!("F{i}"), 100 * i as u64)).collect();
        let t = size_bins(&rows, &emp, &[0], 2015, Technology::Ai).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].share, 0.75);
        assert_eq!(t.missing_employees, 1);
        let t = size_bins(&rows, &emp, &[0, 150, 10_000], 2015, Technology::Ai).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].upper, Some(10_000));
        assert!(size_bins(&rows, &emp, &[5, 5], 2015, Technology::Ai).is_err());

        // bigger firms always adopt
        let rows: Vec<_> = (0..20).map(|i| row(&format!("G{i}"), 2015, i >= 10)).collect();
        let emp: BTreeMap<String, u64> = (0..20).map(|i| (format!("G{i}"), 50 * i as u64)).collect();
        let t = size_bins(&rows, &emp, &[0, 250, 500, 750], 2015, Technology::Ai).unwrap();
        assert!(t.rows.windows(2).all(|w| w[0].share <= w[1].share));
    }

    proptest! {
        #[test]
        fn indicator_invariants(
            labels in proptest::collection::vec((0usize..3, 2010i32..2014, 0usize..9), 0..60),
            seed in any::<u64>(),
        ) {
            let firms = ["A", "B", "C"];
            let fy: Vec<(String, i32)> = firms.iter().flat_map(|f| (2010..2014).map(move |y| (String::from(*f), y))).collect();
            let mut sents = Vec::new();
            let mut preds = Vec::new();
            for (i, (f, y, l)) in labels.iter().enumerate() {
                let s = sent(firms[*f], *y, i);
                let lab = Label::CLASSES[*l % 8];
                preds.push(pred(&s, lab));
                sents.push(s);
            }
            let cum = build_indicators(&preds, &sents, &fy, IndicatorMode::Cumulative, 1).unwrap();
            let con = build_indicators(&preds, &sents, &fy, IndicatorMode::Contemporaneous, 1).unwrap();
            for (c, k) in cum.iter().zip(&con) {
                prop_assert_eq!(c.dt, c.flags.iter().any(|&f| f));
                prop_assert_eq!(k.dt, k.flags.iter().any(|&f| f));
                for t in 0..6 { prop_assert!(c.flags[t] >= k.flags[t]); }
            }
            for w in cum.windows(2) {
                if w[0].firm_id == w[1].firm_id {
                    for t in 0..6 { prop_assert!(w[1].flags[t] >= w[0].flags[t]); }
                }
            }
            // balanced panel: trend shares never fall
            let trend = adoption_trend(&cum).unwrap();
            for w in trend.windows(2) {
                for t in 0..6 { prop_assert!(w[1].shares[t] >= w[0].shares[t]); }
            }
            // permutation invariance
            let mut shuffled = preds.clone();
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n { shuffled.swap(i, (seed as usize).wrapping_add(i * 7) % n); }
            }
            prop_assert_eq!(build_indicators(&shuffled, &sents, &fy, IndicatorMode::Cumulative, 1).unwrap(), cum);
        }
    }
}
