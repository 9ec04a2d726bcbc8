use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::annotation::Label;
use crate::{Error, Result};

/// β values reported by default. The published "F0.7" figures agree with
/// β = 0.8, so both are kept side by side.
pub const DEFAULT_BETAS: [f64; 3] = [1.0, 0.7, 0.8];

/// F_β = (1 + β²)·P·R / (β²·P + R); zero when P and R are both zero.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FScore {
    pub beta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub f1: f64,
    pub f_beta: Vec<FScore>,
    pub per_class: Vec<ClassMetrics>,
    /// Row = gold, column = predicted, both in `labels` order.
    pub labels: Vec<Label>,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn f_score(&self, beta: f64) -> Option<f64> {
        self.f_beta
            .iter()
            .find(|f| (f.beta - beta).abs() < 1e-12)
            .map(|f| f.value)
    }
}

/// Scores predictions against gold labels.
///
/// Precision and recall are one-vs-rest per class and macro-averaged over
/// every class seen in either gold or predictions; a class that is never
/// predicted has precision 0. F scores are computed from the macro P and R.
/// Predictions for sentences without a gold label are ignored.
pub fn evaluate(
    predictions: &[Prediction],
    gold: &[(String, Label)],
    betas: &[f64],
) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::invalid("no gold labels"));
    }
    let mut by_id: BTreeMap<&str, Label> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.sentence_id.as_str(), p.label).is_some() {
            return Err(Error::Duplicate(p.sentence_id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut missing = Vec::new();
    let mut pairs = Vec::with_capacity(gold.len());
    for (id, g) in gold {
        if !seen.insert(id.as_str()) {
            return Err(Error::Duplicate(id.clone()));
        }
        match by_id.get(id.as_str()) {
            Some(&p) => pairs.push((*g, p)),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }

    let labels: Vec<Label> = pairs
        .iter()
        .flat_map(|&(g, p)| [g, p])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos = |l: Label| labels.iter().position(|&x| x == l).unwrap_or(0);
    let k = labels.len();
    let mut confusion = alloc::vec![alloc::vec![0usize; k]; k];
    for &(g, p) in &pairs {
        confusion[pos(g)][pos(p)] += 1;
    }
    let n = pairs.len();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i] as f64;
            let support: usize = confusion[i].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[i]).sum();
            ClassMetrics {
                label: labels[i],
                precision: if predicted == 0 { 0.0 } else { tp / predicted as f64 },
                recall: if support == 0 { 0.0 } else { tp / support as f64 },
                support,
            }
        })
        .collect();
    let macro_precision = per_class.iter().map(|c| c.precision).sum::<f64>() / k as f64;
    let macro_recall = per_class.iter().map(|c| c.recall).sum::<f64>() / k as f64;
    Ok(EvalReport {
        n,
        accuracy: correct as f64 / n as f64,
        macro_precision,
        macro_recall,
        f1: f_beta(macro_precision, macro_recall, 1.0),
        f_beta: betas
            .iter()
            .map(|&beta| FScore {
                beta,
                value: f_beta(macro_precision, macro_recall, beta),
            })
            .collect(),
        per_class,
        labels,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn pred(id: &str, l: Label) -> Prediction {
        Prediction {
            sentence_id: id.into(),
            label: l,
            confidence: 1.0,
        }
    }

    #[test]
    fn f1_from_published_rows() {
        assert!((f_beta(0.8277, 0.7635, 1.0) - 0.7943).abs() < 5e-4);
        assert!((f_beta(0.6575, 0.5629, 1.0) - 0.6065).abs() < 5e-4);
        assert_eq!(f_beta(0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn equal_precision_recall() {
        for beta in [0.1, 0.5, 1.0, 2.0, 7.0] {
            assert!((f_beta(0.42, 0.42, beta) - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_to_zero_gives_precision() {
        assert!((f_beta(0.3, 0.9, 1e-6) - 0.3).abs() < 1e-4);
    }

    #[test]
    fn report_on_small_example() {
        let gold = vec![
            ("a".into(), Label::Ai),
            ("b".into(), Label::Ai),
            ("c".into(), Label::NonDigital),
            ("d".into(), Label::NonDigital),
        ];
        let preds = vec![
            pred("a", Label::Ai),
            pred("b", Label::NonDigital),
            pred("c", Label::NonDigital),
            pred("d", Label::NonDigital),
            pred("extra", Label::Iot),
        ];
        let r = evaluate(&preds, &gold, &DEFAULT_BETAS).unwrap();
        assert_eq!(r.accuracy, 0.75);
        // AI: P=1, R=0.5; NON_DIGITAL: P=2/3, R=1
        assert!((r.macro_precision - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((r.macro_recall - 0.75).abs() < 1e-12);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(r.f_beta.len(), 3);
        for (row, c) in r.confusion.iter().zip(&r.per_class) {
            assert_eq!(row.iter().sum::<usize>(), c.support);
        }
    }

    #[test]
    fn missing_predictions_listed() {
        let gold = vec![("a".into(), Label::Ai), ("b".into(), Label::Ai)];
        let err = evaluate(&[pred("a", Label::Ai)], &gold, &[1.0]).unwrap_err();
        assert_eq!(err, Error::MissingIds(vec!["b".into()]));
    }

    proptest! {
        #[test]
        fn f_beta_between_p_and_r(p in 0.0f64..1.0, r in 0.0f64..1.0, beta in 0.01f64..10.0) {
            let f = f_beta(p, r, beta);
            prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
        }

        #[test]
        fn rates_in_unit_interval(pairs in proptest::collection::vec((0usize..8, 0usize..8), 1..60)) {
            let gold: Vec<(String, Label)> = pairs.iter().enumerate()
                .map(|(i, (g, _))| (alloc::format!("s{i}"), Label::CLASSES[*g])).collect();
            let preds: Vec<Prediction> = pairs.iter().enumerate()
                .map(|(i, (_, p))| pred(&alloc::format!("s{i}"), Label::CLASSES[*p])).collect();
            let r = evaluate(&preds, &gold, &DEFAULT_BETAS).unwrap();
            for v in [r.accuracy, r.macro_precision, r.macro_recall, r.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            for (row, c) in r.confusion.iter().zip(&r.per_class) {
                prop_assert_eq!(row.iter().sum::<usize>(), c.support);
            }
        }
    }
}
