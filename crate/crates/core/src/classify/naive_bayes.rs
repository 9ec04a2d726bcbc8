use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Classifier, Input, Prediction};
use crate::annotation::Label;
use crate::{Error, Result};

pub const NB_FORMAT_VERSION: u32 = 1;

/// Lowercase alphanumeric unigrams.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// Multinomial naive Bayes over unigram counts with add-one smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub version: u32,
    pub classes: Vec<Label>,
    pub vocabulary: Vec<String>,
    pub log_priors: Vec<f64>,
    /// `log_likelihoods[c][w]` = ln P(word w | class c).
    pub log_likelihoods: Vec<Vec<f64>>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

/// Fits the model. Every class in `classes` must have at least one example.
pub fn train_naive_bayes(examples: &[(&str, Label)], classes: &[Label]) -> Result<NbModel> {
    if classes.is_empty() {
        return Err(Error::invalid("empty label set"));
    }
    let mut docs = alloc::vec![0usize; classes.len()];
    let mut counts: Vec<BTreeMap<String, usize>> = alloc::vec![BTreeMap::new(); classes.len()];
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for &(text, label) in examples {
        let c = classes.iter().position(|&l| l == label).ok_or_else(|| {
            Error::invalid(alloc::format!("label {label} is not in the configured label set"))
        })?;
        docs[c] += 1;
        for tok in tokenize(text) {
            vocab.insert(tok.clone());
            *counts[c].entry(tok).or_insert(0) += 1;
        }
    }
    if let Some(c) = docs.iter().position(|&d| d == 0) {
        return Err(Error::EmptyClass(String::from(classes[c].as_str())));
    }
    let vocabulary: Vec<String> = vocab.into_iter().collect();
    let index: BTreeMap<String, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let v = vocabulary.len() as f64;
    let n_docs: usize = docs.iter().sum();
    let log_priors = docs
        .iter()
        .map(|&d| libm::log(d as f64 / n_docs as f64))
        .collect();
    let log_likelihoods = counts
        .iter()
        .map(|cnt| {
            let total: usize = cnt.values().sum();
            vocabulary
                .iter()
                .map(|w| {
                    let k = cnt.get(w).copied().unwrap_or(0) as f64;
                    libm::log((k + 1.0) / (total as f64 + v))
                })
                .collect()
        })
        .collect();
    Ok(NbModel {
        version: NB_FORMAT_VERSION,
        classes: classes.to_vec(),
        vocabulary,
        log_priors,
        log_likelihoods,
        index,
    })
}

impl NbModel {
    /// Rebuilds the lookup index after deserialization and checks shapes.
    pub fn finish_load(mut self) -> Result<Self> {
        if self.version != NB_FORMAT_VERSION {
            return Err(Error::invalid(alloc::format!(
                "unsupported model version {}",
                self.version
            )));
        }
        let k = self.classes.len();
        if k == 0
            || self.log_priors.len() != k
            || self.log_likelihoods.len() != k
            || self
                .log_likelihoods
                .iter()
                .any(|row| row.len() != self.vocabulary.len())
        {
            return Err(Error::invalid("inconsistent model tables"));
        }
        self.index = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(self)
    }

    /// Smoothed probability of `word` given `class`, if both are known.
    pub fn word_probability(&self, word: &str, class: Label) -> Option<f64> {
        let c = self.classes.iter().position(|&l| l == class)?;
        let w = *self.index.get(word)?;
        Some(libm::exp(self.log_likelihoods[c][w]))
    }

    /// Class posteriors for `text`, in `classes` order. Out-of-vocabulary
    /// tokens are ignored.
    pub fn posteriors(&self, text: &str) -> Vec<f64> {
        let mut scores = self.log_priors.clone();
        for tok in tokenize(text) {
            if let Some(&w) = self.index.get(&tok) {
                for (c, s) in scores.iter_mut().enumerate() {
                    *s += self.log_likelihoods[c][w];
                }
            }
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|s| libm::exp(s - max)).collect();
        let z: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / z).collect()
    }

    pub fn predict_one(&self, id: &str, text: &str) -> Prediction {
        let post = self.posteriors(text);
        let (best, conf) = post
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p > acc.1 { (i, p) } else { acc });
        Prediction {
            sentence_id: String::from(id),
            label: self.classes[best],
            confidence: conf.clamp(0.0, 1.0),
        }
    }
}

impl Classifier for NbModel {
    fn classify(&self, inputs: &[Input<'_>]) -> Result<Vec<Prediction>> {
        Ok(inputs.iter().map(|i| self.predict_one(i.id, i.text)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const A: Label = Label::Ai;
    const B: Label = Label::CloudComputing;

    #[test]
    fn toy_smoothed_counts() {
        let m = train_naive_bayes(&[("ai ai", A), ("cloud", B)], &[A, B]).unwrap();
        assert_eq!(m.vocabulary, vec!["ai", "cloud"]);
        assert!((m.word_probability("ai", A).unwrap() - 0.75).abs() < 1e-12);
        assert!((m.word_probability("cloud", A).unwrap() - 0.25).abs() < 1e-12);
        assert!((m.word_probability("ai", B).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // priors 1/2 each: P(A|"ai") = 0.75 / (0.75 + 1/3) = 9/13
        let p = m.predict_one("s", "ai");
        assert_eq!(p.label, A);
        assert!((p.confidence - 9.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn missing_class_rejected() {
        let err = train_naive_bayes(&[("ai", A)], &[A, B]).unwrap_err();
        assert_eq!(err, Error::EmptyClass("CLOUD_COMPUTING".into()));
        assert!(train_naive_bayes(&[("ai", Label::Iot)], &[A]).is_err());
    }

    #[test]
    fn duplicated_training_sentence() {
        let once = train_naive_bayes(&[("ai model", A), ("cloud server", B)], &[A, B]).unwrap();
        let twice = train_naive_bayes(&[("ai model", A), ("ai model", A), ("cloud server", B)], &[A, B]).unwrap();
        assert_eq!(once.predict_one("s", "ai model").label, twice.predict_one("s", "ai model").label);
    }

    #[test]
    fn tokenizer() {
        let toks: Vec<_> = tokenize("We use AI-driven, Cloud2 tools!").collect();
        assert_eq!(toks, vec!["we", "use", "ai", "driven", "cloud2", "tools"]);
    }

    #[test]
    fn serde_round_trip_needs_index_rebuild() {
        let m = train_naive_bayes(&[("ai ai", A), ("cloud", B)], &[A, B]).unwrap();
        let mut copy = m.clone();
        copy.index.clear();
        let copy = copy.finish_load().unwrap();
        assert_eq!(copy.predict_one("s", "ai"), m.predict_one("s", "ai"));
    }

    proptest! {
        #[test]
        fn posteriors_normalized(
            docs in proptest::collection::vec(("[abc ]{1,12}", 0usize..3), 3..20),
            query in "[abcd ]{0,10}",
        ) {
            let classes = [A, B, Label::Iot];
            let mut ex: Vec<(&str, Label)> = docs.iter().map(|(t, c)| (t.as_str(), classes[*c])).collect();
            for (i, c) in classes.iter().enumerate() {
                if !ex.iter().any(|(_, l)| l == c) { ex.push((["a", "b", "c"][i], *c)); }
            }
            let m = train_naive_bayes(&ex, &classes).unwrap();
            let post = m.posteriors(&query);
            prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(post.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        // Duplicating the corpus k times multiplies every raw count by k, so
        // the smoothed estimate becomes (k*n + 1) / (k*N + V).
        #[test]
        fn duplication_scales_counts(
            docs in proptest::collection::vec(("[abc ]{1,12}", 0usize..2), 2..12),
            k in 2usize..4,
        ) {
            let classes = [A, B];
            let mut ex: Vec<(&str, Label)> = docs.iter().map(|(t, c)| (t.as_str(), classes[*c])).collect();
            ex.push(("a", A));
            ex.push(("b", B));
            let dup: Vec<_> = ex.iter().flat_map(|e| core::iter::repeat_n(*e, k)).collect();
            let m = train_naive_bayes(&dup, &classes).unwrap();
            let v = m.vocabulary.len() as f64;
            for &class in &classes {
                let toks: Vec<String> = ex.iter().filter(|e| e.1 == class).flat_map(|e| tokenize(e.0)).collect();
                for w in &m.vocabulary {
                    let n = toks.iter().filter(|t| *t == w).count() as f64;
                    let want = (k as f64 * n + 1.0) / (k as f64 * toks.len() as f64 + v);
                    prop_assert!((m.word_probability(w, class).unwrap() - want).abs() < 1e-12);
                }
            }
            let mut priors: Vec<f64> = m.log_priors.iter().map(|p| libm::exp(*p)).collect();
            let base = train_naive_bayes(&ex, &classes).unwrap();
            for (p, q) in priors.iter_mut().zip(&base.log_priors) {
                prop_assert!((*p - libm::exp(*q)).abs() < 1e-12);
            }
        }
    }
}
