//! Sentence classifiers and classification metrics.

mod dictionary;
mod eval;
mod naive_bayes;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotation::Label;
use crate::{Error, Result};

pub use dictionary::{dictionary_classify, DictionaryClassifier};
pub use eval::{evaluate, f_beta, ClassMetrics, EvalReport, FScore, DEFAULT_BETAS};
pub use naive_bayes::{tokenize, train_naive_bayes, NbModel, NB_FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sentence_id: String,
    pub label: Label,
    pub confidence: f64,
}

impl Prediction {
    pub fn validate(&self) -> Result<()> {
        if !self.label.is_substantive() {
            return Err(Error::invalid(alloc::format!(
                "prediction for {} uses the EXCLUDED sentinel",
                self.sentence_id
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid(alloc::format!(
                "confidence {} for {} outside [0, 1]",
                self.confidence,
                self.sentence_id
            )));
        }
        Ok(())
    }
}

/// A sentence to classify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Input<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

pub trait Classifier {
    /// One prediction per input, in input order.
    fn classify(&self, inputs: &[Input<'_>]) -> Result<Vec<Prediction>>;
}

/// Runs a classifier and checks that it honoured the one-per-input,
/// order-preserving contract.
pub fn predict<C: Classifier + ?Sized>(backend: &C, inputs: &[Input<'_>]) -> Result<Vec<Prediction>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let out = backend.classify(inputs)?;
    if out.len() != inputs.len() {
        return Err(Error::invalid(alloc::format!(
            "classifier returned {} predictions for {} inputs",
            out.len(),
            inputs.len()
        )));
    }
    for (p, i) in out.iter().zip(inputs) {
        if p.sentence_id != i.id {
            return Err(Error::invalid(alloc::format!(
                "prediction order mismatch: expected {}, got {}",
                i.id,
                p.sentence_id
            )));
        }
        p.validate()?;
    }
    Ok(out)
}
