use alloc::string::String;
use alloc::vec::Vec;

use super::{Classifier, Input, Prediction};
use crate::annotation::Label;
use crate::lexicon::{Category, Lexicon};
use crate::Result;

/// Keyword rule: the longest technology hit decides (earliest on ties);
/// otherwise a generic digital hit gives `NON_NEW_DIGITAL`, and no hit
/// gives `NON_DIGITAL`.
pub fn dictionary_classify(sentence_id: &str, text: &str, lexicon: &Lexicon) -> Prediction {
    let hits = lexicon.find(sentence_id, text);
    let best = hits
        .iter()
        .filter_map(|h| h.category.technology().map(|t| (h, t)))
        .min_by(|(a, _), (b, _)| {
            b.term
                .chars()
                .count()
                .cmp(&a.term.chars().count())
                .then(a.offset.cmp(&b.offset))
        });
    let label = match best {
        Some((_, tech)) => Label::from_technology(tech),
        None if hits.iter().any(|h| h.category == Category::Gen) => Label::NonNewDigital,
        None => Label::NonDigital,
    };
    Prediction {
        sentence_id: String::from(sentence_id),
        label,
        confidence: 1.0,
    }
}

pub struct DictionaryClassifier<'a> {
    pub lexicon: &'a Lexicon,
}

impl Classifier for DictionaryClassifier<'_> {
    fn classify(&self, inputs: &[Input<'_>]) -> Result<Vec<Prediction>> {
        Ok(inputs
            .iter()
            .map(|i| dictionary_classify(i.id, i.text, self.lexicon))
            .collect())
    }
}
