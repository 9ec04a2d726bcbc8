use alloc::string::String;
use alloc::vec::Vec;

use super::{sentence_id, token_count, SectionExtract, Sentence};

pub const DEFAULT_MIN_TOKENS: usize = 5;

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "Inc.", "Corp.", "Ltd.", "No.", "Approx.", "U.S.", "e.g.", "i.e.", "Co.", "Mr.", "Ms.",
    "Mrs.", "Dr.", "Jr.", "St.", "vs.",
];

/// Abbreviation-aware sentence splitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmenter {
    abbreviations: Vec<String>,
    pub min_tokens: usize,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::new(DEFAULT_MIN_TOKENS)
    }
}

/// A piece of section text between two sentence boundaries. `span` holds
/// byte offsets into the section text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub span: (usize, usize),
    pub kept: bool,
}

impl Segmenter {
    pub fn new(min_tokens: usize) -> Self {
        Segmenter {
            abbreviations: DEFAULT_ABBREVIATIONS
                .iter()
                .map(|a| a.to_ascii_lowercase())
                .collect(),
            min_tokens: min_tokens.max(1),
        }
    }

    pub fn with_abbreviations<I, S>(mut self, abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.abbreviations = abbreviations
            .into_iter()
            .map(|a| a.as_ref().trim().to_ascii_lowercase())
            .filter(|a| !a.is_empty())
            .collect();
        self
    }

    fn is_abbreviation(&self, text: &str, dot: usize) -> bool {
        let token_start = text[..dot].rfind(char::is_whitespace).map_or(0, |i| i + 1);
        let token = text[token_start..=dot].trim_start_matches(['(', '[', '"', '\'', '\u{201c}']);
        let mut chars = token.chars();
        if let (Some(c), Some('.'), None) = (chars.next(), chars.next(), chars.next()) {
            if c.is_alphabetic() {
                return true;
            }
        }
        let lower = token.to_ascii_lowercase();
        self.abbreviations.contains(&lower)
    }

    /// Byte offsets at which sentences end.
    fn boundaries(&self, text: &str) -> Vec<usize> {
        let bytes = text.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let b = bytes[i];
            if !matches!(b, b'.' | b'!' | b'?') {
                i += 1;
                continue;
            }
            let term = i;
            let mut end = i + 1;
            // absorb runs of terminators and closing quotes/brackets
            while end < text.len() {
                let c = text[end..].chars().next().unwrap_or(' ');
                if matches!(c, '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}') {
                    end += c.len_utf8();
                } else {
                    break;
                }
            }
            let split = if end >= text.len() {
                true
            } else {
                let mut rest = text[end..].chars();
                let ws = rest.next().is_some_and(char::is_whitespace);
                let upper = rest.next().is_some_and(char::is_uppercase);
                ws && upper && !(b == b'.' && end == term + 1 && self.is_abbreviation(text, term))
            };
            if split {
                out.push(end);
            }
            i = end;
        }
        if out.last() != Some(&text.len()) && !text.trim().is_empty() {
            out.push(text.len());
        }
        out
    }

    /// Splits normalized text into fragments, marking those long enough to
    /// keep. Joining every fragment with single spaces reproduces `text`
    /// when it is normalized.
    pub fn fragments(&self, text: &str) -> Vec<Fragment> {
        let mut out = Vec::new();
        let mut start = 0;
        for end in self.boundaries(text) {
            let piece = &text[start..end];
            let lead = piece.len() - piece.trim_start().len();
            let trail = piece.len() - piece.trim_end().len();
            let span = (start + lead, end - trail);
            if span.0 < span.1 {
                out.push(Fragment {
                    span,
                    kept: token_count(&text[span.0..span.1]) >= self.min_tokens,
                });
            }
            start = end;
        }
        out
    }
}

/// Fragments of one section with the kept/dropped decision.
pub fn segment_spans(section: &SectionExtract, segmenter: &Segmenter) -> Vec<Fragment> {
    segmenter.fragments(&section.text)
}

/// Sentences of a section in text order with 0-based ordinals. Fragments
/// shorter than the minimum token count are dropped and logged.
pub fn segment_sentences(section: &SectionExtract, segmenter: &Segmenter) -> Vec<Sentence> {
    let mut out = Vec::new();
    for frag in segmenter.fragments(&section.text) {
        let text = &section.text[frag.span.0..frag.span.1];
        if !frag.kept {
            log::debug!(
                "dropped short fragment in ({}, {}, {}): {:?}",
                section.firm_id,
                section.year,
                section.section_kind,
                text
            );
            continue;
        }
        let ordinal = out.len();
        out.push(Sentence {
            sentence_id: sentence_id(&section.firm_id, section.year, section.section_kind, ordinal),
            firm_id: section.firm_id.clone(),
            year: section.year,
            section_kind: section.section_kind,
            ordinal,
            text: String::from(text),
        });
    }
    out
}
