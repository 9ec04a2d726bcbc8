//! Filing records, section extraction and sentence segmentation.

mod sections;
mod segment;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub use sections::{extract_sections, SectionPatterns};
pub use segment::{segment_sentences, segment_spans, Fragment, Segmenter, DEFAULT_MIN_TOKENS};

/// One annual-report filing as listed in an ingest manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilingRecord {
    pub firm_id: String,
    pub year: i32,
    pub exchange: String,
    pub naics_code: String,
    pub employees: Option<u64>,
    pub text_path: String,
}

impl FilingRecord {
    pub fn validate(&self) -> Result<()> {
        if self.firm_id.trim().is_empty() {
            return Err(Error::invalid("firm_id must be non-empty"));
        }
        if !(1990..=2100).contains(&self.year) {
            return Err(Error::invalid(alloc::format!(
                "year {} outside [1990, 2100]",
                self.year
            )));
        }
        Ok(())
    }

    /// Two-digit sector prefix of the NAICS code.
    pub fn sector(&self) -> &str {
        let code = self.naics_code.trim();
        match code.char_indices().nth(2) {
            Some((idx, _)) => &code[..idx],
            None => code,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    #[serde(rename = "MDA")]
    Mda,
    #[serde(rename = "RISK")]
    Risk,
}

impl SectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Mda => "MDA",
            SectionKind::Risk => "RISK",
        }
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A located section of a filing. `span` is a half-open interval of
/// character (not byte) positions in the source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionExtract {
    pub firm_id: String,
    pub year: i32,
    pub section_kind: SectionKind,
    pub text: String,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: String,
    pub firm_id: String,
    pub year: i32,
    #[serde(rename = "section")]
    pub section_kind: SectionKind,
    pub ordinal: usize,
    pub text: String,
}

/// Deterministic identifier for the sentence at `ordinal` within a section.
///
/// The digest covers the provenance tuple only, so re-ingesting the same
/// filings yields the same ids and existing labels stay attached.
pub fn sentence_id(firm_id: &str, year: i32, kind: SectionKind, ordinal: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(firm_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(year.to_string().as_bytes());
    hasher.update([0x1f]);
    hasher.update(kind.as_str().as_bytes());
    hasher.update([0x1f]);
    hasher.update(ordinal.to_string().as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(24);
    for byte in digest.iter().take(12) {
        out.push(hex_digit(byte >> 4));
        out.push(hex_digit(byte & 0x0f));
    }
    out
}

fn hex_digit(nibble: u8) -> char {
    char::from_digit(nibble as u32, 16).unwrap_or('0')
}

/// Collapses whitespace runs to one space, removes other control characters
/// and trims both ends. No case folding.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = true;
        } else if ch.is_control() {
            continue;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        }
    }
    out
}

/// Number of whitespace-separated tokens.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Checks that (firm_id, year) pairs are unique across a manifest.
pub fn check_unique_keys(records: &[FilingRecord]) -> Result<()> {
    let mut seen = alloc::collections::BTreeSet::new();
    for rec in records {
        if !seen.insert((rec.firm_id.as_str(), rec.year)) {
            return Err(Error::Duplicate(alloc::format!(
                "({}, {})",
                rec.firm_id,
                rec.year
            )));
        }
    }
    Ok(())
}

/// Sentences of all sections of one filing, in section order.
pub fn filing_sentences(
    sections: &[SectionExtract],
    segmenter: &Segmenter,
) -> Vec<Sentence> {
    sections
        .iter()
        .flat_map(|s| segment_sentences(s, segmenter))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_and_strips() {
        assert_eq!(normalize("  a\t\tb\n\nc \u{7}d  "), "a b c d");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("\u{0}\u{1}"), "");
    }

    #[test]
    fn sentence_ids_are_stable_and_distinct() {
        let a = sentence_id("F1", 2015, SectionKind::Mda, 0);
        assert_eq!(a, sentence_id("F1", 2015, SectionKind::Mda, 0));
        assert_eq!(a.len(), 24);
        assert_ne!(a, sentence_id("F1", 2015, SectionKind::Risk, 0));
        assert_ne!(a, sentence_id("F1", 2015, SectionKind::Mda, 1));
        assert_ne!(a, sentence_id("F12", 2015, SectionKind::Mda, 0));
        // separator prevents ("F1", 2015x) / ("F12", 015x) style collisions
        assert_ne!(
            sentence_id("F1", 2011, SectionKind::Mda, 1),
            sentence_id("F12", 11, SectionKind::Mda, 1)
        );
    }

    #[test]
    fn record_validation() {
        let mut rec = FilingRecord {
            firm_id: "F1".into(),
            year: 2015,
            exchange: "NYSE".into(),
            naics_code: "5112".into(),
            employees: Some(10),
            text_path: "a.txt".into(),
        };
        assert!(rec.validate().is_ok());
        assert_eq!(rec.sector(), "51");
        rec.year = 1989;
        assert!(rec.validate().is_err());
        rec.year = 2000;
        rec.firm_id = " ".into();
        assert!(rec.validate().is_err());
    }

    #[test]
    fn duplicate_keys_rejected() {
        let rec = FilingRecord {
            firm_id: "F1".into(),
            year: 2015,
            exchange: "NYSE".into(),
            naics_code: "51".into(),
            employees: None,
            text_path: "a.txt".into(),
        };
        let err = check_unique_keys(&[rec.clone(), rec]).unwrap_err();
        assert!(matches!(err, Error::Duplicate(ref k) if k.contains("F1") && k.contains("2015")));
    }
}
