//! Digital-technology term list and keyword matching.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Technology};

/// Lexicon category: one of the six technologies, or `Gen` for generic
/// digital vocabulary not tied to a single technology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Category {
    Tech(Technology),
    Gen,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Tech(t) => t.code(),
            Category::Gen => "GEN",
        }
    }

    pub fn technology(self) -> Option<Technology> {
        match self {
            Category::Tech(t) => Some(t),
            Category::Gen => None,
        }
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("GEN") {
            return Ok(Category::Gen);
        }
        Technology::from_code(s)
            .map(Category::Tech)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown category `{}`", s.trim())))
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        String::from(c.as_str())
    }
}

impl TryFrom<String> for Category {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MatchMode {
    WordBoundary,
    Substring,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "WORD_BOUNDARY" => Ok(MatchMode::WordBoundary),
            "SUBSTRING" => Ok(MatchMode::Substring),
            other => Err(Error::invalid(alloc::format!("unknown match mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub term: String,
    pub category: Category,
    pub match_mode: MatchMode,
    pub case_sensitive: bool,
}

impl LexiconEntry {
    pub fn new(term: &str, category: Category) -> Self {
        LexiconEntry {
            term: String::from(term.trim()),
            category,
            match_mode: MatchMode::WordBoundary,
            case_sensitive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordHit {
    pub sentence_id: String,
    pub term: String,
    pub category: Category,
    /// Character index of the match start within the sentence text.
    pub offset: usize,
}

/// An immutable, validated term list with compiled matchers.
///
/// Case-insensitive entries fold ASCII letters only.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    sensitive: Option<(AhoCorasick, Vec<usize>)>,
    insensitive: Option<(AhoCorasick, Vec<usize>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RawHit {
    entry: usize,
    start: usize,
    end: usize,
}

impl Lexicon {
    /// Validates entries and compiles the matchers. The error for a bad
    /// entry carries its 1-based position.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("lexicon is empty"));
        }
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.term.trim().is_empty() {
                return Err(Error::Row {
                    row: i + 1,
                    message: "empty term".into(),
                });
            }
            let tokens = e.term.split_whitespace().count();
            if tokens > 8 {
                return Err(Error::Row {
                    row: i + 1,
                    message: alloc::format!("term `{}` has {tokens} tokens (max 8)", e.term),
                });
            }
            if !seen.insert((e.term.clone(), e.category)) {
                return Err(Error::Duplicate(alloc::format!(
                    "({}, {}) at entry {}",
                    e.term,
                    e.category,
                    i + 1
                )));
            }
        }
        let build = |case_sensitive: bool| -> Result<Option<(AhoCorasick, Vec<usize>)>> {
            let ids: Vec<usize> = entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.case_sensitive == case_sensitive)
                .map(|(i, _)| i)
                .collect();
            if ids.is_empty() {
                return Ok(None);
            }
            let ac = AhoCorasickBuilder::new()
                .match_kind(MatchKind::Standard)
                .ascii_case_insensitive(!case_sensitive)
                .build(ids.iter().map(|&i| entries[i].term.as_str()))
                .map_err(|e| Error::invalid(alloc::format!("matcher build failed: {e}")))?;
            Ok(Some((ac, ids)))
        };
        let sensitive = build(true)?;
        let insensitive = build(false)?;
        Ok(Lexicon {
            entries,
            sensitive,
            insensitive,
        })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn raw_hits(&self, text: &str) -> Vec<RawHit> {
        let mut out = Vec::new();
        for (ac, ids) in [&self.sensitive, &self.insensitive].into_iter().flatten() {
            for m in ac.find_overlapping_iter(text) {
                let entry = ids[m.pattern().as_usize()];
                let hit = RawHit {
                    entry,
                    start: m.start(),
                    end: m.end(),
                };
                if self.entries[entry].match_mode == MatchMode::Substring
                    || on_word_boundary(text, hit.start, hit.end)
                {
                    out.push(hit);
                }
            }
        }
        out
    }

    /// All keyword hits in `text`. Overlapping hits of one category collapse
    /// to the longest; hits of different categories may overlap. Output is
    /// ordered by offset, then category, then term.
    pub fn find(&self, sentence_id: &str, text: &str) -> Vec<KeywordHit> {
        let mut raw = self.raw_hits(text);
        let char_len = |h: &RawHit| text[h.start..h.end].chars().count();
        raw.sort_by(|a, b| {
            char_len(b)
                .cmp(&char_len(a))
                .then(a.start.cmp(&b.start))
                .then(a.entry.cmp(&b.entry))
        });
        let mut kept: Vec<RawHit> = Vec::new();
        for hit in raw {
            let cat = self.entries[hit.entry].category;
            let clash = kept.iter().any(|k| {
                self.entries[k.entry].category == cat && k.start < hit.end && hit.start < k.end
            });
            if !clash {
                kept.push(hit);
            }
        }
        let mut hits: Vec<KeywordHit> = kept
            .into_iter()
            .map(|h| {
                let e = &self.entries[h.entry];
                KeywordHit {
                    sentence_id: String::from(sentence_id),
                    term: e.term.clone(),
                    category: e.category,
                    offset: text[..h.start].chars().count(),
                }
            })
            .collect();
        hits.sort_by(|a, b| {
            a.offset
                .cmp(&b.offset)
                .then(a.category.cmp(&b.category))
                .then_with(|| a.term.cmp(&b.term))
        });
        hits
    }

    /// Hits for a segmented sentence.
    pub fn match_sentence(&self, sentence: &crate::corpus::Sentence) -> Vec<KeywordHit> {
        self.find(&sentence.sentence_id, &sentence.text)
    }
}

fn on_word_boundary(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
}
