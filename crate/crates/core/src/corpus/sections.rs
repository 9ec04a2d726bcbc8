use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{normalize, FilingRecord, SectionExtract, SectionKind};

/// Heading phrases that open each section. Matching is case-insensitive,
/// treats typographic and ASCII apostrophes alike, and only considers text
/// at the start of a line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionPatterns {
    pub mda: Vec<String>,
    pub risk: Vec<String>,
    /// Heading lines with more tokens than this are treated as running text:
    /// only the matched phrase is consumed as the heading.
    pub max_heading_tokens: usize,
}

impl Default for SectionPatterns {
    fn default() -> Self {
        SectionPatterns {
            mda: vec![
                "item 7".into(),
                "management's discussion and analysis".into(),
                "managements discussion and analysis".into(),
            ],
            risk: vec!["item 1a".into(), "risk factors".into()],
            max_heading_tokens: 20,
        }
    }
}

impl SectionPatterns {
    fn for_kind(&self, kind: SectionKind) -> &[String] {
        match kind {
            SectionKind::Mda => &self.mda,
            SectionKind::Risk => &self.risk,
        }
    }
}

struct Line<'a> {
    /// byte offset of the first non-whitespace character
    start: usize,
    /// byte offset one past the line content (newline excluded)
    end: usize,
    text: &'a str,
}

fn lines(doc: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in doc.split_inclusive('\n') {
        let content = raw.trim_end_matches(['\n', '\r']);
        let lead = content.len() - content.trim_start().len();
        out.push(Line {
            start: offset + lead,
            end: offset + content.len(),
            text: &content[lead..],
        });
        offset += raw.len();
    }
    out
}

fn fold(ch: char) -> char {
    match ch {
        '\u{2019}' | '\u{2018}' => '\'',
        c => c.to_ascii_lowercase(),
    }
}

/// Byte length of `text`'s prefix matching `pattern` (folded, with any run of
/// whitespace in the text matching one space in the pattern), provided the
/// match ends on a word boundary.
fn match_prefix(text: &str, pattern: &str) -> Option<usize> {
    let mut chars = text.char_indices().peekable();
    for pc in pattern.chars() {
        if pc == ' ' {
            let mut saw = false;
            while let Some(&(_, c)) = chars.peek() {
                if c.is_whitespace() {
                    saw = true;
                    chars.next();
                } else {
                    break;
                }
            }
            if !saw {
                return None;
            }
            continue;
        }
        let (_, c) = chars.next()?;
        if fold(c) != fold(pc) {
            return None;
        }
    }
    match chars.peek() {
        Some(&(idx, c)) if !c.is_alphanumeric() => Some(idx),
        Some(_) => None,
        None => Some(text.len()),
    }
}

/// True when a line opens an item-level heading such as `Item 7A.`
fn is_item_heading(text: &str) -> bool {
    let Some(rest) = match_prefix(text, "item").map(|n| &text[n..]) else {
        return false;
    };
    let rest_trim = rest.trim_start();
    if rest_trim.len() == rest.len() {
        return false;
    }
    let digits = rest_trim.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 || digits > 2 {
        return false;
    }
    let mut tail = rest_trim[digits..].chars();
    match tail.next() {
        None => true,
        Some(c) if c.is_ascii_alphabetic() => tail.next().is_none_or(|n| !n.is_alphanumeric()),
        Some(c) => !c.is_alphanumeric(),
    }
}

fn byte_to_char(doc: &str, byte: usize) -> usize {
    doc[..byte].chars().count()
}

fn heading_end(line: &Line<'_>, matched: usize, max_tokens: usize) -> usize {
    if line.text.split_whitespace().count() <= max_tokens {
        return line.end;
    }
    let rest = &line.text[matched..];
    let skip = rest.len()
        - rest
            .trim_start_matches(|c: char| c.is_whitespace() || ".:-\u{2013}\u{2014}".contains(c))
            .len();
    line.start + matched + skip
}

fn locate(doc: &str, lines: &[Line<'_>], patterns: &[String], max_tokens: usize) -> Option<(usize, usize)> {
    for (idx, line) in lines.iter().enumerate() {
        let Some(matched) = patterns.iter().find_map(|p| match_prefix(line.text, p)) else {
            continue;
        };
        let body_start = heading_end(line, matched, max_tokens);
        let body_end = lines[idx + 1..]
            .iter()
            .find(|l| is_item_heading(l.text))
            .map_or(doc.len(), |l| l.start);
        if body_end > body_start && !normalize(&doc[body_start..body_end]).is_empty() {
            return Some((body_start, body_end));
        }
    }
    None
}

/// Locates the risk-factor and MD&A sections of a filing document.
///
/// Each section starts after the first line-initial heading matching its
/// patterns whose body is non-empty, and runs to the next item-level heading
/// or the end of the document. Results are ordered by position in the
/// document. A document with no recognised section yields an empty vector
/// and a warning.
pub fn extract_sections(
    filing: &FilingRecord,
    document: &str,
    patterns: &SectionPatterns,
) -> Vec<SectionExtract> {
    let lines = lines(document);
    let mut out = Vec::new();
    for kind in [SectionKind::Risk, SectionKind::Mda] {
        if let Some((start, end)) = locate(
            document,
            &lines,
            patterns.for_kind(kind),
            patterns.max_heading_tokens,
        ) {
            out.push(SectionExtract {
                firm_id: filing.firm_id.clone(),
                year: filing.year,
                section_kind: kind,
                text: normalize(&document[start..end]),
                span: (byte_to_char(document, start), byte_to_char(document, end)),
            });
        }
    }
    if out.is_empty() {
        log::warn!(
            "no MD&A or risk section found for ({}, {})",
            filing.firm_id,
            filing.year
        );
    }
    out.sort_by_key(|s| s.span.0);
    out
}
