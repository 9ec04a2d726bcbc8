//! Prediction/annotation pools and stratified train/test/validation splits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::lexicon::KeywordHit;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PoolPurpose {
    Prediction,
    Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePool {
    pub purpose: PoolPurpose,
    pub members: Vec<String>,
    pub seed: Option<u64>,
}

impl SentencePool {
    pub fn contains(&self, id: &str) -> bool {
        self.members.iter().any(|m| m == id)
    }
}

/// Seeded generator for an independent substream, so that results for one
/// stream never depend on how many other streams were drawn.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Every segmented sentence, in corpus order.
pub fn build_prediction_pool(sentences: &[Sentence]) -> SentencePool {
    let mut seen = BTreeSet::new();
    SentencePool {
        purpose: PoolPurpose::Prediction,
        members: sentences
            .iter()
            .filter(|s| seen.insert(s.sentence_id.as_str()))
            .map(|s| s.sentence_id.clone())
            .collect(),
        seed: None,
    }
}

/// All keyword-hit sentences plus, for each year, a uniform sample without
/// replacement of `per_year_quota` sentences without hits. Years with fewer
/// candidates contribute all of them. Members keep corpus order.
pub fn build_annotation_pool(
    sentences: &[Sentence],
    hits: &[KeywordHit],
    per_year_quota: usize,
    seed: u64,
) -> SentencePool {
    let hit_ids: BTreeSet<&str> = hits.iter().map(|h| h.sentence_id.as_str()).collect();
    let mut seen = BTreeSet::new();
    let unique: Vec<&Sentence> = sentences
        .iter()
        .filter(|s| seen.insert(s.sentence_id.as_str()))
        .collect();

    let mut by_year: BTreeMap<i32, Vec<&str>> = BTreeMap::new();
    for s in &unique {
        if !hit_ids.contains(s.sentence_id.as_str()) {
            by_year.entry(s.year).or_default().push(&s.sentence_id);
        }
    }
    let mut chosen: BTreeSet<&str> = hit_ids
        .iter()
        .copied()
        .filter(|id| seen.contains(id))
        .collect();
    for (year, candidates) in &by_year {
        if candidates.len() < per_year_quota {
            log::warn!(
                "year {year}: only {} non-hit sentences for a quota of {per_year_quota}",
                candidates.len()
            );
        }
        let take = per_year_quota.min(candidates.len());
        let mut rng = substream(seed, *year as u64);
        for i in index::sample(&mut rng, candidates.len(), take) {
            chosen.insert(candidates[i]);
        }
    }
    SentencePool {
        purpose: PoolPurpose::Annotation,
        members: unique
            .iter()
            .filter(|s| chosen.contains(s.sentence_id.as_str()))
            .map(|s| s.sentence_id.clone())
            .collect(),
        seed: Some(seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Split {
    Train,
    Test,
    Validation,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::Validation];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    /// (sentence_id, split) in input order.
    pub assignments: Vec<(String, Split)>,
    pub ratios: [u32; 3],
    pub seed: u64,
    /// Label classes with fewer than three members.
    pub flagged_classes: Vec<String>,
}

impl SplitAssignment {
    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignments
            .iter()
            .filter(move |(_, s)| *s == split)
            .map(|(id, _)| id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<Split> {
        self.assignments
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, s)| *s)
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for (_, s) in &self.assignments {
            out[*s as usize] += 1;
        }
        out
    }
}

/// Largest-remainder apportionment of `n` items to `ratios`; ties go to the
/// earlier part.
pub fn apportion(n: usize, ratios: &[u32; 3]) -> [usize; 3] {
    let total: u64 = ratios.iter().map(|&r| r as u64).sum();
    let mut counts = [0usize; 3];
    let mut remainders = [(0u64, 0usize); 3];
    for (i, &r) in ratios.iter().enumerate() {
        let exact = n as u64 * r as u64;
        counts[i] = (exact / total) as usize;
        remainders[i] = (exact % total, i);
    }
    let assigned: usize = counts.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Stratified split: each label class is shuffled with its own seeded
/// substream and apportioned to train/test/validation by largest remainder.
pub fn split_dataset<L: Ord + Clone + core::fmt::Display>(
    labeled: &[(String, L)],
    ratios: [u32; 3],
    seed: u64,
) -> Result<SplitAssignment> {
    if labeled.is_empty() {
        return Err(Error::invalid("nothing to split"));
    }
    if ratios.iter().all(|&r| r == 0) {
        return Err(Error::invalid("split ratios are all zero"));
    }
    let mut ids = BTreeSet::new();
    let mut classes: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, (id, label)) in labeled.iter().enumerate() {
        if !ids.insert(id.as_str()) {
            return Err(Error::Duplicate(id.clone()));
        }
        classes.entry(label.clone()).or_default().push(i);
    }
    let mut which = alloc::vec![Split::Train; labeled.len()];
    let mut flagged = Vec::new();
    for (class_idx, (label, mut members)) in classes.into_iter().enumerate() {
        if members.len() < 3 {
            log::warn!("label class {label} has only {} members", members.len());
            flagged.push(alloc::format!("{label}"));
        }
        let mut rng = substream(seed, class_idx as u64);
        members.shuffle(&mut rng);
        let counts = apportion(members.len(), &ratios);
        let mut it = members.into_iter();
        for (split, count) in Split::ALL.into_iter().zip(counts) {
            for idx in it.by_ref().take(count) {
                which[idx] = split;
            }
        }
    }
    Ok(SplitAssignment {
        assignments: labeled
            .iter()
            .zip(which)
            .map(|((id, _), s)| (id.clone(), s))
            .collect(),
        ratios,
        seed,
        flagged_classes: flagged,
    })
}
