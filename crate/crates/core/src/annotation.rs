//! Dual-annotation workflow: label schema, event fold, assignment,
//! adjudication and inter-annotator agreement.
//!
//! The event log is the source of truth. A [`Board`] is a pure fold over
//! the events; replaying a log prefix reproduces the state at that point.
//! Every sentence receives exactly two `LABEL` events. Two equal
//! substantive labels settle it (`AGREED`), anything else goes to
//! adjudication (`DISPUTED`), except that two "hard to label" votes exclude
//! the sentence directly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Technology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Ai,
    BigData,
    CloudComputing,
    Iot,
    Blockchain,
    MobileInternet,
    NonNewDigital,
    NonDigital,
    /// Hard-to-label sentinel; never part of training data.
    Excluded,
}

impl Label {
    /// The eight substantive classes.
    pub const CLASSES: [Label; 8] = [
        Label::Ai,
        Label::BigData,
        Label::CloudComputing,
        Label::Iot,
        Label::Blockchain,
        Label::MobileInternet,
        Label::NonNewDigital,
        Label::NonDigital,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ai => "AI",
            Label::BigData => "BIG_DATA",
            Label::CloudComputing => "CLOUD_COMPUTING",
            Label::Iot => "IOT",
            Label::Blockchain => "BLOCKCHAIN",
            Label::MobileInternet => "MOBILE_INTERNET",
            Label::NonNewDigital => "NON_NEW_DIGITAL",
            Label::NonDigital => "NON_DIGITAL",
            Label::Excluded => "EXCLUDED",
        }
    }

    pub fn is_substantive(self) -> bool {
        self != Label::Excluded
    }

    pub fn technology(self) -> Option<Technology> {
        match self {
            Label::Ai => Some(Technology::Ai),
            Label::BigData => Some(Technology::BigData),
            Label::CloudComputing => Some(Technology::Cloud),
            Label::Iot => Some(Technology::Iot),
            Label::Blockchain => Some(Technology::Blockchain),
            Label::MobileInternet => Some(Technology::MobileInternet),
            _ => None,
        }
    }

    pub fn from_technology(t: Technology) -> Label {
        match t {
            Technology::Ai => Label::Ai,
            Technology::BigData => Label::BigData,
            Technology::Cloud => Label::CloudComputing,
            Technology::Iot => Label::Iot,
            Technology::Blockchain => Label::Blockchain,
            Technology::MobileInternet => Label::MobileInternet,
        }
    }

    /// Position among the eight classes; `None` for the sentinel.
    pub fn class_index(self) -> Option<usize> {
        Label::CLASSES.iter().position(|&l| l == self)
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Label::CLASSES
            .into_iter()
            .chain([Label::Excluded])
            .find(|l| l.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::invalid(alloc::format!("unknown label `{t}`")))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Label,
    Adjudicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub event_id: u64,
    pub sentence_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub kind: EventKind,
    /// Milliseconds since the Unix epoch, supplied by the caller.
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Unlabeled,
    Single,
    Agreed,
    Disputed,
    Adjudicated,
    Excluded,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Unlabeled => "UNLABELED",
            Status::Single => "SINGLE",
            Status::Agreed => "AGREED",
            Status::Disputed => "DISPUTED",
            Status::Adjudicated => "ADJUDICATED",
            Status::Excluded => "EXCLUDED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskState {
    pub sentence_id: String,
    pub status: Status,
    pub final_label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Task {
    labels: Vec<(String, Label)>,
    adjudicated: Option<Label>,
}

impl Task {
    fn status(&self) -> Status {
        match (self.labels.as_slice(), self.adjudicated) {
            ([], _) => Status::Unlabeled,
            ([_], _) => Status::Single,
            (_, Some(Label::Excluded)) => Status::Excluded,
            (_, Some(_)) => Status::Adjudicated,
            ([(_, a), (_, b)], None) if a == b && a.is_substantive() => Status::Agreed,
            ([(_, a), (_, b)], None) if a == b => Status::Excluded,
            _ => Status::Disputed,
        }
    }

    fn final_label(&self) -> Option<Label> {
        match self.status() {
            Status::Agreed => Some(self.labels[0].1),
            Status::Adjudicated => self.adjudicated,
            _ => None,
        }
    }
}

/// Counts per status plus agreement figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub unlabeled: usize,
    pub single: usize,
    pub agreed: usize,
    pub disputed: usize,
    pub adjudicated: usize,
    pub excluded: usize,
    pub raw_agreement: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub sentence_id: String,
    /// Sentences still eligible for this annotator, including this one.
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispute {
    pub sentence_id: String,
    pub label_a: Label,
    pub label_b: Label,
}

/// Annotation state for one pool of sentences.
#[derive(Debug, Clone)]
pub struct Board {
    pool: Vec<String>,
    index: BTreeMap<String, usize>,
    tasks: Vec<Task>,
    events: Vec<AnnotationEvent>,
    /// Outstanding assignment per annotator. Not persisted.
    reservations: BTreeMap<String, usize>,
}

impl Board {
    pub fn new<I, S>(pool: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let pool: Vec<String> = pool.into_iter().map(Into::into).collect();
        let mut index = BTreeMap::new();
        for (i, id) in pool.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Duplicate(id.clone()));
            }
        }
        Ok(Board {
            tasks: alloc::vec![Task::default(); pool.len()],
            pool,
            index,
            events: Vec::new(),
            reservations: BTreeMap::new(),
        })
    }

    /// Rebuilds state from an event log. Any event that the state machine
    /// would reject makes the whole log invalid.
    pub fn replay<I, S>(pool: I, events: &[AnnotationEvent]) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut board = Board::new(pool)?;
        for ev in events {
            board.validate(ev)?;
            board.commit(ev.clone());
        }
        Ok(board)
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    pub fn events(&self) -> &[AnnotationEvent] {
        &self.events
    }

    fn next_event_id(&self) -> u64 {
        self.events.last().map_or(1, |e| e.event_id + 1)
    }

    fn task_index(&self, sentence_id: &str) -> Result<usize> {
        self.index
            .get(sentence_id)
            .copied()
            .ok_or_else(|| Error::UnknownIds(alloc::vec![String::from(sentence_id)]))
    }

    pub fn state(&self, sentence_id: &str) -> Option<TaskState> {
        let idx = *self.index.get(sentence_id)?;
        Some(self.state_at(idx))
    }

    fn state_at(&self, idx: usize) -> TaskState {
        let task = &self.tasks[idx];
        TaskState {
            sentence_id: self.pool[idx].clone(),
            status: task.status(),
            final_label: task.final_label(),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = TaskState> + '_ {
        (0..self.pool.len()).map(|i| self.state_at(i))
    }

    /// Labels recorded for a sentence, in submission order.
    pub fn labels(&self, sentence_id: &str) -> Option<&[(String, Label)]> {
        let idx = *self.index.get(sentence_id)?;
        Some(&self.tasks[idx].labels)
    }

    /// Checks an event against the current state without applying it.
    pub fn validate(&self, event: &AnnotationEvent) -> Result<()> {
        let idx = self.task_index(&event.sentence_id)?;
        let task = &self.tasks[idx];
        let reject = |reason: &str| {
            Err(Error::Transition {
                sentence_id: event.sentence_id.clone(),
                reason: String::from(reason),
            })
        };
        if let Some(last) = self.events.last() {
            if event.event_id <= last.event_id {
                return reject("event ids must increase");
            }
        }
        match event.kind {
            EventKind::Label => {
                if task.labels.iter().any(|(a, _)| *a == event.annotator_id) {
                    return reject("annotator already labeled this sentence");
                }
                if task.labels.len() >= 2 {
                    return reject("sentence already has two labels");
                }
            }
            EventKind::Adjudicate => {
                if task.status() != Status::Disputed {
                    return reject("only disputed sentences can be adjudicated");
                }
            }
        }
        Ok(())
    }

    /// Applies an event that passed [`Board::validate`].
    pub fn commit(&mut self, event: AnnotationEvent) -> TaskState {
        let idx = self.index[&event.sentence_id];
        match event.kind {
            EventKind::Label => {
                self.tasks[idx]
                    .labels
                    .push((event.annotator_id.clone(), event.label));
                if self.reservations.get(&event.annotator_id) == Some(&idx) {
                    self.reservations.remove(&event.annotator_id);
                }
            }
            EventKind::Adjudicate => self.tasks[idx].adjudicated = Some(event.label),
        }
        self.events.push(event);
        self.state_at(idx)
    }

    /// Builds and validates a `LABEL` event; the caller persists it and then
    /// calls [`Board::commit`].
    pub fn prepare_label(
        &self,
        sentence_id: &str,
        annotator_id: &str,
        label: Label,
        timestamp: i64,
    ) -> Result<AnnotationEvent> {
        if annotator_id.trim().is_empty() {
            return Err(Error::invalid("annotator id must be non-empty"));
        }
        let ev = AnnotationEvent {
            event_id: self.next_event_id(),
            sentence_id: String::from(sentence_id),
            annotator_id: String::from(annotator_id),
            label,
            kind: EventKind::Label,
            timestamp,
        };
        self.validate(&ev)?;
        Ok(ev)
    }

    /// Builds and validates an `ADJUDICATE` event. `Label::Excluded` drops
    /// the sentence from training data.
    pub fn prepare_adjudication(
        &self,
        sentence_id: &str,
        adjudicator_id: &str,
        resolution: Label,
        timestamp: i64,
    ) -> Result<AnnotationEvent> {
        let ev = AnnotationEvent {
            event_id: self.next_event_id(),
            sentence_id: String::from(sentence_id),
            annotator_id: String::from(adjudicator_id),
            label: resolution,
            kind: EventKind::Adjudicate,
            timestamp,
        };
        self.validate(&ev)?;
        Ok(ev)
    }

    pub fn submit_label(
        &mut self,
        sentence_id: &str,
        annotator_id: &str,
        label: Label,
        timestamp: i64,
    ) -> Result<TaskState> {
        let ev = self.prepare_label(sentence_id, annotator_id, label, timestamp)?;
        Ok(self.commit(ev))
    }

    pub fn adjudicate(
        &mut self,
        sentence_id: &str,
        adjudicator_id: &str,
        resolution: Label,
        timestamp: i64,
    ) -> Result<TaskState> {
        let ev = self.prepare_adjudication(sentence_id, adjudicator_id, resolution, timestamp)?;
        Ok(self.commit(ev))
    }

    fn eligible(&self, idx: usize, annotator: &str) -> bool {
        let task = &self.tasks[idx];
        if task.labels.len() >= 2 || task.labels.iter().any(|(a, _)| a == annotator) {
            return false;
        }
        let reserved_by_others = self
            .reservations
            .iter()
            .filter(|(a, &i)| i == idx && a.as_str() != annotator)
            .count();
        task.labels.len() + reserved_by_others < 2
    }

    /// Next sentence for `annotator`: half-labeled sentences first (closing
    /// pairs), then unlabeled ones, in pool order. Returns `None` when the
    /// annotator has nothing left. The choice is reserved so concurrent
    /// callers are not handed more copies than there are label slots.
    pub fn assign_next(&mut self, annotator: &str) -> Option<Assignment> {
        let eligible: Vec<usize> = (0..self.pool.len())
            .filter(|&i| self.eligible(i, annotator))
            .collect();
        let pick = eligible
            .iter()
            .copied()
            .find(|&i| self.tasks[i].labels.len() == 1)
            .or_else(|| eligible.first().copied())?;
        self.reservations.insert(String::from(annotator), pick);
        Some(Assignment {
            sentence_id: self.pool[pick].clone(),
            remaining: eligible.len(),
        })
    }

    pub fn disputes(&self) -> Vec<Dispute> {
        self.tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.status() == Status::Disputed)
            .map(|(i, t)| Dispute {
                sentence_id: self.pool[i].clone(),
                label_a: t.labels[0].1,
                label_b: t.labels[1].1,
            })
            .collect()
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress {
            total: self.pool.len(),
            unlabeled: 0,
            single: 0,
            agreed: 0,
            disputed: 0,
            adjudicated: 0,
            excluded: 0,
            raw_agreement: None,
            kappa: None,
        };
        for t in &self.tasks {
            match t.status() {
                Status::Unlabeled => p.unlabeled += 1,
                Status::Single => p.single += 1,
                Status::Agreed => p.agreed += 1,
                Status::Disputed => p.disputed += 1,
                Status::Adjudicated => p.adjudicated += 1,
                Status::Excluded => p.excluded += 1,
            }
        }
        if let Ok(stats) = agreement_stats(&self.events) {
            p.raw_agreement = Some(stats.raw_agreement);
            p.kappa = Some(stats.cohen_kappa);
        }
        p
    }

    /// Final labels of AGREED and ADJUDICATED sentences, in pool order.
    pub fn training_export(&self) -> Vec<(String, Label)> {
        self.states()
            .filter_map(|s| match (s.status, s.final_label) {
                (Status::Agreed | Status::Adjudicated, Some(l)) if l.is_substantive() => {
                    Some((s.sentence_id, l))
                }
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_paired: usize,
    pub raw_agreement: f64,
    pub cohen_kappa: f64,
    /// Set when chance agreement is 1 and kappa is reported as 1.
    pub degenerate: bool,
    /// (first label, second label, count), sorted.
    pub confusion: Vec<(Label, Label, usize)>,
}

/// Agreement between first and second labels over sentences that received
/// two `LABEL` events.
pub fn agreement_stats(events: &[AnnotationEvent]) -> Result<AgreementReport> {
    let mut firsts: BTreeMap<&str, Vec<Label>> = BTreeMap::new();
    for ev in events.iter().filter(|e| e.kind == EventKind::Label) {
        firsts.entry(ev.sentence_id.as_str()).or_default().push(ev.label);
    }
    let pairs: Vec<(Label, Label)> = firsts
        .values()
        .filter(|l| l.len() >= 2)
        .map(|l| (l[0], l[1]))
        .collect();
    pair_agreement(&pairs)
}

/// Raw agreement and Cohen's kappa for (first, second) label pairs.
pub fn pair_agreement(pairs: &[(Label, Label)]) -> Result<AgreementReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("no paired sentences"));
    }
    let n = pairs.len() as f64;
    let mut confusion: BTreeMap<(Label, Label), usize> = BTreeMap::new();
    let mut first: BTreeMap<Label, usize> = BTreeMap::new();
    let mut second: BTreeMap<Label, usize> = BTreeMap::new();
    let mut agreed = 0usize;
    for &(a, b) in pairs {
        *confusion.entry((a, b)).or_insert(0) += 1;
        *first.entry(a).or_insert(0) += 1;
        *second.entry(b).or_insert(0) += 1;
        if a == b {
            agreed += 1;
        }
    }
    let p_o = agreed as f64 / n;
    let p_e: f64 = first
        .iter()
        .map(|(l, &c)| c as f64 / n * second.get(l).copied().unwrap_or(0) as f64 / n)
        .sum();
    let degenerate = (1.0 - p_e).abs() < 1e-12;
    let kappa = if degenerate { 1.0 } else { (p_o - p_e) / (1.0 - p_e) };
    Ok(AgreementReport {
        n_paired: pairs.len(),
        raw_agreement: p_o,
        cohen_kappa: kappa,
        degenerate,
        confusion: confusion.into_iter().map(|((a, b), c)| (a, b, c)).collect(),
    })
}
