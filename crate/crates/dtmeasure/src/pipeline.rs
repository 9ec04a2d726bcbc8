//! The staged pipeline behind the command line. Each stage reads its
//! upstream artifacts from the output directory (after verifying their
//! provenance), writes its own artifacts and records a provenance file.
//!
//! Filings, sections and sentences are processed in parallel; results are
//! always merged in input order so outputs do not depend on scheduling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use dtmeasure_core::annotation::{AnnotationEvent, Board, Label};
use dtmeasure_core::classify::{
    dictionary_classify, evaluate, train_naive_bayes, EvalReport, Input, NbModel, Prediction,
};
use dtmeasure_core::corpus::{
    extract_sections, segment_sentences, FilingRecord, SectionExtract, SectionPatterns, Segmenter, Sentence,
};
use dtmeasure_core::econometrics::{
    channel_suite, describe, fit_2sls, fit_fe_ols, fit_quantile, per_technology_suite, ChannelReport,
    DescribeRow, Estimator, FitResult, QuantileOptions, TechnologyFit,
};
use dtmeasure_core::indicators::{
    adoption_trend, build_indicators, industry_table, patent_overlap, size_bins, IndicatorMode, IndustryTable,
    OverlapRow, SizeBinTable, TrendRow,
};
use dtmeasure_core::instruments::{build_iv_column, Roster};
use dtmeasure_core::lexicon::KeywordHit;
use dtmeasure_core::sampling::{build_annotation_pool, build_prediction_pool, split_dataset, Split};
use dtmeasure_core::Technology;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Backend, RunConfig};
use crate::formats::{self, LabeledExample, SplitLine};
use crate::provenance::{self, digest_settings, Expectation, Provenance};
use crate::remote::RemoteClassifier;
use crate::service::ServiceConfig;
use crate::report;
use crate::{Error, Result};

pub const FILINGS: &str = "filings.jsonl";
pub const SECTIONS: &str = "sections.jsonl";
pub const SENTENCES: &str = "sentences.jsonl";
pub const HITS: &str = "hits.jsonl";
pub const PREDICTION_POOL: &str = "prediction_pool.jsonl";
pub const ANNOTATION_POOL: &str = "annotation_pool.jsonl";
pub const TRAINING: &str = "training.csv";
pub const SPLIT: &str = "split.jsonl";
pub const MODEL: &str = "model.json";
pub const EVALUATION: &str = "evaluation.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const INDICATORS: &str = "indicators.csv";
pub const ANALYTICS: &str = "analytics.json";
pub const TREND_CSV: &str = "trend.csv";
pub const INDUSTRY_CSV: &str = "industry.csv";
pub const OVERLAP_CSV: &str = "patent_overlap.csv";
pub const SIZE_BINS_CSV: &str = "size_bins.csv";
pub const REGRESSION: &str = "regression.json";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const TABLE1_CSV: &str = "table1.csv";
pub const REGRESSION_CSV: &str = "regression.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Segment,
    Match,
    Sample,
    Train,
    Evaluate,
    Predict,
    Indicators,
    Regress,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Segment,
        Stage::Match,
        Stage::Sample,
        Stage::Train,
        Stage::Evaluate,
        Stage::Predict,
        Stage::Indicators,
        Stage::Regress,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Segment => "segment",
            Stage::Match => "match",
            Stage::Sample => "sample",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Predict => "predict",
            Stage::Indicators => "indicators",
            Stage::Regress => "regress",
            Stage::Report => "report",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Scores of one classifier on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub split: Split,
    pub n_train: usize,
    pub n_test: usize,
    pub betas: Vec<f64>,
    pub models: Vec<ModelEvaluation>,
}

impl EvaluationArtifact {
    pub fn model(&self, name: &str) -> Option<&EvalReport> {
        self.models.iter().find(|m| m.model == name).map(|m| &m.report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analytics {
    pub mode: IndicatorMode,
    pub n_firm_years: usize,
    /// Computed on cumulative flags whatever the indicator mode.
    pub trend: Vec<TrendRow>,
    pub industry: IndustryTable,
    pub patent_overlap: Option<Vec<OverlapRow>>,
    pub size_bins: Option<SizeBinTable>,
}

/// Result of one configured model: fits, or the reason it could not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<T> Outcome<T> {
    fn from(r: dtmeasure_core::Result<T>) -> Self {
        match r {
            Ok(v) => Outcome {
                value: Some(v),
                error: None,
            },
            Err(e) => Outcome {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub name: String,
    pub estimator: Estimator,
    pub firm_fe: bool,
    pub year_fe: bool,
    pub outcome: Outcome<Vec<FitResult>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionArtifact {
    pub n_rows: usize,
    pub rho: f64,
    pub instrument: Option<String>,
    pub describe: Vec<DescribeRow>,
    pub models: Vec<ModelRun>,
    pub channel: Option<Outcome<ChannelReport>>,
    pub technology: Option<Outcome<Vec<TechnologyFit>>>,
}

#[derive(Debug)]
pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
}

fn write_outputs(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

impl Pipeline {
    /// Validates the configuration; `cfg.out` and `cfg.seed` are final.
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let out = cfg.out.clone();
        Ok(Self { cfg, out })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn run(&self, stage: Stage) -> Result<Provenance> {
        write_outputs(&self.out)?;
        log::info!("running stage {}", stage.name());
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Segment => self.segment(),
            Stage::Match => self.match_keywords(),
            Stage::Sample => self.sample(),
            Stage::Train => self.train(),
            Stage::Evaluate => self.evaluate(),
            Stage::Predict => self.predict(),
            Stage::Indicators => self.indicators(),
            Stage::Regress => self.regress(),
            Stage::Report => self.report(),
        }
    }

    /// Runs every stage in order.
    pub fn run_all(&self) -> Result<()> {
        for stage in Stage::ALL {
            if stage == Stage::Regress && self.cfg.paths.panel.is_none() {
                continue;
            }
            self.run(stage)?;
        }
        Ok(())
    }

    fn require(&self, stage: Stage) -> Result<Provenance> {
        provenance::verify(&self.out, stage.name(), &|s| {
            let stage = Stage::from_name(s).ok_or_else(|| Error::validation(format!("unknown stage {s}")))?;
            self.expectation(stage)
        })
    }

    /// Annotation service settings over the sampled pool. Fails with a
    /// stale error until `sample` has run.
    pub fn service_config(&self) -> Result<ServiceConfig> {
        self.require(Stage::Sample)?;
        let serve = &self.cfg.serve;
        Ok(ServiceConfig {
            bind: serve.bind.clone(),
            event_log: serve.event_log.clone(),
            pool: self.artifact(ANNOTATION_POOL),
            sentences: self.artifact(SENTENCES),
            annotator_token: serve.annotator_token.clone(),
            adjudicator_token: serve.adjudicator_token.clone(),
        })
    }

    fn has_record(&self, stage: Stage) -> bool {
        provenance::record_path(&self.out, stage.name()).is_file()
    }

    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn section_patterns(&self) -> SectionPatterns {
        let mut p = SectionPatterns::default();
        if let Some(h) = &self.cfg.corpus.mda_headings {
            p.mda = h.clone();
        }
        if let Some(h) = &self.cfg.corpus.risk_headings {
            p.risk = h.clone();
        }
        p
    }

    fn segmenter(&self) -> Segmenter {
        let s = Segmenter::new(self.cfg.corpus.min_tokens);
        match &self.cfg.corpus.abbreviations {
            Some(a) => s.with_abbreviations(a),
            None => s,
        }
    }

    fn event_log_path(&self) -> &Path {
        &self.cfg.serve.event_log
    }

    /// The record a stage would write under the current configuration.
    pub fn expectation(&self, stage: Stage) -> Result<Expectation> {
        let cfg = &self.cfg;
        let name = stage.name();
        Ok(match stage {
            Stage::Ingest => {
                let settings = json!({
                    "mda": cfg.corpus.mda_headings,
                    "risk": cfg.corpus.risk_headings,
                });
                let mut e = Expectation::new(name, digest_settings(&settings)).input("manifest", &cfg.paths.manifest);
                let base = formats::base_dir(&cfg.paths.manifest);
                for r in formats::read_manifest(&cfg.paths.manifest)? {
                    let role = format!("text:{}:{}", r.firm_id, r.year);
                    e = e.input(role, &formats::resolve(&base, &r.text_path));
                }
                e
            }
            Stage::Segment => {
                let settings = json!({
                    "min_tokens": cfg.corpus.min_tokens,
                    "abbreviations": cfg.corpus.abbreviations,
                });
                Expectation::new(name, digest_settings(&settings)).upstream("ingest")
            }
            Stage::Match => Expectation::new(name, digest_settings(&json!({})))
                .input("lexicon", &cfg.paths.lexicon)
                .upstream("segment"),
            Stage::Sample => {
                let settings = json!({
                    "seed": self.seed(),
                    "per_year_quota": cfg.sampling.per_year_quota,
                });
                Expectation::new(name, digest_settings(&settings))
                    .upstream("segment")
                    .upstream("match")
            }
            Stage::Train => {
                let settings = json!({ "seed": self.seed(), "split": cfg.sampling.split });
                let e = Expectation::new(name, digest_settings(&settings));
                match &cfg.paths.labels {
                    Some(p) => e.input("labels", p),
                    None => e
                        .input("events", self.event_log_path())
                        .upstream("segment")
                        .upstream("sample"),
                }
            }
            Stage::Evaluate => Expectation::new(name, digest_settings(&json!({ "betas": cfg.classify.betas })))
                .input("lexicon", &cfg.paths.lexicon)
                .upstream("train"),
            Stage::Predict => {
                let mut settings = json!({ "backend": cfg.classify.backend });
                if cfg.classify.backend == Backend::Remote {
                    settings["remote"] = json!(cfg.classify.remote);
                }
                let e = Expectation::new(name, digest_settings(&settings))
                    .upstream("segment")
                    .upstream("sample");
                match cfg.classify.backend {
                    Backend::NaiveBayes => e.upstream("train"),
                    Backend::Dictionary => e.input("lexicon", &cfg.paths.lexicon),
                    Backend::Remote => e,
                }
            }
            Stage::Indicators => {
                let e = Expectation::new(name, digest_settings(&cfg.indicators))
                    .upstream("ingest")
                    .upstream("segment")
                    .upstream("predict");
                match &cfg.paths.patents {
                    Some(p) => e.input("patents", p),
                    None => e,
                }
            }
            Stage::Regress => {
                let settings = json!({ "seed": self.seed(), "regress": cfg.regress });
                let panel = cfg
                    .paths
                    .panel
                    .as_ref()
                    .ok_or_else(|| Error::validation("regress needs paths.panel"))?;
                let mut e = Expectation::new(name, digest_settings(&settings))
                    .input("panel", panel)
                    .upstream("indicators");
                if let (Some(r), Some(l)) = (&cfg.paths.roster, &cfg.paths.locations) {
                    e = e.input("roster", r).input("locations", l);
                }
                e
            }
            Stage::Report => {
                let mut e = Expectation::new(name, digest_settings(&json!({ "seed": self.seed() })))
                    .upstream("indicators");
                for s in [Stage::Evaluate, Stage::Regress] {
                    if self.has_record(s) {
                        e = e.upstream(s.name());
                    }
                }
                e
            }
        })
    }

    fn commit(&self, stage: Stage, outputs: &[&str]) -> Result<Provenance> {
        self.expectation(stage)?.commit(&self.out, self.seed(), outputs)
    }

    fn ingest(&self) -> Result<Provenance> {
        let manifest = &self.cfg.paths.manifest;
        let records = formats::read_manifest(manifest)?;
        let base = formats::base_dir(manifest);
        let patterns = self.section_patterns();
        let extracted: Vec<Result<Vec<SectionExtract>>> = records
            .par_iter()
            .map(|r| {
                let text = formats::read_text_lossy(&formats::resolve(&base, &r.text_path))?;
                let sections = extract_sections(r, &text, &patterns);
                if sections.is_empty() {
                    log::warn!("{} {}: no MD&A or risk section found", r.firm_id, r.year);
                }
                Ok(sections)
            })
            .collect();
        let mut sections = Vec::new();
        for s in extracted {
            sections.extend(s?);
        }
        formats::write_jsonl(&self.artifact(FILINGS), &records)?;
        formats::write_jsonl(&self.artifact(SECTIONS), &sections)?;
        log::info!("{} filings, {} sections", records.len(), sections.len());
        self.commit(Stage::Ingest, &[FILINGS, SECTIONS])
    }

    pub fn load_filings(&self) -> Result<Vec<FilingRecord>> {
        formats::read_jsonl(&self.artifact(FILINGS))
    }

    pub fn load_sentences(&self) -> Result<Vec<Sentence>> {
        formats::read_jsonl(&self.artifact(SENTENCES))
    }

    fn segment(&self) -> Result<Provenance> {
        self.require(Stage::Ingest)?;
        let sections: Vec<SectionExtract> = formats::read_jsonl(&self.artifact(SECTIONS))?;
        let seg = self.segmenter();
        let per_section: Vec<Vec<Sentence>> = sections.par_iter().map(|s| segment_sentences(s, &seg)).collect();
        let sentences: Vec<Sentence> = per_section.into_iter().flatten().collect();
        let mut ids = BTreeSet::new();
        if let Some(dup) = sentences.iter().find(|s| !ids.insert(s.sentence_id.as_str())) {
            return Err(dtmeasure_core::Error::Duplicate(dup.sentence_id.clone()).into());
        }
        formats::write_jsonl(&self.artifact(SENTENCES), &sentences)?;
        log::info!("{} sentences", sentences.len());
        self.commit(Stage::Segment, &[SENTENCES])
    }

    fn match_keywords(&self) -> Result<Provenance> {
        self.require(Stage::Segment)?;
        let lexicon = formats::read_lexicon(&self.cfg.paths.lexicon)?;
        let sentences = self.load_sentences()?;
        let per: Vec<Vec<KeywordHit>> = sentences.par_iter().map(|s| lexicon.match_sentence(s)).collect();
        let hits: Vec<KeywordHit> = per.into_iter().flatten().collect();
        formats::write_jsonl(&self.artifact(HITS), &hits)?;
        log::info!("{} keyword hits", hits.len());
        self.commit(Stage::Match, &[HITS])
    }

    fn sample(&self) -> Result<Provenance> {
        self.require(Stage::Segment)?;
        self.require(Stage::Match)?;
        let sentences = self.load_sentences()?;
        let hits: Vec<KeywordHit> = formats::read_jsonl(&self.artifact(HITS))?;
        let prediction = build_prediction_pool(&sentences);
        let annotation = build_annotation_pool(&sentences, &hits, self.cfg.sampling.per_year_quota, self.seed());
        formats::write_pool(&self.artifact(PREDICTION_POOL), &prediction.members)?;
        formats::write_pool(&self.artifact(ANNOTATION_POOL), &annotation.members)?;
        log::info!(
            "prediction pool {}, annotation pool {}",
            prediction.members.len(),
            annotation.members.len()
        );
        self.commit(Stage::Sample, &[PREDICTION_POOL, ANNOTATION_POOL])
    }

    /// Training examples from the labels file or, failing that, from the
    /// final labels in the annotation event log.
    fn training_examples(&self) -> Result<Vec<LabeledExample>> {
        if let Some(p) = &self.cfg.paths.labels {
            return formats::read_labeled(p);
        }
        self.require(Stage::Segment)?;
        self.require(Stage::Sample)?;
        let log_path = self.event_log_path();
        if !log_path.is_file() {
            return Err(Error::validation(format!(
                "no training data: set paths.labels or annotate into {}",
                log_path.display()
            )));
        }
        let events: Vec<AnnotationEvent> = formats::read_jsonl(log_path)?;
        let pool = formats::read_pool(&self.artifact(ANNOTATION_POOL))?;
        let board = Board::replay(pool, &events)?;
        let texts: HashMap<String, String> = self
            .load_sentences()?
            .into_iter()
            .map(|s| (s.sentence_id, s.text))
            .collect();
        Ok(board
            .training_export()
            .into_iter()
            .map(|(id, label)| LabeledExample {
                text: texts[&id].clone(),
                sentence_id: id,
                label,
            })
            .collect())
    }

    fn train(&self) -> Result<Provenance> {
        let examples = self.training_examples()?;
        let labeled: Vec<(String, Label)> = examples.iter().map(|e| (e.sentence_id.clone(), e.label)).collect();
        let split = split_dataset(&labeled, self.cfg.sampling.split, self.seed())?;
        for class in &split.flagged_classes {
            log::warn!("label class {class} has fewer than 3 examples");
        }
        let train: Vec<(&str, Label)> = examples
            .iter()
            .filter(|e| split.get(&e.sentence_id) == Some(Split::Train))
            .map(|e| (e.text.as_str(), e.label))
            .collect();
        let model = train_naive_bayes(&train, &Label::CLASSES)?;
        let lines: Vec<SplitLine> = split
            .assignments
            .iter()
            .map(|(id, s)| SplitLine {
                sentence_id: id.clone(),
                split: *s,
            })
            .collect();
        formats::write_labeled(&self.artifact(TRAINING), &examples)?;
        formats::write_jsonl(&self.artifact(SPLIT), &lines)?;
        formats::write_json(&self.artifact(MODEL), &model)?;
        let [tr, te, va] = split.counts();
        log::info!("split train {tr}, test {te}, validation {va}");
        self.commit(Stage::Train, &[TRAINING, SPLIT, MODEL])
    }

    pub fn load_model(&self) -> Result<NbModel> {
        let model: NbModel = formats::read_json(&self.artifact(MODEL))?;
        Ok(model.finish_load()?)
    }

    fn evaluate(&self) -> Result<Provenance> {
        self.require(Stage::Train)?;
        let examples = formats::read_labeled(&self.artifact(TRAINING))?;
        let split: HashMap<String, Split> = formats::read_jsonl::<SplitLine>(&self.artifact(SPLIT))?
            .into_iter()
            .map(|l| (l.sentence_id, l.split))
            .collect();
        let model = self.load_model()?;
        let lexicon = formats::read_lexicon(&self.cfg.paths.lexicon)?;
        let split = &split;
        let in_split = |s: Split| examples.iter().filter(move |e| split.get(&e.sentence_id) == Some(&s));
        let test: Vec<&LabeledExample> = in_split(Split::Test).collect();
        if test.is_empty() {
            return Err(Error::validation("the test split is empty"));
        }
        let n_train = in_split(Split::Train).count();
        let majority = majority_label(in_split(Split::Train).map(|e| e.label));
        let gold: Vec<(String, Label)> = test.iter().map(|e| (e.sentence_id.clone(), e.label)).collect();
        let betas = &self.cfg.classify.betas;

        let nb: Vec<Prediction> = test.iter().map(|e| model.predict_one(&e.sentence_id, &e.text)).collect();
        let dict: Vec<Prediction> = test
            .iter()
            .map(|e| dictionary_classify(&e.sentence_id, &e.text, &lexicon))
            .collect();
        let major: Vec<Prediction> = test
            .iter()
            .map(|e| Prediction {
                sentence_id: e.sentence_id.clone(),
                label: majority,
                confidence: 1.0,
            })
            .collect();
        let models = vec![
            ModelEvaluation {
                model: "naive_bayes".into(),
                report: evaluate(&nb, &gold, betas)?,
            },
            ModelEvaluation {
                model: "dictionary".into(),
                report: evaluate(&dict, &gold, betas)?,
            },
            ModelEvaluation {
                model: "majority".into(),
                report: evaluate(&major, &gold, betas)?,
            },
        ];
        let artifact = EvaluationArtifact {
            split: Split::Test,
            n_train,
            n_test: test.len(),
            betas: betas.clone(),
            models,
        };
        formats::write_json(&self.artifact(EVALUATION), &artifact)?;
        self.commit(Stage::Evaluate, &[EVALUATION])
    }

    fn predict(&self) -> Result<Provenance> {
        self.require(Stage::Segment)?;
        self.require(Stage::Sample)?;
        let pool = formats::read_pool(&self.artifact(PREDICTION_POOL))?;
        let sentences = self.load_sentences()?;
        let texts: HashMap<&str, &str> = sentences
            .iter()
            .map(|s| (s.sentence_id.as_str(), s.text.as_str()))
            .collect();
        let inputs: Vec<Input<'_>> = pool
            .iter()
            .map(|id| {
                texts
                    .get(id.as_str())
                    .map(|t| Input { id, text: t })
                    .ok_or_else(|| Error::validation(format!("pool sentence {id} has no text")))
            })
            .collect::<Result<_>>()?;
        let predictions = match self.cfg.classify.backend {
            Backend::NaiveBayes => {
                self.require(Stage::Train)?;
                let model = self.load_model()?;
                inputs.par_iter().map(|i| model.predict_one(i.id, i.text)).collect()
            }
            Backend::Dictionary => {
                let lexicon = formats::read_lexicon(&self.cfg.paths.lexicon)?;
                inputs
                    .par_iter()
                    .map(|i| dictionary_classify(i.id, i.text, &lexicon))
                    .collect()
            }
            Backend::Remote => {
                RemoteClassifier::new(self.cfg.classify.remote.clone())?.predict(&inputs)?
            }
        };
        formats::write_jsonl(&self.artifact(PREDICTIONS), &predictions)?;
        self.commit(Stage::Predict, &[PREDICTIONS])
    }

    fn indicators(&self) -> Result<Provenance> {
        self.require(Stage::Ingest)?;
        self.require(Stage::Segment)?;
        self.require(Stage::Predict)?;
        let filings = self.load_filings()?;
        let sentences = self.load_sentences()?;
        let predictions: Vec<Prediction> = formats::read_jsonl(&self.artifact(PREDICTIONS))?;
        let firm_years: Vec<(String, i32)> = filings.iter().map(|f| (f.firm_id.clone(), f.year)).collect();
        let ic = &self.cfg.indicators;
        let rows = build_indicators(&predictions, &sentences, &firm_years, ic.mode, ic.min_sentences)?;
        let cumulative = if ic.mode == IndicatorMode::Cumulative {
            rows.clone()
        } else {
            build_indicators(&predictions, &sentences, &firm_years, IndicatorMode::Cumulative, ic.min_sentences)?
        };

        let mut latest: BTreeMap<&str, &FilingRecord> = BTreeMap::new();
        for f in &filings {
            let e = latest.entry(f.firm_id.as_str()).or_insert(f);
            if f.year > e.year {
                *e = f;
            }
        }
        let sectors: BTreeMap<String, String> = latest
            .iter()
            .filter(|(_, f)| !f.sector().is_empty())
            .map(|(k, f)| (k.to_string(), f.sector().to_string()))
            .collect();
        let trend = adoption_trend(&cumulative)?;
        let industry = industry_table(&cumulative, &sectors)?;

        let overlap = match &self.cfg.paths.patents {
            Some(p) => Some(patent_overlap(&cumulative, &formats::read_patents(p)?)),
            None => None,
        };
        let size_year = ic.size_year.or_else(|| filings.iter().map(|f| f.year).max());
        let bins = match size_year {
            Some(year) if !ic.size_bins.is_empty() => {
                let employees: BTreeMap<String, u64> = filings
                    .iter()
                    .filter(|f| f.year == year)
                    .filter_map(|f| f.employees.map(|e| (f.firm_id.clone(), e)))
                    .collect();
                Some(size_bins(&cumulative, &employees, &ic.size_bins, year, Technology::Ai)?)
            }
            _ => None,
        };

        formats::write_indicators(&self.artifact(INDICATORS), &rows)?;
        let analytics = Analytics {
            mode: ic.mode,
            n_firm_years: rows.len(),
            trend,
            industry,
            patent_overlap: overlap,
            size_bins: bins,
        };
        formats::write_json(&self.artifact(ANALYTICS), &analytics)?;
        report::write_trend_csv(&self.artifact(TREND_CSV), &analytics.trend)?;
        report::write_industry_csv(&self.artifact(INDUSTRY_CSV), &analytics.industry)?;
        let mut outputs = vec![INDICATORS, ANALYTICS, TREND_CSV, INDUSTRY_CSV];
        if let Some(o) = &analytics.patent_overlap {
            report::write_overlap_csv(&self.artifact(OVERLAP_CSV), o)?;
            outputs.push(OVERLAP_CSV);
        }
        if let Some(b) = &analytics.size_bins {
            report::write_size_bins_csv(&self.artifact(SIZE_BINS_CSV), b)?;
            outputs.push(SIZE_BINS_CSV);
        }
        self.commit(Stage::Indicators, &outputs)
    }

    fn regress(&self) -> Result<Provenance> {
        self.require(Stage::Indicators)?;
        let rc = &self.cfg.regress;
        let panel_path = self
            .cfg
            .paths
            .panel
            .as_ref()
            .ok_or_else(|| Error::validation("regress needs paths.panel"))?;
        let mut data = formats::read_panel(panel_path, &rc.label_columns)?;
        let indicators = formats::read_indicators(&self.artifact(INDICATORS))?;
        data.attach_indicators(&indicators)?;
        for c in &rc.lags {
            data.add_lag(c, 1)?;
        }
        let instrument = match (&self.cfg.paths.roster, &self.cfg.paths.locations) {
            (Some(r), Some(l)) => {
                let roster = Roster::new(formats::read_roster(r)?)?;
                let locations = formats::read_locations(l)?;
                let firm_years: Vec<(String, i32)> = data
                    .firm_ids()
                    .iter()
                    .cloned()
                    .zip(data.years().iter().copied())
                    .collect();
                let iv = build_iv_column(&locations, &firm_years, &roster, rc.rho)?;
                data.add_column(&rc.iv_column, iv.into_iter().map(Some).collect())?;
                Some(rc.iv_column.clone())
            }
            _ => None,
        };
        let cols: Vec<&str> = rc.describe.iter().map(String::as_str).collect();
        let described = describe(&data, &cols)?;

        let models: Vec<ModelRun> = rc
            .models
            .par_iter()
            .map(|m| {
                let r = match m.estimator {
                    Estimator::FeOls => fit_fe_ols(&m.spec, &data).map(|f| vec![f]),
                    Estimator::Tsls => fit_2sls(&m.spec, &data).map(|f| vec![f]),
                    Estimator::Quantile => {
                        let defaults = QuantileOptions::default();
                        let options = QuantileOptions {
                            taus: m.taus(),
                            firm_dummies: m.firm_dummies,
                            bootstrap_reps: m.bootstrap_reps.unwrap_or(defaults.bootstrap_reps),
                            seed: self.seed(),
                        };
                        fit_quantile(&m.spec, &data, &options)
                    }
                };
                if let Err(e) = &r {
                    log::warn!("model {}: {e}", m.name);
                }
                ModelRun {
                    name: m.name.clone(),
                    estimator: m.estimator,
                    firm_fe: m.spec.has_fe(dtmeasure_core::econometrics::FixedEffect::Firm),
                    year_fe: m.spec.has_fe(dtmeasure_core::econometrics::FixedEffect::Year),
                    outcome: Outcome::from(r),
                }
            })
            .collect();
        let channel = rc.channel.as_ref().map(|c| Outcome::from(channel_suite(&data, c)));
        let technology = rc
            .technology
            .as_ref()
            .map(|t| Outcome::from(per_technology_suite(&data, &t.dependent, &t.controls)));
        let artifact = RegressionArtifact {
            n_rows: data.len(),
            rho: rc.rho,
            instrument,
            describe: described,
            models,
            channel,
            technology,
        };
        formats::write_json(&self.artifact(REGRESSION), &artifact)?;
        self.commit(Stage::Regress, &[REGRESSION])
    }

    fn report(&self) -> Result<Provenance> {
        self.require(Stage::Indicators)?;
        let evaluation: Option<EvaluationArtifact> = if self.has_record(Stage::Evaluate) {
            self.require(Stage::Evaluate)?;
            Some(formats::read_json(&self.artifact(EVALUATION))?)
        } else {
            None
        };
        let regression: Option<RegressionArtifact> = if self.has_record(Stage::Regress) {
            self.require(Stage::Regress)?;
            Some(formats::read_json(&self.artifact(REGRESSION))?)
        } else {
            None
        };
        let analytics: Analytics = formats::read_json(&self.artifact(ANALYTICS))?;
        let text = report::render(self.seed(), evaluation.as_ref(), &analytics, regression.as_ref());
        formats::write_text(&self.artifact(REPORT_TXT), &text)?;
        formats::write_json(
            &self.artifact(REPORT_JSON),
            &json!({
                "seed": self.seed(),
                "evaluation": evaluation,
                "analytics": analytics,
                "regression": regression,
            }),
        )?;
        let mut outputs = vec![REPORT_TXT, REPORT_JSON];
        if let Some(e) = &evaluation {
            report::write_table1_csv(&self.artifact(TABLE1_CSV), e)?;
            outputs.push(TABLE1_CSV);
        }
        if let Some(r) = &regression {
            report::write_regression_csv(&self.artifact(REGRESSION_CSV), r)?;
            outputs.push(REGRESSION_CSV);
        }
        self.commit(Stage::Report, &outputs)
    }
}

/// Most frequent label; ties go to the earlier class.
fn majority_label(labels: impl Iterator<Item = Label>) -> Label {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best = (Label::NonDigital, 0);
    for (l, n) in counts {
        if n > best.1 {
            best = (l, n);
        }
    }
    best.0
}
