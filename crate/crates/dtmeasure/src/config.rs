//! Run configuration (TOML). Relative paths are resolved against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use dtmeasure_core::classify::DEFAULT_BETAS;
use dtmeasure_core::econometrics::{ChannelColumns, Estimator, RegressionSpec, DEFAULT_TAUS};
use dtmeasure_core::indicators::IndicatorMode;
use dtmeasure_core::instruments::DEFAULT_RHO;
use serde::{Deserialize, Serialize};

use crate::remote::RemoteBackendConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub paths: Paths,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub indicators: IndicatorConfig,
    #[serde(default)]
    pub regress: RegressConfig,
    #[serde(default)]
    pub serve: ServeConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub lexicon: PathBuf,
    /// Hand-labelled training sentences (`sentence_id,text,label`). When
    /// absent, `train` uses the final labels in the annotation event log.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub patents: Option<PathBuf>,
    #[serde(default)]
    pub roster: Option<PathBuf>,
    #[serde(default)]
    pub locations: Option<PathBuf>,
    #[serde(default)]
    pub panel: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub min_tokens: usize,
    /// Replaces the built-in abbreviation list when set.
    pub abbreviations: Option<Vec<String>>,
    pub mda_headings: Option<Vec<String>>,
    pub risk_headings: Option<Vec<String>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            min_tokens: dtmeasure_core::corpus::DEFAULT_MIN_TOKENS,
            abbreviations: None,
            mda_headings: None,
            risk_headings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub per_year_quota: usize,
    /// Train, test and validation weights.
    pub split: [u32; 3],
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            per_year_quota: 10,
            split: [8, 1, 1],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    NaiveBayes,
    Dictionary,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub backend: Backend,
    pub betas: Vec<f64>,
    pub remote: RemoteBackendConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            backend: Backend::NaiveBayes,
            betas: DEFAULT_BETAS.to_vec(),
            remote: RemoteBackendConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorConfig {
    pub mode: IndicatorMode,
    pub min_sentences: usize,
    /// Ascending lower bounds of the employee-count bins.
    pub size_bins: Vec<u64>,
    /// Year for the size-bin table; the latest filing year when unset.
    pub size_year: Option<i32>,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            mode: IndicatorMode::Cumulative,
            min_sentences: 1,
            size_bins: vec![0, 500, 5_000, 50_000],
            size_year: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    /// Panel columns read as text rather than numbers.
    pub label_columns: Vec<String>,
    /// Columns to lag by one year; each adds `<name>_lag1`.
    pub lags: Vec<String>,
    pub rho: f64,
    /// Name given to the geographic instrument column.
    pub iv_column: String,
    pub describe: Vec<String>,
    pub models: Vec<ModelConfig>,
    pub channel: Option<ChannelColumns>,
    pub technology: Option<TechnologyConfig>,
}

impl Default for RegressConfig {
    fn default() -> Self {
        Self {
            label_columns: vec!["naics".into()],
            lags: Vec::new(),
            rho: DEFAULT_RHO,
            iv_column: "iv".into(),
            describe: Vec::new(),
            models: Vec::new(),
            channel: None,
            technology: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub estimator: Estimator,
    #[serde(flatten)]
    pub spec: RegressionSpec,
    #[serde(default)]
    pub taus: Option<Vec<f64>>,
    #[serde(default)]
    pub bootstrap_reps: Option<usize>,
    #[serde(default)]
    pub firm_dummies: bool,
}

impl ModelConfig {
    pub fn taus(&self) -> Vec<f64> {
        self.taus.clone().unwrap_or_else(|| DEFAULT_TAUS.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologyConfig {
    pub dependent: String,
    #[serde(default)]
    pub controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
    pub event_log: PathBuf,
    pub annotator_token: Option<String>,
    pub adjudicator_token: Option<String>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            event_log: PathBuf::from("events.jsonl"),
            annotator_token: None,
            adjudicator_token: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("configuration: {e}")))
    }

    /// Loads a configuration file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let base = crate::formats::base_dir(path);
        cfg.resolve(&base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        fix(&mut self.paths.manifest);
        fix(&mut self.paths.lexicon);
        for p in [
            &mut self.paths.labels,
            &mut self.paths.patents,
            &mut self.paths.roster,
            &mut self.paths.locations,
            &mut self.paths.panel,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.serve.event_log);
    }

    /// Checks value ranges and that every configured input file exists.
    pub fn validate(&self) -> Result<()> {
        let must_exist = |what: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(Error::validation(format!("{what} not found: {}", p.display())))
            }
        };
        must_exist("manifest", &self.paths.manifest)?;
        must_exist("lexicon", &self.paths.lexicon)?;
        let optional = [
            ("labels", &self.paths.labels),
            ("patents", &self.paths.patents),
            ("roster", &self.paths.roster),
            ("locations", &self.paths.locations),
            ("panel", &self.paths.panel),
        ];
        for (what, p) in optional {
            if let Some(p) = p {
                must_exist(what, p)?;
            }
        }
        if self.corpus.min_tokens == 0 {
            return Err(Error::validation("corpus.min_tokens must be at least 1"));
        }
        if self.sampling.split.iter().all(|&r| r == 0) {
            return Err(Error::validation("sampling.split weights are all zero"));
        }
        if self.classify.betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::validation("classify.betas must be positive"));
        }
        if self.classify.backend == Backend::Remote {
            self.classify.remote.validate()?;
        }
        if !(self.regress.rho > 0.0) || !self.regress.rho.is_finite() {
            return Err(Error::validation(format!("regress.rho must be positive, got {}", self.regress.rho)));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.regress.models {
            if !names.insert(m.name.as_str()) {
                return Err(Error::validation(format!("duplicate model name `{}`", m.name)));
            }
            m.spec.validate()?;
            if let Some(taus) = &m.taus {
                if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
                    return Err(Error::validation(format!("model `{}`: tau {t} outside (0, 1)", m.name)));
                }
            }
        }
        Ok(())
    }
}
