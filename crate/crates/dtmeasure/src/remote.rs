//! Client for a remote sentence classifier speaking a small JSON protocol:
//!
//! ```text
//! POST {"sentences":[{"id":..,"text":..}]}
//!   -> {"predictions":[{"id":..,"label":..,"confidence":..}]}
//! ```
//!
//! Inputs are sent in fixed-size batches with a bounded number in flight.
//! A batch either succeeds completely or fails after its retries; there are
//! no partial results.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use dtmeasure_core::annotation::Label;
use dtmeasure_core::classify::{Classifier, Input, Prediction};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteBackendConfig {
    pub endpoint: String,
    pub batch_size: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            batch_size: 32,
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl RemoteBackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.endpoint.trim().is_empty() {
            return Err(Error::validation("remote endpoint is empty"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("remote batch_size must be at least 1"));
        }
        if self.timeout_ms == 0 {
            return Err(Error::validation("remote timeout_ms must be positive"));
        }
        if self.max_in_flight == 0 {
            return Err(Error::validation("remote max_in_flight must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireSentence {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub sentences: Vec<WireSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePrediction {
    pub id: String,
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub predictions: Vec<WirePrediction>,
}

#[derive(Debug)]
pub struct RemoteClassifier {
    config: RemoteBackendConfig,
    client: reqwest::blocking::Client,
}

impl RemoteClassifier {
    pub fn new(config: RemoteBackendConfig) -> Result<Self> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::validation(format!("http client: {e}")))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &RemoteBackendConfig {
        &self.config
    }

    /// One prediction per input, in input order. On failure the error
    /// names the lowest failing batch index.
    pub fn predict(&self, inputs: &[Input<'_>]) -> Result<Vec<Prediction>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let batches: Vec<&[Input<'_>]> = inputs.chunks(self.config.batch_size).collect();
        let results: Mutex<Vec<Option<Result<Vec<Prediction>>>>> =
            Mutex::new((0..batches.len()).map(|_| None).collect());
        let cursor = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.min(batches.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(i) else { break };
                    let r = self.run_batch(i, batch);
                    let failed = r.is_err();
                    results.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(r);
                    if failed {
                        // Stop handing out new batches; the run has failed.
                        cursor.store(batches.len(), Ordering::SeqCst);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(inputs.len());
        for r in results.into_inner().unwrap_or_else(|p| p.into_inner()).into_iter().flatten() {
            out.extend(r?);
        }
        if out.len() != inputs.len() {
            return Err(Error::Remote {
                batch: out.len() / self.config.batch_size,
                message: "batch was not attempted".into(),
            });
        }
        Ok(out)
    }

    fn run_batch(&self, index: usize, batch: &[Input<'_>]) -> Result<Vec<Prediction>> {
        let request = WireRequest {
            sentences: batch
                .iter()
                .map(|i| WireSentence {
                    id: i.id.to_owned(),
                    text: i.text.to_owned(),
                })
                .collect(),
        };
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let factor = 1u64 << (attempt - 1).min(20);
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms.saturating_mul(factor)));
            }
            match self.send(&request).and_then(|resp| decode(batch, resp)) {
                Ok(p) => return Ok(p),
                Err(e) => {
                    log::warn!("batch {index} attempt {}: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(Error::Remote {
            batch: index,
            message: format!("{last} (after {} attempts)", self.config.max_retries + 1),
        })
    }

    fn send(&self, request: &WireRequest) -> std::result::Result<WireResponse, String> {
        let resp = self
            .client
            .post(&self.config.endpoint)
            .json(request)
            .send()
            .map_err(|e| if e.is_timeout() { format!("timeout: {e}") } else { e.to_string() })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let body = resp.bytes().map_err(|e| e.to_string())?;
        serde_json::from_slice(&body).map_err(|e| format!("malformed response: {e}"))
    }
}

/// Checks a response against its batch and puts it in input order.
fn decode(batch: &[Input<'_>], resp: WireResponse) -> std::result::Result<Vec<Prediction>, String> {
    if resp.predictions.len() != batch.len() {
        return Err(format!(
            "{} predictions for {} sentences",
            resp.predictions.len(),
            batch.len()
        ));
    }
    let mut by_id = std::collections::HashMap::with_capacity(batch.len());
    for p in resp.predictions {
        let label: Label = p.label.parse().map_err(|_| format!("unknown label `{}`", p.label))?;
        if !label.is_substantive() {
            return Err(format!("label `{}` is not a class", p.label));
        }
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(format!("confidence {} outside [0, 1]", p.confidence));
        }
        let id = p.id.clone();
        if by_id
            .insert(
                id.clone(),
                Prediction {
                    sentence_id: p.id,
                    label,
                    confidence: p.confidence,
                },
            )
            .is_some()
        {
            return Err(format!("duplicate prediction for `{id}`"));
        }
    }
    batch
        .iter()
        .map(|i| by_id.remove(i.id).ok_or_else(|| format!("no prediction for `{}`", i.id)))
        .collect()
}

impl Classifier for RemoteClassifier {
    fn classify(&self, inputs: &[Input<'_>]) -> dtmeasure_core::Result<Vec<Prediction>> {
        self.predict(inputs)
            .map_err(|e| dtmeasure_core::Error::Invalid(e.to_string()))
    }
}
