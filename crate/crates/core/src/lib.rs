//! Core algorithms for measuring firm-level digital transformation from
//! annual-report text, together with the panel estimators used to study its
//! effect on financial performance.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the annotation
//! event log, the HTTP service and the command line live in the `dtmeasure`
//! companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod classify;
pub mod corpus;
pub mod econometrics;
mod error;
pub mod indicators;
pub mod instruments;
pub mod lexicon;
pub mod sampling;

pub use error::{Error, Result};

/// The six digital technologies tracked per firm-year.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub enum Technology {
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "BD")]
    BigData,
    #[serde(rename = "CC")]
    Cloud,
    #[serde(rename = "IOT")]
    Iot,
    #[serde(rename = "BC")]
    Blockchain,
    #[serde(rename = "MI")]
    MobileInternet,
}

impl Technology {
    pub const ALL: [Technology; 6] = [
        Technology::Ai,
        Technology::BigData,
        Technology::Cloud,
        Technology::Iot,
        Technology::Blockchain,
        Technology::MobileInternet,
    ];

    /// Short code used in CSV headers and lexicon files.
    pub fn code(self) -> &'static str {
        match self {
            Technology::Ai => "AI",
            Technology::BigData => "BD",
            Technology::Cloud => "CC",
            Technology::Iot => "IOT",
            Technology::Blockchain => "BC",
            Technology::MobileInternet => "MI",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        let up = code.trim();
        Technology::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(up))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl core::fmt::Display for Technology {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.code())
    }
}
