//! Versioned audit report: a run manifest plus whichever result sections the
//! run produced.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierKind;
use crate::corpus::{CorpusStats, IngestReport, Provenance, SourceFormat};
use crate::eval::{CvReport, HoldoutReport};
use crate::stereotype::{PrevalenceReport, StereotypeModel};
use crate::surveystats::FitSummary;

pub const REPORT_SCHEMA: &str = "gs-audit/report-v1";

/// JSON Schema every emitted report validates against.
pub const REPORT_JSON_SCHEMA: &str = include_str!("../schema/report-v1.json");

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to re-derive a report's numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub dataset_format: Option<SourceFormat>,
    /// File name → SHA-256 of the inputs.
    pub dataset_hashes: BTreeMap<String, String>,
    pub stereotype_model: Option<StereotypeModel>,
    pub config: serde_json::Value,
    pub toolkit_version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn unix_ms_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> Self {
        RunManifest {
            command,
            seed: None,
            dataset_format: None,
            dataset_hashes: BTreeMap::new(),
            stereotype_model: None,
            config: serde_json::Value::Null,
            toolkit_version: TOOLKIT_VERSION.to_owned(),
            started_unix_ms: unix_ms_now(),
            finished_unix_ms: 0,
        }
    }

    pub fn with_provenance(mut self, p: &Provenance) -> Self {
        self.dataset_format = Some(p.format);
        self.dataset_hashes = p.file_hashes.clone();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackOutcome {
    Holdout(HoldoutReport),
    Cv(CvReport),
}

/// Metrics of one attack, keyed by classifier, feature set and harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub classifier: ClassifierKind,
    pub with_gs: bool,
    pub harness: String,
    pub converged: bool,
    pub outcome: AttackOutcome,
}

impl AttackResult {
    pub fn holdout(with_gs: bool, harness: String, report: HoldoutReport) -> Self {
        AttackResult {
            classifier: report.classifier,
            with_gs,
            harness,
            converged: report.converged,
            outcome: AttackOutcome::Holdout(report),
        }
    }

    pub fn cv(with_gs: bool, harness: String, report: CvReport) -> Self {
        AttackResult {
            classifier: report.classifier,
            with_gs,
            harness,
            converged: report.converged(),
            outcome: AttackOutcome::Cv(report),
        }
    }
}

/// Both orientations of the survey regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveySection {
    pub respondents: usize,
    pub male_positive: FitSummary,
    pub female_positive: FitSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema: String,
    pub manifest: RunManifest,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corpus_stats: Option<CorpusStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ingest: Option<IngestReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prevalence: Option<PrevalenceReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub attacks: Vec<AttackResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub survey: Option<SurveySection>,
}

impl AuditReport {
    pub fn new(manifest: RunManifest) -> Self {
        AuditReport {
            schema: REPORT_SCHEMA.to_owned(),
            manifest,
            corpus_stats: None,
            ingest: None,
            prevalence: None,
            attacks: Vec::new(),
            survey: None,
        }
    }

    /// Stamps the finish time.
    pub fn finish(mut self) -> Self {
        self.manifest.finished_unix_ms = unix_ms_now();
        self
    }

    /// Copy with timestamps zeroed, for run-to-run comparison.
    pub fn without_timestamps(&self) -> Self {
        let mut r = self.clone();
        r.manifest.started_unix_ms = 0;
        r.manifest.finished_unix_ms = 0;
        r
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
