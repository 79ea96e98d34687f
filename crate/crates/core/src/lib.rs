//! Audits gender stereotypes in movie-rating corpora: how often users rate
//! against their gender's stereotyped genres, how well a gender-inference
//! attack does with and without stereotype features, and a logistic
//! regression over genre-preference surveys.

pub mod classifiers;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod report;
pub mod stereotype;
pub mod surveystats;

pub use classifiers::{ClassifierKind, FitConfig, FitError, TrainedClassifier};
pub use corpus::{CorpusError, CorpusStats, Gender, GenreVocabulary, IngestReport, RatingCorpus};
pub use eval::{CvReport, EvalError, Harness, HoldoutReport, MetricSet};
pub use features::{FeatureMatrix, SparseMatrix, Weighting};
pub use report::{AuditReport, RunManifest, REPORT_SCHEMA};
pub use stereotype::{DegreeMode, PrevalenceReport, StereotypeModel};
pub use surveystats::{FitSummary, SurveyError, SurveyRecord};
