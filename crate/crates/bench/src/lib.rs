//! Inputs shared by the pipeline benchmarks.

use gsaudit::corpus::synthetic::{generate, SyntheticCorpusConfig};
use gsaudit::eval::attack_features;
use gsaudit::surveystats::{generate_survey, SyntheticSurveyConfig};
use gsaudit::{DegreeMode, FeatureMatrix, RatingCorpus, StereotypeModel, SurveyRecord};

/// Synthetic corpus with MovieLens-1M user, gender and item counts.
pub fn ml1m_corpus() -> RatingCorpus {
    generate(&SyntheticCorpusConfig::ml1m_shaped(1))
}

pub fn small_corpus() -> RatingCorpus {
    generate(&SyntheticCorpusConfig::small(1))
}

/// Normalized attack features with stereotype degrees.
pub fn gs_features(corpus: &RatingCorpus) -> FeatureMatrix {
    let model = StereotypeModel::default_model();
    attack_features(corpus, Some(&model), DegreeMode::Cardinality)
}

/// A 630-respondent survey drawn from the planted coefficients.
pub fn survey() -> Vec<SurveyRecord> {
    generate_survey(&SyntheticSurveyConfig { seed: 1, ..SyntheticSurveyConfig::default() })
}
