//! Gender-stereotype genre model, per-user alignment degrees and the
//! corpus-level prevalence statistic.
//!
//! A user's male degree is the number of male-stereotyped genre tags across
//! every movie they rated (female degree likewise). A user is *misaligned*
//! when their recorded gender points one way and the strict comparison of
//! the two degrees points the other; ties are never misaligned.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Gender, GenreId, GenreVocabulary, MovieRecord, RatingCorpus};

#[derive(Debug, thiserror::Error)]
pub enum StereotypeError {
    #[error("stereotype genre sets overlap on {0:?}")]
    Overlap(Vec<String>),
    #[error("{0} stereotype genre set is empty")]
    Empty(&'static str),
    #[error("stereotype genre {0:?} is not in the corpus vocabulary")]
    NotInVocabulary(String),
    #[error("unknown user id {0}")]
    UnknownUser(u64),
    #[error("prevalence of an empty corpus is undefined")]
    EmptyCorpus,
    #[error("cannot read stereotype model {path}: {message}")]
    Config { path: String, message: String },
}

/// Male- and female-stereotyped genre sets. Disjoint and non-empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct StereotypeModel {
    male: BTreeSet<GenreId>,
    female: BTreeSet<GenreId>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    male_genres: Vec<GenreId>,
    female_genres: Vec<GenreId>,
}

impl TryFrom<ModelFile> for StereotypeModel {
    type Error = StereotypeError;

    fn try_from(f: ModelFile) -> Result<Self, Self::Error> {
        StereotypeModel::new(f.male_genres, f.female_genres)
    }
}

impl From<StereotypeModel> for ModelFile {
    fn from(m: StereotypeModel) -> Self {
        ModelFile {
            male_genres: m.male.into_iter().collect(),
            female_genres: m.female.into_iter().collect(),
        }
    }
}

impl StereotypeModel {
    pub fn new(
        male: impl IntoIterator<Item = GenreId>,
        female: impl IntoIterator<Item = GenreId>,
    ) -> Result<Self, StereotypeError> {
        let male: BTreeSet<GenreId> = male.into_iter().collect();
        let female: BTreeSet<GenreId> = female.into_iter().collect();
        if male.is_empty() {
            return Err(StereotypeError::Empty("male"));
        }
        if female.is_empty() {
            return Err(StereotypeError::Empty("female"));
        }
        let overlap: Vec<String> = male.intersection(&female).map(|g| g.to_string()).collect();
        if !overlap.is_empty() {
            return Err(StereotypeError::Overlap(overlap));
        }
        Ok(StereotypeModel { male, female })
    }

    /// Genres with a significant positive association for men in the
    /// survey regression, and those with a significant positive association
    /// for women.
    pub fn default_model() -> Self {
        StereotypeModel::new(
            ["Action", "Adventure", "Comedy", "Crime", "Horror", "War"].map(GenreId::from),
            ["Animation", "Drama", "Family", "Romance"].map(GenreId::from),
        )
        .expect("default sets are disjoint")
    }

    /// Reads `{"male_genres": [...], "female_genres": [...]}`.
    pub fn from_json_file(path: &Path) -> Result<Self, StereotypeError> {
        let config = |message: String| StereotypeError::Config {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| config(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| config(e.to_string()))
    }

    pub fn male_genres(&self) -> &BTreeSet<GenreId> {
        &self.male
    }

    pub fn female_genres(&self) -> &BTreeSet<GenreId> {
        &self.female
    }

    /// The same model with the two sets exchanged.
    pub fn swapped(&self) -> Self {
        StereotypeModel {
            male: self.female.clone(),
            female: self.male.clone(),
        }
    }

    /// Canonicalizes genre spelling against `vocabulary`; every genre must exist there.
    pub fn resolve_against(&self, vocabulary: &GenreVocabulary) -> Result<Self, StereotypeError> {
        let fix = |set: &BTreeSet<GenreId>| -> Result<BTreeSet<GenreId>, StereotypeError> {
            set.iter()
                .map(|g| {
                    vocabulary
                        .lookup_canonical(g.as_str())
                        .cloned()
                        .ok_or_else(|| StereotypeError::NotInVocabulary(g.to_string()))
                })
                .collect()
        };
        Ok(StereotypeModel {
            male: fix(&self.male)?,
            female: fix(&self.female)?,
        })
    }

    /// Contribution of one movie to `(d_male, d_female)`.
    pub fn movie_contribution(&self, movie: &MovieRecord, mode: DegreeMode) -> (u32, u32) {
        let m = movie.genres.iter().filter(|g| self.male.contains(g)).count() as u32;
        let f = movie.genres.iter().filter(|g| self.female.contains(g)).count() as u32;
        match mode {
            DegreeMode::Cardinality => (m, f),
            DegreeMode::ItemCount => (u32::from(m > 0), u32::from(f > 0)),
        }
    }
}

impl Default for StereotypeModel {
    fn default() -> Self {
        Self::default_model()
    }
}

/// How a rated movie's genre tags are aggregated into the degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreeMode {
    /// Sum of intersection sizes: a movie tagged Action and War adds 2.
    #[default]
    Cardinality,
    /// Count of rated movies with a non-empty intersection.
    ItemCount,
}

impl std::str::FromStr for DegreeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cardinality" => Ok(DegreeMode::Cardinality),
            "item-count" => Ok(DegreeMode::ItemCount),
            other => Err(format!("unknown degree mode {other:?} (cardinality|item-count)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentDegrees {
    pub user_id: u64,
    pub d_male: u32,
    pub d_female: u32,
}

/// Precomputed per-movie contributions, indexed by movie position.
pub(crate) fn movie_contributions(
    corpus: &RatingCorpus,
    model: &StereotypeModel,
    mode: DegreeMode,
) -> Vec<(u32, u32)> {
    corpus
        .movies()
        .iter()
        .map(|m| model.movie_contribution(m, mode))
        .collect()
}

fn degrees_at(
    corpus: &RatingCorpus,
    contributions: &[(u32, u32)],
    pos: usize,
) -> AlignmentDegrees {
    let (mut d_male, mut d_female) = (0u32, 0u32);
    for r in corpus.ratings_at(pos) {
        let mi = corpus
            .movie_position(r.movie_id)
            .expect("corpus ratings resolve");
        let (m, f) = contributions[mi];
        d_male += m;
        d_female += f;
    }
    AlignmentDegrees {
        user_id: corpus.users()[pos].user_id,
        d_male,
        d_female,
    }
}

pub fn alignment_degrees(
    corpus: &RatingCorpus,
    model: &StereotypeModel,
    user_id: u64,
    mode: DegreeMode,
) -> Result<AlignmentDegrees, StereotypeError> {
    let pos = corpus
        .user_position(user_id)
        .ok_or(StereotypeError::UnknownUser(user_id))?;
    let ratings = corpus.ratings_at(pos);
    let (mut d_male, mut d_female) = (0u32, 0u32);
    for r in ratings {
        let movie = corpus.movie(r.movie_id).expect("corpus ratings resolve");
        let (m, f) = model.movie_contribution(movie, mode);
        d_male += m;
        d_female += f;
    }
    Ok(AlignmentDegrees {
        user_id,
        d_male,
        d_female,
    })
}

/// Degrees for every user, in corpus user order.
pub fn all_degrees(
    corpus: &RatingCorpus,
    model: &StereotypeModel,
    mode: DegreeMode,
) -> Vec<AlignmentDegrees> {
    let contributions = movie_contributions(corpus, model, mode);
    (0..corpus.users().len())
        .into_par_iter()
        .map(|pos| degrees_at(corpus, &contributions, pos))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenderBreakdown {
    pub users: usize,
    pub misaligned: usize,
    pub ties: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub mode: DegreeMode,
    pub total_users: usize,
    pub misaligned_count: usize,
    pub aligned_percent: f64,
    pub misaligned_percent: f64,
    /// Users with `d_male == d_female`; counted as aligned.
    pub tie_count: usize,
    pub male: GenderBreakdown,
    pub female: GenderBreakdown,
}

pub fn is_misaligned(gender: Gender, d: &AlignmentDegrees) -> bool {
    match gender {
        Gender::Female => d.d_male > d.d_female,
        Gender::Male => d.d_male < d.d_female,
    }
}

pub fn prevalence(
    corpus: &RatingCorpus,
    model: &StereotypeModel,
    mode: DegreeMode,
) -> Result<PrevalenceReport, StereotypeError> {
    let total = corpus.users().len();
    if total == 0 {
        return Err(StereotypeError::EmptyCorpus);
    }
    let degrees = all_degrees(corpus, model, mode);
    let mut male = GenderBreakdown {
        users: 0,
        misaligned: 0,
        ties: 0,
    };
    let mut female = male.clone();
    for (user, d) in corpus.users().iter().zip(&degrees) {
        let bucket = match user.gender {
            Gender::Male => &mut male,
            Gender::Female => &mut female,
        };
        bucket.users += 1;
        if d.d_male == d.d_female {
            bucket.ties += 1;
        } else if is_misaligned(user.gender, d) {
            bucket.misaligned += 1;
        }
    }
    let misaligned = male.misaligned + female.misaligned;
    let misaligned_percent = 100.0 * misaligned as f64 / total as f64;
    Ok(PrevalenceReport {
        mode,
        total_users: total,
        misaligned_count: misaligned,
        aligned_percent: (1.0 - misaligned as f64 / total as f64) * 100.0,
        misaligned_percent,
        tie_count: male.ties + female.ties,
        male,
        female,
    })
}
