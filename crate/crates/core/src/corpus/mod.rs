//! Rating corpora: MovieLens-1M and interchange-CSV ingest, genre
//! normalization and summary statistics.
//!
//! A [`RatingCorpus`] is validated once on construction and immutable
//! afterwards. Users and movies are kept sorted by id, and ratings sorted by
//! `(user_id, movie_id)`, so two corpora holding the same records compare
//! equal regardless of the order the source files listed them in.

mod genre;
mod interchange;
mod ml1m;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use genre::{
    AliasTarget, GenreId, GenreVocabulary, CANONICAL_GENRES, REMOVE_TOKEN, UNRESOLVED_TOKEN,
};
pub use interchange::{export_interchange, load_interchange, load_interchange_with};
pub use ml1m::{load_ml1m, load_ml1m_with};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: rating {value} outside 1..5")]
    RatingOutOfRange { file: String, line: usize, value: i64 },
    #[error("{file}:{line}: unknown genre token {token:?} (no alias)")]
    UnknownGenre {
        file: String,
        line: usize,
        token: String,
    },
    #[error("{file}:{line}: gender token {token:?} is not one of M, F, Male, Female")]
    BadGender {
        file: String,
        line: usize,
        token: String,
    },
    #[error("no rating records in {}", .0.display())]
    NoRatings(PathBuf),
    #[error("duplicate user id {0}")]
    DuplicateUser(u64),
    #[error("duplicate movie id {0}")]
    DuplicateMovie(u64),
    #[error("duplicate rating for user {user_id}, movie {movie_id}")]
    DuplicateRating { user_id: u64, movie_id: u64 },
    #[error("rating references unknown user {0}")]
    DanglingUser(u64),
    #[error("rating references unknown movie {0}")]
    DanglingMovie(u64),
    #[error("movie {movie_id} has genre {genre} outside the vocabulary")]
    GenreOutsideVocabulary { movie_id: u64, genre: String },
    #[error("unknown user id {0}")]
    UnknownUser(u64),
    #[error("genre vocabulary: {0}")]
    Vocabulary(String),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Binary gender label. `Male` is the positive class throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn is_male(self) -> bool {
        self == Gender::Male
    }

    pub fn flipped(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }

    /// One-letter code used in the MovieLens and interchange files.
    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
        })
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "M" | "m" | "Male" | "male" | "MALE" => Ok(Gender::Male),
            "F" | "f" | "Female" | "female" | "FEMALE" => Ok(Gender::Female),
            other => Err(other.to_owned()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: u64,
    pub gender: Gender,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub movie_id: u64,
    pub title: String,
    /// Canonical genres, sorted and deduplicated.
    pub genres: Vec<GenreId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatingTriple {
    pub user_id: u64,
    pub movie_id: u64,
    pub rating: u8,
    pub timestamp: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    Ml1m,
    Interchange,
    Synthetic,
}

/// Where a corpus came from: format plus SHA-256 of every input file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub format: SourceFormat,
    pub file_hashes: BTreeMap<String, String>,
}

impl Provenance {
    pub fn synthetic(seed: u64) -> Self {
        let mut file_hashes = BTreeMap::new();
        file_hashes.insert("seed".to_owned(), seed.to_string());
        Provenance {
            format: SourceFormat::Synthetic,
            file_hashes,
        }
    }
}

/// Per-movie genre replacement supplied by the operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenreOverride {
    Genres(Vec<String>),
    Drop,
}

/// Options shared by both loaders.
#[derive(Clone, Debug, Default)]
pub struct IngestOptions {
    pub overrides: HashMap<u64, GenreOverride>,
}

impl IngestOptions {
    /// Reads a `movie_id,Genre1|Genre2` override file; `__REMOVE__` drops the movie.
    pub fn with_override_file(mut self, path: &Path) -> Result<Self, CorpusError> {
        let text = read_text(path)?;
        let file = path.display().to_string();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: &str| CorpusError::Malformed {
                file: file.clone(),
                line: n + 1,
                message: message.to_owned(),
            };
            let (id, genres) = line
                .split_once(',')
                .ok_or_else(|| malformed("expected `movie_id,genres`"))?;
            let id: u64 = id.trim().parse().map_err(|_| malformed("bad movie id"))?;
            let genres = genres.trim();
            let entry = if genres == REMOVE_TOKEN {
                GenreOverride::Drop
            } else {
                let tokens: Vec<String> = split_genres(genres).map(str::to_owned).collect();
                if tokens.is_empty() {
                    return Err(malformed("override lists no genres"));
                }
                GenreOverride::Genres(tokens)
            };
            self.overrides.insert(id, entry);
        }
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Every genre token mapped to the remove sentinel.
    AllGenresRemoved,
    /// A genre needed a manual override and none was supplied.
    UnresolvedGenre,
    /// The raw record listed no genre and no override was supplied.
    NoGenre,
    /// The override file asked for the movie to be dropped.
    Override,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedMovie {
    pub movie_id: u64,
    pub reason: DropReason,
}

/// What ingestion changed on the way in.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Raw token (as first seen) → canonical target, with application counts.
    /// Identity mappings are not listed.
    pub alias_applications: BTreeMap<String, AliasCount>,
    pub dropped_movies: Vec<DroppedMovie>,
    pub dropped_ratings: usize,
    pub duplicate_ratings: usize,
    pub overrides_applied: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasCount {
    pub target: String,
    pub count: usize,
}

/// A validated, immutable rating corpus.
#[derive(Clone, Debug)]
pub struct RatingCorpus {
    users: Vec<UserRecord>,
    movies: Vec<MovieRecord>,
    ratings: Vec<RatingTriple>,
    user_offsets: Vec<usize>,
    user_index: HashMap<u64, usize>,
    movie_index: HashMap<u64, usize>,
    vocabulary: GenreVocabulary,
    provenance: Provenance,
}

impl PartialEq for RatingCorpus {
    fn eq(&self, other: &Self) -> bool {
        self.users == other.users && self.movies == other.movies && self.ratings == other.ratings
    }
}

impl RatingCorpus {
    /// Validates and indexes the records. Ratings must be unique per
    /// `(user, movie)` and reference known users and movies.
    pub fn new(
        mut users: Vec<UserRecord>,
        mut movies: Vec<MovieRecord>,
        mut ratings: Vec<RatingTriple>,
        vocabulary: GenreVocabulary,
        provenance: Provenance,
    ) -> Result<Self, CorpusError> {
        users.sort_by_key(|u| u.user_id);
        for w in users.windows(2) {
            if w[0].user_id == w[1].user_id {
                return Err(CorpusError::DuplicateUser(w[0].user_id));
            }
        }
        movies.sort_by_key(|m| m.movie_id);
        for w in movies.windows(2) {
            if w[0].movie_id == w[1].movie_id {
                return Err(CorpusError::DuplicateMovie(w[0].movie_id));
            }
        }
        for m in &mut movies {
            m.genres.sort();
            m.genres.dedup();
            if let Some(g) = m.genres.iter().find(|g| !vocabulary.contains(g)) {
                return Err(CorpusError::GenreOutsideVocabulary {
                    movie_id: m.movie_id,
                    genre: g.to_string(),
                });
            }
        }
        let user_index: HashMap<u64, usize> =
            users.iter().enumerate().map(|(i, u)| (u.user_id, i)).collect();
        let movie_index: HashMap<u64, usize> =
            movies.iter().enumerate().map(|(i, m)| (m.movie_id, i)).collect();

        ratings.sort_by_key(|r| (r.user_id, r.movie_id));
        for w in ratings.windows(2) {
            if w[0].user_id == w[1].user_id && w[0].movie_id == w[1].movie_id {
                return Err(CorpusError::DuplicateRating {
                    user_id: w[0].user_id,
                    movie_id: w[0].movie_id,
                });
            }
        }
        let mut user_offsets = vec![0usize; users.len() + 1];
        for r in &ratings {
            if !(1..=5).contains(&r.rating) {
                return Err(CorpusError::RatingOutOfRange {
                    file: "<records>".into(),
                    line: 0,
                    value: r.rating as i64,
                });
            }
            let ui = *user_index
                .get(&r.user_id)
                .ok_or(CorpusError::DanglingUser(r.user_id))?;
            if !movie_index.contains_key(&r.movie_id) {
                return Err(CorpusError::DanglingMovie(r.movie_id));
            }
            user_offsets[ui + 1] += 1;
        }
        for i in 0..users.len() {
            user_offsets[i + 1] += user_offsets[i];
        }

        Ok(RatingCorpus {
            users,
            movies,
            ratings,
            user_offsets,
            user_index,
            movie_index,
            vocabulary,
            provenance,
        })
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn movies(&self) -> &[MovieRecord] {
        &self.movies
    }

    pub fn ratings(&self) -> &[RatingTriple] {
        &self.ratings
    }

    pub fn vocabulary(&self) -> &GenreVocabulary {
        &self.vocabulary
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn user_position(&self, user_id: u64) -> Option<usize> {
        self.user_index.get(&user_id).copied()
    }

    pub fn movie_position(&self, movie_id: u64) -> Option<usize> {
        self.movie_index.get(&movie_id).copied()
    }

    pub fn movie(&self, movie_id: u64) -> Option<&MovieRecord> {
        self.movie_position(movie_id).map(|i| &self.movies[i])
    }

    /// Ratings of the user at position `pos` in [`users`](Self::users).
    pub fn ratings_at(&self, pos: usize) -> &[RatingTriple] {
        &self.ratings[self.user_offsets[pos]..self.user_offsets[pos + 1]]
    }

    pub fn ratings_of(&self, user_id: u64) -> Result<&[RatingTriple], CorpusError> {
        let pos = self
            .user_position(user_id)
            .ok_or(CorpusError::UnknownUser(user_id))?;
        Ok(self.ratings_at(pos))
    }

    pub fn labels(&self) -> Vec<Gender> {
        self.users.iter().map(|u| u.gender).collect()
    }

    pub fn max_movie_id(&self) -> u64 {
        self.movies.last().map_or(0, |m| m.movie_id)
    }

    /// Width of the item axis of the user-item matrix.
    ///
    /// When movie ids are compact (every id in `1..=max`, with `max` at most
    /// twice the number of movie records) columns are indexed by movie id, so
    /// the item space is `max_movie_id`; MovieLens-1M is laid out this way.
    /// Otherwise columns are indexed by movie position.
    pub fn item_layout(&self) -> ItemLayout {
        let max = self.max_movie_id();
        let first = self.movies.first().map_or(0, |m| m.movie_id);
        if first >= 1 && max <= 2 * self.movies.len() as u64 {
            ItemLayout::ById { max_id: max }
        } else {
            ItemLayout::Compact {
                movies: self.movies.len(),
            }
        }
    }

    /// Number of distinct genres carried by at least one movie.
    pub fn genres_in_use(&self) -> usize {
        let mut seen: Vec<&GenreId> = self.movies.iter().flat_map(|m| m.genres.iter()).collect();
        seen.sort();
        seen.dedup();
        seen.len()
    }

    /// Interchange-format rendering of this corpus into `dir`.
    pub fn export(&self, dir: &Path) -> Result<(), CorpusError> {
        export_interchange(self, dir)
    }
}

/// Column layout of the item axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemLayout {
    ById { max_id: u64 },
    Compact { movies: usize },
}

impl ItemLayout {
    pub fn width(self) -> usize {
        match self {
            ItemLayout::ById { max_id } => max_id as usize,
            ItemLayout::Compact { movies } => movies,
        }
    }
}

/// Counts reported for a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub users: usize,
    pub male: usize,
    pub female: usize,
    pub male_percent: f64,
    pub female_percent: f64,
    /// Distinct movie records.
    pub movies: usize,
    pub max_movie_id: u64,
    /// Width of the item axis the density is computed over.
    pub item_columns: usize,
    pub ratings: usize,
    pub genres: usize,
    /// Density in percent, rounded to two decimals.
    pub density_percent: f64,
}

pub fn corpus_stats(corpus: &RatingCorpus) -> CorpusStats {
    let users = corpus.users().len();
    let male = corpus.users().iter().filter(|u| u.gender.is_male()).count();
    let female = users - male;
    let item_columns = corpus.item_layout().width();
    let ratings = corpus.ratings().len();
    let pct = |n: usize| {
        if users == 0 {
            0.0
        } else {
            100.0 * n as f64 / users as f64
        }
    };
    let density = if users == 0 || item_columns == 0 {
        0.0
    } else {
        100.0 * ratings as f64 / (users as f64 * item_columns as f64)
    };
    CorpusStats {
        users,
        male,
        female,
        male_percent: pct(male),
        female_percent: pct(female),
        movies: corpus.movies().len(),
        max_movie_id: corpus.max_movie_id(),
        item_columns,
        ratings,
        genres: corpus.genres_in_use(),
        density_percent: (density * 100.0).round() / 100.0,
    }
}

/// A movie as read from disk, before alias resolution.
pub(crate) struct RawMovie {
    pub movie_id: u64,
    pub title: String,
    pub tokens: Vec<String>,
    pub line: usize,
}

pub(crate) struct RawRating {
    pub triple: RatingTriple,
}

pub(crate) fn split_genres(field: &str) -> impl Iterator<Item = &str> {
    field.split('|').map(str::trim).filter(|t| !t.is_empty())
}

/// Applies the alias map and overrides, drops unusable movies and their
/// ratings, collapses duplicate ratings (last one wins) and validates.
pub(crate) fn assemble(
    users: Vec<UserRecord>,
    raw_movies: Vec<RawMovie>,
    raw_ratings: Vec<RawRating>,
    vocabulary: GenreVocabulary,
    options: &IngestOptions,
    movies_file: &str,
    provenance: Provenance,
) -> Result<(RatingCorpus, IngestReport), CorpusError> {
    let mut report = IngestReport::default();
    let mut movies = Vec::with_capacity(raw_movies.len());
    let mut dropped: HashMap<u64, ()> = HashMap::new();

    for raw in raw_movies {
        let (tokens, overridden) = match options.overrides.get(&raw.movie_id) {
            Some(GenreOverride::Drop) => {
                report.overrides_applied += 1;
                report.dropped_movies.push(DroppedMovie {
                    movie_id: raw.movie_id,
                    reason: DropReason::Override,
                });
                dropped.insert(raw.movie_id, ());
                continue;
            }
            Some(GenreOverride::Genres(g)) => {
                report.overrides_applied += 1;
                (g.clone(), true)
            }
            None => (raw.tokens, false),
        };

        let mut genres = Vec::new();
        let mut unresolved = false;
        let mut removed = false;
        for token in &tokens {
            let target = vocabulary
                .resolve(token)
                .ok_or_else(|| CorpusError::UnknownGenre {
                    file: movies_file.to_owned(),
                    line: raw.line,
                    token: token.clone(),
                })?;
            let target_name = match &target {
                AliasTarget::Genre(g) => g.to_string(),
                AliasTarget::Remove => REMOVE_TOKEN.to_owned(),
                AliasTarget::Unresolved => UNRESOLVED_TOKEN.to_owned(),
            };
            if target_name != *token {
                report
                    .alias_applications
                    .entry(token.clone())
                    .or_insert_with(|| AliasCount {
                        target: target_name,
                        count: 0,
                    })
                    .count += 1;
            }
            match target {
                AliasTarget::Genre(g) => genres.push(g),
                AliasTarget::Remove => removed = true,
                AliasTarget::Unresolved => unresolved = true,
            }
        }

        let reason = if unresolved && !overridden {
            Some(DropReason::UnresolvedGenre)
        } else if genres.is_empty() && removed {
            Some(DropReason::AllGenresRemoved)
        } else if genres.is_empty() {
            Some(DropReason::NoGenre)
        } else {
            None
        };
        if let Some(reason) = reason {
            log::debug!("dropping movie {} ({reason:?})", raw.movie_id);
            report.dropped_movies.push(DroppedMovie {
                movie_id: raw.movie_id,
                reason,
            });
            dropped.insert(raw.movie_id, ());
            continue;
        }
        movies.push(MovieRecord {
            movie_id: raw.movie_id,
            title: raw.title,
            genres,
        });
    }

    let mut latest: HashMap<(u64, u64), usize> = HashMap::with_capacity(raw_ratings.len());
    let mut ratings: Vec<RatingTriple> = Vec::with_capacity(raw_ratings.len());
    for RawRating { triple } in raw_ratings {
        if dropped.contains_key(&triple.movie_id) {
            report.dropped_ratings += 1;
            continue;
        }
        match latest.get(&(triple.user_id, triple.movie_id)) {
            Some(&slot) => {
                report.duplicate_ratings += 1;
                ratings[slot] = triple;
            }
            None => {
                latest.insert((triple.user_id, triple.movie_id), ratings.len());
                ratings.push(triple);
            }
        }
    }
    if report.duplicate_ratings > 0 {
        log::warn!(
            "{} duplicate (user, movie) ratings collapsed; kept the last occurrence",
            report.duplicate_ratings
        );
    }

    let corpus = RatingCorpus::new(users, movies, ratings, vocabulary, provenance)?;
    Ok((corpus, report))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, CorpusError> {
    fs::read(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            CorpusError::MissingFile(path.to_owned())
        } else {
            CorpusError::Io {
                path: path.to_owned(),
                source: e,
            }
        }
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String, CorpusError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| CorpusError::Malformed {
        file: path.display().to_string(),
        line: 0,
        message: format!("not valid UTF-8: {e}"),
    })
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> GenreVocabulary {
        GenreVocabulary::movielens()
    }

    fn user(id: u64, gender: Gender) -> UserRecord {
        UserRecord { user_id: id, gender }
    }

    fn movie(id: u64, genres: &[&str]) -> MovieRecord {
        MovieRecord {
            movie_id: id,
            title: format!("Movie {id}"),
            genres: genres.iter().map(|&g| GenreId::from(g)).collect(),
        }
    }

    fn rating(u: u64, m: u64, r: u8) -> RatingTriple {
        RatingTriple {
            user_id: u,
            movie_id: m,
            rating: r,
            timestamp: 0,
        }
    }

    #[test]
    fn single_rating_density_is_100() {
        let c = RatingCorpus::new(
            vec![user(1, Gender::Female)],
            vec![movie(1, &["Drama"])],
            vec![rating(1, 1, 3)],
            vocab(),
            Provenance::synthetic(0),
        )
        .unwrap();
        let s = corpus_stats(&c);
        assert_eq!(s.density_percent, 100.0);
        assert_eq!(s.male + s.female, s.users);
    }

    #[test]
    fn sparse_ids_use_compact_layout() {
        let c = RatingCorpus::new(
            vec![user(1, Gender::Female)],
            vec![movie(1800022403, &["Drama"])],
            vec![rating(1, 1800022403, 3)],
            vocab(),
            Provenance::synthetic(0),
        )
        .unwrap();
        assert_eq!(c.item_layout(), ItemLayout::Compact { movies: 1 });
        assert_eq!(corpus_stats(&c).density_percent, 100.0);
    }

    #[test]
    fn dangling_ids_rejected() {
        let err = RatingCorpus::new(
            vec![user(1, Gender::Male)],
            vec![movie(1, &["Drama"])],
            vec![rating(2, 1, 3)],
            vocab(),
            Provenance::synthetic(0),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DanglingUser(2)));
        let err = RatingCorpus::new(
            vec![user(1, Gender::Male)],
            vec![movie(1, &["Drama"])],
            vec![rating(1, 9, 3)],
            vocab(),
            Provenance::synthetic(0),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DanglingMovie(9)));
    }

    #[test]
    fn genres_checked_against_vocabulary() {
        let err = RatingCorpus::new(
            vec![user(1, Gender::Male)],
            vec![movie(1, &["Children's"])],
            vec![],
            vocab(),
            Provenance::synthetic(0),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::GenreOutsideVocabulary { .. }));
    }

    #[test]
    fn gender_tokens() {
        assert_eq!("M".parse::<Gender>(), Ok(Gender::Male));
        assert_eq!("Female".parse::<Gender>(), Ok(Gender::Female));
        assert!("X".parse::<Gender>().is_err());
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
