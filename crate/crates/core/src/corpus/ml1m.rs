//! MovieLens-1M `::`-delimited reader.

use std::collections::BTreeMap;
use std::path::Path;

use super::{
    assemble, read_bytes, sha256_hex, split_genres, CorpusError, Gender, GenreVocabulary,
    IngestOptions, IngestReport, Provenance, RatingCorpus, RatingTriple, RawMovie, RawRating,
    SourceFormat, UserRecord,
};

/// Loads `ratings.dat`, `users.dat` and `movies.dat` from `root`.
pub fn load_ml1m(root: &Path, vocabulary: GenreVocabulary) -> Result<RatingCorpus, CorpusError> {
    load_ml1m_with(root, vocabulary, &IngestOptions::default()).map(|(c, _)| c)
}

pub fn load_ml1m_with(
    root: &Path,
    vocabulary: GenreVocabulary,
    options: &IngestOptions,
) -> Result<(RatingCorpus, IngestReport), CorpusError> {
    let users_path = root.join("users.dat");
    let movies_path = root.join("movies.dat");
    let ratings_path = root.join("ratings.dat");

    let users_bytes = read_bytes(&users_path)?;
    let movies_bytes = read_bytes(&movies_path)?;
    let ratings_bytes = read_bytes(&ratings_path)?;

    let mut file_hashes = BTreeMap::new();
    file_hashes.insert("users.dat".to_owned(), sha256_hex(&users_bytes));
    file_hashes.insert("movies.dat".to_owned(), sha256_hex(&movies_bytes));
    file_hashes.insert("ratings.dat".to_owned(), sha256_hex(&ratings_bytes));

    let users = parse_users(&latin1(&users_bytes), "users.dat")?;
    let movies = parse_movies(&latin1(&movies_bytes), "movies.dat")?;
    let ratings = parse_ratings(&latin1(&ratings_bytes), "ratings.dat")?;
    if ratings.is_empty() {
        return Err(CorpusError::NoRatings(ratings_path));
    }

    assemble(
        users,
        movies,
        ratings,
        vocabulary,
        options,
        "movies.dat",
        Provenance {
            format: SourceFormat::Ml1m,
            file_hashes,
        },
    )
}

/// Every byte is its own code point; titles are carried opaquely.
fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn fields<'a>(line: &'a str, file: &str, n: usize, want: usize) -> Result<Vec<&'a str>, CorpusError> {
    let parts: Vec<&str> = line.split("::").collect();
    if parts.len() != want {
        return Err(CorpusError::Malformed {
            file: file.to_owned(),
            line: n,
            message: format!("expected {want} `::`-separated fields, found {}", parts.len()),
        });
    }
    Ok(parts)
}

fn int<T: std::str::FromStr>(s: &str, what: &str, file: &str, n: usize) -> Result<T, CorpusError> {
    s.trim().parse().map_err(|_| CorpusError::Malformed {
        file: file.to_owned(),
        line: n,
        message: format!("bad {what} {s:?}"),
    })
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub(crate) fn parse_users(text: &str, file: &str) -> Result<Vec<UserRecord>, CorpusError> {
    lines(text)
        .map(|(n, line)| {
            let f = fields(line, file, n, 5)?;
            let user_id = int(f[0], "user id", file, n)?;
            let gender = match f[1].trim() {
                "M" => Gender::Male,
                "F" => Gender::Female,
                other => {
                    return Err(CorpusError::BadGender {
                        file: file.to_owned(),
                        line: n,
                        token: other.to_owned(),
                    })
                }
            };
            Ok(UserRecord { user_id, gender })
        })
        .collect()
}

pub(crate) fn parse_movies(text: &str, file: &str) -> Result<Vec<RawMovie>, CorpusError> {
    lines(text)
        .map(|(n, line)| {
            // Titles never contain `::`, but split from both ends anyway.
            let (id, rest) = line.split_once("::").ok_or_else(|| CorpusError::Malformed {
                file: file.to_owned(),
                line: n,
                message: "expected `MovieID::Title::Genres`".into(),
            })?;
            let (title, genres) = rest.rsplit_once("::").ok_or_else(|| CorpusError::Malformed {
                file: file.to_owned(),
                line: n,
                message: "expected `MovieID::Title::Genres`".into(),
            })?;
            Ok(RawMovie {
                movie_id: int(id, "movie id", file, n)?,
                title: title.to_owned(),
                tokens: split_genres(genres).map(str::to_owned).collect(),
                line: n,
            })
        })
        .collect()
}

pub(crate) fn parse_ratings(text: &str, file: &str) -> Result<Vec<RawRating>, CorpusError> {
    lines(text)
        .map(|(n, line)| {
            let f = fields(line, file, n, 4)?;
            let value: i64 = int(f[2], "rating", file, n)?;
            if !(1..=5).contains(&value) {
                return Err(CorpusError::RatingOutOfRange {
                    file: file.to_owned(),
                    line: n,
                    value,
                });
            }
            Ok(RawRating {
                triple: RatingTriple {
                    user_id: int(f[0], "user id", file, n)?,
                    movie_id: int(f[1], "movie id", file, n)?,
                    rating: value as u8,
                    timestamp: int(f[3], "timestamp", file, n)?,
                },
            })
        })
        .collect()
}
