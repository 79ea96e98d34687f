//! Neutral three-file CSV layout (`users.csv`, `movies.csv`, `ratings.csv`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{
    assemble, read_bytes, sha256_hex, split_genres, CorpusError, Gender, GenreVocabulary,
    IngestOptions, IngestReport, Provenance, RatingCorpus, RatingTriple, RawMovie, RawRating,
    SourceFormat, UserRecord,
};

pub fn load_interchange(
    dir: &Path,
    vocabulary: GenreVocabulary,
) -> Result<RatingCorpus, CorpusError> {
    load_interchange_with(dir, vocabulary, &IngestOptions::default()).map(|(c, _)| c)
}

pub fn load_interchange_with(
    dir: &Path,
    vocabulary: GenreVocabulary,
    options: &IngestOptions,
) -> Result<(RatingCorpus, IngestReport), CorpusError> {
    let users_path = dir.join("users.csv");
    let movies_path = dir.join("movies.csv");
    let ratings_path = dir.join("ratings.csv");
    let users_bytes = read_bytes(&users_path)?;
    let movies_bytes = read_bytes(&movies_path)?;
    let ratings_bytes = read_bytes(&ratings_path)?;

    let mut file_hashes = BTreeMap::new();
    file_hashes.insert("users.csv".to_owned(), sha256_hex(&users_bytes));
    file_hashes.insert("movies.csv".to_owned(), sha256_hex(&movies_bytes));
    file_hashes.insert("ratings.csv".to_owned(), sha256_hex(&ratings_bytes));

    let users = read_rows(&users_bytes, "users.csv", &["user_id", "gender"], |row, n| {
        let gender = row[1].parse::<Gender>().map_err(|token| CorpusError::BadGender {
            file: "users.csv".into(),
            line: n,
            token,
        })?;
        Ok(UserRecord {
            user_id: parse(&row[0], "user id", "users.csv", n)?,
            gender,
        })
    })?;
    let movies = read_rows(
        &movies_bytes,
        "movies.csv",
        &["movie_id", "title", "genres"],
        |row, n| {
            Ok(RawMovie {
                movie_id: parse(&row[0], "movie id", "movies.csv", n)?,
                title: row[1].to_owned(),
                tokens: split_genres(&row[2]).map(str::to_owned).collect(),
                line: n,
            })
        },
    )?;
    let ratings = read_rows(
        &ratings_bytes,
        "ratings.csv",
        &["user_id", "movie_id", "rating", "timestamp"],
        |row, n| {
            let value: i64 = parse(&row[2], "rating", "ratings.csv", n)?;
            if !(1..=5).contains(&value) {
                return Err(CorpusError::RatingOutOfRange {
                    file: "ratings.csv".into(),
                    line: n,
                    value,
                });
            }
            Ok(RawRating {
                triple: RatingTriple {
                    user_id: parse(&row[0], "user id", "ratings.csv", n)?,
                    movie_id: parse(&row[1], "movie id", "ratings.csv", n)?,
                    rating: value as u8,
                    timestamp: parse(&row[3], "timestamp", "ratings.csv", n)?,
                },
            })
        },
    )?;
    if ratings.is_empty() {
        return Err(CorpusError::NoRatings(ratings_path));
    }

    assemble(
        users,
        movies,
        ratings,
        vocabulary,
        options,
        "movies.csv",
        Provenance {
            format: SourceFormat::Interchange,
            file_hashes,
        },
    )
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, file: &str, n: usize) -> Result<T, CorpusError> {
    s.trim().parse().map_err(|_| CorpusError::Malformed {
        file: file.to_owned(),
        line: n,
        message: format!("bad {what} {s:?}"),
    })
}

fn read_rows<T>(
    bytes: &[u8],
    file: &str,
    header: &[&str],
    mut f: impl FnMut(&csv::StringRecord, usize) -> Result<T, CorpusError>,
) -> Result<Vec<T>, CorpusError> {
    let malformed = |line: usize, message: String| CorpusError::Malformed {
        file: file.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let found = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found != header {
        return Err(malformed(
            1,
            format!("expected header {:?}, found {:?}", header.join(","), found.join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        out.push(f(&record, line)?);
    }
    Ok(out)
}

/// Writes `corpus` as interchange CSVs into `dir` (created if missing).
pub fn export_interchange(corpus: &RatingCorpus, dir: &Path) -> Result<(), CorpusError> {
    let write_err = |path: &Path, e: std::io::Error| CorpusError::Write {
        path: path.to_owned(),
        source: e,
    };
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;

    let to_io = |e: csv::Error| std::io::Error::other(e.to_string());

    let path = dir.join("users.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_err(&path, to_io(e)))?;
    (|| -> csv::Result<()> {
        w.write_record(["user_id", "gender"])?;
        for u in corpus.users() {
            w.write_record([u.user_id.to_string().as_str(), u.gender.code()])?;
        }
        w.flush()?;
        Ok(())
    })()
    .map_err(|e| write_err(&path, to_io(e)))?;

    let path = dir.join("movies.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_err(&path, to_io(e)))?;
    (|| -> csv::Result<()> {
        w.write_record(["movie_id", "title", "genres"])?;
        for m in corpus.movies() {
            let genres: Vec<&str> = m.genres.iter().map(|g| g.as_str()).collect();
            w.write_record([m.movie_id.to_string(), m.title.clone(), genres.join("|")])?;
        }
        w.flush()?;
        Ok(())
    })()
    .map_err(|e| write_err(&path, to_io(e)))?;

    let path = dir.join("ratings.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_err(&path, to_io(e)))?;
    (|| -> csv::Result<()> {
        w.write_record(["user_id", "movie_id", "rating", "timestamp"])?;
        for r in corpus.ratings() {
            w.write_record([
                r.user_id.to_string(),
                r.movie_id.to_string(),
                r.rating.to_string(),
                r.timestamp.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })()
    .map_err(|e| write_err(&path, to_io(e)))?;

    // Export writes canonical genres, so the vocabulary must know about any
    // dataset-specific genre for the files to re-load.
    let extra: Vec<String> = corpus
        .vocabulary()
        .genres()
        .iter()
        .filter(|g| GenreVocabulary::canonical().lookup_canonical(g.as_str()).is_none())
        .map(|g| format!("{g},{g}\n"))
        .collect();
    if !extra.is_empty() {
        let path = dir.join("genres.map");
        fs::write(&path, extra.concat()).map_err(|e| write_err(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_stats, AliasTarget, DropReason, GenreId, GenreOverride};

    fn write(dir: &Path, users: &str, movies: &str, ratings: &str) {
        fs::write(dir.join("users.csv"), users).unwrap();
        fs::write(dir.join("movies.csv"), movies).unwrap();
        fs::write(dir.join("ratings.csv"), ratings).unwrap();
    }

    #[test]
    fn three_user_two_movie_density() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "user_id,gender\n1,M\n2,Female\n3,F\n",
            "movie_id,title,genres\n1,\"Heat, The (1995)\",Action|Crime\n2,Babe (1995),Children's|Comedy\n",
            "user_id,movie_id,rating,timestamp\n1,1,4,10\n2,2,5,11\n3,1,2,12\n",
        );
        let c = load_interchange(dir.path(), GenreVocabulary::movielens()).unwrap();
        let s = corpus_stats(&c);
        assert_eq!(s.density_percent, 50.0);
        assert_eq!(c.movie(1).unwrap().title, "Heat, The (1995)");
    }

    #[test]
    fn yahoo_suspense_thriller_collapses() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "user_id,gender\n1,M\n",
            "movie_id,title,genres\n10,Thing,Suspense|Thriller\n",
            "user_id,movie_id,rating,timestamp\n1,10,4,0\n",
        );
        let c = load_interchange(dir.path(), GenreVocabulary::yahoo()).unwrap();
        assert_eq!(c.movie(10).unwrap().genres, vec![GenreId::from("Thriller")]);
    }

    #[test]
    fn yahoo_drops_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "user_id,gender\n1,M\n2,F\n",
            "movie_id,title,genres\n\
             1,Adult Thing,Adult Audience\n\
             2,Mixed,Adult Audience|Comedy\n\
             3,Odd,Miscellaneous\n\
             4,Jet Lag (2003),\n\
             5,Gangland,Gangster\n\
             6,Show,Drama\n",
            "user_id,movie_id,rating,timestamp\n1,1,4,0\n1,2,4,0\n1,3,4,0\n2,4,3,0\n2,5,5,0\n2,6,5,0\n",
        );
        let (c, report) =
            load_interchange_with(dir.path(), GenreVocabulary::yahoo(), &IngestOptions::default())
                .unwrap();
        let dropped: Vec<(u64, DropReason)> = report
            .dropped_movies
            .iter()
            .map(|d| (d.movie_id, d.reason.clone()))
            .collect();
        assert_eq!(
            dropped,
            vec![
                (1, DropReason::AllGenresRemoved),
                (3, DropReason::UnresolvedGenre),
                (4, DropReason::NoGenre),
            ]
        );
        assert_eq!(report.dropped_ratings, 3);
        assert_eq!(c.movie(2).unwrap().genres, vec![GenreId::from("Comedy")]);
        assert_eq!(c.movie(5).unwrap().genres, vec![GenreId::from("Crime")]);
        assert_eq!(report.alias_applications["Gangster"].target, "Crime");
        assert_eq!(report.alias_applications["Adult Audience"].count, 2);

        let mut options = IngestOptions::default();
        options
            .overrides
            .insert(3, GenreOverride::Genres(vec!["Drama".into()]));
        options
            .overrides
            .insert(4, GenreOverride::Genres(vec!["Comedy".into(), "Romance".into()]));
        options.overrides.insert(6, GenreOverride::Drop);
        let (c, report) =
            load_interchange_with(dir.path(), GenreVocabulary::yahoo(), &options).unwrap();
        assert_eq!(report.overrides_applied, 3);
        assert_eq!(c.movie(3).unwrap().genres, vec![GenreId::from("Drama")]);
        assert_eq!(
            c.movie(4).unwrap().genres,
            vec![GenreId::from("Comedy"), GenreId::from("Romance")]
        );
        assert!(c.movie(6).is_none());
        assert_eq!(
            GenreVocabulary::yahoo().resolve("Kids"),
            Some(AliasTarget::Genre("Family".into()))
        );
    }

    #[test]
    fn bad_gender_token() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "user_id,gender\n1,X\n",
            "movie_id,title,genres\n1,A,Drama\n",
            "user_id,movie_id,rating,timestamp\n1,1,4,0\n",
        );
        let err = load_interchange(dir.path(), GenreVocabulary::movielens()).unwrap_err();
        assert!(matches!(err, CorpusError::BadGender { line: 2, .. }), "{err}");
    }

    #[test]
    fn header_required() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "1,M\n",
            "movie_id,title,genres\n1,A,Drama\n",
            "user_id,movie_id,rating,timestamp\n1,1,4,0\n",
        );
        let err = load_interchange(dir.path(), GenreVocabulary::movielens()).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }), "{err}");
    }

    #[test]
    fn export_then_reload_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "user_id,gender\n1,M\n2,F\n",
            "movie_id,title,genres\n1,\"Quote \"\"Me\"\", Now\",Action|War|Drama\n2,B,Children's\n",
            "user_id,movie_id,rating,timestamp\n2,1,4,5\n1,1,3,7\n1,2,1,9\n",
        );
        let c = load_interchange(dir.path(), GenreVocabulary::movielens()).unwrap();
        let out = tempfile::tempdir().unwrap();
        c.export(out.path()).unwrap();
        let again = load_interchange(out.path(), GenreVocabulary::movielens()).unwrap();
        assert_eq!(c, again);
    }
}
