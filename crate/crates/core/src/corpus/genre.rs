//! Genre vocabularies and the alias maps that fold raw dataset genre strings
//! onto a canonical set.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// The 21 canonical movie genres, alphabetical.
pub const CANONICAL_GENRES: [&str; 21] = [
    "Action",
    "Adventure",
    "Animation",
    "Biography",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Family",
    "Fantasy",
    "Film-Noir",
    "History",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Sports",
    "Thriller",
    "War",
    "Western",
];

/// Token used in alias files to mark a genre for removal.
pub const REMOVE_TOKEN: &str = "__REMOVE__";
/// Token used in alias files for genres that need a per-movie override.
pub const UNRESOLVED_TOKEN: &str = "__UNRESOLVED__";

/// A canonical genre name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GenreId(String);

impl GenreId {
    pub fn new(name: impl Into<String>) -> Self {
        GenreId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GenreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GenreId {
    fn from(s: &str) -> Self {
        GenreId(s.to_owned())
    }
}

/// Where a raw genre token ends up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AliasTarget {
    Genre(GenreId),
    /// The genre is dropped; a movie left without genres is dropped with its ratings.
    Remove,
    /// The genre carries no usable information; the movie needs an override.
    Unresolved,
}

/// Ordered canonical genres plus the raw-token alias table.
///
/// Lookups are case-insensitive; the canonical spelling is returned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenreVocabulary {
    genres: Vec<GenreId>,
    by_key: HashMap<String, usize>,
    aliases: BTreeMap<String, AliasTarget>,
}

fn key(s: &str) -> String {
    s.trim().to_lowercase()
}

impl GenreVocabulary {
    /// Vocabulary with the given canonical genres and no aliases.
    pub fn with_genres<I, S>(genres: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = GenreVocabulary {
            genres: Vec::new(),
            by_key: HashMap::new(),
            aliases: BTreeMap::new(),
        };
        for g in genres {
            vocab.add_genre(g.as_ref())?;
        }
        Ok(vocab)
    }

    /// The 21 canonical genres, no aliases.
    pub fn canonical() -> Self {
        Self::with_genres(CANONICAL_GENRES).expect("canonical genre list is valid")
    }

    /// Canonical genres plus the MovieLens rule `Children's -> Family`.
    pub fn movielens() -> Self {
        let mut vocab = Self::canonical();
        vocab
            .add_alias("Children's", AliasTarget::Genre("Family".into()))
            .expect("Family is canonical");
        vocab
    }

    /// Canonical genres plus the Yahoo!Movie conversion table.
    pub fn yahoo() -> Self {
        let mut vocab = Self::canonical();
        let table: [(&str, AliasTarget); 11] = [
            ("Music", AliasTarget::Genre("Musical".into())),
            ("Musical", AliasTarget::Genre("Musical".into())),
            ("Performing Art", AliasTarget::Genre("Musical".into())),
            ("Performing Arts", AliasTarget::Genre("Musical".into())),
            ("Suspense", AliasTarget::Genre("Thriller".into())),
            ("Kids", AliasTarget::Genre("Family".into())),
            ("Gangster", AliasTarget::Genre("Crime".into())),
            ("Adult Audience", AliasTarget::Remove),
            ("Delete", AliasTarget::Remove),
            ("Miscellaneous", AliasTarget::Unresolved),
            ("Features", AliasTarget::Unresolved),
        ];
        for (raw, target) in table {
            vocab.add_alias(raw, target).expect("yahoo table targets are canonical");
        }
        vocab
    }

    /// Adds a canonical genre. Adding an existing genre is a no-op.
    pub fn add_genre(&mut self, name: &str) -> Result<GenreId, CorpusError> {
        let name = name.trim();
        if name.is_empty() || name.contains('|') || name.contains(',') {
            return Err(CorpusError::Vocabulary(format!("invalid genre name {name:?}")));
        }
        let k = key(name);
        if let Some(&idx) = self.by_key.get(&k) {
            return Ok(self.genres[idx].clone());
        }
        if self.aliases.contains_key(&k) {
            return Err(CorpusError::Vocabulary(format!(
                "genre {name:?} is already an alias"
            )));
        }
        let id = GenreId::new(name);
        self.by_key.insert(k, self.genres.len());
        self.genres.push(id.clone());
        Ok(id)
    }

    /// Registers `raw -> target`. The target must already be canonical, so
    /// alias chains (and hence cycles) cannot form.
    pub fn add_alias(&mut self, raw: &str, target: AliasTarget) -> Result<(), CorpusError> {
        let k = key(raw);
        if k.is_empty() {
            return Err(CorpusError::Vocabulary("empty alias key".into()));
        }
        let target = match target {
            AliasTarget::Genre(g) => match self.lookup_canonical(g.as_str()) {
                Some(c) => AliasTarget::Genre(c.clone()),
                None => {
                    return Err(CorpusError::Vocabulary(format!(
                        "alias {raw:?} targets unknown genre {:?}",
                        g.as_str()
                    )))
                }
            },
            other => other,
        };
        if let Some(&idx) = self.by_key.get(&k) {
            // A canonical name may only alias to itself.
            if target != AliasTarget::Genre(self.genres[idx].clone()) {
                return Err(CorpusError::Vocabulary(format!(
                    "canonical genre {raw:?} cannot be re-mapped"
                )));
            }
            return Ok(());
        }
        self.aliases.insert(k, target);
        Ok(())
    }

    /// Extends the vocabulary from a `raw,canonical` text file. Lines that are
    /// blank or start with `#` are skipped. A canonical target that is not yet
    /// in the vocabulary is added as a new genre, which makes `X,X` the way to
    /// declare dataset-specific genres.
    pub fn extend_from_file(&mut self, path: &Path) -> Result<(), CorpusError> {
        let text = super::read_text(path)?;
        self.extend_from_str(&text, &path.display().to_string())
    }

    pub fn extend_from_str(&mut self, text: &str, source: &str) -> Result<(), CorpusError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (raw, canonical) = line.split_once(',').ok_or_else(|| CorpusError::Malformed {
                file: source.to_owned(),
                line: n + 1,
                message: "expected `raw,canonical`".into(),
            })?;
            let canonical = canonical.trim();
            let target = match canonical {
                REMOVE_TOKEN => AliasTarget::Remove,
                UNRESOLVED_TOKEN => AliasTarget::Unresolved,
                c => AliasTarget::Genre(self.add_genre(c)?),
            };
            if key(raw) == key(canonical) {
                continue;
            }
            self.add_alias(raw, target).map_err(|e| match e {
                CorpusError::Vocabulary(m) => CorpusError::Malformed {
                    file: source.to_owned(),
                    line: n + 1,
                    message: m,
                },
                e => e,
            })?;
        }
        Ok(())
    }

    /// Resolves a raw token. Canonical names resolve to themselves; `None`
    /// means the token is unknown.
    pub fn resolve(&self, raw: &str) -> Option<AliasTarget> {
        let k = key(raw);
        if let Some(&idx) = self.by_key.get(&k) {
            return Some(AliasTarget::Genre(self.genres[idx].clone()));
        }
        self.aliases.get(&k).cloned()
    }

    /// Case-insensitive lookup of a canonical genre.
    pub fn lookup_canonical(&self, name: &str) -> Option<&GenreId> {
        self.by_key.get(&key(name)).map(|&i| &self.genres[i])
    }

    pub fn genres(&self) -> &[GenreId] {
        &self.genres
    }

    pub fn aliases(&self) -> &BTreeMap<String, AliasTarget> {
        &self.aliases
    }

    pub fn contains(&self, genre: &GenreId) -> bool {
        self.lookup_canonical(genre.as_str()).is_some()
    }
}

impl Default for GenreVocabulary {
    fn default() -> Self {
        Self::movielens()
    }
}
