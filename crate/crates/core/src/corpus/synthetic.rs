//! Seeded generator of MovieLens-shaped corpora with a planted gender signal.
//!
//! Used by tests and benchmarks where the real datasets are not available.
//! Movies lean male or female through their genres (male-stereotyped genres
//! push one way, female-stereotyped genres the other) plus an idiosyncratic
//! per-movie term, and users pick movies with probability tilted by that
//! lean times a personal tilt centred on their gender's direction.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Gender, GenreId, GenreVocabulary, MovieRecord, Provenance, RatingCorpus, RatingTriple, UserRecord};

const GENRES: [(&str, f64, f64); 18] = [
    // (genre, popularity weight, gender lean: + male, - female)
    ("Action", 0.10, 1.0),
    ("Adventure", 0.06, 0.8),
    ("Animation", 0.02, -0.8),
    ("Family", 0.04, -1.0),
    ("Comedy", 0.18, 0.3),
    ("Crime", 0.05, 0.8),
    ("Documentary", 0.02, 0.0),
    ("Drama", 0.22, -0.6),
    ("Fantasy", 0.01, 0.0),
    ("Film-Noir", 0.01, 0.1),
    ("Horror", 0.05, 0.6),
    ("Musical", 0.02, -0.4),
    ("Mystery", 0.02, 0.0),
    ("Romance", 0.07, -1.0),
    ("Sci-Fi", 0.05, 0.4),
    ("Thriller", 0.07, 0.1),
    ("War", 0.02, 0.9),
    ("Western", 0.01, 0.2),
];

#[derive(Clone, Debug)]
pub struct SyntheticCorpusConfig {
    pub users: usize,
    pub male_users: usize,
    pub movies: usize,
    /// Minimum ratings per user.
    pub min_ratings: usize,
    /// Mean of the geometric surplus above `min_ratings`.
    pub mean_extra_ratings: f64,
    /// How strongly a user's gender tilts movie choice toward matching movies.
    pub stereotype_strength: f64,
    /// Spread of the personal tilt added to each user's gender tilt.
    pub taste_spread: f64,
    pub seed: u64,
}

impl SyntheticCorpusConfig {
    /// Small corpus for unit and integration tests.
    pub fn small(seed: u64) -> Self {
        SyntheticCorpusConfig {
            users: 400,
            male_users: 287,
            movies: 300,
            min_ratings: 10,
            mean_extra_ratings: 30.0,
            stereotype_strength: 0.8,
            taste_spread: 0.8,
            seed,
        }
    }

    /// Same user, gender and item counts as MovieLens-1M, with a comparable
    /// rating volume.
    pub fn ml1m_shaped(seed: u64) -> Self {
        SyntheticCorpusConfig {
            users: 6040,
            male_users: 4331,
            movies: 3952,
            min_ratings: 20,
            mean_extra_ratings: 145.0,
            stereotype_strength: 0.8,
            taste_spread: 0.8,
            seed,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let x = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= x).min(cdf.len() - 1)
}

pub fn generate(config: &SyntheticCorpusConfig) -> RatingCorpus {
    assert!(config.male_users <= config.users);
    assert!(config.movies >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let genre_cdf = cumulative(&GENRES.map(|g| g.1));
    let mut movies = Vec::with_capacity(config.movies);
    let mut lean = Vec::with_capacity(config.movies);
    let mut popularity = Vec::with_capacity(config.movies);
    for id in 1..=config.movies as u64 {
        let n_genres = 1 + (rng.random::<f64>() * 2.2) as usize;
        let mut picked: Vec<usize> = Vec::new();
        while picked.len() < n_genres {
            let g = draw(&genre_cdf, &mut rng);
            if !picked.contains(&g) {
                picked.push(g);
            }
        }
        let genre_lean: f64 = picked.iter().map(|&g| GENRES[g].2).sum::<f64>() / n_genres as f64;
        lean.push(genre_lean + 0.6 * normal(&mut rng));
        popularity.push((1.0 / (id as f64).powf(0.6)) * (0.5 + rng.random::<f64>()));
        movies.push(MovieRecord {
            movie_id: id,
            title: format!("Synthetic Movie {id}"),
            genres: picked.iter().map(|&g| GenreId::from(GENRES[g].0)).collect(),
        });
    }

    let cdf_for = |tilt: f64| -> Vec<f64> {
        cumulative(
            &popularity
                .iter()
                .zip(&lean)
                .map(|(p, l)| p * (tilt * l).exp())
                .collect::<Vec<_>>(),
        )
    };

    let mut genders: Vec<Gender> = (0..config.users)
        .map(|i| if i < config.male_users { Gender::Male } else { Gender::Female })
        .collect();
    for i in (1..genders.len()).rev() {
        let j = rng.random_range(0..=i);
        genders.swap(i, j);
    }

    let mut users = Vec::with_capacity(config.users);
    let mut ratings = Vec::new();
    for (i, &gender) in genders.iter().enumerate() {
        let user_id = i as u64 + 1;
        users.push(UserRecord { user_id, gender });
        let p = 1.0 / (1.0 + config.mean_extra_ratings);
        let mut extra = 0usize;
        while rng.random::<f64>() > p && extra < 20 * config.mean_extra_ratings as usize + 1 {
            extra += 1;
        }
        let count = (config.min_ratings + extra).min(config.movies);
        let sign = if gender.is_male() { 1.0 } else { -1.0 };
        let tilt = sign * config.stereotype_strength + config.taste_spread * normal(&mut rng);
        let cdf = cdf_for(tilt);
        let mut seen = HashSet::with_capacity(count);
        let mut attempts = 0usize;
        while seen.len() < count && attempts < 50 * count {
            attempts += 1;
            let m = draw(&cdf, &mut rng);
            if !seen.insert(m) {
                continue;
            }
            let score = 3.4 + 0.4 * tilt * lean[m] + normal(&mut rng);
            ratings.push(RatingTriple {
                user_id,
                movie_id: m as u64 + 1,
                rating: score.round().clamp(1.0, 5.0) as u8,
                timestamp: 956_703_932 + rng.random_range(0..100_000_000),
            });
        }
    }

    RatingCorpus::new(
        users,
        movies,
        ratings,
        GenreVocabulary::movielens(),
        Provenance::synthetic(config.seed),
    )
    .expect("generator emits a consistent corpus")
}
