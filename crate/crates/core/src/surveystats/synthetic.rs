//! Seeded surveys drawn from a planted logistic model.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{encode_design, DummyDesign, PreferenceLevel, SurveyRecord};
use crate::classifiers::sigmoid;
use crate::corpus::Gender;

/// `(MaxPrefer, MinPrefer)` male log-odds per genre in alphabetical order.
const PLANTED: [(f64, f64); 21] = [
    (1.69, 0.869),    // Action
    (1.348, 0.555),   // Adventure
    (-1.024, -0.687), // Animation
    (0.506, 1.036),   // Biography
    (1.299, 0.055),   // Comedy
    (1.295, 0.339),   // Crime
    (0.237, -0.459),  // Documentary
    (-0.905, -0.163), // Drama
    (-1.899, -1.66),  // Family
    (-0.818, -0.612), // Fantasy
    (0.017, -0.319),  // Film-Noir
    (-1.576, -0.786), // History
    (0.673, 0.898),   // Horror
    (-0.148, 0.224),  // Musical
    (-0.787, -0.317), // Mystery
    (-0.927, 0.017),  // Romance
    (0.303, 0.221),   // Sci-Fi
    (-1.753, -0.562), // Sports
    (-0.72, -0.809),  // Thriller
    (1.582, 0.369),   // War
    (0.551, 0.057),   // Western
];

/// 43 coefficients in design-column order (intercept first).
pub fn planted_coefficients() -> Vec<f64> {
    let mut beta = vec![0.3];
    for (max, min) in PLANTED {
        beta.push(max);
        beta.push(min);
    }
    beta
}

#[derive(Clone, Debug)]
pub struct SyntheticSurveyConfig {
    pub respondents: usize,
    /// Male log-odds per design column.
    pub coefficients: Vec<f64>,
    /// Probabilities of `No`, `MinPrefer`, `MaxPrefer` for every genre.
    pub level_probabilities: [f64; 3],
    pub seed: u64,
}

impl Default for SyntheticSurveyConfig {
    fn default() -> Self {
        SyntheticSurveyConfig {
            respondents: 630,
            coefficients: planted_coefficients(),
            level_probabilities: [0.35, 0.35, 0.30],
            seed: 0,
        }
    }
}

/// Respondents with independent genre levels; each is male with probability
/// `σ(x·β)`.
pub fn generate_survey(config: &SyntheticSurveyConfig) -> Vec<SurveyRecord> {
    assert_eq!(config.coefficients.len(), 43, "one coefficient per design column");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let [p_no, p_min, _] = config.level_probabilities;
    let mut records: Vec<SurveyRecord> = (0..config.respondents)
        .map(|i| {
            let mut levels = [PreferenceLevel::No; 21];
            for l in &mut levels {
                let u: f64 = rng.random();
                *l = if u < p_no {
                    PreferenceLevel::No
                } else if u < p_no + p_min {
                    PreferenceLevel::MinPrefer
                } else {
                    PreferenceLevel::MaxPrefer
                };
            }
            SurveyRecord {
                respondent_id: i as u64 + 1,
                gender: Gender::Male,
                levels,
            }
        })
        .collect();
    if records.is_empty() {
        return records;
    }
    let design = encode_design(&records).expect("non-empty");
    let y = simulate_outcomes(&design, &config.coefficients, &mut rng);
    for (r, yi) in records.iter_mut().zip(y) {
        r.gender = if yi == 1.0 { Gender::Male } else { Gender::Female };
    }
    records
}

/// Bernoulli outcomes with success probability `σ(x_i·β)` per design row.
pub fn simulate_outcomes(design: &DummyDesign, beta: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let eta = &design.matrix * DVector::from_column_slice(beta);
    eta.iter()
        .map(|&e| {
            let u: f64 = rng.random();
            if u < sigmoid(e) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}
