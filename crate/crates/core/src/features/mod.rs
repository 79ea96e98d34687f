//! Classifier inputs: the user-by-item rating matrix, optionally followed by
//! the two stereotype-degree columns, plus class weights and data splits.

mod sparse;
mod split;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use sparse::{SortedColumns, SparseMatrix};
pub use split::{make_split, SplitKind, SplitPlan};

use crate::corpus::{Gender, ItemLayout, RatingCorpus};
use crate::stereotype::{all_degrees, DegreeMode, StereotypeModel};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("class weights need both classes present")]
    SingleClass,
    #[error("class {class} has {count} members, fewer than {k} folds")]
    TooFewForFolds { class: Gender, count: usize, k: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Stereotype-degree columns appended after the rating columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StereotypeColumns {
    pub d_male: usize,
    pub d_female: usize,
}

/// Sparse features aligned row-for-row with user ids and gender labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub matrix: SparseMatrix,
    pub labels: Vec<Gender>,
    pub user_ids: Vec<u64>,
    pub layout: ItemLayout,
    pub stereotype_columns: Option<StereotypeColumns>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.n_cols()
    }

    /// Rows (with their labels and ids) in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            matrix: self.matrix.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            user_ids: rows.iter().map(|&r| self.user_ids[r]).collect(),
            layout: self.layout,
            stereotype_columns: self.stereotype_columns,
        }
    }

    /// Writes `row,col,value` triplets and a `row,user_id,gender` label file.
    pub fn dump_csv(&self, triplets: &Path, labels: &Path) -> Result<(), FeatureError> {
        let write = |path: &Path, body: &mut dyn FnMut(&mut dyn Write) -> std::io::Result<()>| {
            let err = |source| FeatureError::Write {
                path: path.display().to_string(),
                source,
            };
            let file = std::fs::File::create(path).map_err(err)?;
            let mut out = std::io::BufWriter::new(file);
            body(&mut out).and_then(|_| out.flush()).map_err(err)
        };
        write(triplets, &mut |out| {
            writeln!(out, "row,col,value")?;
            for (i, c, v) in self.matrix.triplets() {
                writeln!(out, "{i},{c},{v}")?;
            }
            Ok(())
        })?;
        write(labels, &mut |out| {
            writeln!(out, "row,user_id,gender")?;
            for (i, (u, g)) in self.user_ids.iter().zip(&self.labels).enumerate() {
                writeln!(out, "{i},{u},{}", g.code())?;
            }
            Ok(())
        })
    }
}

/// Rating matrix (absent ratings are zero) in corpus user order. With a
/// model, two trailing columns hold the raw degrees of each user.
pub fn build_matrix(
    corpus: &RatingCorpus,
    model: Option<&StereotypeModel>,
    mode: DegreeMode,
) -> FeatureMatrix {
    let layout = corpus.item_layout();
    let width = layout.width();
    let column = |movie_id: u64| -> u32 {
        match layout {
            ItemLayout::ById { .. } => (movie_id - 1) as u32,
            ItemLayout::Compact { .. } => corpus
                .movie_position(movie_id)
                .expect("corpus ratings resolve") as u32,
        }
    };
    let degrees = model.map(|m| all_degrees(corpus, m, mode));
    let n_cols = width + if model.is_some() { 2 } else { 0 };
    let rows: Vec<Vec<(u32, f64)>> = (0..corpus.users().len())
        .map(|pos| {
            let mut row: Vec<(u32, f64)> = corpus
                .ratings_at(pos)
                .iter()
                .map(|r| (column(r.movie_id), f64::from(r.rating)))
                .collect();
            if let Some(d) = &degrees {
                row.push((width as u32, f64::from(d[pos].d_male)));
                row.push((width as u32 + 1, f64::from(d[pos].d_female)));
            }
            row
        })
        .collect();
    FeatureMatrix {
        matrix: SparseMatrix::from_rows(n_cols, rows),
        labels: corpus.labels(),
        user_ids: corpus.users().iter().map(|u| u.user_id).collect(),
        layout,
        stereotype_columns: model.map(|_| StereotypeColumns {
            d_male: width,
            d_female: width + 1,
        }),
    }
}

/// Scales every non-zero row to unit Euclidean norm.
pub fn l2_normalize_rows(mut features: FeatureMatrix) -> FeatureMatrix {
    normalize_in_place(&mut features.matrix);
    features
}

pub fn normalize_in_place(m: &mut SparseMatrix) {
    for i in 0..m.n_rows() {
        let norm = m.row_norm(i);
        if norm > 0.0 {
            for v in m.row_values_mut(i) {
                *v /= norm;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub male: f64,
    pub female: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights {
        male: 1.0,
        female: 1.0,
    };

    pub fn of(&self, g: Gender) -> f64 {
        match g {
            Gender::Male => self.male,
            Gender::Female => self.female,
        }
    }
}

/// `weight_c = N / (2 N_c)`.
pub fn balanced_weights(labels: &[Gender]) -> Result<ClassWeights, FeatureError> {
    let n = labels.len();
    let male = labels.iter().filter(|g| g.is_male()).count();
    let female = n - male;
    if male == 0 || female == 0 {
        return Err(FeatureError::SingleClass);
    }
    Ok(ClassWeights {
        male: n as f64 / (2.0 * male as f64),
        female: n as f64 / (2.0 * female as f64),
    })
}

/// How class weights are derived from a training partition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    #[default]
    Balanced,
}

impl Weighting {
    pub fn weights_for(self, labels: &[Gender]) -> Result<ClassWeights, FeatureError> {
        match self {
            Weighting::Uniform => Ok(ClassWeights::UNIFORM),
            Weighting::Balanced => balanced_weights(labels),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{GenreId, GenreVocabulary, MovieRecord, Provenance, RatingTriple, UserRecord};
    use proptest::prelude::*;

    fn labels(m: usize, f: usize) -> Vec<Gender> {
        let mut v = vec![Gender::Male; m];
        v.extend(vec![Gender::Female; f]);
        v
    }

    #[test]
    fn balanced_weight_values() {
        let w = balanced_weights(&labels(4331, 1709)).unwrap();
        assert!((w.male - 6040.0 / 8662.0).abs() < 1e-12);
        assert!((w.female - 6040.0 / 3418.0).abs() < 1e-12);
        assert!((w.male - 0.6973).abs() < 5e-5 && (w.female - 1.7671).abs() < 5e-5);
        assert_eq!(balanced_weights(&labels(5, 5)).unwrap(), ClassWeights::UNIFORM);
        let w = balanced_weights(&labels(90, 10)).unwrap();
        assert!((w.male - 100.0 / 180.0).abs() < 1e-12);
        assert_eq!(w.female, 5.0);
        assert!(w.female > w.male);
        assert!(matches!(balanced_weights(&labels(3, 0)), Err(FeatureError::SingleClass)));
    }

    #[test]
    fn three_four_five() {
        let m = SparseMatrix::from_dense(&[vec![3.0, 4.0], vec![0.0, 0.0]]);
        let f = l2_normalize_rows(FeatureMatrix {
            matrix: m,
            labels: labels(1, 1),
            user_ids: vec![1, 2],
            layout: ItemLayout::ById { max_id: 2 },
            stereotype_columns: None,
        });
        assert!((f.matrix.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((f.matrix.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(f.matrix.row(1).0.len(), 0);
    }

    fn one_user_corpus() -> RatingCorpus {
        RatingCorpus::new(
            vec![UserRecord { user_id: 1, gender: Gender::Male }],
            vec![
                MovieRecord {
                    movie_id: 1,
                    title: String::new(),
                    genres: ["Action", "War", "Drama"].map(GenreId::from).to_vec(),
                },
                MovieRecord {
                    movie_id: 2,
                    title: String::new(),
                    genres: vec![GenreId::from("Comedy")],
                },
            ],
            vec![RatingTriple { user_id: 1, movie_id: 1, rating: 4, timestamp: 0 }],
            GenreVocabulary::movielens(),
            Provenance::synthetic(0),
        )
        .unwrap()
    }

    #[test]
    fn augmented_row_holds_degrees() {
        let c = one_user_corpus();
        let plain = build_matrix(&c, None, DegreeMode::Cardinality);
        assert_eq!((plain.n_rows(), plain.n_cols()), (1, 2));
        let f = build_matrix(&c, Some(&StereotypeModel::default_model()), DegreeMode::Cardinality);
        assert_eq!(f.n_cols(), 4);
        let (idx, val) = f.matrix.row(0);
        assert_eq!(idx, &[0, 2, 3]);
        assert_eq!(val, &[4.0, 2.0, 1.0]);
        assert_eq!(f.stereotype_columns, Some(StereotypeColumns { d_male: 2, d_female: 3 }));
    }

    #[test]
    fn dump_writes_triplets() {
        let c = one_user_corpus();
        let f = build_matrix(&c, Some(&StereotypeModel::default_model()), DegreeMode::Cardinality);
        let dir = tempfile::tempdir().unwrap();
        let (t, l) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
        f.dump_csv(&t, &l).unwrap();
        assert_eq!(std::fs::read_to_string(t).unwrap(), "row,col,value\n0,0,4\n0,2,2\n0,3,1\n");
        assert_eq!(std::fs::read_to_string(l).unwrap(), "row,user_id,gender\n0,1,M\n");
    }

    fn arb_rows() -> impl Strategy<Value = Vec<Vec<(u32, f64)>>> {
        prop::collection::vec(prop::collection::vec((0u32..20, -50.0f64..50.0), 0..10), 1..15)
    }

    proptest! {
        #[test]
        fn normalization_unit_norm_and_idempotent(rows in arb_rows()) {
            let mut m = SparseMatrix::from_rows(20, rows);
            normalize_in_place(&mut m);
            for i in 0..m.n_rows() {
                let norm: f64 = m.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(m.row(i).1.is_empty() || (norm - 1.0).abs() < 1e-9);
            }
            let once = m.clone();
            normalize_in_place(&mut m);
            for (a, b) in once.triplets().zip(m.triplets()) {
                prop_assert!((a.2 - b.2).abs() < 1e-9);
            }
        }

        #[test]
        fn weighted_count_identity(m in 1usize..500, f in 1usize..500) {
            let w = balanced_weights(&labels(m, f)).unwrap();
            let total = w.male * m as f64 + w.female * f as f64;
            prop_assert!((total - (m + f) as f64).abs() < 1e-9);
        }
    }
}
