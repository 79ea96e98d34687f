//! Gender-inference classifiers over sparse feature rows.
//!
//! All learners treat `Male` as the positive class (+1) and take per-class
//! sample weights. Fits are single-threaded and deterministic for a given
//! `(data, config)`.

mod adaboost;
mod grid;
mod logistic;
mod svm;
mod trees;

use serde::{Deserialize, Serialize};

pub use adaboost::{fit_adaboost, Stump, StumpEnsemble};
pub use grid::{default_grid, grid_search, GridOutcome, GridResult};
pub use logistic::{fit_logistic, logistic_gradient, logistic_objective};
pub use svm::{fit_linear_svm, svm_objective};
pub use trees::{fit_boosted_trees, BoostedTrees, TreeNode};

use crate::corpus::Gender;
use crate::features::{ClassWeights, SparseMatrix};

pub const MODEL_SCHEMA: &str = "gs-audit/model-v1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("feature matrix contains NaN or infinite values")]
    NonFinite,
    #[error("feature matrix has {rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("model expects {expected} feature columns, matrix has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("every grid configuration failed: {0}")]
    AllConfigsFailed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lr,
    Svm,
    Adaboost,
    Gbt,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Lr,
        ClassifierKind::Svm,
        ClassifierKind::Adaboost,
        ClassifierKind::Gbt,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ClassifierKind::Lr => "lr",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Adaboost => "adaboost",
            ClassifierKind::Gbt => "gbt",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Lr => "Logistic Regression",
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Adaboost => "AdaBoost",
            ClassifierKind::Gbt => "Boosted Trees",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| format!("unknown classifier {s:?} (lr|svm|adaboost|gbt)"))
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Hyperparameters. Fields irrelevant to a learner are ignored by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Inverse regularization strength: the penalty is `‖w‖² / (2C)`.
    pub c: f64,
    /// Newton iterations (LR) or epochs (SVM).
    pub max_iterations: usize,
    /// LR: gradient infinity-norm relative to its initial value.
    /// SVM: projected-gradient gap of the dual.
    pub tolerance: f64,
    pub seed: u64,
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            c: 1.0,
            max_iterations: 1000,
            tolerance: 1e-6,
            seed: 0,
            rounds: 50,
            max_depth: 3,
            learning_rate: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

impl FitConfig {
    /// Fixed settings of the holdout experiment for each learner.
    pub fn for_kind(kind: ClassifierKind) -> Self {
        let base = FitConfig::default();
        match kind {
            ClassifierKind::Lr => base,
            ClassifierKind::Svm => FitConfig {
                tolerance: 1e-3,
                ..base
            },
            ClassifierKind::Adaboost => FitConfig { rounds: 50, ..base },
            ClassifierKind::Gbt => FitConfig {
                rounds: 100,
                max_depth: 3,
                learning_rate: 0.3,
                ..base
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::InvalidConfig(m.to_owned()));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be positive");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.max_depth < 1 {
            return bad("depth must be at least 1");
        }
        if !(self.lambda >= 0.0) || !(self.min_child_weight >= 0.0) {
            return bad("lambda and min_child_weight must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logistic,
    Hinge,
}

/// `score = w·x + b`, squashed through a sigmoid for the logistic kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final convergence measure: gradient infinity-norm (logistic) or
    /// projected-gradient gap (hinge).
    pub final_gradient: f64,
}

impl LinearModel {
    pub fn margins(&self, x: &SparseMatrix) -> Result<Vec<f64>, FitError> {
        check_dims(self.weights.len(), x)?;
        Ok((0..x.n_rows())
            .map(|i| x.row_dot(i, &self.weights) + self.bias)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Linear(LinearModel),
    Stumps(StumpEnsemble),
    Trees(BoostedTrees),
}

impl TrainedClassifier {
    /// Real-valued scores, higher meaning more likely Male: probabilities for
    /// logistic and boosted trees, margins for the SVM and AdaBoost.
    pub fn scores(&self, x: &SparseMatrix) -> Result<Vec<f64>, FitError> {
        match self {
            TrainedClassifier::Linear(m) => {
                let margins = m.margins(x)?;
                Ok(match m.kind {
                    LinearKind::Logistic => margins.into_iter().map(sigmoid).collect(),
                    LinearKind::Hinge => margins,
                })
            }
            TrainedClassifier::Stumps(e) => e.margins(x),
            TrainedClassifier::Trees(t) => t.probabilities(x),
        }
    }

    /// Score at or above which a row is classified Male.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedClassifier::Linear(LinearModel {
                kind: LinearKind::Logistic,
                ..
            })
            | TrainedClassifier::Trees(_) => 0.5,
            _ => 0.0,
        }
    }

    pub fn predict(&self, x: &SparseMatrix) -> Result<Vec<Gender>, FitError> {
        let t = self.threshold();
        Ok(self
            .scores(x)?
            .into_iter()
            .map(|s| if s >= t { Gender::Male } else { Gender::Female })
            .collect())
    }

    pub fn converged(&self) -> bool {
        match self {
            TrainedClassifier::Linear(m) => m.converged,
            _ => true,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedClassifier::Linear(m) => m.weights.len(),
            TrainedClassifier::Stumps(e) => e.n_features,
            TrainedClassifier::Trees(t) => t.n_features,
        }
    }
}

/// Versioned JSON envelope for a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: String,
    pub classifier: ClassifierKind,
    pub config: FitConfig,
    pub class_weights: ClassWeights,
    pub converged: bool,
    pub model: TrainedClassifier,
}

impl ModelDocument {
    pub fn new(
        classifier: ClassifierKind,
        config: FitConfig,
        class_weights: ClassWeights,
        model: TrainedClassifier,
    ) -> Self {
        ModelDocument {
            schema: MODEL_SCHEMA.to_owned(),
            classifier,
            config,
            class_weights,
            converged: model.converged(),
            model,
        }
    }
}

/// Fits the learner named by `kind`.
pub fn fit(
    kind: ClassifierKind,
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    config: &FitConfig,
) -> Result<TrainedClassifier, FitError> {
    Ok(match kind {
        ClassifierKind::Lr => TrainedClassifier::Linear(fit_logistic(x, labels, weights, config)?),
        ClassifierKind::Svm => {
            TrainedClassifier::Linear(fit_linear_svm(x, labels, weights, config)?)
        }
        ClassifierKind::Adaboost => TrainedClassifier::Stumps(fit_adaboost(
            x,
            labels,
            weights,
            config.rounds,
            config.seed,
        )?),
        ClassifierKind::Gbt => {
            TrainedClassifier::Trees(fit_boosted_trees(x, labels, weights, config)?)
        }
    })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sign(g: Gender) -> f64 {
    if g.is_male() {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn check_dims(expected: usize, x: &SparseMatrix) -> Result<(), FitError> {
    if x.n_cols() != expected {
        return Err(FitError::DimensionMismatch {
            expected,
            found: x.n_cols(),
        });
    }
    Ok(())
}

/// Shared preconditions of every fit.
pub(crate) fn check_training(x: &SparseMatrix, labels: &[Gender]) -> Result<(), FitError> {
    if x.n_rows() != labels.len() {
        return Err(FitError::LabelMismatch {
            rows: x.n_rows(),
            labels: labels.len(),
        });
    }
    if x.has_non_finite() {
        return Err(FitError::NonFinite);
    }
    let males = labels.iter().filter(|g| g.is_male()).count();
    if males == 0 || males == labels.len() {
        return Err(FitError::SingleClass);
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Four points separable by the sign of `x0 - x1`.
    pub fn separable() -> (SparseMatrix, Vec<Gender>) {
        let x = SparseMatrix::from_dense(&[
            vec![2.0, 0.0],
            vec![1.5, 0.5],
            vec![0.0, 2.0],
            vec![0.5, 1.5],
        ]);
        let y = vec![Gender::Male, Gender::Male, Gender::Female, Gender::Female];
        (x, y)
    }

    /// Noisy linear problem with `n` rows and `d` columns, roughly 70% male.
    pub fn noisy(n: usize, d: usize, seed: u64) -> (SparseMatrix, Vec<Gender>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row: Vec<(u32, f64)> = Vec::new();
            for j in 0..d {
                if rng.random::<f64>() < 0.5 {
                    row.push((j as u32, rng.random_range(0.0..1.0)));
                }
            }
            let z: f64 = row.iter().map(|&(j, v)| truth[j as usize] * v).sum::<f64>() + 0.9;
            let p = sigmoid(3.0 * z);
            let u: f64 = rng.random();
            labels.push(if u < p { Gender::Male } else { Gender::Female });
            rows.push(row);
        }
        if labels.iter().all(|g| g.is_male()) {
            labels[0] = Gender::Female;
        }
        if labels.iter().all(|g| !g.is_male()) {
            labels[0] = Gender::Male;
        }
        (SparseMatrix::from_rows(d, rows), labels)
    }

    pub fn flip(labels: &[Gender]) -> Vec<Gender> {
        labels.iter().map(|g| g.flipped()).collect()
    }
}
