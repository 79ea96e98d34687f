//! Confusion-matrix metrics, rank-based AUC, and the holdout and
//! cross-validation attack harnesses. Male is the positive class throughout.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{fit, grid_search, ClassifierKind, FitConfig, FitError};
use crate::corpus::{Gender, RatingCorpus};
use crate::features::{
    build_matrix, l2_normalize_rows, make_split, FeatureError, FeatureMatrix, SplitKind, Weighting,
};
use crate::stereotype::{DegreeMode, StereotypeModel};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("AUC needs both classes among the labels")]
    SingleClass,
    #[error("invalid harness {0:?} (expected holdout:FRACTION or cv:K)")]
    BadHarness(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(predictions: &[Gender], labels: &[Gender]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, l) in predictions.iter().zip(labels) {
        match (p, l) {
            (Gender::Male, Gender::Male) => cm.tp += 1,
            (Gender::Male, Gender::Female) => cm.fp += 1,
            (Gender::Female, Gender::Female) => cm.tn += 1,
            (Gender::Female, Gender::Male) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub accuracy_male: f64,
    pub accuracy_female: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub auc: f64,
    pub confusion: ConfusionMatrix,
    /// Metrics whose ratio was 0/0 and are reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

impl MetricSet {
    pub const NAMES: [&'static str; 7] = [
        "accuracy",
        "accuracy_male",
        "accuracy_female",
        "precision",
        "recall",
        "f_measure",
        "auc",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.accuracy,
            self.accuracy_male,
            self.accuracy_female,
            self.precision,
            self.recall,
            self.f_measure,
            self.auc,
        ]
    }
}

fn ratio(num: u64, den: u64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_owned());
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: ConfusionMatrix, scores: &[f64], labels: &[Gender]) -> Result<MetricSet, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    let mut undefined = Vec::new();
    let accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy", &mut undefined);
    let accuracy_male = ratio(cm.tp, cm.tp + cm.fn_, "accuracy_male", &mut undefined);
    let accuracy_female = ratio(cm.tn, cm.tn + cm.fp, "accuracy_female", &mut undefined);
    let precision = ratio(cm.tp, cm.tp + cm.fp, "precision", &mut undefined);
    let recall = ratio(cm.tp, cm.tp + cm.fn_, "recall", &mut undefined);
    // 2PR/(P+R) written in counts, so it is a single correctly rounded ratio.
    let f_measure = if cm.tp > 0 {
        (2 * cm.tp) as f64 / (2 * cm.tp + cm.fp + cm.fn_) as f64
    } else {
        undefined.push("f_measure".into());
        0.0
    };
    let auc = match auc(scores, labels) {
        Ok(a) => a,
        Err(EvalError::SingleClass) | Err(EvalError::Empty) => {
            undefined.push("auc".into());
            0.0
        }
        Err(e) => return Err(e),
    };
    Ok(MetricSet {
        accuracy,
        accuracy_male,
        accuracy_female,
        precision,
        recall,
        f_measure,
        auc,
        confusion: cm,
        undefined,
    })
}

/// Mann–Whitney AUC: the share of (male, female) pairs where the male scores
/// higher, ties counting one half.
pub fn auc(scores: &[f64], labels: &[Gender]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|g| g.is_male()).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives, so tied average ranks stay integral.
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) average to (start+1+end)/2.
        let twice_avg = (start + 1 + end) as u64;
        let pos = order[start..end].iter().filter(|&&i| labels[i].is_male()).count() as u64;
        twice_rank_sum += pos * twice_avg;
        start = end;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC vertices from the strictest threshold down, starting at (0, 0).
pub fn roc_points(scores: &[f64], labels: &[Gender]) -> Result<Vec<RocPoint>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|g| g.is_male()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        while k < order.len() && scores[order[k]] == t {
            if labels[order[k]].is_male() {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: t,
        });
    }
    Ok(points)
}

pub fn write_roc_csv(points: &[RocPoint], path: &Path) -> Result<(), EvalError> {
    let err = |e: &dyn fmt::Display| EvalError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(&e))?;
    w.write_record(["fpr", "tpr", "threshold"]).map_err(|e| err(&e))?;
    for p in points {
        w.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])
            .map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))
}

/// Evaluation protocol: a single stratified holdout or k-fold CV with an
/// inner grid search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "harness", rename_all = "snake_case")]
pub enum Harness {
    Holdout { test_fraction: f64 },
    Cv { k: usize },
}

impl FromStr for Harness {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvalError::BadHarness(s.to_owned());
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "holdout" => {
                let f: f64 = arg.parse().map_err(|_| bad())?;
                if !(f > 0.0 && f < 1.0) {
                    return Err(bad());
                }
                Ok(Harness::Holdout { test_fraction: f })
            }
            "cv" => {
                let k: usize = arg.parse().map_err(|_| bad())?;
                if k < 2 {
                    return Err(bad());
                }
                Ok(Harness::Cv { k })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Harness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Harness::Holdout { test_fraction } => write!(f, "holdout:{test_fraction}"),
            Harness::Cv { k } => write!(f, "cv:{k}"),
        }
    }
}

/// The classifier input used by both harnesses: ratings (plus degrees when a
/// model is given), rows scaled to unit length.
pub fn attack_features(
    corpus: &RatingCorpus,
    model: Option<&StereotypeModel>,
    mode: DegreeMode,
) -> FeatureMatrix {
    l2_normalize_rows(build_matrix(corpus, model, mode))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub classifier: ClassifierKind,
    pub config: FitConfig,
    pub test_fraction: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub converged: bool,
    pub metrics: MetricSet,
}

/// Fits on the stratified training partition with class weights derived from
/// it, and scores the held-out rows.
pub fn holdout_on(
    features: &FeatureMatrix,
    kind: ClassifierKind,
    config: &FitConfig,
    weighting: Weighting,
    test_fraction: f64,
    seed: u64,
) -> Result<HoldoutReport, EvalError> {
    let plan = make_split(&features.labels, SplitKind::Holdout { test_fraction }, seed)?;
    let (train, test) = (plan.train_indices(0), plan.test_indices(0));
    let (metrics, converged) = fit_and_score(features, kind, config, weighting, &train, &test)?;
    Ok(HoldoutReport {
        classifier: kind,
        config: config.clone(),
        test_fraction,
        seed,
        n_train: train.len(),
        n_test: test.len(),
        converged,
        metrics,
    })
}

fn fit_and_score(
    features: &FeatureMatrix,
    kind: ClassifierKind,
    config: &FitConfig,
    weighting: Weighting,
    train: &[usize],
    test: &[usize],
) -> Result<(MetricSet, bool), EvalError> {
    let tr = features.select(train);
    let te = features.select(test);
    let weights = weighting.weights_for(&tr.labels)?;
    let model = fit(kind, &tr.matrix, &tr.labels, weights, config)?;
    let scores = model.scores(&te.matrix)?;
    let pred = model.predict(&te.matrix)?;
    let cm = confusion(&pred, &te.labels)?;
    debug_assert_eq!(cm.total() as usize, test.len());
    Ok((metrics(cm, &scores, &te.labels)?, model.converged()))
}

pub fn run_holdout(
    corpus: &RatingCorpus,
    model: Option<&StereotypeModel>,
    mode: DegreeMode,
    kind: ClassifierKind,
    config: &FitConfig,
    test_fraction: f64,
    seed: u64,
) -> Result<HoldoutReport, EvalError> {
    let features = attack_features(corpus, model, mode);
    holdout_on(&features, kind, config, Weighting::Balanced, test_fraction, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub selected: FitConfig,
    pub n_test: usize,
    pub converged: bool,
    pub metrics: MetricSet,
}

/// Per-metric summary across folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub accuracy_male: f64,
    pub accuracy_female: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub auc: f64,
}

impl MetricSummary {
    fn from_values(v: [f64; 7]) -> Self {
        MetricSummary {
            accuracy: v[0],
            accuracy_male: v[1],
            accuracy_female: v[2],
            precision: v[3],
            recall: v[4],
            f_measure: v[5],
            auc: v[6],
        }
    }

    pub fn values(&self) -> [f64; 7] {
        [
            self.accuracy,
            self.accuracy_male,
            self.accuracy_female,
            self.precision,
            self.recall,
            self.f_measure,
            self.auc,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classifier: ClassifierKind,
    pub k: usize,
    pub inner_k: usize,
    pub seed: u64,
    pub grid: Vec<FitConfig>,
    pub folds: Vec<FoldResult>,
    pub mean: MetricSummary,
    /// Population standard deviation (divisor k).
    pub std: MetricSummary,
    pub std_divisor: String,
}

impl CvReport {
    pub fn converged(&self) -> bool {
        self.folds.iter().all(|f| f.converged)
    }
}

/// `(mean, population σ)` of each metric over the fold list.
pub fn summarize(folds: &[MetricSet]) -> (MetricSummary, MetricSummary) {
    let k = folds.len() as f64;
    let mut mean = [0.0; 7];
    for f in folds {
        for (m, v) in mean.iter_mut().zip(f.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let mut var = [0.0; 7];
    for f in folds {
        for ((s, v), m) in var.iter_mut().zip(f.values()).zip(mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var.map(|s| (s / k).sqrt());
    (MetricSummary::from_values(mean), MetricSummary::from_values(std))
}

pub const INNER_FOLDS: usize = 3;

/// Stratified k-fold CV. Inside each outer fold the grid is searched on the
/// training folds only, the winner refit on all of them, and scored on the
/// held-out fold. Folds run concurrently.
pub fn cv_on(
    features: &FeatureMatrix,
    kind: ClassifierKind,
    grid: &[FitConfig],
    weighting: Weighting,
    k: usize,
    seed: u64,
) -> Result<CvReport, EvalError> {
    let plan = make_split(&features.labels, SplitKind::StratifiedKFold { k }, seed)?;
    let folds: Vec<FoldResult> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<FoldResult, EvalError> {
            let train = plan.train_indices(fold);
            let test = plan.test_indices(fold);
            let tr = features.select(&train);
            let outcome = grid_search(
                kind,
                &tr.matrix,
                &tr.labels,
                weighting,
                grid,
                INNER_FOLDS,
                seed.wrapping_add(fold as u64 + 1),
            )?;
            let (metrics, converged) =
                fit_and_score(features, kind, &outcome.best, weighting, &train, &test)?;
            Ok(FoldResult {
                fold,
                selected: outcome.best,
                n_test: test.len(),
                converged,
                metrics,
            })
        })
        .collect::<Result<_, _>>()?;
    let sets: Vec<MetricSet> = folds.iter().map(|f| f.metrics.clone()).collect();
    let (mean, std) = summarize(&sets);
    Ok(CvReport {
        classifier: kind,
        k,
        inner_k: INNER_FOLDS,
        seed,
        grid: grid.to_vec(),
        folds,
        mean,
        std,
        std_divisor: "k".into(),
    })
}

pub fn run_cv(
    corpus: &RatingCorpus,
    model: Option<&StereotypeModel>,
    mode: DegreeMode,
    kind: ClassifierKind,
    grid: &[FitConfig],
    k: usize,
    seed: u64,
) -> Result<CvReport, EvalError> {
    let features = attack_features(corpus, model, mode);
    cv_on(&features, kind, grid, Weighting::Balanced, k, seed)
}

/// One row per fold: `fold,<metric>...`.
pub fn write_cv_csv(report: &CvReport, path: &Path) -> Result<(), EvalError> {
    let err = |e: &dyn fmt::Display| EvalError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(&e))?;
    let mut header = vec!["fold"];
    header.extend(MetricSet::NAMES);
    w.write_record(&header).map_err(|e| err(&e))?;
    for f in &report.folds {
        let mut row = vec![f.fold.to_string()];
        row.extend(f.metrics.values().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))
}
