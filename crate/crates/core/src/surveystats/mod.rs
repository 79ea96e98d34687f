//! Binary logistic regression on categorical genre preferences: dummy coding
//! against the `No` level, maximum-likelihood fitting, odds ratios with 95%
//! Wald intervals, and covariate-pattern goodness of fit.

mod special;
mod synthetic;

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use special::{chi_square_sf, normal_cdf, two_sided_p};
pub use synthetic::{generate_survey, planted_coefficients, simulate_outcomes, SyntheticSurveyConfig};

use crate::classifiers::{sigmoid, softplus};
use crate::corpus::{Gender, CANONICAL_GENRES};

/// Normal quantile used for the 95% intervals.
pub const Z_95: f64 = 1.96;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_IRLS_ITERATIONS: usize = 100;
/// Coefficient magnitude beyond which a fit is treated as separated.
pub const SEPARATION_COEFFICIENT: f64 = 15.0;
/// Standard error beyond which a fit is treated as separated.
pub const SEPARATION_SE: f64 = 100.0;
pub const INTERCEPT: &str = "Constant";

#[derive(Debug, thiserror::Error)]
pub enum SurveyError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
    #[error("survey schema: {0}")]
    Schema(String),
    #[error("row {row}, column {column}: unknown preference level {value:?} (No|MinPrefer|MaxPrefer)")]
    BadLevel { row: usize, column: String, value: String },
    #[error("row {row}: unknown gender {value:?}")]
    BadGender { row: usize, value: String },
    #[error("no survey records")]
    Empty,
    #[error("{rows} outcomes for a design with {expected} rows")]
    OutcomeMismatch { rows: usize, expected: usize },
    #[error("outcomes must be 0 or 1")]
    BadOutcome,
    #[error("design is rank deficient; dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("quasi-complete separation; diverging columns: {}", .columns.join(", "))]
    Separation { columns: Vec<String> },
    #[error("IRLS did not converge in {iterations} iterations (gradient {gradient:.3e})")]
    NonConvergence { iterations: usize, gradient: f64 },
    #[error("invalid chi-square argument {0}")]
    InvalidDf(f64),
}

impl SurveyError {
    /// Errors that stem from the data's statistical structure rather than
    /// from malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            SurveyError::RankDeficient { .. }
                | SurveyError::Separation { .. }
                | SurveyError::NonConvergence { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PreferenceLevel {
    No,
    MinPrefer,
    MaxPrefer,
}

impl PreferenceLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            PreferenceLevel::No => "No",
            PreferenceLevel::MinPrefer => "MinPrefer",
            PreferenceLevel::MaxPrefer => "MaxPrefer",
        }
    }
}

impl FromStr for PreferenceLevel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "No" => Ok(PreferenceLevel::No),
            "MinPrefer" => Ok(PreferenceLevel::MinPrefer),
            "MaxPrefer" => Ok(PreferenceLevel::MaxPrefer),
            _ => Err(()),
        }
    }
}

/// One respondent: a preference level per canonical genre, in
/// [`CANONICAL_GENRES`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub respondent_id: u64,
    pub gender: Gender,
    pub levels: [PreferenceLevel; 21],
}

impl SurveyRecord {
    pub fn level(&self, genre: &str) -> Option<PreferenceLevel> {
        CANONICAL_GENRES
            .iter()
            .position(|g| *g == genre)
            .map(|i| self.levels[i])
    }
}

/// Reads a survey CSV: a `gender` column, one column per canonical genre
/// (any order) and an optional `respondent_id` column. Rows without an id
/// are numbered from 1.
pub fn read_survey_csv(path: &Path) -> Result<Vec<SurveyRecord>, SurveyError> {
    let read_err = |m: String| SurveyError::Read {
        path: path.display().to_string(),
        message: m,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| read_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| read_err(e.to_string()))?.clone();
    let mut gender_col = None;
    let mut id_col = None;
    let mut genre_cols = [usize::MAX; 21];
    for (i, h) in headers.iter().enumerate() {
        if h.eq_ignore_ascii_case("gender") {
            gender_col = Some(i);
        } else if h.eq_ignore_ascii_case("respondent_id") {
            id_col = Some(i);
        } else if let Some(g) = CANONICAL_GENRES.iter().position(|g| g.eq_ignore_ascii_case(h)) {
            if genre_cols[g] != usize::MAX {
                return Err(SurveyError::Schema(format!("duplicate column {h:?}")));
            }
            genre_cols[g] = i;
        } else {
            return Err(SurveyError::Schema(format!("unexpected column {h:?}")));
        }
    }
    let gender_col = gender_col.ok_or_else(|| SurveyError::Schema("missing gender column".into()))?;
    if let Some(g) = genre_cols.iter().position(|&c| c == usize::MAX) {
        return Err(SurveyError::Schema(format!("missing genre column {:?}", CANONICAL_GENRES[g])));
    }
    let mut records = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 1;
        let row = row.map_err(|e| read_err(e.to_string()))?;
        let gender = row
            .get(gender_col)
            .and_then(|v| v.parse::<Gender>().ok())
            .ok_or_else(|| SurveyError::BadGender {
                row: row_no,
                value: row.get(gender_col).unwrap_or("").to_owned(),
            })?;
        let respondent_id = match id_col {
            Some(c) => row
                .get(c)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| SurveyError::Schema(format!("row {row_no}: bad respondent_id")))?,
            None => row_no as u64,
        };
        let mut levels = [PreferenceLevel::No; 21];
        for (g, &c) in genre_cols.iter().enumerate() {
            let value = row.get(c).unwrap_or("");
            levels[g] = value.parse().map_err(|_| SurveyError::BadLevel {
                row: row_no,
                column: CANONICAL_GENRES[g].to_owned(),
                value: value.to_owned(),
            })?;
        }
        records.push(SurveyRecord {
            respondent_id,
            gender,
            levels,
        });
    }
    if records.is_empty() {
        return Err(SurveyError::Empty);
    }
    Ok(records)
}

pub fn write_survey_csv(records: &[SurveyRecord], path: &Path) -> Result<(), SurveyError> {
    let err = |m: String| SurveyError::Write {
        path: path.display().to_string(),
        message: m,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut header = vec!["respondent_id", "gender"];
    header.extend(CANONICAL_GENRES);
    w.write_record(&header).map_err(|e| err(e.to_string()))?;
    for r in records {
        let mut row = vec![r.respondent_id.to_string(), r.gender.code().to_owned()];
        row.extend(r.levels.iter().map(|l| l.as_str().to_owned()));
        w.write_record(&row).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

/// Design matrix with named columns; column 0 is the intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct DummyDesign {
    pub columns: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl DummyDesign {
    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>]) -> Self {
        let p = columns.len();
        assert!(rows.iter().all(|r| r.len() == p), "row width must match column count");
        DummyDesign {
            matrix: DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]),
            columns,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// `Genre=MaxPrefer` and `Genre=MinPrefer` for each genre in alphabetical
/// order, after the intercept.
pub fn design_columns() -> Vec<String> {
    let mut cols = vec![INTERCEPT.to_owned()];
    for g in CANONICAL_GENRES {
        cols.push(format!("{g}=MaxPrefer"));
        cols.push(format!("{g}=MinPrefer"));
    }
    cols
}

pub fn encode_design(records: &[SurveyRecord]) -> Result<DummyDesign, SurveyError> {
    if records.is_empty() {
        return Err(SurveyError::Empty);
    }
    let columns = design_columns();
    let matrix = DMatrix::from_fn(records.len(), columns.len(), |i, j| {
        if j == 0 {
            return 1.0;
        }
        let genre = (j - 1) / 2;
        let want = if (j - 1) % 2 == 0 {
            PreferenceLevel::MaxPrefer
        } else {
            PreferenceLevel::MinPrefer
        };
        if records[i].levels[genre] == want {
            1.0
        } else {
            0.0
        }
    });
    Ok(DummyDesign { columns, matrix })
}

/// 1 for respondents of `positive`, 0 otherwise.
pub fn outcomes(records: &[SurveyRecord], positive: Gender) -> Vec<f64> {
    records
        .iter()
        .map(|r| if r.gender == positive { 1.0 } else { 0.0 })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub term: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub odds_ratio: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub z: f64,
    pub p_value: f64,
}

impl RegressionRow {
    /// Odds ratio, 95% interval and Wald p-value for one `(b, SE)` pair.
    pub fn from_estimate(term: impl Into<String>, b: f64, se: f64) -> Self {
        let z = b / se;
        RegressionRow {
            term: term.into(),
            coefficient: b,
            std_error: se,
            odds_ratio: b.exp(),
            ci_lower: (b - Z_95 * se).exp(),
            ci_upper: (b + Z_95 * se).exp(),
            z,
            p_value: two_sided_p(z),
        }
    }
}

/// Goodness of fit over distinct covariate patterns. `deviance` is the
/// likelihood-ratio statistic against the saturated pattern model, `pearson`
/// the Pearson chi-square; both use `df = patterns − parameters`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub patterns: usize,
    pub df: i64,
    pub deviance: f64,
    pub deviance_p: Option<f64>,
    pub pearson: f64,
    pub pearson_p: Option<f64>,
    /// `df ≤ 0`: as many parameters as patterns, so no test is possible.
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n: usize,
    pub rows: Vec<RegressionRow>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each accepted IRLS step, starting from zero
    /// coefficients.
    pub log_likelihood_trace: Vec<f64>,
    pub gof: Option<GoodnessOfFit>,
}

impl FitSummary {
    pub fn coefficients(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.coefficient).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.std_error).collect()
    }
}

/// Columns that are linear combinations of earlier ones (modified
/// Gram-Schmidt with reorthogonalization).
pub fn dependent_columns(design: &DummyDesign) -> Vec<String> {
    let x = &design.matrix;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let scale = col.norm().max(1.0);
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v -= q * proj;
            }
        }
        let norm = v.norm();
        if norm <= 1e-9 * scale {
            bad.push(design.columns[j].clone());
        } else {
            basis.push(v / norm);
        }
    }
    bad
}

fn log_likelihood(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| yi * e - softplus(e))
        .sum()
}

struct IrlsState {
    gradient: DVector<f64>,
    information: DMatrix<f64>,
}

fn irls_state(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> IrlsState {
    let eta = x * beta;
    let p = x.ncols();
    let mut gradient = DVector::zeros(p);
    let mut information = DMatrix::zeros(p, p);
    for i in 0..x.nrows() {
        let mu = sigmoid(eta[i]);
        let w = mu * (1.0 - mu);
        let row = x.row(i);
        for a in 0..p {
            let xa = row[a];
            if xa == 0.0 {
                continue;
            }
            gradient[a] += xa * (y[i] - mu);
            for b in a..p {
                information[(a, b)] += w * xa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            information[(a, b)] = information[(b, a)];
        }
    }
    IrlsState {
        gradient,
        information,
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximum-likelihood logistic fit by iteratively reweighted least squares
/// with step halving, so the log-likelihood never decreases beyond rounding. Standard errors
/// come from the inverse observed information.
pub fn fit_mle(design: &DummyDesign, y: &[f64]) -> Result<FitSummary, SurveyError> {
    let x = &design.matrix;
    if y.len() != x.nrows() {
        return Err(SurveyError::OutcomeMismatch {
            rows: y.len(),
            expected: x.nrows(),
        });
    }
    if x.nrows() == 0 {
        return Err(SurveyError::Empty);
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(SurveyError::BadOutcome);
    }
    let dependent = dependent_columns(design);
    if !dependent.is_empty() {
        return Err(SurveyError::RankDeficient { columns: dependent });
    }
    let p = x.ncols();
    let mut beta = DVector::zeros(p);
    let mut ll = log_likelihood(x, y, &beta);
    let mut trace = vec![ll];
    let mut state = irls_state(x, y, &beta);
    let mut iterations = 0;
    while inf_norm(&state.gradient) > GRADIENT_TOLERANCE && iterations < MAX_IRLS_ITERATIONS {
        iterations += 1;
        let Some(chol) = state.information.clone().cholesky() else {
            break;
        };
        let step = chol.solve(&state.gradient);
        // Below this predicted gain the likelihood change is rounding noise.
        let resolution = 1e-12 * (1.0 + ll.abs());
        let predicted = state.gradient.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cand_ll = log_likelihood(x, y, &cand);
            if cand_ll >= ll || (t == 1.0 && predicted < resolution) {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(ll);
        state = irls_state(x, y, &beta);
    }
    let gradient = inf_norm(&state.gradient);
    let converged = gradient <= GRADIENT_TOLERANCE;
    let se: Vec<f64> = match state.information.clone().try_inverse() {
        Some(inv) => (0..p).map(|j| inv[(j, j)].max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; p],
    };
    let diverging: Vec<String> = (0..p)
        .filter(|&j| {
            beta[j].abs() > SEPARATION_COEFFICIENT || !(se[j] <= SEPARATION_SE)
        })
        .map(|j| design.columns[j].clone())
        .collect();
    if !diverging.is_empty() {
        return Err(SurveyError::Separation { columns: diverging });
    }
    if !converged {
        return Err(SurveyError::NonConvergence {
            iterations,
            gradient,
        });
    }
    let rows = (0..p)
        .map(|j| RegressionRow::from_estimate(design.columns[j].clone(), beta[j], se[j]))
        .collect();
    let mut summary = FitSummary {
        n: x.nrows(),
        rows,
        log_likelihood: ll,
        iterations,
        converged,
        log_likelihood_trace: trace,
        gof: None,
    };
    summary.gof = Some(goodness_of_fit(&summary, design, y)?);
    Ok(summary)
}

/// Deviance and Pearson statistics after grouping rows with identical
/// covariates.
pub fn goodness_of_fit(fit: &FitSummary, design: &DummyDesign, y: &[f64]) -> Result<GoodnessOfFit, SurveyError> {
    let x = &design.matrix;
    let beta = DVector::from_vec(fit.coefficients());
    let eta = x * &beta;
    // pattern -> (count, successes, linear predictor)
    let mut patterns: BTreeMap<Vec<u64>, (f64, f64, f64)> = BTreeMap::new();
    for i in 0..x.nrows() {
        let key: Vec<u64> = x.row(i).iter().map(|v| v.to_bits()).collect();
        let e = patterns.entry(key).or_insert((0.0, 0.0, eta[i]));
        e.0 += 1.0;
        e.1 += y[i];
    }
    let xlogx = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    let (mut deviance, mut pearson) = (0.0, 0.0);
    for &(n, s, e) in patterns.values() {
        let mu = sigmoid(e);
        deviance += 2.0 * (xlogx(s, n * mu) + xlogx(n - s, n * (1.0 - mu)));
        pearson += (s - n * mu).powi(2) / (n * mu * (1.0 - mu));
    }
    let df = patterns.len() as i64 - x.ncols() as i64;
    let saturated = df <= 0;
    let (deviance_p, pearson_p) = if saturated {
        (None, None)
    } else {
        (
            Some(chi_square_sf(deviance.max(0.0), df as f64)?),
            Some(chi_square_sf(pearson.max(0.0), df as f64)?),
        )
    };
    Ok(GoodnessOfFit {
        patterns: patterns.len(),
        df,
        deviance,
        deviance_p,
        pearson,
        pearson_p,
        saturated,
    })
}

/// Encodes and fits with `positive` respondents as the outcome 1.
pub fn fit_survey(records: &[SurveyRecord], positive: Gender) -> Result<FitSummary, SurveyError> {
    let design = encode_design(records)?;
    fit_mle(&design, &outcomes(records, positive))
}

/// Rows laid out as `term,coefficient,std_error,odds_ratio,ci_lower,ci_upper,p_value`.
pub fn write_summary_csv(summary: &FitSummary, path: &Path) -> Result<(), SurveyError> {
    let err = |m: String| SurveyError::Write {
        path: path.display().to_string(),
        message: m,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    w.write_record(["term", "coefficient", "std_error", "odds_ratio", "ci_lower", "ci_upper", "p_value"])
        .map_err(|e| err(e.to_string()))?;
    for r in &summary.rows {
        w.write_record([
            r.term.clone(),
            format!("{:.6}", r.coefficient),
            format!("{:.6}", r.std_error),
            format!("{:.6}", r.odds_ratio),
            format!("{:.6}", r.ci_lower),
            format!("{:.6}", r.ci_upper),
            format!("{:.6}", r.p_value),
        ])
        .map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}
