//! Hyperparameter selection by stratified inner cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, ClassifierKind, FitConfig, FitError};
use crate::corpus::Gender;
use crate::eval::auc;
use crate::features::{make_split, SparseMatrix, SplitKind, Weighting};

/// Inner-CV outcome of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub config: FitConfig,
    pub fold_auc: Vec<f64>,
    pub mean_auc: Option<f64>,
    /// Set when any inner fit failed; the cell is then disqualified.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: FitConfig,
    pub best_index: usize,
    pub results: Vec<GridResult>,
}

/// `C ∈ {0.01, 0.1, 1, 10}` for the linear learners, `rounds ∈ {50, 100}`
/// for the ensembles, other fields taken from `base`.
pub fn default_grid(kind: ClassifierKind, base: &FitConfig) -> Vec<FitConfig> {
    match kind {
        ClassifierKind::Lr | ClassifierKind::Svm => [0.01, 0.1, 1.0, 10.0]
            .into_iter()
            .map(|c| FitConfig { c, ..base.clone() })
            .collect(),
        ClassifierKind::Adaboost | ClassifierKind::Gbt => [50, 100]
            .into_iter()
            .map(|rounds| FitConfig { rounds, ..base.clone() })
            .collect(),
    }
}

/// Scores every config by mean AUC over `inner_k` stratified folds of the
/// given (training) data. Highest mean wins; ties go to the smaller `C`, then
/// to the earlier grid entry. Cells run in parallel; the result does not
/// depend on scheduling.
pub fn grid_search(
    kind: ClassifierKind,
    x: &SparseMatrix,
    labels: &[Gender],
    weighting: Weighting,
    grid: &[FitConfig],
    inner_k: usize,
    seed: u64,
) -> Result<GridOutcome, FitError> {
    if grid.is_empty() {
        return Err(FitError::InvalidConfig("empty grid".into()));
    }
    let plan = make_split(labels, SplitKind::StratifiedKFold { k: inner_k }, seed)
        .map_err(|e| FitError::InvalidConfig(e.to_string()))?;
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..inner_k)
        .map(|f| (plan.train_indices(f), plan.test_indices(f)))
        .collect();
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..inner_k).map(move |f| (g, f)))
        .collect();
    let scores: Vec<Result<f64, String>> = cells
        .par_iter()
        .map(|&(g, f)| {
            let (train, test) = &folds[f];
            let xt = x.select_rows(train);
            let yt: Vec<Gender> = train.iter().map(|&i| labels[i]).collect();
            let w = weighting.weights_for(&yt).map_err(|e| e.to_string())?;
            let model = fit(kind, &xt, &yt, w, &grid[g]).map_err(|e| e.to_string())?;
            let xv = x.select_rows(test);
            let yv: Vec<Gender> = test.iter().map(|&i| labels[i]).collect();
            let s = model.scores(&xv).map_err(|e| e.to_string())?;
            auc(&s, &yv).map_err(|e| e.to_string())
        })
        .collect();
    let mut results = Vec::with_capacity(grid.len());
    for (g, config) in grid.iter().enumerate() {
        let cell = &scores[g * inner_k..(g + 1) * inner_k];
        let error = cell.iter().find_map(|r| r.as_ref().err().cloned());
        let fold_auc: Vec<f64> = cell.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let mean_auc = match error {
            None => Some(fold_auc.iter().sum::<f64>() / inner_k as f64),
            Some(ref e) => {
                log::warn!("grid config {g} disqualified: {e}");
                None
            }
        };
        results.push(GridResult {
            config: config.clone(),
            fold_auc,
            mean_auc,
            error,
        });
    }
    let mut best: Option<usize> = None;
    for (g, r) in results.iter().enumerate() {
        let Some(m) = r.mean_auc else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bm = results[b].mean_auc.unwrap();
                m > bm || (m == bm && r.config.c < results[b].config.c)
            }
        };
        if better {
            best = Some(g);
        }
    }
    let Some(best_index) = best else {
        let first = results[0].error.clone().unwrap_or_default();
        return Err(FitError::AllConfigsFailed(first));
    };
    Ok(GridOutcome {
        best: results[best_index].config.clone(),
        best_index,
        results,
    })
}
