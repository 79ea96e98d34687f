//! Discrete AdaBoost over single-feature threshold stumps.

use serde::{Deserialize, Serialize};

use super::{check_dims, check_training, sign, FitError};
use crate::corpus::Gender;
use crate::features::{ClassWeights, SortedColumns, SparseMatrix};

/// Error floor keeping stage weights finite on a perfect stump.
const MIN_ERROR: f64 = 1e-10;

/// Predicts `polarity` when `x[feature] > threshold`, `-polarity` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: u32,
    pub threshold: f64,
    pub polarity: f64,
    pub alpha: f64,
    /// Weighted training error on the distribution of its round.
    pub error: f64,
}

impl Stump {
    pub fn vote(&self, value: f64) -> f64 {
        if value > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StumpEnsemble {
    pub n_features: usize,
    pub stumps: Vec<Stump>,
}

impl StumpEnsemble {
    /// `Σ α_t h_t(x)`.
    pub fn margins(&self, x: &SparseMatrix) -> Result<Vec<f64>, FitError> {
        check_dims(self.n_features, x)?;
        Ok((0..x.n_rows())
            .map(|i| {
                self.stumps
                    .iter()
                    .map(|s| s.alpha * s.vote(x.get(i, s.feature as usize)))
                    .sum()
            })
            .collect())
    }
}

/// Lowest-error stump for distribution `dist`. The first candidate is the
/// constant split on feature 0, so the search is total even when every
/// feature is constant. Ties keep the earliest candidate.
pub(crate) fn best_stump(cols: &SortedColumns, y: &[f64], dist: &[f64]) -> (u32, f64, f64, f64) {
    let pos_total: f64 = dist.iter().zip(y).filter(|(_, &l)| l > 0.0).map(|(d, _)| d).sum();
    let neg_total: f64 = dist.iter().zip(y).filter(|(_, &l)| l < 0.0).map(|(d, _)| d).sum();
    // Everything on the right: polarity +1 errs on negatives.
    let mut best = if neg_total <= pos_total {
        (0u32, f64::MIN, 1.0, neg_total)
    } else {
        (0u32, f64::MIN, -1.0, pos_total)
    };
    for j in 0..cols.n_cols() {
        let (rows, vals) = cols.column(j);
        if rows.is_empty() {
            continue;
        }
        let (mut nz_pos, mut nz_neg) = (0.0, 0.0);
        for &r in rows {
            let r = r as usize;
            if y[r] > 0.0 {
                nz_pos += dist[r];
            } else {
                nz_neg += dist[r];
            }
        }
        let zero_pos = pos_total - nz_pos;
        let zero_neg = neg_total - nz_neg;
        let has_zero = rows.len() < cols.n_rows();
        // Left-side mass so far.
        let (mut lp, mut ln) = (0.0, 0.0);
        let mut prev: Option<f64> = None;
        let mut zero_done = !has_zero;
        let mut consider = |lp: f64, ln: f64, prev: Option<f64>, next: f64| {
            if let Some(p) = prev {
                if next > p {
                    let thr = 0.5 * (p + next);
                    // Polarity +1: left predicts negative.
                    let e_pos = lp + (neg_total - ln);
                    let e_neg = ln + (pos_total - lp);
                    if e_pos < best.3 {
                        best = (j as u32, thr, 1.0, e_pos);
                    }
                    if e_neg < best.3 {
                        best = (j as u32, thr, -1.0, e_neg);
                    }
                }
            }
        };
        for (&r, &v) in rows.iter().zip(vals) {
            if !zero_done && v > 0.0 {
                consider(lp, ln, prev, 0.0);
                lp += zero_pos;
                ln += zero_neg;
                prev = Some(0.0);
                zero_done = true;
            }
            consider(lp, ln, prev, v);
            let r = r as usize;
            if y[r] > 0.0 {
                lp += dist[r];
            } else {
                ln += dist[r];
            }
            prev = Some(v);
        }
        if !zero_done {
            consider(lp, ln, prev, 0.0);
        }
    }
    best
}

/// `rounds` boosting stages; stops early on a perfect stump or once no stump
/// beats chance. The initial distribution is proportional to class weights.
pub fn fit_adaboost(
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    rounds: usize,
    _seed: u64,
) -> Result<StumpEnsemble, FitError> {
    check_training(x, labels)?;
    if rounds < 1 {
        return Err(FitError::InvalidConfig("AdaBoost needs at least one round".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&g| sign(g)).collect();
    let mut dist: Vec<f64> = labels.iter().map(|&g| weights.of(g)).collect();
    let total: f64 = dist.iter().sum();
    dist.iter_mut().for_each(|d| *d /= total);
    let cols = SortedColumns::new(x);
    let mut stumps = Vec::new();
    for _ in 0..rounds {
        let (feature, threshold, polarity, error) = best_stump(&cols, &y, &dist);
        if error >= 0.5 {
            if stumps.is_empty() {
                stumps.push(Stump { feature, threshold, polarity, alpha: 0.0, error });
            }
            break;
        }
        let e = error.max(MIN_ERROR);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        let stump = Stump { feature, threshold, polarity, alpha, error };
        let mut z = 0.0;
        for i in 0..dist.len() {
            let h = stump.vote(x.get(i, feature as usize));
            dist[i] *= (-alpha * y[i] * h).exp();
            z += dist[i];
        }
        dist.iter_mut().for_each(|d| *d /= z);
        stumps.push(stump);
        if error <= 0.0 {
            break;
        }
    }
    Ok(StumpEnsemble {
        n_features: x.n_cols(),
        stumps,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::noisy;
    use super::super::TrainedClassifier;
    use super::*;
    use crate::features::balanced_weights;

    fn step_data() -> (SparseMatrix, Vec<Gender>) {
        let rows: Vec<Vec<(u32, f64)>> = (0..20).map(|i| vec![(0u32, i as f64 - 5.0)]).collect();
        let y = (0..20)
            .map(|i| if i >= 12 { Gender::Male } else { Gender::Female })
            .collect();
        (SparseMatrix::from_rows(1, rows), y)
    }

    /// Exhaustive stump search over every midpoint of every dense column.
    fn brute_force_error(x: &SparseMatrix, y: &[f64], dist: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..x.n_cols() {
            let mut vals: Vec<f64> = (0..x.n_rows()).map(|i| x.get(i, j)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let mut thresholds = vec![f64::MIN];
            thresholds.extend(vals.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            for t in thresholds {
                for p in [1.0, -1.0] {
                    let e: f64 = (0..x.n_rows())
                        .filter(|&i| {
                            let h = if x.get(i, j) > t { p } else { -p };
                            h != y[i]
                        })
                        .map(|i| dist[i])
                        .sum();
                    best = best.min(e);
                }
            }
        }
        best
    }

    #[test]
    fn stump_search_matches_brute_force() {
        for seed in 0..20 {
            let (x, labels) = noisy(40, 6, seed);
            let y: Vec<f64> = labels.iter().map(|&g| sign(g)).collect();
            let mut dist: Vec<f64> = (0..40).map(|i| 1.0 + (i * 7 % 5) as f64).collect();
            let t: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|d| *d /= t);
            let (_, _, _, e) = best_stump(&SortedColumns::new(&x), &y, &dist);
            assert!((e - brute_force_error(&x, &y, &dist)).abs() < 1e-12);
        }
    }

    #[test]
    fn one_round_is_the_best_stump() {
        let (x, y) = noisy(60, 5, 2);
        let e = fit_adaboost(&x, &y, ClassWeights::UNIFORM, 1, 0).unwrap();
        assert_eq!(e.stumps.len(), 1);
        let ys: Vec<f64> = y.iter().map(|&g| sign(g)).collect();
        let dist = vec![1.0 / 60.0; 60];
        assert!((e.stumps[0].error - brute_force_error(&x, &ys, &dist)).abs() < 1e-12);
    }

    #[test]
    fn step_function_solved_in_one_round() {
        let (x, y) = step_data();
        let e = fit_adaboost(&x, &y, ClassWeights::UNIFORM, 50, 0).unwrap();
        assert_eq!(e.stumps.len(), 1);
        assert!(e.stumps[0].alpha.is_finite());
        let pred = TrainedClassifier::Stumps(e).predict(&x).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn accepted_stumps_beat_chance_on_replayed_distribution() {
        let (x, labels) = noisy(150, 10, 4);
        let w = balanced_weights(&labels).unwrap();
        let e = fit_adaboost(&x, &labels, w, 50, 0).unwrap();
        assert!(!e.stumps.is_empty() && e.stumps.len() <= 50);
        let y: Vec<f64> = labels.iter().map(|&g| sign(g)).collect();
        let mut dist: Vec<f64> = labels.iter().map(|&g| w.of(g)).collect();
        let t: f64 = dist.iter().sum();
        dist.iter_mut().for_each(|d| *d /= t);
        for s in &e.stumps {
            let err: f64 = (0..y.len())
                .filter(|&i| s.vote(x.get(i, s.feature as usize)) != y[i])
                .map(|i| dist[i])
                .sum();
            assert!(err < 0.5);
            assert!((err - s.error).abs() < 1e-9);
            assert!(s.alpha.is_finite() && s.alpha > 0.0);
            for i in 0..y.len() {
                dist[i] *= (-s.alpha * y[i] * s.vote(x.get(i, s.feature as usize))).exp();
            }
            let z: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|d| *d /= z);
        }
    }

    #[test]
    fn constant_features_still_yield_a_stump() {
        let x = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        let y = vec![Gender::Male, Gender::Male, Gender::Female];
        let e = fit_adaboost(&x, &y, ClassWeights::UNIFORM, 10, 0).unwrap();
        assert!(!e.stumps.is_empty());
        assert!(e.stumps.iter().all(|s| s.alpha.is_finite()));
        let pred = TrainedClassifier::Stumps(e).predict(&x).unwrap();
        assert!(pred.iter().all(|g| g.is_male()));
    }

    #[test]
    fn deterministic() {
        let (x, y) = noisy(100, 8, 9);
        assert_eq!(
            fit_adaboost(&x, &y, ClassWeights::UNIFORM, 20, 1).unwrap(),
            fit_adaboost(&x, &y, ClassWeights::UNIFORM, 20, 1).unwrap()
        );
    }
}
