//! Class-weighted linear SVM (L1 hinge) solved by dual coordinate descent.
//!
//! The bias is learned as the weight of a constant feature equal to 1, so it
//! is regularized together with `w`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training, sign, FitConfig, FitError, LinearKind, LinearModel};
use crate::corpus::Gender;
use crate::features::{ClassWeights, SparseMatrix};

/// `Σ s_i max(0, 1 − y_i (w·x_i + b)) + (‖w‖² + b²) / (2C)`.
pub fn svm_objective(
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    c: f64,
    w: &[f64],
    b: f64,
) -> f64 {
    let hinge: f64 = (0..x.n_rows())
        .map(|i| {
            let m = sign(labels[i]) * (x.row_dot(i, w) + b);
            weights.of(labels[i]) * (1.0 - m).max(0.0)
        })
        .sum();
    hinge + (w.iter().map(|v| v * v).sum::<f64>() + b * b) / (2.0 * c)
}

pub fn fit_linear_svm(
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    config: &FitConfig,
) -> Result<LinearModel, FitError> {
    check_training(x, labels)?;
    config.validate()?;
    let n = x.n_rows();
    let d = x.n_cols();
    let y: Vec<f64> = labels.iter().map(|&g| sign(g)).collect();
    let upper: Vec<f64> = labels.iter().map(|&g| config.c * weights.of(g)).collect();
    let q_diag: Vec<f64> = (0..n).map(|i| x.row_norm(i).powi(2) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut gap = f64::INFINITY;
    let mut epochs = 0;
    while epochs < config.max_iterations {
        epochs += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = y[i] * (x.row_dot(i, &w) + b) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= upper[i] {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let next = (alpha[i] - g / q_diag[i]).clamp(0.0, upper[i]);
                let delta = (next - alpha[i]) * y[i];
                alpha[i] = next;
                x.add_row_to(i, delta, &mut w);
                b += delta;
            }
        }
        gap = pg_max - pg_min;
        if gap <= config.tolerance {
            break;
        }
    }
    let converged = gap <= config.tolerance;
    if !converged {
        log::warn!("linear SVM stopped after {epochs} epochs with dual gap {gap:.3e}");
    }
    Ok(LinearModel {
        kind: LinearKind::Hinge,
        weights: w,
        bias: b,
        converged,
        iterations: epochs,
        final_gradient: gap,
    })
}
