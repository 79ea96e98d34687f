//! L2-regularized, class-weighted logistic regression fitted by a truncated
//! Newton (Newton-CG) method with Armijo backtracking.

use super::{check_training, sign, sigmoid, softplus, FitConfig, FitError, LinearKind, LinearModel};
use crate::corpus::Gender;
use crate::features::{ClassWeights, SparseMatrix};

const MAX_CG_STEPS: usize = 250;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

struct Problem<'a> {
    x: &'a SparseMatrix,
    y: Vec<f64>,
    s: Vec<f64>,
    inv_c: f64,
}

impl Problem<'_> {
    fn new<'a>(x: &'a SparseMatrix, labels: &[Gender], weights: ClassWeights, c: f64) -> Problem<'a> {
        Problem {
            x,
            y: labels.iter().map(|&g| sign(g)).collect(),
            s: labels.iter().map(|&g| weights.of(g)).collect(),
            inv_c: 1.0 / c,
        }
    }

    fn dim(&self) -> usize {
        self.x.n_cols()
    }

    /// Signed margins `y_i (w·x_i + b)`; `theta` is `[w.., b]`.
    fn signed_margins(&self, theta: &[f64]) -> Vec<f64> {
        let (w, b) = theta.split_at(self.dim());
        (0..self.x.n_rows())
            .map(|i| self.y[i] * (self.x.row_dot(i, w) + b[0]))
            .collect()
    }

    fn value(&self, theta: &[f64], m: &[f64]) -> f64 {
        let loss: f64 = m.iter().zip(&self.s).map(|(&mi, &si)| si * softplus(-mi)).sum();
        let w = &theta[..self.dim()];
        loss + 0.5 * self.inv_c * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, theta: &[f64], m: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d + 1];
        for i in 0..self.x.n_rows() {
            let r = -self.y[i] * self.s[i] * sigmoid(-m[i]);
            self.x.add_row_to(i, r, &mut g[..d]);
            g[d] += r;
        }
        for j in 0..d {
            g[j] += self.inv_c * theta[j];
        }
        g
    }

    /// Per-row Hessian weights `s_i σ(m_i) σ(-m_i)`.
    fn curvature(&self, m: &[f64]) -> Vec<f64> {
        m.iter()
            .zip(&self.s)
            .map(|(&mi, &si)| si * sigmoid(mi) * sigmoid(-mi))
            .collect()
    }

    fn hess_vec(&self, curv: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d + 1];
        for i in 0..self.x.n_rows() {
            let u = curv[i] * (self.x.row_dot(i, &v[..d]) + v[d]);
            if u != 0.0 {
                self.x.add_row_to(i, u, &mut out[..d]);
                out[d] += u;
            }
        }
        for j in 0..d {
            out[j] += self.inv_c * v[j];
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Approximately solves `H p = -g` by conjugate gradients.
fn newton_direction(p: &Problem, curv: &[f64], g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let gnorm = dot(g, g).sqrt();
    let target = gnorm.sqrt().min(0.5) * gnorm;
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..MAX_CG_STEPS.min(n.max(1) * 2) {
        if rr.sqrt() <= target {
            break;
        }
        let hd = p.hess_vec(curv, &d);
        let dhd = dot(&d, &hd);
        if dhd <= f64::MIN_POSITIVE {
            break;
        }
        let alpha = rr / dhd;
        for k in 0..n {
            x[k] += alpha * d[k];
            r[k] -= alpha * hd[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..n {
            d[k] = r[k] + beta * d[k];
        }
    }
    if x.iter().all(|&v| v == 0.0) {
        // No usable curvature: fall back to steepest descent.
        return g.iter().map(|v| -v).collect();
    }
    x
}

/// Class-weighted negative log-likelihood plus `‖w‖² / (2C)`.
pub fn logistic_objective(
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    c: f64,
    w: &[f64],
    b: f64,
) -> f64 {
    let p = Problem::new(x, labels, weights, c);
    let mut theta = w.to_vec();
    theta.push(b);
    let m = p.signed_margins(&theta);
    p.value(&theta, &m)
}

/// Gradient of [`logistic_objective`] with respect to `(w, b)`.
pub fn logistic_gradient(
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    c: f64,
    w: &[f64],
    b: f64,
) -> (Vec<f64>, f64) {
    let p = Problem::new(x, labels, weights, c);
    let mut theta = w.to_vec();
    theta.push(b);
    let m = p.signed_margins(&theta);
    let mut g = p.gradient(&theta, &m);
    let gb = g.pop().unwrap();
    (g, gb)
}

pub fn fit_logistic(
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    config: &FitConfig,
) -> Result<LinearModel, FitError> {
    check_training(x, labels)?;
    config.validate()?;
    let p = Problem::new(x, labels, weights, config.c);
    let mut theta = vec![0.0; p.dim() + 1];
    let mut m = p.signed_margins(&theta);
    let mut f = p.value(&theta, &m);
    let mut g = p.gradient(&theta, &m);
    let stop = config.tolerance * inf_norm(&g).max(1.0);
    let mut iterations = 0;
    while inf_norm(&g) > stop && iterations < config.max_iterations {
        iterations += 1;
        let curv = p.curvature(&m);
        let dir = newton_direction(&p, &curv, &g);
        let slope = dot(&g, &dir);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let cm = p.signed_margins(&cand);
            let cf = p.value(&cand, &cm);
            if cf <= f + ARMIJO * step * slope {
                accepted = Some((cand, cm, cf));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cm, cf)) = accepted else {
            log::debug!("logistic line search stalled at iteration {iterations}");
            break;
        };
        theta = cand;
        m = cm;
        f = cf;
        g = p.gradient(&theta, &m);
    }
    let final_gradient = inf_norm(&g);
    let converged = final_gradient <= stop;
    if !converged {
        log::warn!(
            "logistic regression stopped after {iterations} iterations with gradient {final_gradient:.3e} (target {stop:.3e})"
        );
    }
    let bias = theta.pop().unwrap();
    Ok(LinearModel {
        kind: LinearKind::Logistic,
        weights: theta,
        bias,
        converged,
        iterations,
        final_gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{flip, noisy, separable};
    use super::super::TrainedClassifier;
    use super::*;
    use crate::features::balanced_weights;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> FitConfig {
        FitConfig::default()
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let (x, y) = separable();
        let m = fit_logistic(&x, &y, ClassWeights::UNIFORM, &cfg()).unwrap();
        assert!(m.converged);
        let pred = TrainedClassifier::Linear(m).predict(&x).unwrap();
        assert_eq!(pred, y);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..50 {
            let (x, y) = noisy(12, 5, 1000 + case);
            let wts = ClassWeights {
                male: rng.random_range(0.3..2.0),
                female: rng.random_range(0.3..2.0),
            };
            let c = [0.01, 0.1, 1.0, 10.0][case as usize % 4];
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let (gw, gb) = logistic_gradient(&x, &y, wts, c, &w, b);
            let h = 1e-5;
            let f = |w: &[f64], b: f64| logistic_objective(&x, &y, wts, c, w, b);
            for j in 0..=5 {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                let (mut bp, mut bm) = (b, b);
                if j < 5 {
                    wp[j] += h;
                    wm[j] -= h;
                } else {
                    bp += h;
                    bm -= h;
                }
                let fd = (f(&wp, bp) - f(&wm, bm)) / (2.0 * h);
                let an = if j < 5 { gw[j] } else { gb };
                let rel = (fd - an).abs() / an.abs().max(1.0);
                assert!(rel < 1e-5, "case {case} coord {j}: fd {fd} vs analytic {an}");
            }
        }
    }

    #[test]
    fn converged_fit_has_vanishing_gradient() {
        let (x, y) = noisy(200, 15, 3);
        let wts = balanced_weights(&y).unwrap();
        let m = fit_logistic(&x, &y, wts, &cfg()).unwrap();
        assert!(m.converged);
        let (gw, gb) = logistic_gradient(&x, &y, wts, 1.0, &m.weights, m.bias);
        let norm = gw.iter().fold(gb.abs(), |a, v| a.max(v.abs()));
        assert!(norm <= 1e-5, "gradient {norm}");
    }

    #[test]
    fn label_flip_negates_solution() {
        let (x, y) = noisy(150, 10, 5);
        let yf = flip(&y);
        let a = fit_logistic(&x, &y, balanced_weights(&y).unwrap(), &cfg()).unwrap();
        let b = fit_logistic(&x, &yf, balanced_weights(&yf).unwrap(), &cfg()).unwrap();
        for (u, v) in a.weights.iter().zip(&b.weights) {
            assert!((u + v).abs() < 1e-6);
        }
        assert!((a.bias + b.bias).abs() < 1e-6);
    }

    #[test]
    fn objective_below_zero_vector() {
        for seed in 0..5 {
            let (x, y) = noisy(80, 8, seed);
            let m = fit_logistic(&x, &y, ClassWeights::UNIFORM, &cfg()).unwrap();
            let at_fit = logistic_objective(&x, &y, ClassWeights::UNIFORM, 1.0, &m.weights, m.bias);
            let at_zero = logistic_objective(&x, &y, ClassWeights::UNIFORM, 1.0, &[0.0; 8], 0.0);
            assert!(at_fit <= at_zero);
        }
    }

    #[test]
    fn bit_identical_refit() {
        let (x, y) = noisy(100, 12, 8);
        let a = fit_logistic(&x, &y, ClassWeights::UNIFORM, &cfg()).unwrap();
        let b = fit_logistic(&x, &y, ClassWeights::UNIFORM, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let (x, y) = noisy(100, 12, 8);
        let m = fit_logistic(&x, &y, ClassWeights::UNIFORM, &FitConfig { max_iterations: 1, ..cfg() }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = separable();
        assert_eq!(
            fit_logistic(&x, &[Gender::Male; 4], ClassWeights::UNIFORM, &cfg()).unwrap_err(),
            FitError::SingleClass
        );
        assert!(matches!(
            fit_logistic(&x, &y[..3], ClassWeights::UNIFORM, &cfg()),
            Err(FitError::LabelMismatch { .. })
        ));
        let nan = SparseMatrix::from_dense(&[vec![f64::NAN], vec![1.0]]);
        assert_eq!(
            fit_logistic(&nan, &y[1..3], ClassWeights::UNIFORM, &cfg()).unwrap_err(),
            FitError::NonFinite
        );
    }

    #[test]
    fn minority_weight_raises_minority_recall() {
        // 90 males, 10 females on one weak feature: uniform weights call
        // everyone male, balanced weights recover some females.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            let female = i % 10 == 0;
            let v = if female { 0.6 } else { 0.4 } + (i % 7) as f64 * 0.01;
            rows.push(vec![(0u32, v)]);
            y.push(if female { Gender::Female } else { Gender::Male });
        }
        let x = SparseMatrix::from_rows(1, rows);
        let recall = |w: ClassWeights| {
            let m = TrainedClassifier::Linear(fit_logistic(&x, &y, w, &cfg()).unwrap());
            let p = m.predict(&x).unwrap();
            p.iter().zip(&y).filter(|(a, b)| **a == Gender::Female && **b == Gender::Female).count()
        };
        let uniform = recall(ClassWeights::UNIFORM);
        let heavy = recall(ClassWeights { male: 1.0, female: 3.0 });
        let balanced = recall(balanced_weights(&y).unwrap());
        assert!(uniform <= heavy && heavy <= balanced);
        assert!(balanced > uniform);
    }
}
