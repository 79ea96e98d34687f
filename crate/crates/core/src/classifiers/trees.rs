//! Gradient-boosted regression trees on the logistic loss with second-order
//! leaf values `−G / (H + λ)`. Trees grow level by level with exact greedy
//! splits; a row goes left when its feature value is below the threshold.

use serde::{Deserialize, Serialize};

use super::{check_dims, check_training, sigmoid, softplus, FitConfig, FitError};
use crate::corpus::Gender;
use crate::features::{ClassWeights, SortedColumns, SparseMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn output(&self, x: &SparseMatrix, row: usize) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(row, *feature as usize) < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub n_features: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub trees: Vec<Tree>,
    /// Weighted mean training log-loss before the first tree and after each.
    pub training_loss: Vec<f64>,
}

impl BoostedTrees {
    pub fn raw_scores(&self, x: &SparseMatrix) -> Result<Vec<f64>, FitError> {
        check_dims(self.n_features, x)?;
        Ok((0..x.n_rows())
            .map(|i| {
                self.base_score
                    + self
                        .trees
                        .iter()
                        .map(|t| self.learning_rate * t.output(x, i))
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn probabilities(&self, x: &SparseMatrix) -> Result<Vec<f64>, FitError> {
        Ok(self.raw_scores(x)?.into_iter().map(sigmoid).collect())
    }
}

struct Candidate {
    gain: f64,
    feature: u32,
    threshold: f64,
}

/// Per-node gradient sums at the current level.
#[derive(Clone, Copy, Default)]
struct NodeStats {
    g: f64,
    h: f64,
    n: usize,
}

struct Growth<'a> {
    cols: &'a SortedColumns,
    grad: &'a [f64],
    hess: &'a [f64],
    lambda: f64,
    min_child_weight: f64,
}

impl Growth<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.lambda)
    }

    /// Best split for each active slot; `slot[r]` is the slot of row `r`.
    fn best_splits(&self, slot: &[i32], stats: &[NodeStats]) -> Vec<Option<Candidate>> {
        let k = stats.len();
        let mut best: Vec<Option<Candidate>> = (0..k).map(|_| None).collect();
        let mut nz = vec![NodeStats::default(); k];
        let mut left = vec![NodeStats::default(); k];
        let mut prev: Vec<Option<f64>> = vec![None; k];
        let mut zero_done = vec![false; k];
        let mut touched = Vec::new();
        let mut seen = vec![false; k];
        for j in 0..self.cols.n_cols() {
            let (rows, vals) = self.cols.column(j);
            if rows.is_empty() {
                continue;
            }
            for &r in rows {
                let s = slot[r as usize];
                if s < 0 {
                    continue;
                }
                let s = s as usize;
                nz[s].g += self.grad[r as usize];
                nz[s].h += self.hess[r as usize];
                nz[s].n += 1;
                if !seen[s] {
                    seen[s] = true;
                    touched.push(s);
                }
            }
            for &s in &touched {
                left[s] = NodeStats::default();
                prev[s] = None;
                zero_done[s] = nz[s].n == stats[s].n;
            }
            let consider = |s: usize, l: NodeStats, p: Option<f64>, next: f64, best: &mut Vec<Option<Candidate>>| {
                let Some(p) = p else { return };
                if next <= p {
                    return;
                }
                let (gr, hr) = (stats[s].g - l.g, stats[s].h - l.h);
                if l.h < self.min_child_weight || hr < self.min_child_weight {
                    return;
                }
                let gain = 0.5
                    * (self.score(l.g, l.h) + self.score(gr, hr) - self.score(stats[s].g, stats[s].h));
                if gain > 0.0 && best[s].as_ref().is_none_or(|b| gain > b.gain) {
                    best[s] = Some(Candidate {
                        gain,
                        feature: j as u32,
                        threshold: 0.5 * (p + next),
                    });
                }
            };
            for (&r, &v) in rows.iter().zip(vals) {
                let s = slot[r as usize];
                if s < 0 {
                    continue;
                }
                let s = s as usize;
                if !zero_done[s] && v > 0.0 {
                    consider(s, left[s], prev[s], 0.0, &mut best);
                    left[s].g += stats[s].g - nz[s].g;
                    left[s].h += stats[s].h - nz[s].h;
                    prev[s] = Some(0.0);
                    zero_done[s] = true;
                }
                consider(s, left[s], prev[s], v, &mut best);
                left[s].g += self.grad[r as usize];
                left[s].h += self.hess[r as usize];
                prev[s] = Some(v);
            }
            for &s in &touched {
                if !zero_done[s] {
                    consider(s, left[s], prev[s], 0.0, &mut best);
                }
                nz[s] = NodeStats::default();
                seen[s] = false;
            }
            touched.clear();
        }
        best
    }

    fn leaf(&self, st: NodeStats) -> TreeNode {
        TreeNode::Leaf {
            value: -st.g / (st.h + self.lambda),
        }
    }

    fn grow(&self, x: &SparseMatrix, max_depth: usize) -> Tree {
        let n = x.n_rows();
        let mut slot = vec![0i32; n];
        let mut level_nodes = vec![0usize];
        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut stats = vec![NodeStats {
            g: self.grad.iter().sum(),
            h: self.hess.iter().sum(),
            n,
        }];
        for depth in 0..=max_depth {
            let splits = if depth < max_depth {
                self.best_splits(&slot, &stats)
            } else {
                (0..stats.len()).map(|_| None).collect()
            };
            let mut next_nodes = Vec::new();
            let mut next_stats = Vec::new();
            // Slot of each current node's left child at the next level.
            let mut child_slot = vec![-1i32; stats.len()];
            for (s, cand) in splits.into_iter().enumerate() {
                let id = level_nodes[s];
                match cand {
                    None => nodes[id] = self.leaf(stats[s]),
                    Some(c) => {
                        let left = nodes.len();
                        nodes.push(TreeNode::Leaf { value: 0.0 });
                        nodes.push(TreeNode::Leaf { value: 0.0 });
                        nodes[id] = TreeNode::Split {
                            feature: c.feature,
                            threshold: c.threshold,
                            left: left as u32,
                            right: left as u32 + 1,
                        };
                        child_slot[s] = next_nodes.len() as i32;
                        next_nodes.push(left);
                        next_nodes.push(left + 1);
                        next_stats.push(NodeStats::default());
                        next_stats.push(NodeStats::default());
                    }
                }
            }
            if next_nodes.is_empty() {
                break;
            }
            for r in 0..n {
                let s = slot[r];
                if s < 0 {
                    continue;
                }
                let base = child_slot[s as usize];
                if base < 0 {
                    slot[r] = -1;
                    continue;
                }
                let TreeNode::Split { feature, threshold, .. } = nodes[level_nodes[s as usize]] else {
                    unreachable!()
                };
                let ns = if x.get(r, feature as usize) < threshold { base } else { base + 1 };
                slot[r] = ns;
                let st = &mut next_stats[ns as usize];
                st.g += self.grad[r];
                st.h += self.hess[r];
                st.n += 1;
            }
            level_nodes = next_nodes;
            stats = next_stats;
        }
        Tree { nodes }
    }
}

fn weighted_log_loss(raw: &[f64], y: &[f64], s: &[f64]) -> f64 {
    let total: f64 = s.iter().sum();
    raw.iter()
        .zip(y)
        .zip(s)
        .map(|((&f, &yi), &si)| si * softplus(if yi > 0.0 { -f } else { f }))
        .sum::<f64>()
        / total
}

/// `config.rounds` trees of depth at most `config.max_depth`. The base score
/// is the log-odds of the class-weighted male share; zero rounds is allowed
/// and predicts that prior for every row.
pub fn fit_boosted_trees(
    x: &SparseMatrix,
    labels: &[Gender],
    weights: ClassWeights,
    config: &FitConfig,
) -> Result<BoostedTrees, FitError> {
    check_training(x, labels)?;
    config.validate()?;
    let y: Vec<f64> = labels.iter().map(|g| if g.is_male() { 1.0 } else { 0.0 }).collect();
    let s: Vec<f64> = labels.iter().map(|&g| weights.of(g)).collect();
    let male_mass: f64 = y.iter().zip(&s).map(|(a, b)| a * b).sum();
    let total: f64 = s.iter().sum();
    let prior = male_mass / total;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut raw = vec![base_score; x.n_rows()];
    let signs: Vec<f64> = y.iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }).collect();
    let mut training_loss = vec![weighted_log_loss(&raw, &signs, &s)];
    let cols = SortedColumns::new(x);
    let mut trees = Vec::with_capacity(config.rounds);
    let mut grad = vec![0.0; x.n_rows()];
    let mut hess = vec![0.0; x.n_rows()];
    for _ in 0..config.rounds {
        for i in 0..raw.len() {
            let p = sigmoid(raw[i]);
            grad[i] = s[i] * (p - y[i]);
            hess[i] = s[i] * p * (1.0 - p);
        }
        let growth = Growth {
            cols: &cols,
            grad: &grad,
            hess: &hess,
            lambda: config.lambda,
            min_child_weight: config.min_child_weight,
        };
        let tree = growth.grow(x, config.max_depth);
        for (i, r) in raw.iter_mut().enumerate() {
            *r += config.learning_rate * tree.output(x, i);
        }
        training_loss.push(weighted_log_loss(&raw, &signs, &s));
        trees.push(tree);
    }
    Ok(BoostedTrees {
        n_features: x.n_cols(),
        base_score,
        learning_rate: config.learning_rate,
        max_depth: config.max_depth,
        trees,
        training_loss,
    })
}
