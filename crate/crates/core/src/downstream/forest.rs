//! Random decision forest with Gini splits for BUY/SELL classification.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `⌈√F⌉`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// `[P(SELL), P(BUY)]`
        proba: [f64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Samples with `x[feature] <= threshold`.
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaves(&self, out: &mut Vec<[f64; 2]>) {
        match self {
            Node::Leaf { proba } => out.push(*proba),
            Node::Split { left, right, .. } => {
                left.leaves(out);
                right.leaves(out);
            }
        }
    }

    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf { proba } => proba[1],
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Node>,
    pub num_features: usize,
    pub config: ForestConfig,
}

impl ForestModel {
    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Node::depth).max().unwrap_or(0)
    }

    /// Leaf `[P(SELL), P(BUY)]` pairs of every tree.
    pub fn leaf_probabilities(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        for t in &self.trees {
            t.leaves(&mut out);
        }
        out
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    cfg: &'a ForestConfig,
    mtry: usize,
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let p = pos as f64 / idx.len() as f64;
        Node::Leaf { proba: [1.0 - p, p] }
    }

    fn grow(&self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if depth >= self.cfg.max_depth || pos == 0 || pos == n || n < 2 * self.cfg.min_leaf {
            return self.leaf(idx);
        }
        let parent = gini(pos, n);
        let f = self.x.cols();
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in sample(rng, f, self.mtry.min(f)) {
            idx.sort_by(|&a, &b| self.x[(a, feature)].total_cmp(&self.x[(b, feature)]));
            let mut left_pos = 0;
            for split in 1..n {
                if self.y[idx[split - 1]] {
                    left_pos += 1;
                }
                let lo = self.x[(idx[split - 1], feature)];
                let hi = self.x[(idx[split], feature)];
                if lo == hi || split < self.cfg.min_leaf || n - split < self.cfg.min_leaf {
                    continue;
                }
                let weighted = (split as f64 * gini(left_pos, split)
                    + (n - split) as f64 * gini(pos - left_pos, n - split))
                    / n as f64;
                let gain = parent - weighted;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = lo + 0.5 * (hi - lo);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((gain, feature, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(idx);
        };
        let mut left: Vec<usize> = idx.iter().copied().filter(|&i| self.x[(i, feature)] <= threshold).collect();
        let mut right: Vec<usize> = idx.iter().copied().filter(|&i| self.x[(i, feature)] > threshold).collect();
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(&mut left, depth + 1, rng)),
            right: Box::new(self.grow(&mut right, depth + 1, rng)),
        }
    }
}

/// Per-tree seed, independent of how trees are scheduled.
fn tree_seed(master: u64, tree: usize) -> u64 {
    master ^ (tree as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `labels[i]` is true for BUY.
pub fn forest_fit(z: &Matrix, labels: &[bool], cfg: &ForestConfig) -> Result<ForestModel> {
    let n = z.rows();
    if n != labels.len() {
        return Err(Error::dim(format!("{n} feature rows for {} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::Data("forest needs at least two samples".into()));
    }
    let buys = labels.iter().filter(|&&b| b).count();
    if buys == 0 || buys == n {
        return Err(Error::SingleClass(format!(
            "all {n} training labels are {}",
            if buys == 0 { "SELL" } else { "BUY" }
        )));
    }
    if cfg.num_trees == 0 || cfg.min_leaf == 0 {
        return Err(Error::Config("forest needs at least one tree and min_leaf >= 1".into()));
    }
    let f = z.cols();
    let mtry = cfg
        .features_per_split
        .unwrap_or_else(|| (f as f64).sqrt().ceil() as usize)
        .clamp(1, f.max(1));
    let builder = Builder {
        x: z,
        y: labels,
        cfg,
        mtry,
    };
    let trees = (0..cfg.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(cfg.seed, t));
            let mut idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            builder.grow(&mut idx, 0, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        num_features: f,
        config: *cfg,
    })
}

/// Mean BUY probability across trees.
pub fn forest_predict_proba(model: &ForestModel, z: &Matrix) -> Result<Vec<f64>> {
    if z.cols() != model.num_features {
        return Err(Error::dim(format!(
            "forest expects {} features, got {}",
            model.num_features,
            z.cols()
        )));
    }
    let k = model.trees.len() as f64;
    Ok((0..z.rows())
        .map(|i| {
            let x = z.row(i);
            model.trees.iter().map(|t| t.predict(x)).sum::<f64>() / k
        })
        .collect())
}
