//! Isolation Forest.
//!
//! Each tree is grown on a subsample drawn without replacement from its own
//! child RNG stream (`root.split(tree_index)`), so the forest is identical no
//! matter how many worker threads build it.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{check_dim, Rng};

const EULER_GAMMA: f64 = 0.577_215_664_9;

#[derive(Debug, Clone, PartialEq)]
pub struct IForestConfig {
    pub n_trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IForestConfig {
    fn default() -> Self {
        IForestConfig {
            n_trees: 200,
            subsample: 256,
            seed: 0,
        }
    }
}

impl IForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.subsample < 2 {
            return Err(Error::InvalidConfig("subsample must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Points with `x[dim] < value` go left.
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// Flattened tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
    pub height_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IForestModel {
    pub dim: usize,
    pub psi: usize,
    pub c_psi: f64,
    pub seed: u64,
    pub trees: Vec<IsolationTree>,
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// nodes: `2 H(n-1) - 2 (n-1) / n`, with `H(i) ≈ ln i + γ`.
pub fn avg_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

fn height_limit(psi: usize) -> usize {
    // ceil(log2 psi) for psi >= 2
    (usize::BITS - (psi - 1).leading_zeros()) as usize
}

struct TreeBuilder<'a> {
    data: ArrayView2<'a, f64>,
    rng: Rng,
    nodes: Vec<Node>,
    height_limit: usize,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= self.height_limit || idx.len() <= 1 {
            return id;
        }
        let d = self.data.ncols();
        // constant features are redrawn, at most d attempts
        let mut chosen = None;
        for _ in 0..d {
            let dim = self.rng.below(d);
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.data[[i, dim]];
                (lo.min(v), hi.max(v))
            });
            if hi > lo {
                chosen = Some((dim, lo, hi));
                break;
            }
        }
        let Some((dim, lo, hi)) = chosen else {
            return id;
        };
        let value = loop {
            let v = lo + self.rng.uniform() * (hi - lo);
            // both sides must be non-empty: lo goes left, hi goes right
            if v > lo && v <= hi {
                break v;
            }
        };
        let mut mid = 0;
        for k in 0..idx.len() {
            if self.data[[idx[k], dim]] < value {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }
}

fn build_tree(data: &ArrayView2<f64>, psi: usize, mut rng: Rng) -> IsolationTree {
    let n = data.nrows();
    // partial Fisher-Yates: first psi entries form the sample
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..psi {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(psi);
    let limit = height_limit(psi);
    let mut builder = TreeBuilder {
        data: data.view(),
        rng,
        nodes: Vec::new(),
        height_limit: limit,
    };
    builder.grow(&mut idx, 0);
    IsolationTree {
        nodes: builder.nodes,
        height_limit: limit,
    }
}

/// Grow `n_trees` trees in parallel on the current rayon pool.
pub fn iforest_train(data: ArrayView2<f64>, config: &IForestConfig) -> Result<IForestModel> {
    config.validate()?;
    let (n, d) = data.dim();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "isolation forest needs at least 2 points, got {n}"
        )));
    }
    if d == 0 {
        return Err(Error::DegenerateData("zero-dimensional data".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite training data".into()));
    }
    let psi = config.subsample.min(n);
    let root = Rng::new(config.seed);
    let trees: Vec<IsolationTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| build_tree(&data, psi, root.split(t as u64)))
        .collect();
    Ok(IForestModel {
        dim: d,
        psi,
        c_psi: avg_path_length(psi),
        seed: config.seed,
        trees,
    })
}

impl IsolationTree {
    /// Edges to the leaf reached by `x`, plus `c(size)` for the unresolved points there.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match self.nodes[node] {
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    node = if x[dim] < value { left } else { right };
                    depth += 1;
                }
                Node::Leaf { size } => return depth as f64 + avg_path_length(size),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

impl IForestModel {
    pub fn mean_path_length(&self, x: ArrayView1<f64>) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let x = x.to_vec();
        let total: f64 = self.trees.iter().map(|t| t.path_length(&x)).sum();
        Ok(total / self.trees.len() as f64)
    }

    /// `s = 2^(-E[h(x)] / c(ψ))`; higher is more anomalous.
    pub fn anomaly_score(&self, x: ArrayView1<f64>) -> Result<f64> {
        let h = self.mean_path_length(x)?;
        Ok(2f64.powf(-h / self.c_psi))
    }

    /// `0.5 - s`; non-negative means inlier, higher is more target-like.
    pub fn decision(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(0.5 - self.anomaly_score(x)?)
    }

    pub fn decision_rows(&self, data: ArrayView2<f64>) -> Result<Vec<f64>> {
        crate::numcore::par_rows(data, |r| self.decision(r))
    }
}
