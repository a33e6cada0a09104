//! Histogram split finding and best-first tree growth.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
        gain: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let x = row[*feature];
                    let go_left = if x.is_nan() { *missing_left } else { x <= *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Gradient/hessian sums plus the number of rows.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stats {
    pub g: f64,
    pub h: f64,
    pub n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn plus(self, o: Stats) -> Stats {
        Stats {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub lambda: f64,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    pub min_child_weight: f64,
}

/// `G^2 / (H + lambda)`
pub fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Newton split gain `0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)]`.
pub fn split_gain(left: Stats, right: Stats, lambda: f64) -> f64 {
    let parent = left.plus(right);
    0.5 * (score(left.g, left.h, lambda) + score(right.g, right.h, lambda)
        - score(parent.g, parent.h, lambda))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitInfo {
    pub feature: usize,
    /// Rows with bin in `1..=bin` go left.
    pub bin: u16,
    pub threshold: f64,
    pub missing_left: bool,
    pub gain: f64,
    pub left: Stats,
    pub right: Stats,
}

pub type Histogram = Vec<Stats>;

pub fn build_histogram(binned: &BinnedMatrix, f: usize, rows: &[u32], grad: &[f64], hess: &[f64]) -> Histogram {
    let mut hist = vec![Stats::default(); binned.n_bins(f)];
    let bins = &binned.bins[f];
    for &r in rows {
        let r = r as usize;
        hist[bins[r] as usize].add(grad[r], hess[r]);
    }
    hist
}

fn admissible(s: Stats, p: &SplitParams) -> bool {
    s.n >= p.min_samples_leaf.max(1) && s.h >= p.min_child_weight
}

/// Best split of one feature's histogram. Candidates are scanned by
/// increasing bin, trying missing-right before missing-left; a later
/// candidate only wins with strictly larger gain. When the node has no
/// missing values the missing direction follows the larger child.
pub fn best_split_for_feature(
    f: usize,
    hist: &[Stats],
    edges: &[f64],
    params: &SplitParams,
) -> Option<SplitInfo> {
    let missing = hist[0];
    let total = hist.iter().fold(Stats::default(), |a, s| a.plus(*s));
    let mut best: Option<SplitInfo> = None;
    let mut left = Stats::default();
    for b in 1..hist.len().saturating_sub(1) {
        left = left.plus(hist[b]);
        if left.n == 0 {
            continue;
        }
        let right_values = total.minus(missing).minus(left);
        if right_values.n == 0 {
            break;
        }
        let options: &[bool] = if missing.n > 0 { &[false, true] } else { &[false] };
        for &missing_left in options {
            let (l, r) = if missing_left {
                (left.plus(missing), right_values)
            } else {
                (left, right_values.plus(missing))
            };
            if !admissible(l, params) || !admissible(r, params) {
                continue;
            }
            let gain = split_gain(l, r, params.lambda);
            if gain > params.min_gain && best.map_or(true, |s| gain > s.gain) {
                let missing_left = if missing.n > 0 { missing_left } else { l.n >= r.n };
                best = Some(SplitInfo {
                    feature: f,
                    bin: b as u16,
                    threshold: edges[b - 1],
                    missing_left,
                    gain,
                    left: l,
                    right: r,
                });
            }
        }
    }
    best
}

/// Best split over `features` (ties keep the earlier feature).
pub fn find_best_split(
    binned: &BinnedMatrix,
    features: &[usize],
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    params: &SplitParams,
) -> Option<SplitInfo> {
    let per_feature: Vec<Option<SplitInfo>> = features
        .par_iter()
        .map(|&f| {
            let hist = build_histogram(binned, f, rows, grad, hess);
            best_split_for_feature(f, &hist, binned.edges(f), params)
        })
        .collect();
    per_feature
        .into_iter()
        .flatten()
        .fold(None, |best: Option<SplitInfo>, s| match best {
            Some(b) if b.gain >= s.gain => Some(b),
            _ => Some(s),
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowParams {
    pub split: SplitParams,
    pub max_leaves: usize,
    /// Multiplier applied to every leaf value `-G / (H + lambda)`.
    pub leaf_scale: f64,
    /// Features sampled per node; `None` uses all features.
    pub features_per_node: Option<usize>,
}

pub struct GrownTree {
    pub tree: Tree,
    /// `(rows, leaf value)` for every leaf.
    pub leaves: Vec<(Vec<u32>, f64)>,
}

struct Pending {
    node: usize,
    rows: Vec<u32>,
    stats: Stats,
    split: Option<SplitInfo>,
}

fn node_stats(rows: &[u32], grad: &[f64], hess: &[f64]) -> Stats {
    let mut s = Stats::default();
    for &r in rows {
        s.add(grad[r as usize], hess[r as usize]);
    }
    s
}

/// Grows one tree best-first: the pending leaf with the largest split gain
/// is expanded until `max_leaves` is reached or no leaf has an admissible
/// split. `rng` is only used when `features_per_node` is set.
pub fn grow_tree<R: Rng>(
    binned: &BinnedMatrix,
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    params: &GrowParams,
    rng: &mut R,
) -> GrownTree {
    let d = binned.n_features();
    let all: Vec<usize> = (0..d).collect();
    let pick = |rng: &mut R| -> Vec<usize> {
        match params.features_per_node {
            Some(m) if m < d => {
                let mut f = sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => all.clone(),
        }
    };
    let leaf_value = |s: Stats| -s.g / (s.h + params.split.lambda) * params.leaf_scale;

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let stats = node_stats(&rows, grad, hess);
    let features = pick(rng);
    let split = find_best_split(binned, &features, &rows, grad, hess, &params.split);
    let root = Pending {
        node: 0,
        rows,
        stats,
        split,
    };
    let mut pending: Vec<Pending> = Vec::new();
    let mut done: Vec<Pending> = Vec::new();
    if root.split.is_some() {
        pending.push(root);
    } else {
        done.push(root);
    }
    let mut n_leaves = 1;

    while n_leaves < params.max_leaves.max(1) {
        // Largest gain first; among equal gains the oldest leaf.
        let Some(idx) = pending
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.split.map(|s| (i, s.gain)))
            .fold(None, |best: Option<(usize, f64)>, (i, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((i, g)),
            })
            .map(|(i, _)| i)
        else {
            break;
        };
        let leaf = pending.remove(idx);
        let s = leaf.split.expect("selected leaf has a split");
        let bins = &binned.bins[s.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| {
            let b = bins[r as usize];
            if b == 0 {
                s.missing_left
            } else {
                b <= s.bin
            }
        });
        let left = nodes.len();
        let right = left + 1;
        nodes[leaf.node] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            missing_left: s.missing_left,
            left,
            right,
            gain: s.gain,
        };
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        n_leaves += 1;
        for (node, child_rows, child_stats) in [(left, left_rows, s.left), (right, right_rows, s.right)] {
            let features = pick(rng);
            let split = if child_rows.len() >= 2 * params.split.min_samples_leaf.max(1) {
                find_best_split(binned, &features, &child_rows, grad, hess, &params.split)
            } else {
                None
            };
            let child = Pending {
                node,
                rows: child_rows,
                stats: child_stats,
                split,
            };
            if child.split.is_some() {
                pending.push(child);
            } else {
                done.push(child);
            }
        }
    }

    let mut leaves = Vec::new();
    for p in done.into_iter().chain(pending) {
        let value = leaf_value(p.stats);
        nodes[p.node] = Node::Leaf { value };
        leaves.push((p.rows, value));
    }
    GrownTree {
        tree: Tree { nodes },
        leaves,
    }
}
