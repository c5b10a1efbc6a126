//! Regression tree grown by exact greedy search over sorted thresholds,
//! shared by the bagging and boosting families.
//!
//! The builder works on second-order statistics: every row carries a
//! gradient g and hessian h, a leaf takes the value -G/(H + lambda), and a
//! split is scored by the usual gain
//!     0.5 * (G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)).
//! With g = -target and h = 1 this reduces to variance-reduction splitting
//! with mean leaves, so one builder serves RF/ET/GBDT/XGB-style alike.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const N_FEATURES: usize = 4;

/// One tree node; `feature < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: i32,
    pub threshold: f64,
    pub left: i32,
    pub right: i32,
    pub value: f64,
    pub sample_count: u32,
    /// Split gain (squared-error reduction scale); 0 for leaves.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature < 0 {
                return n.value;
            }
            i = if row[n.feature as usize] < n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    /// Allocation-free prediction straight from column storage.
    pub fn predict_from_columns(&self, columns: &[Vec<f64>], row: usize) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature < 0 {
                return n.value;
            }
            i = if columns[n.feature as usize][row] < n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature < 0).count()
    }
}

/// Column-major training view with per-feature sort orders, computed once
/// per dataset and shared across all trees of a fit.
pub struct TrainingView<'a> {
    pub columns: &'a [Vec<f64>],
    pub sorted: Vec<Vec<u32>>,
    pub n_rows: usize,
}

impl<'a> TrainingView<'a> {
    pub fn new(columns: &'a [Vec<f64>]) -> Self {
        let n_rows = columns[0].len();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .partial_cmp(&col[b as usize])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        TrainingView {
            columns,
            sorted,
            n_rows,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum hessian sum (row count for squared loss) per child.
    pub min_child_weight: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Features considered per split.
    pub n_split_features: usize,
    /// Extra-Trees mode: thresholds drawn uniformly at random.
    pub random_thresholds: bool,
}

const NO_NODE: u32 = u32::MAX;
const MIN_GAIN: f64 = 1e-12;

struct LevelNode {
    node_id: usize,
    sum_g: f64,
    sum_h: f64,
    features: Vec<usize>,
    feature_mask: u8,
    best_gain: f64,
    best_feature: i32,
    best_threshold: f64,
    // running left-side scan state
    left_g: f64,
    left_h: f64,
    left_count: u32,
    prev_value: f64,
    seen_any: bool,
}

/// Grow one tree. `weights[r] == 0` excludes row r; larger weights replicate
/// bootstrap draws. `rng` drives feature subsets and random thresholds only.
pub fn grow_tree(
    view: &TrainingView,
    grad: &[f64],
    hess: &[f64],
    weights: &[u32],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n = view.n_rows;
    let mut node_of_row: Vec<u32> = weights
        .iter()
        .map(|&w| if w > 0 { 0 } else { NO_NODE })
        .collect();
    let (mut g0, mut h0, mut c0) = (0.0, 0.0, 0u32);
    for r in 0..n {
        let w = weights[r] as f64;
        if w > 0.0 {
            g0 += w * grad[r];
            h0 += w * hess[r];
            c0 += weights[r];
        }
    }
    let mut nodes = vec![TreeNode {
        feature: -1,
        threshold: 0.0,
        left: -1,
        right: -1,
        value: leaf_value(g0, h0, params.lambda),
        sample_count: c0,
        gain: 0.0,
    }];
    let mut level: Vec<(usize, f64, f64, u32)> = vec![(0, g0, h0, c0)];

    for _depth in 0..params.max_depth {
        if level.is_empty() {
            break;
        }
        // slot lookup for this level
        let mut slot_of_node = vec![usize::MAX; nodes.len()];
        let mut work: Vec<LevelNode> = Vec::with_capacity(level.len());
        for (slot, &(node_id, sum_g, sum_h, _count)) in level.iter().enumerate() {
            slot_of_node[node_id] = slot;
            let features = pick_features(params.n_split_features, rng);
            let feature_mask = features.iter().fold(0u8, |m, &f| m | (1 << f));
            work.push(LevelNode {
                node_id,
                sum_g,
                sum_h,
                features,
                feature_mask,
                best_gain: MIN_GAIN,
                best_feature: -1,
                best_threshold: 0.0,
                left_g: 0.0,
                left_h: 0.0,
                left_count: 0,
                prev_value: 0.0,
                seen_any: false,
            });
        }
        if params.random_thresholds {
            scan_random_thresholds(view, grad, hess, weights, &node_of_row, &slot_of_node, &mut work, params, rng);
        } else {
            scan_exact_thresholds(view, grad, hess, weights, &node_of_row, &slot_of_node, &mut work, params);
        }
        // materialize the chosen splits
        let mut next_level: Vec<(usize, f64, f64, u32)> = Vec::new();
        let mut child_of_slot: Vec<Option<(u32, u32)>> = vec![None; work.len()];
        for (slot, w) in work.iter().enumerate() {
            if w.best_feature < 0 {
                continue;
            }
            let left_id = nodes.len();
            let right_id = nodes.len() + 1;
            let parent = &mut nodes[w.node_id];
            parent.feature = w.best_feature;
            parent.threshold = w.best_threshold;
            parent.left = left_id as i32;
            parent.right = right_id as i32;
            parent.gain = w.best_gain;
            // children stats are recomputed in the partition pass below
            nodes.push(blank_leaf());
            nodes.push(blank_leaf());
            child_of_slot[slot] = Some((left_id as u32, right_id as u32));
            next_level.push((left_id, 0.0, 0.0, 0));
            next_level.push((right_id, 0.0, 0.0, 0));
        }
        if next_level.is_empty() {
            break;
        }
        // route rows to children and accumulate child stats
        let mut stat_of_node: Vec<(f64, f64, u32)> = vec![(0.0, 0.0, 0); nodes.len()];
        for r in 0..n {
            let nid = node_of_row[r];
            if nid == NO_NODE {
                continue;
            }
            let slot = slot_of_node.get(nid as usize).copied().unwrap_or(usize::MAX);
            if slot == usize::MAX {
                continue;
            }
            if let Some((left_id, right_id)) = child_of_slot[slot] {
                let node = &nodes[work[slot].node_id];
                let go_left =
                    view.columns[node.feature as usize][r] < node.threshold;
                let child = if go_left { left_id } else { right_id };
                node_of_row[r] = child;
                let w = weights[r] as f64;
                let s = &mut stat_of_node[child as usize];
                s.0 += w * grad[r];
                s.1 += w * hess[r];
                s.2 += weights[r];
            } else {
                node_of_row[r] = NO_NODE; // finished leaf
            }
        }
        for entry in &mut next_level {
            let (g, h, c) = stat_of_node[entry.0];
            entry.1 = g;
            entry.2 = h;
            entry.3 = c;
            let node = &mut nodes[entry.0];
            node.value = leaf_value(g, h, params.lambda);
            node.sample_count = c;
        }
        level = next_level;
    }
    Tree { nodes }
}

fn blank_leaf() -> TreeNode {
    TreeNode {
        feature: -1,
        threshold: 0.0,
        left: -1,
        right: -1,
        value: 0.0,
        sample_count: 0,
        gain: 0.0,
    }
}

fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

/// Ascending feature subset without replacement.
fn pick_features(k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = k.clamp(1, N_FEATURES);
    if k == N_FEATURES {
        return (0..N_FEATURES).collect();
    }
    let mut pool: Vec<usize> = (0..N_FEATURES).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let i = rng.random_range(0..pool.len());
        picked.push(pool.swap_remove(i));
    }
    picked.sort_unstable();
    picked
}

#[allow(clippy::too_many_arguments)]
fn scan_exact_thresholds(
    view: &TrainingView,
    grad: &[f64],
    hess: &[f64],
    weights: &[u32],
    node_of_row: &[u32],
    slot_of_node: &[usize],
    work: &mut [LevelNode],
    params: &TreeParams,
) {
    for feature in 0..N_FEATURES {
        // feature subsets are per node; skip nodes that did not draw it
        for w in work.iter_mut() {
            w.left_g = 0.0;
            w.left_h = 0.0;
            w.left_count = 0;
            w.prev_value = f64::NAN;
            w.seen_any = false;
        }
        let col = &view.columns[feature];
        for &r32 in &view.sorted[feature] {
            let r = r32 as usize;
            let nid = node_of_row[r];
            if nid == NO_NODE {
                continue;
            }
            let slot = slot_of_node.get(nid as usize).copied().unwrap_or(usize::MAX);
            if slot == usize::MAX {
                continue;
            }
            let node = &mut work[slot];
            if node.feature_mask & (1 << feature) == 0 {
                continue;
            }
            let x = col[r];
            if node.seen_any && x > node.prev_value && node.left_count > 0 {
                let hl = node.left_h;
                let hr = node.sum_h - hl;
                if hl >= params.min_child_weight && hr >= params.min_child_weight {
                    let gl = node.left_g;
                    let gr = node.sum_g - gl;
                    let gain = split_gain(gl, hl, gr, hr, params.lambda);
                    // strict > keeps the lowest feature index / threshold on ties
                    if gain > node.best_gain {
                        node.best_gain = gain;
                        node.best_feature = feature as i32;
                        node.best_threshold = 0.5 * (node.prev_value + x);
                    }
                }
            }
            let wgt = weights[r] as f64;
            node.left_g += wgt * grad[r];
            node.left_h += wgt * hess[r];
            node.left_count += weights[r];
            node.prev_value = x;
            node.seen_any = true;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_random_thresholds(
    view: &TrainingView,
    grad: &[f64],
    hess: &[f64],
    weights: &[u32],
    node_of_row: &[u32],
    slot_of_node: &[usize],
    work: &mut [LevelNode],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) {
    let n = view.n_rows;
    let slots = work.len();
    // node x feature value ranges
    let mut mins = vec![f64::INFINITY; slots * N_FEATURES];
    let mut maxs = vec![f64::NEG_INFINITY; slots * N_FEATURES];
    for r in 0..n {
        let nid = node_of_row[r];
        if nid == NO_NODE {
            continue;
        }
        let slot = slot_of_node.get(nid as usize).copied().unwrap_or(usize::MAX);
        if slot == usize::MAX {
            continue;
        }
        for f in 0..N_FEATURES {
            let x = view.columns[f][r];
            let i = slot * N_FEATURES + f;
            mins[i] = mins[i].min(x);
            maxs[i] = maxs[i].max(x);
        }
    }
    // one random threshold per (node, drawn feature), in deterministic order
    let mut thresholds = vec![f64::NAN; slots * N_FEATURES];
    for (slot, w) in work.iter().enumerate() {
        for &f in &w.features {
            let i = slot * N_FEATURES + f;
            if maxs[i] > mins[i] {
                thresholds[i] = rng.random_range(mins[i]..maxs[i]);
            }
        }
    }
    // accumulate left stats per candidate
    let mut left = vec![(0.0f64, 0.0f64); slots * N_FEATURES];
    for r in 0..n {
        let nid = node_of_row[r];
        if nid == NO_NODE {
            continue;
        }
        let slot = slot_of_node.get(nid as usize).copied().unwrap_or(usize::MAX);
        if slot == usize::MAX {
            continue;
        }
        let wgt = weights[r] as f64;
        for f in 0..N_FEATURES {
            let i = slot * N_FEATURES + f;
            let thr = thresholds[i];
            if !thr.is_nan() && view.columns[f][r] < thr {
                left[i].0 += wgt * grad[r];
                left[i].1 += wgt * hess[r];
            }
        }
    }
    for (slot, w) in work.iter_mut().enumerate() {
        for f in 0..N_FEATURES {
            let i = slot * N_FEATURES + f;
            let thr = thresholds[i];
            if thr.is_nan() {
                continue;
            }
            let (gl, hl) = left[i];
            let (gr, hr) = (w.sum_g - gl, w.sum_h - hl);
            if hl < params.min_child_weight || hr < params.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, params.lambda);
            if gain > w.best_gain {
                w.best_gain = gain;
                w.best_feature = f as i32;
                w.best_threshold = thr;
            }
        }
    }
}
