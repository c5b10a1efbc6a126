//! Bagged (random forest / extra-trees) and boosted (first-order GBDT /
//! second-order "XGB-style") ensembles on top of the shared tree builder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Tree, TrainingView, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Mean of tree outputs (bagging).
    Average,
    /// base_score + shrinkage * sum of tree outputs (boosting).
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreesPayload {
    pub base_score: f64,
    pub shrinkage: f64,
    pub aggregation: Aggregation,
    pub trees: Vec<Tree>,
}

impl TreesPayload {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.aggregation {
            Aggregation::Average => {
                if self.trees.is_empty() {
                    self.base_score
                } else {
                    let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
                    sum / self.trees.len() as f64
                }
            }
            Aggregation::Sum => {
                let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
                self.base_score + self.shrinkage * sum
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub n_split_features: usize,
    /// true = bootstrap resampling (RF); false = full sample (ET).
    pub bootstrap: bool,
    /// true = uniform random thresholds (ET); false = exact greedy (RF).
    pub random_thresholds: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BoostParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    /// L2 penalty on leaf values (0 for the first-order GBDT).
    pub lambda: f64,
    /// Per-round Bernoulli row subsampling probability.
    pub subsample: f64,
}

pub fn fit_forest(columns: &[Vec<f64>], y: &[f64], p: &ForestParams, seed: u64) -> Result<TreesPayload> {
    if p.n_trees == 0 || p.n_trees > 2000 {
        return Err(Error::Spec(format!("forest n_trees must be in 1..=2000, got {}", p.n_trees)));
    }
    let n = y.len();
    let view = TrainingView::new(columns);
    let tp = TreeParams {
        max_depth: p.max_depth,
        min_child_weight: p.min_child_weight,
        lambda: 0.0,
        n_split_features: p.n_split_features,
        random_thresholds: p.random_thresholds,
    };
    let grad: Vec<f64> = y.iter().map(|v| -v).collect();
    let hess = vec![1.0; n];
    let trees: Vec<Tree> = (0..p.n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
            let weights: Vec<u32> = if p.bootstrap {
                let mut w = vec![0u32; n];
                for _ in 0..n {
                    w[rng.random_range(0..n)] += 1;
                }
                w
            } else {
                vec![1u32; n]
            };
            grow_tree(&view, &grad, &hess, &weights, &tp, &mut rng)
        })
        .collect();
    Ok(TreesPayload {
        base_score: mean(y),
        shrinkage: 1.0,
        aggregation: Aggregation::Average,
        trees,
    })
}

const EARLY_STOP_PATIENCE: usize = 50;

/// Gradient boosting with squared loss. When a validation set is supplied,
/// training stops after `EARLY_STOP_PATIENCE` rounds without improvement and
/// the ensemble is truncated to the best round.
pub fn fit_boosted(
    columns: &[Vec<f64>],
    y: &[f64],
    p: &BoostParams,
    validation: Option<(&[Vec<f64>], &[f64])>,
    seed: u64,
) -> Result<TreesPayload> {
    if p.n_trees > 2000 {
        return Err(Error::Spec(format!("n_trees must be <= 2000, got {}", p.n_trees)));
    }
    if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
        return Err(Error::Spec(format!("learning_rate must be in (0, 1], got {}", p.learning_rate)));
    }
    if !(p.subsample > 0.0 && p.subsample <= 1.0) {
        return Err(Error::Spec(format!("subsample must be in (0, 1], got {}", p.subsample)));
    }
    let n = y.len();
    let view = TrainingView::new(columns);
    let tp = TreeParams {
        max_depth: p.max_depth,
        min_child_weight: p.min_child_weight,
        lambda: p.lambda,
        n_split_features: super::tree::N_FEATURES,
        random_thresholds: false,
    };
    let base = mean(y);
    let mut pred = vec![base; n];
    let hess = vec![1.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees: Vec<Tree> = Vec::with_capacity(p.n_trees);

    let mut val_pred: Vec<f64> = validation
        .map(|(_, vy)| vec![base; vy.len()])
        .unwrap_or_default();
    let mut best_rmse = f64::INFINITY;
    let mut best_round = 0usize;

    for round in 0..p.n_trees {
        let grad: Vec<f64> = pred.iter().zip(y).map(|(&f, &t)| f - t).collect();
        let weights: Vec<u32> = if p.subsample < 1.0 {
            (0..n)
                .map(|_| u32::from(rng.random::<f64>() < p.subsample))
                .collect()
        } else {
            vec![1u32; n]
        };
        if weights.iter().all(|&w| w == 0) {
            continue; // degenerate draw at tiny subsample; skip the round
        }
        let tree = grow_tree(&view, &grad, &hess, &weights, &tp, &mut rng);
        for (i, pi) in pred.iter_mut().enumerate() {
            *pi += p.learning_rate * tree.predict_from_columns(columns, i);
        }
        if let Some((vc, vy)) = validation {
            for (i, vp) in val_pred.iter_mut().enumerate() {
                *vp += p.learning_rate * tree.predict_from_columns(vc, i);
            }
            let rmse = rmse(vy, &val_pred);
            trees.push(tree);
            if rmse < best_rmse - 1e-12 {
                best_rmse = rmse;
                best_round = round + 1;
            } else if round + 1 - best_round >= EARLY_STOP_PATIENCE {
                trees.truncate(best_round);
                break;
            }
        } else {
            trees.push(tree);
        }
    }
    if validation.is_some() && trees.len() > best_round {
        trees.truncate(best_round);
    }
    Ok(TreesPayload {
        base_score: base,
        shrinkage: p.learning_rate,
        aggregation: Aggregation::Sum,
        trees,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rmse(y: &[f64], pred: &[f64]) -> f64 {
    let mse = y
        .iter()
        .zip(pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    mse.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_problem(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let columns: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                (columns[0][i] * 1.3).sin() + columns[1][i] * columns[1][i]
                    - 0.5 * columns[2][i] * columns[3][i]
            })
            .collect();
        (columns, y)
    }

    fn train_rmse(m: &TreesPayload, columns: &[Vec<f64>], y: &[f64]) -> f64 {
        let pred: Vec<f64> = (0..y.len())
            .map(|i| {
                let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
                m.predict_row(&row)
            })
            .collect();
        rmse(y, &pred)
    }

    #[test]
    fn boosting_rmse_nonincreasing_in_rounds() {
        let (columns, y) = toy_problem(1, 200);
        let mut prev = f64::INFINITY;
        for n_trees in [5, 20, 80, 200] {
            let p = BoostParams {
                n_trees,
                learning_rate: 0.2,
                max_depth: 3,
                min_child_weight: 1.0,
                lambda: 0.0,
                subsample: 1.0,
            };
            let m = fit_boosted(&columns, &y, &p, None, 7).unwrap();
            let r = train_rmse(&m, &columns, &y);
            assert!(r <= prev + 1e-12, "{n_trees} trees: {r} > {prev}");
            prev = r;
        }
    }

    #[test]
    fn xgb_style_interpolates_noiseless_data() {
        let (columns, y) = toy_problem(2, 100);
        let p = BoostParams {
            n_trees: 200,
            learning_rate: 1.0,
            max_depth: 6,
            min_child_weight: 1e-3,
            lambda: 0.0,
            subsample: 1.0,
        };
        let m = fit_boosted(&columns, &y, &p, None, 3).unwrap();
        assert!(train_rmse(&m, &columns, &y) <= 1e-3);
    }

    #[test]
    fn forest_predictions_stay_in_target_range() {
        let (columns, y) = toy_problem(3, 150);
        let p = ForestParams {
            n_trees: 50,
            max_depth: 8,
            min_child_weight: 1.0,
            n_split_features: 2,
            bootstrap: true,
            random_thresholds: false,
        };
        let m = fit_forest(&columns, &y, &p, 11).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..y.len() {
            let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            let pred = m.predict_row(&row);
            assert!(pred >= lo - 1e-12 && pred <= hi + 1e-12);
        }
    }

    #[test]
    fn fits_are_seed_deterministic() {
        let (columns, y) = toy_problem(4, 120);
        let fp = ForestParams {
            n_trees: 30,
            max_depth: 6,
            min_child_weight: 1.0,
            n_split_features: 3,
            bootstrap: false,
            random_thresholds: true,
        };
        let a = fit_forest(&columns, &y, &fp, 42).unwrap();
        let b = fit_forest(&columns, &y, &fp, 42).unwrap();
        assert_eq!(a, b);
        let bp = BoostParams {
            n_trees: 40,
            learning_rate: 0.3,
            max_depth: 4,
            min_child_weight: 0.5,
            lambda: 2.0,
            subsample: 0.7,
        };
        let c = fit_boosted(&columns, &y, &bp, None, 42).unwrap();
        let d = fit_boosted(&columns, &y, &bp, None, 42).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn early_stopping_truncates_to_best_round() {
        let (columns, y) = toy_problem(5, 200);
        let (vc, vy) = toy_problem(6, 80);
        let p = BoostParams {
            n_trees: 2000,
            learning_rate: 0.5,
            max_depth: 6,
            min_child_weight: 1e-3,
            lambda: 0.0,
            subsample: 1.0,
        };
        let m = fit_boosted(&columns, &y, &p, Some((&vc, &vy)), 8).unwrap();
        assert!(m.trees.len() < 2000, "early stopping never fired");
    }

    #[test]
    fn zero_tree_boost_predicts_base_score() {
        let (columns, y) = toy_problem(7, 50);
        let p = BoostParams {
            n_trees: 0,
            learning_rate: 0.1,
            max_depth: 3,
            min_child_weight: 1.0,
            lambda: 0.0,
            subsample: 1.0,
        };
        let m = fit_boosted(&columns, &y, &p, None, 1).unwrap();
        let base = y.iter().sum::<f64>() / y.len() as f64;
        assert!((m.predict_row(&[0.0; 4]) - base).abs() < 1e-12);
    }
}
