//! Exact Shapley attribution for the 4-feature models by exhaustive subset
//! enumeration with an interventional (background-marginalized) value
//! function, plus split-gain feature importance for tree families.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Payload, TrainedModel, FeatureMatrix, FEATURE_NAMES};

const N: usize = FEATURE_NAMES.len();
const N_SUBSETS: usize = 1 << N;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapReport {
    /// v(empty set): mean model output over the background.
    pub base_value: f64,
    /// One attribution vector per explained row, feature order fixed.
    pub phi: Vec<[f64; N]>,
    pub predictions: Vec<f64>,
    pub background_size: usize,
}

/// Seeded background sample of up to `n` rows (all rows when fewer exist).
pub fn sample_background(x: &FeatureMatrix, n: usize, seed: u64) -> Result<FeatureMatrix> {
    if n == 0 {
        return Err(Error::Spec("background size must be >= 1".into()));
    }
    let mut idx: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx.truncate(n);
    idx.sort_unstable(); // stable artifact ordering
    let columns = x
        .columns
        .iter()
        .map(|col| idx.iter().map(|&i| col[i]).collect())
        .collect();
    FeatureMatrix::new(columns)
}

/// Shapley weight |S|! (N-|S|-1)! / N! for a subset of size s.
fn subset_weight(s: usize) -> f64 {
    fn fact(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }
    fact(s) * fact(N - s - 1) / fact(N)
}

pub fn shapley_exact(
    model: &TrainedModel,
    rows: &FeatureMatrix,
    background: &FeatureMatrix,
) -> Result<ShapReport> {
    if model.feature_schema != FEATURE_NAMES {
        return Err(Error::Consistency(format!(
            "model feature schema {:?} does not match {:?}",
            model.feature_schema, FEATURE_NAMES
        )));
    }
    if background.n_rows() == 0 {
        return Err(Error::Spec("background must be nonempty".into()));
    }
    let bg: Vec<[f64; N]> = (0..background.n_rows()).map(|i| background.row(i)).collect();
    let base_value = bg.iter().map(|b| model.predict_row(b)).sum::<f64>() / bg.len() as f64;

    let results: Vec<([f64; N], f64)> = (0..rows.n_rows())
        .into_par_iter()
        .map(|r| {
            let x = rows.row(r);
            // v[mask]: mean prediction with masked features taken from x
            let mut v = [0.0f64; N_SUBSETS];
            for (mask, value) in v.iter_mut().enumerate() {
                let mut acc = 0.0;
                for b in &bg {
                    let mut z = *b;
                    for (i, zi) in z.iter_mut().enumerate() {
                        if mask & (1 << i) != 0 {
                            *zi = x[i];
                        }
                    }
                    acc += model.predict_row(&z);
                }
                *value = acc / bg.len() as f64;
            }
            let mut phi = [0.0f64; N];
            for i in 0..N {
                for mask in 0..N_SUBSETS {
                    if mask & (1 << i) != 0 {
                        continue;
                    }
                    let s = (mask as u32).count_ones() as usize;
                    phi[i] += subset_weight(s) * (v[mask | (1 << i)] - v[mask]);
                }
            }
            (phi, v[N_SUBSETS - 1])
        })
        .collect();

    Ok(ShapReport {
        base_value,
        phi: results.iter().map(|(p, _)| *p).collect(),
        predictions: results.iter().map(|(_, f)| *f).collect(),
        background_size: bg.len(),
    })
}

/// Per-feature split-gain importance, normalized to sum 1. An ensemble with
/// no splits at all yields all zeros.
pub fn gain_importance(model: &TrainedModel) -> Result<[f64; N]> {
    let trees = match &model.payload {
        Payload::Trees(t) => &t.trees,
        Payload::Linear(_) => {
            return Err(Error::Capability(format!(
                "gain importance is defined for tree families, not '{}'",
                model.family.label()
            )))
        }
    };
    let mut gains = [0.0f64; N];
    for tree in trees {
        for node in &tree.nodes {
            if node.feature >= 0 {
                gains[node.feature as usize] += node.gain;
            }
        }
    }
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        for g in &mut gains {
            *g /= total;
        }
    }
    Ok(gains)
}

pub fn shap_csv(report: &ShapReport) -> String {
    let mut out = String::from(
        "row,base_value,phi_log10_kie,phi_T,phi_log10_k_tun,phi_eta,prediction\n",
    );
    for (i, (phi, pred)) in report.phi.iter().zip(&report.predictions).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i, report.base_value, phi[0], phi[1], phi[2], phi[3], pred
        ));
    }
    out
}
