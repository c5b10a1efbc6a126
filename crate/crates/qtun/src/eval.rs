//! Metrics, split plans (10-fold with a held-out test set, and
//! leave-one-system-out), and the benchmark runner over all model families.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::models::search::{search, HyperSpace, SearchStrategy, Trial};
use crate::models::{fit_with_validation, predict, Family, FeatureMatrix};

/// All values are in log10-target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// None when Var(y_obs) = 0; see [`MetricReport::r2_checked`].
    pub r2: Option<f64>,
    /// Mean multiplicative deviation factor, 10^rmse - 1.
    pub dev: f64,
}

impl MetricReport {
    pub fn r2_checked(&self) -> Result<f64> {
        self.r2
            .ok_or_else(|| Error::Metric("R^2 undefined: observations have zero variance".into()))
    }
}

pub fn metrics(y_obs: &[f64], y_pred: &[f64]) -> Result<MetricReport> {
    if y_obs.is_empty() || y_obs.len() != y_pred.len() {
        return Err(Error::Data(format!(
            "metrics need equal nonzero lengths, got {} and {}",
            y_obs.len(),
            y_pred.len()
        )));
    }
    let n = y_obs.len() as f64;
    let mut mae = 0.0;
    let mut mse = 0.0;
    for (o, p) in y_obs.iter().zip(y_pred) {
        let r = o - p;
        mae += r.abs();
        mse += r * r;
    }
    mae /= n;
    mse /= n;
    let rmse = mse.sqrt();
    let mean = y_obs.iter().sum::<f64>() / n;
    let sst = y_obs.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>();
    let r2 = if sst > 0.0 {
        let ssr = mse * n;
        Some(1.0 - ssr / sst)
    } else {
        None
    };
    Ok(MetricReport {
        mae,
        mse,
        rmse,
        r2,
        dev: 10f64.powf(rmse) - 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    KFold,
    LeaveOneSystemOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub kind: PlanKind,
    pub id: String,
    /// One role per dataset row, same order as the records.
    pub roles: Vec<Role>,
}

/// Row indices grouped by system id, systems in sorted order.
fn group_by_system(records: &[DatasetRecord]) -> Vec<(String, Vec<usize>)> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(&r.system_id).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// k-fold cross-validation plans with a test set held out first, both
/// stratified by system id under a seeded shuffle.
pub fn plan_kfold(
    records: &[DatasetRecord],
    k: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<SplitPlan>> {
    if k < 2 {
        return Err(Error::Spec(format!("kfold needs k >= 2, got {k}")));
    }
    if records.len() < k {
        return Err(Error::Spec(format!(
            "kfold needs at least {k} rows, got {}",
            records.len()
        )));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Spec(format!(
            "test_fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of_row = vec![usize::MAX; records.len()]; // usize::MAX = test
    for (_, mut idx) in group_by_system(records) {
        idx.shuffle(&mut rng);
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        for (pos, &row) in idx.iter().enumerate() {
            if pos >= n_test {
                fold_of_row[row] = (pos - n_test) % k;
            }
        }
    }
    Ok((0..k)
        .map(|fold| SplitPlan {
            kind: PlanKind::KFold,
            id: format!("kfold_{fold:02}"),
            roles: fold_of_row
                .iter()
                .map(|&f| {
                    if f == usize::MAX {
                        Role::Test
                    } else if f == fold {
                        Role::Validation
                    } else {
                        Role::Train
                    }
                })
                .collect(),
        })
        .collect())
}

/// One plan per system: its rows are the test set; the remaining rows are
/// split train:validation = 19:1 by seeded sampling stratified over systems.
pub fn plan_loo(records: &[DatasetRecord], seed: u64) -> Result<Vec<SplitPlan>> {
    let groups = group_by_system(records);
    if groups.len() < 2 {
        return Err(Error::Spec(format!(
            "leave-one-system-out needs >= 2 systems, got {}",
            groups.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plans = Vec::with_capacity(groups.len());
    for (held_out, _) in &groups {
        let others: Vec<&(String, Vec<usize>)> =
            groups.iter().filter(|(id, _)| id != held_out).collect();
        let total: usize = others.iter().map(|(_, idx)| idx.len()).sum();
        let target_val = (total as f64 / 20.0).round() as usize;
        // largest-remainder allocation so the overall ratio lands on 19:1
        let mut base: Vec<usize> = others.iter().map(|(_, idx)| idx.len() / 20).collect();
        let mut remainders: Vec<(usize, f64)> = others
            .iter()
            .enumerate()
            .map(|(i, (_, idx))| (i, idx.len() as f64 / 20.0 - base[i] as f64))
            .collect();
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut leftover = target_val.saturating_sub(base.iter().sum::<usize>());
        for &(i, _) in &remainders {
            if leftover == 0 {
                break;
            }
            base[i] += 1;
            leftover -= 1;
        }
        let mut roles = vec![Role::Test; records.len()];
        for (i, (_, idx)) in others.iter().enumerate() {
            let mut shuffled = idx.clone();
            shuffled.shuffle(&mut rng);
            for (pos, &row) in shuffled.iter().enumerate() {
                roles[row] = if pos < base[i] {
                    Role::Validation
                } else {
                    Role::Train
                };
            }
        }
        plans.push(SplitPlan {
            kind: PlanKind::LeaveOneSystemOut,
            id: format!("loo_{held_out}"),
            roles,
        });
    }
    Ok(plans)
}

fn subset(records: &[DatasetRecord], roles: &[Role], want: Role) -> Result<(FeatureMatrix, Vec<f64>)> {
    let rows: Vec<DatasetRecord> = records
        .iter()
        .zip(roles)
        .filter(|(_, &r)| r == want)
        .map(|(rec, _)| rec.clone())
        .collect();
    if rows.is_empty() {
        return Err(Error::Data(format!("split produced an empty {want:?} set")));
    }
    FeatureMatrix::from_records(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub family: Family,
    pub plan_id: String,
    pub train: MetricReport,
    pub test: MetricReport,
    pub best_params: BTreeMap<String, f64>,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub family: Family,
    pub plan_kind: PlanKind,
    pub n_cells: usize,
    pub mean_test_rmse: f64,
    pub std_test_rmse: f64,
    pub mean_test_r2: f64,
    pub mean_train_r2: f64,
    pub mean_test_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
    pub aggregates: Vec<BenchAggregate>,
}

impl BenchReport {
    pub fn aggregate(&self, family: Family, kind: PlanKind) -> Option<&BenchAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.family == family && a.plan_kind == kind)
    }
}

pub struct BenchOutcome {
    pub report: BenchReport,
    /// Trial logs keyed by (family, plan id), ordered like the cells.
    pub trials: Vec<(Family, String, Vec<Trial>)>,
}

/// Run the full protocol: per (family, plan) cell, hyperparameter search on
/// train/validation, a final fit, and metrics on train and test. Cells
/// execute concurrently; the report is ordered by (family, plan).
pub fn benchmark(
    records: &[DatasetRecord],
    families: &[Family],
    plans: &[SplitPlan],
    space: &HyperSpace,
    budget: usize,
    strategy: SearchStrategy,
    seed: u64,
) -> Result<BenchOutcome> {
    if families.is_empty() || plans.is_empty() {
        return Err(Error::Spec("benchmark needs nonempty families and plans".into()));
    }
    space.validate()?;
    let mut jobs: Vec<(usize, Family, &SplitPlan)> = Vec::new();
    for &family in families {
        for (plan_index, plan) in plans.iter().enumerate() {
            jobs.push((plan_index, family, plan));
        }
    }
    let results: Vec<(BenchCell, PlanKind, Vec<Trial>)> = jobs
        .par_iter()
        .map(|&(plan_index, family, plan)| {
            // the cell seed depends on the plan only, so families facing the
            // same split draw the same trial sequence for any search
            // parameters they share (a paired comparison across families)
            let cell_seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(plan_index as u64 + 1));
            let (train_x, train_y) = subset(records, &plan.roles, Role::Train)?;
            let (val_x, val_y) = subset(records, &plan.roles, Role::Validation)?;
            let (test_x, test_y) = subset(records, &plan.roles, Role::Test)?;
            let (best_params, trials) = search(
                family,
                space,
                (&train_x, &train_y),
                (&val_x, &val_y),
                budget,
                strategy,
                cell_seed,
            )?;
            let model = fit_with_validation(
                family,
                &best_params,
                &train_x,
                &train_y,
                Some((&val_x, &val_y)),
                cell_seed,
            )?;
            let train_report = metrics(&train_y, &predict(&model, &train_x)?)?;
            let test_report = metrics(&test_y, &predict(&model, &test_x)?)?;
            Ok((
                BenchCell {
                    family,
                    plan_id: plan.id.clone(),
                    train: train_report,
                    test: test_report,
                    best_params,
                    n_trials: trials.len(),
                },
                plan.kind,
                trials,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut agg_groups: BTreeMap<(Family, String), Vec<&BenchCell>> = BTreeMap::new();
    let mut kinds: BTreeMap<(Family, String), PlanKind> = BTreeMap::new();
    for (cell, kind, _) in &results {
        let key = (cell.family, format!("{kind:?}"));
        agg_groups.entry(key.clone()).or_default().push(cell);
        kinds.insert(key, *kind);
    }
    let aggregates = agg_groups
        .iter()
        .map(|(key, cells)| {
            let n = cells.len() as f64;
            let mean = |f: &dyn Fn(&BenchCell) -> f64| cells.iter().map(|c| f(c)).sum::<f64>() / n;
            let mean_rmse = mean(&|c| c.test.rmse);
            let var = cells
                .iter()
                .map(|c| (c.test.rmse - mean_rmse) * (c.test.rmse - mean_rmse))
                .sum::<f64>()
                / n;
            Ok(BenchAggregate {
                family: key.0,
                plan_kind: kinds[key],
                n_cells: cells.len(),
                mean_test_rmse: mean_rmse,
                std_test_rmse: var.sqrt(),
                mean_test_r2: cells
                    .iter()
                    .map(|c| c.test.r2_checked())
                    .sum::<Result<f64>>()?
                    / n,
                mean_train_r2: cells
                    .iter()
                    .map(|c| c.train.r2_checked())
                    .sum::<Result<f64>>()?
                    / n,
                mean_test_dev: mean(&|c| c.test.dev),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let trials = results
        .iter()
        .map(|(cell, _, trials)| (cell.family, cell.plan_id.clone(), trials.clone()))
        .collect();
    Ok(BenchOutcome {
        report: BenchReport {
            cells: results.into_iter().map(|(c, _, _)| c).collect(),
            aggregates,
        },
        trials,
    })
}

pub fn bench_json(report: &BenchReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("bench report serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Per-cell deviation distribution data for box plots.
pub fn deviations_csv(report: &BenchReport) -> String {
    let mut out = String::from("family,plan_id,test_rmse,test_dev\n");
    for c in &report.cells {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.family.label(),
            c.plan_id,
            c.test.rmse,
            c.test.dev
        ));
    }
    out
}
