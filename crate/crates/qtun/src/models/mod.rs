//! Six from-scratch regressors behind one fit/predict contract:
//! PLSR, Ridge, Extra-Trees, Random Forest, first-order GBDT and a
//! second-order regularized GBDT ("xgb"), plus seeded hyperparameter search.

pub mod ensemble;
pub mod linear;
pub mod search;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use ensemble::{fit_boosted, fit_forest, BoostParams, ForestParams, TreesPayload};
use linear::{fit_plsr, fit_ridge, LinearPayload};

/// Fixed feature order for every artifact in the pipeline.
pub const FEATURE_NAMES: [&str; 4] = ["log10_kie", "T_K", "log10_k_tun", "eta"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Plsr,
    Ridge,
    ExtraTrees,
    RandomForest,
    Gbdt,
    Xgb,
}

pub const ALL_FAMILIES: [Family; 6] = [
    Family::Plsr,
    Family::Ridge,
    Family::ExtraTrees,
    Family::RandomForest,
    Family::Gbdt,
    Family::Xgb,
];

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Plsr => "plsr",
            Family::Ridge => "ridge",
            Family::ExtraTrees => "extra_trees",
            Family::RandomForest => "random_forest",
            Family::Gbdt => "gbdt",
            Family::Xgb => "xgb",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        ALL_FAMILIES
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| Error::Spec(format!("unknown model family '{s}'")))
    }

    pub fn is_tree_family(self) -> bool {
        !matches!(self, Family::Plsr | Family::Ridge)
    }

    pub fn is_boosted(self) -> bool {
        matches!(self, Family::Gbdt | Family::Xgb)
    }

    /// Sensible fixed settings used when no search is run.
    pub fn default_hyperparameters(self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        match self {
            Family::Plsr => {
                p.insert("n_components".into(), 2.0);
            }
            Family::Ridge => {
                p.insert("lambda".into(), 1.0);
            }
            Family::ExtraTrees | Family::RandomForest => {
                p.insert("n_trees".into(), 200.0);
                p.insert("max_depth".into(), 10.0);
                p.insert("min_child_weight".into(), 1.0);
            }
            Family::Gbdt => {
                p.insert("n_trees".into(), 200.0);
                p.insert("learning_rate".into(), 0.1);
                p.insert("max_depth".into(), 6.0);
                p.insert("subsample".into(), 1.0);
            }
            Family::Xgb => {
                p.insert("n_trees".into(), 200.0);
                p.insert("learning_rate".into(), 0.1);
                p.insert("max_depth".into(), 6.0);
                p.insert("subsample".into(), 1.0);
                p.insert("min_child_weight".into(), 1.0);
                // the generated targets are noiseless, so the default leaf
                // penalty sits at the low end of the searched range
                p.insert("l2_leaf".into(), 0.01);
            }
        }
        p
    }

    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            Family::Plsr => &["n_components"],
            Family::Ridge => &["lambda"],
            Family::ExtraTrees | Family::RandomForest => {
                &["n_trees", "max_depth", "min_child_weight"]
            }
            Family::Gbdt => &["n_trees", "learning_rate", "max_depth", "subsample"],
            Family::Xgb => &[
                "n_trees",
                "learning_rate",
                "max_depth",
                "subsample",
                "min_child_weight",
                "l2_leaf",
            ],
        }
    }
}

/// Column-major feature block in the fixed [log10_kie, T_K, log10_k_tun, eta]
/// order; all values finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != FEATURE_NAMES.len() {
            return Err(Error::Spec(format!(
                "feature matrix needs {} columns, got {}",
                FEATURE_NAMES.len(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Data(format!(
                    "feature column '{}' has {} rows, expected {n}",
                    FEATURE_NAMES[j],
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite value in feature '{}' at row {i}",
                    FEATURE_NAMES[j]
                )));
            }
        }
        Ok(FeatureMatrix { columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn row(&self, i: usize) -> [f64; 4] {
        [
            self.columns[0][i],
            self.columns[1][i],
            self.columns[2][i],
            self.columns[3][i],
        ]
    }

    /// Features plus the log10 kappa target from dataset records.
    pub fn from_records(records: &[DatasetRecord]) -> Result<(Self, Vec<f64>)> {
        let mut columns = vec![Vec::with_capacity(records.len()); 4];
        let mut y = Vec::with_capacity(records.len());
        for r in records {
            columns[0].push(r.log10_kie);
            columns[1].push(r.t);
            columns[2].push(r.log10_k_tun);
            columns[3].push(r.eta);
            y.push(r.log10_kappa);
        }
        Ok((FeatureMatrix::new(columns)?, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Linear(LinearPayload),
    Trees(TreesPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: Family,
    pub hyperparameters: BTreeMap<String, f64>,
    pub feature_schema: Vec<String>,
    pub payload: Payload,
}

impl TrainedModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.payload {
            Payload::Linear(p) => p.predict_row(row),
            Payload::Trees(p) => p.predict_row(row),
        }
    }
}

fn check_training_data(x: &FeatureMatrix, y: &[f64]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::Data(format!(
            "feature rows ({}) != target rows ({})",
            x.n_rows(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Training(format!("need at least 2 rows, got {}", y.len())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite target at row {i}")));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
    if var <= 0.0 {
        return Err(Error::Training("target has zero variance".into()));
    }
    Ok(())
}

struct ParamReader<'a> {
    family: Family,
    map: &'a BTreeMap<String, f64>,
}

impl<'a> ParamReader<'a> {
    fn new(family: Family, map: &'a BTreeMap<String, f64>) -> Result<Self> {
        for key in map.keys() {
            if !family.parameter_names().contains(&key.as_str()) {
                return Err(Error::Spec(format!(
                    "hyperparameter '{key}' is not valid for family '{}'",
                    family.label()
                )));
            }
        }
        Ok(ParamReader { family, map })
    }

    fn get(&self, name: &str) -> Result<f64> {
        let v = *self.map.get(name).ok_or_else(|| {
            Error::Spec(format!(
                "family '{}' requires hyperparameter '{name}'",
                self.family.label()
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::Spec(format!("hyperparameter '{name}' is not finite")));
        }
        Ok(v)
    }

    fn get_usize(&self, name: &str) -> Result<usize> {
        let v = self.get(name)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Spec(format!(
                "hyperparameter '{name}' must be a non-negative integer, got {v}"
            )));
        }
        Ok(v as usize)
    }
}

/// Train a model. Boosted families use `validation` for early stopping when
/// supplied; the other families ignore it.
pub fn fit_with_validation(
    family: Family,
    hyperparameters: &BTreeMap<String, f64>,
    x: &FeatureMatrix,
    y: &[f64],
    validation: Option<(&FeatureMatrix, &[f64])>,
    seed: u64,
) -> Result<TrainedModel> {
    check_training_data(x, y)?;
    let params = ParamReader::new(family, hyperparameters)?;
    let payload = match family {
        Family::Plsr => Payload::Linear(fit_plsr(&x.columns, y, params.get_usize("n_components")?)?),
        Family::Ridge => Payload::Linear(fit_ridge(&x.columns, y, params.get("lambda")?)?),
        Family::ExtraTrees | Family::RandomForest => {
            let is_rf = family == Family::RandomForest;
            let fp = ForestParams {
                n_trees: params.get_usize("n_trees")?,
                max_depth: params.get_usize("max_depth")?,
                min_child_weight: params.get("min_child_weight")?,
                // RF decorrelates through bootstrap + per-split feature
                // subsets; ET relies on random thresholds over all features
                n_split_features: if is_rf { 2 } else { 4 },
                bootstrap: is_rf,
                random_thresholds: !is_rf,
            };
            Payload::Trees(fit_forest(&x.columns, y, &fp, seed)?)
        }
        Family::Gbdt | Family::Xgb => {
            let is_xgb = family == Family::Xgb;
            let bp = BoostParams {
                n_trees: params.get_usize("n_trees")?,
                learning_rate: params.get("learning_rate")?,
                max_depth: params.get_usize("max_depth")?,
                min_child_weight: if is_xgb { params.get("min_child_weight")? } else { 1.0 },
                lambda: if is_xgb { params.get("l2_leaf")? } else { 0.0 },
                subsample: params.get("subsample")?,
            };
            let val = validation.map(|(vx, vy)| (vx.columns.as_slice(), vy));
            Payload::Trees(fit_boosted(&x.columns, y, &bp, val, seed)?)
        }
    };
    Ok(TrainedModel {
        family,
        hyperparameters: hyperparameters.clone(),
        feature_schema: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        payload,
    })
}

pub fn fit(
    family: Family,
    hyperparameters: &BTreeMap<String, f64>,
    x: &FeatureMatrix,
    y: &[f64],
    seed: u64,
) -> Result<TrainedModel> {
    fit_with_validation(family, hyperparameters, x, y, None, seed)
}

pub fn predict(model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if model.feature_schema != FEATURE_NAMES {
        return Err(Error::Consistency(format!(
            "model feature schema {:?} does not match {:?}",
            model.feature_schema, FEATURE_NAMES
        )));
    }
    Ok((0..x.n_rows()).map(|i| model.predict_row(&x.row(i))).collect())
}

/// Model document format version; loaders accept any 1.x document.
pub const MODEL_FORMAT_VERSION: &str = "1.0";

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: String,
    #[serde(flatten)]
    model: TrainedModel,
}

pub fn serialize(model: &TrainedModel) -> Result<String> {
    let doc = ModelDocument {
        format_version: MODEL_FORMAT_VERSION.to_string(),
        model: model.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Format(format!("model serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn deserialize(json: &str) -> Result<TrainedModel> {
    let doc: ModelDocument = serde_json::from_str(json)
        .map_err(|e| Error::Format(format!("malformed model document: {e}")))?;
    let major = doc.format_version.split('.').next().unwrap_or("");
    if major != "1" {
        return Err(Error::Format(format!(
            "unsupported model format version '{}'",
            doc.format_version
        )));
    }
    Ok(doc.model)
}
