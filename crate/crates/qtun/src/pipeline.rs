//! Command-level pipeline functions: each CLI subcommand maps onto one
//! function here, so the whole flow is scriptable from tests as well.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::dataset::{
    self, assemble, assemble_direct, augment, build_catalog, fit_catalog, temperature_grid,
    DatasetMode, DatasetRecord,
};
use crate::error::{Error, Result};
use crate::eval::{self, plan_kfold, plan_loo, MetricReport, SplitPlan};
use crate::explain::{gain_importance, sample_background, shapley_exact, ShapReport};
use crate::kinetics::{self, Isotope, KappaMode, ThermalState};
use crate::models::search::{search, trial_log_csv};
use crate::models::{self, Family, FeatureMatrix};
use crate::phase::{build_diagram, phase_csv, render_svg};
use crate::physics::{transmission_exact, transmission_wkb, units, BarrierSpec};

fn write_artifact(path: &Path, bytes: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_dataset(dir: &Path) -> Result<Vec<DatasetRecord>> {
    dataset::read_dataset_csv(&dir.join("dataset.csv"))
}

#[derive(Debug, Serialize)]
pub struct GenSummary {
    pub n_systems: usize,
    pub n_raw_rows: usize,
    pub catalog_path: PathBuf,
    pub raw_curves_path: PathBuf,
}

/// `gen`: build the catalog and run the quadrature sweep.
pub fn run_gen(config: &PipelineConfig, out_dir: &Path) -> Result<GenSummary> {
    let catalog = build_catalog(&config.catalog, config.seed)?;
    let grid = temperature_grid(config.grid.t_min, config.grid.t_max, config.grid.raw_step)?;
    let rows = dataset::sweep(&catalog, &grid, config.kappa_mode)?;
    let catalog_path = out_dir.join("catalog.json");
    let raw_curves_path = out_dir.join("raw_curves.csv");
    fs::create_dir_all(out_dir)?;
    dataset::write_catalog_json(&catalog_path, &catalog)?;
    dataset::write_raw_curves_csv(&raw_curves_path, &rows)?;
    Ok(GenSummary {
        n_systems: catalog.len(),
        n_raw_rows: rows.len(),
        catalog_path,
        raw_curves_path,
    })
}

#[derive(Debug, Serialize)]
pub struct AugmentSummary {
    pub n_systems: usize,
    pub n_records: usize,
    pub fits_path: PathBuf,
    pub dataset_path: PathBuf,
}

/// `augment`: Arrhenius fits plus 1 K regeneration (or direct quadrature
/// assembly when `dataset_mode` is `direct`).
pub fn run_augment(config: &PipelineConfig, dir: &Path) -> Result<AugmentSummary> {
    let catalog = dataset::read_catalog_json(&dir.join("catalog.json"))?;
    let records = match config.dataset_mode {
        DatasetMode::Arrhenius => {
            let rows = dataset::read_raw_curves_csv(&dir.join("raw_curves.csv"))?;
            let fits = fit_catalog(&rows, config.grid.fit_t_min, config.grid.fit_t_max)?;
            dataset::write_fits_csv(&dir.join("fits.csv"), &fits)?;
            let curves = augment(
                &fits,
                config.grid.t_min,
                config.grid.t_max,
                config.grid.augment_step,
            )?;
            assemble(&curves, &catalog)?
        }
        DatasetMode::Direct => {
            let grid = temperature_grid(
                config.grid.t_min,
                config.grid.t_max,
                config.grid.augment_step,
            )?;
            let records = assemble_direct(&catalog, &grid, config.kappa_mode)?;
            // no Arrhenius stage; fits.csv intentionally absent
            records
        }
    };
    let dataset_path = dir.join("dataset.csv");
    dataset::write_dataset_csv(&dataset_path, &records)?;
    Ok(AugmentSummary {
        n_systems: catalog.len(),
        n_records: records.len(),
        fits_path: dir.join("fits.csv"),
        dataset_path,
    })
}

fn plans_of_kind(config: &PipelineConfig, records: &[DatasetRecord], kind: &str) -> Result<Vec<SplitPlan>> {
    match kind {
        "kfold" => plan_kfold(
            records,
            config.splits.kfold_k,
            config.splits.test_fraction,
            config.seed,
        ),
        "loo" => plan_loo(records, config.seed),
        other => Err(Error::Spec(format!("unknown plan kind '{other}' (use kfold or loo)"))),
    }
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub family: Family,
    pub plan_id: String,
    pub best_params: std::collections::BTreeMap<String, f64>,
    pub n_trials: usize,
    pub train: MetricReport,
    pub validation: MetricReport,
    pub test: MetricReport,
    /// Kept out of the serialized report so reruns into different
    /// directories stay byte-identical.
    #[serde(skip)]
    pub model_path: PathBuf,
}

/// `train`: hyperparameter search on the first plan of the requested kind,
/// final fit, model.json + trial_log.csv + train_report.json.
pub fn run_train(
    config: &PipelineConfig,
    dir: &Path,
    family: Family,
    plan_kind: &str,
) -> Result<TrainSummary> {
    let records = read_dataset(dir)?;
    let plans = plans_of_kind(config, &records, plan_kind)?;
    let plan = &plans[0];
    let pick = |role| -> Result<(FeatureMatrix, Vec<f64>)> {
        let rows: Vec<DatasetRecord> = records
            .iter()
            .zip(&plan.roles)
            .filter(|(_, &r)| r == role)
            .map(|(rec, _)| rec.clone())
            .collect();
        FeatureMatrix::from_records(&rows)
    };
    let (train_x, train_y) = pick(eval::Role::Train)?;
    let (val_x, val_y) = pick(eval::Role::Validation)?;
    let (test_x, test_y) = pick(eval::Role::Test)?;
    let (best_params, trials) = search(
        family,
        &config.models.space,
        (&train_x, &train_y),
        (&val_x, &val_y),
        config.models.search_budget,
        config.models.strategy,
        config.seed,
    )?;
    let model = models::fit_with_validation(
        family,
        &best_params,
        &train_x,
        &train_y,
        Some((&val_x, &val_y)),
        config.seed,
    )?;
    let model_path = dir.join("model.json");
    write_artifact(&model_path, &models::serialize(&model)?)?;
    write_artifact(&dir.join("trial_log.csv"), &trial_log_csv(family, &trials))?;
    let summary = TrainSummary {
        family,
        plan_id: plan.id.clone(),
        best_params,
        n_trials: trials.len(),
        train: eval::metrics(&train_y, &models::predict(&model, &train_x)?)?,
        validation: eval::metrics(&val_y, &models::predict(&model, &val_x)?)?,
        test: eval::metrics(&test_y, &models::predict(&model, &test_x)?)?,
        model_path,
    };
    let mut report = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Format(format!("train report serialization failed: {e}")))?;
    report.push('\n');
    write_artifact(&dir.join("train_report.json"), &report)?;
    Ok(summary)
}

/// `benchmark`: the full protocol over configured families and both split
/// plan kinds; bench.json + deviations.csv.
pub fn run_benchmark(config: &PipelineConfig, dir: &Path) -> Result<eval::BenchReport> {
    let records = read_dataset(dir)?;
    let mut plans = plans_of_kind(config, &records, "kfold")?;
    if config.splits.loo {
        plans.extend(plans_of_kind(config, &records, "loo")?);
    }
    let outcome = eval::benchmark(
        &records,
        &config.models.families,
        &plans,
        &config.models.space,
        config.models.search_budget,
        config.models.strategy,
        config.seed,
    )?;
    write_artifact(&dir.join("bench.json"), &eval::bench_json(&outcome.report)?)?;
    write_artifact(&dir.join("deviations.csv"), &eval::deviations_csv(&outcome.report))?;
    Ok(outcome.report)
}

#[derive(Debug, Serialize)]
pub struct ExplainSummary {
    pub n_rows: usize,
    pub background_size: usize,
    pub mean_abs_phi: [f64; 4],
    /// Normalized split-gain importance; None for linear families.
    pub gain_importance: Option<[f64; 4]>,
    pub shap_path: PathBuf,
}

/// `explain`: exact Shapley attribution of a trained model over a seeded
/// sample of dataset rows; shap.csv.
pub fn run_explain(
    config: &PipelineConfig,
    dir: &Path,
    model_path: &Path,
) -> Result<(ShapReport, ExplainSummary)> {
    let records = read_dataset(dir)?;
    let model = models::deserialize(&fs::read_to_string(model_path)?)?;
    let (x, _) = FeatureMatrix::from_records(&records)?;
    let background = sample_background(&x, config.models.background_rows.min(x.n_rows()), config.seed)?;
    let mut indices: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    indices.shuffle(&mut rng);
    indices.truncate(config.models.explain_rows.min(x.n_rows()));
    indices.sort_unstable();
    let rows = FeatureMatrix::new(
        x.columns
            .iter()
            .map(|col| indices.iter().map(|&i| col[i]).collect())
            .collect(),
    )?;
    let report = shapley_exact(&model, &rows, &background)?;
    // shap.csv keyed by the original dataset row index
    let mut csv = String::from(
        "row,base_value,phi_log10_kie,phi_T,phi_log10_k_tun,phi_eta,prediction\n",
    );
    for ((&row, phi), pred) in indices.iter().zip(&report.phi).zip(&report.predictions) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row, report.base_value, phi[0], phi[1], phi[2], phi[3], pred
        ));
    }
    let shap_path = dir.join("shap.csv");
    write_artifact(&shap_path, &csv)?;
    let n = report.phi.len() as f64;
    let mut mean_abs_phi = [0.0f64; 4];
    for phi in &report.phi {
        for i in 0..4 {
            mean_abs_phi[i] += phi[i].abs() / n;
        }
    }
    let summary = ExplainSummary {
        n_rows: report.phi.len(),
        background_size: report.background_size,
        mean_abs_phi,
        gain_importance: if model.family.is_tree_family() {
            Some(gain_importance(&model)?)
        } else {
            None
        },
        shap_path,
    };
    Ok((report, summary))
}

#[derive(Debug, Serialize)]
pub struct PhaseSummary {
    pub n_panels: usize,
    pub n_points: usize,
    pub n_anomalies: usize,
    pub phase_path: PathBuf,
    pub svg_paths: Vec<PathBuf>,
}

/// `phase`: the tunneling phase diagram; phase.csv + one SVG per panel.
pub fn run_phase(config: &PipelineConfig, dir: &Path) -> Result<PhaseSummary> {
    let records = read_dataset(dir)?;
    let panels = build_diagram(
        &records,
        &config.phase.panel_temperatures,
        &config.phase.thresholds,
    )?;
    let phase_path = dir.join("phase.csv");
    write_artifact(&phase_path, &phase_csv(&panels))?;
    let mut svg_paths = Vec::new();
    for (t, doc) in render_svg(&panels, &config.phase.thresholds)? {
        let path = dir.join(format!("phase_{t}.svg"));
        write_artifact(&path, &doc)?;
        svg_paths.push(path);
    }
    Ok(PhaseSummary {
        n_panels: panels.len(),
        n_points: panels.iter().map(|p| p.points.len()).sum(),
        n_anomalies: panels.iter().map(|p| p.n_anomaly).sum(),
        phase_path,
        svg_paths,
    })
}

#[derive(Debug, Serialize)]
pub struct PhysicsCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<PhysicsCheck>,
}

impl ValidationReport {
    pub fn n_passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `validate-physics`: the physics/kinetics oracle suite on the configured
/// catalog. All checks always run; the report carries per-check outcomes.
pub fn run_validate_physics(config: &PipelineConfig) -> Result<ValidationReport> {
    let mut checks = Vec::new();

    // 1. WKB vs Kemble on deep-tunneling parabolic barriers
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut worst: f64 = 0.0;
        let mut compared = 0usize;
        for _ in 0..100 {
            let vf = units::kjmol_to_j(rng.random_range(20.0..120.0));
            let omega = units::cm1_to_radps(rng.random_range(200.0..1200.0));
            let mass = units::amu_to_kg(rng.random_range(0.9..1.2));
            let energy = rng.random_range(0.02..0.7) * vf;
            let spec = BarrierSpec::parabolic(vf, omega, mass);
            let exact = transmission_exact(&spec, mass, energy)?;
            if exact.p() > 1e-3 {
                continue;
            }
            let wkb = transmission_wkb(&spec, mass, energy)?;
            worst = worst.max((wkb.ln_p - exact.ln_p).abs() / exact.ln_p.abs());
            compared += 1;
        }
        checks.push(PhysicsCheck {
            name: "parabolic_wkb_vs_kemble",
            passed: compared >= 50 && worst <= 0.01,
            detail: format!("{compared} barriers compared, worst relative ln P error {worst:.3e}"),
        });
    }

    // 2. rectangular barrier action quadrature vs closed form
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
        let hbar = crate::physics::CODATA.hbar;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let vf = units::kjmol_to_j(rng.random_range(20.0..120.0));
            let width = rng.random_range(0.3e-10..1.5e-10);
            let mass = units::amu_to_kg(rng.random_range(0.9..1.2));
            let energy = rng.random_range(0.05..0.95) * vf;
            let spec = BarrierSpec::rectangular(vf, width);
            let wkb = transmission_wkb(&spec, mass, energy)?;
            let ln_p_closed = -2.0 * width * (2.0 * mass * (vf - energy)).sqrt() / hbar;
            worst = worst.max((wkb.ln_p - ln_p_closed).abs() / ln_p_closed.abs());
        }
        checks.push(PhysicsCheck {
            name: "rectangular_action_closed_form",
            passed: worst <= 1e-10,
            detail: format!("worst relative ln P error {worst:.3e}"),
        });
    }

    // 3. classical limit of the catalog at 5000 K
    let catalog = build_catalog(&config.catalog, config.seed)?;
    {
        let state = ThermalState::new(5000.0)?;
        let mut worst: f64 = 0.0;
        for sys in &catalog {
            let log10_kappa =
                kinetics::kappa(state, &sys.barrier, sys.mass_h, KappaMode::Wkb)?;
            worst = worst.max((10f64.powf(log10_kappa) - 1.0).abs());
        }
        checks.push(PhysicsCheck {
            name: "kappa_classical_limit",
            passed: worst <= 0.02,
            detail: format!("worst |kappa(5000 K) - 1| = {worst:.4}"),
        });
    }

    // 4. parabolic kappa vs u/2/sin(u/2) (u <= 2) and Wigner (u <= 0.5)
    {
        let mut worst_exact: f64 = 0.0;
        let mut worst_wigner: f64 = 0.0;
        for u in [0.2, 0.35, 0.5, 0.9, 1.4, 2.0] {
            let t = 300.0;
            let state = ThermalState::new(t)?;
            let omega = u * crate::physics::CODATA.k_b * t / crate::physics::CODATA.hbar;
            let vf = 25.0 * crate::physics::CODATA.k_b * t;
            let mass = units::amu_to_kg(1.0);
            let spec = BarrierSpec::parabolic(vf, omega, mass);
            let kappa = 10f64.powf(kinetics::kappa(state, &spec, mass, KappaMode::Exact)?);
            let analytic = (u / 2.0) / (u / 2.0).sin();
            worst_exact = worst_exact.max((kappa - analytic).abs() / analytic);
            if u <= 0.5 {
                let wigner = 1.0 + u * u / 24.0;
                worst_wigner = worst_wigner.max((kappa - wigner).abs() / wigner);
            }
        }
        checks.push(PhysicsCheck {
            name: "parabolic_kappa_oracles",
            passed: worst_exact <= 0.01 && worst_wigner <= 0.05,
            detail: format!(
                "worst vs u/2/sin(u/2): {worst_exact:.3e}; worst vs Wigner: {worst_wigner:.3e}"
            ),
        });
    }

    // 5. monotonicity in T and H/D ordering over the raw grid
    {
        let grid = temperature_grid(config.grid.t_min, config.grid.t_max, config.grid.raw_step)?;
        let mut passed = true;
        let mut detail = String::from("all systems monotone with kappa_H >= kappa_D");
        'outer: for sys in &catalog {
            let h = kinetics::rate_curve(sys, Isotope::H, &grid, config.kappa_mode)?;
            let d = kinetics::rate_curve(sys, Isotope::D, &grid, config.kappa_mode)?;
            for w in h.windows(2) {
                if w[1].log10_kappa >= w[0].log10_kappa {
                    passed = false;
                    detail = format!("{}: kappa not strictly decreasing near {} K", sys.id, w[1].t);
                    break 'outer;
                }
            }
            for (ph, pd) in h.iter().zip(&d) {
                if ph.log10_kappa < pd.log10_kappa - 1e-12 {
                    passed = false;
                    detail = format!("{}: kappa_H < kappa_D at {} K", sys.id, ph.t);
                    break 'outer;
                }
            }
        }
        checks.push(PhysicsCheck {
            name: "kappa_monotonicity_and_isotope_ordering",
            passed,
            detail,
        });
    }

    // 6. deep-tunneling stability at the grid floor
    {
        let state = ThermalState::new(config.grid.t_min)?;
        let mut passed = true;
        let mut worst_id = String::new();
        let mut worst = 0.0f64;
        for sys in &catalog {
            let log10_kappa = kinetics::kappa(state, &sys.barrier, sys.mass_h, config.kappa_mode)?;
            if !log10_kappa.is_finite() {
                passed = false;
            }
            if log10_kappa > worst {
                worst = log10_kappa;
                worst_id = sys.id.clone();
            }
        }
        checks.push(PhysicsCheck {
            name: "deep_tunneling_stability",
            passed,
            detail: format!(
                "all finite at {} K; largest log10 kappa {worst:.2} ({worst_id})",
                config.grid.t_min
            ),
        });
    }

    Ok(ValidationReport { checks })
}

/// Convenience driver used by the determinism tests: runs every stage into
/// `dir` with the xgb family trained on the first k-fold plan for explain.
pub fn run_all(config: &PipelineConfig, dir: &Path) -> Result<()> {
    run_gen(config, dir)?;
    run_augment(config, dir)?;
    run_benchmark(config, dir)?;
    let train = run_train(config, dir, Family::Xgb, "kfold")?;
    run_explain(config, dir, &train.model_path)?;
    run_phase(config, dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::search::SearchStrategy;

    /// Small config so the smoke test stays fast.
    fn small_config(dir: &Path) -> PipelineConfig {
        let mut config = PipelineConfig::default();
        config.output_dir = dir.to_string_lossy().into_owned();
        config.catalog.n_systems = 4;
        config.grid.raw_step = 50.0;
        config.grid.augment_step = 10.0;
        config.models.families = vec![Family::Ridge, Family::Xgb];
        config.models.search_budget = 2;
        config.models.strategy = SearchStrategy::Random;
        config.models.background_rows = 16;
        config.models.explain_rows = 5;
        config.splits.kfold_k = 3;
        config.splits.loo = false;
        config.phase.panel_temperatures = vec![100.0, 400.0, 700.0];
        config
    }

    #[test]
    fn full_pipeline_smoke_and_determinism() {
        let tmp = tempfile::tempdir().unwrap();
        let dir_a = tmp.path().join("a");
        let dir_b = tmp.path().join("b");
        let config = small_config(&dir_a);
        run_all(&config, &dir_a).unwrap();
        run_all(&config, &dir_b).unwrap();
        for name in [
            "catalog.json",
            "raw_curves.csv",
            "fits.csv",
            "dataset.csv",
            "bench.json",
            "deviations.csv",
            "model.json",
            "trial_log.csv",
            "train_report.json",
            "shap.csv",
            "phase.csv",
            "phase_400.svg",
        ] {
            let a = fs::read(dir_a.join(name)).unwrap();
            let b = fs::read(dir_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
            assert!(!a.is_empty(), "{name} is empty");
        }
    }

    #[test]
    fn validate_physics_passes_on_defaults() {
        let config = PipelineConfig::default();
        let report = run_validate_physics(&config).unwrap();
        for check in &report.checks {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
        assert_eq!(report.n_passed(), report.checks.len());
    }

    #[test]
    fn unknown_plan_kind_is_a_spec_error() {
        let config = PipelineConfig::default();
        let err = plans_of_kind(&config, &[], "holdout").unwrap_err();
        assert!(matches!(err, Error::Spec(_)));
    }
}
