//! Tunneling phase diagram: per-temperature panels of (KIE, kappa) points
//! classified into regimes, with high-KIE/low-kappa anomaly flagging, CSV
//! output, and dependency-free SVG rendering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeThresholds {
    pub kappa_strong: f64,
    pub kappa_classical: f64,
    pub t_low: f64,
    pub t_high: f64,
    /// Rate bands in s^-1.
    pub k_low: f64,
    pub k_high: f64,
    pub kie_anomaly: f64,
    pub kappa_anomaly: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            kappa_strong: 2.0,
            kappa_classical: 1.1,
            t_low: 300.0,
            t_high: 600.0,
            k_low: 1e-5,
            k_high: 1.0,
            kie_anomaly: 5.0,
            kappa_anomaly: 1.5,
        }
    }
}

impl RegimeThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_strong > self.kappa_classical && self.kappa_classical >= 1.0) {
            return Err(Error::Spec(format!(
                "need kappa_strong > kappa_classical >= 1, got {} and {}",
                self.kappa_strong, self.kappa_classical
            )));
        }
        if !(self.t_low < self.t_high) {
            return Err(Error::Spec(format!(
                "need t_low < t_high, got {} and {}",
                self.t_low, self.t_high
            )));
        }
        if !(self.k_low < self.k_high) {
            return Err(Error::Spec(format!(
                "need k_low < k_high, got {} and {}",
                self.k_low, self.k_high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Tunneling,
    Transition,
    Classical,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Tunneling => "Tunneling",
            Regime::Transition => "Transition",
            Regime::Classical => "Classical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub system_id: String,
    pub t: f64,
    pub log10_kie: f64,
    pub log10_kappa: f64,
    pub log10_k_tun: f64,
    pub eta: f64,
    pub regime: Regime,
    pub anomaly: bool,
}

pub fn classify(record: &DatasetRecord, th: &RegimeThresholds) -> PhasePoint {
    let kappa = 10f64.powf(record.log10_kappa);
    let kie = 10f64.powf(record.log10_kie);
    let k_tun = 10f64.powf(record.log10_k_tun);
    let regime = if record.t < th.t_low && kappa >= th.kappa_strong && k_tun < th.k_low {
        Regime::Tunneling
    } else if record.t > th.t_high && kappa <= th.kappa_classical && k_tun > th.k_high {
        Regime::Classical
    } else {
        Regime::Transition
    };
    PhasePoint {
        system_id: record.system_id.clone(),
        t: record.t,
        log10_kie: record.log10_kie,
        log10_kappa: record.log10_kappa,
        log10_k_tun: record.log10_k_tun,
        eta: record.eta,
        regime,
        anomaly: kie >= th.kie_anomaly && kappa <= th.kappa_anomaly,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePanel {
    pub t: f64,
    pub points: Vec<PhasePoint>,
    pub n_tunneling: usize,
    pub n_transition: usize,
    pub n_classical: usize,
    pub n_anomaly: usize,
}

/// One panel per requested temperature, each collecting every system's
/// record at that grid point. Panels are built concurrently and returned in
/// ascending temperature order.
pub fn build_diagram(
    records: &[DatasetRecord],
    panel_temperatures: &[f64],
    thresholds: &RegimeThresholds,
) -> Result<Vec<PhasePanel>> {
    thresholds.validate()?;
    let mut temps = panel_temperatures.to_vec();
    temps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    temps
        .par_iter()
        .map(|&t| {
            let mut points: Vec<PhasePoint> = records
                .iter()
                .filter(|r| r.t == t)
                .map(|r| classify(r, thresholds))
                .collect();
            if points.is_empty() {
                return Err(Error::Spec(format!(
                    "panel temperature {t} K is not on the dataset grid"
                )));
            }
            points.sort_by(|a, b| a.system_id.cmp(&b.system_id));
            let count = |reg: Regime| points.iter().filter(|p| p.regime == reg).count();
            Ok(PhasePanel {
                t,
                n_tunneling: count(Regime::Tunneling),
                n_transition: count(Regime::Transition),
                n_classical: count(Regime::Classical),
                n_anomaly: points.iter().filter(|p| p.anomaly).count(),
                points,
            })
        })
        .collect()
}

pub fn phase_csv(panels: &[PhasePanel]) -> String {
    let mut out =
        String::from("panel_T,system_id,log10_kie,log10_kappa,log10_k_tun,eta,regime,anomaly\n");
    for panel in panels {
        for p in &panel.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                panel.t,
                p.system_id,
                p.log10_kie,
                p.log10_kappa,
                p.log10_k_tun,
                p.eta,
                p.regime.label(),
                p.anomaly
            );
        }
    }
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::Tunneling => "#2166ac",
        Regime::Transition => "#878787",
        Regime::Classical => "#b2182b",
    }
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Axis ranges over all panels so the figures share scales; padded by 5%.
fn axis_ranges(panels: &[PhasePanel]) -> ((f64, f64), (f64, f64)) {
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for panel in panels {
        for p in &panel.points {
            xr.0 = xr.0.min(p.log10_kie);
            xr.1 = xr.1.max(p.log10_kie);
            yr.0 = yr.0.min(p.log10_kappa);
            yr.1 = yr.1.max(p.log10_kappa);
        }
    }
    let pad = |r: (f64, f64)| {
        let span = (r.1 - r.0).max(1e-6);
        (r.0 - 0.05 * span, r.1 + 0.05 * span)
    };
    (pad(xr), pad(yr))
}

/// One SVG document per panel, deterministic bytes. log10 KIE on x, log10
/// kappa on y, regime-colored markers, anomaly points outlined, threshold
/// guide lines for kappa_strong / kappa_classical / kie_anomaly.
pub fn render_svg(panels: &[PhasePanel], thresholds: &RegimeThresholds) -> Result<Vec<(f64, String)>> {
    if panels.is_empty() {
        return Err(Error::Spec("render_svg needs at least one panel".into()));
    }
    let ((x0, x1), (y0, y1)) = axis_ranges(panels);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (SVG_W - MARGIN_L - MARGIN_R);
    let py = |y: f64| SVG_H - MARGIN_B - (y - y0) / (y1 - y0) * (SVG_H - MARGIN_T - MARGIN_B);
    let mut docs = Vec::with_capacity(panels.len());
    for panel in panels {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
        );
        let _ = writeln!(s, "  <rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "  <rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            SVG_W - MARGIN_L - MARGIN_R,
            SVG_H - MARGIN_T - MARGIN_B
        );
        let _ = writeln!(
            s,
            "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">T = {} K</text>",
            SVG_W / 2.0,
            fmt(panel.t)
        );
        let _ = writeln!(
            s,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">log10 KIE</text>",
            SVG_W / 2.0,
            SVG_H - 16.0
        );
        let _ = writeln!(
            s,
            "  <text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">log10 kappa</text>",
            SVG_H / 2.0,
            SVG_H / 2.0
        );
        // axis ticks (4 per axis)
        for i in 0..=4 {
            let xv = x0 + (x1 - x0) * i as f64 / 4.0;
            let yv = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(
                s,
                "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                fmt(px(xv)),
                SVG_H - MARGIN_B + 18.0,
                fmt(xv)
            );
            let _ = writeln!(
                s,
                "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                MARGIN_L - 6.0,
                fmt(py(yv) + 4.0),
                fmt(yv)
            );
        }
        // threshold guide lines, clipped to the viewport
        for (value, label) in [
            (thresholds.kappa_strong.log10(), "kappa_strong"),
            (thresholds.kappa_classical.log10(), "kappa_classical"),
        ] {
            if value > y0 && value < y1 {
                let _ = writeln!(
                    s,
                    "  <line x1=\"{MARGIN_L}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/><!-- {label} -->",
                    SVG_W - MARGIN_R,
                    y = fmt(py(value))
                );
            }
        }
        let kie_guide = thresholds.kie_anomaly.log10();
        if kie_guide > x0 && kie_guide < x1 {
            let _ = writeln!(
                s,
                "  <line x1=\"{x}\" y1=\"{MARGIN_T}\" x2=\"{x}\" y2=\"{}\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/><!-- kie_anomaly -->",
                SVG_H - MARGIN_B,
                x = fmt(px(kie_guide))
            );
        }
        for p in &panel.points {
            let stroke = if p.anomaly {
                " stroke=\"black\" stroke-width=\"2\""
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"{stroke}><title>{}</title></circle>",
                fmt(px(p.log10_kie)),
                fmt(py(p.log10_kappa)),
                regime_color(p.regime),
                p.system_id
            );
        }
        s.push_str("</svg>\n");
        docs.push((panel.t, s));
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(system_id: &str, t: f64, kie: f64, kappa: f64, k_tun: f64) -> DatasetRecord {
        DatasetRecord {
            system_id: system_id.to_string(),
            t,
            log10_kie: kie.log10(),
            log10_k_tun: k_tun.log10(),
            eta: 0.1,
            log10_kappa: kappa.log10(),
        }
    }

    #[test]
    fn classify_reference_points() {
        let th = RegimeThresholds::default();
        let p = classify(&record("a", 100.0, 30.0, 50.0, 1e-12), &th);
        assert_eq!(p.regime, Regime::Tunneling);
        let p = classify(&record("a", 800.0, 1.1, 1.02, 1e3), &th);
        assert_eq!(p.regime, Regime::Classical);
        let p = classify(&record("a", 450.0, 7.0, 1.3, 1e-2), &th);
        assert_eq!(p.regime, Regime::Transition);
        assert!(p.anomaly);
    }

    #[test]
    fn regime_is_total_and_exclusive() {
        let th = RegimeThresholds::default();
        for t in [50.0, 299.0, 300.0, 600.0, 601.0, 5000.0] {
            for kappa in [1.0, 1.1, 1.5, 2.0, 100.0] {
                for k in [1e-9, 1e-5, 1.0, 1e3] {
                    let p = classify(&record("a", t, 2.0, kappa, k), &th);
                    // exactly one regime by construction of the enum; just
                    // check the boundary conditions behave
                    if p.regime == Regime::Tunneling {
                        assert!(t < th.t_low && kappa >= th.kappa_strong && k < th.k_low);
                    }
                    if p.regime == Regime::Classical {
                        assert!(t > th.t_high && kappa <= th.kappa_classical && k > th.k_high);
                    }
                }
            }
        }
    }

    #[test]
    fn anomaly_is_independent_of_regime() {
        let th = RegimeThresholds::default();
        let p = classify(&record("a", 100.0, 8.0, 1.4, 1e-12), &th);
        assert_eq!(p.regime, Regime::Transition); // kappa < 2 blocks Tunneling
        assert!(p.anomaly);
        let p = classify(&record("a", 100.0, 8.0, 50.0, 1e-12), &th);
        assert_eq!(p.regime, Regime::Tunneling);
        assert!(!p.anomaly);
    }

    fn toy_panels() -> Vec<PhasePanel> {
        let th = RegimeThresholds::default();
        let records = vec![
            record("a", 100.0, 30.0, 50.0, 1e-12),
            record("b", 100.0, 8.0, 1.4, 1e-8),
            record("a", 700.0, 1.2, 1.05, 1e2),
            record("b", 700.0, 1.1, 1.01, 1e3),
        ];
        build_diagram(&records, &[700.0, 100.0], &th).unwrap()
    }

    #[test]
    fn diagram_orders_panels_and_counts_regimes() {
        let panels = toy_panels();
        assert_eq!(panels.len(), 2);
        assert_eq!(panels[0].t, 100.0);
        assert_eq!(panels[0].n_tunneling, 1);
        assert_eq!(panels[0].n_anomaly, 1);
        assert_eq!(panels[1].n_classical, 2);
    }

    #[test]
    fn missing_panel_temperature_is_a_spec_error() {
        let th = RegimeThresholds::default();
        let records = vec![record("a", 100.0, 3.0, 2.0, 1e-6)];
        assert!(matches!(
            build_diagram(&records, &[150.0], &th).unwrap_err(),
            Error::Spec(_)
        ));
    }

    #[test]
    fn phase_csv_layout() {
        let panels = toy_panels();
        let csv = phase_csv(&panels);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "panel_T,system_id,log10_kie,log10_kappa,log10_k_tun,eta,regime,anomaly"
        );
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains(",Tunneling,"));
        assert!(csv.lines().nth(1).unwrap().starts_with("100,a,"));
    }

    #[test]
    fn svg_is_deterministic_and_in_viewport() {
        let panels = toy_panels();
        let th = RegimeThresholds::default();
        let a = render_svg(&panels, &th).unwrap();
        let b = render_svg(&panels, &th).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        for (_, doc) in &a {
            for line in doc.lines().filter(|l| l.contains("<circle")) {
                let get = |attr: &str| -> f64 {
                    let start = line.find(attr).unwrap() + attr.len() + 2;
                    line[start..].split('"').next().unwrap().parse().unwrap()
                };
                let cx = get("cx");
                let cy = get("cy");
                assert!(cx >= MARGIN_L && cx <= SVG_W - MARGIN_R, "{line}");
                assert!(cy >= MARGIN_T && cy <= SVG_H - MARGIN_B, "{line}");
            }
        }
    }

    #[test]
    fn empty_panel_list_is_rejected() {
        assert!(matches!(
            render_svg(&[], &RegimeThresholds::default()).unwrap_err(),
            Error::Spec(_)
        ));
    }

    #[test]
    fn threshold_invariants_validated() {
        let mut th = RegimeThresholds::default();
        th.kappa_classical = 0.9;
        assert!(th.validate().is_err());
        let mut th = RegimeThresholds::default();
        th.t_low = 700.0;
        assert!(th.validate().is_err());
    }
}
