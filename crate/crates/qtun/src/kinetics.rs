//! Thermal rate constants: classical TST rate, log-domain kappa quadrature,
//! quantum rate composition, and the kinetic isotope effect.
//!
//! Everything is computed and stored in log10; beta * E exceeds 200 at 50 K
//! for the catalog barriers, so linear-domain exponentials are never formed.

use crate::dataset::ReactionSystem;
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, log_integrate_adaptive};
use crate::physics::{transmission_exact, transmission_wkb, BarrierSpec, CODATA};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const LN10: f64 = std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState {
    /// Temperature, K.
    pub t: f64,
    /// 1 / (k_B T), 1/J.
    pub beta: f64,
}

impl ThermalState {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("temperature must be positive, got {t}")));
        }
        Ok(ThermalState {
            t,
            beta: 1.0 / (CODATA.k_b * t),
        })
    }
}

/// Transmission model used inside the kappa integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    /// WKB below the barrier, clamped to P = 1 above; guarantees kappa >= 1.
    Wkb,
    /// Closed-form quantum transmission, quantum reflection included.
    Exact,
}

/// One point of a thermal rate curve, all in log10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub t: f64,
    pub log10_k_cla: f64,
    pub log10_kappa: f64,
    pub log10_k_tun: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Isotope {
    H,
    D,
}

impl Isotope {
    pub fn label(&self) -> &'static str {
        match self {
            Isotope::H => "H",
            Isotope::D => "D",
        }
    }
}

/// log10 of the classical TST rate: k = scale * (k_B T / h) exp(-beta E).
pub fn classical_rate(state: ThermalState, e_act: f64, prefactor_scale: f64) -> f64 {
    debug_assert!(e_act >= 0.0 && prefactor_scale > 0.0);
    (prefactor_scale * CODATA.k_b * state.t / CODATA.h).log10() - state.beta * e_act / LN10
}

/// log10 of the tunneling correction factor.
///
/// kappa = [Int_0^Emax P(E) e^{-beta E} dE] / [Int_0^Emax Theta(E - Vf) e^{-beta E} dE]
///
/// The denominator is taken analytically as e^{-beta Vf} / beta. In WKB mode
/// the above-barrier numerator piece (P = 1) is also analytic, so
/// kappa = 1 + beta e^{beta Vf} * Int_{E_lo}^{Vf} P_WKB e^{-beta E} dE, which
/// keeps kappa >= 1 by construction. In exact mode the numerator is
/// integrated numerically up to E_max = Vf + 40 k_B T (Boltzmann tail below
/// e^-40 of the above-barrier contribution).
pub fn kappa(state: ThermalState, spec: &BarrierSpec, mass: f64, mode: KappaMode) -> Result<f64> {
    spec.validate()?;
    let vf = spec.v_forward;
    let beta = state.beta;
    let e_lo = spec.delta_v().max(0.0);
    let ln_kappa = match mode {
        KappaMode::Wkb => {
            let ln_f = |e: f64| match transmission_wkb(spec, mass, e) {
                Ok(tr) => tr.ln_p - beta * e,
                Err(_) => f64::NEG_INFINITY,
            };
            let ln_i = log_integrate_adaptive(&ln_f, e_lo, vf, 1e-7, 1 << 11)
                .map_err(Error::Numerical)?;
            // ln(1 + beta e^{beta Vf} I)
            log_add_exp(0.0, beta.ln() + beta * vf + ln_i)
        }
        KappaMode::Exact => {
            let ln_f = |e: f64| match transmission_exact(spec, mass, e) {
                Ok(tr) => tr.ln_p - beta * e,
                Err(_) => f64::NEG_INFINITY,
            };
            let e_max = vf + 40.0 / beta;
            // split at the barrier top where P has a kink in its derivative
            let below = log_integrate_adaptive(&ln_f, e_lo, vf, 1e-7, 1 << 11)
                .map_err(Error::Numerical)?;
            let above = log_integrate_adaptive(&ln_f, vf, e_max, 1e-7, 1 << 11)
                .map_err(Error::Numerical)?;
            let ln_num = log_add_exp(below, above);
            let ln_den = -beta * vf - beta.ln();
            ln_num - ln_den
        }
    };
    if !ln_kappa.is_finite() {
        return Err(Error::Numerical(format!(
            "kappa quadrature produced non-finite log kappa at T = {} K",
            state.t
        )));
    }
    Ok(ln_kappa / LN10)
}

/// Wigner high-temperature tunneling correction 1 + (beta hbar omega)^2 / 24.
pub fn wigner_kappa(state: ThermalState, omega_imag: f64) -> Result<f64> {
    let u = state.beta * CODATA.hbar * omega_imag;
    if u >= 2.0 * std::f64::consts::PI {
        return Err(Error::Domain(format!(
            "Wigner correction requires beta*hbar*omega < 2*pi (above the crossover temperature); got u = {u:.3}"
        )));
    }
    Ok(1.0 + u * u / 24.0)
}

/// Thermal rate curve of one isotopologue over a temperature grid.
///
/// Grid points fan out to worker threads; results are assembled in grid
/// order, so output is independent of worker count.
pub fn rate_curve(
    system: &ReactionSystem,
    isotope: Isotope,
    grid: &[f64],
    mode: KappaMode,
) -> Result<Vec<RatePoint>> {
    if grid.is_empty() {
        return Err(Error::Spec("temperature grid must be nonempty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] <= 0.0 {
        return Err(Error::Spec(
            "temperature grid must be strictly increasing and positive".into(),
        ));
    }
    let (mass, e_act) = match isotope {
        Isotope::H => (system.mass_h, system.barrier.v_forward),
        Isotope::D => (system.mass_d, system.barrier.v_forward + system.zpe_shift),
    };
    grid.par_iter()
        .map(|&t| {
            let state = ThermalState::new(t)?;
            let log10_k_cla = classical_rate(state, e_act, system.prefactor_scale);
            let log10_kappa = kappa(state, &system.barrier, mass, mode)?;
            Ok(RatePoint {
                t,
                log10_k_cla,
                log10_kappa,
                log10_k_tun: log10_k_cla + log10_kappa,
            })
        })
        .collect()
}

/// log10 KIE from matching H and D rate points.
pub fn kie(point_h: &RatePoint, point_d: &RatePoint) -> Result<f64> {
    if point_h.t != point_d.t {
        return Err(Error::Consistency(format!(
            "KIE requires equal temperatures, got {} and {}",
            point_h.t, point_d.t
        )));
    }
    Ok(point_h.log10_k_tun - point_d.log10_k_tun)
}
