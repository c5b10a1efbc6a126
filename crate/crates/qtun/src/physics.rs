//! Physical constants, 1D barrier models, and transmission probabilities.
//!
//! Internal units are SI per molecule (J, kg, m, s, rad/s). Conversions to
//! the external units (kJ/mol, amu, cm^-1, Angstrom) happen only at the I/O
//! boundary via the helpers in [`units`].

use crate::error::{Error, Result};
use crate::numeric::{log_cosh, log_sinh, log_sub_exp, softplus};
use serde::{Deserialize, Serialize};

/// Fundamental constants (CODATA-2018).
#[derive(Debug, Clone, Copy)]
pub struct Constants {
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Planck constant, J·s.
    pub h: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Molar gas constant, J/(mol·K).
    pub r: f64,
    /// Atomic mass unit, kg.
    pub amu: f64,
    /// Angular frequency per wavenumber, rad/s per cm^-1.
    pub cm1_to_radps: f64,
    /// Energy per molecule per kJ/mol.
    pub kjmol_to_j: f64,
}

/// Speed of light, m/s (exact).
const C_LIGHT: f64 = 2.997_924_58e8;
/// Avogadro constant, 1/mol (exact).
const N_A: f64 = 6.022_140_76e23;

pub const CODATA: Constants = Constants {
    k_b: 1.380_649e-23,
    h: 6.626_070_15e-34,
    hbar: 6.626_070_15e-34 / (2.0 * std::f64::consts::PI),
    r: 1.380_649e-23 * N_A,
    amu: 1.660_539_066_60e-27,
    cm1_to_radps: 2.0 * std::f64::consts::PI * C_LIGHT * 100.0,
    kjmol_to_j: 1000.0 / N_A,
};

/// Unit conversions for the I/O boundary.
pub mod units {
    use super::CODATA;

    pub fn kjmol_to_j(v: f64) -> f64 {
        v * CODATA.kjmol_to_j
    }
    pub fn j_to_kjmol(v: f64) -> f64 {
        v / CODATA.kjmol_to_j
    }
    pub fn amu_to_kg(v: f64) -> f64 {
        v * CODATA.amu
    }
    pub fn kg_to_amu(v: f64) -> f64 {
        v / CODATA.amu
    }
    pub fn cm1_to_radps(v: f64) -> f64 {
        v * CODATA.cm1_to_radps
    }
    pub fn radps_to_cm1(v: f64) -> f64 {
        v / CODATA.cm1_to_radps
    }
    pub fn angstrom_to_m(v: f64) -> f64 {
        v * 1e-10
    }
    pub fn m_to_angstrom(v: f64) -> f64 {
        v * 1e10
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierShape {
    Eckart,
    Parabolic,
    Rectangular,
}

/// A 1D barrier in the exoergic-forward convention: reactant channel at 0,
/// product channel at `v_forward - v_reverse`, barrier top at `v_forward`.
///
/// For Eckart and parabolic shapes the geometry is calibrated from the
/// barrier-top imaginary frequency `omega_imag` using the reference mass
/// `m_ref` (the reduced mass of the H isotopologue of the owning system), so
/// isotopes share one geometric barrier and mass enters only through the
/// tunneling action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub shape: BarrierShape,
    /// Forward barrier height, J/molecule.
    pub v_forward: f64,
    /// Reverse barrier height, J/molecule.
    pub v_reverse: f64,
    /// Barrier-top imaginary angular frequency, rad/s (Eckart/parabolic).
    pub omega_imag: f64,
    /// Barrier width, m (rectangular only).
    pub width: f64,
    /// Curvature calibration mass, kg (Eckart/parabolic).
    pub m_ref: f64,
}

impl BarrierSpec {
    pub fn eckart(v_forward: f64, v_reverse: f64, omega_imag: f64, m_ref: f64) -> Self {
        BarrierSpec {
            shape: BarrierShape::Eckart,
            v_forward,
            v_reverse,
            omega_imag,
            width: 0.0,
            m_ref,
        }
    }

    pub fn parabolic(v_forward: f64, omega_imag: f64, m_ref: f64) -> Self {
        BarrierSpec {
            shape: BarrierShape::Parabolic,
            v_forward,
            v_reverse: v_forward,
            omega_imag,
            width: 0.0,
            m_ref,
        }
    }

    pub fn rectangular(v_forward: f64, width: f64) -> Self {
        BarrierSpec {
            shape: BarrierShape::Rectangular,
            v_forward,
            v_reverse: v_forward,
            omega_imag: 0.0,
            width,
            m_ref: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_forward > 0.0 && self.v_forward.is_finite()) {
            return Err(Error::Spec(format!(
                "v_forward must be positive and finite, got {}",
                self.v_forward
            )));
        }
        if !(self.v_reverse > 0.0 && self.v_reverse <= self.v_forward) {
            return Err(Error::Spec(format!(
                "v_reverse must satisfy 0 < v_reverse <= v_forward, got {}",
                self.v_reverse
            )));
        }
        match self.shape {
            BarrierShape::Eckart | BarrierShape::Parabolic => {
                if !(self.omega_imag > 0.0 && self.omega_imag.is_finite()) {
                    return Err(Error::Spec("omega_imag must be positive".into()));
                }
                if !(self.m_ref > 0.0 && self.m_ref.is_finite()) {
                    return Err(Error::Spec("m_ref must be positive".into()));
                }
                if self.shape == BarrierShape::Parabolic && self.v_reverse != self.v_forward {
                    return Err(Error::Spec(
                        "parabolic barriers are symmetric (v_reverse = v_forward)".into(),
                    ));
                }
            }
            BarrierShape::Rectangular => {
                if !(self.width > 0.0 && self.width.is_finite()) {
                    return Err(Error::Spec("width must be positive".into()));
                }
                if self.v_reverse != self.v_forward {
                    return Err(Error::Spec(
                        "rectangular barriers are symmetric (v_reverse = v_forward)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Barrier asymmetry eta = (v_forward - v_reverse) / v_forward in [0, 1).
    pub fn eta(&self) -> f64 {
        (self.v_forward - self.v_reverse) / self.v_forward
    }

    /// Product-channel asymptote, J/molecule.
    pub fn delta_v(&self) -> f64 {
        self.v_forward - self.v_reverse
    }

    /// Eckart length scale c such that V(x) with u = x/c has curvature
    /// -m_ref * omega_imag^2 at the maximum.
    fn eckart_length(&self) -> f64 {
        let vf = self.v_forward;
        let vr = self.v_reverse;
        (2.0 * vf * vr).sqrt() / ((vf.sqrt() + vr.sqrt()) * self.m_ref.sqrt() * self.omega_imag)
    }

    /// Position of the barrier maximum.
    pub fn x_max(&self) -> f64 {
        match self.shape {
            BarrierShape::Eckart => {
                let a = self.delta_v();
                let b = eckart_b(self.v_forward, self.v_reverse);
                let s_star = (a + b) / (2.0 * b);
                self.eckart_length() * (s_star / (1.0 - s_star)).ln()
            }
            BarrierShape::Parabolic => 0.0,
            BarrierShape::Rectangular => 0.5 * self.width,
        }
    }
}

fn eckart_b(vf: f64, vr: f64) -> f64 {
    let s = vf.sqrt() + vr.sqrt();
    s * s
}

/// Barrier potential V(x), J/molecule.
pub fn potential(spec: &BarrierSpec, x: f64) -> Result<f64> {
    spec.validate()?;
    Ok(potential_unchecked(spec, x))
}

fn potential_unchecked(spec: &BarrierSpec, x: f64) -> f64 {
    match spec.shape {
        BarrierShape::Eckart => {
            let a = spec.delta_v();
            let b = eckart_b(spec.v_forward, spec.v_reverse);
            let u = x / spec.eckart_length();
            // logistic, stable for large |u|
            let s = if u >= 0.0 {
                1.0 / (1.0 + (-u).exp())
            } else {
                let e = u.exp();
                e / (1.0 + e)
            };
            a * s + b * s * (1.0 - s)
        }
        BarrierShape::Parabolic => {
            let k = spec.m_ref * spec.omega_imag * spec.omega_imag;
            (spec.v_forward - 0.5 * k * x * x).max(0.0)
        }
        BarrierShape::Rectangular => {
            if (0.0..=spec.width).contains(&x) {
                spec.v_forward
            } else {
                0.0
            }
        }
    }
}

/// Classical turning points x1 < x2 with V(x1) = V(x2) = E.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningPoints {
    pub x1: f64,
    pub x2: f64,
}

/// Solve V(x) = E on both sides of the barrier maximum.
///
/// Valid for delta_v < E < v_forward (two real roots). Bracketed bisection
/// refined by Newton, relative tolerance 1e-12.
pub fn turning_points(spec: &BarrierSpec, energy: f64) -> Result<TurningPoints> {
    spec.validate()?;
    if !(energy > spec.delta_v() && energy > 0.0 && energy < spec.v_forward) {
        return Err(Error::Domain(format!(
            "turning points require max(0, delta_v) < E < v_forward, got E = {energy}"
        )));
    }
    match spec.shape {
        BarrierShape::Rectangular => Ok(TurningPoints {
            x1: 0.0,
            x2: spec.width,
        }),
        BarrierShape::Parabolic => {
            let k = spec.m_ref * spec.omega_imag * spec.omega_imag;
            let d = (2.0 * (spec.v_forward - energy) / k).sqrt();
            Ok(TurningPoints { x1: -d, x2: d })
        }
        BarrierShape::Eckart => {
            let c = spec.eckart_length();
            let xm = spec.x_max();
            let x1 = solve_crossing(spec, energy, xm, -c)?;
            let x2 = solve_crossing(spec, energy, xm, c)?;
            Ok(TurningPoints { x1, x2 })
        }
    }
}

/// Find the root of V(x) - E on one side of the maximum, expanding the
/// bracket geometrically in direction `step` and then bisecting.
fn solve_crossing(spec: &BarrierSpec, energy: f64, x_max: f64, step: f64) -> Result<f64> {
    let mut inner = x_max;
    let mut d = step;
    let mut outer = x_max + d;
    let mut n = 0;
    while potential_unchecked(spec, outer) > energy {
        inner = outer;
        d *= 2.0;
        outer = x_max + d;
        n += 1;
        if n > 200 {
            return Err(Error::Numerical("turning-point bracket did not close".into()));
        }
    }
    // bisection on [inner, outer] (orientation-agnostic)
    let mut a = inner;
    let mut b = outer;
    let scale = spec.eckart_length().abs().max(1e-300);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if potential_unchecked(spec, mid) > energy {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a).abs() <= 1e-12 * (mid.abs().max(scale)) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// A transmission probability carried in log domain to avoid underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    /// Natural log of the transmission probability; 0 means P = 1.
    pub ln_p: f64,
}

impl Transmission {
    pub fn p(&self) -> f64 {
        self.ln_p.exp()
    }
}

/// WKB tunneling probability, clamped to 1 above the barrier.
///
/// P = exp(-(2/hbar) * Int_{x1}^{x2} sqrt(2m (V - E)) dx) for E below the
/// barrier top; the action integral uses adaptive Gauss-Legendre with an
/// endpoint square-root substitution (relative tolerance 1e-8).
pub fn transmission_wkb(spec: &BarrierSpec, mass: f64, energy: f64) -> Result<Transmission> {
    spec.validate()?;
    check_mass_energy(mass, energy)?;
    if energy >= spec.v_forward {
        return Ok(Transmission { ln_p: 0.0 });
    }
    if energy <= spec.delta_v() || energy == 0.0 {
        // product channel closed (or zero energy): no transmission
        return Ok(Transmission {
            ln_p: f64::NEG_INFINITY,
        });
    }
    let action = barrier_action(spec, mass, energy)?;
    Ok(Transmission {
        ln_p: -2.0 * action / CODATA.hbar,
    })
}

/// Action integral Int sqrt(2m (V - E)) dx between the turning points.
pub fn barrier_action(spec: &BarrierSpec, mass: f64, energy: f64) -> Result<f64> {
    let tp = turning_points(spec, energy)?;
    let integrand = |x: f64| {
        let v = potential_unchecked(spec, x);
        (2.0 * mass * (v - energy).max(0.0)).sqrt()
    };
    match spec.shape {
        BarrierShape::Rectangular => {
            // integrand is constant; no endpoint singularity
            adaptive_gl(&integrand, tp.x1, tp.x2, 1e-10)
        }
        _ => {
            // sqrt singularity at both turning points: substitute
            // x = x1 + t^2 on the left half and x = x2 - t^2 on the right.
            let xm = spec.x_max();
            let left = {
                let t_max = (xm - tp.x1).sqrt();
                let f = |t: f64| 2.0 * t * integrand(tp.x1 + t * t);
                adaptive_gl(&f, 0.0, t_max, 1e-8)?
            };
            let right = {
                let t_max = (tp.x2 - xm).sqrt();
                let f = |t: f64| 2.0 * t * integrand(tp.x2 - t * t);
                adaptive_gl(&f, 0.0, t_max, 1e-8)?
            };
            Ok(left + right)
        }
    }
}

/// Panel-doubling Gauss-Legendre integration in the linear domain.
fn adaptive_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let (xs, ws) = crate::numeric::gauss_legendre(20);
    let eval = |panels: usize| {
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let c = 0.5 * h;
            for (x, w) in xs.iter().zip(&ws) {
                s += w * f(mid + c * x);
            }
        }
        s * 0.5 * h
    };
    let mut panels = 4;
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let cur = eval(panels);
        if (cur - prev).abs() <= rel_tol * cur.abs().max(f64::MIN_POSITIVE) {
            return Ok(cur);
        }
        if panels >= 1 << 14 {
            return Err(Error::Numerical(format!(
                "action quadrature did not converge ({panels} panels)"
            )));
        }
        prev = cur;
    }
}

fn check_mass_energy(mass: f64, energy: f64) -> Result<()> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Spec(format!("mass must be positive, got {mass}")));
    }
    if !(energy >= 0.0 && energy.is_finite()) {
        return Err(Error::Spec(format!("energy must be >= 0, got {energy}")));
    }
    Ok(())
}

/// Exact quantum transmission (oracle for the WKB route).
///
/// Parabolic: Kemble formula. Eckart: closed-form hyperbolic transmission of
/// the asymmetric Eckart barrier. Rectangular: plane-wave matching. All are
/// continuous in E, permit quantum reflection above the barrier, and are
/// evaluated in log domain.
pub fn transmission_exact(spec: &BarrierSpec, mass: f64, energy: f64) -> Result<Transmission> {
    spec.validate()?;
    check_mass_energy(mass, energy)?;
    let ln_p = match spec.shape {
        BarrierShape::Parabolic => {
            // effective frequency for the tunneling mass on the shared curvature
            let omega_m = spec.omega_imag * (spec.m_ref / mass).sqrt();
            let z = 2.0 * std::f64::consts::PI * (spec.v_forward - energy) / (CODATA.hbar * omega_m);
            -softplus(z)
        }
        BarrierShape::Eckart => {
            if energy <= spec.delta_v() || energy == 0.0 {
                f64::NEG_INFINITY
            } else {
                eckart_exact_ln_p(spec, mass, energy)
            }
        }
        BarrierShape::Rectangular => {
            if energy == 0.0 {
                f64::NEG_INFINITY
            } else {
                rectangular_exact_ln_p(spec, mass, energy)
            }
        }
    };
    Ok(Transmission { ln_p })
}

fn eckart_exact_ln_p(spec: &BarrierSpec, mass: f64, energy: f64) -> f64 {
    let omega_m = spec.omega_imag * (spec.m_ref / mass).sqrt();
    let hbar_w = CODATA.hbar * omega_m;
    let alpha1 = 2.0 * std::f64::consts::PI * spec.v_forward / hbar_w;
    let alpha2 = 2.0 * std::f64::consts::PI * spec.v_reverse / hbar_w;
    let eps = energy / spec.v_forward;
    let denom_scale = 1.0 / alpha1.sqrt() + 1.0 / alpha2.sqrt();
    // arguments of the cosh terms (the conventional 2*pi*a, 2*pi*b, 2*pi*d)
    let two_pi_a = 2.0 * (alpha1 * eps).sqrt() / denom_scale;
    let two_pi_b = 2.0 * ((eps - 1.0) * alpha1 + alpha2).max(0.0).sqrt() / denom_scale;
    let d2 = alpha1 * alpha2 - std::f64::consts::PI * std::f64::consts::PI / 4.0;
    // ln[cosh(a+b) - cosh(a-b)] - ln[cosh(a+b) + cosh_or_cos(d)]
    let ln_num = log_sub_exp(log_cosh(two_pi_a + two_pi_b), log_cosh(two_pi_a - two_pi_b));
    let ln_den = if d2 >= 0.0 {
        let two_pi_d = 2.0 * d2.sqrt();
        crate::numeric::log_add_exp(log_cosh(two_pi_a + two_pi_b), log_cosh(two_pi_d))
    } else {
        let cosd = (2.0 * (-d2).sqrt()).cos();
        let lc = log_cosh(two_pi_a + two_pi_b);
        lc + (cosd * (-lc).exp()).ln_1p()
    };
    ln_num - ln_den
}

fn rectangular_exact_ln_p(spec: &BarrierSpec, mass: f64, energy: f64) -> f64 {
    let v = spec.v_forward;
    let l = spec.width;
    let hbar = CODATA.hbar;
    if energy < v {
        let kappa = (2.0 * mass * (v - energy)).sqrt() / hbar;
        // P = 1 / (1 + V^2 sinh^2(kappa L) / (4 E (V - E)))
        let ln_term =
            2.0 * v.ln() + 2.0 * log_sinh(kappa * l) - (4.0 * energy * (v - energy)).ln();
        -softplus(ln_term)
    } else if energy > v {
        let k = (2.0 * mass * (energy - v)).sqrt() / hbar;
        let s = (k * l).sin();
        let term = v * v * s * s / (4.0 * energy * (energy - v));
        -term.ln_1p()
    } else {
        // E = V limit: sinh(kL)/sqrt(V-E) -> L sqrt(2m)/hbar
        let term = mass * v * l * l / (2.0 * hbar * hbar);
        -term.ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kj(v: f64) -> f64 {
        units::kjmol_to_j(v)
    }

    fn sample_eckart() -> BarrierSpec {
        BarrierSpec::eckart(
            kj(90.0),
            kj(60.0),
            units::cm1_to_radps(1000.0),
            units::amu_to_kg(1.0),
        )
    }

    #[test]
    fn hbar_is_h_over_two_pi() {
        assert_relative_eq!(
            CODATA.hbar,
            CODATA.h / (2.0 * std::f64::consts::PI),
            max_relative = 1e-16
        );
        assert_relative_eq!(CODATA.r, 8.314_462_618, max_relative = 1e-9);
    }

    #[test]
    fn eckart_asymptotes_and_max() {
        let spec = sample_eckart();
        let c = spec.eckart_length();
        assert!(potential(&spec, -60.0 * c).unwrap() < kj(90.0) * 1e-12);
        assert_relative_eq!(
            potential(&spec, 60.0 * c).unwrap(),
            kj(30.0),
            max_relative = 1e-10
        );
        assert_relative_eq!(
            potential(&spec, spec.x_max()).unwrap(),
            kj(90.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn eckart_symmetric_is_mirror_symmetric() {
        let spec = BarrierSpec::eckart(
            kj(80.0),
            kj(80.0),
            units::cm1_to_radps(1200.0),
            units::amu_to_kg(1.0),
        );
        let xm = spec.x_max();
        for d in [1e-11, 5e-11, 2e-10] {
            assert_relative_eq!(
                potential(&spec, xm + d).unwrap(),
                potential(&spec, xm - d).unwrap(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn eckart_curvature_matches_omega() {
        // numeric second derivative at the maximum = -m_ref * omega^2
        for (vf, vr, w) in [(90.0, 60.0, 1000.0), (120.0, 120.0, 600.0), (70.0, 40.0, 1500.0)] {
            let m_ref = units::amu_to_kg(1.1);
            let spec = BarrierSpec::eckart(kj(vf), kj(vr), units::cm1_to_radps(w), m_ref);
            let xm = spec.x_max();
            let h = 1e-13;
            let f = |x: f64| potential(&spec, x).unwrap();
            // 4th-order central stencil keeps truncation below the 1e-6 gate
            let d2 = (-f(xm + 2.0 * h) + 16.0 * f(xm + h) - 30.0 * f(xm) + 16.0 * f(xm - h)
                - f(xm - 2.0 * h))
                / (12.0 * h * h);
            let expect = -m_ref * spec.omega_imag * spec.omega_imag;
            assert_relative_eq!(d2, expect, max_relative = 1e-6);
        }
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let bad = BarrierSpec::eckart(kj(-5.0), kj(1.0), 1.0, 1.0);
        assert!(matches!(potential(&bad, 0.0), Err(Error::Spec(_))));
        let bad = BarrierSpec::eckart(kj(50.0), kj(60.0), 1.0, 1.0);
        assert!(bad.validate().is_err());
        let bad = BarrierSpec::rectangular(kj(50.0), -1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rectangular_turning_points_are_edges() {
        let spec = BarrierSpec::rectangular(kj(50.0), 0.5e-10);
        let tp = turning_points(&spec, kj(20.0)).unwrap();
        assert_eq!(tp.x1, 0.0);
        assert_eq!(tp.x2, 0.5e-10);
    }

    #[test]
    fn parabolic_turning_points_close_at_top() {
        let spec = BarrierSpec::parabolic(kj(80.0), units::cm1_to_radps(1000.0), units::amu_to_kg(1.0));
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let tp = turning_points(&spec, kj(80.0 - eps)).unwrap();
            let w = tp.x2 - tp.x1;
            assert!(w > 0.0 && w < last);
            last = w;
        }
    }

    #[test]
    fn symmetric_eckart_turning_points_mirror() {
        let spec = BarrierSpec::eckart(
            kj(100.0),
            kj(100.0),
            units::cm1_to_radps(900.0),
            units::amu_to_kg(1.0),
        );
        let tp = turning_points(&spec, kj(50.0)).unwrap();
        let xm = spec.x_max();
        assert_relative_eq!(tp.x1, 2.0 * xm - tp.x2, epsilon = 1e-12 * spec.eckart_length());
        let v1 = potential(&spec, tp.x1).unwrap();
        assert_relative_eq!(v1, kj(50.0), max_relative = 1e-9);
    }

    #[test]
    fn turning_points_domain_errors() {
        let spec = sample_eckart();
        assert!(turning_points(&spec, kj(95.0)).is_err());
        assert!(turning_points(&spec, kj(10.0)).is_err()); // below product channel
    }

    #[test]
    fn wkb_clamps_above_barrier() {
        let spec = sample_eckart();
        let m = units::amu_to_kg(1.0);
        assert_eq!(transmission_wkb(&spec, m, kj(90.0)).unwrap().ln_p, 0.0);
        assert_eq!(transmission_wkb(&spec, m, kj(150.0)).unwrap().ln_p, 0.0);
    }

    #[test]
    fn wkb_mass_scaling_is_sqrt() {
        let spec = sample_eckart();
        let m = units::amu_to_kg(1.0);
        let e = kj(70.0);
        let p1 = transmission_wkb(&spec, m, e).unwrap().ln_p;
        let p4 = transmission_wkb(&spec, 4.0 * m, e).unwrap().ln_p;
        assert_relative_eq!(p4, 2.0 * p1, max_relative = 1e-7);
    }

    #[test]
    fn rectangular_wkb_matches_closed_form() {
        // V - E = 50 kJ/mol, m = 1 amu, L = 0.5 A -> P ~ 1.4e-7
        let spec = BarrierSpec::rectangular(kj(70.0), 0.5e-10);
        let m = units::amu_to_kg(1.0);
        let e = kj(20.0);
        let exact = -2.0 * 0.5e-10 * (2.0 * m * kj(50.0)).sqrt() / CODATA.hbar;
        let got = transmission_wkb(&spec, m, e).unwrap().ln_p;
        assert_relative_eq!(got, exact, max_relative = 1e-10);
        assert_relative_eq!(got.exp(), 1.45e-7, max_relative = 0.05);
    }

    #[test]
    fn kemble_is_half_at_barrier_top() {
        let spec = BarrierSpec::parabolic(kj(80.0), units::cm1_to_radps(1000.0), units::amu_to_kg(1.0));
        let p = transmission_exact(&spec, units::amu_to_kg(1.0), kj(80.0)).unwrap();
        assert_relative_eq!(p.p(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn transmission_vanishes_at_low_energy() {
        let m = units::amu_to_kg(1.0);
        for spec in [
            sample_eckart(),
            BarrierSpec::parabolic(kj(80.0), units::cm1_to_radps(1000.0), m),
            BarrierSpec::rectangular(kj(80.0), 1e-10),
        ] {
            let p = transmission_exact(&spec, m, kj(1e-6)).unwrap().p();
            assert!(p < 1e-10, "shape {:?}: P = {p}", spec.shape);
        }
    }

    #[test]
    fn eckart_deep_tunneling_wkb_agrees_with_exact() {
        let m = units::amu_to_kg(1.0);
        let mut compared = 0;
        for (vf, vr, w) in [(90.0, 60.0, 800.0), (120.0, 120.0, 1200.0), (100.0, 70.0, 1500.0)] {
            let spec = BarrierSpec::eckart(kj(vf), kj(vr), units::cm1_to_radps(w), m);
            for frac in [0.35, 0.5, 0.65] {
                let e = spec.delta_v() + frac * (spec.v_forward - spec.delta_v());
                let exact = transmission_exact(&spec, m, e).unwrap().ln_p;
                if exact > (1e-4_f64).ln() {
                    continue;
                }
                let wkb = transmission_wkb(&spec, m, e).unwrap().ln_p;
                assert!(
                    (wkb - exact).abs() <= 0.05 * exact.abs(),
                    "vf={vf} vr={vr} w={w} frac={frac}: wkb={wkb} exact={exact}"
                );
                compared += 1;
            }
        }
        assert!(compared >= 5, "deep-tunneling comparison was vacuous");
    }

    #[test]
    fn parabolic_wkb_agrees_with_kemble_asymptotically() {
        let m = units::amu_to_kg(1.0);
        let spec = BarrierSpec::parabolic(kj(80.0), units::cm1_to_radps(1000.0), m);
        for e_kj in [10.0, 30.0, 50.0, 65.0] {
            let e = kj(e_kj);
            let kemble = transmission_exact(&spec, m, e).unwrap().ln_p;
            if kemble > (1e-3_f64).ln() {
                continue;
            }
            let wkb = transmission_wkb(&spec, m, e).unwrap().ln_p;
            assert!(
                (wkb - kemble).abs() <= 0.01 * kemble.abs(),
                "E={e_kj}: wkb={wkb} kemble={kemble}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transmission_is_a_probability(
            vf in 20.0..200.0f64,
            eta in 0.0..0.9f64,
            w in 300.0..1800.0f64,
            m_amu in 0.5..3.0f64,
            e_frac in 0.0..2.0f64,
        ) {
            let m = units::amu_to_kg(m_amu);
            let specs = [
                BarrierSpec::eckart(kj(vf), kj(vf * (1.0 - eta)), units::cm1_to_radps(w), m),
                BarrierSpec::parabolic(kj(vf), units::cm1_to_radps(w), m),
                BarrierSpec::rectangular(kj(vf), 0.8e-10),
            ];
            let e = kj(vf) * e_frac;
            for spec in &specs {
                let p_wkb = transmission_wkb(spec, m, e)?.p();
                prop_assert!((0.0..=1.0).contains(&p_wkb));
                let p_ex = transmission_exact(spec, m, e)?.p();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p_ex));
            }
        }

        #[test]
        fn wkb_monotone_in_energy_and_mass(
            vf in 30.0..150.0f64,
            eta in 0.0..0.5f64,
            w in 400.0..1600.0f64,
        ) {
            let m = units::amu_to_kg(1.0);
            let spec = BarrierSpec::eckart(kj(vf), kj(vf * (1.0 - eta)), units::cm1_to_radps(w), m);
            let lo = spec.delta_v() + 0.1 * (spec.v_forward - spec.delta_v());
            let hi = spec.delta_v() + 0.9 * (spec.v_forward - spec.delta_v());
            let mut prev = f64::NEG_INFINITY;
            for i in 0..6 {
                let e = lo + (hi - lo) * i as f64 / 5.0;
                let lp = transmission_wkb(&spec, m, e)?.ln_p;
                prop_assert!(lp >= prev);
                prev = lp;
            }
            let e = 0.5 * (lo + hi);
            let light = transmission_wkb(&spec, m, e)?.ln_p;
            let heavy = transmission_wkb(&spec, 2.0 * m, e)?.ln_p;
            prop_assert!(heavy < light);
        }

        #[test]
        fn rectangular_action_matches_analytic(
            vf in 20.0..200.0f64,
            e_frac in 0.01..0.99f64,
            l_ang in 0.2..1.5f64,
            m_amu in 0.5..3.0f64,
        ) {
            let spec = BarrierSpec::rectangular(kj(vf), units::angstrom_to_m(l_ang));
            let m = units::amu_to_kg(m_amu);
            let e = kj(vf) * e_frac;
            let analytic = spec.width * (2.0 * m * (spec.v_forward - e)).sqrt();
            let got = barrier_action(&spec, m, e)?;
            prop_assert!((got - analytic).abs() <= 1e-10 * analytic);
        }
    }
}
