// Independent oracle: the closed-form Eckart transmission is checked against
// a direct Numerov integration of the Schroedinger equation with plane-wave
// matching. The Numerov route shares no code with the implementation.
use qtun::physics::{potential, transmission_exact, units, BarrierSpec, CODATA};

#[derive(Clone, Copy)]
struct C64 {
    re: f64,
    im: f64,
}
impl C64 {
    fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }
    fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: C64) -> C64 {
        C64::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: C64) -> C64 {
        C64::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn scale(self, s: f64) -> C64 {
        C64::new(self.re * s, self.im * s)
    }
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

fn numerov_transmission(spec: &BarrierSpec, mass: f64, e: f64) -> f64 {
    let hbar = CODATA.hbar;
    let dv = spec.v_forward - spec.v_reverse;
    let k1 = (2.0 * mass * e).sqrt() / hbar;
    let k2 = (2.0 * mass * (e - dv)).sqrt() / hbar;
    // integration window wide enough that V has reached its asymptotes
    let xm = spec.x_max();
    let span = 40.0 * (spec.v_forward / (mass * spec.omega_imag * spec.omega_imag)).sqrt();
    let x_l = xm - span;
    let x_r = xm + span;
    let n = 200_000usize;
    let h = (x_r - x_l) / n as f64;
    let q = |x: f64| 2.0 * mass * (e - potential(spec, x).unwrap()) / (hbar * hbar);
    // start at the right with outgoing wave e^{i k2 x}
    let mut psi_next = C64::new((k2 * x_r).cos(), (k2 * x_r).sin());
    let x_prev = x_r - h;
    let mut psi = C64::new((k2 * x_prev).cos(), (k2 * x_prev).sin());
    let mut x = x_prev;
    let h2 = h * h;
    for _ in 0..n - 1 {
        let f_next = 1.0 + h2 / 12.0 * q(x + h);
        let f_cur = 1.0 - 5.0 * h2 / 12.0 * q(x);
        let f_prev = 1.0 + h2 / 12.0 * q(x - h);
        let psi_prev = psi.scale(2.0 * f_cur).sub(psi_next.scale(f_next)).scale(1.0 / f_prev);
        psi_next = psi;
        psi = psi_prev;
        x -= h;
    }
    // psi at x and psi_next at x+h; derivative via central-ish difference
    let dpsi = psi_next.sub(psi).scale(1.0 / h);
    let xm_ = x + 0.5 * h;
    let psim = psi.add(psi_next).scale(0.5);
    // psi = a e^{ik1 x} + b e^{-ik1 x}; a = (psi + dpsi/(i k1))/2 * e^{-i k1 x}
    let inv_ik1 = C64::new(0.0, -1.0 / k1);
    let a_raw = psim.add(dpsi.mul(inv_ik1)).scale(0.5);
    let phase = C64::new((k1 * xm_).cos(), -(k1 * xm_).sin());
    let a = a_raw.mul(phase);
    (k2 / k1) / a.abs2()
}

#[test]
fn eckart_exact_matches_numerov() {
    let m = units::amu_to_kg(1.0);
    for (vf, vr, w, e_kj) in [
        (30.0f64, 20.0f64, 800.0f64, 18.0f64),
        (30.0, 30.0, 1200.0, 20.0),
        (25.0, 15.0, 600.0, 22.0),
        (30.0, 20.0, 800.0, 35.0), // above barrier
    ] {
        let spec = BarrierSpec::eckart(
            units::kjmol_to_j(vf),
            units::kjmol_to_j(vr),
            units::cm1_to_radps(w),
            m,
        );
        let e = units::kjmol_to_j(e_kj);
        let exact = transmission_exact(&spec, m, e).unwrap().p();
        let num = numerov_transmission(&spec, m, e);
        let rel = (exact - num).abs() / num.abs().max(1e-300);
        println!("vf={vf} vr={vr} w={w} E={e_kj}: exact={exact:.6e} numerov={num:.6e} rel={rel:.3e}");
        assert!(rel < 0.02, "mismatch: exact={exact:e} numerov={num:e}");
    }
}
