//! Stable log-domain primitives and Gauss-Legendre quadrature rules.

/// ln(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln(e^a - e^b) for a >= b; returns NEG_INFINITY when a == b.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b);
    if b == f64::NEG_INFINITY {
        return a;
    }
    let d = b - a; // <= 0
    if d == 0.0 {
        return f64::NEG_INFINITY;
    }
    a + (-d.exp()).ln_1p()
}

/// ln(sum_i e^{x_i}) over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// ln(cosh(x)) without overflow.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// ln(sinh(x)) for x > 0, without overflow.
pub fn log_sinh(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial from the Chebyshev initial
/// guess; converges to machine precision in a handful of steps.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
pub fn integrate_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        s += w * f(mid + c * x);
    }
    c * s
}

/// Adaptive panel-doubling Gauss-Legendre integration of a nonnegative
/// integrand given in log domain. Returns ln of the integral over [a, b].
///
/// Each refinement level splits [a, b] into `panels` uniform panels with a
/// 20-point rule per panel, combined by log-sum-exp; the panel count doubles
/// until two successive levels agree to `rel_tol` or `max_panels` is hit.
pub fn log_integrate_adaptive(
    ln_f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<f64, String> {
    assert!(b > a);
    let (xs, ws) = gauss_legendre(20);
    let eval = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        let mut terms = Vec::with_capacity(panels * xs.len());
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let c = 0.5 * h;
            for (x, w) in xs.iter().zip(&ws) {
                let v = ln_f(mid + c * x);
                if v > f64::NEG_INFINITY {
                    terms.push(w.ln() + c.ln() + v);
                }
            }
        }
        log_sum_exp(&terms)
    };
    let mut panels = 8;
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let cur = eval(panels);
        let scale = cur.abs().max(1.0);
        if (cur - prev).abs() <= rel_tol * scale
            || (prev == f64::NEG_INFINITY && cur == f64::NEG_INFINITY)
        {
            return Ok(cur);
        }
        if panels >= max_panels {
            return Err(format!(
                "quadrature did not converge: {panels} panels, last delta {:.3e}",
                (cur - prev).abs()
            ));
        }
        prev = cur;
    }
}
