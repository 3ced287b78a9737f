//! Adaptive 1D quadrature used as the independent integration oracle.
//!
//! A 15-point Gauss–Legendre panel is bisected adaptively; the local error
//! estimate is the difference between the one-panel and two-panel values.
//! Integration over ℝ is reduced to a finite window [−T, T] whose tail mass
//! is controlled by an analytic bound supplied per call.

use crate::error::Error;
use crate::Result;

/// Tolerances and subdivision budget for the adaptive quadrature oracle.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances must be positive"));
        }
        if max_subdivisions < 1 {
            return Err(Error::invalid("max_subdivisions must be >= 1"));
        }
        Ok(QuadratureSpec { abs_tol, rel_tol, max_subdivisions })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-12, max_subdivisions: 4000 }
    }
}

/// Quadrature result with its accumulated error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error_estimate: f64,
}

const GL_ORDER: usize = 15;

/// Nodes and weights of the order-15 Gauss–Legendre rule on [−1, 1],
/// computed once by Newton iteration on P₁₅.
fn gl_nodes() -> &'static [(f64, f64); GL_ORDER] {
    use std::sync::OnceLock;
    static NODES: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut out = [(0.0, 0.0); GL_ORDER];
        for (i, slot) in out.iter_mut().enumerate() {
            // Chebyshev-like initial guess for the i-th root of P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // Evaluate P_n and P_n' by the three-term recurrence.
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            *slot = (x, w);
        }
        out
    })
}

fn gl_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for &(x, w) in gl_nodes() {
        sum += w * f(c + h * x);
    }
    sum * h
}

/// Adaptive integration of `f` over the finite interval [a, b].
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Quad> {
    // Work stack of (a, b, whole-panel value, local tolerance).
    let whole = gl_panel(f, a, b);
    let mut stack = vec![(a, b, whole, spec.abs_tol.max(spec.rel_tol * whole.abs()))];
    let mut value = 0.0;
    let mut err = 0.0;
    let mut splits = 0usize;
    while let Some((a, b, iw, tol)) = stack.pop() {
        let m = 0.5 * (a + b);
        let il = gl_panel(f, a, m);
        let ir = gl_panel(f, m, b);
        let diff = (il + ir - iw).abs();
        if diff <= tol || (b - a) < 1e-14 * (b.abs() + a.abs() + 1.0) {
            value += il + ir;
            err += diff;
        } else {
            splits += 1;
            if splits > spec.max_subdivisions {
                return Err(Error::Convergence(format!(
                    "adaptive quadrature exceeded {} subdivisions on [{a}, {b}]",
                    spec.max_subdivisions
                )));
            }
            stack.push((a, m, il, 0.5 * tol));
            stack.push((m, b, ir, 0.5 * tol));
        }
    }
    Ok(Quad { value, error_estimate: err })
}

/// Adaptive integration of `f` over ℝ.
///
/// `tail_bound(t)` must bound ∫_{|y|≥t} |f(y)| dy analytically; the window
/// half-width T is doubled from 1 until the bound drops below abs_tol/10.
pub fn quad_oracle(
    f: &dyn Fn(f64) -> f64,
    spec: &QuadratureSpec,
    tail_bound: &dyn Fn(f64) -> f64,
) -> Result<Quad> {
    let mut t = 1.0_f64;
    let mut guard = 0;
    while tail_bound(t) > spec.abs_tol / 10.0 {
        t *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(Error::Convergence(
                "tail bound did not fall below abs_tol/10".into(),
            ));
        }
    }
    // A geometric ladder of subwindows keeps the adaptive bisection from
    // accepting a spuriously flat panel on a window much wider than the
    // integrand's support.
    let mut cuts = vec![0.0_f64];
    let mut c = 1.0_f64.min(t);
    while c < t {
        cuts.push(c);
        c *= 4.0;
    }
    cuts.push(t);
    let mut value = 0.0;
    let mut err = tail_bound(t);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let right = integrate(f, a, b, spec)?;
        let left = integrate(f, -b, -a, spec)?;
        value += left.value + right.value;
        err += left.error_estimate + right.error_estimate;
    }
    Ok(Quad { value, error_estimate: err })
}
