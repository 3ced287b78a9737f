//! The generalized β-Gaussian distribution 𝒩_β(0,1).
//!
//! Density φ_β(y) = c_β exp(−|y|^β/β) with normalization
//! c_β = 1/(2 β^{1/β} Γ(1+1/β)). β = 2 is the standard normal, β = 1 the
//! Laplace distribution; β → ∞ approaches the uniform law on [−1, 1].
//!
//! The CDF reduces to the regularized upper incomplete gamma function:
//! for y < 0, Φ_β(y) = ½ Q(1/β, |y|^β/β), and by symmetry for y > 0.

use crate::error::Error;
use crate::special::{gamma_q, gamma_upper, ln_gamma};
use crate::Result;

pub use crate::quadrature::{quad_oracle, Quad, QuadratureSpec};

/// Inverse-CDF arguments are clamped to this range; shifted lattice points
/// never hit 0 or 1 exactly but can approach them.
pub const INV_CDF_CLAMP: (f64, f64) = (1e-300, 1.0 - 1e-16);

/// The univariate β-Gaussian distribution 𝒩_β(0,1).
#[derive(Debug, Clone, Copy)]
pub struct BetaGaussian {
    beta: f64,
    c_beta: f64,
}

impl BetaGaussian {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        let c_beta = (-std::f64::consts::LN_2
            - beta.ln() / beta
            - ln_gamma(1.0 + 1.0 / beta))
        .exp();
        Ok(BetaGaussian { beta, c_beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The normalization constant c_β = 1/(2 β^{1/β} Γ(1+1/β)).
    pub fn c_beta(&self) -> f64 {
        self.c_beta
    }

    /// φ_β(y) = c_β exp(−|y|^β/β).
    pub fn density(&self, y: f64) -> f64 {
        self.c_beta * (-y.abs().powf(self.beta) / self.beta).exp()
    }

    /// Φ_β(y), strictly increasing with Φ_β(0) = ½ and Φ_β(−y) = 1 − Φ_β(y).
    pub fn cdf(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.5;
        }
        let x = y.abs().powf(self.beta) / self.beta;
        // Saturates gracefully: Q underflows to 0 for large |y|.
        let half_q = 0.5 * gamma_q(1.0 / self.beta, x).unwrap_or(0.0);
        if y < 0.0 {
            half_q
        } else {
            1.0 - half_q
        }
    }

    /// Φ_β^{-1}(t) for t ∈ (0, 1).
    ///
    /// Bracketed Newton iteration on the CDF; steps leaving the bracket fall
    /// back to bisection (the density is non-Lipschitz at 0 for β < 1, so an
    /// unsafeguarded Newton can overshoot).
    pub fn inv_cdf(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("inv_cdf requires t in (0,1), got {t}")));
        }
        let t = t.clamp(INV_CDF_CLAMP.0, INV_CDF_CLAMP.1);
        if t == 0.5 {
            return Ok(0.0);
        }
        if t > 0.5 {
            return Ok(-self.inv_cdf_lower(1.0 - t)?);
        }
        self.inv_cdf_lower(t)
    }

    /// Solve Φ_β(y) = t on y ≤ 0 for t ∈ (0, ½).
    fn inv_cdf_lower(&self, t: f64) -> Result<f64> {
        let mut hi = 0.0_f64; // cdf(hi) = 1/2 >= t
        let mut lo = -1.0_f64;
        let mut guard = 0;
        while self.cdf(lo) > t {
            lo *= 2.0;
            guard += 1;
            if guard > 4000 {
                return Err(Error::Convergence("inv_cdf bracket expansion".into()));
            }
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cdf(y) - t;
            if f == 0.0 {
                return Ok(y);
            }
            if f > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
                break;
            }
            let d = self.density(y);
            let newton = y - f / d;
            y = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(0.5 * (lo + hi).min(0.0))
    }

    /// The absolute moment ∫_ℝ |y|^τ φ_β(y) dy = Γ((τ+1)/β) / (β^{1−τ/β} Γ(1+1/β)).
    pub fn abs_moment(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("abs_moment requires tau > 0, got {tau}")));
        }
        let b = self.beta;
        Ok((ln_gamma((tau + 1.0) / b) - (1.0 - tau / b) * b.ln() - ln_gamma(1.0 + 1.0 / b)).exp())
    }

    /// The exponential moment C_{α,β,ν} = ∫_ℝ |y|^ν e^{α|y|^τ} φ_β(y) dy
    /// by adaptive quadrature.
    ///
    /// Finite iff τ < β, or τ = β with α < 1/β; otherwise divergent.
    pub fn exp_moment(&self, alpha: f64, tau: f64, nu: u32, spec: &QuadratureSpec) -> Result<f64> {
        if alpha < 0.0 || !(tau > 0.0) {
            return Err(Error::invalid(format!(
                "exp_moment requires alpha >= 0 and tau > 0, got alpha={alpha}, tau={tau}"
            )));
        }
        let beta = self.beta;
        if tau > beta {
            return Err(Error::Divergent(format!(
                "exp_moment diverges for tau={tau} > beta={beta}"
            )));
        }
        if tau == beta && alpha >= 1.0 / beta {
            return Err(Error::Divergent(format!(
                "exp_moment diverges for tau=beta and alpha={alpha} >= 1/beta={}",
                1.0 / beta
            )));
        }
        // Tail control: bound α|y|^τ − |y|^β/β ≤ C₁ − c|y|^β with c > 0,
        // then ∫_T^∞ y^ν e^{−c y^β} dy = Γ((ν+1)/β, c T^β) / (β c^{(ν+1)/β}).
        let (c, c1) = if tau == beta {
            (1.0 / beta - alpha, 0.0)
        } else {
            let c = 0.5 / beta;
            // C₁ = max_y (α y^τ − y^β/(2β)), attained at y* = (2ατ)^{1/(β−τ)}.
            let c1 = if alpha == 0.0 {
                0.0
            } else {
                let ystar = (2.0 * alpha * tau).powf(1.0 / (beta - tau));
                alpha * ystar.powf(tau) - ystar.powf(beta) / (2.0 * beta)
            };
            (c, c1)
        };
        let a_inc = (nu as f64 + 1.0) / beta;
        let cb = self.c_beta;
        let tail = move |t: f64| -> f64 {
            let g = gamma_upper(a_inc, c * t.powf(beta)).unwrap_or(f64::INFINITY);
            2.0 * cb * c1.exp() * g / (beta * c.powf(a_inc))
        };
        let f = move |y: f64| -> f64 {
            let ay = y.abs();
            cb * ay.powi(nu as i32) * (alpha * ay.powf(tau) - ay.powf(beta) / beta).exp()
        };
        Ok(quad_oracle(&f, spec, &tail)?.value)
    }
}
