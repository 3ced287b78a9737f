//! Random diffusion coefficient families on D = (0,1)².
//!
//! The main family couples a Lipschitz link function h with a flat Gevrey
//! nonlinearity ξ:
//!
//!   a(x, y) = exp(Σ_j h(y_j) ψ_j(x)) · exp(ξ(Σ_j y_j ψ_j(x))),
//!
//! with ψ_j(x) = 0.5 j^{-ϑ} sin(πjx₁) sin(πjx₂), h(y) = y/(1+√|y|) and
//! ξ(y) = exp(−y^{−2}) (0 at 0). A lognormal family
//! a(x, y) = a₀(x) exp(Σ_j √λ_j ψ_j(x) y_j) is provided for comparison.

use crate::error::Error;
use crate::Result;

/// A point in the closed unit square.
pub type Point = (f64, f64);

/// Spatial function trait object used by the lognormal family.
pub type SpatialFn<'a> = &'a (dyn Fn(Point) -> f64 + Sync);

/// Amplitude of the ψ_j family.
pub const PSI_AMPLITUDE: f64 = 0.5;

/// ψ_j(x) = 0.5 j^{-ϑ} sin(πjx₁) sin(πjx₂), j ≥ 1.
pub fn psi(j: usize, vartheta: f64, x: Point) -> f64 {
    assert!(j >= 1, "psi index starts at 1");
    let jf = j as f64;
    let pj = std::f64::consts::PI * jf;
    PSI_AMPLITUDE * jf.powf(-vartheta) * (pj * x.0).sin() * (pj * x.1).sin()
}

/// ‖ψ_j‖_{L∞(D)} = 0.5 j^{-ϑ}; the sine product attains 1 in (0,1)².
pub fn psi_sup_norm(j: usize, vartheta: f64) -> f64 {
    PSI_AMPLITUDE * (j as f64).powf(-vartheta)
}

/// Link function h(y) = y/(1+√|y|); odd, |h(y)| ≤ |y|, sup|h'| = 1.
pub fn link_h(y: f64) -> f64 {
    y / (1.0 + y.abs().sqrt())
}

/// Gevrey nonlinearity ξ(y) = exp(−y^{−2}) with ξ(0) = 0.
///
/// The explicit branch avoids overflow of y^{−2} for subnormal inputs.
pub fn xi(y: f64) -> f64 {
    if y.abs() < 1e-150 {
        0.0
    } else {
        (-(y * y).recip()).exp()
    }
}

/// The Gevrey-regular coefficient family used by the convergence studies.
#[derive(Debug, Clone)]
pub struct GevreyField {
    vartheta: f64,
    s: usize,
    /// Gevrey exponent of ξ's derivative bound C_ξ^k (k!)^σ.
    pub sigma: f64,
    pub c_xi: f64,
}

impl GevreyField {
    /// `vartheta` > 1 is the coefficient decay rate, `s` the truncation
    /// dimension. σ = 3/2 and C_ξ = 3 bound the derivatives of ξ.
    pub fn new(vartheta: f64, s: usize) -> Result<Self> {
        if !(vartheta > 1.0) {
            return Err(Error::invalid(format!("vartheta must exceed 1, got {vartheta}")));
        }
        if s < 1 {
            return Err(Error::invalid("truncation dimension s must be >= 1"));
        }
        Ok(GevreyField { vartheta, s, sigma: 1.5, c_xi: 3.0 })
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    /// a_s(x, y): the coefficient with the series truncated at
    /// min(s, y.len()) terms. Strictly positive for finite y.
    pub fn coeff(&self, x: Point, y: &[f64]) -> f64 {
        let terms = self.s.min(y.len());
        // Ascending j with compensated summation; terms decay like j^{-ϑ}.
        let mut hsum = Kahan::default();
        let mut zsum = Kahan::default();
        for (idx, &yj) in y.iter().take(terms).enumerate() {
            let p = psi(idx + 1, self.vartheta, x);
            hsum.add(link_h(yj) * p);
            zsum.add(yj * p);
        }
        (hsum.value() + xi(zsum.value())).exp()
    }

    /// Calibrated parameters (c, τ) of the lower-envelope model for this
    /// family: |h(y)| ≤ |y| gives exp(Σ h(y_j)ψ_j) ≥ exp(−Σ α_j |y_j|) with
    /// α_j = ‖ψ_j‖∞, and exp(ξ) ≥ exp(−sup ξ) = e^{−1}; hence c = e^{−1},
    /// τ = 1.
    pub fn amin_parameters(&self) -> (f64, f64) {
        ((-1.0_f64).exp(), 1.0)
    }
}

/// Precomputed ψ_j values on a fixed set of spatial points, for batch
/// evaluation of the coefficient over many parameter samples.
#[derive(Debug, Clone)]
pub struct PsiTable {
    npts: usize,
    s: usize,
    /// values[j * npts + p] = ψ_{j+1}(x_p)
    values: Vec<f64>,
}

impl PsiTable {
    pub fn build(vartheta: f64, s: usize, points: &[Point]) -> Self {
        let npts = points.len();
        let mut values = vec![0.0; s * npts];
        for j in 0..s {
            for (p, &x) in points.iter().enumerate() {
                values[j * npts + p] = psi(j + 1, vartheta, x);
            }
        }
        PsiTable { npts, s, values }
    }

    pub fn npts(&self) -> usize {
        self.npts
    }

    /// Fill `out[p] = a(x_p, y)` using the first min(s, y.len()) series terms.
    pub fn fill_coeff(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(out.len(), self.npts);
        let terms = self.s.min(y.len());
        let mut hsum = vec![Kahan::default(); self.npts];
        let mut zsum = vec![Kahan::default(); self.npts];
        for (j, &yj) in y.iter().take(terms).enumerate() {
            let hj = link_h(yj);
            let row = &self.values[j * self.npts..(j + 1) * self.npts];
            for p in 0..self.npts {
                hsum[p].add(hj * row[p]);
                zsum[p].add(yj * row[p]);
            }
        }
        for p in 0..self.npts {
            out[p] = (hsum[p].value() + xi(zsum[p].value())).exp();
        }
    }
}

/// Lognormal coefficient a₀(x) exp(Σ_j √λ_j ψ_j(x) y_j), truncated at
/// min(#eigenpairs, y.len()) terms.
pub fn lognormal_coeff(a0: SpatialFn, eigen: &[(f64, SpatialFn)], x: Point, y: &[f64]) -> f64 {
    let mut sum = Kahan::default();
    for ((lambda, psi_j), &yj) in eigen.iter().zip(y.iter()) {
        sum.add(lambda.sqrt() * psi_j(x) * yj);
    }
    a0(x) * sum.value().exp()
}

/// Lower-envelope model a_min(y) = c exp(−Σ_j α_j |y_j|^τ).
pub fn a_min_model(c: f64, alpha: &[f64], tau: f64, y: &[f64]) -> f64 {
    let mut sum = Kahan::default();
    for (&aj, &yj) in alpha.iter().zip(y.iter()) {
        sum.add(aj * yj.abs().powf(tau));
    }
    c * (-sum.value()).exp()
}

/// The coordinate sequences attached to the Gevrey family: α_j = ‖ψ_j‖∞,
/// b_j = 2^σ C_ξ ‖ψ_j‖∞, and a summability exponent p with b ∈ ℓ^p.
#[derive(Debug, Clone)]
pub struct CoordinateSequences {
    pub alpha: Vec<f64>,
    pub b: Vec<f64>,
    pub p: f64,
}

impl CoordinateSequences {
    /// Sequences for the Gevrey family. `p` defaults to 1/ϑ + 1e−3, the
    /// smallest simple exponent with (j^{-ϑ})_j ∈ ℓ^p.
    pub fn for_gevrey(vartheta: f64, sigma: f64, c_xi: f64, len: usize, p: Option<f64>) -> Self {
        let scale = 2.0_f64.powf(sigma) * c_xi;
        let alpha: Vec<f64> = (1..=len).map(|j| psi_sup_norm(j, vartheta)).collect();
        let b: Vec<f64> = alpha.iter().map(|&a| scale * a).collect();
        CoordinateSequences { alpha, b, p: p.unwrap_or(1.0 / vartheta + 1e-3) }
    }

    pub fn alpha_sup(&self) -> f64 {
        self.alpha.first().copied().unwrap_or(0.0)
    }
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
