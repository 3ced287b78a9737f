//! Multi-index machinery, the abstract recurrence bound with its closed
//! form, and a finite-difference harness that checks the Gevrey derivative
//! bound ‖∂^ν a / a‖ ≤ C (|ν|!)^σ b^ν for concrete coefficient families.

use std::collections::{BTreeMap, HashMap};

use crate::error::Error;
use crate::field::Point;
use crate::Result;

/// Default cap on |ν| for the recurrence; the sum has Π(ν_j+1) terms and
/// the recursion depth grows with the order.
pub const DEFAULT_ORDER_CAP: u32 = 8;

/// A finitely supported multi-index, stored sparsely as coordinate → value
/// with all stored values ≥ 1. Coordinates are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    entries: BTreeMap<usize, u32>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex::default()
    }

    pub fn unit(coord: usize) -> Self {
        MultiIndex::from_pairs(&[(coord, 1)])
    }

    /// Build from (coordinate, value) pairs; zero values are dropped.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> Self {
        let mut entries = BTreeMap::new();
        for &(j, v) in pairs {
            if v > 0 {
                *entries.entry(j).or_insert(0) += v;
            }
        }
        MultiIndex { entries }
    }

    /// |ν| = Σ_j ν_j.
    pub fn order(&self) -> u32 {
        self.entries.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, coord: usize) -> u32 {
        self.entries.get(&coord).copied().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.entries.iter().map(|(&j, &v)| (j, v))
    }

    /// Componentwise m ≤ ν.
    pub fn leq(&self, other: &MultiIndex) -> bool {
        self.iter().all(|(j, v)| v <= other.get(j))
    }

    /// Componentwise difference ν − m; requires m ≤ ν.
    pub fn sub(&self, m: &MultiIndex) -> MultiIndex {
        let mut entries = BTreeMap::new();
        for (j, v) in self.iter() {
            let d = v - m.get(j);
            if d > 0 {
                entries.insert(j, d);
            }
        }
        MultiIndex { entries }
    }

    /// ν-choose-m = Π_j binom(ν_j, m_j); requires m ≤ ν.
    pub fn binomial(&self, m: &MultiIndex) -> f64 {
        self.iter()
            .map(|(j, v)| binom(v, m.get(j)))
            .product()
    }

    /// b^ν = Π_j b_j^{ν_j} over the 0-based coordinate sequence `b`.
    pub fn power(&self, b: &[f64]) -> f64 {
        self.iter()
            .map(|(j, v)| b[j].powi(v as i32))
            .product()
    }

    /// Every m with 0 ≤ m ≤ ν, enumerated as an odometer over the support.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let support: Vec<(usize, u32)> = self.iter().collect();
        let mut counters = vec![0u32; support.len()];
        let mut out = Vec::new();
        loop {
            out.push(MultiIndex::from_pairs(
                &support
                    .iter()
                    .zip(&counters)
                    .map(|(&(j, _), &c)| (j, c))
                    .collect::<Vec<_>>(),
            ));
            // increment
            let mut k = 0;
            loop {
                if k == support.len() {
                    return out;
                }
                if counters[k] < support[k].1 {
                    counters[k] += 1;
                    break;
                }
                counters[k] = 0;
                k += 1;
            }
        }
    }
}

fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Parameters of the abstract recurrence: Gevrey exponent σ ≥ 1 and the
/// constants C (recurrence factor) and C₀ (base case Υ_0 ≤ C₀).
#[derive(Debug, Clone, Copy)]
pub struct GevreyParams {
    pub sigma: f64,
    pub c: f64,
    pub c0: f64,
}

impl GevreyParams {
    pub fn new(sigma: f64, c: f64, c0: f64) -> Result<Self> {
        if !(sigma >= 1.0) {
            return Err(Error::invalid(format!("sigma must be >= 1, got {sigma}")));
        }
        if !(c > 0.0 && c0 > 0.0) {
            return Err(Error::invalid("C and C0 must be positive"));
        }
        Ok(GevreyParams { sigma, c, c0 })
    }
}

/// Υ_ν from the recurrence taken with equality:
/// Υ_0 = C₀, Υ_ν = C Σ_{0≠m≤ν} (ν choose m) (|m|!)^σ b^m Υ_{ν−m},
/// memoized over the divisor lattice {m : m ≤ ν}.
///
/// The recursion map is monotone, so this value dominates every sequence
/// satisfying the recurrence with inequality; for σ = 1 it equals the
/// closed form exactly (sharpness).
pub fn recurrence_upsilon(
    nu: &MultiIndex,
    p: &GevreyParams,
    b: &[f64],
    order_cap: u32,
) -> Result<f64> {
    if nu.order() > order_cap {
        return Err(Error::invalid(format!(
            "multi-index order {} exceeds cap {order_cap}",
            nu.order()
        )));
    }
    let mut memo: HashMap<MultiIndex, f64> = HashMap::new();
    Ok(upsilon_rec(nu, p, b, &mut memo))
}

fn upsilon_rec(
    nu: &MultiIndex,
    p: &GevreyParams,
    b: &[f64],
    memo: &mut HashMap<MultiIndex, f64>,
) -> f64 {
    if nu.is_zero() {
        return p.c0;
    }
    if let Some(&v) = memo.get(nu) {
        return v;
    }
    let mut sum = 0.0;
    for m in nu.sub_indices() {
        if m.is_zero() {
            continue;
        }
        let rest = nu.sub(&m);
        let tail = upsilon_rec(&rest, p, b, memo);
        sum += nu.binomial(&m) * factorial(m.order()).powf(p.sigma) * m.power(b) * tail;
    }
    let v = p.c * sum;
    memo.insert(nu.clone(), v);
    v
}

/// The closed-form bound C₀ a_{|ν|} (|ν|!)^σ b^ν with
/// a_k = C^{1−δ_{k,0}} (C+1)^{max(k−1,0)}.
pub fn closed_form_bound(nu: &MultiIndex, p: &GevreyParams, b: &[f64]) -> f64 {
    let k = nu.order();
    let a_k = if k == 0 {
        1.0
    } else {
        p.c * (p.c + 1.0).powi(k as i32 - 1)
    };
    p.c0 * a_k * factorial(k).powf(p.sigma) * nu.power(b)
}

/// The solution-derivative bound
/// (‖f‖ / a_min) · C (C+1)^{|ν|−1} (|ν|!)^σ b^ν, for |ν| ≥ 1.
pub fn solution_derivative_bound(
    nu: &MultiIndex,
    p: &GevreyParams,
    b: &[f64],
    f_norm: f64,
    a_min_val: f64,
) -> Result<f64> {
    if nu.is_zero() {
        return Err(Error::invalid("solution_derivative_bound requires |nu| >= 1"));
    }
    if !(a_min_val > 0.0) {
        return Err(Error::invalid("a_min must be positive"));
    }
    let k = nu.order();
    Ok(f_norm / a_min_val
        * p.c
        * (p.c + 1.0).powi(k as i32 - 1)
        * factorial(k).powf(p.sigma)
        * nu.power(b))
}

/// Derivative bound for the composed family of the appendix:
/// (e/2)^σ (|ν|!)^σ Π_j (2^σ C_ξ ‖ψ_j‖)^{ν_j}.
///
/// Stated for ν ≤ 1 componentwise; a linear link function h(x) = x lifts
/// that restriction (`linear_h`).
pub fn appendix_bound(
    nu: &MultiIndex,
    sigma: f64,
    c_xi: f64,
    psi_sup_norms: &[f64],
    linear_h: bool,
) -> Result<f64> {
    if !linear_h && nu.iter().any(|(_, v)| v > 1) {
        return Err(Error::invalid(
            "appendix bound requires nu <= 1 componentwise unless h is linear",
        ));
    }
    let b: Vec<f64> = psi_sup_norms
        .iter()
        .map(|&r| 2.0_f64.powf(sigma) * c_xi * r)
        .collect();
    let e_half = (std::f64::consts::E / 2.0).powf(sigma);
    Ok(e_half * factorial(nu.order()).powf(sigma) * nu.power(&b))
}

/// Finite-difference estimate of max over a spatial grid of |∂^ν a(x,y) / a(x,y)|.
///
/// Central differences per coordinate, composed tensorially, refined by one
/// Richardson step (h and h/2). |ν| ≤ 3.
pub fn gevrey_ratio_fd(
    coeff: &(dyn Fn(Point, &[f64]) -> f64 + Sync),
    y: &[f64],
    nu: &MultiIndex,
    grid: &[Point],
    step: f64,
) -> Result<f64> {
    if nu.order() > 3 {
        return Err(Error::invalid("finite differences limited to |nu| <= 3"));
    }
    if let Some(j) = nu.support().max() {
        if j >= y.len() {
            return Err(Error::invalid("nu support exceeds parameter dimension"));
        }
    }
    let mut worst = 0.0_f64;
    for &x in grid {
        let a0 = coeff(x, y);
        let d_h = fd_derivative(coeff, x, y, nu, step);
        let d_h2 = fd_derivative(coeff, x, y, nu, 0.5 * step);
        let richardson = (4.0 * d_h2 - d_h) / 3.0;
        worst = worst.max((richardson / a0).abs());
    }
    Ok(worst)
}

/// Per-coordinate central stencils (offset in units of h, coefficient);
/// the 1/h^{ν_j} scale is applied by the caller.
fn stencil(order: u32) -> &'static [(i32, f64)] {
    match order {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => unreachable!("order cap enforced by caller"),
    }
}

fn fd_derivative(
    coeff: &(dyn Fn(Point, &[f64]) -> f64 + Sync),
    x: Point,
    y: &[f64],
    nu: &MultiIndex,
    h: f64,
) -> f64 {
    let coords: Vec<(usize, u32)> = nu.iter().collect();
    if coords.is_empty() {
        return coeff(x, y);
    }
    let stencils: Vec<&[(i32, f64)]> = coords.iter().map(|&(_, v)| stencil(v)).collect();
    let mut idx = vec![0usize; coords.len()];
    let mut sum = 0.0;
    let mut shifted = y.to_vec();
    loop {
        let mut w = 1.0;
        for (k, &(j, _)) in coords.iter().enumerate() {
            let (off, c) = stencils[k][idx[k]];
            w *= c;
            shifted[j] = y[j] + off as f64 * h;
        }
        sum += w * coeff(x, &shifted);
        // reset shifted entries and advance the odometer
        for &(j, _) in &coords {
            shifted[j] = y[j];
        }
        let mut k = 0;
        loop {
            if k == coords.len() {
                return sum / h.powi(nu.order() as i32);
            }
            if idx[k] + 1 < stencils[k].len() {
                idx[k] += 1;
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
