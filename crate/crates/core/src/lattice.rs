//! Rank-1 lattice rules: point generation, random shifting, Euler totient,
//! and component-by-component (CBC) construction of generating vectors
//! under POD weights.
//!
//! The CBC search minimizes the shift-averaged squared worst-case error
//!
//!   E²_j(z₁..z_j) = (1/n) Σ_{i=1}^n Σ_{∅≠u⊆{1:j}} γ_u Π_{k∈u} ω({i z_k/n}),
//!
//! maintained with per-order accumulator arrays (O(n·cap) state) and, per
//! component, candidate scores for all z ∈ {1,..,n−1} obtained at once as a
//! length-(n−1) circular correlation over the multiplicative group of ℤ_n
//! (prime n), evaluated with an FFT.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Error;
use crate::rng::CounterRng;
use crate::weights::PodWeights;
use crate::Result;

/// POD accumulator order cap: subset orders above this are truncated (their
/// weights are negligible for decaying coordinate sequences).
pub const ORDER_CAP: usize = 60;

/// Relative tie window for the candidate argmin. Mathematically tied
/// candidates (e.g. z and n−z for a symmetric kernel, or every candidate in
/// dimension 1) score within floating-point noise of each other; both the
/// fast and the reference construction pick the smallest candidate whose
/// score lies within this window of the minimum.
pub const TIE_REL_TOL: f64 = 1e-9;

/// Trial-division primality check; n is at most ~10⁵ in practice.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Euler totient φ(n): the number of k ≤ n coprime to n.
pub fn euler_totient(n: u64) -> u64 {
    assert!(n >= 1);
    let mut phi = n;
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            phi -= phi / p;
            while m % p == 0 {
                m /= p;
            }
        }
        p += 1;
    }
    if m > 1 {
        phi -= phi / m;
    }
    phi
}

/// A rank-1 lattice rule: prime n and generating vector z ∈ {1,…,n−1}^s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratingVector {
    pub n: u64,
    pub z: Vec<u64>,
}

impl GeneratingVector {
    pub fn new(n: u64, z: Vec<u64>) -> Result<Self> {
        if !is_prime(n) {
            return Err(Error::invalid(format!("lattice size n = {n} must be prime")));
        }
        if z.is_empty() || z.iter().any(|&zj| zj == 0 || zj >= n) {
            return Err(Error::invalid("generating vector entries must lie in {1,..,n-1}"));
        }
        Ok(GeneratingVector { n, z })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// The i-th shifted lattice point, i ∈ {1,…,n}.
    pub fn point(&self, i: u64, shift: &[f64]) -> Vec<f64> {
        lattice_point(self.n, &self.z, i, shift)
    }

    /// Plain-text format: line 1 `n s`, then s lines of z_j.
    pub fn write_to(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.z.len())?;
        for zj in &self.z {
            writeln!(w, "{zj}")?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl std::io::BufRead) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut it = header.split_whitespace();
        let n: u64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Config("bad generating-vector header".into()))?;
        let s: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Config("bad generating-vector header".into()))?;
        let mut z = Vec::with_capacity(s);
        let mut line = String::new();
        while z.len() < s {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Config("generating-vector file truncated".into()));
            }
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            z.push(
                t.parse::<u64>()
                    .map_err(|e| Error::Config(format!("bad z entry {t}: {e}")))?,
            );
        }
        GeneratingVector::new(n, z)
    }
}

/// Componentwise frac(i·z_j/n + shift_j); exact residues via integer
/// arithmetic. `shift` entries must lie in [0, 1).
pub fn lattice_point(n: u64, z: &[u64], i: u64, shift: &[f64]) -> Vec<f64> {
    assert_eq!(z.len(), shift.len());
    let nf = n as f64;
    z.iter()
        .zip(shift)
        .map(|(&zj, &dj)| {
            let t = ((i % n) * (zj % n) % n) as f64 / nf + dj;
            if t >= 1.0 {
                t - 1.0
            } else {
                t
            }
        })
        .collect()
}

/// R i.i.d. uniform shifts in [0,1)^s from the counter-based generator.
#[derive(Debug, Clone)]
pub struct ShiftSet {
    pub shifts: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ShiftSet {
    /// Stream 1 of the seed is reserved for shifts; draw (r, j) ↦ index r·s+j.
    pub fn generate(r_count: usize, s: usize, seed: u64) -> Self {
        Self::generate_stream(r_count, s, seed, 1)
    }

    /// Shifts decorrelated by an extra stream tag (e.g. the lattice size),
    /// so different rules draw independent shifts from one seed.
    pub fn generate_stream(r_count: usize, s: usize, seed: u64, stream: u64) -> Self {
        let rng = CounterRng::new(seed, stream.rotate_left(17) ^ 0x5349_4654); // "SIFT"
        let shifts = (0..r_count)
            .map(|r| (0..s).map(|j| rng.uniform((r * s + j) as u64)).collect())
            .collect();
        ShiftSet { shifts, seed }
    }

    pub fn count(&self) -> usize {
        self.shifts.len()
    }

    /// R lines of s space-separated reals.
    pub fn write_to(&self, w: &mut impl std::io::Write) -> Result<()> {
        for row in &self.shifts {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl std::io::BufRead, seed: u64) -> Result<Self> {
        let mut shifts = Vec::new();
        let mut line = String::new();
        while {
            line.clear();
            r.read_line(&mut line)? > 0
        } {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                t.split_whitespace().map(|x| x.parse()).collect();
            let row = row.map_err(|e| Error::Config(format!("bad shift entry: {e}")))?;
            if row.iter().any(|&x| !(0.0..1.0).contains(&x)) {
                return Err(Error::Config("shift entries must lie in [0,1)".into()));
            }
            shifts.push(row);
        }
        if shifts.is_empty() {
            return Err(Error::Config("empty shift file".into()));
        }
        Ok(ShiftSet { shifts, seed })
    }
}

/// Kernel used by the CBC criterion.
#[derive(Debug, Clone)]
pub enum KernelMode {
    /// ω(x) = x² − x + 1/6, the degree-2 Bernoulli kernel; the standard
    /// practical surrogate for shift-averaged worst-case errors.
    Surrogate,
    /// A user-supplied table ω(i/n), i = 0..n−1.
    Table(Vec<f64>),
}

impl KernelMode {
    /// The table ω(i/n) for i = 0..n−1.
    pub fn table(&self, n: u64) -> Result<Vec<f64>> {
        match self {
            KernelMode::Surrogate => Ok((0..n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    x * x - x + 1.0 / 6.0
                })
                .collect()),
            KernelMode::Table(t) => {
                if t.len() != n as usize {
                    return Err(Error::invalid(format!(
                        "kernel table has {} entries, lattice needs {n}",
                        t.len()
                    )));
                }
                Ok(t.clone())
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            KernelMode::Surrogate => "surrogate",
            KernelMode::Table(_) => "table",
        }
    }
}

/// Smallest candidate within the tie window of the minimum score.
/// `scores[k]` is the score of candidate z = k+1.
fn select_candidate(scores: &[f64]) -> u64 {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = min.abs().max(1e-300) * TIE_REL_TOL;
    for (k, &s) in scores.iter().enumerate() {
        if s <= min + tol {
            return k as u64 + 1;
        }
    }
    unreachable!("minimum always within its own window")
}

/// Fast CBC construction of a generating vector for prime n under POD
/// weights. Per component the candidate scores are a circular correlation
/// over the multiplicative group, computed by FFT in O(n log n); ties break
/// to the smallest candidate.
pub fn cbc_construct(
    n: u64,
    s: usize,
    w: &PodWeights,
    kernel: &KernelMode,
) -> Result<GeneratingVector> {
    if !is_prime(n) {
        return Err(Error::invalid(format!("CBC requires prime n, got {n}")));
    }
    if s < 1 {
        return Err(Error::invalid("CBC requires s >= 1"));
    }
    if w.dim() < s {
        return Err(Error::invalid(format!(
            "weights cover {} coordinates, construction needs {s}",
            w.dim()
        )));
    }
    let omega = kernel.table(n)?;
    let cap = s.min(ORDER_CAP);
    if s > ORDER_CAP {
        eprintln!(
            "cbc: truncating POD accumulators at order {ORDER_CAP} (s = {s}); \
             higher-order weight contributions are dropped"
        );
    }
    let nu = n as usize;
    let m = nu - 1;

    // Per-order accumulators, i-major: state[(i-1)*stride + l] = S_l(i).
    let stride = cap + 1;
    let mut state = vec![0.0f64; nu * stride];
    for i in 0..nu {
        state[i * stride] = 1.0; // S_0 ≡ 1
    }
    let mut z: Vec<u64> = Vec::with_capacity(s);

    // Multiplicative-group bookkeeping: pows[a] = g^a mod n.
    let root = primitive_root(n);
    let mut pows = vec![0u64; m];
    let mut acc = 1u64;
    for slot in pows.iter_mut() {
        *slot = acc;
        acc = acc * root % n;
    }

    // FFT of the permuted kernel is shared across components.
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);
    let mut omega_hat: Vec<Complex<f64>> = (0..m)
        .map(|a| Complex::new(omega[pows[a] as usize], 0.0))
        .collect();
    fft.process(&mut omega_hat);

    for c in 1..=s {
        let orders = c.min(cap);
        // W(i) = Σ_{l=1}^{orders} (Γ_l/Γ_{l-1}) S_{l-1}(i)
        let ratios: Vec<f64> = (1..=orders).map(|l| w.order_ratio(l)).collect();
        let wvec: Vec<f64> = state
            .par_chunks(stride)
            .map(|row| {
                let mut acc = 0.0;
                for (l, &ratio) in ratios.iter().enumerate() {
                    acc += ratio * row[l];
                }
                acc
            })
            .collect();

        // Candidate-independent parts of E².
        let mut base = 0.0;
        for row in state.chunks(stride) {
            for &v in row.iter().take(orders.min(c - 1) + 1).skip(1) {
                base += v;
            }
        }
        let g_c = w.coord_weight(c - 1);
        let t_const = omega[0] * wvec[nu - 1]; // i = n contributes ω(0)W(n) to every z

        // T'(g^a) = Σ_b ω_perm[(a+b) mod m] W_perm[b] via FFT correlation.
        let mut what: Vec<Complex<f64>> = (0..m)
            .map(|b| Complex::new(wvec[(pows[b] - 1) as usize], 0.0))
            .collect();
        fft.process(&mut what);
        let mut prod: Vec<Complex<f64>> = omega_hat
            .iter()
            .zip(&what)
            .map(|(x, y)| x * y.conj())
            .collect();
        ifft.process(&mut prod);
        let inv_m = 1.0 / m as f64;
        let nf = n as f64;
        // scores[k] = E²(z = k+1)
        let mut scores = vec![0.0f64; m];
        for (a, p) in prod.iter().enumerate() {
            let t_prime = p.re * inv_m;
            scores[pows[a] as usize - 1] = (base + g_c * (t_prime + t_const)) / nf;
        }
        let zc = select_candidate(&scores);
        z.push(zc);

        // Commit: S_l(i) += ratio_l g_c ω({i z_c/n}) S_{l-1}(i), descending l.
        state
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(i0, row)| {
                let i = i0 as u64 + 1;
                let w_ik = omega[(i * zc % n) as usize];
                for l in (1..=orders).rev() {
                    row[l] += ratios[l - 1] * g_c * w_ik * row[l - 1];
                }
            });
    }
    GeneratingVector::new(n, z)
}

/// Smallest primitive root of the prime n.
fn primitive_root(n: u64) -> u64 {
    if n == 2 {
        return 1;
    }
    let m = n - 1;
    let mut factors = Vec::new();
    let mut rem = m;
    let mut p = 2;
    while p * p <= rem {
        if rem % p == 0 {
            factors.push(p);
            while rem % p == 0 {
                rem /= p;
            }
        }
        p += 1;
    }
    if rem > 1 {
        factors.push(rem);
    }
    'outer: for g in 2..n {
        for &q in &factors {
            if mod_pow(g, m / q, n) == 1 {
                continue 'outer;
            }
        }
        return g;
    }
    unreachable!("every prime has a primitive root")
}

fn mod_pow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    let mut out = 1u128;
    let mut b = base as u128 % modulus as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            out = out * b % modulus as u128;
        }
        b = b * b % modulus as u128;
        exp >>= 1;
    }
    out as u64
}

/// The shift-averaged squared error criterion E²_j for the first j
/// components of `g`, evaluated with the per-order accumulator recurrence.
pub fn wce_criterion(
    g: &GeneratingVector,
    w: &PodWeights,
    kernel_values: &[f64],
    j: usize,
) -> Result<f64> {
    let n = g.n;
    if kernel_values.len() != n as usize {
        return Err(Error::invalid("kernel table size must equal n"));
    }
    if j > g.dim() || j > w.dim() {
        return Err(Error::invalid("j exceeds vector or weight dimension"));
    }
    let cap = j.min(ORDER_CAP);
    let mut total = 0.0;
    let mut p = vec![0.0f64; cap + 1];
    for i in 1..=n {
        p.iter_mut().for_each(|v| *v = 0.0);
        p[0] = 1.0;
        for (k, &zk) in g.z.iter().take(j).enumerate() {
            let w_ik = kernel_values[(i * zk % n) as usize];
            let g_k = w.coord_weight(k);
            for l in (1..=cap.min(k + 1)).rev() {
                p[l] += w.order_ratio(l) * g_k * w_ik * p[l - 1];
            }
        }
        for &v in p.iter().skip(1) {
            total += v;
        }
    }
    Ok(total / n as f64)
}

/// Result of a randomly shifted QMC estimate of a scalar integrand.
#[derive(Debug, Clone)]
pub struct QmcEstimate {
    /// Q^{(r)}: the per-shift lattice-rule means.
    pub per_shift: Vec<f64>,
    /// Q̄ = (1/R) Σ_r Q^{(r)}.
    pub mean: f64,
    /// sqrt( (1/(R(R−1))) Σ_r (Q̄ − Q^{(r)})² ); needs R ≥ 2.
    pub rms_std_error: Option<f64>,
}

/// Number of fixed accumulation chunks; results are independent of worker
/// count because chunk boundaries depend only on n.
pub(crate) const REDUCTION_CHUNKS: usize = 256;

/// Pairwise sum; deterministic for a fixed input order.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Randomly shifted rank-1 lattice estimate of ∫_{[0,1)^s} F.
///
/// Q^{(r)} = (1/n) Σ_{i=1}^n F({t_i + Δ^{(r)}}). Accumulation uses fixed
/// chunking and pairwise summation, so values are bit-identical across
/// worker counts.
pub fn qmc_estimate<F>(f: F, g: &GeneratingVector, shifts: &ShiftSet) -> QmcEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = g.n;
    let chunk = (n as usize).div_ceil(REDUCTION_CHUNKS).max(1);
    let idx: Vec<u64> = (1..=n).collect();
    let per_shift: Vec<f64> = shifts
        .shifts
        .iter()
        .map(|delta| {
            let partials: Vec<f64> = idx
                .par_chunks(chunk)
                .map(|is| {
                    let mut acc = 0.0;
                    for &i in is {
                        acc += f(&g.point(i, delta));
                    }
                    acc
                })
                .collect();
            pairwise_sum(&partials) / n as f64
        })
        .collect();
    let r = per_shift.len();
    let mean = pairwise_sum(&per_shift) / r as f64;
    let rms_std_error = if r >= 2 {
        let ss: f64 = per_shift.iter().map(|q| (mean - q) * (mean - q)).sum();
        Some((ss / (r * (r - 1)) as f64).sqrt())
    } else {
        None
    };
    QmcEstimate { per_shift, mean, rms_std_error }
}
