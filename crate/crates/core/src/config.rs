//! Study configuration: a human-readable key=value file, every key
//! overridable by a CLI flag of the same name.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::Error;
use crate::lattice::is_prime;
use crate::Result;

/// Which coefficient family drives the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Gevrey,
    Lognormal,
}

/// Resolved configuration of the convergence studies.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub field: FieldKind,
    pub vartheta: f64,
    pub sigma: f64,
    pub c_xi: f64,
    pub beta: f64,
    pub tau: f64,
    pub theta: f64,
    pub r: f64,
    pub delta: f64,
    /// Summability exponent; None derives 1/ϑ + 1e−3.
    pub p: Option<f64>,
    /// The A1 constant C entering the (C+1)b_j weight factor.
    pub c_a1: f64,
    pub s: usize,
    pub s_reference: usize,
    pub k: u32,
    pub k_reference: u32,
    pub n_list: Vec<u64>,
    pub s_list: Vec<usize>,
    pub k_list: Vec<u32>,
    /// Lattice size of the truncation study (single shift).
    pub n_trunc: u64,
    /// Lattice size of the finite element study (single shift).
    pub n_fem: u64,
    /// Number of random shifts R in the QMC study.
    pub shifts: usize,
    pub seed: u64,
    /// "surrogate" or "table:<path>".
    pub kernel: String,
    pub out: String,
    /// When nonempty, generating vectors are loaded from (or cached into)
    /// `<vector_dir>/z_<n>_<s>.txt` instead of being rebuilt per run.
    pub vector_dir: String,
}

impl Default for StudyConfig {
    /// Desk-scale defaults; `apply_full_scale` switches to the full-scale
    /// experiment sizes (multi-hour runtime).
    fn default() -> Self {
        StudyConfig {
            field: FieldKind::Gevrey,
            vartheta: 2.0,
            sigma: 1.5,
            c_xi: 3.0,
            beta: 0.5,
            tau: 0.5,
            theta: 1.001,
            r: 0.70,
            delta: 0.05,
            p: None,
            c_a1: 1.0,
            s: 50,
            s_reference: 64,
            k: 5,
            k_reference: 6,
            n_list: vec![17, 31, 67, 127, 263, 503, 1013, 2003],
            s_list: vec![2, 4, 8, 16, 32],
            k_list: vec![1, 2, 3, 4, 5],
            n_trunc: 4003,
            n_fem: 2003,
            shifts: 8,
            seed: 42,
            kernel: "surrogate".into(),
            out: "study.csv".into(),
            vector_dir: String::new(),
        }
    }
}

impl StudyConfig {
    /// The full-scale experiment sizes.
    pub fn apply_full_scale(&mut self) {
        self.s = 100;
        self.s_reference = 256;
        self.k = 7;
        self.k_reference = 7;
        self.n_list = vec![
            17, 31, 67, 127, 263, 503, 1013, 2003, 4003, 8009, 16007, 32009, 63997,
        ];
        self.s_list = vec![2, 4, 8, 16, 32, 64];
        self.k_list = vec![1, 2, 3, 4, 5, 6];
        self.n_trunc = 63997;
        self.n_fem = 63997;
        self.shifts = 16;
    }

    pub fn p_resolved(&self) -> f64 {
        self.p.unwrap_or(1.0 / self.vartheta + 1e-3)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = StudyConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Set one key; the CLI maps `--key value` straight here.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("bad value for {key}: {e}"));
        match key {
            "field" => {
                self.field = match value {
                    "gevrey" => FieldKind::Gevrey,
                    "lognormal" => FieldKind::Lognormal,
                    other => {
                        return Err(Error::Config(format!(
                            "field must be gevrey or lognormal, got {other}"
                        )))
                    }
                }
            }
            "vartheta" => self.vartheta = value.parse().map_err(|e| bad(&e))?,
            "sigma" => self.sigma = value.parse().map_err(|e| bad(&e))?,
            "c_xi" => self.c_xi = value.parse().map_err(|e| bad(&e))?,
            "beta" => self.beta = value.parse().map_err(|e| bad(&e))?,
            "tau" => self.tau = value.parse().map_err(|e| bad(&e))?,
            "theta" => self.theta = value.parse().map_err(|e| bad(&e))?,
            "r" => self.r = value.parse().map_err(|e| bad(&e))?,
            "delta" => self.delta = value.parse().map_err(|e| bad(&e))?,
            "p" => self.p = Some(value.parse().map_err(|e| bad(&e))?),
            "c_a1" => self.c_a1 = value.parse().map_err(|e| bad(&e))?,
            "s" => self.s = value.parse().map_err(|e| bad(&e))?,
            "s_reference" => self.s_reference = value.parse().map_err(|e| bad(&e))?,
            "k" => self.k = value.parse().map_err(|e| bad(&e))?,
            "k_reference" => self.k_reference = value.parse().map_err(|e| bad(&e))?,
            "n_list" => self.n_list = parse_list(value).map_err(|e| bad(&e))?,
            "s_list" => self.s_list = parse_list(value).map_err(|e| bad(&e))?,
            "k_list" => self.k_list = parse_list(value).map_err(|e| bad(&e))?,
            "n_trunc" => self.n_trunc = value.parse().map_err(|e| bad(&e))?,
            "n_fem" => self.n_fem = value.parse().map_err(|e| bad(&e))?,
            "shifts" => self.shifts = value.parse().map_err(|e| bad(&e))?,
            "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
            "kernel" => self.kernel = value.to_string(),
            "out" => self.out = value.to_string(),
            "vector_dir" => self.vector_dir = value.to_string(),
            "full" => {
                let on: bool = value.parse().map_err(|e| bad(&e))?;
                if on {
                    self.apply_full_scale();
                }
            }
            other => return Err(Error::Config(format!("unknown config key {other}"))),
        }
        Ok(())
    }

    /// Structural checks shared by every study.
    pub fn validate(&self) -> Result<()> {
        if self.tau > self.beta {
            return Err(Error::Config(format!(
                "tau = {} must not exceed beta = {}",
                self.tau, self.beta
            )));
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("n_list must be strictly increasing".into()));
        }
        for &n in &self.n_list {
            if !is_prime(n) {
                return Err(Error::Config(format!("n_list entry {n} is not prime")));
            }
        }
        for &n in &[self.n_trunc, self.n_fem] {
            if !is_prime(n) {
                return Err(Error::Config(format!("lattice size {n} is not prime")));
            }
        }
        if !self.s_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("s_list must be strictly increasing".into()));
        }
        if !self.k_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("k_list must be strictly increasing".into()));
        }
        if let Some(&smax) = self.s_list.iter().max() {
            if self.s_reference < smax {
                return Err(Error::Config(format!(
                    "s_reference = {} below max s_list entry {smax}",
                    self.s_reference
                )));
            }
        }
        if let Some(&kmax) = self.k_list.iter().max() {
            if self.k_reference < kmax {
                return Err(Error::Config(format!(
                    "k_reference = {} below max k_list entry {kmax}",
                    self.k_reference
                )));
            }
        }
        if self.shifts < 1 {
            return Err(Error::Config("shifts must be >= 1".into()));
        }
        Ok(())
    }

    /// Full resolved configuration in a fixed order, for output metadata.
    pub fn echo(&self) -> Vec<(String, String)> {
        let field = match self.field {
            FieldKind::Gevrey => "gevrey",
            FieldKind::Lognormal => "lognormal",
        };
        let fmt_list = |v: &[String]| v.join(",");
        vec![
            ("field".into(), field.into()),
            ("vartheta".into(), self.vartheta.to_string()),
            ("sigma".into(), self.sigma.to_string()),
            ("c_xi".into(), self.c_xi.to_string()),
            ("beta".into(), self.beta.to_string()),
            ("tau".into(), self.tau.to_string()),
            ("theta".into(), self.theta.to_string()),
            ("r".into(), self.r.to_string()),
            ("delta".into(), self.delta.to_string()),
            ("p".into(), self.p_resolved().to_string()),
            ("c_a1".into(), self.c_a1.to_string()),
            ("s".into(), self.s.to_string()),
            ("s_reference".into(), self.s_reference.to_string()),
            ("k".into(), self.k.to_string()),
            ("k_reference".into(), self.k_reference.to_string()),
            (
                "n_list".into(),
                fmt_list(&self.n_list.iter().map(|x| x.to_string()).collect::<Vec<_>>()),
            ),
            (
                "s_list".into(),
                fmt_list(&self.s_list.iter().map(|x| x.to_string()).collect::<Vec<_>>()),
            ),
            (
                "k_list".into(),
                fmt_list(&self.k_list.iter().map(|x| x.to_string()).collect::<Vec<_>>()),
            ),
            ("n_trunc".into(), self.n_trunc.to_string()),
            ("n_fem".into(), self.n_fem.to_string()),
            ("shifts".into(), self.shifts.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("kernel".into(), self.kernel.clone()),
            ("vector_dir".into(), self.vector_dir.clone()),
        ]
    }

    /// FNV-1a hash of the resolved configuration echo.
    pub fn hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for (k, v) in self.echo() {
            for b in k.bytes().chain([b'='].into_iter()).chain(v.bytes()).chain([b'\n']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| format!("{t}: {e}")))
        .collect()
}

/// Flag overrides in CLI order: `--key value` pairs.
pub fn apply_flag_overrides(cfg: &mut StudyConfig, flags: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in flags {
        cfg.set(k, v)?;
    }
    Ok(())
}
