//! The three convergence experiments: QMC cubature error over n, dimension
//! truncation error over s, and finite element discretization error over h,
//! each reported as a rate table with least-squares log-log fits.
//!
//! Every study is bit-reproducible for a fixed (config, seed): all random
//! input is counter-based, and sample accumulation uses fixed chunk
//! boundaries so results do not depend on the worker count.

use rayon::prelude::*;

use crate::betagauss::BetaGaussian;
use crate::config::{FieldKind, StudyConfig};
use crate::error::Error;
use crate::fem::{
    assemble_and_solve_sampled, build_mesh, h1_seminorm, l2_norm, prolong, FemSolution,
    UniformMesh,
};
use crate::field::{CoordinateSequences, Point, PsiTable};
use crate::lattice::{
    cbc_construct, pairwise_sum, GeneratingVector, KernelMode, ShiftSet, REDUCTION_CHUNKS,
};
use crate::weights::{
    build_pod_weights, kernel_constant_k, select_lambda, theoretical_rate, PodWeights,
    SpaceParams,
};
use crate::Result;

/// Least-squares fit of log e against log x.
#[derive(Debug, Clone, Copy)]
pub struct Fit {
    pub slope: f64,
    /// Intercept in log space: log e ≈ intercept + slope·log x.
    pub intercept: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
}

/// Ordinary least squares on (log x, log e); requires ≥ 2 points with
/// positive values.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 2 {
        return Err(Error::invalid("rate fit needs at least two points"));
    }
    if points.iter().any(|&(x, e)| !(x > 0.0) || !(e > 0.0)) {
        return Err(Error::invalid("rate fit needs positive abscissae and values"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let le: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let me = le.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxe: f64 = lx.iter().zip(&le).map(|(x, e)| (x - mx) * (e - me)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct abscissae"));
    }
    let slope = sxe / sxx;
    let intercept = me - slope * mx;
    let residual: f64 = lx
        .iter()
        .zip(&le)
        .map(|(x, e)| {
            let d = e - (intercept + slope * x);
            d * d
        })
        .sum();
    Ok(Fit { slope, intercept, residual })
}

/// Rows of (abscissa, H¹ error, L² error) plus fitted slopes and metadata.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub abscissa: &'static str,
    pub rows: Vec<(f64, f64, f64)>,
    pub fit_h1: Fit,
    pub fit_l2: Fit,
    pub metadata: Vec<(String, String)>,
}

impl RateTable {
    /// CSV: metadata as leading `# key=value` comments, a header row, the
    /// data rows, and the fits as trailing comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str("abscissa,h1_error,l2_error\n");
        for (x, e1, e2) in &self.rows {
            out.push_str(&format!("{x},{e1},{e2}\n"));
        }
        out.push_str(&format!("# fit_h1_slope={}\n", self.fit_h1.slope));
        out.push_str(&format!("# fit_h1_intercept={}\n", self.fit_h1.intercept));
        out.push_str(&format!("# fit_h1_residual={}\n", self.fit_h1.residual));
        out.push_str(&format!("# fit_l2_slope={}\n", self.fit_l2.slope));
        out.push_str(&format!("# fit_l2_intercept={}\n", self.fit_l2.intercept));
        out.push_str(&format!("# fit_l2_residual={}\n", self.fit_l2.residual));
        out
    }

    /// Atomic write: temp file in the target directory, then rename.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        std::fs::write(&tmp, self.to_csv())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Derived weighted-space quantities shared by the studies.
pub struct StudySetup {
    pub space: SpaceParams,
    pub lambda: f64,
    pub kernel_constant: f64,
    pub rate: f64,
    pub seqs: CoordinateSequences,
    pub weights: PodWeights,
    pub kernel: KernelMode,
}

/// Resolve space parameters, λ, K, the theoretical rate, and the POD
/// weights for `dims` coordinates.
pub fn prepare(cfg: &StudyConfig, dims: usize) -> Result<StudySetup> {
    cfg.validate()?;
    if cfg.field != FieldKind::Gevrey {
        return Err(Error::Config(
            "studies drive the gevrey field; the lognormal family needs \
             closed-form eigenpairs supplied through the library API"
                .into(),
        ));
    }
    let space = SpaceParams::new(cfg.tau, cfg.theta, cfg.r, cfg.delta, cfg.beta)?;
    let p = cfg.p_resolved();
    let lambda = select_lambda(p, cfg.sigma, &space)?;
    let kernel_constant = kernel_constant_k(&space)?;
    let rate = theoretical_rate(p, &space);
    let seqs = CoordinateSequences::for_gevrey(cfg.vartheta, cfg.sigma, cfg.c_xi, dims, Some(p));
    let weights = build_pod_weights(
        dims,
        cfg.sigma,
        lambda,
        cfg.c_a1,
        &seqs.b,
        &seqs.alpha,
        &space,
        kernel_constant,
    )?;
    let kernel = parse_kernel(&cfg.kernel)?;
    Ok(StudySetup { space, lambda, kernel_constant, rate, seqs, weights, kernel })
}

fn parse_kernel(spec: &str) -> Result<KernelMode> {
    if spec == "surrogate" {
        return Ok(KernelMode::Surrogate);
    }
    if let Some(path) = spec.strip_prefix("table:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read kernel table {path}: {e}")))?;
        let values: std::result::Result<Vec<f64>, _> =
            text.split_whitespace().map(|t| t.parse()).collect();
        let values = values.map_err(|e| Error::Config(format!("bad kernel table: {e}")))?;
        return Ok(KernelMode::Table(values));
    }
    Err(Error::Config(format!(
        "kernel must be 'surrogate' or 'table:<path>', got {spec}"
    )))
}

fn study_metadata(cfg: &StudyConfig, setup: &StudySetup, study: &str) -> Vec<(String, String)> {
    let mut md = vec![
        ("study".into(), study.to_string()),
        ("config_hash".into(), format!("{:016x}", cfg.hash())),
    ];
    md.extend(cfg.echo());
    md.push(("lambda".into(), setup.lambda.to_string()));
    md.push(("kernel_constant".into(), setup.kernel_constant.to_string()));
    md.push(("theoretical_rate".into(), setup.rate.to_string()));
    md
}

/// The load functional of the experiments, f(x) = x₂.
fn load_fn(x: Point) -> f64 {
    x.1
}

/// Load `<vector_dir>/z_<n>_<s>.txt` when configured and present; otherwise
/// construct, and cache into the directory when one is configured.
pub fn load_or_construct_vector(
    cfg: &StudyConfig,
    n: u64,
    s: usize,
    weights: &PodWeights,
    kernel: &KernelMode,
) -> Result<GeneratingVector> {
    if cfg.vector_dir.is_empty() {
        return cbc_construct(n, s, weights, kernel);
    }
    let path = std::path::Path::new(&cfg.vector_dir).join(format!("z_{n}_{s}.txt"));
    if path.exists() {
        let file = std::fs::File::open(&path)?;
        let g = GeneratingVector::read_from(&mut std::io::BufReader::new(file))?;
        if g.n != n || g.dim() != s {
            return Err(Error::Config(format!(
                "vector file {} holds n={} s={}, study needs n={n} s={s}",
                path.display(),
                g.n,
                g.dim()
            )));
        }
        return Ok(g);
    }
    let g = cbc_construct(n, s, weights, kernel)?;
    std::fs::create_dir_all(&cfg.vector_dir)?;
    let tmp = path.with_extension("txt.tmp");
    let mut buf = Vec::new();
    g.write_to(&mut buf)?;
    std::fs::write(&tmp, buf)?;
    std::fs::rename(&tmp, &path)?;
    Ok(g)
}

/// Mean nodal solution vectors over the n lattice points of one shifted
/// rule, simultaneously for several truncation dimensions (shared samples).
///
/// `dims` must be ascending; the transformed point y is computed once at
/// the largest dimension and truncated per entry.
fn mean_fields_by_dim(
    g: &GeneratingVector,
    shift: &[f64],
    dist: &BetaGaussian,
    table: &PsiTable,
    mesh: &UniformMesh,
    dims: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let n = g.n;
    let chunk = (n as usize).div_ceil(REDUCTION_CHUNKS).max(1);
    let idx: Vec<u64> = (1..=n).collect();
    let interior = mesh.num_interior();
    let ntri = mesh.num_triangles();
    let partials: Vec<Result<Vec<Vec<f64>>>> = idx
        .par_chunks(chunk)
        .map(|chunk_is| {
            let mut acc = vec![vec![0.0f64; interior]; dims.len()];
            let mut coeff = vec![0.0f64; ntri];
            for &i in chunk_is {
                let w = g.point(i, shift);
                let mut y = Vec::with_capacity(w.len());
                for &wj in &w {
                    y.push(dist.inv_cdf(wj.max(1e-300))?);
                }
                for (d, &sdim) in dims.iter().enumerate() {
                    table.fill_coeff(&y[..sdim], &mut coeff);
                    let sol = assemble_and_solve_sampled(mesh, &coeff, &load_fn)?;
                    for (a, v) in acc[d].iter_mut().zip(&sol.values) {
                        *a += v;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    // fixed chunk order: deterministic accumulation
    let mut totals = vec![vec![0.0f64; interior]; dims.len()];
    for part in partials {
        let part = part?;
        for (t, p) in totals.iter_mut().zip(part) {
            for (a, v) in t.iter_mut().zip(p) {
                *a += v;
            }
        }
    }
    let nf = n as f64;
    for t in &mut totals {
        for v in t.iter_mut() {
            *v /= nf;
        }
    }
    Ok(totals)
}

/// Mean nodal solution vectors over the lattice points, simultaneously for
/// several mesh levels (shared samples).
fn mean_fields_by_level(
    g: &GeneratingVector,
    shift: &[f64],
    dist: &BetaGaussian,
    tables: &[PsiTable],
    meshes: &[UniformMesh],
    s: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = g.n;
    let chunk = (n as usize).div_ceil(REDUCTION_CHUNKS).max(1);
    let idx: Vec<u64> = (1..=n).collect();
    let partials: Vec<Result<Vec<Vec<f64>>>> = idx
        .par_chunks(chunk)
        .map(|chunk_is| {
            let mut acc: Vec<Vec<f64>> =
                meshes.iter().map(|mesh| vec![0.0f64; mesh.num_interior()]).collect();
            let mut coeffs: Vec<Vec<f64>> =
                meshes.iter().map(|mesh| vec![0.0f64; mesh.num_triangles()]).collect();
            for &i in chunk_is {
                let w = g.point(i, shift);
                let mut y = Vec::with_capacity(w.len());
                for &wj in &w {
                    y.push(dist.inv_cdf(wj.max(1e-300))?);
                }
                for (lvl, mesh) in meshes.iter().enumerate() {
                    tables[lvl].fill_coeff(&y[..s], &mut coeffs[lvl]);
                    let sol = assemble_and_solve_sampled(mesh, &coeffs[lvl], &load_fn)?;
                    for (a, v) in acc[lvl].iter_mut().zip(&sol.values) {
                        *a += v;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut totals: Vec<Vec<f64>> =
        meshes.iter().map(|mesh| vec![0.0f64; mesh.num_interior()]).collect();
    for part in partials {
        let part = part?;
        for (t, p) in totals.iter_mut().zip(part) {
            for (a, v) in t.iter_mut().zip(p) {
                *a += v;
            }
        }
    }
    let nf = n as f64;
    for t in &mut totals {
        for v in t.iter_mut() {
            *v /= nf;
        }
    }
    Ok(totals)
}

fn norms_of(mesh: &UniformMesh, values: Vec<f64>) -> (f64, f64) {
    let sol = FemSolution { mesh: *mesh, values };
    (h1_seminorm(&sol), l2_norm(&sol))
}

/// QMC cubature error study: for each n, construct the generating vector,
/// average the FEM solution over R randomly shifted rules mapped through
/// Φ_β^{-1}, and record the RMS spread of the per-shift means in both norms.
pub fn qmc_convergence_study(cfg: &StudyConfig) -> Result<RateTable> {
    let setup = prepare(cfg, cfg.s)?;
    if cfg.shifts < 2 {
        return Err(Error::Config("qmc study needs shifts >= 2".into()));
    }
    let dist = BetaGaussian::new(cfg.beta)?;
    let mesh = build_mesh(cfg.k)?;
    let table = PsiTable::build(cfg.vartheta, cfg.s, &mesh.centroids());
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let g = load_or_construct_vector(cfg, n, cfg.s, &setup.weights, &setup.kernel)?;
        let shifts = ShiftSet::generate_stream(cfg.shifts, cfg.s, cfg.seed, n);
        let mut per_shift: Vec<Vec<f64>> = Vec::with_capacity(cfg.shifts);
        for delta in &shifts.shifts {
            let mut means =
                mean_fields_by_dim(&g, delta, &dist, &table, &mesh, &[cfg.s])?;
            per_shift.push(means.pop().unwrap());
        }
        let r = per_shift.len();
        let interior = mesh.num_interior();
        let mut qbar = vec![0.0f64; interior];
        for q in &per_shift {
            for (a, v) in qbar.iter_mut().zip(q) {
                *a += v;
            }
        }
        for v in qbar.iter_mut() {
            *v /= r as f64;
        }
        let mut ss_h1 = Vec::with_capacity(r);
        let mut ss_l2 = Vec::with_capacity(r);
        for q in &per_shift {
            let diff: Vec<f64> = qbar.iter().zip(q).map(|(a, b)| a - b).collect();
            let (h1, l2) = norms_of(&mesh, diff);
            ss_h1.push(h1 * h1);
            ss_l2.push(l2 * l2);
        }
        let denom = (r * (r - 1)) as f64;
        let rms_h1 = (pairwise_sum(&ss_h1) / denom).sqrt();
        let rms_l2 = (pairwise_sum(&ss_l2) / denom).sqrt();
        rows.push((n as f64, rms_h1, rms_l2));
    }
    let fit_h1 = fit_rate(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>())?;
    let fit_l2 = fit_rate(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>())?;
    Ok(RateTable {
        abscissa: "n",
        rows,
        fit_h1,
        fit_l2,
        metadata: study_metadata(cfg, &setup, "qmc"),
    })
}

/// Dimension truncation study: ‖E[u_{s'}] − E[u_s]‖ against s, estimated
/// with a single-shift rule in the reference dimension; the same samples
/// drive every truncation level.
pub fn truncation_study(cfg: &StudyConfig) -> Result<RateTable> {
    if cfg.s_list.iter().any(|&s| s >= cfg.s_reference) {
        return Err(Error::Config(format!(
            "truncation study needs every s strictly below s_reference = {} \
             (s = s_reference gives an exactly-zero error row)",
            cfg.s_reference
        )));
    }
    let setup = prepare(cfg, cfg.s_reference)?;
    let dist = BetaGaussian::new(cfg.beta)?;
    let mesh = build_mesh(cfg.k)?;
    let table = PsiTable::build(cfg.vartheta, cfg.s_reference, &mesh.centroids());
    let g =
        load_or_construct_vector(cfg, cfg.n_trunc, cfg.s_reference, &setup.weights, &setup.kernel)?;
    let shifts = ShiftSet::generate_stream(1, cfg.s_reference, cfg.seed, 0x7472756e63); // "trunc"
    let mut dims = cfg.s_list.clone();
    dims.push(cfg.s_reference);
    let means = mean_fields_by_dim(&g, &shifts.shifts[0], &dist, &table, &mesh, &dims)?;
    let (reference, truncated) = means.split_last().expect("dims nonempty");
    let mut rows = Vec::with_capacity(truncated.len());
    for (d, mean_s) in truncated.iter().enumerate() {
        let diff: Vec<f64> = reference.iter().zip(mean_s).map(|(a, b)| a - b).collect();
        let (h1, l2) = norms_of(&mesh, diff);
        rows.push((cfg.s_list[d] as f64, h1, l2));
    }
    let fit_h1 = fit_rate(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>())?;
    let fit_l2 = fit_rate(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>())?;
    Ok(RateTable {
        abscissa: "s",
        rows,
        fit_h1,
        fit_l2,
        metadata: study_metadata(cfg, &setup, "truncation"),
    })
}

/// Finite element study: ‖E[u_{s,h'} − u_{s,h}]‖ against h with a level-k'
/// reference, estimated with a single-shift rule; coarse means are
/// prolonged to the reference mesh and the norms integrated there.
pub fn fem_study(cfg: &StudyConfig) -> Result<RateTable> {
    if cfg.k_list.iter().any(|&k| k >= cfg.k_reference) {
        return Err(Error::Config(format!(
            "fem study needs every k strictly below k_reference = {}",
            cfg.k_reference
        )));
    }
    let setup = prepare(cfg, cfg.s)?;
    let dist = BetaGaussian::new(cfg.beta)?;
    let mut levels = cfg.k_list.clone();
    levels.push(cfg.k_reference);
    let meshes: Vec<UniformMesh> =
        levels.iter().map(|&k| build_mesh(k)).collect::<Result<_>>()?;
    let tables: Vec<PsiTable> = meshes
        .iter()
        .map(|mesh| PsiTable::build(cfg.vartheta, cfg.s, &mesh.centroids()))
        .collect();
    let g = load_or_construct_vector(cfg, cfg.n_fem, cfg.s, &setup.weights, &setup.kernel)?;
    let shifts = ShiftSet::generate_stream(1, cfg.s, cfg.seed, 0x66656d); // "fem"
    let means =
        mean_fields_by_level(&g, &shifts.shifts[0], &dist, &tables, &meshes, cfg.s)?;
    let (reference_vals, coarse) = means.split_last().expect("levels nonempty");
    let ref_mesh = *meshes.last().unwrap();
    let reference = FemSolution { mesh: ref_mesh, values: reference_vals.clone() };
    let mut rows = Vec::with_capacity(coarse.len());
    for (li, mean_k) in coarse.iter().enumerate() {
        let sol = FemSolution { mesh: meshes[li], values: mean_k.clone() };
        let fine = prolong(&sol, &ref_mesh)?;
        let diff: Vec<f64> =
            reference.values.iter().zip(&fine.values).map(|(a, b)| a - b).collect();
        let (h1, l2) = norms_of(&ref_mesh, diff);
        rows.push((meshes[li].h(), h1, l2));
    }
    // abscissae strictly increasing: finest h first
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let fit_h1 = fit_rate(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>())?;
    let fit_l2 = fit_rate(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>())?;
    Ok(RateTable {
        abscissa: "h",
        rows,
        fit_h1,
        fit_l2,
        metadata: study_metadata(cfg, &setup, "fem"),
    })
}
