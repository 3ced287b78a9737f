//! P1 finite elements on uniform triangulations of the unit square.
//!
//! Level k splits (0,1)² into 2^k × 2^k squares of side h = 2^{−k}; each
//! square is cut along the diagonal from its lower-left to its upper-right
//! corner. Homogeneous Dirichlet data is built in: unknowns live on interior
//! nodes only. The coefficient is sampled once per triangle at the centroid
//! and the load integrated by one-point centroid quadrature; the SPD system
//! is solved by Jacobi-preconditioned conjugate gradients.

use crate::error::Error;
use crate::field::Point;
use crate::Result;

/// Relative residual target of the CG solve.
pub const CG_TOLERANCE: f64 = 1e-12;

/// A uniform level-k triangulation of (0,1)².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformMesh {
    k: u32,
    m: usize,
}

/// Build the level-k mesh; 1 ≤ k ≤ 10.
pub fn build_mesh(k: u32) -> Result<UniformMesh> {
    if !(1..=10).contains(&k) {
        return Err(Error::invalid(format!("mesh level k = {k} outside 1..=10")));
    }
    Ok(UniformMesh { k, m: 1usize << k })
}

impl UniformMesh {
    pub fn level(&self) -> u32 {
        self.k
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Squares per side, 2^k.
    pub fn side(&self) -> usize {
        self.m
    }

    pub fn num_nodes(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    pub fn num_triangles(&self) -> usize {
        2 * self.m * self.m
    }

    pub fn num_interior(&self) -> usize {
        (self.m - 1) * (self.m - 1)
    }

    /// Interior unknown index of grid node (i, j), or None on the boundary.
    pub fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i >= self.m || j >= self.m {
            None
        } else {
            Some((j - 1) * (self.m - 1) + (i - 1))
        }
    }

    /// Vertices of triangle t as grid coordinates; t/2 indexes the square,
    /// t%2 picks the lower (0) or upper (1) triangle along the diagonal.
    pub fn triangle(&self, t: usize) -> [(usize, usize); 3] {
        let q = t / 2;
        let (qx, qy) = (q % self.m, q / self.m);
        if t % 2 == 0 {
            [(qx, qy), (qx + 1, qy), (qx + 1, qy + 1)]
        } else {
            [(qx, qy), (qx + 1, qy + 1), (qx, qy + 1)]
        }
    }

    pub fn node_coords(&self, i: usize, j: usize) -> Point {
        let h = self.h();
        (i as f64 * h, j as f64 * h)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let v = self.triangle(t);
        let h = self.h();
        let cx = (v[0].0 + v[1].0 + v[2].0) as f64 * h / 3.0;
        let cy = (v[0].1 + v[1].1 + v[2].1) as f64 * h / 3.0;
        (cx, cy)
    }

    /// Centroids of all triangles, in triangle order.
    pub fn centroids(&self) -> Vec<Point> {
        (0..self.num_triangles()).map(|t| self.centroid(t)).collect()
    }
}

/// A P1 function with zero boundary trace: one value per interior node.
#[derive(Debug, Clone)]
pub struct FemSolution {
    pub mesh: UniformMesh,
    pub values: Vec<f64>,
}

impl FemSolution {
    pub fn zeros(mesh: UniformMesh) -> Self {
        FemSolution { mesh, values: vec![0.0; mesh.num_interior()] }
    }

    /// Nodal value at grid node (i, j); zero on the boundary.
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        match self.mesh.interior_index(i, j) {
            Some(idx) => self.values[idx],
            None => 0.0,
        }
    }

    /// Plain-text dump for external visualization: header `k interior`,
    /// then one interior nodal value per line.
    pub fn write_to(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "{} {}", self.mesh.level(), self.values.len())?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl std::io::BufRead) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut it = header.split_whitespace();
        let k: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Config("bad solution dump header".into()))?;
        let count: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Config("bad solution dump header".into()))?;
        let mesh = build_mesh(k)?;
        if count != mesh.num_interior() {
            return Err(Error::Config(format!(
                "dump claims {count} interior values, level {k} has {}",
                mesh.num_interior()
            )));
        }
        let mut values = Vec::with_capacity(count);
        let mut line = String::new();
        while values.len() < count {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Config("solution dump truncated".into()));
            }
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(
                t.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad nodal value {t}: {e}")))?,
            );
        }
        Ok(FemSolution { mesh, values })
    }
}

/// How the diffusion coefficient is sampled per triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoeffQuadrature {
    /// One centroid sample (first-order consistent; the default).
    #[default]
    Centroid,
    /// Mean of the three edge midpoints.
    MidEdges,
}

/// CSR stiffness pattern plus per-triangle assembly metadata, built once per
/// mesh level and shared.
struct Pattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

fn pattern_for(mesh: &UniformMesh) -> std::sync::Arc<Pattern> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Pattern>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(p) = guard.get(&mesh.k) {
        return p.clone();
    }
    // Interior node (i, j) couples with the 7-point stencil implied by the
    // lower-left/upper-right diagonal: self, ±e1, ±e2, +(e1+e2), −(e1+e2).
    let m = mesh.m;
    let n = mesh.num_interior();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for j in 1..m {
        for i in 1..m {
            let mut cols: Vec<usize> = Vec::with_capacity(7);
            let neighbors: [(isize, isize); 7] =
                [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (1, 1), (-1, -1)];
            for (di, dj) in neighbors {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni > 0 && nj > 0 && (ni as usize) < m && (nj as usize) < m {
                    cols.push(mesh.interior_index(ni as usize, nj as usize).unwrap());
                }
            }
            cols.sort_unstable();
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len());
        }
    }
    let p = Arc::new(Pattern { row_ptr, col_idx });
    guard.insert(mesh.k, p.clone());
    p
}

/// Assemble and solve with the coefficient already sampled per triangle
/// (`tri_coeff[t]` at the centroid of triangle t) and load functional `f`
/// integrated by centroid quadrature.
pub fn assemble_and_solve_sampled(
    mesh: &UniformMesh,
    tri_coeff: &[f64],
    f: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<FemSolution> {
    if tri_coeff.len() != mesh.num_triangles() {
        return Err(Error::invalid("tri_coeff length must equal the triangle count"));
    }
    if let Some(bad) = tri_coeff.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid(format!(
            "coefficient sample {bad} is not strictly positive"
        )));
    }
    let pattern = pattern_for(mesh);
    let n = mesh.num_interior();
    let mut matrix = vec![0.0f64; pattern.col_idx.len()];
    let mut rhs = vec![0.0f64; n];
    let area = 0.5 * mesh.h() * mesh.h();

    for t in 0..mesh.num_triangles() {
        let verts = mesh.triangle(t);
        let coords: [Point; 3] = [
            mesh.node_coords(verts[0].0, verts[0].1),
            mesh.node_coords(verts[1].0, verts[1].1),
            mesh.node_coords(verts[2].0, verts[2].1),
        ];
        // P1 gradients: ∇λ_r = (b_r, c_r) / (2A), cyclic differences.
        let mut b = [0.0f64; 3];
        let mut c = [0.0f64; 3];
        for r in 0..3 {
            let (p1, p2) = (coords[(r + 1) % 3], coords[(r + 2) % 3]);
            b[r] = p1.1 - p2.1;
            c[r] = p2.0 - p1.0;
        }
        let a_t = tri_coeff[t];
        let scale = a_t / (4.0 * area);
        let load = f(mesh.centroid(t)) * area / 3.0;
        let idx: [Option<usize>; 3] = [
            mesh.interior_index(verts[0].0, verts[0].1),
            mesh.interior_index(verts[1].0, verts[1].1),
            mesh.interior_index(verts[2].0, verts[2].1),
        ];
        for r in 0..3 {
            let Some(ir) = idx[r] else { continue };
            rhs[ir] += load;
            for s in 0..3 {
                let Some(is) = idx[s] else { continue };
                let k_rs = scale * (b[r] * b[s] + c[r] * c[s]);
                let row = &pattern.col_idx[pattern.row_ptr[ir]..pattern.row_ptr[ir + 1]];
                let off = row.binary_search(&is).expect("stencil covers all couplings");
                matrix[pattern.row_ptr[ir] + off] += k_rs;
            }
        }
    }

    let values = cg_solve(&pattern, &matrix, &rhs)?;
    Ok(FemSolution { mesh: *mesh, values })
}

/// Assemble and solve with a pointwise coefficient, sampled per triangle at
/// the centroid.
pub fn assemble_and_solve(
    mesh: &UniformMesh,
    coeff: &(dyn Fn(Point) -> f64 + Sync),
    f: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<FemSolution> {
    assemble_and_solve_with(mesh, coeff, f, CoeffQuadrature::Centroid)
}

/// Assemble and solve with a selectable per-triangle coefficient rule.
pub fn assemble_and_solve_with(
    mesh: &UniformMesh,
    coeff: &(dyn Fn(Point) -> f64 + Sync),
    f: &(dyn Fn(Point) -> f64 + Sync),
    rule: CoeffQuadrature,
) -> Result<FemSolution> {
    let tri_coeff: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| match rule {
            CoeffQuadrature::Centroid => coeff(mesh.centroid(t)),
            CoeffQuadrature::MidEdges => {
                let v = mesh.triangle(t);
                let c: [Point; 3] = [
                    mesh.node_coords(v[0].0, v[0].1),
                    mesh.node_coords(v[1].0, v[1].1),
                    mesh.node_coords(v[2].0, v[2].1),
                ];
                let mut acc = 0.0;
                for r in 0..3 {
                    let (p, q) = (c[r], c[(r + 1) % 3]);
                    acc += coeff(((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0));
                }
                acc / 3.0
            }
        })
        .collect();
    assemble_and_solve_sampled(mesh, &tri_coeff, f)
}

fn csr_matvec(pattern: &Pattern, matrix: &[f64], x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in pattern.row_ptr[r]..pattern.row_ptr[r + 1] {
            acc += matrix[k] * x[pattern.col_idx[k]];
        }
        *o = acc;
    }
}

/// Jacobi-preconditioned conjugate gradients to relative residual 1e-12.
fn cg_solve(pattern: &Pattern, matrix: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut diag_inv = vec![0.0f64; n];
    for r in 0..n {
        for k in pattern.row_ptr[r]..pattern.row_ptr[r + 1] {
            if pattern.col_idx[k] == r {
                if matrix[k] <= 0.0 {
                    return Err(Error::Convergence("nonpositive stiffness diagonal".into()));
                }
                diag_inv[r] = 1.0 / matrix[k];
            }
        }
    }
    let b_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![0.0f64; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag_inv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0f64; n];
    let max_iter = 200 * (n as f64).sqrt() as usize + 200;
    for _ in 0..max_iter {
        csr_matvec(pattern, matrix, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::Convergence("CG lost positive definiteness".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= CG_TOLERANCE * b_norm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * diag_inv[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence(format!(
        "CG did not reach {CG_TOLERANCE} in {max_iter} iterations"
    )))
}

/// |u|_{H¹} = ‖∇u‖_{L²}: exact elementwise integration of the piecewise
/// constant gradient.
pub fn h1_seminorm(u: &FemSolution) -> f64 {
    let mesh = &u.mesh;
    let area = 0.5 * mesh.h() * mesh.h();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let (gx, gy) = triangle_gradient(u, t);
        total += area * (gx * gx + gy * gy);
    }
    total.sqrt()
}

/// ‖u‖_{L²} via the exact P1 mass matrix.
pub fn l2_norm(u: &FemSolution) -> f64 {
    let mesh = &u.mesh;
    let area = 0.5 * mesh.h() * mesh.h();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let v = mesh.triangle(t);
        let u0 = u.value_at(v[0].0, v[0].1);
        let u1 = u.value_at(v[1].0, v[1].1);
        let u2 = u.value_at(v[2].0, v[2].1);
        total += area / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u0 * u2 + u1 * u2);
    }
    total.sqrt()
}

fn triangle_gradient(u: &FemSolution, t: usize) -> (f64, f64) {
    let mesh = &u.mesh;
    let v = mesh.triangle(t);
    let area2 = mesh.h() * mesh.h(); // 2A
    let mut gx = 0.0;
    let mut gy = 0.0;
    for r in 0..3 {
        let pr = v[r];
        let p1 = mesh.node_coords(v[(r + 1) % 3].0, v[(r + 1) % 3].1);
        let p2 = mesh.node_coords(v[(r + 2) % 3].0, v[(r + 2) % 3].1);
        let ur = u.value_at(pr.0, pr.1);
        gx += ur * (p1.1 - p2.1) / area2;
        gy += ur * (p2.0 - p1.0) / area2;
    }
    (gx, gy)
}

/// ‖∇u_h − g‖_{L²} against an analytic gradient, integrated with the
/// degree-2 midpoint-of-edges rule.
pub fn h1_seminorm_error(u: &FemSolution, grad: &dyn Fn(Point) -> (f64, f64)) -> f64 {
    let mesh = &u.mesh;
    let area = 0.5 * mesh.h() * mesh.h();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let v = mesh.triangle(t);
        let (gx, gy) = triangle_gradient(u, t);
        let c: [Point; 3] = [
            mesh.node_coords(v[0].0, v[0].1),
            mesh.node_coords(v[1].0, v[1].1),
            mesh.node_coords(v[2].0, v[2].1),
        ];
        let mids = [
            ((c[0].0 + c[1].0) / 2.0, (c[0].1 + c[1].1) / 2.0),
            ((c[1].0 + c[2].0) / 2.0, (c[1].1 + c[2].1) / 2.0),
            ((c[2].0 + c[0].0) / 2.0, (c[2].1 + c[0].1) / 2.0),
        ];
        let mut acc = 0.0;
        for mid in mids {
            let (ex, ey) = grad(mid);
            acc += (gx - ex) * (gx - ex) + (gy - ey) * (gy - ey);
        }
        total += area * acc / 3.0;
    }
    total.sqrt()
}

/// ‖u_h − v‖_{L²} against an analytic function, midpoint-of-edges rule.
pub fn l2_error(u: &FemSolution, exact: &dyn Fn(Point) -> f64) -> f64 {
    let mesh = &u.mesh;
    let area = 0.5 * mesh.h() * mesh.h();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let v = mesh.triangle(t);
        let c: [Point; 3] = [
            mesh.node_coords(v[0].0, v[0].1),
            mesh.node_coords(v[1].0, v[1].1),
            mesh.node_coords(v[2].0, v[2].1),
        ];
        let uv = [
            u.value_at(v[0].0, v[0].1),
            u.value_at(v[1].0, v[1].1),
            u.value_at(v[2].0, v[2].1),
        ];
        let mids = [
            (0, 1, ((c[0].0 + c[1].0) / 2.0, (c[0].1 + c[1].1) / 2.0)),
            (1, 2, ((c[1].0 + c[2].0) / 2.0, (c[1].1 + c[2].1) / 2.0)),
            (2, 0, ((c[2].0 + c[0].0) / 2.0, (c[2].1 + c[0].1) / 2.0)),
        ];
        let mut acc = 0.0;
        for (a, b, mid) in mids {
            let uh = 0.5 * (uv[a] + uv[b]);
            let d = uh - exact(mid);
            acc += d * d;
        }
        total += area * acc / 3.0;
    }
    total.sqrt()
}

/// P1 interpolation of `u` onto a finer nested mesh (level ≥ u's level),
/// one refinement step at a time; exact for functions piecewise linear on
/// the coarse triangulation.
pub fn prolong(u: &FemSolution, fine: &UniformMesh) -> Result<FemSolution> {
    if fine.level() < u.mesh.level() {
        return Err(Error::invalid("prolongation target must be at least as fine"));
    }
    let mut current = u.clone();
    while current.mesh.level() < fine.level() {
        current = prolong_one(&current)?;
    }
    Ok(current)
}

fn prolong_one(u: &FemSolution) -> Result<FemSolution> {
    let fine = build_mesh(u.mesh.level() + 1)?;
    let mf = fine.side();
    let mut values = vec![0.0f64; fine.num_interior()];
    for j in 1..mf {
        for i in 1..mf {
            let idx = fine.interior_index(i, j).unwrap();
            values[idx] = match (i % 2, j % 2) {
                (0, 0) => u.value_at(i / 2, j / 2),
                (1, 0) => 0.5 * (u.value_at(i / 2, j / 2) + u.value_at(i / 2 + 1, j / 2)),
                (0, 1) => 0.5 * (u.value_at(i / 2, j / 2) + u.value_at(i / 2, j / 2 + 1)),
                // square center sits on the lower-left/upper-right diagonal
                _ => 0.5 * (u.value_at(i / 2, j / 2) + u.value_at(i / 2 + 1, j / 2 + 1)),
            };
        }
    }
    Ok(FemSolution { mesh: fine, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mesh_counts() {
        let m1 = build_mesh(1).unwrap();
        assert_eq!((m1.num_nodes(), m1.num_triangles(), m1.num_interior()), (9, 8, 1));
        let m2 = build_mesh(2).unwrap();
        assert_eq!((m2.num_nodes(), m2.num_triangles(), m2.num_interior()), (25, 32, 9));
        let m7 = build_mesh(7).unwrap();
        assert_eq!(m7.num_nodes(), 16641);
        assert!(build_mesh(0).is_err());
        assert!(build_mesh(11).is_err());
    }

    #[test]
    fn hat_function_h1_norm() {
        // Level-1 hat (single interior node, value 1): |u|²_{H¹} = 4.
        let mesh = build_mesh(1).unwrap();
        let u = FemSolution { mesh, values: vec![1.0] };
        let h1 = h1_seminorm(&u);
        assert!((h1 * h1 - 4.0).abs() < 1e-13, "{}", h1 * h1);
        // zero solution: both norms zero
        let z = FemSolution::zeros(mesh);
        assert_eq!(h1_seminorm(&z), 0.0);
        assert_eq!(l2_norm(&z), 0.0);
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let mesh = build_mesh(3).unwrap();
        let u = assemble_and_solve(&mesh, &|_x| 1.0, &|_x| 0.0).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coefficient_scaling_is_inverse() {
        let mesh = build_mesh(3).unwrap();
        let f = |x: Point| x.1;
        let u1 = assemble_and_solve(&mesh, &|_x| 1.0, &f).unwrap();
        let u5 = assemble_and_solve(&mesh, &|_x| 5.0, &f).unwrap();
        for (a, b) in u1.values.iter().zip(&u5.values) {
            assert!((a - 5.0 * b).abs() < 1e-10 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        let mesh = build_mesh(2).unwrap();
        assert!(assemble_and_solve(&mesh, &|_x| 0.0, &|_x| 1.0).is_err());
        assert!(assemble_and_solve(&mesh, &|x| x.0 - 0.5, &|_x| 1.0).is_err());
    }

    #[test]
    fn stiffness_row_sums_vanish_away_from_boundary() {
        // Rows of nodes all of whose stencil neighbors are interior sum to
        // zero (constants are in the local kernel of the Neumann part).
        let mesh = build_mesh(4).unwrap();
        let pattern = pattern_for(&mesh);
        // reassemble to access raw matrix entries
        let tri_coeff = vec![1.0; mesh.num_triangles()];
        let mut matrix = vec![0.0f64; pattern.col_idx.len()];
        let area = 0.5 * mesh.h() * mesh.h();
        for t in 0..mesh.num_triangles() {
            let verts = mesh.triangle(t);
            let coords: [Point; 3] = [
                mesh.node_coords(verts[0].0, verts[0].1),
                mesh.node_coords(verts[1].0, verts[1].1),
                mesh.node_coords(verts[2].0, verts[2].1),
            ];
            let mut b = [0.0f64; 3];
            let mut c = [0.0f64; 3];
            for r in 0..3 {
                let (p1, p2) = (coords[(r + 1) % 3], coords[(r + 2) % 3]);
                b[r] = p1.1 - p2.1;
                c[r] = p2.0 - p1.0;
            }
            let scale = tri_coeff[t] / (4.0 * area);
            for r in 0..3 {
                let Some(ir) = mesh.interior_index(verts[r].0, verts[r].1) else { continue };
                for s in 0..3 {
                    let Some(is) = mesh.interior_index(verts[s].0, verts[s].1) else { continue };
                    let row = &pattern.col_idx[pattern.row_ptr[ir]..pattern.row_ptr[ir + 1]];
                    let off = row.binary_search(&is).unwrap();
                    matrix[pattern.row_ptr[ir] + off] += scale * (b[r] * b[s] + c[r] * c[s]);
                }
            }
        }
        let m = mesh.side();
        for j in 2..m - 1 {
            for i in 2..m - 1 {
                let r = mesh.interior_index(i, j).unwrap();
                let sum: f64 =
                    (pattern.row_ptr[r]..pattern.row_ptr[r + 1]).map(|k| matrix[k]).sum();
                assert!(sum.abs() < 1e-12, "row ({i},{j}) sums to {sum}");
                // symmetry: K[r][c] == K[c][r]
                for k in pattern.row_ptr[r]..pattern.row_ptr[r + 1] {
                    let c_ = pattern.col_idx[k];
                    let row_c = &pattern.col_idx[pattern.row_ptr[c_]..pattern.row_ptr[c_ + 1]];
                    let off = row_c.binary_search(&r).unwrap();
                    let k_cr = matrix[pattern.row_ptr[c_] + off];
                    assert!((matrix[k] - k_cr).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn galerkin_residual_is_tiny() {
        let mesh = build_mesh(4).unwrap();
        let coeff = |x: Point| 1.0 + 0.5 * (PI * x.0).sin() * (PI * x.1).sin();
        let f = |x: Point| x.1;
        let u = assemble_and_solve(&mesh, &coeff, &f).unwrap();
        // recompute residual through an independent matvec
        let tri_coeff: Vec<f64> =
            (0..mesh.num_triangles()).map(|t| coeff(mesh.centroid(t))).collect();
        let pattern = pattern_for(&mesh);
        let mut matrix = vec![0.0f64; pattern.col_idx.len()];
        let mut rhs = vec![0.0f64; mesh.num_interior()];
        let area = 0.5 * mesh.h() * mesh.h();
        for t in 0..mesh.num_triangles() {
            let verts = mesh.triangle(t);
            let coords: [Point; 3] = [
                mesh.node_coords(verts[0].0, verts[0].1),
                mesh.node_coords(verts[1].0, verts[1].1),
                mesh.node_coords(verts[2].0, verts[2].1),
            ];
            let mut b = [0.0f64; 3];
            let mut c = [0.0f64; 3];
            for r in 0..3 {
                let (p1, p2) = (coords[(r + 1) % 3], coords[(r + 2) % 3]);
                b[r] = p1.1 - p2.1;
                c[r] = p2.0 - p1.0;
            }
            let scale = tri_coeff[t] / (4.0 * area);
            let load = f(mesh.centroid(t)) * area / 3.0;
            for r in 0..3 {
                let Some(ir) = mesh.interior_index(verts[r].0, verts[r].1) else { continue };
                rhs[ir] += load;
                for s_ in 0..3 {
                    let Some(is) = mesh.interior_index(verts[s_].0, verts[s_].1) else { continue };
                    let row = &pattern.col_idx[pattern.row_ptr[ir]..pattern.row_ptr[ir + 1]];
                    let off = row.binary_search(&is).unwrap();
                    matrix[pattern.row_ptr[ir] + off] += scale * (b[r] * b[s_] + c[r] * c[s_]);
                }
            }
        }
        let mut ku = vec![0.0f64; rhs.len()];
        csr_matvec(&pattern, &matrix, &u.values, &mut ku);
        let res: f64 =
            rhs.iter().zip(&ku).map(|(b, k)| (b - k) * (b - k)).sum::<f64>().sqrt();
        let bn: f64 = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(res <= 2.0 * CG_TOLERANCE * bn, "relative residual {}", res / bn);
    }

    #[test]
    fn manufactured_solution_converges() {
        // u = sin(πx)sin(πy), coeff ≡ 1, f = 2π² sin sin; H¹ error halves
        // and L² error quarters per refinement.
        let exact_grad = |x: Point| {
            (
                PI * (PI * x.0).cos() * (PI * x.1).sin(),
                PI * (PI * x.0).sin() * (PI * x.1).cos(),
            )
        };
        let exact = |x: Point| (PI * x.0).sin() * (PI * x.1).sin();
        let f = |x: Point| 2.0 * PI * PI * (PI * x.0).sin() * (PI * x.1).sin();
        let mut prev_h1 = f64::INFINITY;
        let mut prev_l2 = f64::INFINITY;
        for k in 2..=5 {
            let mesh = build_mesh(k).unwrap();
            let u = assemble_and_solve(&mesh, &|_x| 1.0, &f).unwrap();
            let e_h1 = h1_seminorm_error(&u, &exact_grad);
            let e_l2 = l2_error(&u, &exact);
            if prev_h1.is_finite() {
                let rate_h1 = (prev_h1 / e_h1).log2();
                let rate_l2 = (prev_l2 / e_l2).log2();
                assert!((rate_h1 - 1.0).abs() < 0.2, "k={k}: H1 rate {rate_h1}");
                assert!((rate_l2 - 2.0).abs() < 0.3, "k={k}: L2 rate {rate_l2}");
            }
            prev_h1 = e_h1;
            prev_l2 = e_l2;
        }
    }

    #[test]
    fn prolong_identity_and_linear_reproduction() {
        let coarse = build_mesh(2).unwrap();
        // nodal interpolant of g(x) = x₁(1−x₁) restricted to interior
        let g = |x: Point| x.0 * (1.0 - x.0);
        let mut u = FemSolution::zeros(coarse);
        for j in 1..coarse.side() {
            for i in 1..coarse.side() {
                let idx = coarse.interior_index(i, j).unwrap();
                u.values[idx] = g(coarse.node_coords(i, j));
            }
        }
        // same level: identity
        let same = prolong(&u, &coarse).unwrap();
        assert_eq!(same.values, u.values);
        // a piecewise-linear function on the coarse mesh is reproduced
        // exactly at all fine nodes (here: the hat at the center node)
        let hat = FemSolution {
            mesh: build_mesh(1).unwrap(),
            values: vec![1.0],
        };
        let fine = build_mesh(3).unwrap();
        let ph = prolong(&hat, &fine).unwrap();
        // H¹ seminorm of a P1 function is invariant under interpolation
        // onto a nested refinement
        assert!((h1_seminorm(&ph) - h1_seminorm(&hat)).abs() < 1e-13);
        assert!((l2_norm(&ph) - l2_norm(&hat)).abs() < 1e-13);
        // two-step vs one-step
        let two = prolong(&prolong(&hat, &build_mesh(2).unwrap()).unwrap(), &fine).unwrap();
        assert_eq!(two.values, ph.values);
        // downward prolongation is rejected
        assert!(prolong(&ph, &build_mesh(1).unwrap()).is_err());
    }

    #[test]
    fn solution_dump_roundtrip() {
        let mesh = build_mesh(2).unwrap();
        let u = assemble_and_solve(&mesh, &|_x| 1.0, &|x| x.1).unwrap();
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 9\n"));
        let back = FemSolution::read_from(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.values, u.values);
        assert_eq!(back.mesh.level(), 2);
    }

    #[test]
    fn mid_edge_coefficient_rule_stays_first_order() {
        // Smooth curved coefficient: the rules differ at O(h²) but solve the
        // same problem; the knob must not change the solution materially.
        let coeff = |x: Point| 1.0 + 0.4 * (2.0 * x.0 + x.1 * x.1).sin();
        let f = |x: Point| x.1;
        let mesh = build_mesh(4).unwrap();
        let a = assemble_and_solve(&mesh, &coeff, &f).unwrap();
        let b = assemble_and_solve_with(&mesh, &coeff, &f, CoeffQuadrature::MidEdges).unwrap();
        let diff: f64 = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let scale: f64 = a.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-3 * scale, "rules diverge: {diff} vs scale {scale}");
        assert!(diff > 0.0, "curved coefficient must separate the two rules");
        // an affine coefficient makes the two rules coincide up to rounding
        let affine = |x: Point| 1.0 + 0.4 * (2.0 * x.0 + x.1);
        let c = assemble_and_solve(&mesh, &affine, &f).unwrap();
        let d = assemble_and_solve_with(&mesh, &affine, &f, CoeffQuadrature::MidEdges).unwrap();
        for (x, y) in c.values.iter().zip(&d.values) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn prolong_trend_preserves_h1_of_smooth_functions() {
        // |P u|_{H¹} approaches |u|_{H¹} from below as the interpolation
        // error vanishes.
        let f = |x: Point| 2.0 * PI * PI * (PI * x.0).sin() * (PI * x.1).sin();
        let mesh = build_mesh(3).unwrap();
        let u = assemble_and_solve(&mesh, &|_x| 1.0, &f).unwrap();
        let h1 = h1_seminorm(&u);
        for k in 4..=6 {
            let p = prolong(&u, &build_mesh(k).unwrap()).unwrap();
            assert!((h1_seminorm(&p) - h1).abs() < 1e-12);
        }
    }
}
