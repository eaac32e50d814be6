//! Conformal atlas construction.
//!
//! Each patch is cut to a disk, mapped harmonically onto the unit disk, and
//! then mapped onto a rectangle by a linear Beltrami solve that uses the
//! Beltrami coefficient of the inverse disk map. The composition is close to
//! conformal and exactly a similarity on planar rectangles.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{Complex, Matrix2, Vector3};

use crate::linsys::{assemble_lower, Factorization};
use crate::mesh::{cut_surface, CutMesh, SurfaceMesh};

/// Bound applied to cotangent weights on near-degenerate triangles.
const COT_CLAMP: f64 = 1e6;
/// Required relative residual of the linear solves.
const SOLVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConformalError {
    #[error("{map} has {} flipped triangles (first: {:?})", faces.len(), &faces[..faces.len().min(8)])]
    Flipped { map: &'static str, faces: Vec<usize> },
    #[error("Beltrami coefficient |mu| = {modulus} >= 1 on face {face}")]
    NotQuasiConformal { face: usize, modulus: f64 },
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("linear solve residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("invalid corners: {0}")]
    Corners(String),
    #[error("rectangle dimensions must be positive, got {width} x {height}")]
    Dimensions { width: f64, height: f64 },
    #[error("cut path vertex {0} is not part of the patch")]
    PathVertexNotInPatch(usize),
    #[error("patch has no faces")]
    EmptyPatch,
}

/// Harmonic map of a cut patch onto the unit disk.
#[derive(Debug, Clone)]
pub struct DiskMap {
    pub uv: Vec<[f64; 2]>,
    /// Boundary loop of the cut mesh (counterclockwise, starting at its
    /// smallest vertex index).
    pub boundary: Vec<usize>,
}

/// Per-face Beltrami coefficient.
#[derive(Debug, Clone)]
pub struct BeltramiField {
    pub mu: Vec<Complex<f64>>,
}

impl BeltramiField {
    pub fn mean_abs(&self) -> f64 {
        if self.mu.is_empty() {
            return 0.0;
        }
        self.mu.iter().map(|m| m.norm()).sum::<f64>() / self.mu.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.mu.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

/// Distortion and validity summary of a chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDiagnostics {
    /// Mean and max `|mu|` of the disk map `h`.
    pub mean_mu_h: f64,
    pub max_mu_h: f64,
    /// Mean and max `|mu|` of the composed map `f` onto the rectangle.
    pub mean_mu_f: f64,
    pub max_mu_f: f64,
    /// Mean and max `|mu|` of `h` followed by a harmonic disk-to-rectangle
    /// map with the same corners, i.e. the chart without the Beltrami
    /// correction.
    pub mean_mu_unrevised: f64,
    pub max_mu_unrevised: f64,
    /// Minimum signed area over the image triangles of `f`.
    pub min_signed_area: f64,
    pub flipped: usize,
}

/// Conformal parameterization of one patch onto `[0, W] x [0, H]`.
#[derive(Debug, Clone)]
pub struct PatchChart {
    pub cut: CutMesh,
    /// Surface vertex index of every cut-mesh vertex.
    pub global: Vec<usize>,
    /// Surface face index of every patch face.
    pub global_faces: Vec<usize>,
    pub disk_uv: Vec<[f64; 2]>,
    pub rect_uv: Vec<[f64; 2]>,
    /// Cut-mesh vertices mapped to `(0,0)`, `(W,0)`, `(W,H)`, `(0,H)`.
    pub corners: [usize; 4],
    pub width: f64,
    pub height: f64,
    pub diagnostics: ChartDiagnostics,
}

fn cot(a: Vector3<f64>, b: Vector3<f64>) -> f64 {
    a.dot(&b) / a.cross(&b).norm()
}

/// Symmetric cotangent Laplacian as `(i, j, w_ij)` for each undirected edge.
fn cotangent_weights(mesh: &SurfaceMesh) -> Vec<(usize, usize, f64)> {
    let mut w = std::collections::BTreeMap::new();
    let p = mesh.vertices();
    for f in mesh.faces() {
        for k in 0..3 {
            let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let c = 0.5 * cot(p[i] - p[o], p[j] - p[o]);
            *w.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
        }
    }
    w.into_iter()
        .map(|((i, j), c): ((usize, usize), f64)| (i, j, c.clamp(-COT_CLAMP, COT_CLAMP)))
        .collect()
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Signed areas of all image triangles.
pub fn signed_areas(mesh: &SurfaceMesh, uv: &[[f64; 2]]) -> Vec<f64> {
    mesh.faces()
        .iter()
        .map(|f| signed_area(uv[f[0]], uv[f[1]], uv[f[2]]))
        .collect()
}

fn flipped_faces(mesh: &SurfaceMesh, uv: &[[f64; 2]]) -> Vec<usize> {
    signed_areas(mesh, uv)
        .iter()
        .enumerate()
        .filter(|(_, a)| !(**a > 0.0))
        .map(|(i, _)| i)
        .collect()
}

/// Solves `sum_j K_ij x_j = 0` for the free unknowns given Dirichlet values.
/// `edges` holds off-diagonal couplings `K_ij = -w`, `diag` the diagonal.
fn solve_dirichlet(
    n: usize,
    couplings: &[(usize, usize, f64)],
    diag: &[f64],
    fixed: &[Option<f64>],
) -> Result<Vec<f64>, ConformalError> {
    let mut index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if fixed[i].is_none() {
            index[i] = free.len();
            free.push(i);
        }
    }
    let mut x: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
    if free.is_empty() {
        return Ok(x);
    }
    let m = free.len();
    let mut triplets = Vec::with_capacity(couplings.len() + m);
    let mut rhs = vec![0.0; m];
    for (k, &i) in free.iter().enumerate() {
        triplets.push((k, k, diag[i]));
    }
    for &(i, j, kij) in couplings {
        match (fixed[i], fixed[j]) {
            (None, None) => triplets.push((index[i].max(index[j]), index[i].min(index[j]), kij)),
            (None, Some(vj)) => rhs[index[i]] -= kij * vj,
            (Some(vi), None) => rhs[index[j]] -= kij * vi,
            (Some(_), Some(_)) => {}
        }
    }
    let (pattern, values) = assemble_lower(m, &triplets);
    let fact = Factorization::cholesky_or_lu(&pattern, &values).map_err(|e| ConformalError::Solver(e.to_string()))?;
    let (sol, rel) = fact.solve(&rhs);
    if !(rel <= SOLVE_TOL) {
        return Err(ConformalError::Residual(rel));
    }
    for (k, &i) in free.iter().enumerate() {
        x[i] = sol[k];
    }
    Ok(x)
}

/// Harmonic map of a cut disk onto the unit disk.
///
/// The boundary loop goes to the unit circle at arc-length-proportional
/// angles, starting at angle 0 with the loop's first vertex; interior vertices
/// solve the cotangent Laplace equation.
pub fn harmonic_disk_map(cut: &CutMesh) -> Result<DiskMap, ConformalError> {
    let mesh = &cut.mesh;
    let n = mesh.n_vertices();
    let boundary = cut.boundary_loop();
    let p = mesh.vertices();
    let nb = boundary.len();
    let mut arc = vec![0.0; nb + 1];
    for k in 0..nb {
        arc[k + 1] = arc[k] + (p[boundary[(k + 1) % nb]] - p[boundary[k]]).norm();
    }
    let total = arc[nb];
    let mut fixed_u = vec![None; n];
    let mut fixed_v = vec![None; n];
    for (k, &b) in boundary.iter().enumerate() {
        let a = TAU * arc[k] / total;
        fixed_u[b] = Some(a.cos());
        fixed_v[b] = Some(a.sin());
    }

    let weights = cotangent_weights(mesh);
    let mut diag = vec![0.0; n];
    let couplings: Vec<(usize, usize, f64)> = weights
        .iter()
        .map(|&(i, j, w)| {
            diag[i] += w;
            diag[j] += w;
            (i, j, -w)
        })
        .collect();
    let u = solve_dirichlet(n, &couplings, &diag, &fixed_u)?;
    let v = solve_dirichlet(n, &couplings, &diag, &fixed_v)?;
    let uv: Vec<[f64; 2]> = u.into_iter().zip(v).map(|(a, b)| [a, b]).collect();

    let flipped = flipped_faces(mesh, &uv);
    if !flipped.is_empty() {
        return Err(ConformalError::Flipped {
            map: "disk map",
            faces: flipped,
        });
    }
    Ok(DiskMap { uv, boundary })
}

/// Coordinates of a face's vertices in an orthonormal frame of its plane:
/// `e1` along `p1 - p0`, `e2 = n x e1`. Returns edge vectors from vertex 0.
fn face_frame(mesh: &SurfaceMesh, m: usize) -> Matrix2<f64> {
    let [a, b, c] = mesh.faces()[m];
    let p = mesh.vertices();
    let l1 = p[b] - p[a];
    let l2 = p[c] - p[a];
    let n = l1.cross(&l2).normalize();
    let e1 = l1.normalize();
    let e2 = n.cross(&e1);
    Matrix2::new(l1.dot(&e1), l2.dot(&e1), l1.dot(&e2), l2.dot(&e2))
}

fn uv_edges(f: [usize; 3], uv: &[[f64; 2]]) -> Matrix2<f64> {
    let (a, b, c) = (uv[f[0]], uv[f[1]], uv[f[2]]);
    Matrix2::new(b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1])
}

/// Beltrami coefficient of the affine map with Jacobian `j`.
fn beltrami_of_jacobian(j: &Matrix2<f64>) -> Complex<f64> {
    let (a, b, c, d) = (j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]);
    let fz = Complex::new(0.5 * (a + d), 0.5 * (c - b));
    let fzb = Complex::new(0.5 * (a - d), 0.5 * (c + b));
    fzb / fz
}

/// Per-face Beltrami coefficient of a piecewise-linear map from the surface
/// to the plane (the map sends each face frame to its image triangle).
pub fn beltrami_of_map(mesh: &SurfaceMesh, uv: &[[f64; 2]]) -> BeltramiField {
    let mu = (0..mesh.n_faces())
        .map(|m| {
            let q = face_frame(mesh, m);
            let w = uv_edges(mesh.faces()[m], uv);
            match q.try_inverse() {
                Some(qi) => beltrami_of_jacobian(&(w * qi)),
                None => Complex::new(f64::INFINITY, 0.0),
            }
        })
        .collect();
    BeltramiField { mu }
}

/// Beltrami coefficient of the inverse disk map, disk to surface, measured
/// in per-face tangent frames of the surface.
pub fn beltrami_of_inverse(mesh: &SurfaceMesh, disk: &DiskMap) -> Result<BeltramiField, ConformalError> {
    let mut mu = Vec::with_capacity(mesh.n_faces());
    for m in 0..mesh.n_faces() {
        let q = face_frame(mesh, m);
        let w = uv_edges(mesh.faces()[m], &disk.uv);
        let wi = w.try_inverse().ok_or(ConformalError::NotQuasiConformal {
            face: m,
            modulus: f64::INFINITY,
        })?;
        let k = beltrami_of_jacobian(&(q * wi));
        let modulus = k.norm();
        if !(modulus < 1.0) {
            return Err(ConformalError::NotQuasiConformal { face: m, modulus });
        }
        mu.push(k);
    }
    Ok(BeltramiField { mu })
}

/// Picks loop positions for the requested corner vertices so that they appear
/// in counterclockwise order. A vertex may be requested several times when it
/// has several copies on the loop (cut junctions); `origin` maps loop vertices
/// to the ids used in `wanted`.
pub fn resolve_corners(boundary: &[usize], origin: &[usize], wanted: [usize; 4]) -> Result<[usize; 4], ConformalError> {
    let nb = boundary.len();
    let positions = |id: usize| -> Vec<usize> { (0..nb).filter(|&k| origin[boundary[k]] == id).collect() };
    let first = positions(wanted[0]);
    if first.is_empty() {
        return Err(ConformalError::Corners(format!("vertex {} is not on the patch boundary", wanted[0])));
    }
    for &start in &first {
        let mut chosen = [start; 4];
        let mut offset = 0;
        let mut ok = true;
        for c in 1..4 {
            let next = (offset + 1..nb).find(|&o| origin[boundary[(start + o) % nb]] == wanted[c]);
            match next {
                Some(o) => {
                    offset = o;
                    chosen[c] = (start + o) % nb;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(chosen.map(|k| boundary[k]));
        }
    }
    Err(ConformalError::Corners(format!(
        "{wanted:?} are not distinct boundary vertices in counterclockwise order"
    )))
}

/// Boundary vertices closest to the quarter points of the loop's arc length.
pub fn default_corners(mesh: &SurfaceMesh, boundary: &[usize]) -> [usize; 4] {
    let p = mesh.vertices();
    let nb = boundary.len();
    let mut arc = vec![0.0; nb];
    for k in 1..nb {
        arc[k] = arc[k - 1] + (p[boundary[k]] - p[boundary[k - 1]]).norm();
    }
    let total = arc[nb - 1] + (p[boundary[0]] - p[boundary[nb - 1]]).norm();
    let mut out = [boundary[0]; 4];
    let mut last = 0;
    for (q, slot) in out.iter_mut().enumerate().skip(1) {
        let target = total * q as f64 / 4.0;
        let k = (last + 1..nb)
            .min_by(|&a, &b| (arc[a] - target).abs().total_cmp(&(arc[b] - target).abs()))
            .unwrap_or(last);
        // keep at least one position for the remaining corners
        let k = k.min(nb - (4 - q));
        *slot = boundary[k];
        last = k;
    }
    out
}

/// Linear Beltrami solve onto `[0, W] x [0, H]`.
///
/// Both rectangle coordinates solve `div(A grad x) = 0` on the disk mesh with
/// the per-face coefficient matrix derived from `mu`. The boundary arcs between
/// consecutive corners fix `v = 0` (bottom), `u = W` (right), `v = H` (top) and
/// `u = 0` (left); the other coordinate is free on each arc.
pub fn lbs_rectangle_map(
    mesh: &SurfaceMesh,
    disk: &DiskMap,
    mu: &BeltramiField,
    corners: [usize; 4],
    width: f64,
    height: f64,
) -> Result<Vec<[f64; 2]>, ConformalError> {
    if !(width > 0.0 && height > 0.0) {
        return Err(ConformalError::Dimensions { width, height });
    }
    let n = mesh.n_vertices();
    let nb = disk.boundary.len();
    let mut pos = vec![usize::MAX; n];
    for (k, &b) in disk.boundary.iter().enumerate() {
        pos[b] = k;
    }
    let cpos: Vec<usize> = corners
        .iter()
        .map(|&c| {
            if pos[c] == usize::MAX {
                Err(ConformalError::Corners(format!("vertex {c} is not on the boundary")))
            } else {
                Ok(pos[c])
            }
        })
        .collect::<Result<_, _>>()?;
    // offsets along the loop measured from corner 0 must increase
    let off: Vec<usize> = cpos.iter().map(|&p| (p + nb - cpos[0]) % nb).collect();
    if !(off[0] < off[1] && off[1] < off[2] && off[2] < off[3]) {
        return Err(ConformalError::Corners(format!(
            "{corners:?} are not distinct boundary vertices in counterclockwise order"
        )));
    }

    let mut fixed_u = vec![None; n];
    let mut fixed_v = vec![None; n];
    for k in 0..=nb {
        let o = k % nb;
        let v = disk.boundary[(cpos[0] + o) % nb];
        let o = if k == nb { nb } else { o };
        if o <= off[1] {
            fixed_v[v] = Some(0.0);
        }
        if o >= off[1] && o <= off[2] {
            fixed_u[v] = Some(width);
        }
        if o >= off[2] && o <= off[3] {
            fixed_v[v] = Some(height);
        }
        if o >= off[3] {
            fixed_u[v] = Some(0.0);
        }
    }
    fixed_u[corners[0]] = Some(0.0);
    fixed_v[corners[0]] = Some(0.0);

    let mut diag = vec![0.0; n];
    let mut couplings = std::collections::BTreeMap::new();
    for (m, f) in mesh.faces().iter().enumerate() {
        let mu_f = mu.mu[m];
        let (rho, tau) = (mu_f.re, mu_f.im);
        let denom = 1.0 - rho * rho - tau * tau;
        if !(denom > 0.0) {
            return Err(ConformalError::NotQuasiConformal {
                face: m,
                modulus: mu_f.norm(),
            });
        }
        let a1 = ((rho - 1.0).powi(2) + tau * tau) / denom;
        let a2 = -2.0 * tau / denom;
        let a3 = ((rho + 1.0).powi(2) + tau * tau) / denom;
        let coef = Matrix2::new(a1, a2, a2, a3);
        let w = uv_edges(*f, &disk.uv);
        let area = 0.5 * w.determinant();
        let wi = w.try_inverse().ok_or(ConformalError::Flipped {
            map: "disk map",
            faces: vec![m],
        })?;
        // rows of W^-1 are the gradients of the barycentric coordinates 1, 2
        let g1 = wi.row(0).transpose();
        let g2 = wi.row(1).transpose();
        let grads = [-(g1 + g2), g1, g2];
        for a in 0..3 {
            for b in a..3 {
                let kab = area * grads[a].dot(&(coef * grads[b]));
                if a == b {
                    diag[f[a]] += kab;
                } else {
                    let key = (f[a].min(f[b]), f[a].max(f[b]));
                    *couplings.entry(key).or_insert(0.0) += kab;
                }
            }
        }
    }
    let couplings: Vec<(usize, usize, f64)> = couplings.into_iter().map(|((i, j), k)| (i, j, k)).collect();
    let u = solve_dirichlet(n, &couplings, &diag, &fixed_u)?;
    let v = solve_dirichlet(n, &couplings, &diag, &fixed_v)?;
    Ok(u.into_iter().zip(v).map(|(a, b)| [a, b]).collect())
}

/// Distortion diagnostics for a disk map, the unrevised rectangle map and the
/// composed rectangle map.
pub fn diagnostics(
    mesh: &SurfaceMesh,
    disk_uv: &[[f64; 2]],
    unrevised_uv: &[[f64; 2]],
    rect_uv: &[[f64; 2]],
) -> ChartDiagnostics {
    let mu_h = beltrami_of_map(mesh, disk_uv);
    let mu_0 = beltrami_of_map(mesh, unrevised_uv);
    let mu_f = beltrami_of_map(mesh, rect_uv);
    let areas = signed_areas(mesh, rect_uv);
    ChartDiagnostics {
        mean_mu_h: mu_h.mean_abs(),
        max_mu_h: mu_h.max_abs(),
        mean_mu_f: mu_f.mean_abs(),
        max_mu_f: mu_f.max_abs(),
        mean_mu_unrevised: mu_0.mean_abs(),
        max_mu_unrevised: mu_0.max_abs(),
        min_signed_area: areas.iter().copied().fold(f64::INFINITY, f64::min),
        flipped: areas.iter().filter(|a| !(**a > 0.0)).count(),
    }
}

/// Builds the chart of the patch made of `faces` of `surface`.
///
/// `cut_path` and `corners` use surface vertex indices. A corner vertex with
/// several copies on the cut boundary may be listed repeatedly; copies are
/// taken in counterclockwise order. Without corners, the vertices nearest the
/// quarter points of the boundary are used.
pub fn build_patch_chart(
    surface: &SurfaceMesh,
    faces: &[usize],
    cut_path: &[usize],
    corners: Option<[usize; 4]>,
    width: f64,
    height: f64,
) -> crate::Result<PatchChart> {
    if faces.is_empty() {
        return Err(ConformalError::EmptyPatch.into());
    }
    let (sub, sub_global) = surface.submesh(faces)?;
    let mut local = vec![usize::MAX; surface.n_vertices()];
    for (i, &g) in sub_global.iter().enumerate() {
        local[g] = i;
    }
    let path = cut_path
        .iter()
        .map(|&g| match local.get(g) {
            Some(&l) if l != usize::MAX => Ok(l),
            _ => Err(ConformalError::PathVertexNotInPatch(g)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cut = cut_surface(&sub, &path)?;
    let global: Vec<usize> = cut.origin.iter().map(|&o| sub_global[o]).collect();
    let disk = harmonic_disk_map(&cut)?;
    let mu = beltrami_of_inverse(&cut.mesh, &disk)?;
    let corners = match corners {
        Some(c) => resolve_corners(&disk.boundary, &global, c)?,
        None => default_corners(&cut.mesh, &disk.boundary),
    };
    let rect_uv = lbs_rectangle_map(&cut.mesh, &disk, &mu, corners, width, height)?;
    let zero = BeltramiField {
        mu: vec![Complex::new(0.0, 0.0); cut.mesh.n_faces()],
    };
    let unrevised = lbs_rectangle_map(&cut.mesh, &disk, &zero, corners, width, height)?;
    let diagnostics = diagnostics(&cut.mesh, &disk.uv, &unrevised, &rect_uv);
    let flipped = flipped_faces(&cut.mesh, &rect_uv);
    if !flipped.is_empty() {
        return Err(ConformalError::Flipped {
            map: "rectangle map",
            faces: flipped,
        }
        .into());
    }
    Ok(PatchChart {
        cut,
        global,
        global_faces: faces.to_vec(),
        disk_uv: disk.uv,
        rect_uv,
        corners,
        width,
        height,
        diagnostics,
    })
}

impl PatchChart {
    /// Writes `vertex,u,v` rows (surface vertex ids; cut copies repeat the id).
    pub fn write_uv_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertex,u,v")?;
        for (g, uv) in self.global.iter().zip(&self.rect_uv) {
            writeln!(w, "{},{:e},{:e}", g, uv[0], uv[1])?;
        }
        Ok(())
    }
}
