//! Linear elasticity on the prism mesh with the ersatz material model.
//!
//! Every element stiffness is `s_e * k0(e)` where `k0` is the 6-node wedge
//! stiffness for unit modulus scale and `s_e` is the mean of the nodal
//! stiffness factors. Fixed DOFs are eliminated and the reduced system is
//! solved with a sparse Cholesky factorization.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::linsys::{Factorization, LinsysError, LowerPattern};
use crate::solidmesh::SolidMesh;

pub type Matrix18 = SMatrix<f64, 18, 18>;
pub type Vector18 = SVector<f64, 18>;

/// Required relative residual of the equilibrium solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("invalid material: E = {e}, nu = {nu}")]
    Material { e: f64, nu: f64 },
    #[error("element {element} has non-positive Jacobian {det:e} at a quadrature point")]
    InvertedElement { element: usize, det: f64 },
    #[error("stiffness matrix is singular after constraint elimination (structure under-constrained)")]
    Singular,
    #[error("linear solve did not converge: relative residual {0:e}")]
    Residual(f64),
    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),
    #[error("surface vertex {0} is out of range")]
    VertexOutOfRange(usize),
    #[error("boundary conditions fix only {0} DOFs; at least 6 are needed")]
    UnderConstrained(usize),
    #[error("{got} values given, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Isotropic linear elastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self { e: 1.0, nu: 0.3 }
    }
}

impl Material {
    pub fn validate(&self) -> Result<(), FemError> {
        if self.e > 0.0 && self.nu > -1.0 && self.nu < 0.5 {
            Ok(())
        } else {
            Err(FemError::Material { e: self.e, nu: self.nu })
        }
    }

    /// Constitutive matrix in Voigt order `xx, yy, zz, xy, yz, zx` with
    /// engineering shear strains.
    pub fn d_matrix(&self) -> SMatrix<f64, 6, 6> {
        let (e, nu) = (self.e, self.nu);
        let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mut d = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                d[(i, j)] = if i == j { c * (1.0 - nu) } else { c * nu };
            }
            d[(i + 3, i + 3)] = c * (1.0 - 2.0 * nu) / 2.0;
        }
        d
    }
}

/// Regularized Heaviside function: `alpha` below `-eps`, `1` above `eps`, and
/// a cubic blend in between that is C1 at both ends.
pub fn regularized_heaviside(x: f64, eps: f64, alpha: f64) -> f64 {
    if x > eps {
        1.0
    } else if x < -eps {
        alpha
    } else {
        let r = x / eps;
        0.75 * (1.0 - alpha) * (r - r * r * r / 3.0) + 0.5 * (1.0 + alpha)
    }
}

/// Derivative of [`regularized_heaviside`].
pub fn heaviside_derivative(x: f64, eps: f64, alpha: f64) -> f64 {
    if x.abs() > eps {
        0.0
    } else {
        0.75 * (1.0 - alpha) * (1.0 / eps - x * x / (eps * eps * eps))
    }
}

/// Element density from the six nodal TDF values: the mean of the nodal
/// regularized Heaviside values.
pub fn element_density(phi: &[f64; 6], eps: f64, alpha: f64) -> f64 {
    phi.iter().map(|&p| regularized_heaviside(p, eps, alpha)).sum::<f64>() / 6.0
}

const TRI_POINTS: [(f64, f64); 3] = [(1.0 / 6.0, 1.0 / 6.0), (2.0 / 3.0, 1.0 / 6.0), (1.0 / 6.0, 2.0 / 3.0)];

/// `(xi, eta, zeta, weight)` for the 3 x 2 wedge rule.
fn wedge_rule() -> [(f64, f64, f64, f64); 6] {
    let g = 1.0 / 3f64.sqrt();
    let mut out = [(0.0, 0.0, 0.0, 0.0); 6];
    let mut k = 0;
    for z in [-g, g] {
        for (xi, eta) in TRI_POINTS {
            out[k] = (xi, eta, z, 1.0 / 6.0);
            k += 1;
        }
    }
    out
}

/// Shape function derivatives with respect to `(xi, eta, zeta)`, one column
/// per node.
fn shape_derivatives(xi: f64, eta: f64, zeta: f64) -> SMatrix<f64, 3, 6> {
    let l = [1.0 - xi - eta, xi, eta];
    let dl_dxi = [-1.0, 1.0, 0.0];
    let dl_deta = [-1.0, 0.0, 1.0];
    let mut d = SMatrix::<f64, 3, 6>::zeros();
    for i in 0..3 {
        for (k, s) in [(i, -1.0), (i + 3, 1.0)] {
            let h = 0.5 * (1.0 + s * zeta);
            d[(0, k)] = dl_dxi[i] * h;
            d[(1, k)] = dl_deta[i] * h;
            d[(2, k)] = 0.5 * s * l[i];
        }
    }
    d
}

fn jacobian(dn: &SMatrix<f64, 3, 6>, x: &[Vector3<f64>; 6]) -> Matrix3<f64> {
    let mut j = Matrix3::zeros();
    for k in 0..6 {
        for r in 0..3 {
            for c in 0..3 {
                j[(r, c)] += dn[(r, k)] * x[k][c];
            }
        }
    }
    j
}

/// Jacobian determinants at the six quadrature points.
pub fn wedge_jacobian_determinants(x: &[Vector3<f64>; 6]) -> [f64; 6] {
    wedge_rule().map(|(xi, eta, z, _)| jacobian(&shape_derivatives(xi, eta, z), x).determinant())
}

/// Volume of a wedge by quadrature.
pub fn wedge_volume(x: &[Vector3<f64>; 6]) -> f64 {
    wedge_rule()
        .iter()
        .zip(wedge_jacobian_determinants(x))
        .map(|((.., w), d)| w * d)
        .sum()
}

/// Strain-displacement matrix rows for global shape gradients.
fn b_matrix(grads: &SMatrix<f64, 3, 6>) -> SMatrix<f64, 6, 18> {
    let mut b = SMatrix::<f64, 6, 18>::zeros();
    for i in 0..6 {
        let (bx, by, bz) = (grads[(0, i)], grads[(1, i)], grads[(2, i)]);
        let c = 3 * i;
        b[(0, c)] = bx;
        b[(1, c + 1)] = by;
        b[(2, c + 2)] = bz;
        b[(3, c)] = by;
        b[(3, c + 1)] = bx;
        b[(4, c + 1)] = bz;
        b[(4, c + 2)] = by;
        b[(5, c)] = bz;
        b[(5, c + 2)] = bx;
    }
    b
}

/// Stiffness matrix of a 6-node wedge, DOFs ordered node-major `(x, y, z)`.
pub fn wedge_stiffness(x: &[Vector3<f64>; 6], material: &Material) -> Result<Matrix18, FemError> {
    let d = material.d_matrix();
    let mut k = Matrix18::zeros();
    for (xi, eta, z, w) in wedge_rule() {
        let dn = shape_derivatives(xi, eta, z);
        let j = jacobian(&dn, x);
        let det = j.determinant();
        if !(det > 0.0) {
            return Err(FemError::InvertedElement { element: 0, det });
        }
        let jinv = j.try_inverse().ok_or(FemError::InvertedElement { element: 0, det })?;
        let b = b_matrix(&(jinv * dn));
        k += b.transpose() * d * b * (det * w);
    }
    // remove round-off asymmetry
    Ok((k + k.transpose()) * 0.5)
}

/// Stresses `D B u` at the element centroid (used by the patch test).
pub fn wedge_centroid_stress(x: &[Vector3<f64>; 6], material: &Material, u: &Vector18) -> SVector<f64, 6> {
    let dn = shape_derivatives(1.0 / 3.0, 1.0 / 3.0, 0.0);
    let j = jacobian(&dn, x);
    let b = b_matrix(&(j.try_inverse().expect("valid wedge") * dn));
    material.d_matrix() * b * u
}

/// Supports and design-independent loads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    /// `(node, axis)` pairs with zero displacement.
    pub fixed_dofs: BTreeSet<(usize, usize)>,
    pub point_loads: Vec<(usize, [f64; 3])>,
    /// `(surface vertex, total force)`; split equally over the node column.
    pub load_columns: Vec<(usize, [f64; 3])>,
}

impl BoundaryConditions {
    /// Fixes the given axes of every node in the columns over `vertices`.
    pub fn fix_columns(&mut self, mesh: &SolidMesh, vertices: &[usize], axes: &[usize]) {
        for &l in vertices {
            for node in mesh.column(l) {
                for &a in axes {
                    self.fixed_dofs.insert((node, a));
                }
            }
        }
    }

    pub fn validate(&self, mesh: &SolidMesh) -> Result<(), FemError> {
        for &(n, a) in &self.fixed_dofs {
            if n >= mesh.n_nodes() || a > 2 {
                return Err(FemError::NodeOutOfRange(n));
            }
        }
        for &(n, _) in &self.point_loads {
            if n >= mesh.n_nodes() {
                return Err(FemError::NodeOutOfRange(n));
            }
        }
        for &(l, _) in &self.load_columns {
            if l >= mesh.n_surface_vertices() {
                return Err(FemError::VertexOutOfRange(l));
            }
        }
        if self.fixed_dofs.len() < 6 {
            return Err(FemError::UnderConstrained(self.fixed_dofs.len()));
        }
        Ok(())
    }

    /// Global load vector of length `3 n_nodes`.
    pub fn load_vector(&self, mesh: &SolidMesh) -> Vec<f64> {
        let mut f = vec![0.0; 3 * mesh.n_nodes()];
        for &(n, force) in &self.point_loads {
            for a in 0..3 {
                f[3 * n + a] += force[a];
            }
        }
        let share = 1.0 / mesh.column_len() as f64;
        for &(l, force) in &self.load_columns {
            for n in mesh.column(l) {
                for a in 0..3 {
                    f[3 * n + a] += force[a] * share;
                }
            }
        }
        f
    }

    /// Nodes carrying a nonzero load.
    pub fn loaded_nodes(&self, mesh: &SolidMesh) -> BTreeSet<usize> {
        let f = self.load_vector(mesh);
        (0..mesh.n_nodes())
            .filter(|&n| f[3 * n..3 * n + 3].iter().any(|v| *v != 0.0))
            .collect()
    }

    pub fn fixed_nodes(&self) -> BTreeSet<usize> {
        self.fixed_dofs.iter().map(|&(n, _)| n).collect()
    }
}

/// Solution of one equilibrium solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    /// Displacements, `3 n_nodes` entries; zero on fixed and removed DOFs.
    pub u: Vec<f64>,
    pub compliance: f64,
    pub solve_residual: f64,
}

impl FemSolution {
    pub fn node_displacement(&self, n: usize) -> [f64; 3] {
        [self.u[3 * n], self.u[3 * n + 1], self.u[3 * n + 2]]
    }
}

/// DOF numbering and sparsity pattern for a set of elements.
#[derive(Debug)]
pub struct SystemLayout {
    elements: Vec<usize>,
    /// Reduced index of every global DOF, `usize::MAX` when eliminated.
    dof_index: Vec<usize>,
    n_free: usize,
    pattern: LowerPattern,
    /// For each listed element, the value slot of each lower-triangle
    /// `(a, b)` pair of its 18 x 18 stiffness (`usize::MAX` if eliminated).
    slots: Vec<usize>,
}

const LOWER_PAIRS: usize = 18 * 19 / 2;

impl SystemLayout {
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    /// Number of unknowns after elimination.
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Reduced index of global DOF `3 * node + axis`, if kept.
    pub fn dof(&self, global: usize) -> Option<usize> {
        let i = self.dof_index[global];
        (i != usize::MAX).then_some(i)
    }
}

/// Solid mesh plus per-element reference stiffness matrices.
#[derive(Debug)]
pub struct FemModel {
    mesh: SolidMesh,
    material: Material,
    k0: Vec<Matrix18>,
    volumes: Vec<f64>,
    full_layout: std::sync::OnceLock<SystemLayout>,
    fixed: Vec<bool>,
}

impl FemModel {
    pub fn new(mesh: SolidMesh, material: Material, bc: &BoundaryConditions) -> Result<Self, FemError> {
        material.validate()?;
        bc.validate(&mesh)?;
        let mut k0 = Vec::with_capacity(mesh.n_elements());
        let mut volumes = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let x = mesh.element_coords(e);
            k0.push(wedge_stiffness(&x, &material).map_err(|err| match err {
                FemError::InvertedElement { det, .. } => FemError::InvertedElement { element: e, det },
                other => other,
            })?);
            volumes.push(wedge_volume(&x));
        }
        let mut fixed = vec![false; 3 * mesh.n_nodes()];
        for &(n, a) in &bc.fixed_dofs {
            fixed[3 * n + a] = true;
        }
        Ok(Self {
            mesh,
            material,
            k0,
            volumes,
            full_layout: std::sync::OnceLock::new(),
            fixed,
        })
    }

    pub fn mesh(&self) -> &SolidMesh {
        &self.mesh
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn k0(&self, e: usize) -> &Matrix18 {
        &self.k0[e]
    }

    pub fn element_volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.mesh.n_nodes()
    }

    /// Number of unconstrained DOFs of the full mesh.
    pub fn n_free_dofs(&self) -> usize {
        self.fixed.iter().filter(|f| !**f).count()
    }

    fn element_dofs(&self, e: usize) -> [usize; 18] {
        let nodes = self.mesh.elements()[e];
        std::array::from_fn(|k| 3 * nodes[k / 3] + k % 3)
    }

    /// Builds the DOF numbering and sparsity pattern for `elements`.
    pub fn layout(&self, elements: &[usize]) -> SystemLayout {
        let mut dof_index = vec![usize::MAX; self.n_dofs()];
        let mut used = vec![false; self.n_dofs()];
        for &e in elements {
            for g in self.element_dofs(e) {
                used[g] = true;
            }
        }
        let mut n_free = 0;
        for g in 0..self.n_dofs() {
            if used[g] && !self.fixed[g] {
                dof_index[g] = n_free;
                n_free += 1;
            }
        }
        let mut pairs = Vec::with_capacity(elements.len() * LOWER_PAIRS);
        for &e in elements {
            let dofs = self.element_dofs(e).map(|g| dof_index[g]);
            for a in 0..18 {
                for b in 0..=a {
                    if dofs[a] != usize::MAX && dofs[b] != usize::MAX {
                        pairs.push((dofs[a], dofs[b]));
                    }
                }
            }
        }
        let pattern = LowerPattern::from_pairs(n_free, pairs);
        let mut slots = Vec::with_capacity(elements.len() * LOWER_PAIRS);
        for &e in elements {
            let dofs = self.element_dofs(e).map(|g| dof_index[g]);
            for a in 0..18 {
                for b in 0..=a {
                    slots.push(if dofs[a] != usize::MAX && dofs[b] != usize::MAX {
                        pattern.slot(dofs[a], dofs[b]).expect("pair in pattern")
                    } else {
                        usize::MAX
                    });
                }
            }
        }
        SystemLayout {
            elements: elements.to_vec(),
            dof_index,
            n_free,
            pattern,
            slots,
        }
    }

    /// Layout over all elements, built once.
    pub fn full_layout(&self) -> &SystemLayout {
        self.full_layout
            .get_or_init(|| self.layout(&(0..self.mesh.n_elements()).collect::<Vec<_>>()))
    }

    /// Assembles `sum s_e k0(e)` over the layout's elements and solves for
    /// the load vector `f` (length `3 n_nodes`).
    pub fn solve(&self, layout: &SystemLayout, stiffness: &[f64], f: &[f64]) -> Result<FemSolution, FemError> {
        if stiffness.len() != self.mesh.n_elements() {
            return Err(FemError::Length {
                got: stiffness.len(),
                expected: self.mesh.n_elements(),
            });
        }
        let mut values = vec![0.0; layout.pattern.nnz()];
        for (k, &e) in layout.elements.iter().enumerate() {
            let ke = &self.k0[e];
            let s = stiffness[e];
            let slots = &layout.slots[k * LOWER_PAIRS..(k + 1) * LOWER_PAIRS];
            let mut p = 0;
            for a in 0..18 {
                for b in 0..=a {
                    let slot = slots[p];
                    if slot != usize::MAX {
                        // a diagonal pair (a, a) of distinct local DOFs never
                        // collides; off-diagonal local pairs may map to a
                        // global diagonal only for repeated nodes, which the
                        // mesh excludes
                        values[slot] += s * ke[(a, b)];
                    }
                    p += 1;
                }
            }
        }
        let mut rhs = vec![0.0; layout.n_free];
        for g in 0..f.len() {
            if let Some(i) = layout.dof(g) {
                rhs[i] += f[g];
            }
        }
        let mut u = vec![0.0; self.n_dofs()];
        if layout.n_free == 0 || rhs.iter().all(|v| *v == 0.0) {
            return Ok(FemSolution {
                u,
                compliance: 0.0,
                solve_residual: 0.0,
            });
        }
        let fact = Factorization::cholesky(&layout.pattern, &values).map_err(|e| match e {
            LinsysError::NotPositiveDefinite | LinsysError::Singular => FemError::Singular,
            other => FemError::Solver(other.to_string()),
        })?;
        let (x, rel) = fact.solve(&rhs);
        if !(rel <= RESIDUAL_TOL) {
            return Err(FemError::Residual(rel));
        }
        for g in 0..u.len() {
            if let Some(i) = layout.dof(g) {
                u[g] = x[i];
            }
        }
        let compliance = f.iter().zip(&u).map(|(a, b)| a * b).sum();
        Ok(FemSolution {
            u,
            compliance,
            solve_residual: rel,
        })
    }

    /// `u_e^T k0(e) u_e` for every element.
    pub fn element_energies(&self, u: &[f64]) -> Vec<f64> {
        (0..self.mesh.n_elements())
            .map(|e| {
                let ue = Vector18::from_iterator(self.element_dofs(e).iter().map(|&g| u[g]));
                ue.dot(&(self.k0[e] * ue))
            })
            .collect()
    }

    /// `u^T K u` for the given element stiffness factors.
    pub fn strain_energy(&self, stiffness: &[f64], u: &[f64]) -> f64 {
        self.element_energies(u).iter().zip(stiffness).map(|(w, s)| w * s).sum()
    }
}

/// Assembles and solves on the full mesh.
pub fn assemble_and_solve(
    model: &FemModel,
    stiffness: &[f64],
    bc: &BoundaryConditions,
) -> Result<FemSolution, FemError> {
    model.solve(model.full_layout(), stiffness, &bc.load_vector(model.mesh()))
}

/// Mean of the nodal values over each element.
pub fn element_means(mesh: &SolidMesh, nodal: &[f64]) -> Vec<f64> {
    mesh.elements()
        .iter()
        .map(|el| el.iter().map(|&n| nodal[n]).sum::<f64>() / 6.0)
        .collect()
}

/// Per-node sum of `value_e / 6` over the incident elements.
pub fn scatter_to_nodes(mesh: &SolidMesh, per_element: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_nodes()];
    for (el, v) in mesh.elements().iter().zip(per_element) {
        for &n in el {
            out[n] += v / 6.0;
        }
    }
    out
}

/// Compact description of which DOFs are fixed, keyed by node.
pub fn fixed_axes_by_node(bc: &BoundaryConditions) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(n, a) in &bc.fixed_dofs {
        out.entry(n).or_default().push(a);
    }
    out
}
