//! Layered prism mesh obtained by offsetting the mid-surface along vertex
//! normals.
//!
//! Node `(l, j)` sits at `v_l + j * n_l * t / (2 n_e)` for surface vertex `l`
//! and layer `j` in `-n_e..=n_e`. Element `(m, j)` for `j` in `-n_e+1..=n_e`
//! is the wedge between layers `j - 1` and `j` over surface face `m`; its
//! nodes are the bottom triangle then the top triangle, both in face order.

use nalgebra::Vector3;

use crate::fem::wedge_jacobian_determinants;
use crate::mesh::{MeshError, SurfaceMesh};

#[derive(Debug, thiserror::Error)]
pub enum SolidMeshError {
    #[error("thickness must be positive, got {0}")]
    Thickness(f64),
    #[error("half-layer count must be at least 1")]
    Layers,
    #[error(transparent)]
    Normals(#[from] MeshError),
    #[error(
        "{} wedges have non-positive volume (first: {:?}); the offset self-intersects, use a smaller thickness or a finer mesh",
        elements.len(),
        &elements[..elements.len().min(8)]
    )]
    Inverted { elements: Vec<usize> },
}

/// Prism mesh over a mid-surface.
#[derive(Debug, Clone)]
pub struct SolidMesh {
    n_surface_vertices: usize,
    n_surface_faces: usize,
    half_layers: usize,
    thickness: f64,
    nodes: Vec<Vector3<f64>>,
    elements: Vec<[usize; 6]>,
}

impl SolidMesh {
    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    /// `n_e`: the mesh has `2 n_e` element layers.
    pub fn half_layers(&self) -> usize {
        self.half_layers
    }

    pub fn n_surface_vertices(&self) -> usize {
        self.n_surface_vertices
    }

    pub fn n_surface_faces(&self) -> usize {
        self.n_surface_faces
    }

    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 6]] {
        &self.elements
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Nodes per column, `2 n_e + 1`.
    pub fn column_len(&self) -> usize {
        2 * self.half_layers + 1
    }

    pub fn node_index(&self, l: usize, j: i64) -> usize {
        let ne = self.half_layers as i64;
        debug_assert!((-ne..=ne).contains(&j));
        (j + ne) as usize * self.n_surface_vertices + l
    }

    /// `(surface vertex, layer)` of a node.
    pub fn node_layer(&self, node: usize) -> (usize, i64) {
        let l = node % self.n_surface_vertices;
        let j = (node / self.n_surface_vertices) as i64 - self.half_layers as i64;
        (l, j)
    }

    pub fn element_index(&self, m: usize, j: i64) -> usize {
        let ne = self.half_layers as i64;
        debug_assert!((-ne + 1..=ne).contains(&j));
        (j + ne - 1) as usize * self.n_surface_faces + m
    }

    /// `(surface face, layer)` of an element.
    pub fn element_layer(&self, e: usize) -> (usize, i64) {
        let m = e % self.n_surface_faces;
        let j = (e / self.n_surface_faces) as i64 - self.half_layers as i64 + 1;
        (m, j)
    }

    /// Node indices of the column over surface vertex `l`, bottom to top.
    pub fn column(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.column_len()).map(move |k| k * self.n_surface_vertices + l)
    }

    pub fn element_coords(&self, e: usize) -> [Vector3<f64>; 6] {
        self.elements[e].map(|n| self.nodes[n])
    }
}

/// Signed thickness coordinate `omega = j t / (2 n_e)` of a node and the
/// surface vertex it projects to.
pub fn thickness_coordinate(mesh: &SolidMesh, node: usize) -> (f64, usize) {
    let (l, j) = mesh.node_layer(node);
    (j as f64 * mesh.thickness / (2 * mesh.half_layers) as f64, l)
}

/// Offsets `surface` into `2 n_e` prism layers of total thickness `t`.
pub fn generate_offset_mesh(surface: &SurfaceMesh, t: f64, n_e: usize) -> Result<SolidMesh, SolidMeshError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(SolidMeshError::Thickness(t));
    }
    if n_e == 0 {
        return Err(SolidMeshError::Layers);
    }
    let normals = surface.vertex_normals()?;
    let n_v = surface.n_vertices();
    let n_f = surface.n_faces();
    let ne = n_e as i64;
    let h = t / (2 * n_e) as f64;
    let mut nodes = Vec::with_capacity(n_v * (2 * n_e + 1));
    for j in -ne..=ne {
        for (p, n) in surface.vertices().iter().zip(&normals) {
            nodes.push(if j == 0 { *p } else { p + n * (j as f64 * h) });
        }
    }
    let mut elements = Vec::with_capacity(2 * n_e * n_f);
    for j in (-ne + 1)..=ne {
        let bottom = (j - 1 + ne) as usize * n_v;
        let top = (j + ne) as usize * n_v;
        for f in surface.faces() {
            elements.push([
                bottom + f[0],
                bottom + f[1],
                bottom + f[2],
                top + f[0],
                top + f[1],
                top + f[2],
            ]);
        }
    }
    let mesh = SolidMesh {
        n_surface_vertices: n_v,
        n_surface_faces: n_f,
        half_layers: n_e,
        thickness: t,
        nodes,
        elements,
    };
    let inverted: Vec<usize> = (0..mesh.n_elements())
        .filter(|&e| {
            wedge_jacobian_determinants(&mesh.element_coords(e))
                .iter()
                .any(|d| !(*d > 0.0))
        })
        .collect();
    if !inverted.is_empty() {
        return Err(SolidMeshError::Inverted { elements: inverted });
    }
    Ok(mesh)
}
