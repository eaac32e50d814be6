//! Narrow-band restriction of the finite element system.
//!
//! Components are grouped into clusters by overlap. A cluster is active when
//! it connects the loads to the supports (or, with [`PathRule::LoadOnly`],
//! when it touches a load). Elements whose material can be attributed to an
//! active component, or that is prescribed panel material, are kept;
//! everything else is left out of the solve.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::fem::BoundaryConditions;
use crate::mesh::UnionFind;
use crate::solidmesh::SolidMesh;

/// Density margin above the void value that marks a node as solid.
pub const SOLID_MARGIN: f64 = 1e-6;

/// Rule selecting active component clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathRule {
    /// Clusters touching both a loaded and a supported vertex.
    #[default]
    LoadAndSupport,
    /// Clusters touching a loaded vertex.
    LoadOnly,
}

/// Undirected component overlap graph.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapGraph {
    pub adjacency: Vec<BTreeSet<usize>>,
}

impl OverlapGraph {
    /// Connected clusters, each sorted, ordered by smallest member.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let n = self.adjacency.len();
        let mut uf = UnionFind::new(n);
        for (a, adj) in self.adjacency.iter().enumerate() {
            for &b in adj {
                uf.union(a, b);
            }
        }
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            by_root.entry(uf.find(i)).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
        out.sort_by_key(|c| c[0]);
        out
    }
}

/// Two components overlap when both carry material at a common surface
/// vertex. `positive_at_vertex[v]` lists the components whose TDF at `v` is
/// above the void threshold.
pub fn component_overlap_graph(n_components: usize, positive_at_vertex: &[Vec<usize>]) -> OverlapGraph {
    let mut adjacency = vec![BTreeSet::new(); n_components];
    for comps in positive_at_vertex {
        for (k, &a) in comps.iter().enumerate() {
            for &b in &comps[k + 1..] {
                if a != b {
                    adjacency[a].insert(b);
                    adjacency[b].insert(a);
                }
            }
        }
    }
    OverlapGraph { adjacency }
}

/// Components in clusters selected by `rule`. `touches_load[i]` and
/// `touches_support[i]` say whether component `i` carries material at a loaded or
/// supported vertex.
pub fn active_components(
    graph: &OverlapGraph,
    touches_load: &[bool],
    touches_support: &[bool],
    rule: PathRule,
) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for cluster in graph.clusters() {
        let load = cluster.iter().any(|&i| touches_load[i]);
        let support = cluster.iter().any(|&i| touches_support[i]);
        let active = match rule {
            PathRule::LoadAndSupport => load && support,
            PathRule::LoadOnly => load,
        };
        if active {
            out.extend(cluster);
        }
    }
    out
}

/// Elements and nodes retained for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrowBand {
    pub kept_elements: Vec<usize>,
    pub kept_nodes: Vec<usize>,
    /// Band DOF number of each global DOF; `None` for fixed or removed DOFs.
    pub dof_map: Vec<Option<usize>>,
    pub active_components: BTreeSet<usize>,
    /// True when the band failed its checks and the full mesh is used.
    pub fallback: bool,
}

impl NarrowBand {
    /// The full mesh, used when the band is rejected.
    pub fn full(mesh: &SolidMesh, bc: &BoundaryConditions, active_components: BTreeSet<usize>) -> Self {
        let elements: Vec<usize> = (0..mesh.n_elements()).collect();
        Self::from_elements(mesh, bc, elements, active_components, true)
    }

    fn from_elements(
        mesh: &SolidMesh,
        bc: &BoundaryConditions,
        kept_elements: Vec<usize>,
        active_components: BTreeSet<usize>,
        fallback: bool,
    ) -> Self {
        let mut used = vec![false; mesh.n_nodes()];
        for &e in &kept_elements {
            for &n in &mesh.elements()[e] {
                used[n] = true;
            }
        }
        let kept_nodes: Vec<usize> = (0..mesh.n_nodes()).filter(|&n| used[n]).collect();
        let mut dof_map = vec![None; 3 * mesh.n_nodes()];
        let mut next = 0;
        for g in 0..dof_map.len() {
            if used[g / 3] && !bc.fixed_dofs.contains(&(g / 3, g % 3)) {
                dof_map[g] = Some(next);
                next += 1;
            }
        }
        Self {
            kept_elements,
            kept_nodes,
            dof_map,
            active_components,
            fallback,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_map.iter().filter(|d| d.is_some()).count()
    }
}

/// Builds the narrow band. `node_density` is the solid density per node and
/// `attributable[n]` whether node `n` is panel material or lies where an
/// active component is above the void threshold. Returns the full mesh with
/// `fallback` set when a loaded node would be dropped.
pub fn narrow_band_mesh(
    mesh: &SolidMesh,
    bc: &BoundaryConditions,
    node_density: &[f64],
    attributable: &[bool],
    alpha: f64,
    active_components: BTreeSet<usize>,
) -> NarrowBand {
    let loaded = bc.loaded_nodes(mesh);
    let fixed = bc.fixed_nodes();
    let solid = |n: usize| node_density[n] > alpha + SOLID_MARGIN && attributable[n];
    let mut keep: Vec<bool> = mesh
        .elements()
        .iter()
        .map(|el| el.iter().any(|&n| solid(n) || loaded.contains(&n) || fixed.contains(&n)))
        .collect();

    // drop element islands that cannot reach a support
    let mut node_elems: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_nodes()];
    for (e, el) in mesh.elements().iter().enumerate() {
        if keep[e] {
            for &n in el {
                node_elems[n].push(e);
            }
        }
    }
    let mut anchored = vec![false; mesh.n_elements()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &n in &fixed {
        for &e in &node_elems[n] {
            if !anchored[e] {
                anchored[e] = true;
                queue.push_back(e);
            }
        }
    }
    while let Some(e) = queue.pop_front() {
        for &n in &mesh.elements()[e] {
            for &f in &node_elems[n] {
                if !anchored[f] {
                    anchored[f] = true;
                    queue.push_back(f);
                }
            }
        }
    }
    for (k, a) in keep.iter_mut().zip(&anchored) {
        *k &= *a;
    }
    let kept: Vec<usize> = (0..mesh.n_elements()).filter(|&e| keep[e]).collect();
    let band = NarrowBand::from_elements(mesh, bc, kept, active_components.clone(), false);
    let kept_nodes: BTreeSet<usize> = band.kept_nodes.iter().copied().collect();
    if band.kept_elements.is_empty() || !loaded.iter().all(|n| kept_nodes.contains(n)) {
        return NarrowBand::full(mesh, bc, active_components);
    }
    band
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::rectangle_plate;
    use crate::solidmesh::generate_offset_mesh;

    #[test]
    fn overlap_clusters() {
        let g = component_overlap_graph(5, &[vec![0, 1], vec![1, 2], vec![3], vec![]]);
        assert_eq!(g.clusters(), vec![vec![0, 1, 2], vec![3], vec![4]]);
    }

    #[test]
    fn path_rules() {
        let g = component_overlap_graph(4, &[vec![0, 1], vec![2]]);
        let load = [true, false, true, false];
        let support = [false, true, false, false];
        let a = active_components(&g, &load, &support, PathRule::LoadAndSupport);
        assert_eq!(a, BTreeSet::from([0, 1]));
        let b = active_components(&g, &load, &support, PathRule::LoadOnly);
        assert_eq!(b, BTreeSet::from([0, 1, 2]));
    }

    fn strip() -> (SolidMesh, BoundaryConditions) {
        let s = rectangle_plate(4.0, 1.0, 8, 2);
        let m = generate_offset_mesh(&s, 0.1, 1).unwrap();
        let mut bc = BoundaryConditions::default();
        bc.fix_columns(&m, &[0, 9, 18], &[0, 1, 2]);
        bc.load_columns.push((8, [0.0, -1.0, 0.0]));
        (m, bc)
    }

    #[test]
    fn keeps_solid_path_and_drops_void() {
        let (m, bc) = strip();
        let nv = m.n_surface_vertices();
        // solid on the bottom row of vertices (j = 0), void elsewhere
        let density: Vec<f64> = (0..m.n_nodes())
            .map(|n| if (n % nv) / 9 == 0 { 1.0 } else { 1e-3 })
            .collect();
        let band = narrow_band_mesh(&m, &bc, &density, &vec![true; m.n_nodes()], 1e-3, BTreeSet::new());
        assert!(!band.fallback);
        assert!(band.kept_elements.len() < m.n_elements());
        // the loaded column survives
        for n in m.column(8) {
            assert!(band.kept_nodes.contains(&n));
        }
        let loaded = bc.loaded_nodes(&m);
        let fixed = bc.fixed_nodes();
        for &e in &band.kept_elements {
            assert!(m.elements()[e]
                .iter()
                .any(|n| density[*n] > 0.5 || loaded.contains(n) || fixed.contains(n)));
        }
    }

    #[test]
    fn unattributable_material_is_dropped() {
        let (m, bc) = strip();
        let density = vec![1.0; m.n_nodes()];
        let none = vec![false; m.n_nodes()];
        let band = narrow_band_mesh(&m, &bc, &density, &none, 1e-3, BTreeSet::new());
        // only elements at loads and supports are left; the load is not
        // connected to a support, so the band falls back
        assert!(band.fallback);
        assert_eq!(band.kept_elements.len(), m.n_elements());
    }

    #[test]
    fn dof_map_matches_fem_layout() {
        let (m, bc) = strip();
        let density: Vec<f64> = (0..m.n_nodes())
            .map(|n| if (n % m.n_surface_vertices()) / 9 == 0 { 1.0 } else { 0.0 })
            .collect();
        let band = narrow_band_mesh(&m, &bc, &density, &vec![true; m.n_nodes()], 1e-3, BTreeSet::new());
        let model = crate::fem::FemModel::new(m.clone(), Default::default(), &bc).unwrap();
        let layout = model.layout(&band.kept_elements);
        for g in 0..band.dof_map.len() {
            assert_eq!(band.dof_map[g], layout.dof(g));
        }
        assert_eq!(band.n_dofs(), layout.n_free());
    }

    #[test]
    fn islands_without_support_are_dropped() {
        let s = rectangle_plate(4.0, 2.0, 8, 4);
        let m = generate_offset_mesh(&s, 0.1, 1).unwrap();
        let mut bc = BoundaryConditions::default();
        bc.fix_columns(&m, &[0], &[0, 1, 2]);
        bc.load_columns.push((8, [0.0, -1.0, 0.0]));
        let nv = m.n_surface_vertices();
        // solid bottom row plus a detached blob at vertex (6, 4)
        let blob = 4 * 9 + 6;
        let density: Vec<f64> = (0..m.n_nodes())
            .map(|n| {
                let l = n % nv;
                if l / 9 == 0 || l == blob {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let band = narrow_band_mesh(&m, &bc, &density, &vec![true; m.n_nodes()], 1e-3, BTreeSet::new());
        assert!(!band.fallback);
        assert!(!band.kept_nodes.contains(&m.node_index(blob, 0)));
        assert!(band.kept_nodes.contains(&m.node_index(8, 0)));
    }
}
