//! Triangulated mid-surface meshes: loading, validation, topology queries,
//! normals and surface cutting.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

/// Faces whose area falls below this fraction of the squared bounding-box
/// diagonal are rejected as degenerate.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face}: vertex index {index} out of range (mesh has {n_vertices} vertices)")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        n_vertices: usize,
    },
    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },
    #[error("edge ({a}, {b}) is shared by more than two faces (non-manifold)")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) is traversed twice in the same direction; faces {first} and {second} have inconsistent orientation")]
    InconsistentOrientation {
        a: usize,
        b: usize,
        first: usize,
        second: usize,
    },
    #[error("{labels} face labels given for {faces} faces")]
    LabelCount { labels: usize, faces: usize },
    #[error("vertex {0} has no incident faces")]
    IsolatedVertex(usize),
    #[error("vertex {0}: area-weighted normal vanishes")]
    ZeroNormal(usize),
    #[error("cut path step {0} -> {1} is not an edge of the mesh")]
    NotAnEdge(usize, usize),
    #[error("cut path vertex {0} is out of range")]
    PathVertexOutOfRange(usize),
    #[error("cut insufficient: result has Euler characteristic {euler} and {loops} boundary loops (a disk needs 1 and 1)")]
    CutInsufficient { euler: i64, loops: usize },
}

/// Input file format of a surface mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

/// Indexed triangle mesh of a mid-surface.
///
/// Faces are validated on construction: indices are in range, faces are
/// non-degenerate, every edge has at most two incident faces and the
/// orientation is consistent across interior edges.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    labels: Vec<u32>,
}

/// Result of [`SurfaceMesh::topology`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub euler_characteristic: i64,
    pub connected_components: usize,
    pub genus: i64,
    /// Boundary cycles, each traversed with the surface on its left (counterclockwise
    /// seen from the side the face normals point to), starting at its smallest vertex.
    pub boundary_loops: Vec<Vec<usize>>,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let labels = vec![0; faces.len()];
        let mesh = SurfaceMesh {
            vertices,
            faces,
            labels,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Attach one patch label per face.
    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self, MeshError> {
        if labels.len() != self.faces.len() {
            return Err(MeshError::LabelCount {
                labels: labels.len(),
                faces: self.faces.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    fn validate(&self) -> Result<(), MeshError> {
        let n_v = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i >= n_v {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: i,
                        n_vertices: n_v,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace { face: fi });
            }
        }
        let diag = self.bounding_box_diagonal();
        let min_area = DEGENERATE_AREA_RATIO * diag * diag;
        for fi in 0..self.faces.len() {
            let a = self.face_area(fi);
            if !(a > min_area) {
                return Err(MeshError::DegenerateFace { face: fi });
            }
        }

        let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let count = undirected.entry(key).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1 });
                }
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if let Some(&first) = directed.get(&(a, b)) {
                    return Err(MeshError::InconsistentOrientation {
                        a,
                        b,
                        first,
                        second: fi,
                    });
                }
                directed.insert((a, b), fi);
            }
        }
        Ok(())
    }

    /// Unnormalized face normal `L1 x L2` with `L1 = v1 - v0`, `L2 = v2 - v0`.
    fn face_cross(&self, m: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[m];
        let p = &self.vertices;
        (p[b] - p[a]).cross(&(p[c] - p[a]))
    }

    pub fn face_area(&self, m: usize) -> f64 {
        0.5 * self.face_cross(m).norm()
    }

    /// Unit normal of face `m` following the right-hand rule on its vertex order.
    pub fn face_normal(&self, m: usize) -> Result<Vector3<f64>, MeshError> {
        let n = self.face_cross(m);
        let len = n.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(MeshError::DegenerateFace { face: m });
        }
        Ok(n / len)
    }

    /// Incident faces of every vertex, in increasing face order.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v].push(fi);
            }
        }
        vf
    }

    /// Area-weighted average of the 1-ring face normals of vertex `l`.
    pub fn vertex_normal(&self, l: usize) -> Result<Vector3<f64>, MeshError> {
        let mut sum = Vector3::zeros();
        let mut any = false;
        for (fi, f) in self.faces.iter().enumerate() {
            if f.contains(&l) {
                // |f| N_f = (L1 x L2) / 2
                sum += 0.5 * self.face_cross(fi);
                any = true;
            }
        }
        finish_vertex_normal(l, any, sum)
    }

    /// All vertex normals at once.
    pub fn vertex_normals(&self) -> Result<Vec<Vector3<f64>>, MeshError> {
        let mut sums = vec![Vector3::zeros(); self.vertices.len()];
        let mut touched = vec![false; self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            let weighted = 0.5 * self.face_cross(fi);
            for &v in f {
                sums[v] += weighted;
                touched[v] = true;
            }
        }
        sums.into_iter()
            .zip(touched)
            .enumerate()
            .map(|(l, (s, t))| finish_vertex_normal(l, t, s))
            .collect()
    }

    /// Map from undirected edge to its number of incident faces.
    pub fn edge_census(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.faces.iter().any(|f| {
            (0..3).any(|k| {
                let (x, y) = (f[k], f[(k + 1) % 3]);
                (x == a && y == b) || (x == b && y == a)
            })
        })
    }

    /// Euler characteristic, genus and boundary loops.
    ///
    /// Only vertices referenced by some face are counted. For a mesh with `c`
    /// connected components the genus is the total `(2c - chi - b) / 2`.
    pub fn topology(&self) -> Topology {
        let edges = self.edge_census();
        let mut referenced = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                referenced[v] = true;
            }
        }
        let n_v = referenced.iter().filter(|&&r| r).count() as i64;
        let chi = n_v - edges.len() as i64 + self.faces.len() as i64;

        let mut uf = UnionFind::new(self.vertices.len());
        for f in &self.faces {
            uf.union(f[0], f[1]);
            uf.union(f[1], f[2]);
        }
        let components = (0..self.vertices.len())
            .filter(|&v| referenced[v] && uf.find(v) == v)
            .count();

        let loops = self.boundary_loops();
        let genus = (2 * components as i64 - chi - loops.len() as i64) / 2;
        Topology {
            euler_characteristic: chi,
            connected_components: components,
            genus,
            boundary_loops: loops,
        }
    }

    /// `(genus, boundary_loops)` of the mesh.
    pub fn genus_and_boundaries(&self) -> (i64, Vec<Vec<usize>>) {
        let t = self.topology();
        (t.genus, t.boundary_loops)
    }

    fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut directed = BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                directed.insert((f[k], f[(k + 1) % 3]));
            }
        }
        // outgoing boundary half-edges per vertex
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(a, b) in &directed {
            if !directed.contains(&(b, a)) {
                next.entry(a).or_default().push(b);
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut loops = Vec::new();
        for s in starts {
            while next.get(&s).is_some_and(|v| !v.is_empty()) {
                let mut cycle = vec![s];
                let mut cur = s;
                loop {
                    let out = next.get_mut(&cur).expect("boundary half-edge chain is closed");
                    let nxt = out.remove(0);
                    if nxt == s {
                        break;
                    }
                    cycle.push(nxt);
                    cur = nxt;
                }
                loops.push(cycle);
            }
        }
        loops
    }

    /// Extract the faces `face_ids` as a standalone mesh.
    ///
    /// Returns the sub-mesh and, for every sub-mesh vertex, its index in `self`.
    /// Sub-mesh vertices are ordered by increasing original index.
    pub fn submesh(&self, face_ids: &[usize]) -> Result<(SurfaceMesh, Vec<usize>), MeshError> {
        let mut used = BTreeSet::new();
        for &fi in face_ids {
            used.extend(self.faces[fi]);
        }
        let global: Vec<usize> = used.into_iter().collect();
        let mut local = vec![usize::MAX; self.vertices.len()];
        for (i, &g) in global.iter().enumerate() {
            local[g] = i;
        }
        let vertices = global.iter().map(|&g| self.vertices[g]).collect();
        let faces = face_ids
            .iter()
            .map(|&fi| self.faces[fi].map(|v| local[v]))
            .collect();
        let labels = face_ids.iter().map(|&fi| self.labels[fi]).collect();
        let sub = SurfaceMesh::new(vertices, faces)?.with_labels(labels)?;
        Ok((sub, global))
    }

    /// Copy of the mesh with every vertex transformed by `f`; connectivity is unchanged.
    pub fn map_vertices(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Result<Self, MeshError> {
        let vertices = self.vertices.iter().map(f).collect();
        SurfaceMesh::new(vertices, self.faces.clone())?.with_labels(self.labels.clone())
    }
}

fn finish_vertex_normal(l: usize, any: bool, sum: Vector3<f64>) -> Result<Vector3<f64>, MeshError> {
    if !any {
        return Err(MeshError::IsolatedVertex(l));
    }
    let len = sum.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(MeshError::ZeroNormal(l));
    }
    Ok(sum / len)
}

/// A mesh cut open into a topological disk.
#[derive(Debug, Clone)]
pub struct CutMesh {
    pub mesh: SurfaceMesh,
    /// `(kept, duplicate)` pairs: the duplicate vertex is a copy of `kept` on the
    /// other side of a cut line.
    pub cut_pairs: Vec<(usize, usize)>,
    /// For every vertex of the cut mesh, its index in the uncut mesh.
    pub origin: Vec<usize>,
}

impl CutMesh {
    /// The single boundary loop of the disk.
    pub fn boundary_loop(&self) -> Vec<usize> {
        let mut loops = self.mesh.boundary_loops();
        debug_assert_eq!(loops.len(), 1);
        loops.swap_remove(0)
    }
}

/// Cut `mesh` along the edge path `path` so that the result is a topological disk.
///
/// The path is a sequence of vertices in which consecutive entries share an
/// edge; it may revisit vertices (e.g. two closed loops through a common
/// vertex, as needed for a torus). Around every path vertex the incident faces
/// are grouped into fans separated by cut edges; every fan after the first gets
/// its own copy of the vertex, appended after the original vertices.
pub fn cut_surface(mesh: &SurfaceMesh, path: &[usize]) -> Result<CutMesh, MeshError> {
    let n_v = mesh.n_vertices();
    for &v in path {
        if v >= n_v {
            return Err(MeshError::PathVertexOutOfRange(v));
        }
    }
    let census = mesh.edge_census();
    let mut cut_edges = BTreeSet::new();
    for w in path.windows(2) {
        let key = (w[0].min(w[1]), w[0].max(w[1]));
        if w[0] == w[1] || !census.contains_key(&key) {
            return Err(MeshError::NotAnEdge(w[0], w[1]));
        }
        // cutting along a boundary edge changes nothing
        if census[&key] == 2 {
            cut_edges.insert(key);
        }
    }

    let mut faces = mesh.faces().to_vec();
    let mut vertices = mesh.vertices().to_vec();
    let mut origin: Vec<usize> = (0..n_v).collect();
    let mut cut_pairs = Vec::new();

    let on_cut: BTreeSet<usize> = cut_edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let vertex_faces = mesh.vertex_faces();
    for &v in &on_cut {
        let star = &vertex_faces[v];
        let mut uf = UnionFind::new(star.len());
        for i in 0..star.len() {
            for j in (i + 1)..star.len() {
                let fi = mesh.faces()[star[i]];
                let fj = mesh.faces()[star[j]];
                for &w in &fi {
                    if w != v && fj.contains(&w) && !cut_edges.contains(&(v.min(w), v.max(w))) {
                        uf.union(i, j);
                    }
                }
            }
        }
        let mut groups: Vec<usize> = Vec::new();
        for i in 0..star.len() {
            let root = uf.find(i);
            if !groups.contains(&root) {
                groups.push(root);
            }
        }
        for &root in groups.iter().skip(1) {
            let copy = vertices.len();
            vertices.push(mesh.vertices()[v]);
            origin.push(v);
            cut_pairs.push((v, copy));
            for (i, &fi) in star.iter().enumerate() {
                if uf.find(i) == root {
                    for slot in faces[fi].iter_mut() {
                        if *slot == v {
                            *slot = copy;
                        }
                    }
                }
            }
        }
    }

    let cut = SurfaceMesh::new(vertices, faces)?.with_labels(mesh.labels().to_vec())?;
    let topo = cut.topology();
    if topo.euler_characteristic != 1 || topo.boundary_loops.len() != 1 || topo.connected_components != 1 {
        return Err(MeshError::CutInsufficient {
            euler: topo.euler_characteristic,
            loops: topo.boundary_loops.len(),
        });
    }
    Ok(CutMesh {
        mesh: cut,
        cut_pairs,
        origin,
    })
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so results do not depend on union order
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

// ---------------------------------------------------------------------------
// File formats

fn read_text(path: &Path) -> Result<String, MeshError> {
    fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load and validate a surface mesh. Vertex order is preserved from the file.
pub fn load_surface_mesh(path: &Path, format: MeshFormat) -> Result<SurfaceMesh, MeshError> {
    let text = read_text(path)?;
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(&text)?,
        MeshFormat::Obj => parse_obj(&text)?,
    };
    SurfaceMesh::new(vertices, faces)
}

type RawMesh = (Vec<Vector3<f64>>, Vec<[usize; 3]>);

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, MeshError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse number '{tok}'")))
}

/// Parse an OFF document (positions and triangular faces).
pub fn parse_off(text: &str) -> Result<RawMesh, MeshError> {
    // tokens of meaningful lines, with their 1-based line numbers
    let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    });
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut head_tokens: Vec<&str> = header.split_whitespace().collect();
    if head_tokens.first() != Some(&"OFF") {
        return Err(parse_err(ln, "missing OFF header"));
    }
    head_tokens.remove(0);
    let (ln, counts) = if head_tokens.is_empty() {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "missing counts line"))?;
        (ln, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (ln, head_tokens)
    };
    if counts.len() < 2 {
        return Err(parse_err(ln, "counts line needs vertex and face counts"));
    }
    let n_v: usize = parse_num(counts[0], ln)?;
    let n_f: usize = parse_num(counts[1], ln)?;

    let mut vertices = Vec::with_capacity(n_v);
    for _ in 0..n_v {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of vertex list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 3 {
            return Err(parse_err(ln, "vertex needs three coordinates"));
        }
        vertices.push(Vector3::new(
            parse_num(t[0], ln)?,
            parse_num(t[1], ln)?,
            parse_num(t[2], ln)?,
        ));
    }
    let mut faces = Vec::with_capacity(n_f);
    for _ in 0..n_f {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "unexpected end of face list"))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        let n: usize = parse_num(t.first().copied().unwrap_or(""), ln)?;
        if n != 3 {
            return Err(parse_err(ln, format!("only triangles are supported, found a {n}-gon")));
        }
        if t.len() < 4 {
            return Err(parse_err(ln, "face needs three indices"));
        }
        faces.push([parse_num(t[1], ln)?, parse_num(t[2], ln)?, parse_num(t[3], ln)?]);
    }
    Ok((vertices, faces))
}

/// Parse a Wavefront OBJ document. Only `v` and `f` records are read;
/// texture coordinates, normals and everything else are ignored.
pub fn parse_obj(text: &str) -> Result<RawMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(parse_err(ln, "vertex needs three coordinates"));
                }
                vertices.push(Vector3::new(
                    parse_num(c[0], ln)?,
                    parse_num(c[1], ln)?,
                    parse_num(c[2], ln)?,
                ));
            }
            Some("f") => {
                let refs: Vec<&str> = t.collect();
                if refs.len() != 3 {
                    return Err(parse_err(
                        ln,
                        format!("only triangles are supported, found a {}-gon", refs.len()),
                    ));
                }
                let mut face = [0usize; 3];
                for (k, r) in refs.iter().enumerate() {
                    let idx: i64 = parse_num(r.split('/').next().unwrap_or(""), ln)?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(parse_err(ln, "OBJ indices start at 1"));
                    };
                    if resolved < 0 {
                        return Err(parse_err(ln, format!("relative index {idx} out of range")));
                    }
                    face[k] = resolved as usize;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

/// Read a sidecar label file: one integer per face, one per line.
pub fn load_face_labels(path: &Path) -> Result<Vec<u32>, MeshError> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_num(l.trim(), i + 1))
        .collect()
}

/// Serialize a mesh as OFF.
pub fn write_off<W: Write>(mesh: &SurfaceMesh, mut w: W) -> std::io::Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", mesh.n_vertices(), mesh.n_faces())?;
    for v in mesh.vertices() {
        writeln!(w, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}
