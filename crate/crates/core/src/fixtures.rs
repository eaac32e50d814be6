//! Procedural meshes used by tests, examples and the `fixture` subcommand.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Vector3;

use crate::mesh::SurfaceMesh;

fn build(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> SurfaceMesh {
    SurfaceMesh::new(vertices, faces).expect("fixture mesh is valid")
}

/// Flat `width x height` plate in the `z = 0` plane with `nx x ny` cells,
/// each split into two triangles. Vertex `(i, j)` has index `j * (nx + 1) + i`.
pub fn rectangle_plate(width: f64, height: f64, nx: usize, ny: usize) -> SurfaceMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vector3::new(
                width * i as f64 / nx as f64,
                height * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            // alternate the diagonal so the mesh has no preferred direction
            if (i + j) % 2 == 0 {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    build(vertices, faces)
}

/// Concentric-ring triangulation of a disk: `rings` rings with `segments * k`
/// vertices on ring `k`. Returns the vertices as `(radius fraction, angle)`.
fn ring_disk(rings: usize, segments: usize) -> (Vec<(f64, f64)>, Vec<[usize; 3]>) {
    let mut polar = vec![(0.0, 0.0)];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for k in 1..=rings {
        ring_start.push(polar.len());
        let n = segments * k;
        ring_len.push(n);
        for i in 0..n {
            polar.push((k as f64 / rings as f64, TAU * i as f64 / n as f64));
        }
    }
    let mut faces = Vec::new();
    for k in 1..=rings {
        let (os, on) = (ring_start[k], ring_len[k]);
        if k == 1 {
            for i in 0..on {
                faces.push([0, os + i, os + (i + 1) % on]);
            }
            continue;
        }
        let (is, inn) = (ring_start[k - 1], ring_len[k - 1]);
        let (mut i, mut o) = (0usize, 0usize);
        while i < inn || o < on {
            let next_inner = (i + 1) as f64 / inn as f64;
            let next_outer = (o + 1) as f64 / on as f64;
            if o < on && (i >= inn || next_outer <= next_inner) {
                faces.push([is + i % inn, os + o, os + (o + 1) % on]);
                o += 1;
            } else {
                faces.push([is + i % inn, os + o % on, is + (i + 1) % inn]);
                i += 1;
            }
        }
    }
    (polar, faces)
}

/// Unit disk in the `z = 0` plane. The outer ring is sampled uniformly and
/// its first vertex sits at `(1, 0, 0)`.
pub fn unit_disk(rings: usize, segments: usize) -> SurfaceMesh {
    let (polar, faces) = ring_disk(rings, segments);
    let vertices = polar
        .iter()
        .map(|&(r, a)| Vector3::new(r * a.cos(), r * a.sin(), 0.0))
        .collect();
    build(vertices, faces)
}

/// Upper hemisphere of the given radius; the boundary is the equator.
pub fn hemisphere(radius: f64, rings: usize, segments: usize) -> SurfaceMesh {
    let (polar, faces) = ring_disk(rings, segments);
    let vertices = polar
        .iter()
        .map(|&(s, a)| {
            let phi = s * FRAC_PI_2;
            radius * Vector3::new(phi.sin() * a.cos(), phi.sin() * a.sin(), phi.cos())
        })
        .collect();
    build(vertices, faces)
}

/// Torus of revolution with outward normals. Vertex `(i, j)` (`i` around the
/// central axis, `j` around the tube) has index `i * n_tube + j`.
pub fn torus(major: f64, minor: f64, n_around: usize, n_tube: usize) -> SurfaceMesh {
    let mut vertices = Vec::with_capacity(n_around * n_tube);
    for i in 0..n_around {
        let u = TAU * i as f64 / n_around as f64;
        for j in 0..n_tube {
            let v = TAU * j as f64 / n_tube as f64;
            let rho = major + minor * v.cos();
            vertices.push(Vector3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % n_around) * n_tube + (j % n_tube);
    let mut faces = Vec::with_capacity(2 * n_around * n_tube);
    for i in 0..n_around {
        for j in 0..n_tube {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(vertices, faces)
}

/// Torus plus two closed cut loops through vertex 0: a meridian (around the
/// tube) and a longitude (around the central axis).
pub fn torus_with_cuts(
    major: f64,
    minor: f64,
    n_around: usize,
    n_tube: usize,
) -> (SurfaceMesh, Vec<usize>, Vec<usize>) {
    let mesh = torus(major, minor, n_around, n_tube);
    let mut meridian: Vec<usize> = (0..n_tube).collect();
    meridian.push(0);
    let mut longitude: Vec<usize> = (0..n_around).map(|i| i * n_tube).collect();
    longitude.push(0);
    (mesh, meridian, longitude)
}

/// Open tube of the given radius along `z`, outward normals.
pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> SurfaceMesh {
    let mut vertices = Vec::new();
    for j in 0..=rings {
        let z = height * j as f64 / rings as f64;
        for i in 0..segments {
            let a = TAU * i as f64 / segments as f64;
            vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let id = |i: usize, j: usize| j * segments + i % segments;
    let mut faces = Vec::new();
    for j in 0..rings {
        for i in 0..segments {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(vertices, faces)
}

/// Unit icosphere obtained by `subdivisions` rounds of midpoint subdivision
/// of an icosahedron (`10 * 4^s + 2` vertices).
pub fn icosphere(subdivisions: usize) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    build(vertices, faces)
}

/// Rigid rotation about an arbitrary axis, for invariance tests.
pub fn rotation(axis: Vector3<f64>, angle: f64) -> nalgebra::Rotation3<f64> {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
}
