//! Explicit design of thin-walled structures with embedded moving morphable
//! components.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Geometry preprocessing.** A triangulated mid-surface ([`mesh::SurfaceMesh`])
//!    is split into patches, each patch is cut to a topological disk and mapped
//!    conformally onto a rectangle ([`conformal::PatchChart`]). A layered prism
//!    mesh is generated by offsetting the surface along vertex normals
//!    ([`solidmesh::SolidMesh`]).
//! 2. **Component layout.** Components live in the flat chart rectangles
//!    ([`components`]); their topology description functions are pulled back
//!    onto the surface, reconciled across cut lines and stitched across patches
//!    ([`embedding`]), then projected through the thickness with optional
//!    prescribed panel bands for rib and sandwich designs.
//! 3. **Optimization.** Compliance is minimized under a volume constraint with
//!    linear elasticity on the prism mesh ([`fem`]), analytic sensitivities
//!    ([`sensitivity`]), an optional narrow-band restriction of the system
//!    ([`dofremoval`]) and the method of moving asymptotes ([`optimizer`]).
//!
//! [`model::Model`] ties the stages together and [`config::RunConfig`] is the
//! JSON description consumed by the command-line driver.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod components;
pub mod config;
pub mod conformal;
pub mod dofremoval;
pub mod embedding;
mod error;
pub mod fem;
pub mod fixtures;
pub mod io;
mod linsys;
pub mod mesh;
pub mod model;
pub mod optimizer;
pub mod sensitivity;
pub mod solidmesh;

pub use error::{Error, Result};

/// Sets the worker count of the sparse solver. One thread runs fully
/// sequentially, which makes runs bitwise reproducible.
pub fn set_threads(n: usize) {
    let par = if n <= 1 { faer::Par::Seq } else { faer::Par::rayon(n) };
    faer::set_global_parallelism(par);
}
