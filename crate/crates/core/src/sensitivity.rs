//! Analytic compliance and volume sensitivities and a finite-difference
//! checker.
//!
//! Both responses depend on the design only through the design-band node
//! densities `H(phi(l))`, so each sensitivity is a weighted sum of TDF
//! gradients at surface vertices:
//!
//! `dR/dD = sum_l G_l * dphi(l)/dD`,
//!
//! with column weights `G_l` accumulated over the design-band nodes above
//! vertex `l`. Only vertices inside the transition zone `|phi| <= eps`
//! contribute.

use std::io::Write;

use crate::components::ComponentSet;
use crate::embedding::{column_chain_weights, Atlas, HeavisideParams, TdfEvaluation, ThicknessBand};
use crate::solidmesh::SolidMesh;

/// Analytic gradients of one design evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub compliance: Vec<f64>,
    pub volume: Vec<f64>,
}

/// Volume attributed to each node: a sixth of every incident element.
pub fn node_volume_shares(mesh: &SolidMesh, element_volumes: &[f64]) -> Vec<f64> {
    crate::fem::scatter_to_nodes(mesh, element_volumes)
}

/// Material fraction of the design band:
/// `sum H(phi) share / sum share` over design-band nodes.
pub fn volume_fraction(node_band: &[ThicknessBand], node_density: &[f64], shares: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&b, &rho), &s) in node_band.iter().zip(node_density).zip(shares) {
        if b == ThicknessBand::Design {
            num += rho * s;
            den += s;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Nodal weight for compliance: `sum over kept incident elements of
/// u_e^T k0 u_e / 6`.
pub fn compliance_node_weights(mesh: &SolidMesh, energies: &[f64], kept: Option<&[usize]>) -> Vec<f64> {
    match kept {
        None => crate::fem::scatter_to_nodes(mesh, energies),
        Some(elements) => {
            let mut out = vec![0.0; mesh.n_nodes()];
            for &e in elements {
                for &n in &mesh.elements()[e] {
                    out[n] += energies[e] / 6.0;
                }
            }
            out
        }
    }
}

/// Inputs shared by the compliance and volume chain rules.
pub struct ChainInputs<'a> {
    pub mesh: &'a SolidMesh,
    pub node_band: &'a [ThicknessBand],
    pub heaviside: &'a HeavisideParams,
    pub shares: &'a [f64],
}

/// Compliance and volume-fraction gradients. `energies` are the unit-stiffness
/// element energies of the current solution and `kept` the elements of the
/// solved system (all when `None`).
pub fn sensitivities(
    inputs: &ChainInputs<'_>,
    eval: &TdfEvaluation,
    atlas: &Atlas,
    comps: &ComponentSet,
    energies: &[f64],
    kept: Option<&[usize]>,
) -> crate::Result<SensitivityReport> {
    let n_v = inputs.mesh.n_surface_vertices();
    let phi = eval.phi();
    let node_e = compliance_node_weights(inputs.mesh, energies, kept);
    let gc: Vec<f64> = column_chain_weights(n_v, inputs.node_band, &node_e, phi, inputs.heaviside)
        .into_iter()
        .map(|g| -g)
        .collect();
    let total: f64 = inputs
        .node_band
        .iter()
        .zip(inputs.shares)
        .filter(|(b, _)| **b == ThicknessBand::Design)
        .map(|(_, s)| s)
        .sum();
    let gv: Vec<f64> = column_chain_weights(n_v, inputs.node_band, inputs.shares, phi, inputs.heaviside)
        .into_iter()
        .map(|g| if total > 0.0 { g / total } else { 0.0 })
        .collect();
    // one pass over the transition zone for both responses
    let mut dc = vec![0.0; comps.n_vars()];
    let mut dv = vec![0.0; comps.n_vars()];
    let mut row = Vec::new();
    for l in 0..n_v {
        if gc[l] == 0.0 && gv[l] == 0.0 {
            continue;
        }
        row.clear();
        eval.gradient_at(atlas, comps, l, &mut row)?;
        for &(i, g) in &row {
            dc[i] += gc[l] * g;
            dv[i] += gv[l] * g;
        }
    }
    Ok(SensitivityReport {
        compliance: dc,
        volume: dv,
    })
}

/// One row of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FdEntry {
    pub index: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
    pub flagged: bool,
}

/// Relative tolerance of [`fd_check`].
pub const FD_REL_TOL: f64 = 1e-3;
/// Absolute floor of [`fd_check`].
pub const FD_ABS_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum FdError {
    #[error("finite-difference step must be positive and finite, got {0}")]
    Step(f64),
    #[error("design index {index} out of range (design has {len} variables)")]
    Index { index: usize, len: usize },
}

/// Compares `analytic[i]` with the central difference of `f` along design
/// variable `i` for each requested index. An entry is flagged when
/// `|a - fd| > max(1e-3 max(|a|, |fd|), 1e-8)`.
pub fn fd_check<F>(
    mut f: F,
    design: &[f64],
    analytic: &[f64],
    indices: &[usize],
    step: f64,
) -> crate::Result<Vec<FdEntry>>
where
    F: FnMut(&[f64]) -> crate::Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(crate::Error::Invalid(FdError::Step(step).to_string()));
    }
    for &i in indices {
        if i >= design.len() || i >= analytic.len() {
            return Err(crate::Error::Invalid(
                FdError::Index {
                    index: i,
                    len: design.len(),
                }
                .to_string(),
            ));
        }
    }
    let mut out = Vec::with_capacity(indices.len());
    let mut x = design.to_vec();
    for &i in indices {
        x[i] = design[i] + step;
        let fp = f(&x)?;
        x[i] = design[i] - step;
        let fm = f(&x)?;
        x[i] = design[i];
        let fd = (fp - fm) / (2.0 * step);
        let a = analytic[i];
        let diff = (a - fd).abs();
        let scale = a.abs().max(fd.abs());
        out.push(FdEntry {
            index: i,
            analytic: a,
            finite_difference: fd,
            rel_error: if scale > 0.0 { diff / scale } else { 0.0 },
            flagged: diff > (FD_REL_TOL * scale).max(FD_ABS_TOL),
        });
    }
    Ok(out)
}

/// Writes FD reports as one CSV, tagging each row with its response name.
pub fn write_fd_csv<W: Write>(mut w: W, groups: &[(&str, &[FdEntry])]) -> std::io::Result<()> {
    writeln!(w, "response,index,analytic,finite_difference,rel_error,flagged")?;
    for (response, entries) in groups {
        for e in *entries {
            writeln!(
                w,
                "{response},{},{:e},{:e},{:e},{}",
                e.index, e.analytic, e.finite_difference, e.rel_error, e.flagged as u8
            )?;
        }
    }
    Ok(())
}
