//! Global topology description function on the surface and its projection
//! through the thickness.
//!
//! Per patch, component TDFs are evaluated at the chart coordinates of every
//! cut-mesh vertex and aggregated with K-S. Copies of a vertex split by a cut
//! line are reconciled with a K-S over all copies, so every copy carries the
//! same value. Patch fields are extended by [`EXTENSION_CONST`] off the patch
//! and stitched by a K-S over all patches.

use serde::{Deserialize, Serialize};

use crate::components::{
    component_tdf, component_tdf_and_grad, ks_max, ks_max_with_weights, ComponentError, ComponentParams,
    ComponentSet, N_VARS,
};
use crate::conformal::PatchChart;
use crate::fem::{heaviside_derivative, regularized_heaviside};

/// Value of a patch field outside the patch, and of a patch without
/// components.
pub const EXTENSION_CONST: f64 = -1.0;

/// Chain-rule products below this are dropped from TDF gradients.
const NEGLIGIBLE_WEIGHT: f64 = 1e-15;

/// Relative tolerance for classifying nodes at band edges.
const BAND_EDGE_TOL: f64 = 1e-9;

/// Regularized Heaviside parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavisideParams {
    pub eps: f64,
    pub alpha: f64,
}

impl Default for HeavisideParams {
    fn default() -> Self {
        Self { eps: 0.1, alpha: 1e-3 }
    }
}

impl HeavisideParams {
    pub fn value(&self, x: f64) -> f64 {
        regularized_heaviside(x, self.eps, self.alpha)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        heaviside_derivative(x, self.eps, self.alpha)
    }
}

/// Prescribed base panels. `omega_bar_2` is the lower panel (next to
/// `omega = -t/2`, density `rho_1`), `omega_bar_1` the upper one (next to
/// `omega = t/2`, density `rho_2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSpec {
    pub omega_bar_1: f64,
    pub omega_bar_2: f64,
    pub rho_1: f64,
    pub rho_2: f64,
    pub panel_modulus_scale_1: f64,
    pub panel_modulus_scale_2: f64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        Self {
            omega_bar_1: 0.0,
            omega_bar_2: 0.0,
            rho_1: 1.0,
            rho_2: 1.0,
            panel_modulus_scale_1: 1.0,
            panel_modulus_scale_2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanelError {
    #[error("panel thicknesses {0} + {1} leave no designable band in thickness {2}")]
    NoDesignBand(f64, f64, f64),
    #[error("panel parameter {0} is out of range")]
    Range(&'static str),
    #[error("thickness coordinate {omega} lies outside [-{half}, {half}]")]
    OutsideThickness { omega: f64, half: f64 },
}

impl PanelSpec {
    pub fn validate(&self, t: f64) -> Result<(), PanelError> {
        if !(self.omega_bar_1 >= 0.0) {
            return Err(PanelError::Range("omega_bar_1"));
        }
        if !(self.omega_bar_2 >= 0.0) {
            return Err(PanelError::Range("omega_bar_2"));
        }
        if !(self.rho_1 > 0.0 && self.rho_1 <= 1.0) {
            return Err(PanelError::Range("rho_1"));
        }
        if !(self.rho_2 > 0.0 && self.rho_2 <= 1.0) {
            return Err(PanelError::Range("rho_2"));
        }
        if !(self.panel_modulus_scale_1 > 0.0) {
            return Err(PanelError::Range("panel_modulus_scale_1"));
        }
        if !(self.panel_modulus_scale_2 > 0.0) {
            return Err(PanelError::Range("panel_modulus_scale_2"));
        }
        if !(self.omega_bar_1 + self.omega_bar_2 < t) {
            return Err(PanelError::NoDesignBand(self.omega_bar_1, self.omega_bar_2, t));
        }
        Ok(())
    }

    /// True when neither panel is present (pure topology design).
    pub fn is_topology(&self) -> bool {
        self.omega_bar_1 == 0.0 && self.omega_bar_2 == 0.0
    }
}

/// Through-thickness region of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThicknessBand {
    Lower,
    Design,
    Upper,
}

/// Classifies a thickness coordinate: lower panel `[-t/2, -t/2 + w2)`, design
/// band `[-t/2 + w2, t/2 - w1]`, upper panel `(t/2 - w1, t/2]`.
pub fn classify_band(omega: f64, t: f64, panel: &PanelSpec) -> Result<ThicknessBand, PanelError> {
    let half = 0.5 * t;
    let tol = BAND_EDGE_TOL * t;
    if !(omega.abs() <= half + tol) {
        return Err(PanelError::OutsideThickness { omega, half });
    }
    if panel.omega_bar_2 > 0.0 && omega < -half + panel.omega_bar_2 - tol {
        Ok(ThicknessBand::Lower)
    } else if panel.omega_bar_1 > 0.0 && omega > half - panel.omega_bar_1 + tol {
        Ok(ThicknessBand::Upper)
    } else {
        Ok(ThicknessBand::Design)
    }
}

/// Density of a solid node at thickness coordinate `omega` whose generator
/// surface vertex carries the global TDF value `phi`.
pub fn solid_density(
    omega: f64,
    t: f64,
    phi: f64,
    panel: &PanelSpec,
    heaviside: &HeavisideParams,
) -> Result<f64, PanelError> {
    Ok(match classify_band(omega, t, panel)? {
        ThicknessBand::Lower => panel.rho_1,
        ThicknessBand::Upper => panel.rho_2,
        ThicknessBand::Design => heaviside.value(phi),
    })
}

/// Stiffness multiplier of a node: density times the panel modulus scale in
/// the panels, the Heaviside density in the design band.
pub fn node_stiffness(band: ThicknessBand, phi: f64, panel: &PanelSpec, heaviside: &HeavisideParams) -> f64 {
    match band {
        ThicknessBand::Lower => panel.rho_1 * panel.panel_modulus_scale_1,
        ThicknessBand::Upper => panel.rho_2 * panel.panel_modulus_scale_2,
        ThicknessBand::Design => heaviside.value(phi),
    }
}

/// Global TDF per surface vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTdfField {
    pub phi: Vec<f64>,
}

/// Component TDFs and their K-S aggregate at every cut-mesh vertex.
fn raw_patch_values(chart: &PatchChart, comps: &[ComponentParams], l: f64) -> Result<(Vec<f64>, Vec<f64>), ComponentError> {
    let n = chart.rect_uv.len();
    let nc = comps.len();
    let mut comp_phi = Vec::with_capacity(n * nc);
    let mut q = Vec::with_capacity(n);
    for p in &chart.rect_uv {
        if nc == 0 {
            q.push(EXTENSION_CONST);
            continue;
        }
        let start = comp_phi.len();
        for c in comps {
            comp_phi.push(component_tdf(*p, c)?);
        }
        q.push(ks_max(&comp_phi[start..], l)?);
    }
    Ok((comp_phi, q))
}

/// Groups cut-mesh vertices by the surface vertex they came from.
fn copy_groups(chart: &PatchChart) -> Vec<(usize, Vec<usize>)> {
    let mut order: Vec<usize> = (0..chart.global.len()).collect();
    order.sort_by_key(|&i| (chart.global[i], i));
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in order {
        let g = chart.global[i];
        match groups.last_mut() {
            Some((last, copies)) if *last == g => copies.push(i),
            _ => groups.push((g, vec![i])),
        }
    }
    groups
}

/// Per-vertex patch TDF (indexed by cut-mesh vertex) with cut-line copies
/// reconciled.
pub fn patch_tdf(chart: &PatchChart, comps: &[ComponentParams], l: f64) -> Result<Vec<f64>, ComponentError> {
    let (_, q) = raw_patch_values(chart, comps, l)?;
    let mut out = q.clone();
    for (_, copies) in copy_groups(chart) {
        if copies.len() > 1 {
            let vals: Vec<f64> = copies.iter().map(|&c| q[c]).collect();
            let v = ks_max(&vals, l)?;
            for &c in &copies {
                out[c] = v;
            }
        }
    }
    Ok(out)
}

/// Stitches patch fields given as `(surface vertex, value)` lists into the
/// global field over `n_vertices` surface vertices.
pub fn stitch_global_tdf(n_vertices: usize, patch_fields: &[Vec<(usize, f64)>], l: f64) -> SurfaceTdfField {
    let n_u = patch_fields.len();
    let mut ext = vec![vec![EXTENSION_CONST; n_u]; n_vertices];
    for (k, field) in patch_fields.iter().enumerate() {
        for &(v, val) in field {
            ext[v][k] = val;
        }
    }
    let phi = ext
        .iter()
        .map(|vals| if vals.is_empty() { EXTENSION_CONST } else { ks_max(vals, l).expect("non-empty") })
        .collect();
    SurfaceTdfField { phi }
}

/// Charts plus the vertex bookkeeping needed to evaluate and differentiate
/// the global TDF.
#[derive(Debug, Clone)]
pub struct Atlas {
    charts: Vec<PatchChart>,
    n_vertices: usize,
    groups: Vec<Vec<(usize, Vec<usize>)>>,
    /// For each surface vertex, `(patch, group index)` of every patch
    /// containing it.
    membership: Vec<Vec<(usize, usize)>>,
}

impl Atlas {
    pub fn new(charts: Vec<PatchChart>, n_vertices: usize) -> Self {
        let groups: Vec<_> = charts.iter().map(copy_groups).collect();
        let mut membership = vec![Vec::new(); n_vertices];
        for (k, gs) in groups.iter().enumerate() {
            for (gi, (v, _)) in gs.iter().enumerate() {
                membership[*v].push((k, gi));
            }
        }
        Self {
            charts,
            n_vertices,
            groups,
            membership,
        }
    }

    pub fn charts(&self) -> &[PatchChart] {
        &self.charts
    }

    pub fn n_patches(&self) -> usize {
        self.charts.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Patches containing surface vertex `v`.
    pub fn patches_of(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.membership[v].iter().map(|&(k, _)| k)
    }

    /// Evaluates the global TDF for a component set.
    pub fn evaluate(&self, comps: &ComponentSet, l: f64) -> Result<TdfEvaluation, ComponentError> {
        let mut patches = Vec::with_capacity(self.charts.len());
        for (k, chart) in self.charts.iter().enumerate() {
            let (comp_phi, q) = raw_patch_values(chart, &comps.patches[k], l)?;
            let mut group_value = Vec::with_capacity(self.groups[k].len());
            for (_, copies) in &self.groups[k] {
                group_value.push(if copies.len() == 1 {
                    q[copies[0]]
                } else {
                    let vals: Vec<f64> = copies.iter().map(|&c| q[c]).collect();
                    ks_max(&vals, l)?
                });
            }
            patches.push(PatchValues {
                n_comps: comps.patches[k].len(),
                comp_phi,
                q,
                group_value,
            });
        }
        let n_u = self.charts.len();
        let mut phi = vec![EXTENSION_CONST; self.n_vertices];
        let mut ext = vec![EXTENSION_CONST; n_u];
        for (v, slot) in phi.iter_mut().enumerate() {
            if n_u == 0 {
                break;
            }
            ext.fill(EXTENSION_CONST);
            for &(k, gi) in &self.membership[v] {
                ext[k] = patches[k].group_value[gi];
            }
            *slot = ks_max(&ext, l)?;
        }
        Ok(TdfEvaluation {
            field: SurfaceTdfField { phi },
            patches,
            offsets: comps.patch_offsets(),
            l,
        })
    }
}

#[derive(Debug, Clone)]
struct PatchValues {
    n_comps: usize,
    /// `n_cut_vertices x n_comps`, row-major.
    comp_phi: Vec<f64>,
    /// K-S over components per cut vertex.
    q: Vec<f64>,
    /// Reconciled value per copy group.
    group_value: Vec<f64>,
}

/// Global TDF plus the intermediate values needed for its gradient.
#[derive(Debug, Clone)]
pub struct TdfEvaluation {
    pub field: SurfaceTdfField,
    patches: Vec<PatchValues>,
    offsets: Vec<usize>,
    l: f64,
}

impl TdfEvaluation {
    pub fn phi(&self) -> &[f64] {
        &self.field.phi
    }

    /// Value of the patch-`k` field at surface vertex `v` (the extension
    /// constant off the patch).
    pub fn patch_value(&self, atlas: &Atlas, k: usize, v: usize) -> f64 {
        atlas.membership[v]
            .iter()
            .find(|&&(kk, _)| kk == k)
            .map(|&(_, gi)| self.patches[k].group_value[gi])
            .unwrap_or(EXTENSION_CONST)
    }

    /// Largest TDF of each global component at surface vertex `v` over all
    /// copies of `v`; components of patches not containing `v` are omitted.
    pub fn component_values_at(&self, atlas: &Atlas, v: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for &(k, gi) in &atlas.membership[v] {
            let pv = &self.patches[k];
            for i in 0..pv.n_comps {
                let best = atlas.groups[k][gi]
                    .1
                    .iter()
                    .map(|&c| pv.comp_phi[c * pv.n_comps + i])
                    .fold(f64::NEG_INFINITY, f64::max);
                out.push((self.offsets[k] + i, best));
            }
        }
        out
    }

    /// Sparse gradient of the global TDF at surface vertex `v` with respect to
    /// the flattened design vector, appended to `out` as `(index, value)`.
    pub fn gradient_at(
        &self,
        atlas: &Atlas,
        comps: &ComponentSet,
        v: usize,
        out: &mut Vec<(usize, f64)>,
    ) -> Result<(), ComponentError> {
        let l = self.l;
        let members = &atlas.membership[v];
        if members.is_empty() {
            return Ok(());
        }
        let n_u = atlas.charts.len();
        let mut ext = vec![EXTENSION_CONST; n_u];
        for &(k, gi) in members {
            ext[k] = self.patches[k].group_value[gi];
        }
        let (_, w_patch) = ks_max_with_weights(&ext, l)?;
        for &(k, gi) in members {
            let pv = &self.patches[k];
            if pv.n_comps == 0 || w_patch[k] < NEGLIGIBLE_WEIGHT {
                continue;
            }
            let chart = &atlas.charts[k];
            let copies = &atlas.groups[k][gi].1;
            let qs: Vec<f64> = copies.iter().map(|&c| pv.q[c]).collect();
            let (_, w_copy) = ks_max_with_weights(&qs, l)?;
            for (ci, &c) in copies.iter().enumerate() {
                let wc = w_patch[k] * w_copy[ci];
                if wc < NEGLIGIBLE_WEIGHT {
                    continue;
                }
                let row = &pv.comp_phi[c * pv.n_comps..(c + 1) * pv.n_comps];
                let (_, w_comp) = ks_max_with_weights(row, l)?;
                for (i, params) in comps.patches[k].iter().enumerate() {
                    let w = wc * w_comp[i];
                    if w < NEGLIGIBLE_WEIGHT {
                        continue;
                    }
                    let g = tdf_gradient_perturbed(chart, chart.rect_uv[c], params)?;
                    let base = N_VARS * (self.offsets[k] + i);
                    for (d, gd) in g.iter().enumerate() {
                        out.push((base + d, w * gd));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Component gradient, nudging points that sit on the component center.
fn tdf_gradient_perturbed(chart: &PatchChart, p: [f64; 2], c: &ComponentParams) -> Result<[f64; N_VARS], ComponentError> {
    match component_tdf_and_grad(p, c) {
        Err(ComponentError::SingularOrigin) => {
            let h = 1e-12 * chart.width.max(chart.height);
            component_tdf_and_grad([p[0] + h, p[1]], c).map(|(_, g)| g)
        }
        other => other.map(|(_, g)| g),
    }
}

/// Per-column multipliers for design-band chain rules: for each surface
/// vertex `l`, `sum over design-band nodes n of column l of H'(phi_l) *
/// node_weight[n]`.
pub fn column_chain_weights(
    n_vertices: usize,
    node_band: &[ThicknessBand],
    node_weight: &[f64],
    phi: &[f64],
    heaviside: &HeavisideParams,
) -> Vec<f64> {
    let mut out = vec![0.0; n_vertices];
    for (n, (&band, &w)) in node_band.iter().zip(node_weight).enumerate() {
        if band == ThicknessBand::Design {
            let l = n % n_vertices;
            out[l] += heaviside.derivative(phi[l]) * w;
        }
    }
    out
}
