//! The assembled optimization model: charts, solid mesh, supports and loads,
//! and the evaluation of compliance, volume and their sensitivities for a
//! component design.

use std::collections::BTreeSet;

use crate::components::{ComponentParams, ComponentSet};
use crate::config::{FaceSelector, MeshSource, RunConfig, VertexSelector};
use crate::conformal::{build_patch_chart, PatchChart};
use crate::dofremoval::{active_components, component_overlap_graph, narrow_band_mesh, NarrowBand, PathRule};
use crate::embedding::{classify_band, node_stiffness, Atlas, HeavisideParams, PanelSpec, TdfEvaluation, ThicknessBand};
use crate::fem::{element_means, BoundaryConditions, FemError, FemModel, FemSolution, Material};
use crate::mesh::{load_face_labels, load_surface_mesh, MeshFormat, SurfaceMesh};
use crate::optimizer::{BandStats, DesignProblem, DesignSpace, Evaluated};
use crate::sensitivity::{node_volume_shares, sensitivities, volume_fraction, ChainInputs, SensitivityReport};
use crate::solidmesh::{generate_offset_mesh, thickness_coordinate, SolidMesh};
use crate::{fixtures, Error, Result};

/// Design-independent parameters of the material model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub panel: PanelSpec,
    pub heaviside: HeavisideParams,
    pub ks_l: f64,
    pub path_rule: PathRule,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            panel: PanelSpec::default(),
            heaviside: HeavisideParams::default(),
            ks_l: 100.0,
            path_rule: PathRule::default(),
        }
    }
}

/// What to compute in [`Model::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub gradient: bool,
    pub dof_removal: bool,
}

/// Result of evaluating one design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub tdf: TdfEvaluation,
    pub node_density: Vec<f64>,
    pub element_density: Vec<f64>,
    pub solution: FemSolution,
    pub compliance: f64,
    pub volume_fraction: f64,
    pub band: Option<NarrowBand>,
    pub sensitivities: Option<SensitivityReport>,
}

impl Evaluation {
    pub fn band_stats(&self) -> Option<BandStats> {
        self.band.as_ref().map(|b| BandStats {
            kept_elements: b.kept_elements.len(),
            kept_dofs: b.n_dofs(),
            active_components: b.active_components.len(),
            fallback: b.fallback,
        })
    }
}

#[derive(Debug)]
pub struct Model {
    surface: SurfaceMesh,
    atlas: Atlas,
    fem: FemModel,
    bc: BoundaryConditions,
    params: ModelParams,
    space: DesignSpace,
    shape: Vec<usize>,
    node_band: Vec<ThicknessBand>,
    shares: Vec<f64>,
    loaded_vertices: Vec<bool>,
    supported_vertices: Vec<bool>,
}

impl Model {
    /// `shape[k]` is the number of components in patch `k`.
    pub fn new(
        surface: SurfaceMesh,
        charts: Vec<PatchChart>,
        solid: SolidMesh,
        material: Material,
        bc: BoundaryConditions,
        params: ModelParams,
        shape: Vec<usize>,
    ) -> Result<Self> {
        if shape.len() != charts.len() {
            return Err(Error::Invalid(format!(
                "design has {} patches but {} charts were built",
                shape.len(),
                charts.len()
            )));
        }
        params
            .panel
            .validate(solid.thickness())
            .map_err(|e| Error::Invalid(e.to_string()))?;
        let node_band = (0..solid.n_nodes())
            .map(|n| {
                let (omega, _) = thickness_coordinate(&solid, n);
                classify_band(omega, solid.thickness(), &params.panel)
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Invalid(e.to_string()))?;
        let dims: Vec<(f64, f64)> = charts.iter().map(|c| (c.width, c.height)).collect();
        let space = DesignSpace::new(&shape, &dims);
        let n_v = surface.n_vertices();
        let mut loaded_vertices = vec![false; n_v];
        for n in bc.loaded_nodes(&solid) {
            loaded_vertices[n % n_v] = true;
        }
        let mut supported_vertices = vec![false; n_v];
        for n in bc.fixed_nodes() {
            supported_vertices[n % n_v] = true;
        }
        let fem = FemModel::new(solid, material, &bc)?;
        let shares = node_volume_shares(fem.mesh(), fem.element_volumes());
        let atlas = Atlas::new(charts, n_v);
        Ok(Self {
            surface,
            atlas,
            fem,
            bc,
            params,
            space,
            shape,
            node_band,
            shares,
            loaded_vertices,
            supported_vertices,
        })
    }

    /// Builds the surface, charts, solid mesh and boundary conditions of a
    /// run configuration.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let surface = build_surface(&cfg.mesh)?;
        let charts = build_charts(&surface, cfg)?;
        let solid = generate_offset_mesh(&surface, cfg.thickness, cfg.layers)?;
        let bc = build_bc(&surface, &solid, cfg)?;
        let shape = cfg.patches.iter().map(|p| 2 * p.grid[0] * p.grid[1]).collect();
        let params = ModelParams {
            panel: cfg.panel,
            heaviside: cfg.heaviside,
            ks_l: cfg.ks_l,
            path_rule: cfg.optimizer.path_rule,
        };
        Self::new(surface, charts, solid, cfg.material, bc, params, shape)
    }

    pub fn surface(&self) -> &SurfaceMesh {
        &self.surface
    }

    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }

    pub fn fem(&self) -> &FemModel {
        &self.fem
    }

    pub fn solid(&self) -> &SolidMesh {
        self.fem.mesh()
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn node_band(&self) -> &[ThicknessBand] {
        &self.node_band
    }

    /// Crossed-pair initial layout on an `[nx, ny]` grid per patch. Each cell
    /// gets two components along its diagonals with half-thickness
    /// `0.4 * factor * min(cell width, cell height)`.
    pub fn initial_layout(&self, grids: &[[usize; 2]], factor: f64) -> Result<ComponentSet> {
        if grids.len() != self.atlas.n_patches() {
            return Err(Error::Invalid(format!(
                "{} layout grids for {} patches",
                grids.len(),
                self.atlas.n_patches()
            )));
        }
        let mut patches = Vec::with_capacity(grids.len());
        for (k, (chart, grid)) in self.atlas.charts().iter().zip(grids).enumerate() {
            let comps = crossed_grid(chart.width, chart.height, *grid, factor).map_err(|e| e.in_patch(k))?;
            if comps.len() != self.shape[k] {
                return Err(Error::Invalid(format!(
                    "patch {k}: layout has {} components, model expects {}",
                    comps.len(),
                    self.shape[k]
                )));
            }
            patches.push(comps);
        }
        Ok(ComponentSet::new(patches))
    }

    /// Node density and stiffness multiplier from the surface TDF.
    fn nodal_fields(&self, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_v = self.surface.n_vertices();
        let mut density = Vec::with_capacity(self.node_band.len());
        let mut stiffness = Vec::with_capacity(self.node_band.len());
        for (n, &band) in self.node_band.iter().enumerate() {
            let p = phi[n % n_v];
            let s = node_stiffness(band, p, &self.params.panel, &self.params.heaviside);
            let rho = match band {
                ThicknessBand::Lower => self.params.panel.rho_1,
                ThicknessBand::Upper => self.params.panel.rho_2,
                ThicknessBand::Design => s,
            };
            density.push(rho);
            stiffness.push(s);
        }
        (density, stiffness)
    }

    fn build_band(&self, comps: &ComponentSet, tdf: &TdfEvaluation, node_density: &[f64]) -> NarrowBand {
        let n_v = self.surface.n_vertices();
        let n_c = comps.n_components();
        let values: Vec<Vec<(usize, f64)>> = (0..n_v).map(|v| tdf.component_values_at(&self.atlas, v)).collect();
        let eps = self.params.heaviside.eps;
        let active: BTreeSet<usize> = if self.params.panel.is_topology() {
            let positive: Vec<Vec<usize>> = values
                .iter()
                .map(|vals| vals.iter().filter(|(_, p)| *p > -eps).map(|(i, _)| *i).collect())
                .collect();
            let graph = component_overlap_graph(n_c, &positive);
            let mut touches_load = vec![false; n_c];
            let mut touches_support = vec![false; n_c];
            for (v, comps_here) in positive.iter().enumerate() {
                for &i in comps_here {
                    touches_load[i] |= self.loaded_vertices[v];
                    touches_support[i] |= self.supported_vertices[v];
                }
            }
            active_components(&graph, &touches_load, &touches_support, self.params.path_rule)
        } else {
            (0..n_c).collect()
        };
        let vertex_ok: Vec<bool> = values
            .iter()
            .map(|vals| vals.iter().any(|(i, p)| *p > -eps && active.contains(i)))
            .collect();
        let attributable: Vec<bool> = self
            .node_band
            .iter()
            .enumerate()
            .map(|(n, b)| *b != ThicknessBand::Design || vertex_ok[n % n_v])
            .collect();
        narrow_band_mesh(
            self.solid(),
            &self.bc,
            node_density,
            &attributable,
            self.params.heaviside.alpha,
            active,
        )
    }

    /// Evaluates compliance and volume fraction of `comps`, with
    /// sensitivities when requested.
    pub fn evaluate(&self, comps: &ComponentSet, opts: EvalOptions) -> Result<Evaluation> {
        if comps.shape() != self.shape {
            return Err(Error::Invalid(format!(
                "design shape {:?} does not match the model {:?}",
                comps.shape(),
                self.shape
            )));
        }
        let tdf = self.atlas.evaluate(comps, self.params.ks_l)?;
        let (node_density, node_stiff) = self.nodal_fields(tdf.phi());
        let element_density = element_means(self.solid(), &node_density);
        let element_stiffness = element_means(self.solid(), &node_stiff);
        let volume = volume_fraction(&self.node_band, &node_density, &self.shares);
        let f = self.bc.load_vector(self.solid());

        let (solution, band) = if opts.dof_removal {
            let mut band = self.build_band(comps, &tdf, &node_density);
            let solved = if band.fallback {
                None
            } else {
                let layout = self.fem.layout(&band.kept_elements);
                match self.fem.solve(&layout, &element_stiffness, &f) {
                    Ok(s) if s.compliance.is_finite() && s.u.iter().all(|v| v.is_finite()) => Some(s),
                    Ok(_) | Err(FemError::Singular) | Err(FemError::Residual(_)) => None,
                    Err(e) => return Err(e.into()),
                }
            };
            match solved {
                Some(s) => (s, Some(band)),
                None => {
                    log::warn!("narrow band rejected; solving on the full mesh");
                    band = NarrowBand::full(self.solid(), &self.bc, band.active_components);
                    (self.fem.solve(self.fem.full_layout(), &element_stiffness, &f)?, Some(band))
                }
            }
        } else {
            (self.fem.solve(self.fem.full_layout(), &element_stiffness, &f)?, None)
        };

        let sens = if opts.gradient {
            let energies = self.fem.element_energies(&solution.u);
            let kept = band.as_ref().filter(|b| !b.fallback).map(|b| b.kept_elements.as_slice());
            let inputs = ChainInputs {
                mesh: self.solid(),
                node_band: &self.node_band,
                heaviside: &self.params.heaviside,
                shares: &self.shares,
            };
            Some(sensitivities(&inputs, &tdf, &self.atlas, comps, &energies, kept)?)
        } else {
            None
        };
        Ok(Evaluation {
            compliance: solution.compliance,
            tdf,
            node_density,
            element_density,
            solution,
            volume_fraction: volume,
            band,
            sensitivities: sens,
        })
    }

    /// Evaluates a flat design vector.
    pub fn evaluate_flat(&self, d: &[f64], opts: EvalOptions) -> Result<Evaluation> {
        let comps = ComponentSet::from_flat(&self.shape, d)?;
        self.evaluate(&comps, opts)
    }

    /// Adapter for the optimizer.
    pub fn problem(&self, dof_removal: bool) -> ModelProblem<'_> {
        ModelProblem {
            model: self,
            dof_removal,
            last: None,
        }
    }
}

/// [`DesignProblem`] view of a model. Keeps the last evaluation for output.
pub struct ModelProblem<'a> {
    model: &'a Model,
    dof_removal: bool,
    last: Option<Evaluation>,
}

impl ModelProblem<'_> {
    pub fn last(&self) -> Option<&Evaluation> {
        self.last.as_ref()
    }
}

impl DesignProblem for ModelProblem<'_> {
    fn evaluate(&mut self, design: &[f64]) -> Result<Evaluated> {
        let ev = self.model.evaluate_flat(
            design,
            EvalOptions {
                gradient: true,
                dof_removal: self.dof_removal,
            },
        )?;
        let sens = ev.sensitivities.clone().expect("gradient requested");
        let out = Evaluated {
            compliance: ev.compliance,
            volume_fraction: ev.volume_fraction,
            compliance_gradient: sens.compliance,
            volume_gradient: sens.volume,
            band: ev.band_stats(),
        };
        self.last = Some(ev);
        Ok(out)
    }
}

/// Two crossed components per cell of an `[nx, ny]` grid on a `w x h`
/// rectangle.
pub fn crossed_grid(w: f64, h: f64, grid: [usize; 2], factor: f64) -> Result<Vec<ComponentParams>> {
    let [nx, ny] = grid;
    if nx == 0 || ny == 0 {
        return Err(Error::Invalid("layout grid counts must be at least 1".into()));
    }
    let cw = w / nx as f64;
    let ch = h / ny as f64;
    let t = 0.4 * factor * cw.min(ch);
    let floor = 0.01 * w.min(h);
    let half_diag = 0.5 * cw.hypot(ch);
    if t < floor || half_diag < floor {
        return Err(Error::Invalid(format!(
            "layout grid {nx}x{ny} is too dense: initial half-thickness {t:.3e} is below the floor {floor:.3e}"
        )));
    }
    let angle = ch.atan2(cw);
    let mut out = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x0 = (i as f64 + 0.5) * cw;
            let y0 = (j as f64 + 0.5) * ch;
            for theta in [angle, -angle] {
                out.push(ComponentParams {
                    x0,
                    y0,
                    theta,
                    length: half_diag,
                    t1: t,
                    t2: t,
                    t3: t,
                });
            }
        }
    }
    Ok(out)
}

/// Loads or generates the mid-surface.
pub fn build_surface(src: &MeshSource) -> Result<SurfaceMesh> {
    Ok(match src {
        MeshSource::File { path, labels } => {
            let format = MeshFormat::from_path(path)
                .ok_or_else(|| Error::Invalid(format!("{}: unknown mesh format (use .off or .obj)", path.display())))?;
            let mesh = load_surface_mesh(path, format)?;
            match labels {
                Some(l) => mesh.with_labels(load_face_labels(l)?)?,
                None => mesh,
            }
        }
        MeshSource::Plate { width, height, nx, ny } => fixtures::rectangle_plate(*width, *height, *nx, *ny),
        MeshSource::Disk { rings, segments } => fixtures::unit_disk(*rings, *segments),
        MeshSource::Hemisphere { radius, rings, segments } => fixtures::hemisphere(*radius, *rings, *segments),
        MeshSource::Torus {
            major,
            minor,
            n_around,
            n_tube,
        } => fixtures::torus(*major, *minor, *n_around, *n_tube),
        MeshSource::Cylinder {
            radius,
            height,
            segments,
            rings,
        } => fixtures::cylinder(*radius, *height, *segments, *rings),
        MeshSource::Icosphere { subdivisions } => fixtures::icosphere(*subdivisions),
    })
}

/// Face ids of a patch selector.
pub fn select_faces(surface: &SurfaceMesh, sel: &FaceSelector) -> Result<Vec<usize>> {
    let faces: Vec<usize> = match sel {
        FaceSelector::All => (0..surface.n_faces()).collect(),
        FaceSelector::List(ids) => {
            if let Some(bad) = ids.iter().find(|&&f| f >= surface.n_faces()) {
                return Err(Error::Invalid(format!("face {bad} out of range ({} faces)", surface.n_faces())));
            }
            ids.clone()
        }
        FaceSelector::Label(label) => {
            if surface.labels().is_empty() {
                return Err(Error::Invalid("face labels requested but the mesh has none".into()));
            }
            (0..surface.n_faces()).filter(|&f| surface.labels()[f] == *label).collect()
        }
    };
    if faces.is_empty() {
        return Err(Error::Invalid("patch selects no faces".into()));
    }
    Ok(faces)
}

/// Surface vertex ids of a selector.
pub fn select_vertices(surface: &SurfaceMesh, sel: &VertexSelector) -> Result<Vec<usize>> {
    match sel {
        VertexSelector::List(ids) => {
            if let Some(bad) = ids.iter().find(|&&v| v >= surface.n_vertices()) {
                return Err(Error::Invalid(format!(
                    "vertex {bad} out of range ({} vertices)",
                    surface.n_vertices()
                )));
            }
            Ok(ids.clone())
        }
        VertexSelector::Box { min, max } => Ok(surface
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, p)| (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]))
            .map(|(i, _)| i)
            .collect()),
    }
}

/// Builds every patch chart of a configuration.
pub fn build_charts(surface: &SurfaceMesh, cfg: &RunConfig) -> Result<Vec<PatchChart>> {
    cfg.patches
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let faces = select_faces(surface, &p.faces).map_err(|e| e.in_patch(k))?;
            build_patch_chart(surface, &faces, &p.cut_path, p.corners, p.width, p.height).map_err(|e| e.in_patch(k))
        })
        .collect()
}

/// Supports and loads of a configuration on the solid mesh.
pub fn build_bc(surface: &SurfaceMesh, solid: &SolidMesh, cfg: &RunConfig) -> Result<BoundaryConditions> {
    let mut bc = BoundaryConditions::default();
    for (i, f) in cfg.bc.fixed.iter().enumerate() {
        let verts = select_vertices(surface, &f.vertices)?;
        if verts.is_empty() {
            return Err(Error::Invalid(format!("bc.fixed[{i}] selects no vertices")));
        }
        bc.fix_columns(solid, &verts, &f.axes);
    }
    for p in &cfg.bc.point_loads {
        if p.vertex >= surface.n_vertices() {
            return Err(Error::Invalid(format!("point load vertex {} out of range", p.vertex)));
        }
        bc.point_loads.push((solid.node_index(p.vertex, p.layer), p.force));
    }
    for (i, c) in cfg.bc.column_loads.iter().enumerate() {
        let verts = select_vertices(surface, &c.vertices)?;
        if verts.is_empty() {
            return Err(Error::Invalid(format!("bc.column_loads[{i}] selects no vertices")));
        }
        for v in verts {
            bc.load_columns.push((v, c.force));
        }
    }
    Ok(bc)
}
