//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dofremoval::PathRule;
use crate::embedding::{HeavisideParams, PanelSpec};
use crate::fem::Material;
use crate::optimizer::MmaSettings;

/// Invalid configuration; names the offending field.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Mid-surface source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// OFF or OBJ file, with optional per-face integer labels (one per line).
    File {
        path: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
    Plate {
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
    },
    Disk {
        rings: usize,
        segments: usize,
    },
    Hemisphere {
        radius: f64,
        rings: usize,
        segments: usize,
    },
    Torus {
        major: f64,
        minor: f64,
        n_around: usize,
        n_tube: usize,
    },
    Cylinder {
        radius: f64,
        height: f64,
        segments: usize,
        rings: usize,
    },
    Icosphere {
        subdivisions: usize,
    },
}

/// Faces making up a patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceSelector {
    All,
    List(Vec<usize>),
    Label(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub faces: FaceSelector,
    /// Surface vertex path cutting the patch into a disk.
    #[serde(default)]
    pub cut_path: Vec<usize>,
    /// Surface vertices mapped to `(0,0)`, `(W,0)`, `(W,H)`, `(0,H)`.
    #[serde(default)]
    pub corners: Option<[usize; 4]>,
    pub width: f64,
    pub height: f64,
    /// Initial layout grid `[nx, ny]`.
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
}

fn default_grid() -> [usize; 2] {
    [2, 2]
}

/// A set of surface vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexSelector {
    List(Vec<usize>),
    /// Axis-aligned box `[min, max]` in surface coordinates.
    Box { min: [f64; 3], max: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedSpec {
    pub vertices: VertexSelector,
    #[serde(default = "all_axes")]
    pub axes: Vec<usize>,
}

fn all_axes() -> Vec<usize> {
    vec![0, 1, 2]
}

/// Force on a single node `(vertex, layer)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLoadSpec {
    pub vertex: usize,
    #[serde(default)]
    pub layer: i64,
    pub force: [f64; 3],
}

/// Force on every selected vertex column, split equally over the column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnLoadSpec {
    pub vertices: VertexSelector,
    pub force: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    #[serde(default)]
    pub fixed: Vec<FixedSpec>,
    #[serde(default)]
    pub point_loads: Vec<PointLoadSpec>,
    #[serde(default)]
    pub column_loads: Vec<ColumnLoadSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub mma: MmaSettings,
    pub path_rule: PathRule,
    pub dof_removal: bool,
    /// Write the design every this many iterations (0 disables).
    pub checkpoint_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iterations: 300,
            mma: MmaSettings::default(),
            path_rule: PathRule::default(),
            dof_removal: true,
            checkpoint_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            vtk: true,
        }
    }
}

/// Complete description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub patches: Vec<PatchConfig>,
    pub thickness: f64,
    /// Element layers on each side of the mid-surface.
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default)]
    pub material: Material,
    #[serde(default)]
    pub panel: PanelSpec,
    #[serde(default)]
    pub heaviside: HeavisideParams,
    #[serde(default = "default_ks")]
    pub ks_l: f64,
    #[serde(default = "default_volume_bound")]
    pub volume_bound: f64,
    /// Initial component half-thickness as a fraction of the grid cell size.
    #[serde(default = "default_initial_thickness")]
    pub initial_thickness_factor: f64,
    pub bc: BcConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_layers() -> usize {
    2
}
fn default_ks() -> f64 {
    100.0
}
fn default_volume_bound() -> f64 {
    0.4
}
fn default_initial_thickness() -> f64 {
    0.25
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let MeshSource::File { path, labels } = &mut self.mesh {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if let Some(l) = labels {
                if l.is_relative() {
                    *l = base.join(&*l);
                }
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |field: &str, v: f64| -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::field(field, format!("must be positive, got {v}")))
            }
        };
        match &self.mesh {
            MeshSource::Plate { width, height, nx, ny } => {
                pos("mesh.width", *width)?;
                pos("mesh.height", *height)?;
                if *nx == 0 || *ny == 0 {
                    return Err(ConfigError::field("mesh.nx", "grid counts must be at least 1"));
                }
            }
            MeshSource::Torus { major, minor, .. } => {
                pos("mesh.minor", *minor)?;
                if !(major > minor) {
                    return Err(ConfigError::field("mesh.major", "must exceed the minor radius"));
                }
            }
            MeshSource::Hemisphere { radius, .. } => pos("mesh.radius", *radius)?,
            MeshSource::Cylinder { radius, height, .. } => {
                pos("mesh.radius", *radius)?;
                pos("mesh.height", *height)?;
            }
            _ => {}
        }
        if self.patches.is_empty() {
            return Err(ConfigError::field("patches", "at least one patch is required"));
        }
        for (k, p) in self.patches.iter().enumerate() {
            pos(&format!("patches[{k}].width"), p.width)?;
            pos(&format!("patches[{k}].height"), p.height)?;
            if p.grid[0] == 0 || p.grid[1] == 0 {
                return Err(ConfigError::field(format!("patches[{k}].grid"), "grid counts must be at least 1"));
            }
        }
        pos("thickness", self.thickness)?;
        if self.layers == 0 {
            return Err(ConfigError::field("layers", "must be at least 1"));
        }
        if !(self.material.e > 0.0) {
            return Err(ConfigError::field("material.E", "must be positive"));
        }
        if !(self.material.nu > -1.0 && self.material.nu < 0.5) {
            return Err(ConfigError::field("material.nu", "must lie in (-1, 0.5)"));
        }
        self.panel
            .validate(self.thickness)
            .map_err(|e| ConfigError::field("panel", e.to_string()))?;
        pos("heaviside.eps", self.heaviside.eps)?;
        if !(self.heaviside.alpha > 0.0 && self.heaviside.alpha < 1.0) {
            return Err(ConfigError::field("heaviside.alpha", "must lie in (0, 1)"));
        }
        pos("ks_l", self.ks_l)?;
        if !(self.volume_bound > 0.0 && self.volume_bound <= 1.0) {
            return Err(ConfigError::field("volume_bound", "must lie in (0, 1]"));
        }
        pos("initial_thickness_factor", self.initial_thickness_factor)?;
        pos("optimizer.tol", self.optimizer.tol)?;
        pos("optimizer.mma.move_limit", self.optimizer.mma.move_limit)?;
        let mma = &self.optimizer.mma;
        pos("optimizer.mma.asyinit", mma.asyinit)?;
        pos("optimizer.mma.raa0", mma.raa0)?;
        pos("optimizer.mma.asymin", mma.asymin)?;
        if !(mma.asymax > mma.asymin && mma.asymax.is_finite()) {
            return Err(ConfigError::field("optimizer.mma.asymax", "must be finite and exceed asymin"));
        }
        if !(mma.asydecr > 0.0 && mma.asydecr < 1.0) {
            return Err(ConfigError::field("optimizer.mma.asydecr", "must lie in (0, 1)"));
        }
        if !(mma.asyincr >= 1.0 && mma.asyincr.is_finite()) {
            return Err(ConfigError::field("optimizer.mma.asyincr", "must be at least 1"));
        }
        if !(mma.move_shrink > 0.0 && mma.move_shrink <= 1.0) {
            return Err(ConfigError::field("optimizer.mma.move_shrink", "must lie in (0, 1]"));
        }
        if !(mma.move_grow >= 1.0 && mma.move_grow.is_finite()) {
            return Err(ConfigError::field("optimizer.mma.move_grow", "must be at least 1"));
        }
        if !(mma.albefa > 0.0 && mma.albefa < 1.0) {
            return Err(ConfigError::field("optimizer.mma.albefa", "must lie in (0, 1)"));
        }
        if self.bc.fixed.is_empty() {
            return Err(ConfigError::field("bc.fixed", "at least one support is required"));
        }
        for (i, f) in self.bc.fixed.iter().enumerate() {
            if f.axes.is_empty() || f.axes.iter().any(|a| *a > 2) {
                return Err(ConfigError::field(format!("bc.fixed[{i}].axes"), "axes must be 0, 1 or 2"));
            }
        }
        if self.bc.point_loads.is_empty() && self.bc.column_loads.is_empty() {
            return Err(ConfigError::field("bc", "at least one load is required"));
        }
        for (i, p) in self.bc.point_loads.iter().enumerate() {
            if p.layer.unsigned_abs() as usize > self.layers {
                return Err(ConfigError::field(
                    format!("bc.point_loads[{i}].layer"),
                    format!("must lie in [-{0}, {0}]", self.layers),
                ));
            }
        }
        if self.threads == Some(0) {
            return Err(ConfigError::field("threads", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn plate_json() -> String {
        r#"{
            "mesh": {"kind": "plate", "width": 1.0, "height": 1.0, "nx": 8, "ny": 8},
            "patches": [{"faces": "all", "corners": [0, 8, 80, 72], "width": 1.0, "height": 1.0}],
            "thickness": 0.05,
            "bc": {
                "fixed": [{"vertices": {"box": {"min": [-1e-9, -1, -1], "max": [1e-9, 2, 1]}}}],
                "column_loads": [{"vertices": {"list": [44]}, "force": [0, -1, 0]}]
            }
        }"#
        .to_string()
    }

    #[test]
    fn defaults_are_filled_in() {
        let cfg = RunConfig::from_json(&plate_json()).unwrap();
        assert_eq!(cfg.material, Material { e: 1.0, nu: 0.3 });
        assert_eq!(cfg.volume_bound, 0.4);
        assert_eq!(cfg.heaviside, HeavisideParams { eps: 0.1, alpha: 1e-3 });
        assert_eq!(cfg.ks_l, 100.0);
        assert_eq!(cfg.optimizer.tol, 1e-4);
        assert_eq!(cfg.optimizer.max_iterations, 300);
        assert_eq!(cfg.optimizer.path_rule, PathRule::LoadAndSupport);
        assert_eq!(cfg.layers, 2);
        assert_eq!(cfg.patches[0].grid, [2, 2]);
        assert_eq!(cfg.bc.fixed[0].axes, vec![0, 1, 2]);
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::from_json(&plate_json()).unwrap();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = plate_json().replace("\"thickness\": 0.05", "\"thickness\": -1");
        let err = RunConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("thickness"), "{err}");
        let bad = plate_json().replace("\"width\": 1.0, \"height\": 1.0}]", "\"width\": 0.0, \"height\": 1.0}]");
        let err = RunConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("patches[0].width"), "{err}");
        let bad = plate_json().replace("\"thickness\"", "\"thicknes\"");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad = plate_json().replace("\"thickness\": 0.05", "\"thickness\": 0.05, \"volume_bound\": 1.5");
        assert!(RunConfig::from_json(&bad).unwrap_err().to_string().contains("volume_bound"));
    }

    #[test]
    fn panel_must_leave_design_band() {
        let bad = plate_json().replace(
            "\"thickness\": 0.05",
            "\"thickness\": 0.05, \"panel\": {\"omega_bar_1\": 0.03, \"omega_bar_2\": 0.03}",
        );
        assert!(RunConfig::from_json(&bad).unwrap_err().to_string().contains("panel"));
    }
}
