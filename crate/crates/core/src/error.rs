use thiserror::Error;

use crate::components::ComponentError;
use crate::config::ConfigError;
use crate::conformal::ConformalError;
use crate::fem::FemError;
use crate::mesh::MeshError;
use crate::optimizer::MmaError;
use crate::solidmesh::SolidMeshError;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Component(#[from] ComponentError),
    #[error(transparent)]
    SolidMesh(#[from] SolidMeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mma(#[from] MmaError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("patch {patch}: {source}")]
    Patch {
        patch: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("iteration {iteration}, {phase}: {source}")]
    Iteration {
        iteration: usize,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_patch(self, patch: usize) -> Self {
        Error::Patch {
            patch,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize, phase: &'static str) -> Self {
        Error::Iteration {
            iteration,
            phase,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
