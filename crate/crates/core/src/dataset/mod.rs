//! Scene manifests, normalized scene packs and on-disk formats.

mod depth;
mod jsonl;
mod manifest;
mod pack;
mod store;

use std::path::Path;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use depth::{load_depth_png, write_depth_png};
pub use jsonl::{parse_jsonl, read_jsonl, to_jsonl_string, write_jsonl};
pub use manifest::{
    load_manifest, parse_manifest, validate_manifest, BoxFrame, ManifestBox, ManifestCamera, ManifestFrame,
    ManifestObject, ManifestPose, ObjectRefs, SceneManifest, MANIFEST_SCHEMA, SCHEMA_VERSION,
};
pub use pack::{normalize, unify_pack, Frame, NormalizeOptions, SceneObject, ScenePack, DEFAULT_DEPTH_SCALE};
pub use store::{load_store, pack_path, read_pack, write_pack, PACK_SUFFIX};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{}invalid JSON: {message}", path.as_ref().map(|p| format!("{p}: ")).unwrap_or_default())]
    Json { path: Option<String>, message: String },
    #[error("schema violation at {pointer}: {message}")]
    SchemaViolation { pointer: String, message: String },
    #[error("{}line {line}: {message}", path.as_ref().map(|p| format!("{p}: ")).unwrap_or_default())]
    Parse {
        path: Option<String>,
        line: usize,
        message: String,
    },
    #[error("scene {scene}: {source}")]
    Geometry { scene: String, source: GeometryError },
    #[error("{path}: {message}")]
    Image { path: String, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub(crate) fn with_path(self, p: &Path) -> Self {
        let p = Some(p.display().to_string());
        match self {
            DatasetError::Json { message, .. } => DatasetError::Json { path: p, message },
            DatasetError::Parse { line, message, .. } => DatasetError::Parse { path: p, line, message },
            other => other,
        }
    }

    /// True for malformed or schema-violating input, as opposed to I/O or
    /// geometry failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            DatasetError::Json { .. } | DatasetError::SchemaViolation { .. } | DatasetError::Parse { .. }
        )
    }
}
