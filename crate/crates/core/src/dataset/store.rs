//! Directory of normalized scenes, one `<scene_id>.pack.json` per scene.

use std::path::{Path, PathBuf};

use super::pack::ScenePack;
use super::DatasetError;

pub const PACK_SUFFIX: &str = ".pack.json";

pub fn pack_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}{PACK_SUFFIX}"))
}

pub fn write_pack(dir: &Path, pack: &ScenePack) -> Result<PathBuf, DatasetError> {
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let path = pack_path(dir, &pack.scene_id);
    let mut text = serde_json::to_string_pretty(pack).map_err(|e| DatasetError::Json {
        path: Some(path.display().to_string()),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))?;
    Ok(path)
}

pub fn read_pack(path: &Path) -> Result<ScenePack, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json {
        path: Some(path.display().to_string()),
        message: e.to_string(),
    })
}

/// All packs in `dir`, sorted by scene id.
pub fn load_store(dir: &Path) -> Result<Vec<ScenePack>, DatasetError> {
    let entries = std::fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e.map_err(|e| DatasetError::io(dir, e))?.path();
        if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(PACK_SUFFIX)) {
            paths.push(p);
        }
    }
    let mut packs = paths.iter().map(|p| read_pack(p)).collect::<Result<Vec<_>, _>>()?;
    packs.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    Ok(packs)
}
