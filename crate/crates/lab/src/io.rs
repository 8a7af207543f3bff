use std::path::Path;

use crate::error::{LabError, LabResult};

pub fn read_bytes(path: &Path) -> LabResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> LabResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| LabError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}
