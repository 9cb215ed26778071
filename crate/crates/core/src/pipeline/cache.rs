use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{PipelineError, StageStatus};

/// Stage outputs stored as `<stage>.<key prefix>.json` in one directory.
/// Writing a stage removes its files stored under any other key.
pub(crate) struct StageCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    key: String,
    value: T,
}

pub(crate) fn content_key(parts: &Value) -> String {
    // serde_json maps are ordered, so equal inputs give equal text
    hex::encode(Sha256::digest(parts.to_string().as_bytes()))
}

pub(crate) fn file_digest(path: &Path) -> Result<String, std::io::Error> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

impl StageCache {
    pub(crate) fn new(dir: impl Into<PathBuf>) -> Self {
        StageCache { dir: dir.into() }
    }

    fn file(&self, stage: &str, key: &str) -> PathBuf {
        self.dir.join(format!("{stage}.{}.json", &key[..16]))
    }

    /// Returns the cached value for `(stage, key)` or computes and stores it.
    /// Fresh values are round-tripped through their serialised form so a
    /// cached rerun sees exactly the same data.
    pub(crate) fn get_or_compute<T, F>(
        &self,
        stage: &str,
        key: &str,
        compute: F,
    ) -> Result<(T, StageStatus), PipelineError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, PipelineError>,
    {
        let path = self.file(stage, key);
        if let Ok(bytes) = fs::read(&path) {
            match serde_json::from_slice::<Envelope<T>>(&bytes) {
                Ok(env) if env.key == key => return Ok((env.value, StageStatus::Cached)),
                Ok(_) => log::warn!("{}: key mismatch, recomputing", path.display()),
                Err(e) => log::warn!("{}: unreadable cache entry ({e}), recomputing", path.display()),
            }
        }
        let value = compute()?;
        let bytes = serde_json::to_vec(&Envelope {
            key: key.to_string(),
            value: &value,
        })
        .map_err(|e| PipelineError::Cache(format!("serialise {stage}: {e}")))?;
        let env: Envelope<T> = serde_json::from_slice(&bytes)
            .map_err(|e| PipelineError::Cache(format!("reload {stage}: {e}")))?;
        self.store(stage, &path, &bytes)?;
        Ok((env.value, StageStatus::Computed))
    }

    fn store(&self, stage: &str, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
        let cache_err = |e: std::io::Error| PipelineError::Cache(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(cache_err)?;
        let prefix = format!("{stage}.");
        for entry in fs::read_dir(&self.dir).map_err(cache_err)? {
            let entry = entry.map_err(cache_err)?;
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if name.starts_with(&prefix) && entry.path() != path {
                let _ = fs::remove_file(entry.path());
            }
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes).map_err(cache_err)?;
        fs::rename(&tmp, path).map_err(cache_err)
    }
}
