use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::{Split, SplitRoles};
use super::windows::SceneWindow;
use crate::error::{Error, Result};

pub const CACHE_FORMAT: &str = "c2ftp-windows";
pub const CACHE_VERSION: u32 = 1;

/// Identifies what a cache was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub dataset: String,
    pub history: usize,
    pub future: usize,
    pub hz: u32,
}

/// Prepared, split windows as written by `prepare-data` (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCache {
    pub format: String,
    pub version: u32,
    pub key: CacheKey,
    pub seed: u64,
    pub split_roles: SplitRoles,
    pub split: Split<SceneWindow>,
}

impl WindowCache {
    pub fn new(key: CacheKey, seed: u64, split: Split<SceneWindow>) -> Self {
        Self {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
            key,
            seed,
            split_roles: SplitRoles::default(),
            split,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Validation(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        if value.get("format").and_then(|f| f.as_str()) != Some(CACHE_FORMAT) {
            return Err(Error::Validation(format!("{} is not a window cache", path.display())));
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != CACHE_VERSION {
            return Err(Error::Version { found: version, expected: CACHE_VERSION });
        }
        serde_json::from_value(value).map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::split::split_dataset;

    #[test]
    fn cache_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let windows = vec![SceneWindow::default(); 10];
        let key = CacheKey { dataset: "toy".into(), history: 15, future: 25, hz: 5 };
        let cache = WindowCache::new(key, 3, split_dataset(windows, 3));
        cache.save(&path).unwrap();
        assert_eq!(WindowCache::load(&path).unwrap(), cache);

        let text = std::fs::read_to_string(&path).unwrap().replace("\"version\":1", "\"version\":9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(WindowCache::load(&path), Err(Error::Version { found: 9, .. })));
    }
}
