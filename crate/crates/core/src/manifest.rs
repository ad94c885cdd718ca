//! JSON index of exported samples.
//!
//! Paths inside a manifest are stored relative to the directory holding the
//! manifest file, so an output directory can be moved as a unit.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentSpec;
use crate::error::{Error, Result};
use crate::segment::Provenance;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source: String,
    pub provenance: Provenance,
    /// Nominal `[t0, t1)` of the segment in µs.
    pub bounds: (u64, u64),
    pub event_count: usize,
    pub representation: String,
    pub frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    /// Command and parameters that produced the entries.
    pub params: BTreeMap<String, String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(params: BTreeMap<String, String>) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            params,
            entries: Vec::new(),
        }
    }

    fn check_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate id {:?}", e.id)));
            }
        }
        Ok(())
    }

    fn referenced(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .flat_map(|e| [Some(e.frame.as_str()), e.keypoints.as_deref()].into_iter().flatten())
    }

    /// Checks unique ids and that every referenced file exists under `root`.
    pub fn validate(&self, root: &Path) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::InvalidManifest(format!("unsupported version {}", self.version)));
        }
        self.check_ids()?;
        for rel in self.referenced() {
            if !root.join(rel).is_file() {
                return Err(Error::InvalidManifest(format!("missing file {rel}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidManifest(e.to_string()))
    }

    /// Validates against the manifest's directory, then writes it.
    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate(&base_dir(path))?;
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m = Self::from_json(&fs::read_to_string(path)?)?;
        m.validate(&base_dir(path))?;
        Ok(m)
    }

    pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
        base_dir(manifest_path).join(rel)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}
