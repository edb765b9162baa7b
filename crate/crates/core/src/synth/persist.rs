use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::engine::SyntheticSet;
use crate::data::{load_csv, write_csv, Schema, SchemaDecl};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub label: String,
    pub seed: u64,
    pub m: usize,
    pub seconds: Vec<f64>,
    pub files: Vec<String>,
}

pub fn dataset_file_name(index: usize) -> String {
    format!("synthetic_{:03}.csv", index + 1)
}

/// Write one CSV per dataset and a manifest into `dir`.
pub fn write_synthetic_set(set: &SyntheticSet, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(set.m());
    for (i, ds) in set.datasets.iter().enumerate() {
        let name = dataset_file_name(i);
        write_csv(ds, &dir.join(&name))?;
        files.push(name);
    }
    let manifest = Manifest {
        label: set.label.clone(),
        seed: set.seed,
        m: set.m(),
        seconds: set.seconds.clone(),
        files,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::Document {
        path: path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Document {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if manifest.files.len() != manifest.m || manifest.seconds.len() != manifest.m {
        return Err(Error::Document {
            path,
            message: format!("manifest lists m = {} but a different number of files or timings", manifest.m),
        });
    }
    Ok(manifest)
}

/// Load a set written by [`write_synthetic_set`], decoding with `schema`.
pub fn read_synthetic_set(dir: &Path, schema: &Schema) -> Result<SyntheticSet> {
    let manifest = read_manifest(dir)?;
    let decl = SchemaDecl::from_schema(schema);
    let datasets = manifest
        .files
        .iter()
        .map(|f| load_csv(&dir.join(f), &decl, &[""]))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticSet {
        label: manifest.label,
        seed: manifest.seed,
        datasets,
        seconds: manifest.seconds,
    })
}
