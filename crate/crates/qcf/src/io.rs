//! Files: QCFS feature sets, JSON documents, score tables, manifests.

use std::fs;
use std::path::{Path, PathBuf};

use qcf_core::{qcfs, DatasetManifest, FeatureSet};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{QcfError, Result};

pub fn write_feature_set(set: &FeatureSet, path: &Path) -> Result<()> {
    let bytes = qcfs::encode(set)?;
    fs::write(path, bytes).map_err(QcfError::io(path))
}

pub fn read_feature_set(path: &Path) -> Result<FeatureSet> {
    let bytes = fs::read(path).map_err(QcfError::io(path))?;
    qcfs::decode(&bytes).map_err(|source| QcfError::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(QcfError::io(path))?;
    serde_json::from_str(&text).map_err(|source| QcfError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| QcfError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_text(&text, path)
}

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    fs::write(path, text).map_err(QcfError::io(path))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let m: DatasetManifest = read_json(path)?;
    m.validate()?;
    Ok(m)
}

/// Image root of a manifest, resolved against the manifest's directory.
pub fn image_root(manifest_path: &Path, m: &DatasetManifest) -> PathBuf {
    let root = Path::new(&m.image_root);
    if root.is_absolute() {
        root.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(root)
    }
}

/// `id,qc_score` rows; floats in shortest round-trip form.
pub fn write_scores(ids: impl IntoIterator<Item = impl AsRef<str>>, scores: &[f64], path: &Path) -> Result<()> {
    let csv_err = |source| QcfError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["id", "qc_score"]).map_err(csv_err)?;
    for (id, s) in ids.into_iter().zip(scores) {
        w.write_record([id.as_ref(), &s.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(QcfError::io(path))
}

pub fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let csv_err = |source| QcfError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        let id = row.get(0).unwrap_or_default().to_string();
        let raw = row.get(1).unwrap_or_default();
        let score: f64 = raw
            .parse()
            .map_err(|_| QcfError::Input(format!("{}: score `{raw}` for `{id}` is not a number", path.display())))?;
        out.push((id, score));
    }
    Ok(out)
}

/// SHA-256 over the ids, each terminated by a newline.
pub fn id_list_hash(set: &FeatureSet) -> String {
    let mut h = Sha256::new();
    for r in set {
        h.update(r.id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(QcfError::io(dir))
}
