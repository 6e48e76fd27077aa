use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::Label;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
}

/// A directory of images sharing one concept and source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub concept: String,
    pub source: String,
    pub image_root: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.path.is_empty() {
                return Err(Error::Config(format!("manifest `{}`: empty entry path", self.name)));
            }
            if !seen.insert(e.path.as_str()) {
                return Err(Error::Config(format!(
                    "manifest `{}`: duplicate path `{}`",
                    self.name, e.path
                )));
            }
        }
        Ok(())
    }

    /// Record id for an entry: `<name>/<path>`.
    pub fn record_id(&self, entry: &ManifestEntry) -> String {
        format!("{}/{}", self.name, entry.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_and_validation() {
        let json = r#"{"name":"n","concept":"c","source":"s","image_root":"imgs",
            "entries":[{"path":"a.png","label":"real"},{"path":"b.png","label":"fake"}]}"#;
        let m: DatasetManifest = serde_json::from_str(json).unwrap();
        m.validate().unwrap();
        assert_eq!(m.entries[1].label, Label::Fake);
        assert_eq!(m.record_id(&m.entries[0]), "n/a.png");
        let mut dup = m.clone();
        dup.entries[1].path = "a.png".into();
        assert!(dup.validate().is_err());
        let bad = json.replace("\"fake\"", "\"other\"");
        assert!(serde_json::from_str::<DatasetManifest>(&bad).is_err());
    }
}
