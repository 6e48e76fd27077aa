//! Labeled, concept-tagged feature vectors.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_byte(self) -> u8 {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Label::Real),
            1 => Some(Label::Fake),
            _ => None,
        }
    }

    /// Classifier target; the positive class is `Fake`.
    pub fn target(self) -> f64 {
        match self {
            Label::Real => 0.0,
            Label::Fake => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Real => "real",
            Label::Fake => "fake",
        })
    }
}

impl core::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Label::Real),
            "fake" => Ok(Label::Fake),
            other => Err(Error::Config(alloc::format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub label: Label,
    pub concept: String,
    pub source: String,
    pub vector: Vec<f32>,
}

impl FeatureRecord {
    pub fn new(
        id: impl Into<String>,
        label: Label,
        concept: impl Into<String>,
        source: impl Into<String>,
        vector: Vec<f32>,
    ) -> Self {
        Self {
            id: id.into(),
            label,
            concept: concept.into(),
            source: source.into(),
            vector,
        }
    }

    pub fn vector_f64(&self) -> Vec<f64> {
        self.vector.iter().map(|&v| f64::from(v)).collect()
    }
}

/// An ordered collection of records sharing one dimension, with ids unique.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    dim: usize,
    records: Vec<FeatureRecord>,
    ids: BTreeSet<String>,
}

impl PartialEq for FeatureSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.records == other.records
    }
}

impl FeatureSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDim);
        }
        Ok(Self {
            dim,
            records: Vec::new(),
            ids: BTreeSet::new(),
        })
    }

    pub fn from_records(dim: usize, records: impl IntoIterator<Item = FeatureRecord>) -> Result<Self> {
        let mut set = Self::new(dim)?;
        for r in records {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, record: FeatureRecord) -> Result<()> {
        if record.id.is_empty() {
            return Err(Error::EmptyId);
        }
        if record.vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: record.vector.len(),
            });
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(record.id));
        }
        if self.ids.contains(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        self.ids.insert(record.id.clone());
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn get(&self, index: usize) -> Option<&FeatureRecord> {
        self.records.get(index)
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, FeatureRecord> {
        self.records.iter()
    }

    pub fn into_records(self) -> Vec<FeatureRecord> {
        self.records
    }

    /// Builds a subset from record indices, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::from_records(self.dim, indices.iter().map(|&i| self.records[i].clone()))
    }

    /// Keeps the records matching `pred`, preserving order.
    pub fn filter(&self, pred: impl Fn(&FeatureRecord) -> bool) -> Self {
        let records: Vec<_> = self.records.iter().filter(|r| pred(r)).cloned().collect();
        let ids = records.iter().map(|r| r.id.clone()).collect();
        Self {
            dim: self.dim,
            records,
            ids,
        }
    }

    /// Concatenates `self` then `other`.
    pub fn merge(&self, other: &FeatureSet) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if let Some(dup) = other.records.iter().find(|r| self.ids.contains(&r.id)) {
            return Err(Error::DuplicateId(dup.id.clone()));
        }
        let mut out = self.clone();
        for r in &other.records {
            out.push(r.clone())?;
        }
        Ok(out)
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }
}

impl<'a> IntoIterator for &'a FeatureSet {
    type Item = &'a FeatureRecord;
    type IntoIter = core::slice::Iter<'a, FeatureRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Record predicate over (label, concept, source); `None` fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selector {
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub concept: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
}

impl Selector {
    pub fn label(label: Label) -> Self {
        Self {
            label: Some(label),
            ..Self::default()
        }
    }

    pub fn concept(concept: impl Into<String>) -> Self {
        Self {
            concept: Some(concept.into()),
            ..Self::default()
        }
    }

    pub fn matches(&self, r: &FeatureRecord) -> bool {
        self.label.is_none_or(|l| l == r.label)
            && self.concept.as_deref().is_none_or(|c| c == r.concept)
            && self.source.as_deref().is_none_or(|s| s == r.source)
    }
}

/// Subset of `set` matching `selector`, order preserved.
pub fn filter_records(set: &FeatureSet, selector: &Selector) -> FeatureSet {
    set.filter(|r| selector.matches(r))
}

pub fn merge_sets(a: &FeatureSet, b: &FeatureSet) -> Result<FeatureSet> {
    a.merge(b)
}
