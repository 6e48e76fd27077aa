#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod curation;
pub mod error;
pub mod eval;
pub mod feature;
pub mod gmm;
pub mod manifest;
pub mod pixels;
pub mod probe;
pub mod qcfs;
pub mod rng;
pub mod spectra;

pub use error::{Error, FormatError, FormatErrorKind, Result};
pub use feature::{FeatureRecord, FeatureSet, Label, Selector};
pub use manifest::{DatasetManifest, ManifestEntry};
