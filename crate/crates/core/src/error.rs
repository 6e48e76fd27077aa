use alloc::string::String;
use core::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("feature set is empty")]
    EmptySet,
    #[error("feature dimension must be positive")]
    ZeroDim,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("record id must be non-empty")]
    EmptyId,
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mixture fit data contains non-real record `{0}`")]
    FakeInFitData(String),
    #[error("need at least {needed} records, found {found}")]
    TooFewRecords { needed: usize, found: usize },
    #[error("zero-norm feature")]
    ZeroNormFeature,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("codec: {0}")]
    Codec(String),
}

/// A QCFS parse failure, located by byte offset and (when inside the
/// record section) by record index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub offset: u64,
    pub record: Option<u64>,
    pub kind: FormatErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatErrorKind {
    BadMagic,
    UnsupportedVersion(u16),
    Truncated,
    InvalidUtf8,
    InvalidLabel(u8),
    NonFinite,
    EmptyId,
    DuplicateId(String),
    ZeroDim,
    EmptySet,
    TrailingBytes(u64),
    FieldTooLong,
}

impl fmt::Display for FormatErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadMagic => f.write_str("bad magic"),
            Self::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            Self::Truncated => f.write_str("truncated input"),
            Self::InvalidUtf8 => f.write_str("invalid UTF-8 string"),
            Self::InvalidLabel(b) => write!(f, "invalid label byte {b}"),
            Self::NonFinite => f.write_str("non-finite feature value"),
            Self::EmptyId => f.write_str("empty record id"),
            Self::DuplicateId(id) => write!(f, "duplicate record id `{id}`"),
            Self::ZeroDim => f.write_str("zero dimension"),
            Self::EmptySet => f.write_str("record count is zero"),
            Self::TrailingBytes(n) => write!(f, "{n} trailing bytes after last record"),
            Self::FieldTooLong => f.write_str("string field longer than 65535 bytes"),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QCFS parse error at byte {}", self.offset)?;
        if let Some(r) = self.record {
            write!(f, " (record {r})")?;
        }
        write!(f, ": {}", self.kind)
    }
}

impl core::error::Error for FormatError {}
