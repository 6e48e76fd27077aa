//! The QCFS binary feature-set format.
//!
//! ```text
//! magic "QCFS" | version u16 | dim u32 | count u64 |
//! count × ( id_len u16, id utf8 | label u8 | concept_len u16, concept utf8 |
//!           source_len u16, source utf8 | dim × f32 )
//! ```
//!
//! All integers and floats are little-endian. Label bytes are 0 = real,
//! 1 = fake.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, FormatError, FormatErrorKind, Result};
use crate::feature::{FeatureRecord, FeatureSet, Label};

pub const MAGIC: [u8; 4] = *b"QCFS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

pub fn encode(set: &FeatureSet) -> Result<Vec<u8>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let per_record_floats = set.dim() * 4;
    let mut out = Vec::with_capacity(HEADER_LEN + set.len() * (per_record_floats + 16));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let dim = u32::try_from(set.dim()).map_err(|_| Error::Config("dimension exceeds u32".into()))?;
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for r in set {
        put_str(&mut out, &r.id)?;
        out.push(r.label.as_byte());
        put_str(&mut out, &r.concept)?;
        put_str(&mut out, &r.source)?;
        for v in &r.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| {
        Error::Format(FormatError {
            offset: out.len() as u64,
            record: None,
            kind: FormatErrorKind::FieldTooLong,
        })
    })?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    record: Option<u64>,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: FormatErrorKind) -> FormatError {
        self.err_at(self.pos, kind)
    }

    fn err_at(&self, offset: usize, kind: FormatErrorKind) -> FormatError {
        FormatError {
            offset: offset as u64,
            record: self.record,
            kind,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.buf.len() - self.pos < n {
            return Err(self.err_at(self.buf.len(), FormatErrorKind::Truncated));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        self.array().map(u16::from_le_bytes)
    }

    fn string(&mut self) -> Result<String, FormatError> {
        let len = self.u16()? as usize;
        let start = self.pos;
        let bytes = self.take(len)?;
        core::str::from_utf8(bytes)
            .map(String::from)
            .map_err(|_| self.err_at(start, FormatErrorKind::InvalidUtf8))
    }
}

pub fn decode(buf: &[u8]) -> Result<FeatureSet, FormatError> {
    let mut c = Cursor {
        buf,
        pos: 0,
        record: None,
    };
    if c.array::<4>()? != MAGIC {
        return Err(c.err_at(0, FormatErrorKind::BadMagic));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(c.err_at(4, FormatErrorKind::UnsupportedVersion(version)));
    }
    let dim = u32::from_le_bytes(c.array()?) as usize;
    if dim == 0 {
        return Err(c.err_at(6, FormatErrorKind::ZeroDim));
    }
    let count = u64::from_le_bytes(c.array()?);
    if count == 0 {
        return Err(c.err_at(10, FormatErrorKind::EmptySet));
    }
    let mut set = FeatureSet::new(dim).map_err(|_| c.err_at(6, FormatErrorKind::ZeroDim))?;
    for index in 0..count {
        c.record = Some(index);
        let start = c.pos;
        let id = c.string()?;
        if id.is_empty() {
            return Err(c.err_at(start, FormatErrorKind::EmptyId));
        }
        let label_at = c.pos;
        let byte = c.array::<1>()?[0];
        let label = Label::from_byte(byte).ok_or_else(|| c.err_at(label_at, FormatErrorKind::InvalidLabel(byte)))?;
        let concept = c.string()?;
        let source = c.string()?;
        let vec_at = c.pos;
        let raw = c.take(dim * 4)?;
        let vector: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if let Some(bad) = vector.iter().position(|v| !v.is_finite()) {
            return Err(c.err_at(vec_at + bad * 4, FormatErrorKind::NonFinite));
        }
        if set.contains_id(&id) {
            return Err(c.err_at(start, FormatErrorKind::DuplicateId(id)));
        }
        set.push(FeatureRecord {
            id,
            label,
            concept,
            source,
            vector,
        })
        .map_err(|_| c.err_at(start, FormatErrorKind::Truncated))?;
    }
    c.record = None;
    if c.pos != buf.len() {
        return Err(c.err(FormatErrorKind::TrailingBytes((buf.len() - c.pos) as u64)));
    }
    Ok(set)
}
