//! Length-prefixed little-endian container with a trailing FNV-1a digest.
//!
//! Layout: `MASI1`, kind byte, section count (u32), then per section a
//! length-prefixed UTF-8 name and a length-prefixed payload, then the 64-bit
//! FNV-1a digest of every preceding byte.

use std::path::Path;

use crate::error::{CoreError, Result};

pub const MAGIC: &[u8; 5] = b"MASI1";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Dictionary = 1,
    Dataset = 2,
    Checkpoint = 3,
}

impl FileKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(FileKind::Dictionary),
            2 => Some(FileKind::Dataset),
            3 => Some(FileKind::Checkpoint),
            _ => None,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(u8::from(v))
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn usize(&mut self, v: usize) -> &mut Self {
        self.u64(v as u64)
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.usize(v.len());
        self.buf.extend_from_slice(v);
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn f64s(&mut self, v: &[f64]) -> &mut Self {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
        self
    }

    pub fn usizes(&mut self, v: &[usize]) -> &mut Self {
        self.usize(v.len());
        for &x in v {
            self.usize(x);
        }
        self
    }

    pub fn bools(&mut self, v: &[bool]) -> &mut Self {
        self.usize(v.len());
        self.buf.extend(v.iter().map(|&b| u8::from(b)));
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CoreError::Corruption(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(CoreError::Corruption(format!("invalid boolean byte {b}"))),
        }
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| CoreError::Corruption("length overflows usize".into()))
    }

    /// A length that must fit in the remaining bytes at `unit` bytes per element.
    fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(unit) > self.remaining() {
            return Err(CoreError::Corruption(format!("length {n} exceeds remaining data")));
        }
        Ok(n)
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len(1)?;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<String> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| CoreError::Corruption("invalid UTF-8 string".into()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }

    pub fn bools(&mut self) -> Result<Vec<bool>> {
        let n = self.len(1)?;
        (0..n).map(|_| self.bool()).collect()
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(CoreError::Corruption(format!("{} trailing bytes", self.remaining())))
        }
    }
}

/// Named sections of one container file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub kind: FileKind,
    pub sections: Vec<(String, Vec<u8>)>,
}

impl Container {
    pub fn new(kind: FileKind) -> Self {
        Container {
            kind,
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, payload: Vec<u8>) {
        self.sections.push((name.to_string(), payload));
    }

    pub fn section(&self, name: &str) -> Result<&[u8]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
            .ok_or_else(|| CoreError::Corruption(format!("missing section {name:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.buf.extend_from_slice(MAGIC);
        e.u8(self.kind as u8);
        e.u32(self.sections.len() as u32);
        for (name, payload) in &self.sections {
            e.str(name);
            e.bytes(payload);
        }
        let digest = fnv1a64(&e.buf);
        e.u64(digest);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8], kind: FileKind) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 1 + 4 + 8 {
            return Err(CoreError::Corruption(format!("file too short ({} bytes)", bytes.len())));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("eight bytes"));
        if &body[..MAGIC.len()] != MAGIC {
            return Err(CoreError::Corruption("bad magic".into()));
        }
        if fnv1a64(body) != stored {
            return Err(CoreError::Corruption("digest mismatch".into()));
        }
        let mut d = Decoder::new(&body[MAGIC.len()..]);
        let found = d.u8()?;
        let found_kind = FileKind::from_byte(found)
            .ok_or_else(|| CoreError::Corruption(format!("unknown file kind {found}")))?;
        if found_kind != kind {
            return Err(CoreError::Compatibility(format!("expected a {kind:?} file, found {found_kind:?}")));
        }
        let n = d.u32()?;
        let mut sections = Vec::with_capacity(n.min(64) as usize);
        for _ in 0..n {
            let name = d.str()?;
            let payload = d.bytes()?.to_vec();
            sections.push((name, payload));
        }
        d.expect_end()?;
        Ok(Container { kind, sections })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| CoreError::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>, kind: FileKind) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_bytes(&bytes, kind)
    }
}
