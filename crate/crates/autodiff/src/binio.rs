//! Little-endian binary helpers shared by the on-disk formats
//! (`VRCK`, `VRIM`, `VRGD`, `VRDS`).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated input at byte offset {offset}: needed {needed} more byte(s)")]
    Truncated { offset: usize, needed: usize },

    #[error("corrupt input at byte offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Default, Clone)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn header(magic: &[u8; 4], version: u32) -> Self {
        let mut w = Self::new();
        w.bytes(magic);
        w.u32(version);
        w
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }

    pub fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn f64s(&mut self, xs: &[f64]) {
        self.buf.reserve(xs.len() * 8);
        for x in xs {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    /// Length-prefixed (u32) UTF-8 string.
    pub fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over a byte slice that reports the offset of every failure.
#[derive(Debug, Clone)]
pub struct ByteReader<'a> {
    data: &'a [u8],
    offset: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, offset: 0 }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.offset
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                offset: self.offset,
                needed: n - self.remaining(),
            });
        }
        let s = &self.data[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    /// Checks the 4-byte magic and the u32 version that follows it.
    pub fn header(&mut self, magic: &[u8; 4], version: u32) -> Result<(), FormatError> {
        let found: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        if &found != magic {
            return Err(FormatError::BadMagic {
                expected: *magic,
                found,
            });
        }
        let v = self.u32()?;
        if v != version {
            return Err(FormatError::UnsupportedVersion {
                found: v,
                supported: version,
            });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A length read from the file, sanity-checked against the bytes left so
    /// corrupt counts fail cleanly instead of attempting huge allocations.
    pub fn count(&mut self, raw: u64, bytes_per_item: usize) -> Result<usize, FormatError> {
        let at = self.offset;
        let n = usize::try_from(raw).map_err(|_| FormatError::Corrupt {
            offset: at,
            reason: format!("count {raw} does not fit in memory"),
        })?;
        match n.checked_mul(bytes_per_item) {
            Some(b) if b <= self.remaining() => Ok(n),
            _ => Err(FormatError::Truncated {
                offset: at,
                needed: n.saturating_mul(bytes_per_item).saturating_sub(self.remaining()),
            }),
        }
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>, FormatError> {
        let n = self.count(n as u64, 8)?;
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn string(&mut self) -> Result<String, FormatError> {
        let len = self.u32()?;
        let len = self.count(len as u64, 1)?;
        let at = self.offset;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|e| FormatError::Corrupt {
            offset: at,
            reason: format!("invalid UTF-8: {e}"),
        })
    }

    pub fn expect_end(&self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(FormatError::Corrupt {
                offset: self.offset,
                reason: format!("{} trailing byte(s)", self.remaining()),
            });
        }
        Ok(())
    }
}
