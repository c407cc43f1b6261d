//! Canonical byte encoding helpers.
//!
//! All on-chain payloads use the same conventions: integers big-endian,
//! floats as IEEE-754 bit patterns big-endian, strings UTF-8 with a
//! 4-byte length prefix, lists with a 4-byte count prefix.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("malformed bytes at offset {offset}: {what}")]
pub struct CodecError {
    pub offset: usize,
    pub what: &'static str,
}

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> ByteWriter {
        ByteWriter::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_be_bytes());
    }

    pub fn put_digest(&mut self, v: &[u8; 32]) {
        self.buf.extend_from_slice(v);
    }

    /// Length-prefixed byte slice.
    pub fn put_bytes(&mut self, v: &[u8]) {
        self.put_u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }

    /// Length-prefixed UTF-8 string.
    pub fn put_string(&mut self, v: &str) {
        self.put_bytes(v.as_bytes());
    }

    /// List count prefix; elements are written by the caller.
    pub fn put_count(&mut self, n: usize) {
        self.put_u32(n as u32);
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> ByteReader<'a> {
        ByteReader { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return Err(CodecError {
                offset: self.pos,
                what,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1, "truncated u8")?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        let raw = self.take(4, "truncated u32")?;
        Ok(u32::from_be_bytes(raw.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        let raw = self.take(8, "truncated u64")?;
        Ok(u64::from_be_bytes(raw.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, CodecError> {
        let raw = self.take(8, "truncated f64")?;
        Ok(f64::from_bits(u64::from_be_bytes(raw.try_into().unwrap())))
    }

    pub fn digest(&mut self) -> Result<[u8; 32], CodecError> {
        let raw = self.take(32, "truncated digest")?;
        Ok(raw.try_into().unwrap())
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, CodecError> {
        let len = self.u32()? as usize;
        Ok(self.take(len, "truncated byte field")?.to_vec())
    }

    pub fn string(&mut self) -> Result<String, CodecError> {
        let offset = self.pos;
        let raw = self.bytes()?;
        String::from_utf8(raw).map_err(|_| CodecError {
            offset,
            what: "invalid utf-8",
        })
    }

    pub fn count(&mut self) -> Result<usize, CodecError> {
        Ok(self.u32()? as usize)
    }

    /// Decoding must consume the whole buffer.
    pub fn expect_end(&self) -> Result<(), CodecError> {
        if self.pos != self.buf.len() {
            return Err(CodecError {
                offset: self.pos,
                what: "trailing bytes",
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_scalars() {
        let mut w = ByteWriter::new();
        w.put_u8(7);
        w.put_u32(0xdead_beef);
        w.put_u64(u64::MAX - 1);
        w.put_f64(-0.5);
        w.put_string("orbit");
        let bytes = w.into_bytes();

        let mut r = ByteReader::new(&bytes);
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u32().unwrap(), 0xdead_beef);
        assert_eq!(r.u64().unwrap(), u64::MAX - 1);
        assert_eq!(r.f64().unwrap(), -0.5);
        assert_eq!(r.string().unwrap(), "orbit");
        r.expect_end().unwrap();
    }

    #[test]
    fn truncation_reports_offset() {
        let mut w = ByteWriter::new();
        w.put_u64(1);
        let bytes = w.into_bytes();
        let mut r = ByteReader::new(&bytes[..5]);
        let err = r.u64().unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn trailing_bytes_rejected() {
        let bytes = [0u8; 3];
        let mut r = ByteReader::new(&bytes);
        r.u8().unwrap();
        assert!(r.expect_end().is_err());
    }
}
