//! Little-endian binary reader/writer used by the model containers.
//!
//! Truncation (`UnexpectedEof`) surfaces as a `Format` error so callers can
//! distinguish corrupt files from operating-system failures.

use std::io::{Read, Write};

use crate::{Error, Result};

pub(crate) struct BinWriter<W: Write> {
    inner: W,
    hasher: Option<crc32fast::Hasher>,
}

impl<W: Write> BinWriter<W> {
    pub fn new(inner: W) -> Self {
        BinWriter {
            inner,
            hasher: None,
        }
    }

    /// Writer that checksums everything written; call [`finish_crc`] last.
    pub fn with_crc(inner: W) -> Self {
        BinWriter {
            inner,
            hasher: Some(crc32fast::Hasher::new()),
        }
    }

    pub fn raw(&mut self, bytes: &[u8]) -> Result<()> {
        if let Some(h) = &mut self.hasher {
            h.update(bytes);
        }
        self.inner.write_all(bytes)?;
        Ok(())
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.raw(&[v])
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.raw(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.raw(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> Result<()> {
        self.raw(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.raw(&v.to_le_bytes())
    }

    /// Length-prefixed UTF-8.
    pub fn str(&mut self, s: &str) -> Result<()> {
        self.bytes(s.as_bytes())
    }

    /// Length-prefixed byte block.
    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.u32(b.len() as u32)?;
        self.raw(b)
    }

    pub fn f64_seq(&mut self, values: &[f64]) -> Result<()> {
        self.u32(values.len() as u32)?;
        for v in values {
            self.f64(*v)?;
        }
        Ok(())
    }

    pub fn f32_matrix(&mut self, values: &[f32]) -> Result<()> {
        let mut buf = Vec::with_capacity(4096);
        for chunk in values.chunks(1024) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            self.raw(&buf)?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }

    /// Appends the little-endian CRC32 of everything written so far.
    pub fn finish_crc(mut self) -> Result<W> {
        let crc = self
            .hasher
            .take()
            .expect("finish_crc on a writer created without CRC")
            .finalize();
        self.inner.write_all(&crc.to_le_bytes())?;
        Ok(self.inner)
    }
}

pub(crate) struct BinReader<R: Read> {
    inner: R,
    hasher: Option<crc32fast::Hasher>,
}

impl<R: Read> BinReader<R> {
    pub fn new(inner: R) -> Self {
        BinReader {
            inner,
            hasher: None,
        }
    }

    pub fn with_crc(inner: R) -> Self {
        BinReader {
            inner,
            hasher: Some(crc32fast::Hasher::new()),
        }
    }

    fn take(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("truncated file".into())
            } else {
                Error::Io(e)
            }
        })?;
        if let Some(h) = &mut self.hasher {
            h.update(buf);
        }
        Ok(())
    }

    pub fn raw(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.take(&mut buf)?;
        Ok(buf)
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.take(&mut b)?;
        Ok(b[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.take(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.take(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f32(&mut self) -> Result<f32> {
        let mut b = [0u8; 4];
        self.take(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.take(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn str(&mut self) -> Result<String> {
        let bytes = self.bytes()?;
        String::from_utf8(bytes).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        let len = self.u32()? as usize;
        if len > (1 << 30) {
            return Err(Error::Format(format!("implausible block length {len}")));
        }
        self.raw(len)
    }

    pub fn f64_seq(&mut self) -> Result<Vec<f64>> {
        let len = self.u32()? as usize;
        if len > (1 << 28) {
            return Err(Error::Format(format!("implausible sequence length {len}")));
        }
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    pub fn f32_matrix(&mut self, count: usize) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(count);
        let mut buf = [0u8; 4096];
        let mut remaining = count;
        while remaining > 0 {
            let take = remaining.min(1024);
            let bytes = &mut buf[..take * 4];
            self.take(bytes)?;
            for chunk in bytes.chunks_exact(4) {
                out.push(f32::from_le_bytes(chunk.try_into().unwrap()));
            }
            remaining -= take;
        }
        Ok(out)
    }

    /// Reads the trailing CRC32 and compares it against everything hashed so
    /// far.
    pub fn verify_crc(&mut self) -> Result<()> {
        let computed = self
            .hasher
            .take()
            .expect("verify_crc on a reader created without CRC")
            .finalize();
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("truncated file (missing checksum)".into())
            } else {
                Error::Io(e)
            }
        })?;
        let stored = u32::from_le_bytes(b);
        if stored != computed {
            return Err(Error::Format(format!(
                "checksum mismatch: stored {stored:#010x}, computed {computed:#010x}"
            )));
        }
        Ok(())
    }

    /// Fails unless the stream is exhausted.
    pub fn expect_eof(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes after end of payload".into())),
        }
    }
}
