//! Little-endian helpers shared by the hierarchy and checkpoint formats.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.write_u32::<LittleEndian>(v).unwrap();
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.write_u64::<LittleEndian>(v).unwrap();
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.write_f64::<LittleEndian>(v).unwrap();
    }

    /// Writes an index as u32; callers guarantee it fits.
    pub fn index(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("index exceeds 32 bits"));
    }

    pub fn index_list(&mut self, v: &[usize]) {
        self.index(v.len());
        for &x in v {
            self.index(x);
        }
    }

    pub fn f64_list(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    cur: Cursor<&'a [u8]>,
}

fn truncated(e: std::io::Error) -> Error {
    Error::Corrupt(format!("unexpected end of data ({e})"))
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        ByteReader { cur: Cursor::new(data) }
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let mut got = [0u8; 4];
        self.cur.read_exact(&mut got).map_err(truncated)?;
        if &got != magic {
            return Err(Error::Corrupt(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LittleEndian>().map_err(truncated)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.cur.read_u64::<LittleEndian>().map_err(truncated)
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.cur.read_f64::<LittleEndian>().map_err(truncated)
    }

    pub fn index(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    pub fn index_list(&mut self) -> Result<Vec<usize>> {
        let n = self.index()?;
        if n * 4 > self.remaining() {
            return Err(Error::Corrupt(format!("index list of {n} entries exceeds the data")));
        }
        (0..n).map(|_| self.index()).collect()
    }

    pub fn f64_list(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n.saturating_mul(8) > self.remaining() {
            return Err(Error::Corrupt(format!("float list of {n} entries exceeds the data")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Corrupt(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
