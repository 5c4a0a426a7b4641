//! The checkpoint container: named float64 arrays in one flat binary file.
//!
//! Layout, byte for byte (all integers little-endian):
//!
//! ```text
//! magic     8 bytes   b"LGENCKPT"
//! version   u32       this file's format (currently 1)
//! count     u64       number of records
//! records   count ×   u32 name length | name (UTF-8)
//!                     u32 ndim        | ndim × u64 dims
//!                     u64 values (= Π dims) | values × f64 (raw IEEE bits)
//! checksum  u32       CRC-32 of every preceding byte, magic included
//! ```
//!
//! Everything a run needs to resume lives in the records: configuration,
//! step counters, parameters, spectral-norm state, optimizer moments, and
//! generator states. Integer payloads that may exceed 2⁵³ (seeds, stream
//! ids, word positions, step counters) are stored by bit-casting the `u64`
//! into the `f64` slot; the reader casts back, so the trip is exact even
//! when the bits happen to spell a NaN. Small counts and flags are stored
//! as plain values.

use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"LGENCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// One named array in the container.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Record {
    pub fn new(name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> Record {
        Record {
            name: name.into(),
            shape: shape.to_vec(),
            data,
        }
    }

    /// Flat vector record (shape `[len]`).
    pub fn flat(name: impl Into<String>, data: Vec<f64>) -> Record {
        let shape = vec![data.len()];
        Record {
            name: name.into(),
            shape,
            data,
        }
    }
}

struct CrcWriter<W: Write> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> CrcWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)?;
        Ok(())
    }

    fn put_u32(&mut self, v: u32) -> Result<()> {
        self.put(&v.to_le_bytes())
    }

    fn put_u64(&mut self, v: u64) -> Result<()> {
        self.put(&v.to_le_bytes())
    }
}

/// Serialize records to `path`. The byte stream is a pure function of the
/// records, so identical states produce identical files.
pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let file = File::create(path)?;
    let mut w = CrcWriter {
        inner: BufWriter::new(file),
        hasher: crc32fast::Hasher::new(),
    };
    w.put(MAGIC)?;
    w.put_u32(FORMAT_VERSION)?;
    w.put_u64(records.len() as u64)?;
    for r in records {
        let name = r.name.as_bytes();
        w.put_u32(name.len() as u32)?;
        w.put(name)?;
        w.put_u32(r.shape.len() as u32)?;
        for &d in &r.shape {
            w.put_u64(d as u64)?;
        }
        let numel: usize = r.shape.iter().product();
        if numel != r.data.len() {
            return Err(Error::Integrity(format!(
                "record {}: shape {:?} does not cover {} values",
                r.name,
                r.shape,
                r.data.len()
            )));
        }
        w.put_u64(numel as u64)?;
        for &v in &r.data {
            w.put(&v.to_bits().to_le_bytes())?;
        }
    }
    let crc = w.hasher.finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()?;
    Ok(())
}

struct CrcReader<R: Read> {
    inner: R,
    hasher: crc32fast::Hasher,
}

impl<R: Read> CrcReader<R> {
    fn take(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|_| Error::Integrity("checkpoint truncated".into()))?;
        self.hasher.update(buf);
        Ok(())
    }

    fn take_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.take(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn take_u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.take(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
}

/// Read records back, verifying magic, version, per-record lengths, and
/// the trailing checksum.
pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = File::open(path)?;
    let mut r = CrcReader {
        inner: BufReader::new(file),
        hasher: crc32fast::Hasher::new(),
    };
    let mut magic = [0u8; 8];
    r.take(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Integrity("not a checkpoint file (bad magic)".into()));
    }
    let version = r.take_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Integrity(format!(
            "checkpoint format v{version} not supported (this build reads v{FORMAT_VERSION})"
        )));
    }
    let count = r.take_u64()?;
    let mut records = Vec::new();
    for _ in 0..count {
        let name_len = r.take_u32()? as usize;
        if name_len > 4096 {
            return Err(Error::Integrity(format!(
                "record name of {name_len} bytes is not plausible"
            )));
        }
        let mut name = vec![0u8; name_len];
        r.take(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Integrity("record name is not UTF-8".into()))?;
        let ndim = r.take_u32()? as usize;
        if ndim > 8 {
            return Err(Error::Integrity(format!("record {name}: rank {ndim} not plausible")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.take_u64()? as usize);
        }
        let numel = r.take_u64()? as usize;
        if numel != shape.iter().product::<usize>() {
            return Err(Error::Integrity(format!(
                "record {name}: {numel} values do not match shape {shape:?}"
            )));
        }
        let mut data = Vec::with_capacity(numel);
        let mut b = [0u8; 8];
        for _ in 0..numel {
            r.take(&mut b)?;
            data.push(f64::from_bits(u64::from_le_bytes(b)));
        }
        records.push(Record { name, shape, data });
    }
    let computed = r.hasher.finalize();
    let mut tail = [0u8; 4];
    r.inner
        .read_exact(&mut tail)
        .map_err(|_| Error::Integrity("checkpoint missing checksum".into()))?;
    let stored = u32::from_le_bytes(tail);
    if stored != computed {
        return Err(Error::Integrity(format!(
            "checksum mismatch: file says {stored:#010x}, content hashes to {computed:#010x}"
        )));
    }
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra)? != 0 {
        return Err(Error::Integrity("trailing bytes after checksum".into()));
    }
    Ok(records)
}

// ── u64 ↔ f64 slot helpers ─────────────────────────────────────────────

pub fn u64_slot(v: u64) -> f64 {
    f64::from_bits(v)
}

pub fn slot_u64(v: f64) -> u64 {
    v.to_bits()
}

pub fn u128_slots(v: u128) -> [f64; 2] {
    [u64_slot(v as u64), u64_slot((v >> 64) as u64)]
}

pub fn slots_u128(lo: f64, hi: f64) -> u128 {
    slot_u64(lo) as u128 | ((slot_u64(hi) as u128) << 64)
}
