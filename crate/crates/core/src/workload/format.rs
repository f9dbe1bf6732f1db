//! Little-endian workload file:
//!
//! ```text
//! magic "WSC1" | version u32
//! zipf f64 | initial_size u64 | operation_count u64
//! fetch f64 | insert f64 | delete f64
//! dist_shift_freq u64 | dist_shift_prct f64
//! key_pattern u8 | key_order u8 | random_seed u64
//! preload count u64, then count x (key u64, value u64)
//! operation_count x (opcode u8, key u64, value u64 iff opcode == 1)
//! ```
//!
//! Opcodes: 0 fetch, 1 insert, 2 delete. Bytes after the last operation are
//! rejected.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::{KeyOrder, KeyPattern, WorkloadConfig};
use super::generate::{Operation, Workload};
use super::WorkloadError;

pub const MAGIC: [u8; 4] = *b"WSC1";
pub const VERSION: u32 = 1;

const OP_FETCH: u8 = 0;
const OP_INSERT: u8 = 1;
const OP_DELETE: u8 = 2;

/// A fully materialised workload file.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadFile {
    pub config: WorkloadConfig,
    pub preload: Vec<(u64, u64)>,
    pub operations: Vec<Operation>,
}

impl WorkloadFile {
    pub fn generate(config: WorkloadConfig) -> Result<Self, WorkloadError> {
        let mut w = Workload::new(config)?;
        let preload = w.preload().to_vec();
        let operations = w.by_ref().collect();
        Ok(Self { config: w.config().clone(), preload, operations })
    }
}

fn write_header<W: Write>(out: &mut W, c: &WorkloadConfig, preload_len: u64) -> io::Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&c.zipf.to_le_bytes())?;
    out.write_all(&c.initial_size.to_le_bytes())?;
    out.write_all(&c.operation_count.to_le_bytes())?;
    out.write_all(&c.fetch_proportion.to_le_bytes())?;
    out.write_all(&c.insert_proportion.to_le_bytes())?;
    out.write_all(&c.delete_proportion.to_le_bytes())?;
    out.write_all(&c.dist_shift_freq.to_le_bytes())?;
    out.write_all(&c.dist_shift_prct.to_le_bytes())?;
    out.write_all(&[c.key_pattern.code(), c.key_order.code()])?;
    out.write_all(&c.random_seed.to_le_bytes())?;
    out.write_all(&preload_len.to_le_bytes())
}

fn write_op<W: Write>(out: &mut W, op: &Operation) -> io::Result<()> {
    match *op {
        Operation::Fetch { key } => {
            out.write_all(&[OP_FETCH])?;
            out.write_all(&key.to_le_bytes())
        }
        Operation::Insert { key, value } => {
            out.write_all(&[OP_INSERT])?;
            out.write_all(&key.to_le_bytes())?;
            out.write_all(&value.to_le_bytes())
        }
        Operation::Delete { key } => {
            out.write_all(&[OP_DELETE])?;
            out.write_all(&key.to_le_bytes())
        }
    }
}

fn write_body<W: Write>(out: &mut W, config: &WorkloadConfig, preload: &[(u64, u64)], ops: impl Iterator<Item = Operation>) -> io::Result<()> {
    write_header(out, config, preload.len() as u64)?;
    for &(k, v) in preload {
        out.write_all(&k.to_le_bytes())?;
        out.write_all(&v.to_le_bytes())?;
    }
    for op in ops {
        write_op(out, &op)?;
    }
    Ok(())
}

pub fn encode(file: &WorkloadFile) -> Vec<u8> {
    let mut buf = Vec::with_capacity(84 + file.preload.len() * 16 + file.operations.len() * 9);
    write_body(&mut buf, &file.config, &file.preload, file.operations.iter().copied()).expect("writing to a Vec cannot fail");
    buf
}

/// Generates the workload for `config` and streams it to `path`.
pub fn write_workload(config: &WorkloadConfig, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    let mut w = Workload::new(config.clone())?;
    let preload = w.preload().to_vec();
    let mut out = BufWriter::with_capacity(1 << 20, File::create(path)?);
    write_body(&mut out, config, &preload, w.by_ref())?;
    out.flush()?;
    Ok(())
}

fn truncated(what: &str) -> WorkloadError {
    WorkloadError::CorruptWorkload(format!("truncated in {what}"))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), WorkloadError> {
    r.read_exact(buf).map_err(|e| if e.kind() == io::ErrorKind::UnexpectedEof { truncated(what) } else { e.into() })
}

fn read_u8<R: Read>(r: &mut R, what: &str) -> Result<u8, WorkloadError> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b, what)?;
    Ok(b[0])
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64, WorkloadError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, what: &str) -> Result<f64, WorkloadError> {
    read_u64(r, what).map(f64::from_bits)
}

fn read_header<R: Read>(r: &mut R) -> Result<(WorkloadConfig, u64), WorkloadError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| if e.kind() == io::ErrorKind::UnexpectedEof { WorkloadError::BadMagic } else { e.into() })?;
    if magic != MAGIC {
        return Err(WorkloadError::BadMagic);
    }
    let mut v = [0u8; 4];
    read_exact(r, &mut v, "version")?;
    let version = u32::from_le_bytes(v);
    if version != VERSION {
        return Err(WorkloadError::UnsupportedVersion(version));
    }
    let zipf = read_f64(r, "config")?;
    let initial_size = read_u64(r, "config")?;
    let operation_count = read_u64(r, "config")?;
    let fetch_proportion = read_f64(r, "config")?;
    let insert_proportion = read_f64(r, "config")?;
    let delete_proportion = read_f64(r, "config")?;
    let dist_shift_freq = read_u64(r, "config")?;
    let dist_shift_prct = read_f64(r, "config")?;
    let pattern = read_u8(r, "config")?;
    let order = read_u8(r, "config")?;
    let random_seed = read_u64(r, "config")?;
    let key_pattern = KeyPattern::from_code(pattern).ok_or_else(|| WorkloadError::CorruptWorkload(format!("unknown key pattern {pattern}")))?;
    let key_order = KeyOrder::from_code(order).ok_or_else(|| WorkloadError::CorruptWorkload(format!("unknown key order {order}")))?;
    let config = WorkloadConfig {
        zipf,
        initial_size,
        operation_count,
        fetch_proportion,
        insert_proportion,
        delete_proportion,
        dist_shift_freq,
        dist_shift_prct,
        key_pattern,
        key_order,
        random_seed,
    };
    config.validate().map_err(|e| WorkloadError::CorruptWorkload(e.to_string()))?;
    let preload_len = read_u64(r, "preload count")?;
    Ok((config, preload_len))
}

fn read_op<R: Read>(r: &mut R) -> Result<Operation, WorkloadError> {
    let code = read_u8(r, "operations")?;
    let key = read_u64(r, "operations")?;
    match code {
        OP_FETCH => Ok(Operation::Fetch { key }),
        OP_INSERT => Ok(Operation::Insert { key, value: read_u64(r, "operations")? }),
        OP_DELETE => Ok(Operation::Delete { key }),
        other => Err(WorkloadError::CorruptWorkload(format!("unknown opcode {other}"))),
    }
}

/// Streams operations from a workload file after loading header and preload.
pub struct WorkloadReader<R: Read> {
    inner: R,
    config: WorkloadConfig,
    preload: Vec<(u64, u64)>,
    remaining: u64,
    done: bool,
}

impl<R: Read> WorkloadReader<R> {
    pub fn new(mut inner: R) -> Result<Self, WorkloadError> {
        let (config, preload_len) = read_header(&mut inner)?;
        let mut preload = Vec::with_capacity(preload_len.min(1 << 20) as usize);
        for _ in 0..preload_len {
            let k = read_u64(&mut inner, "preload")?;
            let v = read_u64(&mut inner, "preload")?;
            preload.push((k, v));
        }
        let remaining = config.operation_count;
        Ok(Self { inner, config, preload, remaining, done: false })
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.config
    }

    pub fn preload(&self) -> &[(u64, u64)] {
        &self.preload
    }

    pub fn take_preload(&mut self) -> Vec<(u64, u64)> {
        std::mem::take(&mut self.preload)
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    /// Next operation, `Ok(None)` at a clean end of file.
    pub fn next_op(&mut self) -> Result<Option<Operation>, WorkloadError> {
        if self.done {
            return Ok(None);
        }
        if self.remaining == 0 {
            self.done = true;
            let mut probe = [0u8; 1];
            return match self.inner.read(&mut probe)? {
                0 => Ok(None),
                _ => Err(WorkloadError::CorruptWorkload("trailing bytes after last operation".into())),
            };
        }
        match read_op(&mut self.inner) {
            Ok(op) => {
                self.remaining -= 1;
                Ok(Some(op))
            }
            Err(e) => {
                self.done = true;
                Err(e)
            }
        }
    }
}

impl<R: Read> Iterator for WorkloadReader<R> {
    type Item = Result<Operation, WorkloadError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_op().transpose()
    }
}

pub fn read_workload(path: impl AsRef<Path>) -> Result<WorkloadReader<BufReader<File>>, WorkloadError> {
    WorkloadReader::new(BufReader::with_capacity(1 << 20, File::open(path)?))
}

/// Decodes a complete in-memory workload file.
pub fn decode(bytes: &[u8]) -> Result<WorkloadFile, WorkloadError> {
    let mut reader = WorkloadReader::new(bytes)?;
    let cap = reader.remaining().min(bytes.len() as u64 / 9) as usize;
    let mut operations = Vec::with_capacity(cap);
    while let Some(op) = reader.next_op()? {
        operations.push(op);
    }
    let preload = reader.take_preload();
    Ok(WorkloadFile { config: reader.config, preload, operations })
}
