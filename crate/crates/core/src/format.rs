//! Binary sample-stream files (`SPSC`).
//!
//! Layout, little-endian: magic `SPSC`, `u32` grid width, `u32` grid height,
//! `u32` channels `d`, `u32` sample count `N`, then `N` records of
//! `u32` index, `f32` row, `f32` col, `f32` theta and `d` `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scanner::{SampleStream, ScanPosition};

pub const MAGIC: &[u8; 4] = b"SPSC";

fn write_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated stream file: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f64> {
    Ok(f32::from_bits(read_u32(r)?) as f64)
}

pub fn write_stream(stream: &SampleStream, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    write_u32(&mut w, stream.grid_width())?;
    write_u32(&mut w, stream.grid_height())?;
    write_u32(&mut w, stream.channels())?;
    write_u32(&mut w, stream.len())?;
    for (i, p) in stream.positions().iter().enumerate() {
        write_u32(&mut w, i)?;
        for v in [p.row, p.col, p.theta].into_iter().chain(stream.value(i).iter().copied()) {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a stream written by [`write_stream`]; values come back at `f32` precision.
pub fn read_stream(mut r: impl Read) -> Result<SampleStream> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("missing SPSC header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected SPSC")));
    }
    let width = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let channels = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    if width.checked_mul(height) != Some(count) {
        return Err(Error::Format(format!("{width}x{height} grid cannot hold {count} samples")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::Format(format!("unsupported channel count {channels}")));
    }
    let mut positions = Vec::with_capacity(count.min(1 << 24));
    let mut values = Vec::with_capacity(count.min(1 << 24) * channels);
    for expected in 0..count {
        let index = read_u32(&mut r)? as usize;
        if index != expected {
            return Err(Error::Format(format!("record {expected} carries index {index}")));
        }
        positions.push(ScanPosition {
            row: read_f32(&mut r)?,
            col: read_f32(&mut r)?,
            theta: read_f32(&mut r)?,
        });
        for _ in 0..channels {
            values.push(read_f32(&mut r)?);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last record".into()));
    }
    SampleStream::new(width, height, channels, positions, values)
        .map_err(|e| Error::Format(format!("invalid stream contents: {e}")))
}

pub fn save_stream(stream: &SampleStream, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_stream(stream, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_stream(path: impl AsRef<Path>) -> Result<SampleStream> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::Format(format!("cannot open stream {}: {e}", path.display())))?;
    read_stream(BufReader::new(file))
}
