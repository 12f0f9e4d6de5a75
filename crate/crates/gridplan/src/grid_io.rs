//! Binary grid-stack file format used for precomputed occupancy and golden
//! dumps: magic `HYPG`, u32 version, u32 H, u32 W, u32 T, f32 resolution
//! (all little-endian), then `T * H * W` f32 values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"HYPG";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GridIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridStack {
    pub height: u32,
    pub width: u32,
    pub resolution: f32,
    /// `frames` grids of `height * width` values each.
    pub frames: Vec<Vec<f32>>,
}

pub fn write_grid_stack(path: &Path, stack: &GridStack) -> Result<(), GridIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&stack.height.to_le_bytes())?;
    w.write_all(&stack.width.to_le_bytes())?;
    w.write_all(&(stack.frames.len() as u32).to_le_bytes())?;
    w.write_all(&stack.resolution.to_le_bytes())?;
    let cells = (stack.height * stack.width) as usize;
    for frame in &stack.frames {
        if frame.len() != cells {
            return Err(GridIoError::Format(format!(
                "frame has {} values, expected {cells}",
                frame.len()
            )));
        }
        for &v in frame {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_stack(path: &Path) -> Result<GridStack, GridIoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(GridIoError::Format("bad magic, not a HYPG file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(GridIoError::Format(format!("unsupported version {version}")));
    }
    let height = read_u32(&mut r)?;
    let width = read_u32(&mut r)?;
    let t = read_u32(&mut r)?;
    let resolution = f32::from_le_bytes(read_4(&mut r)?);
    if height == 0 || width == 0 || !(resolution > 0.0) {
        return Err(GridIoError::Format("invalid header dimensions".into()));
    }
    let cells = (height as usize) * (width as usize);
    if (t as u64) * (cells as u64) > 512 * 1024 * 1024 {
        return Err(GridIoError::Format("grid stack too large".into()));
    }
    let mut frames = Vec::with_capacity(t as usize);
    let mut buf = vec![0u8; cells * 4];
    for _ in 0..t {
        r.read_exact(&mut buf)?;
        frames.push(
            buf.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        );
    }
    Ok(GridStack {
        height,
        width,
        resolution,
        frames,
    })
}

fn read_4(r: &mut impl Read) -> Result<[u8; 4], GridIoError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32, GridIoError> {
    Ok(u32::from_le_bytes(read_4(r)?))
}
