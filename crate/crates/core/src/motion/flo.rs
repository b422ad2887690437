//! Middlebury `.flo` files: `202021.25` as f32, i32 width, i32 height, then
//! interleaved f32 `(u, v)` pairs in row-major order, all little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgcore::io::write_bytes_atomic;
use crate::imgcore::ImagePlane;
use crate::motion::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;
/// Sanity bound on the stored dimensions.
const MAX_SIDE: i32 = 1 << 16;

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(12 + w * h * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, v) in flow.u().data().iter().zip(flow.v().data()) {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8], path: &Path) -> Result<FlowField> {
    let word = |i: usize| -> Option<[u8; 4]> { bytes.get(i..i + 4).map(|b| b.try_into().unwrap()) };
    let header = (|| Some((f32::from_le_bytes(word(0)?), i32::from_le_bytes(word(4)?), i32::from_le_bytes(word(8)?))))();
    let Some((magic, w, h)) = header else {
        return Err(Error::format(path, "file too short for a .flo header"));
    };
    if magic != FLO_MAGIC {
        return Err(Error::format(path, format!("bad .flo magic {magic}")));
    }
    if w <= 0 || h <= 0 || w > MAX_SIDE || h > MAX_SIDE {
        return Err(Error::format(path, format!("bad .flo dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + w * h * 8;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes for {w}x{h} flow, found {}", bytes.len()),
        ));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for chunk in bytes[12..].chunks_exact(8) {
        u.push(f64::from(f32::from_le_bytes(chunk[0..4].try_into().unwrap())));
        v.push(f64::from(f32::from_le_bytes(chunk[4..8].try_into().unwrap())));
    }
    let u = ImagePlane::from_vec(w, h, u).map_err(|e| Error::format(path, e.to_string()))?;
    let v = ImagePlane::from_vec(w, h, v).map_err(|e| Error::format(path, e.to_string()))?;
    FlowField::from_planes(u, v)
}

pub fn write_flo(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    write_bytes_atomic(path, &encode_flo(flow))
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes, path)
}
