//! KITTI velodyne scans: packed little-endian `f32` quadruples `(x, y, z, r)`, no header.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::IoError;
use crate::geometry::Point;

const RECORD: usize = 16;

/// Decodes a scan buffer. Returns `None` when the length is not a multiple of 16.
pub fn decode_velodyne(bytes: &[u8]) -> Option<Vec<Point>> {
    if bytes.len() % RECORD != 0 {
        return None;
    }
    let points = bytes
        .chunks_exact(RECORD)
        .map(|rec| {
            let mut v = [0f32; 4];
            LittleEndian::read_f32_into(rec, &mut v);
            Point::new(v[0] as f64, v[1] as f64, v[2] as f64, v[3] as f64)
        })
        .collect();
    Some(points)
}

/// Encodes points as `f32` records. Values that came from a scan round-trip bit-exactly.
pub fn encode_velodyne(points: &[Point]) -> Vec<u8> {
    let mut out = vec![0u8; points.len() * RECORD];
    for (rec, p) in out.chunks_exact_mut(RECORD).zip(points) {
        LittleEndian::write_f32_into(&[p.x as f32, p.y as f32, p.z as f32, p.r as f32], rec);
    }
    out
}

pub fn read_velodyne_bin(path: impl AsRef<Path>) -> Result<Vec<Point>, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_velodyne(&bytes).ok_or_else(|| IoError::SizeNotMultipleOf16 {
        path: path.to_path_buf(),
        size: bytes.len() as u64,
    })
}

pub fn write_velodyne_bin(points: &[Point], path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, encode_velodyne(points)).map_err(|e| IoError::io(path, e))
}
