//! Vertex buffers as base64 little-endian `f32` triplets.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::Point3;

pub fn encode_vertices(points: &[Point3<f64>]) -> String {
    let mut bytes = Vec::with_capacity(points.len() * 12);
    for p in points {
        for k in 0..3 {
            bytes.extend_from_slice(&(p[k] as f32).to_le_bytes());
        }
    }
    STANDARD.encode(bytes)
}

pub fn decode_vertices(text: &str) -> Option<Vec<[f32; 3]>> {
    let bytes = STANDARD.decode(text).ok()?;
    if bytes.len() % 12 != 0 {
        return None;
    }
    let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
    Some(bytes.chunks_exact(12).map(|c| [f(&c[0..4]), f(&c[4..8]), f(&c[8..12])]).collect())
}
