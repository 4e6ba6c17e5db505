use cageforge_shell::buffer::{decode_vertices, encode_vertices};
use nalgebra::Point3;
use proptest::prelude::*;

proptest! {
    #[test]
    fn vertex_buffers_carry_f32_triplets(coords in proptest::collection::vec(-1e6f64..1e6, 0..60)) {
        let points: Vec<Point3<f64>> = coords.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
        let back = decode_vertices(&encode_vertices(&points)).unwrap();
        prop_assert_eq!(back.len(), points.len());
        for (b, p) in back.iter().zip(&points) {
            prop_assert_eq!(*b, [p.x as f32, p.y as f32, p.z as f32]);
        }
    }
}

#[test]
fn buffer_layout_is_little_endian() {
    use base64::Engine;
    let text = encode_vertices(&[Point3::new(1.0, -2.0, 0.5)]);
    let bytes = base64::engine::general_purpose::STANDARD.decode(text).unwrap();
    assert_eq!(&bytes[0..4], &1.0f32.to_le_bytes());
    assert_eq!(&bytes[4..8], &(-2.0f32).to_le_bytes());
    assert_eq!(bytes.len(), 12);
}
