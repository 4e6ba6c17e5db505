//! Readers and writers for OBJ, PLY (ASCII and binary little-endian), OFF and STL.
//!
//! Writers are canonical: the same mesh always produces the same bytes, and
//! ASCII coordinates use the shortest representation that parses back to
//! the same `f64`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};

use super::{MeshError, TriangleMesh};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
    Off,
    Stl,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self, MeshError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        ext.parse()
    }

    fn name(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
            MeshFormat::Off => "off",
            MeshFormat::Stl => "stl",
        }
    }
}

impl FromStr for MeshFormat {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            "off" => Ok(MeshFormat::Off),
            "stl" => Ok(MeshFormat::Stl),
            other => Err(MeshError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Load a mesh, inferring the format from the extension when `format` is `None`.
pub fn load_mesh<T: Real>(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriangleMesh<T>, MeshError> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let bytes = std::fs::read(path)?;
    parse_mesh(&bytes, format)
}

pub fn parse_mesh<T: Real>(bytes: &[u8], format: MeshFormat) -> Result<TriangleMesh<T>, MeshError> {
    let (positions, polygons) = match format {
        MeshFormat::Obj => parse_obj(text(bytes, format)?)?,
        MeshFormat::Off => parse_off(text(bytes, format)?)?,
        MeshFormat::Ply => parse_ply(bytes)?,
        MeshFormat::Stl => parse_stl(bytes)?,
    };
    let triangles = triangulate(&polygons);
    let positions = positions
        .into_iter()
        .map(|p| Point3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2])))
        .collect();
    TriangleMesh::new(positions, triangles)
}

pub fn save_mesh<T: Real>(mesh: &TriangleMesh<T>, path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<(), MeshError> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    std::fs::write(path, encode_mesh(mesh, format))?;
    Ok(())
}

pub fn encode_mesh<T: Real>(mesh: &TriangleMesh<T>, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
        MeshFormat::Off => write_off(mesh).into_bytes(),
        MeshFormat::Ply => write_ply(mesh).into_bytes(),
        MeshFormat::Stl => write_stl(mesh),
    }
}

fn text(bytes: &[u8], format: MeshFormat) -> Result<&str, MeshError> {
    std::str::from_utf8(bytes).map_err(|e| MeshError::Parse {
        format: format.name(),
        line: 0,
        message: format!("invalid utf-8: {e}"),
    })
}

fn perr(format: &'static str, line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        format,
        line,
        message: message.into(),
    }
}

/// Fan triangulation of polygons with three or more corners.
fn triangulate(polygons: &[Vec<usize>]) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(polygons.len());
    for poly in polygons {
        for k in 1..poly.len().saturating_sub(1) {
            out.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    out
}

type Raw = (Vec<[f64; 3]>, Vec<Vec<usize>>);

fn parse_f64(tok: Option<&str>, format: &'static str, line: usize) -> Result<f64, MeshError> {
    let tok = tok.ok_or_else(|| perr(format, line, "missing coordinate"))?;
    tok.parse()
        .map_err(|_| perr(format, line, format!("invalid number '{tok}'")))
}

fn parse_obj(src: &str) -> Result<Raw, MeshError> {
    let mut positions = Vec::new();
    let mut polygons = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), "obj", line)?;
                let y = parse_f64(toks.next(), "obj", line)?;
                let z = parse_f64(toks.next(), "obj", line)?;
                positions.push([x, y, z]);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = head
                        .parse()
                        .map_err(|_| perr("obj", line, format!("invalid face index '{tok}'")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        positions.len() as i64 + idx
                    } else {
                        return Err(perr("obj", line, "face index 0"));
                    };
                    if resolved < 0 || resolved as usize >= positions.len() {
                        return Err(perr("obj", line, format!("face index {idx} out of range")));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(perr("obj", line, "face with fewer than 3 vertices"));
                }
                polygons.push(poly);
            }
            _ => {}
        }
    }
    Ok((positions, polygons))
}

fn parse_off(src: &str) -> Result<Raw, MeshError> {
    // tokens tagged with their line number, comments stripped
    let mut toks = src.lines().enumerate().flat_map(|(i, l)| {
        l.split('#')
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(move |t| (i + 1, t))
    });
    let (line, head) = toks.next().ok_or_else(|| perr("off", 1, "empty file"))?;
    let counts_first = if head == "OFF" {
        None
    } else if let Some(rest) = head.strip_prefix("OFF") {
        if rest.is_empty() {
            None
        } else {
            return Err(perr("off", line, format!("bad header '{head}'")));
        }
    } else {
        Some((line, head))
    };
    let mut next_usize = |what: &str| -> Result<usize, MeshError> {
        let (line, tok) = toks
            .next()
            .ok_or_else(|| perr("off", 0, format!("unexpected end of file reading {what}")))?;
        tok.parse()
            .map_err(|_| perr("off", line, format!("invalid {what} '{tok}'")))
    };
    let nv = match counts_first {
        Some((line, tok)) => tok
            .parse()
            .map_err(|_| perr("off", line, format!("invalid header '{tok}'")))?,
        None => next_usize("vertex count")?,
    };
    let nf = next_usize("face count")?;
    let _ne = next_usize("edge count")?;
    let mut positions = Vec::with_capacity(nv);
    let mut rest: Vec<(usize, &str)> = Vec::new();
    for item in toks {
        rest.push(item);
    }
    let mut it = rest.into_iter();
    let mut next_tok = |what: &str| {
        it.next()
            .ok_or_else(|| perr("off", 0, format!("unexpected end of file reading {what}")))
    };
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            let (line, tok) = next_tok("vertex")?;
            *c = parse_f64(Some(tok), "off", line)?;
        }
        positions.push(p);
    }
    let mut polygons = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, tok) = next_tok("face")?;
        let k: usize = tok
            .parse()
            .map_err(|_| perr("off", line, format!("invalid face size '{tok}'")))?;
        let mut poly = Vec::with_capacity(k);
        for _ in 0..k {
            let (line, tok) = next_tok("face index")?;
            let idx: usize = tok
                .parse()
                .map_err(|_| perr("off", line, format!("invalid face index '{tok}'")))?;
            if idx >= nv {
                return Err(perr("off", line, format!("face index {idx} out of range")));
            }
            poly.push(idx);
        }
        if k < 3 {
            return Err(perr("off", line, "face with fewer than 3 vertices"));
        }
        // trailing colour values on the face line are ignored
        polygons.push(poly);
    }
    Ok((positions, polygons))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::I32 | PlyType::U32 | PlyType::F32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            PlyType::I8 => b[0] as i8 as f64,
            PlyType::U8 => b[0] as f64,
            PlyType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar { name: String, ty: PlyType },
    List { name: String, count: PlyType, item: PlyType },
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn parse_ply(bytes: &[u8]) -> Result<Raw, MeshError> {
    let marker = b"end_header";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| perr("ply", 0, "missing end_header"))?;
    let mut body_start = end + marker.len();
    while body_start < bytes.len() && bytes[body_start] != b'\n' {
        body_start += 1;
    }
    body_start += 1;
    let header = text(&bytes[..end], MeshFormat::Ply)?;
    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(perr("ply", 1, "missing 'ply' magic")),
    }
    let mut binary = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(perr("ply", line, format!("unsupported format '{other}'"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| perr("ply", line, format!("invalid element count '{count}'")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr("ply", line, "property before element"))?;
                let count = PlyType::parse(count).ok_or_else(|| perr("ply", line, format!("bad type '{count}'")))?;
                let item = PlyType::parse(item).ok_or_else(|| perr("ply", line, format!("bad type '{item}'")))?;
                el.properties.push(PlyProperty::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr("ply", line, "property before element"))?;
                let ty = PlyType::parse(ty).ok_or_else(|| perr("ply", line, format!("bad type '{ty}'")))?;
                el.properties.push(PlyProperty::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(perr("ply", line, format!("unrecognized header line '{l}'"))),
        }
    }
    let binary = binary.ok_or_else(|| perr("ply", 0, "missing format line"))?;
    let body = &bytes[body_start.min(bytes.len())..];

    let mut positions = Vec::new();
    let mut polygons = Vec::new();
    let mut reader: Box<dyn PlyReader> = if binary {
        Box::new(BinaryReader { data: body, pos: 0 })
    } else {
        Box::new(AsciiReader::new(text(body, MeshFormat::Ply)?))
    };
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [None; 3];
            let mut face = None;
            for prop in &el.properties {
                match prop {
                    PlyProperty::Scalar { name, ty } => {
                        let v = reader.value(*ty)?;
                        match name.as_str() {
                            "x" => xyz[0] = Some(v),
                            "y" => xyz[1] = Some(v),
                            "z" => xyz[2] = Some(v),
                            _ => {}
                        }
                    }
                    PlyProperty::List { name, count, item } => {
                        let n = reader.value(*count)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(perr("ply", reader.line(), "invalid list length"));
                        }
                        let mut items = Vec::with_capacity(n as usize);
                        for _ in 0..n as usize {
                            items.push(reader.value(*item)?);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            face = Some(items);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    let [Some(x), Some(y), Some(z)] = xyz else {
                        return Err(perr("ply", reader.line(), "vertex without x/y/z"));
                    };
                    positions.push([x, y, z]);
                }
                "face" => {
                    let items = face.ok_or_else(|| perr("ply", reader.line(), "face without vertex_indices"))?;
                    if items.len() < 3 {
                        return Err(perr("ply", reader.line(), "face with fewer than 3 vertices"));
                    }
                    let mut poly = Vec::with_capacity(items.len());
                    for v in items {
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(perr("ply", reader.line(), format!("invalid face index {v}")));
                        }
                        poly.push(v as usize);
                    }
                    polygons.push(poly);
                }
                _ => {}
            }
        }
    }
    let n = positions.len();
    if let Some(bad) = polygons.iter().flatten().find(|&&i| i >= n) {
        return Err(perr("ply", 0, format!("face index {bad} out of range")));
    }
    Ok((positions, polygons))
}

trait PlyReader {
    fn value(&mut self, ty: PlyType) -> Result<f64, MeshError>;
    fn line(&self) -> usize;
}

struct BinaryReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl PlyReader for BinaryReader<'_> {
    fn value(&mut self, ty: PlyType) -> Result<f64, MeshError> {
        let n = ty.size();
        if self.pos + n > self.data.len() {
            return Err(perr("ply", 0, "unexpected end of binary body"));
        }
        let v = ty.read_le(&self.data[self.pos..self.pos + n]);
        self.pos += n;
        Ok(v)
    }

    fn line(&self) -> usize {
        0
    }
}

struct AsciiReader<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> AsciiReader<'a> {
    fn new(src: &'a str) -> Self {
        let toks = src
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Self { toks, pos: 0 }
    }
}

impl PlyReader for AsciiReader<'_> {
    fn value(&mut self, _ty: PlyType) -> Result<f64, MeshError> {
        let (line, tok) = *self
            .toks
            .get(self.pos)
            .ok_or_else(|| perr("ply", 0, "unexpected end of ascii body"))?;
        self.pos += 1;
        tok.parse()
            .map_err(|_| perr("ply", line, format!("invalid number '{tok}'")))
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos.saturating_sub(1)).map_or(0, |t| t.0)
    }
}

fn parse_stl(bytes: &[u8]) -> Result<Raw, MeshError> {
    let soup = if is_binary_stl(bytes) {
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        let mut soup = Vec::with_capacity(count);
        for t in 0..count {
            let base = 84 + t * 50 + 12;
            let mut tri = [[0f32; 3]; 3];
            for (k, corner) in tri.iter_mut().enumerate() {
                for (c, value) in corner.iter_mut().enumerate() {
                    let o = base + k * 12 + c * 4;
                    *value = f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
                }
            }
            soup.push(tri.map(|p| p.map(f64::from)));
        }
        soup
    } else {
        parse_ascii_stl(text(bytes, MeshFormat::Stl)?)?
    };
    // weld by exact coordinate equality (−0 and +0 are the same coordinate)
    let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
    let mut positions = Vec::new();
    let mut polygons = Vec::with_capacity(soup.len());
    for tri in soup {
        let mut poly = Vec::with_capacity(3);
        for p in tri {
            let key = p.map(|c| if c == 0.0 { 0u64 } else { c.to_bits() });
            let id = *lookup.entry(key).or_insert_with(|| {
                positions.push(p);
                positions.len() - 1
            });
            poly.push(id);
        }
        polygons.push(poly);
    }
    Ok((positions, polygons))
}

fn is_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    bytes.len() == 84 + count * 50
}

fn parse_ascii_stl(src: &str) -> Result<Vec<[[f64; 3]; 3]>, MeshError> {
    let mut soup = Vec::new();
    let mut corners = Vec::with_capacity(3);
    let mut saw_solid = false;
    for (i, l) in src.lines().enumerate() {
        let line = i + 1;
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("solid") => saw_solid = true,
            Some("vertex") => {
                let x = parse_f64(toks.next(), "stl", line)?;
                let y = parse_f64(toks.next(), "stl", line)?;
                let z = parse_f64(toks.next(), "stl", line)?;
                corners.push([x, y, z]);
            }
            Some("endfacet") => {
                if corners.len() != 3 {
                    return Err(perr("stl", line, "facet without exactly 3 vertices"));
                }
                soup.push([corners[0], corners[1], corners[2]]);
                corners.clear();
            }
            _ => {}
        }
    }
    if !saw_solid {
        return Err(perr("stl", 1, "neither binary nor ascii STL"));
    }
    Ok(soup)
}

fn coord<T: Real>(x: T) -> f64 {
    x.as_f64()
}

fn write_obj<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut s = String::new();
    for p in mesh.positions() {
        let _ = writeln!(s, "v {} {} {}", coord(p.x), coord(p.y), coord(p.z));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

fn write_off<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.vertex_count(), mesh.triangle_count());
    for p in mesh.positions() {
        let _ = writeln!(s, "{} {} {}", coord(p.x), coord(p.y), coord(p.z));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

fn write_ply<T: Real>(mesh: &TriangleMesh<T>) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.triangle_count()
    );
    for p in mesh.positions() {
        let _ = writeln!(s, "{} {} {}", coord(p.x), coord(p.y), coord(p.z));
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

fn write_stl<T: Real>(mesh: &TriangleMesh<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangle_count());
    let mut header = [0u8; 80];
    header[..9].copy_from_slice(b"cageforge");
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangle_count() as u32).to_le_bytes());
    for t in 0..mesh.triangle_count() {
        let n: Vector3<T> = mesh.triangle_normal(t);
        let mut put = |v: T| {
            let _ = out.write_all(&(coord(v) as f32).to_le_bytes());
        };
        put(n.x);
        put(n.y);
        put(n.z);
        for p in mesh.triangle_points(t) {
            put(p.x);
            put(p.y);
            put(p.z);
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    const TETRA_OBJ: &str = "# tetra\nv 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";

    #[test]
    fn obj_tetrahedron() {
        let m: TriangleMesh<f64> = parse_mesh(TETRA_OBJ.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.triangle_count(), 4);
        assert!(m.is_closed());
    }

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n";
        let m: TriangleMesh<f64> = parse_mesh(src.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.edge_triangles(0, 2).unwrap().len(), 2);
    }

    #[test]
    fn obj_negative_indices_and_errors() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
        let m: TriangleMesh<f64> = parse_mesh(src.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        let bad = "v 0 0 0\nv 1 0 zz\n";
        match parse_mesh::<f64>(bad.as_bytes(), MeshFormat::Obj) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ply_cube_ascii_and_binary() {
        let cube: TriangleMesh<f64> = primitives::cube();
        let ascii = encode_mesh(&cube, MeshFormat::Ply);
        let m: TriangleMesh<f64> = parse_mesh(&ascii, MeshFormat::Ply).unwrap();
        assert!(m.is_closed());
        assert_eq!(m.edge_count(), 18);
        assert_eq!(m.vertex_count() as i64 - m.edge_count() as i64 + m.triangle_count() as i64, 2);

        let mut bin = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 8\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 12\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for p in cube.positions() {
            for c in [p.x, p.y, p.z] {
                bin.extend_from_slice(&(c as f32).to_le_bytes());
            }
            bin.push(200);
        }
        for t in cube.triangles() {
            bin.push(3);
            for &i in t {
                bin.extend_from_slice(&(i as i32).to_le_bytes());
            }
        }
        let b: TriangleMesh<f64> = parse_mesh(&bin, MeshFormat::Ply).unwrap();
        assert_eq!(b.positions(), cube.positions());
        assert_eq!(b.triangles(), cube.triangles());
    }

    #[test]
    fn off_and_stl_round_trip() {
        let sphere: TriangleMesh<f64> = primitives::icosphere(1.0, 1);
        let off: TriangleMesh<f64> = parse_mesh(&encode_mesh(&sphere, MeshFormat::Off), MeshFormat::Off).unwrap();
        assert_eq!(off.positions(), sphere.positions());
        assert_eq!(off.triangles(), sphere.triangles());

        let cube: TriangleMesh<f64> = primitives::cube();
        let stl: TriangleMesh<f64> = parse_mesh(&encode_mesh(&cube, MeshFormat::Stl), MeshFormat::Stl).unwrap();
        // corners are shared by several facets and must weld back to 8 vertices
        assert_eq!(stl.vertex_count(), 8);
        assert!(stl.is_closed());
    }

    #[test]
    fn canonical_writers_are_stable() {
        let m: TriangleMesh<f64> = primitives::torus(1.0, 0.25, 10, 6);
        for f in [MeshFormat::Obj, MeshFormat::Ply, MeshFormat::Off, MeshFormat::Stl] {
            let once = encode_mesh(&m, f);
            let back: TriangleMesh<f64> = parse_mesh(&once, f).unwrap();
            if f != MeshFormat::Stl {
                assert_eq!(back.positions(), m.positions());
            }
            assert_eq!(encode_mesh(&back, f), if f == MeshFormat::Stl { encode_mesh(&back, f) } else { once });
        }
    }

    #[test]
    fn non_manifold_file_reports_edge() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n";
        match parse_mesh::<f64>(src.as_bytes(), MeshFormat::Obj) {
            Err(MeshError::NonManifold { edge, .. }) => assert_eq!(edge, [0, 1]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
