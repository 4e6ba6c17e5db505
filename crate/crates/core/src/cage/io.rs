//! Plain-text coordinate files.
//!
//! ```text
//! Mean Value Coordinates
//! <template vertices> <cage vertices>
//! w_00 w_01 ...
//! ```
//!
//! Green files append each row's face coordinates after its vertex
//! coordinates, in cage triangle order. Values are written with 17
//! significant digits; magnitudes below `1e-12` are written as zero.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{CageError, CoordinateMatrix, CoordinateMethod};
use crate::scalar::Real;

const ZERO_BELOW: f64 = 1e-12;

fn push_value(out: &mut String, x: f64) {
    let x = if x.abs() < ZERO_BELOW { 0.0 } else { x };
    write!(out, "{x:.16e}").expect("writing to a String");
}

pub fn to_text<T: Real>(coords: &CoordinateMatrix<T>) -> String {
    let mut out = String::new();
    out.push_str(coords.method.title());
    out.push('\n');
    writeln!(out, "{} {}", coords.template_count(), coords.cage_vertex_count()).expect("writing to a String");
    for i in 0..coords.template_count() {
        let values = coords.vertex.row(i).iter().chain(coords.face.row(i).iter()).map(|x| x.as_f64()).collect::<Vec<_>>();
        for (k, x) in values.into_iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            push_value(&mut out, x);
        }
        out.push('\n');
    }
    out
}

pub fn write_coords<T: Real>(coords: &CoordinateMatrix<T>, path: impl AsRef<Path>) -> Result<(), CageError> {
    std::fs::write(path, to_text(coords))?;
    Ok(())
}

pub fn read_coords<T: Real>(path: impl AsRef<Path>) -> Result<CoordinateMatrix<T>, CageError> {
    parse_coords(&std::fs::read_to_string(path)?)
}

fn schema(line: usize, message: impl Into<String>) -> CageError {
    CageError::Schema {
        line,
        message: message.into(),
    }
}

pub fn parse_coords<T: Real>(text: &str) -> Result<CoordinateMatrix<T>, CageError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, title) = lines.next().ok_or_else(|| schema(1, "missing method line"))?;
    let method = CoordinateMethod::from_title(title.trim()).ok_or_else(|| {
        schema(
            1,
            format!("unknown method '{}' (expected 'Mean Value Coordinates' or 'Green Coordinates')", title.trim()),
        )
    })?;
    let (_, counts) = lines.next().ok_or_else(|| schema(2, "missing counts line"))?;
    let parts: Vec<&str> = counts.split_whitespace().collect();
    if parts.len() != 2 {
        return Err(schema(2, "expected '<template vertices> <cage vertices>'"));
    }
    let parse_count = |s: &str| s.parse::<usize>().map_err(|_| schema(2, format!("'{s}' is not a count")));
    let (nt, nc) = (parse_count(parts[0])?, parse_count(parts[1])?);

    let mut values: Vec<f64> = Vec::new();
    let mut row_len: Option<usize> = None;
    let mut rows = 0usize;
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| schema(no, format!("'{tok}' is not a number")))?;
            values.push(x);
        }
        let len = values.len() - before;
        match row_len {
            None => row_len = Some(len),
            Some(r) if r != len => {
                return Err(CageError::CountMismatch(format!("line {no} has {len} values, previous rows have {r}")));
            }
            _ => {}
        }
        rows += 1;
    }
    if rows != nt {
        return Err(CageError::CountMismatch(format!("header declares {nt} template vertices, file has {rows} rows")));
    }
    let len = row_len.unwrap_or(nc);
    let nf = match method {
        CoordinateMethod::MeanValue if len != nc => {
            return Err(CageError::CountMismatch(format!("rows have {len} values, header declares {nc} cage vertices")));
        }
        CoordinateMethod::MeanValue => 0,
        CoordinateMethod::Green if len <= nc => {
            return Err(CageError::CountMismatch(format!(
                "Green rows need {nc} vertex values followed by face values, got {len}"
            )));
        }
        CoordinateMethod::Green => len - nc,
    };
    let at = |i: usize, k: usize| T::lit(values[i * len + k]);
    Ok(CoordinateMatrix {
        method,
        vertex: DMatrix::from_fn(nt, nc, &at),
        face: DMatrix::from_fn(nt, nf, |i, t| at(i, nc + t)),
    })
}
