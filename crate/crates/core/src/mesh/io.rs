//! Text mesh formats: Wavefront OBJ (positions and polygon faces) and a plain
//! cell list for tetrahedral or otherwise non-surface meshes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{build_topology_from_cells, MeshTopology, VertexFeatures};
use crate::error::{Error, Result};

/// Positions and polygon faces read from an OBJ file, with the derived graph.
#[derive(Debug, Clone)]
pub struct ObjMesh {
    pub topology: MeshTopology,
    pub positions: VertexFeatures,
    /// 0-based vertex indices per face.
    pub faces: Vec<Vec<usize>>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_coords<'a>(line: usize, mut fields: impl Iterator<Item = &'a str>) -> Result<[f64; 3]> {
    let mut p = [0.0; 3];
    for (axis, slot) in p.iter_mut().enumerate() {
        let tok = fields
            .next()
            .ok_or_else(|| parse_error(line, format!("vertex record is missing coordinate {axis}")))?;
        *slot = tok
            .parse::<f64>()
            .map_err(|_| parse_error(line, format!("cannot parse coordinate `{tok}`")))?;
        if !slot.is_finite() {
            return Err(parse_error(line, format!("non-finite coordinate `{tok}`")));
        }
    }
    Ok(p)
}

/// Parses OBJ text. Normals, texture coordinates, groups and materials are
/// skipped; `f` and `l` records become cells.
pub fn parse_obj(text: &str) -> Result<ObjMesh> {
    let mut points: Vec<[f64; 3]> = Vec::new();
    // (line number, raw 1-based or negative indices)
    let mut raw_faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        match fields.next() {
            Some("v") => points.push(parse_coords(line, fields)?),
            Some(kind @ ("f" | "l")) => {
                let mut cell = Vec::new();
                for tok in fields {
                    let head = tok.split('/').next().unwrap_or("");
                    let v: i64 = head
                        .parse()
                        .map_err(|_| parse_error(line, format!("cannot parse index `{tok}`")))?;
                    if v == 0 {
                        return Err(parse_error(line, "OBJ indices are 1-based; found 0"));
                    }
                    cell.push(v);
                }
                if cell.len() < 2 {
                    return Err(parse_error(line, format!("`{kind}` record needs at least 2 vertices")));
                }
                raw_faces.push((line, cell));
            }
            _ => {}
        }
    }
    let n = points.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (line, cell) in raw_faces {
        let mut resolved = Vec::with_capacity(cell.len());
        for v in cell {
            let abs = if v > 0 { v - 1 } else { n as i64 + v };
            if abs < 0 || abs >= n as i64 {
                return Err(Error::InvalidInput(format!(
                    "line {line}: face index {v} is out of range for {n} vertices"
                )));
            }
            resolved.push(abs as usize);
        }
        faces.push(resolved);
    }
    let topology = build_topology_from_cells(n, &faces)?;
    let positions = VertexFeatures::positions(points)?;
    Ok(ObjMesh {
        topology,
        positions,
        faces,
    })
}

pub fn read_obj_mesh(path: impl AsRef<Path>) -> Result<ObjMesh> {
    parse_obj(&fs::read_to_string(path)?)
}

/// Loads an OBJ file as a topology plus 3-channel positions.
pub fn load_obj(path: impl AsRef<Path>) -> Result<(MeshTopology, VertexFeatures)> {
    let mesh = read_obj_mesh(path)?;
    Ok((mesh.topology, mesh.positions))
}

/// Serializes positions and faces as OBJ text. Coordinates use the shortest
/// representation that round-trips exactly.
pub fn obj_text(positions: &VertexFeatures, faces: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for v in 0..positions.num_vertices() {
        let p = positions.row(v);
        let _ = writeln!(out, "v {} {} {}", p[0], p.get(1).unwrap_or(&0.0), p.get(2).unwrap_or(&0.0));
    }
    for f in faces {
        out.push('f');
        for &v in f {
            let _ = write!(out, " {}", v + 1);
        }
        out.push('\n');
    }
    out
}

pub fn write_obj(path: impl AsRef<Path>, positions: &VertexFeatures, faces: &[Vec<usize>]) -> Result<()> {
    fs::write(path, obj_text(positions, faces))?;
    Ok(())
}

fn cell_arity(kind: &str) -> Option<Option<usize>> {
    match kind {
        "line" | "edge" => Some(Some(2)),
        "tri" | "triangle" => Some(Some(3)),
        "quad" | "tet" | "tetrahedron" => Some(Some(4)),
        "hex" => Some(Some(8)),
        "poly" | "mixed" => Some(None),
        _ => None,
    }
}

/// Parses the plain cell format:
///
/// ```text
/// verts N cells M celltype T
/// x y z        (N lines)
/// i j k l ...  (M lines, 0-based)
/// ```
///
/// `T` is one of `line`, `tri`, `quad`, `tet`, `hex` or `poly` (any arity >= 2).
pub fn parse_cell_text(text: &str) -> Result<(MeshTopology, VertexFeatures)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_error(1, "empty cell file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 6 || tokens[0] != "verts" || tokens[2] != "cells" || tokens[4] != "celltype" {
        return Err(parse_error(hline, "expected header `verts N cells M celltype T`"));
    }
    let n: usize = tokens[1]
        .parse()
        .map_err(|_| parse_error(hline, format!("bad vertex count `{}`", tokens[1])))?;
    let m: usize = tokens[3]
        .parse()
        .map_err(|_| parse_error(hline, format!("bad cell count `{}`", tokens[3])))?;
    let arity = cell_arity(tokens[5]).ok_or_else(|| parse_error(hline, format!("unknown cell type `{}`", tokens[5])))?;

    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, l) = lines
            .next()
            .ok_or_else(|| parse_error(hline, format!("file ends before {n} vertex lines")))?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_error(line, "vertex line must hold exactly 3 coordinates"));
        }
        points.push(parse_coords(line, fields.into_iter())?);
    }
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, l) = lines
            .next()
            .ok_or_else(|| parse_error(hline, format!("file ends before {m} cell lines")))?;
        let cell = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| parse_error(line, format!("bad index `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(k) = arity {
            if cell.len() != k {
                return Err(parse_error(line, format!("cell has {} indices, type {} needs {k}", cell.len(), tokens[5])));
            }
        }
        cells.push(cell);
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_error(line, "trailing content after the declared cells"));
    }
    let topology = build_topology_from_cells(n, &cells)?;
    Ok((topology, VertexFeatures::positions(points)?))
}

pub fn load_cell_file(path: impl AsRef<Path>) -> Result<(MeshTopology, VertexFeatures)> {
    parse_cell_text(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_obj() {
        let m = parse_obj("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n").unwrap();
        assert_eq!(m.topology.num_edges(), 3);
        assert_eq!(m.positions.num_vertices(), 3);
        assert_eq!(m.positions.channels(), 3);
        assert_eq!(m.positions.row(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn quad_face_is_a_clique() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        // 4 cycle edges plus the two diagonals
        assert_eq!(m.topology.num_edges(), 6);
        assert!(m.topology.has_edge(0, 2));
        assert!(m.topology.has_edge(1, 3));
    }

    #[test]
    fn negative_indices_resolve_from_end() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn out_of_range_face_is_input_error() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    }

    #[test]
    fn malformed_vertex_reports_line() {
        match parse_obj("v 0 0 0\nv 1 zero 0\n").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn obj_text_round_trips() {
        let m = parse_obj("v 0.1 -2.5 3e-7\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let again = parse_obj(&obj_text(&m.positions, &m.faces)).unwrap();
        assert_eq!(again.positions, m.positions);
        assert_eq!(again.faces, m.faces);
    }

    #[test]
    fn tet_cell_file() {
        let text = "verts 5 cells 2 celltype tet\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 1\n0 1 2 3\n1 2 3 4\n";
        let (t, p) = parse_cell_text(text).unwrap();
        assert_eq!(p.num_vertices(), 5);
        assert_eq!(t.degree(0), 3);
        assert_eq!(t.degree(1), 4);
        assert_eq!(t.num_edges(), 9);
    }

    #[test]
    fn cell_file_errors() {
        assert!(matches!(
            parse_cell_text("verts 3 cells 1 celltype tri\n0 0 0\n1 0 0\n0 1 0\n0 1\n"),
            Err(Error::Parse { line: 5, .. })
        ));
        assert!(matches!(
            parse_cell_text("verts 3 cells 1 celltype tri\n0 0 0\n1 0 0\n0 1 0\n0 1 7\n"),
            Err(Error::InvalidInput(_))
        ));
        assert!(parse_cell_text("vertices 3\n").is_err());
    }
}
