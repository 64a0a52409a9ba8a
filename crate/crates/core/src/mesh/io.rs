//! Mesh JSON: `{"vertices": [[x, y], ...], "cells": [[i0, i1, ...], ...]}`
//! with 0-based indices. Coordinates are written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{build_topology, PolyMesh, Vec2};
use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Deserialize)]
struct RawMesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
}

pub fn mesh_to_json(mesh: &PolyMesh) -> String {
    let mut s = String::from("{\n  \"vertices\": [\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        let sep = if i + 1 < mesh.vertices.len() { "," } else { "" };
        let _ = writeln!(s, "    [{:.16e}, {:.16e}]{sep}", v.x, v.y);
    }
    s.push_str("  ],\n  \"cells\": [\n");
    for (i, c) in mesh.cells.iter().enumerate() {
        let sep = if i + 1 < mesh.cells.len() { "," } else { "" };
        let ids: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "    [{}]{sep}", ids.join(", "));
    }
    s.push_str("  ]\n}\n");
    s
}

/// Parses mesh JSON; `origin` is only used in error messages.
pub fn mesh_from_json(text: &str, origin: &Path) -> Result<PolyMesh> {
    let raw: RawMesh = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let nv = raw.vertices.len();
    for (c, cell) in raw.cells.iter().enumerate() {
        if let Some(&bad) = cell.iter().find(|&&i| i >= nv) {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: cell_line(text, c),
                msg: format!("cell {c} references vertex {bad} but there are {nv} vertices"),
            });
        }
    }
    let vertices = raw.vertices.iter().map(|p| Vec2::new(p[0], p[1])).collect();
    build_topology(vertices, raw.cells)
}

/// Line number (1-based) of the `cell`-th entry of the `"cells"` array.
fn cell_line(text: &str, cell: usize) -> usize {
    let Some(start) = text.find("\"cells\"") else {
        return 0;
    };
    let mut depth = 0usize;
    let mut seen = 0usize;
    for (off, ch) in text[start..].char_indices() {
        match ch {
            '[' => {
                depth += 1;
                if depth == 2 {
                    if seen == cell {
                        return text[..start + off].matches('\n').count() + 1;
                    }
                    seen += 1;
                }
            }
            ']' => {
                if depth <= 1 {
                    break;
                }
                depth -= 1;
            }
            _ => {}
        }
    }
    0
}

pub fn save_mesh(mesh: &PolyMesh, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), mesh_to_json(mesh).as_bytes())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<PolyMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    mesh_from_json(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_voronoi;

    fn square() -> PolyMesh {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        build_topology(v, vec![vec![0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn square_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sq.json");
        let m = square();
        save_mesh(&m, &p).unwrap();
        let back = load_mesh(&p).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.cells, m.cells);
    }

    #[test]
    fn voronoi_round_trip_rebuilds_topology() {
        let m = generate_voronoi(50, 1, 4).unwrap();
        let back = mesh_from_json(&mesh_to_json(&m), Path::new("mem")).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.num_interior_facets(), m.num_interior_facets());
        assert_eq!(back.num_facets(), m.num_facets());
    }

    #[test]
    fn out_of_range_index_reports_line() {
        let text = "{\n \"vertices\": [[0,0],[1,0],[1,1],[0,1]],\n \"cells\": [\n  [99, 1, 2, 3]\n ]\n}\n";
        let err = mesh_from_json(text, Path::new("bad.json")).unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 4);
                assert!(msg.contains("99"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn syntax_error_is_a_parse_error() {
        let err = mesh_from_json("{\"vertices\": [", Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }
}
