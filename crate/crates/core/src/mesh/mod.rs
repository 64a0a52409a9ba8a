//! Polygonal meshes of the unit square.
//!
//! A [`PolyMesh`] stores counterclockwise vertex loops plus a facet table in
//! which every edge appears once. Interior facets know both incident cells;
//! the stored normal always points out of the owner cell.

mod family;
pub mod geometry;
mod io;
mod octag;
mod quality;
mod voronoi;

use std::collections::HashMap;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub use family::{MeshFamily, MeshRegistry, OctagFamily, VoronoiFamily};
pub use geometry::{point_in_polygon, polygon_area, polygon_centroid, polygon_diameter, segments_cross};
pub use io::{load_mesh, mesh_from_json, mesh_to_json, save_mesh};
pub use octag::generate_octag;
pub use quality::{quality_report, QualityReport, Violation};
pub use voronoi::{generate_voronoi, voronoi_from_seeds};

pub type Vec2 = Vector2<f64>;

/// One edge of the mesh skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetRecord {
    /// Endpoints in the owner's counterclockwise traversal order. This order
    /// also fixes the facet's intrinsic arc-length coordinate.
    pub vertices: [usize; 2],
    pub owner: usize,
    pub neighbor: Option<usize>,
    /// Unit normal pointing out of `owner`.
    pub normal: Vec2,
    pub length: f64,
    pub midpoint: Vec2,
}

impl FacetRecord {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    /// Unit tangent from `vertices[0]` to `vertices[1]`.
    pub fn tangent(&self) -> Vec2 {
        Vec2::new(-self.normal.y, self.normal.x)
    }

    /// Outward normal as seen from `cell`.
    pub fn normal_from(&self, cell: usize) -> Vec2 {
        if cell == self.owner {
            self.normal
        } else {
            -self.normal
        }
    }
}

/// Cached per-cell geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: Vec2,
    pub diameter: f64,
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Vec2>,
    pub cells: Vec<Vec<usize>>,
    pub facets: Vec<FacetRecord>,
    /// `cell_facets[c][i]` is the facet joining `cells[c][i]` and `cells[c][i+1]`.
    pub cell_facets: Vec<Vec<usize>>,
    pub geometry: Vec<CellGeometry>,
    /// Maximum element diameter.
    pub h: f64,
}

impl PolyMesh {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_interior_facets(&self) -> usize {
        self.facets.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.is_boundary()).count()
    }

    pub fn cell_points(&self, cell: usize) -> Vec<Vec2> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Euler characteristic `V - E + C`; equals 1 for a mesh of a disc.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.facets.len() as i64 + self.cells.len() as i64
    }
}

/// Builds the facet table and the geometric caches from raw vertex loops.
///
/// Loops must be simple and counterclockwise. Every edge must be shared by
/// at most two cells, traversed in opposite directions, and no vertex may
/// hang in the middle of a neighboring edge.
pub fn build_topology(vertices: Vec<Vec2>, cells: Vec<Vec<usize>>) -> Result<PolyMesh> {
    let nv = vertices.len();
    let mut geometry = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        if cell.len() < 3 {
            return Err(Error::MalformedMesh(format!(
                "cell {c} has {} vertices",
                cell.len()
            )));
        }
        if let Some(&bad) = cell.iter().find(|&&v| v >= nv) {
            return Err(Error::MalformedMesh(format!(
                "cell {c} references vertex {bad}, but only {nv} vertices exist"
            )));
        }
        let pts: Vec<Vec2> = cell.iter().map(|&v| vertices[v]).collect();
        let area = polygon_area(&pts);
        if area <= 0.0 {
            return Err(Error::MalformedMesh(format!(
                "cell {c} has non-positive signed area {area:e}"
            )));
        }
        geometry.push(CellGeometry {
            area,
            centroid: polygon_centroid(&pts),
            diameter: polygon_diameter(&pts),
        });
    }

    let mut facets: Vec<FacetRecord> = Vec::new();
    let mut cell_facets = Vec::with_capacity(cells.len());
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    for (c, cell) in cells.iter().enumerate() {
        let n = cell.len();
        let mut local = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (cell[i], cell[(i + 1) % n]);
            if a == b {
                return Err(Error::MalformedMesh(format!(
                    "cell {c} repeats vertex {a}"
                )));
            }
            let key = (a.min(b), a.max(b));
            match lookup.get(&key) {
                None => {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let d = pb - pa;
                    let length = d.norm();
                    if length == 0.0 {
                        return Err(Error::MalformedMesh(format!(
                            "cell {c} has a zero-length edge {a}-{b}"
                        )));
                    }
                    let t = d / length;
                    lookup.insert(key, facets.len());
                    local.push(facets.len());
                    facets.push(FacetRecord {
                        vertices: [a, b],
                        owner: c,
                        neighbor: None,
                        normal: Vec2::new(t.y, -t.x),
                        length,
                        midpoint: (pa + pb) * 0.5,
                    });
                }
                Some(&f) => {
                    let rec = &mut facets[f];
                    if rec.neighbor.is_some() || rec.owner == c {
                        return Err(Error::MalformedMesh(format!(
                            "edge {a}-{b} is shared by more than two cells"
                        )));
                    }
                    if rec.vertices != [b, a] {
                        return Err(Error::MalformedMesh(format!(
                            "cells {} and {c} traverse edge {a}-{b} in the same direction",
                            rec.owner
                        )));
                    }
                    rec.neighbor = Some(c);
                    local.push(f);
                }
            }
        }
        cell_facets.push(local);
    }

    check_hanging_vertices(&vertices, &facets)?;

    let h = geometry.iter().map(|g| g.diameter).fold(0.0, f64::max);
    Ok(PolyMesh {
        vertices,
        cells,
        facets,
        cell_facets,
        geometry,
        h,
    })
}

/// A boundary facet with a vertex lying strictly inside it is half of a
/// T-junction: the matching edge on the other side was split differently.
fn check_hanging_vertices(vertices: &[Vec2], facets: &[FacetRecord]) -> Result<()> {
    let boundary: Vec<&FacetRecord> = facets.iter().filter(|f| f.is_boundary()).collect();
    if boundary.is_empty() {
        return Ok(());
    }
    let grid = geometry::PointGrid::new(vertices, 64);
    for f in boundary {
        let (a, b) = (vertices[f.vertices[0]], vertices[f.vertices[1]]);
        let tol = 1e-10 * f.length.max(1.0);
        for v in grid.query_segment(a, b, tol) {
            if v == f.vertices[0] || v == f.vertices[1] {
                continue;
            }
            let p = vertices[v];
            let t = (p - a).dot(&(b - a)) / (f.length * f.length);
            if t <= 1e-12 || t >= 1.0 - 1e-12 {
                continue;
            }
            let dist = ((p - a) - (b - a) * t).norm();
            if dist <= tol {
                return Err(Error::MalformedMesh(format!(
                    "vertex {v} hangs on edge {}-{} (T-junction)",
                    f.vertices[0], f.vertices[1]
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolyMesh {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        build_topology(v, vec![vec![0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn single_square_has_four_boundary_facets() {
        let m = unit_square();
        assert_eq!(m.num_facets(), 4);
        assert_eq!(m.num_interior_facets(), 0);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert!((m.h - 2f64.sqrt()).abs() < 1e-15);
        // outward normals of the square
        let n0 = m.facets[0].normal;
        assert!((n0 - Vec2::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn two_triangles_share_one_facet() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let m = build_topology(v, vec![vec![0, 1, 2], vec![0, 2, 3]]).unwrap();
        assert_eq!(m.num_facets(), 5);
        assert_eq!(m.num_interior_facets(), 1);
        let f = m.facets.iter().find(|f| !f.is_boundary()).unwrap();
        assert_eq!(f.normal_from(f.neighbor.unwrap()), -f.normal);
        assert!((f.normal.norm() - 1.0).abs() < 1e-14);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn three_cells_on_one_edge_is_malformed() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 1.0),
            Vec2::new(0.5, -1.0),
            Vec2::new(0.5, 0.5),
        ];
        let err = build_topology(v, vec![vec![0, 1, 2], vec![1, 0, 3], vec![0, 1, 4]]);
        assert!(matches!(err, Err(Error::MalformedMesh(_))));
    }

    #[test]
    fn t_junction_is_malformed() {
        // Left cell is a plain square, the right side is split into two cells
        // sharing a vertex on the left square's right edge.
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(2.0, 0.5),
        ];
        let cells = vec![vec![0, 1, 2, 3], vec![1, 4, 7, 6], vec![6, 7, 5, 2]];
        let err = build_topology(v, cells).unwrap_err();
        assert!(err.to_string().contains("T-junction"), "{err}");
    }

    #[test]
    fn clockwise_cell_is_rejected() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ];
        assert!(build_topology(v, vec![vec![0, 1, 2, 3]]).is_err());
    }
}
