use serde::Serialize;

use super::geometry::{in_kernel, point_in_polygon, point_segment_distance};
use super::{PolyMesh, Vec2};

/// Shape-regularity diagnostics for a mesh.
#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    /// min over cells and their facets of `h_e / h_E`
    pub min_facet_ratio: f64,
    /// min over cells of (inscribed-ball radius estimate) / `h_E`
    pub min_inradius_ratio: f64,
    /// min over cells of `h_E / h`
    pub min_size_ratio: f64,
    /// cells whose centroid does not see the whole boundary
    pub non_star_cells: usize,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    ShortFacet { cell: usize, ratio: f64 },
    ThinCell { cell: usize, ratio: f64 },
    SmallCell { cell: usize, ratio: f64 },
    NotStarShaped { cell: usize },
}

/// Largest distance to the boundary over a handful of interior sample
/// points: the centroid and points on the rays towards each vertex.
fn inradius_estimate(pts: &[Vec2], centroid: Vec2) -> f64 {
    let n = pts.len();
    let dist = |p: Vec2| {
        (0..n)
            .map(|i| point_segment_distance(p, pts[i], pts[(i + 1) % n]))
            .fold(f64::MAX, f64::min)
    };
    let mut best: f64 = 0.0;
    let mut consider = |p: Vec2| {
        if point_in_polygon(p, pts) {
            best = best.max(dist(p));
        }
    };
    consider(centroid);
    for v in pts {
        for t in [0.25, 0.5] {
            consider(centroid + (v - centroid) * t);
        }
    }
    best
}

pub fn quality_report(mesh: &PolyMesh, rho: f64) -> QualityReport {
    let mut report = QualityReport {
        min_facet_ratio: f64::MAX,
        min_inradius_ratio: f64::MAX,
        min_size_ratio: f64::MAX,
        non_star_cells: 0,
        violations: Vec::new(),
    };
    for (c, g) in mesh.geometry.iter().enumerate() {
        let pts = mesh.cell_points(c);
        let facet_ratio = mesh.cell_facets[c]
            .iter()
            .map(|&f| mesh.facets[f].length / g.diameter)
            .fold(f64::MAX, f64::min);
        let inr = inradius_estimate(&pts, g.centroid) / g.diameter;
        let size = g.diameter / mesh.h;
        report.min_facet_ratio = report.min_facet_ratio.min(facet_ratio);
        report.min_inradius_ratio = report.min_inradius_ratio.min(inr);
        report.min_size_ratio = report.min_size_ratio.min(size);
        if facet_ratio < rho {
            report.violations.push(Violation::ShortFacet { cell: c, ratio: facet_ratio });
        }
        if inr < rho {
            report.violations.push(Violation::ThinCell { cell: c, ratio: inr });
        }
        if size < rho {
            report.violations.push(Violation::SmallCell { cell: c, ratio: size });
        }
        if !in_kernel(g.centroid, &pts, 1e-12) {
            report.non_star_cells += 1;
            report.violations.push(Violation::NotStarShaped { cell: c });
        }
    }
    report
}
