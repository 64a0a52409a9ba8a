//! Scaled monomial bases and quadrature on polygons and segments.

mod monomial;
mod quadrature;

pub use monomial::{dim_p2, exponent_index, exponents, ScaledMonomialBasis1D, ScaledMonomialBasis2D};
pub use quadrature::{
    ear_clip, gauss_legendre, monomial_mass_matrix, polygon_quadrature, segment_quadrature,
    QuadratureRule,
};

use crate::mesh::{FacetRecord, PolyMesh};

/// Default exactness of element and facet rules for order `k`.
pub fn default_exactness(k: usize) -> usize {
    2 * k + 2
}

/// Quadrature on a mesh cell.
pub fn cell_quadrature(mesh: &PolyMesh, cell: usize, exactness: usize) -> QuadratureRule {
    polygon_quadrature(&mesh.cell_points(cell), exactness)
}

/// Gauss–Legendre rule on a facet, points ordered along the facet's own
/// orientation. `local` holds the coordinate of [`facet_basis`].
pub fn facet_quadrature(mesh: &PolyMesh, facet: &FacetRecord, exactness: usize) -> QuadratureRule {
    let (a, b) = (mesh.vertices[facet.vertices[0]], mesh.vertices[facet.vertices[1]]);
    let mut rule = segment_quadrature(a, b, exactness);
    if (b - a).dot(&facet.tangent()) < 0.0 {
        rule.local.iter_mut().for_each(|t| *t = -*t);
    }
    rule
}

/// 1D scaled monomials of a facet, `count` functions.
pub fn facet_basis(facet: &FacetRecord, count: usize) -> ScaledMonomialBasis1D {
    ScaledMonomialBasis1D::new(count, facet.midpoint, facet.tangent(), facet.length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_octag, generate_voronoi};

    #[test]
    fn facet_rule_coordinates_match_geometry() {
        for mesh in [generate_octag(3, 0.1, 4).unwrap(), generate_voronoi(40, 1, 4).unwrap()] {
            for rec in &mesh.facets {
                let b = facet_basis(rec, 2);
                let q = facet_quadrature(&mesh, rec, 5);
                for (&x, &t) in q.points.iter().zip(&q.local) {
                    assert!((b.coord(x) - t).abs() < 1e-9, "{} vs {t}", b.coord(x));
                }
            }
        }
    }
}
