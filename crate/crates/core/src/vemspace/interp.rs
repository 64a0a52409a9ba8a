use nalgebra::DVector;
use rayon::prelude::*;

use super::{DofLayout, LocalSpace};
use crate::mesh::{PolyMesh, Vec2};
use crate::polybasis::{cell_quadrature, facet_basis, facet_quadrature, ScaledMonomialBasis2D};
use crate::system::GlobalDofMap;

/// Piecewise polynomials of degree `k`: one coefficient vector per cell in
/// that cell's scaled monomial basis.
#[derive(Debug, Clone)]
pub struct CellPolynomials {
    pub k: usize,
    pub coeffs: Vec<DVector<f64>>,
}

impl CellPolynomials {
    pub fn basis(mesh: &PolyMesh, cell: usize, k: usize) -> ScaledMonomialBasis2D {
        let g = &mesh.geometry[cell];
        ScaledMonomialBasis2D::new(k, g.centroid, g.diameter)
    }

    pub fn eval(&self, mesh: &PolyMesh, cell: usize, x: Vec2) -> f64 {
        Self::basis(mesh, cell, self.k).eval_poly(self.coeffs[cell].as_slice(), x)
    }
}

/// DoF interpolant of a smooth function: every facet and interior moment is
/// computed by quadrature of exactness `exactness`. Facet moments are
/// evaluated once per facet, so they are single valued.
pub fn interpolate(
    mesh: &PolyMesh,
    dofmap: &GlobalDofMap,
    u: &(dyn Fn(Vec2) -> f64 + Sync),
    exactness: usize,
) -> DVector<f64> {
    let k = dofmap.k;
    let mut out = DVector::zeros(dofmap.n_dofs);
    let facet_moments: Vec<Vec<f64>> = mesh
        .facets
        .par_iter()
        .map(|rec| {
            let b = facet_basis(rec, k);
            let q = facet_quadrature(mesh, rec, exactness);
            let mut m = vec![0.0; k];
            let mut qv = vec![0.0; k];
            for ((&x, &t), &w) in q.points.iter().zip(&q.local).zip(&q.weights) {
                let ux = u(x);
                b.eval_local_into(t, &mut qv);
                for (mi, qi) in m.iter_mut().zip(&qv) {
                    *mi += w * ux * qi / rec.length;
                }
            }
            m
        })
        .collect();
    for (f, m) in facet_moments.iter().enumerate() {
        for (l, &v) in m.iter().enumerate() {
            out[dofmap.facet_dof(f, l)] = v;
        }
    }
    if dofmap.n_interior > 0 {
        let interior: Vec<Vec<f64>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let g = &mesh.geometry[c];
                let b = ScaledMonomialBasis2D::new(k - 2, g.centroid, g.diameter);
                let q = cell_quadrature(mesh, c, exactness);
                let mut m = vec![0.0; b.len()];
                let mut bv = vec![0.0; b.len()];
                for (&x, &w) in q.points.iter().zip(&q.weights) {
                    let ux = u(x);
                    b.eval_into(x, &mut bv);
                    for (mi, bi) in m.iter_mut().zip(&bv) {
                        *mi += w * ux * bi / g.area;
                    }
                }
                m
            })
            .collect();
        for (c, m) in interior.iter().enumerate() {
            for (j, &v) in m.iter().enumerate() {
                out[dofmap.interior_dof(c, j)] = v;
            }
        }
    }
    out
}

/// Local DoFs (cell ordering) of the polynomial `p|_E`.
pub fn local_moments_of_poly(mesh: &PolyMesh, cell: usize, polys: &CellPolynomials) -> DVector<f64> {
    let k = polys.k;
    let layout = DofLayout::new(k, mesh.cell_facets[cell].len());
    let basis = CellPolynomials::basis(mesh, cell, k);
    let c = polys.coeffs[cell].as_slice();
    let mut out = DVector::zeros(layout.len());
    let mut qv = vec![0.0; k];
    for (i, &f) in mesh.cell_facets[cell].iter().enumerate() {
        let rec = &mesh.facets[f];
        let b = facet_basis(rec, k);
        let q = facet_quadrature(mesh, rec, 2 * k);
        for ((&x, &t), &w) in q.points.iter().zip(&q.local).zip(&q.weights) {
            let px = basis.eval_poly(c, x);
            b.eval_local_into(t, &mut qv);
            for (l, &ql) in qv.iter().enumerate() {
                out[layout.facet_dof(i, l)] += w * px * ql / rec.length;
            }
        }
    }
    if layout.n_interior > 0 {
        let g = &mesh.geometry[cell];
        let low = ScaledMonomialBasis2D::new(k - 2, g.centroid, g.diameter);
        let q = cell_quadrature(mesh, cell, 2 * k);
        let mut bv = vec![0.0; low.len()];
        for (&x, &w) in q.points.iter().zip(&q.weights) {
            let px = basis.eval_poly(c, x);
            low.eval_into(x, &mut bv);
            for (j, &bj) in bv.iter().enumerate() {
                out[layout.interior_dof(j)] += w * px * bj / g.area;
            }
        }
    }
    out
}

/// Averaging interpolant of a discontinuous piecewise polynomial into the
/// nonconforming space: facet moments are the mean of the two one-sided
/// moments on interior facets and the one-sided moment on the boundary;
/// interior moments are the cell's own.
pub fn oswald_interpolant(mesh: &PolyMesh, dofmap: &GlobalDofMap, polys: &CellPolynomials) -> DVector<f64> {
    let local: Vec<DVector<f64>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| local_moments_of_poly(mesh, c, polys))
        .collect();
    let mut out = DVector::zeros(dofmap.n_dofs);
    let mut hits = vec![0u8; dofmap.n_dofs];
    for (c, m) in local.iter().enumerate() {
        for (i, &g) in dofmap.cell_dofs[c].iter().enumerate() {
            out[g] += m[i];
            hits[g] += 1;
        }
    }
    for (v, &n) in out.iter_mut().zip(&hits) {
        if n > 1 {
            *v /= n as f64;
        }
    }
    out
}

/// Per-cell ratio `‖(I - π)p‖²_E / (h_E Σ_e ‖[[p]]‖²_e)` over interior facets
/// of `E`. The numerator is the computable reaction-form norm
/// `‖Π⁰d‖² + |E| S((I - Π⁰)d, (I - Π⁰)d)` of `d = (I - π)p`. Cells without
/// any jump give `None`.
pub fn jump_ratio_per_cell(
    mesh: &PolyMesh,
    spaces: &[LocalSpace],
    dofmap: &GlobalDofMap,
    polys: &CellPolynomials,
) -> Vec<Option<f64>> {
    let pi_p = oswald_interpolant(mesh, dofmap, polys);
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let s = &spaces[c];
            let own = local_moments_of_poly(mesh, c, polys);
            let glob = DVector::from_iterator(s.ndofs(), dofmap.cell_dofs[c].iter().map(|&g| pi_p[g]));
            let d = own - glob;
            let pc = &s.pi0 * &d;
            let comp = s.complement(&s.pi0) * &d;
            let num = (pc.transpose() * &s.mass * &pc)[0] + s.area * comp.norm_squared();
            let mut jump = 0.0;
            for lf in s.facets.iter().filter(|lf| !lf.boundary) {
                let rec = &mesh.facets[lf.facet];
                let other = if rec.owner == c { rec.neighbor.unwrap() } else { rec.owner };
                jump += lf.quad.integrate(|x| {
                    let j = polys.eval(mesh, c, x) - polys.eval(mesh, other, x);
                    j * j
                });
            }
            (jump > 0.0).then(|| num / (s.diameter * jump))
        })
        .collect()
}
