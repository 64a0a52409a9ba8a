//! Local nonconforming virtual element space of order `k` on one polygon.
//!
//! Degrees of freedom are scaled moments:
//! facet moments `(1/|e|) ∫_e v ((s - s_e)/h_e)^ℓ`, `ℓ < k`, and interior
//! moments `(1/|E|) ∫_E v m_α`, `|α| <= k - 2`. Local ordering is facet-major
//! in cell-loop order, then interior moments in graded-lex order.
//!
//! Only polynomial projections of virtual functions are ever formed; each is
//! stored as a dense matrix from local DoFs to scaled-monomial coefficients.

mod interp;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{PolyMesh, Vec2};
use crate::polybasis::{
    cell_quadrature, default_exactness, dim_p2, exponent_index, facet_basis, facet_quadrature,
    monomial_mass_matrix, QuadratureRule, ScaledMonomialBasis1D, ScaledMonomialBasis2D,
};

pub use interp::{
    interpolate, jump_ratio_per_cell, local_moments_of_poly, oswald_interpolant, CellPolynomials,
};

/// Placement of the local degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub k: usize,
    pub n_facets: usize,
    pub n_interior: usize,
}

impl DofLayout {
    pub fn new(k: usize, n_facets: usize) -> Self {
        DofLayout {
            k,
            n_facets,
            n_interior: dim_p2(k as isize - 2),
        }
    }

    /// `k n_E + k(k-1)/2`
    pub fn len(&self) -> usize {
        self.k * self.n_facets + self.n_interior
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn facet_dof(&self, local_facet: usize, l: usize) -> usize {
        local_facet * self.k + l
    }

    pub fn interior_dof(&self, j: usize) -> usize {
        self.n_facets * self.k + j
    }
}

/// A facet as seen from one of its cells.
#[derive(Debug, Clone)]
pub struct LocalFacet {
    pub facet: usize,
    /// outward with respect to the cell
    pub normal: Vec2,
    pub length: f64,
    pub boundary: bool,
    pub basis: ScaledMonomialBasis1D,
    pub quad: QuadratureRule,
    /// 1D scaled-monomial mass matrix, `k × k`
    pub mass: DMatrix<f64>,
    /// local DoFs → coefficients of the facet L² projection onto `P_{k-1}(e)`
    pub edge_proj: DMatrix<f64>,
}

impl LocalFacet {
    /// Row vector `r` with `r · dofs = ∫_e p v` for a polynomial trace
    /// `p ∈ P_{k-1}(e)` sampled at the facet quadrature points.
    pub fn pairing_row(&self, p_at_quad: &[f64]) -> DMatrix<f64> {
        let mut b = DVector::zeros(self.basis.count);
        let mut q = vec![0.0; self.basis.count];
        for ((&t, &w), &p) in self.quad.local.iter().zip(&self.quad.weights).zip(p_at_quad) {
            self.basis.eval_local_into(t, &mut q);
            for (bi, qi) in b.iter_mut().zip(&q) {
                *bi += w * p * qi;
            }
        }
        let row = b.transpose() * &self.edge_proj;
        DMatrix::from_row_slice(1, row.ncols(), row.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct LocalSpace {
    pub cell: usize,
    pub k: usize,
    pub layout: DofLayout,
    pub area: f64,
    pub diameter: f64,
    pub centroid: Vec2,
    /// scaled monomials of degree `<= k`
    pub basis: ScaledMonomialBasis2D,
    pub quad: QuadratureRule,
    pub facets: Vec<LocalFacet>,
    /// `H = ∫ m_α m_β`
    pub mass: DMatrix<f64>,
    /// DoF values of each monomial, `N_E × dim P_k`
    pub dofs_of_monomials: DMatrix<f64>,
    /// H¹-seminorm projection onto `P_k`
    pub pi_nabla: DMatrix<f64>,
    /// L² projection onto `P_k`
    pub pi0: DMatrix<f64>,
    /// components of the L² projection of the gradient onto `P_{k-1}²`
    pub pi0_grad: [DMatrix<f64>; 2],
}

impl LocalSpace {
    pub fn new(mesh: &PolyMesh, cell: usize, k: usize) -> Result<Self> {
        Self::with_exactness(mesh, cell, k, default_exactness(k))
    }

    pub fn with_exactness(mesh: &PolyMesh, cell: usize, k: usize, exactness: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Contract("order k must be at least 1".into()));
        }
        let g = &mesh.geometry[cell];
        let basis = ScaledMonomialBasis2D::new(k, g.centroid, g.diameter);
        let quad = cell_quadrature(mesh, cell, exactness);
        let layout = DofLayout::new(k, mesh.cell_facets[cell].len());
        let ndof = layout.len();
        let nk = basis.len();

        let mass = monomial_mass_matrix(&basis, &quad).map_err(|e| Error::ElementGeometry {
            cell,
            msg: e.to_string(),
        })?;

        let mut facets = Vec::with_capacity(layout.n_facets);
        for (i, &f) in mesh.cell_facets[cell].iter().enumerate() {
            let rec = &mesh.facets[f];
            let fb = facet_basis(rec, k);
            let fq = facet_quadrature(mesh, rec, exactness);
            let mut m1 = DMatrix::zeros(k, k);
            let mut q = vec![0.0; k];
            for (&t, &w) in fq.local.iter().zip(&fq.weights) {
                fb.eval_local_into(t, &mut q);
                for a in 0..k {
                    for b in 0..k {
                        m1[(a, b)] += w * q[a] * q[b];
                    }
                }
            }
            let inv = m1.clone().try_inverse().ok_or_else(|| Error::ElementGeometry {
                cell,
                msg: format!("singular facet mass matrix on facet {f}"),
            })?;
            let mut edge_proj = DMatrix::zeros(k, ndof);
            edge_proj
                .columns_mut(layout.facet_dof(i, 0), k)
                .copy_from(&(inv * rec.length));
            facets.push(LocalFacet {
                facet: f,
                normal: rec.normal_from(cell),
                length: rec.length,
                boundary: rec.is_boundary(),
                basis: fb,
                quad: fq,
                mass: m1,
                edge_proj,
            });
        }

        let mut space = LocalSpace {
            cell,
            k,
            layout,
            area: g.area,
            diameter: g.diameter,
            centroid: g.centroid,
            basis,
            quad,
            facets,
            mass,
            dofs_of_monomials: DMatrix::zeros(ndof, nk),
            pi_nabla: DMatrix::zeros(nk, ndof),
            pi0: DMatrix::zeros(nk, ndof),
            pi0_grad: [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)],
        };
        space.dofs_of_monomials = space.compute_dofs_of_monomials();
        space.pi_nabla = space.compute_pi_nabla()?;
        space.pi0 = space.compute_pi0()?;
        space.pi0_grad = space.compute_pi0_grad()?;
        Ok(space)
    }

    pub fn ndofs(&self) -> usize {
        self.layout.len()
    }

    fn geometry_error(&self, what: &str) -> Error {
        Error::ElementGeometry {
            cell: self.cell,
            msg: format!("singular {what} system"),
        }
    }

    fn compute_dofs_of_monomials(&self) -> DMatrix<f64> {
        let nk = self.basis.len();
        let mut d = DMatrix::zeros(self.ndofs(), nk);
        let mut m = vec![0.0; nk];
        let mut q = vec![0.0; self.k];
        for (i, lf) in self.facets.iter().enumerate() {
            for ((&x, &t), &w) in lf.quad.points.iter().zip(&lf.quad.local).zip(&lf.quad.weights) {
                self.basis.eval_into(x, &mut m);
                lf.basis.eval_local_into(t, &mut q);
                for l in 0..self.k {
                    let row = self.layout.facet_dof(i, l);
                    for a in 0..nk {
                        d[(row, a)] += w * q[l] * m[a] / lf.length;
                    }
                }
            }
        }
        for j in 0..self.layout.n_interior {
            let row = self.layout.interior_dof(j);
            for a in 0..nk {
                d[(row, a)] = self.mass[(j, a)] / self.area;
            }
        }
        d
    }

    /// `∫_E ∇m_α · ∇(v - Π∇v) = 0` for `|α| >= 1`, closed by
    /// `∫_∂E (v - Π∇v) = 0`. The right-hand side is integrated by parts so
    /// that only DoFs appear.
    fn compute_pi_nabla(&self) -> Result<DMatrix<f64>> {
        let (nk, ndof) = (self.basis.len(), self.ndofs());
        let h = self.diameter;
        let exps = self.basis.exponents();

        let mut g = DMatrix::zeros(nk, nk);
        for (&x, &w) in self.quad.points.iter().zip(&self.quad.weights) {
            let gr = self.basis.grad(x);
            for a in 1..nk {
                for b in 0..nk {
                    g[(a, b)] += w * gr[a].dot(&gr[b]);
                }
            }
        }
        let mut rhs = DMatrix::zeros(nk, ndof);
        for (i, lf) in self.facets.iter().enumerate() {
            rhs[(0, self.layout.facet_dof(i, 0))] += lf.length;
            for (&x, &w) in lf.quad.points.iter().zip(&lf.quad.weights) {
                let m = self.basis.eval(x);
                for b in 0..nk {
                    g[(0, b)] += w * m[b];
                }
            }
        }
        for (a, &(ea, eb)) in exps.iter().enumerate().skip(1) {
            // -∫ Δm_α v
            let mut lap = |c: f64, pa: usize, pb: usize| {
                let col = self.layout.interior_dof(exponent_index(pa, pb));
                rhs[(a, col)] -= c * self.area / (h * h);
            };
            if ea >= 2 {
                lap((ea * (ea - 1)) as f64, ea - 2, eb);
            }
            if eb >= 2 {
                lap((eb * (eb - 1)) as f64, ea, eb - 2);
            }
            // Σ_e ∫_e (∇m_α · n) v
            for lf in &self.facets {
                let flux: Vec<f64> = lf
                    .quad
                    .points
                    .iter()
                    .map(|&x| self.basis.grad(x)[a].dot(&lf.normal))
                    .collect();
                let row = lf.pairing_row(&flux);
                let mut r = rhs.row_mut(a);
                r += row.row(0);
            }
        }
        g.lu().solve(&rhs).ok_or_else(|| self.geometry_error("H¹ projection"))
    }

    /// Moments against `P_{k-2}` come from interior DoFs, the remaining ones
    /// from `Π∇` (enhancement constraint).
    fn compute_pi0(&self) -> Result<DMatrix<f64>> {
        let nk = self.basis.len();
        let low = self.layout.n_interior;
        let hp = &self.mass * &self.pi_nabla;
        let mut rhs = DMatrix::zeros(nk, self.ndofs());
        for a in 0..nk {
            if a < low {
                rhs[(a, self.layout.interior_dof(a))] = self.area;
            } else {
                rhs.row_mut(a).copy_from(&hp.row(a));
            }
        }
        self.mass
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| self.geometry_error("L² projection"))
    }

    /// `∫ m_α ∂_d v = -∫ ∂_d m_α v + Σ_e ∫_e m_α n_d v` for `|α| <= k - 1`.
    fn compute_pi0_grad(&self) -> Result<[DMatrix<f64>; 2]> {
        let n1 = dim_p2(self.k as isize - 1);
        let h = self.diameter;
        let exps = &self.basis.exponents()[..n1];
        let h1 = self.mass.view((0, 0), (n1, n1)).clone_owned();
        let chol = h1
            .cholesky()
            .ok_or_else(|| self.geometry_error("gradient projection"))?;
        let mut out = [DMatrix::zeros(n1, self.ndofs()), DMatrix::zeros(n1, self.ndofs())];
        for (d, slot) in out.iter_mut().enumerate() {
            let mut rhs = DMatrix::zeros(n1, self.ndofs());
            for (a, &(ea, eb)) in exps.iter().enumerate() {
                let (p, pa, pb) = if d == 0 {
                    (ea, ea.wrapping_sub(1), eb)
                } else {
                    (eb, ea, eb.wrapping_sub(1))
                };
                if p > 0 {
                    let col = self.layout.interior_dof(exponent_index(pa, pb));
                    rhs[(a, col)] -= p as f64 / h * self.area;
                }
                for lf in &self.facets {
                    let trace: Vec<f64> = lf
                        .quad
                        .points
                        .iter()
                        .map(|&x| self.basis.eval(x)[a] * lf.normal[d])
                        .collect();
                    let row = lf.pairing_row(&trace);
                    let mut r = rhs.row_mut(a);
                    r += row.row(0);
                }
            }
            *slot = chol.solve(&rhs);
        }
        Ok(out)
    }

    /// Local DoFs of the polynomial with scaled-monomial coefficients `c`.
    pub fn dofs_of_poly(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.dofs_of_monomials * coeffs
    }

    /// `N_E × N_E` map from DoFs of `v` to DoFs of `(I - P)v` for a
    /// projector matrix `P` onto `P_k`.
    pub fn complement(&self, projector: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.ndofs(), self.ndofs()) - &self.dofs_of_monomials * projector
    }

    /// Values of all monomials at each cell quadrature point, one row per point.
    pub fn basis_table(&self, quad: &QuadratureRule) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(quad.len(), self.basis.len());
        for (r, &x) in quad.points.iter().enumerate() {
            let v = self.basis.eval(x);
            for (c, vi) in v.into_iter().enumerate() {
                t[(r, c)] = vi;
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_topology, generate_octag, generate_voronoi};
    use rand::{Rng, SeedableRng};

    fn unit_square() -> PolyMesh {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        build_topology(v, vec![vec![0, 1, 2, 3]]).unwrap()
    }

    fn random_coeffs(n: usize, rng: &mut impl Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn layout_counts() {
        assert_eq!(DofLayout::new(1, 5).len(), 5);
        assert_eq!(DofLayout::new(2, 5).len(), 11);
        // pentagon of order 3: fifteen facet moments plus three interior ones
        assert_eq!(DofLayout::new(3, 5).len(), 18);
        assert_eq!(DofLayout::new(3, 5).n_interior, 3);
    }

    #[test]
    fn constant_is_reproduced() {
        let m = unit_square();
        for k in 1..=3 {
            let s = LocalSpace::new(&m, 0, k).unwrap();
            let mut c = DVector::zeros(s.basis.len());
            c[0] = 1.0;
            let d = s.dofs_of_poly(&c);
            let p = &s.pi_nabla * &d;
            assert!((p - &c).amax() < 1e-12);
            assert!((&s.pi0_grad[0] * &d).amax() < 1e-13);
            assert!((&s.pi0_grad[1] * &d).amax() < 1e-13);
        }
    }

    #[test]
    fn linear_monomial_on_square() {
        // the DoF vector of m_(1,0) is built from analytic facet moments:
        // m = (x - 1/2)/√2; on the bottom/top facets (oriented +x/-x) the
        // moment of order 0 is 0 and of order 1 is ±1/(12√2); on the right
        // facet it is 1/(2√2), on the left -1/(2√2)
        let m = unit_square();
        let s = LocalSpace::new(&m, 0, 2).unwrap();
        let r2 = 2f64.sqrt();
        let mut dofs = DVector::zeros(s.ndofs());
        dofs[s.layout.facet_dof(0, 1)] = 1.0 / (12.0 * r2);
        dofs[s.layout.facet_dof(1, 0)] = 0.5 / r2;
        dofs[s.layout.facet_dof(2, 1)] = -1.0 / (12.0 * r2);
        dofs[s.layout.facet_dof(3, 0)] = -0.5 / r2;
        dofs[s.layout.interior_dof(0)] = 0.0;
        let c = &s.pi_nabla * &dofs;
        let mut expect = DVector::zeros(6);
        expect[1] = 1.0;
        assert!((c - expect).amax() < 1e-12);
        let gx = &s.pi0_grad[0] * &dofs;
        assert!((gx[0] - 1.0 / r2).abs() < 1e-12);
        assert!(gx.rows(1, 2).amax() < 1e-12);
        assert!((&s.pi0_grad[1] * &dofs).amax() < 1e-12);
    }

    #[test]
    fn projectors_reproduce_polynomials() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let meshes = [generate_octag(3, 0.1, 2).unwrap(), generate_voronoi(12, 1, 2).unwrap()];
        for mesh in &meshes {
            for k in 1..=3 {
                for cell in 0..mesh.num_cells() {
                    let s = LocalSpace::new(mesh, cell, k).unwrap();
                    let c = random_coeffs(s.basis.len(), &mut rng);
                    let d = s.dofs_of_poly(&c);
                    assert!((&s.pi_nabla * &d - &c).amax() < 1e-11);
                    assert!((&s.pi0 * &d - &c).amax() < 1e-11);
                    // gradient coefficients of c in the degree k-1 basis
                    let n1 = dim_p2(k as isize - 1);
                    for dir in 0..2 {
                        let mut gc = DVector::zeros(n1);
                        for (a, &(ea, eb)) in s.basis.exponents().iter().enumerate() {
                            let (p, pa, pb) = if dir == 0 { (ea, ea.wrapping_sub(1), eb) } else { (eb, ea, eb.wrapping_sub(1)) };
                            if p > 0 {
                                gc[exponent_index(pa, pb)] += c[a] * p as f64 / s.diameter;
                            }
                        }
                        // gradient coefficients carry a 1/h_E factor
                        let err = (&s.pi0_grad[dir] * &d - &gc).amax() / gc.amax().max(1.0);
                        assert!(err < 1e-11, "k={k} cell={cell} dir={dir} err={err:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn pi0_equals_pi_nabla_for_k1() {
        let mesh = generate_voronoi(20, 1, 9).unwrap();
        for cell in 0..mesh.num_cells() {
            let s = LocalSpace::new(&mesh, cell, 1).unwrap();
            assert!((&s.pi0 - &s.pi_nabla).amax() < 1e-12);
        }
    }

    #[test]
    fn pi0_mean_matches_interior_moment() {
        let mesh = generate_octag(2, 0.1, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for k in 2..=3 {
            let s = LocalSpace::new(&mesh, 3, k).unwrap();
            let dofs = random_coeffs(s.ndofs(), &mut rng);
            let c = &s.pi0 * &dofs;
            // ∫ Π⁰v = ∫ v = |E| μ⁰
            let integral = (s.mass.row(0) * &c)[0];
            assert!((integral - s.area * dofs[s.layout.interior_dof(0)]).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_mean_of_pi_nabla() {
        let mesh = generate_voronoi(10, 0, 5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for k in 1..=3 {
            let s = LocalSpace::new(&mesh, 4, k).unwrap();
            let dofs = random_coeffs(s.ndofs(), &mut rng);
            let c = &s.pi_nabla * &dofs;
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for (i, lf) in s.facets.iter().enumerate() {
                lhs += lf.quad.integrate(|x| s.basis.eval_poly(c.as_slice(), x));
                rhs += lf.length * dofs[s.layout.facet_dof(i, 0)];
            }
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_projection_of_constant_and_moments() {
        let mesh = generate_octag(2, 0.05, 1).unwrap();
        let s = LocalSpace::new(&mesh, 0, 2).unwrap();
        let mut c = DVector::zeros(s.basis.len());
        c[0] = 1.0;
        let d = s.dofs_of_poly(&c);
        for lf in &s.facets {
            let p = &lf.edge_proj * &d;
            assert!((p[0] - 1.0).abs() < 1e-13 && p[1].abs() < 1e-13);
        }
        // moments (1, 0) on one facet project to the constant 1 there
        let mut d = DVector::zeros(s.ndofs());
        d[s.layout.facet_dof(2, 0)] = 1.0;
        let p = &s.facets[2].edge_proj * &d;
        assert!((p[0] - 1.0).abs() < 1e-13 && p[1].abs() < 1e-13);
    }

    #[test]
    fn edge_projection_residual_is_orthogonal() {
        let mesh = generate_voronoi(16, 1, 8).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for k in 1..=3 {
            let s = LocalSpace::new(&mesh, 5, k).unwrap();
            let c = random_coeffs(s.basis.len(), &mut rng);
            let d = s.dofs_of_poly(&c);
            for lf in &s.facets {
                let pe = &lf.edge_proj * &d;
                for l in 0..k {
                    let r = lf.quad.integrate(|x| {
                        let q = lf.basis.eval(x);
                        let proj: f64 = q.iter().zip(pe.iter()).map(|(a, b)| a * b).sum();
                        (s.basis.eval_poly(c.as_slice(), x) - proj) * q[l]
                    });
                    assert!(r.abs() < 1e-12, "k={k} l={l} residual {r:e}");
                }
            }
        }
    }
}
