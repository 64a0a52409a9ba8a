use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::problems::ManufacturedProblem;
use crate::forms::{element_jump, facet_jump, gamma_cell, ModelParams, ProblemData};
use crate::mesh::Vec2;
use crate::polybasis::cell_quadrature;
use crate::system::Discretization;
use crate::vemspace::{interpolate, LocalSpace};

/// Squared contributions to the CIP-norm error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CipBreakdown {
    /// `ε Σ ‖∇(u - Π∇u_h)‖²`
    pub diffusion: f64,
    /// `h Σ ‖β·∇Π⁰(u - u_h)‖²`
    pub streamline: f64,
    /// `σ Σ ‖u - Π⁰u_h‖²`
    pub reaction: f64,
    /// `ε/(δh) Σ_{e ⊂ Γ} ‖Π^{0,e}(u - u_h)‖²`
    pub boundary: f64,
    /// `Σ_{e ⊂ Γ} ‖|β·n|^{1/2} Π⁰(u - u_h)‖²` on the inflow part
    pub inflow: f64,
    /// `J(u_I - u_h, u_I - u_h)`
    pub jump: f64,
}

impl CipBreakdown {
    pub fn total(&self) -> f64 {
        self.diffusion + self.streamline + self.reaction + self.boundary + self.inflow + self.jump
    }
}

/// Errors of one discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub h1: f64,
    pub l2: f64,
    pub cip: f64,
    pub breakdown: CipBreakdown,
}

/// `sqrt(Σ_E ‖∇(u - Π∇u_h)‖²)`.
pub fn error_h1(disc: &Discretization, uh: &DVector<f64>, exact: &dyn super::ExactSolution) -> f64 {
    cell_sums(disc, |s, rule| {
        let c = &s.pi_nabla * disc.dofmap.gather(s.cell, uh);
        rule.integrate(|x| (exact.grad(x) - s.basis.grad_poly(c.as_slice(), x)).norm_squared())
    })
    .sqrt()
}

/// `sqrt(Σ_E ‖u - Π⁰u_h‖²)`.
pub fn error_l2(disc: &Discretization, uh: &DVector<f64>, exact: &dyn super::ExactSolution) -> f64 {
    cell_sums(disc, |s, rule| {
        let c = &s.pi0 * disc.dofmap.gather(s.cell, uh);
        rule.integrate(|x| (exact.value(x) - s.basis.eval_poly(c.as_slice(), x)).powi(2))
    })
    .sqrt()
}

/// Sums a per-cell quantity in cell order; the rule has the data exactness.
fn cell_sums(
    disc: &Discretization,
    f: impl Fn(&LocalSpace, &crate::polybasis::QuadratureRule) -> f64 + Sync,
) -> f64 {
    let ex = disc.data_exactness();
    let parts: Vec<f64> = disc
        .spaces
        .par_iter()
        .map(|s| f(s, &cell_quadrature(disc.mesh, s.cell, ex)))
        .collect();
    parts.iter().sum()
}

/// L² projection of the exact solution onto `P_k(E)`.
fn exact_projection(s: &LocalSpace, rule: &crate::polybasis::QuadratureRule, u: &dyn Fn(Vec2) -> f64) -> DVector<f64> {
    let mut rhs = DVector::zeros(s.basis.len());
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        rhs += DVector::from_vec(s.basis.eval(x)) * (w * u(x));
    }
    // the element mass matrix is exact, its rule integrates degree 2k
    s.mass.clone().cholesky().map(|c| c.solve(&rhs)).unwrap_or(rhs)
}

/// All three error measures. The jump and boundary-projection terms need
/// DoFs of `u`, for which its DoF interpolant is used.
pub fn error_report(
    disc: &Discretization,
    uh: &DVector<f64>,
    problem: &ManufacturedProblem,
    params: &ModelParams,
) -> ErrorReport {
    let mesh = disc.mesh;
    let map = &disc.dofmap;
    let ex = disc.data_exactness();
    let h = mesh.h;
    let exact = problem.exact.as_ref();
    let u = |x: Vec2| exact.value(x);
    let beta = |x: Vec2| problem.advection(x);
    let ui = interpolate(mesh, map, &u, ex);
    let diff = &ui - uh;

    let per_cell: Vec<CipBreakdown> = disc
        .spaces
        .par_iter()
        .map(|s| {
            let rule = cell_quadrature(mesh, s.cell, ex);
            let local = map.gather(s.cell, uh);
            let cn = &s.pi_nabla * &local;
            let c0 = &s.pi0 * &local;
            let p0u = exact_projection(s, &rule, &u);
            let dp = &p0u - &c0;
            let mut out = CipBreakdown::default();
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let gn = exact.grad(x) - s.basis.grad_poly(cn.as_slice(), x);
                out.diffusion += w * gn.norm_squared();
                out.reaction += w * (exact.value(x) - s.basis.eval_poly(c0.as_slice(), x)).powi(2);
                out.streamline += w * beta(x).dot(&s.basis.grad_poly(dp.as_slice(), x)).powi(2);
            }
            out.diffusion *= params.eps;
            out.reaction *= params.sigma;
            out.streamline *= h;

            let d = map.gather(s.cell, &diff);
            for lf in s.facets.iter().filter(|lf| lf.boundary) {
                let pe = &lf.edge_proj * &d;
                out.boundary += (pe.transpose() * &lf.mass * &pe)[0];
                out.inflow += lf.quad.integrate(|x| {
                    let speed = (-beta(x).dot(&lf.normal)).max(0.0);
                    speed * s.basis.eval_poly(dp.as_slice(), x).powi(2)
                });
            }
            out.boundary *= params.eps / (params.nitsche_delta(s.k) * h);
            let js = element_jump(s, gamma_cell(s, &beta, params.kappa_cell));
            out.jump = (d.transpose() * js * &d)[0];
            out
        })
        .collect();

    let interior: Vec<usize> = (0..mesh.num_facets()).filter(|&f| !mesh.facets[f].is_boundary()).collect();
    let facet_jumps: Vec<f64> = interior
        .par_iter()
        .map(|&f| {
            let rec = &mesh.facets[f];
            let j = facet_jump(mesh, f, &disc.spaces, &beta, params.kappa_facet).expect("interior facet");
            let (a, b) = (map.gather(rec.owner, &diff), map.gather(rec.neighbor.unwrap(), &diff));
            let v = DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied());
            (v.transpose() * j * &v)[0]
        })
        .collect();

    let mut total = CipBreakdown::default();
    for c in &per_cell {
        total.diffusion += c.diffusion;
        total.streamline += c.streamline;
        total.reaction += c.reaction;
        total.boundary += c.boundary;
        total.inflow += c.inflow;
        total.jump += c.jump;
    }
    total.jump += facet_jumps.iter().sum::<f64>();

    ErrorReport {
        h1: (total.diffusion / params.eps).sqrt(),
        l2: (total.reaction / params.sigma).sqrt(),
        cip: total.total().max(0.0).sqrt(),
        breakdown: total,
    }
}
