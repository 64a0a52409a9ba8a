//! Dense local matrices and load vectors of the stabilized scheme.
//!
//! Every matrix is indexed `[test, trial]`: entry `(i, j)` is the form
//! evaluated at trial function `φ_j` and test function `φ_i`, so that the
//! assembled system reads `A u = F`. Facet-pair matrices act on the
//! concatenated DoFs `(owner, neighbor)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{PolyMesh, Vec2};
use crate::polybasis::{dim_p2, QuadratureRule};
use crate::vemspace::{LocalFacet, LocalSpace};

/// Scalar coefficients of the problem and the stabilization constants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub eps: f64,
    pub sigma: f64,
    /// Nitsche penalty scale at `k = 1`; order `k` uses `delta / k²`
    pub delta: f64,
    /// facet gradient-jump constant
    pub kappa_facet: f64,
    /// element jump constant
    pub kappa_cell: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            eps: 1e-5,
            sigma: 1.0,
            delta: 0.1,
            kappa_facet: 0.025,
            kappa_cell: 0.025,
        }
    }
}

impl ModelParams {
    /// Nitsche parameter at order `k`. The inverse trace constant of
    /// `P_{k-1}` grows like `k²`, and a fixed `delta` stops being coercive
    /// for `k ≥ 2` on the reference meshes.
    pub fn nitsche_delta(&self, k: usize) -> f64 {
        self.delta / (k * k) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("sigma", self.sigma), ("delta", self.delta)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("kappa_facet", self.kappa_facet), ("kappa_cell", self.kappa_cell)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Advection field, source and Dirichlet datum of a boundary value problem
/// `-ε Δu + β·∇u + σu = f` in the unit square, `u = g` on its boundary.
pub trait ProblemData: Send + Sync {
    fn advection(&self, x: Vec2) -> Vec2;
    fn source(&self, x: Vec2) -> f64;
    fn dirichlet(&self, x: Vec2) -> f64;
}

/// Values of all scaled monomials at `x` times the projector: the row vector
/// mapping DoFs to the value of the projected polynomial at `x`.
fn projected_values(s: &LocalSpace, projector: &DMatrix<f64>, x: Vec2) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(1, s.basis.len(), &s.basis.eval(x));
    m * projector
}

/// Row vector mapping DoFs to `∇(P v)(x) · n`.
fn projected_flux(s: &LocalSpace, projector: &DMatrix<f64>, x: Vec2, n: Vec2) -> DMatrix<f64> {
    let g: Vec<f64> = s.basis.grad(x).iter().map(|g| g.dot(&n)).collect();
    DMatrix::from_row_slice(1, g.len(), &g) * projector
}

/// Row vector mapping DoFs to `Π⁰_{k-1}∇v(x) · n`.
fn gradient_projection_flux(s: &LocalSpace, x: Vec2, n: Vec2) -> DMatrix<f64> {
    let n1 = dim_p2(s.k as isize - 1);
    let m = &s.basis.eval(x)[..n1];
    let mut row = DMatrix::zeros(1, s.ndofs());
    for (d, nd) in [n.x, n.y].into_iter().enumerate() {
        let g = &s.pi0_grad[d];
        for j in 0..s.ndofs() {
            let v: f64 = (0..n1).map(|a| m[a] * g[(a, j)]).sum();
            row[(0, j)] += nd * v;
        }
    }
    row
}

/// 1D basis values at quadrature point `i` times the facet projection:
/// DoFs → `Π^{0,e}v(x_i)`.
fn edge_values(lf: &LocalFacet, i: usize) -> DMatrix<f64> {
    let q = lf.basis.eval_local(lf.quad.local[i]);
    DMatrix::from_row_slice(1, q.len(), &q) * &lf.edge_proj
}

/// Diffusion matrix: `Σ_d (Π⁰_{k-1}∂_d)ᵀ M (Π⁰_{k-1}∂_d)` plus the dofi-dofi
/// stabilization of `(I - Π∇)`.
pub fn local_diffusion(s: &LocalSpace) -> DMatrix<f64> {
    let n1 = dim_p2(s.k as isize - 1);
    let m1 = s.mass.view((0, 0), (n1, n1));
    let mut a = DMatrix::zeros(s.ndofs(), s.ndofs());
    for g in &s.pi0_grad {
        a += g.transpose() * m1 * g;
    }
    let d = s.complement(&s.pi_nabla);
    a += d.transpose() * d;
    a
}

/// Advection matrix `∫_E (β·∇Π⁰u) Π⁰v`.
pub fn local_advection(s: &LocalSpace, beta: &dyn Fn(Vec2) -> Vec2) -> DMatrix<f64> {
    let nk = s.basis.len();
    let mut w = DMatrix::zeros(nk, nk);
    for (&x, &wq) in s.quad.points.iter().zip(&s.quad.weights) {
        let b = beta(x);
        let m = s.basis.eval(x);
        let g = s.basis.grad(x);
        for c in 0..nk {
            let bg = wq * b.dot(&g[c]);
            if bg == 0.0 {
                continue;
            }
            for (r, &mr) in m.iter().enumerate() {
                w[(r, c)] += mr * bg;
            }
        }
    }
    s.pi0.transpose() * w * &s.pi0
}

/// Reaction matrix `∫ Π⁰u Π⁰v + |E| S((I - Π⁰)u, (I - Π⁰)v)`.
pub fn local_reaction(s: &LocalSpace) -> DMatrix<f64> {
    let d = s.complement(&s.pi0);
    s.pi0.transpose() * &s.mass * &s.pi0 + d.transpose() * d * s.area
}

/// `max |β|` over the given rules' points.
fn max_speed<'a>(rules: impl IntoIterator<Item = &'a QuadratureRule>, beta: &dyn Fn(Vec2) -> Vec2) -> f64 {
    rules
        .into_iter()
        .flat_map(|r| r.points.iter())
        .map(|&x| beta(x).norm())
        .fold(0.0, f64::max)
}

/// `γ_E = κ_E ‖β‖_∞(∂E)`, the sup taken over facet quadrature points.
pub fn gamma_cell(s: &LocalSpace, beta: &dyn Fn(Vec2) -> Vec2, kappa: f64) -> f64 {
    kappa * max_speed(s.facets.iter().map(|lf| &lf.quad), beta)
}

/// `γ_e = κ_e ‖β‖_∞(e)`, the sup taken over facet quadrature points.
pub fn gamma_facet(lf: &LocalFacet, beta: &dyn Fn(Vec2) -> Vec2, kappa: f64) -> f64 {
    kappa * max_speed([&lf.quad], beta)
}

/// Element part of the jump stabilization, `γ_E h_E S((I - Π⁰)u, (I - Π⁰)v)`.
pub fn element_jump(s: &LocalSpace, gamma: f64) -> DMatrix<f64> {
    let d = s.complement(&s.pi0);
    d.transpose() * d * (gamma * s.diameter)
}

/// The two local spaces of an interior facet, ordered (owner, neighbor),
/// together with each side's local facet index.
fn facet_sides<'a>(
    mesh: &PolyMesh,
    facet: usize,
    spaces: &'a [LocalSpace],
) -> Result<[(&'a LocalSpace, usize); 2]> {
    let rec = &mesh.facets[facet];
    let neighbor = rec.neighbor.ok_or_else(|| {
        Error::Contract(format!("facet {facet} lies on the boundary; interior facet expected"))
    })?;
    let side = |c: usize| -> Result<(&'a LocalSpace, usize)> {
        let s = &spaces[c];
        let i = s
            .facets
            .iter()
            .position(|lf| lf.facet == facet)
            .ok_or_else(|| Error::Contract(format!("cell {c} does not own facet {facet}")))?;
        Ok((s, i))
    };
    Ok([side(rec.owner)?, side(neighbor)?])
}

/// Advective jump-average coupling of an interior facet,
/// `-∫_e β·[[Π⁰u]] {Π⁰v}`, on the paired DoFs (owner, neighbor).
pub fn facet_dh(
    mesh: &PolyMesh,
    facet: usize,
    spaces: &[LocalSpace],
    beta: &dyn Fn(Vec2) -> Vec2,
) -> Result<DMatrix<f64>> {
    let [(so, io), (sn, _)] = facet_sides(mesh, facet, spaces)?;
    let (no, nn) = (so.ndofs(), sn.ndofs());
    let lf = &so.facets[io];
    let mut d = DMatrix::zeros(no + nn, no + nn);
    for (&x, &w) in lf.quad.points.iter().zip(&lf.quad.weights) {
        let bn = beta(x).dot(&lf.normal);
        if bn == 0.0 {
            continue;
        }
        let po = projected_values(so, &so.pi0, x);
        let pn = projected_values(sn, &sn.pi0, x);
        let mut jump = DMatrix::zeros(1, no + nn);
        jump.columns_mut(0, no).copy_from(&po);
        jump.columns_mut(no, nn).copy_from(&(-pn.clone()));
        let mut avg = DMatrix::zeros(1, no + nn);
        avg.columns_mut(0, no).copy_from(&(po * 0.5));
        avg.columns_mut(no, nn).copy_from(&(pn * 0.5));
        d -= avg.transpose() * jump * (w * bn);
    }
    Ok(d)
}

/// Gradient-jump penalty of an interior facet,
/// `γ_e h_e² ∫_e [[∇Π⁰u]] [[∇Π⁰v]]`, on the paired DoFs (owner, neighbor).
pub fn facet_jump(
    mesh: &PolyMesh,
    facet: usize,
    spaces: &[LocalSpace],
    beta: &dyn Fn(Vec2) -> Vec2,
    kappa: f64,
) -> Result<DMatrix<f64>> {
    let [(so, io), (sn, _)] = facet_sides(mesh, facet, spaces)?;
    let (no, nn) = (so.ndofs(), sn.ndofs());
    let lf = &so.facets[io];
    let gamma = gamma_facet(lf, beta, kappa);
    let mut j = DMatrix::zeros(no + nn, no + nn);
    if gamma == 0.0 {
        return Ok(j);
    }
    let n = lf.normal;
    for (&x, &w) in lf.quad.points.iter().zip(&lf.quad.weights) {
        let mut row = DMatrix::zeros(1, no + nn);
        row.columns_mut(0, no).copy_from(&projected_flux(so, &so.pi0, x, n));
        row.columns_mut(no, nn).copy_from(&(-projected_flux(sn, &sn.pi0, x, n)));
        j += row.transpose() * row * w;
    }
    j *= gamma * lf.length * lf.length;
    Ok(j)
}

/// The four Nitsche blocks of a boundary cell.
#[derive(Debug, Clone)]
pub struct NitscheBlocks {
    /// `-ε ⟨Π⁰_{k-1}∇u·n, v⟩`
    pub consistency: DMatrix<f64>,
    /// `-ε ⟨u, Π⁰_{k-1}∇v·n⟩`
    pub symmetry: DMatrix<f64>,
    /// `ε/(δ h_E) Σ_e ⟨Π^{0,e}u, Π^{0,e}v⟩`
    pub penalty: DMatrix<f64>,
    /// `⟨|β·n| Π⁰u, Π⁰v⟩` on the inflow part
    pub inflow: DMatrix<f64>,
}

impl NitscheBlocks {
    pub fn total(&self) -> DMatrix<f64> {
        &self.consistency + &self.symmetry + &self.penalty + &self.inflow
    }
}

fn require_boundary(s: &LocalSpace) -> Result<()> {
    if s.facets.iter().any(|lf| lf.boundary) {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "cell {} has no boundary facet; Nitsche terms apply to boundary cells only",
            s.cell
        )))
    }
}

/// Nitsche blocks of a boundary cell. Pairings of a polynomial flux with the
/// virtual trace go through the facet projection, which is exact.
pub fn nitsche_blocks(s: &LocalSpace, beta: &dyn Fn(Vec2) -> Vec2, params: &ModelParams) -> Result<NitscheBlocks> {
    require_boundary(s)?;
    let n = s.ndofs();
    let mut consistency = DMatrix::zeros(n, n);
    let mut penalty = DMatrix::zeros(n, n);
    let mut inflow = DMatrix::zeros(n, n);
    for lf in s.facets.iter().filter(|lf| lf.boundary) {
        for (i, (&x, &w)) in lf.quad.points.iter().zip(&lf.quad.weights).enumerate() {
            let flux = gradient_projection_flux(s, x, lf.normal);
            let trace = edge_values(lf, i);
            consistency -= trace.transpose() * flux * (params.eps * w);
            let inflow_speed = (-beta(x).dot(&lf.normal)).max(0.0);
            if inflow_speed > 0.0 {
                let p = projected_values(s, &s.pi0, x);
                inflow += p.transpose() * &p * (w * inflow_speed);
            }
        }
        penalty += lf.edge_proj.transpose() * &lf.mass * &lf.edge_proj;
    }
    penalty *= params.eps / (params.nitsche_delta(s.k) * s.diameter);
    Ok(NitscheBlocks {
        symmetry: consistency.transpose(),
        consistency,
        penalty,
        inflow,
    })
}

/// Sum of the Nitsche blocks.
pub fn nitsche_matrix(s: &LocalSpace, beta: &dyn Fn(Vec2) -> Vec2, params: &ModelParams) -> Result<DMatrix<f64>> {
    Ok(nitsche_blocks(s, beta, params)?.total())
}

/// Load vector: `∫ f Π⁰v` on `rule` plus, on boundary cells, the three
/// Dirichlet terms matching the Nitsche blocks.
pub fn local_load(
    s: &LocalSpace,
    data: &dyn ProblemData,
    params: &ModelParams,
    rule: &QuadratureRule,
) -> DVector<f64> {
    let nk = s.basis.len();
    let mut fm = DVector::zeros(nk);
    let mut m = vec![0.0; nk];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let f = data.source(x);
        if f == 0.0 {
            continue;
        }
        s.basis.eval_into(x, &mut m);
        for (a, &ma) in m.iter().enumerate() {
            fm[a] += w * f * ma;
        }
    }
    let mut load = s.pi0.transpose() * fm;
    let penalty = params.eps / (params.nitsche_delta(s.k) * s.diameter);
    for lf in s.facets.iter().filter(|lf| lf.boundary) {
        for (i, (&x, &w)) in lf.quad.points.iter().zip(&lf.quad.weights).enumerate() {
            let g = data.dirichlet(x);
            if g == 0.0 {
                continue;
            }
            let flux = gradient_projection_flux(s, x, lf.normal);
            let trace = edge_values(lf, i);
            let mut row = flux * (-params.eps) + trace * penalty;
            let inflow_speed = (-data.advection(x).dot(&lf.normal)).max(0.0);
            if inflow_speed > 0.0 {
                row += projected_values(s, &s.pi0, x) * inflow_speed;
            }
            load += row.transpose() * (w * g);
        }
    }
    load
}

/// Cell part of the global operator:
/// `ε A_E + B_E + σ C_E + JS_E (+ N_E on boundary cells)`.
pub fn cell_matrix(s: &LocalSpace, data: &dyn ProblemData, params: &ModelParams) -> Result<DMatrix<f64>> {
    let beta = |x: Vec2| data.advection(x);
    let mut a = local_diffusion(s) * params.eps;
    a += local_advection(s, &beta);
    a += local_reaction(s) * params.sigma;
    a += element_jump(s, gamma_cell(s, &beta, params.kappa_cell));
    if s.facets.iter().any(|lf| lf.boundary) {
        a += nitsche_matrix(s, &beta, params)?;
    }
    Ok(a)
}

/// Facet part of the global operator on an interior facet: `D_e + J_e`.
pub fn facet_matrix(
    mesh: &PolyMesh,
    facet: usize,
    spaces: &[LocalSpace],
    data: &dyn ProblemData,
    params: &ModelParams,
) -> Result<DMatrix<f64>> {
    let beta = |x: Vec2| data.advection(x);
    Ok(facet_dh(mesh, facet, spaces, &beta)? + facet_jump(mesh, facet, spaces, &beta, params.kappa_facet)?)
}
