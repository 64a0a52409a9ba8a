use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::ProblemData;
use crate::mesh::Vec2;

/// A smooth function known in closed form with its gradient and Laplacian.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: Vec2) -> f64;
    fn grad(&self, x: Vec2) -> Vec2;
    fn laplacian(&self, x: Vec2) -> f64;
}

/// Divergence-free advection field.
pub trait AdvectionField: Send + Sync {
    fn eval(&self, x: Vec2) -> Vec2;
    fn divergence(&self, x: Vec2) -> f64;
}

const LAYER: f64 = 0.05;

/// Internal layer along `x = 1/2`: `½(1 - tanh((x - 1/2)/0.05))`.
#[derive(Debug, Clone, Copy)]
pub struct InternalLayer;

impl ExactSolution for InternalLayer {
    fn value(&self, x: Vec2) -> f64 {
        0.5 * (1.0 - ((x.x - 0.5) / LAYER).tanh())
    }

    fn grad(&self, x: Vec2) -> Vec2 {
        let t = ((x.x - 0.5) / LAYER).tanh();
        Vec2::new(-0.5 * (1.0 - t * t) / LAYER, 0.0)
    }

    fn laplacian(&self, x: Vec2) -> f64 {
        let t = ((x.x - 0.5) / LAYER).tanh();
        (1.0 - t * t) * t / (LAYER * LAYER)
    }
}

/// Boundary layer at `x = 1`, zero on the whole boundary:
/// `(y - y²)(x - (e^{(x-1)/0.05} - e^{-1/0.05}) / (1 - e^{-1/0.05}))`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryLayer;

impl BoundaryLayer {
    fn profile(x: f64) -> (f64, f64, f64) {
        let tail = (-1.0 / LAYER).exp();
        let denom = 1.0 - tail;
        let e = ((x - 1.0) / LAYER).exp();
        (
            x - (e - tail) / denom,
            1.0 - e / (LAYER * denom),
            -e / (LAYER * LAYER * denom),
        )
    }
}

impl ExactSolution for BoundaryLayer {
    fn value(&self, x: Vec2) -> f64 {
        (x.y - x.y * x.y) * Self::profile(x.x).0
    }

    fn grad(&self, x: Vec2) -> Vec2 {
        let (p, dp, _) = Self::profile(x.x);
        Vec2::new((x.y - x.y * x.y) * dp, (1.0 - 2.0 * x.y) * p)
    }

    fn laplacian(&self, x: Vec2) -> f64 {
        let (p, _, ddp) = Self::profile(x.x);
        (x.y - x.y * x.y) * ddp - 2.0 * p
    }
}

/// `Σ c_ab x^a y^b` in unscaled monomials.
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub terms: Vec<((u32, u32), f64)>,
}

impl Polynomial {
    /// All monomials of degree `<= degree` with coefficients drawn from
    /// `(-1, 1)`.
    pub fn random(degree: u32, rng: &mut impl rand::Rng) -> Self {
        let mut terms = Vec::new();
        for d in 0..=degree {
            for a in (0..=d).rev() {
                terms.push(((a, d - a), rng.gen_range(-1.0..1.0)));
            }
        }
        Polynomial { terms }
    }

    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }
}

fn pw(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

impl ExactSolution for Polynomial {
    fn value(&self, x: Vec2) -> f64 {
        self.terms.iter().map(|&((a, b), c)| c * pw(x.x, a) * pw(x.y, b)).sum()
    }

    fn grad(&self, x: Vec2) -> Vec2 {
        self.terms.iter().fold(Vec2::zeros(), |acc, &((a, b), c)| {
            let dx = if a > 0 { a as f64 * pw(x.x, a - 1) * pw(x.y, b) } else { 0.0 };
            let dy = if b > 0 { b as f64 * pw(x.x, a) * pw(x.y, b - 1) } else { 0.0 };
            acc + Vec2::new(dx, dy) * c
        })
    }

    fn laplacian(&self, x: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|&((a, b), c)| {
                let xx = if a > 1 { (a * (a - 1)) as f64 * pw(x.x, a - 2) * pw(x.y, b) } else { 0.0 };
                let yy = if b > 1 { (b * (b - 1)) as f64 * pw(x.x, a) * pw(x.y, b - 2) } else { 0.0 };
                c * (xx + yy)
            })
            .sum()
    }
}

/// `(-2π sin(π(x + 2y)), π sin(π(x + 2y)))`.
#[derive(Debug, Clone, Copy)]
pub struct SineField;

impl AdvectionField for SineField {
    fn eval(&self, x: Vec2) -> Vec2 {
        let s = (PI * (x.x + 2.0 * x.y)).sin();
        Vec2::new(-2.0 * PI * s, PI * s)
    }

    fn divergence(&self, x: Vec2) -> f64 {
        let c = (PI * (x.x + 2.0 * x.y)).cos();
        -2.0 * PI * PI * c + 2.0 * PI * PI * c
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub Vec2);

impl AdvectionField for ConstantField {
    fn eval(&self, _: Vec2) -> Vec2 {
        self.0
    }

    fn divergence(&self, _: Vec2) -> f64 {
        0.0
    }
}

/// Exact solution, advection and coefficients; the source is
/// `-εΔu + β·∇u + σu` and the Dirichlet datum is the trace of `u`.
#[derive(Clone)]
pub struct ManufacturedProblem {
    pub name: String,
    pub exact: Arc<dyn ExactSolution>,
    pub field: Arc<dyn AdvectionField>,
    pub eps: f64,
    pub sigma: f64,
}

impl std::fmt::Debug for ManufacturedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedProblem")
            .field("name", &self.name)
            .field("eps", &self.eps)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl ManufacturedProblem {
    pub fn new(
        name: impl Into<String>,
        exact: Arc<dyn ExactSolution>,
        field: Arc<dyn AdvectionField>,
        eps: f64,
        sigma: f64,
    ) -> Self {
        ManufacturedProblem {
            name: name.into(),
            exact,
            field,
            eps,
            sigma,
        }
    }

    pub fn u(&self, x: Vec2) -> f64 {
        self.exact.value(x)
    }
}

impl ProblemData for ManufacturedProblem {
    fn advection(&self, x: Vec2) -> Vec2 {
        self.field.eval(x)
    }

    fn source(&self, x: Vec2) -> f64 {
        -self.eps * self.exact.laplacian(x) + self.field.eval(x).dot(&self.exact.grad(x)) + self.sigma * self.exact.value(x)
    }

    fn dirichlet(&self, x: Vec2) -> f64 {
        self.exact.value(x)
    }
}

/// A named pair of exact solution and advection field.
pub trait ProblemDefinition: Send + Sync {
    fn name(&self) -> &str;
    fn exact(&self) -> Arc<dyn ExactSolution>;
    fn field(&self) -> Arc<dyn AdvectionField>;

    fn instantiate(&self, eps: f64, sigma: f64) -> ManufacturedProblem {
        ManufacturedProblem::new(self.name(), self.exact(), self.field(), eps, sigma)
    }
}

struct Benchmark {
    name: &'static str,
    exact: fn() -> Arc<dyn ExactSolution>,
}

impl ProblemDefinition for Benchmark {
    fn name(&self) -> &str {
        self.name
    }

    fn exact(&self) -> Arc<dyn ExactSolution> {
        (self.exact)()
    }

    fn field(&self) -> Arc<dyn AdvectionField> {
        Arc::new(SineField)
    }
}

/// Problems selectable by name.
#[derive(Clone)]
pub struct ProblemRegistry {
    entries: BTreeMap<String, Arc<dyn ProblemDefinition>>,
}

impl ProblemRegistry {
    pub fn empty() -> Self {
        ProblemRegistry {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, def: Arc<dyn ProblemDefinition>) {
        self.entries.insert(def.name().to_string(), def);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ProblemDefinition>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::Unknown {
            kind: "problem",
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

impl Default for ProblemRegistry {
    /// The internal-layer problem `u1` and the boundary-layer problem `u2`,
    /// both advected by [`SineField`].
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Benchmark {
            name: "u1",
            exact: || Arc::new(InternalLayer),
        }));
        r.register(Arc::new(Benchmark {
            name: "u2",
            exact: || Arc::new(BoundaryLayer),
        }));
        r
    }
}

/// Looks up a problem in the default registry.
pub fn manufactured(name: &str, eps: f64, sigma: f64) -> Result<ManufacturedProblem> {
    Ok(ProblemRegistry::default().get(name)?.instantiate(eps, sigma))
}
