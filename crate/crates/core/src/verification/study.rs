use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::errors::{error_report, ErrorReport};
use super::problems::{ManufacturedProblem, ProblemDefinition};
use crate::error::Result;
use crate::forms::ModelParams;
use crate::mesh::{MeshFamily, PolyMesh};
use crate::system::{assemble, solve, Discretization};

/// Outcome of one discretize-assemble-solve-measure run.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub h: f64,
    pub n_dofs: usize,
    pub errors: ErrorReport,
    /// relative residual of the linear solve
    pub residual: f64,
    pub seconds: f64,
}

/// Solves `problem` on `mesh` with order `k` and measures the errors.
pub fn run_single(mesh: &PolyMesh, k: usize, problem: &ManufacturedProblem, params: &ModelParams) -> Result<RunResult> {
    let start = Instant::now();
    let disc = Discretization::new(mesh, k)?;
    let system = assemble(&disc, params, problem)?;
    let sol = solve(&system)?;
    let errors = error_report(&disc, &sol.x, problem, params);
    Ok(RunResult {
        h: mesh.h,
        n_dofs: disc.dofmap.n_dofs,
        errors,
        residual: sol.residual,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// One line of a study table. Failed runs keep their key and carry the
/// error message; their numeric fields are NaN.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub family: String,
    pub level: usize,
    /// mesh size parameter of the level (`n` or number of cells)
    pub size: usize,
    pub k: usize,
    pub eps: f64,
    pub h: f64,
    pub n_dofs: usize,
    pub e_h1: f64,
    pub e_l2: f64,
    pub e_cip: f64,
    pub rate_h1: Option<f64>,
    pub rate_l2: Option<f64>,
    pub rate_cip: Option<f64>,
    pub seconds: f64,
    pub residual: f64,
    pub failure: Option<String>,
}

impl StudyRow {
    fn new(family: &str, level: usize, size: usize, k: usize, eps: f64, run: Result<RunResult>) -> Self {
        let mut row = StudyRow {
            family: family.to_string(),
            level,
            size,
            k,
            eps,
            h: f64::NAN,
            n_dofs: 0,
            e_h1: f64::NAN,
            e_l2: f64::NAN,
            e_cip: f64::NAN,
            rate_h1: None,
            rate_l2: None,
            rate_cip: None,
            seconds: f64::NAN,
            residual: f64::NAN,
            failure: None,
        };
        match run {
            Ok(r) => {
                row.h = r.h;
                row.n_dofs = r.n_dofs;
                row.e_h1 = r.errors.h1;
                row.e_l2 = r.errors.l2;
                row.e_cip = r.errors.cip;
                row.seconds = r.seconds;
                row.residual = r.residual;
            }
            Err(e) => row.failure = Some(e.to_string()),
        }
        row
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Observed rates `log(e_i / e_{i-1}) / log(h_i / h_{i-1})` between
/// successive levels; `None` for the first level and around failures.
pub fn rates(h: &[f64], e: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; h.len()];
    for i in 1..h.len() {
        let r = (e[i] / e[i - 1]).ln() / (h[i] / h[i - 1]).ln();
        out[i] = r.is_finite().then_some(r);
    }
    out
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = h.iter().zip(e).map(|(h, e)| (h.ln(), e.ln())).unzip();
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// A refinement study on one mesh family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub family: String,
    pub sizes: Vec<usize>,
    pub ks: Vec<usize>,
    pub problem: String,
    pub params: ModelParams,
    pub seed: u64,
}

/// Runs every (level, k) pair; rows are ordered by k, then level.
pub fn convergence_study(
    family: &dyn MeshFamily,
    problem: &dyn ProblemDefinition,
    config: &ConvergenceConfig,
) -> Vec<StudyRow> {
    let meshes: Vec<Result<Arc<PolyMesh>>> = config
        .sizes
        .par_iter()
        .map(|&n| family.generate(n, config.seed).map(Arc::new))
        .collect();
    let manufactured = problem.instantiate(config.params.eps, config.params.sigma);
    let jobs: Vec<(usize, usize)> = config
        .ks
        .iter()
        .flat_map(|&k| (0..config.sizes.len()).map(move |l| (k, l)))
        .collect();
    let mut rows: Vec<StudyRow> = jobs
        .par_iter()
        .map(|&(k, l)| {
            let run = match &meshes[l] {
                Ok(m) => run_single(m, k, &manufactured, &config.params),
                Err(e) => Err(crate::Error::Generation(e.to_string())),
            };
            StudyRow::new(family.name(), l, config.sizes[l], k, config.params.eps, run)
        })
        .collect();
    for k in &config.ks {
        fill_rates(rows.iter_mut().filter(|r| r.k == *k).collect());
    }
    rows
}

fn fill_rates(mut rows: Vec<&mut StudyRow>) {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let cols = [
        rates(&h, &rows.iter().map(|r| r.e_h1).collect::<Vec<_>>()),
        rates(&h, &rows.iter().map(|r| r.e_l2).collect::<Vec<_>>()),
        rates(&h, &rows.iter().map(|r| r.e_cip).collect::<Vec<_>>()),
    ];
    for (i, r) in rows.iter_mut().enumerate() {
        r.rate_h1 = cols[0][i];
        r.rate_l2 = cols[1][i];
        r.rate_cip = cols[2][i];
    }
}

/// One mesh, one order, a list of diffusion coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub family: String,
    pub size: usize,
    pub k: usize,
    pub problem: String,
    pub eps: Vec<f64>,
    pub params: ModelParams,
    pub seed: u64,
}

/// Solves once per entry of `config.eps`; rows follow that order.
pub fn robustness_sweep(
    family: &dyn MeshFamily,
    problem: &dyn ProblemDefinition,
    config: &RobustnessConfig,
) -> Vec<StudyRow> {
    let mesh = family.generate(config.size, config.seed);
    config
        .eps
        .par_iter()
        .map(|&eps| {
            let params = ModelParams { eps, ..config.params };
            let run = match &mesh {
                Ok(m) => run_single(m, config.k, &problem.instantiate(eps, params.sigma), &params),
                Err(e) => Err(crate::Error::Generation(e.to_string())),
            };
            StudyRow::new(family.name(), 0, config.size, config.k, eps, run)
        })
        .collect()
}

pub const CSV_HEADER: &str = "family,level,k,eps,h,N,eH1,eL2,ecip,rateH1,rateL2,rateCIP,seconds";

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.10e}")
    } else {
        "nan".to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|r| format!("{r:.6}")).unwrap_or_default()
}

/// CSV table preceded by one `#` comment line carrying `provenance`.
pub fn to_csv(rows: &[StudyRow], provenance: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {provenance}");
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{},{},{},{},{},{},{},{},{:.3}",
            r.family,
            r.level,
            r.k,
            r.eps,
            num(r.h),
            r.n_dofs,
            num(r.e_h1),
            num(r.e_l2),
            num(r.e_cip),
            opt(r.rate_h1),
            opt(r.rate_l2),
            opt(r.rate_cip),
            r.seconds,
        );
    }
    s
}
