//! Command-line front end.
//!
//! Settings come from built-in defaults, then an optional JSON file given
//! with `--config`, then flags; later sources override earlier ones.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::ModelParams;
use crate::io::write_atomic;
use crate::mesh::{load_mesh, quality_report, save_mesh, MeshRegistry, PolyMesh};
use crate::verification::{
    convergence_study, robustness_sweep, run_single, to_csv, ConvergenceConfig, LogLogPlot,
    ProblemRegistry, RobustnessConfig, Series, SlopeMark, StudyRow,
};

#[derive(Debug, Parser)]
#[command(name = "vemcip", version, about = "CIP-stabilized nonconforming VEM for advection-diffusion-reaction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a mesh and write it as JSON
    Mesh(Flags),
    /// Solve one problem and report its errors
    Solve(Flags),
    /// Refinement study on one mesh family
    Convergence(Flags),
    /// Sweep the diffusion coefficient on a fixed mesh
    Robustness(Flags),
    /// Run every convergence and robustness study of the benchmark set
    Reproduce(Flags),
}

#[derive(Debug, Clone, Default, Args)]
struct Flags {
    /// JSON file with run settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// mesh family (octag, voro)
    #[arg(long)]
    family: Option<String>,
    /// grid subdivisions of the octagonal family
    #[arg(long)]
    n: Option<usize>,
    /// number of Voronoi cells
    #[arg(long)]
    cells: Option<usize>,
    /// read the mesh from a JSON file instead of generating it
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// polynomial order (1, 2 or 3)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// sets both CIP constants
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Settings of a run as read from a JSON config file. Every field is
/// optional; lists apply to the study commands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<String>,
    pub n: Option<usize>,
    pub cells: Option<usize>,
    /// refinement ladder of `convergence`
    pub sizes: Option<Vec<usize>>,
    pub mesh: Option<PathBuf>,
    pub k: Option<usize>,
    /// orders of `convergence` and `reproduce`
    pub ks: Option<Vec<usize>>,
    pub problem: Option<String>,
    pub eps: Option<f64>,
    /// diffusion values of `robustness`
    pub eps_list: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_facet: Option<f64>,
    pub kappa_cell: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// ladders of `reproduce`, keyed by family
    pub octag_sizes: Option<Vec<usize>>,
    pub voro_sizes: Option<Vec<usize>>,
    /// mesh of the `reproduce` robustness sweep (Voronoi cells)
    pub robustness_cells: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    fn apply(&mut self, f: &Flags) {
        macro_rules! over {
            ($($field:ident),*) => { $( if f.$field.is_some() { self.$field = f.$field.clone(); } )* };
        }
        over!(family, n, cells, mesh, k, problem, eps, sigma, delta, kappa, seed, out, threads);
    }

    pub fn params(&self) -> Result<ModelParams> {
        let d = ModelParams::default();
        let p = ModelParams {
            eps: self.eps.unwrap_or(d.eps),
            sigma: self.sigma.unwrap_or(d.sigma),
            delta: self.delta.unwrap_or(d.delta),
            kappa_facet: self.kappa_facet.or(self.kappa).unwrap_or(d.kappa_facet),
            kappa_cell: self.kappa_cell.or(self.kappa).unwrap_or(d.kappa_cell),
        };
        p.validate()?;
        Ok(p)
    }

    fn family(&self) -> &str {
        self.family.as_deref().unwrap_or("voro")
    }

    fn problem(&self) -> &str {
        self.problem.as_deref().unwrap_or("u1")
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Resolution of the selected family: `n` for octag, `cells` otherwise.
    fn size(&self) -> usize {
        match self.family() {
            "octag" => self.n.unwrap_or(8),
            _ => self.cells.unwrap_or(1024),
        }
    }
}

fn check_order(k: usize) -> Result<usize> {
    if (1..=3).contains(&k) {
        Ok(k)
    } else {
        Err(Error::Config(format!("order k = {k} is out of range; valid orders are 1, 2 and 3")))
    }
}

fn provenance(command: &str, cfg: &RunConfig, extra: &str) -> String {
    let p = cfg.params().unwrap_or_default();
    format!(
        "vemcip {command} {extra} problem={} eps={:e} sigma={} delta={} kappa_facet={} kappa_cell={} seed={}",
        cfg.problem(),
        p.eps,
        p.sigma,
        p.delta,
        p.kappa_facet,
        p.kappa_cell,
        cfg.seed()
    )
}

fn obtain_mesh(cfg: &RunConfig) -> Result<(PolyMesh, String)> {
    if let Some(path) = &cfg.mesh {
        return Ok((load_mesh(path)?, format!("mesh={}", path.display())));
    }
    let family = MeshRegistry::default().get(cfg.family())?;
    let size = cfg.size();
    Ok((family.generate(size, cfg.seed())?, format!("family={} size={size}", family.name())))
}

fn cmd_mesh(cfg: &RunConfig) -> Result<()> {
    let (mesh, what) = obtain_mesh(cfg)?;
    let q = quality_report(&mesh, 0.05);
    let path = cfg.out().join(format!("{}-{}-seed{}.json", cfg.family(), cfg.size(), cfg.seed()));
    save_mesh(&mesh, &path)?;
    println!(
        "{what}: {} cells, {} facets, h={:.4e}, min facet ratio {:.3}, {} quality violations -> {}",
        mesh.num_cells(),
        mesh.num_facets(),
        mesh.h,
        q.min_facet_ratio,
        q.violations.len(),
        path.display()
    );
    Ok(())
}

fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    let k = check_order(cfg.k.unwrap_or(1))?;
    let params = cfg.params()?;
    let problem = ProblemRegistry::default().get(cfg.problem())?.instantiate(params.eps, params.sigma);
    let (mesh, what) = obtain_mesh(cfg)?;
    let r = run_single(&mesh, k, &problem, &params)?;
    let row = StudyRow {
        family: cfg.mesh.as_ref().map(|_| "file".to_string()).unwrap_or_else(|| cfg.family().to_string()),
        level: 0,
        size: mesh.num_cells(),
        k,
        eps: params.eps,
        h: r.h,
        n_dofs: r.n_dofs,
        e_h1: r.errors.h1,
        e_l2: r.errors.l2,
        e_cip: r.errors.cip,
        rate_h1: None,
        rate_l2: None,
        rate_cip: None,
        seconds: r.seconds,
        residual: r.residual,
        failure: None,
    };
    let path = cfg.out().join("report.csv");
    write_atomic(&path, to_csv(&[row], &provenance("solve", cfg, &format!("{what} k={k}"))).as_bytes())?;
    println!(
        "{what} k={k} N={} h={:.4e}: eH1={:.6e} eL2={:.6e} ecip={:.6e} residual={:.2e} ({:.2}s) -> {}",
        r.n_dofs,
        r.h,
        r.errors.h1,
        r.errors.l2,
        r.errors.cip,
        r.residual,
        r.seconds,
        path.display()
    );
    Ok(())
}

/// Failure count of a finished study, with one line per failed run.
fn report_failures(rows: &[StudyRow]) -> usize {
    let mut n = 0;
    for r in rows.iter().filter(|r| !r.succeeded()) {
        eprintln!(
            "run failed: family={} size={} k={} eps={:e}: {}",
            r.family,
            r.size,
            r.k,
            r.eps,
            r.failure.as_deref().unwrap_or("")
        );
        n += 1;
    }
    n
}

fn convergence_plot(title: &str, rows: &[StudyRow]) -> LogLogPlot {
    let mut series = Vec::new();
    let mut keys: Vec<(String, usize)> = rows.iter().map(|r| (r.family.clone(), r.k)).collect();
    keys.dedup();
    for (family, k) in &keys {
        let sel: Vec<&StudyRow> = rows.iter().filter(|r| &r.family == family && r.k == *k).collect();
        for (name, get) in [
            ("eH1", (|r: &StudyRow| r.e_h1) as fn(&StudyRow) -> f64),
            ("eL2", |r| r.e_l2),
            ("ecip", |r| r.e_cip),
        ] {
            series.push(Series {
                label: format!("{name} {family} k={k}"),
                points: sel.iter().map(|r| (r.h, get(r))).collect(),
            });
        }
    }
    let k = rows.first().map(|r| r.k as f64).unwrap_or(1.0);
    LogLogPlot {
        title: title.to_string(),
        x_label: "h".into(),
        y_label: "error".into(),
        slopes: vec![SlopeMark { slope: k, series: 0 }, SlopeMark { slope: k + 1.0, series: 1 }],
        series,
    }
}

fn robustness_plot(title: &str, rows: &[StudyRow]) -> LogLogPlot {
    LogLogPlot {
        title: title.to_string(),
        x_label: "eps".into(),
        y_label: "CIP-norm error".into(),
        series: vec![Series {
            label: format!("ecip {} k={}", rows.first().map(|r| r.family.as_str()).unwrap_or(""), rows.first().map(|r| r.k).unwrap_or(0)),
            points: rows.iter().map(|r| (r.eps, r.e_cip)).collect(),
        }],
        slopes: vec![],
    }
}

fn write_study(dir: &Path, stem: &str, rows: &[StudyRow], header: &str, plot: LogLogPlot) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), to_csv(rows, header).as_bytes())?;
    write_atomic(&dir.join(format!("{stem}.svg")), plot.render().as_bytes())
}

fn print_rows(rows: &[StudyRow]) {
    for r in rows {
        println!(
            "{} size={} k={} eps={:e} N={} h={:.4e} eH1={:.4e} eL2={:.4e} ecip={:.4e} rates={}/{}/{}",
            r.family,
            r.size,
            r.k,
            r.eps,
            r.n_dofs,
            r.h,
            r.e_h1,
            r.e_l2,
            r.e_cip,
            r.rate_h1.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
            r.rate_l2.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
            r.rate_cip.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
        );
    }
}

fn cmd_convergence(cfg: &RunConfig) -> Result<usize> {
    let params = cfg.params()?;
    let family = MeshRegistry::default().get(cfg.family())?;
    let problem = ProblemRegistry::default().get(cfg.problem())?;
    let ks = match (&cfg.ks, cfg.k) {
        (_, Some(k)) => vec![k],
        (Some(ks), None) => ks.clone(),
        (None, None) => vec![1, 2, 3],
    };
    for &k in &ks {
        check_order(k)?;
    }
    let sizes = cfg.sizes.clone().unwrap_or_else(|| family.default_ladder());
    let study = ConvergenceConfig {
        family: family.name().to_string(),
        sizes: sizes.clone(),
        ks,
        problem: problem.name().to_string(),
        params,
        seed: cfg.seed(),
    };
    let rows = convergence_study(family.as_ref(), problem.as_ref(), &study);
    print_rows(&rows);
    let stem = format!("convergence_{}_{}", problem.name(), family.name());
    let header = provenance("convergence", cfg, &format!("family={} sizes={sizes:?} ks={:?}", family.name(), study.ks));
    write_study(&cfg.out(), &stem, &rows, &header, convergence_plot(&stem, &rows))?;
    Ok(report_failures(&rows))
}

const EPS_SWEEP: [f64; 5] = [1.0, 1e-2, 1e-4, 1e-6, 1e-8];

fn cmd_robustness(cfg: &RunConfig) -> Result<usize> {
    let params = cfg.params()?;
    let family = MeshRegistry::default().get(cfg.family())?;
    let problem = ProblemRegistry::default().get(cfg.problem())?;
    let k = check_order(cfg.k.unwrap_or(1))?;
    let sweep = RobustnessConfig {
        family: family.name().to_string(),
        size: cfg.size(),
        k,
        problem: problem.name().to_string(),
        eps: cfg.eps_list.clone().unwrap_or_else(|| EPS_SWEEP.to_vec()),
        params,
        seed: cfg.seed(),
    };
    let rows = robustness_sweep(family.as_ref(), problem.as_ref(), &sweep);
    print_rows(&rows);
    let stem = format!("robustness_{}", problem.name());
    let header = provenance(
        "robustness",
        cfg,
        &format!("family={} size={} k={k} eps_list={:?}", family.name(), sweep.size, sweep.eps),
    );
    write_study(&cfg.out(), &stem, &rows, &header, robustness_plot(&stem, &rows))?;
    Ok(report_failures(&rows))
}

fn cmd_reproduce(cfg: &RunConfig) -> Result<usize> {
    let params = cfg.params()?;
    let meshes = MeshRegistry::default();
    let problems = ProblemRegistry::default();
    let ks = cfg.ks.clone().unwrap_or_else(|| vec![1, 2, 3]);
    for &k in &ks {
        check_order(k)?;
    }
    let out = cfg.out();
    let mut failures = 0;
    for name in ["u1", "u2"] {
        let problem = problems.get(name)?;
        for &k in &ks {
            let mut rows = Vec::new();
            let mut ladders = Vec::new();
            for fam in ["octag", "voro"] {
                let family = meshes.get(fam)?;
                let sizes = match fam {
                    "octag" => cfg.octag_sizes.clone(),
                    _ => cfg.voro_sizes.clone(),
                }
                .unwrap_or_else(|| family.default_ladder());
                ladders.push(format!("{fam}:{sizes:?}"));
                let study = ConvergenceConfig {
                    family: fam.to_string(),
                    sizes,
                    ks: vec![k],
                    problem: name.to_string(),
                    params,
                    seed: cfg.seed(),
                };
                rows.extend(convergence_study(family.as_ref(), problem.as_ref(), &study));
            }
            print_rows(&rows);
            failures += report_failures(&rows);
            let stem = format!("convergence_{name}_k{k}");
            let run_cfg = RunConfig { problem: Some(name.to_string()), ..cfg.clone() };
            let header = provenance("reproduce", &run_cfg, &format!("k={k} ladders={}", ladders.join(";")));
            write_study(&out, &stem, &rows, &header, convergence_plot(&stem, &rows))?;
        }
        let cells = cfg.robustness_cells.unwrap_or(1024);
        let sweep = RobustnessConfig {
            family: "voro".into(),
            size: cells,
            k: 1,
            problem: name.to_string(),
            eps: cfg.eps_list.clone().unwrap_or_else(|| EPS_SWEEP.to_vec()),
            params,
            seed: cfg.seed(),
        };
        let rows = robustness_sweep(meshes.get("voro")?.as_ref(), problem.as_ref(), &sweep);
        print_rows(&rows);
        failures += report_failures(&rows);
        let stem = format!("robustness_{name}");
        let run_cfg = RunConfig { problem: Some(name.to_string()), ..cfg.clone() };
        let header = provenance("reproduce", &run_cfg, &format!("family=voro size={cells} k=1 eps_list={:?}", sweep.eps));
        write_study(&out, &stem, &rows, &header, robustness_plot(&stem, &rows))?;
    }
    Ok(failures)
}

/// Exit status of an error: 2 for configuration and input problems, 3 for
/// numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver(_) | Error::NonFinite(_) | Error::ElementGeometry { .. } => 3,
        _ => 2,
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, flags) = match &cli.command {
        Command::Mesh(f) => ("mesh", f),
        Command::Solve(f) => ("solve", f),
        Command::Convergence(f) => ("convergence", f),
        Command::Robustness(f) => ("robustness", f),
        Command::Reproduce(f) => ("reproduce", f),
    };
    let result = (|| -> Result<usize> {
        let mut cfg = match &flags.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(flags);
        let work = || match name {
            "mesh" => cmd_mesh(&cfg).map(|_| 0),
            "solve" => cmd_solve(&cfg).map(|_| 0),
            "convergence" => cmd_convergence(&cfg),
            "robustness" => cmd_robustness(&cfg),
            _ => cmd_reproduce(&cfg),
        };
        match cfg.threads {
            Some(0) => Err(Error::Config("--threads must be at least 1".into())),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(work),
            None => work(),
        }
    })();
    match result {
        Ok(0) => 0,
        Ok(n) => {
            eprintln!("vemcip {name}: {n} run(s) failed");
            3
        }
        Err(e) => {
            eprintln!("vemcip {name}: {e}");
            exit_code(&e)
        }
    }
}
