//! End-to-end benchmark: mesh, element batch, bounds, solvers, exports.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::elements::ElementBatch;
use crate::error::{Error, Result};
use crate::mesh::{build_unit_square_mesh, Mesh, MAX_LEVEL};
use crate::operator::{apply_initial_guess, DirichletData, LinearOperator, MatrixFreeOperator, ScatterMode};
use crate::reference::{assemble_sparse, solve_reference};
use crate::solvers::{self, ConvergenceHistory, Method, RootOrder, SolveOptions, SpectralBounds};
use crate::spectrum;
use crate::{dist2, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Richardson,
    Cheb2,
    Cheb3,
    Direct,
}

impl SolverKind {
    pub const ITERATIVE: [SolverKind; 3] = [SolverKind::Richardson, SolverKind::Cheb2, SolverKind::Cheb3];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Richardson => "richardson",
            SolverKind::Cheb2 => "cheb2",
            SolverKind::Cheb3 => "cheb3",
            SolverKind::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub level: u32,
    pub nu: f64,
    /// Constant source term `f`.
    pub source: f64,
    /// Value of `u` on the whole boundary.
    pub boundary_value: f64,
    pub iters: usize,
    pub solvers: Vec<SolverKind>,
    pub cycle_n: usize,
    pub root_order: RootOrder,
    pub tol: Option<f64>,
    pub threads: usize,
    pub mode: ScatterMode,
    pub out_dir: Option<PathBuf>,
    pub export_vtk: bool,
    pub compare_direct: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            level: 5,
            nu: 0.0,
            source: 1.0,
            boundary_value: 1.0,
            iters: 124,
            solvers: SolverKind::ITERATIVE.to_vec(),
            cycle_n: 32,
            root_order: RootOrder::Ascending,
            tol: None,
            threads: 1,
            mode: ScatterMode::Deterministic,
            out_dir: None,
            export_vtk: false,
            compare_direct: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.level < 1 || self.level > MAX_LEVEL {
            return bad(format!("--level must be in 1..={MAX_LEVEL} (level 0 has no interior node), got {}", self.level));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return bad(format!("--nu must be a finite non-negative number, got {}", self.nu));
        }
        if !self.source.is_finite() || !self.boundary_value.is_finite() {
            return bad("source and boundary values must be finite".into());
        }
        if self.cycle_n == 0 {
            return bad("--cycle-n must be at least 1".into());
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) || !tol.is_finite() {
                return bad(format!("--tol must be a positive number, got {tol}"));
            }
        }
        if self.threads == 0 {
            return bad("--threads must be at least 1".into());
        }
        if self.solvers.is_empty() {
            return bad("no solver selected".into());
        }
        Ok(())
    }

    fn needs_reference(&self) -> bool {
        self.compare_direct || self.solvers.contains(&SolverKind::Direct)
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub kind: SolverKind,
    pub x: Vec<f64>,
    /// `None` for the direct solve.
    pub history: Option<ConvergenceHistory>,
    pub final_residual: f64,
    /// `‖x - u‖₂ / ‖x^0 - u‖₂` when a reference solution is available.
    pub relative_error: Option<f64>,
    pub wall_time: Duration,
}

impl SolverReport {
    pub fn diverged(&self) -> bool {
        self.history.as_ref().is_some_and(|h| h.diverged)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub n_nodes: usize,
    pub n_elements: usize,
    pub bounds: SpectralBounds,
    /// Power-iteration estimate of the largest eigenvalue (`ν > 0` only).
    pub lambda_max_estimate: Option<f64>,
    pub setup_time: Duration,
    pub x0: Vec<f64>,
    pub reference: Option<Vec<f64>>,
    pub solvers: Vec<SolverReport>,
    pub mesh: Mesh,
}

impl ExperimentReport {
    pub fn get(&self, kind: SolverKind) -> Option<&SolverReport> {
        self.solvers.iter().find(|s| s.kind == kind)
    }

    pub fn any_diverged(&self) -> bool {
        self.solvers.iter().any(SolverReport::diverged)
    }

    /// Human-readable summary table.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "level {} ({} nodes, {} elements), nu = {}, iters = {}, N = {}",
            c.level, self.n_nodes, self.n_elements, c.nu, c.iters, c.cycle_n
        );
        let _ = writeln!(s, "bounds [{:.10e}, {:.10e}]", self.bounds.lambda1, self.bounds.lambda2);
        if let Some(est) = self.lambda_max_estimate {
            let _ = writeln!(s, "power-iteration lambda_max estimate {est:.10e}");
        }
        let _ = writeln!(s, "setup {:.3} s", self.setup_time.as_secs_f64());
        let _ = writeln!(s, "{:<11} {:>6} {:>14} {:>14} {:>10}  status", "solver", "iters", "residual", "rel. error", "time [s]");
        for r in &self.solvers {
            let iters = r.history.as_ref().map_or(0, |h| h.iterations);
            let err = r.relative_error.map_or("-".to_string(), |e| format!("{e:.6e}"));
            let status = if r.diverged() { "diverged" } else { "ok" };
            let _ = writeln!(
                s,
                "{:<11} {:>6} {:>14.6e} {:>14} {:>10.3}  {status}",
                r.kind.name(),
                iters,
                r.final_residual,
                err,
                r.wall_time.as_secs_f64()
            );
        }
        s
    }
}

/// Runs one configuration inside a dedicated rayon pool of `threads` workers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let setup = Instant::now();
    let mesh = build_unit_square_mesh(config.level)?;
    let source = config.source;
    let batch = ElementBatch::new(&mesh, config.nu, move |_, _| source)?;
    let dirichlet = DirichletData::on_boundary(&mesh, config.boundary_value)?;
    let side = (1usize << config.level) + 1;

    let op = MatrixFreeOperator::new(batch, config.mode)?;
    let (bounds, lambda_max_estimate) = if config.nu == 0.0 {
        (spectrum::model_eigen_bounds(side)?, None)
    } else {
        let interval = spectrum::mass_gershgorin(op.batch(), &dirichlet)?;
        let est = spectrum::power_iteration_lambda_max(&op, &dirichlet, spectrum::POWER_MAX_ITERS, 0)?;
        (spectrum::shifted_model_bounds(side, config.nu, interval)?, Some(est))
    };
    let x0 = apply_initial_guess(mesh.n_nodes(), &dirichlet);
    let setup_time = setup.elapsed();

    let mut solvers_out = Vec::new();
    let reference = if config.needs_reference() {
        let start = Instant::now();
        let b = op.rhs();
        let a = assemble_sparse(&op.batch().a_e, &op.batch().index.indt, mesh.n_nodes())?;
        let u = solve_reference(&a, &b, &dirichlet)?;
        let elapsed = start.elapsed();
        if config.solvers.contains(&SolverKind::Direct) {
            let mut r = vec![0.0; u.len()];
            op.residual(&u, &mut r)?;
            crate::operator::mask_dirichlet(&mut r, &dirichlet);
            solvers_out.push(SolverReport {
                kind: SolverKind::Direct,
                x: u.clone(),
                history: None,
                final_residual: norm2(&r),
                relative_error: None,
                wall_time: elapsed,
            });
        }
        Some(u)
    } else {
        None
    };
    let e0 = reference.as_deref().map(|u| dist2(&x0, u));

    for &kind in &config.solvers {
        let method = match kind {
            SolverKind::Richardson => Method::Richardson,
            SolverKind::Cheb2 => Method::Chebyshev2 { cycle: config.cycle_n, order: config.root_order },
            SolverKind::Cheb3 => Method::Chebyshev3,
            SolverKind::Direct => continue,
        };
        let opts = SolveOptions { iters: config.iters, tol: config.tol, reference: reference.as_deref() };
        let sol = solvers::solve(&op, &dirichlet, &x0, &bounds, method, opts)?;
        let h = sol.history;
        let relative_error = match (h.final_error(), e0) {
            (Some(e), Some(e0)) if e0 > 0.0 => Some(e / e0),
            (Some(e), Some(_)) => Some(e),
            _ => None,
        };
        solvers_out.push(SolverReport {
            kind,
            x: sol.x,
            final_residual: h.final_residual().unwrap_or(f64::NAN),
            relative_error,
            wall_time: h.wall_time,
            history: Some(h),
        });
    }

    let report = ExperimentReport {
        config: config.clone(),
        n_nodes: mesh.n_nodes(),
        n_elements: mesh.n_elements(),
        bounds,
        lambda_max_estimate,
        setup_time,
        x0,
        reference,
        solvers: solvers_out,
        mesh,
    };
    if let Some(dir) = &config.out_dir {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

/// Writes `history_<solver>.csv`, `solution_<solver>.csv` (and `.vtk` when
/// requested) plus `summary.txt` into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for s in &report.solvers {
        if let Some(h) = &s.history {
            export_history(h, &dir.join(format!("history_{}.csv", s.kind.name())))?;
        }
        export_solution(&report.mesh, &s.x, &dir.join(format!("solution_{}.csv", s.kind.name())))?;
        if report.config.export_vtk {
            export_solution(&report.mesh, &s.x, &dir.join(format!("solution_{}.vtk", s.kind.name())))?;
        }
    }
    std::fs::write(dir.join("summary.txt"), report.summary())?;
    Ok(())
}

/// CSV `k,residual_norm[,error_norm]` with 17 significant digits.
pub fn export_history(history: &ConvergenceHistory, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match &history.error_norms {
        Some(errs) => {
            writeln!(out, "k,residual_norm,error_norm")?;
            for (k, (r, e)) in history.residual_norms.iter().zip(errs).enumerate() {
                writeln!(out, "{k},{r:.16e},{e:.16e}")?;
            }
        }
        None => {
            writeln!(out, "k,residual_norm")?;
            for (k, r) in history.residual_norms.iter().enumerate() {
                writeln!(out, "{k},{r:.16e}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// CSV `x,y,u` per node, or legacy VTK when `path` ends in `.vtk`.
pub fn export_solution(mesh: &Mesh, x: &[f64], path: &Path) -> Result<()> {
    if x.len() != mesh.n_nodes() {
        return Err(Error::Shape(format!("{} values for {} nodes", x.len(), mesh.n_nodes())));
    }
    let mut out = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "vtk") {
        write_vtk(&mut out, mesh, x)?;
    } else {
        writeln!(out, "x,y,u")?;
        for ([px, py], u) in mesh.nodes().iter().zip(x) {
            writeln!(out, "{px:.16e},{py:.16e},{u:.16e}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn write_vtk<W: Write>(out: &mut W, mesh: &Mesh, x: &[f64]) -> std::io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "P1 solution")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_nodes())?;
    for [px, py] in mesh.nodes() {
        writeln!(out, "{px:.16e} {py:.16e} 0")?;
    }
    let ne = mesh.n_elements();
    writeln!(out, "CELLS {ne} {}", 4 * ne)?;
    for [a, b, c] in mesh.elements() {
        writeln!(out, "3 {a} {b} {c}")?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.n_nodes())?;
    writeln!(out, "SCALARS u double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for u in x {
        writeln!(out, "{u:.16e}")?;
    }
    Ok(())
}

/// Reads back a solution CSV written by [`export_solution`].
pub fn read_solution_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let fields: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parameter(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        let [x, y, u] = fields[..] else {
            return Err(Error::Shape(format!("{}:{}: expected 3 fields", path.display(), lineno + 1)));
        };
        rows.push([x, y, u]);
    }
    Ok(rows)
}
