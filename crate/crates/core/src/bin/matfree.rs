use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use matfree::experiment::{run_experiment, ExperimentConfig, SolverKind};
use matfree::solvers::RootOrder;
use matfree::{Error, ScatterMode};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    /// Smallest root first.
    Ascending,
    /// Largest root first.
    Descending,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Richardson,
    Cheb2,
    Cheb3,
    Direct,
    All,
}

/// Matrix-free P1 solver benchmark for -Δu + νu = f on the unit square with
/// f = 1 and u = 1 on the boundary.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Refinement level L; the mesh has (2^L + 1)² nodes.
    #[arg(long, default_value_t = 5)]
    level: u32,
    /// Mass coefficient ν ≥ 0.
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    /// Fixed iteration budget.
    #[arg(long, default_value_t = 124)]
    iters: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::All)]
    solver: SolverArg,
    /// Cycle length of the two-level Chebyshev method.
    #[arg(long, default_value_t = 32)]
    cycle_n: usize,
    /// Order in which the two-level method visits its roots.
    #[arg(long, value_enum, default_value_t = OrderArg::Ascending)]
    root_order: OrderArg,
    /// Stop once ‖r^k‖ ≤ tol·‖r^0‖.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Thread-count independent scatter (default). Pass `--deterministic false`
    /// for atomic accumulation.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    deterministic: bool,
    /// Directory for history/solution CSV files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write legacy VTK files (requires --out-dir).
    #[arg(long)]
    export_vtk: bool,
    /// Report errors against a direct reference solution.
    #[arg(long)]
    compare_direct: bool,
    /// Also write nodes.txt / elements.txt (requires --out-dir).
    #[arg(long)]
    export_mesh: bool,
}

fn config(args: &Args) -> ExperimentConfig {
    let solvers = match args.solver {
        SolverArg::Richardson => vec![SolverKind::Richardson],
        SolverArg::Cheb2 => vec![SolverKind::Cheb2],
        SolverArg::Cheb3 => vec![SolverKind::Cheb3],
        SolverArg::Direct => vec![SolverKind::Direct],
        SolverArg::All => SolverKind::ITERATIVE.to_vec(),
    };
    ExperimentConfig {
        level: args.level,
        nu: args.nu,
        iters: args.iters,
        solvers,
        cycle_n: args.cycle_n,
        root_order: match args.root_order {
            OrderArg::Ascending => RootOrder::Ascending,
            OrderArg::Descending => RootOrder::Descending,
        },
        tol: args.tol,
        threads: args.threads,
        mode: if args.deterministic { ScatterMode::Deterministic } else { ScatterMode::Atomic },
        out_dir: args.out_dir.clone(),
        export_vtk: args.export_vtk,
        compare_direct: args.compare_direct,
        ..Default::default()
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if (args.export_vtk || args.export_mesh) && args.out_dir.is_none() {
        eprintln!("error: --export-vtk and --export-mesh need --out-dir");
        return ExitCode::from(2);
    }
    let cfg = config(&args);
    match run_experiment(&cfg) {
        Ok(report) => {
            print!("{}", report.summary());
            if let (true, Some(dir)) = (args.export_mesh, &cfg.out_dir) {
                if let Err(e) = report.mesh.write_txt(dir) {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            }
            if report.any_diverged() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ (Error::Parameter(_) | Error::Size(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
