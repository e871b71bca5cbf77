//! Command-line front end: single solves, convergence studies, and
//! coercivity certificates for the built-in interface-problem presets.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 interface/grid alignment
//! failures, 4 solver failures.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdg2d::{
    build_mesh, coercivity_min_eig, h1_broken_error, l2_error, mesh_id, mesh_metrics, preset,
    rates, solve_problem, CoercivityReport, ConvergenceRecord, DiscreteSolution, ElementKind,
    Error, ErrorTarget, Mesh, Penalty, Preset, PresetName, SchemeParams, SchemeVariant, SolveInfo,
    SolveMethod,
};

#[derive(Parser)]
#[command(name = "hdg2d", version, about = "Hybrid DG solver for 2D elliptic interface problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one preset on one mesh and print a summary table.
    Solve(SolveArgs),
    /// Refinement study over doubling levels; emits the rate table as CSV.
    Convergence(ConvergenceArgs),
    /// Coercivity certificates (minimum eigenvalues) as CSV.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ElementArg {
    /// Bilinear elements on rectangle cells.
    Q1,
    /// Linear elements on triangle cells.
    P1,
}

impl From<ElementArg> for ElementKind {
    fn from(e: ElementArg) -> ElementKind {
        match e {
            ElementArg::Q1 => ElementKind::Rectangle,
            ElementArg::P1 => ElementKind::Triangle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Primary,
    Alternative,
}

impl From<SchemeArg> for SchemeVariant {
    fn from(s: SchemeArg) -> SchemeVariant {
        match s {
            SchemeArg::Primary => SchemeVariant::Primary,
            SchemeArg::Alternative => SchemeVariant::Alternative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Direct,
    Cg,
}

impl From<SolverArg> for SolveMethod {
    fn from(s: SolverArg) -> SolveMethod {
        match s {
            SolverArg::Direct => SolveMethod::Direct,
            SolverArg::Cg => SolveMethod::Cg,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Problem preset: example1, example2, or patch.
    #[arg(long)]
    preset: String,
    /// Element kind.
    #[arg(long, value_enum, default_value_t = ElementArg::Q1)]
    element: ElementArg,
    /// Scheme variant.
    #[arg(long, value_enum, default_value_t = SchemeArg::Primary)]
    scheme: SchemeArg,
    /// Penalty override; defaults to 10 * lambda_max of the preset.
    #[arg(long)]
    eta: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn preset(&self) -> Result<Preset, Error> {
        Ok(preset(self.preset.parse::<PresetName>()?))
    }

    fn params(&self, preset: &Preset) -> Result<SchemeParams, Error> {
        match self.eta {
            Some(eta) => SchemeParams::new(self.scheme.into(), Penalty::Constant(eta)),
            None => Ok(SchemeParams::with_default_eta(self.scheme.into(), &preset.data)),
        }
    }

    fn emit(&self, text: &str) -> Result<(), Error> {
        match &self.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| Error::InvalidParam(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Subdivisions per unit length.
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Direct)]
    solver: SolverArg,
    /// Relative residual tolerance of the cg solver.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Also write the mesh in plain-text form to this path.
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated doubling subdivision counts, e.g. 16,32,64,128.
    #[arg(long)]
    levels: String,
    #[arg(long, value_enum, default_value_t = SolverArg::Direct)]
    solver: SolverArg,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated doubling subdivision counts.
    #[arg(long, default_value = "2,4")]
    levels: String,
    /// Comma-separated penalties to certify; defaults to the --eta value or
    /// the preset default.
    #[arg(long)]
    etas: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Convergence(args) => run_convergence(args),
        Command::Verify(args) => run_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse_levels(spec: &str) -> Result<Vec<usize>, Error> {
    let levels: Vec<usize> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParam(format!("bad level `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    if levels.is_empty() {
        return Err(Error::InvalidParam("empty level list".into()));
    }
    for w in levels.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::InvalidParam(format!(
                "levels must double: {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(levels)
}

fn solve_level(
    preset: &Preset,
    params: &SchemeParams,
    kind: ElementKind,
    n: usize,
    method: SolveMethod,
    tol: f64,
) -> Result<(Mesh, DiscreteSolution, SolveInfo), Error> {
    let mesh = build_mesh(preset.geometry, n, kind)?;
    let (sol, info) = solve_problem(&mesh, &preset.data, params, method, tol)?;
    Ok((mesh, sol, info))
}

fn run_solve(args: SolveArgs) -> Result<(), Error> {
    let preset = args.common.preset()?;
    let params = args.common.params(&preset)?;
    let (mesh, sol, info) = solve_level(
        &preset,
        &params,
        args.common.element.into(),
        args.n,
        args.solver.into(),
        args.tol,
    )?;
    if let Some(path) = &args.dump_mesh {
        std::fs::write(path, mesh.dump())
            .map_err(|e| Error::InvalidParam(format!("cannot write {}: {e}", path.display())))?;
    }
    let metrics = mesh_metrics(&mesh);
    let mut out = String::new();
    let _ = writeln!(out, "preset         = {}", args.common.preset);
    let _ = writeln!(out, "geometry       = {}", preset.geometry.name());
    let _ = writeln!(out, "mesh           = {}", mesh_id(&mesh));
    let _ = writeln!(out, "n              = {}", args.n);
    let _ = writeln!(out, "h_nominal      = {:.5e}", 1.0 / args.n as f64);
    let _ = writeln!(out, "h_max          = {:.5e}", metrics.h);
    let _ = writeln!(out, "nu1            = {:.5e}", metrics.nu1);
    let _ = writeln!(out, "eta            = {:.5e}", params.eta_bounds().0);
    let _ = writeln!(out, "dofs_full      = {}", sol.dofs.total());
    let _ = writeln!(out, "dofs_condensed = {}", sol.dofs.n_trace_dofs);
    if let Some(iters) = info.iterations {
        let _ = writeln!(out, "cg_iterations  = {iters}");
    }
    let _ = writeln!(out, "residual       = {:.5e}", info.residual);
    if preset.data.has_exact() {
        let big_e = h1_broken_error(&mesh, &sol, &ErrorTarget::Exact(&preset.data))?;
        let e = l2_error(&mesh, &sol, &ErrorTarget::Exact(&preset.data))?;
        let _ = writeln!(out, "E_h            = {big_e:.5e}");
        let _ = writeln!(out, "e_h            = {e:.5e}");
    }
    args.common.emit(&out)
}

fn run_convergence(args: ConvergenceArgs) -> Result<(), Error> {
    let levels = parse_levels(&args.levels)?;
    if levels.len() < 3 {
        return Err(Error::InvalidParam(
            "a convergence study needs at least 3 levels".into(),
        ));
    }
    let preset = args.common.preset()?;
    let params = args.common.params(&preset)?;
    let kind: ElementKind = args.common.element.into();
    let method: SolveMethod = args.solver.into();
    let record = convergence_study(&preset, &params, kind, &levels, method, args.tol)?;
    args.common.emit(&record.to_csv())
}

/// Errors per level: against the exact solution when the preset has one,
/// otherwise against the solution on the once-refined mesh of each level.
fn convergence_study(
    preset: &Preset,
    params: &SchemeParams,
    kind: ElementKind,
    levels: &[usize],
    method: SolveMethod,
    tol: f64,
) -> Result<ConvergenceRecord, Error> {
    let mut rows = Vec::with_capacity(levels.len());
    if preset.data.has_exact() {
        for &n in levels {
            let (mesh, sol, _) = solve_level(preset, params, kind, n, method, tol)?;
            let target = ErrorTarget::Exact(&preset.data);
            rows.push((
                1.0 / n as f64,
                h1_broken_error(&mesh, &sol, &target)?,
                l2_error(&mesh, &sol, &target)?,
            ));
        }
    } else {
        // Reuse each solve as the next level's coarse solution.
        let mut solves: Vec<(usize, Mesh, DiscreteSolution)> = Vec::new();
        for &n in levels.iter().chain(std::iter::once(&(2 * levels[levels.len() - 1]))) {
            let (mesh, sol, _) = solve_level(preset, params, kind, n, method, tol)?;
            solves.push((n, mesh, sol));
        }
        for i in 0..levels.len() {
            let (n, ref mesh, ref sol) = solves[i];
            let (_, ref fine_mesh, ref fine_sol) = solves[i + 1];
            let target = ErrorTarget::Reference {
                mesh: fine_mesh,
                solution: fine_sol,
            };
            rows.push((
                1.0 / n as f64,
                h1_broken_error(mesh, sol, &target)?,
                l2_error(mesh, sol, &target)?,
            ));
        }
    }
    rates(&rows)
}

fn run_verify(args: VerifyArgs) -> Result<(), Error> {
    let levels = parse_levels(&args.levels)?;
    let preset = args.common.preset()?;
    let kind: ElementKind = args.common.element.into();
    let etas: Vec<f64> = match &args.etas {
        Some(spec) => spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParam(format!("bad eta `{s}`")))
            })
            .collect::<Result<_, _>>()?,
        None => vec![args.common.eta.unwrap_or_else(|| preset.data.default_eta())],
    };
    let mut out = String::from(CoercivityReport::csv_header());
    out.push('\n');
    for &n in &levels {
        let mesh = build_mesh(preset.geometry, n, kind)?;
        for &eta in &etas {
            let params = SchemeParams::new(args.common.scheme.into(), Penalty::Constant(eta))?;
            let report = coercivity_min_eig(&mesh, &preset.data, &params)?;
            out.push_str(&report.csv_row());
            out.push('\n');
        }
    }
    args.common.emit(&out)
}
