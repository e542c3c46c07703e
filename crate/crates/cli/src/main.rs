//! `msrk`: analyze, generate, optimize and test multistep Runge-Kutta methods.
//!
//! Exit codes: 0 success, 2 usage, 3 validation or parse failure,
//! 4 infeasible search, 5 numerical failure or uncertified result.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use msrk::optimizer::{
    maximize_ssp, warm_start_ladder, write_search_log, MethodArchive, SearchSpec,
};
use msrk::orderlab::{oracle_order, stage_order};
use msrk::pdelab::{
    by_name, convergence_study, csv_field, max_stable_step, run, step_table, write_convergence,
    write_run, write_step_table, Property, SemiDiscretization, StartupMode, StepSearchConfig,
    VDP_GRID,
};
use msrk::theory::{
    gen_second_order, linear_order, r_sk2, stability_polynomials, threshold_factor,
};
use msrk::{format, ssp_coefficient, to_spijker, Execution, MsrkError};

#[derive(Parser)]
#[command(
    name = "msrk",
    version,
    about = "Strong-stability-preserving multistep Runge-Kutta toolkit"
)]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report coefficients, SSP coefficient, orders and bound checks of a method file.
    Analyze { file: PathBuf },
    /// Write the optimal second-order method with `s` stages and `k` steps.
    GenSo2 {
        #[arg(long)]
        stages: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for a method of the given order with the largest SSP coefficient.
    Optimize(OptimizeArgs),
    /// Run a method on a test problem and print the monitors as CSV.
    Run {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        method: PathBuf,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        tf: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest step keeping total variation or positivity, as a table row.
    Stepsearch {
        #[command(flatten)]
        problem: ProblemArgs,
        /// One or more method files; each becomes a row.
        #[arg(long, required = true, num_args = 1..)]
        method: Vec<PathBuf>,
        /// Search one property only and report it in detail.
        #[arg(long)]
        property: Option<PropertyArg>,
        #[arg(long, default_value_t = 0.125)]
        tf: f64,
        /// Bisection width; defaults to 0.001 dt_fe.
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Errors against the reference solution over a grid of step counts, with fitted slope.
    Convergence {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        method: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        tf: f64,
        /// Grid sizes N; the step is tf / (N - 1).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective coefficients of optimal second-order methods.
    Table1 {
        #[arg(long, default_value_t = 8)]
        smax: usize,
        #[arg(long, default_value_t = 5)]
        kmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    stages: usize,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    order: usize,
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Search log; defaults to the output path with a `.csv` extension.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Directory of `.msrk` files used to build warm starts.
    #[arg(long)]
    archive: Option<PathBuf>,
}

#[derive(Args)]
struct ProblemArgs {
    /// vdp, advection or buckley.
    #[arg(long)]
    problem: String,
    /// Startup values; defaults to exact when the problem has an exact solution.
    #[arg(long)]
    startup: Option<StartupArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartupArg {
    Exact,
    Rk3,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Tvd,
    Positivity,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<MsrkError> for Failure {
    fn from(e: MsrkError) -> Self {
        let code = match e {
            MsrkError::Config(_) | MsrkError::Domain(_) => 2,
            MsrkError::Parse(_) | MsrkError::InvalidMethod(_) | MsrkError::Shape { .. } => 3,
            MsrkError::Infeasible { .. } => 4,
            _ => 5,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // A closed pipe (`msrk table1 | head`) ends output quietly.
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure::new(0, "");
        }
        Failure::new(5, format!("i/o error: {e}"))
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match dispatch(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command, exec: Execution) -> CliResult {
    match cmd {
        Command::Analyze { file } => analyze(&file),
        Command::GenSo2 { stages, steps, out } => gen_so2(stages, steps, &out),
        Command::Optimize(args) => optimize(&args, exec),
        Command::Run {
            problem,
            method,
            dt,
            tf,
            out,
        } => {
            let (p, mode) = resolve_problem(&problem)?;
            let m = format::read(&method)?;
            let rec = run(p.as_ref(), &m, dt, tf, mode)?;
            if let Some(err) = rec.error {
                eprintln!("max-norm error at t = {tf}: {err:.6e}");
            }
            write_run(&rec, sink(out.as_deref())?)?;
            Ok(())
        }
        Command::Stepsearch {
            problem,
            method,
            property,
            tf,
            resolution,
            out,
        } => {
            let (p, mode) = resolve_problem(&problem)?;
            let methods = method
                .iter()
                .map(format::read)
                .collect::<Result<Vec<_>, _>>()?;
            let mut cfg = StepSearchConfig::new(tf, mode);
            cfg.resolution = resolution;
            let mut w = sink(out.as_deref())?;
            match property {
                None => write_step_table(&step_table(p.as_ref(), &methods, &cfg, exec)?, &mut w)?,
                Some(prop) => {
                    let prop = match prop {
                        PropertyArg::Tvd => Property::Tvd,
                        PropertyArg::Positivity => Property::Positivity,
                    };
                    writeln!(w, "method,property,dt_max,dt_max/dx,C*dt_fe,resolution")?;
                    for m in &methods {
                        let r = max_stable_step(p.as_ref(), m, prop, &cfg)?;
                        writeln!(
                            w,
                            "{},{},{:.6e},{:.3},{:.6e},{:.3e}",
                            csv_field(&m.label()),
                            r.property,
                            r.dt_max,
                            r.normalized,
                            r.theoretical,
                            r.resolution
                        )?;
                    }
                }
            }
            w.flush()?;
            Ok(())
        }
        Command::Convergence {
            problem,
            method,
            tf,
            grid,
            out,
        } => {
            let (p, mode) = resolve_problem(&problem)?;
            let m = format::read(&method)?;
            let grid = grid.unwrap_or_else(|| VDP_GRID.to_vec());
            let study = convergence_study(p.as_ref(), &m, tf, &grid, mode, exec)?;
            write_convergence(&study, sink(out.as_deref())?)?;
            Ok(())
        }
        Command::Table1 { smax, kmax, out } => table1(smax, kmax, out.as_deref()),
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::new(2, format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn resolve_problem(
    args: &ProblemArgs,
) -> Result<(Box<dyn SemiDiscretization>, StartupMode), Failure> {
    let p = by_name(&args.problem).ok_or_else(|| {
        Failure::new(
            2,
            format!(
                "unknown problem {:?}; expected vdp, advection or buckley",
                args.problem
            ),
        )
    })?;
    let mode = match args.startup {
        Some(StartupArg::Exact) => StartupMode::Exact,
        Some(StartupArg::Rk3) => StartupMode::Rk3Substeps,
        None if p.name() == "buckley" => StartupMode::Rk3Substeps,
        None => StartupMode::Exact,
    };
    Ok((p, mode))
}

fn analyze(path: &Path) -> CliResult {
    let m = format::read(path)?;
    let report = m.validate();
    println!("name: {}", m.name);
    println!("stages: {}", m.stages());
    println!("steps: {}", m.steps());
    println!("claimed order: {}", m.claimed_order);
    if report.is_empty() {
        println!("validation: ok");
    } else {
        println!("validation: {} violation(s)", report.violations.len());
        for v in &report.violations {
            println!("  - {v}");
        }
    }
    if let Some(v) = report.first_structural() {
        return Err(Failure::new(3, format!("{}: {v}", path.display())));
    }

    let sp = to_spijker(&m)?;
    let c = ssp_coefficient(&sp);
    let s = m.stages() as f64;
    let polys = stability_polynomials(&sp);
    let p_oracle = oracle_order(&m, (m.claimed_order + 2).min(12), 2, 1, 1e-9)?;
    println!("C: {c:.6}");
    println!("C_eff: {:.6}", c / s);
    println!("stage order: {}", stage_order(&m, 1e-9));
    println!("linear order: {}", linear_order(&polys, 12, 1e-9));
    println!("oracle order: {p_oracle}");
    println!("threshold factor: {:.6}", threshold_factor(&polys));
    println!(
        "bound C <= s: {}",
        if c <= s + 1e-9 { "ok" } else { "VIOLATED" }
    );
    if p_oracle >= 2 && m.steps() >= 2 {
        let bound = r_sk2(m.stages(), m.steps())?;
        let ok = c <= bound + 1e-8;
        println!(
            "bound C <= R(s,k,2) = {bound:.6}: {}",
            if ok { "ok" } else { "VIOLATED" }
        );
    } else {
        println!("bound C <= R(s,k,2): not applicable");
    }
    if !report.is_empty() {
        eprintln!("warning: the coefficient above belongs to a method that fails validation");
        return Err(Failure::new(
            3,
            format!("{} fails validation", path.display()),
        ));
    }
    Ok(())
}

fn gen_so2(s: usize, k: usize, out: &Path) -> CliResult {
    if s < 2 || k < 2 {
        return Err(Failure::new(
            2,
            format!("gen-so2 needs stages, steps >= 2, got {s}, {k}"),
        ));
    }
    let mut m = gen_second_order(s, k)?;
    m.name = format!("SO2({s},{k})");
    m.claimed_order = 2;
    format::write(out, &m)?;
    println!("wrote {} to {}", m.name, out.display());
    Ok(())
}

fn optimize(args: &OptimizeArgs, exec: Execution) -> CliResult {
    let (s, k, p) = (args.stages, args.steps, args.order);
    if s == 0 || k == 0 || p == 0 {
        return Err(Failure::new(2, "stages, steps and order must be positive"));
    }
    let archive = match &args.archive {
        Some(dir) => MethodArchive::load_dir(dir)?,
        None => MethodArchive::new(),
    };
    let mut spec = SearchSpec::new(s, k, p);
    spec.starts = args.starts;
    spec.seed = args.seed;
    spec.exec = exec;
    spec.warm_starts = warm_start_ladder(&archive, s, k, p);
    let res = maximize_ssp(&spec)?;

    format::write(&args.out, &res.method)?;
    let log = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_extension("csv"));
    let file = File::create(&log)
        .map_err(|e| Failure::new(2, format!("cannot create {}: {e}", log.display())))?;
    let mut w = BufWriter::new(file);
    write_search_log(&res.history, &mut w)?;
    w.flush()?;

    println!("method: {}", res.method.name);
    println!("C: {:.6}", res.c);
    println!("C_eff: {:.6}", res.c_eff);
    println!("oracle order: {}", res.oracle_order);
    println!("certified: {}", res.certified);
    println!("wrote {} and {}", args.out.display(), log.display());
    if res.certified {
        Ok(())
    } else {
        Err(Failure::new(
            5,
            "search finished but the result could not be certified",
        ))
    }
}

fn table1(smax: usize, kmax: usize, out: Option<&Path>) -> CliResult {
    if !(2..=16).contains(&smax) || !(2..=8).contains(&kmax) {
        return Err(Failure::new(
            2,
            format!("need 2 <= smax <= 16 and 2 <= kmax <= 8, got {smax}, {kmax}"),
        ));
    }
    let mut w = sink(out)?;
    let header: Vec<String> = (2..=kmax).map(|k| format!("k={k}")).collect();
    writeln!(w, "s,{}", header.join(","))?;
    let mut mismatches = Vec::new();
    for s in 2..=smax {
        let mut row = Vec::new();
        for k in 2..=kmax {
            let r = r_sk2(s, k)?;
            row.push(format!("{:.5}", r / s as f64));
            if s <= 8 && k <= 5 {
                let c = ssp_coefficient(&to_spijker(&gen_second_order(s, k)?)?);
                if (c - r).abs() > 1e-8 {
                    mismatches.push(format!(
                        "(s,k) = ({s},{k}): generator C = {c:.10}, formula {r:.10}"
                    ));
                }
            }
        }
        writeln!(w, "{s},{}", row.join(","))?;
    }
    w.flush()?;
    if mismatches.is_empty() {
        Ok(())
    } else {
        for m in &mismatches {
            eprintln!("mismatch {m}");
        }
        Err(Failure::new(
            5,
            format!("{} generator/formula mismatches", mismatches.len()),
        ))
    }
}
