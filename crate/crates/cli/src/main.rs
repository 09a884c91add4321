//! `rpareto`: robust Pareto studies and seeded optimizer experiments.
//!
//! Exit status: 0 on success, 1 for invalid input, 2 for evaluator or runtime failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use robust_pareto::engine::run_to_budget;
use robust_pareto::evaluators::{dump_table, EvaluatorSpec};
use robust_pareto::experiment::{
    emit_report, exhaustive, front_table, optimal_from, run_with_optimum, write_robust, ExperimentConfig, Problem,
    DEFAULT_GRID_CAP,
};
use robust_pareto::robust::feasible_count;
use robust_pareto::{Config, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "rpareto",
    version,
    about = "Worst-case robust Pareto analysis and derivative-free search over gridded designs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config with parameters, operating grid, objectives, constraints and engine settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// surrogate-pa, surrogate-lna, table:<path> or exec:<command>.
    #[arg(long, global = true)]
    evaluator: Option<String>,

    /// Overrides the engine seed (the first run's seed for `experiment`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,

    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    runs: Option<u64>,

    /// Threads for sweeps and experiment runs; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,

    /// Relative band around the optimal score, absolute when the optimum is 0.
    #[arg(long, global = true, default_value_t = 0.05)]
    tolerance: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the grid size and write designs.csv.
    Enumerate,
    /// Evaluate every design at every operating value into table.csv.
    Sweep,
    /// Worst-case summaries with feasibility into robust.csv.
    Robust,
    /// Robust Pareto front into front.csv.
    Pareto,
    /// One seeded optimizer run; prints the best design and Score*.
    Optimize,
    /// Repeated seeded runs against the exhaustive optimum; writes report files.
    Experiment,
}

struct Ctx {
    cli: Cli,
    config: Config,
}

impl Ctx {
    fn evaluator(&self) -> Result<EvaluatorSpec> {
        match &self.cli.evaluator {
            Some(s) => s.parse(),
            None => Err(Error::Validation("--evaluator is required for this command".into())),
        }
    }

    fn problem(&self) -> Result<Problem> {
        Problem::from_config(&self.config, &self.evaluator()?)
    }

    fn workers(&self) -> usize {
        self.cli.workers as usize
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        let dir = &self.cli.out;
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        Ok(dir.join(name))
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn enumerate(ctx: &Ctx) -> Result<()> {
    let space = ctx.config.design_space()?;
    println!("{} designs, {} evaluation keys", space.size(), space.evaluation_keys());
    let path = ctx.out_file("designs.csv")?;
    let mut w = csv::Writer::from_writer(create(&path)?);
    let header: Vec<&str> = space.parameters().iter().map(|p| p.name()).collect();
    let table_err = |e: csv::Error| Error::Table(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(table_err)?;
    for d in space.enumerate_grid() {
        w.write_record(d.values.iter().map(f64::to_string)).map_err(table_err)?;
    }
    w.flush().map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(ctx: &Ctx) -> Result<()> {
    let problem = ctx.problem()?;
    let path = ctx.out_file("table.csv")?;
    let rows = dump_table(&path, &problem.space, &*problem.evaluator, ctx.workers())?;
    println!("{rows} rows");
    println!("wrote {}", path.display());
    Ok(())
}

fn robust(ctx: &Ctx) -> Result<()> {
    let problem = ctx.problem()?;
    let summaries = exhaustive(&problem, DEFAULT_GRID_CAP, ctx.workers())?;
    let path = ctx.out_file("robust.csv")?;
    write_robust(create(&path)?, &problem.space, &problem.objectives, &problem.constraints, &summaries)?;
    let feasible = feasible_count(&summaries);
    println!("{} designs: {feasible} feasible, {} infeasible", summaries.len(), summaries.len() - feasible);
    println!("wrote {}", path.display());
    Ok(())
}

fn pareto(ctx: &Ctx) -> Result<()> {
    let problem = ctx.problem()?;
    let front = front_table(&problem, DEFAULT_GRID_CAP, ctx.workers())?;
    let path = ctx.out_file("front.csv")?;
    robust_pareto::experiment::write_front(create(&path)?, &problem.space, &problem.objectives, &front)?;
    println!(
        "optimal: {}, dominated: {}, infeasible: {}",
        front.optimal_count(),
        front.dominated_count(),
        front.infeasible_count()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn optimize(ctx: &Ctx) -> Result<()> {
    let problem = ctx.problem()?;
    let mut engine_cfg = ctx.config.engine_config()?;
    if let Some(seed) = ctx.cli.seed {
        engine_cfg.seed = seed;
    }
    let trials = ctx.cli.trials.unwrap_or(75) as usize;
    let mut engine = problem.engine(engine_cfg)?;
    let trace = run_to_budget(&mut engine, |d| problem.worst_case_vector(d), trials)?;
    let names: Vec<&str> = problem.space.parameters().iter().map(|p| p.name()).collect();
    match engine.best_design() {
        Some(d) => {
            let parts: Vec<String> = names.iter().zip(&d.values).map(|(n, v)| format!("{n}={v}")).collect();
            println!("best design: {}", parts.join(" "));
        }
        None => println!("best design: none (no feasible design found)"),
    }
    println!("Score*: {}", trace.final_score());
    println!("trials: {}, evaluations: {}", engine.trial_count(), engine.evaluation_count());
    Ok(())
}

fn experiment(ctx: &Ctx) -> Result<()> {
    let problem = ctx.problem()?;
    let engine_cfg = ctx.config.engine_config()?;
    let mut cfg =
        ExperimentConfig::new(engine_cfg, ctx.cli.runs.unwrap_or(100) as usize, ctx.cli.trials.unwrap_or(75) as usize);
    if let Some(seed) = ctx.cli.seed {
        cfg.seed_base = seed;
    }
    cfg.tolerance = ctx.cli.tolerance;
    cfg.workers = ctx.workers();
    cfg.validate()?;
    let front = front_table(&problem, cfg.grid_cap, cfg.workers)?;
    let optimal = optimal_from(&front.summaries, &problem.objectives)?;
    let report = run_with_optimum(&problem, &cfg, optimal)?;
    let written = emit_report(&ctx.cli.out, &report, Some((&problem.space, &problem.objectives, &front)))?;

    println!("optimal score: {optimal}");
    let step = (cfg.trials / 5).max(1);
    let mut out = std::io::stdout().lock();
    for row in report.rows.iter().filter(|r| r.n % step == 0 || r.n == cfg.trials) {
        let _ = writeln!(
            out,
            "n = {:>4}  mean Score* = {:.4}  std = {:.4}  within tolerance = {:.0}%",
            row.n,
            row.mean_score_star,
            row.std_score_star,
            100.0 * row.frac_within_tol
        );
    }
    for p in written {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let path = cli.config.clone().ok_or_else(|| Error::Validation("--config is required".into()))?;
    // an unreadable config is bad input, not a runtime failure
    let config = Config::load(&path).map_err(|e| match e {
        Error::Io { .. } => Error::Validation(e.to_string()),
        other => other,
    })?;
    let ctx = Ctx { config, cli };
    match ctx.cli.command {
        Command::Enumerate => enumerate(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Robust => robust(&ctx),
        Command::Pareto => pareto(&ctx),
        Command::Optimize => optimize(&ctx),
        Command::Experiment => experiment(&ctx),
    }
}

fn report(e: &Error) {
    let mut msg = format!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        msg.push_str(&format!("\n  caused by: {s}"));
        source = s.source();
    }
    eprintln!("{msg}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
