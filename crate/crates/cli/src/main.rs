// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccpb::asymptotics::{
    boundary_expansion, capacitance_limit, coefficient_limits, delta_weights, interior_expansion,
    ExpansionCase, ExpansionQuery,
};
use ccpb::diagnostics::{
    capacitance_numeric, inequality_suite, report_from_solutions, InequalityLedger,
};
use ccpb::solver::ladder_to;
use ccpb::{robin_transform, solve_continuation, Error, ModelParams, Solution};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use config::{Format, LadderSpec, RunConfig};
use output::{ensure_dir, write_json, write_with};

#[derive(Parser)]
#[command(
    name = "ccpb",
    version,
    about = "Charge-conserving Poisson-Boltzmann boundary-layer toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file (JSON if the name ends in `.json`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `model.epsilon`.
    #[arg(long)]
    eps: Option<f64>,
    /// Continuation ladder as START:FACTOR:COUNT.
    #[arg(long, value_parser = LadderSpec::parse)]
    ladder: Option<LadderSpec>,
    /// Format of tabular output.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve at one epsilon: profile and summary.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Continuation along the ladder: one profile per epsilon.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluates the asymptotic predictions only, without solving.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        /// File of queries (`[[queries]]` with `epsilon` and `case`).
        #[arg(long)]
        query: Option<PathBuf>,
        /// Power case `r = R - gamma eps^beta`.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Interior case `r = R - eps^kappa`.
        #[arg(long)]
        kappa: Option<f64>,
        /// Case `r = R - eps^{1 + gamma (log 1/eps)^{-theta}}`, needs `--gamma`.
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Capacitance limits over a gamma grid, optionally against a numeric solve.
    Capacitance {
        #[command(flatten)]
        common: Common,
        /// Replaces `diagnostics.gammas`; repeatable.
        #[arg(long)]
        gamma: Vec<f64>,
        /// Also solve at `eps` and compare.
        #[arg(long)]
        numeric: bool,
    },
    /// Full comparison report along the ladder, with plot scripts.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kappa: Option<f64>,
        /// Replaces `diagnostics.thetas`; repeatable.
        #[arg(long)]
        theta: Vec<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
}

enum Failure {
    Validation(String),
    Solver(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Solver(m) | Failure::Config(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NewtonDiverged { .. }
            | Error::SingularLinearSystem
            | Error::NonFiniteState
            | Error::MeshTooLarge { .. }
            | Error::DegenerateDenominator => Failure::Solver(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("write failed: {e}"))
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Context {
    cfg: RunConfig,
    params: ModelParams,
    out: PathBuf,
    format: Format,
}

impl Context {
    fn new(common: &Common) -> Outcome<Self> {
        let mut cfg = match &common.config {
            Some(path) => RunConfig::load(path).map_err(Failure::Config)?,
            None => RunConfig::default(),
        };
        if let Some(eps) = common.eps {
            cfg.model.epsilon = eps;
        }
        if let Some(l) = &common.ladder {
            cfg.solver.ladder = l.clone();
        }
        if let Some(f) = common.format {
            cfg.output.format = f;
        }
        if let Some(o) = &common.out {
            cfg.output.dir = o.clone();
        }
        let params = cfg.params().map_err(Failure::Config)?;
        Ok(Context {
            out: cfg.output.dir.clone(),
            format: cfg.output.format,
            cfg,
            params,
        })
    }

    fn ladder(&self) -> Outcome<Vec<f64>> {
        self.cfg.ladder().map_err(Failure::Config)
    }

    fn out_dir(&self) -> Outcome<&Path> {
        ensure_dir(&self.out).map_err(Failure::Config)?;
        Ok(&self.out)
    }

    fn solve_at(&self, eps: f64) -> Outcome<Solution> {
        let ladder = ladder_to(eps.max(0.5), eps);
        let mut sols = solve_continuation(
            &self.params,
            &ladder,
            &self.cfg.mesh,
            &self.cfg.newton(),
            self.cfg.solver.seed,
        )?;
        Ok(sols.pop().expect("non-empty ladder"))
    }

    /// The Robin profile when `eta` is configured, the zero-mean one otherwise.
    fn gauged(&self, sol: Solution) -> Solution {
        match self.params.eta {
            Some(eta) => robin_transform(&sol, eta),
            None => sol,
        }
    }

    fn write_profile(&self, dir: &Path, stem: &str, sol: &Solution) -> Outcome<String> {
        let name = match self.format {
            Format::Csv => format!("{stem}.csv"),
            Format::Json => format!("{stem}.json"),
        };
        write_with(dir, &name, |out| match self.format {
            Format::Csv => sol.write_profile_csv(out),
            Format::Json => output::write_profile_json(sol, out),
        })?;
        Ok(name)
    }
}

fn run_solve(common: &Common) -> Outcome<()> {
    let ctx = Context::new(common)?;
    let sol = ctx.gauged(ctx.solve_at(ctx.params.epsilon)?);
    let dir = ctx.out_dir()?;
    ctx.write_profile(dir, "profile", &sol)?;
    write_json(dir, "summary.json", &sol.summary())?;
    println!(
        "eps = {:.6e}: U(0) = {:.10}, U(R) = {:.10}, {} Newton iterations",
        sol.eps(),
        sol.u_center(),
        sol.u_boundary(),
        sol.diagnostics.iterations
    );
    Ok(())
}

fn write_profiles(ctx: &Context, dir: &Path, sols: &[Solution]) -> Outcome<Vec<(String, f64)>> {
    let mut names = Vec::with_capacity(sols.len());
    for (i, s) in sols.iter().enumerate() {
        names.push((
            ctx.write_profile(dir, &format!("profile_{i:03}"), s)?,
            s.eps(),
        ));
    }
    if ctx.format == Format::Csv {
        write_with(dir, "profiles.gp", |out| {
            out.write_all(output::profiles_script(&names).as_bytes())
        })?;
    }
    Ok(names)
}

fn run_sweep(common: &Common) -> Outcome<()> {
    let ctx = Context::new(common)?;
    let ladder = ctx.ladder()?;
    let sols: Vec<Solution> = solve_continuation(
        &ctx.params,
        &ladder,
        &ctx.cfg.mesh,
        &ctx.cfg.newton(),
        ctx.cfg.solver.seed,
    )?
    .into_iter()
    .map(|s| ctx.gauged(s))
    .collect();
    let dir = ctx.out_dir()?;
    write_profiles(&ctx, dir, &sols)?;
    let summaries: Vec<_> = sols.iter().map(|s| s.summary()).collect();
    match ctx.format {
        Format::Json => {
            write_json(dir, "sweep.json", &summaries)?;
        }
        Format::Csv => {
            write_with(dir, "sweep.csv", |out| {
                writeln!(
                    out,
                    "epsilon,nodes,ip,iq,u_center,u_boundary,iterations,residual"
                )?;
                for s in &summaries {
                    writeln!(
                        out,
                        "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
                        s.epsilon,
                        s.nodes,
                        s.ip,
                        s.iq,
                        s.u_center,
                        s.u_boundary,
                        s.iterations,
                        s.residual
                    )?;
                }
                Ok(())
            })?;
        }
    }
    println!(
        "solved {} epsilons, written to {}",
        sols.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryFile {
    queries: Vec<ExpansionQuery>,
}

#[derive(Serialize)]
struct AsymptoticsOutput {
    params: ModelParams,
    boundary: ccpb::asymptotics::BoundaryExpansion,
    coefficients: ccpb::asymptotics::CoefficientLimits,
    delta_weights: ccpb::asymptotics::DeltaWeights,
    results: Vec<ccpb::asymptotics::ExpansionResult>,
}

fn load_queries(path: &Path) -> Outcome<Vec<ExpansionQuery>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let parsed: QueryFile = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
    };
    Ok(parsed.queries)
}

fn run_asymptotics(
    common: &Common,
    query: Option<&Path>,
    beta: Option<f64>,
    gamma: Option<f64>,
    kappa: Option<f64>,
    theta: Option<f64>,
) -> Outcome<()> {
    let ctx = Context::new(common)?;
    let eps = ctx.params.epsilon;
    let queries = match query {
        Some(path) => load_queries(path)?,
        None => {
            let case = match (beta, kappa, theta) {
                (Some(_), Some(_), _) | (Some(_), _, Some(_)) | (_, Some(_), Some(_)) => {
                    return Err(Failure::Config(
                        "give only one of --beta, --kappa, --theta".into(),
                    ))
                }
                (_, Some(kappa), _) => ExpansionCase::Interior { kappa },
                (_, _, Some(theta)) => ExpansionCase::Theta {
                    theta,
                    gamma: gamma.ok_or_else(|| Failure::Config("--theta needs --gamma".into()))?,
                },
                (beta, None, None) => ExpansionCase::Power {
                    beta: beta.unwrap_or(2.0),
                    gamma: gamma.unwrap_or(ctx.cfg.diagnostics.gamma),
                },
            };
            vec![ExpansionQuery { case, epsilon: eps }]
        }
    };
    let results = queries
        .iter()
        .map(|q| interior_expansion(&ctx.params, q))
        .collect::<Result<Vec<_>, _>>()?;
    let doc = AsymptoticsOutput {
        boundary: boundary_expansion(&ctx.params)?,
        coefficients: coefficient_limits(&ctx.params, None),
        delta_weights: delta_weights(&ctx.params),
        params: ctx.params.clone(),
        results,
    };
    let text = serde_json::to_string_pretty(&doc).expect("serializable");
    println!("{text}");
    if common.out.is_some() {
        let dir = ctx.out_dir()?;
        write_with(dir, "asymptotics.json", |out| writeln!(out, "{text}"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CapacitanceRow {
    #[serde(flatten)]
    limit: ccpb::asymptotics::CapacitanceReport,
    numeric: Option<f64>,
}

fn capacitance_rows(
    params: &ModelParams,
    gammas: &[f64],
    sol: Option<&Solution>,
) -> Outcome<Vec<CapacitanceRow>> {
    gammas
        .iter()
        .map(|&g| {
            let numeric = sol.and_then(|s| {
                let eps = s.eps();
                capacitance_numeric(s, params.radius - g * eps * eps).ok()
            });
            Ok(CapacitanceRow {
                limit: capacitance_limit(params, g)?,
                numeric,
            })
        })
        .collect()
}

fn write_capacitance(dir: &Path, format: Format, rows: &[CapacitanceRow]) -> Outcome<()> {
    match format {
        Format::Json => {
            write_json(dir, "capacitance.json", &rows)?;
        }
        Format::Csv => {
            write_with(dir, "capacitance.csv", |out| {
                writeln!(out, "gamma,exact,c1,c2,series,supremum,numeric")?;
                for r in rows {
                    let l = &r.limit;
                    let numeric = r
                        .numeric
                        .map(|v| format!("{v:.16e}"))
                        .unwrap_or_else(|| "nan".into());
                    writeln!(
                        out,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{numeric}",
                        l.gamma, l.exact, l.c1, l.c2, l.series, l.supremum
                    )?;
                }
                Ok(())
            })?;
            let numeric = rows.iter().any(|r| r.numeric.is_some());
            write_with(dir, "capacitance.gp", |out| {
                out.write_all(output::capacitance_script("capacitance.csv", numeric).as_bytes())
            })?;
        }
    }
    Ok(())
}

fn run_capacitance(common: &Common, gammas: &[f64], numeric: bool) -> Outcome<()> {
    let ctx = Context::new(common)?;
    let gammas = if gammas.is_empty() {
        ctx.cfg.diagnostics.gammas.clone()
    } else {
        gammas.to_vec()
    };
    let sol = if numeric {
        Some(ctx.solve_at(ctx.params.epsilon)?)
    } else {
        None
    };
    let rows = capacitance_rows(&ctx.params, &gammas, sol.as_ref())?;
    let dir = ctx.out_dir()?;
    write_capacitance(dir, ctx.format, &rows)?;
    for r in &rows {
        match r.numeric {
            Some(n) => println!(
                "gamma = {:<10} limit = {:.8}  numeric = {:.8}",
                r.limit.gamma, r.limit.exact, n
            ),
            None => println!("gamma = {:<10} limit = {:.8}", r.limit.gamma, r.limit.exact),
        }
    }
    Ok(())
}

fn write_inequalities(dir: &Path, ledgers: &[InequalityLedger]) -> std::io::Result<PathBuf> {
    write_with(dir, "inequalities.csv", |out| {
        writeln!(
            out,
            "epsilon,check,value,lower,upper,margin,applicable,passed"
        )?;
        for l in ledgers {
            for c in &l.checks {
                writeln!(
                    out,
                    "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                    l.epsilon, c.name, c.value, c.lower, c.upper, c.margin, c.applicable, c.passed
                )?;
            }
        }
        Ok(())
    })
}

fn run_validate(
    common: &Common,
    kappa: Option<f64>,
    thetas: &[f64],
    gamma: Option<f64>,
) -> Outcome<()> {
    let ctx = Context::new(common)?;
    let ladder = ctx.ladder()?;
    let mut opts = ctx.cfg.validation();
    if let Some(k) = kappa {
        opts.kappa = k;
    }
    if !thetas.is_empty() {
        opts.thetas = thetas.to_vec();
    }
    if let Some(g) = gamma {
        opts.gamma = g;
    }
    let sols = solve_continuation(&ctx.params, &ladder, &opts.mesh, &opts.newton, opts.seed)?;
    let report = report_from_solutions(&sols, &opts)?;
    let ledgers: Vec<InequalityLedger> = sols.par_iter().map(inequality_suite).collect();

    let dir = ctx.out_dir()?.to_path_buf();
    let dir = dir.as_path();
    match ctx.format {
        Format::Json => {
            write_json(dir, "report.json", &report)?;
            write_json(dir, "inequalities.json", &ledgers)?;
        }
        Format::Csv => {
            write_with(dir, "report_rows.csv", |out| report.write_rows_csv(out))?;
            write_with(dir, "report_checks.csv", |out| report.write_checks_csv(out))?;
            write_inequalities(dir, &ledgers)?;
        }
    }

    let profiles = dir.join("profiles");
    ensure_dir(&profiles).map_err(Failure::Config)?;
    let plot_ctx = Context {
        format: Format::Csv,
        ..ctx
    };
    write_profiles(&plot_ctx, &profiles, &sols)?;

    if !report.neutral {
        let bdy = boundary_expansion(&plot_ctx.params)?;
        write_with(dir, "xi.csv", |out| {
            writeln!(out, "epsilon,xi,xi_limit")?;
            for s in &sols {
                let xi = s.u_boundary() - bdy.leading * (1.0 / s.eps()).ln();
                writeln!(out, "{:.16e},{xi:.16e},{:.16e}", s.eps(), bdy.second)?;
            }
            Ok(())
        })?;
        write_with(dir, "xi.gp", |out| {
            out.write_all(output::xi_script("xi.csv").as_bytes())
        })?;
        let rows = capacitance_rows(
            &plot_ctx.params,
            &plot_ctx.cfg.diagnostics.gammas,
            sols.last(),
        )?;
        write_capacitance(dir, Format::Csv, &rows)?;
    }

    for c in &report.checks {
        println!(
            "{} {:<28} value {:.6e}  target {:.6e}  tolerance {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.tolerance
        );
    }
    let bad: Vec<String> = ledgers
        .iter()
        .flat_map(|l| {
            l.failures()
                .into_iter()
                .map(move |c| format!("{} at eps = {:e}", c.name, l.epsilon))
        })
        .collect();
    for b in &bad {
        println!("FAIL inequality {b}");
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count() + bad.len();
    if failed > 0 {
        return Err(Failure::Validation(format!(
            "{failed} validation checks failed"
        )));
    }
    println!("all checks passed; report in {}", dir.display());
    Ok(())
}

fn configure_threads() -> Outcome<()> {
    let Ok(value) = std::env::var("CCPB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Failure::Config(format!(
                "CCPB_THREADS must be a positive integer (got `{value}`)"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("thread pool: {e}")))
}

fn dispatch(cli: Cli) -> Outcome<()> {
    configure_threads()?;
    match &cli.command {
        Command::Solve { common } => run_solve(common),
        Command::Sweep { common } => run_sweep(common),
        Command::Asymptotics {
            common,
            query,
            beta,
            gamma,
            kappa,
            theta,
        } => run_asymptotics(common, query.as_deref(), *beta, *gamma, *kappa, *theta),
        Command::Capacitance {
            common,
            gamma,
            numeric,
        } => run_capacitance(common, gamma, *numeric),
        Command::Validate {
            common,
            kappa,
            theta,
            gamma,
        } => run_validate(common, *kappa, theta, *gamma),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
