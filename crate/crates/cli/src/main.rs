//! `sourcing`: validate equilibria, classify transformations, compute
//! metrics, run plans and evolution experiments.
//!
//! Exit codes: 0 success, 1 domain failure, 2 input or usage error.

mod load;
mod text;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sourcing_core::canonical::{to_canonical_json, to_canonical_line};
use sourcing_core::dsl;
use sourcing_core::netdyn::{evolve, seed_population, NetError, Policy, PolicyKind};
use sourcing_core::plan::{execute, ExecutionState, Status, Strategy};
use sourcing_core::transform::{analyze, PostcondConfig};
use sourcing_core::valuation::{
    cost_estimate, degree_internal_abs, degree_internal_rel, service_provision_degrees,
    ValuationError,
};
use sourcing_core::{validate_equilibrium, Progression, SourceType, UnitId};

#[derive(Debug, Parser)]
#[command(
    name = "sourcing",
    version,
    about = "Sourcing equilibria and their transformations"
)]
struct Cli {
    /// Weight table (JSON) laid over the standard weights.
    #[arg(long, global = true, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Market benchmark (JSON) for relative internal degrees.
    #[arg(long, global = true, value_name = "FILE")]
    benchmark: Option<PathBuf>,
    /// Required fractional weight decrease of the outsourcer, in (0, 1).
    #[arg(long, global = true, default_value_t = 0.25, value_parser = parse_theta)]
    theta: f64,
    /// Compare the insourcer's weight after with the outsourcer's scope
    /// weight before, instead of with its own weight before.
    #[arg(long, global = true)]
    literal_postcond3: bool,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    RoundRobin,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an equilibrium document.
    Validate { file: PathBuf },
    /// Run a plan against an equilibrium and classify the result.
    Classify {
        before: PathBuf,
        plan: PathBuf,
        /// Earlier reports (JSON array, oldest first).
        history: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "round-robin")]
        strategy: StrategyArg,
    },
    /// Costs, internal degrees and service degrees of one unit.
    Metrics {
        file: PathBuf,
        unit: String,
        /// Benchmark market segment.
        #[arg(long, default_value = "all")]
        segment: String,
    },
    /// Execute a plan and print its trace.
    RunPlan {
        plan: PathBuf,
        /// Equilibrium to run against; defaults to the one the plan names.
        #[arg(long)]
        equilibrium: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "round-robin")]
        strategy: StrategyArg,
    },
    /// Grow a population of units by random transformations.
    Evolve {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        units: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Steps between checkpoints; defaults to one checkpoint at the end.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        checkpoint: Option<u64>,
        /// uniform, preferential:E or assortative.
        #[arg(long, default_value = "uniform")]
        policy: PolicyKind,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
        sources_per_unit: u64,
    },
    /// Print an equilibrium or plan as canonical JSON, or as a document.
    Export { file: PathBuf },
}

fn parse_theta(s: &str) -> Result<f64, String> {
    let theta: f64 = s.parse().map_err(|e| format!("{e}"))?;
    PostcondConfig::new(theta, true).map(|c| c.theta)
}

#[derive(Debug)]
pub struct Exit {
    code: u8,
    message: String,
}

impl Exit {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

/// What a command prints to stdout, and how it ends.
struct Output {
    body: String,
    code: u8,
}

impl Output {
    fn ok(body: String) -> Self {
        Self { body, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    let mut stdout = std::io::stdout().lock();
    match result {
        Ok(out) => {
            let _ = stdout.write_all(out.body.as_bytes());
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("{}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: &Cli) -> Result<Output, Exit> {
    match &cli.command {
        Command::Validate { file } => validate(cli, file),
        Command::Classify {
            before,
            plan,
            history,
            strategy,
        } => classify(cli, before, plan, history.as_deref(), *strategy),
        Command::Metrics {
            file,
            unit,
            segment,
        } => metrics(cli, file, unit, segment),
        Command::RunPlan {
            plan,
            equilibrium,
            strategy,
        } => run_plan(cli, plan, equilibrium.as_deref(), *strategy),
        Command::Evolve {
            units,
            steps,
            checkpoint,
            policy,
            sources_per_unit,
        } => evolve_cmd(cli, *units, *steps, *checkpoint, policy, *sources_per_unit),
        Command::Export { file } => export(cli, file),
    }
}

fn strategy(arg: StrategyArg, seed: u64) -> Strategy {
    match arg {
        StrategyArg::RoundRobin => Strategy::RoundRobin,
        StrategyArg::Random => Strategy::SeededRandom(seed),
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn validate(cli: &Cli, file: &std::path::Path) -> Result<Output, Exit> {
    let (eq, diags) = load::equilibrium_unchecked(file)?;
    let report = validate_equilibrium(&eq);
    let code = if report.is_valid() { 0 } else { 1 };
    let body = match cli.format.unwrap_or(Format::Text) {
        Format::Json => with_newline(to_canonical_json(&json!({
            "file": file.display().to_string(),
            "valid": report.is_valid(),
            "findings": report.findings,
            "diagnostics": diags,
        }))),
        Format::Text => {
            let mut s = String::new();
            if diags.is_empty() {
                for f in &report.findings {
                    s.push_str(&format!(
                        "{}: {}: {} {}: {}\n",
                        file.display(),
                        f.rule,
                        f.kind,
                        f.id,
                        f.message
                    ));
                }
            } else {
                s.push_str(&with_newline(load::diagnostics(file, &diags)));
            }
            match report.findings.len() {
                0 => s.push_str("ok\n"),
                1 => s.push_str("1 finding\n"),
                n => s.push_str(&format!("{n} findings\n")),
            }
            s
        }
    };
    Ok(Output { body, code })
}

fn summary(state: &ExecutionState) -> Value {
    let mut v = json!({ "status": state.status, "cursors": state.cursors });
    if let Some(h) = &state.halt {
        v["halt"] = serde_json::to_value(h).expect("halt report serializes");
    }
    v
}

fn classify(
    cli: &Cli,
    before_path: &std::path::Path,
    plan_path: &std::path::Path,
    history: Option<&std::path::Path>,
    strat: StrategyArg,
) -> Result<Output, Exit> {
    let before = load::equilibrium(before_path)?;
    let (plan, _) = load::plan_with_equilibrium(plan_path, Some(before_path))?;
    let history = history.map(load::history).transpose()?.unwrap_or_default();
    let table = load::weights(cli.weights.as_deref())?;
    let config = PostcondConfig::new(cli.theta, !cli.literal_postcond3).map_err(Exit::input)?;
    let format = cli.format.unwrap_or(Format::Text);

    let (state, after) = execute(&before, &plan, strategy(strat, cli.seed));
    if state.status != Status::Completed {
        let body = match format {
            Format::Json => with_newline(to_canonical_line(&summary(&state))),
            Format::Text => format!(
                "{}: {}\n",
                state.status,
                state
                    .halt
                    .as_ref()
                    .map(|h| h.to_string())
                    .unwrap_or_default()
            ),
        };
        return Ok(Output { body, code: 1 });
    }
    let prog = Progression::new(state.executed_steps(&plan), plan.scope.clone())
        .map_err(|e| Exit::input(format!("{}: {e}", plan_path.display())))?;
    let report = analyze(&before, &prog, &after, &history, &table, &config)
        .map_err(|e| Exit::input(e.to_string()))?;
    let body = match format {
        Format::Json => with_newline(to_canonical_json(&report)),
        Format::Text => text::report(&report),
    };
    Ok(Output::ok(body))
}

fn metrics(cli: &Cli, file: &std::path::Path, unit: &str, segment: &str) -> Result<Output, Exit> {
    let eq = load::equilibrium(file)?;
    let unit = UnitId::new(unit);
    let Some(u) = eq.units.get(&unit) else {
        return Err(Exit::domain(format!("unknown unit {unit}")));
    };
    let table = load::weights(cli.weights.as_deref())?.with_defaults_for(&eq);
    let benchmark = load::benchmark(cli.benchmark.as_deref())?;

    let mut costs = Vec::new();
    for sub in &u.subunits {
        let c = cost_estimate(sub, &eq).map_err(|e| Exit::domain(e.to_string()))?;
        costs.push((sub.to_string(), c));
    }

    let mut kinds: Vec<SourceType> = SourceType::BUILTIN.to_vec();
    for s in eq.sources.values() {
        if !kinds.contains(&s.kind) {
            kinds.push(s.kind.clone());
        }
    }
    let mut degrees = Vec::new();
    for kind in kinds {
        let abs = metric(degree_internal_abs(&unit, &kind, &eq, &table))?;
        let rel = match &benchmark {
            Some(b) => Some(metric(degree_internal_rel(
                &unit, &kind, &eq, &table, b, segment,
            ))?),
            None => None,
        };
        degrees.push(text::DegreeRow { kind, abs, rel });
    }
    let services = match service_provision_degrees(&unit, &eq) {
        Ok(d) => Some(d),
        Err(ValuationError::NoServices(_)) => None,
        Err(e) => return Err(Exit::domain(e.to_string())),
    };

    let body = match cli.format.unwrap_or(Format::Text) {
        Format::Text => text::metrics(&unit, &costs, &degrees, services.as_ref()),
        Format::Json => {
            let na = |x: Option<f64>| x.map_or(json!("n/a"), |v| json!(v));
            let rows: Vec<Value> = degrees
                .iter()
                .map(|r| {
                    let mut row = json!({ "type": r.kind.to_string(), "abs": na(r.abs) });
                    if let Some(rel) = r.rel {
                        row["rel"] = na(rel);
                    }
                    row
                })
                .collect();
            let costs: serde_json::Map<String, Value> = costs
                .iter()
                .map(|(s, c)| (s.clone(), serde_json::to_value(c).expect("costs serialize")))
                .collect();
            let services = services.map_or(json!("n/a"), |d| {
                serde_json::to_value(d).expect("degrees serialize")
            });
            with_newline(to_canonical_json(&json!({
                "unit": unit.to_string(),
                "costs": costs,
                "degrees": rows,
                "services": services,
            })))
        }
    };
    Ok(Output::ok(body))
}

/// A degree, or `None` where the unit has nothing to measure.
fn metric(r: Result<f64, ValuationError>) -> Result<Option<f64>, Exit> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(ValuationError::NoSourcesOfType { .. })
        | Err(ValuationError::MissingBenchmark { .. })
        | Err(ValuationError::DegenerateBenchmark(_)) => Ok(None),
        Err(e) => Err(Exit::domain(e.to_string())),
    }
}

fn run_plan(
    cli: &Cli,
    plan_path: &std::path::Path,
    eq_path: Option<&std::path::Path>,
    strat: StrategyArg,
) -> Result<Output, Exit> {
    let (plan, eq) = load::plan_with_equilibrium(plan_path, eq_path)?;
    let (state, _) = execute(&eq, &plan, strategy(strat, cli.seed));
    let mut body = String::new();
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => {
            for turn in &state.trace {
                body.push_str(&to_canonical_line(turn));
                body.push('\n');
            }
            body.push_str(&to_canonical_line(&summary(&state)));
            body.push('\n');
        }
        Format::Text => body = text::trace(&state),
    }
    let code = if state.status == Status::Completed {
        0
    } else {
        1
    };
    Ok(Output { body, code })
}

fn evolve_cmd(
    cli: &Cli,
    units: u64,
    steps: u64,
    checkpoint: Option<u64>,
    policy: &PolicyKind,
    sources_per_unit: u64,
) -> Result<Output, Exit> {
    let eq = seed_population(units as usize, sources_per_unit as usize);
    let policy = Policy::new(*policy, cli.seed);
    let every = checkpoint.unwrap_or(steps);
    let stats = evolve(&eq, &policy, steps as usize, every as usize).map_err(|e| match e {
        NetError::PolicyExhausted(_) => Exit::domain(e.to_string()),
        _ => Exit::input(e.to_string()),
    })?;
    let body = match cli.format.unwrap_or(Format::Text) {
        Format::Text => stats.to_csv(),
        Format::Json => with_newline(to_canonical_json(&stats)),
    };
    Ok(Output::ok(body))
}

fn export(cli: &Cli, file: &std::path::Path) -> Result<Output, Exit> {
    let is_plan = file.extension().is_some_and(|e| e == "mpl");
    let format = cli.format.unwrap_or(Format::Json);
    let body = if is_plan {
        let plan = load::plan_text(file)?;
        match format {
            Format::Json => to_canonical_json(&plan),
            Format::Text => dsl::print_plan(&plan),
        }
    } else {
        let eq = load::equilibrium(file)?;
        match format {
            Format::Json => dsl::export_json(&eq),
            Format::Text => dsl::print_equilibrium(&eq),
        }
    };
    Ok(Output::ok(with_newline(body)))
}
