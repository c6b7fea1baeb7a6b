//! `ffgmc`: command-line front end for the FFG model checker.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ffgmc_core::enumerator::forests::{dedup_isomorphic, enumerate_forests_with};
use ffgmc_core::enumerator::{EnumError, ExampleOutcome};
use ffgmc_core::scenario::{parse_input, AnnotatedScenario, ReportFile, ScenarioError};
use ffgmc_core::smt::{
    decode_model, emit_smt_with, run_solver, solve_instance, SmtBounds, SmtQuery, SolverOutcome, SOLVER_ENV,
};
use ffgmc_core::{
    accountable_safety_with, find_example, search, Bounds, CatalogId, ExampleProperty, Mutation, SearchOptions,
    SlotMode, SlotRule, Verdict,
};

const EXIT_INPUT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "ffgmc", version, about = "Bounded model checker for FFG accountable safety")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check accountable safety of one scenario (or a report's counterexample).
    Check(CheckArgs),
    /// Search every state within the bounds for a safety violation.
    Search(SearchArgs),
    /// Find the first state with a property.
    Example(ExampleArgs),
    /// Write an SMT-LIB instance.
    EmitSmt(EmitArgs),
    /// Emit an instance (or take a file) and run an external solver on it.
    Solve(SolveArgs),
    /// Count (and optionally list) block forests on N blocks.
    Forests(ForestArgs),
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    scenario: PathBuf,
    /// Rules to check under. Defaults to the report's mutation, else none.
    #[arg(long)]
    mutation: Option<Mutation>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Clone)]
struct BoundsArgs {
    /// Non-genesis blocks.
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 4)]
    validators: u32,
    /// Largest block slot (defaults to the number of blocks).
    #[arg(long)]
    max_slot: Option<u32>,
    #[arg(long, default_value_t = 3)]
    max_chkp_slot: u32,
    /// Distinct FFG links per state.
    #[arg(long, default_value_t = 3)]
    max_ffg: usize,
    /// Signed votes per state.
    #[arg(long, default_value_t = 9)]
    max_votes: usize,
    #[arg(long, default_value = "strict")]
    slot_rule: SlotRule,
    #[arg(long, default_value = "depth")]
    slot_mode: SlotMode,
    /// Restrict the search to one catalog graph.
    #[arg(long)]
    graph: Option<CatalogId>,
    /// Also enumerate forests with parentless roots.
    #[arg(long)]
    detached_roots: bool,
}

impl BoundsArgs {
    fn bounds(&self) -> Bounds {
        Bounds {
            max_slot: self.max_slot.unwrap_or(self.blocks as u32),
            max_chkp_slot: self.max_chkp_slot,
            max_ffg_votes: self.max_ffg,
            max_votes: self.max_votes,
            slot_rule: self.slot_rule,
            slot_mode: self.slot_mode,
            graph_filter: self.graph,
            detached_roots: self.detached_roots,
            ..Bounds::new(self.blocks, self.validators)
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "none")]
    mutation: Mutation,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Stop after visiting this many states.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    bounds: BoundsArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(long)]
    property: ExampleProperty,
    #[command(flatten)]
    bounds: BoundsArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Clone)]
struct SmtArgs {
    /// Hashes including genesis.
    #[arg(long, default_value_t = 3)]
    hashes: usize,
    /// Checkpoints including the genesis checkpoint.
    #[arg(long, default_value_t = 5)]
    checkpoints: usize,
    #[arg(long, default_value_t = 4)]
    validators: usize,
    #[arg(long, default_value = "strict")]
    slot_rule: SlotRule,
    /// Upper bound on checkpoint slots (unbounded by default).
    #[arg(long)]
    max_chkp_slot: Option<u32>,
    #[arg(long, default_value = "none")]
    mutation: Mutation,
    #[arg(long, default_value = "no-accountable-safety")]
    query: SmtQuery,
}

impl SmtArgs {
    fn bounds(&self) -> SmtBounds {
        SmtBounds {
            slot_rule: self.slot_rule,
            max_checkpoint_slot: self.max_chkp_slot,
            ..SmtBounds::new(self.hashes, self.checkpoints, self.validators)
        }
    }
}

#[derive(Args)]
struct EmitArgs {
    #[command(flatten)]
    smt: SmtArgs,
    /// Write the instance here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    smt: SmtArgs,
    /// Solve this SMT-LIB file instead of emitting one.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Solver command; `{file}` is replaced by the instance path.
    #[arg(long, env = SOLVER_ENV, default_value = "cvc5 --sets-exp {file}")]
    solver_cmd: String,
    /// Seconds before the solver is killed.
    #[arg(long)]
    timeout: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long)]
    n: usize,
    /// Print each forest's parent vector.
    #[arg(long)]
    list: bool,
    /// Allow parentless non-genesis roots.
    #[arg(long)]
    detached: bool,
    /// Count isomorphism classes instead of labelled forests.
    #[arg(long)]
    iso: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => check(a),
        Command::Search(a) => run_search(a),
        Command::Example(a) => example(a),
        Command::EmitSmt(a) => emit(a),
        Command::Solve(a) => solve(a),
        Command::Forests(a) => forests(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let input = e.is::<ScenarioError>()
        || e.is::<InputError>()
        || e.is::<std::io::Error>()
        || matches!(e.downcast_ref::<EnumError>(), Some(EnumError::InvalidBounds(_) | EnumError::Graph(_)));
    if input {
        EXIT_INPUT
    } else {
        EXIT_INTERNAL
    }
}

/// Bad user input that is not a scenario or bounds problem.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn write_report(out: Option<&Path>, report: serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_output(out, &text)
}

fn check(a: CheckArgs) -> Result<u8> {
    let text = fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let input = parse_input(&text)?;
    let state = input.scenario.to_state()?;
    let mutation = a.mutation.or(input.report_mutation).unwrap_or_default();
    let verdict = accountable_safety_with(&state, &mutation.rules());
    eprintln!(
        "{}: finalized {}, slashable {}",
        if verdict.holds { "holds" } else { "violated" },
        verdict.view.finalized.len(),
        verdict.slashable.len()
    );
    let report = ReportFile {
        command: "check".into(),
        verdict: if verdict.holds { "holds" } else { "violated" }.into(),
        mutation,
        bounds: None,
        counters: None,
        wall_time_ms: None,
        scenario: Some(AnnotatedScenario::new(&state, &verdict)),
        counterexample: None,
    };
    write_report(a.output.out.as_deref(), serde_json::to_value(&report)?)?;
    Ok(if verdict.holds { 0 } else { 1 })
}

fn options(run: &RunArgs) -> SearchOptions {
    SearchOptions { jobs: run.jobs, budget: run.budget }
}

fn run_search(a: SearchArgs) -> Result<u8> {
    let bounds = a.bounds.bounds();
    let report = search(&bounds, a.run.mutation, &options(&a.run))?;
    let c = &report.counters;
    eprintln!(
        "{}: {} states checked, {} pruned, {} graphs ({} pruned) in {:.2?}",
        report.verdict, c.states_checked, c.states_pruned, c.graphs_checked, c.graphs_pruned, report.wall_time
    );
    let file = ReportFile {
        command: "search".into(),
        verdict: report.verdict.name().into(),
        mutation: report.mutation,
        bounds: Some(bounds),
        counters: Some(report.counters),
        wall_time_ms: Some(report.wall_time.as_millis() as u64),
        scenario: None,
        counterexample: report.counterexample.as_ref().map(|ce| AnnotatedScenario::new(&ce.state, &ce.verdict)),
    };
    write_report(a.output.out.as_deref(), serde_json::to_value(&file)?)?;
    Ok(match report.verdict {
        Verdict::HoldsExhaustively => 0,
        Verdict::CounterexampleFound => 1,
        Verdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
    })
}

fn example(a: ExampleArgs) -> Result<u8> {
    let bounds = a.bounds.bounds();
    let report = find_example(&bounds, a.property, a.run.mutation, &options(&a.run))?;
    let (verdict, scenario, code) = match &report.outcome {
        ExampleOutcome::Found(state) => {
            let v = accountable_safety_with(state, &a.run.mutation.rules());
            ("found", Some(AnnotatedScenario::new(state, &v)), 0)
        }
        ExampleOutcome::NotFound => ("not-found", None, 1),
        ExampleOutcome::Inconclusive { .. } => ("inconclusive", None, EXIT_INCONCLUSIVE),
    };
    eprintln!(
        "{} {}: {} states checked in {:.2?}",
        a.property.name(),
        verdict,
        report.counters.states_checked,
        report.wall_time
    );
    let file = ReportFile {
        command: "example".into(),
        verdict: verdict.into(),
        mutation: a.run.mutation,
        bounds: Some(bounds),
        counters: Some(report.counters),
        wall_time_ms: Some(report.wall_time.as_millis() as u64),
        scenario,
        counterexample: None,
    };
    write_report(a.output.out.as_deref(), serde_json::to_value(&file)?)?;
    Ok(code)
}

fn emit(a: EmitArgs) -> Result<u8> {
    let inst = emit_smt_with(&a.smt.bounds(), a.smt.query, a.smt.mutation).map_err(|e| InputError(e.to_string()))?;
    write_output(a.out.as_deref(), &inst.text)?;
    Ok(0)
}

fn solve(a: SolveArgs) -> Result<u8> {
    let timeout = a.timeout.map(Duration::from_secs);
    let bounds = a.smt.bounds();
    let outcome = match &a.input {
        Some(path) => {
            if !path.exists() {
                return Err(InputError(format!("no such file: {}", path.display())).into());
            }
            run_solver(path, &a.solver_cmd, timeout)?
        }
        None => {
            let inst = emit_smt_with(&bounds, a.smt.query, a.smt.mutation).map_err(|e| InputError(e.to_string()))?;
            solve_instance(&inst, &a.solver_cmd, timeout)?
        }
    };
    let mut report = json!({
        "command": "solve",
        "verdict": outcome.name(),
        "query": a.smt.query.name(),
        "mutation": a.smt.mutation.name(),
    });
    match &outcome {
        SolverOutcome::Sat { model } => {
            report["model"] = json!(model);
            // emitted instances have known bounds, so the model can be replayed
            if a.input.is_none() {
                match decode_model(model, &bounds) {
                    Ok(state) => {
                        let v = accountable_safety_with(&state, &a.smt.mutation.rules());
                        report["decoded"] = serde_json::to_value(AnnotatedScenario::new(&state, &v))?;
                    }
                    Err(e) => report["decode_error"] = json!(e.to_string()),
                }
            }
        }
        SolverOutcome::Unknown { reason } => report["reason"] = json!(reason),
        SolverOutcome::SolverAbsent => report["reason"] = json!(format!("solver not found: `{}`", a.solver_cmd)),
        SolverOutcome::Unsat => {}
    }
    eprintln!("{}", outcome.name());
    write_report(a.output.out.as_deref(), serde_json::to_value(&report)?)?;
    Ok(match outcome {
        SolverOutcome::Unsat => 0,
        SolverOutcome::Sat { .. } => 1,
        SolverOutcome::Unknown { .. } | SolverOutcome::SolverAbsent => EXIT_INCONCLUSIVE,
    })
}

fn forests(a: ForestArgs) -> Result<u8> {
    if a.n > 7 {
        return Err(InputError(format!("--n {} is too large to enumerate (at most 7)", a.n)).into());
    }
    let mut all = enumerate_forests_with(a.n, a.detached);
    if a.iso {
        all = dedup_isomorphic(all);
    }
    let mut out = format!("{}\n", all.len());
    if a.list {
        for f in &all {
            let parents: Vec<String> =
                f.blocks().iter().skip(1).map(|b| b.parent.map_or("-".to_string(), |p| p.0.to_string())).collect();
            out.push_str(&format!("[{}]\n", parents.join(" ")));
        }
    }
    write_output(None, &out)?;
    Ok(0)
}
