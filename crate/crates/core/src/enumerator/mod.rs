//! Bounded exhaustive search over protocol states.
//!
//! The search space is: every forest shape on `n_blocks` non-genesis blocks
//! (or one catalog graph), every slot assignment allowed by the slot mode,
//! every union of at most `max_ffg_votes` valid links and every multiset of
//! per-validator vote subsets of that union with at most `max_votes` signed
//! votes in total.
//!
//! Work units are `(graph, union)` pairs taken in canonical order and run in
//! fixed-size batches; results are merged in order, so reports do not depend
//! on the number of threads.

pub mod forests;
pub mod frame;
pub mod par;
pub mod states;

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{catalog_forest, CatalogId};
use crate::finality::finality_view_with;
use crate::model::{default_universe, BlockForest, ModelError, ProtocolState, SlotRule};
use crate::mutation::{Mutation, Rules};
use crate::safety::{accountable_safety_with, disagreement, SafetyVerdict};

pub use forests::{enumerate_forests, enumerate_forests_with};
use frame::{Frame, Graph, Outcome};
use par::Executor;

/// Units per merge barrier. Fixed so that budgets cut at the same place for
/// every thread count.
const BATCH: usize = 256;
const MAX_ENUM_BLOCKS: usize = 7;

#[derive(Debug, Error)]
pub enum EnumError {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("graph rejected: {0}")]
    Graph(ModelError),
    #[error("replay disagrees with the search evaluator: {0}")]
    ReplayMismatch(String),
}

impl From<ModelError> for EnumError {
    fn from(e: ModelError) -> Self {
        EnumError::Graph(e)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotMode {
    /// slot = depth (detached roots count as depth one)
    #[default]
    Depth,
    /// every strictly increasing assignment up to `max_slot`
    Free,
}

impl FromStr for SlotMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "depth" => Ok(SlotMode::Depth),
            "free" => Ok(SlotMode::Free),
            _ => Err(format!("unknown slot mode `{s}` (expected depth or free)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    /// Non-genesis blocks. Ignored when `graph_filter` is set.
    pub n_blocks: usize,
    /// Largest block slot. In depth mode, deeper enumerated forests are skipped.
    pub max_slot: u32,
    pub max_chkp_slot: u32,
    pub n_validators: u32,
    pub max_ffg_votes: usize,
    pub max_votes: usize,
    pub slot_rule: SlotRule,
    pub slot_mode: SlotMode,
    pub graph_filter: Option<CatalogId>,
    /// Also enumerate forests with parentless non-genesis roots.
    pub detached_roots: bool,
}

impl Bounds {
    pub fn new(n_blocks: usize, n_validators: u32) -> Bounds {
        Bounds {
            n_blocks,
            max_slot: n_blocks as u32,
            max_chkp_slot: 3,
            n_validators,
            max_ffg_votes: 3,
            max_votes: 9,
            slot_rule: SlotRule::Strict,
            slot_mode: SlotMode::Depth,
            graph_filter: None,
            detached_roots: false,
        }
    }

    pub fn validate(&self) -> Result<(), EnumError> {
        let bad = |m: String| Err(EnumError::InvalidBounds(m));
        if self.n_validators == 0 {
            return bad("at least one validator is required".into());
        }
        if self.n_validators > frame::MAX_VALIDATORS {
            return bad(format!("at most {} validators are supported", frame::MAX_VALIDATORS));
        }
        if self.max_ffg_votes > frame::MAX_UNION {
            return bad(format!("max_ffg_votes is limited to {}", frame::MAX_UNION));
        }
        if self.graph_filter.is_none() && self.n_blocks > MAX_ENUM_BLOCKS {
            return bad(format!("forest enumeration is limited to {MAX_ENUM_BLOCKS} blocks"));
        }
        if self.slot_mode == SlotMode::Free && self.max_slot == 0 && self.n_blocks > 0 {
            return bad("max_slot must be positive when blocks are present".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchOptions {
    /// Worker threads; 0 = one per core, 1 = sequential.
    pub jobs: usize,
    /// Maximum number of states visited (checked plus pruned).
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    HoldsExhaustively,
    CounterexampleFound,
    Inconclusive { budget: u64 },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::HoldsExhaustively => "holds-exhaustively",
            Verdict::CounterexampleFound => "counterexample-found",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchCounters {
    pub states_checked: u64,
    pub states_pruned: u64,
    pub graphs_checked: u64,
    /// Graphs skipped because no two of their blocks conflict.
    pub graphs_pruned: u64,
    /// Checked states whose finalized set would differ if finalizing targets
    /// also had to descend from the source block.
    pub reading_divergences: u64,
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub state: ProtocolState,
    pub verdict: SafetyVerdict,
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    pub counters: SearchCounters,
    pub mutation: Mutation,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleProperty {
    FinalizedNongenesis,
    JustifiedNongenesis,
    ConflictingFinalized,
}

impl ExampleProperty {
    pub const ALL: [ExampleProperty; 3] = [
        ExampleProperty::FinalizedNongenesis,
        ExampleProperty::JustifiedNongenesis,
        ExampleProperty::ConflictingFinalized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExampleProperty::FinalizedNongenesis => "finalized-nongenesis",
            ExampleProperty::JustifiedNongenesis => "justified-nongenesis",
            ExampleProperty::ConflictingFinalized => "conflicting-finalized",
        }
    }

    /// Library-side check, used to replay hits.
    pub fn holds_in(self, state: &ProtocolState, rules: &Rules) -> bool {
        let view = finality_view_with(state, &default_universe(state), rules);
        match self {
            ExampleProperty::FinalizedNongenesis => view.finalized.len() > 1,
            ExampleProperty::JustifiedNongenesis => view.justified.len() > 1,
            ExampleProperty::ConflictingFinalized => disagreement(state, &view),
        }
    }

    fn matches(self, o: &Outcome) -> bool {
        match self {
            ExampleProperty::FinalizedNongenesis => o.finalized != 1,
            ExampleProperty::JustifiedNongenesis => o.justified != 1,
            ExampleProperty::ConflictingFinalized => o.disagreement,
        }
    }
}

impl fmt::Display for ExampleProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleProperty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExampleProperty::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            format!(
                "unknown property `{s}` (expected finalized-nongenesis, justified-nongenesis or conflicting-finalized)"
            )
        })
    }
}

#[derive(Debug, Clone)]
pub enum ExampleOutcome {
    Found(Box<ProtocolState>),
    NotFound,
    Inconclusive { budget: u64 },
}

#[derive(Debug, Clone)]
pub struct ExampleReport {
    pub outcome: ExampleOutcome,
    pub counters: SearchCounters,
    pub wall_time: Duration,
}

/// Forest shapes in canonical order, before slot assignment.
fn shapes(bounds: &Bounds) -> Result<Vec<BlockForest>, EnumError> {
    match bounds.graph_filter {
        Some(id) => Ok(vec![catalog_forest(id)?]),
        None => {
            let all = enumerate_forests_with(bounds.n_blocks, bounds.detached_roots);
            Ok(forests::dedup_isomorphic(all))
        }
    }
}

/// The slotted forests a shape contributes under `bounds`.
fn slot_variants(bounds: &Bounds, shape: &BlockForest, enumerated: bool) -> Result<Vec<BlockForest>, EnumError> {
    match bounds.slot_mode {
        SlotMode::Depth => {
            let deepest = shape.blocks().iter().map(|b| b.slot).max().unwrap_or(0);
            Ok(if enumerated && deepest > bounds.max_slot { vec![] } else { vec![shape.clone()] })
        }
        SlotMode::Free => forests::free_slot_assignments(shape, bounds.max_slot)
            .iter()
            .map(|s| shape.with_slots(s).map_err(EnumError::from))
            .collect(),
    }
}

fn compile(bounds: &Bounds, forest: BlockForest) -> Result<Graph, EnumError> {
    Graph::new(Arc::new(forest), bounds.slot_rule, bounds.max_chkp_slot).ok_or_else(|| {
        EnumError::InvalidBounds(format!(
            "a graph exceeds {} blocks or {} checkpoints",
            frame::MAX_BLOCKS,
            frame::MAX_CHECKPOINTS
        ))
    })
}

/// Every graph of the search space, isomorphic copies removed, in canonical order.
pub fn search_graphs(bounds: &Bounds) -> Result<Vec<Arc<Graph>>, EnumError> {
    bounds.validate()?;
    let enumerated = bounds.graph_filter.is_none();
    let mut slotted = Vec::new();
    for shape in shapes(bounds)? {
        slotted.extend(slot_variants(bounds, &shape, enumerated)?);
    }
    forests::dedup_isomorphic(slotted).into_iter().map(|f| compile(bounds, f).map(Arc::new)).collect()
}

/// Every state of the search space, without symmetry-independent pruning.
pub fn all_states(bounds: &Bounds) -> Result<impl Iterator<Item = ProtocolState>, EnumError> {
    let graphs = search_graphs(bounds)?;
    Ok(stream(graphs, bounds.clone()))
}

/// Every state over `forest`: slot assignments per the slot mode (depth
/// mode keeps the forest's own slots), then all canonical vote assignments.
pub fn enumerate_states(
    bounds: &Bounds,
    forest: &BlockForest,
) -> Result<impl Iterator<Item = ProtocolState>, EnumError> {
    states_for_forest(bounds, Arc::new(forest.clone()))
}

pub fn states_for_forest(
    bounds: &Bounds,
    forest: Arc<BlockForest>,
) -> Result<impl Iterator<Item = ProtocolState>, EnumError> {
    bounds.validate()?;
    let graphs = slot_variants(bounds, &forest, false)?
        .into_iter()
        .map(|f| compile(bounds, f).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(stream(graphs, bounds.clone()))
}

fn stream(graphs: Vec<Arc<Graph>>, bounds: Bounds) -> impl Iterator<Item = ProtocolState> {
    graphs.into_iter().flat_map(move |g| {
        let b = bounds.clone();
        states::unions(g.links.len(), b.max_ffg_votes).flat_map(move |union| {
            let mut seqs = Vec::new();
            let _ = states::mask_sequences(union.len(), b.n_validators as usize, b.max_votes, &mut |m| {
                seqs.push(m.to_vec());
                ControlFlow::Continue(())
            });
            let g = g.clone();
            let n = b.n_validators;
            seqs.into_iter().map(move |m| g.state(&union, &m, n))
        })
    })
}

#[derive(Debug, Clone, Copy)]
enum Goal {
    Violation,
    Property(ExampleProperty),
}

impl Goal {
    fn matches(self, o: &Outcome) -> bool {
        match self {
            Goal::Violation => !o.holds,
            Goal::Property(p) => p.matches(o),
        }
    }

    /// Only goals that need two conflicting blocks may skip conflict-free graphs.
    fn needs_conflict(self) -> bool {
        matches!(self, Goal::Violation | Goal::Property(ExampleProperty::ConflictingFinalized))
    }
}

struct Unit {
    graph: usize,
    union: Vec<u16>,
}

#[derive(Default)]
struct UnitResult {
    checked: u64,
    pruned: u64,
    divergences: u64,
    hit: Option<Vec<u64>>,
    capped: bool,
}

fn run_unit(graph: &Graph, union: &[u16], bounds: &Bounds, rules: &Rules, goal: Goal, cap: u64) -> UnitResult {
    let frame = Frame::new(graph, union, bounds.n_validators, rules);
    // every goal needs a justified non-genesis checkpoint, hence a quorum of signers
    let quorum = frame.min_signers();
    let mut r = UnitResult::default();
    let _ = states::mask_sequences(union.len(), bounds.n_validators as usize, bounds.max_votes, &mut |masks| {
        if r.checked + r.pruned >= cap {
            r.capped = true;
            return ControlFlow::Break(());
        }
        if masks.iter().filter(|&&m| m != 0).count() < quorum {
            r.pruned += 1;
            return ControlFlow::Continue(());
        }
        r.checked += 1;
        let o = frame.eval(masks);
        r.divergences += u64::from(o.reading_diverges);
        if goal.matches(&o) {
            r.hit = Some(masks.to_vec());
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    r
}

enum Finish {
    Exhausted,
    Hit(ProtocolState),
    OutOfBudget(u64),
}

fn drive(
    bounds: &Bounds,
    rules: &Rules,
    goal: Goal,
    opts: &SearchOptions,
) -> Result<(Finish, SearchCounters), EnumError> {
    let graphs = search_graphs(bounds)?;
    let mut counters = SearchCounters::default();
    let live: Vec<usize> =
        (0..graphs.len()).filter(|&i| !goal.needs_conflict() || graphs[i].has_conflicting_pair()).collect();
    counters.graphs_pruned = (graphs.len() - live.len()) as u64;

    let max_ffg = bounds.max_ffg_votes;
    let mut units = live
        .iter()
        .flat_map(|&gi| states::unions(graphs[gi].links.len(), max_ffg).map(move |union| Unit { graph: gi, union }));
    let exec = Executor::new(opts.jobs);
    let budget = opts.budget.unwrap_or(u64::MAX);
    let mut visited: u64 = 0;
    let mut last_graph = None;
    loop {
        let batch: Vec<Unit> = units.by_ref().take(BATCH).collect();
        if batch.is_empty() {
            return Ok((Finish::Exhausted, counters));
        }
        let cap = budget - visited;
        let results = exec.map(&batch, |u| run_unit(&graphs[u.graph], &u.union, bounds, rules, goal, cap));
        for (u, r) in batch.iter().zip(results) {
            if last_graph != Some(u.graph) {
                counters.graphs_checked += 1;
                last_graph = Some(u.graph);
            }
            counters.states_checked += r.checked;
            counters.states_pruned += r.pruned;
            counters.reading_divergences += r.divergences;
            visited = visited.saturating_add(r.checked + r.pruned);
            if let Some(masks) = r.hit {
                let state = graphs[u.graph].state(&u.union, &masks, bounds.n_validators);
                return Ok((Finish::Hit(state), counters));
            }
            if r.capped || visited > budget {
                return Ok((Finish::OutOfBudget(budget), counters));
            }
        }
    }
}

/// Exhaustively checks accountable safety under `mutation`. Stops at the
/// first violation in canonical order.
pub fn search(bounds: &Bounds, mutation: Mutation, opts: &SearchOptions) -> Result<SearchReport, EnumError> {
    let start = Instant::now();
    let rules = mutation.rules();
    let (finish, counters) = drive(bounds, &rules, Goal::Violation, opts)?;
    let (verdict, counterexample) = match finish {
        Finish::Exhausted => (Verdict::HoldsExhaustively, None),
        Finish::OutOfBudget(b) => (Verdict::Inconclusive { budget: b }, None),
        Finish::Hit(state) => {
            let verdict = accountable_safety_with(&state, &rules);
            if verdict.holds {
                return Err(EnumError::ReplayMismatch(format!(
                    "state flagged as a violation under {mutation} satisfies accountable safety"
                )));
            }
            (Verdict::CounterexampleFound, Some(Counterexample { state, verdict }))
        }
    };
    Ok(SearchReport { verdict, counterexample, counters, mutation, wall_time: start.elapsed() })
}

/// First state in canonical order with `property`.
pub fn find_example(
    bounds: &Bounds,
    property: ExampleProperty,
    mutation: Mutation,
    opts: &SearchOptions,
) -> Result<ExampleReport, EnumError> {
    let start = Instant::now();
    let rules = mutation.rules();
    let (finish, counters) = drive(bounds, &rules, Goal::Property(property), opts)?;
    let outcome = match finish {
        Finish::Exhausted => ExampleOutcome::NotFound,
        Finish::OutOfBudget(b) => ExampleOutcome::Inconclusive { budget: b },
        Finish::Hit(state) => {
            if !property.holds_in(&state, &rules) {
                return Err(EnumError::ReplayMismatch(format!("state found for {property} does not have it")));
            }
            ExampleOutcome::Found(Box::new(state))
        }
    };
    Ok(ExampleReport { outcome, counters, wall_time: start.elapsed() })
}
