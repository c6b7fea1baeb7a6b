//! JSON scenario and report files.
//!
//! A scenario names blocks by string id; genesis is implicit (`"genesis"`,
//! slot 0) and each checkpoint's `p` is read from its block. Reports carry a
//! verdict, search counters and optionally a scenario annotated with its
//! justified, finalized and slashable sets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::enumerator::{Bounds, SearchCounters};
use crate::model::{
    BlockForest, BlockGraph, BlockId, Checkpoint, FfgVote, ProtocolState, SignedVote, SlotRule, ValidatorId,
    GENESIS_LABEL,
};
use crate::mutation::Mutation;
use crate::safety::{SafetyVerdict, SlashingKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub n_validators: u32,
    #[serde(default)]
    pub slot_rule: SlotRule,
    #[serde(default)]
    pub blocks: Vec<BlockEntry>,
    #[serde(default)]
    pub votes: Vec<VoteEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub id: String,
    pub slot: u32,
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub block: String,
    pub c: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteEntry {
    pub validator: u32,
    pub source: CheckpointRef,
    pub target: CheckpointRef,
}

/// A checkpoint as reported, with the derived `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub block: String,
    pub c: u32,
    pub p: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkEntry {
    pub source: CheckpointEntry,
    pub target: CheckpointEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub validator: u32,
    pub kind: SlashingKind,
    pub vote_a: LinkEntry,
    pub vote_b: LinkEntry,
}

/// Derived sets of one state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub holds: bool,
    pub disagreement: bool,
    pub justified: Vec<CheckpointEntry>,
    pub finalized: Vec<CheckpointEntry>,
    pub finalized_blocks: Vec<String>,
    pub slashable: Vec<u32>,
    pub evidence: Vec<EvidenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedScenario {
    #[serde(flatten)]
    pub scenario: ScenarioFile,
    #[serde(flatten)]
    pub analysis: Analysis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFile {
    pub command: String,
    pub verdict: String,
    #[serde(default)]
    pub mutation: Mutation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counters: Option<SearchCounters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<AnnotatedScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<AnnotatedScenario>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    /// Malformed JSON or a field of the wrong type.
    Syntax { line: usize, column: usize, message: String },
    /// Well-formed JSON describing an impossible state. `path` names the field.
    Invalid { path: String, message: String },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Syntax { line, column, message } => write!(f, "line {line}, column {column}: {message}"),
            ScenarioError::Invalid { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

fn syntax(e: serde_json::Error) -> ScenarioError {
    ScenarioError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
}

fn invalid(path: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Invalid { path: path.into(), message: message.to_string() }
}

/// What a scenario input turned out to be.
#[derive(Debug, Clone)]
pub struct ParsedInput {
    pub scenario: ScenarioFile,
    /// Set when the input was a report; the mutation its scenario was found under.
    pub report_mutation: Option<Mutation>,
}

/// Parses a scenario, or the scenario embedded in a report (its
/// `counterexample`, else its `scenario`).
pub fn parse_input(text: &str) -> Result<ParsedInput, ScenarioError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(syntax)?;
    if value.get("verdict").is_some() && value.get("n_validators").is_none() {
        let report: ReportFile = serde_json::from_value(value).map_err(|e| invalid("report", e))?;
        let embedded =
            report.counterexample.or(report.scenario).ok_or_else(|| invalid("report", "contains no scenario"))?;
        return Ok(ParsedInput { scenario: embedded.scenario, report_mutation: Some(report.mutation) });
    }
    let scenario = serde_json::from_str(text).map_err(syntax)?;
    Ok(ParsedInput { scenario, report_mutation: None })
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    serde_json::from_str(text).map_err(syntax)
}

impl ScenarioFile {
    pub fn to_state(&self) -> Result<ProtocolState, ScenarioError> {
        if self.n_validators == 0 {
            return Err(invalid("n_validators", "must be positive"));
        }
        let mut graph = BlockGraph::default();
        for (i, b) in self.blocks.iter().enumerate() {
            if b.id == GENESIS_LABEL {
                if b.slot != 0 || b.parent.is_some() {
                    return Err(invalid(format!("blocks[{i}]"), "genesis is implicit with slot 0 and no parent"));
                }
                continue;
            }
            graph.blocks.push((b.id.clone(), b.slot));
            if let Some(p) = &b.parent {
                graph.edges.push((b.id.clone(), p.clone()));
            }
        }
        let forest = BlockForest::from_graph(&graph).map_err(|e| invalid("blocks", e))?;
        let checkpoint = |r: &CheckpointRef, path: String| {
            let block = forest
                .id_of(&r.block)
                .ok_or_else(|| invalid(format!("{path}.block"), format!("unknown block `{}`", r.block)))?;
            Checkpoint::on(&forest, block, r.c).map_err(|e| invalid(path, e))
        };
        let mut votes = Vec::with_capacity(self.votes.len());
        for (i, v) in self.votes.iter().enumerate() {
            if v.validator >= self.n_validators {
                return Err(invalid(
                    format!("votes[{i}].validator"),
                    format!("{} out of range for {} validators", v.validator, self.n_validators),
                ));
            }
            let source = checkpoint(&v.source, format!("votes[{i}].source"))?;
            let target = checkpoint(&v.target, format!("votes[{i}].target"))?;
            votes.push(SignedVote { vote: FfgVote::new(source, target), validator: ValidatorId(v.validator) });
        }
        ProtocolState::new(forest, self.n_validators, votes, self.slot_rule).map_err(|e| invalid("scenario", e))
    }

    /// Blocks in id order without genesis; votes in canonical order.
    pub fn from_state(state: &ProtocolState) -> ScenarioFile {
        let f = &state.forest;
        let blocks = f
            .blocks()
            .iter()
            .skip(1)
            .map(|b| BlockEntry {
                id: b.label.clone(),
                slot: b.slot,
                parent: b.parent.map(|p| f.blocks()[p.index()].label.clone()),
            })
            .collect();
        let cref = |c: &Checkpoint| CheckpointRef { block: label(f, c.block), c: c.c };
        let votes = state
            .votes
            .iter()
            .map(|sv| VoteEntry {
                validator: sv.validator.0,
                source: cref(&sv.vote.source),
                target: cref(&sv.vote.target),
            })
            .collect();
        ScenarioFile { n_validators: state.n_validators, slot_rule: state.slot_rule, blocks, votes }
    }
}

fn label(f: &BlockForest, b: BlockId) -> String {
    f.label(b).map(str::to_owned).unwrap_or_else(|_| b.to_string())
}

fn entry(f: &BlockForest, c: &Checkpoint) -> CheckpointEntry {
    CheckpointEntry { block: label(f, c.block), c: c.c, p: c.p }
}

fn link(f: &BlockForest, v: &FfgVote) -> LinkEntry {
    LinkEntry { source: entry(f, &v.source), target: entry(f, &v.target) }
}

impl Analysis {
    pub fn new(state: &ProtocolState, verdict: &SafetyVerdict) -> Analysis {
        let f = &state.forest;
        Analysis {
            holds: verdict.holds,
            disagreement: verdict.disagreement,
            justified: verdict.view.justified.iter().map(|c| entry(f, c)).collect(),
            finalized: verdict.view.finalized.iter().map(|c| entry(f, c)).collect(),
            finalized_blocks: verdict.view.finalized_blocks.iter().map(|&b| label(f, b)).collect(),
            slashable: verdict.slashable.iter().map(|v| v.0).collect(),
            evidence: verdict
                .evidence
                .iter()
                .map(|e| EvidenceEntry {
                    validator: e.validator.0,
                    kind: e.kind,
                    vote_a: link(f, &e.vote_a),
                    vote_b: link(f, &e.vote_b),
                })
                .collect(),
        }
    }
}

impl AnnotatedScenario {
    pub fn new(state: &ProtocolState, verdict: &SafetyVerdict) -> AnnotatedScenario {
        AnnotatedScenario { scenario: ScenarioFile::from_state(state), analysis: Analysis::new(state, verdict) }
    }
}
