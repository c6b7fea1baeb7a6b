//! Slashing conditions and the accountable-safety verdict for a single state.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::finality::{finality_view_with, FinalityView};
use crate::model::{checkpoint_lt, default_universe, FfgVote, ProtocolState, ValidatorId};
use crate::mutation::Rules;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlashingKind {
    /// E1: two distinct votes with the same target slot.
    #[serde(rename = "E1_double")]
    DoubleVote,
    /// E2: one vote's span strictly surrounds the other's.
    #[serde(rename = "E2_surround")]
    SurroundVote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlashingEvidence {
    pub validator: ValidatorId,
    pub kind: SlashingKind,
    pub vote_a: FfgVote,
    pub vote_b: FfgVote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyVerdict {
    pub disagreement: bool,
    pub slashable: BTreeSet<ValidatorId>,
    pub evidence: Vec<SlashingEvidence>,
    pub holds: bool,
    pub view: FinalityView,
}

pub fn is_slashable_pair(a: &FfgVote, b: &FfgVote) -> Option<SlashingKind> {
    is_slashable_pair_with(a, b, &Rules::STANDARD)
}

/// E1 is checked first; E2 in both orientations of the pair.
pub fn is_slashable_pair_with(a: &FfgVote, b: &FfgVote, rules: &Rules) -> Option<SlashingKind> {
    if a == b {
        return None;
    }
    if rules.double_vote && a.target.c == b.target.c {
        return Some(SlashingKind::DoubleVote);
    }
    let surrounds = |inner: &FfgVote, outer: &FfgVote| {
        checkpoint_lt(&outer.source, &inner.source) && inner.target.c < outer.target.c
    };
    if rules.surround_vote && (surrounds(a, b) || surrounds(b, a)) {
        return Some(SlashingKind::SurroundVote);
    }
    None
}

pub fn slashable_validators(state: &ProtocolState) -> (BTreeSet<ValidatorId>, Vec<SlashingEvidence>) {
    slashable_validators_with(state, &Rules::STANDARD)
}

/// One witness pair per `(validator, kind)`, first in canonical vote order.
pub fn slashable_validators_with(
    state: &ProtocolState,
    rules: &Rules,
) -> (BTreeSet<ValidatorId>, Vec<SlashingEvidence>) {
    let mut slashable = BTreeSet::new();
    let mut evidence = Vec::new();
    for validator in state.signers() {
        let votes: Vec<_> = state.votes_of(validator).collect();
        let mut seen = BTreeSet::new();
        for (i, a) in votes.iter().enumerate() {
            for b in &votes[i + 1..] {
                if let Some(kind) = is_slashable_pair_with(a, b, rules) {
                    slashable.insert(validator);
                    if seen.insert(kind) {
                        evidence.push(SlashingEvidence { validator, kind, vote_a: **a, vote_b: **b });
                    }
                }
            }
        }
    }
    (slashable, evidence)
}

/// Two finalized checkpoints sit on conflicting chains.
pub fn disagreement(state: &ProtocolState, view: &FinalityView) -> bool {
    let blocks: Vec<_> = view.finalized_blocks.iter().copied().collect();
    blocks
        .iter()
        .enumerate()
        .any(|(i, &a)| blocks[i + 1..].iter().any(|&b| state.forest.are_conflicting(a, b).unwrap_or(false)))
}

pub fn accountable_safety(state: &ProtocolState) -> SafetyVerdict {
    accountable_safety_with(state, &Rules::STANDARD)
}

/// Holds iff there is no disagreement or at least `N/3` validators
/// (`3 * |slashable| >= N`) can be slashed.
pub fn accountable_safety_with(state: &ProtocolState, rules: &Rules) -> SafetyVerdict {
    let view = finality_view_with(state, &default_universe(state), rules);
    let disagreement = disagreement(state, &view);
    let (slashable, evidence) = slashable_validators_with(state, rules);
    let holds = !disagreement || 3 * slashable.len() as u64 >= state.n_validators as u64;
    SafetyVerdict { disagreement, slashable, evidence, holds, view }
}
