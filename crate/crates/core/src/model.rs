//! Blocks, checkpoints, FFG votes and protocol states.
//!
//! A [`BlockForest`] is the set of proposed blocks. Block `0` is always the
//! genesis block; every other block either points at a parent or is a
//! detached root (a partially received chain). A chain is identified with its
//! tip block, so prefix and conflict questions are answered on block ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label used for the genesis block at the file-format boundary.
pub const GENESIS_LABEL: &str = "genesis";

/// Dense block identifier. `BlockId::GENESIS` exists in every forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u16);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_genesis(self) -> bool {
        self == Self::GENESIS
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Validator index in `[0, N)`. Every validator has stake 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ValidatorId(pub u32);

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("unknown block label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate block label `{0}`")]
    DuplicateLabel(String),
    #[error("block `{0}` has more than one parent")]
    MultipleParents(String),
    #[error("parent relation has a cycle through `{0}`")]
    Cycle(String),
    #[error(
        "block `{child}` (slot {child_slot}) must have a larger slot than its parent `{parent}` (slot {parent_slot})"
    )]
    SlotNotIncreasing { child: String, child_slot: u32, parent: String, parent_slot: u32 },
    #[error("genesis must have slot 0 and no parent")]
    MalformedGenesis,
    #[error("validator {validator} out of range for N = {n}")]
    ValidatorOutOfRange { validator: ValidatorId, n: u32 },
    #[error("the number of validators must be positive")]
    NoValidators,
    #[error("checkpoint bound must be non-negative, got {0}")]
    NegativeBound(i64),
}

/// Whether a non-genesis checkpoint needs `c > p` or only `c >= p`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotRule {
    #[default]
    Strict,
    #[serde(alias = "non-strict")]
    Nonstrict,
}

impl SlotRule {
    pub fn admits(self, c: u32, p: u32) -> bool {
        match self {
            SlotRule::Strict => c > p,
            SlotRule::Nonstrict => c >= p,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SlotRule::Strict => "strict",
            SlotRule::Nonstrict => "nonstrict",
        }
    }
}

impl std::str::FromStr for SlotRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(SlotRule::Strict),
            "nonstrict" | "non-strict" => Ok(SlotRule::Nonstrict),
            other => Err(format!("unknown slot rule `{other}` (expected strict|nonstrict)")),
        }
    }
}

/// One proposed block. `parent` is absent for genesis and for detached roots.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub id: BlockId,
    pub label: String,
    pub slot: u32,
    pub parent: Option<BlockId>,
}

/// An edge-list description of a block graph, validated into a [`BlockForest`].
#[derive(Debug, Clone, Default)]
pub struct BlockGraph {
    /// Non-genesis blocks with their slots, in id order.
    pub blocks: Vec<(String, u32)>,
    /// `(child, parent)` label pairs. Genesis is addressed as [`GENESIS_LABEL`].
    pub edges: Vec<(String, String)>,
}

/// A validated forest of blocks. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockForest {
    blocks: Vec<Block>,
}

impl BlockForest {
    pub fn genesis_only() -> Self {
        BlockForest {
            blocks: vec![Block { id: BlockId::GENESIS, label: GENESIS_LABEL.to_string(), slot: 0, parent: None }],
        }
    }

    /// Builds a forest from `(label, slot, parent)` triples for the non-genesis
    /// blocks. Ids are assigned in order, starting at 1.
    pub fn from_parents<S: AsRef<str>>(blocks: &[(S, u32, Option<BlockId>)]) -> Result<Self, ModelError> {
        let mut all = Self::genesis_only().blocks;
        for (i, (label, slot, parent)) in blocks.iter().enumerate() {
            all.push(Block {
                id: BlockId((i + 1) as u16),
                label: label.as_ref().to_string(),
                slot: *slot,
                parent: *parent,
            });
        }
        Self::from_blocks(all)
    }

    /// Validates a full block vector (genesis at index 0, ids dense).
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self, ModelError> {
        let genesis = blocks.first().ok_or(ModelError::MalformedGenesis)?;
        if genesis.slot != 0 || genesis.parent.is_some() || genesis.id != BlockId::GENESIS {
            return Err(ModelError::MalformedGenesis);
        }
        let mut labels = BTreeSet::new();
        for (i, b) in blocks.iter().enumerate() {
            if b.id.index() != i {
                return Err(ModelError::UnknownBlock(b.id));
            }
            if !labels.insert(b.label.as_str()) {
                return Err(ModelError::DuplicateLabel(b.label.clone()));
            }
            if let Some(p) = b.parent {
                if p.index() >= blocks.len() {
                    return Err(ModelError::UnknownBlock(p));
                }
            }
        }
        // Acyclicity: every parent walk must end within |blocks| steps.
        for b in &blocks {
            let mut cur = b.parent;
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > blocks.len() {
                    return Err(ModelError::Cycle(b.label.clone()));
                }
                cur = blocks[p.index()].parent;
            }
        }
        for b in &blocks {
            if let Some(p) = b.parent {
                let parent = &blocks[p.index()];
                if parent.slot >= b.slot {
                    return Err(ModelError::SlotNotIncreasing {
                        child: b.label.clone(),
                        child_slot: b.slot,
                        parent: parent.label.clone(),
                        parent_slot: parent.slot,
                    });
                }
            }
        }
        Ok(BlockForest { blocks })
    }

    /// Validates an arbitrary edge list. Cycles are reported before
    /// multi-parent blocks, and both before slot violations.
    pub fn from_graph(graph: &BlockGraph) -> Result<Self, ModelError> {
        let mut ids = BTreeMap::new();
        ids.insert(GENESIS_LABEL.to_string(), 0usize);
        let mut names = vec![GENESIS_LABEL.to_string()];
        for (label, _) in &graph.blocks {
            if ids.insert(label.clone(), names.len()).is_some() {
                return Err(ModelError::DuplicateLabel(label.clone()));
            }
            names.push(label.clone());
        }
        let lookup = |l: &String| ids.get(l).copied().ok_or_else(|| ModelError::UnknownLabel(l.clone()));
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
        for (child, parent) in &graph.edges {
            let c = lookup(child)?;
            let p = lookup(parent)?;
            parents[c].push(p);
        }
        // Cycle detection over the full edge relation (child -> parent).
        let mut state = vec![0u8; names.len()];
        fn visit(v: usize, parents: &[Vec<usize>], state: &mut [u8]) -> Option<usize> {
            state[v] = 1;
            for &p in &parents[v] {
                match state[p] {
                    1 => return Some(p),
                    0 => {
                        if let Some(c) = visit(p, parents, state) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
            state[v] = 2;
            None
        }
        for v in 0..names.len() {
            if state[v] == 0 {
                if let Some(c) = visit(v, &parents, &mut state) {
                    return Err(ModelError::Cycle(names[c].clone()));
                }
            }
        }
        if let Some(v) = parents.iter().position(|ps| ps.len() > 1) {
            return Err(ModelError::MultipleParents(names[v].clone()));
        }
        if !parents[0].is_empty() {
            return Err(ModelError::MalformedGenesis);
        }
        let mut blocks = Self::genesis_only().blocks;
        for (i, (label, slot)) in graph.blocks.iter().enumerate() {
            blocks.push(Block {
                id: BlockId((i + 1) as u16),
                label: label.clone(),
                slot: *slot,
                parent: parents[i + 1].first().map(|&p| BlockId(p as u16)),
            });
        }
        Self::from_blocks(blocks)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    /// Always false: genesis is present in every forest.
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.blocks.iter().map(|b| b.id)
    }

    pub fn get(&self, id: BlockId) -> Result<&Block, ModelError> {
        self.blocks.get(id.index()).ok_or(ModelError::UnknownBlock(id))
    }

    pub fn contains(&self, id: BlockId) -> bool {
        id.index() < self.blocks.len()
    }

    pub fn slot(&self, id: BlockId) -> Result<u32, ModelError> {
        Ok(self.get(id)?.slot)
    }

    pub fn label(&self, id: BlockId) -> Result<&str, ModelError> {
        Ok(self.get(id)?.label.as_str())
    }

    pub fn id_of(&self, label: &str) -> Option<BlockId> {
        self.blocks.iter().find(|b| b.label == label).map(|b| b.id)
    }

    /// Number of parent links from `id` to its root (genesis or detached).
    pub fn depth(&self, id: BlockId) -> Result<u32, ModelError> {
        let mut d = 0;
        let mut cur = self.get(id)?.parent;
        while let Some(p) = cur {
            d += 1;
            cur = self.blocks[p.index()].parent;
        }
        Ok(d)
    }

    /// `a` is reached from `d` by following zero or more parent links.
    pub fn is_ancestor(&self, a: BlockId, d: BlockId) -> Result<bool, ModelError> {
        self.get(a)?;
        let mut cur = Some(self.get(d)?.id);
        while let Some(b) = cur {
            if b == a {
                return Ok(true);
            }
            cur = self.blocks[b.index()].parent;
        }
        Ok(false)
    }

    /// Neither chain is a prefix of the other.
    pub fn are_conflicting(&self, a: BlockId, b: BlockId) -> Result<bool, ModelError> {
        Ok(!self.is_ancestor(a, b)? && !self.is_ancestor(b, a)?)
    }

    /// True if some pair of blocks conflicts. Forests without such a pair
    /// can never violate accountable safety.
    pub fn has_conflicting_pair(&self) -> bool {
        let ids: Vec<_> = self.ids().collect();
        ids.iter().enumerate().any(|(i, &a)| ids[i + 1..].iter().any(|&b| self.are_conflicting(a, b).unwrap_or(false)))
    }

    /// Copy of this forest with new slots (indexed by block id, genesis first).
    pub fn with_slots(&self, slots: &[u32]) -> Result<Self, ModelError> {
        let blocks = self.blocks.iter().zip(slots).map(|(b, &s)| Block { slot: s, ..b.clone() }).collect();
        Self::from_blocks(blocks)
    }
}

/// `(block, c, p)`: chain `block` proposed for justification at slot `c`;
/// `p` is the block's own slot.
///
/// The derived `Ord` sorts by `(c, p, block)` and only serves deterministic
/// iteration; the protocol's pre-order is [`checkpoint_le`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Checkpoint {
    pub block: BlockId,
    pub c: u32,
    pub p: u32,
}

impl Checkpoint {
    pub const GENESIS: Checkpoint = Checkpoint { block: BlockId::GENESIS, c: 0, p: 0 };

    pub fn new(block: BlockId, c: u32, p: u32) -> Self {
        Checkpoint { block, c, p }
    }

    /// Checkpoint on `block` at slot `c`, with `p` read from the forest.
    pub fn on(forest: &BlockForest, block: BlockId, c: u32) -> Result<Self, ModelError> {
        Ok(Checkpoint { block, c, p: forest.slot(block)? })
    }

    pub fn is_genesis(&self) -> bool {
        *self == Self::GENESIS
    }
}

impl Ord for Checkpoint {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.c, self.p, self.block).cmp(&(other.c, other.p, other.block))
    }
}

impl PartialOrd for Checkpoint {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.block, self.c, self.p)
    }
}

/// Total pre-order on checkpoints: smaller `c`, or equal `c` and `p <= p'`.
pub fn checkpoint_le(x: &Checkpoint, y: &Checkpoint) -> bool {
    x.c < y.c || (x.c == y.c && x.p <= y.p)
}

/// `x <= y` and `x != y` (full triple inequality). Two distinct checkpoints
/// with equal `c` and `p` are each `<` the other.
pub fn checkpoint_lt(x: &Checkpoint, y: &Checkpoint) -> bool {
    checkpoint_le(x, y) && x != y
}

/// An FFG link `source -> target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FfgVote {
    pub source: Checkpoint,
    pub target: Checkpoint,
}

impl FfgVote {
    pub fn new(source: Checkpoint, target: Checkpoint) -> Self {
        FfgVote { source, target }
    }
}

impl fmt::Display for FfgVote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source, self.target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignedVote {
    pub vote: FfgVote,
    pub validator: ValidatorId,
}

/// One complete configuration. Justified, finalized and slashable sets are
/// derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolState {
    pub forest: Arc<BlockForest>,
    pub n_validators: u32,
    pub votes: BTreeSet<SignedVote>,
    pub slot_rule: SlotRule,
}

impl ProtocolState {
    pub fn new(
        forest: impl Into<Arc<BlockForest>>,
        n_validators: u32,
        votes: impl IntoIterator<Item = SignedVote>,
        slot_rule: SlotRule,
    ) -> Result<Self, ModelError> {
        let forest = forest.into();
        if n_validators == 0 {
            return Err(ModelError::NoValidators);
        }
        let votes: BTreeSet<_> = votes.into_iter().collect();
        for sv in &votes {
            if sv.validator.0 >= n_validators {
                return Err(ModelError::ValidatorOutOfRange { validator: sv.validator, n: n_validators });
            }
            for cp in [sv.vote.source, sv.vote.target] {
                forest.get(cp.block)?;
            }
        }
        Ok(ProtocolState { forest, n_validators, votes, slot_rule })
    }

    /// State with no votes.
    pub fn empty(
        forest: impl Into<Arc<BlockForest>>,
        n_validators: u32,
        slot_rule: SlotRule,
    ) -> Result<Self, ModelError> {
        Self::new(forest, n_validators, [], slot_rule)
    }

    /// Largest target slot among the votes (0 when there are none).
    pub fn max_target_slot(&self) -> u32 {
        self.votes.iter().map(|v| v.vote.target.c).max().unwrap_or(0)
    }

    /// Validators that signed at least one vote.
    pub fn signers(&self) -> BTreeSet<ValidatorId> {
        self.votes.iter().map(|v| v.validator).collect()
    }

    /// Votes signed by `validator`, in canonical order.
    pub fn votes_of(&self, validator: ValidatorId) -> impl Iterator<Item = &FfgVote> + '_ {
        self.votes.iter().filter(move |v| v.validator == validator).map(|v| &v.vote)
    }
}

pub fn is_valid_checkpoint(state: &ProtocolState, cp: &Checkpoint) -> Result<bool, ModelError> {
    valid_checkpoint_in(&state.forest, state.slot_rule, cp)
}

pub(crate) fn valid_checkpoint_in(forest: &BlockForest, rule: SlotRule, cp: &Checkpoint) -> Result<bool, ModelError> {
    let slot = forest.slot(cp.block)?;
    Ok(cp.p == slot && (cp.is_genesis() || rule.admits(cp.c, cp.p)))
}

/// Both checkpoints valid, `source.c < target.c`, and the source chain is a
/// prefix of the target chain.
pub fn is_valid_ffg_vote(state: &ProtocolState, v: &FfgVote) -> Result<bool, ModelError> {
    Ok(is_valid_checkpoint(state, &v.source)?
        && is_valid_checkpoint(state, &v.target)?
        && v.source.c < v.target.c
        && state.forest.is_ancestor(v.source.block, v.target.block)?)
}

/// Every valid checkpoint of the forest with `c <= bound`, in `(c, p, block)`
/// order.
pub fn valid_checkpoints(forest: &BlockForest, rule: SlotRule, bound: u32) -> Vec<Checkpoint> {
    let mut out = Vec::new();
    for c in 0..=bound {
        for b in forest.blocks() {
            let cp = Checkpoint::new(b.id, c, b.slot);
            if valid_checkpoint_in(forest, rule, &cp).unwrap_or(false) {
                out.push(cp);
            }
        }
    }
    out.sort();
    out
}

/// Candidate checkpoint universe of a state: all valid checkpoints with
/// `c <= bound` plus every checkpoint mentioned by a vote.
pub fn checkpoints_of(state: &ProtocolState, bound: i64) -> Result<BTreeSet<Checkpoint>, ModelError> {
    if bound < 0 {
        return Err(ModelError::NegativeBound(bound));
    }
    let bound = u32::try_from(bound).unwrap_or(u32::MAX);
    let mut out: BTreeSet<_> = valid_checkpoints(&state.forest, state.slot_rule, bound).into_iter().collect();
    for sv in &state.votes {
        out.insert(sv.vote.source);
        out.insert(sv.vote.target);
    }
    Ok(out)
}

/// The universe used for finality: bound = max target slot + 1.
pub fn default_universe(state: &ProtocolState) -> BTreeSet<Checkpoint> {
    checkpoints_of(state, state.max_target_slot() as i64 + 1).expect("non-negative bound")
}
