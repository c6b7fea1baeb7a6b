//! SMT-LIB 2 instances over finite sets with cardinality.
//!
//! Hashes, checkpoints and nodes are finite datatypes. Slots and checkpoint
//! slots are unbounded integers, so one instance covers every slot assignment
//! of every tree on `hashes` blocks. All set definitions are ground membership
//! equalities: one per element, instead of set comprehensions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerator::Bounds;
use crate::model::SlotRule;
use crate::mutation::{Mutation, Quorum, Rules};

/// Largest `checkpoints^4 * nodes` accepted; the slashing clauses grow with it.
const MAX_PAIR_TERMS: u64 = 4_000_000;
const MAX_ATOMS: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmitError {
    #[error("refusing to emit: {0}")]
    Refused(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmtQuery {
    /// Satisfiable iff accountable safety can be violated.
    NoAccountableSafety,
    /// Satisfiable iff some checkpoint besides genesis can be finalized.
    FinalizedNonGenesis,
}

impl SmtQuery {
    pub fn name(self) -> &'static str {
        match self {
            SmtQuery::NoAccountableSafety => "no-accountable-safety",
            SmtQuery::FinalizedNonGenesis => "finalized-nongenesis",
        }
    }
}

impl std::str::FromStr for SmtQuery {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no-accountable-safety" => Ok(SmtQuery::NoAccountableSafety),
            "finalized-nongenesis" => Ok(SmtQuery::FinalizedNonGenesis),
            _ => Err(format!("unknown query `{s}` (expected no-accountable-safety or finalized-nongenesis)")),
        }
    }
}

/// Sizes of the finite domains. `hashes` and `checkpoints` include genesis
/// and the genesis checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmtBounds {
    pub hashes: usize,
    pub checkpoints: usize,
    pub nodes: usize,
    pub slot_rule: SlotRule,
    /// Optional upper bound on checkpoint slots; unbounded when absent.
    pub max_checkpoint_slot: Option<u32>,
}

impl SmtBounds {
    pub fn new(hashes: usize, checkpoints: usize, nodes: usize) -> SmtBounds {
        SmtBounds { hashes, checkpoints, nodes, slot_rule: SlotRule::Strict, max_checkpoint_slot: None }
    }

    /// `n_blocks + 1` hashes, `n_validators` nodes and checkpoint slots up to
    /// `max_chkp_slot`. The checkpoint count has no enumerator counterpart
    /// and is passed explicitly; vote counts are not bounded.
    pub fn from_bounds(bounds: &Bounds, checkpoints: usize) -> SmtBounds {
        SmtBounds {
            hashes: bounds.n_blocks + 1,
            checkpoints,
            nodes: bounds.n_validators as usize,
            slot_rule: bounds.slot_rule,
            max_checkpoint_slot: Some(bounds.max_chkp_slot),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtInstance {
    pub text: String,
    pub bounds: SmtBounds,
    pub query: SmtQuery,
    pub mutation: Mutation,
}

pub fn emit_smt(bounds: &SmtBounds, query: SmtQuery) -> Result<SmtInstance, EmitError> {
    emit_smt_with(bounds, query, Mutation::None)
}

pub fn emit_smt_with(bounds: &SmtBounds, query: SmtQuery, mutation: Mutation) -> Result<SmtInstance, EmitError> {
    let SmtBounds { hashes, checkpoints, nodes, .. } = *bounds;
    if nodes == 0 {
        return Err(EmitError::Refused("at least one node is required".into()));
    }
    if hashes == 0 || checkpoints == 0 {
        return Err(EmitError::Refused("genesis and the genesis checkpoint must exist".into()));
    }
    if hashes > MAX_ATOMS || checkpoints > MAX_ATOMS || nodes > MAX_ATOMS {
        return Err(EmitError::Refused(format!("each domain is limited to {MAX_ATOMS} elements")));
    }
    let k = checkpoints as u64;
    if k.pow(4) * nodes as u64 > MAX_PAIR_TERMS {
        return Err(EmitError::Refused(format!(
            "{checkpoints} checkpoints and {nodes} nodes exceed the instance size guard"
        )));
    }
    let text = Emitter::new(*bounds, mutation.rules()).document(query, mutation);
    Ok(SmtInstance { text, bounds: *bounds, query, mutation })
}

struct Emitter {
    b: SmtBounds,
    rules: Rules,
    out: String,
}

fn hash(i: usize) -> String {
    format!("Hash{}", i + 1)
}

fn cp(i: usize) -> String {
    format!("C{}", i + 1)
}

fn node(i: usize) -> String {
    format!("Node{}", i + 1)
}

fn and(terms: &[String]) -> String {
    match terms.len() {
        0 => "true".into(),
        1 => terms[0].clone(),
        _ => format!("(and {})", terms.join(" ")),
    }
}

fn or(terms: &[String]) -> String {
    match terms.len() {
        0 => "false".into(),
        1 => terms[0].clone(),
        _ => format!("(or {})", terms.join(" ")),
    }
}

impl Emitter {
    fn new(b: SmtBounds, rules: Rules) -> Emitter {
        Emitter { b, rules, out: String::new() }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    fn quorum(&self, card: &str) -> String {
        match self.rules.quorum {
            Quorum::TwoThirds => format!("(>= (* 3 {card}) (* 2 N))"),
            Quorum::Half => format!("(>= (* 2 {card}) N)"),
        }
    }

    fn vote(s: usize, t: usize, n: usize) -> String {
        format!("(Vote {} {} {})", cp(s), cp(t), node(n))
    }

    fn document(mut self, query: SmtQuery, mutation: Mutation) -> String {
        let SmtBounds { hashes: h, checkpoints: k, nodes: n, slot_rule, max_checkpoint_slot } = self.b;
        self.line("(set-logic ALL)");
        self.line("(set-option :produce-models true)");
        let max = max_checkpoint_slot.map_or("none".to_string(), |m| m.to_string());
        self.line(format!(
            "; hashes={h} checkpoints={k} nodes={n} max-checkpoint-slot={max} slot-rule={} mutation={} query={}",
            slot_rule.name(),
            mutation.name(),
            query.name()
        ));
        let list = |f: fn(usize) -> String, count: usize| {
            (0..count).map(|i| format!("({})", f(i))).collect::<Vec<_>>().join(" ")
        };
        self.line(format!("(declare-datatype Hash ({}))", list(hash, h)));
        self.line(format!("(declare-datatype Checkpoint ({}))", list(cp, k)));
        self.line(format!("(declare-datatype Node ({}))", list(node, n)));
        self.line("(declare-datatype Vote ((Vote (source Checkpoint) (target Checkpoint) (sender Node))))");
        self.line(format!("(define-fun N () Int {n})"));
        self.line("(define-fun genesis () Hash Hash1)");
        self.line("(define-fun genesis_checkpoint () Checkpoint C1)");

        self.line("");
        self.line("; blocks: every non-genesis block has a parent with a smaller slot");
        self.line("(declare-fun parent_of (Hash) Hash)");
        self.line("(declare-fun slot (Hash) Int)");
        self.line("(assert (= (slot genesis) 0))");
        for i in 1..h {
            self.line(format!("(assert (> (slot {0}) (slot (parent_of {0}))))", hash(i)));
        }
        // ancestry unrolled to the longest possible chain
        self.line("(define-fun anc0 ((a Hash) (d Hash)) Bool (= a d))");
        for depth in 1..h.max(1) {
            self.line(format!(
                "(define-fun anc{depth} ((a Hash) (d Hash)) Bool (or (= a d) (and (not (= d genesis)) (anc{} a (parent_of d)))))",
                depth - 1
            ));
        }
        self.line(format!("(define-fun is_ancestor ((a Hash) (d Hash)) Bool (anc{} a d))", h.max(1) - 1));
        self.line("(declare-const ancestor_descendant_relationship (Relation Hash Hash))");
        self.line("(declare-const conflicting_blocks (Relation Hash Hash))");
        for a in 0..h {
            for d in 0..h {
                let (ha, hd) = (hash(a), hash(d));
                self.line(format!(
                    "(assert (= (set.member (tuple {ha} {hd}) ancestor_descendant_relationship) (is_ancestor {ha} {hd})))"
                ));
                self.line(format!(
                    "(assert (= (set.member (tuple {ha} {hd}) conflicting_blocks) (and (not (is_ancestor {ha} {hd})) (not (is_ancestor {hd} {ha})))))"
                ));
            }
        }
        let anc = |a: String, d: String| format!("(set.member (tuple {a} {d}) ancestor_descendant_relationship)");

        self.line("");
        self.line("; checkpoints: (block, slot); p is the block's slot");
        self.line("(declare-fun checkpoint_block (Checkpoint) Hash)");
        self.line("(declare-fun checkpoint_slot (Checkpoint) Int)");
        self.line("(assert (= (checkpoint_block genesis_checkpoint) genesis))");
        self.line("(assert (= (checkpoint_slot genesis_checkpoint) 0))");
        let rel = match slot_rule {
            SlotRule::Strict => ">",
            SlotRule::Nonstrict => ">=",
        };
        for c in 1..k {
            self.line(format!("(assert ({rel} (checkpoint_slot {0}) (slot (checkpoint_block {0}))))", cp(c)));
            if let Some(m) = max_checkpoint_slot {
                self.line(format!("(assert (<= (checkpoint_slot {}) {m}))", cp(c)));
            }
        }
        self.line("; distinct atoms denote distinct checkpoints");
        for a in 0..k {
            for b in a + 1..k {
                self.line(format!(
                    "(assert (not (and (= (checkpoint_block {0}) (checkpoint_block {1})) (= (checkpoint_slot {0}) (checkpoint_slot {1})))))",
                    cp(a),
                    cp(b)
                ));
            }
        }
        let bl = |c: usize| format!("(checkpoint_block {})", cp(c));
        let sl = |c: usize| format!("(checkpoint_slot {})", cp(c));
        // pre-order on checkpoints; atoms are distinct, so lt needs no extra test
        self.line("(define-fun checkpoint_lt ((x Checkpoint) (y Checkpoint)) Bool (and (not (= x y)) (or (< (checkpoint_slot x) (checkpoint_slot y)) (and (= (checkpoint_slot x) (checkpoint_slot y)) (<= (slot (checkpoint_block x)) (slot (checkpoint_block y)))))))");

        self.line("");
        self.line("; votes: every sent vote is a valid FFG vote");
        self.line("(declare-const votes (Set Vote))");
        for s in 0..k {
            for t in 0..k {
                let valid = and(&[format!("(< {} {})", sl(s), sl(t)), anc(bl(s), bl(t))]);
                for v in 0..n {
                    self.line(format!("(assert (=> (set.member {} votes) {valid}))", Self::vote(s, t, v)));
                }
            }
        }

        self.line("");
        self.line("; justification");
        self.line("(declare-const justified_checkpoints (Set Checkpoint))");
        self.line("; L3: genesis is justified");
        self.line("(assert (set.member genesis_checkpoint justified_checkpoints))");
        for c in 1..k {
            let set = format!("justifying_nodes_{}", cp(c));
            self.line(format!("(declare-const {set} (Set Node))"));
            for v in 0..n {
                let mut links = Vec::new();
                for s in 0..k {
                    for t in 0..k {
                        let mut parts = vec![
                            // L4+5: a valid vote cast by the node
                            format!("(set.member {} votes)", Self::vote(s, t, v)),
                            // L6: justified source
                            format!("(set.member {} justified_checkpoints)", cp(s)),
                        ];
                        if self.rules.justification_ancestry {
                            // L7: source.block ->* c.block ->* target.block
                            parts.push(anc(bl(s), bl(c)));
                            parts.push(anc(bl(c), bl(t)));
                        }
                        // L8: target slot equals the checkpoint slot
                        parts.push(format!("(= {} {})", sl(t), sl(c)));
                        links.push(and(&parts));
                    }
                }
                self.line(format!("(assert (= (set.member {} {set}) {}))", node(v), or(&links)));
            }
            let q = self.quorum(&format!("(set.card {set})"));
            self.line(format!("(assert (= (set.member {} justified_checkpoints) {q}))", cp(c)));
        }

        self.line("");
        self.line("; finalization: a quorum of links from c to checkpoint slot c + 1");
        self.line("(declare-const finalized_checkpoints (Set Checkpoint))");
        self.line("(assert (set.member genesis_checkpoint finalized_checkpoints))");
        for c in 0..k {
            let set = format!("finalizing_nodes_{}", cp(c));
            self.line(format!("(declare-const {set} (Set Node))"));
            for v in 0..n {
                let links: Vec<_> = (0..k)
                    .map(|t| {
                        and(&[
                            format!("(set.member {} votes)", Self::vote(c, t, v)),
                            format!("(= {} (+ {} 1))", sl(t), sl(c)),
                        ])
                    })
                    .collect();
                self.line(format!("(assert (= (set.member {} {set}) {}))", node(v), or(&links)));
            }
            if c > 0 {
                let q = self.quorum(&format!("(set.card {set})"));
                self.line(format!(
                    "(assert (= (set.member {0} finalized_checkpoints) (and (set.member {0} justified_checkpoints) {q})))",
                    cp(c)
                ));
            }
        }
        self.line("(declare-const finalized_blocks (Set Hash))");
        for b in 0..h {
            let from: Vec<_> = (0..k)
                .map(|c| format!("(and (set.member {} finalized_checkpoints) (= {} {}))", cp(c), bl(c), hash(b)))
                .collect();
            self.line(format!("(assert (= (set.member {} finalized_blocks) {}))", hash(b), or(&from)));
        }

        self.line("");
        self.line("; slashing");
        self.line(
            "(define-fun e1 ((t1 Checkpoint) (t2 Checkpoint)) Bool (= (checkpoint_slot t1) (checkpoint_slot t2)))",
        );
        self.line("(define-fun e2 ((s1 Checkpoint) (t1 Checkpoint) (s2 Checkpoint) (t2 Checkpoint)) Bool (and (checkpoint_lt s2 s1) (< (checkpoint_slot t1) (checkpoint_slot t2))))");
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|s| (0..k).map(move |t| (s, t))).collect();
        self.line("(declare-const slashable_nodes (Set Node))");
        for v in 0..n {
            let mut witnesses = Vec::new();
            for (i, &(s1, t1)) in pairs.iter().enumerate() {
                for &(s2, t2) in &pairs[i + 1..] {
                    let mut kinds = Vec::new();
                    if self.rules.double_vote {
                        kinds.push(format!("(e1 {} {})", cp(t1), cp(t2)));
                    }
                    if self.rules.surround_vote {
                        kinds.push(format!("(e2 {} {} {} {})", cp(s1), cp(t1), cp(s2), cp(t2)));
                        kinds.push(format!("(e2 {} {} {} {})", cp(s2), cp(t2), cp(s1), cp(t1)));
                    }
                    if kinds.is_empty() {
                        continue;
                    }
                    witnesses.push(and(&[
                        format!("(set.member {} votes)", Self::vote(s1, t1, v)),
                        format!("(set.member {} votes)", Self::vote(s2, t2, v)),
                        or(&kinds),
                    ]));
                }
            }
            self.line(format!("(assert (= (set.member {} slashable_nodes) {}))", node(v), or(&witnesses)));
        }

        self.line("");
        match query {
            SmtQuery::NoAccountableSafety => {
                self.line("; there is a counterexample to accountable safety");
                let mut conflicts = Vec::new();
                for a in 0..h {
                    for b in a + 1..h {
                        conflicts.push(and(&[
                            format!("(set.member (tuple {} {}) conflicting_blocks)", hash(a), hash(b)),
                            format!("(set.member {} finalized_blocks)", hash(a)),
                            format!("(set.member {} finalized_blocks)", hash(b)),
                        ]));
                    }
                }
                self.line(format!("(assert (and {} (< (* 3 (set.card slashable_nodes)) N)))", or(&conflicts)));
                self.line("(check-sat)");
                self.line("(get-model)");
            }
            SmtQuery::FinalizedNonGenesis => {
                self.line("; find a finalized checkpoint besides genesis");
                self.line("(assert (not (= finalized_checkpoints (set.singleton genesis_checkpoint))))");
                self.line("(check-sat)");
                self.line("(get-model)");
            }
        }
        self.out
    }
}
