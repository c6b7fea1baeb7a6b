//! Bitset evaluator used by the search loop.
//!
//! A [`Graph`] is one forest with fixed slots, its valid checkpoints up to the
//! checkpoint bound and every valid link between them. A [`Frame`] compiles
//! one subset of those links (the union of all validators' votes) under a set
//! of [`Rules`]; states are then just one vote mask per validator.
//!
//! This route is independent from the library functions in `finality` and
//! `safety`: tests compare the two on random states, and every search hit is
//! replayed through the library before it is reported.

use std::sync::Arc;

use crate::model::{
    valid_checkpoints, BlockForest, Checkpoint, FfgVote, ProtocolState, SignedVote, SlotRule, ValidatorId,
};
use crate::mutation::{Quorum, Rules};

pub const MAX_CHECKPOINTS: usize = 128;
pub const MAX_BLOCKS: usize = 64;
pub const MAX_VALIDATORS: u32 = 64;
pub const MAX_UNION: usize = 64;

#[derive(Debug)]
pub struct Graph {
    pub forest: Arc<BlockForest>,
    pub slot_rule: SlotRule,
    pub checkpoints: Vec<Checkpoint>,
    /// Valid links as `(source, target)` checkpoint indices, in `FfgVote` order.
    pub links: Vec<(u8, u8)>,
    /// `desc[b]`: blocks having `b` as ancestor, `b` included.
    desc: Vec<u64>,
    conflicts: Vec<u64>,
}

impl Graph {
    /// `None` when the forest or its universe exceeds the bitset widths.
    pub fn new(forest: Arc<BlockForest>, slot_rule: SlotRule, max_chkp_slot: u32) -> Option<Graph> {
        let n = forest.len();
        if n > MAX_BLOCKS {
            return None;
        }
        let checkpoints = valid_checkpoints(&forest, slot_rule, max_chkp_slot);
        if checkpoints.len() > MAX_CHECKPOINTS {
            return None;
        }
        let mut desc = vec![0u64; n];
        for d in forest.ids() {
            let mut cur = Some(d);
            while let Some(a) = cur {
                desc[a.index()] |= 1 << d.index();
                cur = forest.blocks()[a.index()].parent;
            }
        }
        let conflicts = (0..n)
            .map(|a| (0..n).filter(|&b| desc[a] >> b & 1 == 0 && desc[b] >> a & 1 == 0).fold(0u64, |m, b| m | 1 << b))
            .collect();
        let mut links = Vec::new();
        for (si, s) in checkpoints.iter().enumerate() {
            for (ti, t) in checkpoints.iter().enumerate() {
                if s.c < t.c && desc[s.block.index()] >> t.block.index() & 1 == 1 {
                    links.push((si as u8, ti as u8));
                }
            }
        }
        // checkpoints are sorted, so links are in (source, target) order already
        Some(Graph { forest, slot_rule, checkpoints, links, desc, conflicts })
    }

    pub fn link(&self, i: usize) -> FfgVote {
        let (s, t) = self.links[i];
        FfgVote::new(self.checkpoints[s as usize], self.checkpoints[t as usize])
    }

    fn ancestor(&self, a: usize, d: usize) -> bool {
        self.desc[a] >> d & 1 == 1
    }

    pub fn has_conflicting_pair(&self) -> bool {
        self.conflicts.iter().any(|&m| m != 0)
    }

    /// Materializes a state: validator `i` signs the links of `union` selected by `masks[i]`.
    pub fn state(&self, union: &[u16], masks: &[u64], n_validators: u32) -> ProtocolState {
        let mut votes = Vec::new();
        for (i, &m) in masks.iter().enumerate() {
            for (j, &l) in union.iter().enumerate() {
                if m >> j & 1 == 1 {
                    votes.push(SignedVote { vote: self.link(l as usize), validator: ValidatorId(i as u32) });
                }
            }
        }
        ProtocolState::new(self.forest.clone(), n_validators, votes, self.slot_rule)
            .expect("enumerated states are well formed")
    }
}

/// Result of evaluating one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub justified: u128,
    pub finalized: u128,
    pub disagreement: bool,
    /// Slashable validators. Only computed when there is a disagreement; 0 otherwise.
    pub slashable: u64,
    pub holds: bool,
    /// Finalization would change if finalizing targets also had to descend from the source.
    pub reading_diverges: bool,
}

pub struct Frame<'g> {
    graph: &'g Graph,
    n: u32,
    quorum: Quorum,
    src: Vec<u8>,
    /// Link positions (into the union) ordered by target slot.
    by_target: Vec<usize>,
    level_ends: Vec<usize>,
    supports: Vec<u128>,
    finalizing: Vec<bool>,
    finalizing_desc: Vec<bool>,
    partners: Vec<u64>,
}

impl<'g> Frame<'g> {
    pub fn new(graph: &'g Graph, union: &[u16], n: u32, rules: &Rules) -> Frame<'g> {
        assert!(union.len() <= MAX_UNION && n <= MAX_VALIDATORS);
        let cps = &graph.checkpoints;
        let links: Vec<_> = union.iter().map(|&l| graph.links[l as usize]).collect();
        let src = links.iter().map(|&(s, _)| s).collect();
        let supports = links
            .iter()
            .map(|&(s, t)| {
                let (s, t) = (&cps[s as usize], &cps[t as usize]);
                cps.iter().enumerate().fold(0u128, |m, (i, c)| {
                    let sandwiched = !rules.justification_ancestry
                        || (graph.ancestor(s.block.index(), c.block.index())
                            && graph.ancestor(c.block.index(), t.block.index()));
                    if c.c == t.c && sandwiched && !c.is_genesis() {
                        m | 1 << i
                    } else {
                        m
                    }
                })
            })
            .collect();
        let finalizing: Vec<bool> = links.iter().map(|&(s, t)| cps[t as usize].c == cps[s as usize].c + 1).collect();
        let finalizing_desc = links
            .iter()
            .zip(&finalizing)
            .map(|(&(s, t), &f)| f && graph.ancestor(cps[s as usize].block.index(), cps[t as usize].block.index()))
            .collect();
        let mut by_target: Vec<usize> = (0..links.len()).collect();
        by_target.sort_by_key(|&j| cps[links[j].1 as usize].c);
        let mut level_ends = Vec::new();
        for w in 0..by_target.len() {
            let c = cps[links[by_target[w]].1 as usize].c;
            if w + 1 == by_target.len() || cps[links[by_target[w + 1]].1 as usize].c != c {
                level_ends.push(w + 1);
            }
        }
        // pre-order on checkpoint indices: strictly below in (c, p), or equal (c, p) and distinct
        let below = |x: u8, y: u8| {
            let (cx, cy) = (&cps[x as usize], &cps[y as usize]);
            (cx.c, cx.p) < (cy.c, cy.p) || ((cx.c, cx.p) == (cy.c, cy.p) && x != y)
        };
        let surrounds = |inner: (u8, u8), outer: (u8, u8)| {
            below(outer.0, inner.0) && cps[inner.1 as usize].c < cps[outer.1 as usize].c
        };
        let partners = (0..union.len())
            .map(|a| {
                (0..union.len())
                    .filter(|&b| {
                        let (la, lb) = (links[a], links[b]);
                        a != b
                            && ((rules.double_vote && cps[la.1 as usize].c == cps[lb.1 as usize].c)
                                || (rules.surround_vote && (surrounds(la, lb) || surrounds(lb, la))))
                    })
                    .fold(0u64, |m, b| m | 1 << b)
            })
            .collect();
        Frame {
            graph,
            n,
            quorum: rules.quorum,
            src,
            by_target,
            level_ends,
            supports,
            finalizing,
            finalizing_desc,
            partners,
        }
    }

    pub fn min_signers(&self) -> usize {
        self.quorum.min_size(self.n)
    }

    pub fn eval(&self, masks: &[u64]) -> Outcome {
        let k = self.src.len();
        let mut voters = [0u64; MAX_UNION];
        for (i, &m) in masks.iter().enumerate() {
            let mut m = m;
            while m != 0 {
                let j = m.trailing_zeros() as usize;
                voters[j] |= 1 << i;
                m &= m - 1;
            }
        }

        // Sources have strictly smaller slots than targets, so one pass in
        // target-slot order settles every level before it is used as a source.
        let mut justified: u128 = 1;
        let mut acc = [0u64; MAX_CHECKPOINTS];
        let mut start = 0;
        for &end in &self.level_ends {
            let mut touched: u128 = 0;
            for &j in &self.by_target[start..end] {
                if voters[j] == 0 || justified >> self.src[j] & 1 == 0 {
                    continue;
                }
                let mut s = self.supports[j];
                touched |= s;
                while s != 0 {
                    let c = s.trailing_zeros() as usize;
                    acc[c] |= voters[j];
                    s &= s - 1;
                }
            }
            while touched != 0 {
                let c = touched.trailing_zeros() as usize;
                if self.quorum.reached(acc[c].count_ones() as usize, self.n) {
                    justified |= 1 << c;
                }
                touched &= touched - 1;
            }
            start = end;
        }

        let finalized_by = |use_desc: bool| -> u128 {
            let mut fin: u128 = 1;
            for j in 0..k {
                let link_ok = if use_desc { self.finalizing_desc[j] } else { self.finalizing[j] };
                let s = self.src[j];
                if !link_ok || justified >> s & 1 == 0 || fin >> s & 1 == 1 {
                    continue;
                }
                let mut who = 0u64;
                for (j2, &v) in voters.iter().enumerate().take(k).skip(j) {
                    let ok2 = if use_desc { self.finalizing_desc[j2] } else { self.finalizing[j2] };
                    if ok2 && self.src[j2] == s {
                        who |= v;
                    }
                }
                if self.quorum.reached(who.count_ones() as usize, self.n) {
                    fin |= 1 << s;
                }
            }
            fin
        };
        let finalized = finalized_by(false);
        let reading_diverges = finalized != finalized_by(true);

        let mut blocks = 0u64;
        let mut f = finalized;
        while f != 0 {
            let c = f.trailing_zeros() as usize;
            blocks |= 1 << self.graph.checkpoints[c].block.index();
            f &= f - 1;
        }
        let mut disagreement = false;
        let mut b = blocks;
        while b != 0 {
            let a = b.trailing_zeros() as usize;
            if self.graph.conflicts[a] & blocks != 0 {
                disagreement = true;
                break;
            }
            b &= b - 1;
        }

        let mut slashable = 0u64;
        if disagreement {
            for (i, &m) in masks.iter().enumerate() {
                let mut r = m;
                while r != 0 {
                    let j = r.trailing_zeros() as usize;
                    if self.partners[j] & m != 0 {
                        slashable |= 1 << i;
                        break;
                    }
                    r &= r - 1;
                }
            }
        }
        let holds = !disagreement || 3 * slashable.count_ones() as u64 >= self.n as u64;
        Outcome { justified, finalized, disagreement, slashable, holds, reading_diverges }
    }
}
