//! Labelled forests over the non-genesis blocks and their slot assignments.

use std::collections::HashSet;

use crate::model::{Block, BlockForest, BlockId, GENESIS_LABEL};

/// Every labelled forest on `n` non-genesis blocks in which each block's
/// parent is genesis or another block. These are the rooted trees on `n + 1`
/// labels rooted at genesis, so there are `(n+1)^(n-1)` of them.
///
/// Slots equal depth. Order follows the parent vector lexicographically.
pub fn enumerate_forests(n: usize) -> Vec<BlockForest> {
    enumerate_forests_with(n, false)
}

/// With `detached`, a block may also have no parent at all. A detached root
/// gets slot 1, like a child of genesis.
pub fn enumerate_forests_with(n: usize, detached: bool) -> Vec<BlockForest> {
    // choice 0 = genesis, 1..=n = that block, n+1 = detached
    let choices = if detached { n + 2 } else { n + 1 };
    let mut parents = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        if let Some(f) = build(&parents, n) {
            out.push(f);
        }
        // odometer, last position fastest
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            parents[i] += 1;
            if parents[i] < choices {
                break;
            }
            parents[i] = 0;
        }
    }
}

fn build(parents: &[usize], n: usize) -> Option<BlockForest> {
    // reject self loops and cycles; compute depth-based slots
    let mut slots = vec![0u32; n + 1];
    for (b, slot) in slots.iter_mut().enumerate().skip(1) {
        let mut cur = b;
        let mut steps = 0u32;
        loop {
            let p = parents[cur - 1];
            if p == cur {
                return None;
            }
            steps += 1;
            if p == 0 {
                break;
            }
            if p == n + 1 {
                break;
            }
            cur = p;
            if steps as usize > n {
                return None;
            }
        }
        *slot = steps;
    }
    let mut blocks = BlockForest::genesis_only().blocks().to_vec();
    for b in 1..=n {
        let p = parents[b - 1];
        blocks.push(Block {
            id: BlockId(b as u16),
            label: format!("b{b}"),
            slot: slots[b],
            parent: if p == n + 1 { None } else { Some(BlockId(p as u16)) },
        });
    }
    debug_assert_eq!(blocks[0].label, GENESIS_LABEL);
    BlockForest::from_blocks(blocks).ok()
}

/// Slot vectors (genesis first) for `forest` where every parent has a
/// strictly smaller slot, non-genesis slots lie in `1..=max_slot`, and
/// vectors come in lexicographic order.
pub fn free_slot_assignments(forest: &BlockForest, max_slot: u32) -> Vec<Vec<u32>> {
    let n = forest.len();
    let mut out = Vec::new();
    let mut slots = vec![0u32; n];
    fn go(i: usize, forest: &BlockForest, max_slot: u32, slots: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == slots.len() {
            // parent constraints across arbitrary id order
            let ok = forest.blocks().iter().all(|b| b.parent.is_none_or(|p| slots[p.index()] < slots[b.id.index()]));
            if ok {
                out.push(slots.clone());
            }
            return;
        }
        for s in 1..=max_slot {
            slots[i] = s;
            go(i + 1, forest, max_slot, slots, out);
        }
    }
    if n == 1 {
        return vec![vec![0]];
    }
    go(1, forest, max_slot, &mut slots, &mut out);
    out
}

/// Isomorphism-invariant encoding of a forest including slots.
pub fn canonical_code(forest: &BlockForest) -> String {
    let n = forest.len();
    let mut children = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for b in forest.blocks().iter().skip(1) {
        match b.parent {
            Some(p) => children[p.index()].push(b.id.index()),
            None => roots.push(b.id.index()),
        }
    }
    fn code(v: usize, forest: &BlockForest, children: &[Vec<usize>]) -> String {
        let mut parts: Vec<_> = children[v].iter().map(|&c| code(c, forest, children)).collect();
        parts.sort();
        format!("({}{})", forest.blocks()[v].slot, parts.concat())
    }
    let mut detached: Vec<_> = roots.iter().map(|&r| code(r, forest, &children)).collect();
    detached.sort();
    format!("{}|{}", code(0, forest, &children), detached.concat())
}

/// Drops forests isomorphic to an earlier one, keeping first occurrences.
pub fn dedup_isomorphic(forests: Vec<BlockForest>) -> Vec<BlockForest> {
    let mut seen = HashSet::new();
    forests.into_iter().filter(|f| seen.insert(canonical_code(f))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cayley_counts() {
        assert_eq!(enumerate_forests(0).len(), 1);
        for (n, expect) in [(1, 1), (2, 3), (3, 16), (4, 125)] {
            assert_eq!(enumerate_forests(n).len(), expect, "n={n}");
        }
    }

    #[test]
    fn detached_counts() {
        // each block picks genesis, the other block or nothing; only the 2-cycle fails
        assert_eq!(enumerate_forests_with(1, true).len(), 2);
        assert_eq!(enumerate_forests_with(2, true).len(), 8);
    }

    #[test]
    fn forests_are_distinct_and_depth_slotted() {
        let fs = enumerate_forests(3);
        let set: HashSet<_> = fs.iter().collect();
        assert_eq!(set.len(), fs.len());
        for f in &fs {
            for b in f.blocks() {
                assert_eq!(b.slot, f.depth(b.id).unwrap());
            }
        }
        for f in enumerate_forests_with(3, true) {
            for b in f.blocks().iter().skip(1) {
                let mut root = b.id;
                while let Some(p) = f.get(root).unwrap().parent {
                    root = p;
                }
                let extra = u32::from(!root.is_genesis());
                assert_eq!(b.slot, f.depth(b.id).unwrap() + extra);
            }
        }
    }

    #[test]
    fn isomorphism_classes() {
        // n=2: fork, and the two labelled paths
        assert_eq!(dedup_isomorphic(enumerate_forests(2)).len(), 2);
        // n=3 unlabelled rooted trees on 4 nodes: 4
        assert_eq!(dedup_isomorphic(enumerate_forests(3)).len(), 4);
    }

    #[test]
    fn free_slots() {
        let f = &enumerate_forests(1)[0];
        assert_eq!(free_slot_assignments(f, 3), vec![vec![0, 1], vec![0, 2], vec![0, 3]]);
        let path = enumerate_forests(2).into_iter().find(|f| !f.has_conflicting_pair()).unwrap();
        // strictly increasing pairs from 1..=3
        assert_eq!(free_slot_assignments(&path, 3).len(), 3);
    }
}
