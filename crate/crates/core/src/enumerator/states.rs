//! Vote assignments up to validator permutation.
//!
//! A state over a fixed union `F` of links is the multiset of the validators'
//! vote subsets. We emit it once, as the non-decreasing sequence of subset
//! masks whose bitwise OR is all of `F`. Iterating `F` over every subset of
//! the valid links (by size, then lexicographically) covers each multiset of
//! subsets exactly once.

use std::ops::ControlFlow;

use itertools::Itertools;

/// Calls `f` on every non-decreasing sequence of `n` masks over `width` bits
/// whose OR is the full mask and whose total popcount is at most `max_total`.
/// Sequences come in lexicographic order.
pub fn mask_sequences<F>(width: usize, n: usize, max_total: usize, f: &mut F) -> ControlFlow<()>
where
    F: FnMut(&[u64]) -> ControlFlow<()>,
{
    assert!(width <= 64);
    let full = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    if width > max_total || (n == 0 && width > 0) {
        return ControlFlow::Continue(());
    }
    let mut seq = vec![0u64; n];
    go(0, 0, 0, 0, full, max_total, &mut seq, f)
}

#[allow(clippy::too_many_arguments)]
fn go<F>(
    i: usize,
    min: u64,
    or: u64,
    used: usize,
    full: u64,
    max_total: usize,
    seq: &mut [u64],
    f: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&[u64]) -> ControlFlow<()>,
{
    if i == seq.len() {
        return if or == full { f(seq) } else { ControlFlow::Continue(()) };
    }
    let remaining = seq.len() - i;
    let mut m = min;
    loop {
        let pc = m.count_ones() as usize;
        // the uncovered bits still need at least one more vote each
        let missing = (full & !(or | m)).count_ones() as usize;
        let next_used = used + pc;
        // later masks are >= m, so with m nonzero each of them adds a vote too
        let later = if m == 0 { 0 } else { remaining - 1 };
        if next_used + missing.max(later) <= max_total {
            seq[i] = m;
            go(i + 1, m, or | m, next_used, full, max_total, seq, f)?;
        }
        if m == full {
            break;
        }
        m += 1;
    }
    ControlFlow::Continue(())
}

/// Every subset of `0..count` with at most `max_size` elements, by size then
/// lexicographically.
pub fn unions(count: usize, max_size: usize) -> impl Iterator<Item = Vec<u16>> {
    (0..=max_size.min(count)).flat_map(move |k| (0..count as u16).combinations(k))
}

/// Number of sequences [`mask_sequences`] would emit.
pub fn count_sequences(width: usize, n: usize, max_total: usize) -> u64 {
    let mut c = 0;
    let _ = mask_sequences(width, n, max_total, &mut |_| {
        c += 1;
        ControlFlow::Continue(())
    });
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn all(width: usize, n: usize, max_total: usize) -> Vec<Vec<u64>> {
        let mut out = Vec::new();
        let _ = mask_sequences(width, n, max_total, &mut |s| {
            out.push(s.to_vec());
            ControlFlow::Continue(())
        });
        out
    }

    /// Brute force over all n-tuples, sorted and deduplicated.
    fn oracle(width: usize, n: usize, max_total: usize) -> BTreeSet<Vec<u64>> {
        let full = (1u64 << width) - 1;
        let mut out = BTreeSet::new();
        let vals = 1usize << width;
        let mut idx = vec![0usize; n];
        loop {
            let mut seq: Vec<u64> = idx.iter().map(|&x| x as u64).collect();
            let or = seq.iter().fold(0, |a, &b| a | b);
            let total: u32 = seq.iter().map(|m| m.count_ones()).sum();
            if or == full && total as usize <= max_total {
                seq.sort();
                out.insert(seq);
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < vals {
                    break;
                }
                idx[i] = 0;
            }
        }
    }

    #[test]
    fn single_link_example() {
        // N=4, one link, at most two signed votes
        assert_eq!(all(0, 4, 2), vec![vec![0, 0, 0, 0]]);
        assert_eq!(all(1, 4, 2), vec![vec![0, 0, 0, 1], vec![0, 0, 1, 1]]);
    }

    #[test]
    fn matches_bruteforce() {
        for width in 0..=3 {
            for n in 1..=4 {
                for max_total in 0..=7 {
                    let got = all(width, n, max_total);
                    let set: BTreeSet<_> = got.iter().cloned().collect();
                    assert_eq!(set.len(), got.len(), "duplicates");
                    let mut sorted = got.clone();
                    sorted.sort();
                    assert_eq!(sorted, got, "order");
                    assert_eq!(set, oracle(width, n, max_total), "w={width} n={n} t={max_total}");
                }
            }
        }
    }

    #[test]
    fn union_order() {
        let u: Vec<_> = unions(3, 2).collect();
        assert_eq!(u, vec![vec![], vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(unions(18, 4).count(), 1 + 18 + 153 + 816 + 3060);
    }
}
