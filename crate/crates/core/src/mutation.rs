//! Deliberate protocol bugs used to check that the checker can see violations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A single injected bug. Exactly one is active per run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    #[default]
    None,
    /// Supermajority threshold 2/3 replaced by 1/2 in justification and finalization.
    QuorumHalf,
    DisableE1,
    DisableE2,
    /// Both slashing conditions disabled.
    DisableSlashing,
    /// Justifying votes no longer need to sandwich the checkpoint's chain.
    DropAncestry,
}

impl Mutation {
    pub const ALL: [Mutation; 6] = [
        Mutation::None,
        Mutation::QuorumHalf,
        Mutation::DisableE1,
        Mutation::DisableE2,
        Mutation::DisableSlashing,
        Mutation::DropAncestry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::None => "none",
            Mutation::QuorumHalf => "quorum-half",
            Mutation::DisableE1 => "disable-e1",
            Mutation::DisableE2 => "disable-e2",
            Mutation::DisableSlashing => "disable-slashing",
            Mutation::DropAncestry => "drop-ancestry",
        }
    }

    pub fn rules(self) -> Rules {
        let mut r = Rules::STANDARD;
        match self {
            Mutation::None => {}
            Mutation::QuorumHalf => r.quorum = Quorum::Half,
            Mutation::DisableE1 => r.double_vote = false,
            Mutation::DisableE2 => r.surround_vote = false,
            Mutation::DisableSlashing => {
                r.double_vote = false;
                r.surround_vote = false;
            }
            Mutation::DropAncestry => r.justification_ancestry = false,
        }
        r
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mutation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mutation::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Mutation::ALL.iter().map(|m| m.name()).collect();
            format!("unknown mutation `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quorum {
    /// `3k >= 2N`
    TwoThirds,
    /// `2k >= N`
    Half,
}

impl Quorum {
    pub fn reached(self, k: usize, n: u32) -> bool {
        let (k, n) = (k as u64, n as u64);
        match self {
            Quorum::TwoThirds => 3 * k >= 2 * n,
            Quorum::Half => 2 * k >= n,
        }
    }

    /// Smallest `k` with `reached(k, n)`.
    pub fn min_size(self, n: u32) -> usize {
        (0..=n as usize).find(|&k| self.reached(k, n)).unwrap_or(n as usize)
    }
}

/// The predicate switches a [`Mutation`] toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rules {
    pub quorum: Quorum,
    pub justification_ancestry: bool,
    pub double_vote: bool,
    pub surround_vote: bool,
}

impl Rules {
    pub const STANDARD: Rules =
        Rules { quorum: Quorum::TwoThirds, justification_ancestry: true, double_vote: true, surround_vote: true };
}

impl Default for Rules {
    fn default() -> Self {
        Self::STANDARD
    }
}
