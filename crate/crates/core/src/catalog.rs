//! Fixed small block graphs and the two-chain restriction.
//!
//! Catalog slots equal the drawn depth: a block in column `k` has slot `k`,
//! including the detached components of [`CatalogId::Forest`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::enumerator::{states_for_forest, Bounds, EnumError};
use crate::model::{BlockForest, BlockGraph, BlockId, ModelError, ProtocolState, GENESIS_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CatalogId {
    #[serde(rename = "m3")]
    M3,
    #[serde(rename = "m4a")]
    M4a,
    #[serde(rename = "m4b")]
    M4b,
    #[serde(rename = "m5a")]
    M5a,
    #[serde(rename = "m5b")]
    M5b,
    #[serde(rename = "m7")]
    M7,
    #[serde(rename = "single-chain")]
    SingleChain,
    #[serde(rename = "forest")]
    Forest,
    #[serde(rename = "i1")]
    I1,
    #[serde(rename = "i2")]
    I2,
}

impl CatalogId {
    pub const ALL: [CatalogId; 10] = [
        CatalogId::M3,
        CatalogId::M4a,
        CatalogId::M4b,
        CatalogId::M5a,
        CatalogId::M5b,
        CatalogId::M7,
        CatalogId::SingleChain,
        CatalogId::Forest,
        CatalogId::I1,
        CatalogId::I2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CatalogId::M3 => "m3",
            CatalogId::M4a => "m4a",
            CatalogId::M4b => "m4b",
            CatalogId::M5a => "m5a",
            CatalogId::M5b => "m5b",
            CatalogId::M7 => "m7",
            CatalogId::SingleChain => "single-chain",
            CatalogId::Forest => "forest",
            CatalogId::I1 => "i1",
            CatalogId::I2 => "i2",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            CatalogId::M3 => "short fork: two children of genesis",
            CatalogId::M4a => "fork with the upper branch extended by one block",
            CatalogId::M4b => "fork with the lower branch extended by one block",
            CatalogId::M5a => "fork with both branches of length two",
            CatalogId::M5b => "one common block, then a fork",
            CatalogId::M7 => "fork with both branches of length three",
            CatalogId::SingleChain => "linear chain of four blocks after genesis",
            CatalogId::Forest => "two branches off genesis plus two detached components",
            CatalogId::I1 => "chain whose last block has two parents (invalid)",
            CatalogId::I2 => "chain closed into a cycle (invalid)",
        }
    }

    fn graph(self) -> BlockGraph {
        let chain = |edges: &[(&str, &str)]| -> Vec<(String, String)> {
            edges.iter().map(|(c, p)| (c.to_string(), p.to_string())).collect()
        };
        let g = GENESIS_LABEL;
        let (blocks, edges): (&[(&str, u32)], Vec<_>) = match self {
            CatalogId::M3 => (&[("a1", 1), ("b1", 1)], chain(&[("a1", g), ("b1", g)])),
            CatalogId::M4a => (&[("a1", 1), ("a2", 2), ("b1", 1)], chain(&[("a1", g), ("a2", "a1"), ("b1", g)])),
            CatalogId::M4b => (&[("a1", 1), ("b1", 1), ("b2", 2)], chain(&[("a1", g), ("b1", g), ("b2", "b1")])),
            CatalogId::M5a => (
                &[("a1", 1), ("a2", 2), ("b1", 1), ("b2", 2)],
                chain(&[("a1", g), ("a2", "a1"), ("b1", g), ("b2", "b1")]),
            ),
            CatalogId::M5b => (&[("n1", 1), ("a2", 2), ("b2", 2)], chain(&[("n1", g), ("a2", "n1"), ("b2", "n1")])),
            CatalogId::M7 => (
                &[("a1", 1), ("a2", 2), ("a3", 3), ("b1", 1), ("b2", 2), ("b3", 3)],
                chain(&[("a1", g), ("a2", "a1"), ("a3", "a2"), ("b1", g), ("b2", "b1"), ("b3", "b2")]),
            ),
            CatalogId::SingleChain => (
                &[("n1", 1), ("n2", 2), ("n3", 3), ("n4", 4)],
                chain(&[("n1", g), ("n2", "n1"), ("n3", "n2"), ("n4", "n3")]),
            ),
            CatalogId::Forest => (
                &[
                    ("a1", 1),
                    ("a2", 2),
                    ("a3", 3),
                    ("a4", 4),
                    ("b1", 1),
                    ("b2", 2),
                    ("b3", 3),
                    ("c1", 1),
                    ("d1", 1),
                    ("d2", 2),
                ],
                chain(&[
                    ("a1", g),
                    ("a2", "a1"),
                    ("a3", "a2"),
                    ("a4", "a3"),
                    ("b1", g),
                    ("b2", "b1"),
                    ("b3", "b2"),
                    ("d2", "d1"),
                ]),
            ),
            CatalogId::I1 => {
                (&[("n1", 1), ("n2", 2), ("n3", 3)], chain(&[("n1", g), ("n2", "n1"), ("n3", "n2"), ("n3", "n1")]))
            }
            CatalogId::I2 => {
                (&[("n1", 1), ("n2", 2), ("n3", 3)], chain(&[("n1", g), ("n2", "n1"), ("n3", "n2"), ("n1", "n3")]))
            }
        };
        BlockGraph { blocks: blocks.iter().map(|(l, s)| (l.to_string(), *s)).collect(), edges }
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CatalogId::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = CatalogId::ALL.iter().map(|c| c.name()).collect();
            format!("unknown graph `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// The drawn graph, validated. I1 and I2 fail validation by design.
pub fn catalog_forest(id: CatalogId) -> Result<BlockForest, ModelError> {
    BlockForest::from_graph(&id.graph())
}

/// Two chains sharing `fork_point` blocks after genesis, then diverging.
///
/// Blocks carry signed body values: the shared prefix is `1..=fork_point`,
/// the left branch continues with positive values and the right branch with
/// the negated sequence. A block's slot is the absolute value of its body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwoChainConfig {
    pub fork_point: u32,
    pub left: u32,
    pub right: u32,
}

impl TwoChainConfig {
    pub fn new(fork_point: u32, left: u32, right: u32) -> Self {
        TwoChainConfig { fork_point, left, right }
    }

    /// Body values in block-id order; genesis is 0.
    pub fn bodies(&self) -> Vec<i64> {
        let f = self.fork_point as i64;
        let mut out = vec![0];
        out.extend(1..=f);
        out.extend((1..=self.left as i64).map(|k| f + k));
        out.extend((1..=self.right as i64).map(|k| -(f + k)));
        out
    }

    pub fn forest(&self) -> BlockForest {
        let bodies = self.bodies();
        let f = self.fork_point as i64;
        let index_of = |body: i64| bodies.iter().position(|&b| b == body).map(|i| BlockId(i as u16));
        let blocks: Vec<_> = bodies[1..]
            .iter()
            .map(|&b| {
                let label = if b > f {
                    format!("a{b}")
                } else if b < 0 {
                    format!("b{}", -b)
                } else {
                    format!("n{b}")
                };
                let parent_body = match b {
                    b if b < 0 && -b == f + 1 => f,
                    b if b < 0 => b + 1,
                    b => b - 1,
                };
                (label, b.unsigned_abs() as u32, index_of(parent_body))
            })
            .collect();
        BlockForest::from_parents(&blocks).expect("two-chain forests are well formed")
    }

    /// Ancestry by comparing body values only.
    pub fn body_is_ancestor(&self, a: i64, d: i64) -> bool {
        a == d || (a.abs() <= d.abs() && (a.abs() <= self.fork_point as i64 || (a > 0 && d > 0) || (a < 0 && d < 0)))
    }
}

/// All states of the enumerator restricted to the two-chain forest of `config`.
pub fn two_chain_states(
    config: &TwoChainConfig,
    bounds: &Bounds,
) -> Result<impl Iterator<Item = ProtocolState>, EnumError> {
    states_for_forest(bounds, Arc::new(config.forest()))
}
