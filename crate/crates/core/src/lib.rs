//! Protocol library and bounded exhaustive model checker for the 3SF FFG
//! finality gadget.
//!
//! [`model`] holds the domain types, [`finality`] and [`safety`] derive
//! justification, finalization and slashing from a single state, and
//! [`enumerator`] searches every state within a set of bounds.

pub mod catalog;
pub mod enumerator;
pub mod finality;
pub mod model;
pub mod mutation;
pub mod safety;
pub mod scenario;
pub mod smt;

pub use catalog::{catalog_forest, CatalogId};
pub use enumerator::{find_example, search, Bounds, ExampleProperty, SearchOptions, SearchReport, SlotMode, Verdict};
pub use finality::{finality_view, FinalityView};
pub use model::{
    BlockForest, BlockId, Checkpoint, FfgVote, ModelError, ProtocolState, SignedVote, SlotRule, ValidatorId,
};
pub use mutation::{Mutation, Quorum, Rules};
pub use safety::{accountable_safety, accountable_safety_with, SafetyVerdict, SlashingEvidence, SlashingKind};
