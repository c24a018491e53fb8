//! Synchronization analysis for homogeneous multi-agent networks whose
//! communication graph has lost its spanning tree.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod linalg;
pub mod protocol;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/protocols.md")]
    mod protocols {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/discrete.md")]
    mod discrete {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
