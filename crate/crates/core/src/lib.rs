//! Decentralized task allocation and execution for heterogeneous warehouse
//! fleets.

pub mod alloc;
pub mod auction;
pub mod baselines;
pub mod bench;
pub mod cli;
pub mod domain;
pub mod geometry;
pub mod netsim;
pub mod planner;
pub mod scoring;
pub mod taskprep;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/grouping.md")]
    mod grouping {}
    #[doc = include_str!("../../../book/src/consensus.md")]
    mod consensus {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
}
