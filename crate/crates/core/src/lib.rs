//! Solver synthesis for combinatorial optimization by memory-guided tree search.
//!
//! The crate is organised bottom-up:
//!
//! * [`problem`] – the seven problem domains, their instance and solution
//!   models, the dataset file format and deterministic instance generators.
//! * [`evaluate`] – feasibility checking, objectives, normalized scoring,
//!   brute-force oracles for small instances and difficulty proxies.
//! * [`executor`] – sandboxed, per-instance execution of candidate solvers
//!   with yield-streaming semantics.
//! * [`memory`] – branch-local records, global memory and selection rules.
//! * [`operators`] – the LLM-backed propose/repair/improve/critic/reflect
//!   operators, prompt templates and the token ledger.
//! * [`search`] – the budgeted branch loop and multi-run stability harness.
//! * [`artifact`] and [`report`] – run persistence and CSV/JSON reporting.

pub mod api;
pub mod artifact;
pub mod config;
pub mod evaluate;
pub mod executor;
pub mod memory;
pub mod operators;
pub mod pipeline;
pub mod problem;
pub mod report;
pub mod search;

pub use evaluate::{InstanceScore, RawOutcome, Violation};
pub use problem::{Dataset, DomainId, ProblemInstance, SizeClass, Split};
