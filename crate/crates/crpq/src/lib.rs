//! Conjunctive regular path queries: evaluation under standard, atom-injective
//! and query-injective semantics, and containment deciders and refuters.

pub mod containment;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod graph;
pub mod morphism;
pub mod nfa;
pub mod oracle;
pub mod pcp;
pub mod qinj;
pub mod query;
pub mod regex;

pub use error::{Error, Result};
