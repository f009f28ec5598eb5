//! ECA-LP: a homogeneous knowledge base of derivation rules, facts,
//! integrity constraints and reactive event-condition-action rules.

pub mod daemon;
pub mod events;
pub mod kb;
pub mod parser;
pub mod solver;
pub mod term;
pub mod updates;
