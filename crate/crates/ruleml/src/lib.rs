//! ECA-RuleML: an XML serialization of ECA-LP rule bases.
//!
//! Documents are parsed into a [`RulemlNode`] tree, checked against the
//! productions in [`grammar`], written back with [`emit_eca_ruleml`] and
//! translated into ECA-LP source with [`translate_to_ecalp`].

pub mod ast;
pub mod grammar;
mod translate;
mod xml;

pub use ast::{Kind, RulemlNode};
pub use translate::{translate_to_ecalp, TranslationResult};
pub use xml::{emit_eca_ruleml, parse_eca_ruleml, NAMESPACE};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RulemlError {
    #[error("malformed XML {0}")]
    Xml(String),
    #[error("{path}: {message}; expected {production}")]
    Grammar {
        path: String,
        production: String,
        message: String,
    },
    #[error("translation failed: {0}")]
    Translation(String),
}
