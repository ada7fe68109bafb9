//! Structural controllability analysis for fuzzy cognitive maps.
//!
//! Given a map of factors and signed, weighted influences, the crate finds
//! every minimal set of factors through which the whole system can be
//! steered, ranks those sets by how easy their members are to influence, and
//! runs simple iterated-map dynamics for sense-checking.

pub mod controllability;
pub mod decision;
pub mod dot;
pub mod dynamics;
pub mod error;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod synth;

pub use controllability::{
    classify_nodes, enumerate_configurations, is_configuration, reachability_warnings,
    structural_controllability_rank, AnalysisReport, Budget, ControlConfiguration,
    NodeClassification, Progress, TruncationReason,
};
pub use decision::{analyze, ControllabilityScale, Labeling, RankedConfiguration};
pub use error::{Error, Result};
pub use model::{
    parse_graph, serialize_graph, Controllability, Factor, FcmGraph, Influence, Perspective, Sign,
    Strength, WeightMatrix,
};
