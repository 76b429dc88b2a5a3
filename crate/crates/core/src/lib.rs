//! Cycle-basis graph neural networks for inductive relation prediction.
//!
//! The pipeline: load a knowledge graph ([`kg`]), add negative targets,
//! build k shortest-path-tree cycle bases ([`basis`]), link overlapping
//! cycles ([`cycle_graph`]), encode and score cycles ([`nn`]), and evaluate
//! ([`metrics`]). [`z2`] provides the chain algebra used to verify bases.

pub mod basis;
pub mod cycle_graph;
pub mod graph;
pub mod kg;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod synthetic;
pub mod z2;
