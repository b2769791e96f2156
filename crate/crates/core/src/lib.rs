//! Knockout phenotype simulation, gene-function abduction and active
//! selection of auxotrophic-mutant trials over logical metabolic models.

pub mod abduction;
pub mod bench;
pub mod campaign;
pub mod engine;
pub mod facts;
pub mod fixtures;
mod parallel;
pub mod selection;
pub mod synth;
