//! Bit-parallel compilation of a [`MetabolicModel`](crate::facts::MetabolicModel)
//! and growth-phenotype simulation of knockout trials.

mod batch;
mod bits;
mod compiled;
mod hypothesis;
mod sim;

use thiserror::Error;

pub use batch::{simulate_batch, PhenotypeMatrix};
pub use bits::BitSet;
pub use compiled::{compile, compile_with_environment, CompiledModel, DirectedReaction};
pub use hypothesis::{fact_id, parse_hypothesis_id, Hypothesis};
pub use sim::Simulator;

use crate::facts::{Phenotype, Trial};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown medium `{0}`")]
    UnknownMedium(String),
    #[error("unknown gene `{0}`")]
    UnknownGene(String),
    #[error("unknown enzyme `{0}`")]
    UnknownEnzyme(String),
    #[error("medium `{medium}` lists `{metabolite}`, which the model does not declare")]
    UndeclaredNutrient { medium: String, metabolite: String },
    #[error("malformed hypothesis `{0}`")]
    MalformedHypothesis(String),
    #[error("`{0}` is already a fact of the model")]
    KnownFact(String),
}

macro_rules! index_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                $name(i as u32)
            }
        }
    };
}

index_type!(
    /// Dense gene index (declaration order).
    GeneIdx
);
index_type!(
    /// Dense enzyme index (declaration order).
    EnzymeIdx
);
index_type!(
    /// Dense medium index (environment file order).
    MediumIdx
);

/// A trial resolved against a compiled model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrialKey {
    pub knockout: Option<GeneIdx>,
    pub medium: MediumIdx,
}

/// Directed reactions active for `knockout` when `hypothesis` is added to
/// the model.
pub fn active_reactions(compiled: &CompiledModel, hypothesis: Option<&Hypothesis>, knockout: Option<GeneIdx>) -> BitSet {
    Simulator::new(compiled).active(hypothesis, knockout)
}

/// Least fixpoint of the active reactions starting from `medium`.
pub fn closure(compiled: &CompiledModel, active: &BitSet, medium: &BitSet) -> BitSet {
    Simulator::new(compiled).closure(active, medium)
}

/// Growth iff every essential metabolite is in the closure.
pub fn simulate(compiled: &CompiledModel, hypothesis: Option<&Hypothesis>, trial: &Trial) -> Result<Phenotype, EngineError> {
    let key = compiled.resolve_trial(trial)?;
    Ok(simulate_key(compiled, hypothesis, key))
}

pub fn simulate_key(compiled: &CompiledModel, hypothesis: Option<&Hypothesis>, trial: TrialKey) -> Phenotype {
    let mut sim = Simulator::new(compiled);
    let active = sim.active(hypothesis, trial.knockout);
    Phenotype::from_growth(sim.grows(&active, compiled.medium_mask(trial.medium)))
}
