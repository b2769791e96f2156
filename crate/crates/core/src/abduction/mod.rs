//! Candidate gene-enzyme hypotheses: generation, pruning against observed
//! phenotypes, and evaluation of the recovered model.

mod table;

use std::sync::Arc;

use thiserror::Error;

pub use table::PredictionTable;

use crate::engine::{simulate_batch, CompiledModel, EngineError, EnzymeIdx, GeneIdx, Hypothesis, TrialKey};
use crate::facts::{MetabolicModel, Observation, Phenotype};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbductionError {
    #[error("hypothesis space exhausted: no candidate is consistent with {observation}")]
    Exhausted { observation: String },
    #[error("no hypothesis is alive")]
    NoAliveHypothesis,
    #[error("no observations to evaluate against")]
    EmptyEvaluation,
    #[error("trial is not covered by the prediction table")]
    UntabulatedTrial,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Result of applying one observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PruneReport {
    /// Candidate indices refuted by this observation.
    pub refuted: Vec<usize>,
    pub alive_before: usize,
    pub alive_after: usize,
}

/// Version space over candidate hypotheses.
///
/// Candidates are sorted by id. Every candidate is either alive or refuted;
/// refuted ones remember the observation that killed them. Refutation is
/// permanent. Clones share the candidate list.
#[derive(Clone, Debug)]
pub struct HypothesisSpace {
    candidates: Arc<Vec<Hypothesis>>,
    refuted_by: Vec<Option<u32>>,
    observations: Vec<Observation>,
    alive: usize,
    // index of the first alive candidate; only moves forward
    first_alive: usize,
}

impl HypothesisSpace {
    /// Builds a space from arbitrary candidates; they are sorted by id and
    /// duplicates dropped.
    pub fn from_candidates(mut candidates: Vec<Hypothesis>) -> Self {
        candidates.sort_by(|a, b| a.id().cmp(b.id()));
        candidates.dedup_by(|a, b| a.id() == b.id());
        let n = candidates.len();
        HypothesisSpace { candidates: Arc::new(candidates), refuted_by: vec![None; n], observations: Vec::new(), alive: n, first_alive: 0 }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive
    }

    pub fn candidates(&self) -> &[Hypothesis] {
        &self.candidates
    }

    pub fn candidate(&self, i: usize) -> &Hypothesis {
        &self.candidates[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.candidates.binary_search_by(|h| h.id().cmp(id)).ok()
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.refuted_by[i].is_none()
    }

    pub fn alive_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (self.first_alive..self.candidates.len()).filter(|&i| self.is_alive(i))
    }

    pub fn alive(&self) -> impl Iterator<Item = &Hypothesis> + '_ {
        self.alive_indices().map(|i| &self.candidates[i])
    }

    /// The observation that refuted candidate `i`, if any.
    pub fn refuted_by(&self, i: usize) -> Option<&Observation> {
        self.refuted_by[i].map(|o| &self.observations[o as usize])
    }

    /// Observations applied so far, in order.
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Lexicographically smallest alive candidate.
    pub fn representative(&self) -> Option<usize> {
        (self.alive > 0).then_some(self.first_alive)
    }

    fn refute(&mut self, refuted: &[usize], observation: Observation, alive_before: usize) -> Result<PruneReport, AbductionError> {
        let obs_idx = self.observations.len() as u32;
        let label = observation.to_string();
        self.observations.push(observation);
        for &i in refuted {
            debug_assert!(self.refuted_by[i].is_none());
            self.refuted_by[i] = Some(obs_idx);
        }
        self.alive -= refuted.len();
        while self.first_alive < self.candidates.len() && !self.is_alive(self.first_alive) {
            self.first_alive += 1;
        }
        if self.alive == 0 && alive_before > 0 {
            return Err(AbductionError::Exhausted { observation: label });
        }
        Ok(PruneReport { refuted: refuted.to_vec(), alive_before, alive_after: self.alive })
    }

    /// Keeps exactly the alive hypotheses whose simulated phenotype matches
    /// the observation.
    ///
    /// Refutations are applied even when they empty the space; that case is
    /// reported as [`AbductionError::Exhausted`].
    pub fn prune(&mut self, compiled: &CompiledModel, observation: &Observation, workers: usize) -> Result<PruneReport, AbductionError> {
        let key = compiled.resolve_trial(&observation.trial)?;
        let alive: Vec<usize> = self.alive_indices().collect();
        let hyps: Vec<Option<&Hypothesis>> = alive.iter().map(|&i| Some(&self.candidates[i])).collect();
        let predictions = simulate_batch(compiled, &hyps, &[key], workers);
        let refuted: Vec<usize> = alive
            .iter()
            .enumerate()
            .filter(|&(row, _)| predictions.get(row, 0) != observation.phenotype)
            .map(|(_, &i)| i)
            .collect();
        let before = self.alive;
        self.refute(&refuted, observation.clone(), before)
    }

    /// Same as [`prune`](Self::prune) but reads predictions from a table
    /// built over this space's candidates. `trial` indexes the table.
    pub fn prune_tabulated(&mut self, table: &PredictionTable, trial: usize, observation: &Observation) -> Result<PruneReport, AbductionError> {
        if table.candidate_count() != self.candidates.len() {
            return Err(AbductionError::UntabulatedTrial);
        }
        let refuted: Vec<usize> = if table.base(trial) == observation.phenotype {
            let mut r: Vec<usize> = table.deviating(trial).iter().map(|&h| h as usize).filter(|&h| self.is_alive(h)).collect();
            r.sort_unstable();
            r
        } else {
            let mut deviates = vec![false; self.candidates.len()];
            for &h in table.deviating(trial) {
                deviates[h as usize] = true;
            }
            self.alive_indices().filter(|&h| !deviates[h]).collect()
        };
        let before = self.alive;
        self.refute(&refuted, observation.clone(), before)
    }
}

/// One singleton hypothesis `{codes(g,e)}` for every gene and every enzyme
/// in `enzyme_scope` (all enzymes when `None`) that the model does not
/// already link.
pub fn generate_candidates(compiled: &CompiledModel, enzyme_scope: Option<&[EnzymeIdx]>) -> HypothesisSpace {
    let all: Vec<EnzymeIdx>;
    let scope = match enzyme_scope {
        Some(s) => s,
        None => {
            all = (0..compiled.enzyme_count()).map(EnzymeIdx::from).collect();
            &all
        }
    };
    let mut candidates = Vec::new();
    for g in (0..compiled.gene_count()).map(GeneIdx::from) {
        for &e in scope {
            if !compiled.has_codes(g, e) {
                candidates.push(Hypothesis::single(compiled, g, e).expect("absent fact"));
            }
        }
    }
    HypothesisSpace::from_candidates(candidates)
}

/// The model extended with the facts of the lexicographically smallest
/// alive hypothesis.
pub fn recovered_model(model: &MetabolicModel, compiled: &CompiledModel, space: &HypothesisSpace) -> Result<MetabolicModel, AbductionError> {
    let rep = space.representative().ok_or(AbductionError::NoAliveHypothesis)?;
    Ok(model.with_codes(&space.candidate(rep).named_facts(compiled)))
}

/// Fraction of `truth` whose phenotype the candidate model reproduces.
pub fn predictive_accuracy(candidate: &CompiledModel, truth: &[Observation], workers: usize) -> Result<f64, AbductionError> {
    if truth.is_empty() {
        return Err(AbductionError::EmptyEvaluation);
    }
    let keys: Vec<TrialKey> = truth.iter().map(|o| candidate.resolve_trial(&o.trial)).collect::<Result<_, _>>()?;
    let predicted = simulate_batch(candidate, &[None], &keys, workers);
    let hits = truth.iter().enumerate().filter(|(t, o)| predicted.get(0, *t) == o.phenotype).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Phenotypes predicted for each trial by the model without hypotheses.
pub fn predict_all(compiled: &CompiledModel, trials: &[TrialKey], workers: usize) -> Vec<Phenotype> {
    simulate_batch(compiled, &[None], trials, workers).row(0).collect()
}

#[cfg(test)]
mod tests;
