use std::sync::Arc;

use super::{eig_from_counts, pick, medium_cost, SelectionError, Strategy, TrialScore};
use crate::abduction::{HypothesisSpace, PredictionTable};
use crate::engine::{BitSet, CompiledModel, TrialKey};
use crate::facts::{Cost, Environment, Trial};

/// Incremental trial scoring over a [`PredictionTable`].
///
/// Keeps, for every tabulated trial, the signed number of alive candidates
/// whose prediction differs from the base model, so the number predicting
/// growth is available in constant time. Refutations are fed in as they
/// happen.
#[derive(Clone, Debug)]
pub struct DesignScorer {
    table: Arc<PredictionTable>,
    trials: Vec<Trial>,
    costs: Vec<Cost>,
    // design trials, as table indices sorted by trial
    design: Vec<usize>,
    delta: Vec<i64>,
    alive: Vec<bool>,
    alive_count: usize,
}

impl DesignScorer {
    /// `design` lists the trials that may be selected; each must be in the
    /// table. The table must have been built over `space`'s candidates.
    pub fn new(
        compiled: &CompiledModel,
        env: &Environment,
        table: Arc<PredictionTable>,
        space: &HypothesisSpace,
        design: &[TrialKey],
    ) -> Result<Self, SelectionError> {
        assert_eq!(table.candidate_count(), space.len(), "table built over another hypothesis space");
        let trials: Vec<Trial> = table.trials().iter().map(|&k| compiled.trial(k)).collect();
        let mut medium_costs = Vec::with_capacity(compiled.medium_count());
        for m in 0..compiled.medium_count() {
            medium_costs.push(medium_cost(compiled.medium_name(m.into()), env)?);
        }
        let costs = table.trials().iter().map(|k| medium_costs[k.medium.index()]).collect();
        let mut design: Vec<usize> = design.iter().map(|&k| table.position(k).expect("design trial missing from table")).collect();
        design.sort_by(|&a, &b| trials[a].cmp(&trials[b]));
        design.dedup();

        let alive: Vec<bool> = (0..space.len()).map(|i| space.is_alive(i)).collect();
        let mut delta = vec![0i64; trials.len()];
        for (h, _) in alive.iter().enumerate().filter(|(_, &a)| a) {
            for &t in table.deviations(h) {
                delta[t as usize] += if table.base(t as usize).grows() { -1 } else { 1 };
            }
        }
        let alive_count = space.alive_count();
        Ok(DesignScorer { table, trials, costs, design, delta, alive, alive_count })
    }

    pub fn table(&self) -> &Arc<PredictionTable> {
        &self.table
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    /// Removes refuted candidates from the tallies.
    pub fn refute(&mut self, refuted: &[usize]) {
        for &h in refuted {
            if !std::mem::replace(&mut self.alive[h], false) {
                continue;
            }
            self.alive_count -= 1;
            for &t in self.table.deviations(h) {
                self.delta[t as usize] -= if self.table.base(t as usize).grows() { -1 } else { 1 };
            }
        }
    }

    /// Number of alive candidates predicting growth on table trial `t`.
    pub fn growth_count(&self, t: usize) -> usize {
        let base = if self.table.base(t).grows() { self.alive_count as i64 } else { 0 };
        (base + self.delta[t]) as usize
    }

    pub fn cost(&self, t: usize) -> Cost {
        self.costs[t]
    }

    pub fn trial(&self, t: usize) -> &Trial {
        &self.trials[t]
    }

    pub fn score(&self, t: usize) -> TrialScore {
        let eig = eig_from_counts(self.alive_count, self.growth_count(t));
        TrialScore::new(self.trials[t].clone(), self.costs[t], eig)
    }

    /// Applies `strategy` to the design trials not in `tried` (a mask over
    /// table trials) and returns the chosen table index with its score.
    pub fn select(&self, strategy: Strategy, tried: &BitSet, step: u64) -> Option<(usize, TrialScore)> {
        let untried: Vec<usize> = self.design.iter().copied().filter(|&t| !tried.contains(t)).collect();
        let eig = |i: usize| eig_from_counts(self.alive_count, self.growth_count(untried[i]));
        let chosen = untried[pick(strategy, untried.len(), |i| self.costs[untried[i]], eig, step)?];
        Some((chosen, self.score(chosen)))
    }
}
