use std::collections::BTreeMap;

use super::{BitSet, CompiledModel, GeneIdx, Hypothesis, Simulator, TrialKey};
use crate::facts::Phenotype;
use crate::parallel::map_tasks;

/// Growth outcomes over a (hypotheses x trials) grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhenotypeMatrix {
    hypotheses: usize,
    trials: usize,
    growth: BitSet,
}

impl PhenotypeMatrix {
    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses == 0 || self.trials == 0
    }

    pub fn get(&self, hypothesis: usize, trial: usize) -> Phenotype {
        assert!(hypothesis < self.hypotheses && trial < self.trials);
        Phenotype::from_growth(self.growth.contains(hypothesis * self.trials + trial))
    }

    pub fn row(&self, hypothesis: usize) -> impl Iterator<Item = Phenotype> + '_ {
        (0..self.trials).map(move |t| self.get(hypothesis, t))
    }

    /// Number of hypotheses predicting growth for `trial`.
    pub fn growth_count(&self, trial: usize) -> usize {
        (0..self.hypotheses).filter(|&h| self.get(h, trial).grows()).count()
    }
}

/// Simulates every (hypothesis, trial) cell.
///
/// Reaction activity is computed once per (hypothesis, knockout) and reused
/// for every medium paired with that knockout. Work is split into those
/// groups across `parallelism` workers and results are placed by index, so
/// the matrix does not depend on the worker count.
pub fn simulate_batch(
    compiled: &CompiledModel,
    hypotheses: &[Option<&Hypothesis>],
    trials: &[TrialKey],
    parallelism: usize,
) -> PhenotypeMatrix {
    let h_count = hypotheses.len();
    let t_count = trials.len();
    let mut by_knockout: BTreeMap<Option<GeneIdx>, Vec<usize>> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        by_knockout.entry(t.knockout).or_default().push(i);
    }
    let groups: Vec<(Option<GeneIdx>, Vec<usize>)> = by_knockout.into_iter().collect();
    let tasks = h_count * groups.len();

    let results = map_tasks(
        parallelism.max(1),
        tasks,
        || (Simulator::new(compiled), BitSet::new(compiled.directed_reactions().len())),
        |(sim, active), task| {
            let (h, g) = (task / groups.len(), task % groups.len());
            let (knockout, members) = &groups[g];
            sim.active_into(hypotheses[h], *knockout, active);
            members
                .iter()
                .map(|&t| sim.grows(active, compiled.medium_mask(trials[t].medium)))
                .collect::<Vec<bool>>()
        },
    );

    let mut growth = BitSet::new(h_count * t_count);
    for (task, outcomes) in results.into_iter().enumerate() {
        let (h, g) = (task / groups.len(), task % groups.len());
        for (&t, grows) in groups[g].1.iter().zip(outcomes) {
            if grows {
                growth.insert(h * t_count + t);
            }
        }
    }
    PhenotypeMatrix { hypotheses: h_count, trials: t_count, growth }
}
