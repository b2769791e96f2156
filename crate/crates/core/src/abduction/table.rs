use std::collections::{BTreeMap, HashMap};

use crate::engine::{simulate_batch, BitSet, CompiledModel, EnzymeIdx, GeneIdx, Hypothesis, Simulator, TrialKey};
use crate::facts::Phenotype;
use crate::parallel::map_tasks;

/// Precomputed predictions of every candidate hypothesis over a fixed trial
/// list, stored as deviations from the hypothesis-free model.
///
/// A hypothesis only adds gene requirements, and those requirements only
/// matter when the required gene is knocked out. So a hypothesis can
/// disagree with the plain model only on trials whose knockout is one of
/// its genes; only those cells are considered.
#[derive(Clone, Debug)]
pub struct PredictionTable {
    trials: Vec<TrialKey>,
    positions: HashMap<TrialKey, usize>,
    base: BitSet,
    deviations: Vec<Vec<u32>>,
    by_trial: Vec<Vec<u32>>,
}

impl PredictionTable {
    pub fn build(compiled: &CompiledModel, candidates: &[Hypothesis], trials: Vec<TrialKey>, workers: usize) -> Self {
        let base_matrix = simulate_batch(compiled, &[None], &trials, workers);
        let base = BitSet::from_indices(trials.len(), (0..trials.len()).filter(|&t| base_matrix.get(0, t).grows()));

        let mut trials_by_gene: HashMap<GeneIdx, Vec<usize>> = HashMap::new();
        for (t, key) in trials.iter().enumerate() {
            if let Some(g) = key.knockout {
                trials_by_gene.entry(g).or_default().push(t);
            }
        }
        let mut singles: BTreeMap<GeneIdx, Vec<(usize, EnzymeIdx)>> = BTreeMap::new();
        let mut groups: BTreeMap<Vec<GeneIdx>, Vec<usize>> = BTreeMap::new();
        for (i, h) in candidates.iter().enumerate() {
            if let [(g, e)] = h.added() {
                if trials_by_gene.contains_key(g) {
                    singles.entry(*g).or_default().push((i, *e));
                }
                continue;
            }
            let mut genes: Vec<GeneIdx> = h.genes().collect();
            genes.sort_unstable();
            genes.dedup();
            groups.entry(genes).or_default().push(i);
        }

        let mut deviations = vec![Vec::new(); candidates.len()];
        let mut by_trial = vec![Vec::new(); trials.len()];
        let mut record = |h: usize, t: usize| {
            deviations[h].push(t as u32);
            by_trial[t].push(h as u32);
        };

        let singles: Vec<(GeneIdx, Vec<(usize, EnzymeIdx)>)> = singles.into_iter().collect();
        let found = map_tasks(
            workers.max(1),
            singles.len(),
            || Simulator::new(compiled),
            |sim, task| {
                let (gene, members) = &singles[task];
                single_gene_deviations(sim, *gene, members, &trials, &trials_by_gene[gene], &base)
            },
        );
        for (h, t) in found.into_iter().flatten() {
            record(h, t);
        }

        for (genes, members) in &groups {
            let mut affected: Vec<usize> = genes.iter().filter_map(|g| trials_by_gene.get(g)).flatten().copied().collect();
            if affected.is_empty() {
                continue;
            }
            affected.sort_unstable();
            let keys: Vec<TrialKey> = affected.iter().map(|&t| trials[t]).collect();
            let hyps: Vec<Option<&Hypothesis>> = members.iter().map(|&i| Some(&candidates[i])).collect();
            let m = simulate_batch(compiled, &hyps, &keys, workers);
            for (row, &h) in members.iter().enumerate() {
                for (col, &t) in affected.iter().enumerate() {
                    if m.get(row, col).grows() != base.contains(t) {
                        record(h, t);
                    }
                }
            }
        }
        for list in deviations.iter_mut().chain(by_trial.iter_mut()) {
            list.sort_unstable();
        }
        let positions = trials.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        PredictionTable { trials, positions, base, deviations, by_trial }
    }

    pub fn trials(&self) -> &[TrialKey] {
        &self.trials
    }

    pub fn position(&self, key: TrialKey) -> Option<usize> {
        self.positions.get(&key).copied()
    }

    pub fn candidate_count(&self) -> usize {
        self.deviations.len()
    }

    /// Prediction of the hypothesis-free model.
    pub fn base(&self, trial: usize) -> Phenotype {
        Phenotype::from_growth(self.base.contains(trial))
    }

    pub fn predict(&self, candidate: usize, trial: usize) -> Phenotype {
        let flips = self.deviations[candidate].binary_search(&(trial as u32)).is_ok();
        Phenotype::from_growth(self.base.contains(trial) != flips)
    }

    /// Trials on which `candidate` disagrees with the base model.
    pub fn deviations(&self, candidate: usize) -> &[u32] {
        &self.deviations[candidate]
    }

    /// Candidates that disagree with the base model on `trial`.
    pub fn deviating(&self, trial: usize) -> &[u32] {
        &self.by_trial[trial]
    }
}

/// Deviations of single-fact hypotheses `codes(gene, e)` on the trials that
/// knock out `gene`.
///
/// Under that knockout the fact makes `e` unavailable, which disables the
/// reactions `e` alone was keeping active. Removing reactions cannot rescue
/// growth, and removing reactions outside a derivation of the essentials
/// cannot stop it; only the remaining cells are simulated.
fn single_gene_deviations(
    sim: &mut Simulator<'_>,
    gene: GeneIdx,
    members: &[(usize, EnzymeIdx)],
    trials: &[TrialKey],
    gene_trials: &[usize],
    base: &BitSet,
) -> Vec<(usize, usize)> {
    let compiled = sim.model();
    let active = sim.active(None, Some(gene));
    let growing: Vec<(usize, BitSet)> = gene_trials
        .iter()
        .filter(|&&t| base.contains(t))
        .map(|&t| {
            let support = sim.growth_support(&active, compiled.medium_mask(trials[t].medium));
            (t, support.expect("base model grows on this trial"))
        })
        .collect();
    if growing.is_empty() {
        return Vec::new();
    }
    let unavailable = |e: u32| compiled.enzyme_genes(EnzymeIdx(e)).contains(gene.index());

    let mut out = Vec::new();
    let mut reduced = active.clone();
    for &(h, enzyme) in members {
        let disabled: Vec<usize> = compiled.enzyme_reactions[enzyme.index()]
            .iter()
            .map(|&d| d as usize)
            .filter(|&d| active.contains(d) && compiled.directed[d].enzymes.iter().all(|&e| e == enzyme.0 || unavailable(e)))
            .collect();
        if disabled.is_empty() {
            continue;
        }
        let mut prepared = false;
        for (t, support) in &growing {
            if !disabled.iter().any(|&d| support.contains(d)) {
                continue;
            }
            if !prepared {
                reduced.copy_from(&active);
                for &d in &disabled {
                    reduced.remove(d);
                }
                prepared = true;
            }
            if !sim.grows(&reduced, compiled.medium_mask(trials[*t].medium)) {
                out.push((h, *t));
            }
        }
    }
    out
}
