//! Reaction activity and metabolite closure.

use super::{BitSet, CompiledModel, GeneIdx, Hypothesis};

/// Per-worker scratch buffers for repeated simulations against one model.
///
/// The closure is a worklist saturation: a directed reaction is examined
/// only when one of its substrates newly enters the set, via a countdown of
/// still-missing substrates. Each metabolite is dequeued at most once, so
/// the outer loop runs at most `M` times.
pub struct Simulator<'a> {
    model: &'a CompiledModel,
    missing: Vec<u32>,
    queue: Vec<u32>,
    set: BitSet,
    unavailable: Vec<bool>,
    touched: Vec<u32>,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a CompiledModel) -> Self {
        Simulator {
            model,
            missing: model.substrate_counts.clone(),
            queue: Vec::with_capacity(model.metabolite_count()),
            set: BitSet::new(model.metabolite_count()),
            unavailable: vec![false; model.enzyme_count()],
            touched: Vec::new(),
        }
    }

    pub fn model(&self) -> &'a CompiledModel {
        self.model
    }

    /// Writes the active directed reactions for `knockout` under `hypothesis`
    /// into `out`.
    ///
    /// An enzyme is unavailable iff the knocked-out gene is among the genes
    /// it requires (model facts plus hypothesis facts). A reaction is active
    /// iff it is spontaneous or at least one of its enzymes is available.
    pub fn active_into(&mut self, hypothesis: Option<&Hypothesis>, knockout: Option<GeneIdx>, out: &mut BitSet) {
        out.fill();
        let Some(k) = knockout else { return };
        let model = self.model;
        self.touched.clear();
        for &e in &model.gene_enzymes[k.index()] {
            if !self.unavailable[e as usize] {
                self.unavailable[e as usize] = true;
                self.touched.push(e);
            }
        }
        if let Some(h) = hypothesis {
            for &(g, e) in h.added() {
                if g == k && !self.unavailable[e.index()] {
                    self.unavailable[e.index()] = true;
                    self.touched.push(e.0);
                }
            }
        }
        for &e in &self.touched {
            for &r in &model.enzyme_reactions[e as usize] {
                let r = r as usize;
                if out.contains(r) && model.directed[r].enzymes.iter().all(|&x| self.unavailable[x as usize]) {
                    out.remove(r);
                }
            }
        }
        for &e in &self.touched {
            self.unavailable[e as usize] = false;
        }
    }

    pub fn active(&mut self, hypothesis: Option<&Hypothesis>, knockout: Option<GeneIdx>) -> BitSet {
        let mut out = BitSet::new(self.model.directed.len());
        self.active_into(hypothesis, knockout, &mut out);
        out
    }

    /// Saturates from `medium`. With `goal` set, returns as soon as every
    /// metabolite of the goal is present (the set is then a partial closure)
    /// and reports whether the goal was reached.
    fn saturate(&mut self, active: &BitSet, medium: &BitSet, goal: Option<&BitSet>) -> bool {
        let model = self.model;
        self.missing.copy_from_slice(&model.substrate_counts);
        self.set.copy_from(medium);
        self.queue.clear();
        self.queue.extend(medium.iter().map(|m| m as u32));

        // goal metabolites still absent; usize::MAX disables early exit
        let mut absent = match goal {
            Some(g) => g.count() - g.intersection_count(medium),
            None => usize::MAX,
        };
        if absent == 0 {
            return true;
        }

        for &r in &model.sources {
            if active.contains(r as usize) {
                for &p in &model.directed[r as usize].products {
                    self.add(p, goal, &mut absent);
                }
            }
        }
        while absent != 0 {
            let Some(m) = self.queue.pop() else { break };
            for &r in &model.consumers[m as usize] {
                let ri = r as usize;
                let left = &mut self.missing[ri];
                *left -= 1;
                if *left == 0 && active.contains(ri) {
                    for &p in &model.directed[ri].products {
                        self.add(p, goal, &mut absent);
                    }
                }
            }
        }
        absent == 0
    }

    #[inline]
    fn add(&mut self, p: u32, goal: Option<&BitSet>, absent: &mut usize) {
        if self.set.insert(p as usize) {
            self.queue.push(p);
            if goal.is_some_and(|g| g.contains(p as usize)) {
                *absent -= 1;
            }
        }
    }

    /// Reactions of one derivation of every essential metabolite, or `None`
    /// when the organism does not grow.
    ///
    /// Each metabolite is credited to the reaction that first produced it;
    /// the result is the set of reactions reachable backwards from the
    /// essentials through those credits. Disabling reactions outside this
    /// set cannot stop growth.
    pub fn growth_support(&mut self, active: &BitSet, medium: &BitSet) -> Option<BitSet> {
        let model = self.model;
        let mut credit = vec![u32::MAX; model.metabolite_count()];
        self.missing.copy_from_slice(&model.substrate_counts);
        self.set.copy_from(medium);
        self.queue.clear();
        self.queue.extend(medium.iter().map(|m| m as u32));
        let mut fire = |r: u32, set: &mut BitSet, queue: &mut Vec<u32>| {
            for &p in &model.directed[r as usize].products {
                if set.insert(p as usize) {
                    credit[p as usize] = r;
                    queue.push(p);
                }
            }
        };
        for &r in &model.sources {
            if active.contains(r as usize) {
                fire(r, &mut self.set, &mut self.queue);
            }
        }
        while let Some(m) = self.queue.pop() {
            for &r in &model.consumers[m as usize] {
                let left = &mut self.missing[r as usize];
                *left -= 1;
                if *left == 0 && active.contains(r as usize) {
                    fire(r, &mut self.set, &mut self.queue);
                }
            }
        }
        if !model.essential_mask().is_subset(&self.set) {
            return None;
        }

        let mut support = BitSet::new(model.directed.len());
        let mut seen = BitSet::new(model.metabolite_count());
        let mut stack: Vec<usize> = model.essential_mask().iter().collect();
        while let Some(m) = stack.pop() {
            if !seen.insert(m) || credit[m] == u32::MAX {
                continue;
            }
            let r = credit[m] as usize;
            if support.insert(r) {
                stack.extend(model.directed[r].substrates.iter().map(|&s| s as usize));
            }
        }
        Some(support)
    }

    /// Least set containing `medium` closed under the active reactions.
    pub fn closure(&mut self, active: &BitSet, medium: &BitSet) -> BitSet {
        self.saturate(active, medium, None);
        self.set.clone()
    }

    /// Whether every essential metabolite becomes synthesisable.
    pub fn grows(&mut self, active: &BitSet, medium: &BitSet) -> bool {
        let essential = self.model.essential_mask();
        self.saturate(active, medium, Some(essential))
    }
}

