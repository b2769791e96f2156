//! Trial costs, expected information gain and the three trial selection
//! strategies.

mod scorer;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scorer::DesignScorer;

use crate::abduction::HypothesisSpace;
use crate::engine::{simulate_batch, CompiledModel, EngineError, Hypothesis, TrialKey};
use crate::facts::{Cost, Environment, Trial};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("unknown medium `{0}`")]
    UnknownMedium(String),
    #[error("medium `{medium}` contains unpriced nutrient `{metabolite}`")]
    UnpricedNutrient { medium: String, metabolite: String },
    #[error("trials on medium `{medium}` cost {cost}; costs must be positive")]
    NonPositiveCost { medium: String, cost: Cost },
    #[error("unknown strategy `{0}` (expected ase, naive or random)")]
    UnknownStrategy(String),
    #[error("strategy `{0}` takes no seed")]
    UnexpectedSeed(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Cost of running any trial on `medium`: the base cost plus the price of
/// every nutrient it supplies.
pub fn medium_cost(medium: &str, env: &Environment) -> Result<Cost, SelectionError> {
    let nutrients = env.medium(medium).ok_or_else(|| SelectionError::UnknownMedium(medium.to_string()))?;
    let mut cost = env.base_cost;
    for m in nutrients {
        cost += env.price(m).ok_or_else(|| SelectionError::UnpricedNutrient {
            medium: medium.to_string(),
            metabolite: m.clone(),
        })?;
    }
    if !cost.is_positive() {
        return Err(SelectionError::NonPositiveCost { medium: medium.to_string(), cost });
    }
    Ok(cost)
}

pub fn trial_cost(trial: &Trial, env: &Environment) -> Result<Cost, SelectionError> {
    medium_cost(&trial.medium, env)
}

fn plogp(x: f64) -> f64 {
    if x == 0.0 { 0.0 } else { x * x.log2() }
}

/// Expected entropy reduction, in bits, of a uniform distribution over `n`
/// hypotheses when `k` of them predict growth.
pub fn eig_from_counts(n: usize, k: usize) -> f64 {
    assert!(k <= n, "growth count {k} exceeds alive count {n}");
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    let p = k / n;
    // p·log2(k) + (1-p)·log2(n-k), written so that each term vanishes at 0
    let expected = (plogp(k) + plogp(n - k)) / n;
    let eig = n.log2() - expected;
    debug_assert!(eig >= 0.0 && (p > 0.0 && p < 1.0));
    eig.max(0.0)
}

/// Information gain of one trial over the alive hypotheses, by direct
/// simulation of each of them.
pub fn expected_information_gain(compiled: &CompiledModel, space: &HypothesisSpace, trial: TrialKey, workers: usize) -> f64 {
    let hyps: Vec<Option<&Hypothesis>> = space.alive().map(Some).collect();
    let m = simulate_batch(compiled, &hyps, &[trial], workers);
    eig_from_counts(hyps.len(), m.growth_count(0))
}

/// A candidate trial with its cost and information value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub trial: Trial,
    pub cost: Cost,
    pub eig_bits: f64,
    pub utility: f64,
}

impl TrialScore {
    pub fn new(trial: Trial, cost: Cost, eig_bits: f64) -> Self {
        let utility = eig_bits / cost.as_f64();
        TrialScore { trial, cost, eig_bits, utility }
    }

    /// Whether the outcome would split the alive hypotheses.
    pub fn discriminates(&self) -> bool {
        self.eig_bits > 0.0
    }
}

/// How the next trial is picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Highest information gain per unit cost among discriminating trials.
    Ase,
    /// Cheapest untried trial.
    Naive,
    /// Uniformly random untried trial.
    Random { seed: u64 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ase => "ase",
            Strategy::Naive => "naive",
            Strategy::Random { .. } => "random",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Strategy::Random { seed } => Some(*seed),
            _ => None,
        }
    }

    /// Builds a strategy from its name. Random strategies default to seed 0
    /// when none is given; the others reject a seed.
    pub fn from_parts(name: &str, seed: Option<u64>) -> Result<Self, SelectionError> {
        match (name, seed) {
            ("random", seed) => Ok(Strategy::Random { seed: seed.unwrap_or(0) }),
            ("ase" | "naive", Some(_)) => Err(SelectionError::UnexpectedSeed(name.to_string())),
            ("ase", None) => Ok(Strategy::Ase),
            ("naive", None) => Ok(Strategy::Naive),
            _ => Err(SelectionError::UnknownStrategy(name.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::from_parts(s, None)
    }
}

/// Picks one of `untried`, which must be sorted by trial. `step` is the
/// number of trials already run; it selects the random stream so that a
/// resumed campaign draws what an uninterrupted one would have.
pub fn choose(strategy: Strategy, untried: &[TrialScore], step: u64) -> Option<usize> {
    debug_assert!(untried.windows(2).all(|w| w[0].trial < w[1].trial));
    pick(strategy, untried.len(), |i| untried[i].cost, |i| untried[i].eig_bits, step)
}

/// [`choose`] over `len` trials described by accessors, in trial order.
pub(crate) fn pick(
    strategy: Strategy,
    len: usize,
    cost: impl Fn(usize) -> Cost,
    eig: impl Fn(usize) -> f64,
    step: u64,
) -> Option<usize> {
    match strategy {
        Strategy::Ase => {
            let mut best: Option<(usize, f64, Cost)> = None;
            for i in 0..len {
                let e = eig(i);
                if e <= 0.0 {
                    continue;
                }
                let c = cost(i);
                let better = match best {
                    None => true,
                    // utility compared as e·c_best against e_best·c, which
                    // scaling every cost by one factor leaves unchanged
                    Some((_, be, bc)) => match (e * bc.cents() as f64).total_cmp(&(be * c.cents() as f64)) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => c < bc,
                    },
                };
                if better {
                    best = Some((i, e, c));
                }
            }
            best.map(|(i, _, _)| i)
        }
        Strategy::Naive => {
            let mut best: Option<(usize, Cost)> = None;
            for i in 0..len {
                let c = cost(i);
                if best.is_none_or(|(_, bc)| c < bc) {
                    best = Some((i, c));
                }
            }
            best.map(|(i, _)| i)
        }
        Strategy::Random { seed } => {
            if len == 0 {
                return None;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(step);
            Some(rng.gen_range(0..len))
        }
    }
}

/// Scores every untried candidate trial by direct simulation of the alive
/// hypotheses and applies `strategy`.
pub fn select_trial(
    strategy: Strategy,
    candidates: &[TrialKey],
    tried: &HashSet<TrialKey>,
    space: &HypothesisSpace,
    compiled: &CompiledModel,
    env: &Environment,
    workers: usize,
) -> Result<Option<TrialScore>, SelectionError> {
    let mut untried: Vec<(Trial, TrialKey)> = candidates
        .iter()
        .filter(|k| !tried.contains(k))
        .map(|&k| (compiled.trial(k), k))
        .collect();
    untried.sort();
    untried.dedup();
    let keys: Vec<TrialKey> = untried.iter().map(|(_, k)| *k).collect();
    let hyps: Vec<Option<&Hypothesis>> = space.alive().map(Some).collect();
    let predictions = simulate_batch(compiled, &hyps, &keys, workers);
    let scores = untried
        .into_iter()
        .enumerate()
        .map(|(i, (trial, _))| {
            let cost = trial_cost(&trial, env)?;
            let k = if hyps.is_empty() { 0 } else { predictions.growth_count(i) };
            Ok(TrialScore::new(trial, cost, eig_from_counts(hyps.len(), k)))
        })
        .collect::<Result<Vec<_>, SelectionError>>()?;
    Ok(choose(strategy, &scores, tried.len() as u64).map(|i| scores[i].clone()))
}
