//! The closed discovery loop: select a trial, obtain its outcome from an
//! oracle or from outside, prune, record, repeat.

mod log;
mod metrics;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use log::{load_campaign, parse_log, EventLog, LogHeader, LogRecord, SourceDigest};
pub use metrics::{compare_strategies, metrics_csv, Comparison, RunSummary, StrategySummary, METRICS_HEADER};

use crate::abduction::{generate_candidates, AbductionError, HypothesisSpace, PredictionTable};
use crate::engine::{compile_with_environment, parse_hypothesis_id, simulate_batch, BitSet, CompiledModel, EngineError, EnzymeIdx, Hypothesis, TrialKey};
use crate::facts::{parse_environment, parse_model, Cost, Environment, FactsError, MetabolicModel, Observation, Phenotype, Trial};
use crate::selection::{DesignScorer, SelectionError, Strategy, TrialScore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CampaignError {
    #[error("{what}: {source}")]
    Input { what: String, source: FactsError },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Abduction(#[from] AbductionError),
    #[error("invalid campaign configuration: {0}")]
    InvalidConfig(String),
    #[error("deleted fact {0} is not among the candidate hypotheses")]
    DeletedNotCandidate(String),
    #[error("outcome submitted for {got} but the pending trial is {expected}")]
    TrialMismatch { expected: Trial, got: Trial },
    #[error("campaign is {0}; no outcome is expected")]
    NotAwaiting(Status),
    #[error("{0}")]
    Io(String),
    #[error("corrupt event log at byte {offset}: {reason}")]
    CorruptRecord { offset: u64, reason: String },
    #[error("event log diverges from the inputs at step {step}: {reason}")]
    ReplayDivergence { step: usize, reason: String },
}

impl CampaignError {
    /// Whether the error comes from bad input rather than from running.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            CampaignError::Input { .. }
                | CampaignError::Engine(_)
                | CampaignError::Selection(_)
                | CampaignError::InvalidConfig(_)
                | CampaignError::DeletedNotCandidate(_)
                | CampaignError::Io(_)
        )
    }
}

/// Where outcomes come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Simulated from the model with the listed `codes(g,e)` facts restored.
    Oracle { deleted: Vec<String> },
    /// Submitted from outside, one per suggestion.
    External,
}

/// Limits after which a campaign stops with [`Status::BudgetExhausted`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cost: Option<Cost>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_trials: Option<usize>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub mode: Mode,
    pub strategy: Strategy,
    #[serde(default)]
    pub budget: Budget,
    /// Enzymes hypotheses may link genes to; all enzymes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enzyme_scope: Option<Vec<String>>,
    /// Trials that may be selected; every (gene or WT, medium) pair when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<Vec<Trial>>,
    /// Trials accuracy is measured on; the design trials when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Vec<Trial>>,
}

impl CampaignConfig {
    pub fn oracle(deleted: impl IntoIterator<Item = impl Into<String>>, strategy: Strategy) -> Self {
        CampaignConfig {
            mode: Mode::Oracle { deleted: deleted.into_iter().map(Into::into).collect() },
            strategy,
            budget: Budget::unlimited(),
            enzyme_scope: None,
            design: None,
            evaluation: None,
        }
    }

    pub fn external(strategy: Strategy) -> Self {
        CampaignConfig { mode: Mode::External, ..CampaignConfig::oracle(Vec::<String>::new(), strategy) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Selecting,
    AwaitingOutcome,
    Done,
    Exhausted,
    BudgetExhausted,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Done | Status::Exhausted | Status::BudgetExhausted)
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Selecting => "selecting",
            Status::AwaitingOutcome => "awaiting_outcome",
            Status::Done => "done",
            Status::Exhausted => "exhausted",
            Status::BudgetExhausted => "budget_exhausted",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One executed trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub trial: Trial,
    pub strategy: String,
    pub eig_bits: f64,
    pub cost: Cost,
    pub cumulative_cost: Cost,
    pub outcome: Phenotype,
    pub alive_before: usize,
    pub alive_count: usize,
    /// Predictive accuracy of the recovered model on the evaluation trials;
    /// absent when no ground truth is known.
    pub accuracy: Option<f64>,
}

/// A named input file and its content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Source {
    pub reference: String,
    pub text: String,
}

impl Source {
    pub fn new(reference: impl Into<String>, text: impl Into<String>) -> Self {
        Source { reference: reference.into(), text: text.into() }
    }

    pub fn digest(&self) -> SourceDigest {
        SourceDigest { reference: self.reference.clone(), sha256: hex::encode(Sha256::digest(self.text.as_bytes())) }
    }
}

/// Noise-free outcomes of `trials` in the ground-truth model.
pub fn synth_outcomes(truth: &CompiledModel, trials: &[TrialKey], workers: usize) -> Vec<Observation> {
    let m = simulate_batch(truth, &[None], trials, workers);
    trials.iter().enumerate().map(|(i, &k)| Observation::new(truth.trial(k), m.get(0, i))).collect()
}

/// The model with deleted facts restored, used to answer trials.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub truth: CompiledModel,
}

impl Oracle {
    /// Restores `deleted` (fact ids) into `model`. Every fact must name
    /// declared symbols and be absent from the model.
    pub fn from_deleted(model: &MetabolicModel, env: &Environment, deleted: &[String]) -> Result<Self, CampaignError> {
        if deleted.is_empty() {
            return Err(CampaignError::InvalidConfig("oracle mode needs at least one deleted fact".into()));
        }
        let mut facts = Vec::new();
        for id in deleted {
            for (g, e) in parse_hypothesis_id(id)? {
                if !model.genes.contains(&g) {
                    return Err(EngineError::UnknownGene(g).into());
                }
                if !model.enzymes.contains(&e) {
                    return Err(EngineError::UnknownEnzyme(e).into());
                }
                if model.codes.contains(&(g.clone(), e.clone())) {
                    return Err(EngineError::KnownFact(crate::engine::fact_id(&g, &e)).into());
                }
                facts.push((g, e));
            }
        }
        let truth = compile_with_environment(&model.with_codes(&facts), env)?;
        Ok(Oracle { truth })
    }
}

/// Everything about a campaign that does not depend on the strategy or
/// budget: parsed inputs, candidate space, prediction table and ground
/// truth. Shared between campaigns that differ only in strategy.
#[derive(Debug)]
pub struct Setup {
    model_source: SourceDigest,
    env_source: SourceDigest,
    mode: Mode,
    enzyme_scope: Option<Vec<String>>,
    design_trials: Option<Vec<Trial>>,
    evaluation_trials: Option<Vec<Trial>>,
    model: MetabolicModel,
    env: Environment,
    compiled: CompiledModel,
    space: HypothesisSpace,
    scorer: DesignScorer,
    design: Vec<TrialKey>,
    evaluation: Vec<usize>,
    // ground-truth phenotype per table trial, oracle mode only
    truth: Option<Vec<Phenotype>>,
}

fn resolve_trials(compiled: &CompiledModel, trials: &Option<Vec<Trial>>, default: &[TrialKey]) -> Result<Vec<TrialKey>, CampaignError> {
    let Some(list) = trials else { return Ok(default.to_vec()) };
    if list.is_empty() {
        return Err(CampaignError::InvalidConfig("trial list is empty".into()));
    }
    let mut keys = Vec::with_capacity(list.len());
    for t in list {
        let k = compiled.resolve_trial(t)?;
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    Ok(keys)
}

impl Setup {
    pub fn new(model: &Source, env: &Source, config: &CampaignConfig, workers: usize) -> Result<Self, CampaignError> {
        let parsed_model = parse_model(&model.text).map_err(|source| CampaignError::Input { what: format!("model {}", model.reference), source })?;
        let parsed_env = parse_environment(&env.text).map_err(|source| CampaignError::Input { what: format!("environment {}", env.reference), source })?;
        let compiled = compile_with_environment(&parsed_model, &parsed_env)?;
        if compiled.medium_count() == 0 {
            return Err(CampaignError::InvalidConfig("environment declares no media".into()));
        }

        let scope: Option<Vec<EnzymeIdx>> = match &config.enzyme_scope {
            None => None,
            Some(names) => Some(
                names
                    .iter()
                    .map(|e| compiled.enzyme_index(e).ok_or_else(|| EngineError::UnknownEnzyme(e.clone())))
                    .collect::<Result<_, _>>()?,
            ),
        };
        let space = generate_candidates(&compiled, scope.as_deref());
        if space.is_empty() {
            return Err(CampaignError::InvalidConfig("no candidate hypotheses: every gene already codes every enzyme in scope".into()));
        }

        let full = compiled.design_space();
        let design = resolve_trials(&compiled, &config.design, &full)?;
        let evaluation_keys = resolve_trials(&compiled, &config.evaluation, &design)?;
        let mut table_trials = design.clone();
        for k in &evaluation_keys {
            if !table_trials.contains(k) {
                table_trials.push(*k);
            }
        }

        let truth = match &config.mode {
            Mode::External => None,
            Mode::Oracle { deleted } => {
                let oracle = Oracle::from_deleted(&parsed_model, &parsed_env, deleted)?;
                for id in deleted {
                    let h = Hypothesis::parse(&compiled, id)?;
                    if space.position(h.id()).is_none() {
                        return Err(CampaignError::DeletedNotCandidate(h.id().to_string()));
                    }
                }
                Some(synth_outcomes(&oracle.truth, &table_trials, workers).into_iter().map(|o| o.phenotype).collect())
            }
        };

        let table = Arc::new(PredictionTable::build(&compiled, space.candidates(), table_trials, workers));
        let scorer = DesignScorer::new(&compiled, &parsed_env, table.clone(), &space, &design)?;
        let evaluation = evaluation_keys.iter().map(|&k| table.position(k).expect("tabulated")).collect();

        Ok(Setup {
            model_source: model.digest(),
            env_source: env.digest(),
            mode: config.mode.clone(),
            enzyme_scope: config.enzyme_scope.clone(),
            design_trials: config.design.clone(),
            evaluation_trials: config.evaluation.clone(),
            model: parsed_model,
            env: parsed_env,
            compiled,
            space,
            scorer,
            design,
            evaluation,
            truth,
        })
    }

    pub fn model(&self) -> &MetabolicModel {
        &self.model
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn compiled(&self) -> &CompiledModel {
        &self.compiled
    }

    pub fn initial_space(&self) -> &HypothesisSpace {
        &self.space
    }

    pub fn design(&self) -> &[TrialKey] {
        &self.design
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn model_source(&self) -> &SourceDigest {
        &self.model_source
    }

    pub fn env_source(&self) -> &SourceDigest {
        &self.env_source
    }

    fn config(&self, strategy: Strategy, budget: Budget) -> CampaignConfig {
        CampaignConfig {
            mode: self.mode.clone(),
            strategy,
            budget,
            enzyme_scope: self.enzyme_scope.clone(),
            design: self.design_trials.clone(),
            evaluation: self.evaluation_trials.clone(),
        }
    }

    /// Ground-truth phenotype of a tabulated trial, in oracle mode.
    fn truth(&self, t: usize) -> Option<Phenotype> {
        self.truth.as_ref().map(|v| v[t])
    }

    /// Accuracy of the model extended with candidate `rep`.
    fn accuracy(&self, rep: usize) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        let table = self.scorer.table();
        let hits = self.evaluation.iter().filter(|&&t| table.predict(rep, t) == truth[t]).count();
        Some(hits as f64 / self.evaluation.len() as f64)
    }
}

/// The trial a campaign is waiting on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    #[serde(flatten)]
    pub score: TrialScore,
    /// Number of trials already run.
    pub step: usize,
}

/// A running or finished campaign.
#[derive(Clone, Debug)]
pub struct Campaign {
    setup: Arc<Setup>,
    strategy: Strategy,
    budget: Budget,
    space: HypothesisSpace,
    scorer: DesignScorer,
    tried: BitSet,
    steps: Vec<StepRecord>,
    cumulative_cost: Cost,
    status: Status,
    pending: Option<(usize, TrialScore)>,
    initial_accuracy: Option<f64>,
    accuracy_cache: Option<(usize, Option<f64>)>,
}

impl Campaign {
    /// Parses inputs, builds the candidate space and computes the first
    /// suggestion.
    pub fn new(model: &Source, env: &Source, config: &CampaignConfig, workers: usize) -> Result<Self, CampaignError> {
        let setup = Arc::new(Setup::new(model, env, config, workers)?);
        Campaign::start(setup, config.strategy, config.budget)
    }

    pub fn start(setup: Arc<Setup>, strategy: Strategy, budget: Budget) -> Result<Self, CampaignError> {
        if let Some(c) = budget.max_cost {
            if !c.is_positive() {
                return Err(CampaignError::InvalidConfig(format!("cost budget must be positive, got {c}")));
            }
        }
        if budget.max_trials == Some(0) {
            return Err(CampaignError::InvalidConfig("trial budget must be positive".into()));
        }
        let space = setup.space.clone();
        let scorer = setup.scorer.clone();
        let tried = BitSet::new(scorer.table().trials().len());
        let mut campaign = Campaign {
            setup,
            strategy,
            budget,
            space,
            scorer,
            tried,
            steps: Vec::new(),
            cumulative_cost: Cost::ZERO,
            status: Status::Selecting,
            pending: None,
            initial_accuracy: None,
            accuracy_cache: None,
        };
        campaign.initial_accuracy = campaign.current_accuracy();
        campaign.advance();
        Ok(campaign)
    }

    pub fn setup(&self) -> &Arc<Setup> {
        &self.setup
    }

    pub fn config(&self) -> CampaignConfig {
        self.setup.config(self.strategy, self.budget)
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn space(&self) -> &HypothesisSpace {
        &self.space
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn cumulative_cost(&self) -> Cost {
        self.cumulative_cost
    }

    /// Trials run so far, in order.
    pub fn tried(&self) -> impl Iterator<Item = &Trial> {
        self.steps.iter().map(|s| &s.trial)
    }

    /// Accuracy before any trial was run.
    pub fn initial_accuracy(&self) -> Option<f64> {
        self.initial_accuracy
    }

    /// Accuracy after the latest step.
    pub fn accuracy(&self) -> Option<f64> {
        self.steps.last().map_or(self.initial_accuracy, |s| s.accuracy)
    }

    pub fn suggestion(&self) -> Option<Suggestion> {
        self.pending.as_ref().map(|(_, score)| Suggestion { score: score.clone(), step: self.steps.len() })
    }

    /// The model extended with the facts of the lexicographically smallest
    /// alive hypothesis.
    pub fn recovered_model(&self) -> Result<MetabolicModel, CampaignError> {
        Ok(crate::abduction::recovered_model(&self.setup.model, &self.setup.compiled, &self.space)?)
    }

    fn current_accuracy(&mut self) -> Option<f64> {
        let rep = self.space.representative()?;
        if let Some((r, acc)) = self.accuracy_cache {
            if r == rep {
                return acc;
            }
        }
        let acc = self.setup.accuracy(rep);
        self.accuracy_cache = Some((rep, acc));
        acc
    }

    /// Moves out of `Selecting`: either to a terminal status or to
    /// awaiting the outcome of a freshly chosen trial.
    fn advance(&mut self) {
        if self.status.is_terminal() {
            return;
        }
        self.pending = None;
        if self.space.alive_count() <= 1 {
            self.status = Status::Done;
            return;
        }
        let Some((t, score)) = self.scorer.select(self.strategy, &self.tried, self.steps.len() as u64) else {
            self.status = Status::Done;
            return;
        };
        let over_trials = self.budget.max_trials.is_some_and(|n| self.steps.len() >= n);
        let over_cost = self.budget.max_cost.is_some_and(|c| self.cumulative_cost + score.cost > c);
        if over_trials || over_cost {
            self.status = Status::BudgetExhausted;
            return;
        }
        self.pending = Some((t, score));
        self.status = Status::AwaitingOutcome;
    }

    /// Records the outcome of the pending trial, prunes and selects the
    /// next one. An outcome no alive hypothesis predicts leaves the
    /// campaign [`Status::Exhausted`]; the step is still recorded.
    pub fn submit(&mut self, trial: &Trial, outcome: Phenotype) -> Result<StepRecord, CampaignError> {
        let Some((t, score)) = self.pending.clone() else {
            return Err(CampaignError::NotAwaiting(self.status));
        };
        if &score.trial != trial {
            return Err(CampaignError::TrialMismatch { expected: score.trial, got: trial.clone() });
        }
        self.status = Status::Selecting;
        let observation = Observation::new(score.trial.clone(), outcome);
        let alive_before = self.space.alive_count();
        let exhausted = match self.space.prune_tabulated(self.scorer.table(), t, &observation) {
            Ok(report) => {
                self.scorer.refute(&report.refuted);
                false
            }
            Err(AbductionError::Exhausted { .. }) => true,
            Err(e) => return Err(e.into()),
        };
        self.tried.insert(t);
        self.cumulative_cost += score.cost;
        let accuracy = if exhausted { None } else { self.current_accuracy() };
        let record = StepRecord {
            step: self.steps.len() + 1,
            trial: score.trial,
            strategy: self.strategy.name().to_string(),
            eig_bits: score.eig_bits,
            cost: score.cost,
            cumulative_cost: self.cumulative_cost,
            outcome,
            alive_before,
            alive_count: self.space.alive_count(),
            accuracy,
        };
        self.steps.push(record.clone());
        if exhausted {
            self.pending = None;
            self.status = Status::Exhausted;
        } else {
            self.advance();
        }
        Ok(record)
    }

    /// Ground-truth outcome of the pending trial, in oracle mode.
    pub fn oracle_outcome(&self) -> Option<Phenotype> {
        let (t, _) = self.pending.as_ref()?;
        self.setup.truth(*t)
    }

    /// Runs an oracle-mode campaign to a terminal status, handing every
    /// step to `sink` as it happens.
    pub fn run(&mut self, mut sink: impl FnMut(&StepRecord) -> Result<(), CampaignError>) -> Result<Status, CampaignError> {
        if self.setup.truth.is_none() {
            return Err(CampaignError::InvalidConfig("only oracle-mode campaigns run unattended".into()));
        }
        while self.status == Status::AwaitingOutcome {
            let outcome = self.oracle_outcome().expect("oracle mode");
            let trial = self.pending.as_ref().expect("awaiting").1.trial.clone();
            let record = self.submit(&trial, outcome)?;
            sink(&record)?;
        }
        if self.status == Status::Exhausted {
            let last = self.steps.last().expect("exhaustion follows a step");
            let observation = Observation::new(last.trial.clone(), last.outcome).to_string();
            return Err(AbductionError::Exhausted { observation }.into());
        }
        Ok(self.status)
    }
}

/// Runs an oracle-mode campaign from scratch to its terminal state.
pub fn run_campaign(model: &Source, env: &Source, config: &CampaignConfig, workers: usize) -> Result<Campaign, CampaignError> {
    let mut campaign = Campaign::new(model, env, config, workers)?;
    campaign.run(|_| Ok(()))?;
    Ok(campaign)
}
