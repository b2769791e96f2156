//! `gemlab`: knockout simulation, abduction, campaigns, benchmarks and the
//! campaign service from the command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use gemlab_core::abduction::{generate_candidates, AbductionError};
use gemlab_core::bench::{bench, BenchParams};
use gemlab_core::campaign::{
    compare_strategies, load_campaign, metrics_csv, parse_log, Budget, Campaign, CampaignConfig, CampaignError, EventLog,
    LogHeader, Mode, Setup, Source, Status,
};
use gemlab_core::engine::{compile_with_environment, parse_hypothesis_id, simulate_batch, TrialKey};
use gemlab_core::facts::{
    parse_environment, parse_model, parse_observations, write_observations, Cost, Environment, MetabolicModel, Observation,
    Phenotype, Trial,
};
use gemlab_core::selection::Strategy;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "gemlab", version, about = "Gene-function discovery over logical metabolic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate knockout phenotypes.
    Simulate(SimulateArgs),
    /// Prune candidate gene-enzyme facts against observations.
    Abduce(AbduceArgs),
    /// Run an active-learning campaign.
    Campaign(CampaignArgs),
    /// Compare strategies on one oracle-mode problem.
    Compare(CompareArgs),
    /// Measure simulation throughput on a synthetic model.
    Bench(BenchArgs),
    /// Serve the campaign HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct Inputs {
    /// Model fact file.
    #[arg(long)]
    model: PathBuf,
    /// Environment file (media and prices).
    #[arg(long)]
    env: PathBuf,
    /// Worker threads for simulation batches.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// `all` for every (gene or WT, medium) pair, or a CSV with header `gene,medium`.
    #[arg(long, default_value = "all")]
    trials: String,
    /// Extra facts to add before simulating, `codes(g,e)[;...]`.
    #[arg(long)]
    hypothesis: Option<String>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AbduceArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Observations CSV with header `gene,medium,phenotype`.
    #[arg(long)]
    observations: PathBuf,
    /// Enzymes hypotheses may involve, comma separated.
    #[arg(long)]
    enzyme_scope: Option<String>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StrategyArgs {
    /// Trial selection strategy: ase, naive or random.
    #[arg(long, default_value = "ase")]
    strategy: String,
    /// Seed for the random strategy; ignored by the others.
    #[arg(long)]
    seed: Option<u64>,
}

impl StrategyArgs {
    fn strategy(&self) -> Result<Strategy> {
        let seed = if self.strategy == "random" { self.seed } else { None };
        Strategy::from_parts(&self.strategy, seed).map_err(|e| CliError::Input(e.to_string()))
    }
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    strategy: StrategyArgs,
    /// Facts removed from the true model, `codes(g,e)[;...]`; selects oracle mode.
    #[arg(long)]
    oracle_deleted: Option<String>,
    /// Lab outcomes CSV (`gene,medium,phenotype`); selects external mode.
    /// Suggestions are answered from it until one has no recorded outcome.
    #[arg(long)]
    outcomes: Option<PathBuf>,
    /// Maximum cumulative cost.
    #[arg(long)]
    budget: Option<String>,
    /// Maximum number of trials.
    #[arg(long)]
    max_trials: Option<usize>,
    /// Enzymes hypotheses may involve, comma separated.
    #[arg(long)]
    enzyme_scope: Option<String>,
    /// Event log (JSON lines).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Continue the campaign recorded in `--log`.
    #[arg(long, requires = "log")]
    resume: bool,
    /// Metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    oracle_deleted: String,
    /// Strategies to run, comma separated.
    #[arg(long, default_value = "ase,random")]
    strategies: String,
    /// Runs per randomized strategy.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// First seed for randomized strategies.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    max_trials: Option<usize>,
    /// Enzymes hypotheses may involve, comma separated.
    #[arg(long)]
    enzyme_scope: Option<String>,
    /// Per-step metrics of every run.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Summary CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1515)]
    genes: usize,
    #[arg(long, default_value_t = 2719)]
    reactions: usize,
    #[arg(long, default_value_t = 1800)]
    metabolites: usize,
    #[arg(long, default_value_t = 8)]
    media: usize,
    /// Trials per repetition; the full design space when absent.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Data directory holding models, environments and campaign logs.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn source(path: &Path) -> Result<Source> {
    Ok(Source::new(path.file_name().and_then(|n| n.to_str()).unwrap_or("input"), read(path)?))
}

fn load_inputs(inputs: &Inputs) -> Result<(MetabolicModel, Environment)> {
    let model = parse_model(&read(&inputs.model)?).map_err(|e| CliError::Input(format!("{}: {e}", inputs.model.display())))?;
    let env = parse_environment(&read(&inputs.env)?).map_err(|e| CliError::Input(format!("{}: {e}", inputs.env.display())))?;
    Ok((model, env))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let fail = |e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| CliError::Input(format!("invalid output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(fail)?;
    f.write_all(text.as_bytes()).map_err(fail)?;
    f.sync_all().map_err(fail)?;
    fs::rename(&tmp, path).map_err(fail)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn split_list(s: &str, sep: char) -> Vec<String> {
    s.split(sep).map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

fn parse_cost(s: &str) -> Result<Cost> {
    s.parse::<Cost>().map_err(|e| CliError::Input(format!("--budget: {e}")))
}

fn budget(cost: Option<&str>, trials: Option<usize>) -> Result<Budget> {
    Ok(Budget { max_cost: cost.map(parse_cost).transpose()?, max_trials: trials })
}

fn read_trials(text: &str) -> Result<Vec<Trial>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some("gene,medium") => {}
        other => return Err(CliError::Input(format!("trials file must start with `gene,medium`, found {other:?}"))),
    }
    lines
        .map(|l| match l.split(',').map(str::trim).collect::<Vec<_>>()[..] {
            [gene, medium] => Ok(Trial::from_labels(gene, medium)),
            _ => Err(CliError::Input(format!("malformed trial row `{l}`"))),
        })
        .collect()
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let (mut model, env) = load_inputs(&args.inputs)?;
    if let Some(h) = &args.hypothesis {
        let mut facts = Vec::new();
        for id in split_list(h, ';') {
            facts.extend(parse_hypothesis_id(&id).map_err(|e| CliError::Input(e.to_string()))?);
        }
        model = model.with_codes(&facts);
        model.validate().map_err(|e| CliError::Input(format!("--hypothesis: {e}")))?;
    }
    let compiled = compile_with_environment(&model, &env).map_err(|e| CliError::Input(e.to_string()))?;
    let keys: Vec<TrialKey> = if args.trials == "all" {
        compiled.design_space()
    } else {
        read_trials(&read(Path::new(&args.trials))?)?
            .iter()
            .map(|t| compiled.resolve_trial(t))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::Input(e.to_string()))?
    };
    let matrix = simulate_batch(&compiled, &[None], &keys, args.inputs.workers);
    let observations: Vec<Observation> = keys.iter().enumerate().map(|(i, &k)| Observation::new(compiled.trial(k), matrix.get(0, i))).collect();
    emit(args.out.as_deref(), &write_observations(&observations))
}

fn scope_indices(compiled: &gemlab_core::engine::CompiledModel, scope: &str) -> Result<Vec<gemlab_core::engine::EnzymeIdx>> {
    split_list(scope, ',')
        .iter()
        .map(|e| compiled.enzyme_index(e).ok_or_else(|| CliError::Input(format!("--enzyme-scope: unknown enzyme `{e}`"))))
        .collect()
}

fn abduce(args: &AbduceArgs) -> Result<()> {
    let (model, env) = load_inputs(&args.inputs)?;
    let compiled = compile_with_environment(&model, &env).map_err(|e| CliError::Input(e.to_string()))?;
    let observations = parse_observations(&read(&args.observations)?, &model, &env)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.observations.display())))?;
    let scope = args.enzyme_scope.as_deref().map(|s| scope_indices(&compiled, s)).transpose()?;
    let mut space = generate_candidates(&compiled, scope.as_deref());
    for o in &observations {
        match space.prune(&compiled, o, args.inputs.workers) {
            Ok(_) => {}
            Err(e @ AbductionError::Exhausted { .. }) => return Err(CliError::Runtime(e.to_string())),
            Err(e) => return Err(CliError::Input(e.to_string())),
        }
    }
    let mut out = String::from("hypothesis,status,refuted_by_gene,refuted_by_medium,refuted_by_phenotype\n");
    for i in 0..space.len() {
        let id = space.candidate(i).id();
        match space.refuted_by(i) {
            None => out.push_str(&format!("\"{id}\",alive,,,\n")),
            Some(o) => out.push_str(&format!("\"{id}\",refuted,{},{},{}\n", o.trial.gene_label(), o.trial.medium, o.phenotype)),
        }
    }
    eprintln!("{} candidates, {} alive after {} observations", space.len(), space.alive_count(), observations.len());
    emit(args.out.as_deref(), &out)
}

fn read_outcomes(path: &Path, setup: &Setup) -> Result<HashMap<Trial, Phenotype>> {
    let observations = parse_observations(&read(path)?, setup.model(), setup.environment())
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for o in observations {
        if let Some(prev) = map.insert(o.trial.clone(), o.phenotype) {
            if prev != o.phenotype {
                return Err(CliError::Input(format!("{}: conflicting outcomes for {}", path.display(), o.trial)));
            }
        }
    }
    Ok(map)
}

fn campaign(args: &CampaignArgs) -> Result<()> {
    let model = source(&args.inputs.model)?;
    let env = source(&args.inputs.env)?;
    let workers = args.inputs.workers;

    let (mut campaign, mut log) = if args.resume {
        let path = args.log.as_deref().expect("clap requires --log");
        let text = read(path)?;
        let (header, _) = parse_log(&text)?;
        let external = matches!(header.config.mode, Mode::External);
        if external != args.outcomes.is_some() || args.oracle_deleted.is_some() {
            return Err(CliError::Input("--resume takes its mode from the log: pass --outcomes only for external campaigns, never --oracle-deleted".into()));
        }
        let campaign = load_campaign(&text, &model, &env, workers)?;
        (campaign, Some(EventLog::open(path)?))
    } else {
        let strategy = args.strategy.strategy()?;
        let mut config = match (&args.oracle_deleted, &args.outcomes) {
            (Some(d), None) => CampaignConfig::oracle(split_list(d, ';'), strategy),
            (None, Some(_)) => CampaignConfig::external(strategy),
            _ => return Err(CliError::Input("give exactly one of --oracle-deleted (oracle mode) or --outcomes (external mode)".into())),
        };
        config.budget = budget(args.budget.as_deref(), args.max_trials)?;
        config.enzyme_scope = args.enzyme_scope.as_deref().map(|s| split_list(s, ','));
        let campaign = Campaign::new(&model, &env, &config, workers)?;
        let log = match &args.log {
            Some(p) => Some(EventLog::create(p, &LogHeader::for_campaign(&campaign), campaign.steps())?),
            None => None,
        };
        (campaign, log)
    };

    let mut append = |c: &gemlab_core::campaign::StepRecord| match log.as_mut() {
        Some(l) => l.append(c),
        None => Ok(()),
    };
    let outcome = match &args.outcomes {
        None => match campaign.run(&mut append) {
            Ok(_) | Err(CampaignError::Abduction(AbductionError::Exhausted { .. })) => Ok(()),
            Err(e) => Err(e),
        },
        Some(path) => {
            let answers = read_outcomes(path, campaign.setup())?;
            let mut result = Ok(());
            while let Some(s) = campaign.suggestion() {
                let Some(&phenotype) = answers.get(&s.score.trial) else { break };
                match campaign.submit(&s.score.trial, phenotype).and_then(|r| append(&r)) {
                    Ok(()) => {}
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
            result
        }
    };
    if let Some(p) = &args.metrics {
        write_atomic(p, &metrics_csv(&campaign))?;
    }
    outcome?;
    print_summary(&campaign);
    if campaign.status() == Status::Exhausted {
        return Err(CliError::Runtime("hypothesis space exhausted: no candidate explains the observations".into()));
    }
    Ok(())
}

fn print_summary(c: &Campaign) {
    println!("status: {}", c.status());
    println!("strategy: {}", c.strategy());
    println!("steps: {}", c.steps().len());
    println!("cumulative_cost: {}", c.cumulative_cost());
    println!("alive: {} of {}", c.space().alive_count(), c.space().len());
    if let Some(a) = c.accuracy() {
        println!("accuracy: {a:.6}");
    }
    if let Some(s) = c.suggestion() {
        println!("awaiting: {} {} (eig {:.6} bits, cost {})", s.score.trial.gene_label(), s.score.trial.medium, s.score.eig_bits, s.score.cost);
    }
    if c.space().alive_count() <= 5 {
        for h in c.space().alive() {
            println!("alive: {}", h.id());
        }
    }
}

fn compare(args: &CompareArgs) -> Result<()> {
    let model = source(&args.inputs.model)?;
    let env = source(&args.inputs.env)?;
    let mut config = CampaignConfig::oracle(split_list(&args.oracle_deleted, ';'), Strategy::Ase);
    config.budget = budget(args.budget.as_deref(), args.max_trials)?;
    config.enzyme_scope = args.enzyme_scope.as_deref().map(|s| split_list(s, ','));
    let mut strategies = Vec::new();
    for name in split_list(&args.strategies, ',') {
        if name == "random" {
            strategies.extend((0..args.seeds.max(1)).map(|k| Strategy::Random { seed: args.seed + k }));
        } else {
            strategies.push(Strategy::from_parts(&name, None).map_err(|e| CliError::Input(e.to_string()))?);
        }
    }
    let setup = Arc::new(Setup::new(&model, &env, &config, args.inputs.workers)?);
    let comparison = compare_strategies(setup, &strategies, config.budget)?;
    if let Some(p) = &args.metrics {
        write_atomic(p, comparison.metrics_csv())?;
    }
    emit(args.out.as_deref(), &comparison.summary_csv())
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let params = BenchParams {
        genes: args.genes,
        reactions: args.reactions,
        metabolites: args.metabolites,
        media: args.media,
        trials: args.trials.unwrap_or((args.genes + 1) * args.media),
        workers: args.workers,
        repetitions: args.repetitions,
        seed: args.seed,
    };
    let report = bench(&params).map_err(|e| CliError::Runtime(e.to_string()))?;
    let text = if args.json { format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")) } else { report.to_text() };
    emit(args.out.as_deref(), &text)
}

fn serve(args: &ServeArgs) -> Result<()> {
    let store = gemlab_service::Store::open(&args.data, args.workers).map_err(|e| CliError::Input(e.to_string()))?;
    for s in store.skipped() {
        eprintln!("skipped campaign log {}: {}", s.file, s.reason);
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.addr).await.map_err(|e| CliError::Input(format!("cannot bind {}: {e}", args.addr)))?;
        eprintln!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| args.addr.clone()));
        gemlab_service::serve(listener, Arc::new(store)).await.map_err(|e| CliError::Runtime(e.to_string()))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Abduce(a) => abduce(a),
        Command::Campaign(a) => campaign(a),
        Command::Compare(a) => compare(a),
        Command::Bench(a) => run_bench(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
