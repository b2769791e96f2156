//! Campaigns persisted as event logs under a data directory.
//!
//! Layout: `models/<name>`, `environments/<name>`, `campaigns/<id>.jsonl`.
//! Each campaign has one writer; readers clone an immutable snapshot.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use gemlab_core::abduction::AbductionError;
use gemlab_core::campaign::{
    load_campaign, metrics_csv, parse_log, Campaign, Mode, CampaignConfig, CampaignError, EventLog, LogHeader, Source, Status,
    StepRecord, Suggestion,
};
use gemlab_core::facts::{is_identifier, parse_environment, parse_model, Cost, Observation, Phenotype, Trial};
use serde::Serialize;

use crate::ServiceError;

/// Kind of uploaded input file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Model,
    Environment,
}

impl InputKind {
    fn dir(self) -> &'static str {
        match self {
            InputKind::Model => "models",
            InputKind::Environment => "environments",
        }
    }

    fn label(self) -> &'static str {
        match self {
            InputKind::Model => "model",
            InputKind::Environment => "environment",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StoredInput {
    pub name: String,
    pub sha256: String,
    /// False when an identical file was already stored.
    pub created: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignResource {
    pub id: String,
    pub model: String,
    pub environment: String,
    pub config: CampaignConfig,
    pub status: Status,
    pub suggestion: Option<Suggestion>,
    pub candidate_count: usize,
    pub alive_count: usize,
    pub steps: usize,
    pub cumulative_cost: Cost,
    pub initial_accuracy: Option<f64>,
    pub accuracy: Option<f64>,
    pub last_step: Option<StepRecord>,
    /// The surviving hypothesis once exactly one is left.
    pub recovered: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Alive,
    Refuted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HypothesisEntry {
    pub rank: usize,
    pub id: String,
    pub status: HypothesisStatus,
    pub refuted_by: Option<Observation>,
    pub refuted_at_step: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HypothesisList {
    pub id: String,
    pub alive_count: usize,
    pub refuted_count: usize,
    pub hypotheses: Vec<HypothesisEntry>,
}

/// Immutable view of a campaign after some prefix of its log.
#[derive(Debug)]
pub struct Snapshot {
    pub id: String,
    campaign: Campaign,
}

impl Snapshot {
    pub fn resource(&self) -> CampaignResource {
        let c = &self.campaign;
        let setup = c.setup();
        let space = c.space();
        CampaignResource {
            id: self.id.clone(),
            model: setup.model_source().reference.clone(),
            environment: setup.env_source().reference.clone(),
            config: c.config(),
            status: c.status(),
            suggestion: c.suggestion(),
            candidate_count: space.len(),
            alive_count: space.alive_count(),
            steps: c.steps().len(),
            cumulative_cost: c.cumulative_cost(),
            initial_accuracy: c.initial_accuracy(),
            accuracy: c.accuracy(),
            last_step: c.steps().last().cloned(),
            recovered: (space.alive_count() == 1).then(|| space.alive().next().expect("one alive").id().to_string()),
        }
    }

    /// Alive hypotheses first in candidate order, then refuted ones in the
    /// order they were refuted.
    pub fn hypotheses(&self) -> HypothesisList {
        let space = self.campaign.space();
        let step_of: HashMap<&Observation, usize> = space.observations().iter().enumerate().map(|(i, o)| (o, i + 1)).collect();
        let mut refuted: Vec<(usize, usize)> = Vec::new();
        let mut entries = Vec::with_capacity(space.len());
        for i in 0..space.len() {
            match space.refuted_by(i) {
                None => entries.push(HypothesisEntry {
                    rank: entries.len() + 1,
                    id: space.candidate(i).id().to_string(),
                    status: HypothesisStatus::Alive,
                    refuted_by: None,
                    refuted_at_step: None,
                }),
                Some(o) => refuted.push((step_of.get(o).copied().unwrap_or(usize::MAX), i)),
            }
        }
        refuted.sort_unstable();
        for (step, i) in refuted {
            entries.push(HypothesisEntry {
                rank: entries.len() + 1,
                id: space.candidate(i).id().to_string(),
                status: HypothesisStatus::Refuted,
                refuted_by: space.refuted_by(i).cloned(),
                refuted_at_step: (step != usize::MAX).then_some(step),
            });
        }
        HypothesisList { id: self.id.clone(), alive_count: space.alive_count(), refuted_count: space.len() - space.alive_count(), hypotheses: entries }
    }

    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.campaign)
    }
}

struct Writer {
    campaign: Campaign,
    log: EventLog,
}

struct Entry {
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl Entry {
    fn new(id: &str, campaign: Campaign, log: EventLog) -> Self {
        let snapshot = Arc::new(Snapshot { id: id.to_string(), campaign: campaign.clone() });
        Entry { writer: Mutex::new(Writer { campaign, log }), snapshot: RwLock::new(snapshot) }
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    fn publish(&self, id: &str, campaign: &Campaign) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(Snapshot { id: id.to_string(), campaign: campaign.clone() });
    }
}

/// A campaign log that could not be replayed at startup.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedLog {
    pub file: String,
    pub reason: String,
}

pub struct Store {
    root: PathBuf,
    workers: usize,
    campaigns: RwLock<BTreeMap<String, Arc<Entry>>>,
    uploads: Mutex<()>,
    next_id: AtomicU64,
    skipped: Vec<SkippedLog>,
}

fn io_error(path: &Path, e: std::io::Error) -> ServiceError {
    ServiceError::Internal(format!("{}: {e}", path.display()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("upload");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_error(&tmp, e))?;
    f.sync_all().map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

fn valid_name(name: &str) -> bool {
    is_identifier(name) && !name.starts_with('.')
}

fn campaign_error(e: CampaignError) -> ServiceError {
    match e {
        CampaignError::TrialMismatch { .. } => ServiceError::TrialMismatch(e.to_string()),
        CampaignError::NotAwaiting(_) => ServiceError::Terminal(e.to_string()),
        e if e.is_input_error() => ServiceError::InvalidConfig(e.to_string()),
        e => ServiceError::Internal(e.to_string()),
    }
}

impl Store {
    /// Opens a data directory, creating its layout, and replays every
    /// campaign log found in it. Logs that fail to replay are skipped and
    /// reported by [`Store::skipped`].
    pub fn open(root: impl Into<PathBuf>, workers: usize) -> Result<Self, ServiceError> {
        let root = root.into();
        for dir in ["models", "environments", "campaigns"] {
            let p = root.join(dir);
            fs::create_dir_all(&p).map_err(|e| io_error(&p, e))?;
        }
        let mut store = Store { root, workers: workers.max(1), campaigns: RwLock::new(BTreeMap::new()), uploads: Mutex::new(()), next_id: AtomicU64::new(1), skipped: Vec::new() };
        let dir = store.root.join("campaigns");
        let mut logs: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_error(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        let mut loaded = BTreeMap::new();
        for path in logs {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if let Some(n) = id.strip_prefix('c').and_then(|n| n.parse::<u64>().ok()) {
                store.next_id = AtomicU64::new(store.next_id.load(Ordering::SeqCst).max(n + 1));
            }
            match store.replay(&path) {
                Ok(entry) => {
                    loaded.insert(id, Arc::new(entry));
                }
                Err(e) => store.skipped.push(SkippedLog { file: path.display().to_string(), reason: e.to_string() }),
            }
        }
        store.campaigns = RwLock::new(loaded);
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn skipped(&self) -> &[SkippedLog] {
        &self.skipped
    }

    fn replay(&self, path: &Path) -> Result<Entry, ServiceError> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let (header, _) = parse_log(&text).map_err(campaign_error)?;
        let model = self.read_input(InputKind::Model, &header.model.reference)?;
        let env = self.read_input(InputKind::Environment, &header.environment.reference)?;
        let campaign = load_campaign(&text, &model, &env, self.workers).map_err(campaign_error)?;
        let log = EventLog::open(path).map_err(campaign_error)?;
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        Ok(Entry::new(id, campaign, log))
    }

    fn read_input(&self, kind: InputKind, name: &str) -> Result<Source, ServiceError> {
        if !valid_name(name) {
            return Err(ServiceError::InvalidConfig(format!("invalid {} name `{name}`", kind.label())));
        }
        let path = self.root.join(kind.dir()).join(name);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Source::new(name, text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ServiceError::NotFound(format!("no {} named `{name}`", kind.label()))),
            Err(e) => Err(io_error(&path, e)),
        }
    }

    /// Validates and stores an input file. Re-uploading identical content
    /// is a no-op; different content under a taken name is a conflict,
    /// since existing logs pin the content they were run against.
    pub fn put_input(&self, kind: InputKind, name: &str, content: &str) -> Result<StoredInput, ServiceError> {
        if !valid_name(name) {
            return Err(ServiceError::InvalidConfig(format!("invalid {} name `{name}`", kind.label())));
        }
        let parsed = match kind {
            InputKind::Model => parse_model(content).map(|_| ()),
            InputKind::Environment => parse_environment(content).map(|_| ()),
        };
        parsed.map_err(|e| ServiceError::InvalidConfig(format!("{name}: {e}")))?;
        let digest = Source::new(name, content).digest();
        let _guard = self.uploads.lock().expect("upload lock poisoned");
        let path = self.root.join(kind.dir()).join(name);
        match fs::read_to_string(&path) {
            Ok(existing) if existing == content => return Ok(StoredInput { name: name.into(), sha256: digest.sha256, created: false }),
            Ok(_) => return Err(ServiceError::NameTaken(format!("a different {} named `{name}` already exists", kind.label()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_error(&path, e)),
        }
        write_atomic(&path, content.as_bytes())?;
        Ok(StoredInput { name: name.into(), sha256: digest.sha256, created: true })
    }

    /// Creates a campaign and its log. Oracle-mode campaigns are run to a
    /// terminal status before returning.
    pub fn create(&self, model: &str, environment: &str, config: &CampaignConfig) -> Result<Arc<Snapshot>, ServiceError> {
        let model = self.read_input(InputKind::Model, model)?;
        let env = self.read_input(InputKind::Environment, environment)?;
        let mut campaign = Campaign::new(&model, &env, config, self.workers).map_err(campaign_error)?;
        if matches!(config.mode, Mode::Oracle { .. }) {
            match campaign.run(|_| Ok(())) {
                Ok(_) | Err(CampaignError::Abduction(AbductionError::Exhausted { .. })) => {}
                Err(e) => return Err(campaign_error(e)),
            }
        }

        let mut campaigns = self.campaigns.write().expect("campaign lock poisoned");
        let id = format!("c{:06}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let path = self.root.join("campaigns").join(format!("{id}.jsonl"));
        let log = EventLog::create(&path, &LogHeader::for_campaign(&campaign), campaign.steps()).map_err(campaign_error)?;
        let entry = Arc::new(Entry::new(&id, campaign, log));
        let snapshot = entry.snapshot();
        campaigns.insert(id, entry);
        Ok(snapshot)
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ServiceError> {
        self.campaigns
            .read()
            .expect("campaign lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no campaign `{id}`")))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Snapshot>, ServiceError> {
        Ok(self.entry(id)?.snapshot())
    }

    pub fn list(&self) -> Vec<Arc<Snapshot>> {
        let entries: Vec<Arc<Entry>> = self.campaigns.read().expect("campaign lock poisoned").values().cloned().collect();
        entries.iter().map(|e| e.snapshot()).collect()
    }

    /// Applies an outcome for the pending trial. The step is appended to
    /// the log before the new state becomes visible to readers.
    pub fn submit(&self, id: &str, trial: &Trial, outcome: Phenotype) -> Result<Arc<Snapshot>, ServiceError> {
        let entry = self.entry(id)?;
        let mut writer = entry.writer.lock().expect("writer lock poisoned");
        if writer.campaign.status().is_terminal() {
            return Err(ServiceError::Terminal(format!("campaign `{id}` is {}", writer.campaign.status())));
        }
        let mut next = writer.campaign.clone();
        let record = next.submit(trial, outcome).map_err(campaign_error)?;
        writer.log.append(&record).map_err(campaign_error)?;
        writer.campaign = next;
        entry.publish(id, &writer.campaign);
        Ok(entry.snapshot())
    }
}
