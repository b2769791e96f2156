//! Append-only JSON-lines event log: one header, then one record per step.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Campaign, CampaignConfig, CampaignError, Source, Status, StepRecord};

pub const LOG_VERSION: u32 = 1;

/// Name and content hash of an input file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub reference: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    pub model: SourceDigest,
    pub environment: SourceDigest,
    pub config: CampaignConfig,
}

impl LogHeader {
    pub fn for_campaign(campaign: &Campaign) -> Self {
        LogHeader {
            version: LOG_VERSION,
            model: campaign.setup().model_source().clone(),
            environment: campaign.setup().env_source().clone(),
            config: campaign.config(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(LogHeader),
    Step(StepRecord),
}

fn io_error(path: &Path, e: std::io::Error) -> CampaignError {
    CampaignError::Io(format!("{}: {e}", path.display()))
}

fn encode(record: &LogRecord) -> Vec<u8> {
    let mut line = serde_json::to_vec(record).expect("log records serialize");
    line.push(b'\n');
    line
}

/// Writer side of an event log.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Writes a log holding `header` and `steps`, replacing any file at
    /// `path` in one rename, and opens it for appending.
    pub fn create(path: &Path, header: &LogHeader, steps: &[StepRecord]) -> Result<Self, CampaignError> {
        let mut bytes = encode(&LogRecord::Header(header.clone()));
        for s in steps {
            bytes.extend(encode(&LogRecord::Step(s.clone())));
        }
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
            f.write_all(&bytes).map_err(|e| io_error(&tmp, e))?;
            f.sync_all().map_err(|e| io_error(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| io_error(path, e))?;
        EventLog::open(path)
    }

    /// Opens an existing log for appending.
    pub fn open(path: &Path) -> Result<Self, CampaignError> {
        let file = OpenOptions::new().append(true).open(path).map_err(|e| io_error(path, e))?;
        Ok(EventLog { path: path.to_path_buf(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one step as a single write, then syncs.
    pub fn append(&mut self, step: &StepRecord) -> Result<(), CampaignError> {
        let line = encode(&LogRecord::Step(step.clone()));
        self.file.write_all(&line).map_err(|e| io_error(&self.path, e))?;
        self.file.sync_data().map_err(|e| io_error(&self.path, e))
    }
}

/// Splits a log into its header and steps. A final line without its
/// newline is a torn write and rejected like any malformed record.
pub fn parse_log(text: &str) -> Result<(LogHeader, Vec<StepRecord>), CampaignError> {
    let mut header = None;
    let mut steps = Vec::new();
    let mut offset = 0u64;
    for raw in text.split_inclusive('\n') {
        let here = offset;
        offset += raw.len() as u64;
        let corrupt = |reason: String| CampaignError::CorruptRecord { offset: here, reason };
        let Some(line) = raw.strip_suffix('\n') else {
            return Err(corrupt("truncated record (no trailing newline)".into()));
        };
        if line.trim().is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
        match (record, &header) {
            (LogRecord::Header(h), None) => {
                if h.version != super::log::LOG_VERSION {
                    return Err(corrupt(format!("unsupported log version {}", h.version)));
                }
                header = Some(h);
            }
            (LogRecord::Header(_), Some(_)) => return Err(corrupt("second header".into())),
            (LogRecord::Step(_), None) => return Err(corrupt("step before header".into())),
            (LogRecord::Step(s), Some(_)) => {
                if s.step != steps.len() + 1 {
                    return Err(corrupt(format!("expected step {}, found {}", steps.len() + 1, s.step)));
                }
                steps.push(s);
            }
        }
    }
    let header = header.ok_or(CampaignError::CorruptRecord { offset: 0, reason: "missing header".into() })?;
    Ok((header, steps))
}

fn field_mismatch(logged: &StepRecord, replayed: &StepRecord) -> Option<String> {
    let fields: [(&str, bool); 8] = [
        ("strategy", logged.strategy == replayed.strategy),
        ("eig_bits", logged.eig_bits.to_bits() == replayed.eig_bits.to_bits()),
        ("cost", logged.cost == replayed.cost),
        ("cumulative_cost", logged.cumulative_cost == replayed.cumulative_cost),
        ("alive_before", logged.alive_before == replayed.alive_before),
        ("alive_count", logged.alive_count == replayed.alive_count),
        ("accuracy", logged.accuracy.map(f64::to_bits) == replayed.accuracy.map(f64::to_bits)),
        ("outcome", logged.outcome == replayed.outcome),
    ];
    fields.iter().find(|(_, same)| !same).map(|(name, _)| name.to_string())
}

/// Rebuilds a campaign from its log, re-running every step against the
/// given inputs and checking each against what was logged.
pub fn load_campaign(log: &str, model: &Source, env: &Source, workers: usize) -> Result<Campaign, CampaignError> {
    let (header, steps) = parse_log(log)?;
    let diverged = |step: usize, reason: String| CampaignError::ReplayDivergence { step, reason };
    if model.digest().sha256 != header.model.sha256 {
        return Err(diverged(0, format!("model content differs from the logged model {}", header.model.reference)));
    }
    if env.digest().sha256 != header.environment.sha256 {
        return Err(diverged(0, format!("environment content differs from the logged environment {}", header.environment.reference)));
    }
    let mut campaign = Campaign::new(model, env, &header.config, workers)?;
    for logged in &steps {
        match campaign.suggestion() {
            Some(s) if s.score.trial == logged.trial => {}
            Some(s) => return Err(diverged(logged.step, format!("logged trial {} but replay selects {}", logged.trial, s.score.trial))),
            None => return Err(diverged(logged.step, format!("logged trial {} but replay stopped as {}", logged.trial, campaign.status()))),
        }
        let replayed = campaign.submit(&logged.trial, logged.outcome)?;
        if let Some(field) = field_mismatch(logged, &replayed) {
            return Err(diverged(logged.step, format!("{field} differs from the logged value")));
        }
    }
    debug_assert!(campaign.status() != Status::Selecting);
    Ok(campaign)
}
