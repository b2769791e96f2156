//! Per-step metric rows and strategy comparisons.

use std::sync::Arc;

use serde::Serialize;

use super::{Budget, Campaign, CampaignError, Setup, Status};
use crate::abduction::AbductionError;
use crate::facts::Cost;
use crate::selection::Strategy;

pub const METRICS_HEADER: &str = "step,strategy,seed,cost,cumulative_cost,log10_cumulative_cost,alive,accuracy";

#[derive(Serialize)]
struct MetricRow<'a> {
    step: usize,
    strategy: &'a str,
    seed: Option<u64>,
    cost: Cost,
    cumulative_cost: Cost,
    log10_cumulative_cost: Option<String>,
    alive: usize,
    accuracy: Option<String>,
}

fn rows(campaign: &Campaign) -> Vec<MetricRow<'static>> {
    let strategy = campaign.strategy();
    let initial_alive = campaign.setup().initial_space().alive_count();
    let mut out = vec![MetricRow {
        step: 0,
        strategy: strategy.name(),
        seed: strategy.seed(),
        cost: Cost::ZERO,
        cumulative_cost: Cost::ZERO,
        log10_cumulative_cost: None,
        alive: initial_alive,
        accuracy: campaign.initial_accuracy().map(|a| format!("{a:.6}")),
    }];
    for s in campaign.steps() {
        out.push(MetricRow {
            step: s.step,
            strategy: strategy.name(),
            seed: strategy.seed(),
            cost: s.cost,
            cumulative_cost: s.cumulative_cost,
            log10_cumulative_cost: Some(format!("{:.6}", s.cumulative_cost.as_f64().log10())),
            alive: s.alive_count,
            accuracy: s.accuracy.map(|a| format!("{a:.6}")),
        });
    }
    out
}

fn write_rows(out: &mut Vec<u8>, rows: &[MetricRow<'_>]) {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    w.flush().expect("in-memory csv");
}

/// Metrics CSV for one campaign: a row for the starting state (step 0)
/// and one per step.
pub fn metrics_csv(campaign: &Campaign) -> String {
    let mut out = format!("{METRICS_HEADER}\n").into_bytes();
    write_rows(&mut out, &rows(campaign));
    String::from_utf8(out).expect("utf-8")
}

/// Outcome of one campaign in a comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: Option<u64>,
    pub status: Status,
    pub steps: usize,
    pub total_cost: Cost,
    /// Cumulative cost when accuracy first reached 1.0.
    pub cost_to_full_accuracy: Option<Cost>,
    pub final_accuracy: Option<f64>,
}

impl RunSummary {
    fn of(campaign: &Campaign) -> Self {
        let first_full = if campaign.initial_accuracy() == Some(1.0) {
            Some(Cost::ZERO)
        } else {
            campaign.steps().iter().find(|s| s.accuracy == Some(1.0)).map(|s| s.cumulative_cost)
        };
        RunSummary {
            strategy: campaign.strategy().name().to_string(),
            seed: campaign.strategy().seed(),
            status: campaign.status(),
            steps: campaign.steps().len(),
            total_cost: campaign.cumulative_cost(),
            cost_to_full_accuracy: first_full,
            final_accuracy: campaign.accuracy(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub runs: usize,
    /// Runs that reached accuracy 1.0.
    pub resolved: usize,
    pub exhausted: usize,
    /// Median over resolved runs of the cost to reach accuracy 1.0.
    pub median_cost_to_full_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
    pub summary: Vec<StrategySummary>,
    /// Median ase cost over median random cost, when both are known.
    pub ase_random_cost_ratio: Option<f64>,
    #[serde(skip)]
    metrics: String,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

impl Comparison {
    /// Metric rows of every run under one header.
    pub fn metrics_csv(&self) -> &str {
        &self.metrics
    }

    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["strategy", "runs", "resolved", "exhausted", "median_cost_to_full_accuracy"]).expect("in-memory csv");
        for s in &self.summary {
            w.write_record([
                s.strategy.clone(),
                s.runs.to_string(),
                s.resolved.to_string(),
                s.exhausted.to_string(),
                s.median_cost_to_full_accuracy.map(|c| format!("{c:.2}")).unwrap_or_default(),
            ])
            .expect("in-memory csv");
        }
        let mut text = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8");
        let ratio = self.ase_random_cost_ratio.map(|r| format!("{r:.6}")).unwrap_or_default();
        text.push_str(&format!("# ase_random_cost_ratio,{ratio}\n"));
        text
    }
}

/// Runs one oracle-mode campaign per strategy over a shared setup and
/// summarizes the cost each needed to reach full accuracy. Runs that end
/// with the hypothesis space exhausted are counted, not dropped.
pub fn compare_strategies(setup: Arc<Setup>, strategies: &[Strategy], budget: Budget) -> Result<Comparison, CampaignError> {
    let mut runs = Vec::new();
    let mut metrics = format!("{METRICS_HEADER}\n").into_bytes();
    for &strategy in strategies {
        let mut campaign = Campaign::start(setup.clone(), strategy, budget)?;
        match campaign.run(|_| Ok(())) {
            Ok(_) | Err(CampaignError::Abduction(AbductionError::Exhausted { .. })) => {}
            Err(e) => return Err(e),
        }
        write_rows(&mut metrics, &rows(&campaign));
        runs.push(RunSummary::of(&campaign));
    }

    let mut summary: Vec<StrategySummary> = Vec::new();
    for run in &runs {
        if !summary.iter().any(|s| s.strategy == run.strategy) {
            let of_kind: Vec<&RunSummary> = runs.iter().filter(|r| r.strategy == run.strategy).collect();
            let mut costs: Vec<f64> = of_kind.iter().filter_map(|r| r.cost_to_full_accuracy.map(Cost::as_f64)).collect();
            summary.push(StrategySummary {
                strategy: run.strategy.clone(),
                runs: of_kind.len(),
                resolved: costs.len(),
                exhausted: of_kind.iter().filter(|r| r.status == Status::Exhausted).count(),
                median_cost_to_full_accuracy: median(&mut costs),
            });
        }
    }
    let median_of = |name: &str| summary.iter().find(|s| s.strategy == name).and_then(|s| s.median_cost_to_full_accuracy);
    let ase_random_cost_ratio = match (median_of("ase"), median_of("random")) {
        (Some(a), Some(r)) if r > 0.0 => Some(a / r),
        _ => None,
    };
    Ok(Comparison { runs, summary, ase_random_cost_ratio, metrics: String::from_utf8(metrics).expect("utf-8") })
}
