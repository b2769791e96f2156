//! Simulation throughput on seeded synthetic models.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::engine::{compile_with_environment, simulate_batch, EngineError, PhenotypeMatrix, TrialKey};
use crate::synth::{generate, SynthParams};

/// Published single-simulation wall times for the full-size E. coli model,
/// in seconds, without and with parallelization.
pub const REFERENCE_SECONDS_SERIAL: f64 = 0.6;
pub const REFERENCE_SECONDS_PARALLEL: f64 = 0.06;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BenchParams {
    pub genes: usize,
    pub reactions: usize,
    pub metabolites: usize,
    pub media: usize,
    /// Trials per repetition; the design space is cycled to reach it.
    pub trials: usize,
    pub workers: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl BenchParams {
    /// Model the size of the E. coli iML1515 reconstruction, every
    /// single-knockout trial once.
    pub fn iml1515_scale(seed: u64, workers: usize) -> Self {
        let s = SynthParams::iml1515_scale(seed);
        BenchParams {
            genes: s.genes,
            reactions: s.reactions,
            metabolites: s.metabolites,
            media: s.media,
            trials: (s.genes + 1) * s.media,
            workers,
            repetitions: 1,
            seed,
        }
    }
}

/// Timing of one worker count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRun {
    pub workers: usize,
    pub simulations: usize,
    pub growth: usize,
    pub seconds: f64,
    pub simulations_per_second: f64,
    pub seconds_per_simulation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub params: BenchParams,
    pub directed_reactions: usize,
    pub serial: BenchRun,
    pub parallel: BenchRun,
    pub speedup: f64,
    /// Serial and parallel batches agreed cell for cell.
    pub identical: bool,
    pub reference_seconds_serial: f64,
    pub reference_seconds_parallel: f64,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = format!(
            "model: genes={} reactions={} metabolites={} media={} seed={} (directed reactions {})\n",
            p.genes, p.reactions, p.metabolites, p.media, p.seed, self.directed_reactions
        );
        out.push_str("workers,simulations,growth,seconds,simulations_per_second,seconds_per_simulation\n");
        for r in [&self.serial, &self.parallel] {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.1},{:.9}\n",
                r.workers, r.simulations, r.growth, r.seconds, r.simulations_per_second, r.seconds_per_simulation
            ));
        }
        out.push_str(&format!("speedup: {:.2}x at {} workers\n", self.speedup, self.parallel.workers));
        out.push_str(&format!("identical across worker counts: {}\n", self.identical));
        out.push_str(&format!(
            "reference single-simulation seconds (full-size model): serial {}, parallel {}\n",
            self.reference_seconds_serial, self.reference_seconds_parallel
        ));
        out
    }
}

fn timed(
    compiled: &crate::engine::CompiledModel,
    trials: &[TrialKey],
    workers: usize,
    repetitions: usize,
) -> (BenchRun, PhenotypeMatrix) {
    let mut elapsed = Duration::ZERO;
    let mut last = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let m = simulate_batch(compiled, &[None], trials, workers);
        elapsed += start.elapsed();
        last = Some(m);
    }
    let matrix = last.expect("at least one repetition");
    let simulations = trials.len() * repetitions;
    let seconds = elapsed.as_secs_f64();
    let run = BenchRun {
        workers,
        simulations,
        growth: (0..trials.len()).map(|t| matrix.growth_count(t)).sum(),
        seconds,
        simulations_per_second: simulations as f64 / seconds.max(f64::MIN_POSITIVE),
        seconds_per_simulation: seconds / simulations as f64,
    };
    (run, matrix)
}

/// Generates the model, then times the same trial batch on one worker and
/// on `params.workers`.
pub fn bench(params: &BenchParams) -> Result<BenchReport, EngineError> {
    let params = BenchParams {
        genes: params.genes.max(1),
        reactions: params.reactions.max(1),
        metabolites: params.metabolites.max(1),
        media: params.media.max(1),
        trials: params.trials.max(1),
        workers: params.workers.max(1),
        repetitions: params.repetitions.max(1),
        seed: params.seed,
    };
    let (model, env) = generate(&SynthParams {
        genes: params.genes,
        reactions: params.reactions,
        metabolites: params.metabolites,
        media: params.media,
        seed: params.seed,
    });
    let compiled = compile_with_environment(&model, &env)?;
    let design = compiled.design_space();
    let trials: Vec<TrialKey> = design.iter().copied().cycle().take(params.trials).collect();

    let (serial, a) = timed(&compiled, &trials, 1, params.repetitions);
    let (parallel, b) = timed(&compiled, &trials, params.workers, params.repetitions);
    Ok(BenchReport {
        directed_reactions: compiled.directed_reactions().len(),
        speedup: serial.seconds / parallel.seconds.max(f64::MIN_POSITIVE),
        identical: a == b,
        serial,
        parallel,
        reference_seconds_serial: REFERENCE_SECONDS_SERIAL,
        reference_seconds_parallel: REFERENCE_SECONDS_PARALLEL,
        params,
    })
}
