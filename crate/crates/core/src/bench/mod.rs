//! Benchmark harness: trials, sweeps over tier combinations, calibration
//! against the published grid, the resource model, and reports.

mod calibrate;
mod report;
mod resources;
mod table5;

pub use calibrate::{apply_free_params, calibrate, CalibrationResult, CalibrationSpec, CellFit, FreeParam};
pub use report::{
    cells_csv, emit_report, parse_cells_csv, recommendations, spearman, trend_checks, Recommendation, ReportFormat,
    TrendCheck,
};
pub use resources::{fit_resource_model, ResourceModel};
pub use table5::{ContextCells, Table5, Table5Row, Target};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, FusionConfig};
use crate::engines::{aural_token, recognize_gesture, EngineProfiles};
use crate::fusion::{score, FusionEngine, InteractionOutcome};
use crate::scene::SceneContext;
use crate::seed::{Seed, Stream};
use crate::syncq::{match_stream, MatchPolicy, MatchedBundle, TokenEnvelope};
use crate::tracegen::{
    generate_scenario, ground_truth, EventKind, ExpectedOperation, ScenarioOp, ScenarioParams, TraceError, TraceEvent,
};
use crate::types::{Combo, Resources, Tier};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trace does not fit scene `{scene}`: {reason}")]
    SceneMismatch { scene: String, reason: String },
    #[error("{0}")]
    Io(String),
    #[error("table: {0}")]
    Table(String),
    #[error("rank-deficient design: {rows} rows of rank {rank}, need 5 independent rows")]
    Rank { rows: usize, rank: usize },
    #[error("least squares failed: {0}")]
    Fit(String),
    #[error("no cells to report")]
    EmptyCells,
    #[error("sweep needs at least one trial per cell")]
    EmptySweep,
    #[error("cells file: {0}")]
    Cells(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: FusionConfig,
    pub context: String,
    pub operation: ExpectedOperation,
    pub interaction: u32,
    pub seed: Seed,
    pub outcome: InteractionOutcome,
}

/// One JSON object per line.
pub fn records_jsonl(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_records_jsonl(text: &str) -> Result<Vec<TrialRecord>, BenchError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| BenchError::Cells(format!("record line {}: {e}", i + 1))))
        .collect()
}

/// Token envelopes the engines produce for a trace: aural, then gesture.
pub fn engine_envelopes(
    config: &FusionConfig,
    profiles: &EngineProfiles,
    trace: &[TraceEvent],
    seed: Seed,
) -> (Vec<TokenEnvelope>, Vec<TokenEnvelope>) {
    let (mut aural, mut gesture) = (Vec::new(), Vec::new());
    for ev in trace {
        match &ev.kind {
            EventKind::Utterance(u) => {
                let tok = aural_token(
                    u,
                    ev.t_ms,
                    ev.interaction,
                    profiles.asr.get(config.asr),
                    profiles.tc.get(config.tc),
                    seed,
                );
                aural.push(TokenEnvelope::aural(tok));
            }
            EventKind::Gesture(g) => {
                let mut rng = seed.rng(Stream::Gr, ev.interaction as u64);
                let tok = recognize_gesture(g, ev.t_ms, ev.interaction, profiles.gr.get(config.gr), &mut rng);
                gesture.push(TokenEnvelope::gesture(tok));
            }
        }
    }
    (aural, gesture)
}

/// Bundles the fusion consumer sees for a trace, in emission order.
pub fn trial_bundles(
    config: &FusionConfig,
    profiles: &EngineProfiles,
    trace: &[TraceEvent],
    seed: Seed,
) -> Vec<MatchedBundle> {
    let (mut envelopes, gesture) = engine_envelopes(config, profiles, trace, seed);
    envelopes.extend(gesture);
    match_stream(envelopes, MatchPolicy::from_config(config))
}

fn check_scene(trace: &[TraceEvent], scene: &SceneContext) -> Result<(), BenchError> {
    for ev in trace {
        let target = match &ev.kind {
            EventKind::Utterance(u) => u.target,
            EventKind::Gesture(g) => g.target,
        };
        if let Some(t) = target {
            if t >= scene.objects.len() {
                return Err(BenchError::SceneMismatch {
                    scene: scene.name.clone(),
                    reason: format!("interaction {} targets object {t}", ev.interaction),
                });
            }
        }
    }
    Ok(())
}

/// Replays a trace through the full pipeline in virtual time and returns
/// one scored record per interaction.
///
/// The outcome recorded for an interaction with an utterance is the one
/// produced from its aural token; stray pointing bundles are fused (they
/// occupy the consumer) but not recorded.
pub fn run_trial(
    config: &FusionConfig,
    profiles: &EngineProfiles,
    trace: &[TraceEvent],
    scene: &SceneContext,
    seed: Seed,
) -> Result<Vec<TrialRecord>, BenchError> {
    config.validate()?;
    check_scene(trace, scene)?;
    let truths = ground_truth(trace);
    let has_utterance: std::collections::HashSet<u32> = trace
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Utterance(_)))
        .map(|e| e.interaction)
        .collect();

    let mut engine = FusionEngine::new(config, profiles, scene, seed);
    let mut primary: std::collections::HashMap<u32, InteractionOutcome> = std::collections::HashMap::new();
    for bundle in trial_bundles(config, profiles, trace, seed) {
        let outcome = engine.fuse(&bundle);
        let id = bundle.interaction();
        let is_primary = bundle.aural.is_some() || !has_utterance.contains(&id);
        if is_primary {
            primary.entry(id).or_insert(outcome);
        }
    }

    truths
        .iter()
        .map(|truth| {
            let mut outcome = primary.remove(&truth.interaction).ok_or_else(|| BenchError::SceneMismatch {
                scene: scene.name.clone(),
                reason: format!("interaction {} produced no outcome", truth.interaction),
            })?;
            outcome.correct = Some(score(&outcome, truth, scene));
            Ok(TrialRecord {
                config: *config,
                context: scene.name.clone(),
                operation: truth.expected_operation,
                interaction: truth.interaction,
                seed,
                outcome,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub context: String,
    pub operation: ScenarioOp,
    pub combo: Combo,
    pub n: usize,
    pub mean_latency_ms: f64,
    pub latency_se_ms: f64,
    pub accuracy_pct: f64,
    pub accuracy_se_pp: f64,
    /// Model prediction from the profiles, not a measurement.
    pub resources: Resources,
}

impl SweepCell {
    /// Combination label; GR is shown as `*` for locate cells.
    pub fn label(&self) -> String {
        let s = self.combo.to_string();
        if self.operation == ScenarioOp::Locate {
            format!("{}*", &s[..3])
        } else {
            s
        }
    }
}

/// Aggregates records into mean latency and accuracy with standard errors.
pub fn summarize(records: &[TrialRecord]) -> (f64, f64, f64, f64) {
    let n = records.len() as f64;
    if records.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let lat: Vec<f64> = records.iter().map(|r| r.outcome.total_latency_ms).collect();
    let mean = lat.iter().sum::<f64>() / n;
    let var = if records.len() > 1 { lat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let p = records.iter().filter(|r| r.outcome.correct == Some(true)).count() as f64 / n;
    (mean, (var / n).sqrt(), 100.0 * p, 100.0 * (p * (1.0 - p) / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub contexts: Vec<SceneContext>,
    pub ops: Vec<ScenarioOp>,
    pub n: usize,
    pub seed: Seed,
    /// Combinations to run; locate cells collapse GR.
    pub combos: Vec<Combo>,
    /// Non-tier settings shared by every cell.
    pub base: FusionConfig,
    pub scenario: ScenarioParams,
}

impl SweepSpec {
    pub fn new(contexts: Vec<SceneContext>, ops: Vec<ScenarioOp>, n: usize, seed: Seed) -> Self {
        Self {
            contexts,
            ops,
            n,
            seed,
            combos: Combo::all(),
            base: FusionConfig::default(),
            scenario: ScenarioParams::default(),
        }
    }
}

/// Combinations evaluated for an operation: GR is fixed to H for locate,
/// which does not use gestures.
pub fn cell_combos(op: ScenarioOp, combos: &[Combo]) -> Vec<Combo> {
    let mut out: Vec<Combo> = Vec::new();
    for c in combos {
        let c = if op == ScenarioOp::Locate { Combo { gr: Tier::H, ..*c } } else { *c };
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Seed shared by every combination in one (context, operation) cell
/// group, so all combinations replay the same trace and draws.
pub fn cell_seed(seed: Seed, context: &str, op: ScenarioOp) -> Seed {
    seed.derive_str(&format!("{context}/{op}"))
}

/// Runs every requested cell. Records are returned alongside the cells.
pub fn sweep_with_records(
    spec: &SweepSpec,
    profiles: &EngineProfiles,
) -> Result<(Vec<SweepCell>, Vec<TrialRecord>), BenchError> {
    if spec.n == 0 {
        return Err(BenchError::EmptySweep);
    }
    let mut cells = Vec::new();
    let mut all_records = Vec::new();
    for scene in &spec.contexts {
        for op in &spec.ops {
            let seed = cell_seed(spec.seed, &scene.name, *op);
            let trace = generate_scenario(*op, scene, spec.n, seed, &spec.scenario)?;
            for combo in cell_combos(*op, &spec.combos) {
                let config = spec.base.with_combo(combo);
                let records = run_trial(&config, profiles, &trace, scene, seed)?;
                let (mean, se, acc, acc_se) = summarize(&records);
                cells.push(SweepCell {
                    context: scene.name.clone(),
                    operation: *op,
                    combo,
                    n: records.len(),
                    mean_latency_ms: mean,
                    latency_se_ms: se,
                    accuracy_pct: acc,
                    accuracy_se_pp: acc_se,
                    resources: profiles.predicted_resources(combo),
                });
                all_records.extend(records);
            }
        }
    }
    Ok((cells, all_records))
}

pub fn sweep(spec: &SweepSpec, profiles: &EngineProfiles) -> Result<Vec<SweepCell>, BenchError> {
    sweep_with_records(spec, profiles).map(|(cells, _)| cells)
}
