//! Fits the free engine parameters to published latency/accuracy cells.
//!
//! Accuracy-side parameters are searched with a bounded pattern search on
//! common random numbers (every evaluation replays the same traces and
//! draws). Latency offsets enter every cell linearly, so for each candidate
//! they are solved exactly by bounded least squares instead of searched.

use std::collections::HashMap;

use super::{cell_seed, run_trial, summarize, BenchError, Target};
use crate::config::FusionConfig;
use crate::engines::EngineProfiles;
use crate::scene::SceneContext;
use crate::seed::Seed;
use crate::tracegen::{generate_scenario, ScenarioOp, ScenarioParams, TraceEvent};
use crate::types::{Engine, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FreeParam {
    AsrRecallH,
    AsrRecallL,
    TcAccuracyL,
    SmallFactorH,
    /// L small-object factor as a fraction of H's.
    SmallRatioL,
    DecayH,
    /// L distance decay minus H's.
    DecayExtraL,
    SpuriousH,
    /// L spurious rate minus H's.
    SpuriousExtraL,
    Overhead,
    CloudRtt,
}

impl FreeParam {
    pub const ALL: [FreeParam; 11] = [
        FreeParam::AsrRecallH,
        FreeParam::AsrRecallL,
        FreeParam::TcAccuracyL,
        FreeParam::SmallFactorH,
        FreeParam::SmallRatioL,
        FreeParam::DecayH,
        FreeParam::DecayExtraL,
        FreeParam::SpuriousH,
        FreeParam::SpuriousExtraL,
        FreeParam::Overhead,
        FreeParam::CloudRtt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FreeParam::AsrRecallH => "asr.H.keyword_recall",
            FreeParam::AsrRecallL => "asr.L.keyword_recall",
            FreeParam::TcAccuracyL => "tc.L.label_accuracy",
            FreeParam::SmallFactorH => "od.H.small_object_factor",
            FreeParam::SmallRatioL => "od.L.small_object_factor / od.H.small_object_factor",
            FreeParam::DecayH => "od.H.distance_decay_per_m",
            FreeParam::DecayExtraL => "od.L.distance_decay_per_m - od.H.distance_decay_per_m",
            FreeParam::SpuriousH => "od.H.spurious_detection_prob",
            FreeParam::SpuriousExtraL => "od.L.spurious_detection_prob - od.H.spurious_detection_prob",
            FreeParam::Overhead => "fusion.overhead_ms",
            FreeParam::CloudRtt => "asr.L.network_rtt_ms",
        }
    }

    fn is_latency(self) -> bool {
        matches!(self, FreeParam::Overhead | FreeParam::CloudRtt)
    }

    /// Search bounds. The L classifier may not beat the H one.
    pub fn bounds(self, base: &EngineProfiles) -> (f64, f64) {
        match self {
            FreeParam::AsrRecallH => (0.5, 1.0),
            FreeParam::AsrRecallL => (0.3, 1.0),
            FreeParam::TcAccuracyL => (0.5, base.tc.h.label_accuracy),
            FreeParam::SmallFactorH => (0.2, 1.0),
            FreeParam::SmallRatioL => (0.1, 1.0),
            FreeParam::DecayH => (0.0, 1.5),
            FreeParam::DecayExtraL => (0.0, 1.5),
            FreeParam::SpuriousH => (0.0, 0.5),
            FreeParam::SpuriousExtraL => (0.0, 0.8),
            FreeParam::Overhead => (-1200.0, 500.0),
            FreeParam::CloudRtt => (0.0, 1500.0),
        }
    }

    pub fn get(self, p: &EngineProfiles) -> f64 {
        match self {
            FreeParam::AsrRecallH => p.asr.h.keyword_recall,
            FreeParam::AsrRecallL => p.asr.l.keyword_recall,
            FreeParam::TcAccuracyL => p.tc.l.label_accuracy,
            FreeParam::SmallFactorH => p.od.h.small_object_factor,
            FreeParam::SmallRatioL => {
                if p.od.h.small_object_factor > 0.0 {
                    p.od.l.small_object_factor / p.od.h.small_object_factor
                } else {
                    1.0
                }
            }
            FreeParam::DecayH => p.od.h.distance_decay_per_m,
            FreeParam::DecayExtraL => p.od.l.distance_decay_per_m - p.od.h.distance_decay_per_m,
            FreeParam::SpuriousH => p.od.h.spurious_detection_prob,
            FreeParam::SpuriousExtraL => p.od.l.spurious_detection_prob - p.od.h.spurious_detection_prob,
            FreeParam::Overhead => p.fusion.overhead_ms,
            FreeParam::CloudRtt => p.asr.l.network_rtt_ms,
        }
    }
}

/// Profile with the given parameter values; unlisted parameters keep their
/// value in `base`, with L-relative ones kept relative.
pub fn apply_free_params(base: &EngineProfiles, values: &[(FreeParam, f64)]) -> EngineProfiles {
    let mut v: HashMap<FreeParam, f64> = FreeParam::ALL.iter().map(|f| (*f, f.get(base))).collect();
    for (f, x) in values {
        v.insert(*f, *x);
    }
    let mut p = base.clone();
    p.asr.h.keyword_recall = v[&FreeParam::AsrRecallH];
    p.asr.l.keyword_recall = v[&FreeParam::AsrRecallL];
    p.tc.l.label_accuracy = v[&FreeParam::TcAccuracyL];
    p.od.h.small_object_factor = v[&FreeParam::SmallFactorH];
    p.od.l.small_object_factor = v[&FreeParam::SmallFactorH] * v[&FreeParam::SmallRatioL];
    p.od.h.distance_decay_per_m = v[&FreeParam::DecayH];
    p.od.l.distance_decay_per_m = v[&FreeParam::DecayH] + v[&FreeParam::DecayExtraL];
    p.od.h.spurious_detection_prob = v[&FreeParam::SpuriousH];
    p.od.l.spurious_detection_prob = (v[&FreeParam::SpuriousH] + v[&FreeParam::SpuriousExtraL]).min(1.0);
    p.fusion.overhead_ms = v[&FreeParam::Overhead];
    p.asr.l.network_rtt_ms = v[&FreeParam::CloudRtt];
    p
}

#[derive(Debug, Clone)]
pub struct CalibrationSpec {
    pub free: Vec<FreeParam>,
    pub n_per_cell: usize,
    pub seed: Seed,
    /// Maximum number of full-grid evaluations.
    pub budget: usize,
    /// Latency residuals are divided by this before squaring, so one unit
    /// of loss is one accuracy point or this many milliseconds.
    pub latency_scale_ms: f64,
    /// Search stops once every step is below this fraction of its range.
    pub tolerance: f64,
    pub contexts: Vec<SceneContext>,
    pub base_config: FusionConfig,
    pub scenario: ScenarioParams,
}

impl CalibrationSpec {
    pub fn new(contexts: Vec<SceneContext>, seed: Seed) -> Self {
        Self {
            free: FreeParam::ALL.to_vec(),
            n_per_cell: 1000,
            seed,
            budget: 3000,
            latency_scale_ms: 10.0,
            tolerance: 2e-3,
            contexts,
            base_config: FusionConfig::default(),
            scenario: ScenarioParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellFit {
    pub target: Target,
    pub latency_ms: f64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub profiles: EngineProfiles,
    pub values: Vec<(FreeParam, f64)>,
    pub loss: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub cells: Vec<CellFit>,
}

impl CalibrationResult {
    /// Profile document with a comment header describing the fit.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# fitted by `mrfuse calibrate`; loss {:.3} after {} evaluations\n", self.loss, self.evaluations));
        if !self.converged {
            out.push_str("# warning: search stopped at the evaluation budget before converging\n");
        }
        for w in &self.warnings {
            out.push_str(&format!("# warning: {w}\n"));
        }
        for (f, v) in &self.values {
            out.push_str(&format!("# {} = {v:.6}\n", f.name()));
        }
        out.push('\n');
        out.push_str(&self.profiles.to_toml());
        out
    }
}

struct Grid<'a> {
    spec: &'a CalibrationSpec,
    targets: &'a [Target],
    traces: HashMap<(String, ScenarioOp), (Vec<TraceEvent>, Seed, &'a SceneContext)>,
}

impl<'a> Grid<'a> {
    fn new(spec: &'a CalibrationSpec, targets: &'a [Target]) -> Result<Self, BenchError> {
        let mut traces = HashMap::new();
        for t in targets {
            let key = (t.context.clone(), t.op);
            if traces.contains_key(&key) {
                continue;
            }
            let scene = spec.contexts.iter().find(|s| s.name == t.context).ok_or_else(|| BenchError::SceneMismatch {
                scene: t.context.clone(),
                reason: "no calibration scene with this name".into(),
            })?;
            let seed = cell_seed(spec.seed, &scene.name, t.op);
            let trace = generate_scenario(t.op, scene, spec.n_per_cell, seed, &spec.scenario)?;
            traces.insert(key, (trace, seed, scene));
        }
        Ok(Self { spec, targets, traces })
    }

    /// Simulated (latency, accuracy) per target.
    fn simulate(&self, profiles: &EngineProfiles) -> Result<Vec<(f64, f64)>, BenchError> {
        self.targets
            .iter()
            .map(|t| {
                let (trace, seed, scene) = &self.traces[&(t.context.clone(), t.op)];
                let config = self.spec.base_config.with_combo(t.combo);
                let records = run_trial(&config, profiles, trace, scene, *seed)?;
                let (lat, _, acc, _) = summarize(&records);
                Ok((lat, acc))
            })
            .collect()
    }

    fn loss(&self, sim: &[(f64, f64)]) -> f64 {
        let s = self.spec.latency_scale_ms;
        self.targets
            .iter()
            .zip(sim)
            .map(|(t, (lat, acc))| (acc - t.accuracy_pct).powi(2) + ((lat - t.latency_ms) / s).powi(2))
            .sum()
    }
}

/// Best `(overhead shift, rtt shift)` for latency residuals `r` where cells
/// flagged in `cloud` respond to RTT. Only free parameters move; results
/// stay inside `[lo, hi]` boxes given as absolute values around `now`.
fn solve_latency(
    residual: &[f64],
    cloud: &[bool],
    free_o: Option<(f64, f64, f64)>,
    free_r: Option<(f64, f64, f64)>,
) -> (f64, f64) {
    // residual = sim - target at current (o0, r0); new sim = residual + (o - o0) + cloud * (r - r0).
    let sse = |o: f64, r: f64| -> f64 {
        residual.iter().zip(cloud).map(|(e, c)| (e + o + if *c { r } else { 0.0 }).powi(2)).sum()
    };
    let n = residual.len() as f64;
    let nc = cloud.iter().filter(|c| **c).count() as f64;
    let sum_e: f64 = residual.iter().sum();
    let sum_ec: f64 = residual.iter().zip(cloud).filter(|(_, c)| **c).map(|(e, _)| e).sum();
    let clamp = |v: f64, b: Option<(f64, f64, f64)>| match b {
        Some((lo, hi, now)) => (v + now).clamp(lo, hi) - now,
        None => 0.0,
    };
    // Shift minimising over one variable with the other fixed.
    let best_o = |r: f64| clamp(-(sum_e + nc * r) / n, free_o);
    let best_r = |o: f64| if nc > 0.0 { clamp(-(sum_ec + nc * o) / nc, free_r) } else { 0.0 };

    let mut candidates = Vec::new();
    match (free_o, free_r) {
        (None, None) => candidates.push((0.0, 0.0)),
        (Some(_), None) => candidates.push((best_o(0.0), 0.0)),
        (None, Some(_)) => candidates.push((0.0, best_r(0.0))),
        (Some((olo, ohi, o0)), Some((rlo, rhi, r0))) => {
            let det = n * nc - nc * nc;
            if det.abs() > 1e-12 {
                let o = -(nc * sum_e - nc * sum_ec) / det;
                let r = -(n * sum_ec - nc * sum_e) / det;
                candidates.push((clamp(o, free_o), clamp(r, free_r)));
            }
            for o in [olo - o0, ohi - o0] {
                candidates.push((o, best_r(o)));
            }
            for r in [rlo - r0, rhi - r0] {
                candidates.push((best_o(r), r));
            }
            candidates.push((best_o(0.0), 0.0));
        }
    }
    candidates.into_iter().min_by(|a, b| sse(a.0, a.1).total_cmp(&sse(b.0, b.1))).expect("at least one candidate")
}

/// Loss, profile with latency offsets placed, and per-cell (latency, accuracy).
type Evaluation = (f64, EngineProfiles, Vec<(f64, f64)>);

/// Fits the free parameters of `base` to `targets`.
pub fn calibrate(
    targets: &[Target],
    base: &EngineProfiles,
    spec: &CalibrationSpec,
) -> Result<CalibrationResult, BenchError> {
    if targets.is_empty() {
        return Err(BenchError::EmptyCells);
    }
    let grid = Grid::new(spec, targets)?;
    let search: Vec<FreeParam> = spec.free.iter().copied().filter(|f| !f.is_latency()).collect();
    let bounds: Vec<(f64, f64)> = search.iter().map(|f| f.bounds(base)).collect();
    let o_free = spec.free.contains(&FreeParam::Overhead);
    let r_free = spec.free.contains(&FreeParam::CloudRtt);
    let cloud: Vec<bool> = targets.iter().map(|t| t.combo.asr == Tier::L).collect();

    let evaluations = std::cell::Cell::new(0usize);
    // Full evaluation: simulate, then place the latency offsets.
    let evaluate = |x: &[f64]| -> Result<Evaluation, BenchError> {
        evaluations.set(evaluations.get() + 1);
        let values: Vec<(FreeParam, f64)> = search.iter().copied().zip(x.iter().copied()).collect();
        let mut p = apply_free_params(base, &values);
        let sim = grid.simulate(&p)?;
        let residual: Vec<f64> = targets.iter().zip(&sim).map(|(t, (lat, _))| lat - t.latency_ms).collect();
        let bo = o_free.then(|| {
            let (lo, hi) = FreeParam::Overhead.bounds(base);
            (lo, hi, p.fusion.overhead_ms)
        });
        let br = r_free.then(|| {
            let (lo, hi) = FreeParam::CloudRtt.bounds(base);
            (lo, hi, p.asr.l.network_rtt_ms)
        });
        let (d_o, d_r) = solve_latency(&residual, &cloud, bo, br);
        p.fusion.overhead_ms += d_o;
        p.asr.l.network_rtt_ms += d_r;
        let shifted: Vec<(f64, f64)> =
            sim.iter().zip(&cloud).map(|((lat, acc), c)| (lat + d_o + if *c { d_r } else { 0.0 }, *acc)).collect();
        Ok((grid.loss(&shifted), p, shifted))
    };

    let mut x: Vec<f64> = search.iter().zip(&bounds).map(|(f, (lo, hi))| f.get(base).clamp(*lo, *hi)).collect();
    let mut steps: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.25 * (hi - lo)).collect();
    let (mut best, mut best_p, _) = evaluate(&x)?;
    let mut converged = search.is_empty();
    while !converged {
        let mut improved = false;
        'coords: for i in 0..search.len() {
            for dir in [1.0, -1.0] {
                let (lo, hi) = bounds[i];
                let mut y = x.clone();
                y[i] = (x[i] + dir * steps[i]).clamp(lo, hi);
                if y[i] == x[i] {
                    continue;
                }
                if evaluations.get() >= spec.budget {
                    break 'coords;
                }
                let (f, p, _) = evaluate(&y)?;
                if f < best {
                    best = f;
                    best_p = p;
                    x = y;
                    improved = true;
                }
            }
        }
        if evaluations.get() >= spec.budget {
            break;
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
        }
        converged = steps.iter().zip(&bounds).all(|(s, (lo, hi))| *s <= spec.tolerance * (hi - lo));
    }

    let sim = grid.simulate(&best_p)?;
    let loss = grid.loss(&sim);
    let cells = targets
        .iter()
        .zip(&sim)
        .map(|(t, (lat, acc))| CellFit { target: t.clone(), latency_ms: *lat, accuracy_pct: *acc })
        .collect();

    let mut warnings = Vec::new();
    let (h, l) = (best_p.success_parameters(Tier::H), best_p.success_parameters(Tier::L));
    for ((engine, vh), (_, vl)) in h.iter().zip(l.iter()) {
        if vl > vh {
            warnings.push(format!("{engine}: L success parameter {vl:.4} exceeds H {vh:.4}"));
        }
    }
    if best_p.od.l.small_object_factor > best_p.od.h.small_object_factor
        || best_p.od.l.distance_decay_per_m < best_p.od.h.distance_decay_per_m
    {
        warnings.push(format!("{}: L difficulty factors are milder than H", Engine::Od));
    }

    let values = spec.free.iter().map(|f| (*f, f.get(&best_p))).collect();
    Ok(CalibrationResult { profiles: best_p, values, loss, evaluations: evaluations.get(), converged, warnings, cells })
}
