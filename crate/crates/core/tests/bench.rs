use mrfuse::bench::{
    apply_free_params, calibrate, cells_csv, emit_report, fit_resource_model, parse_cells_csv, run_trial, sweep,
    sweep_with_records, BenchError, CalibrationSpec, FreeParam, ReportFormat, SweepSpec, Table5, Target,
};
use mrfuse::config::FusionConfig;
use mrfuse::engines::EngineProfiles;
use mrfuse::scene::{SceneContext, SceneObject, SizeClass};
use mrfuse::seed::Seed;
use mrfuse::tracegen::{generate_scenario, ScenarioOp, ScenarioParams};
use mrfuse::lexicon::ClassId;
use mrfuse::types::{Combo, Point, Resources, Tier};
use proptest::prelude::*;

fn contexts() -> Vec<SceneContext> {
    vec![SceneContext::context_a(), SceneContext::context_b()]
}

#[test]
fn synthetic_targets_are_recovered() {
    let truth_values = [
        (FreeParam::AsrRecallH, 0.90),
        (FreeParam::AsrRecallL, 0.66),
        (FreeParam::Overhead, -700.0),
        (FreeParam::CloudRtt, 900.0),
    ];
    let truth = apply_free_params(&EngineProfiles::paper(), &truth_values);
    let seed = Seed(31);
    let n = 400;
    let spec = SweepSpec::new(contexts(), vec![ScenarioOp::Locate, ScenarioOp::Describe], n, seed);
    let targets: Vec<Target> = sweep(&spec, &truth)
        .unwrap()
        .into_iter()
        .map(|c| Target {
            context: c.context,
            op: c.operation,
            combo: c.combo,
            latency_ms: c.mean_latency_ms,
            accuracy_pct: c.accuracy_pct,
        })
        .collect();
    assert_eq!(targets.len(), 48);

    let mut cal = CalibrationSpec::new(contexts(), seed);
    cal.n_per_cell = n;
    cal.free = truth_values.iter().map(|(f, _)| *f).collect();
    let start = EngineProfiles::paper();
    let fit = calibrate(&targets, &start, &cal).unwrap();
    assert!(fit.converged);
    for (f, want) in truth_values {
        let got = f.get(&fit.profiles);
        assert!((got - want).abs() <= 0.02 * want.abs(), "{}: got {got}, want {want}", f.name());
    }
    assert!(fit.loss < 1.0, "loss {}", fit.loss);
    assert!(fit.to_document().starts_with("# fitted"));
    EngineProfiles::parse(&fit.to_document()).expect("fitted document parses");
}

#[test]
fn calibration_rejects_unknown_contexts_and_empty_targets() {
    let spec = CalibrationSpec::new(vec![SceneContext::context_a()], Seed(1));
    let b = Table5::shipped().targets("B", ScenarioOp::Locate);
    assert!(matches!(calibrate(&b, &EngineProfiles::paper(), &spec), Err(BenchError::SceneMismatch { .. })));
    assert!(matches!(calibrate(&[], &EngineProfiles::paper(), &spec), Err(BenchError::EmptyCells)));
}

#[test]
fn exhausted_budget_returns_best_so_far() {
    let mut spec = CalibrationSpec::new(contexts(), Seed(2));
    spec.n_per_cell = 20;
    spec.budget = 3;
    let fit = calibrate(&Table5::shipped().all_targets(), &EngineProfiles::paper(), &spec).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.evaluations, 3);
    assert!(fit.to_document().contains("budget"));
}

#[test]
fn sweep_csv_is_reproducible_and_complete() {
    let spec = SweepSpec::new(vec![SceneContext::context_a()], vec![ScenarioOp::Locate, ScenarioOp::Describe], 30, Seed(5));
    let p = EngineProfiles::paper();
    let a = cells_csv(&sweep(&spec, &p).unwrap());
    let b = cells_csv(&sweep(&spec, &p).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 25, "8 locate + 16 describe cells plus header");
    assert_eq!(cells_csv(&parse_cells_csv(&a).unwrap()), a);
    let other = cells_csv(&sweep(&SweepSpec { seed: Seed(6), ..spec }, &p).unwrap());
    assert_ne!(a, other);
}

#[test]
fn report_sections() {
    let spec = SweepSpec::new(contexts(), vec![ScenarioOp::Locate, ScenarioOp::Describe], 50, Seed(7));
    let (cells, records) = sweep_with_records(&spec, &EngineProfiles::paper()).unwrap();
    assert_eq!(records.len(), 48 * 50);
    let text = emit_report(&cells, &records, ReportFormat::Table).unwrap();
    for heading in ["Cells", "Trend checks", "Recommended combinations", "Rejections"] {
        assert!(text.contains(heading), "missing {heading}");
    }
    assert!(text.contains("HHH*"));
    assert_eq!(emit_report(&cells, &records, ReportFormat::Csv).unwrap(), cells_csv(&cells));
}

#[test]
fn zero_trials_is_an_error() {
    let spec = SweepSpec::new(contexts(), vec![ScenarioOp::Locate], 0, Seed(1));
    assert!(matches!(sweep(&spec, &EngineProfiles::paper()), Err(BenchError::EmptySweep)));
}

#[test]
fn trace_must_fit_the_scene() {
    let a = SceneContext::context_a();
    let small = SceneContext {
        name: "tiny".into(),
        objects: vec![SceneObject {
            class: ClassId::LAPTOP,
            size_class: SizeClass::Large,
            distance_m: 1.0,
            position: Point::new(0.5, 0.5),
        }],
    };
    let trace = generate_scenario(ScenarioOp::Locate, &a, 40, Seed(3), &ScenarioParams::default()).unwrap();
    let r = run_trial(&FusionConfig::default(), &EngineProfiles::paper(), &trace, &small, Seed(3));
    assert!(matches!(r, Err(BenchError::SceneMismatch { .. })));
}

#[test]
fn structural_latency_orderings() {
    // With the fitted profile every ASR=L cell is slower, TC=L saves the
    // classifier delta, and OD=L passes are shorter.
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../profiles/fitted.params");
    let p = EngineProfiles::load(path).unwrap();
    let scene = SceneContext::context_a();
    let trace = generate_scenario(ScenarioOp::Locate, &scene, 300, Seed(11), &ScenarioParams::default()).unwrap();
    let lat = |c: &str| {
        let recs = run_trial(&FusionConfig::for_combo(c.parse().unwrap()), &p, &trace, &scene, Seed(11)).unwrap();
        recs.iter().map(|r| r.outcome.total_latency_ms).sum::<f64>() / recs.len() as f64
    };
    let delta = p.tc.h.latency_ms - p.tc.l.latency_ms;
    assert!((lat("HHHH") - lat("HHLH") - delta).abs() < 15.0);
    assert!(lat("LHHH") < lat("HHHH"));
    assert!(lat("HHHH").max(lat("LHHH")) < lat("HLHH").min(lat("LLHH")));
    assert!(p.od.l.frame_ms() < p.od.h.frame_ms());
}

#[test]
fn shipped_resource_rows_fit_additively() {
    let m = fit_resource_model(&Table5::shipped().resource_rows()).unwrap();
    assert!(m.r_squared[0] >= 0.95);
    let od = m.delta[&mrfuse::types::Engine::Od].ram_mb;
    assert!((od - 2738.0).abs() / 2738.0 <= 0.15);
}

proptest! {
    #[test]
    fn resource_prediction_is_linear_in_the_tier_vector(a in 0usize..16, b in 0usize..16) {
        let m = fit_resource_model(&Table5::shipped().resource_rows()).unwrap();
        let (ca, cb) = (Combo::all()[a], Combo::all()[b]);
        // predicted(a) - predicted(b) depends only on the engines whose tier differs.
        let mut want = m.predicted(cb).to_array();
        for e in mrfuse::types::Engine::ALL {
            let d = m.delta[&e].to_array();
            let sign = match (ca.tier(e), cb.tier(e)) {
                (Tier::H, Tier::L) => 1.0,
                (Tier::L, Tier::H) => -1.0,
                _ => 0.0,
            };
            for k in 0..4 {
                want[k] += sign * d[k];
            }
        }
        let got = m.predicted(ca).to_array();
        for k in 0..4 {
            prop_assert!((got[k] - want[k]).abs() < 1e-6);
        }
        prop_assert!(Resources::from_array(got) == m.predicted(ca));
    }
}
