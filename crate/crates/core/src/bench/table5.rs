//! The published combination grid, loaded from `data/table5.csv`.

use serde::Deserialize;

use super::BenchError;
use crate::tracegen::ScenarioOp;
use crate::types::{Combo, Resources, Tier};

const SHIPPED: &str = include_str!("../../../../data/table5.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextCells {
    pub o1_latency_ms: f64,
    pub o2_latency_ms: f64,
    pub o1_accuracy_pct: f64,
    pub o2_accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table5Row {
    pub combo: Combo,
    pub a: ContextCells,
    pub b: ContextCells,
    pub resources: Resources,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    od: Tier,
    asr: Tier,
    tc: Tier,
    gr: Tier,
    a_o1_latency_ms: f64,
    a_o2_latency_ms: f64,
    a_o1_accuracy_pct: f64,
    a_o2_accuracy_pct: f64,
    b_o1_latency_ms: f64,
    b_o2_latency_ms: f64,
    b_o1_accuracy_pct: f64,
    b_o2_accuracy_pct: f64,
    ram_mb: f64,
    cpu_pct: f64,
    gpu_pct: f64,
    vram_mb: f64,
}

/// One latency/accuracy target.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub context: String,
    pub op: ScenarioOp,
    pub combo: Combo,
    pub latency_ms: f64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table5 {
    pub rows: Vec<Table5Row>,
}

impl Table5 {
    /// The shipped transcription.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("shipped table parses")
    }

    pub fn load(path: &str) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{path}: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<CsvRow>().enumerate() {
            let r = rec.map_err(|e| BenchError::Table(format!("row {}: {e}", i + 1)))?;
            let cells = |l1, l2, a1, a2| ContextCells {
                o1_latency_ms: l1,
                o2_latency_ms: l2,
                o1_accuracy_pct: a1,
                o2_accuracy_pct: a2,
            };
            rows.push(Table5Row {
                combo: Combo::new(r.od, r.asr, r.tc, r.gr),
                a: cells(r.a_o1_latency_ms, r.a_o2_latency_ms, r.a_o1_accuracy_pct, r.a_o2_accuracy_pct),
                b: cells(r.b_o1_latency_ms, r.b_o2_latency_ms, r.b_o1_accuracy_pct, r.b_o2_accuracy_pct),
                resources: Resources::new(r.ram_mb, r.cpu_pct, r.gpu_pct, r.vram_mb),
            });
        }
        if rows.is_empty() {
            return Err(BenchError::Table("no rows".into()));
        }
        Ok(Self { rows })
    }

    pub fn row(&self, combo: Combo) -> Option<&Table5Row> {
        self.rows.iter().find(|r| r.combo == combo)
    }

    /// Cells for one context and operation. Locate cells are listed once per
    /// (OD, ASR, TC) with GR = H, since GR does not enter the locate path.
    pub fn targets(&self, context: &str, op: ScenarioOp) -> Vec<Target> {
        self.rows
            .iter()
            .filter(|r| op != ScenarioOp::Locate || r.combo.gr == Tier::H)
            .filter_map(|r| {
                let c = match context {
                    "A" => &r.a,
                    "B" => &r.b,
                    _ => return None,
                };
                let (latency_ms, accuracy_pct) = match op {
                    ScenarioOp::Locate => (c.o1_latency_ms, c.o1_accuracy_pct),
                    ScenarioOp::Describe => (c.o2_latency_ms, c.o2_accuracy_pct),
                    _ => return None,
                };
                Some(Target { context: context.to_string(), op, combo: r.combo, latency_ms, accuracy_pct })
            })
            .collect()
    }

    /// Every locate and describe target in both contexts.
    pub fn all_targets(&self) -> Vec<Target> {
        let mut out = Vec::new();
        for ctx in ["A", "B"] {
            for op in [ScenarioOp::Locate, ScenarioOp::Describe] {
                out.extend(self.targets(ctx, op));
            }
        }
        out
    }

    pub fn resource_rows(&self) -> Vec<(Combo, Resources)> {
        self.rows.iter().map(|r| (r.combo, r.resources)).collect()
    }
}
