//! Cell tables, trend checks against the published grid, and the
//! recommended-combination block.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{BenchError, SweepCell, Table5, TrialRecord};
use crate::fusion::RejectReason;
use crate::tracegen::ScenarioOp;
use crate::types::{Combo, Resources, Tier};

pub const CSV_HEADER: &str = "context,operation,combo,n,mean_latency_ms,latency_se_ms,accuracy_pct,accuracy_se_pp,ram_mb,cpu_pct,gpu_pct,vram_mb";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

/// Machine-readable cells, one row per cell in the given order.
pub fn cells_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        let r = c.resources;
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.1},{:.1},{:.1},{:.1}",
            c.context,
            c.operation,
            c.label(),
            c.n,
            c.mean_latency_ms,
            c.latency_se_ms,
            c.accuracy_pct,
            c.accuracy_se_pp,
            r.ram_mb,
            r.cpu_pct,
            r.gpu_pct,
            r.vram_mb
        );
    }
    out
}

pub fn parse_cells_csv(text: &str) -> Result<Vec<SweepCell>, BenchError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| BenchError::Cells(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(BenchError::Cells(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut cells = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| BenchError::Cells(format!("line {line}: {e}")))?;
        let bad = |what: &str| BenchError::Cells(format!("line {line}: bad {what}"));
        let num = |k: usize, what: &str| rec[k].parse::<f64>().map_err(|_| bad(what));
        let operation: ScenarioOp = rec[1].parse().map_err(|_| bad("operation"))?;
        let combo: Combo = rec[2].replace('*', "H").parse().map_err(|_| bad("combo"))?;
        cells.push(SweepCell {
            context: rec[0].to_string(),
            operation,
            combo,
            n: rec[3].parse().map_err(|_| bad("n"))?,
            mean_latency_ms: num(4, "mean_latency_ms")?,
            latency_se_ms: num(5, "latency_se_ms")?,
            accuracy_pct: num(6, "accuracy_pct")?,
            accuracy_se_pp: num(7, "accuracy_se_pp")?,
            resources: Resources::new(num(8, "ram_mb")?, num(9, "cpu_pct")?, num(10, "gpu_pct")?, num(11, "vram_mb")?),
        });
    }
    Ok(cells)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn find<'a>(cells: &'a [SweepCell], ctx: &str, op: ScenarioOp, combo: &str) -> Option<&'a SweepCell> {
    let combo: Combo = combo.parse().ok()?;
    cells.iter().find(|c| c.context == ctx && c.operation == op && c.combo == combo)
}

fn group<'a>(cells: &'a [SweepCell], ctx: &str, op: ScenarioOp) -> Vec<&'a SweepCell> {
    cells.iter().filter(|c| c.context == ctx && c.operation == op).collect()
}

fn contexts(cells: &[SweepCell]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in cells {
        if !out.contains(&c.context) {
            out.push(c.context.clone());
        }
    }
    out
}

/// Published trends the simulated cells should reproduce. Checks whose
/// cells are missing are skipped.
pub fn trend_checks(cells: &[SweepCell], table: &Table5) -> Vec<TrendCheck> {
    let mut out = Vec::new();
    let ctxs = contexts(cells);

    for ctx in &ctxs {
        let loc = group(cells, ctx, ScenarioOp::Locate);
        let (h, l): (Vec<&SweepCell>, Vec<&SweepCell>) = loc.iter().copied().partition(|c| c.combo.asr == Tier::H);
        if !h.is_empty() && !l.is_empty() {
            let slowest_h = h.iter().map(|c| c.mean_latency_ms).fold(f64::MIN, f64::max);
            let fastest_l = l.iter().map(|c| c.mean_latency_ms).fold(f64::MAX, f64::min);
            out.push(TrendCheck {
                name: format!("{ctx} locate: every ASR=L combo slower than every ASR=H combo"),
                pass: fastest_l > slowest_h,
                detail: format!("slowest H {slowest_h:.1} ms, fastest L {fastest_l:.1} ms"),
            });
        }

        let pairs: Vec<(&SweepCell, &SweepCell)> = loc
            .iter()
            .filter(|c| c.combo.od == Tier::H)
            .filter_map(|hc| loc.iter().find(|lc| lc.combo == Combo { od: Tier::L, ..hc.combo }).map(|lc| (*hc, *lc)))
            .collect();
        if !pairs.is_empty() {
            let worst = pairs.iter().map(|(hc, lc)| hc.mean_latency_ms - lc.mean_latency_ms).fold(f64::MAX, f64::min);
            out.push(TrendCheck {
                name: format!("{ctx} locate: OD=L faster than OD=H"),
                pass: worst > 0.0,
                detail: format!("smallest H-L gap {worst:.1} ms over {} pairs", pairs.len()),
            });
        }

        if let (Some(hh), Some(hl)) =
            (find(cells, ctx, ScenarioOp::Describe, "HHHH"), find(cells, ctx, ScenarioOp::Describe, "HHLH"))
        {
            let saved = hh.mean_latency_ms - hl.mean_latency_ms;
            let dacc = (hh.accuracy_pct - hl.accuracy_pct).abs();
            out.push(TrendCheck {
                name: format!("{ctx} describe: TC H->L saves about 90 ms at equal accuracy"),
                pass: (saved - 90.0).abs() <= 20.0 && dacc < 1.0,
                detail: format!("saved {saved:.1} ms, accuracy change {dacc:.2} pp"),
            });
        }

        if ctx == "A" || ctx == "B" {
            let paired: Vec<(f64, f64, f64, f64)> = table
                .targets(ctx, ScenarioOp::Locate)
                .iter()
                .filter_map(|t| {
                    let c = loc.iter().find(|c| c.combo == t.combo)?;
                    Some((c.mean_latency_ms, t.latency_ms, c.accuracy_pct, t.accuracy_pct))
                })
                .collect();
            if paired.len() >= 3 {
                let sim: Vec<f64> = paired.iter().map(|p| p.0).collect();
                let pub_: Vec<f64> = paired.iter().map(|p| p.1).collect();
                let rho = spearman(&sim, &pub_);
                out.push(TrendCheck {
                    name: format!("{ctx} locate: latency rank correlation with the published grid >= 0.9"),
                    pass: rho >= 0.9,
                    detail: format!("Spearman {rho:.3} over {} combos", paired.len()),
                });
                let worst = paired.iter().map(|p| (p.2 - p.3).abs()).fold(0.0, f64::max);
                out.push(TrendCheck {
                    name: format!("{ctx} locate: accuracy within 10 pp of every published cell"),
                    pass: worst <= 10.0,
                    detail: format!("largest gap {worst:.1} pp"),
                });
            }
        }

        // (OD, ASR) accuracy ordering HH > LH > HL > LL, for each TC tier.
        let order = [(Tier::H, Tier::H), (Tier::L, Tier::H), (Tier::H, Tier::L), (Tier::L, Tier::L)];
        for tc in Tier::ALL {
            let acc: Option<Vec<f64>> = order
                .iter()
                .map(|(od, asr)| {
                    loc.iter().find(|c| c.combo == Combo::new(*od, *asr, tc, Tier::H)).map(|c| c.accuracy_pct)
                })
                .collect();
            if let Some(acc) = acc {
                out.push(TrendCheck {
                    name: format!("{ctx} locate TC={tc}: accuracy HH > LH > HL > LL"),
                    pass: acc.windows(2).all(|w| w[0] > w[1]),
                    detail: acc.iter().map(|a| format!("{a:.1}")).collect::<Vec<_>>().join(" > "),
                });
            }
        }
    }

    if ctxs.iter().any(|c| c == "A") && ctxs.iter().any(|c| c == "B") {
        for op in [ScenarioOp::Locate, ScenarioOp::Describe] {
            let pairs: Vec<(f64, f64)> = group(cells, "A", op)
                .iter()
                .filter_map(|a| {
                    group(cells, "B", op).iter().find(|b| b.combo == a.combo).map(|b| (a.accuracy_pct, b.accuracy_pct))
                })
                .collect();
            if !pairs.is_empty() {
                let worst = pairs.iter().map(|(a, b)| a - b).fold(f64::MAX, f64::min);
                out.push(TrendCheck {
                    name: format!("{op}: context B accuracy below context A for every combo"),
                    pass: worst > 0.0,
                    detail: format!("smallest A-B gap {worst:.1} pp over {} combos", pairs.len()),
                });
            }
        }
    }
    out
}

/// The three candidates singled out by the published comparison.
pub const PUBLISHED_CANDIDATES: [&str; 3] = ["HHLH", "LHLH", "LLLH"];

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub context: String,
    pub rule: &'static str,
    pub combo: Combo,
    pub latency_ms: f64,
    pub accuracy_pct: f64,
    pub ram_mb: f64,
}

/// Name, admission test, and whether to rank admitted cells by accuracy
/// (otherwise by latency).
type Rule<'a> = (&'static str, Box<dyn Fn(&SweepCell) -> bool + 'a>, bool);

/// Per context, from describe cells: the fastest combination within 2 pp
/// of the best accuracy, the most accurate within 5% of the lowest latency,
/// and the most accurate within 10% of the lowest predicted RAM.
pub fn recommendations(cells: &[SweepCell]) -> Vec<Recommendation> {
    let mut out = Vec::new();
    for ctx in contexts(cells) {
        let g = group(cells, &ctx, ScenarioOp::Describe);
        if g.is_empty() {
            continue;
        }
        let best_acc = g.iter().map(|c| c.accuracy_pct).fold(f64::MIN, f64::max);
        let min_lat = g.iter().map(|c| c.mean_latency_ms).fold(f64::MAX, f64::min);
        let min_ram = g.iter().map(|c| c.resources.ram_mb).fold(f64::MAX, f64::min);
        let rules: [Rule; 3] = [
            ("accuracy-first", Box::new(|c| c.accuracy_pct >= best_acc - 2.0), false),
            ("latency-first", Box::new(|c| c.mean_latency_ms <= 1.05 * min_lat), true),
            ("memory-first", Box::new(|c| c.resources.ram_mb <= 1.10 * min_ram), true),
        ];
        for (rule, admit, by_accuracy) in rules {
            let pick = g.iter().filter(|c| admit(c)).min_by(|a, b| {
                if by_accuracy {
                    b.accuracy_pct.total_cmp(&a.accuracy_pct).then(a.mean_latency_ms.total_cmp(&b.mean_latency_ms))
                } else {
                    a.mean_latency_ms.total_cmp(&b.mean_latency_ms).then(b.accuracy_pct.total_cmp(&a.accuracy_pct))
                }
            });
            if let Some(c) = pick {
                out.push(Recommendation {
                    context: ctx.clone(),
                    rule,
                    combo: c.combo,
                    latency_ms: c.mean_latency_ms,
                    accuracy_pct: c.accuracy_pct,
                    ram_mb: c.resources.ram_mb,
                });
            }
        }
    }
    out
}

fn reason_name(r: RejectReason) -> &'static str {
    match r {
        RejectReason::NoOp => "no_op",
        RejectReason::NeedsGesture => "needs_gesture",
        RejectReason::HandMissing => "hand_missing",
        RejectReason::Timeout => "timeout",
        RejectReason::UnpairedPointing => "unpaired_pointing",
    }
}

fn cell_table(cells: &[SweepCell]) -> String {
    let header = ["context", "op", "combo", "n", "latency ms", "± se", "accuracy %", "± se", "RAM MB*"];
    let rows: Vec<[String; 9]> = cells
        .iter()
        .map(|c| {
            [
                c.context.clone(),
                c.operation.to_string(),
                c.label(),
                c.n.to_string(),
                format!("{:.1}", c.mean_latency_ms),
                format!("{:.1}", c.latency_se_ms),
                format!("{:.1}", c.accuracy_pct),
                format!("{:.1}", c.accuracy_se_pp),
                format!("{:.0}", c.resources.ram_mb),
            ]
        })
        .collect();
    let mut width = header.map(|h| h.chars().count());
    for r in &rows {
        for (w, s) in width.iter_mut().zip(r) {
            *w = (*w).max(s.chars().count());
        }
    }
    let line = |fields: Vec<&str>| -> String {
        fields
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (f, w))| if i < 3 { format!("{f:<w$}") } else { format!("{f:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out.push_str("* predicted by the resource model, not measured\n");
    out
}

/// Renders cells (and, for the table format, trends, recommendations and
/// reject counts from `records`).
pub fn emit_report(cells: &[SweepCell], records: &[TrialRecord], format: ReportFormat) -> Result<String, BenchError> {
    if cells.is_empty() {
        return Err(BenchError::EmptyCells);
    }
    if format == ReportFormat::Csv {
        return Ok(cells_csv(cells));
    }
    let mut out = String::from("Cells\n\n");
    out.push_str(&cell_table(cells));

    out.push_str("\nTrend checks\n\n");
    let checks = trend_checks(cells, &Table5::shipped());
    if checks.is_empty() {
        out.push_str("(no checkable cells)\n");
    }
    for c in &checks {
        let _ = writeln!(out, "[{}] {} ({})", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail);
    }

    out.push_str("\nRecommended combinations (describe)\n\n");
    let recs = recommendations(cells);
    for r in &recs {
        let _ = writeln!(
            out,
            "{}  {:<15} {}  {:>7.1} ms  {:>5.1} %  {:>6.0} MB",
            r.context, r.rule, r.combo, r.latency_ms, r.accuracy_pct, r.ram_mb
        );
    }
    let by_ctx: BTreeMap<&str, Vec<String>> = recs.iter().fold(BTreeMap::new(), |mut m, r| {
        m.entry(r.context.as_str()).or_insert_with(Vec::new).push(r.combo.to_string());
        m
    });
    for (ctx, combos) in by_ctx {
        let same = combos.iter().map(String::as_str).eq(PUBLISHED_CANDIDATES);
        let _ = writeln!(
            out,
            "{ctx}: {} the published candidates {}",
            if same { "matches" } else { "differs from" },
            PUBLISHED_CANDIDATES.join(" / ")
        );
    }

    if !records.is_empty() {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in records {
            if let Some(reason) = r.outcome.reject_reason {
                *counts.entry(reason_name(reason)).or_default() += 1;
            }
        }
        let _ = writeln!(out, "\nRejections ({} records)\n", records.len());
        if counts.is_empty() {
            out.push_str("(none)\n");
        }
        for (k, v) in counts {
            let _ = writeln!(out, "{k:<18} {v}");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cells holding the published values, with the published resources.
    fn published_cells() -> Vec<SweepCell> {
        let t = Table5::shipped();
        let mut cells = Vec::new();
        for ctx in ["A", "B"] {
            for op in [ScenarioOp::Locate, ScenarioOp::Describe] {
                for target in t.targets(ctx, op) {
                    cells.push(SweepCell {
                        context: ctx.into(),
                        operation: op,
                        combo: target.combo,
                        n: 100,
                        mean_latency_ms: target.latency_ms,
                        latency_se_ms: 1.0,
                        accuracy_pct: target.accuracy_pct,
                        accuracy_se_pp: 1.0,
                        resources: t.row(target.combo).unwrap().resources,
                    });
                }
            }
        }
        cells
    }

    #[test]
    fn csv_roundtrip_and_row_count() {
        let cells: Vec<SweepCell> = published_cells().into_iter().filter(|c| c.context == "A").collect();
        assert_eq!(cells.len(), 24);
        let text = cells_csv(&cells);
        assert_eq!(text.lines().count(), 25);
        assert!(text.lines().nth(1).unwrap().starts_with("A,locate,HHH*,100,1209.000,"));
        let back = parse_cells_csv(&text).unwrap();
        assert_eq!(cells_csv(&back), text);
        assert!(parse_cells_csv("a,b\n").is_err());
    }

    #[test]
    fn published_grid_yields_published_candidates() {
        let recs = recommendations(&published_cells());
        let combos: Vec<String> = recs.iter().map(|r| format!("{} {}", r.context, r.combo)).collect();
        assert_eq!(combos, ["A HHLH", "A LHLH", "A LLLH", "B HHLH", "B LHLH", "B LLLH"]);
        let report = emit_report(&published_cells(), &[], ReportFormat::Table).unwrap();
        assert!(report.contains("A: matches the published candidates HHLH / LHLH / LLLH"));
    }

    #[test]
    fn published_grid_passes_its_own_trends() {
        let checks = trend_checks(&published_cells(), &Table5::shipped());
        let failing: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        assert!(failing.is_empty(), "{failing:?}");
        assert!(checks.len() >= 10);
    }

    #[test]
    fn empty_cells_are_an_error() {
        assert!(matches!(emit_report(&[], &[], ReportFormat::Csv), Err(BenchError::EmptyCells)));
    }

    #[test]
    fn spearman_handles_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let published = [1209.0, 1152.0, 3171.0, 3102.0, 846.0, 789.0, 2727.0, 2774.0];
        assert!(spearman(&published, &published) > 0.999);
    }
}
