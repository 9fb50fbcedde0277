// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::RunReport;
use crate::netlist::GateType;

/// Human-readable run summary. Per-gate rows cover gates that were leaky
/// before or got masked; the JSON report has every gate.
pub fn report_render(r: &RunReport) -> String {
    let mut s = String::new();
    let b = &r.before.summary;
    let a = &r.after.summary;
    let _ = writeln!(s, "design: {}", r.design);
    let _ = writeln!(
        s,
        "budget: {} -> {} gate(s), {} candidate(s), {} excluded by rules",
        r.config.budget,
        r.budget_gates,
        r.candidates.len(),
        r.excluded.len()
    );
    let _ = writeln!(
        s,
        "traces per group: {}, seed: {}",
        r.config.traces, r.config.seed
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<22}{:>12}{:>12}", "", "before", "after");
    let _ = writeln!(
        s,
        "{:<22}{:>12.4}{:>12.4}",
        "mean |t|", b.mean_abs_t, a.mean_abs_t
    );
    let _ = writeln!(
        s,
        "{:<22}{:>12.4}{:>12.4}",
        "median |t|", b.median_abs_t, a.median_abs_t
    );
    let _ = writeln!(
        s,
        "{:<22}{:>12}{:>12}",
        "leaky gates", b.leaky_count, a.leaky_count
    );
    let _ = writeln!(s, "total leakage reduction: {:.2}%", r.reduction);
    let _ = writeln!(s, "masked design verdict: {}", r.masked_summary.verdict);
    let _ = writeln!(s);
    let o = &r.overhead;
    let _ = writeln!(s, "area   {:.2}x Original", o.area_x);
    let _ = writeln!(s, "power  {:.2}x Original", o.power_x);
    let _ = writeln!(s, "delay  {:.2}x Original", o.delay_x);

    let rows: Vec<_> = r
        .before
        .gates
        .iter()
        .zip(&r.after.gates)
        .filter(|(g, _)| g.gtype != GateType::Input)
        .filter(|(g, _)| g.leaky || r.selected.contains(&g.name))
        .collect();
    if !rows.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<20}{:<6}{:>12}{:>12}  masked",
            "gate", "type", "|t| before", "|t| after"
        );
        for (g, h) in rows {
            let masked = if r.selected.contains(&g.name) {
                "yes"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "{:<20}{:<6}{:>12.4}{:>12.4}  {masked}",
                g.name,
                g.gtype.keyword(),
                g.abs_t(),
                h.abs_t()
            );
        }
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Wall-clock seconds per stage, one line each.
pub fn timings_render(r: &RunReport) -> String {
    let mut s = String::new();
    for (stage, secs) in &r.timings.stages {
        let _ = writeln!(s, "time {stage}: {secs:.3} s");
    }
    s
}
