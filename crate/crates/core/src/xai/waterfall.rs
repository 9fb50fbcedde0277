// SPDX-License-Identifier: Apache-2.0

use super::{Condition, Scale, ShapExplanation, XaiError};
use crate::graph::{feature_semantics, FeatureSchema};
use crate::ml::logistic;

const BAR_WIDTH: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct WaterfallRow {
    pub label: String,
    pub phi: f64,
}

/// The `top_k` largest contributions by |φ|, then one row holding the rest.
/// The rows always sum to `fx - base`.
pub fn waterfall_rows(
    e: &ShapExplanation,
    schema: &FeatureSchema,
    top_k: usize,
) -> Result<Vec<WaterfallRow>, XaiError> {
    let mut order: Vec<usize> = (0..e.phis.len()).filter(|&f| e.phis[f] != 0.0).collect();
    order.sort_by(|&a, &b| e.phis[b].abs().total_cmp(&e.phis[a].abs()).then(a.cmp(&b)));
    let rest = order.split_off(top_k.min(order.len()));
    let mut rows = Vec::with_capacity(order.len() + 1);
    let mut shown = 0.0;
    for f in order {
        let label = match e.features.get(f) {
            Some(&bit) => Condition::new(schema, f, bit)?.text,
            None => feature_semantics(schema, f)?,
        };
        shown += e.phis[f];
        rows.push(WaterfallRow {
            label,
            phi: e.phis[f],
        });
    }
    if !rest.is_empty() {
        let s = if rest.len() == 1 { "" } else { "s" };
        rows.push(WaterfallRow {
            label: format!("{} other feature{s}", rest.len()),
            phi: e.fx - e.base - shown,
        });
    }
    Ok(rows)
}

/// Plain-text waterfall from the base value to the model output.
pub fn waterfall_render(
    e: &ShapExplanation,
    schema: &FeatureSchema,
    top_k: usize,
) -> Result<String, XaiError> {
    let rows = waterfall_rows(e, schema, top_k)?;
    let widest = rows.iter().map(|r| r.phi.abs()).fold(0.0, f64::max);
    let mut out = format!("E[f(x)] = {:+.4}\n", e.base);
    for r in &rows {
        let len = if widest > 0.0 {
            ((r.phi.abs() / widest) * BAR_WIDTH as f64).round() as usize
        } else {
            0
        };
        let bar = if r.phi >= 0.0 { "+" } else { "-" }.repeat(len);
        out.push_str(&format!(
            "  {:+.4}  {bar:<BAR_WIDTH$}  {}\n",
            r.phi, r.label
        ));
    }
    out.push_str(&format!("f(x) = {:+.4}\n", e.fx));
    if e.scale == Scale::Margin {
        out.push_str(&format!("score = logistic(f(x)) = {:.4}\n", logistic(e.fx)));
    }
    Ok(out)
}
