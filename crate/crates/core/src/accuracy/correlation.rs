use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::UtilityReport;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub x: String,
    pub y: String,
    pub r: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "series lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!("{} pairs; need at least 3", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("constant series has no correlation".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Averaged (k = mean) report values of one metric, keyed by synthesizer
/// label and m.
pub fn series_from_report(report: &UtilityReport, metric: &str, scope: &str) -> BTreeMap<(String, usize), f64> {
    report
        .rows
        .iter()
        .filter(|r| r.k.is_none() && r.metric == metric && r.scope == scope && r.value.is_finite())
        .map(|r| ((r.spec_label.clone(), r.m), r.value))
        .collect()
}

/// Metric pairs (metric, scope) compared by default.
pub fn default_pairs() -> Vec<((String, String), (String, String))> {
    let p = |a: &str, b: &str| ((a.to_string(), "all".to_string()), (b.to_string(), "all".to_string()));
    vec![
        p("average_cio", "class_deviation"),
        p("apo90", "class_deviation"),
        p("average_cio", "adhoc_deviation"),
        p("apo90", "adhoc_deviation"),
        p("average_cio", "kl_normalized"),
        p("average_cio", "apo90"),
        p("mpe_average_cio", "average_cio"),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatteryEntry {
    Computed(CorrelationResult),
    Skipped { x: String, y: String, reason: String },
}

/// Pearson r between pairs of report metrics, over the synthesizer
/// combinations where both are present.
pub fn correlation_battery(
    report: &UtilityReport,
    pairs: &[((String, String), (String, String))],
) -> Vec<BatteryEntry> {
    pairs
        .iter()
        .map(|((mx, sx), (my, sy))| {
            let name = |m: &str, s: &str| if s == "all" { m.to_string() } else { format!("{m}[{s}]") };
            let (x, y) = (name(mx, sx), name(my, sy));
            let xs = series_from_report(report, mx, sx);
            let ys = series_from_report(report, my, sy);
            let (a, b): (Vec<f64>, Vec<f64>) = xs
                .iter()
                .filter_map(|(k, v)| ys.get(k).map(|w| (*v, *w)))
                .unzip();
            match pearson(&a, &b) {
                Ok(r) => BatteryEntry::Computed(CorrelationResult { x, y, r, n: a.len() }),
                Err(e) => BatteryEntry::Skipped { x, y, reason: e.to_string() },
            }
        })
        .collect()
}
