use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::GridEntry;
use super::run::TimingRecord;
use crate::accuracy::{correlation_battery, default_pairs, BatteryEntry};
use crate::error::{Error, Result};
use crate::metrics::UtilityReport;

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean-over-repetition values of `metric` at `scope`, in report order.
fn means<'a>(report: &'a UtilityReport, metric: &'a str, scope: &'a str) -> impl Iterator<Item = (&'a str, usize, f64)> {
    report
        .rows
        .iter()
        .filter(move |r| r.k.is_none() && r.metric == metric && r.scope == scope && r.spec_label != "original")
        .map(|r| (r.spec_label.as_str(), r.m, r.value))
}

/// Write the summary tables derived from a report into `dir`:
/// `mpe_apo.csv`, `cio_vs_m.csv`, `apo_vs_m.csv`, `kl.csv`,
/// `simple_vs_selective.csv`, `apo_vs_time.csv` and `correlations.csv`.
pub fn emit_tables(
    report: &UtilityReport,
    timings: &[TimingRecord],
    grid: &[GridEntry],
    apo_metric: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if report.rows.iter().all(|r| r.k.is_some() || r.spec_label == "original") {
        return Err(Error::InvalidArgument("report has no averaged cells to tabulate".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        let path = dir.join(name);
        write_rows(&path, header, &rows)?;
        written.push(path);
        Ok(())
    };
    let mpe_apo = format!("mpe_{apo_metric}");

    let mpe_avg: BTreeMap<(String, usize), f64> =
        means(report, "mpe_average_cio", "all").map(|(l, m, v)| ((l.to_string(), m), v)).collect();
    let rows: Vec<Vec<String>> = means(report, &mpe_apo, "all")
        .map(|(l, m, v)| {
            let avg = mpe_avg.get(&(l.to_string(), m)).map_or(String::new(), |a| a.to_string());
            vec![l.to_string(), m.to_string(), v.to_string(), avg]
        })
        .collect();
    emit("mpe_apo.csv", &["spec_label", "m", &mpe_apo, "mpe_average_cio"], rows)?;

    for (file, metric) in [("cio_vs_m.csv", "average_cio"), ("apo_vs_m.csv", apo_metric)] {
        let rows = means(report, metric, "all")
            .map(|(l, m, v)| vec![m.to_string(), v.to_string(), l.to_string()])
            .collect();
        emit(file, &["x", "y", "series"], rows)?;
    }

    let normalized: BTreeMap<(String, usize, String), f64> = report
        .rows
        .iter()
        .filter(|r| r.k.is_none() && r.metric == "kl_normalized")
        .map(|r| ((r.spec_label.clone(), r.m, r.scope.clone()), r.value))
        .collect();
    let rows = report
        .rows
        .iter()
        .filter(|r| r.k.is_none() && r.metric == "kl")
        .map(|r| {
            let n = normalized
                .get(&(r.spec_label.clone(), r.m, r.scope.clone()))
                .map_or(String::new(), |v| v.to_string());
            vec![r.spec_label.clone(), r.m.to_string(), r.scope.clone(), r.value.to_string(), n]
        })
        .collect();
    emit("kl.csv", &["spec_label", "m", "variable", "raw", "normalized"], rows)?;

    let mut rows = Vec::new();
    for sel in grid.iter().filter(|e| e.is_selective()) {
        let Some(simple) = grid.iter().find(|e| {
            !e.is_selective() && e.proper == sel.proper && e.synthesizer.label == sel.synthesizer.label
        }) else {
            continue;
        };
        let ms: Vec<usize> = means(report, apo_metric, "all")
            .filter(|(l, _, _)| *l == sel.spec_label)
            .map(|(_, m, _)| m)
            .collect();
        for m in ms {
            let apo = |label: &str| report.get(label, m, None, apo_metric, "all");
            let (Some(a_simple), Some(a_sel)) = (apo(&simple.spec_label), apo(&sel.spec_label)) else {
                continue;
            };
            let fits = |label: &str| -> BTreeMap<String, f64> {
                report
                    .rows
                    .iter()
                    .filter(|r| r.spec_label == label && r.m == m && r.k.is_none() && r.metric == "fit_cio")
                    .map(|r| (r.scope.clone(), r.value))
                    .collect()
            };
            let (fs, fl) = (fits(&simple.spec_label), fits(&sel.spec_label));
            let (mut w_simple, mut w_sel, mut total) = (0.0, 0.0, 0usize);
            for (id, v) in &fs {
                if let Some(w) = fl.get(id) {
                    total += 1;
                    if v > w {
                        w_simple += 1.0;
                    } else if w > v {
                        w_sel += 1.0;
                    } else {
                        w_simple += 0.5;
                        w_sel += 0.5;
                    }
                }
            }
            let ratio = |w: f64| if total > 0 { (w / total as f64).to_string() } else { String::new() };
            rows.push(vec![
                simple.spec_label.clone(),
                sel.spec_label.clone(),
                m.to_string(),
                a_simple.to_string(),
                a_sel.to_string(),
                w_simple.to_string(),
                w_sel.to_string(),
                ratio(w_simple),
                ratio(w_sel),
            ]);
        }
    }
    emit(
        "simple_vs_selective.csv",
        &[
            "simple",
            "selective",
            "m",
            "simple_apo",
            "selective_apo",
            "simple_wins",
            "selective_wins",
            "simple_win_ratio",
            "selective_win_ratio",
        ],
        rows,
    )?;

    let mut per_dataset: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    for t in timings {
        let e = per_dataset.entry((t.spec_label.clone(), t.m)).or_insert((0.0, 0));
        e.0 += t.seconds_per_dataset;
        e.1 += 1;
    }
    let rows = means(report, apo_metric, "all")
        .filter_map(|(l, m, v)| {
            per_dataset
                .get(&(l.to_string(), m))
                .map(|(s, n)| vec![l.to_string(), m.to_string(), v.to_string(), (s / *n as f64).to_string()])
        })
        .collect();
    emit("apo_vs_time.csv", &["spec_label", "m", apo_metric, "seconds_per_dataset"], rows)?;

    let mut pairs = default_pairs();
    if apo_metric != "apo90" {
        for ((a, _), (b, _)) in pairs.iter_mut() {
            for s in [a, b] {
                if s == "apo90" {
                    *s = apo_metric.to_string();
                }
            }
        }
    }
    let rows = correlation_battery(report, &pairs)
        .into_iter()
        .map(|e| match e {
            BatteryEntry::Computed(c) => vec![c.x, c.y, c.r.to_string(), c.n.to_string(), String::new()],
            BatteryEntry::Skipped { x, y, reason } => vec![x, y, String::new(), String::new(), reason],
        })
        .collect();
    emit("correlations.csv", &["x", "y", "r", "n", "skipped"], rows)?;
    Ok(written)
}
