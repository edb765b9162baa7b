use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{is_sample, ExperimentConfig, GridEntry};
use crate::accuracy::{adhoc_results, classify_compare};
use crate::data::{write_csv, Dataset};
use crate::error::{Error, Result};
use crate::estimand::{ci, combine, mean_point_estimand, regression_estimands, ConfidenceInterval, EstimateSet};
use crate::metrics::{aggregate, apo_with, cio_with, kl_scores, FitOverlaps, ReportRow, UtilityReport};
use crate::rng;
use crate::synth::{dataset_file_name, synthesize, SyntheticSet};

/// Name of the APO metric for a threshold, e.g. `apo90`.
pub fn apo_metric(threshold: f64) -> String {
    format!("apo{}", (threshold * 100.0).round())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub spec_label: String,
    pub m: usize,
    pub k: usize,
    pub datasets: usize,
    pub total_seconds: f64,
    pub seconds_per_dataset: f64,
}

impl TimingRecord {
    pub fn new(spec_label: &str, m: usize, k: usize, seconds: &[f64]) -> Result<Self> {
        if seconds.is_empty() {
            return Err(Error::InvalidArgument("timing of zero datasets".into()));
        }
        let total: f64 = seconds.iter().sum();
        Ok(TimingRecord {
            spec_label: spec_label.to_string(),
            m,
            k,
            datasets: seconds.len(),
            total_seconds: total,
            seconds_per_dataset: total / seconds.len() as f64,
        })
    }
}

pub fn write_timings(records: &[TimingRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_timings(path: &Path) -> Result<Vec<TimingRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Original-data intervals every synthetic set is compared against.
pub struct Evaluator<'a> {
    original: &'a Dataset,
    cfg: &'a ExperimentConfig,
    mean_points: Vec<(usize, ConfidenceInterval)>,
    fits: Vec<(String, usize, Vec<(String, ConfidenceInterval)>)>,
    original_errors: Vec<String>,
}

impl<'a> Evaluator<'a> {
    pub fn new(original: &'a Dataset, cfg: &'a ExperimentConfig) -> Self {
        let mut original_errors = Vec::new();
        let mut mean_points = Vec::new();
        if cfg.metrics.mean_points {
            for (c, spec) in original.schema().columns().iter().enumerate() {
                if !spec.kind.is_numeric() {
                    continue;
                }
                match mean_point_estimand(original, c)
                    .and_then(|(q, v)| ConfidenceInterval::normal(q, v, cfg.level))
                {
                    Ok(i) => mean_points.push((c, i)),
                    Err(e) => original_errors.push(format!("mean of {:?} on original: {e}", spec.name)),
                }
            }
        }
        let mut fits = Vec::new();
        if cfg.metrics.regression {
            for (i, fit) in cfg.fits.iter().enumerate() {
                let intervals = regression_estimands(original, fit).and_then(|coefs| {
                    coefs
                        .into_iter()
                        .map(|c| Ok((c.name, ConfidenceInterval::normal(c.q, c.v, cfg.level)?)))
                        .collect::<Result<Vec<_>>>()
                });
                match intervals {
                    Ok(iv) => fits.push((fit.id.clone(), i, iv)),
                    Err(e) => original_errors.push(format!("original data: {e}")),
                }
            }
        }
        Evaluator {
            original,
            cfg,
            mean_points,
            fits,
            original_errors,
        }
    }

    /// Rows describing the original data: fit failures and ad-hoc baselines.
    pub fn original_rows(&self) -> Vec<ReportRow> {
        let mut rows: Vec<ReportRow> = self
            .original_errors
            .iter()
            .map(|e| ReportRow::error("original", 0, None, e))
            .collect();
        for spec in &self.cfg.adhoc {
            match crate::accuracy::adhoc_proportion(self.original, &spec.predicate()) {
                Ok(p) => rows.push(ReportRow::new("original", 0, None, "adhoc_proportion", &spec.id, p)),
                Err(e) => rows.push(ReportRow::error("original", 0, None, &format!("ad-hoc {:?}: {e}", spec.id))),
            }
        }
        rows
    }

    /// All per-set metric rows for one grid cell repetition.
    pub fn evaluate(&self, set: &SyntheticSet, spec_label: &str, m: usize, k: usize, seed: u64) -> Vec<ReportRow> {
        let cfg = self.cfg;
        let mut rows = Vec::new();
        let row = |metric: &str, scope: &str, value: f64| ReportRow::new(spec_label, m, Some(k), metric, scope, value);
        let err = |msg: String| ReportRow::error(spec_label, m, Some(k), &msg);
        let apo_name = apo_metric(cfg.metrics.apo.threshold);
        let overlap = |orig: &ConfidenceInterval, q: Vec<f64>, v: Vec<f64>, id: &str| -> Result<f64> {
            let es = EstimateSet::new(id, q, v, self.original.n_rows())?;
            let syn = ci(&combine(&es, cfg.rule)?, cfg.level)?;
            Ok(cio_with(orig, &syn, cfg.metrics.cio))
        };

        if !self.mean_points.is_empty() {
            let mut values = Vec::new();
            for (c, orig) in &self.mean_points {
                let name = &self.original.schema().column(*c).name;
                let result = set
                    .datasets
                    .iter()
                    .map(|d| mean_point_estimand(d, *c))
                    .collect::<Result<Vec<_>>>()
                    .and_then(|qv| {
                        let (q, v) = qv.into_iter().unzip();
                        overlap(orig, q, v, name)
                    });
                match result {
                    Ok(o) => {
                        rows.push(row("mpe_cio", name, o));
                        values.push(o);
                    }
                    Err(e) => rows.push(err(format!("mean of {name:?}: {e}"))),
                }
            }
            if !values.is_empty() {
                rows.push(row("mpe_average_cio", "all", values.iter().sum::<f64>() / values.len() as f64));
                if let Ok(a) = apo_with(&values, cfg.metrics.apo) {
                    rows.push(row(&format!("mpe_{apo_name}"), "all", a));
                }
            }
        }

        if !self.fits.is_empty() {
            let mut fit_overlaps = Vec::new();
            for (id, idx, coefs) in &self.fits {
                let fit = &cfg.fits[*idx];
                let per_set = set
                    .datasets
                    .iter()
                    .map(|d| regression_estimands(d, fit))
                    .collect::<Result<Vec<_>>>();
                let per_set = match per_set {
                    Ok(p) => p,
                    Err(e) => {
                        rows.push(err(e.to_string()));
                        continue;
                    }
                };
                let lookup: Vec<HashMap<&str, (f64, f64)>> = per_set
                    .iter()
                    .map(|c| c.iter().map(|e| (e.name.as_str(), (e.q, e.v))).collect())
                    .collect();
                let mut overlaps = Vec::new();
                for (name, orig) in coefs {
                    let scope = format!("{id}:{name}");
                    let qv: Option<Vec<(f64, f64)>> = lookup.iter().map(|l| l.get(name.as_str()).copied()).collect();
                    let result = match qv {
                        None => Err(Error::Fit(format!("coefficient {name:?} missing from a synthetic fit"))),
                        Some(qv) => {
                            let (q, v) = qv.into_iter().unzip();
                            overlap(orig, q, v, &scope)
                        }
                    };
                    match result {
                        Ok(o) => {
                            rows.push(row("cio", &scope, o));
                            overlaps.push(o);
                        }
                        Err(e) => rows.push(err(format!("{scope}: {e}"))),
                    }
                }
                if !overlaps.is_empty() {
                    fit_overlaps.push(FitOverlaps { fit_id: id.clone(), overlaps });
                }
            }
            match aggregate(&fit_overlaps, cfg.metrics.apo) {
                Ok(u) => {
                    for (id, v) in &u.fit_averages {
                        rows.push(row("fit_cio", id, *v));
                    }
                    rows.push(row("average_cio", "all", u.average_cio));
                    rows.push(row(&apo_name, "all", u.apo));
                }
                Err(e) => rows.push(err(format!("regression battery: {e}"))),
            }
        }

        if cfg.metrics.kl {
            let scores = set
                .datasets
                .iter()
                .map(|d| kl_scores(self.original, d, &cfg.metrics.kl_options))
                .collect::<Result<Vec<_>>>();
            match scores {
                Ok(scores) => {
                    let p = self.original.n_cols();
                    let mut avg = 0.0;
                    for c in 0..p {
                        let v = scores.iter().map(|s| s[c].raw).sum::<f64>() / scores.len() as f64;
                        rows.push(row("kl", &scores[0][c].variable, v));
                        avg += v;
                    }
                    rows.push(row("kl", "all", avg / p as f64));
                }
                Err(e) => rows.push(err(format!("KL: {e}"))),
            }
        }

        if let Some(target) = &cfg.metrics.classification_target {
            match classify_compare(self.original, set, target, seed, &cfg.metrics.classify) {
                Ok(r) => {
                    rows.push(row("class_accuracy", target, r.mean_accuracy));
                    rows.push(row("class_baseline", target, r.baseline_accuracy));
                    rows.push(row("class_agreement", target, r.agreement));
                    rows.push(row("class_deviation", "all", r.deviation()));
                }
                Err(e) => rows.push(err(format!("classification: {e}"))),
            }
        }

        if !cfg.adhoc.is_empty() {
            match adhoc_results(self.original, &[set], &cfg.adhoc) {
                Ok(results) => {
                    let mut total = 0.0;
                    for r in &results {
                        rows.push(row("adhoc_proportion", &r.id, r.synthetic[0].1));
                        rows.push(row("adhoc_deviation", &r.id, r.deviations[0]));
                        total += r.deviations[0];
                    }
                    rows.push(row("adhoc_deviation", "all", total / results.len() as f64));
                }
                Err(e) => rows.push(err(e.to_string())),
            }
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1, resume: false }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: UtilityReport,
    pub timings: Vec<TimingRecord>,
    /// Cells synthesized in this run (the rest were resumed).
    pub cells_run: usize,
    pub cells_resumed: usize,
    pub datasets_generated: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellManifest {
    spec_label: String,
    m: usize,
    k: usize,
    seed: u64,
    datasets: usize,
    timing: Option<TimingRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    seed: u64,
    total_datasets: usize,
    cell: Vec<CellManifest>,
}

pub const REPORT_FILE: &str = "report.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const RUN_MANIFEST_FILE: &str = "manifest.toml";

fn cell_stem(label: &str, m: usize, k: usize) -> String {
    format!("{label}_m{m}_k{k}")
}

/// Seed of one (synthesizer, m, repetition) cell.
pub fn cell_seed(master: u64, spec_label: &str, m: usize, k: usize) -> u64 {
    rng::derive_seed(master, &[rng::label_hash(spec_label), m as u64, k as u64])
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct CellResult {
    rows: Vec<ReportRow>,
    manifest: CellManifest,
    resumed: bool,
}

fn run_cell(
    cfg: &ExperimentConfig,
    evaluator: &Evaluator<'_>,
    original: &Dataset,
    entry: &GridEntry,
    m: usize,
    k: usize,
    resume: bool,
) -> Result<CellResult> {
    let cells = cfg.out.join("cells");
    let stem = cell_stem(&entry.spec_label, m, k);
    let rows_path = cells.join(format!("{stem}.csv"));
    let meta_path = cells.join(format!("{stem}.toml"));
    if resume && rows_path.exists() && meta_path.exists() {
        let rows = UtilityReport::read(&rows_path)?.rows;
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let manifest: CellManifest = toml::from_str(&text).map_err(|e| Error::Document {
            path: meta_path.clone(),
            message: e.to_string(),
        })?;
        return Ok(CellResult { rows, manifest, resumed: true });
    }

    let seed = cell_seed(cfg.seed, &entry.spec_label, m, k);
    let generated = entry.spec(original.schema(), m, seed).and_then(|spec| {
        let mut set = synthesize(original, &spec)?;
        set.label = entry.spec_label.clone();
        if cfg.write_synthetic {
            let dir = cfg.out.join("synthetic").join(&entry.spec_label).join(format!("m{m}")).join(format!("k{k}"));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (i, ds) in set.datasets.iter().enumerate() {
                let start = Instant::now();
                write_csv(ds, &dir.join(dataset_file_name(i)))?;
                set.seconds[i] += start.elapsed().as_secs_f64();
            }
        }
        Ok(set)
    });
    let (rows, manifest) = match generated {
        Ok(set) => {
            let rows = evaluator.evaluate(&set, &entry.spec_label, m, k, seed);
            let timing = TimingRecord::new(&entry.spec_label, m, k, &set.seconds)?;
            (rows, CellManifest { spec_label: entry.spec_label.clone(), m, k, seed, datasets: set.m(), timing: Some(timing) })
        }
        Err(e) => (
            vec![ReportRow::error(&entry.spec_label, m, Some(k), &format!("synthesis: {e}"))],
            CellManifest { spec_label: entry.spec_label.clone(), m, k, seed, datasets: 0, timing: None },
        ),
    };
    fs::create_dir_all(&cells).map_err(|e| Error::io(&cells, e))?;
    write_atomic(&rows_path, UtilityReport { rows: rows.clone() }.to_csv_string()?.as_bytes())?;
    let text = toml::to_string(&manifest).map_err(|e| Error::Document { path: meta_path.clone(), message: e.to_string() })?;
    write_atomic(&meta_path, text.as_bytes())?;
    Ok(CellResult { rows, manifest, resumed: false })
}

/// Run every (synthesizer, m, repetition) cell of the grid and write the
/// report, timings and manifest into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let original = cfg.load_original()?;
    run_experiment_on(cfg, &original, opts)
}

/// As [`run_experiment`], with the original dataset already loaded.
pub fn run_experiment_on(cfg: &ExperimentConfig, original: &Dataset, opts: RunOptions) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {} workers: {e}", opts.jobs)))?;
    let grid = cfg.grid();
    for entry in &grid {
        entry
            .spec(original.schema(), 1, cfg.seed)
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let evaluator = Evaluator::new(original, cfg);
    let cells: Vec<(usize, usize, usize)> = (0..grid.len())
        .flat_map(|g| cfg.m.iter().flat_map(move |&m| (1..=cfg.k).map(move |k| (g, m, k))))
        .collect();
    let results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(g, m, k)| run_cell(cfg, &evaluator, original, &grid[g], m, k, opts.resume))
            .collect::<Result<_>>()
    })?;

    let mut report = UtilityReport::default();
    report.rows.extend(evaluator.original_rows());
    let by_key: HashMap<(String, usize, usize), &CellResult> = cells
        .iter()
        .zip(&results)
        .map(|(&(g, m, k), r)| ((grid[g].spec_label.clone(), m, k), r))
        .collect();
    for entry in &grid {
        for &m in &cfg.m {
            let mut reps: Vec<Vec<ReportRow>> = Vec::with_capacity(cfg.k);
            for k in 1..=cfg.k {
                let cell = by_key[&(entry.spec_label.clone(), m, k)];
                let mut rows = cell.rows.clone();
                if cfg.metrics.kl && cfg.metrics.kl_normalize {
                    let base = grid
                        .iter()
                        .find(|e| e.proper == entry.proper && is_sample(e))
                        .expect("validated: Sample baseline present");
                    let base_rows = &by_key[&(base.spec_label.clone(), m, k)].rows;
                    rows.extend(normalized_kl_rows(&rows, base_rows, &entry.spec_label, m, k));
                }
                report.rows.extend(rows.iter().cloned());
                reps.push(rows);
            }
            report.rows.extend(mean_rows(&reps, &entry.spec_label, m));
        }
    }

    let timings: Vec<TimingRecord> = results.iter().filter_map(|r| r.manifest.timing.clone()).collect();
    report.write(&cfg.out.join(REPORT_FILE))?;
    write_timings(&timings, &cfg.out.join(TIMINGS_FILE))?;
    let manifest = RunManifest {
        seed: cfg.seed,
        total_datasets: results.iter().map(|r| r.manifest.datasets).sum(),
        cell: results.iter().map(|r| r.manifest.clone()).collect(),
    };
    let path = cfg.out.join(RUN_MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::Document { path: path.clone(), message: e.to_string() })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let cells_resumed = results.iter().filter(|r| r.resumed).count();
    Ok(ExperimentOutcome {
        report,
        timings,
        cells_run: results.len() - cells_resumed,
        cells_resumed,
        datasets_generated: results.iter().filter(|r| !r.resumed).map(|r| r.manifest.datasets).sum(),
    })
}

fn normalized_kl_rows(rows: &[ReportRow], base: &[ReportRow], label: &str, m: usize, k: usize) -> Vec<ReportRow> {
    let kl = |rs: &[ReportRow]| -> Vec<(String, f64)> {
        rs.iter()
            .filter(|r| r.metric == "kl" && r.scope != "all")
            .map(|r| (r.scope.clone(), r.value))
            .collect()
    };
    let (mine, theirs) = (kl(rows), kl(base));
    if mine.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut sum = 0.0;
    for (var, v) in &mine {
        match theirs.iter().find(|(b, _)| b == var) {
            Some((_, b)) if *b > 0.0 => {
                out.push(ReportRow::new(label, m, Some(k), "kl_normalized", var, v / b));
                sum += v / b;
            }
            _ => {
                return vec![ReportRow::error(
                    label,
                    m,
                    Some(k),
                    &format!("KL normalization: Sample baseline for {var:?} is missing or zero"),
                )]
            }
        }
    }
    out.push(ReportRow::new(label, m, Some(k), "kl_normalized", "all", sum / mine.len() as f64));
    out
}

/// Average each (metric, scope) over the repetitions it is present in.
fn mean_rows(reps: &[Vec<ReportRow>], label: &str, m: usize) -> Vec<ReportRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut sums: HashMap<(String, String), (f64, usize)> = HashMap::new();
    for rows in reps {
        for r in rows.iter().filter(|r| !r.is_error() && r.value.is_finite()) {
            let key = (r.metric.clone(), r.scope.clone());
            let e = sums.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (0.0, 0)
            });
            e.0 += r.value;
            e.1 += 1;
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (s, n) = sums[&key];
            ReportRow::new(label, m, None, &key.0, &key.1, s / n as f64)
        })
        .collect()
}

/// Time generating `count` datasets with one worker.
pub fn benchmark_generation(cfg: &ExperimentConfig, original: &Dataset, spec_label: &str, count: usize) -> Result<TimingRecord> {
    if count == 0 {
        return Err(Error::InvalidArgument("benchmark count must be at least 1".into()));
    }
    let entry = cfg.find_entry(spec_label)?;
    let seed = cell_seed(cfg.seed, spec_label, count, 0);
    let spec = entry.spec(original.schema(), count, seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let dir: Option<PathBuf> = cfg.write_synthetic.then(|| cfg.out.join("bench").join(spec_label));
    let start = Instant::now();
    let set = pool.install(|| synthesize(original, &spec))?;
    if let Some(dir) = &dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, ds) in set.datasets.iter().enumerate() {
            write_csv(ds, &dir.join(dataset_file_name(i)))?;
        }
    }
    let total = start.elapsed().as_secs_f64();
    Ok(TimingRecord {
        spec_label: spec_label.to_string(),
        m: count,
        k: 0,
        datasets: count,
        total_seconds: total,
        seconds_per_dataset: total / count as f64,
    })
}
