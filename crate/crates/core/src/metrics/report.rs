use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 6] = ["spec_label", "m", "k", "metric", "scope", "value"];

/// One long-format report line. `k = None` marks the average over
/// repetitions; error rows carry `metric = "error"`, the message in `scope`
/// and a NaN value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub spec_label: String,
    pub m: usize,
    pub k: Option<usize>,
    pub metric: String,
    pub scope: String,
    pub value: f64,
}

impl ReportRow {
    pub fn new(spec_label: &str, m: usize, k: Option<usize>, metric: &str, scope: &str, value: f64) -> Self {
        ReportRow {
            spec_label: spec_label.to_string(),
            m,
            k,
            metric: metric.to_string(),
            scope: scope.to_string(),
            value,
        }
    }

    pub fn error(spec_label: &str, m: usize, k: Option<usize>, message: &str) -> Self {
        Self::new(spec_label, m, k, "error", message, f64::NAN)
    }

    pub fn is_error(&self) -> bool {
        self.metric == "error"
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UtilityReport {
    pub rows: Vec<ReportRow>,
}

impl UtilityReport {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.is_error()).count()
    }

    pub fn get(&self, spec_label: &str, m: usize, k: Option<usize>, metric: &str, scope: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.spec_label == spec_label && r.m == m && r.k == k && r.metric == metric && r.scope == scope)
            .map(|r| r.value)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            let k = r.k.map_or_else(|| "mean".to_string(), |k| k.to_string());
            w.write_record([
                r.spec_label.as_str(),
                &r.m.to_string(),
                &k,
                &r.metric,
                &r.scope,
                &r.value.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("report", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != REPORT_HEADER {
            return Err(Error::Schema(format!("unexpected report header {header:?}")));
        }
        let bad = |what: &str, v: &str| Error::Schema(format!("bad {what} {v:?} in report"));
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let m = rec[1].parse().map_err(|_| bad("m", &rec[1]))?;
            let k = match &rec[2] {
                "mean" => None,
                s => Some(s.parse().map_err(|_| bad("k", s))?),
            };
            let value = rec[5].parse().map_err(|_| bad("value", &rec[5]))?;
            rows.push(ReportRow {
                spec_label: rec[0].to_string(),
                m,
                k,
                metric: rec[3].to_string(),
                scope: rec[4].to_string(),
                value,
            });
        }
        Ok(UtilityReport { rows })
    }
}
