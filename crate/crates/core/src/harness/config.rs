use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::accuracy::{parse_adhoc_specs, AdhocSpec, ClassifyOptions};
use crate::data::{
    coarsen_levels, drop_column, head_n, load_csv, replace_missing, Dataset, LevelMapping, Schema, SchemaDecl,
};
use crate::error::{Error, Result};
use crate::estimand::{parse_fit_specs, FitSpec, Rule};
use crate::fit::CartParams;
use crate::metrics::{ApoRule, CioVariant, KlDirection, KlOptions};
use crate::synth::{EngineParams, Label, PredictorMode, SynthesizerSpec};

/// Experiment definition, normally read from a TOML file. Relative paths
/// are resolved against the file's directory.
///
/// ```toml
/// seed = 2024
/// k = 5                       # repetitions per (synthesizer, m)
/// m = [1, 3, 5]
/// proper = [false, true]      # adds the T variant of every synthesizer
/// rule = "ts"                 # or "tp"
/// level = 0.95
/// out = "results"
/// write_synthetic = true      # keep every synthetic CSV
///
/// [data]
/// path = "data.csv"
/// schema = "schema.toml"
/// missing_tokens = ["", "NA"]
///
/// [preprocess]
/// drop = ["id"]
/// coarsen = [{ column = "edu", map = [["BSc", "higher"], ["MSc", "higher"], ["HS", "school"]] }]
/// head_n = 5000
/// missing_seed = 7
///
/// [[synthesizer]]
/// label = "D"                 # base plus optional order suffix, no T
/// name = "D"                  # report label; defaults to `label`
/// predictors = "simple"       # or "selective" with a `selective` table
/// selective = { y = ["x"] }
/// order = ["y", "x"]          # required for the V suffix
/// k_donors = 5
/// min_leaf = 5
///
/// fits = "fits.toml"          # [[fit]] battery, or inline [[fit]] tables
/// adhoc = "adhoc.toml"        # [[analysis]] battery, or inline [[analysis]]
///
/// [metrics]
/// mean_points = true
/// regression = true
/// kl = true
/// kl_bins = 20
/// kl_smoothing = 0.5          # 0 disables smoothing
/// kl_direction = "orig_syn"   # "syn_orig", "symmetric"
/// kl_normalize = true         # needs an S synthesizer in the grid
/// cio = "own_width"           # or "printed"
/// apo_threshold = 0.9
/// apo_strict = true
/// classification_target = "label"
/// classification_holdout = 0.3
/// ```
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub k: usize,
    pub m: Vec<usize>,
    pub proper: Vec<bool>,
    pub rule: Rule,
    pub level: f64,
    pub out: PathBuf,
    pub write_synthetic: bool,
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub synthesizers: Vec<SynthesizerConfig>,
    pub fits: Vec<FitSpec>,
    pub adhoc: Vec<AdhocSpec>,
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone)]
pub struct DataConfig {
    pub path: PathBuf,
    pub schema: PathBuf,
    pub missing_tokens: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessConfig {
    pub drop: Vec<String>,
    pub coarsen: Vec<LevelMapping>,
    pub head_n: Option<usize>,
    pub missing_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizerConfig {
    pub name: String,
    pub label: Label,
    pub selective: Option<BTreeMap<String, Vec<String>>>,
    pub order: Option<Vec<String>>,
    pub k_donors: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone)]
pub struct MetricsConfig {
    pub mean_points: bool,
    pub regression: bool,
    pub kl: bool,
    pub kl_options: KlOptions,
    pub kl_normalize: bool,
    pub cio: CioVariant,
    pub apo: ApoRule,
    pub classification_target: Option<String>,
    pub classify: ClassifyOptions,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            mean_points: true,
            regression: true,
            kl: true,
            kl_options: KlOptions::default(),
            kl_normalize: true,
            cio: CioVariant::OwnWidth,
            apo: ApoRule::default(),
            classification_target: None,
            classify: ClassifyOptions::default(),
        }
    }
}

/// A grid cell: one synthesizer with its proper flag fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    /// Label written to the report, e.g. `DT`.
    pub spec_label: String,
    pub synthesizer: SynthesizerConfig,
    pub proper: bool,
}

impl GridEntry {
    pub fn is_selective(&self) -> bool {
        self.synthesizer.selective.is_some()
    }

    /// Build the synthesizer for `schema` with the given m and seed.
    pub fn spec(&self, schema: &Schema, m: usize, seed: u64) -> Result<SynthesizerSpec> {
        let s = &self.synthesizer;
        let mode = match &s.selective {
            None => PredictorMode::Simple,
            Some(sets) => {
                let mut map = BTreeMap::new();
                for (target, preds) in sets {
                    let t = schema.index_of(target)?;
                    let p = preds.iter().map(|p| schema.index_of(p)).collect::<Result<Vec<_>>>()?;
                    map.insert(t, p);
                }
                PredictorMode::Selective(map)
            }
        };
        let order = s
            .order
            .as_ref()
            .map(|o| o.iter().map(|n| schema.index_of(n)).collect::<Result<Vec<_>>>())
            .transpose()?;
        let params = EngineParams {
            cart: CartParams {
                min_leaf: s.min_leaf,
                ..CartParams::default()
            },
            k_donors: s.k_donors,
            ..EngineParams::default()
        };
        SynthesizerSpec::from_label(schema, s.label.with_proper(self.proper), order, &mode, m, seed, params)
            .map_err(|e| e.context(format!("synthesizer {}", self.spec_label)))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_k")]
    k: usize,
    m: Vec<usize>,
    #[serde(default = "default_proper")]
    proper: Vec<bool>,
    #[serde(default)]
    rule: Option<String>,
    #[serde(default = "default_level")]
    level: f64,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default = "yes")]
    write_synthetic: bool,
    data: DataDoc,
    #[serde(default)]
    preprocess: PreprocessDoc,
    synthesizer: Vec<SynthesizerDoc>,
    #[serde(default)]
    fits: Option<PathBuf>,
    #[serde(default)]
    fit: Vec<FitSpec>,
    #[serde(default)]
    adhoc: Option<PathBuf>,
    #[serde(default)]
    analysis: Vec<AdhocSpec>,
    #[serde(default)]
    metrics: MetricsDoc,
}

fn default_k() -> usize {
    5
}

fn default_proper() -> Vec<bool> {
    vec![false]
}

fn default_level() -> f64 {
    0.95
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DataDoc {
    path: PathBuf,
    schema: PathBuf,
    #[serde(default)]
    missing_tokens: Option<Vec<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PreprocessDoc {
    #[serde(default)]
    drop: Vec<String>,
    #[serde(default)]
    coarsen: Vec<CoarsenDoc>,
    #[serde(default)]
    head_n: Option<usize>,
    #[serde(default)]
    missing_seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoarsenDoc {
    column: String,
    map: Vec<(String, String)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthesizerDoc {
    label: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    predictors: Option<String>,
    #[serde(default)]
    selective: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default)]
    order: Option<Vec<String>>,
    #[serde(default)]
    k_donors: Option<usize>,
    #[serde(default)]
    min_leaf: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MetricsDoc {
    mean_points: Option<bool>,
    regression: Option<bool>,
    kl: Option<bool>,
    kl_bins: Option<usize>,
    kl_smoothing: Option<f64>,
    kl_direction: Option<String>,
    kl_normalize: Option<bool>,
    cio: Option<String>,
    apo_threshold: Option<f64>,
    apo_strict: Option<bool>,
    classification_target: Option<String>,
    classification_holdout: Option<f64>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| e.context(format!("config {}", path.display())))
    }

    /// Parse a config whose relative paths are relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let doc: ConfigDoc = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let mut fits = doc.fit;
        if let Some(p) = &doc.fits {
            let p = resolve(p);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            fits.extend(parse_fit_specs(&text).map_err(|e| e.context(format!("fits {}", p.display())))?);
        }
        let mut adhoc = doc.analysis;
        if let Some(p) = &doc.adhoc {
            let p = resolve(p);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            adhoc.extend(parse_adhoc_specs(&text).map_err(|e| e.context(format!("adhoc {}", p.display())))?);
        }

        let mut synthesizers = Vec::with_capacity(doc.synthesizer.len());
        for s in doc.synthesizer {
            let label: Label = s.label.parse().map_err(|e: Error| config_err(e.to_string()))?;
            if label.proper {
                return Err(config_err(format!(
                    "synthesizer label {:?} must not carry T; use the `proper` list",
                    s.label
                )));
            }
            let selective = match (s.predictors.as_deref().unwrap_or("simple"), s.selective) {
                ("simple", None) => None,
                ("selective", Some(sets)) => Some(sets),
                ("simple", Some(_)) => {
                    return Err(config_err(format!("synthesizer {:?}: `selective` needs predictors = \"selective\"", s.label)))
                }
                ("selective", None) => {
                    return Err(config_err(format!("synthesizer {:?}: selective predictors need a `selective` table", s.label)))
                }
                (other, _) => return Err(config_err(format!("unknown predictor mode {other:?}"))),
            };
            synthesizers.push(SynthesizerConfig {
                name: s.name.unwrap_or_else(|| label.to_string()),
                label,
                selective,
                order: s.order,
                k_donors: s.k_donors.unwrap_or(5),
                min_leaf: s.min_leaf.unwrap_or(5),
            });
        }

        let md = doc.metrics;
        let defaults = MetricsConfig::default();
        let kl_options = KlOptions {
            bins: md.kl_bins.unwrap_or(defaults.kl_options.bins),
            smoothing: match md.kl_smoothing {
                None => defaults.kl_options.smoothing,
                Some(a) if a == 0.0 => None,
                Some(a) if a > 0.0 => Some(a),
                Some(a) => return Err(config_err(format!("kl_smoothing {a} is negative"))),
            },
            direction: match md.kl_direction.as_deref() {
                None | Some("orig_syn") => KlDirection::OrigSyn,
                Some("syn_orig") => KlDirection::SynOrig,
                Some("symmetric") => KlDirection::Symmetric,
                Some(other) => return Err(config_err(format!("unknown kl_direction {other:?}"))),
            },
        };
        let metrics = MetricsConfig {
            mean_points: md.mean_points.unwrap_or(true),
            regression: md.regression.unwrap_or(true),
            kl: md.kl.unwrap_or(true),
            kl_options,
            kl_normalize: md.kl_normalize.unwrap_or(true),
            cio: match md.cio.as_deref() {
                None | Some("own_width") => CioVariant::OwnWidth,
                Some("printed") => CioVariant::Printed,
                Some(other) => return Err(config_err(format!("unknown cio variant {other:?}"))),
            },
            apo: ApoRule {
                threshold: md.apo_threshold.unwrap_or(0.9),
                strict: md.apo_strict.unwrap_or(true),
            },
            classification_target: md.classification_target,
            classify: ClassifyOptions {
                holdout: md.classification_holdout,
                ..ClassifyOptions::default()
            },
        };

        let cfg = ExperimentConfig {
            seed: doc.seed,
            k: doc.k,
            m: doc.m,
            proper: doc.proper,
            rule: match doc.rule.as_deref() {
                None | Some("ts") => Rule::Ts,
                Some("tp") => Rule::Tp,
                Some(other) => return Err(config_err(format!("unknown combining rule {other:?}"))),
            },
            level: doc.level,
            out: resolve(&doc.out.unwrap_or_else(|| PathBuf::from("results"))),
            write_synthetic: doc.write_synthetic,
            data: DataConfig {
                path: resolve(&doc.data.path),
                schema: resolve(&doc.data.schema),
                missing_tokens: doc
                    .data
                    .missing_tokens
                    .unwrap_or_else(|| crate::data::DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()),
            },
            preprocess: PreprocessConfig {
                drop: doc.preprocess.drop,
                coarsen: doc
                    .preprocess
                    .coarsen
                    .into_iter()
                    .map(|c| LevelMapping::new(c.column, c.map))
                    .collect(),
                head_n: doc.preprocess.head_n,
                missing_seed: doc.preprocess.missing_seed,
            },
            synthesizers,
            fits,
            adhoc,
            metrics,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(config_err("k must be at least 1"));
        }
        if self.m.is_empty() || self.m.contains(&0) {
            return Err(config_err("m must be a non-empty list of positive counts"));
        }
        if self.proper.is_empty() {
            return Err(config_err("proper must list at least one of true/false"));
        }
        if self.rule == Rule::Tp && self.m.contains(&1) {
            return Err(config_err("the tp rule is undefined for m = 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(config_err(format!("level {} is outside (0, 1)", self.level)));
        }
        if self.synthesizers.is_empty() {
            return Err(config_err("no synthesizers configured"));
        }
        let mut seen = HashSet::new();
        for e in self.grid() {
            if !seen.insert(e.spec_label.clone()) {
                return Err(config_err(format!("grid label {:?} appears twice", e.spec_label)));
            }
        }
        if self.metrics.kl && self.metrics.kl_normalize {
            for &p in &self.proper {
                if !self.grid().iter().any(|e| e.proper == p && is_sample(e)) {
                    return Err(config_err(
                        "KL normalization needs a plain S synthesizer in the grid for every proper setting",
                    ));
                }
            }
        }
        if self.metrics.kl && self.metrics.kl_options.bins < 2 {
            return Err(config_err("kl_bins must be at least 2"));
        }
        if !self.metrics.mean_points && !self.metrics.regression {
            return Err(config_err("at least one of mean_points and regression must be on"));
        }
        Ok(())
    }

    /// Synthesizers crossed with the proper settings, in config order.
    pub fn grid(&self) -> Vec<GridEntry> {
        let mut out = Vec::new();
        for s in &self.synthesizers {
            for &proper in &self.proper {
                out.push(GridEntry {
                    spec_label: if proper { format!("{}T", s.name) } else { s.name.clone() },
                    synthesizer: s.clone(),
                    proper,
                });
            }
        }
        out
    }

    pub fn find_entry(&self, spec_label: &str) -> Result<GridEntry> {
        self.grid()
            .into_iter()
            .find(|e| e.spec_label == spec_label)
            .ok_or_else(|| config_err(format!("no synthesizer {spec_label:?} in the grid")))
    }

    /// Load the dataset and apply drop, coarsen, head_n and missing-value
    /// replacement, in that order.
    pub fn load_original(&self) -> Result<Dataset> {
        let decl = SchemaDecl::from_path(&self.data.schema)?;
        let tokens: Vec<&str> = self.data.missing_tokens.iter().map(String::as_str).collect();
        let mut ds = load_csv(&self.data.path, &decl, &tokens)?;
        for col in &self.preprocess.drop {
            ds = drop_column(&ds, col)?;
        }
        for map in &self.preprocess.coarsen {
            ds = coarsen_levels(&ds, map)?;
        }
        if let Some(n) = self.preprocess.head_n {
            ds = head_n(&ds, n)?;
        }
        replace_missing(&ds, self.preprocess.missing_seed.unwrap_or(self.seed))
    }
}

/// The plain Sample synthesizer, used as the KL baseline.
pub(crate) fn is_sample(e: &GridEntry) -> bool {
    e.synthesizer.label == "S".parse::<Label>().expect("valid label") && e.synthesizer.selective.is_none()
}
