#![allow(dead_code)]

use std::fs;
use std::path::Path;

use synthkit::data::{write_csv, Dataset, SchemaDecl};
use synthkit::fixtures::fixture_a;

pub const FIXTURE_SCHEMA: &str = r#"
[[column]]
name = "x"
kind = "numeric"

[[column]]
name = "y"
kind = "numeric"

[[column]]
name = "a"
kind = "categorical"
levels = ["a1", "a2", "a3"]

[[column]]
name = "b"
kind = "categorical"
levels = ["b1", "b2", "b3"]

[[column]]
name = "band"
kind = "categorical"
levels = ["low", "mid", "high", "top"]
"#;

pub const FIT_BATTERY: &str = r#"
[[fit]]
id = "y_x"
family = "linear"
target = "y"
predictors = ["x"]

[[fit]]
id = "y_x_a"
family = "linear"
target = "y"
predictors = ["x", "a"]

[[fit]]
id = "x_band"
family = "linear"
target = "x"
predictors = ["band"]

[[fit]]
id = "y_a_b"
family = "linear"
target = "y"
predictors = ["a", "b"]
"#;

/// Write fixture-A, its schema and the fit battery into `dir`; returns the dataset.
pub fn write_fixture(dir: &Path, n: usize, seed: u64) -> Dataset {
    let ds = fixture_a(n, seed);
    write_csv(&ds, &dir.join("data.csv")).unwrap();
    fs::write(dir.join("schema.toml"), FIXTURE_SCHEMA).unwrap();
    fs::write(dir.join("fits.toml"), FIT_BATTERY).unwrap();
    assert_eq!(SchemaDecl::from_toml_str(FIXTURE_SCHEMA).unwrap().columns.len(), 5);
    ds
}

/// Config text over the fixture files with the given synthesizer tables.
pub fn config_text(seed: u64, k: usize, m: &[usize], synthesizers: &[&str], extra: &str) -> String {
    let synth: String = synthesizers
        .iter()
        .map(|s| {
            if s.contains('=') {
                format!("[[synthesizer]]\n{s}\n\n")
            } else {
                format!("[[synthesizer]]\nlabel = \"{s}\"\n\n")
            }
        })
        .collect();
    format!(
        "seed = {seed}\nk = {k}\nm = {m:?}\nout = \"out\"\nfits = \"fits.toml\"\n{extra}\n\n[data]\npath = \"data.csv\"\nschema = \"schema.toml\"\n\n{synth}"
    )
}
