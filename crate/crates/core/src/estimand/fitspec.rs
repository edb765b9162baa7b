use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Logistic,
}

/// A regression whose coefficients are compared between original and
/// synthetic data.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub id: String,
    pub family: Family,
    pub target: String,
    pub predictors: Vec<String>,
}

impl FitSpec {
    pub fn new(id: &str, family: Family, target: &str, predictors: &[&str]) -> Self {
        FitSpec {
            id: id.to_string(),
            family,
            target: target.to_string(),
            predictors: predictors.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitFile {
    #[serde(default)]
    fit: Vec<FitSpec>,
}

/// Parse `[[fit]]` tables: `id`, `family = "linear" | "logistic"`, `target`,
/// `predictors = [...]`.
pub fn parse_fit_specs(text: &str) -> Result<Vec<FitSpec>> {
    let file: FitFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    for f in &file.fit {
        if !seen.insert(f.id.as_str()) {
            return Err(Error::Config(format!("duplicate fit id {:?}", f.id)));
        }
    }
    Ok(file.fit)
}

pub fn read_fit_specs(path: &Path) -> Result<Vec<FitSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fit_specs(&text).map_err(|e| e.context(format!("reading {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_battery() {
        let text = r#"
            [[fit]]
            id = "y_on_x"
            family = "linear"
            target = "y"
            predictors = ["x"]

            [[fit]]
            id = "b_on_a"
            family = "logistic"
            target = "b"
            predictors = ["a", "x"]
        "#;
        let fits = parse_fit_specs(text).unwrap();
        assert_eq!(fits.len(), 2);
        assert_eq!(fits[1], FitSpec::new("b_on_a", Family::Logistic, "b", &["a", "x"]));
        assert!(parse_fit_specs("[[fit]]\nid='a'\nfamily='probit'\ntarget='y'\npredictors=[]").is_err());
        assert!(parse_fit_specs(&format!("{text}\n[[fit]]\nid='y_on_x'\nfamily='linear'\ntarget='y'\npredictors=[]")).is_err());
    }
}
