use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

impl ColumnKind {
    pub fn categorical<S: Into<String>>(levels: impl IntoIterator<Item = S>) -> Result<Self> {
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        check_levels(&levels)?;
        Ok(ColumnKind::Categorical { levels })
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnKind::Numeric)
    }

    pub fn n_levels(&self) -> Option<usize> {
        match self {
            ColumnKind::Numeric => None,
            ColumnKind::Categorical { levels } => Some(levels.len()),
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match self {
            ColumnKind::Numeric => None,
            ColumnKind::Categorical { levels } => Some(levels),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical { .. } => "categorical",
        }
    }
}

pub(crate) fn check_levels(levels: &[String]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Schema("categorical level set must be non-empty".into()));
    }
    let mut seen = HashSet::new();
    for l in levels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Schema(format!("duplicate level {l:?}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Schema("schema must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", c.name)));
            }
            if let Some(levels) = c.kind.levels() {
                check_levels(levels).map_err(|e| Error::Schema(format!("column {:?}: {e}", c.name)))?;
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, idx: usize) -> &ColumnSpec {
        &self.columns[idx]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub(crate) fn into_columns(self) -> Vec<ColumnSpec> {
        self.columns
    }
}

/// How a column's levels are declared in a schema document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclaredKind {
    Numeric,
    Categorical { levels: Vec<String> },
    /// Levels are collected from the data in first-appearance order.
    CategoricalInfer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: DeclaredKind,
}

/// A schema as written by the user, before level inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDecl {
    pub columns: Vec<ColumnDecl>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    column: Vec<ColumnDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnDoc {
    name: String,
    kind: String,
    #[serde(default)]
    levels: Option<Vec<String>>,
    #[serde(default)]
    infer: bool,
}

impl SchemaDecl {
    pub fn numeric(names: &[&str]) -> Self {
        SchemaDecl {
            columns: names
                .iter()
                .map(|n| ColumnDecl {
                    name: n.to_string(),
                    kind: DeclaredKind::Numeric,
                })
                .collect(),
        }
    }

    pub fn from_schema(schema: &Schema) -> Self {
        SchemaDecl {
            columns: schema
                .columns()
                .iter()
                .map(|c| ColumnDecl {
                    name: c.name.clone(),
                    kind: match &c.kind {
                        ColumnKind::Numeric => DeclaredKind::Numeric,
                        ColumnKind::Categorical { levels } => DeclaredKind::Categorical {
                            levels: levels.clone(),
                        },
                    },
                })
                .collect(),
        }
    }

    /// Parse the TOML schema grammar:
    ///
    /// ```toml
    /// [[column]]
    /// name = "age"
    /// kind = "numeric"
    ///
    /// [[column]]
    /// name = "sex"
    /// kind = "categorical"
    /// levels = ["F", "M"]   # or: infer = true
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: SchemaDoc =
            toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        let mut columns = Vec::with_capacity(doc.column.len());
        for c in doc.column {
            let kind = match (c.kind.as_str(), c.levels, c.infer) {
                ("numeric", None, false) => DeclaredKind::Numeric,
                ("numeric", _, _) => {
                    return Err(Error::Schema(format!(
                        "numeric column {:?} cannot declare levels",
                        c.name
                    )))
                }
                ("categorical", Some(levels), false) => {
                    check_levels(&levels)
                        .map_err(|e| Error::Schema(format!("column {:?}: {e}", c.name)))?;
                    DeclaredKind::Categorical { levels }
                }
                ("categorical", None, true) => DeclaredKind::CategoricalInfer,
                ("categorical", _, _) => {
                    return Err(Error::Schema(format!(
                        "categorical column {:?} needs exactly one of `levels` or `infer = true`",
                        c.name
                    )))
                }
                (other, _, _) => {
                    return Err(Error::Schema(format!(
                        "column {:?}: unknown kind {other:?}",
                        c.name
                    )))
                }
            };
            columns.push(ColumnDecl { name: c.name, kind });
        }
        if columns.is_empty() {
            return Err(Error::Schema("schema must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", c.name)));
            }
        }
        Ok(SchemaDecl { columns })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Schema(message) => Error::Document {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}
