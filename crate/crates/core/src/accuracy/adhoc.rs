use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::synth::SyntheticSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Eq,
    Le,
    Ge,
    Lt,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Number(f64),
    Level(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub column: String,
    pub op: Op,
    pub value: Operand,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            Op::Eq => "==",
            Op::Le => "<=",
            Op::Ge => ">=",
            Op::Lt => "<",
            Op::Gt => ">",
        };
        match &self.value {
            Operand::Number(v) => write!(f, "{} {op} {v}", self.column),
            Operand::Level(l) => write!(f, "{} {op} {l}", self.column),
        }
    }
}

/// Conjunction of conditions, optionally negated as a whole.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    pub conditions: Vec<Condition>,
    pub negated: bool,
}

impl Predicate {
    pub fn all(conditions: Vec<Condition>) -> Self {
        Predicate {
            conditions,
            negated: false,
        }
    }

    pub fn negate(&self) -> Self {
        Predicate {
            conditions: self.conditions.clone(),
            negated: !self.negated,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = if self.conditions.is_empty() {
            "true".to_string()
        } else {
            self.conditions.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" and ")
        };
        if self.negated {
            write!(f, "not ({body})")
        } else {
            f.write_str(&body)
        }
    }
}

enum Test<'a> {
    Num(&'a [f64], Op, f64),
    Cat(&'a [u32], u32),
}

fn compile<'a>(ds: &'a Dataset, c: &Condition) -> Result<Test<'a>> {
    let idx = ds.schema().index_of(&c.column)?;
    match (&ds.schema().column(idx).kind, ds.column(idx), &c.value) {
        (ColumnKind::Numeric, Column::Numeric(v), Operand::Number(x)) => Ok(Test::Num(v, c.op, *x)),
        (ColumnKind::Categorical { levels }, Column::Categorical(v), Operand::Level(l)) => {
            if c.op != Op::Eq {
                return Err(Error::Config(format!(
                    "condition on categorical {:?} must use eq",
                    c.column
                )));
            }
            let code = levels.iter().position(|x| x == l).ok_or_else(|| Error::UnknownLevel {
                column: c.column.clone(),
                level: l.clone(),
            })?;
            Ok(Test::Cat(v, code as u32))
        }
        (kind, _, _) => Err(Error::Config(format!(
            "condition {c} does not fit {} column {:?}",
            kind.name(),
            c.column
        ))),
    }
}

/// Share of rows satisfying the predicate.
pub fn adhoc_proportion(ds: &Dataset, predicate: &Predicate) -> Result<f64> {
    let tests = predicate
        .conditions
        .iter()
        .map(|c| compile(ds, c))
        .collect::<Result<Vec<_>>>()?;
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::InvalidArgument("proportion over an empty dataset".into()));
    }
    let hits = (0..n)
        .filter(|&i| {
            let all = tests.iter().all(|t| match *t {
                Test::Num(v, op, x) => match op {
                    Op::Eq => v[i] == x,
                    Op::Le => v[i] <= x,
                    Op::Ge => v[i] >= x,
                    Op::Lt => v[i] < x,
                    Op::Gt => v[i] > x,
                },
                Test::Cat(v, code) => v[i] == code,
            });
            all != predicate.negated
        })
        .count();
    Ok(hits as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdhocSpec {
    pub id: String,
    #[serde(default)]
    pub conditions: Vec<Condition>,
}

impl AdhocSpec {
    pub fn predicate(&self) -> Predicate {
        Predicate::all(self.conditions.clone())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdhocFile {
    #[serde(default)]
    analysis: Vec<AdhocSpec>,
}

/// Parse `[[analysis]]` tables with `id` and
/// `conditions = [{ column, op, value }]`.
pub fn parse_adhoc_specs(text: &str) -> Result<Vec<AdhocSpec>> {
    let file: AdhocFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(file.analysis)
}

pub fn read_adhoc_specs(path: &Path) -> Result<Vec<AdhocSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_adhoc_specs(&text).map_err(|e| e.context(format!("reading {}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdhocResult {
    pub id: String,
    pub description: String,
    pub original: f64,
    /// Per synthesizer label: proportion averaged over its datasets.
    pub synthetic: Vec<(String, f64)>,
    pub deviations: Vec<f64>,
}

pub fn adhoc_results(original: &Dataset, sets: &[&SyntheticSet], specs: &[AdhocSpec]) -> Result<Vec<AdhocResult>> {
    specs
        .iter()
        .map(|spec| {
            let pred = spec.predicate();
            let orig = adhoc_proportion(original, &pred)?;
            let mut synthetic = Vec::with_capacity(sets.len());
            for set in sets {
                if set.datasets.is_empty() {
                    return Err(Error::InvalidArgument(format!("synthetic set {} is empty", set.label)));
                }
                let mut total = 0.0;
                for ds in &set.datasets {
                    total += adhoc_proportion(ds, &pred)?;
                }
                synthetic.push((set.label.clone(), total / set.datasets.len() as f64));
            }
            Ok(AdhocResult {
                id: spec.id.clone(),
                description: pred.to_string(),
                original: orig,
                deviations: synthetic.iter().map(|(_, p)| (p - orig).abs()).collect(),
                synthetic,
            })
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| e.context("ad-hoc analysis"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_csv_str, ColumnDecl, DeclaredKind, SchemaDecl};

    fn four_rows() -> Dataset {
        let decl = SchemaDecl {
            columns: vec![
                ColumnDecl { name: "A".into(), kind: DeclaredKind::Categorical { levels: vec!["x".into(), "y".into()] } },
                ColumnDecl { name: "B".into(), kind: DeclaredKind::Numeric },
            ],
        };
        load_csv_str("A,B\nx,3\nx,7\ny,1\ny,9\n", &decl, &[""]).unwrap()
    }

    fn cond(column: &str, op: Op, value: Operand) -> Condition {
        Condition { column: column.into(), op, value }
    }

    #[test]
    fn proportions() {
        let ds = four_rows();
        assert_eq!(adhoc_proportion(&ds, &Predicate::default()).unwrap(), 1.0);
        let p = Predicate::all(vec![
            cond("A", Op::Eq, Operand::Level("x".into())),
            cond("B", Op::Lt, Operand::Number(5.0)),
        ]);
        assert_eq!(adhoc_proportion(&ds, &p).unwrap(), 0.25);
        assert_eq!(adhoc_proportion(&ds, &p.negate()).unwrap(), 0.75);
        let none = Predicate::all(vec![cond("B", Op::Gt, Operand::Number(100.0))]);
        assert_eq!(adhoc_proportion(&ds, &none).unwrap(), 0.0);
        assert_eq!(p.to_string(), "A == x and B < 5");
    }

    #[test]
    fn invalid_conditions() {
        let ds = four_rows();
        for c in [
            cond("C", Op::Eq, Operand::Number(1.0)),
            cond("A", Op::Eq, Operand::Level("z".into())),
            cond("A", Op::Le, Operand::Level("x".into())),
            cond("B", Op::Eq, Operand::Level("x".into())),
        ] {
            assert!(adhoc_proportion(&ds, &Predicate::all(vec![c])).is_err());
        }
    }

    #[test]
    fn parses_documents() {
        let specs = parse_adhoc_specs(
            r#"
            [[analysis]]
            id = "low_x"
            conditions = [{ column = "A", op = "eq", value = "x" }, { column = "B", op = "le", value = 5 }]
            "#,
        )
        .unwrap();
        assert_eq!(specs[0].conditions[1].value, Operand::Number(5.0));
        assert_eq!(adhoc_proportion(&four_rows(), &specs[0].predicate()).unwrap(), 0.25);
        assert!(parse_adhoc_specs("[[analysis]]\nid='a'\nconditions=[{column='A', op='ne', value=1}]").is_err());
    }
}
