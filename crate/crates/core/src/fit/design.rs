use nalgebra::DMatrix;

use super::{check_row, Feature};
use crate::data::Value;
use crate::error::Result;

/// One column of the encoded design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Intercept,
    Numeric { source: usize },
    /// Indicator for `level` of a categorical source; level 0 is the
    /// dropped reference.
    Level { source: usize, level: u32 },
}

/// Intercept, raw numerics and reference-coded one-hot categoricals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignEncoding {
    layout: Vec<Option<usize>>,
    terms: Vec<Term>,
}

impl DesignEncoding {
    pub fn new(layout: Vec<Option<usize>>) -> Self {
        let mut terms = vec![Term::Intercept];
        for (source, kind) in layout.iter().enumerate() {
            match kind {
                None => terms.push(Term::Numeric { source }),
                Some(n) => terms.extend((1..*n as u32).map(|level| Term::Level { source, level })),
            }
        }
        DesignEncoding { layout, terms }
    }

    pub fn for_features(features: &[Feature<'_>]) -> Self {
        Self::new(features.iter().map(Feature::layout).collect())
    }

    pub fn layout(&self) -> &[Option<usize>] {
        &self.layout
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn encode_row(&self, row: &[Value]) -> Result<Vec<f64>> {
        check_row(&self.layout, row)?;
        Ok(self.encode_unchecked(|s| row[s]))
    }

    fn encode_unchecked(&self, value: impl Fn(usize) -> Value) -> Vec<f64> {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Intercept => 1.0,
                Term::Numeric { source } => value(source).num().unwrap_or(f64::NAN),
                Term::Level { source, level } => {
                    if value(source).cat() == Some(level) {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    }

    /// n × p design matrix for the given features (same layout assumed).
    pub fn matrix(&self, features: &[Feature<'_>]) -> DMatrix<f64> {
        let n = features.first().map_or(0, Feature::len);
        let mut x = DMatrix::zeros(n, self.width());
        for (j, t) in self.terms.iter().enumerate() {
            match *t {
                Term::Intercept => x.column_mut(j).fill(1.0),
                Term::Numeric { source } => {
                    if let Feature::Numeric(v) = features[source] {
                        for (i, &val) in v.iter().enumerate() {
                            x[(i, j)] = val;
                        }
                    }
                }
                Term::Level { source, level } => {
                    if let Feature::Categorical { codes, .. } = features[source] {
                        for (i, &c) in codes.iter().enumerate() {
                            if c == level {
                                x[(i, j)] = 1.0;
                            }
                        }
                    }
                }
            }
        }
        x
    }

    /// Human-readable term names, given source names and level labels.
    pub fn term_names(&self, names: &[&str], levels: &[Option<&[String]>]) -> Vec<String> {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Intercept => "(Intercept)".to_string(),
                Term::Numeric { source } => names[source].to_string(),
                Term::Level { source, level } => match levels[source] {
                    Some(l) => format!("{}={}", names[source], l[level as usize]),
                    None => format!("{}={level}", names[source]),
                },
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_level_is_dropped() {
        let enc = DesignEncoding::new(vec![None, Some(3)]);
        assert_eq!(enc.width(), 4);
        assert_eq!(
            enc.encode_row(&[Value::Num(2.5), Value::Cat(2)]).unwrap(),
            vec![1.0, 2.5, 0.0, 1.0]
        );
        assert_eq!(
            enc.encode_row(&[Value::Num(2.5), Value::Cat(0)]).unwrap(),
            vec![1.0, 2.5, 0.0, 0.0]
        );
        let levels = ["a".to_string(), "b".to_string(), "c".to_string()];
        assert_eq!(
            enc.term_names(&["x", "g"], &[None, Some(&levels)]),
            ["(Intercept)", "x", "g=b", "g=c"]
        );
    }

    #[test]
    fn matrix_matches_rows() {
        let x = [1.0, 2.0, 3.0];
        let g = [0u32, 1, 1];
        let feats = [
            Feature::Numeric(&x),
            Feature::Categorical {
                codes: &g,
                n_levels: 2,
            },
        ];
        let enc = DesignEncoding::for_features(&feats);
        let m = enc.matrix(&feats);
        for i in 0..3 {
            let row = enc
                .encode_row(&[Value::Num(x[i]), Value::Cat(g[i])])
                .unwrap();
            assert_eq!(m.row(i).iter().copied().collect::<Vec<_>>(), row);
        }
    }
}
