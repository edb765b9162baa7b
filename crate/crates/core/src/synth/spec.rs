use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::data::{ColumnKind, Schema};
use crate::error::{Error, Result};
use crate::fit::{CartParams, NewtonOptions};

/// How a single variable is synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sample,
    ParametricNumeric,
    ParametricCategorical,
    Cart,
    Pmm,
    CatallGroup,
}

impl Method {
    fn allowed_on(self, kind: &ColumnKind) -> bool {
        match self {
            Method::Sample | Method::Cart => true,
            Method::ParametricNumeric | Method::Pmm => kind.is_numeric(),
            Method::ParametricCategorical | Method::CatallGroup => !kind.is_numeric(),
        }
    }
}

/// Synthesizer family, the first part of a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    /// Linear / logistic regression.
    Parametric,
    /// CART everywhere.
    Cart,
    /// Saturated joint table for categoricals, PMM for numerics.
    CatallPmm,
    /// Saturated joint table for categoricals, CART for numerics.
    CatallCart,
    /// Independent column resampling.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrderSuffix {
    Original,
    Opposite,
    Own,
    LargestFirst,
    LargestLast,
}

/// Synthesizer label: base, optional order suffix (O, V, H, L) and an
/// optional trailing T for proper synthesis. E.g. `D`, `POT`, `CCT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub base: Base,
    pub order: OrderSuffix,
    pub proper: bool,
}

impl Label {
    pub fn new(base: Base, order: OrderSuffix, proper: bool) -> Self {
        Label {
            base,
            order,
            proper,
        }
    }

    pub fn with_proper(self, proper: bool) -> Self {
        Label { proper, ..self }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, rest) = if let Some(r) = s.strip_prefix("CP") {
            (Base::CatallPmm, r)
        } else if let Some(r) = s.strip_prefix("CC") {
            (Base::CatallCart, r)
        } else if let Some(r) = s.strip_prefix('P') {
            (Base::Parametric, r)
        } else if let Some(r) = s.strip_prefix('D') {
            (Base::Cart, r)
        } else if let Some(r) = s.strip_prefix('S') {
            (Base::Sample, r)
        } else {
            return Err(Error::Spec(format!("label {s:?} has no known base")));
        };
        let mut chars = rest.chars().peekable();
        let order = match chars.peek() {
            Some('O') => OrderSuffix::Opposite,
            Some('V') => OrderSuffix::Own,
            Some('H') => OrderSuffix::LargestFirst,
            Some('L') => OrderSuffix::LargestLast,
            _ => OrderSuffix::Original,
        };
        if order != OrderSuffix::Original {
            chars.next();
        }
        let proper = chars.peek() == Some(&'T');
        if proper {
            chars.next();
        }
        if chars.next().is_some() {
            return Err(Error::Spec(format!("label {s:?} has trailing characters")));
        }
        Ok(Label {
            base,
            order,
            proper,
        })
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.base {
            Base::Parametric => "P",
            Base::Cart => "D",
            Base::CatallPmm => "CP",
            Base::CatallCart => "CC",
            Base::Sample => "S",
        })?;
        f.write_str(match self.order {
            OrderSuffix::Original => "",
            OrderSuffix::Opposite => "O",
            OrderSuffix::Own => "V",
            OrderSuffix::LargestFirst => "H",
            OrderSuffix::LargestLast => "L",
        })?;
        if self.proper {
            f.write_str("T")?;
        }
        Ok(())
    }
}

/// A permutation of column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitSequence(Vec<usize>);

impl VisitSequence {
    pub fn new(order: Vec<usize>, p: usize) -> Result<Self> {
        let mut seen = vec![false; p];
        if order.len() != p {
            return Err(Error::Spec(format!(
                "visit sequence has {} entries for {p} columns",
                order.len()
            )));
        }
        for &i in &order {
            if i >= p || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Spec(format!("{order:?} is not a permutation of 0..{p}")));
            }
        }
        Ok(VisitSequence(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Position of each column in the sequence.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &c) in self.0.iter().enumerate() {
            pos[c] = i;
        }
        pos
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderKind {
    Original,
    Opposite,
    Own(Vec<usize>),
    LargestCatFirst,
    LargestCatLast,
}

pub fn make_order(schema: &Schema, kind: &OrderKind) -> Result<VisitSequence> {
    let p = schema.len();
    let largest = || -> Result<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in schema.columns().iter().enumerate() {
            if let Some(n) = c.kind.n_levels() {
                if best.is_none_or(|(_, bn)| n > bn) {
                    best = Some((i, n));
                }
            }
        }
        best.map(|(i, _)| i)
            .ok_or_else(|| Error::Spec("order needs at least one categorical column".into()))
    };
    let order = match kind {
        OrderKind::Original => (0..p).collect(),
        OrderKind::Opposite => (0..p).rev().collect(),
        OrderKind::Own(list) => list.clone(),
        OrderKind::LargestCatFirst => {
            let l = largest()?;
            std::iter::once(l).chain((0..p).filter(|&i| i != l)).collect()
        }
        OrderKind::LargestCatLast => {
            let l = largest()?;
            (0..p).filter(|&i| i != l).chain(std::iter::once(l)).collect()
        }
    };
    VisitSequence::new(order, p)
}

/// Square boolean matrix; `get(i, j)` means column j predicts column i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorMatrix {
    p: usize,
    cells: Vec<bool>,
}

impl PredictorMatrix {
    pub fn empty(p: usize) -> Self {
        PredictorMatrix {
            p,
            cells: vec![false; p * p],
        }
    }

    pub fn get(&self, target: usize, predictor: usize) -> bool {
        self.cells[target * self.p + predictor]
    }

    pub fn set(&mut self, target: usize, predictor: usize, on: bool) {
        self.cells[target * self.p + predictor] = on;
    }

    pub fn size(&self) -> usize {
        self.p
    }

    /// Predictors of `target`, ascending by column index.
    pub fn row(&self, target: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.get(target, j)).collect()
    }

    pub fn clear_row(&mut self, target: usize) {
        for j in 0..self.p {
            self.set(target, j, false);
        }
    }

    pub fn validate(&self, visit: &VisitSequence) -> Result<()> {
        if self.p != visit.len() {
            return Err(Error::Spec("predictor matrix size does not match visit sequence".into()));
        }
        let pos = visit.positions();
        for i in 0..self.p {
            for j in 0..self.p {
                if self.get(i, j) && pos[j] >= pos[i] {
                    return Err(Error::Spec(format!(
                        "column {j} cannot predict column {i}: it is not visited earlier"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorMode {
    /// Every earlier-visited column predicts.
    Simple,
    /// Only the listed predictors, per target column; unlisted targets get none.
    Selective(BTreeMap<usize, Vec<usize>>),
}

pub fn make_predictors(visit: &VisitSequence, mode: &PredictorMode) -> Result<PredictorMatrix> {
    let p = visit.len();
    let mut m = PredictorMatrix::empty(p);
    match mode {
        PredictorMode::Simple => {
            let order = visit.as_slice();
            for (i, &target) in order.iter().enumerate() {
                for &pred in &order[..i] {
                    m.set(target, pred, true);
                }
            }
        }
        PredictorMode::Selective(sets) => {
            for (&target, preds) in sets {
                if target >= p {
                    return Err(Error::Spec(format!("selective target {target} out of range")));
                }
                for &pred in preds {
                    if pred >= p {
                        return Err(Error::Spec(format!("selective predictor {pred} out of range")));
                    }
                    m.set(target, pred, true);
                }
            }
        }
    }
    m.validate(visit)?;
    Ok(m)
}

/// Model settings shared by every variable of a synthesizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    pub cart: CartParams,
    pub k_donors: usize,
    pub newton: NewtonOptions,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            cart: CartParams::default(),
            k_donors: 5,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizerSpec {
    methods: Vec<Method>,
    visit: VisitSequence,
    predictors: PredictorMatrix,
    proper: bool,
    m: usize,
    seed: u64,
    label: Label,
    params: EngineParams,
}

impl SynthesizerSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        schema: &Schema,
        methods: Vec<Method>,
        visit: VisitSequence,
        predictors: PredictorMatrix,
        proper: bool,
        m: usize,
        seed: u64,
        label: Label,
        params: EngineParams,
    ) -> Result<Self> {
        let p = schema.len();
        if methods.len() != p {
            return Err(Error::Spec(format!("{} methods for {p} columns", methods.len())));
        }
        if m < 1 {
            return Err(Error::Spec("m must be at least 1".into()));
        }
        if visit.len() != p {
            return Err(Error::Spec("visit sequence does not cover the schema".into()));
        }
        for (c, method) in schema.columns().iter().zip(&methods) {
            if !method.allowed_on(&c.kind) {
                return Err(Error::Spec(format!(
                    "method {method:?} cannot synthesize {} column {:?}",
                    c.kind.name(),
                    c.name
                )));
            }
        }
        predictors.validate(&visit)?;
        let group: Vec<usize> = visit
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &c)| methods[c] == Method::CatallGroup)
            .map(|(i, _)| i)
            .collect();
        if group.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Spec(
                "catall group members must be contiguous in the visit sequence".into(),
            ));
        }
        if params.k_donors < 1 {
            return Err(Error::Spec("k_donors must be at least 1".into()));
        }
        if label.proper != proper {
            return Err(Error::Spec(format!("label {label} disagrees with proper = {proper}")));
        }
        let mut predictors = predictors;
        for (c, method) in methods.iter().enumerate() {
            if *method == Method::CatallGroup {
                predictors.clear_row(c);
            }
        }
        Ok(SynthesizerSpec {
            methods,
            visit,
            predictors,
            proper,
            m,
            seed,
            label,
            params,
        })
    }

    /// Build the synthesizer a label names. `own_order` is required for the
    /// V suffix.
    pub fn from_label(
        schema: &Schema,
        label: Label,
        own_order: Option<Vec<usize>>,
        mode: &PredictorMode,
        m: usize,
        seed: u64,
        params: EngineParams,
    ) -> Result<Self> {
        let kind = match label.order {
            OrderSuffix::Original => OrderKind::Original,
            OrderSuffix::Opposite => OrderKind::Opposite,
            OrderSuffix::Own => OrderKind::Own(own_order.ok_or_else(|| {
                Error::Spec(format!("label {label} needs an explicit own order"))
            })?),
            OrderSuffix::LargestFirst => OrderKind::LargestCatFirst,
            OrderSuffix::LargestLast => OrderKind::LargestCatLast,
        };
        let methods: Vec<Method> = schema
            .columns()
            .iter()
            .map(|c| match (label.base, c.kind.is_numeric()) {
                (Base::Sample, _) => Method::Sample,
                (Base::Cart, _) => Method::Cart,
                (Base::Parametric, true) => Method::ParametricNumeric,
                (Base::Parametric, false) => Method::ParametricCategorical,
                (Base::CatallPmm, true) => Method::Pmm,
                (Base::CatallCart, true) => Method::Cart,
                (Base::CatallPmm | Base::CatallCart, false) => Method::CatallGroup,
            })
            .collect();
        let mut visit = make_order(schema, &kind)?;
        // gather the catall group at its first member's position
        if let Some(first) = visit
            .as_slice()
            .iter()
            .position(|&c| methods[c] == Method::CatallGroup)
        {
            let order = visit.as_slice();
            let (group, others): (Vec<usize>, Vec<usize>) =
                order.iter().partition(|&&c| methods[c] == Method::CatallGroup);
            let mut merged = others[..first].to_vec();
            merged.extend(group);
            merged.extend_from_slice(&others[first..]);
            visit = VisitSequence::new(merged, schema.len())?;
        }
        let predictors = make_predictors(&visit, mode)?;
        Self::new(
            schema,
            methods,
            visit,
            predictors,
            label.proper,
            m,
            seed,
            label,
            params,
        )
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn visit(&self) -> &VisitSequence {
        &self.visit
    }

    pub fn predictors(&self) -> &PredictorMatrix {
        &self.predictors
    }

    pub fn proper(&self) -> bool {
        self.proper
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn with_m(mut self, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::Spec("m must be at least 1".into()));
        }
        self.m = m;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Columns drawn jointly from the saturated table, in visit order.
    pub fn catall_group(&self) -> Vec<usize> {
        self.visit
            .as_slice()
            .iter()
            .copied()
            .filter(|&c| self.methods[c] == Method::CatallGroup)
            .collect()
    }
}
