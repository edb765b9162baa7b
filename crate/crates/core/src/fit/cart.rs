//! Greedy binary CART with leaf donor lists.
//!
//! Numeric targets split on SSE reduction, categorical targets on Gini
//! reduction. Leaves keep the training row indices that reached them so
//! synthesis can draw an observed value from the leaf.

use rand::Rng;

use super::{check_equal_rows, check_row, Feature};
use crate::data::Value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartParams {
    pub min_leaf: usize,
    /// A split is taken only if its impurity reduction is at least this.
    pub min_gain: f64,
    /// Categorical predictors with at most this many levels present in a
    /// node get an exhaustive subset search.
    pub max_exhaustive_levels: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            min_leaf: 5,
            min_gain: 0.0,
            max_exhaustive_levels: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule {
    /// Left when `x <= threshold`.
    Threshold(f64),
    /// Left when the level's flag is set.
    Levels(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
    },
    Leaf {
        donors: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartTree {
    nodes: Vec<Node>,
    layout: Vec<Option<usize>>,
    n_train: usize,
    min_leaf: usize,
}

/// Target column a tree is grown for.
#[derive(Debug, Clone, Copy)]
enum Response<'a> {
    Numeric(&'a [f64]),
    Categorical(&'a [u32], usize),
}

impl CartTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn layout(&self) -> &[Option<usize>] {
        &self.layout
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn min_leaf(&self) -> usize {
        self.min_leaf
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[usize]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { donors } => Some(donors.as_slice()),
            Node::Split { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Index of the leaf node `x_row` falls into.
    pub fn leaf_of(&self, x_row: &[Value]) -> Result<usize> {
        check_row(&self.layout, x_row)?;
        Ok(self.route(|f| x_row[f]))
    }

    pub(crate) fn route(&self, value: impl Fn(usize) -> Value) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => {
                    let go_left = match (rule, value(*feature)) {
                        (SplitRule::Threshold(t), Value::Num(x)) => x <= *t,
                        (SplitRule::Levels(set), Value::Cat(c)) => {
                            set.get(c as usize).copied().unwrap_or(false)
                        }
                        _ => false,
                    };
                    at = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn donors(&self, x_row: &[Value]) -> Result<&[usize]> {
        match &self.nodes[self.leaf_of(x_row)?] {
            Node::Leaf { donors } => Ok(donors),
            Node::Split { .. } => unreachable!("route ends at a leaf"),
        }
    }
}


/// Grow a tree for `y`, which is either numeric or categorical.
pub fn fit_cart(x: &[Feature<'_>], y: Feature<'_>, params: CartParams) -> Result<CartTree> {
    match y {
        Feature::Numeric(v) => grow(x, Response::Numeric(v), params),
        Feature::Categorical { codes, n_levels } => {
            let k = n_levels.max(codes.iter().map(|&c| c as usize + 1).max().unwrap_or(0));
            grow(x, Response::Categorical(codes, k), params)
        }
    }
}

fn grow(x: &[Feature<'_>], y: Response<'_>, params: CartParams) -> Result<CartTree> {
    let n = match y {
        Response::Numeric(v) => v.len(),
        Response::Categorical(v, _) => v.len(),
    };
    if n == 0 {
        return Err(Error::Fit("cannot grow a tree on empty data".into()));
    }
    if params.min_leaf < 1 {
        return Err(Error::InvalidArgument("min_leaf must be at least 1".into()));
    }
    if n < params.min_leaf {
        return Err(Error::Fit(format!(
            "{n} rows is fewer than min_leaf = {}",
            params.min_leaf
        )));
    }
    check_equal_rows(x, n)?;

    let mut nodes: Vec<Node> = vec![Node::Leaf { donors: Vec::new() }];
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, (0..n).collect())];
    let mut scratch = Scratch::default();
    while let Some((slot, rows)) = stack.pop() {
        match best_split(x, y, &rows, params, &mut scratch) {
            Some(split) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| goes_left(&x[split.feature], &split.rule, r));
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { donors: Vec::new() });
                nodes.push(Node::Leaf { donors: Vec::new() });
                nodes[slot] = Node::Split {
                    feature: split.feature,
                    rule: split.rule,
                    left,
                    right,
                };
                stack.push((right, right_rows));
                stack.push((left, left_rows));
            }
            None => nodes[slot] = Node::Leaf { donors: rows },
        }
    }
    Ok(CartTree {
        nodes,
        layout: x.iter().map(Feature::layout).collect(),
        n_train: n,
        min_leaf: params.min_leaf,
    })
}

fn goes_left(f: &Feature<'_>, rule: &SplitRule, row: usize) -> bool {
    match (f, rule) {
        (Feature::Numeric(v), SplitRule::Threshold(t)) => v[row] <= *t,
        (Feature::Categorical { codes, .. }, SplitRule::Levels(set)) => set[codes[row] as usize],
        _ => false,
    }
}

struct Split {
    feature: usize,
    rule: SplitRule,
    gain: f64,
}

/// Sufficient statistics of a set of rows.
#[derive(Clone, Debug)]
enum Stats {
    Numeric { n: f64, sum: f64, sumsq: f64 },
    Counts { n: f64, counts: Vec<f64> },
}

impl Stats {
    fn empty(y: &Response<'_>) -> Stats {
        match y {
            Response::Numeric(_) => Stats::Numeric {
                n: 0.0,
                sum: 0.0,
                sumsq: 0.0,
            },
            Response::Categorical(_, k) => Stats::Counts {
                n: 0.0,
                counts: vec![0.0; *k],
            },
        }
    }

    /// `centre` keeps the numeric sums well conditioned.
    fn add(&mut self, y: &Response<'_>, row: usize, centre: f64, sign: f64) {
        match (self, y) {
            (Stats::Numeric { n, sum, sumsq }, Response::Numeric(v)) => {
                let d = v[row] - centre;
                *n += sign;
                *sum += sign * d;
                *sumsq += sign * d * d;
            }
            (Stats::Counts { n, counts }, Response::Categorical(c, _)) => {
                *n += sign;
                counts[c[row] as usize] += sign;
            }
            _ => unreachable!(),
        }
    }

    fn merge(&mut self, other: &Stats, sign: f64) {
        match (self, other) {
            (
                Stats::Numeric { n, sum, sumsq },
                Stats::Numeric {
                    n: n2,
                    sum: s2,
                    sumsq: q2,
                },
            ) => {
                *n += sign * n2;
                *sum += sign * s2;
                *sumsq += sign * q2;
            }
            (Stats::Counts { n, counts }, Stats::Counts { n: n2, counts: c2 }) => {
                *n += sign * n2;
                for (a, b) in counts.iter_mut().zip(c2) {
                    *a += sign * b;
                }
            }
            _ => unreachable!(),
        }
    }

    fn n(&self) -> f64 {
        match self {
            Stats::Numeric { n, .. } | Stats::Counts { n, .. } => *n,
        }
    }

    /// Total impurity: SSE for numeric, n·Gini for categorical.
    fn impurity(&self) -> f64 {
        match self {
            Stats::Numeric { n, sum, sumsq } => {
                if *n <= 0.0 {
                    0.0
                } else {
                    (sumsq - sum * sum / n).max(0.0)
                }
            }
            Stats::Counts { n, counts } => {
                if *n <= 0.0 {
                    0.0
                } else {
                    (n - counts.iter().map(|c| c * c).sum::<f64>() / n).max(0.0)
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Stats::Numeric { n, sum, .. } => sum / n,
            Stats::Counts { .. } => 0.0,
        }
    }
}

#[derive(Default)]
struct Scratch {
    order: Vec<usize>,
}

fn is_pure(y: &Response<'_>, rows: &[usize]) -> bool {
    match y {
        Response::Numeric(v) => rows.iter().all(|&r| v[r] == v[rows[0]]),
        Response::Categorical(c, _) => rows.iter().all(|&r| c[r] == c[rows[0]]),
    }
}

fn best_split(
    x: &[Feature<'_>],
    y: Response<'_>,
    rows: &[usize],
    params: CartParams,
    scratch: &mut Scratch,
) -> Option<Split> {
    let min_leaf = params.min_leaf;
    if rows.len() < 2 * min_leaf || is_pure(&y, rows) {
        return None;
    }
    let centre = match y {
        Response::Numeric(v) => rows.iter().map(|&r| v[r]).sum::<f64>() / rows.len() as f64,
        Response::Categorical(..) => 0.0,
    };
    let mut total = Stats::empty(&y);
    for &r in rows {
        total.add(&y, r, centre, 1.0);
    }
    let parent = total.impurity();
    let tolerance = 1e-12 * (1.0 + parent);

    let mut best: Option<Split> = None;
    let mut consider = |cand: Split| {
        if best.as_ref().is_none_or(|b| cand.gain > b.gain + tolerance) {
            best = Some(cand);
        }
    };

    for (fi, feature) in x.iter().enumerate() {
        match feature {
            Feature::Numeric(xv) => {
                let order = &mut scratch.order;
                order.clear();
                order.extend_from_slice(rows);
                order.sort_by(|&a, &b| xv[a].total_cmp(&xv[b]).then(a.cmp(&b)));
                let mut left = Stats::empty(&y);
                let mut right = total.clone();
                let mut local: Option<(f64, f64)> = None;
                for i in 1..order.len() {
                    let r = order[i - 1];
                    left.add(&y, r, centre, 1.0);
                    right.add(&y, r, centre, -1.0);
                    if i < min_leaf || order.len() - i < min_leaf {
                        continue;
                    }
                    let (lo, hi) = (xv[order[i - 1]], xv[order[i]]);
                    if lo >= hi {
                        continue;
                    }
                    let gain = parent - left.impurity() - right.impurity();
                    if local.is_none_or(|(g, _)| gain > g + tolerance) {
                        local = Some((gain, lo + (hi - lo) / 2.0));
                    }
                }
                if let Some((gain, threshold)) = local {
                    consider(Split {
                        feature: fi,
                        rule: SplitRule::Threshold(threshold),
                        gain,
                    });
                }
            }
            Feature::Categorical { codes, n_levels } => {
                let n_levels = (*n_levels).max(rows.iter().map(|&r| codes[r] as usize + 1).max().unwrap_or(0));
                let mut per_level: Vec<Stats> = vec![Stats::empty(&y); n_levels];
                for &r in rows {
                    per_level[codes[r] as usize].add(&y, r, centre, 1.0);
                }
                let present: Vec<usize> = (0..n_levels).filter(|&l| per_level[l].n() > 0.0).collect();
                if present.len() < 2 {
                    continue;
                }
                let mut local: Option<(f64, Vec<bool>)> = None;
                let mut evaluate = |members: &[usize]| {
                    let mut left = Stats::empty(&y);
                    for &l in members {
                        left.merge(&per_level[l], 1.0);
                    }
                    let mut right = total.clone();
                    right.merge(&left, -1.0);
                    if (left.n() as usize) < min_leaf || (right.n() as usize) < min_leaf {
                        return;
                    }
                    let gain = parent - left.impurity() - right.impurity();
                    if local.as_ref().is_none_or(|(g, _)| gain > g + tolerance) {
                        let mut set = vec![false; n_levels];
                        for &l in members {
                            set[l] = true;
                        }
                        local = Some((gain, set));
                    }
                };
                if present.len() <= params.max_exhaustive_levels {
                    // subsets containing the first present level; the
                    // complement covers the mirrored partitions
                    let rest = &present[1..];
                    let mut members = Vec::with_capacity(present.len());
                    for mask in 0u32..(1u32 << rest.len()) - 1 {
                        members.clear();
                        members.push(present[0]);
                        members.extend(
                            rest.iter()
                                .enumerate()
                                .filter(|(b, _)| mask & (1 << b) != 0)
                                .map(|(_, &l)| l),
                        );
                        evaluate(&members);
                    }
                } else {
                    let mut ordered = present.clone();
                    let key = |l: usize| -> f64 {
                        match &per_level[l] {
                            s @ Stats::Numeric { .. } => s.mean(),
                            Stats::Counts { n, counts } => {
                                let Stats::Counts { counts: tc, .. } = &total else {
                                    unreachable!()
                                };
                                let majority = argmax(tc);
                                counts[majority] / n
                            }
                        }
                    };
                    ordered.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
                    for cut in 1..ordered.len() {
                        evaluate(&ordered[..cut]);
                    }
                }
                if let Some((gain, set)) = local {
                    consider(Split {
                        feature: fi,
                        rule: SplitRule::Levels(set),
                        gain,
                    });
                }
            }
        }
    }
    best.filter(|b| b.gain >= params.min_gain - tolerance)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Route `x_row` to its leaf and return the target value of a uniformly
/// chosen donor.
pub fn draw_leaf<R: Rng + ?Sized>(
    tree: &CartTree,
    x_row: &[Value],
    training_y: Feature<'_>,
    rng: &mut R,
) -> Result<Value> {
    if training_y.len() != tree.n_train {
        return Err(Error::Layout(format!(
            "tree was grown on {} rows but training target has {}",
            tree.n_train,
            training_y.len()
        )));
    }
    let donors = tree.donors(x_row)?;
    let donor = donors[rng.random_range(0..donors.len())];
    Ok(training_y.value(donor))
}
