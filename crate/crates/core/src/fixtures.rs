//! Seeded generators for the small datasets used in tests, benchmarks and
//! the example configuration.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Column, ColumnKind, ColumnSpec, Dataset, Schema};
use crate::rng;

fn categorical(name: &str, levels: &[&str]) -> ColumnSpec {
    ColumnSpec {
        name: name.to_string(),
        kind: ColumnKind::categorical(levels.iter().copied()).expect("fixture levels are valid"),
    }
}

fn numeric(name: &str) -> ColumnSpec {
    ColumnSpec {
        name: name.to_string(),
        kind: ColumnKind::Numeric,
    }
}

/// Columns: `x ~ Uniform(0, 10)`, `y = 2x + N(0, 1)`, `a` (3 levels),
/// `b` equal to `a` with probability 0.85 and the next level otherwise, and
/// `band` (4 levels) a noisy bucketing of `x`.
pub fn fixture_a(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[0xA]);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut band = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = r.random_range(0.0..10.0);
        let e: f64 = StandardNormal.sample(&mut r);
        let ai: u32 = r.random_range(0..3);
        let bi = if r.random_bool(0.85) { ai } else { (ai + 1) % 3 };
        let jitter: f64 = StandardNormal.sample(&mut r);
        let bucket = ((xi + 0.8 * jitter) / 2.5).floor().clamp(0.0, 3.0) as u32;
        x.push(xi);
        y.push(2.0 * xi + e);
        a.push(ai);
        b.push(bi);
        band.push(bucket);
    }
    let schema = Schema::new(vec![
        numeric("x"),
        numeric("y"),
        categorical("a", &["a1", "a2", "a3"]),
        categorical("b", &["b1", "b2", "b3"]),
        categorical("band", &["low", "mid", "high", "top"]),
    ])
    .expect("fixture schema is valid");
    Dataset::new(
        schema,
        vec![
            Column::Numeric(x),
            Column::Numeric(y),
            Column::Categorical(a),
            Column::Categorical(b),
            Column::Categorical(band),
        ],
    )
    .expect("fixture columns match the schema")
}

/// Balanced binary `label` determined by `signal > 0`, plus a numeric and a
/// categorical noise column.
pub fn label_fixture(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[0xB]);
    let mut signal = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    let mut colour = Vec::with_capacity(n);
    let mut label = Vec::with_capacity(n);
    for _ in 0..n {
        let s: f64 = r.random_range(-1.0..1.0);
        signal.push(s);
        noise.push(StandardNormal.sample(&mut r));
        colour.push(r.random_range(0..3));
        label.push(u32::from(s > 0.0));
    }
    let schema = Schema::new(vec![
        numeric("signal"),
        numeric("noise"),
        categorical("colour", &["red", "green", "blue"]),
        categorical("label", &["no", "yes"]),
    ])
    .expect("fixture schema is valid");
    Dataset::new(
        schema,
        vec![
            Column::Numeric(signal),
            Column::Numeric(noise),
            Column::Categorical(colour),
            Column::Categorical(label),
        ],
    )
    .expect("fixture columns match the schema")
}
