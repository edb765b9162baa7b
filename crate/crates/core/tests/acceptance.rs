//! Acceptance criteria, one check per criterion. Run with
//! `cargo test -p synthkit --test acceptance -- --nocapture` to see the
//! pass/fail lines.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use synthkit::accuracy::{classify_compare, ClassifyOptions};
use synthkit::data::{Column, Dataset};
use synthkit::estimand::{combine, ConfidenceInterval, EstimateSet, Rule};
use synthkit::fit::{draw_class, draw_leaf, fit_cart, fit_logistic, fit_ols, CartParams, DesignEncoding, Feature, LogisticModel, NewtonOptions};
use synthkit::fixtures::{fixture_a, label_fixture};
use synthkit::harness::{run_experiment_on, ExperimentConfig, RunOptions, REPORT_FILE};
use synthkit::metrics::{cio, kl_divergence, KlOptions, UtilityReport};
use synthkit::rng;
use synthkit::synth::{pmm_draw, synthesize, EngineParams, Label, PredictorMode, SynthesizerSpec, SyntheticSet};
use synthkit::data::{ColumnKind, Value};

const SEED: u64 = 20240601;
const FIXTURE_N: usize = 2000;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn iv(lower: f64, upper: f64) -> ConfidenceInterval {
    ConfidenceInterval { lower, upper, level: 0.95, center: 0.5 * (lower + upper) }
}

fn spec(ds: &Dataset, label: &str, m: usize, seed: u64) -> SynthesizerSpec {
    let label: Label = label.parse().unwrap();
    SynthesizerSpec::from_label(ds.schema(), label, None, &PredictorMode::Simple, m, seed, EngineParams::default()).unwrap()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn experiment_config(dir: &Path, k: usize, m: &[usize], synthesizers: &[&str], extra: &str) -> ExperimentConfig {
    std::fs::write(dir.join("fits.toml"), common::FIT_BATTERY).unwrap();
    let text = common::config_text(SEED, k, m, synthesizers, extra);
    ExperimentConfig::parse(&text, dir).unwrap()
}

fn criterion_1() -> Outcome {
    check(cio(&iv(0.0, 1.0), &iv(0.0, 1.0)) == 1.0, "identical intervals")?;
    check(cio(&iv(0.0, 1.0), &iv(2.0, 3.0)) == 0.0, "disjoint intervals")?;
    let half = cio(&iv(0.0, 2.0), &iv(1.0, 3.0));
    check(close(half, 0.5, 1e-12), format!("[0,2]/[1,3] gave {half}"))?;
    let c = combine(&EstimateSet::new("q", vec![1.0, 2.0, 3.0], vec![0.0; 3], 3).unwrap(), Rule::Tp).unwrap();
    check(close(c.b.unwrap(), 1.0, 1e-12) && close(c.t_p.unwrap(), 1.0 / 3.0, 1e-12), format!("{c:?}"))?;
    let one = combine(&EstimateSet::new("q", vec![4.0], vec![0.3], 3).unwrap(), Rule::Ts).unwrap();
    check(one.t_s == 2.0 * one.v_bar, format!("T_s at m=1 is {}", one.t_s))?;
    let p = Column::Categorical(vec![0, 1, 0, 1]);
    let q = Column::Categorical(vec![0, 1, 1, 1]);
    let kind = ColumnKind::categorical(["u", "v"]).unwrap();
    let kl = kl_divergence(&p, &q, &kind, &KlOptions { smoothing: None, ..KlOptions::default() }).unwrap();
    let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
    check(close(kl, want, 1e-9), format!("KL {kl} vs {want}"))?;
    Ok(format!("cio 1/0/{half}, KL {kl:.6}"))
}

fn criterion_2() -> Outcome {
    let mut r = rng::stream(SEED, &[2]);
    for m in [1usize, 2, 5, 10, 50] {
        let q: Vec<f64> = (0..m).map(|_| r.random_range(-10.0..10.0)).collect();
        // multiples of 1/8 keep the oracle's sum of v exact
        let v: Vec<f64> = (0..m).map(|_| r.random_range(0..80) as f64 / 8.0).collect();
        let base = combine(&EstimateSet::new("e", q.clone(), v.clone(), 10).unwrap(), Rule::Ts).unwrap();
        let v_bar = v.iter().sum::<f64>() / m as f64;
        check(base.t_s == (1.0 + 1.0 / m as f64) * v_bar, format!("T_s mismatch at m={m}"))?;
        let mut order: Vec<usize> = (0..m).collect();
        for _ in 0..5 {
            for i in (1..m).rev() {
                order.swap(i, r.random_range(0..=i));
            }
            let qp = order.iter().map(|&i| q[i]).collect();
            let vp = order.iter().map(|&i| v[i]).collect();
            let perm = combine(&EstimateSet::new("e", qp, vp, 10).unwrap(), Rule::Ts).unwrap();
            check(perm == base, format!("permutation changed the result at m={m}"))?;
        }
        if m >= 2 {
            let same = combine(&EstimateSet::new("e", vec![q[0]; m], v.clone(), 10).unwrap(), Rule::Tp).unwrap();
            check(same.b == Some(0.0) && same.t_p == Some(same.v_bar), "equal q_i must give b=0")?;
            let distinct = q.iter().any(|x| *x != q[0]);
            let b = combine(&EstimateSet::new("e", q.clone(), v.clone(), 10).unwrap(), Rule::Tp).unwrap().b.unwrap();
            check((b == 0.0) != distinct, format!("b={b} with distinct={distinct} at m={m}"))?;
        }
    }
    Ok("m in {1,2,5,10,50}".into())
}

fn criterion_3() -> Outcome {
    let ds = fixture_a(FIXTURE_N, SEED);
    let r0 = pearson(ds.numeric(0).unwrap(), ds.numeric(1).unwrap());
    let mut detail = format!("r_orig={r0:.3}");
    for label in ["S", "D", "P"] {
        let set = synthesize(&ds, &spec(&ds, label, 1, SEED)).unwrap();
        let r = pearson(set.datasets[0].numeric(0).unwrap(), set.datasets[0].numeric(1).unwrap());
        detail.push_str(&format!(" {label}:{r:.3}"));
        if label == "S" {
            check(r.abs() < 0.1, format!("S kept correlation {r}"))?;
        } else {
            check((r - r0).abs() < 0.1, format!("{label} correlation {r} vs {r0}"))?;
        }
    }
    let cats = [2usize, 3, 4];
    let tuple = |d: &Dataset, i: usize| -> Vec<u32> { cats.iter().map(|&c| d.categorical(c).unwrap()[i]).collect() };
    let observed: HashSet<Vec<u32>> = (0..ds.n_rows()).map(|i| tuple(&ds, i)).collect();
    let cc = synthesize(&ds, &spec(&ds, "CC", 10, SEED)).unwrap();
    let violations: usize = cc
        .datasets
        .iter()
        .map(|d| (0..d.n_rows()).filter(|&i| !observed.contains(&tuple(d, i))).count())
        .sum();
    check(violations == 0, format!("CC produced {violations} unseen combinations"))?;
    let levels: Vec<HashSet<u32>> = cats.iter().map(|&c| ds.categorical(c).unwrap().iter().copied().collect()).collect();
    for label in ["S", "P", "D", "CP", "CC", "ST", "PT", "DT", "CPT", "CCT"] {
        let set = synthesize(&ds, &spec(&ds, label, 2, SEED)).unwrap();
        for d in &set.datasets {
            for (j, &c) in cats.iter().enumerate() {
                check(d.categorical(c).unwrap().iter().all(|v| levels[j].contains(v)), format!("{label} emitted an unseen level"))?;
            }
        }
    }
    Ok(format!("{detail}; CC violations 0 over m=10"))
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture_a(FIXTURE_N, SEED);
    let mut cfg = experiment_config(dir.path(), 5, &[1, 3, 10], &["D"], "write_synthetic = false\n[metrics]\nkl = false");
    cfg.out = dir.path().join("out");
    let out = run_experiment_on(&cfg, &ds, RunOptions { jobs: 4, resume: false }).unwrap();
    let get = |m: usize, metric: &str| out.report.get("D", m, None, metric, "all").unwrap_or(f64::NAN);
    let (apo1, apo10) = (get(1, "apo90"), get(10, "apo90"));
    let mpe: Vec<(usize, f64)> = [1, 3, 10].iter().map(|&m| (m, get(m, "mpe_apo90"))).collect();
    let detail = format!(
        "APO90 m=1 {apo1:.3}, m=3 {:.3}, m=10 {apo10:.3}; mean-point APO90 {}",
        get(3, "apo90"),
        mpe.iter().map(|(m, v)| format!("m={m} {v:.3}")).collect::<Vec<_>>().join(", ")
    );
    check(apo10 >= apo1, format!("APO90 fell from m=1 to m=10: {detail}"))?;
    let by_three = mpe.iter().filter(|(m, _)| *m <= 3).any(|(_, v)| *v >= 0.9);
    check(by_three, format!("mean-point APO90 below 0.9 through m=3: {detail}"))?;
    Ok(detail)
}

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture_a(FIXTURE_N, SEED);
    let mut cfg = experiment_config(dir.path(), 10, &[1], &["D"], "proper = [false, true]\nwrite_synthetic = false\n[metrics]\nkl = false");
    cfg.out = dir.path().join("out");
    let out = run_experiment_on(&cfg, &ds, RunOptions { jobs: 4, resume: false }).unwrap();
    let d = out.report.get("D", 1, None, "average_cio", "all").unwrap();
    let dt = out.report.get("DT", 1, None, "average_cio", "all").unwrap();
    check(d >= dt, format!("CIO(D)={d:.4} < CIO(DT)={dt:.4}"))?;
    Ok(format!("CIO(D)={d:.4} >= CIO(DT)={dt:.4}"))
}

fn criterion_6() -> Outcome {
    let ds = fixture_a(FIXTURE_N, SEED);
    let cats = [2usize, 3, 4];
    let joint = |sets: &[&Dataset]| -> (HashMap<Vec<u32>, f64>, usize) {
        let mut counts: HashMap<Vec<u32>, f64> = HashMap::new();
        let mut n = 0;
        for d in sets {
            for i in 0..d.n_rows() {
                *counts.entry(cats.iter().map(|&c| d.categorical(c).unwrap()[i]).collect()).or_default() += 1.0;
                n += 1;
            }
        }
        (counts, n)
    };
    let set = synthesize(&ds, &spec(&ds, "CC", 50, SEED)).unwrap();
    let (orig, n_orig) = joint(&[&ds]);
    let refs: Vec<&Dataset> = set.datasets.iter().collect();
    let (syn, n_syn) = joint(&refs);
    check(n_syn == 100_000, format!("{n_syn} draws"))?;
    let keys: HashSet<&Vec<u32>> = orig.keys().chain(syn.keys()).collect();
    let tv = 0.5
        * keys
            .iter()
            .map(|k| (orig.get(*k).unwrap_or(&0.0) / n_orig as f64 - syn.get(*k).unwrap_or(&0.0) / n_syn as f64).abs())
            .sum::<f64>();
    check(tv < 0.02, format!("total variation {tv}"))?;
    Ok(format!("TV distance {tv:.4} over {n_syn} draws"))
}

fn frequencies_match(counts: &[usize], target: &[f64], draws: usize) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for (c, t) in counts.iter().zip(target) {
        worst = worst.max((*c as f64 / draws as f64 - t).abs());
    }
    check(worst <= 0.01, format!("max deviation {worst}"))?;
    Ok(worst)
}

fn criterion_7() -> Outcome {
    const DRAWS: usize = 100_000;
    let mut r = rng::stream(SEED, &[7]);

    let x: Vec<f64> = (0..60).map(|i| (i / 12) as f64 + 0.01 * i as f64).collect();
    let y: Vec<f64> = (0..60).map(f64::from).collect();
    let tree = fit_cart(&[Feature::Numeric(&x)], Feature::Numeric(&y), CartParams::default()).unwrap();
    let row = [Value::Num(x[30])];
    let donors = tree.donors(&row).unwrap().to_vec();
    let mut counts = vec![0usize; donors.len()];
    for _ in 0..DRAWS {
        let v = draw_leaf(&tree, &row, Feature::Numeric(&y), &mut r).unwrap().num().unwrap();
        counts[donors.iter().position(|&d| y[d] == v).unwrap()] += 1;
    }
    let leaf = frequencies_match(&counts, &vec![1.0 / donors.len() as f64; donors.len()], DRAWS)
        .map_err(|e| format!("draw_leaf: {e}"))?;

    let enc = DesignEncoding::new(vec![None]);
    let model = LogisticModel::from_coefficients(enc, vec![0, 1, 2], vec![vec![0.0, 0.0], vec![0.5, 1.0], vec![-0.3, 0.4]]).unwrap();
    let xr = [Value::Num(0.7)];
    let eta = [0.0, 0.5 + 0.7, -0.3 + 0.4 * 0.7];
    let z: f64 = eta.iter().map(|e: &f64| e.exp()).sum();
    let target: Vec<f64> = eta.iter().map(|e| e.exp() / z).collect();
    let mut counts = vec![0usize; 3];
    for _ in 0..DRAWS {
        counts[draw_class(&model, &xr, &mut r).unwrap() as usize] += 1;
    }
    let class = frequencies_match(&counts, &target, DRAWS).map_err(|e| format!("draw_class: {e}"))?;

    let px = [0.0, 0.1, -0.1, 5.0, -5.0, 9.0];
    let py = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
    let feats = [Feature::Numeric(&px)];
    let identity = fit_ols(&feats, &px).unwrap();
    let mut counts = vec![0usize; 3];
    for _ in 0..DRAWS {
        let v = pmm_draw(&identity, &feats, &py, &[Value::Num(0.0)], 3, &mut r).unwrap();
        let slot = py.iter().position(|&c| c == v).unwrap();
        check(slot < 3, format!("pmm_draw picked a far donor {v}"))?;
        counts[slot] += 1;
    }
    let pmm = frequencies_match(&counts, &[1.0 / 3.0; 3], DRAWS).map_err(|e| format!("pmm_draw: {e}"))?;
    Ok(format!("max deviations: leaf {leaf:.4}, class {class:.4}, pmm {pmm:.4}"))
}

fn criterion_8() -> Outcome {
    let mut r = rng::stream(SEED, &[8]);
    let n = 600;
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let g: Vec<u32> = (0..n).map(|_| r.random_range(0..3)).collect();
    let y: Vec<u32> = (0..n)
        .map(|i| {
            let eta = [0.0, 0.8 * x[i] - 0.2, -0.6 * x[i] + 0.3 * g[i] as f64];
            let z: f64 = eta.iter().map(|e| e.exp()).sum();
            let u: f64 = r.random_range(0.0..z);
            let mut acc = 0.0;
            eta.iter().position(|e| { acc += e.exp(); u < acc }).unwrap_or(2) as u32
        })
        .collect();
    let feats = [Feature::Numeric(&x), Feature::Categorical { codes: &g, n_levels: 3 }];
    let model = fit_logistic(&feats, &y, NewtonOptions::default()).unwrap();
    check(model.converged && !model.separated, "fit did not converge cleanly")?;
    let theta = model.parameters();
    let grad = model.score_at(&feats, &y, &theta).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for j in 0..theta.len() {
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[j] += h;
        down[j] -= h;
        let fd = (model.log_likelihood_at(&feats, &y, &up).unwrap() - model.log_likelihood_at(&feats, &y, &down).unwrap()) / (2.0 * h);
        worst = worst.max((grad[j] - fd).abs() / fd.abs().max(1.0));
    }
    check(worst <= 1e-4, format!("gradient relative error {worst}"))?;
    let mut norm: f64 = 0.0;
    for i in 0..n {
        let p = model.probabilities(&[Value::Num(x[i]), Value::Cat(g[i])]).unwrap();
        norm = norm.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    check(norm <= 1e-9, format!("probabilities off by {norm}"))?;
    Ok(format!("gradient rel. error {worst:.2e}, normalization error {norm:.2e}"))
}

fn criterion_9() -> Outcome {
    let ds = label_fixture(FIXTURE_N, SEED);
    let copies = SyntheticSet { label: "copy".into(), seed: 0, datasets: vec![ds.clone(); 3], seconds: vec![0.0; 3] };
    let opts = ClassifyOptions::default();
    let c = classify_compare(&ds, &copies, "label", SEED, &opts).unwrap();
    check(c.agreement == 1.0 && c.mean_accuracy == c.baseline_accuracy, format!("copies: {c:?}"))?;
    let s = synthesize(&ds, &spec(&ds, "S", 10, SEED)).unwrap();
    let res = classify_compare(&ds, &s, "label", SEED, &opts).unwrap();
    let labels = ds.categorical(3).unwrap();
    let ones = labels.iter().filter(|&&v| v == 1).count() as f64 / labels.len() as f64;
    let majority = ones.max(1.0 - ones);
    check(
        close(res.mean_accuracy, majority, 0.05),
        format!("S accuracy {} vs majority rate {majority}", res.mean_accuracy),
    )?;
    Ok(format!(
        "copies agreement 1.0; S accuracy {:.3} vs majority {majority:.3} (baseline {:.3})",
        res.mean_accuracy, res.baseline_accuracy
    ))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture_a(FIXTURE_N, SEED);
    let mut cfg = experiment_config(dir.path(), 2, &[1, 5], &["S", "P", "D", "CC"], "");
    let mut reports = Vec::new();
    for jobs in [1, 8] {
        cfg.out = dir.path().join(format!("jobs{jobs}"));
        let out = run_experiment_on(&cfg, &ds, RunOptions { jobs, resume: false }).unwrap();
        check(out.report.error_count() == 0, format!("{} error rows", out.report.error_count()))?;
        reports.push(std::fs::read(cfg.out.join(REPORT_FILE)).unwrap());
    }
    check(reports[0] == reports[1], "reports differ between --jobs 1 and --jobs 8")?;
    let rows = UtilityReport::parse(std::str::from_utf8(&reports[0]).unwrap()).unwrap().rows.len();
    Ok(format!("{} bytes, {rows} rows, identical", reports[0].len()))
}

#[test]
fn acceptance() {
    let suite_start = Instant::now();
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("metric oracles", criterion_1, Duration::from_secs(1)),
        ("combining-rule properties", criterion_2, Duration::from_secs(1)),
        ("synthesizer correctness", criterion_3, Duration::from_secs(30)),
        ("effect of m", criterion_4, Duration::from_secs(120)),
        ("proper vs non-proper at m=1", criterion_5, Duration::from_secs(60)),
        ("catall joint sampling", criterion_6, Duration::from_secs(10)),
        ("Monte-Carlo draw oracles", criterion_7, Duration::from_secs(60)),
        ("logistic fitting", criterion_8, Duration::from_secs(60)),
        ("classification comparison", criterion_9, Duration::from_secs(30)),
        ("end-to-end determinism", criterion_10, Duration::from_secs(300)),
    ];
    let mut failures = BTreeMap::new();
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(d) if took > *limit => Err(format!("{d}; took {took:.1?}, limit {limit:?}")),
            other => other,
        };
        match &outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} ({took:.2?})", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why} ({took:.2?})", i + 1);
                failures.insert(i + 1, why.clone());
            }
        }
    }
    let total = suite_start.elapsed();
    println!("acceptance suite finished in {total:.1?}");
    assert!(total < Duration::from_secs(300), "suite took {total:?}");
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
