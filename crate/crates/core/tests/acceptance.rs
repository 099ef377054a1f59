//! Acceptance criteria P1–P8, one PASS/FAIL/SKIP line each.
//!
//! Runs without the libtest harness so every line shows up in `cargo test`
//! output and criteria execute one after another (P6 times wall clock).
//! P8 needs the UCI concrete compressive strength data; point
//! `RAI_CONCRETE_CSV` at a comma separated copy with a header row and the
//! strength column last.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::random_raw;
use rai_core::engine::default_max_passes;
use rai_core::kernel::{coefficients, gain, r_squared_of};
use rai_core::oracle::{
    brute_force_subset, forward_stepwise, projected_r_squared, submodularity_ratio, theorem_bound,
    BoundInputs, StepwiseStop, DEFAULT_ENUM_BUDGET,
};
use rai_core::sim::{run_experiment, Method, Scenario, SimSpec};
use rai_core::term::raw_values;
use rai_core::{run_rai, standardize, Dataset, RaiConfig};

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: &'static str,
    status: Status,
    detail: String,
    elapsed: Duration,
}

/// Passes traversed per run, gathered from P1–P3 for P5.
#[derive(Default)]
struct PassLog {
    /// (passes, bound)
    all: Vec<(u32, u32)>,
    signal: Vec<u32>,
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn timed(id: &'static str, f: impl FnOnce() -> (Status, String)) -> Line {
    let start = Instant::now();
    let (status, detail) = f();
    Line {
        id,
        status,
        detail,
        elapsed: start.elapsed(),
    }
}

fn p1(log: &mut PassLog) -> (Status, String) {
    let mut spec = SimSpec::new(Scenario::GlobalNull, 200, 100);
    spec.replications = 1000;
    let start = Instant::now();
    let res = run_experiment(&spec, Method::Rai, false).expect("valid spec");
    let secs = start.elapsed().as_secs_f64();
    let bound = default_max_passes(spec.n);
    log.all
        .extend(res.records.iter().map(|r| (r.passes, bound)));
    let s = &res.summary;
    let ok = s.failed == 0 && s.mfdr_estimate <= 0.25 && secs < 120.0;
    (
        status(ok),
        format!(
            "mFDR {:.4} <= 0.25 (V = {}, R = {}, {} reps, {} failed), {:.1}s < 120s",
            s.mfdr_estimate,
            s.mfdr_counts.false_rejections,
            s.mfdr_counts.rejections,
            s.replications,
            s.failed,
            secs
        ),
    )
}

fn p2(log: &mut PassLog) -> (Status, String) {
    let mut spec = SimSpec::new(Scenario::SingleInteraction, 500, 50);
    spec.replications = 100;
    let start = Instant::now();
    let res = run_experiment(&spec, Method::RaiInteractions, false).expect("valid spec");
    let secs = start.elapsed().as_secs_f64();
    let bound = default_max_passes(spec.n);
    for r in &res.records {
        log.all.push((r.passes, bound));
        log.signal.push(r.passes);
    }
    let recovery = res.summary.recovery_rate;
    let mut t: Vec<f64> = res
        .records
        .iter()
        .flat_map(|r| r.true_term_t.iter().map(|v| v.abs()))
        .collect();
    t.sort_by(f64::total_cmp);
    let inside = t.iter().filter(|v| (20.0..=45.0).contains(*v)).count();
    let t_ok = !t.is_empty() && inside == t.len();
    let ok = res.summary.failed == 0 && recovery >= 0.90 && t_ok && secs < 300.0;
    (
        status(ok),
        format!(
            "recovery {:.2} >= 0.90; true-term |t| in [20, 45]: {}/{} (min {:.1}, median {:.1}, max {:.1}); {:.1}s < 300s",
            recovery,
            inside,
            t.len(),
            t.first().copied().unwrap_or(f64::NAN),
            t.get(t.len() / 2).copied().unwrap_or(f64::NAN),
            t.last().copied().unwrap_or(f64::NAN),
            secs
        ),
    )
}

/// Random instance for P3: correlation strength cycles through near
/// orthogonal and strongly correlated designs.
fn p3_instance(i: u64) -> (Dataset, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0_0000 + i);
    let p = rng.random_range(4..=12);
    let k = rng.random_range(1..=3);
    let rho = [0.0, 0.3, 1.0, 2.0][i as usize % 4];
    let (cols, y) = random_raw(&mut rng, 100, p, rho);
    (standardize(&cols, &y).unwrap(), k)
}

fn p3(log: &mut PassLog) -> (Status, String) {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut empty = 0;
    let mut errors = Vec::new();
    for i in 0..200 {
        let (ds, k) = p3_instance(i);
        let out = run_rai(&ds, &RaiConfig::default()).unwrap();
        log.all
            .push((out.trace.passes_traversed, default_max_passes(ds.n())));
        log.signal.push(out.trace.passes_traversed);
        let selected = out.state.selected().to_vec();
        let l = selected.len();
        let r2 = r_squared_of(&ds, &selected).unwrap();
        if l == 0 {
            // c₁ = c₂ = 0: the bound is 0
            empty += 1;
            worst = worst.min(r2);
            continue;
        }
        let best = brute_force_subset(&ds, k, DEFAULT_ENUM_BUDGET).unwrap();
        let gamma = match submodularity_ratio(&ds, &selected, k, DEFAULT_ENUM_BUDGET) {
            Ok(g) => g.gamma,
            Err(e) => {
                errors.push(format!("instance {i}: {e}"));
                continue;
            }
        };
        let bound = theorem_bound(&BoundInputs {
            r2_opt: best.r_squared,
            l,
            k,
            gamma,
            s_f: out.trace.first_rejection_pass.expect("l >= 1"),
        })
        .unwrap();
        let slack = r2 - bound.bound;
        worst = worst.min(slack);
        if slack < -1e-10 {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = violations == 0 && errors.is_empty() && secs < 600.0;
    let mut detail = format!(
        "R²(S_l) >= bound in {}/200 (min slack {:.3e}, {} empty models), {:.1}s < 600s",
        200 - violations - errors.len(),
        worst,
        empty,
        secs
    );
    if !errors.is_empty() {
        detail.push_str(&format!("; errors: {}", errors.join(", ")));
    }
    (status(ok), detail)
}

fn p4() -> (Status, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x94);
    let (mut sep_err, mut bnd_err) = (0f64, f64::NEG_INFINITY);
    for draw in 0..500 {
        let n = rng.random_range(15..=50);
        let p = rng.random_range(2..=8);
        let rho = rng.random_range(0.0..1.5);
        let (cols, y) = random_raw(&mut rng, n, p, rho);
        let ds = standardize(&cols, &y).unwrap();
        let mut idx: Vec<usize> = (0..p).collect();
        idx.shuffle(&mut rng);
        let a = rng.random_range(0..p);
        let b = rng.random_range(1..=p - a);
        let s = &idx[..a];
        let t = &idx[a..a + b];
        let mut union = s.to_vec();
        union.extend_from_slice(t);
        let lhs = r_squared_of(&ds, &union).unwrap();
        let rhs = r_squared_of(&ds, s).unwrap() + projected_r_squared(&ds, s, t).unwrap();
        sep_err = sep_err.max((lhs - rhs).abs());
        // Δ_S(T) ≤ Σ Δ_S(x) / γ(S, |T|)
        let g = submodularity_ratio(&ds, s, t.len(), DEFAULT_ENUM_BUDGET)
            .unwrap_or_else(|e| panic!("draw {draw}: {e}"));
        let joint = gain(&ds, s, t).unwrap();
        let singles: f64 = t.iter().map(|&x| gain(&ds, s, &[x]).unwrap()).sum();
        bnd_err = bnd_err.max(joint - singles / g.gamma);
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = sep_err <= 1e-8 && bnd_err <= 1e-8 && secs < 60.0;
    (
        status(ok),
        format!(
            "500 draws: r2-sep max error {sep_err:.2e} <= 1e-8, Rsbnd max excess {bnd_err:.2e} <= 1e-8, {secs:.1}s < 60s"
        ),
    )
}

fn p5(log: &PassLog) -> (Status, String) {
    let over_bound = log.all.iter().filter(|(s, b)| s > b).count();
    let within7 = log.signal.iter().filter(|&&s| s <= 7).count();
    let frac7 = within7 as f64 / log.signal.len().max(1) as f64;

    let mut mismatches = 0;
    let mut max_dw = 0f64;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x95_0000 + i);
        let n = rng.random_range(40..=200);
        let p = rng.random_range(3..=15);
        let (cols, mut y) = random_raw(&mut rng, n, p, 0.5);
        for (r, v) in y.iter_mut().enumerate() {
            *v += 0.5 * cols[0][r] * cols[1][r];
        }
        let ds = standardize(&cols, &y).unwrap();
        let inter = i % 2 == 0;
        let on = run_rai(&ds, &RaiConfig::default().with_interactions(inter)).unwrap();
        let off = run_rai(
            &ds,
            &RaiConfig::default()
                .with_interactions(inter)
                .with_skipping(false),
        )
        .unwrap();
        let dw = (on.trace.final_wealth - off.trace.final_wealth).abs();
        max_dw = max_dw.max(dw);
        if on.terms != off.terms || dw > 1e-12 {
            mismatches += 1;
        }
    }
    let ok = over_bound == 0 && frac7 >= 0.90 && mismatches == 0;
    (
        status(ok),
        format!(
            "{} runs over the pass bound of {}; <= 7 passes in {:.1}% of {} signal runs (>= 90%); skip on/off mismatches {}/50 (max wealth diff {:.1e})",
            over_bound,
            log.all.len(),
            100.0 * frac7,
            log.signal.len(),
            mismatches,
            max_dw
        ),
    )
}

fn one_pass_time(ds: &Dataset) -> Duration {
    let cfg = RaiConfig {
        max_passes: Some(1),
        ..RaiConfig::default()
    };
    let start = Instant::now();
    let out = run_rai(ds, &cfg).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(out.trace.passes_traversed, 1);
    elapsed
}

fn p6() -> (Status, String) {
    let n = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(0x96);
    let mut draw = |p: usize| -> Dataset {
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        standardize(&cols, &y).unwrap()
    };
    let small = draw(1000);
    let large = draw(2000);
    // warm up, then interleave to share any drift
    one_pass_time(&small);
    one_pass_time(&large);
    let (mut ts, mut tl) = (Vec::new(), Vec::new());
    for _ in 0..21 {
        ts.push(one_pass_time(&small).as_secs_f64());
        tl.push(one_pass_time(&large).as_secs_f64());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (a, b) = (median(&mut ts), median(&mut tl));
    let ratio = b / a;
    (
        status((1.6..=2.6).contains(&ratio)),
        format!(
            "one pass at n=500: p=1000 {:.3}ms, p=2000 {:.3}ms, ratio {:.2} in [1.6, 2.6]",
            a * 1e3,
            b * 1e3,
            ratio
        ),
    )
}

fn p7() -> (Status, String) {
    let mut matches = 0;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x97_0000 + i);
        let n = rng.random_range(20..=80);
        let p = rng.random_range(2..=15);
        let rho = rng.random_range(0.0..2.0);
        let (cols, y) = random_raw(&mut rng, n, p, rho);
        let ds = standardize(&cols, &y).unwrap();
        let first = forward_stepwise(&ds, StepwiseStop::Size(1)).unwrap();
        let best = brute_force_subset(&ds, 1, DEFAULT_ENUM_BUDGET).unwrap();
        matches += (first == best.subset) as usize;
    }
    (
        status(matches == 100),
        format!("first stepwise pick equals best single feature in {matches}/100"),
    )
}

fn read_concrete(path: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>), String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| format!("{f:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let width = rows.first().map_or(0, |r| r.len());
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err("expected a rectangular table with at least two columns".into());
    }
    let cols = (0..width - 1)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let y = rows.iter().map(|r| r[width - 1]).collect();
    Ok((cols, y))
}

fn subset_rows(cols: &[Vec<f64>], rows: &[usize]) -> Vec<Vec<f64>> {
    cols.iter()
        .map(|c| rows.iter().map(|&i| c[i]).collect())
        .collect()
}

fn pmse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64
}

fn p8() -> (Status, String) {
    let Ok(path) = std::env::var("RAI_CONCRETE_CSV") else {
        return (
            Status::Skip,
            "RAI_CONCRETE_CSV not set; optional real-data check".into(),
        );
    };
    let (cols, y) = match read_concrete(&path) {
        Ok(d) => d,
        Err(e) => return (Status::Fail, format!("could not read {path}: {e}")),
    };
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x98);
    let mut wins = 0;
    let mut rai_pmse = Vec::new();
    let mut step_pmse = Vec::new();
    let mut interactions = 0;
    for _ in 0..20 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let (test, train) = idx.split_at(n / 6);
        let train_x = subset_rows(&cols, train);
        let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let test_x = subset_rows(&cols, test);
        let test_y: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let ds = standardize(&train_x, &train_y).unwrap();
        // dataset features back to original columns of the test split
        let test_cols: Vec<Vec<f64>> = (0..ds.p())
            .map(|j| test_x[ds.source_index(j)].clone())
            .collect();

        let out = run_rai(&ds, &RaiConfig::default().with_interactions(true)).unwrap();
        interactions += out.terms.iter().filter(|t| !t.is_marginal()).count();
        let fit = out.fit(&ds).unwrap();
        let term_cols: Vec<Vec<f64>> = out
            .terms
            .iter()
            .map(|t| raw_values(t, &test_cols).unwrap())
            .collect();
        let views: Vec<&[f64]> = term_cols.iter().map(|c| c.as_slice()).collect();
        let pred = if views.is_empty() {
            fit.predict_intercept_only(test_y.len())
        } else {
            fit.predict(&views).unwrap()
        };
        let e_rai = pmse(&pred, &test_y);

        let subset = forward_stepwise(&ds, StepwiseStop::Aic).unwrap();
        let sfit = coefficients(&ds, &subset).unwrap();
        let sviews: Vec<&[f64]> = subset.iter().map(|&j| test_cols[j].as_slice()).collect();
        let spred = if sviews.is_empty() {
            sfit.predict_intercept_only(test_y.len())
        } else {
            sfit.predict(&sviews).unwrap()
        };
        let e_step = pmse(&spred, &test_y);
        wins += (e_rai < e_step) as usize;
        rai_pmse.push(e_rai);
        step_pmse.push(e_step);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ok = wins >= 18 && mean(&rai_pmse) < 60.0 && interactions > 0;
    (
        status(ok),
        format!(
            "RAI beats stepwise AIC in {wins}/20 splits (>= 18); mean PMSE RAI {:.2} < 60 vs stepwise {:.2}; {} interaction terms selected",
            mean(&rai_pmse),
            mean(&step_pmse),
            interactions
        ),
    )
}

fn main() -> ExitCode {
    let mut log = PassLog::default();
    let lines = vec![
        timed("P1", || p1(&mut log)),
        timed("P2", || p2(&mut log)),
        timed("P3", || p3(&mut log)),
        timed("P4", p4),
        timed("P5", || p5(&log)),
        timed("P6", p6),
        timed("P7", p7),
        timed("P8", p8),
    ];
    let mut failed = Vec::new();
    for l in &lines {
        let tag = match l.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed.push(l.id);
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!(
            "{} {tag} {} [{:.1}s]",
            l.id,
            l.detail,
            l.elapsed.as_secs_f64()
        );
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {}", failed.iter().join(", "));
        ExitCode::FAILURE
    }
}
