//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use flowstitch::bench::{gen_random, ratio_stats, GenSpec};
use flowstitch::model::{partition_classes, Instance, Job, JobId};
use flowstitch::scalar::{fmt_rational, rational_to_f64, Rational};
use flowstitch::schedule::{
    edf_feasible, edf_simulate, first_deadline_miss, schedule_cost, validate_schedule,
    weighted_flow, Availability, DeadlineMap, Schedule,
};
use flowstitch::setcover::{greedy_bound_factor, verify_cover};
use flowstitch::stitch::{
    fixed_rounding_holds, run_standard, run_windowed, verify_final_safety, StitchReport,
    WindowParams,
};
use flowstitch::subsolver::{exact_oracle, unitslot_oracle, ExactOracle, Hdf};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(failures: &[String], detail: String) -> Self {
        if failures.is_empty() {
            Outcome { pass: true, detail }
        } else {
            let mut shown: Vec<&str> = failures.iter().take(3).map(String::as_str).collect();
            if failures.len() > 3 {
                shown.push("...");
            }
            Outcome {
                pass: false,
                detail: format!("{} failures: {}; {detail}", failures.len(), shown.join(" | ")),
            }
        }
    }
}

type B = BigInt;

// ---------------------------------------------------------------- 1

fn random_deadline_instance(rng: &mut ChaCha8Rng) -> (Vec<Job<i64>>, DeadlineMap<i64>, Availability<i64>) {
    const HORIZON: i64 = 30;
    let n = rng.random_range(1..=6);
    let mut jobs = Vec::new();
    let mut dl = BTreeMap::new();
    for i in 0..n {
        let p = rng.random_range(1..=6);
        let r = rng.random_range(0..=HORIZON - p);
        let d = rng.random_range(r + p..=HORIZON);
        jobs.push(Job::new(i, r, p, 1));
        dl.insert(JobId(i), d);
    }
    let mut busy = Vec::new();
    if rng.random::<bool>() {
        for _ in 0..rng.random_range(1..=3) {
            let s = rng.random_range(0..HORIZON);
            let e = rng.random_range(s + 1..=HORIZON);
            busy.push((s, e));
        }
    }
    let dl = DeadlineMap::new(&jobs, dl).unwrap();
    (jobs, dl, Availability::from_busy(busy))
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    let (mut feasible, mut masked) = (0, 0);
    let total = 600;
    for i in 0..total {
        let (jobs, dl, avail) = random_deadline_instance(&mut rng);
        masked += usize::from(!avail.busy().is_empty());
        let verdict = edf_feasible(&jobs, &dl, &avail).is_feasible();
        let sim = edf_simulate(&jobs, &dl, &avail);
        let meets = first_deadline_miss(&sim, &dl).is_none();
        feasible += usize::from(verdict);
        if verdict != meets {
            failures.push(format!("instance {i}: interval test {verdict}, simulation {meets}"));
        }
    }
    Outcome::check(
        &failures,
        format!("{total} instances, {masked} with busy masks, {feasible} feasible"),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = Vec::new();
    let total = 250;
    for i in 0..total {
        let n = rng.random_range(1..=5u64);
        let mut budget = 12i64;
        let mut jobs = Vec::new();
        for id in 0..n {
            if budget == 0 {
                break;
            }
            let p = rng.random_range(1..=budget.min(5));
            budget -= p;
            jobs.push(Job::new(id, rng.random_range(0..=8), p, rng.random_range(1..=6)));
        }
        let inst = Instance::new(jobs).unwrap();
        let a = schedule_cost(&exact_oracle(&inst).unwrap(), &inst);
        let b = schedule_cost(&unitslot_oracle(&inst).unwrap(), &inst);
        if a != b {
            failures.push(format!("instance {i}: exact {a} vs unit-slot {b}"));
        }
    }
    Outcome::check(&failures, format!("{total} micro-instances, total size <= 12"))
}

// ---------------------------------------------------------------- corpus

struct CorpusRun {
    inst: Instance<B>,
    result: Result<(Schedule<B>, StitchReport<B>), String>,
}

fn corpus_spec(seed: u64) -> GenSpec {
    let mut spec = GenSpec::new(16 + (seed % 9) as usize, 3 + (seed % 3) as usize, seed);
    spec.density = [Ratio::new(1, 2), Ratio::new(1, 8), Ratio::new(2, 1)][(seed % 3) as usize];
    spec
}

const CORPUS: u64 = 120;

fn corpus() -> &'static Vec<CorpusRun> {
    static RUNS: OnceLock<Vec<CorpusRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..CORPUS)
            .into_par_iter()
            .map(|seed| {
                let inst = gen_random::<B>(&corpus_spec(seed)).unwrap();
                let result = run_standard(&inst, &Hdf, true).map_err(|e| e.to_string());
                CorpusRun { inst, result }
            })
            .collect()
    })
}

/// Calls `f` for every successful corpus run, collects failures for the rest.
fn each_run(
    failures: &mut Vec<String>,
    mut f: impl FnMut(&mut Vec<String>, usize, &CorpusRun, &Schedule<B>, &StitchReport<B>),
) {
    for (i, run) in corpus().iter().enumerate() {
        match &run.result {
            Ok((s, rep)) => f(failures, i, run, s, rep),
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let (mut steps, mut points, mut nonempty) = (0, 0, 0);
    each_run(&mut failures, |failures, i, _, _, rep| {
        for t in &rep.traces {
            steps += 1;
            points += t.r2c.points().len();
            nonempty += usize::from(!t.r2c.points().is_empty());
            if let Err(short) = flowstitch::setcover::verify_fractional_cover(&t.r2c, &t.fractional) {
                failures.push(format!(
                    "instance {i} step {}: {} points short, first mass {}",
                    t.k,
                    short.len(),
                    fmt_rational(&short[0].mass)
                ));
            }
        }
    });
    let multi = corpus()
        .iter()
        .filter(|r| partition_classes(&r.inst).nonempty_count() >= 2)
        .count();
    if multi != corpus().len() {
        failures.push(format!("only {multi} multi-class instances"));
    }
    Outcome::check(
        &failures,
        format!(
            "{} instances (n >= 16), {steps} steps, {nonempty} with dangerous points, {points} points",
            corpus().len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut ratios: Vec<Rational<B>> = Vec::new();
    let mut worst_vs_bound: Option<Rational<B>> = None;
    each_run(&mut failures, |failures, i, _, _, rep| {
        for t in &rep.traces {
            if let Err(v) = verify_cover(&t.r2c, &t.cover) {
                failures.push(format!("instance {i} step {}: {v}", t.k));
                continue;
            }
            let frac = t.fractional.cost(&t.r2c);
            let bound = greedy_bound_factor::<B>(t.r2c.points().len()) * frac.clone();
            let got = Ratio::from_integer(t.cover.cost.clone());
            if got > bound {
                failures.push(format!(
                    "instance {i} step {}: greedy {} > H_m * frac {}",
                    t.k,
                    t.cover.cost,
                    fmt_rational(&bound)
                ));
            }
            if !frac.is_zero() && !t.r2c.points().is_empty() {
                let r = got.clone() / frac;
                ratios.push(r);
                let rel = got / bound;
                if worst_vs_bound.as_ref().is_none_or(|w| rel > *w) {
                    worst_vs_bound = Some(rel);
                }
            }
        }
    });
    let dist = ratio_stats(&ratios)
        .map(|s| s.to_string())
        .unwrap_or_else(|| "no steps with dangerous points".into());
    let worst = worst_vs_bound.map_or("-".into(), |w| format!("{:.4}", rational_to_f64(&w)));
    Outcome::check(
        &failures,
        format!("greedy/fractional: {dist}; max greedy/(H_m frac) = {worst}"),
    )
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    let mut steps = 0;
    each_run(&mut failures, |failures, i, run, s, rep| {
        let inst = &run.inst;
        let mut last: Option<&Schedule<B>> = None;
        for t in &rep.traces {
            steps += 1;
            let tag = format!("instance {i} step {}", t.k);
            let jobs: Vec<Job<B>> = t.window.iter().map(|id| inst.job(*id).unwrap().clone()).collect();
            let frozen = t.prev.restricted_to(&t.frozen);
            let avail = Availability::occupied_by(&frozen);
            for j in &jobs {
                let d = &t.deadlines[&j.id];
                if !(d.tent <= d.ext && d.ext <= d.fin && d.tent >= j.release.clone() + j.size.clone()) {
                    failures.push(format!("{tag}: deadline record out of order for {}", j.id));
                }
            }
            if let Err(w) = verify_final_safety(&jobs, &t.deadlines, &avail) {
                failures.push(format!("{tag}: unsafe ({}, {}]", w.start, w.end));
            }
            for j in &jobs {
                match t.result.completion(j.id) {
                    Some(c) if *c <= t.deadlines[&j.id].fin => {}
                    other => failures.push(format!("{tag}: job {} completes at {other:?} past final deadline", j.id)),
                }
            }
            if t.result.restricted_to(&t.frozen) != frozen {
                failures.push(format!("{tag}: frozen segments changed"));
            }
            let all: BTreeSet<JobId> = t.frozen.union(&t.window).copied().collect();
            if t.result.job_ids() != all {
                failures.push(format!("{tag}: result holds the wrong job set"));
            }
            let placed = Instance::new(all.iter().map(|id| inst.job(*id).unwrap().clone()).collect()).unwrap();
            if let Err(v) = validate_schedule(&t.result, &placed, &Availability::full()) {
                failures.push(format!("{tag}: {v}"));
            }
            if let Some(prev) = last {
                if *prev != t.prev {
                    failures.push(format!("{tag}: input is not the previous step's output"));
                }
            }
            last = Some(&t.result);
        }
        if let Err(v) = validate_schedule(s, inst, &Availability::full()) {
            failures.push(format!("instance {i}: final schedule invalid: {v}"));
        }
        if s.job_ids().len() != inst.n() {
            failures.push(format!("instance {i}: final schedule misses jobs"));
        }
    });
    Outcome::check(&failures, format!("{steps} steps checked"))
}

fn weight_gap(inst: &Instance<B>, t: &flowstitch::stitch::StepTrace<B>) -> B {
    t.window
        .iter()
        .map(|id| {
            let d = &t.deadlines[id];
            inst.job(*id).unwrap().weight.clone() * (d.fin.clone() - d.tent.clone())
        })
        .fold(B::zero(), |a, b| a + b)
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let (mut steps, mut tight) = (0, 0);
    each_run(&mut failures, |failures, i, run, _, rep| {
        for (t, rec) in rep.traces.iter().zip(&rep.steps) {
            steps += 1;
            let ext = weight_gap(&run.inst, t);
            let q = rec.q.clone();
            let big: B = t
                .window
                .iter()
                .map(|id| run.inst.job(*id).unwrap())
                .filter(|j| j.size >= q)
                .map(|j| j.weight.clone() * j.size.clone())
                .fold(B::zero(), |a, b| a + b);
            let bound = t.cover.cost.clone() + big;
            if ext > bound {
                failures.push(format!("instance {i} step {}: {ext} > {bound}", t.k));
            }
            tight += usize::from(ext == bound && !ext.is_zero());
            if ext != rec.ext_cost {
                failures.push(format!("instance {i} step {}: report says {}, recount {ext}", t.k, rec.ext_cost));
            }
        }
    });
    Outcome::check(&failures, format!("{steps} steps, {tight} with equality"))
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut steps = 0;
    let mut slack: Vec<Rational<B>> = Vec::new();
    each_run(&mut failures, |failures, i, run, s, rep| {
        let cost = |sched: &Schedule<B>| {
            let jobs: Vec<Job<B>> = sched.job_ids().iter().map(|id| run.inst.job(*id).unwrap().clone()).collect();
            weighted_flow(sched, &jobs).0
        };
        let mut ext_total = B::zero();
        for t in &rep.traces {
            steps += 1;
            let ext = weight_gap(&run.inst, t);
            let lhs = cost(&t.result);
            let rhs = cost(&t.prev) + cost(&t.sub) + ext.clone();
            if lhs > rhs {
                failures.push(format!("instance {i} step {}: {lhs} > {rhs}", t.k));
            }
            ext_total += ext;
        }
        let subs: B = rep.sub_costs.values().cloned().fold(B::zero(), |a, b| a + b);
        let total = schedule_cost(s, &run.inst);
        let bound = subs + ext_total;
        if total > bound {
            failures.push(format!("instance {i}: end-to-end {total} > {bound}"));
        }
        if !bound.is_zero() {
            slack.push(Ratio::new(total, bound));
        }
    });
    let dist = ratio_stats(&slack).map_or("-".into(), |s| s.to_string());
    Outcome::check(&failures, format!("{steps} steps; wF / telescoped bound: {dist}"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let results: Vec<Result<(Rational<i128>, usize), String>> = (0..60u64)
        .into_par_iter()
        .map(|i| {
            let n = 3 + (i % 6) as usize;
            let classes = 2 + (i % 2) as usize;
            let inst = gen_random::<i128>(&GenSpec::new(n, classes, 8_000 + i)).unwrap();
            let k = partition_classes(&inst).nonempty_count();
            let (s, _) = run_standard(&inst, &ExactOracle::default(), false).map_err(|e| format!("instance {i}: {e}"))?;
            validate_schedule(&s, &inst, &Availability::full()).map_err(|v| format!("instance {i}: {v}"))?;
            let opt = schedule_cost(&exact_oracle(&inst).unwrap(), &inst);
            let got = schedule_cost(&s, &inst);
            if opt.is_zero() {
                return Err(format!("instance {i}: zero optimum"));
            }
            Ok((Ratio::new(got, opt), k))
        })
        .collect();
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    let mut flagged = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((ratio, k)) => {
                if k < 2 {
                    failures.push(format!("instance {i}: single class"));
                }
                if ratio < Ratio::one() {
                    failures.push(format!("instance {i}: ratio {} < 1", fmt_rational(&ratio)));
                }
                if ratio > Ratio::from_integer(10) {
                    flagged += 1;
                    eprintln!("  criterion 8: instance {i} ratio {} > 10", fmt_rational(&ratio));
                }
                ratios.push(ratio);
            }
            Err(e) => failures.push(e),
        }
    }
    let dist = ratio_stats(&ratios).map_or("-".into(), |s| s.to_string());
    Outcome::check(&failures, format!("stitched(exact)/opt: {dist}; {flagged} above 10"))
}

// ---------------------------------------------------------------- 9

fn check_windowed(
    i: usize,
    inst: &Instance<B>,
    params: &WindowParams<B>,
    failures: &mut Vec<String>,
    stats: &mut (usize, usize),
) {
    let tag = format!("instance {i} b={:?}", params.width);
    let (s, rep) = match run_windowed(inst, &Hdf, params, false) {
        Ok(v) => v,
        Err(e) => {
            failures.push(format!("{tag}: {e}"));
            return;
        }
    };
    if let Err(v) = validate_schedule(&s, inst, &Availability::full()) {
        failures.push(format!("{tag}: {v}"));
    }
    let cost = schedule_cost(&s, inst);
    if cost != rep.final_cost {
        failures.push(format!("{tag}: report cost mismatch"));
    }
    if let Some(worst) = rep.candidates.iter().map(|(_, c)| c).max() {
        if cost > *worst {
            failures.push(format!("{tag}: chosen {cost} > worst candidate {worst}"));
        }
        if rep.candidates.iter().any(|(_, c)| *c < cost) {
            failures.push(format!("{tag}: chosen candidate is not the cheapest"));
        }
    }
    for rec in &rep.steps {
        stats.0 += 1;
        stats.1 += usize::from(rec.fixed_jobs > 0);
        if !rec.extension_bound_holds() {
            failures.push(format!("{tag} step {}: extension ledger fails", rec.k));
        }
        if !rec.chain_holds() {
            failures.push(format!("{tag} step {}: cost chain fails", rec.k));
        }
    }
    let _ = fixed_rounding_holds::<B>;
}

fn criterion_9() -> Outcome {
    let widths = [Some(2usize), Some(3), None];
    let runs: Vec<(Vec<String>, (usize, usize))> = corpus()
        .par_iter()
        .enumerate()
        .map(|(i, run)| {
            let mut failures = Vec::new();
            let mut stats = (0, 0);
            for w in widths {
                let params = match w {
                    Some(b) => WindowParams::with_width(b),
                    None => WindowParams::new(Ratio::new(B::from(2), B::from(5))),
                };
                check_windowed(i, &run.inst, &params, &mut failures, &mut stats);
            }
            (failures, stats)
        })
        .collect();
    let mut failures = Vec::new();
    let (mut steps, mut fixed) = (0, 0);
    for (f, (s, x)) in runs {
        failures.extend(f);
        steps += s;
        fixed += x;
    }
    Outcome::check(
        &failures,
        format!("{} instances x b in {{2, 3, derived}}, {steps} steps, {fixed} with fixed extensions", corpus().len()),
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let inst = gen_random::<B>(&GenSpec::new(30, 7, 2024)).unwrap();
    let spread = inst.spread();
    let mut failures = Vec::new();
    if spread < Ratio::from_integer(B::one() << 60u32) {
        failures.push(format!("spread {} below 2^60", fmt_rational(&spread)));
    }
    let start = Instant::now();
    match run_standard(&inst, &Hdf, false) {
        Ok((s, rep)) => {
            if let Err(v) = validate_schedule(&s, &inst, &Availability::full()) {
                failures.push(v.to_string());
            }
            let el = start.elapsed();
            if el >= Duration::from_secs(60) {
                failures.push(format!("took {el:?}"));
            }
            let bits = spread.to_integer().bits();
            return Outcome::check(
                &failures,
                format!(
                    "n=30, spread ~2^{bits}, {} classes, {} steps, solved in {:.2}s",
                    rep.max_class,
                    rep.steps.len(),
                    el.as_secs_f64()
                ),
            );
        }
        Err(e) => failures.push(e.to_string()),
    }
    Outcome::check(&failures, String::new())
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 10] = [
        (1, "EDF interval test vs simulation", criterion_1, 10),
        (2, "exact vs unit-slot oracle", criterion_2, 30),
        (3, "fractional cover feasibility", criterion_3, 60),
        (4, "greedy cover validity and H_m bound", criterion_4, 60),
        (5, "final safety, insertion, frozen prefix", criterion_5, 60),
        (6, "extension-cost ledger", criterion_6, 60),
        (7, "cost chain", criterion_7, 60),
        (8, "end-to-end ratio vs exact optimum", criterion_8, 120),
        (9, "windowed variant", criterion_9, 120),
        (10, "exponential spread smoke test", criterion_10, 60),
    ];
    let mut all = true;
    for (id, name, f, limit) in criteria {
        let start = Instant::now();
        let mut out = f();
        let el = start.elapsed();
        if el > Duration::from_secs(limit) {
            out.pass = false;
            out.detail = format!("over time limit {limit}s; {}", out.detail);
        }
        all &= out.pass;
        println!(
            "criterion {id:>2} {}: {name} ({:.2}s) {}",
            if out.pass { "PASS" } else { "FAIL" },
            el.as_secs_f64(),
            out.detail
        );
    }
    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
