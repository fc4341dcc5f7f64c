//! Class-window stitching: turn a bounded-spread solver into a solver for
//! arbitrary spread.
//!
//! Jobs are split into size classes (see [`crate::model::partition_classes`]).
//! The solver runs on every window of consecutive classes. Windows are then
//! merged left to right: the jobs of older classes keep their segments,
//! the window's jobs get tentative deadlines from the two schedules that
//! contain them, deadlines that would overload the free time are extended
//! through a rectangle cover, and the window is re-inserted with EDF.
//!
//! Every step records an exact cost ledger in a [`StepRecord`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_integer::{Integer, Roots};
use num_rational::Ratio;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{partition_classes, ClassPartition, Instance, Job, JobId};
use crate::scalar::{fmt_rational, sum, Rational, Scalar};
use crate::schedule::{
    edf_schedule, overloaded_intervals, schedule_cost, Availability, DeadlineMap, Schedule,
    ScheduleError, Witness,
};
use crate::setcover::{
    build_fractional, greedy_cover, verify_cover, verify_fractional_cover, CoverError,
    CoverMode, CoverPoint, CoverRect, CoverSolution, CoverViolation, FractionalSolution,
    R2CInstance,
};
use crate::subsolver::{SolverError, SubSolver};

pub const DEFAULT_GAMMA: u32 = 4;

#[derive(Debug, Error)]
pub enum StitchError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("step {k}: rounded cover is invalid: {violation}")]
    InvalidCover { k: usize, violation: CoverViolation },
    #[error("step {k}: job {job} missing from {which}")]
    MissingJob {
        k: usize,
        job: JobId,
        which: &'static str,
    },
    #[error("step {k}: job {job} has no selected extension level")]
    NoLevel { k: usize, job: JobId },
    #[error("step {k}: final deadlines overload ({start}, {end}]: demand {demand} > free {free}")]
    Unsafe {
        k: usize,
        start: String,
        end: String,
        demand: String,
        free: String,
    },
    #[error("step {k}: ledger inequality fails: {what}")]
    Ledger { k: usize, what: String },
    #[error("invalid parameters: {0}")]
    Param(String),
}

/// Tentative, extended, and final deadline of one job in one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlineRecord<T> {
    pub tent: T,
    pub ext: T,
    pub fin: T,
}

/// Parameters of the multi-class window variant.
#[derive(Debug, Clone)]
pub struct WindowParams<T: Scalar> {
    pub eps: Rational<T>,
    pub gamma: u32,
    /// Use this window `b` instead of deriving it from `eps` and `gamma`.
    pub width: Option<usize>,
}

impl<T: Scalar> WindowParams<T> {
    pub fn new(eps: Rational<T>) -> Self {
        WindowParams {
            eps,
            gamma: DEFAULT_GAMMA,
            width: None,
        }
    }

    pub fn with_width(width: usize) -> Self {
        WindowParams {
            eps: Ratio::new(T::one(), <T as Scalar>::from_usize(4)),
            gamma: DEFAULT_GAMMA,
            width: Some(width),
        }
    }
}

#[derive(Debug, Clone)]
pub enum StitchMode<T: Scalar> {
    /// Pairs of consecutive classes.
    Standard,
    /// `b + 1` consecutive classes per window, argmin over the last `b` results.
    Windowed(WindowParams<T>),
}

#[derive(Debug, Clone)]
pub struct StitchConfig<T: Scalar> {
    pub mode: StitchMode<T>,
    /// Keep per-step artifacts (cover instance, deadlines, schedules).
    pub trace: bool,
}

impl<T: Scalar> StitchConfig<T> {
    pub fn standard() -> Self {
        StitchConfig {
            mode: StitchMode::Standard,
            trace: false,
        }
    }

    pub fn windowed(params: WindowParams<T>) -> Self {
        StitchConfig {
            mode: StitchMode::Windowed(params),
            trace: false,
        }
    }

    pub fn traced(mut self) -> Self {
        self.trace = true;
        self
    }
}

/// Ledger of one stitch step. All quantities are exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord<T: Scalar> {
    pub k: usize,
    /// Step the frozen prefix is copied from (`k - 1`, or `k - b` windowed).
    pub base: usize,
    /// Jobs re-inserted in this step.
    pub window_jobs: usize,
    pub q: T,
    pub dangerous: usize,
    pub big_jobs: usize,
    pub fixed_jobs: usize,
    pub frac_cost: Rational<T>,
    /// Points whose fractional mass is below 1 (measured, not enforced).
    pub frac_shortfalls: usize,
    pub cover_cost: T,
    pub cover_points: usize,
    /// `sum w_j (d_final - d_tent)` over the window.
    pub ext_cost: T,
    /// `sum w_j p_j` over laddered (big) jobs.
    pub big_weighted_size: T,
    /// `sum w_j ceil(p_j / ceil(sqrt n))` over fixed-extension jobs.
    pub fixed_cost: T,
    pub wf_prev: T,
    pub wf_sub: T,
    pub wf_bold: T,
}

impl<T: Scalar> StepRecord<T> {
    /// `ext_cost <= cover_cost + big_weighted_size + fixed_cost`.
    pub fn extension_bound_holds(&self) -> bool {
        self.ext_cost
            <= self.cover_cost.clone() + self.big_weighted_size.clone() + self.fixed_cost.clone()
    }

    /// `wF(S_k) <= wF(S_base) + wF(sub_k) + ext_cost`.
    pub fn chain_holds(&self) -> bool {
        self.wf_bold <= self.wf_prev.clone() + self.wf_sub.clone() + self.ext_cost.clone()
    }
}

/// Per-step artifacts kept when tracing.
#[derive(Debug, Clone)]
pub struct StepTrace<T: Scalar> {
    pub k: usize,
    pub base: usize,
    pub frozen: BTreeSet<JobId>,
    pub window: BTreeSet<JobId>,
    pub fixed: BTreeSet<JobId>,
    pub r2c: R2CInstance<T>,
    pub fractional: FractionalSolution<T>,
    pub cover: CoverSolution<T>,
    pub deadlines: BTreeMap<JobId, DeadlineRecord<T>>,
    pub prev: Schedule<T>,
    pub sub: Schedule<T>,
    pub result: Schedule<T>,
}

#[derive(Debug, Clone)]
pub struct StitchReport<T: Scalar> {
    pub mode: &'static str,
    pub n: usize,
    pub max_class: usize,
    /// Window `b` (1 in standard mode).
    pub width: usize,
    /// Cost of each window schedule `S_k` (windowed: also the base prefixes).
    pub sub_costs: BTreeMap<usize, T>,
    pub steps: Vec<StepRecord<T>>,
    /// Windowed mode: cost of each candidate `S_K .. S_{K+b-1}`.
    pub candidates: Vec<(usize, T)>,
    pub chosen: Option<usize>,
    /// Solver ran once on the whole instance.
    pub direct: bool,
    pub final_cost: T,
    pub traces: Vec<StepTrace<T>>,
}

impl<T: Scalar> StitchReport<T> {
    fn direct(mode: &'static str, n: usize, max_class: usize, width: usize, cost: T) -> Self {
        StitchReport {
            mode,
            n,
            max_class,
            width,
            sub_costs: BTreeMap::new(),
            steps: Vec::new(),
            candidates: Vec::new(),
            chosen: None,
            direct: true,
            final_cost: cost,
            traces: Vec::new(),
        }
    }

    /// Sum of `ext_cost` over all steps.
    pub fn total_extension(&self) -> T {
        sum(self.steps.iter().map(|s| s.ext_cost.clone()))
    }

    /// One row per step: `k,n_k,Q,dangerous,frac_cost,cover_cost,ext_cost,wF_Sk,wF_bold`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "k",
            "n_k",
            "Q",
            "dangerous",
            "frac_cost",
            "cover_cost",
            "ext_cost",
            "wF_Sk",
            "wF_bold",
        ])
        .expect("in-memory csv");
        for s in &self.steps {
            w.write_record([
                s.k.to_string(),
                s.window_jobs.to_string(),
                s.q.to_string(),
                s.dangerous.to_string(),
                fmt_rational(&s.frac_cost),
                s.cover_cost.to_string(),
                s.ext_cost.to_string(),
                s.wf_sub.to_string(),
                s.wf_bold.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mode={} n={} classes={} b={} final_wF={}",
            self.mode, self.n, self.max_class, self.width, self.final_cost
        );
        if self.direct {
            let _ = writeln!(out, "solved directly (single window)");
        }
        for s in &self.steps {
            let _ = writeln!(
                out,
                "step {:>3} <- {:>3}: jobs={} Q={} dangerous={} big={} fixed={} frac={} shortfalls={} cover={} ext={} wF(prev)={} wF(sub)={} wF={}",
                s.k,
                s.base,
                s.window_jobs,
                s.q,
                s.dangerous,
                s.big_jobs,
                s.fixed_jobs,
                fmt_rational(&s.frac_cost),
                s.frac_shortfalls,
                s.cover_cost,
                s.ext_cost,
                s.wf_prev,
                s.wf_sub,
                s.wf_bold
            );
        }
        for (z, c) in &self.candidates {
            let mark = if Some(*z) == self.chosen { " *" } else { "" };
            let _ = writeln!(out, "candidate S_{z}: wF={c}{mark}");
        }
        out
    }
}

/// Window sub-instances: for each `k` in `width..=last`, the jobs of classes
/// `k-width+1 ..= min(k, K)`. `None` when that range holds no jobs.
pub fn build_subinstances<T: Scalar>(
    inst: &Instance<T>,
    part: &ClassPartition,
    width: usize,
    last: usize,
) -> Vec<(usize, Option<Instance<T>>)> {
    assert!(width >= 1);
    (width..=last)
        .map(|k| {
            let hi = k.min(part.max_class());
            (k, inst.restrict(&part.members_in(k + 1 - width, hi)))
        })
        .collect()
}

/// `d_tent = max(C(prev), C(sub))` for carried jobs, `C(sub)` for new ones.
pub fn tentative_deadlines<T: Scalar>(
    prev: &Schedule<T>,
    sub: &Schedule<T>,
    carry: &BTreeSet<JobId>,
    new: &BTreeSet<JobId>,
) -> Result<BTreeMap<JobId, T>, (JobId, &'static str)> {
    let mut out = BTreeMap::new();
    for &id in carry {
        let a = prev.completion(id).ok_or((id, "previous schedule"))?;
        let b = sub.completion(id).ok_or((id, "window schedule"))?;
        out.insert(id, if a > b { a.clone() } else { b.clone() });
    }
    for &id in new {
        let c = sub.completion(id).ok_or((id, "window schedule"))?;
        out.insert(id, c.clone());
    }
    Ok(out)
}

/// `Q`: total size of the jobs in classes strictly below `below`.
pub fn occupied_volume<T: Scalar>(inst: &Instance<T>, part: &ClassPartition, below: usize) -> T {
    let ids = part.members_in(1, below.saturating_sub(1));
    sum(ids.iter().map(|id| inst.job(*id).unwrap().size.clone()))
}

/// Relevant intervals `(r_a, d_b]` whose contained demand exceeds free time.
pub fn find_dangerous<T: Scalar>(
    jobs: &[Job<T>],
    tent: &BTreeMap<JobId, T>,
    avail: &Availability<T>,
) -> Vec<CoverPoint<T>> {
    let windows: Vec<(T, T, T)> = jobs
        .iter()
        .map(|j| (j.release.clone(), j.size.clone(), tent[&j.id].clone()))
        .collect();
    let mut pts: Vec<CoverPoint<T>> = overloaded_intervals(&windows, avail, false)
        .into_iter()
        .map(|w| CoverPoint {
            t1: w.start,
            t2: w.end,
        })
        .collect();
    pts.sort();
    pts.dedup();
    pts
}

/// `L = ceil(7 log2 n)`: the least `L` with `2^L >= n^7`.
pub fn ladder_top(n: usize) -> u32 {
    let target = BigUint::from(n.max(1)).pow(7);
    let mut l = 0u32;
    let mut p = BigUint::one();
    while p < target {
        p <<= 1u32;
        l += 1;
    }
    l
}

/// `ceil(sqrt n)`.
pub fn ceil_sqrt(n: usize) -> usize {
    let r = n.sqrt();
    if r * r < n {
        r + 1
    } else {
        r
    }
}

/// Which window jobs get which kind of extension.
#[derive(Debug, Clone, Copy)]
pub enum StepShape<'a> {
    /// Every window job of size `>= Q` gets the full ladder.
    Standard,
    /// Jobs in `newer` get one fixed extension of `ceil(p / ceil(sqrt n))`;
    /// the remaining (oldest-class) jobs of size `>= Q` get the ladder with
    /// the doubled fractional weights.
    Windowed { newer: &'a BTreeSet<JobId> },
}

/// Cover instance plus the classification of window jobs it was built from.
#[derive(Debug, Clone)]
pub struct CoverPlan<T> {
    pub r2c: R2CInstance<T>,
    pub big: BTreeSet<JobId>,
    pub fixed: BTreeSet<JobId>,
}

pub fn build_cover_instance<T: Scalar>(
    dangerous: Vec<CoverPoint<T>>,
    jobs: &[Job<T>],
    tent: &BTreeMap<JobId, T>,
    q: &T,
    n: usize,
    shape: StepShape<'_>,
) -> Result<CoverPlan<T>, CoverError> {
    let top = ladder_top(n);
    let root = <T as Scalar>::from_usize(ceil_sqrt(n));
    let mut rects = Vec::new();
    let mut big = BTreeSet::new();
    let mut fixed = BTreeSet::new();
    for j in jobs {
        let d = tent[&j.id].clone();
        let is_fixed = matches!(shape, StepShape::Windowed { newer } if newer.contains(&j.id));
        if is_fixed {
            let ext = Integer::div_ceil(&j.size, &root);
            rects.push(CoverRect {
                owner: j.id,
                level: 0,
                x_max: j.release.clone(),
                y_min: d.clone(),
                y_max: d + ext.clone(),
                cost: j.weight.clone() * ext,
            });
            fixed.insert(j.id);
        } else if j.size >= *q {
            for level in 0..=top {
                let stretch = T::pow2(level) * j.size.clone();
                rects.push(CoverRect {
                    owner: j.id,
                    level,
                    x_max: j.release.clone(),
                    y_min: d.clone(),
                    y_max: d.clone() + stretch.clone(),
                    cost: j.weight.clone() * stretch,
                });
            }
            big.insert(j.id);
        }
    }
    let mode = match shape {
        StepShape::Standard => CoverMode::Standard,
        StepShape::Windowed { .. } => CoverMode::Windowed,
    };
    Ok(CoverPlan {
        r2c: R2CInstance::new(dangerous, rects, n, mode)?,
        big,
        fixed,
    })
}

/// Extended deadline = top edge of the highest selected rectangle of each
/// owner; final = extended + `Q` for owners, tentative for everyone else.
pub fn extend_deadlines<T: Scalar>(
    r2c: &R2CInstance<T>,
    sol: &CoverSolution<T>,
    tent: &BTreeMap<JobId, T>,
    q: &T,
) -> Result<BTreeMap<JobId, DeadlineRecord<T>>, JobId> {
    let mut top: BTreeMap<JobId, u32> = BTreeMap::new();
    for &(owner, level) in &sol.selected {
        let e = top.entry(owner).or_insert(level);
        *e = (*e).max(level);
    }
    let owners: BTreeSet<JobId> = r2c.rects().iter().map(|r| r.owner).collect();
    let mut out = BTreeMap::new();
    for (&id, d) in tent {
        let rec = if owners.contains(&id) {
            let level = *top.get(&id).ok_or(id)?;
            let ext = r2c.rect(id, level).expect("selected rect exists").y_max.clone();
            DeadlineRecord {
                tent: d.clone(),
                fin: ext.clone() + q.clone(),
                ext,
            }
        } else {
            DeadlineRecord {
                tent: d.clone(),
                ext: d.clone(),
                fin: d.clone(),
            }
        };
        out.insert(id, rec);
    }
    Ok(out)
}

fn final_map<T: Scalar>(rec: &BTreeMap<JobId, DeadlineRecord<T>>) -> BTreeMap<JobId, T> {
    rec.iter().map(|(id, r)| (*id, r.fin.clone())).collect()
}

/// Every relevant interval under the final deadlines has demand within its
/// free time.
pub fn verify_final_safety<T: Scalar>(
    jobs: &[Job<T>],
    rec: &BTreeMap<JobId, DeadlineRecord<T>>,
    avail: &Availability<T>,
) -> Result<(), Witness<T>> {
    let windows: Vec<(T, T, T)> = jobs
        .iter()
        .map(|j| (j.release.clone(), j.size.clone(), rec[&j.id].fin.clone()))
        .collect();
    match overloaded_intervals(&windows, avail, true).pop() {
        None => Ok(()),
        Some(w) => Err(w),
    }
}

/// EDF the window jobs into the free time of `lower` by their final
/// deadlines. `lower`'s segments are kept verbatim.
pub fn insert_jobs<T: Scalar>(
    lower: &Schedule<T>,
    jobs: &[Job<T>],
    rec: &BTreeMap<JobId, DeadlineRecord<T>>,
) -> Result<Schedule<T>, ScheduleError> {
    if jobs.is_empty() {
        return Ok(lower.clone());
    }
    let dl = DeadlineMap::new(jobs, final_map(rec))?;
    let placed = edf_schedule(jobs, &dl, &Availability::occupied_by(lower))?;
    Ok(lower.merged_with(&placed))
}

struct StepInput<'a, T> {
    k: usize,
    base: usize,
    prev: &'a Schedule<T>,
    sub: &'a Schedule<T>,
    oldest: usize,
    newest: usize,
    windowed: bool,
}

type StepOutput<T> = (Schedule<T>, StepRecord<T>, Option<StepTrace<T>>);

struct Ctx<'a, T> {
    inst: &'a Instance<T>,
    part: &'a ClassPartition,
    trace: bool,
}

fn stitch_step<T: Scalar>(
    ctx: &Ctx<'_, T>,
    step: StepInput<'_, T>,
) -> Result<StepOutput<T>, StitchError> {
    let StepInput {
        k,
        base,
        prev,
        sub,
        oldest,
        newest,
        windowed,
    } = step;
    let n = ctx.inst.n();
    let frozen_ids = ctx.part.members_in(1, oldest - 1);
    let frozen = prev.restricted_to(&frozen_ids);
    let avail = Availability::occupied_by(&frozen);
    let q = occupied_volume(ctx.inst, ctx.part, oldest);

    let carry = ctx.part.members(oldest);
    let newer = ctx.part.members_in(oldest + 1, newest);
    let window: BTreeSet<JobId> = carry.union(&newer).copied().collect();
    let jobs: Vec<Job<T>> = window
        .iter()
        .map(|id| ctx.inst.job(*id).unwrap().clone())
        .collect();

    let tent = tentative_deadlines(prev, sub, &carry, &newer)
        .map_err(|(job, which)| StitchError::MissingJob { k, job, which })?;
    let dangerous = find_dangerous(&jobs, &tent, &avail);
    let dangerous_count = dangerous.len();
    let shape = if windowed {
        StepShape::Windowed { newer: &newer }
    } else {
        StepShape::Standard
    };
    let plan = build_cover_instance(dangerous, &jobs, &tent, &q, n, shape)?;
    let fractional = build_fractional(&plan.r2c);
    let frac_cost = fractional.cost(&plan.r2c);
    let frac_shortfalls = verify_fractional_cover(&plan.r2c, &fractional)
        .err()
        .map_or(0, |v| v.len());
    let cover = greedy_cover(&plan.r2c)?;
    verify_cover(&plan.r2c, &cover)
        .map_err(|violation| StitchError::InvalidCover { k, violation })?;

    let rec = extend_deadlines(&plan.r2c, &cover, &tent, &q)
        .map_err(|job| StitchError::NoLevel { k, job })?;
    verify_final_safety(&jobs, &rec, &avail).map_err(|w| StitchError::Unsafe {
        k,
        start: w.start.to_string(),
        end: w.end.to_string(),
        demand: w.demand.to_string(),
        free: w.free.to_string(),
    })?;
    let result = insert_jobs(&frozen, &jobs, &rec)?;

    let ext_cost = sum(jobs
        .iter()
        .map(|j| j.weight.clone() * (rec[&j.id].fin.clone() - rec[&j.id].tent.clone())));
    let big_weighted_size = sum(plan
        .big
        .iter()
        .map(|id| ctx.inst.job(*id).unwrap().weighted_size()));
    let fixed_cost = sum(plan
        .fixed
        .iter()
        .map(|id| plan.r2c.rect(*id, 0).unwrap().cost.clone()));
    let record = StepRecord {
        k,
        base,
        window_jobs: jobs.len(),
        q,
        dangerous: dangerous_count,
        big_jobs: plan.big.len(),
        fixed_jobs: plan.fixed.len(),
        frac_cost,
        frac_shortfalls,
        cover_cost: cover.cost.clone(),
        cover_points: plan.r2c.points().len(),
        ext_cost,
        big_weighted_size,
        fixed_cost,
        wf_prev: schedule_cost(prev, ctx.inst),
        wf_sub: schedule_cost(sub, ctx.inst),
        wf_bold: schedule_cost(&result, ctx.inst),
    };
    if !record.extension_bound_holds() {
        return Err(StitchError::Ledger {
            k,
            what: format!(
                "extension {} > cover {} + big {} + fixed {}",
                record.ext_cost, record.cover_cost, record.big_weighted_size, record.fixed_cost
            ),
        });
    }
    if !record.chain_holds() {
        return Err(StitchError::Ledger {
            k,
            what: format!(
                "wF {} > prev {} + sub {} + extension {}",
                record.wf_bold, record.wf_prev, record.wf_sub, record.ext_cost
            ),
        });
    }
    if windowed && !fixed_rounding_holds(ctx.inst, &plan.fixed, &record.fixed_cost) {
        return Err(StitchError::Ledger {
            k,
            what: format!("fixed extensions {} exceed rounding slack", record.fixed_cost),
        });
    }
    let trace = ctx.trace.then(|| StepTrace {
        k,
        base,
        frozen: frozen_ids,
        window,
        fixed: plan.fixed.clone(),
        r2c: plan.r2c.clone(),
        fractional,
        cover,
        deadlines: rec,
        prev: prev.clone(),
        sub: sub.clone(),
        result: result.clone(),
    });
    Ok((result, record, trace))
}

/// `s * sum w ceil(p/s) <= sum w p + (s - 1) sum w` with `s = ceil(sqrt n)`.
pub fn fixed_rounding_holds<T: Scalar>(
    inst: &Instance<T>,
    fixed: &BTreeSet<JobId>,
    fixed_cost: &T,
) -> bool {
    let s = <T as Scalar>::from_usize(ceil_sqrt(inst.n()));
    let jobs: Vec<&Job<T>> = fixed.iter().map(|id| inst.job(*id).unwrap()).collect();
    let wp = sum(jobs.iter().map(|j| j.weighted_size()));
    let w = sum(jobs.iter().map(|j| j.weight.clone()));
    s.clone() * fixed_cost.clone() <= wp + (s - T::one()) * w
}

fn solve_all<T: Scalar>(
    alg: &dyn SubSolver<T>,
    subs: Vec<(usize, Option<Instance<T>>)>,
) -> Result<BTreeMap<usize, Schedule<T>>, SolverError> {
    subs.into_par_iter()
        .map(|(k, sub)| match sub {
            Some(inst) => alg.solve(&inst).map(|s| (k, s)),
            None => Ok((k, Schedule::empty())),
        })
        .collect()
}

/// Pairwise stitching over classes `2..=K`.
pub fn run_standard<T: Scalar>(
    inst: &Instance<T>,
    alg: &dyn SubSolver<T>,
    trace: bool,
) -> Result<(Schedule<T>, StitchReport<T>), StitchError> {
    let part = partition_classes(inst);
    let big_k = part.max_class();
    if inst.n() == 1 || part.nonempty_count() <= 1 {
        let s = alg.solve(inst)?;
        let cost = schedule_cost(&s, inst);
        return Ok((s, StitchReport::direct("standard", inst.n(), big_k, 1, cost)));
    }
    let subs = solve_all(alg, build_subinstances(inst, &part, 2, big_k))?;
    let ctx = Ctx {
        inst,
        part: &part,
        trace,
    };
    let mut report = StitchReport {
        mode: "standard",
        n: inst.n(),
        max_class: big_k,
        width: 1,
        sub_costs: subs
            .iter()
            .map(|(k, s)| (*k, schedule_cost(s, inst)))
            .collect(),
        steps: Vec::new(),
        candidates: Vec::new(),
        chosen: None,
        direct: false,
        final_cost: T::zero(),
        traces: Vec::new(),
    };
    let mut current = subs[&2].clone();
    for k in 3..=big_k {
        let (next, record, tr) = stitch_step(
            &ctx,
            StepInput {
                k,
                base: k - 1,
                prev: &current,
                sub: &subs[&k],
                oldest: k - 1,
                newest: k,
                windowed: false,
            },
        )?;
        report.steps.push(record);
        report.traces.extend(tr);
        current = next;
    }
    report.final_cost = schedule_cost(&current, inst);
    Ok((current, report))
}

/// Least `b` with `b (eps - 1/sqrt n) >= 4 gamma`, i.e. `b = ceil(2 gamma / eps')`
/// for `eps' = (eps - 1/sqrt n) / 2`.
pub fn window_width<T: Scalar>(eps: &Rational<T>, gamma: u32, n: usize) -> Result<usize, StitchError> {
    let zero = Ratio::zero();
    let half = Ratio::new(T::one(), <T as Scalar>::from_usize(2));
    if *eps <= zero || *eps >= half {
        return Err(StitchError::Param(format!(
            "eps must lie in (0, 1/2), got {}",
            fmt_rational(eps)
        )));
    }
    let nn = Ratio::from_integer(<T as Scalar>::from_usize(n));
    // eps > 1/sqrt(n)  <=>  eps^2 n > 1
    if eps.clone() * eps.clone() * nn.clone() <= Ratio::one() {
        return Err(StitchError::Param(format!(
            "eps' = (eps - 1/sqrt n)/2 must be positive; n = {n} is too small for eps = {}",
            fmt_rational(eps)
        )));
    }
    let four_gamma = Ratio::from_integer(<T as Scalar>::from_usize(4 * gamma as usize));
    let enough = |b: usize| {
        let b = Ratio::from_integer(<T as Scalar>::from_usize(b));
        let lhs = b.clone() * eps.clone() - four_gamma.clone();
        lhs >= zero && lhs.clone() * lhs * nn.clone() >= b.clone() * b
    };
    let mut hi = 1usize;
    while !enough(hi) {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| StitchError::Param("window width overflows".into()))?;
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if enough(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Multi-class windows of `b + 1` classes; returns the cheapest of the
/// schedules for `K ..= K + b - 1`.
pub fn run_windowed<T: Scalar>(
    inst: &Instance<T>,
    alg: &dyn SubSolver<T>,
    params: &WindowParams<T>,
    trace: bool,
) -> Result<(Schedule<T>, StitchReport<T>), StitchError> {
    let b = match params.width {
        Some(b) => b,
        None => window_width(&params.eps, params.gamma, inst.n())?,
    };
    if b == 0 {
        return Err(StitchError::Param("window width must be at least 1".into()));
    }
    if b == 1 {
        return run_standard(inst, alg, trace);
    }
    let part = partition_classes(inst);
    let big_k = part.max_class();
    if inst.n() == 1 || part.nonempty_count() <= 1 || big_k <= b {
        let s = alg.solve(inst)?;
        let cost = schedule_cost(&s, inst);
        return Ok((s, StitchReport::direct("windowed", inst.n(), big_k, b, cost)));
    }
    let last = big_k + b - 1;
    // Prefixes J_1..J_k for k <= b, then windows J_{k-b}..J_k.
    let mut jobs_to_solve: Vec<(usize, Option<Instance<T>>)> = (1..=b)
        .map(|k| (k, inst.restrict(&part.members_in(1, k))))
        .collect();
    jobs_to_solve.extend(build_subinstances(inst, &part, b + 1, last));
    let solved = solve_all(alg, jobs_to_solve)?;

    let ctx = Ctx {
        inst,
        part: &part,
        trace,
    };
    let mut report = StitchReport {
        mode: "windowed",
        n: inst.n(),
        max_class: big_k,
        width: b,
        sub_costs: solved
            .iter()
            .map(|(k, s)| (*k, schedule_cost(s, inst)))
            .collect(),
        steps: Vec::new(),
        candidates: Vec::new(),
        chosen: None,
        direct: false,
        final_cost: T::zero(),
        traces: Vec::new(),
    };
    let mut bold: BTreeMap<usize, Schedule<T>> = (1..=b).map(|k| (k, solved[&k].clone())).collect();
    for k in (b + 1)..=last {
        let (next, record, tr) = stitch_step(
            &ctx,
            StepInput {
                k,
                base: k - b,
                prev: &bold[&(k - b)],
                sub: &solved[&k],
                oldest: k - b,
                newest: k.min(big_k),
                windowed: true,
            },
        )?;
        report.steps.push(record);
        report.traces.extend(tr);
        bold.insert(k, next);
    }
    let mut best: Option<(usize, T)> = None;
    for z in big_k..=last {
        let c = schedule_cost(&bold[&z], inst);
        report.candidates.push((z, c.clone()));
        if best.as_ref().is_none_or(|(_, bc)| c < *bc) {
            best = Some((z, c));
        }
    }
    let (z, cost) = best.expect("at least one candidate");
    report.chosen = Some(z);
    report.final_cost = cost;
    Ok((bold.remove(&z).unwrap(), report))
}

/// Dispatch on the configured mode.
pub fn run<T: Scalar>(
    inst: &Instance<T>,
    alg: &dyn SubSolver<T>,
    config: &StitchConfig<T>,
) -> Result<(Schedule<T>, StitchReport<T>), StitchError> {
    match &config.mode {
        StitchMode::Standard => run_standard(inst, alg, config.trace),
        StitchMode::Windowed(p) => run_windowed(inst, alg, p, config.trace),
    }
}
