//! Preemptive schedules on one machine, EDF, and the interval feasibility test.
//!
//! Time is divided into unit slots `(t-1, t]`. A segment `(start, end]`
//! processes one job on every slot it covers. An [`Availability`] marks slots
//! already taken by frozen work; everything else is free.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use thiserror::Error;

use crate::model::{Instance, Job, JobId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment<T> {
    pub job: JobId,
    pub start: T,
    pub end: T,
}

impl<T: Scalar> Segment<T> {
    pub fn len(&self) -> T {
        self.end.clone() - self.start.clone()
    }
}

/// Segments sorted by start time plus per-job completion times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule<T> {
    segments: Vec<Segment<T>>,
    completions: BTreeMap<JobId, T>,
}

impl<T: Scalar> Default for Schedule<T> {
    fn default() -> Self {
        Schedule::empty()
    }
}

impl<T: Scalar> Schedule<T> {
    pub fn empty() -> Self {
        Schedule {
            segments: Vec::new(),
            completions: BTreeMap::new(),
        }
    }

    pub fn from_segments(mut segments: Vec<Segment<T>>) -> Self {
        segments.sort_by(|a, b| (&a.start, &a.end, a.job).cmp(&(&b.start, &b.end, b.job)));
        let mut completions: BTreeMap<JobId, T> = BTreeMap::new();
        for s in &segments {
            completions
                .entry(s.job)
                .and_modify(|c| {
                    if s.end > *c {
                        *c = s.end.clone();
                    }
                })
                .or_insert_with(|| s.end.clone());
        }
        Schedule {
            segments,
            completions,
        }
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn completions(&self) -> &BTreeMap<JobId, T> {
        &self.completions
    }

    pub fn completion(&self, id: JobId) -> Option<&T> {
        self.completions.get(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn job_ids(&self) -> BTreeSet<JobId> {
        self.completions.keys().copied().collect()
    }

    pub fn segments_of(&self, id: JobId) -> Vec<&Segment<T>> {
        self.segments.iter().filter(|s| s.job == id).collect()
    }

    /// Keep only the segments of the given jobs.
    pub fn restricted_to(&self, ids: &BTreeSet<JobId>) -> Self {
        Schedule::from_segments(
            self.segments
                .iter()
                .filter(|s| ids.contains(&s.job))
                .cloned()
                .collect(),
        )
    }

    /// Union of two schedules' segments. No disjointness check.
    pub fn merged_with(&self, other: &Schedule<T>) -> Self {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        Schedule::from_segments(segs)
    }

    /// One `job_id start end` line per segment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            out.push_str(&format!("{} {} {}\n", s.job, s.start, s.end));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ScheduleError> {
        let mut segs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| ScheduleError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("expected `job_id start end`"));
            }
            let job: JobId = f[0].parse().map_err(|_| bad("bad job id"))?;
            let start: T = f[1].parse().map_err(|_| bad("bad start"))?;
            let end: T = f[2].parse().map_err(|_| bad("bad end"))?;
            segs.push(Segment { job, start, end });
        }
        Ok(Schedule::from_segments(segs))
    }
}

impl<T: Scalar> fmt::Display for Schedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Time occupied by frozen work; the complement is free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Availability<T> {
    busy: Vec<(T, T)>,
}

impl<T: Scalar> Availability<T> {
    pub fn full() -> Self {
        Availability { busy: Vec::new() }
    }

    /// Busy intervals `(start, end]`; sorted and coalesced on construction.
    pub fn from_busy(mut busy: Vec<(T, T)>) -> Self {
        busy.retain(|(a, b)| a < b);
        busy.sort();
        let mut merged: Vec<(T, T)> = Vec::with_capacity(busy.len());
        for (a, b) in busy {
            match merged.last_mut() {
                Some(last) if a <= last.1 => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => merged.push((a, b)),
            }
        }
        Availability { busy: merged }
    }

    pub fn occupied_by(sched: &Schedule<T>) -> Self {
        Availability::from_busy(
            sched
                .segments()
                .iter()
                .map(|s| (s.start.clone(), s.end.clone()))
                .collect(),
        )
    }

    pub fn busy(&self) -> &[(T, T)] {
        &self.busy
    }

    /// Total busy length.
    pub fn occupied(&self) -> T {
        self.busy
            .iter()
            .fold(T::zero(), |acc, (a, b)| acc + b.clone() - a.clone())
    }

    /// Number of free unit slots in `(start, end]`.
    pub fn free_length(&self, start: &T, end: &T) -> T {
        if end <= start {
            return T::zero();
        }
        let mut free = end.clone() - start.clone();
        let first = self.busy.partition_point(|(_, b)| b <= start);
        for (a, b) in &self.busy[first..] {
            if a >= end {
                break;
            }
            let lo = if a > start { a } else { start };
            let hi = if b < end { b } else { end };
            free = free - (hi.clone() - lo.clone());
        }
        free
    }

    /// Whether `(start, end]` avoids every busy interval.
    pub fn is_free(&self, start: &T, end: &T) -> bool {
        self.free_length(start, end) == end.clone() - start.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("no deadline for job {0}")]
    MissingDeadline(JobId),
    #[error("job {job}: deadline {deadline} earlier than release + size")]
    DeadlineTooEarly { job: JobId, deadline: String },
    #[error("job {job} completes at {completion}, after its deadline {deadline}")]
    DeadlineMiss {
        job: JobId,
        completion: String,
        deadline: String,
    },
    #[error("schedule line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Per-job deadlines, each at least `r_j + p_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlineMap<T> {
    deadlines: BTreeMap<JobId, T>,
}

impl<T: Scalar> DeadlineMap<T> {
    pub fn new(jobs: &[Job<T>], deadlines: BTreeMap<JobId, T>) -> Result<Self, ScheduleError> {
        for j in jobs {
            let d = deadlines
                .get(&j.id)
                .ok_or(ScheduleError::MissingDeadline(j.id))?;
            if *d < j.release.clone() + j.size.clone() {
                return Err(ScheduleError::DeadlineTooEarly {
                    job: j.id,
                    deadline: d.to_string(),
                });
            }
        }
        Ok(DeadlineMap { deadlines })
    }

    pub fn get(&self, id: JobId) -> Option<&T> {
        self.deadlines.get(&id)
    }

    pub fn as_map(&self) -> &BTreeMap<JobId, T> {
        &self.deadlines
    }
}

/// A relevant interval `(start, end]` whose contained demand exceeds its free time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness<T> {
    pub start: T,
    pub end: T,
    pub demand: T,
    pub free: T,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility<T> {
    Feasible,
    Infeasible(Witness<T>),
}

impl<T> Feasibility<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Every relevant interval `(r_a, d_b]` with `r_a < d_b` whose contained
/// demand (jobs with `r >= r_a` and `d <= d_b`) exceeds the free length.
/// Stops after the first hit when `first_only` is set.
pub(crate) fn overloaded_intervals<T: Scalar>(
    windows: &[(T, T, T)],
    avail: &Availability<T>,
    first_only: bool,
) -> Vec<Witness<T>> {
    let mut releases: Vec<&T> = windows.iter().map(|(r, _, _)| r).collect();
    releases.sort();
    releases.dedup();
    let mut deadlines: Vec<&T> = windows.iter().map(|(_, _, d)| d).collect();
    deadlines.sort();
    deadlines.dedup();

    let mut out = Vec::new();
    for t1 in releases {
        let mut inside: Vec<(&T, &T)> = windows
            .iter()
            .filter(|(r, _, _)| r >= t1)
            .map(|(_, p, d)| (d, p))
            .collect();
        inside.sort();
        let mut demand = T::zero();
        let mut next = 0;
        for t2 in deadlines.iter().filter(|d| **d > t1) {
            while next < inside.len() && inside[next].0 <= *t2 {
                demand = demand + inside[next].1.clone();
                next += 1;
            }
            let free = avail.free_length(t1, t2);
            if demand > free {
                out.push(Witness {
                    start: t1.clone(),
                    end: (*t2).clone(),
                    demand: demand.clone(),
                    free,
                });
                if first_only {
                    return out;
                }
            }
        }
    }
    out
}

fn windows_of<T: Scalar>(jobs: &[Job<T>], dl: &DeadlineMap<T>) -> Vec<(T, T, T)> {
    jobs.iter()
        .map(|j| {
            let d = dl.get(j.id).expect("deadline map covers every job");
            (j.release.clone(), j.size.clone(), d.clone())
        })
        .collect()
}

/// Interval test: EDF meets every deadline iff no relevant interval holds
/// more contained work than free time.
pub fn edf_feasible<T: Scalar>(
    jobs: &[Job<T>],
    dl: &DeadlineMap<T>,
    avail: &Availability<T>,
) -> Feasibility<T> {
    match overloaded_intervals(&windows_of(jobs, dl), avail, true).pop() {
        None => Feasibility::Feasible,
        Some(w) => Feasibility::Infeasible(w),
    }
}

/// Input to the priority simulator: smaller `key` runs first, ties by id.
#[derive(Debug, Clone)]
pub struct SimJob<T, K> {
    pub id: JobId,
    pub release: T,
    pub size: T,
    pub key: K,
}

/// Preemptive fixed-priority simulation on the free time of `avail`.
///
/// At every instant the released unfinished job with the smallest
/// `(key, id)` runs. Decision points are releases, completions, and busy
/// interval boundaries, so the result has linearly many segments.
pub fn simulate_priority<T: Scalar, K: Ord + Clone>(
    jobs: &[SimJob<T, K>],
    avail: &Availability<T>,
) -> Schedule<T> {
    let mut pending: Vec<usize> = (0..jobs.len()).collect();
    // Pop from the back in release order.
    pending.sort_by(|&a, &b| (&jobs[b].release, jobs[b].id).cmp(&(&jobs[a].release, jobs[a].id)));
    let mut remaining: Vec<T> = jobs.iter().map(|j| j.size.clone()).collect();
    let mut ready: BinaryHeap<Reverse<(K, JobId, usize)>> = BinaryHeap::new();
    let busy = avail.busy();
    let mut busy_idx = 0;
    let mut segs: Vec<Segment<T>> = Vec::new();

    let mut t = match pending.last() {
        Some(&i) => jobs[i].release.clone(),
        None => return Schedule::empty(),
    };
    loop {
        while let Some(&i) = pending.last() {
            if jobs[i].release > t {
                break;
            }
            ready.push(Reverse((jobs[i].key.clone(), jobs[i].id, i)));
            pending.pop();
        }
        let next_release = pending.last().map(|&i| jobs[i].release.clone());
        let Some(Reverse((_, _, top))) = ready.peek().cloned() else {
            match next_release {
                Some(r) => {
                    t = r;
                    continue;
                }
                None => break,
            }
        };
        while busy_idx < busy.len() && busy[busy_idx].1 <= t {
            busy_idx += 1;
        }
        if busy_idx < busy.len() && busy[busy_idx].0 <= t {
            t = busy[busy_idx].1.clone();
            continue;
        }
        let mut end = t.clone() + remaining[top].clone();
        if let Some((b, _)) = busy.get(busy_idx) {
            if *b < end {
                end = b.clone();
            }
        }
        if let Some(r) = next_release {
            if r < end {
                end = r;
            }
        }
        remaining[top] = remaining[top].clone() - (end.clone() - t.clone());
        match segs.last_mut() {
            Some(last) if last.job == jobs[top].id && last.end == t => last.end = end.clone(),
            _ => segs.push(Segment {
                job: jobs[top].id,
                start: t.clone(),
                end: end.clone(),
            }),
        }
        if remaining[top].is_zero() {
            ready.pop();
        }
        t = end;
    }
    Schedule::from_segments(segs)
}

/// EDF over the free time of `avail`, ties by smaller id. Never fails; use
/// [`edf_schedule`] when every deadline must be met.
pub fn edf_simulate<T: Scalar>(
    jobs: &[Job<T>],
    dl: &DeadlineMap<T>,
    avail: &Availability<T>,
) -> Schedule<T> {
    let sim: Vec<SimJob<T, T>> = jobs
        .iter()
        .map(|j| SimJob {
            id: j.id,
            release: j.release.clone(),
            size: j.size.clone(),
            key: dl.get(j.id).expect("deadline map covers every job").clone(),
        })
        .collect();
    simulate_priority(&sim, avail)
}

/// First job whose completion in `sched` is later than its deadline.
pub fn first_deadline_miss<T: Scalar>(
    sched: &Schedule<T>,
    dl: &DeadlineMap<T>,
) -> Option<(JobId, T, T)> {
    sched.completions().iter().find_map(|(id, c)| {
        let d = dl.get(*id)?;
        (c > d).then(|| (*id, c.clone(), d.clone()))
    })
}

/// EDF schedule that must meet every deadline; a miss means the caller
/// passed infeasible deadlines.
pub fn edf_schedule<T: Scalar>(
    jobs: &[Job<T>],
    dl: &DeadlineMap<T>,
    avail: &Availability<T>,
) -> Result<Schedule<T>, ScheduleError> {
    let s = edf_simulate(jobs, dl, avail);
    match first_deadline_miss(&s, dl) {
        None => Ok(s),
        Some((job, c, d)) => Err(ScheduleError::DeadlineMiss {
            job,
            completion: c.to_string(),
            deadline: d.to_string(),
        }),
    }
}

/// Total weighted flow-time and the per-job terms `w_j (C_j - r_j)`.
pub fn weighted_flow<T: Scalar>(sched: &Schedule<T>, jobs: &[Job<T>]) -> (T, BTreeMap<JobId, T>) {
    let mut total = T::zero();
    let mut per_job = BTreeMap::new();
    for j in jobs {
        let c = sched
            .completion(j.id)
            .unwrap_or_else(|| panic!("job {} missing from schedule", j.id));
        let term = j.weight.clone() * (c.clone() - j.release.clone());
        total = total + term.clone();
        per_job.insert(j.id, term);
    }
    (total, per_job)
}

/// Weighted flow-time of a schedule, scoring every job it contains.
pub fn schedule_cost<T: Scalar>(sched: &Schedule<T>, inst: &Instance<T>) -> T {
    sched
        .completions()
        .iter()
        .map(|(id, c)| {
            let j = inst.job(*id).expect("scheduled job belongs to the instance");
            j.weight.clone() * (c.clone() - j.release.clone())
        })
        .fold(T::zero(), |a, b| a + b)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleViolation {
    #[error("segments not sorted by start at index {0}")]
    Unsorted(usize),
    #[error("job {job}: empty or reversed segment ({start}, {end}]")]
    EmptySegment { job: JobId, start: String, end: String },
    #[error("segments of jobs {first} and {second} overlap at {at}")]
    Overlap {
        first: JobId,
        second: JobId,
        at: String,
    },
    #[error("job {job} runs in occupied time ({start}, {end}]")]
    Occupied { job: JobId, start: String, end: String },
    #[error("job {job} runs at {start}, before its release {release}")]
    EarlyStart {
        job: JobId,
        start: String,
        release: String,
    },
    #[error("segment for unknown job {0}")]
    UnknownJob(JobId),
    #[error("job {job}: processed {got} units, size is {expected}")]
    Volume {
        job: JobId,
        expected: String,
        got: String,
    },
}

/// Check disjointness, free-time containment, release times, and exact
/// per-job volume. Returns the first violation found.
pub fn validate_schedule<T: Scalar>(
    sched: &Schedule<T>,
    inst: &Instance<T>,
    avail: &Availability<T>,
) -> Result<(), ScheduleViolation> {
    let segs = sched.segments();
    let mut volume: BTreeMap<JobId, T> = BTreeMap::new();
    for (i, s) in segs.iter().enumerate() {
        if i > 0 && segs[i - 1].start > s.start {
            return Err(ScheduleViolation::Unsorted(i));
        }
        if s.end <= s.start {
            return Err(ScheduleViolation::EmptySegment {
                job: s.job,
                start: s.start.to_string(),
                end: s.end.to_string(),
            });
        }
        if i > 0 && segs[i - 1].end > s.start {
            return Err(ScheduleViolation::Overlap {
                first: segs[i - 1].job,
                second: s.job,
                at: s.start.to_string(),
            });
        }
        let job = inst.job(s.job).ok_or(ScheduleViolation::UnknownJob(s.job))?;
        if s.start < job.release {
            return Err(ScheduleViolation::EarlyStart {
                job: s.job,
                start: s.start.to_string(),
                release: job.release.to_string(),
            });
        }
        if !avail.is_free(&s.start, &s.end) {
            return Err(ScheduleViolation::Occupied {
                job: s.job,
                start: s.start.to_string(),
                end: s.end.to_string(),
            });
        }
        let v = volume.entry(s.job).or_insert_with(T::zero);
        *v = v.clone() + s.len();
    }
    for job in inst.jobs() {
        let got = volume.get(&job.id).cloned().unwrap_or_else(T::zero);
        if got != job.size {
            return Err(ScheduleViolation::Volume {
                job: job.id,
                expected: job.size.to_string(),
                got: got.to_string(),
            });
        }
    }
    Ok(())
}
