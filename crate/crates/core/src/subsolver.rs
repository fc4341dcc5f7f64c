//! Bounded-spread solvers plugged into the stitching driver.
//!
//! [`ExactOracle`] enumerates priority orders, [`UnitSlotOracle`] searches
//! unit-slot assignments directly and serves as its independent cross-check,
//! and [`Hdf`] is the highest-density-first heuristic used when instances are
//! too large for exact search.

use std::cmp::Ordering;
use std::collections::HashMap;

use thiserror::Error;

use crate::model::{Instance, JobId};
use crate::scalar::Scalar;
use crate::schedule::{schedule_cost, simulate_priority, Availability, Schedule, Segment, SimJob};

pub const DEFAULT_EXACT_LIMIT: usize = 8;
pub const DEFAULT_UNITSLOT_SIZE_LIMIT: usize = 12;
pub const DEFAULT_UNITSLOT_SPAN_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("{solver}: instance too large ({got} > limit {limit})")]
    TooLarge {
        solver: &'static str,
        limit: usize,
        got: String,
    },
    #[error("unknown solver {0:?} (expected exact, unitslot or hdf)")]
    Unknown(String),
}

/// A min weighted flow-time solver for (typically bounded-spread) instances.
pub trait SubSolver<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;
    fn is_exact(&self) -> bool;
    fn solve(&self, inst: &Instance<T>) -> Result<Schedule<T>, SolverError>;
}

/// Run, at every instant, the released unfinished job earliest in `order`.
pub fn priority_simulate<T: Scalar>(inst: &Instance<T>, order: &[JobId]) -> Schedule<T> {
    let rank: HashMap<JobId, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let sim: Vec<SimJob<T, usize>> = inst
        .jobs()
        .iter()
        .map(|j| SimJob {
            id: j.id,
            release: j.release.clone(),
            size: j.size.clone(),
            key: *rank.get(&j.id).expect("order covers every job"),
        })
        .collect();
    simulate_priority(&sim, &Availability::full())
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Minimum over all `n!` priority orders. Some priority order is optimal:
/// EDF with deadlines set to an optimal schedule's completion times is one.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    pub max_jobs: usize,
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle {
            max_jobs: DEFAULT_EXACT_LIMIT,
        }
    }
}

impl<T: Scalar> SubSolver<T> for ExactOracle {
    fn name(&self) -> &str {
        "exact"
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn solve(&self, inst: &Instance<T>) -> Result<Schedule<T>, SolverError> {
        if inst.n() > self.max_jobs {
            return Err(SolverError::TooLarge {
                solver: "exact",
                limit: self.max_jobs,
                got: inst.n().to_string(),
            });
        }
        let ids: Vec<JobId> = inst.ids().collect();
        let mut perm: Vec<usize> = (0..ids.len()).collect();
        let mut best: Option<(T, Schedule<T>)> = None;
        loop {
            let order: Vec<JobId> = perm.iter().map(|&i| ids[i]).collect();
            let s = priority_simulate(inst, &order);
            let cost = schedule_cost(&s, inst);
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, s));
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        Ok(best.expect("at least one order").1)
    }
}

pub fn exact_oracle<T: Scalar>(inst: &Instance<T>) -> Result<Schedule<T>, SolverError> {
    ExactOracle::default().solve(inst)
}

/// Exhaustive search over unit-slot assignments (including idling), memoized
/// on `(time, remaining sizes)`.
#[derive(Debug, Clone)]
pub struct UnitSlotOracle {
    pub max_total_size: usize,
    /// Bound on `max r - min r + P`, the number of slots searched.
    pub max_span: usize,
}

impl Default for UnitSlotOracle {
    fn default() -> Self {
        UnitSlotOracle {
            max_total_size: DEFAULT_UNITSLOT_SIZE_LIMIT,
            max_span: DEFAULT_UNITSLOT_SPAN_LIMIT,
        }
    }
}

#[derive(Clone, Copy)]
enum Move {
    Run(usize),
    Idle,
    Jump(i64),
}

/// Time offset and remaining work per job.
type SlotState = (i64, Vec<u32>);

struct SlotSearch<'a, T> {
    release: Vec<i64>,
    weight: Vec<T>,
    base: &'a T,
    horizon: i64,
    memo: HashMap<SlotState, Option<(T, Move)>>,
}

impl<T: Scalar> SlotSearch<'_, T> {
    fn best(&mut self, t: i64, rem: &[u32]) -> Option<T> {
        if rem.iter().all(|&r| r == 0) {
            return Some(T::zero());
        }
        if t >= self.horizon {
            return None;
        }
        let key = (t, rem.to_vec());
        if let Some(v) = self.memo.get(&key) {
            return v.as_ref().map(|(c, _)| c.clone());
        }
        let ready: Vec<usize> = (0..rem.len())
            .filter(|&j| rem[j] > 0 && self.release[j] <= t)
            .collect();
        let result = if ready.is_empty() {
            let next = (0..rem.len())
                .filter(|&j| rem[j] > 0)
                .map(|j| self.release[j])
                .min()
                .expect("some job unfinished");
            self.best(next, rem).map(|c| (c, Move::Jump(next)))
        } else {
            let mut best: Option<(T, Move)> = None;
            let mut next_rem = rem.to_vec();
            for &j in &ready {
                next_rem[j] -= 1;
                let add = if next_rem[j] == 0 {
                    let finish = self.base.clone() + T::from_i64(t + 1).unwrap();
                    let release = self.base.clone() + T::from_i64(self.release[j]).unwrap();
                    self.weight[j].clone() * (finish - release)
                } else {
                    T::zero()
                };
                if let Some(c) = self.best(t + 1, &next_rem) {
                    let c = c + add;
                    if best.as_ref().is_none_or(|(b, _)| c < *b) {
                        best = Some((c, Move::Run(j)));
                    }
                }
                next_rem[j] += 1;
            }
            if let Some(c) = self.best(t + 1, rem) {
                if best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, Move::Idle));
                }
            }
            best
        };
        self.memo.insert(key, result.clone());
        result.map(|(c, _)| c)
    }
}

impl<T: Scalar> SubSolver<T> for UnitSlotOracle {
    fn name(&self) -> &str {
        "unitslot"
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn solve(&self, inst: &Instance<T>) -> Result<Schedule<T>, SolverError> {
        let too_large = |got: String, limit| SolverError::TooLarge {
            solver: "unitslot",
            limit,
            got,
        };
        let total = inst.total_size();
        if total > <T as Scalar>::from_usize(self.max_total_size) {
            return Err(too_large(total.to_string(), self.max_total_size));
        }
        let base = inst.jobs().iter().map(|j| j.release.clone()).min().unwrap();
        let span = inst.max_release() - base.clone() + total.clone();
        if span > <T as Scalar>::from_usize(self.max_span) {
            return Err(too_large(span.to_string(), self.max_span));
        }
        let jobs = inst.jobs();
        let mut search = SlotSearch {
            release: jobs
                .iter()
                .map(|j| (j.release.clone() - base.clone()).to_i64().unwrap())
                .collect(),
            weight: jobs.iter().map(|j| j.weight.clone()).collect(),
            base: &base,
            horizon: span.to_i64().unwrap(),
            memo: HashMap::new(),
        };
        let mut rem: Vec<u32> = jobs.iter().map(|j| j.size.to_u32().unwrap()).collect();
        let mut t = 0i64;
        search.best(t, &rem).expect("horizon admits a schedule");
        let mut segs: Vec<Segment<T>> = Vec::new();
        while rem.iter().any(|&r| r > 0) {
            let mv = search.memo[&(t, rem.clone())].as_ref().unwrap().1;
            match mv {
                Move::Jump(next) => t = next,
                Move::Idle => t += 1,
                Move::Run(j) => {
                    rem[j] -= 1;
                    let start = base.clone() + T::from_i64(t).unwrap();
                    let end = start.clone() + T::one();
                    match segs.last_mut() {
                        Some(last) if last.job == jobs[j].id && last.end == start => last.end = end,
                        _ => segs.push(Segment {
                            job: jobs[j].id,
                            start,
                            end,
                        }),
                    }
                    t += 1;
                }
            }
        }
        Ok(Schedule::from_segments(segs))
    }
}

pub fn unitslot_oracle<T: Scalar>(inst: &Instance<T>) -> Result<Schedule<T>, SolverError> {
    UnitSlotOracle::default().solve(inst)
}

/// Highest density `w/p` first, ties by smaller size then id.
#[derive(Debug, Clone, Default)]
pub struct Hdf;

pub fn hdf_order<T: Scalar>(inst: &Instance<T>) -> Vec<JobId> {
    let mut jobs: Vec<_> = inst.jobs().iter().collect();
    jobs.sort_by(|a, b| {
        let lhs = a.weight.clone() * b.size.clone();
        let rhs = b.weight.clone() * a.size.clone();
        match rhs.cmp(&lhs) {
            Ordering::Equal => (&a.size, a.id).cmp(&(&b.size, b.id)),
            o => o,
        }
    });
    jobs.into_iter().map(|j| j.id).collect()
}

pub fn hdf_heuristic<T: Scalar>(inst: &Instance<T>) -> Schedule<T> {
    priority_simulate(inst, &hdf_order(inst))
}

impl<T: Scalar> SubSolver<T> for Hdf {
    fn name(&self) -> &str {
        "hdf"
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn solve(&self, inst: &Instance<T>) -> Result<Schedule<T>, SolverError> {
        Ok(hdf_heuristic(inst))
    }
}

/// Look up a solver by its CLI name.
pub fn solver_by_name<T: Scalar>(name: &str) -> Result<Box<dyn SubSolver<T>>, SolverError> {
    match name {
        "exact" => Ok(Box::new(ExactOracle::default())),
        "hdf" => Ok(Box::new(Hdf)),
        "unitslot" => Ok(Box::new(UnitSlotOracle::default())),
        other => Err(SolverError::Unknown(other.to_string())),
    }
}
