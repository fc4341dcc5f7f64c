//! Jobs, instances, the geometric class partition, and light-job pruning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::scalar::{sum, Rational, Scalar};
use crate::schedule::{simulate_priority, Availability, Schedule, SimJob};

/// Identifier of a job, unique within an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for JobId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(JobId)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Job<T> {
    pub id: JobId,
    pub release: T,
    pub size: T,
    pub weight: T,
}

impl<T: Scalar> Job<T> {
    pub fn new(id: u64, release: T, size: T, weight: T) -> Self {
        Job {
            id: JobId(id),
            release,
            size,
            weight,
        }
    }

    /// `w_j * p_j`, the flow cost of the job if it runs without delay.
    pub fn weighted_size(&self) -> T {
        self.weight.clone() * self.size.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("instance has no jobs")]
    Empty,
    #[error("job {0}: size must be positive")]
    NonPositiveSize(JobId),
    #[error("job {0}: weight must be positive")]
    NonPositiveWeight(JobId),
    #[error("job {0}: release must be nonnegative")]
    NegativeRelease(JobId),
    #[error("duplicate job id {0}")]
    DuplicateId(JobId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected `r p w` or `id r p w`, found {0} fields")]
    FieldCount(usize),
    #[error("not an integer: {0:?}")]
    NotAnInteger(String),
    #[error("non-positive size")]
    NonPositiveSize,
    #[error("non-positive weight")]
    NonPositiveWeight,
    #[error("negative release")]
    NegativeRelease,
    #[error("duplicate job id {0}")]
    DuplicateId(JobId),
    #[error("file contains no jobs")]
    Empty,
}

/// A validated, nonempty set of jobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance<T> {
    jobs: Vec<Job<T>>,
    index: BTreeMap<JobId, usize>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(jobs: Vec<Job<T>>) -> Result<Self, InstanceError> {
        if jobs.is_empty() {
            return Err(InstanceError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, job) in jobs.iter().enumerate() {
            if !job.size.is_positive() {
                return Err(InstanceError::NonPositiveSize(job.id));
            }
            if !job.weight.is_positive() {
                return Err(InstanceError::NonPositiveWeight(job.id));
            }
            if job.release.is_negative() {
                return Err(InstanceError::NegativeRelease(job.id));
            }
            if index.insert(job.id, i).is_some() {
                return Err(InstanceError::DuplicateId(job.id));
            }
        }
        Ok(Instance { jobs, index })
    }

    /// Parse the line-oriented instance format: one job per line as `r p w`
    /// (id = position among job lines) or `id r p w`; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut jobs = Vec::new();
        let mut seen = BTreeSet::new();
        let mut last_line = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            last_line = line;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |kind| ParseError { line, kind };
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let (id, rest) = match fields.len() {
                3 => (JobId(jobs.len() as u64), &fields[..]),
                4 => {
                    let id = fields[0]
                        .parse::<JobId>()
                        .map_err(|_| err(ParseErrorKind::NotAnInteger(fields[0].to_string())))?;
                    (id, &fields[1..])
                }
                k => return Err(err(ParseErrorKind::FieldCount(k))),
            };
            let mut nums = Vec::with_capacity(3);
            for f in rest {
                let v: T = f
                    .parse()
                    .map_err(|_| err(ParseErrorKind::NotAnInteger(f.to_string())))?;
                nums.push(v);
            }
            let weight = nums.pop().unwrap();
            let size = nums.pop().unwrap();
            let release = nums.pop().unwrap();
            if release.is_negative() {
                return Err(err(ParseErrorKind::NegativeRelease));
            }
            if !size.is_positive() {
                return Err(err(ParseErrorKind::NonPositiveSize));
            }
            if !weight.is_positive() {
                return Err(err(ParseErrorKind::NonPositiveWeight));
            }
            if !seen.insert(id) {
                return Err(err(ParseErrorKind::DuplicateId(id)));
            }
            jobs.push(Job {
                id,
                release,
                size,
                weight,
            });
        }
        if jobs.is_empty() {
            return Err(ParseError {
                line: last_line,
                kind: ParseErrorKind::Empty,
            });
        }
        // Every check `new` performs has already been done line by line.
        Ok(Instance::new(jobs).expect("validated while parsing"))
    }

    /// Serialize in the `id r p w` form accepted by [`Instance::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# id release size weight\n");
        for j in &self.jobs {
            out.push_str(&format!("{} {} {} {}\n", j.id, j.release, j.size, j.weight));
        }
        out
    }

    pub fn jobs(&self) -> &[Job<T>] {
        &self.jobs
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    pub fn job(&self, id: JobId) -> Option<&Job<T>> {
        self.index.get(&id).map(|&i| &self.jobs[i])
    }

    pub fn contains(&self, id: JobId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = JobId> + '_ {
        self.jobs.iter().map(|j| j.id)
    }

    /// `P`, the total size.
    pub fn total_size(&self) -> T {
        sum(self.jobs.iter().map(|j| j.size.clone()))
    }

    /// `W`, the total weight.
    pub fn total_weight(&self) -> T {
        sum(self.jobs.iter().map(|j| j.weight.clone()))
    }

    /// `sum_j w_j p_j`.
    pub fn weighted_size_sum(&self) -> T {
        sum(self.jobs.iter().map(Job::weighted_size))
    }

    pub fn max_size(&self) -> T {
        self.jobs.iter().map(|j| j.size.clone()).max().unwrap()
    }

    pub fn min_size(&self) -> T {
        self.jobs.iter().map(|j| j.size.clone()).min().unwrap()
    }

    pub fn max_weight(&self) -> T {
        self.jobs.iter().map(|j| j.weight.clone()).max().unwrap()
    }

    pub fn max_release(&self) -> T {
        self.jobs.iter().map(|j| j.release.clone()).max().unwrap()
    }

    /// Spread `max p / min p` as an exact rational.
    pub fn spread(&self) -> Rational<T> {
        Ratio::new(self.max_size(), self.min_size())
    }

    /// Sub-instance over the given ids (in this instance's order), or `None`
    /// if no id matches.
    pub fn restrict(&self, ids: &BTreeSet<JobId>) -> Option<Instance<T>> {
        let jobs: Vec<_> = self
            .jobs
            .iter()
            .filter(|j| ids.contains(&j.id))
            .cloned()
            .collect();
        if jobs.is_empty() {
            None
        } else {
            Some(Instance::new(jobs).expect("subset of a valid instance"))
        }
    }
}

/// Assignment of jobs to size classes `[n^(3k-3), n^(3k))`, `k >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    /// Ambient job count used for the class ranges.
    pub n: usize,
    classes: BTreeMap<usize, BTreeSet<JobId>>,
    class_of: BTreeMap<JobId, usize>,
}

impl ClassPartition {
    /// Largest nonempty class index `K`.
    pub fn max_class(&self) -> usize {
        self.classes.keys().next_back().copied().unwrap_or(0)
    }

    pub fn class_of(&self, id: JobId) -> Option<usize> {
        self.class_of.get(&id).copied()
    }

    /// Members of class `k` (empty when the class has no jobs).
    pub fn members(&self, k: usize) -> BTreeSet<JobId> {
        self.classes.get(&k).cloned().unwrap_or_default()
    }

    /// Jobs whose class lies in `lo..=hi`.
    pub fn members_in(&self, lo: usize, hi: usize) -> BTreeSet<JobId> {
        if lo > hi {
            return BTreeSet::new();
        }
        self.classes
            .range(lo..=hi)
            .flat_map(|(_, ids)| ids.iter().copied())
            .collect()
    }

    /// Number of nonempty classes.
    pub fn nonempty_count(&self) -> usize {
        self.classes.len()
    }
}

/// Class index `k` with `n^(3k-3) <= p < n^(3k)`, by exact comparison against
/// successive powers of `n^3`. For `n < 2` every size is class 1.
pub fn class_index<T: Scalar>(size: &T, n: usize) -> usize {
    if n < 2 {
        return 1;
    }
    let cube = num_traits::pow(<T as Scalar>::from_usize(n), 3);
    let mut upper = cube.clone();
    let mut k = 1;
    while *size >= upper {
        upper = upper * cube.clone();
        k += 1;
    }
    k
}

pub fn partition_classes<T: Scalar>(inst: &Instance<T>) -> ClassPartition {
    let n = inst.n();
    let mut classes: BTreeMap<usize, BTreeSet<JobId>> = BTreeMap::new();
    let mut class_of = BTreeMap::new();
    for job in inst.jobs() {
        let k = class_index(&job.size, n);
        classes.entry(k).or_default().insert(job.id);
        class_of.insert(job.id, k);
    }
    ClassPartition {
        n,
        classes,
        class_of,
    }
}

/// Split off jobs with `w_j < eps / (n^2 * spread) * max w`.
///
/// The maximum-weight job always survives, so the core is never empty.
pub fn prune_light_jobs<T: Scalar>(
    inst: &Instance<T>,
    eps: &Rational<T>,
) -> (Instance<T>, Vec<Job<T>>) {
    let n = <T as Scalar>::from_usize(inst.n());
    let threshold = eps.clone() * Ratio::from_integer(inst.max_weight())
        / (Ratio::from_integer(n.clone() * n) * inst.spread());
    let (pruned, core): (Vec<_>, Vec<_>) = inst
        .jobs()
        .iter()
        .cloned()
        .partition(|j| Ratio::from_integer(j.weight.clone()) < threshold);
    let core = Instance::new(core).expect("max-weight job is never pruned");
    (core, pruned)
}

/// Put pruned jobs back at strictly lowest priority.
///
/// Core jobs keep their segments verbatim; pruned jobs run, in order of
/// release then id, only in time the core schedule leaves idle, and are
/// preempted whenever a core segment starts.
pub fn reinsert_pruned<T: Scalar>(sched: &Schedule<T>, pruned: &[Job<T>]) -> Schedule<T> {
    if pruned.is_empty() {
        return sched.clone();
    }
    let avail = Availability::occupied_by(sched);
    let sim: Vec<SimJob<T, (T, JobId)>> = pruned
        .iter()
        .map(|j| SimJob {
            id: j.id,
            release: j.release.clone(),
            size: j.size.clone(),
            key: (j.release.clone(), j.id),
        })
        .collect();
    let filler = simulate_priority(&sim, &avail);
    sched.merged_with(&filler)
}
