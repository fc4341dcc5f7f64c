//! Instance generation, lower bounds and ratio sweeps.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use num_traits::{FromPrimitive, One};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{Instance, Job};
use crate::scalar::{fmt_rational, rational_to_f64, sum, Rational, Scalar};
use crate::schedule::{schedule_cost, validate_schedule, Availability, Schedule};
use crate::stitch::{self, StitchConfig, WindowParams};
use crate::subsolver::{solver_by_name, ExactOracle, SubSolver, DEFAULT_EXACT_LIMIT};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("need at least one job and one class")]
    Empty,
    #[error("{classes} nonempty classes need at least {classes} jobs, got {n}")]
    TooFewJobs { n: usize, classes: usize },
    #[error("weight bound must be at least 1")]
    Weight,
}

/// Parameters of [`gen_random`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSpec {
    pub n: usize,
    /// Number of nonempty size classes.
    pub classes: usize,
    /// Weights are uniform in `1..=weight_max`.
    pub weight_max: u64,
    /// Releases are log-uniform in `[0, density * total size]`, so every
    /// size scale sees jobs arriving while others are still running.
    pub density: Ratio<u64>,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(n: usize, classes: usize, seed: u64) -> Self {
        GenSpec {
            n,
            classes,
            weight_max: 10,
            density: Ratio::new(1, 2),
            seed,
        }
    }
}

fn bit_length<T: Scalar>(v: &T) -> u32 {
    let two = T::one() + T::one();
    let mut v = v.clone();
    let mut bits = 0;
    while !v.is_zero() {
        v = v / two.clone();
        bits += 1;
    }
    bits
}

fn random_bits<T: Scalar>(rng: &mut ChaCha8Rng, bits: u32) -> T {
    let two = T::one() + T::one();
    let mut v = T::zero();
    for _ in 0..bits {
        v = v * two.clone();
        if rng.random::<bool>() {
            v = v + T::one();
        }
    }
    v
}

/// Log-uniform in `0..=bound`: a uniform bit length (0 meaning zero),
/// then uniform bits, clamped.
fn log_uniform_upto<T: Scalar>(rng: &mut ChaCha8Rng, bound: &T) -> T {
    let bits = rng.random_range(0..=bit_length(bound));
    if bits == 0 {
        return T::zero();
    }
    let v = T::pow2(bits - 1) + random_bits::<T>(rng, bits - 1);
    if v > *bound {
        bound.clone()
    } else {
        v
    }
}

/// Log-uniform in `lo..hi`: a uniform bit length, then uniform bits, clamped.
fn log_uniform<T: Scalar>(rng: &mut ChaCha8Rng, lo: &T, hi: &T) -> T {
    let top = hi.clone() - T::one();
    let (blo, bhi) = (bit_length(lo), bit_length(&top));
    let bits = rng.random_range(blo..=bhi);
    let v = T::pow2(bits - 1) + random_bits::<T>(rng, bits - 1);
    if v < *lo {
        lo.clone()
    } else if v > top {
        top
    } else {
        v
    }
}

/// Random multi-class instance. Every requested class gets at least one job.
pub fn gen_random<T: Scalar>(spec: &GenSpec) -> Result<Instance<T>, GenError> {
    if spec.n == 0 || spec.classes == 0 {
        return Err(GenError::Empty);
    }
    if spec.n < spec.classes {
        return Err(GenError::TooFewJobs {
            n: spec.n,
            classes: spec.classes,
        });
    }
    if spec.weight_max == 0 {
        return Err(GenError::Weight);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cube: T = num_traits::pow(<T as Scalar>::from_usize(spec.n), 3);
    let mut class_of: Vec<usize> = (1..=spec.classes).collect();
    class_of.extend((spec.classes..spec.n).map(|_| rng.random_range(1..=spec.classes)));

    let sizes: Vec<T> = class_of
        .iter()
        .map(|&k| {
            let lo = num_traits::pow(cube.clone(), k - 1);
            let hi = lo.clone() * cube.clone();
            if hi <= lo.clone() + T::one() {
                lo
            } else {
                log_uniform(&mut rng, &lo, &hi)
            }
        })
        .collect();
    let total = sizes.iter().cloned().fold(T::zero(), |a, b| a + b);
    let num = <T as FromPrimitive>::from_u64(*spec.density.numer()).expect("density fits");
    let den = <T as FromPrimitive>::from_u64(*spec.density.denom()).expect("density fits");
    let span = total * num / den;

    let jobs = sizes
        .into_iter()
        .enumerate()
        .map(|(i, size)| {
            let release = log_uniform_upto(&mut rng, &span);
            let weight = <T as FromPrimitive>::from_u64(rng.random_range(1..=spec.weight_max)).unwrap();
            Job::new(i as u64, release, size, weight)
        })
        .collect();
    Ok(Instance::new(jobs).expect("generated jobs are valid"))
}

/// `sum w_j p_j`: every job's flow-time is at least its size.
pub fn lower_bound_trivial<T: Scalar>(inst: &Instance<T>) -> T {
    inst.weighted_size_sum()
}

#[derive(Debug, Error)]
#[error("unknown solver spec `{0}` (expected ALG, standard:ALG or windowed:ALG[:B])")]
pub struct SolverSpecError(String);

/// A solver as named on the command line: `hdf`, `standard:exact`,
/// `windowed:hdf:2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverSpec {
    Plain(String),
    Standard(String),
    Windowed { alg: String, width: Option<usize> },
}

impl FromStr for SolverSpec {
    type Err = SolverSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || SolverSpecError(s.to_string());
        match parts.as_slice() {
            [alg] if !alg.is_empty() => Ok(SolverSpec::Plain(alg.to_string())),
            ["standard", alg] => Ok(SolverSpec::Standard(alg.to_string())),
            ["windowed", alg] => Ok(SolverSpec::Windowed {
                alg: alg.to_string(),
                width: None,
            }),
            ["windowed", alg, b] => Ok(SolverSpec::Windowed {
                alg: alg.to_string(),
                width: Some(b.parse().map_err(|_| bad())?),
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::Plain(a) => write!(f, "{a}"),
            SolverSpec::Standard(a) => write!(f, "standard:{a}"),
            SolverSpec::Windowed { alg, width: None } => write!(f, "windowed:{alg}"),
            SolverSpec::Windowed {
                alg,
                width: Some(b),
            } => write!(f, "windowed:{alg}:{b}"),
        }
    }
}

impl SolverSpec {
    /// Solve `inst`; any failure is returned as a message.
    pub fn solve<T: Scalar>(&self, inst: &Instance<T>) -> Result<Schedule<T>, String> {
        let alg_name = match self {
            SolverSpec::Plain(a) | SolverSpec::Standard(a) => a,
            SolverSpec::Windowed { alg, .. } => alg,
        };
        let alg: Box<dyn SubSolver<T>> = solver_by_name(alg_name).map_err(|e| e.to_string())?;
        match self {
            SolverSpec::Plain(_) => alg.solve(inst).map_err(|e| e.to_string()),
            SolverSpec::Standard(_) => stitch::run(inst, alg.as_ref(), &StitchConfig::standard())
                .map(|(s, _)| s)
                .map_err(|e| e.to_string()),
            SolverSpec::Windowed { width, .. } => {
                let params = match width {
                    Some(b) => WindowParams::with_width(*b),
                    None => WindowParams::new(Ratio::new(T::one(), <T as Scalar>::from_usize(4))),
                };
                stitch::run(inst, alg.as_ref(), &StitchConfig::windowed(params))
                    .map(|(s, _)| s)
                    .map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Exact,
    Trivial,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Exact => "exact",
            BoundKind::Trivial => "trivial",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow<T: Scalar> {
    pub instance: String,
    pub solver: String,
    pub n: usize,
    pub cost: Option<T>,
    pub lower_bound: T,
    pub bound: BoundKind,
    pub ratio: Option<Rational<T>>,
    pub wall: Duration,
    pub error: Option<String>,
}

/// Lower bound for `inst`: the exact optimum when the oracle runs, else
/// `sum w p`.
pub fn best_lower_bound<T: Scalar>(inst: &Instance<T>, exact_limit: usize) -> (T, BoundKind) {
    if inst.n() <= exact_limit {
        let oracle = ExactOracle {
            max_jobs: exact_limit,
        };
        if let Ok(s) = oracle.solve(inst) {
            return (schedule_cost(&s, inst), BoundKind::Exact);
        }
    }
    (lower_bound_trivial(inst), BoundKind::Trivial)
}

fn bench_one<T: Scalar>(
    name: &str,
    inst: &Instance<T>,
    solver: &SolverSpec,
    bound: &(T, BoundKind),
) -> BenchRow<T> {
    let start = Instant::now();
    let solved = solver.solve(inst);
    let wall = start.elapsed();
    let checked = solved.and_then(|s| {
        validate_schedule(&s, inst, &Availability::full())
            .map(|_| s)
            .map_err(|v| format!("invalid schedule: {v}"))
    });
    let (cost, ratio, error) = match checked {
        Ok(s) => {
            let c = schedule_cost(&s, inst);
            let r = Ratio::new(c.clone(), bound.0.clone());
            (Some(c), Some(r), None)
        }
        Err(e) => (None, None, Some(e)),
    };
    BenchRow {
        instance: name.to_string(),
        solver: solver.to_string(),
        n: inst.n(),
        cost,
        lower_bound: bound.0.clone(),
        bound: bound.1,
        ratio,
        wall,
        error,
    }
}

/// Every solver on every instance. Rows come back ordered by instance, then
/// by solver.
pub fn run_bench<T: Scalar>(
    instances: &[(String, Instance<T>)],
    solvers: &[SolverSpec],
    exact_limit: usize,
) -> Vec<BenchRow<T>> {
    instances
        .par_iter()
        .flat_map_iter(|(name, inst)| {
            let bound = best_lower_bound(inst, exact_limit);
            solvers
                .iter()
                .map(|s| bench_one(name, inst, s, &bound))
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn run_bench_default<T: Scalar>(
    instances: &[(String, Instance<T>)],
    solvers: &[SolverSpec],
) -> Vec<BenchRow<T>> {
    run_bench(instances, solvers, DEFAULT_EXACT_LIMIT)
}

pub fn rows_to_csv<T: Scalar>(rows: &[BenchRow<T>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance", "solver", "n", "wF", "lower_bound", "bound", "ratio", "ratio_approx", "wall_ms",
        "error",
    ])
    .expect("in-memory csv");
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.solver.clone(),
            r.n.to_string(),
            r.cost.as_ref().map(|c| c.to_string()).unwrap_or_default(),
            r.lower_bound.to_string(),
            r.bound.to_string(),
            r.ratio.as_ref().map(fmt_rational).unwrap_or_default(),
            r.ratio
                .as_ref()
                .map(|q| format!("{:.6}", rational_to_f64(q)))
                .unwrap_or_default(),
            format!("{:.3}", r.wall.as_secs_f64() * 1e3),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Min, median, mean and max of a set of ratios (as floats, for display).
#[derive(Debug, Clone, PartialEq)]
pub struct RatioStats {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

pub fn ratio_stats<T: Scalar>(ratios: &[Rational<T>]) -> Option<RatioStats> {
    if ratios.is_empty() {
        return None;
    }
    let mut sorted = ratios.to_vec();
    sorted.sort();
    let count = sorted.len();
    let mean = sorted.iter().map(rational_to_f64).sum::<f64>() / count as f64;
    Some(RatioStats {
        count,
        min: rational_to_f64(&sorted[0]),
        median: rational_to_f64(&sorted[count / 2]),
        mean,
        max: rational_to_f64(&sorted[count - 1]),
    })
}

impl fmt::Display for RatioStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "count={} min={:.4} median={:.4} mean={:.4} max={:.4}",
            self.count, self.min, self.median, self.mean, self.max
        )
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// All regular files in `dir`, sorted by name, parsed as instances.
pub fn load_corpus<T: Scalar>(dir: &Path) -> Result<Vec<(String, Instance<T>)>, CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(io(&p))?;
            let inst = Instance::parse(&text).map_err(|e| CorpusError::Parse {
                path: p.clone(),
                message: e.to_string(),
            })?;
            let name = p
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, inst))
        })
        .collect()
}

/// Sum of `w_j` over the instance; used as the rounding slack bound.
pub fn total_weight<T: Scalar>(inst: &Instance<T>) -> T {
    sum(inst.jobs().iter().map(|j| j.weight.clone()))
}

/// Ratio of two costs, `None` when the denominator is zero.
pub fn cost_ratio<T: Scalar>(num: &T, den: &T) -> Option<Rational<T>> {
    (!den.is_zero()).then(|| Ratio::new(num.clone(), den.clone()))
}

/// True when `r >= 1`.
pub fn at_least_one<T: Scalar>(r: &Rational<T>) -> bool {
    *r >= Ratio::one()
}
