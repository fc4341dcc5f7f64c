//! Preemptive single-machine scheduling to minimize total weighted flow-time.
//!
//! Instances of arbitrary size spread are reduced to windows of a few
//! consecutive size classes, each solved by a pluggable [`SubSolver`], and
//! the window schedules are stitched back together with deadline extensions
//! chosen by a rectangle set cover.
//!
//! The algorithms are generic over an exact integer [`Scalar`]. The aliases
//! below fix it to [`BigInt`], which is what the command-line tool uses.

pub mod bench;
pub mod model;
pub mod scalar;
pub mod schedule;
pub mod setcover;
pub mod stitch;
pub mod subsolver;

pub use num_bigint::BigInt;

pub use model::{
    class_index, partition_classes, prune_light_jobs, reinsert_pruned, ClassPartition,
    InstanceError, JobId, ParseError,
};
pub use scalar::{Rational, Scalar};
pub use schedule::{
    edf_feasible, edf_schedule, edf_simulate, schedule_cost, validate_schedule, weighted_flow,
    Feasibility, ScheduleError, ScheduleViolation,
};
pub use setcover::{greedy_cover, CoverError, CoverMode};
pub use stitch::{StitchConfig, StitchError, StitchMode};
pub use subsolver::{solver_by_name, ExactOracle, Hdf, SolverError, SubSolver, UnitSlotOracle};

/// Time, size, weight, and cost values.
pub type Time = BigInt;
pub type Ratio = Rational<BigInt>;
pub type Job = model::Job<BigInt>;
pub type Instance = model::Instance<BigInt>;
pub type Schedule = schedule::Schedule<BigInt>;
pub type Segment = schedule::Segment<BigInt>;
pub type Availability = schedule::Availability<BigInt>;
pub type DeadlineMap = schedule::DeadlineMap<BigInt>;
pub type R2CInstance = setcover::R2CInstance<BigInt>;
pub type CoverSolution = setcover::CoverSolution<BigInt>;
pub type FractionalSolution = setcover::FractionalSolution<BigInt>;
pub type StitchReport = stitch::StitchReport<BigInt>;
pub type WindowParams = stitch::WindowParams<BigInt>;
pub type BenchRow = bench::BenchRow<BigInt>;
