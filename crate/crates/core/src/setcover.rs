//! Deadline extension as covering points by rectangles abutting the y-axis.
//!
//! Each dangerous interval `(t1, t2]` becomes a point; each candidate
//! extension of job `j` by `2^l p_j` becomes a rectangle
//! `(0, r_j] x [d_j, d_j + 2^l p_j)`. A rectangle covers a point exactly when
//! the job sits inside the interval under its tentative deadline but no
//! longer under the extended one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::model::JobId;
use crate::scalar::{harmonic, Rational, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoverPoint<T> {
    pub t1: T,
    pub t2: T,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverRect<T> {
    pub owner: JobId,
    pub level: u32,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
    pub cost: T,
}

impl<T: Scalar> CoverRect<T> {
    pub fn key(&self) -> (JobId, u32) {
        (self.owner, self.level)
    }
}

/// Which fractional weights the instance uses for levels `l >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverMode {
    /// `4 / (2^l log n)`
    Standard,
    /// `8 / (2^l log n)`, for the multi-class window construction
    Windowed,
}

impl CoverMode {
    fn numerator(self) -> usize {
        match self {
            CoverMode::Standard => 4,
            CoverMode::Windowed => 8,
        }
    }

    pub fn fractional_weight<T: Scalar>(self, level: u32, n: usize) -> Rational<T> {
        scaled_weight(level, n, self.numerator())
    }
}

impl fmt::Display for CoverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoverMode::Standard => "standard",
            CoverMode::Windowed => "windowed",
        })
    }
}

/// `floor(log2 n)`; exact when `n` is a power of two.
pub fn log2_floor(n: usize) -> u32 {
    n.max(1).ilog2()
}

fn scaled_weight<T: Scalar>(level: u32, n: usize, numerator: usize) -> Rational<T> {
    let one = Ratio::one();
    if level == 0 {
        return one;
    }
    let log = log2_floor(n).max(1) as usize;
    let w = Ratio::new(
        <T as Scalar>::from_usize(numerator),
        T::pow2(level) * <T as Scalar>::from_usize(log),
    );
    if w > one {
        one
    } else {
        w
    }
}

/// Weight of level `l` in the standard fractional solution: 1 for `l = 0`,
/// else `min(1, 4 / (2^l floor(log2 n)))`.
pub fn fractional_weight<T: Scalar>(level: u32, n: usize) -> Rational<T> {
    scaled_weight(level, n, 4)
}

/// Half-open containment test: `t1 <= x_max` and `y_min <= t2 < y_max`.
pub fn covers<T: Scalar>(rect: &CoverRect<T>, pt: &CoverPoint<T>) -> bool {
    pt.t1 <= rect.x_max && rect.y_min <= pt.t2 && pt.t2 < rect.y_max
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverError {
    #[error("point ({t1}, {t2}] is not covered by any rectangle")]
    Uncoverable { t1: String, t2: String },
    #[error("rectangle ({owner}, {level}) is malformed")]
    BadRect { owner: JobId, level: u32 },
    #[error("duplicate rectangle ({owner}, {level})")]
    DuplicateRect { owner: JobId, level: u32 },
    #[error("r2c line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Points, rectangles, and the ambient job count used for fractional weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct R2CInstance<T> {
    points: Vec<CoverPoint<T>>,
    rects: Vec<CoverRect<T>>,
    n: usize,
    mode: CoverMode,
}

impl<T: Scalar> R2CInstance<T> {
    /// Build and check that every point lies in some rectangle.
    pub fn new(
        points: Vec<CoverPoint<T>>,
        rects: Vec<CoverRect<T>>,
        n: usize,
        mode: CoverMode,
    ) -> Result<Self, CoverError> {
        let mut keys = BTreeSet::new();
        for r in &rects {
            if r.y_min <= r.x_max || r.y_max <= r.y_min || !r.cost.is_positive() {
                return Err(CoverError::BadRect {
                    owner: r.owner,
                    level: r.level,
                });
            }
            if !keys.insert(r.key()) {
                return Err(CoverError::DuplicateRect {
                    owner: r.owner,
                    level: r.level,
                });
            }
        }
        if let Some(p) = points.iter().find(|p| !rects.iter().any(|r| covers(r, p))) {
            return Err(CoverError::Uncoverable {
                t1: p.t1.to_string(),
                t2: p.t2.to_string(),
            });
        }
        Ok(R2CInstance {
            points,
            rects,
            n,
            mode,
        })
    }

    pub fn points(&self) -> &[CoverPoint<T>] {
        &self.points
    }

    pub fn rects(&self) -> &[CoverRect<T>] {
        &self.rects
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> CoverMode {
        self.mode
    }

    pub fn rect(&self, owner: JobId, level: u32) -> Option<&CoverRect<T>> {
        self.rects.iter().find(|r| r.owner == owner && r.level == level)
    }

    /// Text dump: `n`, `mode`, then `point t1 t2` and
    /// `rect j l x_max y_min y_max cost` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\nmode {}\n", self.n, self.mode);
        for p in &self.points {
            out.push_str(&format!("point {} {}\n", p.t1, p.t2));
        }
        for r in &self.rects {
            out.push_str(&format!(
                "rect {} {} {} {} {} {}\n",
                r.owner, r.level, r.x_max, r.y_min, r.y_max, r.cost
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CoverError> {
        let mut n = None;
        let mut mode = CoverMode::Standard;
        let mut points = Vec::new();
        let mut rects = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| CoverError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            let int = |s: &str| s.parse::<T>().map_err(|_| bad("bad integer"));
            match (f[0], f.len()) {
                ("n", 2) => n = Some(f[1].parse::<usize>().map_err(|_| bad("bad n"))?),
                ("mode", 2) => {
                    mode = match f[1] {
                        "standard" => CoverMode::Standard,
                        "windowed" => CoverMode::Windowed,
                        _ => return Err(bad("unknown mode")),
                    }
                }
                ("point", 3) => points.push(CoverPoint {
                    t1: int(f[1])?,
                    t2: int(f[2])?,
                }),
                ("rect", 7) => rects.push(CoverRect {
                    owner: f[1].parse().map_err(|_| bad("bad job id"))?,
                    level: f[2].parse().map_err(|_| bad("bad level"))?,
                    x_max: int(f[3])?,
                    y_min: int(f[4])?,
                    y_max: int(f[5])?,
                    cost: int(f[6])?,
                }),
                _ => return Err(bad("unrecognized line")),
            }
        }
        let n = n.ok_or(CoverError::Parse {
            line: 0,
            msg: "missing `n` line".to_string(),
        })?;
        R2CInstance::new(points, rects, n, mode)
    }
}

/// Fractional extent `x_{j,l}` per rectangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalSolution<T: Scalar> {
    pub weights: BTreeMap<(JobId, u32), Rational<T>>,
}

impl<T: Scalar> FractionalSolution<T> {
    pub fn cost(&self, r2c: &R2CInstance<T>) -> Rational<T> {
        r2c.rects().iter().fold(Ratio::zero(), |acc, r| {
            match self.weights.get(&r.key()) {
                Some(x) => acc + x.clone() * Ratio::from_integer(r.cost.clone()),
                None => acc,
            }
        })
    }
}

pub fn build_fractional<T: Scalar>(r2c: &R2CInstance<T>) -> FractionalSolution<T> {
    let weights = r2c
        .rects()
        .iter()
        .map(|r| (r.key(), r2c.mode().fractional_weight(r.level, r2c.n())))
        .collect();
    FractionalSolution { weights }
}

/// A point whose covering mass falls below 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall<T: Scalar> {
    pub point: CoverPoint<T>,
    pub mass: Rational<T>,
}

/// Sum, per point, the weights of the rectangles covering it; report every
/// point with mass below 1.
pub fn verify_fractional_cover<T: Scalar>(
    r2c: &R2CInstance<T>,
    x: &FractionalSolution<T>,
) -> Result<(), Vec<Shortfall<T>>> {
    let one = Ratio::one();
    let shortfalls: Vec<_> = r2c
        .points()
        .iter()
        .filter_map(|p| {
            let mass = r2c
                .rects()
                .iter()
                .filter(|r| covers(r, p))
                .filter_map(|r| x.weights.get(&r.key()))
                .fold(Ratio::zero(), |acc: Rational<T>, w| acc + w.clone());
            (mass < one).then(|| Shortfall {
                point: p.clone(),
                mass,
            })
        })
        .collect();
    if shortfalls.is_empty() {
        Ok(())
    } else {
        Err(shortfalls)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverSolution<T> {
    pub selected: BTreeSet<(JobId, u32)>,
    pub cost: T,
}

/// Weighted greedy set cover.
///
/// Every owner's level-0 rectangle is selected up front. Greedy then picks
/// the rectangle with least cost per newly covered point until all points
/// are covered, ties by `(owner, level)`.
pub fn greedy_cover<T: Scalar>(r2c: &R2CInstance<T>) -> Result<CoverSolution<T>, CoverError> {
    let rects = r2c.rects();
    let points = r2c.points();
    let hits: Vec<Vec<usize>> = rects
        .iter()
        .map(|r| {
            points
                .iter()
                .enumerate()
                .filter(|(_, p)| covers(r, p))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let mut covered = vec![false; points.len()];
    let mut chosen = vec![false; rects.len()];
    let mut cost = T::zero();
    for (i, r) in rects.iter().enumerate() {
        if r.level == 0 {
            chosen[i] = true;
            cost = cost + r.cost.clone();
            for &p in &hits[i] {
                covered[p] = true;
            }
        }
    }

    let mut left = covered.iter().filter(|c| !**c).count();
    while left > 0 {
        let mut best: Option<(usize, usize)> = None;
        for (i, r) in rects.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            let gain = hits[i].iter().filter(|&&p| !covered[p]).count();
            if gain == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bgain)) => {
                    // cost_i / gain < cost_b / bgain
                    let lhs = r.cost.clone() * <T as Scalar>::from_usize(bgain);
                    let rhs = rects[b].cost.clone() * <T as Scalar>::from_usize(gain);
                    lhs < rhs || (lhs == rhs && r.key() < rects[b].key())
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let Some((i, gain)) = best else {
            let p = covered.iter().position(|c| !*c).unwrap();
            return Err(CoverError::Uncoverable {
                t1: points[p].t1.to_string(),
                t2: points[p].t2.to_string(),
            });
        };
        chosen[i] = true;
        cost = cost + rects[i].cost.clone();
        for &p in &hits[i] {
            covered[p] = true;
        }
        left -= gain;
    }

    let selected = rects
        .iter()
        .zip(&chosen)
        .filter(|(_, c)| **c)
        .map(|(r, _)| r.key())
        .collect();
    Ok(CoverSolution { selected, cost })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverViolation {
    #[error("point ({t1}, {t2}] is not covered by the selection")]
    Uncovered { t1: String, t2: String },
    #[error("selection names unknown rectangle ({0}, {1})")]
    UnknownRect(JobId, u32),
    #[error("stated cost {stated} differs from recomputed {actual}")]
    CostMismatch { stated: String, actual: String },
}

pub fn verify_cover<T: Scalar>(
    r2c: &R2CInstance<T>,
    sol: &CoverSolution<T>,
) -> Result<(), CoverViolation> {
    let mut picked = Vec::with_capacity(sol.selected.len());
    for &(owner, level) in &sol.selected {
        picked.push(
            r2c.rect(owner, level)
                .ok_or(CoverViolation::UnknownRect(owner, level))?,
        );
    }
    if let Some(p) = r2c
        .points()
        .iter()
        .find(|p| !picked.iter().any(|r| covers(r, p)))
    {
        return Err(CoverViolation::Uncovered {
            t1: p.t1.to_string(),
            t2: p.t2.to_string(),
        });
    }
    let actual = picked
        .iter()
        .fold(T::zero(), |acc, r| acc + r.cost.clone());
    if actual != sol.cost {
        return Err(CoverViolation::CostMismatch {
            stated: sol.cost.to_string(),
            actual: actual.to_string(),
        });
    }
    Ok(())
}

/// Harmonic bound `H_m` used for the greedy guarantee, with `m` floored at 1
/// so that the forced level-0 selection is compared against `cost(x)` even
/// when there are no points.
pub fn greedy_bound_factor<T: Scalar>(points: usize) -> Rational<T> {
    harmonic(points.max(1))
}
