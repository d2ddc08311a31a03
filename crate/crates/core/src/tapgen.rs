//! Seeded TAP generators.
//!
//! All randomness comes from SplitMix64:
//!
//! ```text
//! state <- state + 0x9E3779B97F4A7C15
//! z <- state
//! z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output z ^ (z >> 31)
//! ```
//!
//! with wrapping 64-bit arithmetic and the seed as the initial state. Every
//! generated number lies on the grid `k / 2^20`, so exact simulation only ever
//! sees dyadic rationals and `φ`.
//!
//! An integer in `[lo, hi]` is drawn as `lo + ((x * (hi - lo + 1)) >> 64)` for
//! one output `x`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::QNum;
use crate::model::Tap;

/// Denominator of the value grid.
pub const GRID: i64 = 1 << 20;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    #[default]
    Uniform,
    /// Arrivals clumped into a few bursts with exact ties.
    Bursty,
    /// One big task at time 0 followed by an escalating run of small ones.
    Staircase,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Uniform, Style::Bursty, Style::Staircase];
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Uniform => "uniform",
            Style::Bursty => "bursty",
            Style::Staircase => "staircase",
        })
    }
}

impl FromStr for Style {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        match s {
            "uniform" => Ok(Style::Uniform),
            "bursty" => Ok(Style::Bursty),
            "staircase" => Ok(Style::Staircase),
            other => Err(GenError::UnknownStyle(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("{0} must be a finite rational")]
    NotRational(&'static str),
    #[error("{name} range [{lo}, {hi}] is empty or not positive")]
    BadRange { name: &'static str, lo: String, hi: String },
    #[error("slowdown must be >= 1")]
    SlowdownBelowOne,
    #[error("horizon must be >= 0")]
    NegativeHorizon,
    #[error("p_infinite_s must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("value {0} too large for the generator grid")]
    Overflow(String),
    #[error("unknown style {0:?}")]
    UnknownStyle(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    pub n: usize,
    pub f_range: (QNum, QNum),
    /// `s / f` is drawn from here.
    pub slowdown_range: (QNum, QNum),
    /// Arrivals fall in `[0, horizon]`.
    pub horizon: QNum,
    pub p_infinite_s: f64,
    pub style: Style,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            n: 8,
            f_range: (QNum::ratio(1, 16), QNum::from_int(4)),
            slowdown_range: (QNum::one(), QNum::from_int(4)),
            horizon: QNum::from_int(8),
            p_infinite_s: 0.2,
            style: Style::Uniform,
        }
    }
}

/// Grid-unit bounds after validation.
struct Grid {
    f: (i64, i64),
    slowdown: (i64, i64),
    horizon: i64,
    p_infinite: u64,
}

fn grid_units(q: &QNum, name: &'static str, up: bool) -> Result<i64, GenError> {
    let r: &BigRational = match (q.a(), q.b()) {
        (Some(a), Some(b)) if num_traits::Zero::is_zero(b) => a,
        _ => return Err(GenError::NotRational(name)),
    };
    let scaled = r * BigRational::from_integer(BigInt::from(GRID));
    let k = if up { scaled.ceil() } else { scaled.floor() };
    k.to_integer().to_i64().filter(|k| k.abs() < 1 << 40).ok_or_else(|| GenError::Overflow(q.to_string()))
}

impl GenParams {
    fn grid(&self) -> Result<Grid, GenError> {
        let f_lo = grid_units(&self.f_range.0, "f_range", true)?.max(1);
        let f_hi = grid_units(&self.f_range.1, "f_range", false)?;
        if self.f_range.0.sign().is_le() || f_lo > f_hi {
            return Err(GenError::BadRange {
                name: "f_range",
                lo: self.f_range.0.to_string(),
                hi: self.f_range.1.to_string(),
            });
        }
        let r_lo = grid_units(&self.slowdown_range.0, "slowdown_range", true)?;
        let r_hi = grid_units(&self.slowdown_range.1, "slowdown_range", false)?;
        if r_lo < GRID {
            return Err(GenError::SlowdownBelowOne);
        }
        if r_lo > r_hi {
            return Err(GenError::BadRange {
                name: "slowdown_range",
                lo: self.slowdown_range.0.to_string(),
                hi: self.slowdown_range.1.to_string(),
            });
        }
        let horizon = grid_units(&self.horizon, "horizon", false)?;
        if self.horizon.sign().is_lt() {
            return Err(GenError::NegativeHorizon);
        }
        if !(0.0..=1.0).contains(&self.p_infinite_s) {
            return Err(GenError::BadProbability(self.p_infinite_s));
        }
        // threshold on a 2^53 scale keeps the comparison exact
        let p_infinite = (self.p_infinite_s * (1u64 << 53) as f64) as u64;
        Ok(Grid { f: (f_lo, f_hi), slowdown: (r_lo, r_hi), horizon, p_infinite })
    }

    pub fn validate(&self) -> Result<(), GenError> {
        self.grid().map(|_| ())
    }
}

/// The `index`-th output of the SplitMix64 stream started at `base`; used to
/// give every fuzz case its own seed.
pub fn case_seed(base: u64, index: u64) -> u64 {
    let mut rng = SplitMix64::from_seed(base.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)).to_le_bytes());
    rng.next_u64()
}

struct Draw(SplitMix64);

impl Draw {
    fn new(seed: u64) -> Self {
        Draw(SplitMix64::from_seed(seed.to_le_bytes()))
    }

    fn int(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (hi - lo) as u128 + 1;
        lo + ((self.0.next_u64() as u128 * span) >> 64) as i64
    }

    fn chance(&mut self, threshold: u64) -> bool {
        (self.0.next_u64() >> 11) < threshold
    }
}

fn q(units: i64) -> QNum {
    QNum::ratio(units, GRID)
}

fn mul_up(a: i64, b: i64) -> i64 {
    let p = a as i128 * b as i128;
    ((p + GRID as i128 - 1) / GRID as i128) as i64
}

fn slow_units(draw: &mut Draw, grid: &Grid, f: i64) -> Option<i64> {
    if draw.chance(grid.p_infinite) {
        return None;
    }
    let r = draw.int(grid.slowdown.0, grid.slowdown.1);
    Some(mul_up(f, r).max(f))
}

/// A deterministic TAP drawn according to `params`.
pub fn random_tap(params: &GenParams) -> Result<Tap, GenError> {
    let grid = params.grid()?;
    let mut draw = Draw::new(params.seed);
    let n = params.n;
    let units: Vec<(i64, Option<i64>, i64)> = match params.style {
        Style::Uniform => {
            let mut arrivals: Vec<i64> = (0..n).map(|_| draw.int(0, grid.horizon)).collect();
            arrivals.sort_unstable();
            arrivals
                .into_iter()
                .map(|t| {
                    let f = draw.int(grid.f.0, grid.f.1);
                    (f, slow_units(&mut draw, &grid, f), t)
                })
                .collect()
        }
        Style::Bursty => {
            let bursts = 1 + n / 4;
            let mut times: Vec<i64> = (0..bursts).map(|_| draw.int(0, grid.horizon)).collect();
            times.sort_unstable();
            let mut arrivals: Vec<i64> = (0..n).map(|_| times[draw.int(0, bursts as i64 - 1) as usize]).collect();
            arrivals.sort_unstable();
            arrivals
                .into_iter()
                .map(|t| {
                    let f = draw.int(grid.f.0, grid.f.1);
                    (f, slow_units(&mut draw, &grid, f), t)
                })
                .collect()
        }
        Style::Staircase => staircase(&mut draw, &grid, n),
    };
    let triples = units.into_iter().map(|(f, s, t)| (q(f), s.map_or_else(QNum::infinity, q), q(t)));
    Ok(Tap::new(triples).expect("generated TAP is valid by construction"))
}

// Big task (F, F·r, 0), then small tasks of size about F/k arriving every
// F·σ/k, then a closing task of size and arrival F·σ/2. σ = 3/2 and r = 3/2
// recover the shape used for the lower bound.
fn staircase(draw: &mut Draw, grid: &Grid, n: usize) -> Vec<(i64, Option<i64>, i64)> {
    if n == 0 {
        return Vec::new();
    }
    let big = draw.int(grid.f.0, grid.f.1);
    let ratio = draw.int(grid.slowdown.0, grid.slowdown.1);
    let mut out = vec![(big, Some(mul_up(big, ratio).max(big)), 0)];
    if n == 1 {
        return out;
    }
    let k = 2 * (n as i64 - 1);
    let sigma = draw.int(GRID, 2 * GRID);
    let step = (mul_up(big, sigma) / k).max(1);
    for i in 1..(n as i64 - 1) {
        let jitter = draw.int(GRID / 2, 2 * GRID);
        let f = (mul_up(big, jitter) / k).max(1);
        out.push((f, slow_units(draw, grid, f), step * i));
    }
    let last = (mul_up(big, sigma) / 2).max(step * (n as i64 - 2)).max(1);
    out.push((last, slow_units(draw, grid, last), last));
    out
}
