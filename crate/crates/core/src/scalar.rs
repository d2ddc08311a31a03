//! Numeric modes shared by the simulator, OPT and the analysis code.
//!
//! Everything above this module is generic over [`Scalar`]. [`QNum`] is the exact
//! default; [`Approx`] is a binary64 mode whose comparisons treat values within a
//! relative tolerance of [`FLOAT_TOLERANCE`] as equal.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::exactnum::QNum;

/// Relative tolerance applied by every [`Approx`] comparison.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NumericMode {
    #[default]
    Exact,
    Float,
}

impl FromStr for NumericMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(NumericMode::Exact),
            "float" => Ok(NumericMode::Float),
            other => Err(format!("unknown numeric mode `{other}` (expected exact|float)")),
        }
    }
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NumericMode::Exact => "exact",
            NumericMode::Float => "float",
        })
    }
}

/// Ordered field-like values with a distinguished positive infinity.
///
/// Arithmetic on an infinite operand follows [`QNum`]: `∞ + x = ∞`, `∞ − x = ∞`
/// for finite `x`; anything else involving infinity panics in exact mode.
pub trait Scalar: Clone + fmt::Debug + fmt::Display + PartialEq + Send + Sync + 'static {
    const MODE: NumericMode;

    fn zero() -> Self;
    fn one() -> Self;
    fn phi() -> Self;
    fn infinity() -> Self;
    fn from_qnum(x: &QNum) -> Self;
    fn is_infinite(&self) -> bool;
    fn plus(&self, rhs: &Self) -> Self;
    fn minus(&self, rhs: &Self) -> Self;
    fn times(&self, rhs: &Self) -> Self;
    fn over(&self, rhs: &Self) -> Self;
    fn compare(&self, rhs: &Self) -> Ordering;
    fn to_f64(&self) -> f64;

    fn le(&self, rhs: &Self) -> bool {
        self.compare(rhs) != Ordering::Greater
    }
    fn lt(&self, rhs: &Self) -> bool {
        self.compare(rhs) == Ordering::Less
    }
    fn ge(&self, rhs: &Self) -> bool {
        self.compare(rhs) != Ordering::Less
    }
    fn gt(&self, rhs: &Self) -> bool {
        self.compare(rhs) == Ordering::Greater
    }
    fn same(&self, rhs: &Self) -> bool {
        self.compare(rhs) == Ordering::Equal
    }
    fn max_of(&self, rhs: &Self) -> Self {
        if self.ge(rhs) {
            self.clone()
        } else {
            rhs.clone()
        }
    }
    fn min_of(&self, rhs: &Self) -> Self {
        if self.le(rhs) {
            self.clone()
        } else {
            rhs.clone()
        }
    }
    fn is_zero_value(&self) -> bool {
        self.same(&Self::zero())
    }
}

impl Scalar for QNum {
    const MODE: NumericMode = NumericMode::Exact;

    fn zero() -> Self {
        QNum::zero()
    }
    fn one() -> Self {
        QNum::one()
    }
    fn phi() -> Self {
        QNum::phi()
    }
    fn infinity() -> Self {
        QNum::infinity()
    }
    fn from_qnum(x: &QNum) -> Self {
        x.clone()
    }
    fn is_infinite(&self) -> bool {
        QNum::is_infinite(self)
    }
    fn plus(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn minus(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn times(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn over(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn compare(&self, rhs: &Self) -> Ordering {
        self.cmp(rhs)
    }
    fn to_f64(&self) -> f64 {
        QNum::to_f64(self)
    }
}

thread_local! {
    static NEAR_TIES: Cell<u64> = const { Cell::new(0) };
}

/// Number of comparisons on this thread that were decided by the tolerance
/// (operands differed but fell within [`FLOAT_TOLERANCE`]).
pub fn near_tie_count() -> u64 {
    NEAR_TIES.with(Cell::get)
}

pub fn reset_near_ties() {
    NEAR_TIES.with(|c| c.set(0));
}

/// binary64 value with tolerant comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approx(pub f64);

impl fmt::Display for Approx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Scalar for Approx {
    const MODE: NumericMode = NumericMode::Float;

    fn zero() -> Self {
        Approx(0.0)
    }
    fn one() -> Self {
        Approx(1.0)
    }
    fn phi() -> Self {
        Approx((1.0 + 5f64.sqrt()) / 2.0)
    }
    fn infinity() -> Self {
        Approx(f64::INFINITY)
    }
    fn from_qnum(x: &QNum) -> Self {
        Approx(x.to_f64())
    }
    fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
    fn plus(&self, rhs: &Self) -> Self {
        Approx(self.0 + rhs.0)
    }
    fn minus(&self, rhs: &Self) -> Self {
        Approx(self.0 - rhs.0)
    }
    fn times(&self, rhs: &Self) -> Self {
        Approx(self.0 * rhs.0)
    }
    fn over(&self, rhs: &Self) -> Self {
        Approx(self.0 / rhs.0)
    }
    fn compare(&self, rhs: &Self) -> Ordering {
        let (x, y) = (self.0, rhs.0);
        if x == y {
            return Ordering::Equal;
        }
        if x.is_infinite() || y.is_infinite() {
            return x.partial_cmp(&y).unwrap_or(Ordering::Equal);
        }
        let scale = x.abs().max(y.abs()).max(1.0);
        if (x - y).abs() <= FLOAT_TOLERANCE * scale {
            NEAR_TIES.with(|c| c.set(c.get() + 1));
            Ordering::Equal
        } else {
            x.partial_cmp(&y).unwrap_or(Ordering::Equal)
        }
    }
    fn to_f64(&self) -> f64 {
        self.0
    }
}
