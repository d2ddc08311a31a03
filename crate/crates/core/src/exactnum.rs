//! Exact arithmetic in the quadratic field Q(√5).
//!
//! A [`QNum`] is either a finite value `a + b·√5` with rational `a`, `b`, or the
//! symbolic [`QNum::infinity`] used for tasks that can never run on a slow
//! machine. Rationals are kept in lowest terms by `num-rational`, so the `(a, b)`
//! pair is canonical and structural equality is numeric equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("operation `{0}` is not defined for infinite operands")]
    InfiniteOperand(ArithOp),
    #[error("cannot parse `{0}` as a number")]
    Parse(String),
    #[error("cannot approximate an infinite value")]
    InfiniteApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
            ArithOp::Mul => "mul",
            ArithOp::Div => "div",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Repr {
    Finite { a: BigRational, b: BigRational },
    Infinity,
}

/// A number `a + b·√5` with rational coefficients, or positive infinity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QNum(Repr);

impl QNum {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        QNum(Repr::Finite { a, b })
    }

    pub fn rational(a: BigRational) -> Self {
        QNum::new(a, BigRational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        QNum::rational(BigRational::from_integer(n.into()))
    }

    /// `num/den` as a rational QNum. Panics if `den` is zero.
    pub fn ratio(num: i64, den: i64) -> Self {
        QNum::rational(BigRational::new(num.into(), den.into()))
    }

    /// `(a_num/a_den) + (b_num/b_den)·√5`.
    pub fn from_parts(a: (i64, i64), b: (i64, i64)) -> Self {
        QNum::new(BigRational::new(a.0.into(), a.1.into()), BigRational::new(b.0.into(), b.1.into()))
    }

    pub fn zero() -> Self {
        QNum::rational(BigRational::zero())
    }

    pub fn one() -> Self {
        QNum::from_int(1)
    }

    pub fn sqrt5() -> Self {
        QNum::new(BigRational::zero(), BigRational::one())
    }

    /// The golden ratio `(1 + √5)/2`.
    pub fn phi() -> Self {
        let half = BigRational::new(1.into(), 2.into());
        QNum::new(half.clone(), half)
    }

    pub fn infinity() -> Self {
        QNum(Repr::Infinity)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.0, Repr::Infinity)
    }

    pub fn is_finite(&self) -> bool {
        !self.is_infinite()
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.0, Repr::Finite { a, b } if a.is_zero() && b.is_zero())
    }

    /// Rational part, `None` for infinity.
    pub fn a(&self) -> Option<&BigRational> {
        match &self.0 {
            Repr::Finite { a, .. } => Some(a),
            Repr::Infinity => None,
        }
    }

    /// Coefficient of √5, `None` for infinity.
    pub fn b(&self) -> Option<&BigRational> {
        match &self.0 {
            Repr::Finite { b, .. } => Some(b),
            Repr::Infinity => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(&self.0, Repr::Finite { b, .. } if b.is_zero())
    }

    /// Exact sign of the value. Infinity is positive.
    pub fn sign(&self) -> Ordering {
        match &self.0 {
            Repr::Infinity => Ordering::Greater,
            Repr::Finite { a, b } => sign_of(a, b),
        }
    }

    /// Field operation with explicit error reporting.
    pub fn arith(&self, rhs: &QNum, op: ArithOp) -> Result<QNum, NumError> {
        use Repr::*;
        match (&self.0, &rhs.0) {
            (Finite { a: a1, b: b1 }, Finite { a: a2, b: b2 }) => Ok(match op {
                ArithOp::Add => QNum::new(a1 + a2, b1 + b2),
                ArithOp::Sub => QNum::new(a1 - a2, b1 - b2),
                ArithOp::Mul => mul_parts(a1, b1, a2, b2),
                ArithOp::Div => {
                    if a2.is_zero() && b2.is_zero() {
                        return Err(NumError::DivisionByZero);
                    }
                    // multiply through by the conjugate a2 - b2·√5
                    let norm = a2 * a2 - b2 * b2 * BigRational::from_integer(5.into());
                    let num = mul_parts(a1, b1, a2, &-b2);
                    match num.0 {
                        Finite { a, b } => QNum::new(a / &norm, b / &norm),
                        Infinity => unreachable!(),
                    }
                }
            }),
            (Infinity, Finite { .. }) | (Infinity, Infinity) | (Finite { .. }, Infinity) if op == ArithOp::Add => {
                Ok(QNum::infinity())
            }
            (Infinity, Finite { .. }) if op == ArithOp::Sub => Ok(QNum::infinity()),
            _ => Err(NumError::InfiniteOperand(op)),
        }
    }

    pub fn checked_add(&self, rhs: &QNum) -> Result<QNum, NumError> {
        self.arith(rhs, ArithOp::Add)
    }

    pub fn checked_sub(&self, rhs: &QNum) -> Result<QNum, NumError> {
        self.arith(rhs, ArithOp::Sub)
    }

    pub fn checked_mul(&self, rhs: &QNum) -> Result<QNum, NumError> {
        self.arith(rhs, ArithOp::Mul)
    }

    pub fn checked_div(&self, rhs: &QNum) -> Result<QNum, NumError> {
        self.arith(rhs, ArithOp::Div)
    }

    pub fn recip(&self) -> Result<QNum, NumError> {
        QNum::one().checked_div(self)
    }

    /// Nearest binary64 approximation of the value.
    pub fn approx(&self) -> Result<f64, NumError> {
        match &self.0 {
            Repr::Infinity => Err(NumError::InfiniteApprox),
            Repr::Finite { a, b } => Ok(approx_parts(a, b)),
        }
    }

    /// Like [`QNum::approx`] but maps infinity to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        self.approx().unwrap_or(f64::INFINITY)
    }
}

fn mul_parts(a1: &BigRational, b1: &BigRational, a2: &BigRational, b2: &BigRational) -> QNum {
    if b1.is_zero() && b2.is_zero() {
        return QNum::rational(a1 * a2);
    }
    let five = BigRational::from_integer(5.into());
    QNum::new(a1 * a2 + b1 * b2 * five, a1 * b2 + a2 * b1)
}

fn sign_of(a: &BigRational, b: &BigRational) -> Ordering {
    let sa = rat_sign(a);
    let sb = rat_sign(b);
    if sb == Ordering::Equal {
        return sa;
    }
    if sa == Ordering::Equal || sa == sb {
        return sb;
    }
    // opposite signs: the term with the larger square wins
    let a2 = a * a;
    let b2 = b * b * BigRational::from_integer(5.into());
    match a2.cmp(&b2) {
        Ordering::Equal => Ordering::Equal,
        Ordering::Greater => sa,
        Ordering::Less => sb,
    }
}

fn rat_sign(r: &BigRational) -> Ordering {
    match r.numer().sign() {
        Sign::Minus => Ordering::Less,
        Sign::NoSign => Ordering::Equal,
        Sign::Plus => Ordering::Greater,
    }
}

const APPROX_BITS: usize = 160;

fn approx_parts(a: &BigRational, b: &BigRational) -> f64 {
    if b.is_zero() {
        return a.to_f64().unwrap_or(f64::NAN);
    }
    // Write the value as (p + sign(q)·sqrt(5q²)) / d over a common denominator and
    // evaluate the square root on a scaled integer, so cancellation between the
    // two terms cannot lose precision.
    let d = num_integer::lcm(a.denom().clone(), b.denom().clone());
    let p = a.numer() * (&d / a.denom());
    let q = b.numer() * (&d / b.denom());
    let scale = BigInt::one() << APPROX_BITS;
    let root = (&q * &q * BigInt::from(5) * &scale * &scale).sqrt();
    let root = if q.is_negative() { -root } else { root };
    let num = p * &scale + root;
    BigRational::new(num, d * scale).to_f64().unwrap_or(f64::NAN)
}

impl PartialOrd for QNum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QNum {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Infinity, Repr::Infinity) => Ordering::Equal,
            (Repr::Infinity, _) => Ordering::Greater,
            (_, Repr::Infinity) => Ordering::Less,
            (Repr::Finite { a: a1, b: b1 }, Repr::Finite { a: a2, b: b2 }) => {
                if b1.is_zero() && b2.is_zero() {
                    a1.cmp(a2)
                } else {
                    sign_of(&(a1 - a2), &(b1 - b2))
                }
            }
        }
    }
}

impl Neg for QNum {
    type Output = QNum;
    fn neg(self) -> QNum {
        match self.0 {
            Repr::Finite { a, b } => QNum::new(-a, -b),
            Repr::Infinity => panic!("negation of infinity is not representable"),
        }
    }
}

macro_rules! forward_op {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<&QNum> for &QNum {
            type Output = QNum;
            fn $method(self, rhs: &QNum) -> QNum {
                self.arith(rhs, $op).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl $trait<QNum> for QNum {
            type Output = QNum;
            fn $method(self, rhs: QNum) -> QNum {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&QNum> for QNum {
            type Output = QNum;
            fn $method(self, rhs: &QNum) -> QNum {
                (&self).$method(rhs)
            }
        }
        impl $trait<QNum> for &QNum {
            type Output = QNum;
            fn $method(self, rhs: QNum) -> QNum {
                self.$method(&rhs)
            }
        }
    };
}

forward_op!(Add, add, ArithOp::Add);
forward_op!(Sub, sub, ArithOp::Sub);
forward_op!(Mul, mul, ArithOp::Mul);
forward_op!(Div, div, ArithOp::Div);

fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Textual encoding: `"inf"`, a rational (`"3/2"`, `"-4"`), `"b*sqrt5"` or
/// `"a+b*sqrt5"` / `"a-b*sqrt5"`.
impl fmt::Display for QNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Infinity => f.write_str("inf"),
            Repr::Finite { a, b } if b.is_zero() => f.write_str(&fmt_rational(a)),
            Repr::Finite { a, b } if a.is_zero() => write!(f, "{}*sqrt5", fmt_rational(b)),
            Repr::Finite { a, b } => {
                if b.is_negative() {
                    write!(f, "{}-{}*sqrt5", fmt_rational(a), fmt_rational(&-b))
                } else {
                    write!(f, "{}+{}*sqrt5", fmt_rational(a), fmt_rational(b))
                }
            }
        }
    }
}

impl fmt::Debug for QNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QNum({self})")
    }
}

/// Parses a decimal (`"1.5"`, `"-0.25"`, `"2e-3"`) or fraction (`"3/2"`) exactly.
pub fn parse_rational(s: &str) -> Result<BigRational, NumError> {
    let err = || NumError::Parse(s.to_string());
    let s = s.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| err())? };
    let shift = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if shift >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, shift as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-shift) as usize))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

fn parse_term(term: &str, original: &str) -> Result<(BigRational, BigRational), NumError> {
    let err = || NumError::Parse(original.to_string());
    let (negative, body) = match term.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, term.strip_prefix('+').unwrap_or(term)),
    };
    let (a, b) = if let Some(coeff) = body.strip_suffix("sqrt5") {
        let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
        let b = if coeff.is_empty() { BigRational::one() } else { parse_rational(coeff).map_err(|_| err())? };
        (BigRational::zero(), b)
    } else {
        (parse_rational(body).map_err(|_| err())?, BigRational::zero())
    };
    Ok(if negative { (-a, -b) } else { (a, b) })
}

impl FromStr for QNum {
    type Err = NumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let lower = compact.to_ascii_lowercase();
        if matches!(lower.as_str(), "inf" | "+inf" | "infinity" | "∞") {
            return Ok(QNum::infinity());
        }
        if compact.is_empty() {
            return Err(NumError::Parse(s.to_string()));
        }
        // split into signed terms at '+'/'-' that do not follow an exponent marker
        let bytes = compact.as_bytes();
        let mut terms = Vec::new();
        let mut start = 0;
        for i in 1..bytes.len() {
            if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E' | b'/') {
                terms.push(&compact[start..i]);
                start = i;
            }
        }
        terms.push(&compact[start..]);
        let mut a = BigRational::zero();
        let mut b = BigRational::zero();
        for term in terms {
            let (ta, tb) = parse_term(term, s)?;
            a += ta;
            b += tb;
        }
        Ok(QNum::new(a, b))
    }
}

impl serde::Serialize for QNum {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for QNum {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(serde_json::Number),
        }
        let text = match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s,
            Raw::Number(n) => n.to_string(),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}
