//! Extended reals `ℝ ∪ {−∞, +∞}`.
//!
//! Products follow the measure-theoretic convention `(±∞)·0 = 0·(±∞) = 0`,
//! so a zero multiplier annihilates an infinite derivative value. Sums of
//! `+∞` and `−∞` are rejected instead of being saturated: the multiplier
//! rules used by the certificates never produce them.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An extended real number.
///
/// Build values through [`ExtReal::new`] (or the `From<f64>`-like helpers)
/// so that the `Finite` payload is always a finite, non-NaN `f64`. Matching on
/// the variants is fine.
#[derive(Clone, Copy, Debug)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Lifts an `f64`. Infinite floats map to the infinite variants; NaN is an
    /// error.
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::NotANumber)
        } else if v == f64::INFINITY {
            Ok(ExtReal::PosInf)
        } else if v == f64::NEG_INFINITY {
            Ok(ExtReal::NegInf)
        } else {
            Ok(ExtReal::Finite(v))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_zero(self) -> bool {
        matches!(self, ExtReal::Finite(v) if v == 0.0)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// The value as an `f64`, with infinities mapped to `±f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// `true` for `Finite(v)` with `v < 0` and for `NegInf`.
    pub fn is_negative(self) -> bool {
        self < ExtReal::ZERO
    }

    /// `true` for `Finite(v)` with `v > 0` and for `PosInf`.
    pub fn is_positive(self) -> bool {
        self > ExtReal::ZERO
    }

    /// Replaces finite values within `tol` of zero by exact zero.
    pub fn snap_to_zero(self, tol: f64) -> Self {
        match self {
            ExtReal::Finite(v) if v.abs() <= tol => ExtReal::ZERO,
            other => other,
        }
    }

    fn sign(self) -> i8 {
        match self {
            ExtReal::NegInf => -1,
            ExtReal::PosInf => 1,
            ExtReal::Finite(v) if v > 0.0 => 1,
            ExtReal::Finite(v) if v < 0.0 => -1,
            ExtReal::Finite(_) => 0,
        }
    }

    fn rank(self) -> u8 {
        match self {
            ExtReal::NegInf => 0,
            ExtReal::Finite(_) => 1,
            ExtReal::PosInf => 2,
        }
    }
}

/// Extended product with `(±∞)·0 = 0·(±∞) = 0`.
pub fn xmul(a: ExtReal, b: ExtReal) -> ExtReal {
    match (a, b) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => {
            // overflow lands on an infinity, never NaN: both factors are finite
            ExtReal::new(x * y).unwrap_or(ExtReal::ZERO)
        }
        _ if a.is_zero() || b.is_zero() => ExtReal::ZERO,
        _ => {
            if a.sign() * b.sign() > 0 {
                ExtReal::PosInf
            } else {
                ExtReal::NegInf
            }
        }
    }
}

/// Extended sum of two values; `+∞ + −∞` is an [`Error::IndeterminateSum`].
pub fn xadd(a: ExtReal, b: ExtReal) -> Result<ExtReal> {
    match (a, b) {
        (ExtReal::PosInf, ExtReal::NegInf) | (ExtReal::NegInf, ExtReal::PosInf) => {
            Err(Error::IndeterminateSum)
        }
        (ExtReal::PosInf, _) | (_, ExtReal::PosInf) => Ok(ExtReal::PosInf),
        (ExtReal::NegInf, _) | (_, ExtReal::NegInf) => Ok(ExtReal::NegInf),
        (ExtReal::Finite(x), ExtReal::Finite(y)) => ExtReal::new(x + y),
    }
}

/// Pairing `⟨λ, α⟩ = Σ λ_i·α_i` of nonnegative finite multipliers with
/// extended reals, using [`xmul`] termwise.
pub fn xdot(lambda: &[f64], alpha: &[ExtReal]) -> Result<ExtReal> {
    if lambda.len() != alpha.len() {
        return Err(Error::LengthMismatch {
            expected: lambda.len(),
            got: alpha.len(),
        });
    }
    let mut finite_sum = 0.0;
    let mut pos = false;
    let mut neg = false;
    for (&l, &a) in lambda.iter().zip(alpha) {
        if !l.is_finite() || l < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "multiplier {l} is not a nonnegative finite real"
            )));
        }
        match xmul(ExtReal::Finite(l), a) {
            ExtReal::Finite(v) => finite_sum += v,
            ExtReal::PosInf => pos = true,
            ExtReal::NegInf => neg = true,
        }
    }
    match (pos, neg) {
        (true, true) => Err(Error::IndeterminateSum),
        (true, false) => Ok(ExtReal::PosInf),
        (false, true) => Ok(ExtReal::NegInf),
        (false, false) => ExtReal::new(finite_sum),
    }
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            // -0.0 and 0.0 compare equal, unlike total_cmp
            (ExtReal::Finite(a), ExtReal::Finite(b)) => {
                a.partial_cmp(b).unwrap_or_else(|| a.total_cmp(b))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::PosInf => f.write_str("+inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::NegInf => serializer.serialize_str("-inf"),
            ExtReal::PosInf => serializer.serialize_str("+inf"),
            ExtReal::Finite(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ExtRealVisitor;

        impl Visitor<'_> for ExtRealVisitor {
            type Value = ExtReal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a finite number or one of \"-inf\", \"+inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtReal, E> {
                ExtReal::new(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtReal, E> {
                match v {
                    "-inf" => Ok(ExtReal::NegInf),
                    "+inf" | "inf" => Ok(ExtReal::PosInf),
                    other => other
                        .parse::<f64>()
                        .map_err(E::custom)
                        .and_then(|x| ExtReal::new(x).map_err(E::custom)),
                }
            }
        }

        deserializer.deserialize_any(ExtRealVisitor)
    }
}
