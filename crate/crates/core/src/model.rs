//! Problem primitives: prices and costs, demand moments, and the
//! misspecification index.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};

/// Unit selling price `p` and unit purchase cost `c` with `0 < c < p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCost")]
pub struct CostStructure {
    price: f64,
    cost: f64,
}

#[derive(Deserialize)]
struct RawCost {
    price: f64,
    cost: f64,
}

impl TryFrom<RawCost> for CostStructure {
    type Error = Error;
    fn try_from(raw: RawCost) -> Result<Self> {
        CostStructure::new(raw.price, raw.cost)
    }
}

impl CostStructure {
    pub fn new(price: f64, cost: f64) -> Result<Self> {
        if !price.is_finite() || !cost.is_finite() {
            return domain(format!("price {price} and cost {cost} must be finite"));
        }
        if !(price > 0.0 && cost > 0.0 && cost < price) {
            return domain(format!(
                "need 0 < cost < price, got price {price}, cost {cost}"
            ));
        }
        Ok(Self { price, cost })
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Profit margin `κ = (p − c)/p`, the critical fractile.
    pub fn margin(&self) -> f64 {
        (self.price - self.cost) / self.price
    }

    pub fn with_price(&self, price: f64) -> Result<Self> {
        Self::new(price, self.cost)
    }
}

/// Mean and standard deviation of demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMoments")]
pub struct MomentSpec {
    mean: f64,
    std: f64,
}

#[derive(Deserialize)]
struct RawMoments {
    mean: f64,
    std: f64,
}

impl TryFrom<RawMoments> for MomentSpec {
    type Error = Error;
    fn try_from(raw: RawMoments) -> Result<Self> {
        MomentSpec::new(raw.mean, raw.std)
    }
}

impl MomentSpec {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() {
            return domain(format!("mean {mean} and std {std} must be finite"));
        }
        if mean <= 0.0 || std < 0.0 {
            return domain(format!(
                "need mean > 0 and std >= 0, got mean {mean}, std {std}"
            ));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }

    pub fn second_moment(&self) -> f64 {
        self.mean * self.mean + self.std * self.std
    }

    /// True when `κ < σ²/(μ² + σ²)`: every robust model then orders nothing.
    pub fn is_degenerate_for(&self, cost: &CostStructure) -> bool {
        cost.margin() < self.variance() / self.second_moment()
    }
}

/// Weight on the transport penalty. `Infinity` switches the penalty off and
/// leaves the pure moment-ambiguity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MisspecIndex {
    Finite(f64),
    Infinity,
}

impl MisspecIndex {
    /// Accepts any `α ≥ 0`; `f64::INFINITY` maps to [`MisspecIndex::Infinity`].
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == f64::INFINITY {
            Ok(Self::Infinity)
        } else if alpha.is_finite() && alpha >= 0.0 {
            Ok(Self::Finite(alpha))
        } else {
            domain(format!("misspecification index must be >= 0, got {alpha}"))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinity)
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            Self::Finite(a) => Some(a),
            Self::Infinity => None,
        }
    }

    /// Numeric value with `Infinity` mapped to `f64::INFINITY`.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Self::Finite(a) => a,
            Self::Infinity => f64::INFINITY,
        }
    }

    /// `p/α`, which vanishes at infinity.
    pub(crate) fn price_ratio(&self, price: f64) -> f64 {
        match *self {
            Self::Finite(a) => price / a,
            Self::Infinity => 0.0,
        }
    }
}

impl PartialOrd for MisspecIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl fmt::Display for MisspecIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(a) => write!(f, "{a}"),
            Self::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for MisspecIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(Self::Infinity),
            t => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::InputDomain(format!("cannot parse alpha from {s:?}")))?;
                Self::new(v)
            }
        }
    }
}

// JSON has no infinity, so the unbounded index is written as the string "inf".
impl Serialize for MisspecIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Self::Finite(a) => s.serialize_f64(a),
            Self::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for MisspecIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(v) => MisspecIndex::new(v),
            Raw::Text(t) => t.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `num / den⁺` with the convention `1/0 = ∞`.
pub(crate) fn div_pos(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Scarf's factor `f(x) = (1 − 2x) / (2√(x(1 − x)))`.
pub fn scarf_factor(x: f64) -> f64 {
    (1.0 - 2.0 * x) / (2.0 * (x * (1.0 - x)).sqrt())
}
