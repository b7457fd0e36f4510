//! The pointwise inner minimum `ℓ(α, q, v) = min_u {π(q, u) + α(u − v)²}` and
//! the increasing demand transform `φ_α` with `π(q, φ_α(v)) = ℓ(α, q, v)`.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{domain, Error, Result};
use crate::model::{CostStructure, MisspecIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformRegime {
    /// `α < p/(4q)`: `φ(v) = αv²/p` everywhere.
    Quadratic,
    /// `α ≥ p/(4q)`: quadratic below `p/(2α)`, a unit-slope shift above.
    Mixed,
}

/// The transform `φ_α` for a fixed order quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub alpha: MisspecIndex,
    pub price: f64,
    pub order_quantity: f64,
    pub regime: TransformRegime,
}

fn check_alpha(alpha: MisspecIndex) -> Result<()> {
    match alpha {
        MisspecIndex::Finite(a) if a <= 0.0 => Err(Error::DegenerateIndex),
        _ => Ok(()),
    }
}

/// Inner minimum of profit plus the quadratic transport penalty.
pub fn ell(alpha: MisspecIndex, q: f64, v: f64, cost: &CostStructure) -> Result<f64> {
    check_alpha(alpha)?;
    if !(q >= 0.0 && v >= 0.0) {
        return domain(format!("order {q} and demand {v} must be nonnegative"));
    }
    Ok(ell_unchecked(alpha, q, v, cost))
}

#[inline]
pub(crate) fn ell_unchecked(alpha: MisspecIndex, q: f64, v: f64, cost: &CostStructure) -> f64 {
    let (p, c) = (cost.price(), cost.cost());
    let a = match alpha {
        MisspecIndex::Infinity => return p * q.min(v) - c * q,
        MisspecIndex::Finite(a) => a,
    };
    if 4.0 * a * q <= p {
        (a * v * v).min(p * q) - c * q
    } else if 2.0 * a * v <= p {
        a * v * v - c * q
    } else {
        p * (v - p / (4.0 * a)).min(q) - c * q
    }
}

/// Builds `φ_α` for order `q` at price `p`.
pub fn transform(alpha: MisspecIndex, price: f64, q: f64) -> Result<TransformSpec> {
    check_alpha(alpha)?;
    if !(price > 0.0) || !(q >= 0.0) {
        return domain(format!(
            "need price > 0 and q >= 0, got price {price}, q {q}"
        ));
    }
    let regime = match alpha {
        MisspecIndex::Infinity => TransformRegime::Mixed,
        MisspecIndex::Finite(a) if 4.0 * a * q < price => TransformRegime::Quadratic,
        MisspecIndex::Finite(_) => TransformRegime::Mixed,
    };
    Ok(TransformSpec {
        alpha,
        price,
        order_quantity: q,
        regime,
    })
}

/// Evaluates `φ_α(v)`.
pub fn apply(t: &TransformSpec, v: f64) -> f64 {
    let a = match t.alpha {
        MisspecIndex::Infinity => return v,
        MisspecIndex::Finite(a) => a,
    };
    let p = t.price;
    match t.regime {
        TransformRegime::Quadratic => a * v * v / p,
        TransformRegime::Mixed if 2.0 * a * v < p => a * v * v / p,
        TransformRegime::Mixed => v - p / (4.0 * a),
    }
}

/// Distribution of `φ_α(V)` for `V ~ G`.
pub fn push_forward(g: &DiscreteDistribution, t: &TransformSpec) -> Result<DiscreteDistribution> {
    g.map(|v| apply(t, v))
}
