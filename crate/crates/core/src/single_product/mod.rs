//! Single-product newsvendor: the nominal critical fractile, Scarf's
//! mean–variance minimax order, and the misspecification-averse model
//! that penalizes the transport distance to the moment set.

mod misspec;
mod sensitivity;
mod transform;

pub use misspec::{
    misspec_duals, misspec_quantity, misspec_worst_case, worst_case_transformed_expectation,
    TransformedWorstCase,
};
pub use sensitivity::{price_threshold_scan, variance_threshold_scan};
pub(crate) use transform::ell_unchecked;
pub use transform::{apply, ell, push_forward, transform, TransformRegime, TransformSpec};

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{domain, Result};
use crate::model::{scarf_factor, CostStructure, MomentSpec};

/// Which closed-form branch produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// `κ < σ²/(μ² + σ²)`: order nothing.
    Degenerate,
    LowAlpha,
    HighAlpha,
    /// No misspecification penalty (Scarf).
    AmbiguityOnly,
}

/// A named dual multiplier of the worst-case moment problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dual {
    pub name: String,
    pub value: f64,
}

impl Dual {
    fn new(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
        }
    }
}

/// Multipliers `(s, r, t)` of the mean, second-moment and normalization
/// constraints; the worst-case value equals `μs − (μ² + σ²)r − t`.
pub(crate) fn dual_list(s: f64, r: f64, t: f64) -> Vec<Dual> {
    vec![Dual::new("s", s), Dual::new("r", r), Dual::new("t", t)]
}

/// Solution of a single-product model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub quantity: f64,
    pub value: f64,
    pub regime: Regime,
    /// Worst-case member of the moment set at `quantity`.
    pub worst_case: DiscreteDistribution,
    /// Push-forward of `worst_case` under the transform; equals `worst_case`
    /// when there is no misspecification penalty.
    pub transformed_worst_case: DiscreteDistribution,
    pub duals: Vec<Dual>,
}

/// Profit `p·min(q, v) − c·q`.
pub fn profit(q: f64, v: f64, cost: &CostStructure) -> Result<f64> {
    if !(q >= 0.0 && v >= 0.0) {
        return domain(format!("order {q} and demand {v} must be nonnegative"));
    }
    Ok(profit_unchecked(q, v, cost))
}

#[inline]
pub(crate) fn profit_unchecked(q: f64, v: f64, cost: &CostStructure) -> f64 {
    cost.price() * q.min(v) - cost.cost() * q
}

/// Critical-fractile order `inf{x : CDF(x) ≥ κ}` under a known demand distribution.
pub fn nominal_quantity(demand: &DiscreteDistribution, cost: &CostStructure) -> f64 {
    demand.quantile(cost.margin())
}

/// Scarf's minimax order over all distributions with the given mean and
/// standard deviation.
pub fn scarf_quantity(m: &MomentSpec, cost: &CostStructure) -> Result<SolveReport> {
    let (quantity, value, regime) = if m.is_degenerate_for(cost) {
        (0.0, 0.0, Regime::Degenerate)
    } else {
        let (p, c) = (cost.price(), cost.cost());
        let q = m.mean() + m.std() * scarf_factor(1.0 - cost.margin());
        let v = m.mean() * (p - c) - m.std() * (c * (p - c)).sqrt();
        (q, v, Regime::AmbiguityOnly)
    };
    let worst_case = scarf_worst_case(m, quantity)?;
    Ok(SolveReport {
        quantity,
        value,
        regime,
        transformed_worst_case: worst_case.clone(),
        worst_case,
        duals: scarf_duals(m, quantity, cost),
    })
}

/// Worst-case expected profit of order `q` over the moment set.
pub fn scarf_worst_value(q: f64, m: &MomentSpec, cost: &CostStructure) -> f64 {
    let (p, c) = (cost.price(), cost.cost());
    let (mu, var, m2) = (m.mean(), m.variance(), m.second_moment());
    if 2.0 * mu * q >= m2 {
        let a = q + mu;
        let b = (q - mu) * (q - mu) + var;
        // a − √b written without cancellation: a² − b = 4qμ − σ².
        0.5 * p * (4.0 * q * mu - var) / (a + b.sqrt()) - c * q
    } else {
        p * q * mu * mu / m2 - c * q
    }
}

/// Two-point distribution attaining Scarf's worst case at order `q`.
pub fn scarf_worst_case(m: &MomentSpec, q: f64) -> Result<DiscreteDistribution> {
    let (mu, sigma, m2) = (m.mean(), m.std(), m.second_moment());
    if sigma == 0.0 {
        return DiscreteDistribution::point_mass(mu);
    }
    if 2.0 * mu * q < m2 {
        DiscreteDistribution::from_atoms([(0.0, sigma * sigma / m2), (m2 / mu, mu * mu / m2)])
    } else {
        let w = ((q - mu) * (q - mu) + sigma * sigma).sqrt();
        let lower = (2.0 * q * mu - m2) / (q + w);
        let tilt = (q - mu) / (2.0 * w);
        DiscreteDistribution::from_atoms([(lower, 0.5 + tilt), (q + w, 0.5 - tilt)])
    }
}

fn scarf_duals(m: &MomentSpec, q: f64, cost: &CostStructure) -> Vec<Dual> {
    let (p, c) = (cost.price(), cost.cost());
    let (mu, sigma, m2) = (m.mean(), m.std(), m.second_moment());
    if sigma == 0.0 {
        return Vec::new();
    }
    if 2.0 * mu * q < m2 {
        dual_list(2.0 * mu * p * q / m2, mu * mu * p * q / (m2 * m2), c * q)
    } else {
        let w = ((q - mu) * (q - mu) + sigma * sigma).sqrt();
        let r = p / (4.0 * w);
        dual_list(
            p / 2.0 + 2.0 * r * q,
            r,
            p * p / (16.0 * r) + r * q * q + p * q / 2.0 - (p - c) * q,
        )
    }
}
