//! Misspecification-averse model: worst-case expected transformed profit
//! over the mean–variance set, its two-point worst cases, dual multipliers,
//! and the optimal order in each regime.

use crate::distribution::DiscreteDistribution;
use crate::error::Result;
use crate::model::{div_pos, scarf_factor, CostStructure, MisspecIndex, MomentSpec};

use super::transform::{push_forward, transform};
use super::{
    dual_list, scarf_quantity, scarf_worst_case, scarf_worst_value, Dual, Regime, SolveReport,
};

/// The worst case `G⋆` in the moment set and its image under `φ_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedWorstCase {
    pub g_star: DiscreteDistribution,
    pub transformed: DiscreteDistribution,
}

/// Which two-point construction attains the worst case at a given order.
enum Branch {
    /// Atoms straddle the quadratic part of the transform.
    Quadratic { x: f64, sqrt_d: f64 },
    /// Atoms `u ∓ W` around the shifted order `u = q + p/(4α)`.
    Shifted { u: f64, w: f64 },
}

fn branch(a: f64, q: f64, m: &MomentSpec, cost: &CostStructure) -> Branch {
    let p = cost.price();
    let (mu, var, m2) = (m.mean(), m.variance(), m.second_moment());
    let in_shifted_region = 4.0 * a * q >= p && (2.0 * mu - p / a) * q >= m2 - p * mu / (2.0 * a);
    if in_shifted_region {
        let u = q + p / (4.0 * a);
        let w = ((u - mu) * (u - mu) + var).sqrt();
        Branch::Shifted { u, w }
    } else {
        let x = p * q / a;
        let d = (x - mu * mu + var).powi(2) + 4.0 * mu * mu * var;
        Branch::Quadratic {
            x,
            sqrt_d: d.sqrt(),
        }
    }
}

/// `min_{G ∈ A} E_G[ℓ(α, q, ṽ)]`; with `α = ∞` this is Scarf's worst-case profit.
///
/// At `α = 0` the inner minimum sends all demand to zero and the value is `−cq`.
pub fn worst_case_transformed_expectation(
    alpha: MisspecIndex,
    q: f64,
    m: &MomentSpec,
    cost: &CostStructure,
) -> f64 {
    let (p, c) = (cost.price(), cost.cost());
    let a = match alpha {
        MisspecIndex::Infinity => return scarf_worst_value(q, m, cost),
        MisspecIndex::Finite(a) if a == 0.0 => return -c * q,
        MisspecIndex::Finite(a) => a,
    };
    let (mu, var, m2) = (m.mean(), m.variance(), m.second_moment());
    match branch(a, q, m, cost) {
        Branch::Shifted { .. } => {
            let s = p / (4.0 * a);
            let lin = q + mu - s;
            let rad = (q - mu + s) * (q - mu + s) + var;
            // lin − √rad, using lin² − rad = 4q(μ − s) − σ² when lin > 0.
            let gap = if lin > 0.0 {
                (4.0 * q * (mu - s) - var) / (lin + rad.sqrt())
            } else {
                lin - rad.sqrt()
            };
            0.5 * p * gap - c * q
        }
        Branch::Quadratic { x, sqrt_d } => {
            // (α/2)(x + m2 − √D) rewritten as 2μ²pq/(x + m2 + √D).
            2.0 * mu * mu * p * q / (x + m2 + sqrt_d) - c * q
        }
    }
}

/// Two-point worst case in the moment set and its transformed image at order `q`.
pub fn misspec_worst_case(
    alpha: MisspecIndex,
    q: f64,
    m: &MomentSpec,
    cost: &CostStructure,
) -> Result<TransformedWorstCase> {
    let p = cost.price();
    let (mu, sigma, var, m2) = (m.mean(), m.std(), m.variance(), m.second_moment());
    let a = match alpha {
        MisspecIndex::Infinity => {
            let g = scarf_worst_case(m, q)?;
            return Ok(TransformedWorstCase {
                transformed: g.clone(),
                g_star: g,
            });
        }
        MisspecIndex::Finite(a) if a == 0.0 => {
            // Every atom is transported to zero demand.
            return Ok(TransformedWorstCase {
                g_star: scarf_worst_case(m, q)?,
                transformed: DiscreteDistribution::point_mass(0.0)?,
            });
        }
        MisspecIndex::Finite(a) => a,
    };
    let g_star = if sigma == 0.0 {
        DiscreteDistribution::point_mass(mu)?
    } else {
        match branch(a, q, m, cost) {
            Branch::Shifted { u, w } => {
                let mut lower = (2.0 * u * mu - m2) / (u + w);
                // At the variance cap the lower atom sits at zero up to rounding.
                if lower < 0.0 && lower > -1e-9 * (1.0 + mu) {
                    lower = 0.0;
                }
                let tilt = (u - mu) / (2.0 * w);
                DiscreteDistribution::from_atoms([(lower, 0.5 + tilt), (u + w, 0.5 - tilt)])?
            }
            Branch::Quadratic { x, sqrt_d } => {
                let sum = x + m2 + sqrt_d;
                let lower = 2.0 * mu * x / sum;
                let upper = sum / (2.0 * mu);
                let tilt = (mu * mu - var - x) / (2.0 * sqrt_d);
                DiscreteDistribution::from_atoms([(lower, 0.5 - tilt), (upper, 0.5 + tilt)])?
            }
        }
    };
    let t = transform(alpha, p, q)?;
    let transformed = push_forward(&g_star, &t)?;
    Ok(TransformedWorstCase {
        g_star,
        transformed,
    })
}

/// Dual multipliers `(s, r, t)` of the worst-case problem at order `q`.
/// Empty for zero variance or `α = 0`, where the second-moment row is slack.
pub fn misspec_duals(
    alpha: MisspecIndex,
    q: f64,
    m: &MomentSpec,
    cost: &CostStructure,
) -> Vec<Dual> {
    let (p, c) = (cost.price(), cost.cost());
    let (mu, m2) = (m.mean(), m.second_moment());
    let a = match alpha {
        MisspecIndex::Infinity => return super::scarf_duals(m, q, cost),
        MisspecIndex::Finite(a) => a,
    };
    if a == 0.0 || m.std() == 0.0 {
        return Vec::new();
    }
    match branch(a, q, m, cost) {
        Branch::Shifted { u, w } => {
            let r = p / (4.0 * w);
            dual_list(
                p / 2.0 + 2.0 * r * u,
                r,
                p * p / (16.0 * r) + r * u * u + p * u / 2.0 - (p - c) * q,
            )
        }
        Branch::Quadratic { x, sqrt_d } => {
            // (x + m2)/√D − 1 = 4μ²x / ((x + m2 + √D)√D)
            let excess = 4.0 * mu * mu * x / ((x + m2 + sqrt_d) * sqrt_d);
            dual_list(
                2.0 * mu * p * q / sqrt_d,
                0.5 * a * excess,
                0.5 * p * q * excess + c * q,
            )
        }
    }
}

/// Optimal order of the misspecification-averse model.
pub fn misspec_quantity(
    alpha: MisspecIndex,
    m: &MomentSpec,
    cost: &CostStructure,
) -> Result<SolveReport> {
    let a = match alpha {
        MisspecIndex::Infinity => return scarf_quantity(m, cost),
        MisspecIndex::Finite(a) => a,
    };
    let (p, kappa) = (cost.price(), cost.margin());
    let (mu, sigma) = (m.mean(), m.std());
    let (quantity, regime) = if m.is_degenerate_for(cost) {
        (0.0, Regime::Degenerate)
    } else if a == 0.0 {
        (0.0, Regime::LowAlpha)
    } else {
        let f = scarf_factor(1.0 - kappa);
        let lower_atom = mu - sigma * ((1.0 - kappa) / kappa).sqrt();
        if a >= div_pos(p, 2.0 * lower_atom) {
            (mu + sigma * f - p / (4.0 * a), Regime::HighAlpha)
        } else {
            // Nonnegative on the domain; clamp rounding at the variance cap.
            (
                ((mu * mu - sigma * sigma + 2.0 * mu * sigma * f) * a / p).max(0.0),
                Regime::LowAlpha,
            )
        }
    };
    let value = if quantity == 0.0 {
        0.0
    } else {
        worst_case_transformed_expectation(alpha, quantity, m, cost)
    };
    let wc = misspec_worst_case(alpha, quantity, m, cost)?;
    Ok(SolveReport {
        quantity,
        value,
        regime,
        worst_case: wc.g_star,
        transformed_worst_case: wc.transformed,
        duals: misspec_duals(alpha, quantity, m, cost),
    })
}
