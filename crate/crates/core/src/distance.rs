//! Alternative distances: a Wasserstein ball around an empirical reference
//! with a transport misspecification penalty, the plain Wasserstein-ball
//! model, a total-variation penalty, and the map from a transport radius to
//! the equivalent penalty weight.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{domain, Error, Result};
use crate::model::{CostStructure, MisspecIndex, MomentSpec};
use crate::single_product::{nominal_quantity, scarf_quantity, scarf_worst_value};

const ROOT_TOL: f64 = 1e-10;
const ROOT_CAP: usize = 200;

/// Empirical reference law `H` with its critical fractile and the truncated
/// second moments that decide the Wasserstein solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    h: DiscreteDistribution,
    margin: f64,
    q_star: f64,
    beta: f64,
    beta_effective: f64,
}

impl ReferenceDistribution {
    pub fn new(h: DiscreteDistribution, cost: &CostStructure) -> Result<Self> {
        let q_star = nominal_quantity(&h, cost);
        if q_star <= 0.0 {
            return Err(Error::ZeroReferenceFractile);
        }
        let margin = cost.margin();
        let beta = h
            .iter()
            .filter(|&(v, _)| v <= q_star)
            .map(|(v, w)| w * v * v)
            .sum();
        let beta_effective = truncated_moment(&h, margin, q_star);
        Ok(Self {
            h,
            margin,
            q_star,
            beta,
            beta_effective,
        })
    }

    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.h
    }

    /// `H⁻¹(κ)`, the nominal order under the reference.
    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    /// `∫_{[0, q⋆]} u² dH(u)` with the atom at `q⋆` fully included.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `∫_{[0, q⋆]} u² dH(u) − q⋆²(H(q⋆) − κ)`: the atom at `q⋆` counts only
    /// with the mass needed to reach level `κ`. This is the radius beyond
    /// which the optimal order drops to zero, and it equals [`Self::beta`]
    /// whenever `H(q⋆) = κ` (in particular for continuous references).
    pub fn beta_effective(&self) -> f64 {
        self.beta_effective
    }

    /// Continuous, nondecreasing-on-`[0, q⋆]` function
    /// `B(y) = ∫_{[0, y]} u² dH + y²(κ − H(y))`, with `B(q⋆)` the effective β.
    fn truncated(&self, y: f64) -> f64 {
        truncated_moment(&self.h, self.margin, y)
    }
}

fn truncated_moment(h: &DiscreteDistribution, margin: f64, y: f64) -> f64 {
    let (mut mass, mut moment) = (0.0, 0.0);
    for (v, w) in h.iter().take_while(|&(v, _)| v <= y) {
        mass += w;
        moment += w * v * v;
    }
    moment + y * y * (margin - mass)
}

/// `(H⁻¹(κ), ∫_{[0, H⁻¹(κ)]} u² dH)` with the closed-interval convention.
pub fn reference_beta(h: &DiscreteDistribution, cost: &CostStructure) -> Result<(f64, f64)> {
    let r = ReferenceDistribution::new(h.clone(), cost)?;
    Ok((r.q_star, r.beta))
}

/// Ball radius `θ` around the reference plus the misspecification index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSpec {
    pub theta: f64,
    pub alpha: MisspecIndex,
}

impl RadiusSpec {
    pub fn new(theta: f64, alpha: MisspecIndex) -> Result<Self> {
        if !(theta >= 0.0 && theta.is_finite()) {
            return domain(format!("radius must be finite and >= 0, got {theta}"));
        }
        Ok(Self { theta, alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WassersteinCase {
    /// `θ = 0`: the multiplier equals `α`.
    ZeroRadius,
    /// Radius at least the effective β: order nothing.
    LargeRadius,
    /// Closed-form multiplier below `p/(2q⋆)`.
    Interior,
    /// Multiplier from the root equation on `[p/(2q⋆), α)`.
    RootEquation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RootQuality {
    Converged,
    /// The bracket collapsed onto a jump of the equation instead of a zero.
    StepCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinSolution {
    /// Optimal dual multiplier `γ⋆`; infinite only for `θ = 0, α = ∞`.
    pub gamma_star: MisspecIndex,
    /// Optimal order `ψ⋆`.
    pub psi_star: f64,
    pub case: WassersteinCase,
    pub root_quality: Option<RootQuality>,
}

/// Optimal order for the Wasserstein ball of radius `θ` around `H` with
/// transport misspecification penalty `α`.
pub fn wasserstein_misspec_solve(
    h: &ReferenceDistribution,
    spec: &RadiusSpec,
    cost: &CostStructure,
) -> Result<WassersteinSolution> {
    let p = cost.price();
    let q_h = h.q_star();
    let beta = h.beta_effective();
    let theta = spec.theta;
    let x0 = p / (2.0 * q_h);

    let (gamma, case, root_quality) = if theta == 0.0 {
        (spec.alpha, WassersteinCase::ZeroRadius, None)
    } else if theta >= beta {
        (
            MisspecIndex::Finite(0.0),
            WassersteinCase::LargeRadius,
            None,
        )
    } else {
        let interior = match spec.alpha {
            MisspecIndex::Finite(a) => Some(a * (1.0 - (theta / beta).sqrt())).filter(|&g| g < x0),
            MisspecIndex::Infinity => None,
        };
        match interior {
            Some(g) => (MisspecIndex::Finite(g), WassersteinCase::Interior, None),
            None => {
                let (g, quality) = solve_root_equation(h, theta, spec.alpha, x0, p);
                (
                    MisspecIndex::Finite(g),
                    WassersteinCase::RootEquation,
                    Some(quality),
                )
            }
        }
    };
    let psi_star = match gamma {
        MisspecIndex::Infinity => q_h,
        MisspecIndex::Finite(g) if g < x0 => g * q_h * q_h / p,
        MisspecIndex::Finite(g) => q_h - p / (4.0 * g),
    };
    Ok(WassersteinSolution {
        gamma_star: gamma,
        psi_star,
        case,
        root_quality,
    })
}

/// Solves `B(p/(2x)) = α²θ/(α − x)²` (or `= θ` when `α = ∞`) for `x ≥ x0`.
fn solve_root_equation(
    h: &ReferenceDistribution,
    theta: f64,
    alpha: MisspecIndex,
    x0: f64,
    p: f64,
) -> (f64, RootQuality) {
    let residual = |x: f64| -> f64 {
        let penalty = match alpha {
            MisspecIndex::Finite(a) => a * a * theta / ((a - x) * (a - x)),
            MisspecIndex::Infinity => theta,
        };
        h.truncated(p / (2.0 * x)) - penalty
    };
    let mut lo = x0;
    let mut hi = match alpha {
        MisspecIndex::Finite(a) => a * (1.0 - 1e-12),
        MisspecIndex::Infinity => {
            let mut hi = 2.0 * x0;
            while residual(hi) > 0.0 {
                hi *= 2.0;
            }
            hi
        }
    };
    if residual(lo) <= 0.0 {
        return (lo, RootQuality::Converged);
    }
    if residual(hi) >= 0.0 {
        return (hi, RootQuality::Converged);
    }
    for _ in 0..ROOT_CAP {
        if hi - lo <= ROOT_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (residual(lo), residual(hi));
    let (x, r) = if rl.abs() <= rh.abs() {
        (lo, rl)
    } else {
        (hi, rh)
    };
    let scale = h.beta_effective().max(theta);
    let quality = if r.abs() > 1e-6 * scale {
        RootQuality::StepCrossing
    } else {
        RootQuality::Converged
    };
    (x, quality)
}

/// Optimal order for the plain Wasserstein ball (no misspecification penalty).
pub fn wasserstein_ambiguity_quantity(
    h: &ReferenceDistribution,
    theta: f64,
    cost: &CostStructure,
) -> Result<f64> {
    let spec = RadiusSpec::new(theta, MisspecIndex::Infinity)?;
    Ok(wasserstein_misspec_solve(h, &spec, cost)?.psi_star)
}

/// Optimal order under a total-variation misspecification penalty,
/// `min{2α/p, q⋆_∞}`. The penalty counts the full variation norm, which is
/// twice the largest set-wise probability gap.
pub fn tv_misspec_quantity(
    alpha: MisspecIndex,
    m: &MomentSpec,
    cost: &CostStructure,
) -> Result<f64> {
    let scarf = scarf_quantity(m, cost)?.quantity;
    Ok(match alpha {
        MisspecIndex::Infinity => scarf,
        MisspecIndex::Finite(a) => (2.0 * a / cost.price()).min(scarf),
    })
}

/// Worst-case profit of order `q` under the total-variation penalty. Moving
/// demand mass to zero costs `2α` per unit, so the adversary truncates the
/// sale at `2α/p`: the value is Scarf's worst case of `min{q, 2α/p}` minus the
/// cost of the excess units.
pub fn tv_misspec_value(
    alpha: MisspecIndex,
    q: f64,
    m: &MomentSpec,
    cost: &CostStructure,
) -> Result<f64> {
    if !(q >= 0.0) {
        return domain(format!("order must be >= 0, got {q}"));
    }
    let capped = match alpha {
        MisspecIndex::Infinity => q,
        MisspecIndex::Finite(a) => q.min(2.0 * a / cost.price()),
    };
    Ok(scarf_worst_value(capped, m, cost) - cost.cost() * (q - capped))
}

/// Penalty weight equivalent to a transport budget `ε` around the estimated
/// moment set: `½√(p(p − c)/ε)` for budgets below `κ(μ̂ − σ̂√((1−κ)/κ))²`,
/// zero above, infinite at `ε = 0`.
pub fn alpha_for_radius(
    epsilon_total: f64,
    m_hat: &MomentSpec,
    cost: &CostStructure,
) -> Result<MisspecIndex> {
    if !(epsilon_total >= 0.0) || epsilon_total.is_nan() {
        return domain(format!(
            "transport budget must be >= 0, got {epsilon_total}"
        ));
    }
    if m_hat.is_degenerate_for(cost) {
        warn!("estimated moments are degenerate for this margin; returning alpha = 0");
        return Ok(MisspecIndex::Finite(0.0));
    }
    if epsilon_total == 0.0 {
        return Ok(MisspecIndex::Infinity);
    }
    let (p, c, kappa) = (cost.price(), cost.cost(), cost.margin());
    let lower_atom = m_hat.mean() - m_hat.std() * ((1.0 - kappa) / kappa).sqrt();
    if epsilon_total < kappa * lower_atom * lower_atom {
        Ok(MisspecIndex::Finite(
            0.5 * (p * (p - c) / epsilon_total).sqrt(),
        ))
    } else {
        Ok(MisspecIndex::Finite(0.0))
    }
}
