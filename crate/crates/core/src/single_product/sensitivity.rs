//! Grid scans for the price and variance levels beyond which the optimal
//! misspecification-averse order starts to fall.

use crate::error::{domain, Error, Result};
use crate::model::{CostStructure, MisspecIndex, MomentSpec};

use super::misspec_quantity;

const MONOTONE_TOL: f64 = 1e-12;

/// Smallest index `i` such that `values[i..]` is non-increasing and ends strictly
/// below where it starts. A flat or single-point tail does not count as a turn.
fn turning_index(values: &[f64]) -> Option<usize> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mut start = n - 1;
    while start > 0
        && values[start] <= values[start - 1] + MONOTONE_TOL * values[start - 1].abs().max(1.0)
    {
        start -= 1;
    }
    let drop = values[start] - values[n - 1];
    (start < n - 1 && drop > MONOTONE_TOL * values[start].abs().max(1.0)).then_some(start)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return domain("grid must be strictly increasing");
    }
    Ok(())
}

/// Smallest grid price after which the optimal order is non-increasing in
/// price for the rest of the grid, or `None` if the order never turns down.
/// A single-point grid returns `None`.
pub fn price_threshold_scan(
    alpha: MisspecIndex,
    m: &MomentSpec,
    cost: f64,
    p_grid: &[f64],
) -> Result<Option<f64>> {
    check_grid(p_grid)?;
    let quantities = p_grid
        .iter()
        .map(|&p| Ok(misspec_quantity(alpha, m, &CostStructure::new(p, cost)?)?.quantity))
        .collect::<Result<Vec<_>>>()?;
    Ok(turning_index(&quantities).map(|i| p_grid[i]))
}

/// Smallest grid standard deviation after which the optimal order is
/// non-increasing in σ up to the grid end, or `None`. Requires `κ ≥ 1/2`.
/// A single-point grid returns `None`.
pub fn variance_threshold_scan(
    alpha: MisspecIndex,
    cost: &CostStructure,
    mu: f64,
    sigma_grid: &[f64],
) -> Result<Option<f64>> {
    let kappa = cost.margin();
    if kappa < 0.5 {
        return Err(Error::Precondition(format!(
            "variance scan needs kappa >= 1/2, got {kappa}"
        )));
    }
    check_grid(sigma_grid)?;
    let cap = mu * (kappa / (1.0 - kappa)).sqrt();
    if sigma_grid[0] < 0.0 || *sigma_grid.last().unwrap() > cap * (1.0 + 1e-12) {
        return domain(format!("sigma grid must lie in [0, {cap}]"));
    }
    let quantities = sigma_grid
        .iter()
        .map(|&s| Ok(misspec_quantity(alpha, &MomentSpec::new(mu, s)?, cost)?.quantity))
        .collect::<Result<Vec<_>>>()?;
    Ok(turning_index(&quantities).map(|i| sigma_grid[i]))
}
