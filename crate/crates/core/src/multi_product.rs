//! Several products with known means that share one budget `K` on the sum
//! of their demand variances. The budget is priced by a multiplier `λ`; each
//! product then solves a single-product problem with a `λv²` surcharge.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{div_pos, CostStructure, MisspecIndex};
use crate::oracle::{golden_section_max, lipschitz_on_grid, mean_envelope};
use crate::single_product::ell_unchecked;

const BISECTION_TOL: f64 = 1e-10;
const BISECTION_CAP: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "RawProduct")]
pub struct ProductSpec {
    cost: CostStructure,
    mean: f64,
}

#[derive(Deserialize)]
struct RawProduct {
    price: f64,
    cost: f64,
    mean: f64,
}

impl TryFrom<RawProduct> for ProductSpec {
    type Error = Error;
    fn try_from(r: RawProduct) -> Result<Self> {
        ProductSpec::new(r.price, r.cost, r.mean)
    }
}

impl Serialize for ProductSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ProductSpec", 3)?;
        st.serialize_field("price", &self.cost.price())?;
        st.serialize_field("cost", &self.cost.cost())?;
        st.serialize_field("mean", &self.mean)?;
        st.end()
    }
}

impl ProductSpec {
    pub fn new(price: f64, cost: f64, mean: f64) -> Result<Self> {
        let cost = CostStructure::new(price, cost)?;
        if !(mean > 0.0 && mean.is_finite()) {
            return domain(format!("product mean must be positive, got {mean}"));
        }
        Ok(Self { cost, mean })
    }

    pub fn price(&self) -> f64 {
        self.cost.price()
    }

    pub fn cost(&self) -> f64 {
        self.cost.cost()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn cost_structure(&self) -> &CostStructure {
        &self.cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPortfolio")]
pub struct PortfolioSpec {
    products: Vec<ProductSpec>,
    budget: f64,
    alpha: MisspecIndex,
}

#[derive(Deserialize)]
struct RawPortfolio {
    products: Vec<ProductSpec>,
    budget: f64,
    alpha: MisspecIndex,
}

impl TryFrom<RawPortfolio> for PortfolioSpec {
    type Error = Error;
    fn try_from(r: RawPortfolio) -> Result<Self> {
        PortfolioSpec::new(r.products, r.budget, r.alpha)
    }
}

impl PortfolioSpec {
    pub fn new(products: Vec<ProductSpec>, budget: f64, alpha: MisspecIndex) -> Result<Self> {
        if products.is_empty() {
            return domain("a portfolio needs at least one product");
        }
        if !(budget >= 0.0 && budget.is_finite()) {
            return domain(format!(
                "variance budget must be finite and >= 0, got {budget}"
            ));
        }
        Ok(Self {
            products,
            budget,
            alpha,
        })
    }

    pub fn products(&self) -> &[ProductSpec] {
        &self.products
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn alpha(&self) -> MisspecIndex {
        self.alpha
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Self::new(self.products.clone(), budget, self.alpha)
    }
}

/// Which version of the variance curve to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ThetaForm {
    /// High-regime terms `(p − c)c/(4λ²)` without the `μ²` offset.
    Printed,
    /// High-regime terms `μ² + (p − c)c/(4λ²)`, the derivative of the dual.
    #[default]
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DualCase {
    /// `λ*` sits on a breakpoint.
    Kink,
    /// `λ*` is the root of the variance curve inside a segment.
    InteriorRoot,
    /// No finite multiplier balances the budget (e.g. `K = 0`): `λ* = ∞`.
    Degenerate,
}

/// Ascending breakpoints `λ̄₀ = 0 ≤ λ̄₁ ≤ … ≤ λ̄_M ≤ λ̄_{M+1} = ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoints {
    /// `M + 2` values including the two sentinels.
    pub values: Vec<f64>,
    /// Product index at each interior position `1..=M`.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    /// Optimal budget multiplier, `f64::INFINITY` in the degenerate case.
    pub lambda_star: f64,
    /// Segment `i⋆ ∈ [1, M + 1]`.
    pub segment: usize,
    pub case: DualCase,
    pub quantities: Vec<f64>,
    pub breakpoints: Breakpoints,
}

/// `λ̄_i = c_i / (2μ_i − p_i/α)⁺`, stably sorted.
pub fn lambda_breakpoints(products: &[ProductSpec], alpha: MisspecIndex) -> Breakpoints {
    let raw: Vec<f64> = products.iter().map(|p| breakpoint(p, alpha)).collect();
    let mut order: Vec<usize> = (0..products.len()).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
    let mut values = Vec::with_capacity(products.len() + 2);
    values.push(0.0);
    values.extend(order.iter().map(|&i| raw[i]));
    values.push(f64::INFINITY);
    Breakpoints { values, order }
}

fn breakpoint(p: &ProductSpec, alpha: MisspecIndex) -> f64 {
    div_pos(p.cost(), 2.0 * p.mean() - alpha.price_ratio(p.price()))
}

/// Second moment under the worst case when the product is in its low regime.
fn low_term(p: &ProductSpec, lambda: f64, alpha: MisspecIndex) -> f64 {
    let (pr, c, mu) = (p.price(), p.cost(), p.mean());
    if lambda.is_infinite() {
        return mu * mu;
    }
    match alpha {
        MisspecIndex::Infinity => pr * mu * mu / c,
        MisspecIndex::Finite(a) => {
            let den = pr * lambda + a * c;
            pr * mu * mu * (a * a * c + 2.0 * a * c * lambda + pr * lambda * lambda) / (den * den)
        }
    }
}

fn high_term(p: &ProductSpec, lambda: f64, form: ThetaForm) -> f64 {
    let offset = match form {
        ThetaForm::Envelope => p.mean() * p.mean(),
        ThetaForm::Printed => 0.0,
    };
    if lambda == 0.0 {
        return f64::INFINITY;
    }
    offset + (p.price() - p.cost()) * p.cost() / (4.0 * lambda * lambda)
}

/// Variance curve `Θ_j(λ)`: products at sorted positions `< j` use the
/// high-regime term, the rest the low-regime term.
pub fn theta(
    j: usize,
    lambda: f64,
    products: &[ProductSpec],
    alpha: MisspecIndex,
    form: ThetaForm,
) -> Result<f64> {
    let m = products.len();
    if j == 0 || j > m + 1 {
        return domain(format!("segment index {j} outside [1, {}]", m + 1));
    }
    if !(lambda >= 0.0) {
        return domain(format!("lambda must be >= 0, got {lambda}"));
    }
    let bp = lambda_breakpoints(products, alpha);
    Ok(theta_sorted(j, lambda, products, &bp, alpha, form))
}

fn theta_sorted(
    j: usize,
    lambda: f64,
    products: &[ProductSpec],
    bp: &Breakpoints,
    alpha: MisspecIndex,
    form: ThetaForm,
) -> f64 {
    bp.order
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            if pos + 1 < j {
                high_term(&products[i], lambda, form)
            } else {
                low_term(&products[i], lambda, alpha)
            }
        })
        .sum()
}

/// Optimal budget multiplier using the default (envelope) variance curve.
pub fn solve_lambda(portfolio: &PortfolioSpec) -> Result<DualSolution> {
    solve_lambda_with_form(portfolio, ThetaForm::Envelope)
}

/// Optimal budget multiplier: locate the first segment whose curve drops
/// below `K` at its right breakpoint, then either stop at the left
/// breakpoint or bisect inside the segment.
pub fn solve_lambda_with_form(portfolio: &PortfolioSpec, form: ThetaForm) -> Result<DualSolution> {
    let products = portfolio.products();
    let (alpha, budget) = (portfolio.alpha(), portfolio.budget());
    let bp = lambda_breakpoints(products, alpha);
    let m = products.len();
    let curve = |j: usize, l: f64| theta_sorted(j, l, products, &bp, alpha, form);

    let Some(seg) = (1..=m + 1).find(|&j| curve(j, bp.values[j]) < budget) else {
        warn!("variance budget {budget} admits no finite multiplier; reporting lambda = inf");
        return Ok(DualSolution {
            lambda_star: f64::INFINITY,
            segment: m + 1,
            case: DualCase::Degenerate,
            quantities: product_quantities(f64::INFINITY, products, alpha),
            breakpoints: bp,
        });
    };
    let lo = bp.values[seg - 1];
    let (lambda_star, case) = if curve(seg, lo) <= budget {
        (lo, DualCase::Kink)
    } else {
        let mut lo = lo;
        let mut hi = bp.values[seg];
        if hi.is_infinite() {
            hi = (2.0 * lo).max(1.0);
            while curve(seg, hi) >= budget {
                lo = hi;
                hi *= 2.0;
            }
        }
        for _ in 0..BISECTION_CAP {
            if hi - lo <= BISECTION_TOL * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if curve(seg, mid) >= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), DualCase::InteriorRoot)
    };
    Ok(DualSolution {
        lambda_star,
        segment: seg,
        case,
        quantities: product_quantities(lambda_star, products, alpha),
        breakpoints: bp,
    })
}

/// Per-product optimal orders at multiplier `λ`. `λ = ∞` gives the
/// zero-variance limit `(μ_i − p_i/(4α))⁺`.
pub fn product_quantities(lambda: f64, products: &[ProductSpec], alpha: MisspecIndex) -> Vec<f64> {
    products
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let q = product_quantity(lambda, p, alpha);
            if q < 0.0 {
                warn!("product {i}: order {q} clamped to 0");
                0.0
            } else {
                q
            }
        })
        .collect()
}

fn product_quantity(lambda: f64, p: &ProductSpec, alpha: MisspecIndex) -> f64 {
    let (pr, c, mu) = (p.price(), p.cost(), p.mean());
    let shift = 0.25 * alpha.price_ratio(pr);
    if lambda.is_infinite() {
        return mu - shift;
    }
    if lambda * (2.0 * mu - alpha.price_ratio(pr)) >= c {
        mu + (pr - 2.0 * c) / (4.0 * lambda) - shift
    } else {
        match alpha {
            MisspecIndex::Infinity => pr * mu * mu * lambda / (c * c),
            MisspecIndex::Finite(a) => {
                let den = pr * lambda + a * c;
                lambda * (lambda + a) * pr * mu * mu * a / (den * den)
            }
        }
    }
}

/// Dual objective `−λK + Σ_i max_q min_{E_G[v] = μ_i} E_G[ℓ_i(α, q, v) + λv²]`
/// evaluated by brute force on `grid` (shared by all products). Reference
/// check for [`solve_lambda`]. Returns the value and a grid error allowance.
pub fn dual_objective_with_bound(
    lambda: f64,
    portfolio: &PortfolioSpec,
    grid: &[f64],
) -> Result<(f64, f64)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be finite and >= 0, got {lambda}"));
    }
    if grid.len() < 2 {
        return Err(Error::EmptyGrid);
    }
    let alpha = portfolio.alpha();
    let q_max = *grid.last().unwrap();
    let mut total = -lambda * portfolio.budget();
    let mut allowance = 0.0;
    let mut values = vec![0.0; grid.len()];
    for p in portfolio.products() {
        let cost = p.cost_structure();
        let mut inner = |q: f64| -> f64 {
            for (slot, &v) in values.iter_mut().zip(grid) {
                *slot = ell_unchecked(alpha, q, v, cost) + lambda * v * v;
            }
            mean_envelope(grid, &values, p.mean())
                .map(|r| r.0)
                .unwrap_or(f64::NEG_INFINITY)
        };
        let (q_best, best) = golden_section_max(&mut inner, 0.0, q_max, 60);
        if !best.is_finite() {
            return Err(Error::Infeasible(format!(
                "mean {} outside the grid",
                p.mean()
            )));
        }
        total += best;
        for (slot, &v) in values.iter_mut().zip(grid) {
            *slot = ell_unchecked(alpha, q_best, v, cost) + lambda * v * v;
        }
        allowance += lipschitz_on_grid(grid, &values);
    }
    Ok((total, allowance))
}

/// Value part of [`dual_objective_with_bound`].
pub fn dual_objective(lambda: f64, portfolio: &PortfolioSpec, grid: &[f64]) -> Result<f64> {
    dual_objective_with_bound(lambda, portfolio, grid).map(|r| r.0)
}
