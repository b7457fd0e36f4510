//! Brute-force reference solvers used to validate every closed form.
//!
//! Worst-case expectations over moment sets are solved on a finite support
//! grid by enumerating candidate supports of size at most `#constraints + 1`
//! (the extreme points of the feasible polytope) and solving the small
//! linear system for their weights. Inner minimizations and outer
//! maximizations are plain grid scans.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distance::{RadiusSpec, ReferenceDistribution};
use crate::distribution::DiscreteDistribution;
use crate::error::{domain, Error, Result};
use crate::model::{CostStructure, MisspecIndex, MomentSpec};
use crate::single_product::{
    ell_unchecked, misspec_quantity, misspec_worst_case, profit_unchecked, scarf_quantity,
};

const PIVOT_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MomentFunction {
    Mean,
    SecondMoment,
}

impl MomentFunction {
    #[inline]
    fn eval(self, v: f64) -> f64 {
        match self {
            Self::Mean => v,
            Self::SecondMoment => v * v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub function: MomentFunction,
    pub relation: Relation,
    pub bound: f64,
}

/// Candidate support grid plus the moment constraints a distribution must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraintSet {
    grid: Vec<f64>,
    constraints: Vec<MomentConstraint>,
}

impl MomentConstraintSet {
    pub fn new(grid: Vec<f64>, constraints: Vec<MomentConstraint>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return domain("grid points must be finite and nonnegative");
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return domain("grid must be strictly increasing");
        }
        if constraints.iter().any(|c| !c.bound.is_finite()) {
            return domain("constraint bounds must be finite");
        }
        Ok(Self { grid, constraints })
    }

    /// `E[v] = μ` and `E[v²] = μ² + σ²`.
    pub fn mean_variance(grid: Vec<f64>, m: &MomentSpec) -> Result<Self> {
        Self::new(
            grid,
            vec![
                MomentConstraint {
                    function: MomentFunction::Mean,
                    relation: Relation::Eq,
                    bound: m.mean(),
                },
                MomentConstraint {
                    function: MomentFunction::SecondMoment,
                    relation: Relation::Eq,
                    bound: m.second_moment(),
                },
            ],
        )
    }

    /// `E[v] = μ` only.
    pub fn mean_only(grid: Vec<f64>, mean: f64) -> Result<Self> {
        Self::new(
            grid,
            vec![MomentConstraint {
                function: MomentFunction::Mean,
                relation: Relation::Eq,
                bound: mean,
            }],
        )
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn constraints(&self) -> &[MomentConstraint] {
        &self.constraints
    }

    fn equality_bound(&self, f: MomentFunction) -> Option<f64> {
        self.constraints
            .iter()
            .find(|c| c.function == f && c.relation == Relation::Eq)
            .map(|c| c.bound)
    }

    fn satisfied_by(&self, atoms: &[(f64, f64)]) -> bool {
        self.constraints.iter().all(|c| {
            let lhs: f64 = atoms.iter().map(|&(v, w)| w * c.function.eval(v)).sum();
            let tol = FEASIBILITY_TOL * c.bound.abs().max(1.0);
            match c.relation {
                Relation::Eq => (lhs - c.bound).abs() <= tol,
                Relation::Le => lhs <= c.bound + tol,
            }
        })
    }
}

/// Outcome of a worst-case expectation solve on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub argmin: DiscreteDistribution,
    /// Lipschitz estimate of the objective on the grid times the largest
    /// grid spacing. A heuristic allowance for restricting support to the grid.
    pub grid_error_bound: f64,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Points `lo, lo + step, …` up to `hi` (inclusive within rounding).
pub fn stepped_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Running best candidate: lowest value, then lexicographically smallest support.
struct Best {
    value: f64,
    atoms: Vec<(f64, f64)>,
}

impl Best {
    fn offer(slot: &mut Option<Best>, value: f64, atoms: &[(f64, f64)]) {
        let positive: Vec<(f64, f64)> = atoms.iter().copied().filter(|&(_, w)| w > 0.0).collect();
        let better = match slot {
            None => true,
            Some(b) if value < b.value => true,
            Some(b) if value == b.value => {
                let lhs = positive.iter().map(|a| a.0);
                let rhs = b.atoms.iter().map(|a| a.0);
                lhs.partial_cmp(rhs) == Some(std::cmp::Ordering::Less)
            }
            _ => false,
        };
        if better {
            *slot = Some(Best {
                value,
                atoms: positive,
            });
        }
    }
}

/// Largest slope between neighbouring grid values times the largest spacing.
pub fn lipschitz_on_grid(grid: &[f64], values: &[f64]) -> f64 {
    let mut slope: f64 = 0.0;
    let mut spacing: f64 = 0.0;
    for i in 1..grid.len() {
        let h = grid[i] - grid[i - 1];
        spacing = spacing.max(h);
        slope = slope.max((values[i] - values[i - 1]).abs() / h);
    }
    slope * spacing
}

/// Minimizes `E_G[objective]` over distributions on the grid that satisfy the
/// constraint set.
pub fn worst_case_expectation_oracle(
    objective: impl Fn(f64) -> f64,
    cs: &MomentConstraintSet,
) -> Result<OracleResult> {
    let grid = cs.grid();
    let values: Vec<f64> = grid.iter().map(|&v| objective(v)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return domain("objective must be finite on the grid");
    }
    let best = if is_mean_variance_pair(cs) {
        enumerate_mean_variance(grid, &values, cs)
    } else {
        enumerate_general(grid, &values, cs)
    };
    let best = best.ok_or_else(|| {
        Error::Infeasible("no distribution on the grid meets the constraints".into())
    })?;
    Ok(OracleResult {
        value: best.value,
        argmin: DiscreteDistribution::from_atoms(best.atoms)?,
        grid_error_bound: lipschitz_on_grid(grid, &values),
    })
}

fn is_mean_variance_pair(cs: &MomentConstraintSet) -> bool {
    cs.constraints.len() == 2
        && cs.equality_bound(MomentFunction::Mean).is_some()
        && cs.equality_bound(MomentFunction::SecondMoment).is_some()
}

/// Exact enumeration for the two-equality case. Triples use the closed-form
/// solution of the 3×3 Vandermonde system and only visit middle atoms whose
/// weights can be nonnegative.
fn enumerate_mean_variance(grid: &[f64], f: &[f64], cs: &MomentConstraintSet) -> Option<Best> {
    let mu = cs.equality_bound(MomentFunction::Mean)?;
    let m2 = cs.equality_bound(MomentFunction::SecondMoment)?;
    let var = m2 - mu * mu;
    let mut best: Option<Best> = None;
    let n = grid.len();

    for i in 0..n {
        let atoms = [(grid[i], 1.0)];
        if cs.satisfied_by(&atoms) {
            Best::offer(&mut best, f[i], &atoms);
        }
    }

    let below = grid.partition_point(|&v| v < mu);
    for ia in 0..below {
        let a = grid[ia];
        for ic in below..n {
            let c = grid[ic];
            if c <= a {
                continue;
            }
            let wa = (c - mu) / (c - a);
            let atoms = [(a, wa), (c, 1.0 - wa)];
            if cs.satisfied_by(&atoms) {
                Best::offer(&mut best, wa * f[ia] + (1.0 - wa) * f[ic], &atoms);
            }
        }
    }

    if var <= 0.0 {
        return best;
    }
    for ia in 0..below {
        let a = grid[ia];
        let left = mu - a;
        if left <= 0.0 {
            continue;
        }
        // The chord condition (μ − a)(c − μ) ≥ σ² bounds c from below.
        let c_min = mu + var / left;
        let ic_start = grid.partition_point(|&v| v < c_min * (1.0 - 1e-12));
        for ic in ic_start.max(below)..n {
            let c = grid[ic];
            let right = c - mu;
            let b_lo = (mu - var / right).max(a);
            let b_hi = (mu + var / left).min(c);
            let slack = 1e-12 * mu.max(1.0);
            let ib_start = grid.partition_point(|&v| v < b_lo - slack).max(ia + 1);
            let ib_end = grid.partition_point(|&v| v <= b_hi + slack).min(ic);
            for ib in ib_start..ib_end {
                let b = grid[ib];
                let da = (a - b) * (a - c);
                let db = (b - a) * (b - c);
                let dc = (c - a) * (c - b);
                if da.abs() < PIVOT_TOL || db.abs() < PIVOT_TOL || dc.abs() < PIVOT_TOL {
                    continue;
                }
                let wa = (m2 - (b + c) * mu + b * c) / da;
                let wb = (m2 - (a + c) * mu + a * c) / db;
                let wc = (m2 - (a + b) * mu + a * b) / dc;
                if wa < -WEIGHT_TOL || wb < -WEIGHT_TOL || wc < -WEIGHT_TOL {
                    continue;
                }
                let (wa, wb, wc) = (wa.max(0.0), wb.max(0.0), wc.max(0.0));
                let value = wa * f[ia] + wb * f[ib] + wc * f[ic];
                match &best {
                    Some(bst) if value > bst.value => {}
                    _ => Best::offer(&mut best, value, &[(a, wa), (b, wb), (c, wc)]),
                }
            }
        }
    }
    best
}

/// Generic enumeration: every support of size `k ≤ #constraints + 1`, every
/// choice of `k − 1` constraints held with equality, weights by Gaussian
/// elimination, then a full feasibility check.
fn enumerate_general(grid: &[f64], f: &[f64], cs: &MomentConstraintSet) -> Option<Best> {
    let rows = cs.constraints();
    let mean_eq = cs.equality_bound(MomentFunction::Mean);
    let mut best: Option<Best> = None;
    let n = grid.len();
    for k in 1..=rows.len() + 1 {
        let active_sets = combinations(rows.len(), k - 1);
        let mut subset: Vec<usize> = (0..k).collect();
        if k > n {
            break;
        }
        loop {
            let lo = grid[subset[0]];
            let hi = grid[subset[k - 1]];
            let brackets = mean_eq.map_or(true, |mu| {
                lo <= mu + FEASIBILITY_TOL && hi >= mu - FEASIBILITY_TOL
            });
            if brackets {
                for active in &active_sets {
                    let mut mat = vec![vec![0.0; k + 1]; k];
                    for j in 0..k {
                        mat[0][j] = 1.0;
                    }
                    mat[0][k] = 1.0;
                    for (r, &ci) in active.iter().enumerate() {
                        for j in 0..k {
                            mat[r + 1][j] = rows[ci].function.eval(grid[subset[j]]);
                        }
                        mat[r + 1][k] = rows[ci].bound;
                    }
                    let Some(w) = solve_linear(mat) else { continue };
                    if w.iter().any(|&x| x < -WEIGHT_TOL) {
                        continue;
                    }
                    let atoms: Vec<(f64, f64)> = subset
                        .iter()
                        .zip(&w)
                        .map(|(&i, &x)| (grid[i], x.max(0.0)))
                        .collect();
                    if !cs.satisfied_by(&atoms) {
                        continue;
                    }
                    let value: f64 = subset
                        .iter()
                        .zip(&w)
                        .map(|(&i, &x)| x.max(0.0) * f[i])
                        .sum();
                    Best::offer(&mut best, value, &atoms);
                }
            }
            if !next_combination(&mut subset, n) {
                break;
            }
        }
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    out
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting on an augmented `k × (k+1)` matrix.
fn solve_linear(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        let scale = a[piv][..k]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1.0);
        if a[piv][col].abs() < PIVOT_TOL * scale {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..k {
            let factor = a[r][col] / a[col][col];
            for j in col..=k {
                a[r][j] -= factor * a[col][j];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|j| a[r][j] * x[j]).sum();
        x[r] = (a[r][k] - s) / a[r][r];
    }
    Some(x)
}

/// Lower convex envelope of `(grid, values)` evaluated at `mean`: the exact
/// minimum of `E[f]` over grid distributions with that mean, computed in
/// linear time. Returns the value and the bracketing atoms with weights.
pub fn mean_envelope(grid: &[f64], values: &[f64], mean: f64) -> Result<(f64, [(f64, f64); 2])> {
    if grid.is_empty() || grid.len() != values.len() {
        return Err(Error::EmptyGrid);
    }
    if mean < grid[0] || mean > *grid.last().unwrap() {
        return Err(Error::Infeasible(format!(
            "mean {mean} lies outside the grid hull"
        )));
    }
    let mut hull: Vec<usize> = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (grid[a] - grid[o]) * (values[i] - values[o])
                - (values[a] - values[o]) * (grid[i] - grid[o]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let pos = hull.partition_point(|&i| grid[i] < mean);
    if pos < hull.len() && grid[hull[pos]] == mean {
        let i = hull[pos];
        return Ok((values[i], [(grid[i], 1.0), (grid[i], 0.0)]));
    }
    let (ia, ic) = (hull[pos - 1], hull[pos]);
    let wa = (grid[ic] - mean) / (grid[ic] - grid[ia]);
    let value = wa * values[ia] + (1.0 - wa) * values[ic];
    Ok((value, [(grid[ia], wa), (grid[ic], 1.0 - wa)]))
}

/// Exhaustive scan; ties go to the smaller grid point.
pub fn grid_argmax(value_fn: impl Fn(f64) -> f64, q_grid: &[f64]) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &q in q_grid {
        let v = value_fn(q);
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((q, v));
        }
    }
    best.ok_or(Error::EmptyGrid)
}

/// Zooming grid search for a concave function on `[lo, hi]`: scan `points`
/// evenly spaced values, shrink to the two cells around the best one, repeat.
/// Returns `(argmax, max, final spacing)`.
pub fn refine_argmax(
    value_fn: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    rounds: usize,
) -> Result<(f64, f64, f64)> {
    if points < 3 {
        return domain("refine_argmax needs at least 3 points per round");
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut best = (lo, value_fn(lo));
    let mut step = hi - lo;
    for _ in 0..rounds.max(1) {
        let grid = uniform_grid(lo, hi, points);
        step = (hi - lo) / (points - 1) as f64;
        best = grid_argmax(&value_fn, &grid)?;
        lo = (best.0 - step).max(lo);
        hi = (best.0 + step).min(hi);
    }
    Ok((best.0, best.1, step))
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_section_max(
    mut value_fn: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    iterations: usize,
) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = value_fn(x1);
    let mut f2 = value_fn(x2);
    for _ in 0..iterations {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = value_fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = value_fn(x2);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = value_fn(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// `min_u {π(q, u) + α(u − v)²}` by scanning `u_grid`.
pub fn inner_min_oracle(
    alpha: MisspecIndex,
    q: f64,
    v: f64,
    cost: &CostStructure,
    u_grid: &[f64],
) -> Result<f64> {
    if u_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let a = alpha.as_f64();
    let reach = v + 0.5 * alpha.price_ratio(cost.price()) + 1.0;
    if u_grid[0] > 0.0 || *u_grid.last().unwrap() < reach {
        return Err(Error::Precondition(format!(
            "u grid must cover [0, {reach}]"
        )));
    }
    let penalty = |u: f64| {
        if a.is_infinite() {
            if u == v {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            a * (u - v) * (u - v)
        }
    };
    Ok(u_grid
        .iter()
        .map(|&u| profit_unchecked(q, u, cost) + penalty(u))
        .fold(f64::INFINITY, f64::min))
}

/// Dual objective of the Wasserstein model at multiplier `γ`:
/// `−αγθ/(α − γ) + max_ψ E_H[ℓ(γ, ψ, w)]`, with penalty `−γθ` when `α = ∞`.
/// The inner maximum over the order `ψ` is a golden-section search on the
/// concave map `ψ ↦ E_H[ℓ]`, evaluated directly on the atoms of `H`.
/// Returns `(value, maximizing ψ)`.
pub fn wasserstein_dual_objective(
    gamma: f64,
    h: &ReferenceDistribution,
    spec: &RadiusSpec,
    cost: &CostStructure,
) -> (f64, f64) {
    let theta = spec.theta;
    let penalty = match spec.alpha {
        // Zero radius: the penalty term vanishes for every γ ≤ α.
        MisspecIndex::Finite(a) if theta == 0.0 && gamma <= a => 0.0,
        MisspecIndex::Finite(a) if gamma >= a => return (f64::NEG_INFINITY, 0.0),
        MisspecIndex::Finite(a) => -a * gamma * theta / (a - gamma),
        MisspecIndex::Infinity => -gamma * theta,
    };
    if gamma == 0.0 {
        return (penalty, 0.0);
    }
    let hd = h.distribution();
    let index = MisspecIndex::Finite(gamma);
    let (psi, v) = golden_section_max(
        |psi| hd.expect(|w| ell_unchecked(index, psi, w, cost)),
        0.0,
        hd.max(),
        120,
    );
    (penalty + v, psi)
}

/// Maximizes [`wasserstein_dual_objective`] over `γ ∈ [0, gamma_hi]` by a
/// zooming grid. Returns `(γ, ψ, value, final grid spacing)`.
pub fn wasserstein_dual_oracle(
    h: &ReferenceDistribution,
    spec: &RadiusSpec,
    cost: &CostStructure,
    gamma_hi: f64,
    points: usize,
    rounds: usize,
) -> Result<(f64, f64, f64, f64)> {
    let (gamma, value, step) = refine_argmax(
        |g| wasserstein_dual_objective(g, h, spec, cost).0,
        0.0,
        gamma_hi,
        points,
        rounds,
    )?;
    let psi = wasserstein_dual_objective(gamma, h, spec, cost).1;
    Ok((gamma, psi, value, step))
}

/// Random non-degenerate instance: `μ ∈ [1, 10]`, `σ/μ ∈ [0.05, 1]`,
/// `p ∈ [5, 20]`, `c/p ∈ [0.05, 0.9]`, and α log-uniform on `[0.1, 100]`
/// (infinite one time in ten). Degenerate draws are rejected.
pub fn random_misspec_instance<R: Rng + ?Sized>(
    rng: &mut R,
) -> (MisspecIndex, MomentSpec, CostStructure) {
    loop {
        let mu = rng.gen_range(1.0..10.0);
        let m = MomentSpec::new(mu, mu * rng.gen_range(0.05..1.0)).expect("valid moments");
        let p = rng.gen_range(5.0..20.0);
        let cost = CostStructure::new(p, p * rng.gen_range(0.05..0.9)).expect("valid cost");
        let alpha = if rng.gen_bool(0.1) {
            MisspecIndex::Infinity
        } else {
            MisspecIndex::Finite(10f64.powf(rng.gen_range(-1.0..2.0)))
        };
        if !m.is_degenerate_for(&cost) {
            return (alpha, m, cost);
        }
    }
}

/// Closed-form misspecification order and value compared with the grid
/// oracle that maximizes the brute-force worst case over an order grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecCheck {
    pub alpha: MisspecIndex,
    pub moments: MomentSpec,
    pub cost: CostStructure,
    pub closed_quantity: f64,
    pub oracle_quantity: f64,
    pub q_step: f64,
    pub closed_value: f64,
    pub oracle_value: f64,
    pub grid_error_bound: f64,
    pub passed: bool,
}

/// Runs the oracle on `support_points` demand values and `q_points` orders.
/// The demand grid reaches past every worst-case atom on the order grid.
pub fn check_misspec_against_oracle(
    alpha: MisspecIndex,
    m: &MomentSpec,
    cost: &CostStructure,
    support_points: usize,
    q_points: usize,
) -> Result<MisspecCheck> {
    if support_points < 3 || q_points < 2 {
        return domain("oracle check needs at least 3 support points and 2 orders");
    }
    let closed = misspec_quantity(alpha, m, cost)?;
    let q_hi = 1.25 * scarf_quantity(m, cost)?.quantity.max(m.mean());
    let reach = misspec_worst_case(alpha, q_hi, m, cost)?.g_star.max();
    let hi = 1.05 * reach.max(m.second_moment() / m.mean());
    let cs = MomentConstraintSet::mean_variance(uniform_grid(0.0, hi, support_points), m)?;
    let q_grid = uniform_grid(0.0, q_hi, q_points);
    let mut best: Option<(f64, OracleResult)> = None;
    let mut values = Vec::with_capacity(q_grid.len());
    for &q in &q_grid {
        let r = worst_case_expectation_oracle(|v| ell_unchecked(alpha, q, v, cost), &cs)?;
        values.push(r.value);
        if best.as_ref().map_or(true, |(_, b)| r.value > b.value) {
            best = Some((q, r));
        }
    }
    let (oracle_quantity, r) = best.ok_or(Error::EmptyGrid)?;
    let q_step = q_grid[1] - q_grid[0];
    // Support-grid allowance at the best order plus the order-grid allowance.
    let grid_error_bound = r.grid_error_bound + lipschitz_on_grid(&q_grid, &values);
    let passed = (closed.quantity - oracle_quantity).abs() <= q_step + 1e-12
        && (closed.value - r.value).abs() <= grid_error_bound;
    Ok(MisspecCheck {
        alpha,
        moments: *m,
        cost: *cost,
        closed_quantity: closed.quantity,
        oracle_quantity,
        q_step,
        closed_value: closed.value,
        oracle_value: r.value,
        grid_error_bound,
        passed,
    })
}
