//! Sample statistics, transport distances, finite-sample guarantees and the
//! three procedures for choosing the misspecification index from data.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::alpha_for_radius;
use crate::distribution::DiscreteDistribution;
use crate::error::{domain, Error, Result};
use crate::evaluation::out_of_sample_profit;
use crate::model::{CostStructure, MisspecIndex, MomentSpec};
use crate::single_product::{misspec_quantity, profit_unchecked};

/// Observed nonnegative demands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleSet {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for SampleSet {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        SampleSet::new(values)
    }
}

impl From<SampleSet> for Vec<f64> {
    fn from(s: SampleSet) -> Self {
        s.values
    }
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return domain("sample set is empty");
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return domain(format!(
                "demand observations must be finite and >= 0, got {v}"
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn empirical(&self) -> DiscreteDistribution {
        DiscreteDistribution::from_samples(&self.values).expect("validated samples")
    }

    pub fn moments(&self) -> Result<MomentSpec> {
        empirical_moments(self)
    }

    fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(idx.iter().map(|&i| self.values[i]).collect())
    }
}

/// Sample mean and population (divide-by-N) standard deviation.
pub fn empirical_moments(s: &SampleSet) -> Result<MomentSpec> {
    let n = s.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    let mean = s.values.iter().sum::<f64>() / n as f64;
    let var = s
        .values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n as f64;
    if var <= 0.0 || mean <= 0.0 {
        return Err(Error::DegenerateSample(format!(
            "moment estimates need positive mean and spread, got mean {mean}, variance {var}"
        )));
    }
    MomentSpec::new(mean, var.sqrt())
}

/// Squared Gelbrich distance `(μ₁ − μ₂)² + (σ₁ − σ₂)²`.
pub fn gelbrich_sq(m1: &MomentSpec, m2: &MomentSpec) -> f64 {
    let dm = m1.mean() - m2.mean();
    let ds = m1.std() - m2.std();
    dm * dm + ds * ds
}

/// Bracket on the transport cost from a law with moments `d` to the set of
/// laws with moments `hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSetDistance {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

/// Transport cost to the moment set: exact when `μ̂/σ̂ ≥ μ/σ` (an affine map
/// stays inside the nonnegative orthant), otherwise a Gelbrich lower bound
/// and a large-sample upper bound that is never allowed below it.
pub fn moment_set_distance(d: &MomentSpec, hat: &MomentSpec) -> Result<MomentSetDistance> {
    let g = gelbrich_sq(d, hat);
    let (mu, s, mh, sh) = (d.mean(), d.std(), hat.mean(), hat.std());
    if s == 0.0 || sh == 0.0 {
        return domain("moment set distance needs positive standard deviations");
    }
    if mh * s >= mu * sh {
        return Ok(MomentSetDistance {
            lower: g,
            upper: g,
            exact: true,
        });
    }
    let correction = (mu * mu * sh * sh - mh * mh * s * s) / (s * sh);
    Ok(MomentSetDistance {
        lower: g,
        upper: (g + correction).max(g),
        exact: false,
    })
}

/// Exact quadratic optimal-transport cost between two discrete laws on the
/// line, via the comonotone coupling on the common refinement of their CDFs.
pub fn ot_quadratic_empirical(f: &DiscreteDistribution, d: &DiscreteDistribution) -> f64 {
    let (xs, ws) = (f.support(), f.weights());
    let (ys, vs) = (d.support(), d.weights());
    let (mut i, mut j) = (0, 0);
    let (mut wi, mut wj) = (ws[0], vs[0]);
    let mut total = 0.0;
    while i < xs.len() && j < ys.len() {
        let m = wi.min(wj);
        total += m * (xs[i] - ys[j]) * (xs[i] - ys[j]);
        wi -= m;
        wj -= m;
        if wi <= wj {
            i += 1;
            wi = ws.get(i).copied().unwrap_or(0.0);
        } else {
            j += 1;
            wj = vs.get(j).copied().unwrap_or(0.0);
        }
    }
    total
}

/// Concentration radius `(c₁ + c₂ log(1/η))² / √N`.
pub fn epsilon_n(n: usize, eta: f64, c1: f64, c2: f64) -> Result<f64> {
    if n == 0 {
        return domain("sample size must be >= 1");
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return domain(format!("confidence level must lie in (0, 1], got {eta}"));
    }
    if !(c1 > 0.0 && c2 > 0.0) {
        return domain("concentration constants must be positive");
    }
    let r = c1 + c2 * (1.0 / eta).ln();
    Ok(r * r / (n as f64).sqrt())
}

/// Out-of-sample profit guarantee for the calibrated misspecification model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub epsilon_n: f64,
    pub shift_estimate: f64,
    pub alpha_n: MisspecIndex,
    pub quantity: f64,
    pub in_sample_value: f64,
    pub lower_bound: f64,
}

/// Calibrates `α_N` from the transport budget `ε + shift` and reports the
/// guaranteed out-of-sample profit `(Π⋆ − ½√(p(p − c)(ε + shift)))⁺`.
pub fn guarantee(
    samples: &SampleSet,
    shift: f64,
    cost: &CostStructure,
    eps: f64,
) -> Result<GuaranteeReport> {
    if !(shift >= 0.0 && eps >= 0.0) {
        return domain("shift and radius must be >= 0");
    }
    let m = empirical_moments(samples)?;
    let budget = eps + shift;
    let alpha_n = alpha_for_radius(budget, &m, cost)?;
    let sol = misspec_quantity(alpha_n, &m, cost)?;
    let (p, c) = (cost.price(), cost.cost());
    let lower_bound = (sol.value - 0.5 * (p * (p - c) * budget).sqrt()).max(0.0);
    Ok(GuaranteeReport {
        epsilon_n: eps,
        shift_estimate: shift,
        alpha_n,
        quantity: sol.quantity,
        in_sample_value: sol.value,
        lower_bound,
    })
}

fn fold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (k, i) in idx.into_iter().enumerate() {
        out[k % folds].push(i);
    }
    out
}

/// Mean held-out profit of each α over a seeded k-fold split.
pub fn cv_profile(
    samples: &SampleSet,
    alpha_grid: &[MisspecIndex],
    folds: usize,
    seed: u64,
    cost: &CostStructure,
) -> Result<Vec<f64>> {
    if folds < 2 {
        return domain("cross-validation needs at least 2 folds");
    }
    if alpha_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if samples.len() < folds {
        return domain(format!(
            "{} samples cannot fill {folds} folds",
            samples.len()
        ));
    }
    let parts = fold_indices(samples.len(), folds, seed);
    let mut splits = Vec::with_capacity(folds);
    for k in 0..folds {
        let rest: Vec<usize> = (0..folds)
            .filter(|&j| j != k)
            .flat_map(|j| parts[j].iter().copied())
            .collect();
        splits.push((
            samples.subset(&rest)?.moments()?,
            samples.subset(&parts[k])?,
        ));
    }
    alpha_grid
        .iter()
        .map(|&a| {
            let mut total = 0.0;
            for (m, held) in &splits {
                let q = misspec_quantity(a, m, cost)?.quantity;
                total += out_of_sample_profit(q, held, cost)?;
            }
            Ok(total / folds as f64)
        })
        .collect()
}

/// Index of the best score; ties (within 1e−12 relative) go to the larger α.
fn select_alpha(alphas: &[MisspecIndex], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..alphas.len() {
        let tol = 1e-12 * scores[best].abs().max(1.0);
        if scores[i] > scores[best] + tol
            || ((scores[i] - scores[best]).abs() <= tol && alphas[i] > alphas[best])
        {
            best = i;
        }
    }
    best
}

/// k-fold cross-validated choice of α.
pub fn cv_alpha(
    samples: &SampleSet,
    alpha_grid: &[MisspecIndex],
    folds: usize,
    seed: u64,
    cost: &CostStructure,
) -> Result<MisspecIndex> {
    let scores = cv_profile(samples, alpha_grid, folds, seed, cost)?;
    Ok(alpha_grid[select_alpha(alpha_grid, &scores)])
}

/// Discount `β ~ U[0.5, 1]` applied to an empirical shift estimate.
pub fn draw_discount(seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).gen_range(0.5..=1.0)
}

/// Parameters of a downward stress test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressSpec {
    pub beta_discount: f64,
    pub rho: f64,
    pub target_distance: f64,
    /// Smallest training observation, the point every sample is pulled toward.
    pub anchor: f64,
}

/// Largest transport cost the shrink-toward-minimum construction can reach.
pub fn max_stress_target(train: &SampleSet) -> f64 {
    let v = train.values();
    let anchor = v.iter().copied().fold(f64::INFINITY, f64::min);
    v.iter().map(|x| (x - anchor) * (x - anchor)).sum::<f64>() / v.len() as f64
}

/// Paired stressed samples `(1 − ρ)v̂_n + ρ·min v̂` whose paired transport
/// cost to the training sample equals `target`. Returns the samples and `ρ`.
pub fn stress_samples(train: &SampleSet, target: f64) -> Result<(Vec<f64>, f64)> {
    if !(target >= 0.0) {
        return domain(format!("stress target must be >= 0, got {target}"));
    }
    let v = train.values();
    let anchor = v.iter().copied().fold(f64::INFINITY, f64::min);
    if target == 0.0 {
        return Ok((v.to_vec(), 0.0));
    }
    let spread: f64 = v.iter().map(|x| (x - anchor) * (x - anchor)).sum();
    let rho = (v.len() as f64 * target / spread).sqrt();
    if !(rho <= 1.0) {
        return Err(Error::UnreachableTarget {
            target,
            max_reachable: spread / v.len() as f64,
        });
    }
    Ok((
        v.iter().map(|x| (1.0 - rho) * x + rho * anchor).collect(),
        rho,
    ))
}

/// Stressed empirical law at transport cost `target` from the training sample.
pub fn stress_distribution(train: &SampleSet, target: f64) -> Result<DiscreteDistribution> {
    let (w, _) = stress_samples(train, target)?;
    DiscreteDistribution::from_samples(&w)
}

/// Result of the radius-formula calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulaCalibration {
    pub alpha: MisspecIndex,
    pub beta_discount: f64,
    pub shift_estimate: f64,
    pub epsilon: f64,
}

/// Picks the estimation radius by cross-validation on the training sample,
/// adds a discounted empirical shift between test and train, and converts
/// the total budget into α.
pub fn formula_calibrate(
    train: &SampleSet,
    test: &SampleSet,
    cost: &CostStructure,
    eps_grid: &[f64],
    seed: u64,
    folds: usize,
) -> Result<FormulaCalibration> {
    if eps_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let m = train.moments()?;
    let beta = draw_discount(seed);
    let shift = beta * ot_quadratic_empirical(&test.empirical(), &train.empirical());
    let alphas = eps_grid
        .iter()
        .map(|&e| alpha_for_radius(e, &m, cost))
        .collect::<Result<Vec<_>>>()?;
    let scores = cv_profile(train, &alphas, folds, seed.wrapping_add(1), cost)?;
    let epsilon = eps_grid[select_alpha(&alphas, &scores)];
    Ok(FormulaCalibration {
        alpha: alpha_for_radius(epsilon + shift, &m, cost)?,
        beta_discount: beta,
        shift_estimate: shift,
        epsilon,
    })
}

/// Result of the stress-test calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressCalibration {
    pub alpha: MisspecIndex,
    pub stress: StressSpec,
}

/// Chooses α by the profit of the train-moment order on a stressed copy of
/// the training sample, shifted down by the discounted test/train distance.
pub fn stress_calibrate(
    train: &SampleSet,
    test: &SampleSet,
    cost: &CostStructure,
    alpha_grid: &[MisspecIndex],
    seed: u64,
) -> Result<StressCalibration> {
    if alpha_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let m = train.moments()?;
    let beta = draw_discount(seed);
    let mut target = beta * ot_quadratic_empirical(&test.empirical(), &train.empirical());
    let (stressed, rho) = match stress_samples(train, target) {
        Ok(r) => r,
        Err(Error::UnreachableTarget { max_reachable, .. }) => {
            warn!("stress target {target} unreachable; using the maximum {max_reachable}");
            target = max_reachable;
            stress_samples(train, (max_reachable * (1.0 - 1e-12)).max(0.0))?
        }
        Err(e) => return Err(e),
    };
    let scores = alpha_grid
        .iter()
        .map(|&a| {
            let q = misspec_quantity(a, &m, cost)?.quantity;
            Ok(stressed
                .iter()
                .map(|&w| profit_unchecked(q, w, cost))
                .sum::<f64>()
                / stressed.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let anchor = train.values().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(StressCalibration {
        alpha: alpha_grid[select_alpha(alpha_grid, &scores)],
        stress: StressSpec {
            beta_discount: beta,
            rho,
            target_distance: target,
            anchor,
        },
    })
}
