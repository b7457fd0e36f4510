//! Finitely supported demand distributions.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::MomentSpec;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const QUANTILE_TOL: f64 = 1e-12;

/// Atoms on `[0, ∞)` with strictly increasing support and weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        DiscreteDistribution::new(raw.support, raw.weights)
    }
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return domain("support and weights must be nonempty and of equal length");
        }
        if support.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return domain("support points must be finite and nonnegative");
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return domain("support must be strictly increasing");
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return domain("weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(Self { support, weights })
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        Self::new(vec![at], vec![1.0])
    }

    /// Builds a distribution from unsorted atoms, merging coincident points
    /// and dropping zero weights.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.iter().any(|(v, w)| v.is_nan() || w.is_nan()) {
            return domain("atoms must not be NaN");
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (v, w) in atoms {
            if w == 0.0 {
                continue;
            }
            match support.last() {
                Some(&last) if v - last <= 1e-12 * last.abs().max(1.0) => {
                    *weights.last_mut().unwrap() += w;
                }
                _ => {
                    support.push(v);
                    weights.push(w);
                }
            }
        }
        Self::new(support, weights)
    }

    /// Empirical distribution of a sample: each observation carries weight `1/N`.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return domain("empty sample");
        }
        let mut sorted = values.to_vec();
        if sorted.iter().any(|v| v.is_nan()) {
            return domain("sample contains NaN");
        }
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut support = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in sorted {
            if support.last() == Some(&v) {
                *counts.last_mut().unwrap() += 1;
            } else {
                support.push(v);
                counts.push(1);
            }
        }
        let weights = counts.iter().map(|&k| k as f64 / n).collect();
        Self::new(support, weights)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(v, w)| w * f(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn second_moment(&self) -> f64 {
        self.expect(|v| v * v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|v| (v - m) * (v - m))
    }

    /// Mean and (population) standard deviation; fails if the mean is zero.
    pub fn moments(&self) -> Result<MomentSpec> {
        MomentSpec::new(self.mean(), self.variance().max(0.0).sqrt())
    }

    /// Right-continuous CDF `P(V ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.iter()
            .take_while(|(v, _)| *v <= x)
            .map(|(_, w)| w)
            .sum()
    }

    /// Left-continuous generalized inverse `inf{x : CDF(x) ≥ level}`.
    pub fn quantile(&self, level: f64) -> f64 {
        let mut acc = 0.0;
        for (v, w) in self.iter() {
            acc += w;
            if acc >= level - QUANTILE_TOL {
                return v;
            }
        }
        *self.support.last().unwrap()
    }

    /// Image of the distribution under `f`, merging coincident images.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_atoms(self.iter().map(|(v, w)| (f(v), w)))
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        *self.support.last().unwrap()
    }
}
