//! Out-of-sample evaluation, sensitivity sweeps, the train/test experiment
//! protocol, synthetic demand generators and demand CSV I/O.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, LogNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::distance::{
    tv_misspec_quantity, tv_misspec_value, wasserstein_misspec_solve, RadiusSpec,
    ReferenceDistribution,
};
use crate::error::{domain, Error, Result};
use crate::model::{CostStructure, MisspecIndex, MomentSpec};
use crate::oracle::wasserstein_dual_objective;
use crate::single_product::{misspec_quantity, nominal_quantity, profit_unchecked, scarf_quantity};
use crate::statistics::{
    cv_alpha, formula_calibrate, stress_calibrate, FormulaCalibration, SampleSet, StressCalibration,
};

/// Mean profit of order `q` over the test observations.
pub fn out_of_sample_profit(q: f64, test: &SampleSet, cost: &CostStructure) -> Result<f64> {
    if !(q >= 0.0) {
        return domain(format!("order must be >= 0, got {q}"));
    }
    if test.is_empty() {
        return domain("test set is empty");
    }
    let v = test.values();
    Ok(v.iter().map(|&u| profit_unchecked(q, u, cost)).sum::<f64>() / v.len() as f64)
}

/// Normal law with parent parameters `(mean, std)` truncated to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    mean: f64,
    std: f64,
    parent: Normal,
    /// Parent mass on `[0, ∞)`.
    mass: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && std > 0.0 && std.is_finite()) {
            return domain(format!(
                "truncated normal needs finite mean and std > 0, got ({mean}, {std})"
            ));
        }
        let parent = Normal::new(mean, std).map_err(|e| Error::InputDomain(e.to_string()))?;
        let mass = 1.0 - parent.cdf(0.0);
        if mass <= 0.0 {
            return domain("truncated normal has no mass on [0, inf)");
        }
        Ok(Self {
            mean,
            std,
            parent,
            mass,
        })
    }

    fn hazard(&self) -> f64 {
        let z = -self.mean / self.std;
        Normal::new(0.0, 1.0).unwrap().pdf(z) / self.mass
    }

    pub fn mean(&self) -> f64 {
        self.mean + self.std * self.hazard()
    }

    pub fn variance(&self) -> f64 {
        let z = -self.mean / self.std;
        let h = self.hazard();
        self.std * self.std * (1.0 + z * h - h * h)
    }

    pub fn moments(&self) -> Result<MomentSpec> {
        MomentSpec::new(self.mean(), self.variance().max(0.0).sqrt())
    }

    /// `E[(V − q)⁺]` for `q ≥ 0`.
    pub fn expected_excess(&self, q: f64) -> f64 {
        let z = (q - self.mean) / self.std;
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        (self.std * std_normal.pdf(z) + (self.mean - q) * (1.0 - std_normal.cdf(z))) / self.mass
    }

    /// Exact expected profit of order `q`.
    pub fn expected_profit(&self, q: f64, cost: &CostStructure) -> f64 {
        cost.price() * (self.mean() - self.expected_excess(q)) - cost.cost() * q
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let lo = 1.0 - self.mass;
        self.parent.inverse_cdf(lo + u * self.mass).max(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }
}

/// Synthetic demand generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DemandModel {
    /// Normal with the given parent parameters, truncated to `[0, ∞)`.
    TruncNormal { mean: f64, std: f64 },
    /// Lognormal with the given mean and standard deviation of the demand itself.
    Lognormal { mean: f64, std: f64 },
    /// Two truncated-normal segments; the first `switch_fraction·n` draws use `before`.
    RegimeShift {
        before: [f64; 2],
        after: [f64; 2],
        switch_fraction: f64,
    },
}

fn draw_trunc(mean: f64, std: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if std == 0.0 && mean >= 0.0 {
        return Ok(vec![mean; n]);
    }
    let t = TruncatedNormal::new(mean, std)?;
    Ok((0..n).map(|_| t.sample(rng)).collect())
}

/// Seeded synthetic demand sample of size `n`.
pub fn generate_demand(model: &DemandModel, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return domain("sample size must be >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match *model {
        DemandModel::TruncNormal { mean, std } => draw_trunc(mean, std, n, &mut rng)?,
        DemandModel::Lognormal { mean, std } => {
            if !(mean > 0.0 && std > 0.0) {
                return domain(format!(
                    "lognormal needs mean > 0 and std > 0, got ({mean}, {std})"
                ));
            }
            let s2 = (1.0 + std * std / (mean * mean)).ln();
            let d = LogNormal::new(mean.ln() - 0.5 * s2, s2.sqrt())
                .map_err(|e| Error::InputDomain(e.to_string()))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        DemandModel::RegimeShift {
            before,
            after,
            switch_fraction,
        } => {
            if !(0.0..=1.0).contains(&switch_fraction) {
                return domain(format!(
                    "switch fraction must lie in [0, 1], got {switch_fraction}"
                ));
            }
            let n1 = (n as f64 * switch_fraction).round() as usize;
            let mut v = draw_trunc(before[0], before[1], n1, &mut rng)?;
            v.extend(draw_trunc(after[0], after[1], n - n1, &mut rng)?);
            v
        }
    };
    SampleSet::new(values)
}

/// One row of a demand file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub date: NaiveDate,
    pub demand: f64,
}

/// Parses a `date,demand` CSV with ISO-8601 dates. Errors carry the 1-based
/// line number of the offending row.
pub fn read_demand_csv<R: Read>(reader: R) -> Result<Vec<DemandRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "demand" {
        return Err(Error::Schema {
            line: 1,
            message: format!(
                "expected header `date,demand`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Schema {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let schema = |message: String| Error::Schema { line, message };
        let date = rec
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| schema("missing date".into()))?;
        let date = NaiveDate::parse_from_str(date, "%Y-%m-%d")
            .map_err(|e| schema(format!("bad date `{date}`: {e}")))?;
        let demand = rec
            .get(1)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| schema("missing demand".into()))?;
        let demand: f64 = demand
            .parse()
            .map_err(|_| schema(format!("bad demand `{demand}`")))?;
        if !(demand.is_finite() && demand >= 0.0) {
            return Err(schema(format!(
                "demand must be finite and >= 0, got {demand}"
            )));
        }
        if rec.len() > 2 {
            return Err(schema(format!("expected 2 fields, got {}", rec.len())));
        }
        out.push(DemandRecord { date, demand });
    }
    if out.is_empty() {
        return Err(Error::Schema {
            line: 1,
            message: "no demand rows".into(),
        });
    }
    Ok(out)
}

pub fn read_demand_file(path: &Path) -> Result<SampleSet> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    SampleSet::new(read_demand_csv(f)?.into_iter().map(|r| r.demand).collect())
}

/// Writes samples as consecutive daily rows starting at `start`.
pub fn write_demand_csv<W: Write>(samples: &SampleSet, start: NaiveDate, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["date", "demand"]).map_err(io)?;
    for (i, v) in samples.values().iter().enumerate() {
        let date = start + Duration::days(i as i64);
        w.write_record([date.format("%Y-%m-%d").to_string(), format!("{v:.6}")])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Decision models compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Nominal,
    Ambiguity,
    Misspec,
    Wasserstein,
    Tv,
    /// Reserved tag for externally computed conic benchmark results.
    DelageYe,
}

impl Method {
    /// Whether the method is indexed by α.
    pub fn uses_alpha(self) -> bool {
        matches!(self, Method::Misspec | Method::Wasserstein | Method::Tv)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_uppercase()))
            .map_err(|_| Error::InputDomain(format!("unknown method `{s}`")))
    }
}

/// Order and in-sample value of a method trained on demand data. The
/// in-sample value is the model's own optimal objective.
pub fn method_solution(
    method: Method,
    alpha: MisspecIndex,
    train: &SampleSet,
    cost: &CostStructure,
    wasserstein_radius: f64,
) -> Result<(f64, f64)> {
    match method {
        Method::Nominal => {
            let emp = train.empirical();
            let q = nominal_quantity(&emp, cost);
            Ok((q, emp.expect(|v| profit_unchecked(q, v, cost))))
        }
        Method::Ambiguity => {
            let r = scarf_quantity(&train.moments()?, cost)?;
            Ok((r.quantity, r.value))
        }
        Method::Misspec => {
            let r = misspec_quantity(alpha, &train.moments()?, cost)?;
            Ok((r.quantity, r.value))
        }
        Method::Tv => {
            let m = train.moments()?;
            let q = tv_misspec_quantity(alpha, &m, cost)?;
            Ok((q, tv_misspec_value(alpha, q, &m, cost)?))
        }
        Method::Wasserstein => {
            let h = ReferenceDistribution::new(train.empirical(), cost)?;
            let spec = RadiusSpec::new(wasserstein_radius, alpha)?;
            let sol = wasserstein_misspec_solve(&h, &spec, cost)?;
            let value = match sol.gamma_star {
                MisspecIndex::Infinity => h
                    .distribution()
                    .expect(|v| profit_unchecked(sol.psi_star, v, cost)),
                MisspecIndex::Finite(g) => wasserstein_dual_objective(g, &h, &spec, cost).0,
            };
            Ok((sol.psi_star, value))
        }
        Method::DelageYe => domain("DELAGE_YE results must be supplied externally"),
    }
}

/// Sensitivity axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Alpha,
    Price,
    Sigma,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "price" => Ok(Self::Price),
            "sigma" => Ok(Self::Sigma),
            _ => domain(format!("unknown axis `{s}`")),
        }
    }
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Price => "price",
            Self::Sigma => "sigma",
        }
    }
}

/// Base instance of a sweep; the swept parameter overrides one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub moments: MomentSpec,
    pub cost: CostStructure,
    pub alpha: MisspecIndex,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub test: Option<SampleSet>,
}

/// One method's series along a sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub axis: SweepAxis,
    pub method: Method,
    pub values: Vec<f64>,
    pub quantities: Vec<f64>,
    pub in_sample_values: Vec<f64>,
    pub out_of_sample_values: Option<Vec<f64>>,
}

/// Recomputes the optimal order and value of each method at every axis value.
/// Only moment-based methods can be swept.
pub fn sweep(axis: SweepAxis, values: &[f64], config: &SweepConfig) -> Result<Vec<SweepSeries>> {
    if values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut out = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let mut s = SweepSeries {
            axis,
            method,
            values: values.to_vec(),
            quantities: Vec::with_capacity(values.len()),
            in_sample_values: Vec::with_capacity(values.len()),
            out_of_sample_values: config
                .test
                .as_ref()
                .map(|_| Vec::with_capacity(values.len())),
        };
        for &x in values {
            let (mut m, mut cost, mut alpha) = (config.moments, config.cost, config.alpha);
            match axis {
                SweepAxis::Alpha => {
                    alpha = if x.is_infinite() {
                        MisspecIndex::Infinity
                    } else {
                        MisspecIndex::new(x)?
                    }
                }
                SweepAxis::Price => cost = cost.with_price(x)?,
                SweepAxis::Sigma => m = MomentSpec::new(m.mean(), x)?,
            }
            let (q, v) = match method {
                Method::Ambiguity => {
                    let r = scarf_quantity(&m, &cost)?;
                    (r.quantity, r.value)
                }
                Method::Misspec => {
                    let r = misspec_quantity(alpha, &m, &cost)?;
                    (r.quantity, r.value)
                }
                Method::Tv => {
                    let q = tv_misspec_quantity(alpha, &m, &cost)?;
                    (q, tv_misspec_value(alpha, q, &m, &cost)?)
                }
                other => {
                    return domain(format!("{other:?} cannot be swept over moment parameters"))
                }
            };
            s.quantities.push(q);
            s.in_sample_values.push(v);
            if let (Some(oos), Some(test)) = (s.out_of_sample_values.as_mut(), config.test.as_ref())
            {
                oos.push(out_of_sample_profit(q, test, &cost)?);
            }
        }
        out.push(s);
    }
    Ok(out)
}

const SWEEP_HEADER: [&str; 6] = [
    "axis",
    "method",
    "value",
    "quantity",
    "in_sample_value",
    "out_of_sample_value",
];

fn method_tag(m: Method) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Long-format CSV, one row per (method, axis value). Numbers use the
/// shortest representation that parses back to the same `f64`.
pub fn write_sweep_csv<W: Write>(series: &[SweepSeries], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(io)?;
    for s in series {
        for i in 0..s.values.len() {
            let oos = s
                .out_of_sample_values
                .as_ref()
                .map(|o| o[i].to_string())
                .unwrap_or_default();
            w.write_record([
                s.axis.name().to_string(),
                method_tag(s.method),
                s.values[i].to_string(),
                s.quantities[i].to_string(),
                s.in_sample_values[i].to_string(),
                oos,
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_sweep_csv`].
pub fn read_sweep_csv<R: Read>(reader: R) -> Result<Vec<SweepSeries>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<SweepSeries> = Vec::new();
    let mut has_oos: Vec<bool> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Schema {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let schema = |message: String| Error::Schema { line, message };
        if rec.len() != SWEEP_HEADER.len() {
            return Err(schema(format!("expected {} fields", SWEEP_HEADER.len())));
        }
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| schema(format!("bad number `{}`", &rec[i])))
        };
        let axis: SweepAxis = rec[0].parse().map_err(|e: Error| schema(e.to_string()))?;
        let method: Method = rec[1].parse().map_err(|e: Error| schema(e.to_string()))?;
        let oos = if rec[5].is_empty() {
            None
        } else {
            Some(num(5)?)
        };
        let start_new = out
            .last()
            .map_or(true, |s| s.axis != axis || s.method != method);
        if start_new {
            out.push(SweepSeries {
                axis,
                method,
                values: Vec::new(),
                quantities: Vec::new(),
                in_sample_values: Vec::new(),
                out_of_sample_values: oos.map(|_| Vec::new()),
            });
            has_oos.push(oos.is_some());
        }
        let s = out.last_mut().unwrap();
        if oos.is_some() != *has_oos.last().unwrap() {
            return Err(schema(
                "out-of-sample column must be filled for all rows of a series or none".into(),
            ));
        }
        s.values.push(num(2)?);
        s.quantities.push(num(3)?);
        s.in_sample_values.push(num(4)?);
        if let (Some(o), Some(v)) = (s.out_of_sample_values.as_mut(), oos) {
            o.push(v);
        }
    }
    Ok(out)
}

/// Where a demand sample comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(PathBuf),
    Values(Vec<f64>),
    Generate {
        model: DemandModel,
        n: usize,
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<SampleSet> {
        match self {
            DataSource::Csv(path) => read_demand_file(path),
            DataSource::Values(v) => SampleSet::new(v.clone()),
            DataSource::Generate { model, n, seed } => generate_demand(model, *n, *seed),
        }
    }
}

fn default_folds() -> usize {
    5
}

/// Default radius grid for the formula-based calibration.
pub fn default_eps_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((0..=12).map(|i| 10f64.powf(-3.0 + i as f64 / 4.0)));
    g
}

/// Default α grid: 25 log-spaced points on `[1e−2, 1e2]` scaled by `p/10`.
pub fn default_alpha_grid(price: f64) -> Vec<MisspecIndex> {
    (0..25)
        .map(|i| MisspecIndex::Finite(10f64.powf(-2.0 + i as f64 / 6.0) * price / 10.0))
        .collect()
}

/// Parameters of one train/test comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: DataSource,
    pub test: DataSource,
    pub cost: CostStructure,
    pub alpha_grid: Vec<MisspecIndex>,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Ball radius for the Wasserstein method; 0 gives a pure transport
    /// penalty around the empirical law.
    #[serde(default)]
    pub wasserstein_radius: f64,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() || self.eps_grid.is_empty() || self.methods.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

/// Per-method arrays; α-free methods have a single entry with `alpha = null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResults {
    pub method: Method,
    pub alpha: Vec<Option<MisspecIndex>>,
    pub quantity: Vec<f64>,
    pub in_sample_value: Vec<f64>,
    pub out_of_sample_profit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub cv: MisspecIndex,
    pub formula: FormulaCalibration,
    pub stress: StressCalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub meta: ReportMeta,
    pub train_size: usize,
    pub test_size: usize,
    pub train_moments: MomentSpec,
    pub methods: Vec<MethodResults>,
    pub calibration: CalibrationSummary,
}

/// Rounds to 6 decimals, mapping `-0` to `0`.
pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Loads both samples and runs [`run_experiment_on`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let train = config.train.load()?;
    let test = config.test.load()?;
    run_experiment_on(config, &train, &test)
}

/// Trains every method (over the α grid where applicable) on `train`,
/// scores it on `test`, and runs the three α calibrations.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    train: &SampleSet,
    test: &SampleSet,
) -> Result<ExperimentReport> {
    config.validate()?;
    let cost = &config.cost;
    let mut methods = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let alphas: Vec<Option<MisspecIndex>> = if method.uses_alpha() {
            config.alpha_grid.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut r = MethodResults {
            method,
            alpha: alphas.clone(),
            quantity: Vec::new(),
            in_sample_value: Vec::new(),
            out_of_sample_profit: Vec::new(),
        };
        for a in alphas {
            let (q, v) = method_solution(
                method,
                a.unwrap_or(MisspecIndex::Infinity),
                train,
                cost,
                config.wasserstein_radius,
            )?;
            r.quantity.push(round6(q));
            r.in_sample_value.push(round6(v));
            r.out_of_sample_profit
                .push(round6(out_of_sample_profit(q, test, cost)?));
        }
        methods.push(r);
    }
    let cv = cv_alpha(train, &config.alpha_grid, config.folds, config.seed, cost)?;
    let formula = formula_calibrate(
        train,
        test,
        cost,
        &config.eps_grid,
        config.seed,
        config.folds,
    )?;
    let stress = stress_calibrate(train, test, cost, &config.alpha_grid, config.seed)?;
    Ok(ExperimentReport {
        meta: ReportMeta {
            seed: config.seed,
            config_hash: config.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        train_size: train.len(),
        test_size: test.len(),
        train_moments: train.moments()?,
        methods,
        calibration: CalibrationSummary {
            cv,
            formula,
            stress,
        },
    })
}

/// CSV twin of the per-method arrays.
pub fn write_report_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "method",
        "alpha",
        "quantity",
        "in_sample_value",
        "out_of_sample_profit",
    ])
    .map_err(io)?;
    for m in &report.methods {
        for i in 0..m.quantity.len() {
            w.write_record([
                method_tag(m.method),
                m.alpha[i].map(|a| a.to_string()).unwrap_or_default(),
                format!("{:.6}", m.quantity[i]),
                format!("{:.6}", m.in_sample_value[i]),
                format!("{:.6}", m.out_of_sample_profit[i]),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}
