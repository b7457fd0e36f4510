//! `newsvendor` command-line front end.
//!
//! Exit codes: 0 success, 2 input or schema error, 3 infeasible or
//! degenerate model, 4 internal validation failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use newsvendor::distance::{
    tv_misspec_quantity, tv_misspec_value, wasserstein_misspec_solve, RadiusSpec,
    ReferenceDistribution,
};
use newsvendor::evaluation::{
    default_alpha_grid, default_eps_grid, generate_demand, method_solution, out_of_sample_profit,
    read_demand_file, round6, run_experiment, sweep, write_demand_csv, write_report_csv,
    write_sweep_csv, DemandModel, ExperimentConfig, Method, SweepAxis, SweepConfig,
};
use newsvendor::multi_product::{solve_lambda, PortfolioSpec};
use newsvendor::oracle::{check_misspec_against_oracle, random_misspec_instance};
use newsvendor::single_product::{misspec_quantity, nominal_quantity, scarf_quantity};
use newsvendor::statistics::{cv_alpha, formula_calibrate, stress_calibrate};
use newsvendor::{CostStructure, Error, MisspecIndex, MomentSpec};

#[derive(Parser)]
#[command(
    name = "newsvendor",
    version,
    about = "Newsvendor models under ambiguity and misspecification"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model instance.
    Solve(SolveArgs),
    /// Recompute optimal orders along a parameter axis.
    Sweep(SweepArgs),
    /// Choose the misspecification index from data.
    Calibrate(CalibrateArgs),
    /// Train a method and score it out of sample.
    Evaluate(EvaluateArgs),
    /// Run a full train/test experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Compare closed forms with the brute-force oracle on random instances.
    OracleCheck(OracleArgs),
    /// Write a synthetic demand CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct CostArgs {
    #[arg(long)]
    price: f64,
    #[arg(long)]
    cost: f64,
}

impl CostArgs {
    fn build(&self) -> Result<CostStructure, Error> {
        CostStructure::new(self.price, self.cost)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Nominal,
    Scarf,
    Misspec,
    Tv,
    Wasserstein,
    Multi,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value_t = Model::Misspec)]
    model: Model,
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long)]
    std: Option<f64>,
    #[arg(long)]
    price: Option<f64>,
    #[arg(long)]
    cost: Option<f64>,
    /// Misspecification index, a number or `inf`.
    #[arg(long, default_value = "inf")]
    alpha: MisspecIndex,
    /// Demand CSV for the nominal and Wasserstein models.
    #[arg(long)]
    demand: Option<PathBuf>,
    /// Wasserstein ball radius.
    #[arg(long, default_value_t = 0.0)]
    radius: f64,
    /// Portfolio JSON for the multi-product model.
    #[arg(long)]
    portfolio: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long)]
    mean: f64,
    #[arg(long)]
    std: f64,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, default_value = "inf")]
    alpha: MisspecIndex,
    #[arg(long, value_delimiter = ',', default_value = "MISSPEC")]
    methods: Vec<Method>,
    /// Optional demand CSV for out-of-sample profits.
    #[arg(long)]
    test: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationMethod {
    Cv,
    Formula,
    Stress,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    method: CalibrationMethod,
    #[arg(long)]
    train: PathBuf,
    /// Test CSV, required by the formula and stress methods.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    cost: CostArgs,
    /// α grid; defaults to 25 log-spaced points scaled by p/10.
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<MisspecIndex>,
    /// Radius grid for the formula method.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    cost: CostArgs,
    /// Score this order directly instead of training a method.
    #[arg(long, conflicts_with_all = ["train", "method"])]
    quantity: Option<f64>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, default_value = "inf")]
    alpha: MisspecIndex,
    #[arg(long, default_value_t = 0.0)]
    radius: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 200)]
    support_points: usize,
    #[arg(long, default_value_t = 48)]
    orders: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    TruncNormal,
    Lognormal,
    RegimeShift,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    mean: f64,
    #[arg(long)]
    std: f64,
    /// Second-segment mean for the regime shift.
    #[arg(long)]
    after_mean: Option<f64>,
    /// Second-segment std for the regime shift.
    #[arg(long)]
    after_std: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    switch_fraction: f64,
    #[arg(long)]
    n: usize,
    /// Date of the first row (YYYY-MM-DD).
    #[arg(long, default_value = "2024-01-01")]
    start: String,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_)
            | Error::DegenerateIndex
            | Error::ZeroReferenceFractile
            | Error::DegenerateSample(_)
            | Error::UnreachableTarget { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| input_error(format!("--{flag} is required here")))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    let res = match out {
        Some(p) => fs::write(p, bytes),
        None => std::io::stdout().write_all(bytes),
    };
    res.map_err(|e| input_error(format!("cannot write output: {e}")))
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| Failure {
        code: 4,
        message: e.to_string(),
    })?;
    s.push(b'\n');
    Ok(s)
}

fn csv_only_json(format: Format) -> Result<(), Failure> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(input_error("this command only emits JSON")),
    }
}

#[derive(Serialize)]
struct OrderReport {
    model: &'static str,
    quantity: f64,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_star: Option<MisspecIndex>,
}

fn solve(args: &SolveArgs, format: Format) -> Result<Vec<u8>, Failure> {
    csv_only_json(format)?;
    let moments = || -> Result<MomentSpec, Failure> {
        Ok(MomentSpec::new(
            require(args.mean, "mean")?,
            require(args.std, "std")?,
        )?)
    };
    let cost = || -> Result<CostStructure, Failure> {
        Ok(CostStructure::new(
            require(args.price, "price")?,
            require(args.cost, "cost")?,
        )?)
    };
    match args.model {
        Model::Scarf => json(&scarf_quantity(&moments()?, &cost()?)?),
        Model::Misspec => json(&misspec_quantity(args.alpha, &moments()?, &cost()?)?),
        Model::Tv => {
            let (m, c) = (moments()?, cost()?);
            let q = tv_misspec_quantity(args.alpha, &m, &c)?;
            json(&OrderReport {
                model: "TV",
                quantity: q,
                value: tv_misspec_value(args.alpha, q, &m, &c)?,
                gamma_star: None,
            })
        }
        Model::Nominal => {
            let c = cost()?;
            let d = read_demand_file(&require(args.demand.clone(), "demand")?)?.empirical();
            let q = nominal_quantity(&d, &c);
            json(&OrderReport {
                model: "NOMINAL",
                quantity: q,
                value: d.expect(|v| c.price() * q.min(v) - c.cost() * q),
                gamma_star: None,
            })
        }
        Model::Wasserstein => {
            let c = cost()?;
            let train = read_demand_file(&require(args.demand.clone(), "demand")?)?;
            let (q, value) =
                method_solution(Method::Wasserstein, args.alpha, &train, &c, args.radius)?;
            let h = ReferenceDistribution::new(train.empirical(), &c)?;
            let sol =
                wasserstein_misspec_solve(&h, &RadiusSpec::new(args.radius, args.alpha)?, &c)?;
            json(&OrderReport {
                model: "WASSERSTEIN",
                quantity: q,
                value,
                gamma_star: Some(sol.gamma_star),
            })
        }
        Model::Multi => {
            let path = require(args.portfolio.clone(), "portfolio")?;
            let text = fs::read_to_string(&path)
                .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            let portfolio: PortfolioSpec = serde_json::from_str(&text)
                .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            json(&solve_lambda(&portfolio)?)
        }
    }
}

fn run_sweep(args: &SweepArgs, format: Format) -> Result<Vec<u8>, Failure> {
    let config = SweepConfig {
        moments: MomentSpec::new(args.mean, args.std)?,
        cost: args.cost.build()?,
        alpha: args.alpha,
        methods: args.methods.clone(),
        test: args.test.as_deref().map(read_demand_file).transpose()?,
    };
    let series = sweep(args.axis, &args.values, &config)?;
    match format {
        Format::Json => json(&series),
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&series, &mut buf)?;
            Ok(buf)
        }
    }
}

#[derive(Serialize)]
struct CalibrationReport<T: Serialize> {
    method: &'static str,
    seed: u64,
    alpha: MisspecIndex,
    details: Option<T>,
}

fn calibrate(args: &CalibrateArgs, seed: u64, format: Format) -> Result<Vec<u8>, Failure> {
    csv_only_json(format)?;
    let cost = args.cost.build()?;
    let train = read_demand_file(&args.train)?;
    let alphas = if args.alphas.is_empty() {
        default_alpha_grid(cost.price())
    } else {
        args.alphas.clone()
    };
    let test =
        || -> Result<_, Failure> { Ok(read_demand_file(&require(args.test.clone(), "test")?)?) };
    match args.method {
        CalibrationMethod::Cv => {
            let alpha = cv_alpha(&train, &alphas, args.folds, seed, &cost)?;
            json(&CalibrationReport::<()> {
                method: "CV",
                seed,
                alpha,
                details: None,
            })
        }
        CalibrationMethod::Formula => {
            let eps = if args.eps.is_empty() {
                default_eps_grid()
            } else {
                args.eps.clone()
            };
            let r = formula_calibrate(&train, &test()?, &cost, &eps, seed, args.folds)?;
            json(&CalibrationReport {
                method: "FORMULA",
                seed,
                alpha: r.alpha,
                details: Some(r),
            })
        }
        CalibrationMethod::Stress => {
            let r = stress_calibrate(&train, &test()?, &cost, &alphas, seed)?;
            json(&CalibrationReport {
                method: "STRESS",
                seed,
                alpha: r.alpha,
                details: Some(r),
            })
        }
    }
}

#[derive(Serialize)]
struct EvaluationReport {
    method: Option<Method>,
    alpha: Option<MisspecIndex>,
    quantity: f64,
    in_sample_value: Option<f64>,
    out_of_sample_profit: f64,
}

fn evaluate(args: &EvaluateArgs, format: Format) -> Result<Vec<u8>, Failure> {
    csv_only_json(format)?;
    let cost = args.cost.build()?;
    let test = read_demand_file(&args.test)?;
    let report = match args.quantity {
        Some(q) => EvaluationReport {
            method: None,
            alpha: None,
            quantity: round6(q),
            in_sample_value: None,
            out_of_sample_profit: round6(out_of_sample_profit(q, &test, &cost)?),
        },
        None => {
            let method = require(args.method, "method")?;
            let train = read_demand_file(&require(args.train.clone(), "train")?)?;
            let (q, v) = method_solution(method, args.alpha, &train, &cost, args.radius)?;
            EvaluationReport {
                method: Some(method),
                alpha: method.uses_alpha().then_some(args.alpha),
                quantity: round6(q),
                in_sample_value: Some(round6(v)),
                out_of_sample_profit: round6(out_of_sample_profit(q, &test, &cost)?),
            }
        }
    };
    json(&report)
}

fn experiment(
    args: &ExperimentArgs,
    seed: Option<u64>,
    format: Format,
) -> Result<Vec<u8>, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| input_error(format!("{}: {e}", args.config.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| input_error(format!("{}: {e}", args.config.display())))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    // Relative data paths resolve against the config file's directory.
    let base = args.config.parent().unwrap_or(Path::new("."));
    for src in [&mut config.train, &mut config.test] {
        if let newsvendor::evaluation::DataSource::Csv(p) = src {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    let report = run_experiment(&config)?;
    info!("experiment config hash {}", report.meta.config_hash);
    match format {
        Format::Json => json(&report),
        Format::Csv => {
            let mut buf = Vec::new();
            write_report_csv(&report, &mut buf)?;
            Ok(buf)
        }
    }
}

#[derive(Serialize)]
struct OracleSummary {
    seed: u64,
    instances: usize,
    passed: usize,
    checks: Vec<newsvendor::oracle::MisspecCheck>,
}

fn oracle_check(args: &OracleArgs, seed: u64, format: Format) -> Result<(Vec<u8>, bool), Failure> {
    use rand::SeedableRng;
    csv_only_json(format)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(args.instances);
    for _ in 0..args.instances {
        let (alpha, m, cost) = random_misspec_instance(&mut rng);
        checks.push(check_misspec_against_oracle(
            alpha,
            &m,
            &cost,
            args.support_points,
            args.orders,
        )?);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let ok = passed == checks.len();
    Ok((
        json(&OracleSummary {
            seed,
            instances: args.instances,
            passed,
            checks,
        })?,
        ok,
    ))
}

fn generate(args: &GenerateArgs, seed: u64, format: Format) -> Result<Vec<u8>, Failure> {
    let model = match args.kind {
        Kind::TruncNormal => DemandModel::TruncNormal {
            mean: args.mean,
            std: args.std,
        },
        Kind::Lognormal => DemandModel::Lognormal {
            mean: args.mean,
            std: args.std,
        },
        Kind::RegimeShift => DemandModel::RegimeShift {
            before: [args.mean, args.std],
            after: [
                require(args.after_mean, "after-mean")?,
                require(args.after_std, "after-std")?,
            ],
            switch_fraction: args.switch_fraction,
        },
    };
    let start = args
        .start
        .parse()
        .map_err(|e| input_error(format!("bad --start `{}`: {e}", args.start)))?;
    let samples = generate_demand(&model, args.n, seed)?;
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_demand_csv(&samples, start, &mut buf)?;
            Ok(buf)
        }
        Format::Json => json(&samples),
    }
}

fn run(cli: &Cli, seed_given: bool) -> Result<Vec<u8>, Failure> {
    match &cli.command {
        Command::Solve(a) => solve(a, cli.format),
        Command::Sweep(a) => run_sweep(a, cli.format),
        Command::Calibrate(a) => calibrate(a, cli.seed, cli.format),
        Command::Evaluate(a) => evaluate(a, cli.format),
        Command::Experiment(a) => experiment(a, seed_given.then_some(cli.seed), cli.format),
        Command::OracleCheck(a) => {
            let (bytes, ok) = oracle_check(a, cli.seed, cli.format)?;
            write_output(cli.out.as_deref(), &bytes)?;
            if ok {
                Ok(Vec::new())
            } else {
                Err(Failure {
                    code: 4,
                    message: "closed form disagrees with the oracle".into(),
                })
            }
        }
        Command::Generate(a) => generate(a, cli.seed, cli.format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let seed_given = std::env::args().any(|a| a == "--seed" || a.starts_with("--seed="));
    let cli = Cli::parse();
    let result = run(&cli, seed_given).and_then(|bytes| {
        if bytes.is_empty() {
            Ok(())
        } else {
            write_output(cli.out.as_deref(), &bytes)
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
