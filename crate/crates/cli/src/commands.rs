//! Command runners. Each writes its full output to the given writer; the
//! caller decides where it goes.

use std::io::{self, Write};

use lrb_core::checks::{run_check, CheckOptions, CheckOutcome};
use lrb_core::sampler::simulate_paths;
use lrb_core::{CallMethod, CallSpec, ExerciseMode, InformationModel, LrbError, SamplerMethod};
use serde::Serialize;
use serde_json::value::RawValue;
use thiserror::Error;

use crate::config::{CallMethodConfig, ConfigError, ExerciseConfig, MethodConfig, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("config has no `{0}` block")]
    MissingBlock(&'static str),

    #[error("cannot read {path}: {source}")]
    Input { path: String, source: io::Error },

    #[error("numeric failure: {0}")]
    Numeric(#[from] LrbError),

    #[error("cannot write output: {0}")]
    Output(#[from] io::Error),

    #[error("{failed} of {total} checks failed")]
    PropertyFailure { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::MissingBlock(_) | CliError::Input { .. } | CliError::Output(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::PropertyFailure { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Price,
    Option,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    /// Replaces the config seed.
    pub seed: Option<u64>,
}

pub fn run(command: Command, config: &ScenarioConfig, opts: RunOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = config.scenario()?;
    let seed = opts.seed.unwrap_or(config.seed);
    let model = InformationModel::new(scenario.spec, scenario.curve);
    match command {
        Command::Simulate => simulate(config, &model, seed, opts.workers, out),
        Command::Price => price(config, &model, out),
        Command::Option => option(config, &model, seed, opts.workers, out),
        Command::Verify => verify(config, &model, seed, opts.workers, out),
    }
}

/// JSON number with 17 significant digits; non-finite values become `null`.
pub fn number(v: f64) -> Box<RawValue> {
    let text = if v.is_finite() { format!("{v:.16e}") } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

fn simulate(config: &ScenarioConfig, model: &InformationModel, seed: u64, workers: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let sim = config.simulate.as_ref().ok_or(CliError::MissingBlock("simulate"))?;
    let method = match sim.method {
        MethodConfig::TerminalFirst => SamplerMethod::TerminalFirst,
        MethodConfig::Markov => SamplerMethod::Markov,
    };
    let paths = simulate_paths(&model.spec, &sim.grid, seed, sim.paths, method, workers)?;
    let mut w = io::BufWriter::new(out);
    writeln!(w, "path_id,time,value")?;
    for (i, p) in paths.iter().enumerate() {
        for (t, v) in p.times.iter().zip(&p.values) {
            writeln!(w, "{i},{t:?},{v:?}")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PriceRow {
    t: Box<RawValue>,
    xi: Box<RawValue>,
    price: Box<RawValue>,
    posterior_mean: Box<RawValue>,
    psi: Box<RawValue>,
}

fn price(config: &ScenarioConfig, model: &InformationModel, out: &mut dyn Write) -> Result<(), CliError> {
    let block = config.price.as_ref().ok_or(CliError::MissingBlock("price"))?;
    let mut rows = Vec::with_capacity(block.times.len() * block.xis.len());
    for &t in &block.times {
        for &xi in &block.xis {
            let r = model.price_record(t, xi)?;
            rows.push(PriceRow {
                t: number(r.t),
                xi: number(r.xi),
                price: number(r.price),
                posterior_mean: number(r.posterior_mean),
                psi: number(r.psi),
            });
        }
    }
    write_json(out, &rows)
}

#[derive(Serialize)]
struct McRow {
    mean: Box<RawValue>,
    se: Box<RawValue>,
    paths: usize,
}

#[derive(Serialize)]
struct OptionRow {
    strike: Box<RawValue>,
    maturity: Box<RawValue>,
    valuation: Box<RawValue>,
    xi_s: Box<RawValue>,
    method: CallMethodConfig,
    exercise: ExerciseConfig,
    price: Box<RawValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<McRow>,
}

fn option(config: &ScenarioConfig, model: &InformationModel, seed: u64, workers: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let o = config.option.as_ref().ok_or(CliError::MissingBlock("option"))?;
    let cs = CallSpec { strike: o.strike, maturity: o.maturity, valuation: o.valuation, xi_s: o.xi_s };
    let method = match o.method {
        CallMethodConfig::ClosedForm => CallMethod::ClosedForm,
        CallMethodConfig::Quadrature => CallMethod::Quadrature,
    };
    let mode = match o.exercise {
        ExerciseConfig::Monotone => ExerciseMode::Monotone,
        ExerciseConfig::Generic => ExerciseMode::Generic,
    };
    let price = model.call_price(&cs, method, mode)?;
    let monte_carlo = match o.mc_paths {
        Some(n) => {
            let est = model.mc_call(&cs, n, seed, workers)?;
            Some(McRow { mean: number(est.mean), se: number(est.se), paths: est.n })
        }
        None => None,
    };
    let row = OptionRow {
        strike: number(o.strike),
        maturity: number(o.maturity),
        valuation: number(o.valuation),
        xi_s: number(o.xi_s),
        method: o.method,
        exercise: o.exercise,
        price: number(price),
        monte_carlo,
    };
    write_json(out, &row)
}

#[derive(Serialize)]
struct CheckRow {
    check: String,
    statistic: Box<RawValue>,
    threshold: Box<RawValue>,
    pass: bool,
}

impl From<CheckOutcome> for CheckRow {
    fn from(o: CheckOutcome) -> Self {
        Self { check: o.check, statistic: number(o.statistic), threshold: number(o.threshold), pass: o.pass }
    }
}

fn verify(config: &ScenarioConfig, model: &InformationModel, seed: u64, workers: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let v = config.verify.as_ref().ok_or(CliError::MissingBlock("verify"))?;
    let opts = CheckOptions { seed, workers, scale: v.scale };
    let mut outcomes = Vec::new();
    for name in &v.checks {
        outcomes.extend(run_check(name, &opts, Some(&model.spec))?);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    let total = outcomes.len();
    let rows: Vec<CheckRow> = outcomes.into_iter().map(CheckRow::from).collect();
    write_json(out, &rows)?;
    if failed > 0 {
        return Err(CliError::PropertyFailure { failed, total });
    }
    Ok(())
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::from)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
