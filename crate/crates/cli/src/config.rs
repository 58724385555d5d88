//! Scenario files: model, rate curve, seed and per-command settings.

use lrb_core::checks::CHECK_NAMES;
use lrb_core::{Atom, DensityFamily, DensityPart, KernelFamily, LrbError, LrbSpec, RateCurve, TerminalLaw};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kernel: KernelConfig,
    pub horizon: f64,
    pub terminal: TerminalConfig,
    #[serde(default = "zero_rate")]
    pub rates: Vec<RateSegment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<PriceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<OptionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

fn zero_rate() -> Vec<RateSegment> {
    vec![RateSegment { start: 0.0, rate: 0.0 }]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelConfig {
    Brownian,
    Gamma { m: f64 },
    Poisson { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalConfig {
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub z: f64,
    pub weight: f64,
}

/// Density part of the terminal law; `weight` is its share of the total mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DensityConfig {
    Normal { mean: f64, variance: f64, weight: f64 },
    Gamma { shape: f64, scale: f64, weight: f64 },
    Uniform { lo: f64, hi: f64, weight: f64 },
}

/// Short rate `rate` from time `start` until the next segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSegment {
    pub start: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    #[default]
    TerminalFirst,
    Markov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub grid: Vec<f64>,
    pub paths: usize,
    #[serde(default)]
    pub method: MethodConfig,
}

/// Prices on every `(t, ξ)` pair of `times × xis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceConfig {
    pub times: Vec<f64>,
    pub xis: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallMethodConfig {
    #[default]
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExerciseConfig {
    #[default]
    Monotone,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionConfig {
    pub strike: f64,
    pub maturity: f64,
    #[serde(default)]
    pub valuation: f64,
    #[serde(default)]
    pub xi_s: f64,
    #[serde(default)]
    pub method: CallMethodConfig,
    #[serde(default)]
    pub exercise: ExerciseConfig,
    /// Adds a Monte Carlo estimate on this many paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<String>,
    /// Multiplier on Monte Carlo path counts.
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Model objects built from a config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: LrbSpec,
    pub curve: RateCurve,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every field and builds the model.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let kernel = self.kernel.build()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError::field("horizon", format!("must be positive and finite, got {}", self.horizon)));
        }
        let terminal = self.terminal.build()?;
        let spec = LrbSpec::new(kernel, self.horizon, terminal).map_err(|e| ConfigError::field("terminal", spec_message(e)))?;
        let curve = RateCurve::piecewise(self.rates.iter().map(|r| (r.start, r.rate)).collect())
            .map_err(|e| ConfigError::field("rates", spec_message(e)))?;
        self.check_commands()?;
        Ok(Scenario { spec, curve })
    }

    fn check_commands(&self) -> Result<(), ConfigError> {
        let horizon = self.horizon;
        if let Some(sim) = &self.simulate {
            if sim.paths == 0 {
                return Err(ConfigError::field("simulate.paths", "must be positive"));
            }
            if sim.grid.is_empty() {
                return Err(ConfigError::field("simulate.grid", "must not be empty"));
            }
            if let Some(bad) = sim.grid.iter().find(|t| !(**t >= 0.0 && **t <= horizon)) {
                return Err(ConfigError::field("simulate.grid", format!("time {bad} outside [0, {horizon}]")));
            }
            if sim.grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(ConfigError::field("simulate.grid", "times must be strictly increasing"));
            }
        }
        if let Some(price) = &self.price {
            if let Some(bad) = price.times.iter().find(|t| !(**t >= 0.0 && **t < horizon)) {
                return Err(ConfigError::field("price.times", format!("time {bad} outside [0, {horizon})")));
            }
            if let Some(bad) = price.xis.iter().find(|x| !x.is_finite()) {
                return Err(ConfigError::field("price.xis", format!("{bad} is not finite")));
            }
        }
        if let Some(opt) = &self.option {
            if !(opt.strike >= 0.0 && opt.strike.is_finite()) {
                return Err(ConfigError::field("option.strike", format!("must be non-negative, got {}", opt.strike)));
            }
            if !(opt.maturity > 0.0 && opt.maturity < horizon) {
                return Err(ConfigError::field("option.maturity", format!("{} outside (0, {horizon})", opt.maturity)));
            }
            if !(opt.valuation >= 0.0 && opt.valuation < opt.maturity) {
                return Err(ConfigError::field("option.valuation", format!("{} outside [0, maturity)", opt.valuation)));
            }
            if opt.mc_paths == Some(0) {
                return Err(ConfigError::field("option.mc_paths", "must be positive"));
            }
        }
        if let Some(v) = &self.verify {
            if let Some(bad) = v.checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
                return Err(ConfigError::field(
                    "verify.checks",
                    format!("unknown check {bad:?}; known checks: {}", CHECK_NAMES.join(", ")),
                ));
            }
            if !(v.scale > 0.0 && v.scale.is_finite()) {
                return Err(ConfigError::field("verify.scale", format!("must be positive, got {}", v.scale)));
            }
        }
        Ok(())
    }

    /// Config describing `scenario`, with the command blocks of `self`.
    pub fn with_model(&self, scenario: &Scenario) -> Result<Self, ConfigError> {
        let spec = &scenario.spec;
        let density = match spec.terminal.density.as_deref() {
            None => None,
            Some(DensityPart::Family { family, weight }) => Some(DensityConfig::from_family(*family, *weight)),
            Some(DensityPart::Tilted(_)) => {
                return Err(ConfigError::field("terminal.density", "conditioned densities have no config form"))
            }
        };
        Ok(Self {
            kernel: KernelConfig::from_kernel(spec.kernel),
            horizon: spec.horizon,
            terminal: TerminalConfig {
                atoms: spec.terminal.atoms.iter().map(|a| AtomConfig { z: a.z, weight: a.weight }).collect(),
                density,
            },
            rates: scenario.curve.segments().into_iter().map(|(start, rate)| RateSegment { start, rate }).collect(),
            ..self.clone()
        })
    }
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

fn spec_message(e: LrbError) -> String {
    match e {
        LrbError::InvalidSpec(m) | LrbError::Domain(m) => m,
        other => other.to_string(),
    }
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::field(field, format!("must be positive and finite, got {v}")))
    }
}

impl KernelConfig {
    fn build(&self) -> Result<KernelFamily, ConfigError> {
        Ok(match *self {
            KernelConfig::Brownian => KernelFamily::Brownian,
            KernelConfig::Gamma { m } => KernelFamily::Gamma { m: positive("kernel.m", m)? },
            KernelConfig::Poisson { lambda } => KernelFamily::Poisson { lambda: positive("kernel.lambda", lambda)? },
        })
    }

    fn from_kernel(k: KernelFamily) -> Self {
        match k {
            KernelFamily::Brownian => KernelConfig::Brownian,
            KernelFamily::Gamma { m } => KernelConfig::Gamma { m },
            KernelFamily::Poisson { lambda } => KernelConfig::Poisson { lambda },
        }
    }
}

impl DensityConfig {
    fn family(&self) -> (DensityFamily, f64) {
        match *self {
            DensityConfig::Normal { mean, variance, weight } => (DensityFamily::Normal { mean, variance }, weight),
            DensityConfig::Gamma { shape, scale, weight } => (DensityFamily::Gamma { shape, scale }, weight),
            DensityConfig::Uniform { lo, hi, weight } => (DensityFamily::Uniform { lo, hi }, weight),
        }
    }

    fn from_family(family: DensityFamily, weight: f64) -> Self {
        match family {
            DensityFamily::Normal { mean, variance } => DensityConfig::Normal { mean, variance, weight },
            DensityFamily::Gamma { shape, scale } => DensityConfig::Gamma { shape, scale, weight },
            DensityFamily::Uniform { lo, hi } => DensityConfig::Uniform { lo, hi, weight },
        }
    }
}

impl TerminalConfig {
    fn build(&self) -> Result<TerminalLaw, ConfigError> {
        for (i, a) in self.atoms.iter().enumerate() {
            if !a.z.is_finite() {
                return Err(ConfigError::field(format!("terminal.atoms[{i}].z"), "must be finite"));
            }
            if !(a.weight >= 0.0 && a.weight.is_finite()) {
                return Err(ConfigError::field(format!("terminal.atoms[{i}].weight"), "must be non-negative"));
            }
        }
        let density = match &self.density {
            None => None,
            Some(d) => {
                let (family, weight) = d.family();
                family.validate().map_err(|e| ConfigError::field("terminal.density", spec_message(e)))?;
                if !(weight > 0.0 && weight <= 1.0) {
                    return Err(ConfigError::field("terminal.density.weight", format!("{weight} outside (0, 1]")));
                }
                Some(DensityPart::Family { family, weight })
            }
        };
        let atoms = self.atoms.iter().map(|a| Atom { z: a.z, weight: a.weight }).collect();
        TerminalLaw::new(atoms, density).map_err(|e| ConfigError::field("terminal", spec_message(e)))
    }
}

