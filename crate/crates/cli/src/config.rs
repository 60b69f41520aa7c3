//! JSON run configuration: raw schema, command-line overrides and validation.

use std::path::PathBuf;

use clap::ValueEnum;
use ibnr_core::statespace::enumerate_states;
use ibnr_core::{ChainSpec, Distribution, ModelSpec, QuadratureConfig, SVector, SemiMarkovSpec, StateSpace};
use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Asymptotic,
    Transient,
    Mgf,
    Simulate,
    Compare,
    EmbedInfo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Asymptotic => "asymptotic",
            Self::Transient => "transient",
            Self::Mgf => "mgf",
            Self::Simulate => "simulate",
            Self::Compare => "compare",
            Self::EmbedInfo => "embed-info",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitWord {
    Limit,
}

/// A time point or the word `"limit"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawTime {
    At(f64),
    Limit(LimitWord),
}

impl std::str::FromStr for RawTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("limit") {
            return Ok(Self::Limit(LimitWord::Limit));
        }
        s.parse::<f64>().map(Self::At).map_err(|_| format!("expected a number or \"limit\", got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawChain {
    pub k: usize,
    #[serde(rename = "K")]
    pub max_batch: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<u32>>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub delta: f64,
    pub chain: RawChain,
    pub service: Vec<Distribution>,
    pub interarrival: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSemiMarkov {
    pub delta: f64,
    #[serde(rename = "P_Y")]
    pub p_y: Vec<Vec<f64>>,
    #[serde(rename = "pi_Y", default, skip_serializing_if = "Option::is_none")]
    pub pi_y: Option<Vec<f64>>,
    pub service_matrix: Vec<Vec<Distribution>>,
    pub interarrival: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    FirstMoment,
    SecondMoment,
    Workload,
    Mgf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Real,
    Imaginary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Argument {
    #[default]
    SingleType,
    Total,
}

/// One requested quantity. Dimensions `i`, `j` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTarget {
    pub kind: TargetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argument: Option<Argument>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub reps: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { reps: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// The configuration document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<RawModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_markov: Option<RawSemiMarkov>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<RawTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<RawTime>,
    #[serde(default)]
    pub numeric: QuadratureConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// Values given on the command line; each one replaces the config entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub t: Option<RawTime>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub tol: Option<f64>,
}

impl RawConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.seed = seed;
        }
        if let Some(reps) = o.reps {
            self.sim.reps = reps;
        }
        if o.t.is_some() {
            self.t = o.t;
        }
        if o.out.is_some() {
            self.output.path.clone_from(&o.out);
        }
        if let Some(format) = o.format {
            self.output.format = format;
        }
        if o.tol.is_some() {
            self.tol = o.tol;
        }
    }
}

/// Turns a serde path such as `model.chain.P[0]` into `/model/chain/P/0`.
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } | Segment::Enum { variant: key } => out.push_str(&format!("/{key}")),
            Segment::Unknown => {}
        }
    }
    out
}

/// Parses the document without semantic checks.
pub fn parse_raw(text: &str) -> CliResult<RawConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut pointer = pointer_of(e.path());
        let message = e.inner().to_string();
        // Missing fields are reported at the parent; point at the field itself.
        if let Some(rest) = message.strip_prefix("missing field `") {
            if let Some(field) = rest.split('`').next() {
                pointer.push('/');
                pointer.push_str(field);
            }
        }
        CliError::config(message, pointer)
    })
}

/// A validated model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Base(ModelSpec),
    SemiMarkov(SemiMarkovSpec),
}

/// A validated target. Dimensions are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    FirstMoment(usize),
    SecondMoment(usize, usize),
    Workload(usize),
    Mgf(SVector),
    ModulatedFirstMoment,
    ModulatedSecondMoment,
    ModulatedWorkload,
    ModulatedMgf { z: f64, imaginary: bool, argument: Argument },
}

impl Request {
    pub fn is_mgf(&self) -> bool {
        matches!(self, Self::Mgf(_) | Self::ModulatedMgf { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Time {
    Limit,
    At(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Model,
    pub targets: Vec<Request>,
    pub t: Option<Time>,
    pub numeric: QuadratureConfig,
    pub sim: SimConfig,
    pub output: OutputConfig,
    pub tol: f64,
}

pub const DEFAULT_TOL: f64 = 1e-8;

fn matrix(rows: &[Vec<f64>], pointer: &str) -> CliResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(CliError::config("matrix is empty", pointer));
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(CliError::config(format!("row {r} has {} entries, expected {n}", row.len()), format!("{pointer}/{r}")));
        }
        let sum: f64 = row.iter().sum();
        if let Some(c) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(CliError::config(format!("entry ({r},{c}) = {} is not a probability", row[c]), format!("{pointer}/{r}/{c}")));
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(CliError::config(format!("row {r} is not stochastic: it sums to {sum}"), format!("{pointer}/{r}")));
        }
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn law(d: &Distribution, pointer: String) -> CliResult<Distribution> {
    d.validate().map_err(|e| CliError::from(e).at(pointer.clone()))?;
    let positive = match *d {
        Distribution::Exponential { rate } => rate > 0.0,
        Distribution::Deterministic { value } => value > 0.0,
        Distribution::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
        Distribution::Zero => true,
    };
    if !positive {
        return Err(CliError::config(format!("distribution parameters must be positive: {d:?}"), pointer));
    }
    Ok(*d)
}

fn delta(v: f64, pointer: &str) -> CliResult<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("delta must be finite and non-negative, got {v}"), pointer))
    }
}

fn core_at(pointer: &str) -> impl Fn(ibnr_core::Error) -> CliError + '_ {
    move |e| {
        let mut err = CliError::from(e);
        err.kind = crate::error::ErrorKind::Config;
        err.at(pointer)
    }
}

fn base_model(m: &RawModel) -> CliResult<ModelSpec> {
    let delta = delta(m.delta, "/model/delta")?;
    let c = &m.chain;
    let p = matrix(&c.p, "/model/chain/P")?;
    let space = match &c.states {
        Some(states) => StateSpace::restricted(c.k, c.max_batch, states.clone()).map_err(core_at("/model/chain/states"))?,
        None => enumerate_states(c.k, c.max_batch).map_err(core_at("/model/chain"))?,
    };
    if space.len() != p.nrows() {
        return Err(CliError::config(format!("P is {0}x{0} but the state space has {1} states", p.nrows(), space.len()), "/model/chain/P"));
    }
    let chain = match &c.pi {
        Some(pi) => ChainSpec::with_stationary(space, p, RowDVector::from_row_slice(pi)).map_err(core_at("/model/chain/pi"))?,
        None => ChainSpec::new(space, p).map_err(core_at("/model/chain/P"))?,
    };
    if m.service.len() != c.k {
        return Err(CliError::config(format!("{} service laws given for k = {}", m.service.len(), c.k), "/model/service"));
    }
    let service = m.service.iter().enumerate().map(|(i, d)| law(d, format!("/model/service/{i}"))).collect::<CliResult<Vec<_>>>()?;
    let tau = law(&m.interarrival, "/model/interarrival".into())?;
    if tau == Distribution::Zero {
        return Err(CliError::config("interarrival times must have a positive mean", "/model/interarrival"));
    }
    ModelSpec::new(delta, chain, service, tau).map_err(core_at("/model"))
}

fn semi_markov(m: &RawSemiMarkov) -> CliResult<SemiMarkovSpec> {
    let delta = delta(m.delta, "/semi_markov/delta")?;
    let p_y = matrix(&m.p_y, "/semi_markov/P_Y")?;
    let kappa = p_y.nrows();
    if m.service_matrix.len() != kappa {
        return Err(CliError::config(format!("service_matrix has {} rows, expected {kappa}", m.service_matrix.len()), "/semi_markov/service_matrix"));
    }
    let mut service = Vec::with_capacity(kappa);
    for (l, row) in m.service_matrix.iter().enumerate() {
        if row.len() != kappa {
            return Err(CliError::config(format!("row {l} has {} entries, expected {kappa}", row.len()), format!("/semi_markov/service_matrix/{l}")));
        }
        service.push(row.iter().enumerate().map(|(c, d)| law(d, format!("/semi_markov/service_matrix/{l}/{c}"))).collect::<CliResult<Vec<_>>>()?);
    }
    let tau = law(&m.interarrival, "/semi_markov/interarrival".into())?;
    if tau == Distribution::Zero {
        return Err(CliError::config("sojourn times must have a positive mean", "/semi_markov/interarrival"));
    }
    let pi_y = m.pi_y.as_ref().map(|v| RowDVector::from_row_slice(v));
    let spec = SemiMarkovSpec::new(p_y, pi_y, service, tau, delta).map_err(core_at("/semi_markov"))?;
    spec.embed().map_err(core_at("/semi_markov"))?;
    Ok(spec)
}

fn dimension(v: Option<usize>, k: usize, pointer: String) -> CliResult<usize> {
    match v {
        Some(i) if (1..=k).contains(&i) => Ok(i - 1),
        Some(i) => Err(CliError::config(format!("dimension {i} is outside 1..={k}"), pointer)),
        None => Err(CliError::config("missing dimension", pointer)),
    }
}

fn base_target(t: &RawTarget, k: usize, n: usize) -> CliResult<Request> {
    let at = |field: &str| format!("/targets/{n}/{field}");
    Ok(match t.kind {
        TargetKind::FirstMoment => Request::FirstMoment(dimension(t.i, k, at("i"))?),
        TargetKind::Workload => Request::Workload(dimension(t.i, k, at("i"))?),
        TargetKind::SecondMoment => {
            let i = dimension(t.i, k, at("i"))?;
            Request::SecondMoment(i, dimension(t.j.or(t.i), k, at("j"))?)
        }
        TargetKind::Mgf => {
            let s = t.s.clone().ok_or_else(|| CliError::config("mgf targets need an argument vector s", at("s")))?;
            if s.len() != k {
                return Err(CliError::config(format!("s has {} components, expected {k}", s.len()), at("s")));
            }
            match t.mode.unwrap_or_default() {
                Mode::Real => Request::Mgf(SVector::real(s)),
                Mode::Imaginary => Request::Mgf(SVector::imaginary(s)),
            }
        }
    })
}

fn modulated_target(t: &RawTarget, n: usize) -> CliResult<Request> {
    let at = |field: &str| format!("/targets/{n}/{field}");
    if t.i.is_some() || t.j.is_some() || t.s.is_some() {
        return Err(CliError::config("semi-Markov targets cover every pair; use z for the mgf", format!("/targets/{n}")));
    }
    Ok(match t.kind {
        TargetKind::FirstMoment => Request::ModulatedFirstMoment,
        TargetKind::SecondMoment => Request::ModulatedSecondMoment,
        TargetKind::Workload => Request::ModulatedWorkload,
        TargetKind::Mgf => Request::ModulatedMgf {
            z: t.z.ok_or_else(|| CliError::config("semi-Markov mgf targets need a scalar z", at("z")))?,
            imaginary: t.mode.unwrap_or_default() == Mode::Imaginary,
            argument: t.argument.unwrap_or_default(),
        },
    })
}

/// Checks the document against the chosen command.
pub fn validate(raw: &RawConfig, command: Command) -> CliResult<RunConfig> {
    if let Some(c) = raw.command {
        if c != command {
            return Err(CliError::config(format!("config is for `{}` but `{}` was invoked", c.name(), command.name()), "/command"));
        }
    }
    let model = match (&raw.model, &raw.semi_markov) {
        (Some(m), None) => Model::Base(base_model(m)?),
        (None, Some(s)) => Model::SemiMarkov(semi_markov(s)?),
        (Some(_), Some(_)) => return Err(CliError::config("give either model or semi_markov, not both", "/semi_markov")),
        (None, None) => return Err(CliError::config("missing field `model` (or `semi_markov`)", "/model")),
    };
    let mut targets = Vec::new();
    for (n, t) in raw.targets.iter().enumerate() {
        targets.push(match &model {
            Model::Base(m) => base_target(t, m.k(), n)?,
            Model::SemiMarkov(_) => modulated_target(t, n)?,
        });
    }
    if command == Command::Mgf {
        if targets.is_empty() || !targets.iter().all(Request::is_mgf) {
            return Err(CliError::config("the mgf command needs only mgf targets", "/targets"));
        }
    } else if targets.is_empty() {
        targets = match &model {
            Model::Base(m) => (0..m.k()).map(Request::FirstMoment).collect(),
            Model::SemiMarkov(_) => vec![Request::ModulatedFirstMoment],
        };
    }
    if command == Command::EmbedInfo && !matches!(model, Model::SemiMarkov(_)) {
        return Err(CliError::config("embed-info needs a semi_markov model", "/semi_markov"));
    }
    let t = match raw.t {
        None => None,
        Some(RawTime::Limit(_)) => Some(Time::Limit),
        Some(RawTime::At(x)) if x >= 0.0 && x.is_finite() => Some(Time::At(x)),
        Some(RawTime::At(x)) => return Err(CliError::config(format!("t must be finite and non-negative, got {x}"), "/t")),
    };
    let t = match (command, t) {
        (Command::Simulate | Command::Compare, Some(Time::Limit)) => {
            return Err(CliError::config(format!("t = \"limit\" cannot be used with `{}`", command.name()), "/t"))
        }
        (Command::Simulate | Command::Compare | Command::Transient | Command::Mgf, None) => {
            return Err(CliError::config(format!("`{}` needs a time t", command.name()), "/t"))
        }
        (Command::Transient, Some(Time::Limit)) => return Err(CliError::config("transient needs a finite t; use asymptotic for limits", "/t")),
        (Command::Asymptotic, Some(Time::At(_))) => {
            return Err(CliError::config("asymptotic evaluates limits; use transient for a finite t", "/t"))
        }
        (Command::Asymptotic, None) => Some(Time::Limit),
        (_, t) => t,
    };
    raw.numeric.validate().map_err(core_at("/numeric"))?;
    if matches!(command, Command::Simulate | Command::Compare) && raw.sim.reps < 2 {
        return Err(CliError::config(format!("at least 2 replications are needed, got {}", raw.sim.reps), "/sim/reps"));
    }
    let tol = raw.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::config(format!("tol must be positive, got {tol}"), "/tol"));
    }
    Ok(RunConfig {
        command,
        model,
        targets,
        t,
        numeric: raw.numeric,
        sim: raw.sim,
        output: raw.output.clone(),
        tol,
    })
}

/// Parses, applies overrides and validates.
pub fn parse_config(text: &str, command: Command, overrides: &Overrides) -> CliResult<RunConfig> {
    let mut raw = parse_raw(text)?;
    raw.apply(overrides);
    validate(&raw, command)
}
