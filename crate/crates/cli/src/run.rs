//! Command dispatch.

use ibnr_core::asymptotics::{limit_first_moment_general, limit_first_moment_joint, limit_second_moment_joint, limit_workload_joint};
use ibnr_core::deterministic::{chain_period, limiting_mgf_deterministic, transient_first_moment_deterministic, transient_mgf_deterministic};
use ibnr_core::semimarkov::{modulated_first_moment, modulated_mgf, modulated_second_moment, modulated_workload};
use ibnr_core::transient::{
    default_step, first_moment_renewal, forcing_b_second, forcing_workload, solve_markov_renewal, transient_first_moment_poisson,
    transient_mgf_poisson, transient_second_moment_poisson, transient_workload_poisson, PsiZero,
};
use ibnr_core::{
    estimate, Embedding, Error, Horizon, InitialStates, Method, MgfArgument, ModelSpec, ModulatedMatrix, SMode, Target,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::{Argument, Command, Model, Request, RunConfig, Time};
use crate::error::{CliError, CliResult};
use crate::output::{Report, Row};

/// Largest integer horizon tried when a lattice limit is found by doubling.
const LATTICE_DOUBLING_CAP: u64 = 1 << 16;

/// A labelled real matrix, optionally with standard errors.
#[derive(Debug, Clone)]
struct Table {
    target: String,
    rows: Vec<String>,
    cols: Vec<String>,
    values: DMatrix<f64>,
    stderr: Option<DMatrix<f64>>,
}

impl Table {
    fn cells(&self) -> Vec<Row> {
        let mut out = Vec::with_capacity(self.values.len());
        for r in 0..self.values.nrows() {
            for c in 0..self.values.ncols() {
                let mut row = Row::new(self.rows[r].clone(), self.cols[c].clone(), self.target.clone(), self.values[(r, c)]);
                row.stderr = self.stderr.as_ref().map(|s| s[(r, c)]);
                out.push(row);
            }
        }
        out
    }
}

fn split_complex(target: &str, rows: Vec<String>, cols: Vec<String>, values: &DMatrix<Complex64>, stderr: Option<&DMatrix<Complex64>>) -> Vec<Table> {
    let re = Table {
        target: format!("Re {target}"),
        rows: rows.clone(),
        cols: cols.clone(),
        values: values.map(|c| c.re),
        stderr: stderr.map(|s| s.map(|c| c.re)),
    };
    let im = Table { target: format!("Im {target}"), rows, cols, values: values.map(|c| c.im), stderr: stderr.map(|s| s.map(|c| c.im)) };
    vec![re, im]
}

fn format_number(x: f64) -> String {
    x.to_string()
}

fn base_label(req: &Request) -> String {
    match req {
        Request::FirstMoment(i) => format!("M_{}", i + 1),
        Request::SecondMoment(i, j) => format!("M_{}{}", i + 1, j + 1),
        Request::Workload(i) => format!("W_{}", i + 1),
        Request::Mgf(s) => {
            let unit = if s.mode() == SMode::Imaginary { "i" } else { "" };
            let parts: Vec<String> = s.values().iter().map(|v| format!("{}{unit}", format_number(*v))).collect();
            format!("psi({})", parts.join(";"))
        }
        Request::ModulatedFirstMoment => "M1".into(),
        Request::ModulatedSecondMoment => "M2".into(),
        Request::ModulatedWorkload => "W".into(),
        Request::ModulatedMgf { z, imaginary, argument } => {
            let which = match argument {
                Argument::SingleType => "single",
                Argument::Total => "total",
            };
            format!("psi_{which}({}{})", format_number(*z), if *imaginary { "i" } else { "" })
        }
    }
}

fn state_labels(model: &ModelSpec) -> Vec<String> {
    (0..model.len()).map(|n| model.space().label(n)).collect()
}

fn pair_label((l, m): (usize, usize)) -> String {
    format!("e({},{})", l + 1, m + 1)
}

fn base_table(model: &ModelSpec, req: &Request, values: DMatrix<f64>) -> Table {
    let labels = state_labels(model);
    Table { target: base_label(req), rows: labels.clone(), cols: labels, values, stderr: None }
}

fn base_complex(model: &ModelSpec, req: &Request, values: &DMatrix<Complex64>, stderr: Option<&DMatrix<Complex64>>) -> Vec<Table> {
    let labels = state_labels(model);
    split_complex(&base_label(req), labels.clone(), labels, values, stderr)
}

fn precondition(msg: impl Into<String>) -> CliError {
    CliError::precondition(msg)
}

fn integer_time(t: f64) -> CliResult<u64> {
    if t.fract() == 0.0 && t >= 0.0 {
        Ok(t as u64)
    } else {
        Err(precondition(format!("unit-lattice interarrivals need an integer t, got {t}")))
    }
}

const LATTICE_NOTE: &str = "lattice interarrival law: routed to the deterministic module";

/// `lim M_i(t)` for lattice arrivals: double the integer horizon until successive values agree to `tol`.
fn lattice_first_moment_limit(model: &ModelSpec, i: usize, tol: f64) -> CliResult<DMatrix<f64>> {
    let period = chain_period(model.transition());
    if period != 1 {
        return Err(precondition(format!("the batch chain has period {period}; the first moment has no limit")));
    }
    let mut t = 16u64;
    let mut previous = transient_first_moment_deterministic(model, i, t)?.entries;
    while t < LATTICE_DOUBLING_CAP {
        t *= 2;
        let next = transient_first_moment_deterministic(model, i, t)?.entries;
        if (&next - &previous).amax() <= tol * (1.0 + next.amax()) {
            return Ok(next);
        }
        previous = next;
    }
    Err(Error::Convergence(format!("lattice first-moment limit did not settle to {tol:e} by t = {LATTICE_DOUBLING_CAP}")).into())
}

fn base_limit(model: &ModelSpec, req: &Request, cfg: &RunConfig, notes: &mut Vec<String>) -> CliResult<Vec<Table>> {
    let quad = &cfg.numeric;
    if model.interarrival().is_lattice() {
        note(notes, LATTICE_NOTE);
        return match req {
            Request::FirstMoment(i) => Ok(vec![base_table(model, req, lattice_first_moment_limit(model, *i, cfg.tol)?)]),
            Request::Mgf(s) => {
                let lim = limiting_mgf_deterministic(model, s, cfg.tol)?;
                Ok(base_complex(model, req, &lim.value.entries, None))
            }
            _ => Err(precondition(format!("{} has no limit route for lattice interarrivals", base_label(req)))),
        };
    }
    let values = match req {
        Request::FirstMoment(i) => match limit_first_moment_joint(model, *i) {
            Err(Error::UnsupportedService { .. }) => {
                note(notes, "non-exponential service: first-moment limit by quadrature");
                limit_first_moment_general(model, *i, quad)?.entries
            }
            other => other?.entries,
        },
        Request::SecondMoment(i, j) => limit_second_moment_joint(model, *i, *j)?.entries,
        Request::Workload(i) => limit_workload_joint(model, *i)?.entries,
        Request::Mgf(_) => return Err(precondition("limiting mgf is available only for unit-lattice interarrivals")),
        _ => unreachable!("semi-Markov request on a base model"),
    };
    Ok(vec![base_table(model, req, values)])
}

fn renewal_second(model: &ModelSpec, i: usize, j: usize, t: f64, cfg: &RunConfig) -> CliResult<DMatrix<f64>> {
    let quad = &cfg.numeric;
    let psi0 = PsiZero::new(model, t, quad)?;
    let m_i = first_moment_renewal(model, i, t, quad)?;
    let m_j = if i == j { m_i.clone() } else { first_moment_renewal(model, j, t, quad)? };
    let forcing = forcing_b_second(model, i, j, &psi0, &m_i, &m_j, quad)?;
    Ok(solve_markov_renewal(model, |x| forcing.at(x), default_step(model, quad), t)?.at(t)?)
}

fn renewal_workload(model: &ModelSpec, i: usize, t: f64, cfg: &RunConfig) -> CliResult<DMatrix<f64>> {
    let quad = &cfg.numeric;
    let psi0 = PsiZero::new(model, t, quad)?;
    let forcing = forcing_workload(model, i, &psi0, quad)?;
    Ok(solve_markov_renewal(model, |x| forcing.at(x), default_step(model, quad), t)?.at(t)?)
}

fn base_at(model: &ModelSpec, req: &Request, t: f64, cfg: &RunConfig, notes: &mut Vec<String>) -> CliResult<Vec<Table>> {
    let quad = &cfg.numeric;
    if model.poisson_rate().is_some() {
        let values = match req {
            Request::FirstMoment(i) => transient_first_moment_poisson(model, *i, t, quad)?.entries,
            Request::SecondMoment(i, j) => transient_second_moment_poisson(model, *i, *j, t, quad)?.entries,
            Request::Workload(i) => transient_workload_poisson(model, *i, t, quad)?.entries,
            Request::Mgf(s) => return Ok(base_complex(model, req, &transient_mgf_poisson(model, s, t, quad)?.entries, None)),
            _ => unreachable!("semi-Markov request on a base model"),
        };
        return Ok(vec![base_table(model, req, values)]);
    }
    if model.interarrival().is_lattice() {
        match req {
            Request::FirstMoment(i) => {
                note(notes, LATTICE_NOTE);
                let values = transient_first_moment_deterministic(model, *i, integer_time(t)?)?.entries;
                return Ok(vec![base_table(model, req, values)]);
            }
            Request::Mgf(s) => {
                note(notes, LATTICE_NOTE);
                let values = transient_mgf_deterministic(model, s, integer_time(t)?)?.entries;
                return Ok(base_complex(model, req, &values, None));
            }
            _ => {}
        }
    }
    let values = match req {
        Request::FirstMoment(i) => first_moment_renewal(model, *i, t, quad)?.at(t)?,
        Request::SecondMoment(i, j) => renewal_second(model, *i, *j, t, cfg)?,
        Request::Workload(i) => renewal_workload(model, *i, t, cfg)?,
        Request::Mgf(_) => return Err(precondition("a transient mgf needs Poisson or unit-lattice interarrivals")),
        _ => unreachable!("semi-Markov request on a base model"),
    };
    Ok(vec![base_table(model, req, values)])
}

fn base_target(req: &Request) -> Target {
    match req {
        Request::FirstMoment(i) => Target::FirstMoment(*i),
        Request::SecondMoment(i, j) => Target::SecondMoment(*i, *j),
        Request::Workload(i) => Target::Workload(*i),
        Request::Mgf(s) => Target::Mgf(s.clone()),
        _ => unreachable!("semi-Markov request on a base model"),
    }
}

fn base_simulate(model: &ModelSpec, reqs: &[Request], t: f64, cfg: &RunConfig) -> CliResult<Vec<Vec<Table>>> {
    let targets: Vec<Target> = reqs.iter().map(base_target).collect();
    let report = estimate(model, t, &targets, cfg.sim.reps, cfg.sim.seed, InitialStates::All)?;
    let mut out = Vec::new();
    for (req, est) in reqs.iter().zip(&report.estimates) {
        out.push(match &est.imag {
            Some((im, im_se)) => {
                let values = est.mean.zip_map(im, Complex64::new);
                let stderr = est.stderr.zip_map(im_se, Complex64::new);
                base_complex(model, req, &values, Some(&stderr))
            }
            None => vec![Table { stderr: Some(est.stderr.clone()), ..base_table(model, req, est.mean.clone()) }],
        });
    }
    Ok(out)
}

fn modulated_tables(req: &Request, m: ModulatedMatrix<f64>) -> Vec<Table> {
    let cols = (0..m.values.ncols()).map(|c| pair_label(m.column_pair(c))).collect();
    let rows = m.rows.iter().copied().map(pair_label).collect();
    vec![Table { target: base_label(req), rows, cols, values: m.values, stderr: m.stderr }]
}

fn modulated_complex(req: &Request, m: ModulatedMatrix<Complex64>) -> Vec<Table> {
    let cols = (0..m.values.ncols()).map(|c| pair_label(m.column_pair(c))).collect();
    let rows = m.rows.iter().copied().map(pair_label).collect();
    split_complex(&base_label(req), rows, cols, &m.values, m.stderr.as_ref())
}

/// The analytic route for the embedded model at `horizon`.
fn modulated_exact_method(emb: &Embedding, horizon: Horizon, req: &Request) -> Method {
    let tau = emb.model().interarrival();
    match horizon {
        Horizon::Limit if req.is_mgf() => Method::Deterministic,
        Horizon::Limit => Method::Asymptotic,
        Horizon::At(_) if emb.model().poisson_rate().is_some() => Method::TransientPoisson,
        Horizon::At(_) if tau.is_lattice() => Method::Deterministic,
        Horizon::At(_) => Method::Renewal,
    }
}

fn modulated(emb: &Embedding, req: &Request, horizon: Horizon, method: Method, cfg: &RunConfig) -> CliResult<Vec<Table>> {
    let quad = &cfg.numeric;
    let quad = ibnr_core::QuadratureConfig { abs_tol: if req.is_mgf() && horizon == Horizon::Limit { cfg.tol } else { quad.abs_tol }, ..*quad };
    Ok(match req {
        Request::ModulatedFirstMoment => modulated_tables(req, modulated_first_moment(emb, horizon, method, &quad)?),
        Request::ModulatedSecondMoment => modulated_tables(req, modulated_second_moment(emb, horizon, method, &quad)?),
        Request::ModulatedWorkload => modulated_tables(req, modulated_workload(emb, horizon, method, &quad)?),
        Request::ModulatedMgf { z, imaginary, argument } => {
            let argument = match argument {
                Argument::SingleType => MgfArgument::SingleType,
                Argument::Total => MgfArgument::Total,
            };
            modulated_complex(req, modulated_mgf(emb, *z, *imaginary, argument, horizon, method, &quad)?)
        }
        _ => unreachable!("base request on a semi-Markov model"),
    })
}

fn note(notes: &mut Vec<String>, text: &str) {
    if !notes.iter().any(|n| n == text) {
        notes.push(text.to_string());
    }
}

fn horizon_of(t: Time) -> Horizon {
    match t {
        Time::Limit => Horizon::Limit,
        Time::At(x) => Horizon::At(x),
    }
}

/// Exact tables for every target, one group per target.
fn exact(cfg: &RunConfig, t: Time, notes: &mut Vec<String>) -> CliResult<Vec<Vec<Table>>> {
    let mut out = Vec::with_capacity(cfg.targets.len());
    match &cfg.model {
        Model::Base(model) => {
            for req in &cfg.targets {
                out.push(match t {
                    Time::Limit => base_limit(model, req, cfg, notes)?,
                    Time::At(x) => base_at(model, req, x, cfg, notes)?,
                });
            }
        }
        Model::SemiMarkov(spec) => {
            let emb = spec.embed()?;
            let horizon = horizon_of(t);
            for req in &cfg.targets {
                let method = modulated_exact_method(&emb, horizon, req);
                if method == Method::Deterministic {
                    note(notes, LATTICE_NOTE);
                }
                out.push(modulated(&emb, req, horizon, method, cfg)?);
            }
        }
    }
    Ok(out)
}

fn simulated(cfg: &RunConfig, t: f64) -> CliResult<Vec<Vec<Table>>> {
    match &cfg.model {
        Model::Base(model) => base_simulate(model, &cfg.targets, t, cfg),
        Model::SemiMarkov(spec) => {
            let emb = spec.embed()?;
            let method = Method::Simulate { reps: cfg.sim.reps, seed: cfg.sim.seed };
            cfg.targets.iter().map(|req| modulated(&emb, req, Horizon::At(t), method, cfg)).collect()
        }
    }
}

fn compare_rows(exact: &[Table], sim: &[Table]) -> Vec<Row> {
    let mut rows = Vec::new();
    for (e, s) in exact.iter().zip(sim) {
        let se = s.stderr.as_ref().expect("simulated tables carry standard errors");
        for (n, mut row) in e.cells().into_iter().enumerate() {
            let (r, c) = (n / e.values.ncols(), n % e.values.ncols());
            let est = s.values[(r, c)];
            let sd = se[(r, c)];
            let diff = est - row.value;
            row.estimate = Some(est);
            row.stderr = Some(sd);
            row.z_score = if sd > 0.0 {
                Some(diff / sd)
            } else if diff == 0.0 {
                Some(0.0)
            } else {
                None
            };
            rows.push(row);
        }
    }
    rows
}

fn embed_info(cfg: &RunConfig, notes: &mut Vec<String>) -> CliResult<Vec<Row>> {
    let Model::SemiMarkov(spec) = &cfg.model else {
        return Err(precondition("embed-info needs a semi-Markov model"));
    };
    let emb = spec.embed()?;
    let model = emb.model();
    let labels: Vec<String> = emb.pairs().iter().copied().map(pair_label).collect();
    notes.push(format!(
        "{} reachable pairs of {}; customer types are indexed by d = l*kappa + m",
        emb.pairs().len(),
        emb.kappa() * emb.kappa()
    ));
    let mut rows = Vec::new();
    for (r, from) in labels.iter().enumerate() {
        for (c, to) in labels.iter().enumerate() {
            rows.push(Row::new(from.clone(), to.clone(), "P".into(), model.transition()[(r, c)]));
        }
    }
    let pi = model.chain().stationary();
    for (r, from) in labels.iter().enumerate() {
        rows.push(Row::new(from.clone(), String::new(), "pi".into(), pi[r]));
    }
    Ok(rows)
}

fn time_text(t: Option<Time>) -> Option<String> {
    t.map(|t| match t {
        Time::Limit => "limit".to_string(),
        Time::At(x) => format_number(x),
    })
}

fn flatten(groups: Vec<Vec<Table>>) -> Vec<Row> {
    groups.iter().flatten().flat_map(Table::cells).collect()
}

fn simulation_note(cfg: &RunConfig) -> String {
    format!("simulation: {} replications per initial state, seed {}", cfg.sim.reps, cfg.sim.seed)
}

/// Executes the configured command.
pub fn run(cfg: &RunConfig) -> CliResult<Report> {
    let mut notes = Vec::new();
    let rows = match cfg.command {
        Command::EmbedInfo => embed_info(cfg, &mut notes)?,
        Command::Asymptotic | Command::Transient | Command::Mgf => {
            let t = cfg.t.ok_or_else(|| precondition("no time given"))?;
            flatten(exact(cfg, t, &mut notes)?)
        }
        Command::Simulate => {
            let Some(Time::At(t)) = cfg.t else {
                return Err(precondition("simulation needs a finite t"));
            };
            notes.push(simulation_note(cfg));
            flatten(simulated(cfg, t)?)
        }
        Command::Compare => {
            let Some(Time::At(t)) = cfg.t else {
                return Err(precondition("comparison needs a finite t"));
            };
            let exact = exact(cfg, Time::At(t), &mut notes)?;
            let sim = simulated(cfg, t)?;
            notes.push(simulation_note(cfg));
            exact.iter().zip(&sim).flat_map(|(e, s)| compare_rows(e, s)).collect()
        }
    };
    Ok(Report { command: cfg.command.name().into(), t: time_text(cfg.t), notes, rows })
}
