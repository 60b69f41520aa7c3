//! Monte Carlo engine for `(Z̃(t), X_{N_t}, D(t))` and joint-state estimators.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{ModelSpec, SVector};

/// One simulated path observed at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub z_tilde: Vec<f64>,
    pub terminal_state: usize,
    pub workload: Vec<f64>,
    pub arrivals_used: u64,
}

/// Cumulative transition rows for inverse-cdf sampling.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    cumulative: Vec<Vec<f64>>,
}

impl ChainSampler {
    pub fn new(p: &DMatrix<f64>) -> Self {
        let cumulative = p
            .row_iter()
            .map(|r| {
                let mut acc = 0.0;
                r.iter()
                    .map(|v| {
                        acc += v;
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { cumulative }
    }

    pub fn next<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let row = &self.cumulative[from];
        let u: f64 = rng.random::<f64>() * row[row.len() - 1];
        row.iter().position(|&c| u < c).unwrap_or(row.len() - 1)
    }
}

/// Simulates arrivals on `[0, t]` from `X_0 = x`.
pub fn simulate_path<R: Rng + ?Sized>(model: &ModelSpec, t: f64, x: usize, rng: &mut R) -> PathSample {
    simulate_path_with(model, &ChainSampler::new(model.transition()), t, x, rng)
}

pub fn simulate_path_with<R: Rng + ?Sized>(model: &ModelSpec, sampler: &ChainSampler, t: f64, x: usize, rng: &mut R) -> PathSample {
    let k = model.k();
    let delta = model.delta();
    let states = model.space().states();
    let mut z_tilde = vec![0.0; k];
    let mut workload = vec![0.0; k];
    let mut state = x;
    let mut clock = 0.0;
    let mut arrivals = 0u64;
    loop {
        clock += model.interarrival().sample(rng);
        if clock > t {
            break;
        }
        arrivals += 1;
        state = sampler.next(state, rng);
        let batch = &states[state];
        for (j, law) in model.service().iter().enumerate() {
            let l = law.sample(rng);
            let end = clock + l;
            if end > t && batch[j] > 0 {
                let xj = f64::from(batch[j]);
                z_tilde[j] += xj * (-delta * (end - t)).exp();
                workload[j] += xj * (end - t);
            }
        }
    }
    PathSample { z_tilde, terminal_state: state, workload, arrivals_used: arrivals }
}

/// Quantities estimated jointly with the terminal state. Indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    FirstMoment(usize),
    SecondMoment(usize, usize),
    Workload(usize),
    Mgf(SVector),
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Self::FirstMoment(i) => format!("M_{}", i + 1),
            Self::SecondMoment(i, j) => format!("M_{}{}", i + 1, j + 1),
            Self::Workload(i) => format!("W_{}", i + 1),
            Self::Mgf(_) => "mgf".into(),
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        let k = model.k();
        let check = |i: usize| if i < k { Ok(()) } else { Err(Error::Dimension { index: i, k }) };
        match self {
            Self::FirstMoment(i) | Self::Workload(i) => check(*i),
            Self::SecondMoment(i, j) => check(*i).and(check(*j)),
            Self::Mgf(s) if s.len() != k => Err(Error::Shape(format!("s has {} components, expected {k}", s.len()))),
            Self::Mgf(_) => Ok(()),
        }
    }

    fn value(&self, path: &PathSample) -> Complex64 {
        match self {
            Self::FirstMoment(i) => path.z_tilde[*i].into(),
            Self::SecondMoment(i, j) => (path.z_tilde[*i] * path.z_tilde[*j]).into(),
            Self::Workload(i) => path.workload[*i].into(),
            Self::Mgf(s) => (0..s.len()).map(|j| s.component(j) * path.z_tilde[j]).sum::<Complex64>().exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialStates {
    All,
    Fixed(usize),
}

/// Cellwise sample means and standard errors; rows follow `EstimateReport::initial_states`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    pub target: Target,
    pub mean: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
    /// Imaginary parts, for complex-valued targets.
    pub imag: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// Estimates of the unconditional (summed over terminal states) value per row.
    pub total_mean: DVector<f64>,
    pub total_stderr: DVector<f64>,
    pub total_imag: Option<(DVector<f64>, DVector<f64>)>,
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub t: f64,
    pub reps: usize,
    pub seed: u64,
    pub initial_states: Vec<usize>,
    pub estimates: Vec<TargetEstimate>,
    pub elapsed: Duration,
}

impl PartialEq for EstimateReport {
    /// Equality ignores the elapsed time.
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t
            && self.reps == other.reps
            && self.seed == other.seed
            && self.initial_states == other.initial_states
            && self.estimates == other.estimates
    }
}

/// Stream for replication `r` from initial state `x`.
pub fn replication_rng(seed: u64, x: usize, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((x as u64) << 32) | r as u64);
    rng
}

#[derive(Default, Clone)]
struct Moments {
    re: f64,
    im: f64,
    re2: f64,
    im2: f64,
}

impl Moments {
    fn push(&mut self, v: Complex64) {
        self.re += v.re;
        self.im += v.im;
        self.re2 += v.re * v.re;
        self.im2 += v.im * v.im;
    }

    /// (mean, standard error) of real and imaginary parts.
    fn finish(&self, n: f64) -> ((f64, f64), (f64, f64)) {
        let stat = |s: f64, s2: f64| {
            let mean = s / n;
            let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
            (mean, (var / n).sqrt())
        };
        (stat(self.re, self.re2), stat(self.im, self.im2))
    }
}

/// Runs `reps` replications per initial state and estimates every target.
pub fn estimate(
    model: &ModelSpec,
    t: f64,
    targets: &[Target],
    reps: usize,
    seed: u64,
    initial: InitialStates,
) -> Result<EstimateReport> {
    if reps < 2 {
        return Err(Error::Domain(format!("at least 2 replications are needed, got {reps}")));
    }
    if targets.is_empty() {
        return Err(Error::Domain("no estimation targets given".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be finite and non-negative, got {t}")));
    }
    for target in targets {
        target.validate(model)?;
    }
    let n = model.len();
    let initial_states = match initial {
        InitialStates::All => (0..n).collect::<Vec<_>>(),
        InitialStates::Fixed(x) if x < n => vec![x],
        InitialStates::Fixed(x) => return Err(Error::Domain(format!("initial state {x} out of range ({n} states)"))),
    };
    let started = Instant::now();
    let sampler = ChainSampler::new(model.transition());
    let complex_target: Vec<bool> = targets.iter().map(|t| matches!(t, Target::Mgf(_))).collect();
    let rows = initial_states.len();
    let mut cells: Vec<Vec<Moments>> = vec![vec![Moments::default(); rows * n]; targets.len()];
    let mut totals: Vec<Vec<Moments>> = vec![vec![Moments::default(); rows]; targets.len()];

    for (row, &x) in initial_states.iter().enumerate() {
        let paths: Vec<PathSample> = (0..reps)
            .into_par_iter()
            .map(|r| simulate_path_with(model, &sampler, t, x, &mut replication_rng(seed, x, r)))
            .collect();
        for path in &paths {
            for (ti, target) in targets.iter().enumerate() {
                let v = target.value(path);
                // the indicator is zero in every other column
                for y in 0..n {
                    let cell = &mut cells[ti][row * n + y];
                    cell.push(if y == path.terminal_state { v } else { Complex64::new(0.0, 0.0) });
                }
                totals[ti][row].push(v);
            }
        }
    }

    let count = reps as f64;
    let estimates = targets
        .iter()
        .enumerate()
        .map(|(ti, target)| {
            let mut mean = DMatrix::zeros(rows, n);
            let mut stderr = DMatrix::zeros(rows, n);
            let mut mean_im = DMatrix::zeros(rows, n);
            let mut stderr_im = DMatrix::zeros(rows, n);
            for row in 0..rows {
                for y in 0..n {
                    let ((m, s), (mi, si)) = cells[ti][row * n + y].finish(count);
                    mean[(row, y)] = m;
                    stderr[(row, y)] = s;
                    mean_im[(row, y)] = mi;
                    stderr_im[(row, y)] = si;
                }
            }
            let mut total_mean = DVector::zeros(rows);
            let mut total_stderr = DVector::zeros(rows);
            let mut total_mean_im = DVector::zeros(rows);
            let mut total_stderr_im = DVector::zeros(rows);
            for row in 0..rows {
                let ((m, s), (mi, si)) = totals[ti][row].finish(count);
                total_mean[row] = m;
                total_stderr[row] = s;
                total_mean_im[row] = mi;
                total_stderr_im[row] = si;
            }
            let is_complex = complex_target[ti];
            TargetEstimate {
                target: target.clone(),
                mean,
                stderr,
                imag: is_complex.then_some((mean_im, stderr_im)),
                total_mean,
                total_stderr,
                total_imag: is_complex.then_some((total_mean_im, total_stderr_im)),
            }
        })
        .collect();
    Ok(EstimateReport { t, reps, seed, initial_states, estimates, elapsed: started.elapsed() })
}
