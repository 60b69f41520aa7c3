//! Finite-horizon quantities: `ψ̃(0,r)`, the Poisson mgf and moment ODEs, and the
//! Markov renewal solver used for general interarrival laws.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::joint::{JointMatrix, Semantics};
use crate::kernel::{Kernel, ModelSpec, SVector};
use crate::quad::QuadratureConfig;

/// Poisson tail mass left out of a uniformization sum.
const UNIFORMIZATION_TAIL: f64 = 1e-15;
/// Largest `λr` handled by one uniformization block.
const UNIFORMIZATION_BLOCK: f64 = 20.0;
/// Interarrival tail mass below which the renewal kernel is truncated.
const KERNEL_TAIL: f64 = 1e-17;

/// Values of a matrix function on a uniform grid `0, h, 2h, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    step: f64,
    values: Vec<DMatrix<f64>>,
    semantics: Semantics,
}

impl Trajectory {
    pub fn new(step: f64, values: Vec<DMatrix<f64>>, semantics: Semantics) -> Result<Self> {
        if !(step > 0.0) || values.is_empty() {
            return Err(Error::Domain("a trajectory needs a positive step and at least one value".into()));
        }
        let (r, c) = values[0].shape();
        if values.iter().any(|v| v.shape() != (r, c)) {
            return Err(Error::Shape("trajectory values differ in shape".into()));
        }
        Ok(Self { step, values, semantics })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |n| n as f64 * self.step)
    }

    pub fn last(&self) -> &DMatrix<f64> {
        self.values.last().expect("non-empty")
    }

    /// Linear interpolation; times past the horizon are refused.
    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        let horizon = self.horizon();
        if !(t >= 0.0) || t > horizon * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::Coverage { horizon, requested: t });
        }
        let x = t / self.step;
        let n = (x.floor() as usize).min(self.values.len() - 1);
        let frac = x - n as f64;
        if n + 1 >= self.values.len() || frac <= 0.0 {
            return Ok(self.values[n].clone());
        }
        Ok(&self.values[n] * (1.0 - frac) + &self.values[n + 1] * frac)
    }
}

/// Default grid step: `quad.ode_step`, else `min(1e-3, E(τ)/100)`.
pub fn default_step(model: &ModelSpec, quad: &QuadratureConfig) -> f64 {
    quad.ode_step.unwrap_or_else(|| (model.interarrival().mean() / 100.0).min(1e-3))
}

/// `e^{x(P-I)}` by uniformization.
pub fn expm_uniformized(p: &DMatrix<f64>, x: f64) -> Result<DMatrix<f64>> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("uniformization needs a finite non-negative argument, got {x}")));
    }
    let n = p.nrows();
    if x == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let blocks = (x / UNIFORMIZATION_BLOCK).ceil().max(1.0) as usize;
    let y = x / blocks as f64;
    let mut weight = (-y).exp();
    let mut cumulative = weight;
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut block = &power * weight;
    let mut j = 0usize;
    while 1.0 - cumulative > UNIFORMIZATION_TAIL && j < 10_000 {
        j += 1;
        weight *= y / j as f64;
        cumulative += weight;
        power = &power * p;
        block += &power * weight;
    }
    let mut out = block.clone();
    for _ in 1..blocks {
        out = &out * &block;
    }
    Ok(out)
}

/// `ψ̃(0,·)` evaluator for the supported interarrival laws.
#[derive(Debug, Clone)]
pub enum PsiZero {
    Poisson { rate: f64, p: DMatrix<f64> },
    Lattice { period: f64, p: DMatrix<f64> },
    Grid(Trajectory),
}

impl PsiZero {
    /// Covers `[0, horizon]`; general laws are renewal-solved at the default step.
    pub fn new(model: &ModelSpec, horizon: f64, quad: &QuadratureConfig) -> Result<Self> {
        let p = model.transition().clone();
        if let Some(rate) = model.poisson_rate() {
            return Ok(Self::Poisson { rate, p });
        }
        if let Distribution::Deterministic { value } = *model.interarrival() {
            return Ok(Self::Lattice { period: value, p });
        }
        let h = default_step(model, quad);
        let n = p.nrows();
        let tau = *model.interarrival();
        let traj = solve_markov_renewal(model, |t| Ok(DMatrix::identity(n, n) * tau.survival(t)), h, horizon.max(h))?;
        Ok(Self::Grid(Trajectory { semantics: Semantics::PsiZero, ..traj }))
    }

    pub fn at(&self, r: f64) -> Result<DMatrix<f64>> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("r must be non-negative, got {r}")));
        }
        match self {
            Self::Poisson { rate, p } => expm_uniformized(p, rate * r),
            Self::Lattice { period, p } => {
                let n = (r / period + 1e-12).floor() as usize;
                Ok(p.pow(n as u32))
            }
            Self::Grid(traj) => traj.at(r),
        }
    }
}

/// `ψ̃(0,r) = E(P^{N_r})`.
pub fn psi_tilde_zero(model: &ModelSpec, r: f64, quad: &QuadratureConfig) -> Result<JointMatrix> {
    let m = PsiZero::new(model, r, quad)?.at(r)?;
    Ok(JointMatrix::new(model.space().clone(), Semantics::PsiZero, m))
}

/// Classical RK4 on a list of matrices, `n` equal steps over `[0, t_end]`.
fn rk4<T>(
    y0: Vec<DMatrix<T>>,
    t_end: f64,
    n: usize,
    mut f: impl FnMut(f64, &[DMatrix<T>]) -> Result<Vec<DMatrix<T>>>,
    mut observe: impl FnMut(&[DMatrix<T>]),
) -> Result<Vec<DMatrix<T>>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let h = if n == 0 { 0.0 } else { t_end / n as f64 };
    let hh = T::from_real(h);
    let half = T::from_real(0.5 * h);
    let sixth = T::from_real(h / 6.0);
    let two = T::from_real(2.0);
    let shift = |y: &[DMatrix<T>], k: &[DMatrix<T>], c: T| -> Vec<DMatrix<T>> {
        y.iter().zip(k).map(|(a, b)| a + b * c).collect()
    };
    let mut y = y0;
    observe(&y);
    for step in 0..n {
        let t = step as f64 * h;
        let k1 = f(t, &y)?;
        let k2 = f(t + 0.5 * h, &shift(&y, &k1, half))?;
        let k3 = f(t + 0.5 * h, &shift(&y, &k2, half))?;
        let k4 = f(t + h, &shift(&y, &k3, hh))?;
        for (j, yj) in y.iter_mut().enumerate() {
            let incr = &k1[j] + (&k2[j] + &k3[j]) * two + &k4[j];
            *yj += incr * sixth;
        }
        if y.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { t: t + h });
        }
        observe(&y);
    }
    Ok(y)
}

fn require_poisson(model: &ModelSpec) -> Result<f64> {
    model.poisson_rate().ok_or_else(|| {
        Error::Precondition(format!(
            "this computation needs exponential interarrivals, got {:?}; use the renewal solver or the simulator",
            model.interarrival()
        ))
    })
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be finite and non-negative, got {t}")));
    }
    Ok(())
}

fn ode_steps(model: &ModelSpec, t: f64, quad: &QuadratureConfig) -> usize {
    let h = default_step(model, quad);
    ((t / h) - 1e-9).ceil().max(0.0) as usize
}

/// `ψ̃(s,t)` for Poisson arrivals by RK4 on `ψ' = λ(Pπ̃(s,t) - I)ψ`.
pub fn transient_mgf_poisson(model: &ModelSpec, s: &SVector, t: f64, quad: &QuadratureConfig) -> Result<JointMatrix<Complex64>> {
    check_time(t)?;
    let lambda = require_poisson(model)?;
    let kernel = Kernel::new(model, s)?;
    let n = model.len();
    let id = DMatrix::<Complex64>::identity(n, n);
    let lam = Complex64::new(lambda, 0.0);
    let out = rk4(
        vec![id],
        t,
        ode_steps(model, t, quad),
        |r, y| {
            let a = kernel.p_pi_tilde(r)?;
            Ok(vec![(&a * &y[0] - &y[0]) * lam])
        },
        |_| {},
    )?;
    Ok(JointMatrix::new(model.space().clone(), Semantics::Mgf, out.into_iter().next().expect("one state")))
}

/// Integrates `ψ0' = λ(P-I)ψ0` jointly with moment equations whose forcing is
/// `λ P · g(t, ψ0, moments)`; returns the final state and optionally every grid value.
fn poisson_system(
    model: &ModelSpec,
    t: f64,
    quad: &QuadratureConfig,
    extra: usize,
    forcing: impl Fn(f64, &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>>,
    record: Option<usize>,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    check_time(t)?;
    let lambda = require_poisson(model)?;
    let n = model.len();
    let p = model.transition().clone();
    let mut y0 = vec![DMatrix::<f64>::identity(n, n)];
    y0.extend((0..extra).map(|_| DMatrix::<f64>::zeros(n, n)));
    let mut recorded = Vec::new();
    let out = rk4(
        y0,
        t,
        ode_steps(model, t, quad),
        |r, y| {
            let g = forcing(r, y)?;
            let mut dy = Vec::with_capacity(y.len());
            for (j, m) in y.iter().enumerate() {
                let mut d = &p * m - m;
                if j > 0 {
                    d += &g[j - 1];
                }
                dy.push(d * lambda);
            }
            Ok(dy)
        },
        |y| {
            if let Some(idx) = record {
                recorded.push(y[idx].clone());
            }
        },
    )?;
    Ok((out, recorded))
}

fn first_moment_forcing<'a>(
    model: &'a ModelSpec,
    i: usize,
    weight: impl Fn(f64) -> Result<f64> + 'a,
) -> Result<impl Fn(f64, &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> + 'a> {
    let p_delta = model.transition() * model.delta_matrix(i)?;
    Ok(move |r: f64, y: &[DMatrix<f64>]| Ok(vec![&p_delta * &y[0] * weight(r)?]))
}

/// `M_i(t)` for Poisson arrivals.
pub fn transient_first_moment_poisson(model: &ModelSpec, i: usize, t: f64, quad: &QuadratureConfig) -> Result<JointMatrix> {
    let law = *model.service_of(i)?;
    let delta = model.delta();
    let forcing = first_moment_forcing(model, i, move |r| law.truncated_discount(delta, r))?;
    let (out, _) = poisson_system(model, t, quad, 1, forcing, None)?;
    Ok(JointMatrix::new(model.space().clone(), Semantics::FirstMoment, out[1].clone()))
}

/// `M_i(·)` on the ODE grid of `[0, t]`.
pub fn first_moment_poisson_trajectory(model: &ModelSpec, i: usize, t: f64, quad: &QuadratureConfig) -> Result<Trajectory> {
    let law = *model.service_of(i)?;
    let delta = model.delta();
    let forcing = first_moment_forcing(model, i, move |r| law.truncated_discount(delta, r))?;
    let (_, values) = poisson_system(model, t, quad, 1, forcing, Some(1))?;
    let n = values.len() - 1;
    let step = if n == 0 { default_step(model, quad) } else { t / n as f64 };
    Trajectory::new(step, values, Semantics::FirstMoment)
}

/// `W_i(t)`, expected remaining service in dimension `i` jointly with the terminal state.
pub fn transient_workload_poisson(model: &ModelSpec, i: usize, t: f64, quad: &QuadratureConfig) -> Result<JointMatrix> {
    let law = *model.service_of(i)?;
    let forcing = first_moment_forcing(model, i, move |r| law.residual_expectation(r))?;
    let (out, _) = poisson_system(model, t, quad, 1, forcing, None)?;
    Ok(JointMatrix::new(model.space().clone(), Semantics::Workload, out[1].clone()))
}

/// `M_{ii'}(t)` for Poisson arrivals, integrating `M_i`, `M_{i'}` alongside.
pub fn transient_second_moment_poisson(
    model: &ModelSpec,
    i: usize,
    i2: usize,
    t: f64,
    quad: &QuadratureConfig,
) -> Result<JointMatrix> {
    let m = second_moment_poisson_impl(model, i, i2, t, quad, false)?.0;
    Ok(JointMatrix::new(model.space().clone(), Semantics::SecondMoment, m))
}

/// `M_{ii'}(·)` on the ODE grid of `[0, t]`.
pub fn second_moment_poisson_trajectory(
    model: &ModelSpec,
    i: usize,
    i2: usize,
    t: f64,
    quad: &QuadratureConfig,
) -> Result<Trajectory> {
    let values = second_moment_poisson_impl(model, i, i2, t, quad, true)?.1;
    let n = values.len() - 1;
    let step = if n == 0 { default_step(model, quad) } else { t / n as f64 };
    Trajectory::new(step, values, Semantics::SecondMoment)
}

fn second_moment_poisson_impl(
    model: &ModelSpec,
    i: usize,
    i2: usize,
    t: f64,
    quad: &QuadratureConfig,
    record: bool,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let li = *model.service_of(i)?;
    let li2 = *model.service_of(i2)?;
    let delta = model.delta();
    let p = model.transition().clone();
    let di = model.delta_matrix(i)?;
    let di2 = model.delta_matrix(i2)?;
    let p_di = &p * &di;
    let p_di2 = &p * &di2;
    let p_pair = &p * &di * &di2;
    if i == i2 {
        // state: ψ0, M_i, M_ii
        let forcing = |r: f64, y: &[DMatrix<f64>]| -> Result<Vec<DMatrix<f64>>> {
            let phi = li.truncated_discount(delta, r)?;
            let phi2 = li.truncated_discount_pair(&li, delta, r, true)?;
            let first = &p_di * &y[0] * phi;
            let second = &p_pair * &y[0] * phi2 + &p_di * &y[1] * (2.0 * phi);
            Ok(vec![first, second])
        };
        let (out, rec) = poisson_system(model, t, quad, 2, forcing, record.then_some(2))?;
        return Ok((out[2].clone(), rec));
    }
    // state: ψ0, M_i, M_i', M_ii'
    let forcing = |r: f64, y: &[DMatrix<f64>]| -> Result<Vec<DMatrix<f64>>> {
        let phi = li.truncated_discount(delta, r)?;
        let phi2 = li2.truncated_discount(delta, r)?;
        let pair = li.truncated_discount_pair(&li2, delta, r, false)?;
        let a = &p_di * &y[0] * phi;
        let b = &p_di2 * &y[0] * phi2;
        let c = &p_pair * &y[0] * pair + &p_di * &y[2] * phi + &p_di2 * &y[1] * phi2;
        Ok(vec![a, b, c])
    };
    let (out, rec) = poisson_system(model, t, quad, 3, forcing, record.then_some(3))?;
    Ok((out[3].clone(), rec))
}

/// Solves `M = b + (PF)⋆M` on the grid `0, h, …, ≥T`.
///
/// Stieltjes trapezoid against the cdf increments, implicit in the first cell;
/// deterministic interarrivals are handled as exact atoms (their value must be a
/// multiple of `h`).
pub fn solve_markov_renewal(
    model: &ModelSpec,
    mut forcing: impl FnMut(f64) -> Result<DMatrix<f64>>,
    h: f64,
    horizon: f64,
) -> Result<Trajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("renewal step must be positive, got {h}")));
    }
    if !(horizon >= h) || !horizon.is_finite() {
        return Err(Error::Domain(format!("renewal horizon must be at least the step, got {horizon}")));
    }
    let steps = (horizon / h - 1e-9).ceil() as usize;
    let p = model.transition();
    let n = p.nrows();
    let tau = *model.interarrival();
    let mut values: Vec<DMatrix<f64>> = Vec::with_capacity(steps + 1);

    let eval = |forcing: &mut dyn FnMut(f64) -> Result<DMatrix<f64>>, t: f64| -> Result<DMatrix<f64>> {
        let b = forcing(t)?;
        if b.shape() != (n, n) {
            return Err(Error::Shape(format!("forcing returned {:?}, expected ({n}, {n})", b.shape())));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        Ok(b)
    };

    if let Some(c) = tau.upper_bound().filter(|_| tau.is_lattice()) {
        let lag = (c / h).round() as usize;
        if lag == 0 || ((lag as f64) * h - c).abs() > 1e-9 * c.max(1.0) {
            return Err(Error::Domain(format!("grid step {h} must divide the deterministic interarrival {c}")));
        }
        for m in 0..=steps {
            let t = m as f64 * h;
            let mut v = eval(&mut forcing, t)?;
            if m >= lag {
                v += p * &values[m - lag];
            }
            values.push(v);
        }
        return Trajectory::new(h, values, Semantics::FirstMoment);
    }

    let mut increments = Vec::new();
    let mut prev = 0.0;
    for k in 1..=steps {
        let f = tau.cdf(k as f64 * h);
        increments.push(f - prev);
        prev = f;
        if 1.0 - f < KERNEL_TAIL {
            break;
        }
    }
    let w1 = increments.first().copied().unwrap_or(0.0) * 0.5;
    let lhs = DMatrix::<f64>::identity(n, n) - p * w1;
    let lu = lhs.lu();
    for m in 0..=steps {
        let t = m as f64 * h;
        let b = eval(&mut forcing, t)?;
        if m == 0 {
            values.push(b);
            continue;
        }
        let mut acc = &values[m - 1] * w1;
        for (k, dfk) in increments.iter().enumerate().skip(1) {
            let k = k + 1;
            if k > m {
                break;
            }
            acc += (&values[m - k] + &values[m - k + 1]) * (0.5 * dfk);
        }
        let rhs = b + p * acc;
        let v = lu.solve(&rhs).ok_or_else(|| Error::Singular("renewal step".into()))?;
        values.push(v);
    }
    Trajectory::new(h, values, Semantics::FirstMoment)
}

/// `b_i(t) = ∫_0^t φ_i(t-y) P Δ_i ψ̃(0,t-y) dF(y)`.
pub struct ForcingFirst<'a> {
    model: &'a ModelSpec,
    law: Distribution,
    p_delta: DMatrix<f64>,
    psi0: &'a PsiZero,
    quad: QuadratureConfig,
    weight: fn(&Distribution, f64, f64) -> Result<f64>,
}

fn discount_weight(law: &Distribution, delta: f64, r: f64) -> Result<f64> {
    law.truncated_discount(delta, r)
}

fn residual_weight(law: &Distribution, _delta: f64, r: f64) -> Result<f64> {
    law.residual_expectation(r)
}

impl<'a> ForcingFirst<'a> {
    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        let delta = self.model.delta();
        let n = self.p_delta.nrows();
        if self.law == Distribution::Zero {
            return Ok(DMatrix::zeros(n, n));
        }
        let failure = std::cell::RefCell::new(None);
        let value = self.model.interarrival().expect_below(
            t,
            |y| {
                let r = (t - y).max(0.0);
                let w = (self.weight)(&self.law, delta, r);
                match w.and_then(|w| Ok(&self.p_delta * self.psi0.at(r)? * w)) {
                    Ok(m) => m,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        DMatrix::zeros(n, n)
                    }
                }
            },
            &self.quad,
        )?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

/// Forcing of the first-moment renewal equation.
pub fn forcing_b_first<'a>(model: &'a ModelSpec, i: usize, psi0: &'a PsiZero, quad: &QuadratureConfig) -> Result<ForcingFirst<'a>> {
    let law = *model.service_of(i)?;
    let p_delta = model.transition() * model.delta_matrix(i)?;
    Ok(ForcingFirst { model, law, p_delta, psi0, quad: *quad, weight: discount_weight })
}

/// Forcing of the workload renewal equation (residual service in place of the discount).
pub fn forcing_workload<'a>(model: &'a ModelSpec, i: usize, psi0: &'a PsiZero, quad: &QuadratureConfig) -> Result<ForcingFirst<'a>> {
    let law = *model.service_of(i)?;
    let p_delta = model.transition() * model.delta_matrix(i)?;
    Ok(ForcingFirst { model, law, p_delta, psi0, quad: *quad, weight: residual_weight })
}

/// `b_{ii'}(t)` from `ψ̃(0,·)` and first-moment trajectories.
pub struct ForcingSecond<'a> {
    model: &'a ModelSpec,
    i: usize,
    i2: usize,
    p: DMatrix<f64>,
    di: DMatrix<f64>,
    di2: DMatrix<f64>,
    psi0: &'a PsiZero,
    m_i: &'a Trajectory,
    m_i2: &'a Trajectory,
    quad: QuadratureConfig,
}

impl<'a> ForcingSecond<'a> {
    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        let horizon = self.m_i.horizon().min(self.m_i2.horizon());
        if t > horizon * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::Coverage { horizon, requested: t });
        }
        let delta = self.model.delta();
        let li = self.model.service()[self.i];
        let li2 = self.model.service()[self.i2];
        let same = self.i == self.i2;
        let n = self.p.nrows();
        let failure = std::cell::RefCell::new(None);
        let inner = |r: f64| -> Result<DMatrix<f64>> {
            let pair = li.truncated_discount_pair(&li2, delta, r, same)?;
            let phi = li.truncated_discount(delta, r)?;
            let phi2 = li2.truncated_discount(delta, r)?;
            let mut m = &self.di * &self.di2 * self.psi0.at(r)? * pair;
            if phi != 0.0 {
                m += &self.di * self.m_i2.at(r)? * phi;
            }
            if phi2 != 0.0 {
                m += &self.di2 * self.m_i.at(r)? * phi2;
            }
            Ok(&self.p * m)
        };
        let value = self.model.interarrival().expect_below(
            t,
            |y| match inner((t - y).max(0.0)) {
                Ok(m) => m,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    DMatrix::zeros(n, n)
                }
            },
            &self.quad,
        )?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }
}

/// Forcing of the second-moment renewal equation.
#[allow(clippy::too_many_arguments)]
pub fn forcing_b_second<'a>(
    model: &'a ModelSpec,
    i: usize,
    i2: usize,
    psi0: &'a PsiZero,
    m_i: &'a Trajectory,
    m_i2: &'a Trajectory,
    quad: &QuadratureConfig,
) -> Result<ForcingSecond<'a>> {
    model.service_of(i)?;
    model.service_of(i2)?;
    Ok(ForcingSecond {
        model,
        i,
        i2,
        p: model.transition().clone(),
        di: model.delta_matrix(i)?,
        di2: model.delta_matrix(i2)?,
        psi0,
        m_i,
        m_i2,
        quad: *quad,
    })
}

/// `M_i(·)` on `[0, T]` for any interarrival law via the renewal equation.
pub fn first_moment_renewal(model: &ModelSpec, i: usize, horizon: f64, quad: &QuadratureConfig) -> Result<Trajectory> {
    let h = default_step(model, quad);
    let psi0 = PsiZero::new(model, horizon, quad)?;
    let b = forcing_b_first(model, i, &psi0, quad)?;
    solve_markov_renewal(model, |t| b.at(t), h, horizon)
}
