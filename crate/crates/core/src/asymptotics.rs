//! `t → ∞` limits of the joint moments and workload.
//!
//! Closed forms for exponential service are assembled from Laplace transforms:
//! `ψ̂(0,h) = (1-ℒ(h))/h · (I - ℒ(h)P)^{-1}` and `M̂ = (I - ℒ(h)P)^{-1} b̂`, with the
//! limit `(1/E(τ)) 1π ∫b`.

use nalgebra::{DMatrix, RowDVector};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::joint::{JointMatrix, Semantics};
use crate::kernel::ModelSpec;
use crate::quad::{integrate, QuadratureConfig};
use crate::transient::PsiZero;

/// Tail bound required of `∫ φ_i ψ̃(0,·)` before it is truncated.
const GENERAL_TAIL: f64 = 1e-8;

fn require_non_lattice(model: &ModelSpec) -> Result<()> {
    if model.interarrival().is_lattice() {
        return Err(Error::Precondition(
            "limits of this kind need non-lattice interarrivals; deterministic interarrivals are handled by the deterministic module"
                .into(),
        ));
    }
    Ok(())
}

/// `(I - cP)^{-1}` by LU solve, for `0 ≤ c < 1`.
pub fn resolvent(p: &DMatrix<f64>, c: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::Domain(format!("resolvent argument must lie in [0, 1), got {c}")));
    }
    let n = p.nrows();
    let a = DMatrix::<f64>::identity(n, n) - p * c;
    a.lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Singular(format!("I - {c}·P")))
}

fn psi_hat_matrix(model: &ModelSpec, h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("Laplace argument must be positive, got {h}")));
    }
    if h.is_infinite() {
        return Ok(DMatrix::zeros(model.len(), model.len()));
    }
    let c = model.interarrival().laplace(h)?;
    Ok(resolvent(model.transition(), c)? * ((1.0 - c) / h))
}

/// `ψ̂(0,h) = ∫_0^∞ e^{-ht} ψ̃(0,t) dt`.
pub fn psi_hat_zero(model: &ModelSpec, h: f64) -> Result<JointMatrix> {
    Ok(JointMatrix::new(model.space().clone(), Semantics::PsiZero, psi_hat_matrix(model, h)?))
}

/// Service law of dimension `i` as `φ_i(u) = a e^{-μu}`; `None` for `Zero`.
fn exponential_service(model: &ModelSpec, i: usize) -> Result<Option<(f64, f64)>> {
    let law = *model.service_of(i)?;
    if law == Distribution::Zero {
        return Ok(None);
    }
    match law.exponential_rate() {
        Some(mu) => Ok(Some((mu / (mu + model.delta()), mu))),
        None => Err(Error::UnsupportedService {
            dimension: i,
            reason: format!("closed-form limits need exponential service, got {law:?}; use the general limit or simulation"),
        }),
    }
}

fn outer(model: &ModelSpec, row: RowDVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(model.len(), model.len(), |_, c| row[c])
}

fn one_pi(model: &ModelSpec) -> RowDVector<f64> {
    model.chain().stationary().clone()
}

/// `b̂_i(h)` for exponential service: `ℒ(h) a_i P Δ_i ψ̂(0, μ_i + h)`.
pub fn b_hat_first(model: &ModelSpec, i: usize, h: f64) -> Result<DMatrix<f64>> {
    let n = model.len();
    let Some((a, mu)) = exponential_service(model, i)? else {
        return Ok(DMatrix::zeros(n, n));
    };
    let l = model.interarrival().laplace(h)?;
    Ok(model.transition() * model.delta_matrix(i)? * psi_hat_matrix(model, mu + h)? * (l * a))
}

/// `M̂_i(h) = (I - ℒ(h)P)^{-1} b̂_i(h)`.
pub fn m_hat_first(model: &ModelSpec, i: usize, h: f64) -> Result<DMatrix<f64>> {
    let c = model.interarrival().laplace(h)?;
    Ok(resolvent(model.transition(), c)? * b_hat_first(model, i, h)?)
}

/// Scalar limit of every row sum of `M_i(t)`: `E(X_i)/E(τ) · (1-ℒ^{L_i}(δ))/δ`.
pub fn limit_first_moment_scalar(model: &ModelSpec, i: usize) -> Result<f64> {
    require_non_lattice(model)?;
    let law = model.service_of(i)?;
    let delta = model.delta();
    let bracket = if delta == 0.0 { law.mean() } else { (1.0 - law.laplace(delta)?) / delta };
    Ok(model.chain().mean_batch(i)? / model.interarrival().mean() * bracket)
}

pub fn limit_first_moment_vector(model: &ModelSpec, i: usize) -> Result<nalgebra::DVector<f64>> {
    Ok(nalgebra::DVector::from_element(model.len(), limit_first_moment_scalar(model, i)?))
}

/// Scalar limit of every row sum of `W_i(t)`: `E(X_i) E(L_i²) / (2E(τ))`.
pub fn limit_workload_scalar(model: &ModelSpec, i: usize) -> Result<f64> {
    require_non_lattice(model)?;
    let law = model.service_of(i)?;
    Ok(model.chain().mean_batch(i)? * law.second_moment() / (2.0 * model.interarrival().mean()))
}

pub fn limit_workload_vector(model: &ModelSpec, i: usize) -> Result<nalgebra::DVector<f64>> {
    Ok(nalgebra::DVector::from_element(model.len(), limit_workload_scalar(model, i)?))
}

/// `lim M_i(t)` for exponential (or zero) service in dimension `i`.
pub fn limit_first_moment_joint(model: &ModelSpec, i: usize) -> Result<JointMatrix> {
    require_non_lattice(model)?;
    let n = model.len();
    let entries = match exponential_service(model, i)? {
        None => DMatrix::zeros(n, n),
        Some((a, mu)) => {
            let row = one_pi(model) * model.delta_matrix(i)? * psi_hat_matrix(model, mu)? * (a / model.interarrival().mean());
            outer(model, row)
        }
    };
    Ok(JointMatrix::new(model.space().clone(), Semantics::FirstMoment, entries))
}

/// `∫_0^∞ φ_{ii'}(u) ψ̃(0,u) du` and `∫ φ_i(u) M_{i'}(u) du` pieces for exponential service.
fn second_moment_integral(model: &ModelSpec, i: usize, i2: usize) -> Result<DMatrix<f64>> {
    let n = model.len();
    let ei = exponential_service(model, i)?;
    let ei2 = exponential_service(model, i2)?;
    let di = model.delta_matrix(i)?;
    let di2 = model.delta_matrix(i2)?;
    let mut total = DMatrix::zeros(n, n);
    if i == i2 {
        let Some((_, mu)) = ei else {
            return Ok(total);
        };
        let pair = mu / (mu + 2.0 * model.delta());
        let (a, _) = ei.expect("checked");
        total += &di * &di * psi_hat_matrix(model, mu)? * pair;
        total += &di * m_hat_first(model, i, mu)? * (2.0 * a);
        return Ok(total);
    }
    let (Some((ai, mui)), Some((ai2, mui2))) = (ei, ei2) else {
        return Ok(total);
    };
    total += &di * &di2 * psi_hat_matrix(model, mui + mui2)? * (ai * ai2);
    total += &di * m_hat_first(model, i2, mui)? * ai;
    total += &di2 * m_hat_first(model, i, mui2)? * ai2;
    Ok(total)
}

/// `lim M_{ii'}(t)` for exponential (or zero) service in both dimensions.
pub fn limit_second_moment_joint(model: &ModelSpec, i: usize, i2: usize) -> Result<JointMatrix> {
    require_non_lattice(model)?;
    let integral = second_moment_integral(model, i, i2)?;
    let row = one_pi(model) * integral / model.interarrival().mean();
    Ok(JointMatrix::new(model.space().clone(), Semantics::SecondMoment, outer(model, row)))
}

/// `lim W_i(t)` for exponential service.
pub fn limit_workload_joint(model: &ModelSpec, i: usize) -> Result<JointMatrix> {
    require_non_lattice(model)?;
    let law = *model.service_of(i)?;
    let Some(mu) = law.exponential_rate() else {
        return Err(Error::UnsupportedService {
            dimension: i,
            reason: format!("the closed-form workload limit needs exponential service, got {law:?}"),
        });
    };
    let row = one_pi(model) * model.delta_matrix(i)? * psi_hat_matrix(model, mu)? / (mu * model.interarrival().mean());
    Ok(JointMatrix::new(model.space().clone(), Semantics::Workload, outer(model, row)))
}

/// `lim M_i(t) = (1/E(τ)) 1π Δ_i ∫_0^∞ φ_i(u) ψ̃(0,u) du` for any service law.
pub fn limit_first_moment_general(model: &ModelSpec, i: usize, quad: &QuadratureConfig) -> Result<JointMatrix> {
    require_non_lattice(model)?;
    let law = *model.service_of(i)?;
    let n = model.len();
    let di = model.delta_matrix(i)?;
    let scale = (model.transition() * &di).amax();
    if law == Distribution::Zero || scale == 0.0 {
        return Ok(JointMatrix::new(model.space().clone(), Semantics::FirstMoment, DMatrix::zeros(n, n)));
    }
    let delta = model.delta();
    let tau_mean = model.interarrival().mean();
    let cap = tau_mean * f64::from(1u32 << 20);
    let mut horizon = law.mean().max(tau_mean);
    loop {
        let tail = law.truncated_discount(delta, horizon)? * scale;
        if tail < GENERAL_TAIL && law.survival(horizon) * scale < GENERAL_TAIL {
            break;
        }
        if horizon >= cap {
            return Err(Error::Convergence(format!(
                "service tail still {tail:e} at horizon {horizon}; the limit integral cannot be truncated"
            )));
        }
        horizon = (horizon * 2.0).min(cap);
    }
    let psi0 = PsiZero::new(model, horizon, quad)?;
    let failure = std::cell::RefCell::new(None);
    let mut pieces = vec![0.0];
    if let Some(c) = law.upper_bound() {
        pieces.push(c.min(horizon));
    }
    pieces.push(horizon);
    pieces.dedup();
    let mut acc = DMatrix::zeros(n, n);
    for w in pieces.windows(2) {
        acc += integrate(
            |u: f64| match law.truncated_discount(delta, u).and_then(|phi| Ok(psi0.at(u)? * phi)) {
                Ok(m) => m,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    DMatrix::zeros(n, n)
                }
            },
            w[0],
            w[1],
            quad,
        )?;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let row = one_pi(model) * di * acc / tau_mean;
    Ok(JointMatrix::new(model.space().clone(), Semantics::FirstMoment, outer(model, row)))
}
