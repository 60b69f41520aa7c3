//! Unit deterministic interarrivals: the mgf is a finite matrix product.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::joint::{JointMatrix, Semantics};
use crate::kernel::{Kernel, ModelSpec, SMode, SVector};

/// Cap on the number of kernel factors in a truncated infinite product.
const MAX_FACTORS: u64 = 1_000_000;

fn require_unit_lattice(model: &ModelSpec) -> Result<()> {
    match *model.interarrival() {
        Distribution::Deterministic { value } if value == 1.0 => Ok(()),
        Distribution::Deterministic { value } => Err(Error::Precondition(format!(
            "deterministic interarrival {value} must be rescaled to 1: divide every time parameter by {value} and multiply every rate and δ by it"
        ))),
        other => Err(Error::Precondition(format!("unit deterministic interarrivals required, got {other:?}"))),
    }
}

/// `ψ̃(s,t) = P π̃(s,t-1) P π̃(s,t-2) ··· P π̃(s,0)`, the transpose of `Π_{m<t} Q̃(s,m)`.
pub fn transient_mgf_deterministic(model: &ModelSpec, s: &SVector, t: u64) -> Result<JointMatrix<Complex64>> {
    require_unit_lattice(model)?;
    let kernel = Kernel::new(model, s)?;
    let n = model.len();
    let mut acc = DMatrix::<Complex64>::identity(n, n);
    for m in (0..t).rev() {
        acc = acc * kernel.p_pi_tilde(m as f64)?;
    }
    Ok(JointMatrix::new(model.space().clone(), Semantics::Mgf, acc))
}

/// `M_i(t) = Σ_{j=1}^t P^j φ_i(t-j) Δ_i P^{t-j}` for integer `t`.
pub fn transient_first_moment_deterministic(model: &ModelSpec, i: usize, t: u64) -> Result<JointMatrix> {
    require_unit_lattice(model)?;
    let law = *model.service_of(i)?;
    let p = model.transition();
    let di = model.delta_matrix(i)?;
    let n = model.len();
    let mut powers = vec![DMatrix::<f64>::identity(n, n)];
    for j in 1..=t as usize {
        powers.push(&powers[j - 1] * p);
    }
    let mut acc = DMatrix::zeros(n, n);
    for j in 1..=t as usize {
        let phi = law.truncated_discount(model.delta(), (t as usize - j) as f64)?;
        if phi != 0.0 {
            acc += &powers[j] * &di * &powers[t as usize - j] * phi;
        }
    }
    Ok(JointMatrix::new(model.space().clone(), Semantics::FirstMoment, acc))
}

/// Smallest integer `M` with `π̃(s,m) = I` for all `m ≥ M`, when every service law is bounded.
pub fn bounded_service_horizon(model: &ModelSpec) -> Option<u64> {
    let mut horizon = 0u64;
    for law in model.service() {
        let c = law.upper_bound()?;
        horizon = horizon.max(c.ceil() as u64);
    }
    Some(horizon)
}

/// Period of an irreducible chain (gcd of cycle lengths through state 0).
pub fn chain_period(p: &DMatrix<f64>) -> u64 {
    let n = p.nrows();
    let mut level = vec![None::<u64>; n];
    level[0] = Some(0);
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut g = 0u64;
    while let Some(u) = queue.pop_front() {
        let lu = level[u].expect("visited");
        for v in 0..n {
            if p[(u, v)] <= 0.0 {
                continue;
            }
            match level[v] {
                None => {
                    level[v] = Some(lu + 1);
                    queue.push_back(v);
                }
                Some(lv) => g = gcd(g, (lu + 1).abs_diff(lv)),
            }
        }
    }
    g
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Result of a truncated infinite product.
#[derive(Debug, Clone)]
pub struct LimitingMgf {
    pub value: JointMatrix<Complex64>,
    /// Number of kernel factors used.
    pub factors: u64,
    /// Bound on the neglected tail (zero when the product is exact).
    pub tail_bound: f64,
}

/// `lim_t ψ̃(s,t) = 1π π̃(s,m*) P π̃(s,m*-1) ··· P π̃(s,0)`.
///
/// Bounded service uses the exact horizon; otherwise `m*` is the first age at
/// which `exp(Σ_j c_j E((L_j-m)^+)) - 1 < tol`, with `c_j` bounding `|π̃_j - 1| / P(L_j > m)`.
pub fn limiting_mgf_deterministic(model: &ModelSpec, s: &SVector, tol: f64) -> Result<LimitingMgf> {
    require_unit_lattice(model)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if model.service().iter().any(|l| !l.mean().is_finite()) {
        return Err(Error::Precondition("every service law needs a finite mean".into()));
    }
    let period = chain_period(model.transition());
    if period != 1 {
        return Err(Error::Precondition(format!("the batch chain has period {period}; P^n has no limit")));
    }
    if s.len() != model.k() {
        return Err(Error::Shape(format!("s has {} components, expected {}", s.len(), model.k())));
    }
    let k_max = f64::from(model.space().max_value());
    let coefficients: Vec<f64> = s
        .values()
        .iter()
        .map(|v| match s.mode() {
            SMode::Real => (v.abs() * k_max).exp_m1(),
            SMode::Imaginary => (v.abs() * k_max).min(2.0),
        })
        .collect();
    let (factors, tail_bound) = match bounded_service_horizon(model) {
        Some(m) => (m, 0.0),
        None => {
            let mut m = 0u64;
            loop {
                let mut exponent = 0.0;
                for (law, c) in model.service().iter().zip(&coefficients) {
                    if *c > 0.0 {
                        exponent += c * law.residual_expectation(m as f64)?;
                    }
                }
                let bound = exponent.exp_m1();
                if bound < tol {
                    break (m + 1, bound);
                }
                m += 1;
                if m > MAX_FACTORS {
                    return Err(Error::Convergence(format!("tail bound still {bound:e} after {MAX_FACTORS} factors")));
                }
            }
        }
    };
    let kernel = Kernel::new(model, s)?;
    let pi = model.chain().stationary();
    let mut acc = DMatrix::from_fn(1, pi.len(), |_, c| Complex64::new(pi[c], 0.0));
    if factors > 0 {
        acc *= DMatrix::from_diagonal(&kernel.pi_tilde_diagonal((factors - 1) as f64)?);
        for m in (0..factors - 1).rev() {
            acc *= kernel.p_pi_tilde(m as f64)?;
        }
    }
    let n = model.len();
    let value = DMatrix::from_fn(n, n, |_, c| acc[(0, c)]);
    Ok(LimitingMgf { value: JointMatrix::new(model.space().clone(), Semantics::Mgf, value), factors, tail_bound })
}
