//! Interarrival and service laws, with the functionals the moment formulas use.

use rand::Rng;
use rand_distr::{Distribution as _, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadValue, QuadratureConfig};

/// A non-negative law with finite first two moments.
///
/// `Zero` is the degenerate law at 0, i.e. the `μ = ∞` limit of the
/// exponential; it is kept exact rather than approximated by a large rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Gamma { shape: f64, rate: f64 },
    Zero,
}

fn check_nonneg(what: &str, v: f64) -> Result<()> {
    if v < 0.0 || !v.is_finite() {
        Err(Error::Domain(format!("{what} must be a finite non-negative number, got {v}")))
    } else {
        Ok(())
    }
}

impl Distribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = Self::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let d = Self::Deterministic { value };
        d.validate()?;
        Ok(d)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let d = Self::Gamma { shape, rate };
        d.validate()?;
        Ok(d)
    }

    /// Parameter checks; deserialized values must pass through here.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            Self::Exponential { rate } => positive("exponential rate", rate),
            Self::Deterministic { value } => check_nonneg("deterministic value", value),
            Self::Gamma { shape, rate } => {
                positive("gamma shape", shape)?;
                positive("gamma rate", rate)
            }
            Self::Zero => Ok(()),
        }
    }

    /// `E(e^{-uX})`.
    pub fn laplace(&self, u: f64) -> Result<f64> {
        check_nonneg("Laplace argument", u)?;
        Ok(match *self {
            Self::Exponential { rate } => rate / (rate + u),
            Self::Deterministic { value } => (-u * value).exp(),
            Self::Gamma { shape, rate } => (1.0 + u / rate).powf(-shape),
            Self::Zero => 1.0,
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { value } => value,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Zero => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::Deterministic { value } => value * value,
            Self::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
            Self::Zero => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::Deterministic { value } => f64::from(u8::from(x >= value)),
            Self::Gamma { shape, rate } => {
                if x == 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
            Self::Zero => 1.0,
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Deterministic { value } => f64::from(u8::from(value > x)),
            Self::Gamma { shape, rate } => {
                if x == 0.0 {
                    1.0
                } else {
                    gamma_ur(shape, rate * x)
                }
            }
            Self::Zero => 0.0,
        }
    }

    /// Density of the absolutely continuous kinds.
    pub fn density(&self, x: f64) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(if x < 0.0 { 0.0 } else { rate * (-rate * x).exp() }),
            Self::Gamma { shape, rate } => Some(if x <= 0.0 {
                0.0
            } else {
                (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp()
            }),
            _ => None,
        }
    }

    /// Point masses, as `(location, mass)` pairs.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match *self {
            Self::Deterministic { value } => vec![(value, 1.0)],
            Self::Zero => vec![(0.0, 1.0)],
            _ => Vec::new(),
        }
    }

    /// Only the deterministic kinds are lattice.
    pub fn is_lattice(&self) -> bool {
        matches!(self, Self::Deterministic { .. } | Self::Zero)
    }

    /// Rate of an exponential law, including `Gamma(1, b)`.
    pub fn exponential_rate(&self) -> Option<f64> {
        match *self {
            Self::Exponential { rate } => Some(rate),
            Self::Gamma { shape, rate } if shape == 1.0 => Some(rate),
            _ => None,
        }
    }

    /// Smallest `M` with `P(X ≤ M) = 1`, when finite.
    pub fn upper_bound(&self) -> Option<f64> {
        match *self {
            Self::Deterministic { value } => Some(value),
            Self::Zero => Some(0.0),
            _ => None,
        }
    }

    /// `E(e^{-δ(X-r)} 1[X > r])`.
    pub fn truncated_discount(&self, delta: f64, r: f64) -> Result<f64> {
        check_nonneg("discount rate", delta)?;
        check_nonneg("age", r)?;
        match *self {
            Self::Exponential { rate } => Ok(rate / (rate + delta) * (-rate * r).exp()),
            Self::Deterministic { value } => Ok(if value > r { (-delta * (value - r)).exp() } else { 0.0 }),
            Self::Zero => Ok(0.0),
            Self::Gamma { .. } => {
                if delta == 0.0 {
                    Ok(self.survival(r))
                } else {
                    self.expect_excess(r, |e| (-delta * e).exp())
                }
            }
        }
    }

    /// `E(e^{-δ(L-r)}1[L>r] e^{-δ(L'-r)}1[L'>r])` for two service components.
    ///
    /// With `same_dimension` the two factors are the same variable, giving a
    /// single factor at discount `2δ`; otherwise they are independent.
    pub fn truncated_discount_pair(&self, other: &Self, delta: f64, r: f64, same_dimension: bool) -> Result<f64> {
        if same_dimension {
            self.truncated_discount(2.0 * delta, r)
        } else {
            Ok(self.truncated_discount(delta, r)? * other.truncated_discount(delta, r)?)
        }
    }

    /// `E((X - r) 1[X > r])`.
    pub fn residual_expectation(&self, r: f64) -> Result<f64> {
        check_nonneg("age", r)?;
        match *self {
            Self::Exponential { rate } => Ok((-rate * r).exp() / rate),
            Self::Deterministic { value } => Ok((value - r).max(0.0)),
            Self::Zero => Ok(0.0),
            Self::Gamma { .. } => self.expect_excess(r, |e| e),
        }
    }

    /// `E(g(X - r) 1[X > r])` for the continuous kinds, atoms handled exactly.
    pub fn expect_excess<V: QuadValue>(&self, r: f64, g: impl Fn(f64) -> V) -> Result<V> {
        check_nonneg("age", r)?;
        let cfg = QuadratureConfig::precise();
        let zero = || g(0.0) * 0.0;
        match *self {
            Self::Zero => Ok(zero()),
            Self::Deterministic { value } => Ok(if value > r { g(value - r) } else { zero() }),
            Self::Exponential { rate } => {
                // memoryless: the excess over r is again Exp(rate)
                let horizon = 42.0 / rate;
                let body = integrate(|v: f64| g(v) * (rate * (-rate * v).exp()), 0.0, horizon, &cfg)?;
                Ok(body * (-rate * r).exp())
            }
            Self::Gamma { shape, rate } => {
                let tail = self.survival(r);
                if tail == 0.0 {
                    return Ok(zero());
                }
                let mut horizon = (shape + 1.0) / rate;
                while self.survival(r + horizon) > 1e-17 * tail && horizon < 1e6 / rate {
                    horizon *= 1.5;
                }
                let dens = |u: f64| self.density(u).unwrap_or(0.0);
                if r == 0.0 && shape < 1.0 {
                    let split = (1.0 / rate).min(horizon);
                    let head = self.integrate_singular_head(split, &g, &cfg)?;
                    let rest = integrate(|u: f64| g(u) * dens(u), split, horizon, &cfg)?;
                    Ok(head + rest)
                } else {
                    integrate(|u: f64| g(u - r) * dens(u), r, r + horizon, &cfg)
                }
            }
        }
    }

    /// `∫_0^t g(y) dF(y)`.
    pub fn expect_below<V: QuadValue>(&self, t: f64, g: impl Fn(f64) -> V, cfg: &QuadratureConfig) -> Result<V> {
        check_nonneg("horizon", t)?;
        let zero = || g(0.0) * 0.0;
        match *self {
            Self::Zero => Ok(g(0.0)),
            Self::Deterministic { value } => Ok(if value <= t { g(value) } else { zero() }),
            Self::Exponential { rate } => integrate(|y: f64| g(y) * (rate * (-rate * y).exp()), 0.0, t, cfg),
            Self::Gamma { shape, rate } => {
                if t == 0.0 {
                    return Ok(zero());
                }
                let dens = |u: f64| self.density(u).unwrap_or(0.0);
                if shape < 1.0 {
                    let split = (1.0 / rate).min(t);
                    let head = self.integrate_singular_head(split, &g, cfg)?;
                    if split < t {
                        Ok(head + integrate(|u: f64| g(u) * dens(u), split, t, cfg)?)
                    } else {
                        Ok(head)
                    }
                } else {
                    integrate(|u: f64| g(u) * dens(u), 0.0, t, cfg)
                }
            }
        }
    }

    /// `∫_0^b g(u) f(u) du` for a gamma density with shape < 1, via `u = v^{1/a}`.
    fn integrate_singular_head<V: QuadValue>(&self, b: f64, g: &impl Fn(f64) -> V, cfg: &QuadratureConfig) -> Result<V> {
        let Self::Gamma { shape, rate } = *self else {
            unreachable!("only gamma laws have a singular head")
        };
        let scale = (shape * rate.ln() - ln_gamma(shape + 1.0)).exp();
        let inv = 1.0 / shape;
        integrate(
            |v: f64| {
                let u = v.powf(inv);
                g(u) * (scale * (-rate * u).exp())
            },
            0.0,
            b.powf(shape),
            cfg,
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                -u.ln() / rate
            }
            Self::Deterministic { value } => value,
            Self::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated parameters").sample(rng),
            Self::Zero => 0.0,
        }
    }
}
