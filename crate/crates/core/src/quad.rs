//! Adaptive one-dimensional quadrature over scalar, complex and matrix-valued integrands.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values that can be integrated: a normed vector space over the reals.
pub trait QuadValue: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn norm(&self) -> f64;
    fn is_finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl QuadValue for Complex64 {
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
    fn is_finite(&self) -> bool {
        Complex64::is_finite(*self)
    }
}

impl QuadValue for DMatrix<f64> {
    fn norm(&self) -> f64 {
        self.amax()
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMethod {
    GaussLegendre,
    AdaptiveSimpson,
}

/// Numerical settings shared by the quadrature and ODE paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub method: QuadMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// RK4 step; `None` picks `min(1e-3, E(τ)/100)`.
    pub ode_step: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            method: QuadMethod::GaussLegendre,
            abs_tol: 1e-8,
            rel_tol: 1e-10,
            max_subdivisions: 20_000,
            ode_step: None,
        }
    }
}

impl QuadratureConfig {
    /// Tight settings used internally for distribution functionals.
    pub fn precise() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Domain("quadrature tolerances must be positive".into()));
        }
        if let Some(h) = self.ode_step {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Domain(format!("ode_step must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

// 8-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre<V: QuadValue>(f: &mut impl FnMut(f64) -> V, a: f64, b: f64) -> V {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc: Option<V> = None;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let pair = f(c - h * x) + f(c + h * x);
        let term = pair * (w * h);
        acc = Some(match acc {
            Some(s) => s + term,
            None => term,
        });
    }
    acc.expect("nodes are non-empty")
}

/// `∫_a^b f` to `max(abs_tol, rel_tol·|∫|)`.
pub fn integrate<V: QuadValue>(mut f: impl FnMut(f64) -> V, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<V> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if b < a {
        return integrate(f, b, a, cfg).map(|v| v * -1.0);
    }
    match cfg.method {
        QuadMethod::GaussLegendre => adaptive_gl(&mut f, a, b, cfg),
        QuadMethod::AdaptiveSimpson => adaptive_simpson(&mut f, a, b, cfg),
    }
}

fn adaptive_gl<V: QuadValue>(f: &mut impl FnMut(f64) -> V, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<V> {
    let whole = gauss_legendre(f, a, b);
    if b == a {
        return Ok(whole * 0.0);
    }
    let target = cfg.abs_tol.max(cfg.rel_tol * whole.norm());
    let span = b - a;
    let mut stack = vec![(a, b, whole)];
    let mut total: Option<V> = None;
    let mut splits = 0usize;
    while let Some((lo, hi, est)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gauss_legendre(f, lo, mid);
        let right = gauss_legendre(f, mid, hi);
        let refined = left.clone() + right.clone();
        if !refined.is_finite() {
            return Err(Error::NonFinite { t: mid });
        }
        let err = (refined.clone() - est).norm();
        let local = target * (hi - lo) / span;
        if err <= local || hi - lo < span * 1e-15 {
            total = Some(match total {
                Some(t) => t + refined,
                None => refined,
            });
        } else {
            splits += 1;
            if splits > cfg.max_subdivisions {
                return Err(Error::Convergence(format!(
                    "adaptive Gauss-Legendre exceeded {} subdivisions on [{a}, {b}]",
                    cfg.max_subdivisions
                )));
            }
            stack.push((mid, hi, right));
            stack.push((lo, mid, left));
        }
    }
    Ok(total.expect("at least one interval accepted"))
}

fn adaptive_simpson<V: QuadValue>(f: &mut impl FnMut(f64) -> V, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<V> {
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (fa.clone() + fm.clone() * 4.0 + fb.clone()) * ((b - a) / 6.0);
    if b == a {
        return Ok(whole);
    }
    let target = cfg.abs_tol.max(cfg.rel_tol * whole.norm());
    let span = b - a;
    let mut stack = vec![(a, b, fa, fm, fb, whole)];
    let mut total: Option<V> = None;
    let mut splits = 0usize;
    while let Some((lo, hi, flo, fmid, fhi, est)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let fl = f(0.5 * (lo + mid));
        let fr = f(0.5 * (mid + hi));
        let h6 = (hi - lo) / 12.0;
        let left = (flo.clone() + fl.clone() * 4.0 + fmid.clone()) * h6;
        let right = (fmid.clone() + fr.clone() * 4.0 + fhi.clone()) * h6;
        let refined = left.clone() + right.clone();
        if !refined.is_finite() {
            return Err(Error::NonFinite { t: mid });
        }
        let diff = refined.clone() - est;
        let local = target * (hi - lo) / span;
        if diff.norm() <= 15.0 * local || hi - lo < span * 1e-15 {
            let accepted = refined + diff * (1.0 / 15.0);
            total = Some(match total {
                Some(t) => t + accepted,
                None => accepted,
            });
        } else {
            splits += 1;
            if splits > cfg.max_subdivisions {
                return Err(Error::Convergence(format!(
                    "adaptive Simpson exceeded {} subdivisions on [{a}, {b}]",
                    cfg.max_subdivisions
                )));
            }
            stack.push((mid, hi, fmid.clone(), fr, fhi, right));
            stack.push((lo, mid, flo, fl, fmid, left));
        }
    }
    Ok(total.expect("at least one interval accepted"))
}
