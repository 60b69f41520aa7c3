//! Model description and the per-arrival kernel matrices `π̃(s,r)` and `Q̃(s,r)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::statespace::{delta_matrix, ChainSpec, StateSpace};

/// Largest real exponent accepted before reporting overflow.
const MAX_REAL_EXPONENT: f64 = 700.0;

/// Discount rate, batch chain, service laws and interarrival law.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    delta: f64,
    chain: ChainSpec,
    service: Vec<Distribution>,
    interarrival: Distribution,
}

impl ModelSpec {
    pub fn new(delta: f64, chain: ChainSpec, service: Vec<Distribution>, interarrival: Distribution) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be finite and non-negative, got {delta}")));
        }
        let k = chain.space().k();
        if service.len() != k {
            return Err(Error::Shape(format!("{} service laws given for k = {k}", service.len())));
        }
        for d in service.iter().chain(std::iter::once(&interarrival)) {
            d.validate()?;
        }
        if interarrival.upper_bound() == Some(0.0) {
            return Err(Error::Domain("interarrival times must be positive almost surely".into()));
        }
        Ok(Self { delta, chain, service, interarrival })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn space(&self) -> &StateSpace {
        self.chain.space()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        self.chain.transition()
    }

    pub fn k(&self) -> usize {
        self.chain.space().k()
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn service(&self) -> &[Distribution] {
        &self.service
    }

    pub fn service_of(&self, i: usize) -> Result<&Distribution> {
        self.space().check_dimension(i)?;
        Ok(&self.service[i])
    }

    pub fn interarrival(&self) -> &Distribution {
        &self.interarrival
    }

    /// Arrival rate when the arrivals are Poisson.
    pub fn poisson_rate(&self) -> Option<f64> {
        self.interarrival.exponential_rate()
    }

    pub fn delta_matrix(&self, i: usize) -> Result<DMatrix<f64>> {
        delta_matrix(self.space(), i)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(delta, self.chain.clone(), self.service.clone(), self.interarrival)
    }

    pub fn with_interarrival(&self, interarrival: Distribution) -> Result<Self> {
        Self::new(self.delta, self.chain.clone(), self.service.clone(), interarrival)
    }

    pub fn with_service(&self, service: Vec<Distribution>) -> Result<Self> {
        Self::new(self.delta, self.chain.clone(), service, self.interarrival)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SMode {
    Real,
    Imaginary,
}

/// Transform argument `s`, either all real or all purely imaginary.
#[derive(Debug, Clone, PartialEq)]
pub struct SVector {
    values: Vec<f64>,
    mode: SMode,
}

impl SVector {
    pub fn real(values: Vec<f64>) -> Self {
        Self { values, mode: SMode::Real }
    }

    /// `s_j = i·values[j]`.
    pub fn imaginary(values: Vec<f64>) -> Self {
        Self { values, mode: SMode::Imaginary }
    }

    pub fn zero(k: usize) -> Self {
        Self::real(vec![0.0; k])
    }

    pub fn mode(&self) -> SMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn component(&self, j: usize) -> Complex64 {
        match self.mode {
            SMode::Real => Complex64::new(self.values[j], 0.0),
            SMode::Imaginary => Complex64::new(0.0, self.values[j]),
        }
    }

    /// Copy with `values[j]` shifted by `eps`.
    pub fn shifted(&self, j: usize, eps: f64) -> Self {
        let mut values = self.values.clone();
        values[j] += eps;
        Self { values, mode: self.mode }
    }
}

/// `E(exp(c·e^{-δ(L-r)}) 1[L > r]) + P(L ≤ r)` for one service law.
struct Factor {
    law: Distribution,
    delta: f64,
    /// `E(exp(c e^{-δE}))` per batch value, for memoryless laws.
    memoryless: Option<Vec<Complex64>>,
    coefficients: Vec<Complex64>,
}

impl Factor {
    fn eval(&self, x: usize, r: f64) -> Result<Complex64> {
        let c = self.coefficients[x];
        if c == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let law = &self.law;
        let below = Complex64::new(law.cdf(r), 0.0);
        if let Some(table) = &self.memoryless {
            return Ok(below + table[x] * law.survival(r));
        }
        if self.delta == 0.0 {
            return Ok(below + c.exp() * law.survival(r));
        }
        let delta = self.delta;
        let excess = law.expect_excess(r, |e| (c * (-delta * e).exp()).exp())?;
        Ok(below + excess)
    }
}

/// Kernel evaluator for a fixed `s`; reuse it across many ages `r`.
pub struct Kernel<'a> {
    model: &'a ModelSpec,
    factors: Vec<Factor>,
}

impl<'a> Kernel<'a> {
    pub fn new(model: &'a ModelSpec, s: &SVector) -> Result<Self> {
        let k = model.k();
        if s.len() != k {
            return Err(Error::Shape(format!("s has {} components, expected {k}", s.len())));
        }
        let max_x = model.space().max_value() as usize;
        let delta = model.delta();
        let mut factors = Vec::with_capacity(k);
        for j in 0..k {
            let coefficients: Vec<Complex64> = (0..=max_x).map(|x| s.component(j) * x as f64).collect();
            if s.mode() == SMode::Real {
                for (x, c) in coefficients.iter().enumerate() {
                    if c.re > MAX_REAL_EXPONENT {
                        return Err(Error::EvaluationDomain { dimension: j, s: s.values()[j], x: x as u32 });
                    }
                }
            }
            let law = model.service()[j];
            let memoryless = match law.exponential_rate() {
                Some(rate) if delta > 0.0 => {
                    let e = Distribution::exponential(rate)?;
                    let table = coefficients
                        .iter()
                        .map(|&c| e.expect_excess(0.0, |v| (c * (-delta * v).exp()).exp()))
                        .collect::<Result<Vec<_>>>()?;
                    Some(table)
                }
                _ => None,
            };
            factors.push(Factor { law, delta, memoryless, coefficients });
        }
        Ok(Self { model, factors })
    }

    /// Diagonal of `π̃(s,r)`.
    pub fn pi_tilde_diagonal(&self, r: f64) -> Result<DVector<Complex64>> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("age r must be non-negative, got {r}")));
        }
        let max_x = self.model.space().max_value() as usize;
        let mut table = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let row = (0..=max_x).map(|x| f.eval(x, r)).collect::<Result<Vec<_>>>()?;
            table.push(row);
        }
        let states = self.model.space().states();
        let diag = DVector::from_iterator(
            states.len(),
            states.iter().map(|x| {
                x.iter()
                    .enumerate()
                    .fold(Complex64::new(1.0, 0.0), |acc, (j, &xj)| acc * table[j][xj as usize])
            }),
        );
        if let Some(pos) = diag.iter().position(|v| !v.is_finite()) {
            let x = &states[pos];
            let j = (0..x.len()).find(|&j| x[j] > 0).unwrap_or(0);
            return Err(Error::EvaluationDomain { dimension: j, s: self.factors[j].coefficients[1].norm(), x: x[j] });
        }
        Ok(diag)
    }

    /// `P π̃(s,r)`, the transpose of `Q̃(s,r)`.
    pub fn p_pi_tilde(&self, r: f64) -> Result<DMatrix<Complex64>> {
        let d = self.pi_tilde_diagonal(r)?;
        let mut m = self.model.transition().map(|v| Complex64::new(v, 0.0));
        for (col, &w) in d.iter().enumerate() {
            m.column_mut(col).iter_mut().for_each(|v| *v *= w);
        }
        Ok(m)
    }

    pub fn q_tilde(&self, r: f64) -> Result<DMatrix<Complex64>> {
        Ok(self.p_pi_tilde(r)?.transpose())
    }
}

/// `π̃(s,r) = diag E(exp Σ_j s_j x_j e^{-δ(L_j-r)} 1[L_j > r])`.
pub fn pi_tilde(model: &ModelSpec, s: &SVector, r: f64) -> Result<DMatrix<Complex64>> {
    Ok(DMatrix::from_diagonal(&Kernel::new(model, s)?.pi_tilde_diagonal(r)?))
}

/// `Q̃(s,r) = π̃(s,r) P'`.
pub fn q_tilde(model: &ModelSpec, s: &SVector, r: f64) -> Result<DMatrix<Complex64>> {
    Kernel::new(model, s)?.q_tilde(r)
}

/// `∂_{s_i} π̃(s,r)` at `s = 0`.
pub fn d_pi_tilde(model: &ModelSpec, i: usize, r: f64) -> Result<DMatrix<f64>> {
    let law = model.service_of(i)?;
    Ok(model.delta_matrix(i)? * law.truncated_discount(model.delta(), r)?)
}

/// `∂_{s_i} ∂_{s_i'} π̃(s,r)` at `s = 0`.
pub fn d2_pi_tilde(model: &ModelSpec, i: usize, i2: usize, r: f64) -> Result<DMatrix<f64>> {
    let li = model.service_of(i)?;
    let li2 = model.service_of(i2)?;
    let w = li.truncated_discount_pair(li2, model.delta(), r, i == i2)?;
    Ok(model.delta_matrix(i)? * model.delta_matrix(i2)? * w)
}
