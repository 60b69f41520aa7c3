//! Semi-Markov modulated arrivals through the κ²-dimensional embedding.
//!
//! A jump of the environment `Y` from `ℓ` to `m` brings one customer of type
//! `(ℓ,m)`. The embedded batch chain lives on the matrix units `e(ℓ,m)` with
//! `K = 1`; dimension `(ℓ,m)` has index `ℓκ + m`, and embedded states follow
//! the same lexicographic order. Pairs with `p_Y(ℓ,m) = 0` are never visited
//! and are left out of the state space, though their dimensions remain.

use nalgebra::{DMatrix, RowDVector};
use num_complex::Complex64;

use crate::asymptotics::{limit_first_moment_vector, limit_second_moment_joint, limit_workload_vector};
use crate::deterministic::{limiting_mgf_deterministic, transient_first_moment_deterministic, transient_mgf_deterministic};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::joint::JointMatrix;
use crate::kernel::{ModelSpec, SVector};
use crate::quad::QuadratureConfig;
use crate::simulator::{estimate, InitialStates, Target};
use crate::statespace::{check_stochastic, ChainSpec, StateSpace};
use crate::transient::{
    first_moment_renewal, transient_first_moment_poisson, transient_mgf_poisson, transient_second_moment_poisson,
    transient_workload_poisson,
};

/// Environment chain, per-transition service laws, sojourn law and discount.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiMarkovSpec {
    kappa: usize,
    p_y: DMatrix<f64>,
    pi_y: Option<RowDVector<f64>>,
    service: Vec<Vec<Distribution>>,
    interarrival: Distribution,
    delta: f64,
}

impl SemiMarkovSpec {
    /// `service[ℓ][m]` is the law of the service drawn on a jump `ℓ → m`.
    /// When `pi_y` is given it is checked against `p_y` on embedding.
    pub fn new(
        p_y: DMatrix<f64>,
        pi_y: Option<RowDVector<f64>>,
        service: Vec<Vec<Distribution>>,
        interarrival: Distribution,
        delta: f64,
    ) -> Result<Self> {
        let kappa = p_y.nrows();
        if kappa == 0 || p_y.ncols() != kappa {
            return Err(Error::Shape(format!("P_Y must be square and non-empty, got {}x{}", p_y.nrows(), p_y.ncols())));
        }
        check_stochastic(&p_y)?;
        if service.len() != kappa || service.iter().any(|row| row.len() != kappa) {
            return Err(Error::Shape(format!("service matrix must be {kappa}x{kappa}")));
        }
        for law in service.iter().flatten() {
            law.validate()?;
        }
        if let Some(pi) = &pi_y {
            if pi.len() != kappa {
                return Err(Error::Shape(format!("pi_Y has length {}, expected {kappa}", pi.len())));
            }
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be finite and non-negative, got {delta}")));
        }
        Ok(Self { kappa, p_y, pi_y, service, interarrival, delta })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn p_y(&self) -> &DMatrix<f64> {
        &self.p_y
    }

    pub fn pi_y(&self) -> Option<&RowDVector<f64>> {
        self.pi_y.as_ref()
    }

    pub fn service(&self, l: usize, m: usize) -> &Distribution {
        &self.service[l][m]
    }

    pub fn interarrival(&self) -> &Distribution {
        &self.interarrival
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn embed(&self) -> Result<Embedding> {
        embed(self)
    }
}

/// The embedded base model and its index maps.
#[derive(Debug, Clone)]
pub struct Embedding {
    kappa: usize,
    model: ModelSpec,
    pairs: Vec<(usize, usize)>,
    state_of_pair: Vec<Option<usize>>,
}

impl Embedding {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Dimension index of customer type `(ℓ,m)`.
    pub fn dimension(&self, l: usize, m: usize) -> usize {
        l * self.kappa + m
    }

    pub fn pair_of_dimension(&self, d: usize) -> (usize, usize) {
        (d / self.kappa, d % self.kappa)
    }

    /// Embedded state index of `e(ℓ,m)`, if that pair is reachable.
    pub fn state(&self, l: usize, m: usize) -> Option<usize> {
        self.state_of_pair.get(l * self.kappa + m).copied().flatten()
    }

    /// The pair `(ℓ,m)` behind each embedded state, in state order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn dimensions(&self) -> usize {
        self.kappa * self.kappa
    }
}

/// Builds the embedded chain `p(e(ℓ,m), e(ℓ',m')) = p_Y(ℓ',m') 1[m = ℓ']`
/// with stationary law `π(e(ℓ,m)) = p_Y(ℓ,m) π_Y(ℓ)`.
pub fn embed(spec: &SemiMarkovSpec) -> Result<Embedding> {
    let kappa = spec.kappa;
    let dims = kappa * kappa;
    let pairs: Vec<(usize, usize)> =
        (0..kappa).flat_map(|l| (0..kappa).map(move |m| (l, m))).filter(|&(l, m)| spec.p_y[(l, m)] > 0.0).collect();
    let mut state_of_pair = vec![None; dims];
    for (n, &(l, m)) in pairs.iter().enumerate() {
        state_of_pair[l * kappa + m] = Some(n);
    }
    let states = pairs
        .iter()
        .map(|&(l, m)| {
            let mut x = vec![0u32; dims];
            x[l * kappa + m] = 1;
            x
        })
        .collect();
    let space = StateSpace::restricted(dims, 1, states)?;
    let n = pairs.len();
    let p = DMatrix::from_fn(n, n, |a, b| {
        let (_, m) = pairs[a];
        let (l2, m2) = pairs[b];
        if m == l2 {
            spec.p_y[(l2, m2)]
        } else {
            0.0
        }
    });
    let chain = match &spec.pi_y {
        Some(pi_y) => {
            let pi = RowDVector::from_iterator(n, pairs.iter().map(|&(l, m)| spec.p_y[(l, m)] * pi_y[l]));
            ChainSpec::with_stationary(space, p, pi)?
        }
        None => ChainSpec::new(space, p)?,
    };
    let service = (0..dims).map(|d| spec.service[d / kappa][d % kappa]).collect();
    let model = ModelSpec::new(spec.delta, chain, service, spec.interarrival)?;
    Ok(Embedding { kappa, model, pairs, state_of_pair })
}

/// Time at which a modulated quantity is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Limit,
    At(f64),
}

/// Evaluation route. `Deterministic` needs unit-lattice interarrivals,
/// `TransientPoisson` exponential ones, `Renewal` any non-lattice law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Asymptotic,
    TransientPoisson,
    Deterministic,
    Renewal,
    Simulate { reps: usize, seed: u64 },
}

/// Rows are the reachable initial pairs `(j0,j1)`; columns are all κ² pairs `(j2,j3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedMatrix<T: nalgebra::Scalar = f64> {
    pub kappa: usize,
    pub rows: Vec<(usize, usize)>,
    pub values: DMatrix<T>,
    pub stderr: Option<DMatrix<T>>,
}

impl<T: nalgebra::Scalar + Copy> ModulatedMatrix<T> {
    pub fn get(&self, from: (usize, usize), to: (usize, usize)) -> Option<T> {
        let row = self.rows.iter().position(|&r| r == from)?;
        (to.0 < self.kappa && to.1 < self.kappa).then(|| self.values[(row, to.0 * self.kappa + to.1)])
    }

    /// The pair label of column `c`.
    pub fn column_pair(&self, c: usize) -> (usize, usize) {
        (c / self.kappa, c % self.kappa)
    }
}

fn mismatch(what: &str, horizon: Horizon, method: Method) -> Error {
    Error::Precondition(format!("{what} has no {method:?} route at horizon {horizon:?}"))
}

fn non_negative_time(t: f64) -> Result<f64> {
    if t >= 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Domain(format!("t must be finite and non-negative, got {t}")))
    }
}

fn integer_time(t: f64) -> Result<u64> {
    non_negative_time(t)?;
    if t.fract() != 0.0 {
        return Err(Error::Domain(format!("lattice evaluation needs an integer t, got {t}")));
    }
    Ok(t as u64)
}

/// Assembles columns from per-dimension row-sum vectors.
fn from_columns(emb: &Embedding, mut column: impl FnMut(usize) -> Result<Vec<f64>>) -> Result<ModulatedMatrix> {
    let n = emb.pairs.len();
    let dims = emb.dimensions();
    let mut values = DMatrix::zeros(n, dims);
    for d in 0..dims {
        let col = column(d)?;
        for (row, v) in col.into_iter().enumerate() {
            values[(row, d)] = v;
        }
    }
    Ok(ModulatedMatrix { kappa: emb.kappa, rows: emb.pairs.clone(), values, stderr: None })
}

fn row_sums(m: &JointMatrix) -> Vec<f64> {
    m.row_sums().iter().copied().collect()
}

fn simulated(emb: &Embedding, t: f64, reps: usize, seed: u64, target: impl Fn(usize) -> Target) -> Result<ModulatedMatrix> {
    let dims = emb.dimensions();
    let targets: Vec<Target> = (0..dims).map(target).collect();
    let report = estimate(&emb.model, non_negative_time(t)?, &targets, reps, seed, InitialStates::All)?;
    let n = emb.pairs.len();
    let mut values = DMatrix::zeros(n, dims);
    let mut stderr = DMatrix::zeros(n, dims);
    for (d, est) in report.estimates.iter().enumerate() {
        for row in 0..n {
            values[(row, d)] = est.total_mean[row];
            stderr[(row, d)] = est.total_stderr[row];
        }
    }
    Ok(ModulatedMatrix { kappa: emb.kappa, rows: emb.pairs.clone(), values, stderr: Some(stderr) })
}

/// `ℳ^(1)`: entry `((j0,j1),(j2,j3))` is the expected discounted number of
/// type-`(j2,j3)` customers still in service, started from `e(j0,j1)`,
/// i.e. the row sums of `M_{(j2,j3)}(t)` of the embedded model.
pub fn modulated_first_moment(
    emb: &Embedding,
    horizon: Horizon,
    method: Method,
    quad: &QuadratureConfig,
) -> Result<ModulatedMatrix> {
    let model = &emb.model;
    match (horizon, method) {
        (Horizon::Limit, Method::Asymptotic) => {
            from_columns(emb, |d| Ok(limit_first_moment_vector(model, d)?.iter().copied().collect()))
        }
        (Horizon::At(t), Method::TransientPoisson) => {
            let t = non_negative_time(t)?;
            from_columns(emb, |d| Ok(row_sums(&transient_first_moment_poisson(model, d, t, quad)?)))
        }
        (Horizon::At(t), Method::Deterministic) => {
            let t = integer_time(t)?;
            from_columns(emb, |d| Ok(row_sums(&transient_first_moment_deterministic(model, d, t)?)))
        }
        (Horizon::At(t), Method::Renewal) => {
            let t = non_negative_time(t)?;
            from_columns(emb, |d| Ok(crate::joint::row_sums(&first_moment_renewal(model, d, t, quad)?.at(t)?).iter().copied().collect()))
        }
        (Horizon::At(t), Method::Simulate { reps, seed }) => simulated(emb, t, reps, seed, Target::FirstMoment),
        _ => Err(mismatch("the modulated first moment", horizon, method)),
    }
}

/// `ℳ^(2)`: row sums of the diagonal second moments `M_{(j2,j3),(j2,j3)}(t)`.
pub fn modulated_second_moment(
    emb: &Embedding,
    horizon: Horizon,
    method: Method,
    quad: &QuadratureConfig,
) -> Result<ModulatedMatrix> {
    let model = &emb.model;
    match (horizon, method) {
        (Horizon::Limit, Method::Asymptotic) => from_columns(emb, |d| Ok(row_sums(&limit_second_moment_joint(model, d, d)?))),
        (Horizon::At(t), Method::TransientPoisson) => {
            let t = non_negative_time(t)?;
            from_columns(emb, |d| Ok(row_sums(&transient_second_moment_poisson(model, d, d, t, quad)?)))
        }
        (Horizon::At(t), Method::Simulate { reps, seed }) => simulated(emb, t, reps, seed, |d| Target::SecondMoment(d, d)),
        _ => Err(mismatch("the modulated second moment", horizon, method)),
    }
}

/// `𝒲`: row sums of the embedded workload means `W_{(j2,j3)}(t)`.
pub fn modulated_workload(
    emb: &Embedding,
    horizon: Horizon,
    method: Method,
    quad: &QuadratureConfig,
) -> Result<ModulatedMatrix> {
    let model = &emb.model;
    match (horizon, method) {
        (Horizon::Limit, Method::Asymptotic) => {
            from_columns(emb, |d| Ok(limit_workload_vector(model, d)?.iter().copied().collect()))
        }
        (Horizon::At(t), Method::TransientPoisson) => {
            let t = non_negative_time(t)?;
            from_columns(emb, |d| Ok(row_sums(&transient_workload_poisson(model, d, t, quad)?)))
        }
        (Horizon::At(t), Method::Simulate { reps, seed }) => simulated(emb, t, reps, seed, Target::Workload),
        _ => Err(mismatch("the modulated workload", horizon, method)),
    }
}

/// Which random variable the modulated mgf transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgfArgument {
    /// `ψ̃(z·e(j2,j3), t)` read at column `e(j2,j3)`: only type-`(j2,j3)` customers are counted.
    SingleType,
    /// `ψ̃(z·1, t)` read at column `e(j2,j3)`: the transform of the total `𝒵̃(t)`.
    Total,
}

type Complexes = DMatrix<Complex64>;

/// Embedded `ψ̃(s,t)` with cellwise standard errors when simulated.
fn embedded_mgf(
    emb: &Embedding,
    s: &SVector,
    horizon: Horizon,
    method: Method,
    quad: &QuadratureConfig,
) -> Result<(Complexes, Option<Complexes>)> {
    let model = &emb.model;
    let exact = |m: JointMatrix<Complex64>| Ok((m.entries, None));
    match (horizon, method) {
        (Horizon::At(t), Method::TransientPoisson) => exact(transient_mgf_poisson(model, s, non_negative_time(t)?, quad)?),
        (Horizon::At(t), Method::Deterministic) => exact(transient_mgf_deterministic(model, s, integer_time(t)?)?),
        (Horizon::Limit, Method::Deterministic) => exact(limiting_mgf_deterministic(model, s, quad.abs_tol)?.value),
        (Horizon::At(t), Method::Simulate { reps, seed }) => {
            let report = estimate(model, non_negative_time(t)?, &[Target::Mgf(s.clone())], reps, seed, InitialStates::All)?;
            let est = &report.estimates[0];
            let (im, im_se) = est.imag.clone().unwrap_or_else(|| (est.mean.map(|_| 0.0), est.mean.map(|_| 0.0)));
            let join = |re: &DMatrix<f64>, im: &DMatrix<f64>| re.zip_map(im, Complex64::new);
            Ok((join(&est.mean, &im), Some(join(&est.stderr, &im_se))))
        }
        _ => Err(mismatch("the modulated mgf", horizon, method)),
    }
}

/// Modulated joint mgf at scalar `z` (real, or purely imaginary when `imaginary`).
///
/// Columns of pairs with `p_Y = 0` are zero: no customer of that type ever arrives.
/// Simulated values carry standard errors of the real and imaginary parts as `re + i·im`.
pub fn modulated_mgf(
    emb: &Embedding,
    z: f64,
    imaginary: bool,
    argument: MgfArgument,
    horizon: Horizon,
    method: Method,
    quad: &QuadratureConfig,
) -> Result<ModulatedMatrix<Complex64>> {
    let dims = emb.dimensions();
    let n = emb.pairs.len();
    let make = |v: Vec<f64>| if imaginary { SVector::imaginary(v) } else { SVector::real(v) };
    let zero = Complex64::new(0.0, 0.0);
    let mut values = DMatrix::from_element(n, dims, zero);
    let mut stderr = matches!(method, Method::Simulate { .. }).then(|| DMatrix::from_element(n, dims, zero));
    let mut place = |d: usize, col: usize, psi: &(Complexes, Option<Complexes>)| {
        for row in 0..n {
            values[(row, d)] = psi.0[(row, col)];
            if let (Some(out), Some(se)) = (stderr.as_mut(), psi.1.as_ref()) {
                out[(row, d)] = se[(row, col)];
            }
        }
    };
    match argument {
        MgfArgument::SingleType => {
            for d in 0..dims {
                let (l, m) = emb.pair_of_dimension(d);
                let Some(col) = emb.state(l, m) else { continue };
                let mut v = vec![0.0; dims];
                v[d] = z;
                place(d, col, &embedded_mgf(emb, &make(v), horizon, method, quad)?);
            }
        }
        MgfArgument::Total => {
            let psi = embedded_mgf(emb, &make(vec![z; dims]), horizon, method, quad)?;
            for (col, &(l, m)) in emb.pairs.iter().enumerate() {
                place(emb.dimension(l, m), col, &psi);
            }
        }
    }
    Ok(ModulatedMatrix { kappa: emb.kappa, rows: emb.pairs.clone(), values, stderr })
}
