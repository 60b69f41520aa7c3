#![allow(dead_code)]

use ibnr_core::statespace::enumerate_states;
use ibnr_core::{ChainSpec, Distribution, ModelSpec, SemiMarkovSpec};
use nalgebra::{dmatrix, DMatrix, RowDVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn paper_p() -> DMatrix<f64> {
    dmatrix![0.25, 0.75; 0.5, 0.5]
}

pub fn paper_chain() -> ChainSpec {
    let pi = RowDVector::from_row_slice(&[0.4, 0.6]);
    ChainSpec::with_stationary(enumerate_states(1, 1).unwrap(), paper_p(), pi).unwrap()
}

pub fn exp(rate: f64) -> Distribution {
    Distribution::exponential(rate).unwrap()
}

pub fn gamma(shape: f64, rate: f64) -> Distribution {
    Distribution::gamma(shape, rate).unwrap()
}

/// The numerical example: K=1, k=1, L ~ Exp(1), δ = 0.
pub fn paper_model(interarrival: Distribution) -> ModelSpec {
    ModelSpec::new(0.0, paper_chain(), vec![exp(1.0)], interarrival).unwrap()
}

pub fn paper_model_delta(interarrival: Distribution, service: Distribution, delta: f64) -> ModelSpec {
    ModelSpec::new(delta, paper_chain(), vec![service], interarrival).unwrap()
}

pub fn mixed_semi_markov() -> SemiMarkovSpec {
    SemiMarkovSpec::new(
        paper_p(),
        Some(RowDVector::from_row_slice(&[0.4, 0.6])),
        vec![vec![exp(1.0), Distribution::Zero], vec![exp(2.0), exp(0.5)]],
        exp(10.0),
        0.0,
    )
    .unwrap()
}

/// One path of the environment observed at `t`, without the embedding.
pub struct DirectSample {
    /// Discounted count of customers in service, by type `ℓκ + m`.
    pub per_type: Vec<f64>,
    pub terminal: (usize, usize),
}

impl DirectSample {
    pub fn total(&self) -> f64 {
        self.per_type.iter().sum()
    }
}

fn next_environment<R: Rng>(p_y: &DMatrix<f64>, from: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for to in 0..p_y.ncols() {
        acc += p_y[(from, to)];
        if u < acc {
            return to;
        }
    }
    p_y.ncols() - 1
}

/// Samples the jumps of `Y` after `Y(T_{-1}) = j0`, `Y(T_0) = j1`, one customer per jump.
pub fn simulate_direct<R: Rng>(spec: &SemiMarkovSpec, t: f64, start: (usize, usize), rng: &mut R) -> DirectSample {
    let kappa = spec.kappa();
    let mut per_type = vec![0.0; kappa * kappa];
    let (mut before, mut after) = start;
    let mut clock = 0.0;
    loop {
        clock += spec.interarrival().sample(rng);
        if clock > t {
            break;
        }
        let next = next_environment(spec.p_y(), after, rng);
        before = after;
        after = next;
        let service = spec.service(before, after).sample(rng);
        if clock + service > t {
            per_type[before * kappa + after] += (-spec.delta() * (clock + service - t)).exp();
        }
    }
    DirectSample { per_type, terminal: (before, after) }
}

/// Per-type means and standard errors, one row per starting pair.
pub fn direct_first_moment(
    spec: &SemiMarkovSpec,
    starts: &[(usize, usize)],
    t: f64,
    reps: usize,
    seed: u64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let dims = spec.kappa() * spec.kappa();
    let mut mean = DMatrix::zeros(starts.len(), dims);
    let mut stderr = DMatrix::zeros(starts.len(), dims);
    for (row, &start) in starts.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(row as u64));
        let mut s = vec![0.0; dims];
        let mut s2 = vec![0.0; dims];
        for _ in 0..reps {
            let path = simulate_direct(spec, t, start, &mut rng);
            for d in 0..dims {
                s[d] += path.per_type[d];
                s2[d] += path.per_type[d] * path.per_type[d];
            }
        }
        let n = reps as f64;
        for d in 0..dims {
            let m = s[d] / n;
            mean[(row, d)] = m;
            stderr[(row, d)] = (((s2[d] - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt();
        }
    }
    (mean, stderr)
}

/// `E(e^{iz 𝒵̃(t)} 1[terminal pair = c])` by column, with standard errors of the real and imaginary parts.
pub fn direct_characteristic(
    spec: &SemiMarkovSpec,
    start: (usize, usize),
    z: f64,
    t: f64,
    reps: usize,
    seed: u64,
) -> (Vec<Complex64>, Vec<(f64, f64)>) {
    let kappa = spec.kappa();
    let dims = kappa * kappa;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![Complex64::new(0.0, 0.0); dims];
    let mut s2 = vec![(0.0, 0.0); dims];
    for _ in 0..reps {
        let path = simulate_direct(spec, t, start, &mut rng);
        let v = Complex64::new(0.0, z * path.total()).exp();
        let c = path.terminal.0 * kappa + path.terminal.1;
        s[c] += v;
        s2[c].0 += v.re * v.re;
        s2[c].1 += v.im * v.im;
    }
    let n = reps as f64;
    let mean: Vec<Complex64> = s.iter().map(|v| v / n).collect();
    let se = (0..dims)
        .map(|c| {
            let var = |sum2: f64, m: f64| (((sum2 - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt();
            (var(s2[c].0, mean[c].re), var(s2[c].1, mean[c].im))
        })
        .collect();
    (mean, se)
}
