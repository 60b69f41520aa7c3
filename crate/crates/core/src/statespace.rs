//! State space of the batch chain and the Markov-chain helpers built on it.
//!
//! States are k-tuples over `{0..K}`, ordered lexicographically with the first
//! coordinate most significant. Every matrix in the crate is indexed in this
//! order (or in the explicit order of a restricted space).

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// Default upper bound on `(K+1)^k`.
pub const DEFAULT_STATE_CAP: usize = 4096;

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Ordered enumeration of the batch-size vectors a chain may visit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    k: usize,
    max_value: u32,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    restricted: bool,
}

impl StateSpace {
    /// The full cube `{0..K}^k`, capped at [`DEFAULT_STATE_CAP`] states.
    pub fn cube(k: usize, max_value: u32) -> Result<Self> {
        enumerate_states(k, max_value)
    }

    /// An explicit subset of `{0..K}^k`, kept in the given order.
    pub fn restricted(k: usize, max_value: u32, states: Vec<Vec<u32>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        if states.is_empty() {
            return Err(Error::Domain("restricted state space is empty".into()));
        }
        let mut index = HashMap::with_capacity(states.len());
        for (n, s) in states.iter().enumerate() {
            if s.len() != k {
                return Err(Error::Shape(format!("state {n} has {} components, expected {k}", s.len())));
            }
            if s.iter().any(|&c| c > max_value) {
                return Err(Error::Domain(format!("state {n} has a component above K = {max_value}")));
            }
            if index.insert(s.clone(), n).is_some() {
                return Err(Error::Domain(format!("state {s:?} listed twice")));
            }
        }
        Ok(Self { k, max_value, states, index, restricted: true })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn max_value(&self) -> u32 {
        self.max_value
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &[u32] {
        &self.states[idx]
    }

    pub fn index_of(&self, state: &[u32]) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Human-readable label such as `(0,1)`.
    pub fn label(&self, idx: usize) -> String {
        let parts: Vec<String> = self.states[idx].iter().map(|c| c.to_string()).collect();
        format!("({})", parts.join(","))
    }

    pub(crate) fn check_dimension(&self, i: usize) -> Result<()> {
        if i >= self.k {
            Err(Error::Dimension { index: i, k: self.k })
        } else {
            Ok(())
        }
    }

    /// Component `i` (0-based) of every state, in state order.
    pub fn component(&self, i: usize) -> Result<Vec<f64>> {
        self.check_dimension(i)?;
        Ok(self.states.iter().map(|s| f64::from(s[i])).collect())
    }
}

/// Enumerate `{0..K}^k` with the default cap.
pub fn enumerate_states(k: usize, max_value: u32) -> Result<StateSpace> {
    enumerate_states_with_cap(k, max_value, DEFAULT_STATE_CAP)
}

pub fn enumerate_states_with_cap(k: usize, max_value: u32, cap: usize) -> Result<StateSpace> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let base = u128::from(max_value) + 1;
    let size = (0..k).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::StateSpaceTooLarge { size, cap });
    }
    let size = size as usize;
    let mut states = Vec::with_capacity(size);
    let mut current = vec![0u32; k];
    for _ in 0..size {
        states.push(current.clone());
        // odometer increment, last coordinate fastest
        for c in current.iter_mut().rev() {
            if *c < max_value {
                *c += 1;
                break;
            }
            *c = 0;
        }
    }
    let index = states.iter().cloned().enumerate().map(|(n, s)| (s, n)).collect();
    Ok(StateSpace { k, max_value, states, index, restricted: false })
}

/// `Δ_i = diag(x_i)` over the state space (`i` is 0-based).
pub fn delta_matrix(space: &StateSpace, i: usize) -> Result<DMatrix<f64>> {
    Ok(DMatrix::from_diagonal(&DVector::from_vec(space.component(i)?)))
}

/// Check that `p` is square and row-stochastic.
pub fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(Error::Shape(format!("transition matrix is {}x{}", p.nrows(), p.ncols())));
    }
    for (row, r) in p.row_iter().enumerate() {
        let sum: f64 = r.iter().sum();
        let min = r.iter().copied().fold(f64::INFINITY, f64::min);
        if !sum.is_finite() || (sum - 1.0).abs() > STOCHASTIC_TOL || min < 0.0 {
            return Err(Error::NotStochastic { row, sum, min });
        }
    }
    Ok(())
}

/// Strongly connected components of the positive-entry graph (Kosaraju).
pub fn communicating_classes(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let succ = |u: usize| (0..n).filter(move |&v| p[(u, v)] > 0.0);

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![(start, succ(start).collect::<Vec<_>>().into_iter())];
        while let Some((u, it)) = stack.last_mut() {
            if let Some(v) = it.next() {
                if !visited[v] {
                    visited[v] = true;
                    stack.push((v, succ(v).collect::<Vec<_>>().into_iter()));
                }
            } else {
                order.push(*u);
                stack.pop();
            }
        }
    }

    let mut comp = vec![usize::MAX; n];
    let mut classes = Vec::new();
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let mut members = vec![root];
        comp[root] = id;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if p[(u, v)] > 0.0 && comp[u] == usize::MAX {
                    comp[u] = id;
                    members.push(u);
                    stack.push(u);
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    classes.sort();
    classes
}

/// Stationary distribution of an irreducible stochastic matrix.
///
/// Solves `(I - P') x = 0` with the last equation replaced by `Σ x = 1`.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<RowDVector<f64>> {
    check_stochastic(p)?;
    let classes = communicating_classes(p);
    if classes.len() > 1 {
        return Err(Error::Reducible { classes });
    }
    let n = p.nrows();
    let mut a = DMatrix::<f64>::identity(n, n) - p.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("stationary system".into()))?;
    // clip round-off negatives
    let x = x.map(|v| v.max(0.0));
    let total: f64 = x.iter().sum();
    Ok((x / total).transpose())
}

/// A stationary ergodic chain on a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    space: StateSpace,
    p: DMatrix<f64>,
    pi: RowDVector<f64>,
}

impl ChainSpec {
    /// Validates `p` and computes its stationary distribution.
    pub fn new(space: StateSpace, p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != space.len() {
            return Err(Error::Shape(format!(
                "transition matrix is {}x{} but the state space has {} states",
                p.nrows(),
                p.ncols(),
                space.len()
            )));
        }
        let pi = stationary_distribution(&p)?;
        Ok(Self { space, p, pi })
    }

    /// Like [`ChainSpec::new`] but checks a caller-supplied `pi` against the solver.
    pub fn with_stationary(space: StateSpace, p: DMatrix<f64>, pi: RowDVector<f64>) -> Result<Self> {
        let chain = Self::new(space, p)?;
        if pi.len() != chain.pi.len() {
            return Err(Error::Shape(format!("pi has length {}, expected {}", pi.len(), chain.pi.len())));
        }
        let deviation = (&pi - &chain.pi).amax().max((&pi * &chain.p - &pi).amax());
        if deviation > STATIONARY_TOL {
            return Err(Error::Stationarity { deviation });
        }
        Ok(Self { pi, ..chain })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn stationary(&self) -> &RowDVector<f64> {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// `E(X_i) = π Δ_i 1` under the stationary law.
    pub fn mean_batch(&self, i: usize) -> Result<f64> {
        let x = self.space.component(i)?;
        Ok(self.pi.iter().zip(&x).map(|(p, v)| p * v).sum())
    }
}

/// `[E(f_1(S_1)···f_l(S_l) 1[S_l = y] | S_1 = x)]` as `diag(f_1) Π_{i≥2} P diag(f_i)`.
pub fn chain_product_expectation(chain: &ChainSpec, weights: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = chain.len();
    let (first, rest) = weights
        .split_first()
        .ok_or_else(|| Error::Domain("at least one weight function is required".into()))?;
    for (j, f) in weights.iter().enumerate() {
        if f.len() != n {
            return Err(Error::Shape(format!("weight {j} has length {}, expected {n}", f.len())));
        }
    }
    let mut acc = DMatrix::from_diagonal(&DVector::from_column_slice(first));
    for f in rest {
        let mut step = chain.p.clone();
        for (col, &w) in f.iter().enumerate() {
            step.column_mut(col).scale_mut(w);
        }
        acc *= step;
    }
    Ok(acc)
}
