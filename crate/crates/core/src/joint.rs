//! `S × S` result matrices indexed by (initial state, terminal state).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::statespace::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    Mgf,
    FirstMoment,
    SecondMoment,
    Workload,
    PsiZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointMatrix<T: nalgebra::Scalar = f64> {
    pub space: StateSpace,
    pub semantics: Semantics,
    pub entries: DMatrix<T>,
}

impl<T: nalgebra::Scalar> JointMatrix<T> {
    pub fn new(space: StateSpace, semantics: Semantics, entries: DMatrix<T>) -> Self {
        assert_eq!(entries.nrows(), space.len(), "joint matrix rows must match the state space");
        assert_eq!(entries.ncols(), space.len(), "joint matrix columns must match the state space");
        Self { space, semantics, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }
}

impl JointMatrix<f64> {
    pub fn row_sums(&self) -> DVector<f64> {
        row_sums(&self.entries)
    }

    /// Largest entrywise difference between any row and the first.
    pub fn max_row_deviation(&self) -> f64 {
        max_row_deviation(&self.entries)
    }
}

impl JointMatrix<Complex64> {
    pub fn row_sums(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.entries.nrows(), self.entries.row_iter().map(|r| r.iter().sum()))
    }
}

pub fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

pub fn max_row_deviation(m: &DMatrix<f64>) -> f64 {
    let first = m.row(0).clone_owned();
    m.row_iter().map(|r| (r - &first).amax()).fold(0.0, f64::max)
}
