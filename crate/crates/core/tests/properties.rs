mod common;

use common::*;
use ibnr_core::asymptotics::{
    limit_first_moment_joint, limit_first_moment_vector, limit_second_moment_joint, limit_workload_joint, limit_workload_vector,
    resolvent,
};
use ibnr_core::deterministic::transient_mgf_deterministic;
use ibnr_core::kernel::pi_tilde;
use ibnr_core::quad::integrate;
use ibnr_core::statespace::{chain_product_expectation, delta_matrix, enumerate_states};
use ibnr_core::transient::{psi_tilde_zero, transient_mgf_poisson};
use ibnr_core::{ChainSpec, Distribution, ModelSpec, QuadratureConfig, SVector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn stochastic(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(0.05f64..1.0, n * n).prop_map(move |v| {
        let mut m = DMatrix::from_row_slice(n, n, &v);
        for mut row in m.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        m
    })
}

fn service() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (0.2f64..4.0).prop_map(|r| Distribution::exponential(r).unwrap()),
        (0.1f64..3.0).prop_map(|v| Distribution::deterministic(v).unwrap()),
        (0.5f64..3.0, 0.5f64..4.0).prop_map(|(a, b)| Distribution::gamma(a, b).unwrap()),
        Just(Distribution::Zero),
    ]
}

fn exponential_or_zero() -> impl Strategy<Value = Distribution> {
    prop_oneof![4 => (0.2f64..4.0).prop_map(|r| Distribution::exponential(r).unwrap()), 1 => Just(Distribution::Zero)]
}

fn non_lattice_interarrival() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (0.5f64..20.0).prop_map(|r| Distribution::exponential(r).unwrap()),
        (0.5f64..3.0, 1.0f64..20.0).prop_map(|(a, b)| Distribution::gamma(a, b).unwrap()),
    ]
}

/// k = 2, K = 1 on the full cube.
fn two_dim(p: DMatrix<f64>, l1: Distribution, l2: Distribution, tau: Distribution, delta: f64) -> ModelSpec {
    let chain = ChainSpec::new(enumerate_states(2, 1).unwrap(), p).unwrap();
    ModelSpec::new(delta, chain, vec![l1, l2], tau).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn delta_matrices_hold_batch_sizes(k in 1usize..4, kmax in 1u32..4) {
        let space = enumerate_states(k, kmax).unwrap();
        for i in 0..k {
            let d = delta_matrix(&space, i).unwrap();
            for (n, state) in space.states().iter().enumerate() {
                prop_assert_eq!(d[(n, n)], f64::from(state[i]));
            }
            prop_assert!(d.iter().all(|v| v.fract() == 0.0 && *v >= 0.0 && *v <= f64::from(kmax)));
        }
    }

    #[test]
    fn unit_weight_products_are_stochastic(p in stochastic(4), steps in 1usize..8) {
        let chain = ChainSpec::new(enumerate_states(2, 1).unwrap(), p).unwrap();
        let m = chain_product_expectation(&chain, &vec![vec![1.0; 4]; steps]).unwrap();
        for row in m.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_stays_in_unit_interval(d in service(), u in 0.0f64..20.0) {
        let v = d.laplace(u).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        if d == Distribution::Zero {
            prop_assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn truncated_discount_without_discount_is_survival(d in service(), r in 0.0f64..5.0) {
        prop_assert!((d.truncated_discount(0.0, r).unwrap() - d.survival(r)).abs() < 1e-10);
    }

    #[test]
    fn truncated_discount_decreases_in_delta(d in service(), delta in 0.0f64..3.0, step in 0.01f64..1.0, r in 0.0f64..3.0) {
        let a = d.truncated_discount(delta, r).unwrap();
        let b = d.truncated_discount(delta + step, r).unwrap();
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn pi_tilde_imaginary_entries_are_bounded(l in service(), w in -6.0f64..6.0, r in 0.0f64..4.0, delta in 0.0f64..2.0) {
        let model = paper_model_delta(exp(10.0), l, delta);
        let d = pi_tilde(&model, &SVector::imaginary(vec![w]), r).unwrap();
        for n in 0..d.nrows() {
            prop_assert!(d[(n, n)].norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn limit_rows_are_identical(
        p in stochastic(4),
        l1 in exponential_or_zero(),
        l2 in exponential_or_zero(),
        tau in non_lattice_interarrival(),
        delta in 0.0f64..2.0,
    ) {
        let model = two_dim(p, l1, l2, tau, delta);
        let mut mats = Vec::new();
        for i in 0..2 {
            mats.push(limit_first_moment_joint(&model, i).unwrap().entries);
            for j in 0..2 {
                mats.push(limit_second_moment_joint(&model, i, j).unwrap().entries);
            }
            if model.service_of(i).unwrap().exponential_rate().is_some() {
                mats.push(limit_workload_joint(&model, i).unwrap().entries);
            }
        }
        for m in mats {
            for r in 1..m.nrows() {
                prop_assert!((m.row(r) - m.row(0)).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn joint_limits_sum_to_vector_limits(
        p in stochastic(4),
        l1 in exponential_or_zero(),
        l2 in exponential_or_zero(),
        tau in non_lattice_interarrival(),
        delta in 0.0f64..2.0,
    ) {
        let model = two_dim(p, l1, l2, tau, delta);
        for i in 0..2 {
            let joint = limit_first_moment_joint(&model, i).unwrap().row_sums();
            prop_assert!((joint - limit_first_moment_vector(&model, i).unwrap()).amax() < 1e-10);
            if model.service_of(i).unwrap().exponential_rate().is_some() {
                let joint = limit_workload_joint(&model, i).unwrap().row_sums();
                prop_assert!((joint - limit_workload_vector(&model, i).unwrap()).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn mixed_second_limits_are_symmetric(
        p in stochastic(4),
        l1 in exponential_or_zero(),
        l2 in exponential_or_zero(),
        tau in non_lattice_interarrival(),
        delta in 0.0f64..2.0,
    ) {
        let model = two_dim(p, l1, l2, tau, delta);
        let a = limit_second_moment_joint(&model, 0, 1).unwrap().entries;
        let b = limit_second_moment_joint(&model, 1, 0).unwrap().entries;
        prop_assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn resolvent_rows_sum_to_geometric_series(p in stochastic(4), c in 0.0f64..0.999) {
        let r = resolvent(&p, c).unwrap();
        for row in r.row_iter() {
            prop_assert!((row.sum() - 1.0 / (1.0 - c)).abs() < 1e-12 / (1.0 - c).powi(2));
        }
    }

    #[test]
    fn psi_zero_is_stochastic(tau in non_lattice_interarrival(), r in 0.0f64..3.0) {
        let model = paper_model(tau);
        let m = psi_tilde_zero(&model, r, &QuadratureConfig::default()).unwrap();
        prop_assert!(m.row_sums().iter().all(|v| (v - 1.0).abs() < 1e-10));
        prop_assert!(m.entries.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn poisson_characteristic_function_is_bounded(l in service(), w in -5.0f64..5.0, t in 0.0f64..3.0, delta in 0.0f64..1.0) {
        let model = paper_model_delta(exp(4.0), l, delta);
        let quad = QuadratureConfig { ode_step: Some(5e-3), ..QuadratureConfig::default() };
        let psi = transient_mgf_poisson(&model, &SVector::imaginary(vec![w]), t, &quad).unwrap();
        for row in psi.entries.row_iter() {
            prop_assert!(row.iter().sum::<Complex64>().norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn deterministic_mgf_at_zero_is_stochastic(l in service(), t in 0u64..60) {
        let model = paper_model_delta(Distribution::deterministic(1.0).unwrap(), l, 0.3);
        let psi = transient_mgf_deterministic(&model, &SVector::zero(1), t).unwrap();
        for row in psi.entries.row_iter() {
            prop_assert!((row.iter().sum::<Complex64>() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn integrated_truncated_discount_identities() {
    let quad = QuadratureConfig::precise();
    for d in [exp(0.7), exp(3.0), gamma(2.5, 1.5), gamma(0.8, 2.0)] {
        for delta in [0.0, 0.4, 2.0] {
            let horizon = 80.0 / d.exponential_rate().unwrap_or(0.5);
            let integral = integrate(|r| d.truncated_discount(delta, r).unwrap(), 0.0, horizon, &quad).unwrap();
            let expected = if delta == 0.0 { d.mean() } else { (1.0 - d.laplace(delta).unwrap()) / delta };
            assert!((integral - expected).abs() < 1e-8, "{d:?} δ={delta}: {integral} vs {expected}");
        }
        let horizon = 80.0 / d.exponential_rate().unwrap_or(0.5);
        let integral = integrate(|r| d.residual_expectation(r).unwrap(), 0.0, horizon, &quad).unwrap();
        assert!((integral - d.second_moment() / 2.0).abs() < 1e-8, "{d:?}: {integral}");
    }
}

#[test]
fn first_moment_limits_decrease_in_delta() {
    for tau in [gamma(1.0, 10.0), gamma(0.75, 15.0), exp(3.0)] {
        let mut previous: Option<DMatrix<f64>> = None;
        for delta in [0.0, 0.5, 1.0, 2.0] {
            let m = limit_first_moment_joint(&paper_model_delta(tau, exp(1.0), delta), 0).unwrap().entries;
            if let Some(prev) = &previous {
                assert!(m.iter().zip(prev.iter()).all(|(a, b)| a <= b), "δ={delta}");
            }
            previous = Some(m);
        }
    }
}

#[test]
fn pi_tilde_tends_to_identity_for_old_ages() {
    let model = two_dim(DMatrix::from_element(4, 4, 0.25), exp(1.0), gamma(2.0, 1.0), exp(1.0), 0.2);
    let s = SVector::real(vec![0.7, -0.4]);
    let far = pi_tilde(&model, &s, 60.0).unwrap();
    let identity = DMatrix::<Complex64>::identity(4, 4);
    assert!((far - identity).camax() < 1e-12);
    let diag: DVector<f64> = pi_tilde(&model, &SVector::zero(2), 0.3).unwrap().diagonal().map(|c| c.re);
    assert!(diag.iter().all(|v| (*v - 1.0).abs() < 1e-14));
}
