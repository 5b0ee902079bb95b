mod common;

use common::{random_problem, rng};
use eot_core::clvr::{run_clvr, Clvr};
use eot_core::oracle::lp_transport_simplex;
use eot_core::{approx_ot, CostMatrix, Fidelity, Measure, Method, PipelineConfig, Problem, SolverOptions, TransportPlan};
use ndarray::Array2;

#[test]
fn lazy_z_matches_the_dual_iterate() {
    let mut r = rng(20);
    let p = random_problem(&mut r, 6, 4, 0.01);
    let mut solver = Clvr::new(&p, p.gamma, 3, Fidelity::Corrected).unwrap();
    for _ in 0..2000 {
        solver.step();
        let s = solver.state();
        let z = s.z_matrix();
        for i in 0..6 {
            for j in 0..4 {
                assert!((z[[i, j]] - s.dual.lambda[i] - s.dual.mu[j]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn averaging_weights_are_the_step_sizes() {
    let mut r = rng(21);
    let p = random_problem(&mut r, 3, 5, 0.05);
    let mut solver = Clvr::new(&p, p.gamma, 0, Fidelity::Corrected).unwrap();
    for _ in 0..300 {
        solver.step();
        let s = solver.state();
        assert!((s.avg_weight - s.step_sum).abs() <= 1e-10 * s.step_sum);
        assert!(s.plan.as_slice().iter().all(|x| *x >= 0.0));
    }
}

#[test]
fn same_seed_same_run_and_different_seeds_differ() {
    let mut r = rng(22);
    let p = random_problem(&mut r, 5, 5, 0.01);
    let opts = SolverOptions::with_max_iter(500);
    let a = run_clvr(&p, 1e-3, p.gamma, 42, &opts).unwrap();
    let b = run_clvr(&p, 1e-3, p.gamma, 42, &opts).unwrap();
    let c = run_clvr(&p, 1e-3, p.gamma, 43, &opts).unwrap();
    assert_eq!(a.plan.as_slice(), b.plan.as_slice());
    assert_eq!(a.dual.lambda, b.dual.lambda);
    assert_ne!(a.plan.as_slice(), c.plan.as_slice());
}

#[test]
fn zero_cost_uniform_instance_converges_to_uniform() {
    let u = Measure::uniform(3).unwrap();
    let p = Problem::new(u.clone(), u.clone(), CostMatrix::new(Array2::zeros((3, 3))).unwrap(), 0.1).unwrap();
    let result = run_clvr(&p, 1e-6, p.gamma, 5, &SolverOptions::with_max_iter(200_000)).unwrap();
    assert!(result.converged);
    assert!(result.plan.l1_distance(&TransportPlan::product(&u, &u)) < 1e-4);
}

#[test]
fn expected_excess_over_seeds_is_within_epsilon() {
    let eps = 0.05;
    for instance in 0..3 {
        let mut r = rng(30 + instance);
        let p = random_problem(&mut r, 4, 4, 1.0);
        let lp = lp_transport_simplex(&p.a, &p.b, &p.cost).unwrap();
        let mean: f64 = (0..10)
            .map(|seed| {
                let cfg = PipelineConfig::new(Method::Clvr, eps).seed(seed).trace_every(0);
                let out = approx_ot(&p.a, &p.b, &p.cost, &cfg).unwrap();
                out.cost - lp.value
            })
            .sum::<f64>()
            / 10.0;
        assert!(mean <= eps, "instance {instance}: mean excess {mean}");
    }
}

#[test]
fn printed_accumulator_breaks_the_z_invariant() {
    let mut r = rng(23);
    let p = random_problem(&mut r, 4, 4, 0.05);
    let mut solver = Clvr::new(&p, p.gamma, 1, Fidelity::Printed).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        solver.step();
        let s = solver.state();
        let z = s.z_matrix();
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((z[[i, j]] - s.dual.lambda[i] - s.dual.mu[j]).abs());
            }
        }
    }
    assert!(worst > 1e-6);
}
