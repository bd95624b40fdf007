mod common;

use common::{all_supports, feasible_by_sets, random_instance, random_psd, random_support, rel_err, rng};
use proptest::prelude::*;
use rand::Rng;
use sparsevary::linalg::Cholesky;
use sparsevary::master::{solve, Cut, SolveLimits};
use sparsevary::oracle::identities::{check_exact_relaxation, masked_system, pseudoinverse_candidate, verify_penrose};
use sparsevary::oracle::{beta_star, eval_cost, eval_cost_extension, eval_cost_fractional, evaluate};
use sparsevary::stepwise::{removal_iteration_bound, stepwise_fit};
use sparsevary::{build_quadform, check_feasible, true_objective, SimilarityGraph, SparsityBudget, Support};

fn graph(kind: u8, vertices: usize) -> SimilarityGraph {
    match kind % 3 {
        0 => SimilarityGraph::chain(vertices).unwrap(),
        1 => SimilarityGraph::complete(vertices).unwrap(),
        _ => SimilarityGraph::edgeless(vertices).unwrap(),
    }
}

fn lambdas() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..5.0, 0.0f64..5.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coupling_matrix_is_psd(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 3), 3, 4, lb, ld);
        let m = build_quadform(&inst).unwrap().dense_m();
        prop_assert!(m.is_symmetric(1e-12));
        let mut shifted = m.clone();
        shifted.add_diagonal(1e-9 * m.max_abs().max(1.0));
        prop_assert!(Cholesky::factor(&shifted).is_ok());
        for _ in 0..5 {
            let v: Vec<f64> = (0..m.nrows()).map(|_| r.random_range(-1.0..1.0)).collect();
            let q: f64 = v.iter().zip(m.matvec(&v)).map(|(a, b)| a * b).sum();
            prop_assert!(q >= -1e-9 * m.max_abs().max(1.0));
        }
    }

    #[test]
    fn quadratic_form_reproduces_objective(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 3), 4, 5, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let beta: Vec<f64> = (0..12).map(|_| r.random_range(-2.0..2.0)).collect();
        prop_assert!(rel_err(qf.quadratic_value(&beta), true_objective(&inst, &beta)) < 1e-10);
    }

    #[test]
    fn feasibility_matches_set_arithmetic(seed in any::<u64>(), kind in any::<u8>(), kl in 1usize..4, extra in 0usize..3, kc in 0usize..6) {
        let mut r = rng(seed);
        let g = graph(kind, 4);
        let z = random_support(&mut r, 4, 5, 0.4);
        let budget = SparsityBudget::new(kl, (kl + extra).min(5), kc);
        let feasible = check_feasible(&z, &budget, &g);
        prop_assert_eq!(feasible, feasible_by_sets(&z, &budget, &g));
        if feasible {
            let looser = SparsityBudget::new(budget.local + 1, budget.global + 1, budget.change + 1);
            prop_assert!(check_feasible(&z, &looser, &g));
        }
    }

    #[test]
    fn fractional_cost_is_convex_on_segments(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas(), s in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 3), 3, 4, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let a: Vec<f64> = (0..9).map(|_| r.random_range(0.0..=1.0)).collect();
        let b: Vec<f64> = (0..9).map(|_| r.random_range(0.0..=1.0)).collect();
        let at = |w: f64| -> f64 {
            let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - w) * x + w * y).collect();
            eval_cost_fractional(&qf, &p).unwrap()
        };
        let chord = (1.0 - s) * at(0.0) + s * at(1.0);
        prop_assert!(at(s) <= chord + 1e-10 * chord.abs().max(1.0));
    }

    #[test]
    fn extension_agrees_with_fractional_cost(seed in any::<u64>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(0, 3), 3, 4, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let z: Vec<f64> = (0..9).map(|_| r.random_range(0.0..=1.0)).collect();
        let a = eval_cost_fractional(&qf, &z).unwrap();
        prop_assert!(rel_err(eval_cost_extension(&qf, &z).unwrap(), a) < 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 3), 3, 5, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let z = random_support(&mut r, 3, 3, 0.5);
        let grad = evaluate(&qf, &z).unwrap().with_gradient(&qf).unwrap().gradient.unwrap();
        let base = z.as_f64();
        let eps = 1e-6;
        for i in 0..base.len() {
            let (mut hi, mut lo) = (base.clone(), base.clone());
            hi[i] += eps;
            lo[i] -= eps;
            let fd = (eval_cost_extension(&qf, &hi).unwrap() - eval_cost_extension(&qf, &lo).unwrap()) / (2.0 * eps);
            prop_assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1.0), "coordinate {}: {} vs {}", i, fd, grad[i]);
        }
    }

    #[test]
    fn pseudoinverse_identities(seed in any::<u64>(), n in 1usize..10, lambda in 0.01f64..10.0) {
        let mut r = rng(seed);
        let rank = r.random_range(1..=n);
        let m = random_psd(&mut r, n, rank);
        let z: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let mu: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let b = pseudoinverse_candidate(&m, &z, lambda).unwrap();
        prop_assert!(verify_penrose(&masked_system(&m, &z, lambda), &b));
        let check = check_exact_relaxation(&m, &z, lambda, &mu).unwrap();
        prop_assert!(check.max_abs_diff() <= 1e-8);
    }

    #[test]
    fn cost_maps_to_objective(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 2), 3, 4, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let z = random_support(&mut r, 2, 3, 0.5);
        let beta = beta_star(&qf, &z).unwrap();
        let lhs = qf.const_term() + 2.0 * eval_cost(&qf, &z).unwrap();
        prop_assert!(rel_err(lhs, true_objective(&inst, &beta)) < 1e-8);
    }

    #[test]
    fn larger_supports_cost_less(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 3), 3, 4, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let small = random_support(&mut r, 3, 3, 0.3);
        let mut large = small.clone();
        for i in 0..9 {
            if r.random_bool(0.4) {
                large.set(i / 3, i % 3, true);
            }
        }
        let beta = beta_star(&qf, &small).unwrap();
        for (on, b) in small.bits().iter().zip(&beta) {
            if !on {
                prop_assert_eq!(*b, 0.0);
            }
        }
        prop_assert!(eval_cost(&qf, &large).unwrap() <= eval_cost(&qf, &small).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cuts_underestimate_every_binary_point(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 2), 3, 4, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let anchor = random_support(&mut r, 2, 3, 0.5);
        let cut = Cut::at(&qf, &anchor).unwrap();
        for z in all_supports(2, 3) {
            let c = eval_cost(&qf, &z).unwrap();
            prop_assert!(cut.evaluate(&z.as_f64()) <= c + 1e-9 * c.abs().max(1.0));
        }
    }

    #[test]
    fn solver_bounds_are_monotone_and_runs_repeat(seed in any::<u64>(), kind in any::<u8>(), (lb, ld) in lambdas()) {
        let mut r = rng(seed);
        let inst = random_instance(&mut r, graph(kind, 3), 3, 5, lb, ld);
        let qf = build_quadform(&inst).unwrap();
        let budget = SparsityBudget::new(2, 2, 2);
        let limits = SolveLimits::default().with_trace();
        let a = solve(&qf, &budget, None, &limits).unwrap();
        for w in a.trace.windows(2) {
            prop_assert!(w[1].lower_bound >= w[0].lower_bound - 1e-12);
            prop_assert!(w[1].upper_bound <= w[0].upper_bound + 1e-12);
        }
        prop_assert!(a.lower_bound <= a.upper_bound);
        prop_assert!(check_feasible(&a.incumbent_z, &budget, qf.graph()));
        let b = solve(&qf, &budget, None, &limits).unwrap();
        prop_assert_eq!(a.incumbent_z, b.incumbent_z);
        prop_assert_eq!(a.upper_bound, b.upper_bound);
        prop_assert_eq!(a.node_count, b.node_count);
    }

    #[test]
    fn stepwise_is_feasible_bounded_and_deterministic(seed in any::<u64>(), kind in any::<u8>(), kl in 1usize..4, extra in 0usize..3, kc in 0usize..4) {
        let mut r = rng(seed);
        let g = graph(kind, 5);
        let inst = random_instance(&mut r, g, 8, 10, 1.0, 0.5);
        let qf = build_quadform(&inst).unwrap();
        let budget = SparsityBudget::new(kl, kl + extra, kc);
        let out = stepwise_fit(&qf, &budget, seed).unwrap();
        prop_assert!(check_feasible(&out.support, &budget, qf.graph()));
        // Each iteration removes one feature from the union of the initial fits.
        prop_assert!(out.removal_iterations <= (5 * kl).min(8));
        if qf.graph().edge_count() == 0 {
            prop_assert!(out.removal_iterations as f64 <= removal_iteration_bound(5, 8, &budget));
        }
        let again = stepwise_fit(&qf, &budget, seed).unwrap();
        prop_assert_eq!(&out.support, &again.support);
        prop_assert_eq!(&out.beta, &again.beta);
        prop_assert!(Support::of_coefficients(5, 8, &again.beta).unwrap().bits().iter().zip(out.support.bits()).all(|(b, s)| !b || *s));
    }
}
