mod common;

use common::*;
use ies_optim::qp::dual_objective;
use ies_optim::{kkt_residuals, solve_convex_qp, QpMethod, QpOptions, QpStatus, QuadraticProgram, SparseRows};
use proptest::prelude::*;

fn opts(method: QpMethod) -> QpOptions {
    QpOptions { method, ..QpOptions::default() }
}

fn x_squared_at_least_one() -> QuadraticProgram {
    let mut qp = QuadraticProgram::new(1);
    qp.q = SparseRows::from_triplets(1, 1, &[(0, 0, 2.0)]);
    qp.g_in.push_row(&[(0, -1.0)]);
    qp.h_in.push(-1.0);
    qp
}

#[test]
fn hand_kkt_example() {
    for m in [QpMethod::ActiveSet, QpMethod::InteriorPoint] {
        let s = solve_convex_qp(&x_squared_at_least_one(), &opts(m)).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-10);
        assert!((s.z_in[0] - 2.0).abs() < 1e-9);
        assert!(s.residuals.max() < 1e-12);
    }
}

#[test]
fn residual_of_perturbed_point() {
    let qp = x_squared_at_least_one();
    let mut s = solve_convex_qp(&qp, &opts(QpMethod::ActiveSet)).unwrap();
    s.x[0] += 0.1;
    let r = kkt_residuals(&qp, &s);
    assert!((r.stationarity - 0.2).abs() < 1e-12);
}

#[test]
fn interior_point_with_zero_multiplier_has_no_complementarity_residual() {
    let qp = x_squared_at_least_one();
    let mut s = solve_convex_qp(&qp, &opts(QpMethod::ActiveSet)).unwrap();
    s.x[0] = 3.0;
    s.z_in[0] = 0.0;
    assert_eq!(kkt_residuals(&qp, &s).complementarity, 0.0);
}

#[test]
fn unconstrained_centering() {
    // ½‖x − 1‖² = ½xᵀx − 1ᵀx + n/2
    let n = 5;
    let mut qp = QuadraticProgram::new(n);
    qp.q = SparseRows::from_triplets(n, n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>());
    qp.c = vec![-1.0; n];
    qp.constant = n as f64 / 2.0;
    for m in [QpMethod::ActiveSet, QpMethod::InteriorPoint] {
        let s = solve_convex_qp(&qp, &opts(m)).unwrap();
        assert!(s.x.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(s.objective.abs() < 1e-12);
    }
}

#[test]
fn random_instances_match_projected_gradient_oracle() {
    for seed in 0..50u64 {
        let n = 2 + (seed as usize * 7) % 29;
        let m_eq = (seed as usize) % 4;
        let m_in = (seed as usize * 3) % 12;
        let n_box = (seed as usize) % 5;
        let qp = random_pd_qp(seed, n, m_eq.min(n - 1), m_in, n_box);
        let oracle = dual_projected_gradient(&qp, 40_000);
        for m in [QpMethod::ActiveSet, QpMethod::InteriorPoint] {
            let s = solve_convex_qp(&qp, &opts(m)).unwrap();
            assert_eq!(s.status, QpStatus::Optimal, "seed {seed} {m:?}");
            assert!(
                (s.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
                "seed {seed} {m:?}: solver {} oracle {}",
                s.objective,
                oracle
            );
        }
    }
}

#[test]
fn singular_box_instances_match_projected_gradient() {
    for seed in 0..20u64 {
        let n = 3 + (seed as usize) % 20;
        let qp = random_box_qp(seed, n, 1 + n / 3);
        let (_, oracle) = box_projected_gradient(&qp, 100_000);
        for m in [QpMethod::ActiveSet, QpMethod::InteriorPoint] {
            let s = solve_convex_qp(&qp, &opts(m)).unwrap();
            assert_eq!(s.status, QpStatus::Optimal, "seed {seed}");
            assert!(s.objective <= oracle + 1e-9, "seed {seed} {m:?}: {} vs {}", s.objective, oracle);
            assert!((s.objective - oracle).abs() < 1e-6, "seed {seed} {m:?}: {} vs {}", s.objective, oracle);
        }
    }
}

#[test]
fn detects_infeasible_and_unbounded() {
    let mut qp = QuadraticProgram::new(2);
    qp.g_in.push_row(&[(0, 1.0), (1, 1.0)]);
    qp.h_in.push(-1.0);
    qp.lb = vec![0.0, 0.0];
    for m in [QpMethod::ActiveSet, QpMethod::InteriorPoint] {
        assert_eq!(solve_convex_qp(&qp, &opts(m)).unwrap().status, QpStatus::Infeasible);
    }
    let mut lp = QuadraticProgram::new(1);
    lp.c = vec![-1.0];
    lp.lb = vec![0.0];
    assert_eq!(solve_convex_qp(&lp, &opts(QpMethod::ActiveSet)).unwrap().status, QpStatus::Unbounded);
}

#[test]
fn rejects_indefinite_quadratic() {
    let mut qp = QuadraticProgram::new(2);
    qp.q = SparseRows::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
    assert!(solve_convex_qp(&qp, &QpOptions::default()).is_err());
}

fn arb_instance() -> impl Strategy<Value = QuadraticProgram> {
    (any::<u64>(), 2usize..20, 0usize..3, 0usize..10, 0usize..4)
        .prop_map(|(seed, n, me, mi, nb)| random_pd_qp(seed, n, me.min(n - 1), mi, nb))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimal_solutions_satisfy_kkt(qp in arb_instance()) {
        for m in [QpMethod::ActiveSet, QpMethod::InteriorPoint] {
            let s = solve_convex_qp(&qp, &opts(m)).unwrap();
            prop_assert_eq!(s.status, QpStatus::Optimal);
            let r = kkt_residuals(&qp, &s);
            prop_assert!(r.max() <= 1e-8, "{:?} {:?}", m, r);
        }
    }

    #[test]
    fn weak_duality(qp in arb_instance()) {
        let s = solve_convex_qp(&qp, &opts(QpMethod::ActiveSet)).unwrap();
        prop_assert!(dual_objective(&qp, &s) <= s.objective + 1e-8 * (1.0 + s.objective.abs()));
        prop_assert!((dual_objective(&qp, &s) - s.dual_objective).abs() < 1e-12 * (1.0 + s.objective.abs()));
    }

    #[test]
    fn argmin_is_scale_invariant(qp in arb_instance(), scale in 0.01f64..100.0) {
        let a = solve_convex_qp(&qp, &opts(QpMethod::ActiveSet)).unwrap();
        let mut scaled = qp.clone();
        let trip: Vec<(usize, usize, f64)> = (0..qp.n())
            .flat_map(|i| {
                let (c, v) = qp.q.row(i);
                c.iter().zip(v).map(move |(&j, &x)| (i, j, x * scale)).collect::<Vec<_>>()
            })
            .collect();
        scaled.q = SparseRows::from_triplets(qp.n(), qp.n(), &trip);
        scaled.c.iter_mut().for_each(|c| *c *= scale);
        let b = solve_convex_qp(&scaled, &opts(QpMethod::ActiveSet)).unwrap();
        for (u, v) in a.x.iter().zip(&b.x) {
            prop_assert!((u - v).abs() < 1e-7, "{} vs {}", u, v);
        }
    }

    #[test]
    fn deterministic(qp in arb_instance()) {
        for m in [QpMethod::ActiveSet, QpMethod::InteriorPoint] {
            let a = solve_convex_qp(&qp, &opts(m)).unwrap();
            let b = solve_convex_qp(&qp, &opts(m)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
