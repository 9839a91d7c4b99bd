use ies_optim::miqp::{solve_miqp_logged, NodeStatus};
use ies_optim::{enumerate_exhaustive, solve_miqp, MiqpOptions, MiqpProblem, MiqpStatus, QuadraticProgram, SparseRows};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small program with `k` complementarity pairs linearized by big-M:
/// x (n continuous), λ (k multipliers), ν (k binaries).
fn complementarity_instance(seed: u64, n: usize, k: usize) -> MiqpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 100.0;
    let nv = n + 2 * k;
    let mut qp = QuadraticProgram::new(nv);
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, rng.gen_range(0.5..2.0)));
    }
    for i in 0..k {
        trip.push((n + i, n + i, rng.gen_range(0.0..0.5)));
    }
    qp.q = SparseRows::from_triplets(nv, nv, &trip);
    for j in 0..n + k {
        qp.c[j] = rng.gen_range(-3.0..3.0);
    }
    for j in 0..n {
        qp.lb[j] = -5.0;
        qp.ub[j] = 5.0;
    }
    for i in 0..k {
        let lam = n + i;
        let nu = n + k + i;
        qp.lb[lam] = 0.0;
        qp.ub[lam] = m;
        qp.lb[nu] = 0.0;
        qp.ub[nu] = 1.0;
        // g·x ≤ h
        let g: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        let h = rng.gen_range(0.0..2.0);
        qp.g_in.push_row(&g);
        qp.h_in.push(h);
        // h − g·x ≤ νM
        let mut row: Vec<(usize, f64)> = g.iter().map(|&(j, a)| (j, -a)).collect();
        row.push((nu, -m));
        qp.g_in.push_row(&row);
        qp.h_in.push(-h);
        // λ + νM ≤ M
        qp.g_in.push_row(&[(lam, 1.0), (nu, m)]);
        qp.h_in.push(m);
    }
    // coupling between multipliers and primal variables
    if k > 0 {
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).chain((0..k).map(|i| (n + i, 1.0))).collect();
        qp.a_eq.push_row(&row);
        qp.b_eq.push(rng.gen_range(0.0..2.0));
    }
    MiqpProblem { qp, binaries: (n + k..n + 2 * k).collect() }
}

#[test]
fn quadratic_of_single_binary() {
    let mut qp = QuadraticProgram::new(1);
    qp.q = SparseRows::from_triplets(1, 1, &[(0, 0, 2.0)]);
    qp.c = vec![-1.2];
    qp.constant = 0.36;
    qp.lb = vec![0.0];
    qp.ub = vec![1.0];
    let r = solve_miqp(&MiqpProblem { qp, binaries: vec![0] }, &MiqpOptions::default()).unwrap();
    assert_eq!(r.x, vec![1.0]);
    assert!((r.objective - 0.16).abs() < 1e-12);
}

#[test]
fn pre_resolved_pairs_need_one_node() {
    // slack identically zero: x ∈ [1, 1], slack = 1 − x
    let m = 50.0;
    let mut qp = QuadraticProgram::new(3);
    qp.q = SparseRows::from_triplets(3, 3, &[(1, 1, 1.0)]);
    qp.c = vec![0.0, -1.0, 0.0];
    qp.lb = vec![1.0, 0.0, 0.0];
    qp.ub = vec![1.0, m, 1.0];
    qp.g_in.push_row(&[(0, -1.0), (2, -m)]);
    qp.h_in.push(-1.0);
    qp.g_in.push_row(&[(1, 1.0), (2, m)]);
    qp.h_in.push(m);
    let p = MiqpProblem { qp, binaries: vec![2] };
    let r = solve_miqp(&p, &MiqpOptions::default()).unwrap();
    assert_eq!(r.status, MiqpStatus::Optimal);
    assert_eq!(r.nodes, 1);
    assert_eq!(r.presolve_fixed, 1);
    assert!((r.x[1] - 1.0).abs() < 1e-9);
}

#[test]
fn no_binaries_matches_convex_solve() {
    let p = complementarity_instance(7, 4, 0);
    let e = enumerate_exhaustive(&p).unwrap();
    let s = ies_optim::solve_convex_qp(&p.qp, &Default::default()).unwrap();
    assert_eq!(e.nodes, 1);
    assert!((e.objective - s.objective).abs() < 1e-12);
}

#[test]
fn search_log_has_one_line_per_node() {
    let p = complementarity_instance(3, 3, 5);
    let mut buf: Vec<u8> = Vec::new();
    let r = solve_miqp_logged(&p, &MiqpOptions::default(), Some(&mut buf)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let solved = text.lines().filter(|l| !l.ends_with("pruned")).count();
    assert_eq!(solved, r.nodes);
    for line in text.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!((f[0], f[2], f[4], f[6]), ("node", "depth", "bound", "status"));
    }
}

#[test]
fn node_limit_reports_status() {
    let p = complementarity_instance(11, 3, 8);
    let r = solve_miqp(&p, &MiqpOptions { node_limit: 1, presolve: false, ..Default::default() }).unwrap();
    assert!(r.nodes <= 1);
    assert!(matches!(r.status, MiqpStatus::NodeLimit | MiqpStatus::Optimal | MiqpStatus::Infeasible));
}

fn check_binaries(p: &MiqpProblem, x: &[f64]) {
    for &b in &p.binaries {
        assert!(x[b] == 0.0 || x[b] == 1.0);
    }
    assert!(p.qp.max_violation(x) <= 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn matches_exhaustive_enumeration(seed in any::<u64>(), n in 2usize..5, k in 1usize..8) {
        let p = complementarity_instance(seed, n, k);
        let e = enumerate_exhaustive(&p).unwrap();
        let r = solve_miqp(&p, &MiqpOptions::default()).unwrap();
        prop_assert_eq!(e.status == MiqpStatus::Infeasible, r.status == MiqpStatus::Infeasible);
        if e.status != MiqpStatus::Infeasible {
            prop_assert_eq!(r.status, MiqpStatus::Optimal);
            prop_assert!((r.objective - e.objective).abs() <= 1e-5, "{} vs {}", r.objective, e.objective);
            prop_assert!(r.gap <= 1e-6);
            prop_assert!(r.bound <= r.objective + 1e-9);
            check_binaries(&p, &r.x);
        }
    }

    #[test]
    fn node_bounds_are_valid_and_incumbent_monotone(seed in any::<u64>(), k in 2usize..7) {
        let p = complementarity_instance(seed, 3, k);
        let r = solve_miqp(&p, &MiqpOptions { record_nodes: true, presolve: false, ..Default::default() }).unwrap();
        let mut last = f64::INFINITY;
        for rec in &r.node_log {
            prop_assert!(rec.incumbent <= last);
            last = rec.incumbent;
            if matches!(rec.status, NodeStatus::Branched | NodeStatus::Integral | NodeStatus::Fathomed) {
                let mut sub = p.clone();
                for &(b, v) in &rec.fixings {
                    sub.qp.lb[b] = v;
                    sub.qp.ub[b] = v;
                }
                let e = enumerate_exhaustive(&sub).unwrap();
                prop_assert!(rec.bound <= e.objective + 1e-6, "node {} bound {} subtree {}", rec.id, rec.bound, e.objective);
            }
        }
    }

    #[test]
    fn independent_of_worker_count(seed in any::<u64>(), k in 3usize..8) {
        let p = complementarity_instance(seed, 3, k);
        let base = MiqpOptions { batch: 4, ..Default::default() };
        let a = solve_miqp(&p, &MiqpOptions { workers: 1, ..base.clone() }).unwrap();
        let b = solve_miqp(&p, &MiqpOptions { workers: 3, ..base }).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.nodes, b.nodes);
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}

