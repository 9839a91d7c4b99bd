//! Closed-form follower responses and equilibrium verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ies_optim::{solve_convex_qp, QpOptions, QpStatus};

use crate::bilevel::{build_dispatch_model, build_lower_qp, demand_bounds, lower_row, project_to_mean, AssemblyError, DemandBounds, Prices, ScheduleSolution};
use crate::data::ScenarioConfig;

/// Follower decision and cost at given prices.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerResponse {
    pub shift: Vec<f64>,
    pub cut_res: Vec<f64>,
    pub cut_pub: Vec<f64>,
    pub objective: f64,
}

impl FollowerResponse {
    /// Decision in lower-level order: shift, residential cut, public cut.
    pub fn as_vector(&self) -> Vec<f64> {
        let mut v = self.shift.clone();
        v.extend_from_slice(&self.cut_res);
        v.extend_from_slice(&self.cut_pub);
        v
    }
}

/// User cost F at a decision.
pub fn follower_cost(cfg: &ScenarioConfig, prices: &Prices, shift: &[f64], cut_res: &[f64], cut_pub: &[f64]) -> f64 {
    let p = &cfg.profile;
    (0..cfg.horizon)
        .map(|t| {
            prices.electricity[t] * (p.p_load_base[t] + shift[t])
                + prices.heat[t] * (p.h_load_res_base[t] - cut_res[t] + p.h_load_pub_base[t] - cut_pub[t])
                + cfg.comfort_penalty_psi * (cut_res[t] * cut_res[t] + cut_pub[t] * cut_pub[t])
        })
        .sum()
}

/// Hours in ascending electricity price, earliest first among ties.
fn price_order(prices: &Prices) -> Vec<usize> {
    let mut order: Vec<usize> = (0..prices.electricity.len()).collect();
    order.sort_by(|&a, &b| prices.electricity[a].total_cmp(&prices.electricity[b]).then(a.cmp(&b)));
    order
}

/// Greedy shift allocation: every hour starts at its lower bound and the
/// remaining budget fills the cheapest hours first. Returns the allocation and
/// the marginal hour.
fn greedy_shift(prices: &Prices, bounds: &DemandBounds) -> Result<(Vec<f64>, usize), AssemblyError> {
    let mut shift = bounds.shift_min.clone();
    let lo: f64 = shift.iter().sum();
    let hi: f64 = bounds.shift_max.iter().sum();
    if bounds.shift_total < lo - 1e-9 || bounds.shift_total > hi + 1e-9 {
        return Err(AssemblyError::ShiftBudget { budget: bounds.shift_total, lo, hi });
    }
    let order = price_order(prices);
    let mut remaining = bounds.shift_total - lo;
    let mut marginal = order[0];
    for &t in &order {
        if remaining <= 0.0 {
            break;
        }
        let add = remaining.min(bounds.shift_max[t] - bounds.shift_min[t]);
        if add > 0.0 {
            shift[t] += add;
            remaining -= add;
            marginal = t;
        }
    }
    Ok((shift, marginal))
}

pub fn follower_best_response_with(cfg: &ScenarioConfig, prices: &Prices, bounds: &DemandBounds) -> Result<FollowerResponse, AssemblyError> {
    let (shift, _) = greedy_shift(prices, bounds)?;
    let two_psi = 2.0 * cfg.comfort_penalty_psi;
    let cut = |b: &[f64]| -> Vec<f64> { (0..cfg.horizon).map(|t| (prices.heat[t] / two_psi).clamp(0.0, b[t])).collect() };
    let cut_res = cut(&bounds.cut_max[0]);
    let cut_pub = cut(&bounds.cut_max[1]);
    let objective = follower_cost(cfg, prices, &shift, &cut_res, &cut_pub);
    Ok(FollowerResponse { shift, cut_res, cut_pub, objective })
}

/// Best response of the users to `prices` under the configured mode.
pub fn follower_best_response(prices: &Prices, cfg: &ScenarioConfig) -> Result<FollowerResponse, AssemblyError> {
    let bounds = demand_bounds(cfg, cfg.mode)?;
    follower_best_response_with(cfg, prices, &bounds)
}

/// Multipliers (ε, λ in lower-level row order) certifying a closed-form response.
pub fn follower_multipliers(cfg: &ScenarioConfig, prices: &Prices, bounds: &DemandBounds) -> Result<(f64, Vec<f64>), AssemblyError> {
    let t_n = cfg.horizon;
    let (shift, marginal) = greedy_shift(prices, bounds)?;
    let eps = -prices.electricity[marginal];
    let mut lam = vec![0.0; 6 * t_n];
    for t in 0..t_n {
        let g = prices.electricity[t] + eps;
        if t != marginal {
            let at_min = shift[t] <= bounds.shift_min[t];
            let at_max = shift[t] >= bounds.shift_max[t];
            if g > 0.0 && at_min {
                lam[lower_row(0, t, t_n)] = g;
            } else if g < 0.0 && at_max {
                lam[lower_row(1, t, t_n)] = -g;
            }
        }
        let two_psi = 2.0 * cfg.comfort_penalty_psi;
        for z in 0..2 {
            let b = bounds.cut_max[z][t];
            let kh = prices.heat[t];
            let c = (kh / two_psi).clamp(0.0, b);
            // 2ψc − κ_h − λ_lo + λ_hi = 0
            let r = two_psi * c - kh;
            if r < 0.0 {
                lam[lower_row(2 * z + 3, t, t_n)] = -r;
            } else if r > 0.0 {
                lam[lower_row(2 * z + 2, t, t_n)] = r;
            }
        }
    }
    Ok((eps, lam))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrial {
    pub prices: Prices,
    pub f_analytic: f64,
    pub f_numeric: f64,
    /// Largest primal deviation over hours where the response is unique.
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub trials: Vec<OracleTrial>,
}

impl OracleReport {
    pub fn passed(&self) -> usize {
        self.trials.iter().filter(|t| t.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.trials.len()
    }

    pub fn max_objective_gap(&self) -> f64 {
        self.trials.iter().map(|t| (t.f_analytic - t.f_numeric).abs()).fold(0.0, f64::max)
    }
}

/// Uniform prices in the boxes, projected onto the mean equalities.
pub fn random_prices(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Prices {
    let pb = &cfg.price_bounds;
    let e: Vec<f64> = (0..cfg.horizon).map(|_| rng.gen_range(pb.e_min..=pb.e_max)).collect();
    let h: Vec<f64> = (0..cfg.horizon).map(|_| rng.gen_range(pb.h_min..=pb.h_max)).collect();
    Prices {
        electricity: project_to_mean(&e, pb.e_min, pb.e_max, pb.e_mean),
        heat: project_to_mean(&h, pb.h_min, pb.h_max, pb.h_mean),
    }
}

pub const ORACLE_TOL: f64 = 1e-6;

/// Compares the closed-form response with a numeric solve of the follower QP.
pub fn verify_oracle_vs_numeric(cfg: &ScenarioConfig, n_trials: usize, seed: u64) -> Result<OracleReport, AssemblyError> {
    let bounds = demand_bounds(cfg, cfg.mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_n = cfg.horizon;
    let mut trials = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let prices = random_prices(cfg, &mut rng);
        trials.push(compare_at(cfg, &bounds, prices)?);
    }
    let _ = t_n;
    Ok(OracleReport { trials })
}

fn compare_at(cfg: &ScenarioConfig, bounds: &DemandBounds, prices: Prices) -> Result<OracleTrial, AssemblyError> {
    let t_n = cfg.horizon;
    let analytic = follower_best_response_with(cfg, &prices, bounds)?;
    let qp = build_lower_qp(cfg, &prices, bounds)?;
    let sol = solve_convex_qp(&qp, &QpOptions::default()).map_err(AssemblyError::NotConvex)?;
    if sol.status != QpStatus::Optimal {
        return Ok(OracleTrial { prices, f_analytic: analytic.objective, f_numeric: f64::NAN, max_deviation: f64::INFINITY, passed: false });
    }
    let f_numeric = follower_cost(cfg, &prices, &sol.x[..t_n], &sol.x[t_n..2 * t_n], &sol.x[2 * t_n..]);
    let a = analytic.as_vector();
    let mut max_deviation: f64 = 0.0;
    for j in 0..3 * t_n {
        let t = j % t_n;
        // shifts are unique only when no other hour shares the price
        let tied = j < t_n && (0..t_n).any(|s| s != t && prices.electricity[s] == prices.electricity[t]);
        if !tied {
            max_deviation = max_deviation.max((a[j] - sol.x[j]).abs());
        }
    }
    let passed = (analytic.objective - f_numeric).abs() <= ORACLE_TOL && max_deviation <= ORACLE_TOL;
    Ok(OracleTrial { prices, f_analytic: analytic.objective, f_numeric, max_deviation, passed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub prices: Prices,
    /// Leader profit with the follower's best response and optimal redispatch;
    /// `None` when the redispatch is infeasible.
    pub profit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub follower_cost_solution: f64,
    pub follower_cost_best: f64,
    pub follower_ok: bool,
    pub leader_profit: f64,
    pub perturbations: Vec<Perturbation>,
    /// Largest profit improvement found over the solution.
    pub max_improvement: f64,
    pub tolerance: f64,
    pub leader_ok: bool,
    /// Solver status of the solution being checked.
    pub solution_status: String,
}

impl EquilibriumReport {
    pub fn passed(&self) -> bool {
        self.follower_ok && self.leader_ok
    }

    pub fn infeasible_perturbations(&self) -> usize {
        self.perturbations.iter().filter(|p| p.profit.is_none()).count()
    }
}

/// Leader profit at `prices` when the users best-respond and generation is re-dispatched.
pub fn leader_profit_at(cfg: &ScenarioConfig, mode: u8, bounds: &DemandBounds, prices: &Prices) -> Result<Option<f64>, AssemblyError> {
    let resp = follower_best_response_with(cfg, prices, bounds)?;
    let model = build_dispatch_model(cfg, mode, prices, &resp.as_vector())?;
    let sol = solve_convex_qp(&model.problem.qp, &QpOptions::default()).map_err(AssemblyError::NotConvex)?;
    if sol.status != QpStatus::Optimal {
        return Ok(None);
    }
    let revenue = resp.objective - cfg.comfort_penalty_psi * resp.cut_res.iter().chain(&resp.cut_pub).map(|c| c * c).sum::<f64>();
    Ok(Some(revenue - sol.objective))
}

/// Relative tolerance used on the leader side, scaled by max(1, |profit|).
pub const EQUILIBRIUM_REL_TOL: f64 = 1e-6;

/// Checks that the users play a best response and that no sampled price
/// deviation raises the leader's profit.
pub fn equilibrium_check(
    solution: &ScheduleSolution,
    leader_profit: f64,
    status: &str,
    cfg: &ScenarioConfig,
    mode: u8,
    n_perturb: usize,
    step: f64,
    seed: u64,
) -> Result<EquilibriumReport, AssemblyError> {
    let bounds = demand_bounds(cfg, mode)?;
    let best = follower_best_response_with(cfg, &solution.prices, &bounds)?;
    let played = follower_cost(cfg, &solution.prices, &solution.shift, &solution.cut[0], &solution.cut[1]);
    let follower_ok = (played - best.objective).abs() <= ORACLE_TOL * best.objective.abs().max(1.0);
    let tolerance = EQUILIBRIUM_REL_TOL * leader_profit.abs().max(1.0);
    let pb = &cfg.price_bounds;
    let mut perturbations = Vec::with_capacity(n_perturb);
    let mut max_improvement = f64::NEG_INFINITY;
    for k in 0..n_perturb {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
        let e: Vec<f64> = solution.prices.electricity.iter().map(|v| v + step * rng.gen_range(-1.0..=1.0)).collect();
        let h: Vec<f64> = solution.prices.heat.iter().map(|v| v + step * rng.gen_range(-1.0..=1.0)).collect();
        let prices = if step == 0.0 {
            solution.prices.clone()
        } else {
            Prices {
                electricity: project_to_mean(&e, pb.e_min, pb.e_max, pb.e_mean),
                heat: project_to_mean(&h, pb.h_min, pb.h_max, pb.h_mean),
            }
        };
        let profit = if step == 0.0 { Some(leader_profit) } else { leader_profit_at(cfg, mode, &bounds, &prices)? };
        if let Some(p) = profit {
            max_improvement = max_improvement.max(p - leader_profit);
        }
        perturbations.push(Perturbation { prices, profit });
    }
    if !max_improvement.is_finite() {
        max_improvement = 0.0;
    }
    Ok(EquilibriumReport {
        follower_cost_solution: played,
        follower_cost_best: best.objective,
        follower_ok,
        leader_profit,
        perturbations,
        max_improvement,
        tolerance,
        leader_ok: max_improvement <= tolerance,
        solution_status: status.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Existence and uniqueness conditions of the game.
pub fn existence_uniqueness_check(cfg: &ScenarioConfig) -> Vec<ConditionCheck> {
    let psi = cfg.comfort_penalty_psi;
    let p = &cfg.profile;
    let zero_e: Vec<usize> = (0..p.p_load_base.len()).filter(|&t| !(p.p_load_base[t] > 0.0)).collect();
    let zero_h: Vec<usize> = (0..p.h_load_res_base.len()).filter(|&t| !(p.h_load_res_base[t] + p.h_load_pub_base[t] > 0.0)).collect();
    vec![
        ConditionCheck { name: "follower convexity (2psi > 0)", passed: psi > 0.0, detail: format!("psi = {psi}") },
        ConditionCheck {
            name: "shift cost increasing (electricity price floor > 0)",
            passed: cfg.price_bounds.e_min > 0.0,
            detail: format!("e_min = {}", cfg.price_bounds.e_min),
        },
        ConditionCheck {
            name: "leader monotone in electricity price (loads > 0)",
            passed: zero_e.is_empty(),
            detail: if zero_e.is_empty() { "all hours positive".into() } else { format!("zero load at hours {zero_e:?}") },
        },
        ConditionCheck {
            name: "leader monotone in heat price (heat loads > 0)",
            passed: zero_h.is_empty(),
            detail: if zero_h.is_empty() { "all hours positive".into() } else { format!("zero heat load at hours {zero_h:?}") },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_config;

    fn bounds(t: usize, w: f64, b: f64) -> DemandBounds {
        DemandBounds {
            shift_min: vec![-w; t],
            shift_max: vec![w; t],
            shift_total: 0.0,
            cut_max: [vec![b; t], vec![b; t]],
            comfort_flags: Default::default(),
        }
    }

    #[test]
    fn cut_examples() {
        let mut cfg = reference_config().truncated(3);
        cfg.comfort_penalty_psi = 0.5;
        let p = Prices { electricity: vec![65.0; 3], heat: vec![50.0; 3] };
        let r = follower_best_response_with(&cfg, &p, &bounds(3, 1.0, 80.0)).unwrap();
        assert_eq!(r.cut_res, vec![50.0; 3]);
        let r = follower_best_response_with(&cfg, &p, &bounds(3, 1.0, 0.0)).unwrap();
        assert_eq!(r.cut_pub, vec![0.0; 3]);
        let r = follower_best_response_with(&cfg, &p, &bounds(3, 1.0, 20.0)).unwrap();
        assert_eq!(r.cut_res, vec![20.0; 3]);
    }

    #[test]
    fn greedy_fills_cheapest_hours() {
        let cfg = reference_config().truncated(4);
        let p = Prices { electricity: vec![70.0, 50.0, 80.0, 60.0], heat: vec![50.0; 4] };
        let r = follower_best_response_with(&cfg, &p, &bounds(4, 2.0, 0.0)).unwrap();
        assert_eq!(r.shift, vec![-2.0, 2.0, -2.0, 2.0]);
        assert_eq!(r.shift.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn multipliers_certify_response() {
        let cfg = reference_config();
        let b = demand_bounds(&cfg, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p = random_prices(&cfg, &mut rng);
            let r = follower_best_response_with(&cfg, &p, &b).unwrap();
            let (eps, lam) = follower_multipliers(&cfg, &p, &b).unwrap();
            let qp = build_lower_qp(&cfg, &p, &b).unwrap();
            let x = r.as_vector();
            let mut g = qp.gradient(&x);
            qp.a_eq.add_transpose_mul(&[eps], &mut g);
            qp.g_in.add_transpose_mul(&lam, &mut g);
            assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
            for i in 0..qp.g_in.n_rows() {
                let slack = qp.h_in[i] - qp.g_in.row_dot(i, &x);
                assert!(lam[i] >= 0.0 && slack >= -1e-9 && (lam[i] * slack).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn psi_scaling() {
        let cfg = reference_config();
        let mut cfg10 = cfg.clone();
        cfg10.comfort_penalty_psi *= 10.0;
        let mut big = demand_bounds(&cfg, 5).unwrap();
        big.cut_max = [vec![1e6; cfg.horizon], vec![1e6; cfg.horizon]];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_prices(&cfg, &mut rng);
        let a = follower_best_response_with(&cfg, &p, &big).unwrap();
        let b = follower_best_response_with(&cfg10, &p, &big).unwrap();
        for t in 0..cfg.horizon {
            assert!((b.cut_res[t] - 0.1 * a.cut_res[t]).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_price_trial() {
        let cfg = reference_config();
        let b = demand_bounds(&cfg, 5).unwrap();
        let p = Prices::flat(&cfg);
        let trial = compare_at(&cfg, &b, p).unwrap();
        assert!(trial.passed, "{trial:?}");
    }

    #[test]
    fn conditions() {
        let cfg = reference_config();
        assert!(existence_uniqueness_check(&cfg).iter().all(|c| c.passed));
        let mut bad = cfg.clone();
        bad.comfort_penalty_psi = 0.0;
        assert!(!existence_uniqueness_check(&bad)[0].passed);
        let mut zero = cfg.clone();
        zero.profile.p_load_base[5] = 0.0;
        assert!(!existence_uniqueness_check(&zero)[2].passed);
    }
}
