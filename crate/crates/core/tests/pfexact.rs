mod common;

use bilevel_core::bilevel::StorageSchedule;
use bilevel_core::netcase::{Branch, IndexSets, NetworkCase};
use bilevel_core::pfexact::{
    newton_power_flow, select_phi_flags, solve_exact_polar_opf, BusKind, ExactSolution, NewtonSettings,
    OpfError, OpfSettings, PfError, PfInjections,
};
use bilevel_core::physics::Network;
use common::*;
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn tie(id: usize, from_bus: usize, to_bus: usize, g: f64, b: f64, s_max: f64) -> Branch {
    Branch {
        id,
        from_bus,
        to_bus,
        g,
        b,
        g_fr: 0.0,
        b_fr: 0.0,
        g_to: 0.0,
        b_to: 0.0,
        tau: 1.0,
        sigma: 0.0,
        s_max,
    }
}

fn two_bus_lossless(load_p: f64) -> NetworkCase {
    NetworkCase {
        name: "two".into(),
        base_mva: 100.0,
        horizon: 1,
        buses: vec![bus(1, 0.9, 1.1, true), bus(2, 0.5, 1.5, false)],
        branches: vec![tie(1, 1, 2, 0.0, -10.0, 0.0)],
        generators: vec![generator(1, 1, 0.0, 10.0, 5.0)],
        loads: vec![load_at(1, 2, load_p, 0.0)],
        shunts: vec![],
        storage: None,
    }
}

fn flat_pf(case: &NetworkCase, pg: &[f64]) -> (Network<f64>, PfInjections<f64>) {
    let ix = IndexSets::build(case);
    let net = Network::from_case(case, &ix);
    let inj = PfInjections::from_dispatch(case, &ix, 0, pg, &vec![1.0; case.buses.len()], None);
    (net, inj)
}

#[test]
fn zero_load_needs_no_newton_step() {
    let case = two_bus_lossless(0.0);
    let (net, inj) = flat_pf(&case, &[0.0]);
    let sol = newton_power_flow(&net, &inj, None, &NewtonSettings::default()).unwrap();
    assert_eq!(sol.iterations, 0);
    assert_eq!(sol.v, vec![1.0, 1.0]);
    assert_eq!(sol.th, vec![0.0, 0.0]);
}

#[test]
fn two_bus_matches_sine_closed_form() {
    let case = two_bus_lossless(0.5);
    let (net, inj) = flat_pf(&case, &[0.0]);
    let sol = newton_power_flow(&net, &inj, None, &NewtonSettings::default()).unwrap();
    let d = sol.th[0] - sol.th[1];
    assert!((0.5 - 10.0 * sol.v[0] * sol.v[1] * d.sin()).abs() <= 1e-8);
    // zero reactive demand gives v2 = cos δ, hence 0.5 = 5 sin 2δ
    let delta = 0.5 * 0.1f64.asin();
    assert!((d - delta).abs() < 1e-9);
    assert!((sol.v[1] - delta.cos()).abs() < 1e-9);
}

#[test]
fn three_bus_mismatch_agrees_with_complex_oracle() {
    let case = load("three_bus.json");
    let (net, inj) = flat_pf(&case, &[0.0, 0.4]);
    let sol = newton_power_flow(&net, &inj, None, &NewtonSettings::default()).unwrap();
    assert!(*sol.mismatch_history.last().unwrap() <= 1e-8);
    let s = injections(&ybus(&case), &sol.v, &sol.th);
    let (dp, dq) = bilevel_core::pfexact::mismatch(&net, &inj, &sol.v, &sol.th);
    for i in 0..3 {
        assert!((dp[i] - (s[i].re - inj.p[i])).abs() < 1e-12);
        assert!((dq[i] - (s[i].im - inj.q[i])).abs() < 1e-12);
    }
    assert!((s[1].re - 0.4).abs() <= 1e-8);
    assert!((s[2].re + 1.0).abs() <= 1e-8 && (s[2].im + 0.2).abs() <= 1e-8);
}

#[test]
fn case14_converges_quadratically_from_flat_start() {
    let case = load("case14.m");
    let opf = solve_exact_polar_opf(&case, None, &OpfSettings::default()).unwrap();
    let ix = IndexSets::build(&case);
    let net = Network::from_case(&case, &ix);
    let inj = PfInjections::from_dispatch(&case, &ix, 0, &opf.pg[0], &opf.op.v_op[0], None);
    let sol = newton_power_flow(&net, &inj, None, &NewtonSettings::default()).unwrap();
    assert!(sol.iterations <= 6);
    let h = &sol.mismatch_history;
    let n = h.len();
    assert!(n >= 3);
    // order estimate log(m_{k+1}) / log(m_k) over the final two steps
    let order = h[n - 1].ln() / h[n - 2].ln();
    assert!(order >= 1.5, "history {h:?}");
    let err = (0..14).map(|i| (sol.v[i] - opf.op.v_op[0][i]).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6);
}

#[test]
fn power_flow_runs_in_single_precision() {
    let case = two_bus_lossless(0.5);
    let ix = IndexSets::build(&case);
    let net = Network::<f32>::from_case(&case, &ix);
    let inj = PfInjections {
        kind: vec![BusKind::Slack, BusKind::Pq],
        p: vec![0.0f32, -0.5],
        q: vec![0.0, 0.0],
        v_set: vec![1.0, 1.0],
    };
    let settings = NewtonSettings { tol: 1e-5f32, max_iter: 20 };
    let sol = newton_power_flow(&net, &inj, None, &settings).unwrap();
    let d = (sol.th[0] - sol.th[1]) as f64;
    assert!((d - 0.5 * 0.1f64.asin()).abs() < 1e-5);
}

#[test]
fn impossible_transfer_reports_divergence() {
    let case = two_bus_lossless(20.0);
    let (net, inj) = flat_pf(&case, &[0.0]);
    let err = newton_power_flow(&net, &inj, None, &NewtonSettings::default()).unwrap_err();
    assert!(matches!(err, PfError::Diverged { .. } | PfError::SingularJacobian { .. }));
}

#[test]
fn single_bus_price_is_marginal_cost() {
    let case = NetworkCase {
        name: "one".into(),
        base_mva: 100.0,
        horizon: 1,
        buses: vec![bus(1, 0.95, 1.05, true)],
        branches: vec![],
        generators: vec![generator(1, 1, 2.0, 7.0, 2.0)],
        loads: vec![load_at(1, 1, 0.8, 0.0)],
        shunts: vec![],
        storage: None,
    };
    let sol = solve_exact_polar_opf(&case, None, &OpfSettings::default()).unwrap();
    assert!((sol.pg[0][0] - 0.8).abs() < 1e-8);
    assert!((sol.price_p[0][0] - (7.0 + 2.0 * 2.0 * 0.8)).abs() < 1e-6);
}

#[test]
fn merit_order_on_uncongested_lossless_tie() {
    let mut case = two_bus_lossless(0.6);
    case.generators = vec![generator(1, 1, 0.0, 10.0, 2.0), generator(2, 2, 0.0, 50.0, 2.0)];
    let sol = solve_exact_polar_opf(&case, None, &OpfSettings::default()).unwrap();
    assert!((sol.pg[0][0] - 0.6).abs() < 1e-6);
    assert!(sol.pg[0][1].abs() < 1e-6);
    for i in 0..2 {
        assert!((sol.price_p[0][i] - 10.0).abs() < 1e-6, "{:?}", sol.price_p);
    }
}

/// Exhaustive dispatch oracle for the three-bus fixture: generator 2 is swept,
/// bus 1 balances, and every candidate is checked by its own power flow.
struct ThreeBusOracle {
    case: NetworkCase,
    y: Vec<Vec<C>>,
}

impl ThreeBusOracle {
    fn new(case: NetworkCase) -> Self {
        let y = ybus(&case);
        Self { case, y }
    }

    /// `(θ2, θ3, v3)` solving the balances with finite-difference Newton.
    fn power_flow(&self, pg2: f64, pd: [f64; 3], qd3: f64) -> Option<[f64; 3]> {
        let f = |x: [f64; 3]| {
            let s = injections(&self.y, &[1.0, 1.0, x[2]], &[0.0, x[0], x[1]]);
            [s[1].re - (pg2 - pd[1]), s[2].re + pd[2], s[2].im + qd3]
        };
        let mut x = [0.0, 0.0, 1.0];
        for _ in 0..50 {
            let r = f(x);
            if r.iter().all(|v| v.abs() < 1e-13) {
                return Some(x);
            }
            let mut jac = [[0.0; 3]; 3];
            for c in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[c] += 1e-7;
                xm[c] -= 1e-7;
                let (fp, fm) = (f(xp), f(xm));
                for r in 0..3 {
                    jac[r][c] = (fp[r] - fm[r]) / 2e-7;
                }
            }
            let dx = cramer(jac, r);
            for c in 0..3 {
                x[c] -= dx[c];
            }
        }
        let r = f(x);
        r.iter().all(|v| v.abs() < 1e-10).then_some(x)
    }

    /// Cost of dispatching `pg2`, or `None` when some limit is violated.
    fn cost(&self, pg2: f64, pd: [f64; 3], qd3: f64) -> Option<f64> {
        let c = &self.case;
        let x = self.power_flow(pg2, pd, qd3)?;
        let (v, th) = ([1.0, 1.0, x[2]], [0.0, x[0], x[1]]);
        let s = injections(&self.y, &v, &th);
        let pg1 = s[0].re + pd[0];
        let qg = [s[0].im, s[1].im];
        let g = &c.generators;
        let ok_gen = pg1 >= g[0].pmin
            && pg1 <= g[0].pmax
            && pg2 >= g[1].pmin
            && pg2 <= g[1].pmax
            && (0..2).all(|k| qg[k] >= g[k].qmin && qg[k] <= g[k].qmax);
        let ok_v = v[2] >= c.buses[2].vmin && v[2] <= c.buses[2].vmax;
        let ok_lines = (0..c.branches.len()).all(|k| {
            [false, true]
                .iter()
                .all(|&rev| branch_flow(c, k, rev, &v, &th).norm() <= c.branches[k].s_max)
        });
        (ok_gen && ok_v && ok_lines).then(|| {
            g[0].c2 * pg1 * pg1 + g[0].c1 * pg1 + g[1].c2 * pg2 * pg2 + g[1].c1 * pg2
        })
    }

    /// Grid sweep at 1e-3 resolution, then the feasible interval and its
    /// interior minimum are refined to near machine precision.
    fn optimum(&self, pd: [f64; 3], qd3: f64) -> (f64, f64) {
        let grid: Vec<f64> = (0..=2000).map(|k| k as f64 * 1e-3).collect();
        let feas: Vec<Option<f64>> = grid.iter().map(|&p| self.cost(p, pd, qd3)).collect();
        let best = (0..grid.len())
            .filter(|&k| feas[k].is_some())
            .min_by(|&a, &b| feas[a].unwrap().total_cmp(&feas[b].unwrap()))
            .expect("grid has a feasible dispatch");
        let edge = |inside: f64, outside: f64| {
            let (mut a, mut b) = (inside, outside);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if self.cost(m, pd, qd3).is_some() {
                    a = m;
                } else {
                    b = m;
                }
            }
            // step off the boundary so roundoff in the limit check cannot flip it
            a + (inside - outside).signum() * 1e-11
        };
        let lo = if best > 0 && feas[best - 1].is_none() { edge(grid[best], grid[best - 1]) } else if best > 0 { grid[best - 1] } else { 0.0 };
        let hi = if best + 1 < grid.len() && feas[best + 1].is_none() {
            edge(grid[best], grid[best + 1])
        } else if best + 1 < grid.len() {
            grid[best + 1]
        } else {
            grid[best]
        };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let m1 = b - phi * (b - a);
            let m2 = a + phi * (b - a);
            if self.cost(m1, pd, qd3).unwrap() <= self.cost(m2, pd, qd3).unwrap() {
                b = m2;
            } else {
                a = m1;
            }
        }
        let p = 0.5 * (a + b);
        (p, self.cost(p, pd, qd3).unwrap())
    }
}

fn cramer(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut x = [0.0; 3];
    for c in 0..3 {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        x[c] = det(m) / d;
    }
    x
}

#[test]
fn three_bus_dispatch_and_prices_match_grid_oracle() {
    let case = load("three_bus.json");
    let sol = solve_exact_polar_opf(&case, None, &OpfSettings::default()).unwrap();
    let oracle = ThreeBusOracle::new(case.clone());
    let base = [0.0, 0.0, case.loads[0].p_d[0]];
    let qd3 = case.loads[0].q_d[0];
    let (pg2, cost) = oracle.optimum(base, qd3);
    assert!((sol.pg[0][1] - pg2).abs() < 1e-2, "{} vs {pg2}", sol.pg[0][1]);
    assert!((sol.objective - cost).abs() < 1e-2);
    let eps = 1e-4;
    for i in 0..3 {
        let mut up = base;
        let mut dn = base;
        up[i] += eps;
        dn[i] -= eps;
        let price = (oracle.optimum(up, qd3).1 - oracle.optimum(dn, qd3).1) / (2.0 * eps);
        assert!((sol.price_p[0][i] - price).abs() < 1e-2, "bus {i}: {} vs {price}", sol.price_p[0][i]);
    }
    let price_q = (oracle.optimum(base, qd3 + eps).1 - oracle.optimum(base, qd3 - eps).1) / (2.0 * eps);
    assert!((sol.price_q[0][2] - price_q).abs() < 1e-2);
}

fn assert_pi_model_flows(case: &NetworkCase, sol: &ExactSolution) {
    let ix = IndexSets::build(case);
    let m = ix.forward.len();
    for t in 0..case.horizon {
        let (v, th) = (&sol.op.v_op[t], &sol.op.th_op[t]);
        for (k, arc) in ix.forward.iter().enumerate() {
            for (slot, rev) in [(k, false), (m + k, true)] {
                let s = branch_flow(case, arc.branch, rev, v, th);
                assert!((sol.flow_p[t][slot] - s.re).abs() <= 1e-10);
                assert!((sol.flow_q[t][slot] - s.im).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn solutions_satisfy_balances_bounds_and_flow_equations() {
    for name in ["two_bus.json", "three_bus.json", "five_bus.json", "case14.m", "two_bus_phase_shift.m"] {
        let case = load(name);
        let sol = solve_exact_polar_opf(&case, None, &OpfSettings::default()).unwrap();
        let y = ybus(&case);
        let ix = IndexSets::build(&case);
        for t in 0..case.horizon {
            let s = injections(&y, &sol.op.v_op[t], &sol.op.th_op[t]);
            for (i, b) in case.buses.iter().enumerate() {
                let mut net = C::new(0.0, 0.0);
                for &k in &ix.gens_at[i] {
                    net += C::new(sol.pg[t][k], sol.qg[t][k]);
                }
                for &l in &ix.loads_at[i] {
                    net -= C::new(case.loads[l].p_d[t], case.loads[l].q_d[t]);
                }
                assert!((s[i] - net).norm() <= 1e-8, "{name} bus {}", b.id);
                let v = sol.op.v_op[t][i];
                assert!(v >= b.vmin - 1e-8 && v <= b.vmax + 1e-8);
            }
            assert_eq!(sol.op.th_op[t][ix.reference], 0.0);
            for (k, g) in case.generators.iter().enumerate() {
                assert!(sol.pg[t][k] >= g.pmin - 1e-8 && sol.pg[t][k] <= g.pmax + 1e-8);
                assert!(sol.qg[t][k] >= g.qmin - 1e-8 && sol.qg[t][k] <= g.qmax + 1e-8);
            }
            assert!(sol.steps[t].stationarity <= 1e-6);
        }
        assert_pi_model_flows(&case, &sol);
    }
}

#[test]
fn case14_reaches_reference_optimum() {
    // published optimum of the IEEE 14-bus AC OPF: 8081.52543
    let sol = solve_exact_polar_opf(&load("case14.m"), None, &OpfSettings::default()).unwrap();
    assert!((sol.objective - 8081.52543).abs() / 8081.52543 < 1e-6, "{}", sol.objective);
}

#[test]
fn passive_schedule_equals_case_without_storage() {
    for name in ["three_bus.json", "five_bus_24.json"] {
        let case = load(name);
        let passive = StorageSchedule::passive(case.horizon, 0.0);
        let with = solve_exact_polar_opf(&case, Some(&passive), &OpfSettings::default()).unwrap();
        let without = solve_exact_polar_opf(&case.without_storage(), None, &OpfSettings::default()).unwrap();
        assert!((with.objective - without.objective).abs() <= 1e-12 * without.objective.abs());
        for t in 0..case.horizon {
            for (a, b) in with.price_p[t].iter().zip(&without.price_p[t]) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            for (a, b) in with.pg[t].iter().zip(&without.pg[t]) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn charging_raises_cost_by_roughly_the_local_price() {
    let case = load("three_bus.json");
    let unit = case.storage.clone().unwrap();
    let base = solve_exact_polar_opf(&case, None, &OpfSettings::default()).unwrap();
    let sched = StorageSchedule::from_net(&unit, vec![0.01], vec![0.0]);
    let loaded = solve_exact_polar_opf(&case, Some(&sched), &OpfSettings::default()).unwrap();
    let slope = (loaded.objective - base.objective) / 0.01;
    assert!((slope - base.price_p[0][2]).abs() < 0.05 * base.price_p[0][2].abs());
}

#[test]
fn capacity_shortfall_is_reported_as_infeasible() {
    let mut case = load("three_bus.json");
    case.loads[0].p_d = vec![5.0];
    match solve_exact_polar_opf(&case, None, &OpfSettings::default()) {
        Err(OpfError::Infeasible { t, violated }) => {
            assert_eq!(t, 0);
            assert!(!violated.is_empty());
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn line_limits_that_cannot_be_met_are_reported() {
    let mut case = load("three_bus.json");
    for br in &mut case.branches {
        br.s_max = 0.2;
    }
    let err = solve_exact_polar_opf(&case, None, &OpfSettings::default()).unwrap_err();
    assert!(matches!(err, OpfError::Infeasible { .. } | OpfError::NonConvergence { .. }), "{err}");
}

#[test]
fn phi_rule_examples() {
    let flag = |p: f64| select_phi_flags(&[vec![p, 0.0]], &[vec![0.0, 0.0]], &[1.0], 0.8)[0][0];
    assert!(!flag(0.3));
    assert!(flag(0.85));
    let unrated = select_phi_flags(&[vec![5.0, 5.0]], &[vec![0.0, 0.0]], &[0.0], 0.8);
    assert_eq!(unrated, vec![vec![false, false]]);
}

proptest! {
    #[test]
    fn phi_is_symmetric_and_monotone_in_threshold(
        flows in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, 0.0f64..2.0), 1..6),
        thr in 0.05f64..1.0,
    ) {
        let m = flows.len();
        let mut fp = vec![0.0; 2 * m];
        let mut fq = vec![0.0; 2 * m];
        let mut s = vec![0.0; m];
        for (k, f) in flows.iter().enumerate() {
            fp[k] = f.0; fq[k] = f.1; fp[m + k] = f.2; fq[m + k] = f.3; s[k] = f.4;
        }
        let phi = select_phi_flags(&[fp.clone()], &[fq.clone()], &s, thr);
        let looser = select_phi_flags(&[fp], &[fq], &s, thr * 0.5);
        for k in 0..m {
            prop_assert_eq!(phi[0][k], phi[0][m + k]);
            prop_assert!(!phi[0][k] || looser[0][k]);
        }
    }
}
