mod common;

use bilevel_core::bilevel::StorageSchedule;
use bilevel_core::conic::SolverSettings;
use bilevel_core::cpsota::{
    build_ll_primal, compute_operating_coeffs, cps_cms, cpsota_arc_flow, evaluate_flow_error, soc_equivalence_check,
    solve_ll_primal, voltage_cone_coeffs, BuildError, DeltaPoint, PresolveFlags, PrimalSolution,
};
use bilevel_core::netcase::{Branch, IndexSets, NetworkCase, Shunt};
use bilevel_core::pfexact::{solve_exact_polar_opf, OperatingPoint, OpfSettings};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn flat_op(case: &NetworkCase) -> OperatingPoint {
    OperatingPoint {
        v_op: vec![vec![1.0; case.buses.len()]; case.horizon],
        th_op: vec![vec![0.0; case.buses.len()]; case.horizon],
    }
}

fn rated_flags(case: &NetworkCase, ix: &IndexSets, lam: bool, gam: bool) -> PresolveFlags {
    let mut f = PresolveFlags::uniform(case.horizon, ix.forward.len(), ix.pairs.len(), lam, gam, false);
    for t in 0..case.horizon {
        for (a, arc) in ix.arcs().enumerate() {
            f.phi[t][a] = case.branches[arc.branch].s_max > 0.0;
        }
    }
    f
}

fn test_branch(g: f64, b: f64, g_fr: f64, g_to: f64, tau: f64, sigma: f64) -> Branch {
    Branch {
        id: 1,
        from_bus: 1,
        to_bus: 2,
        g,
        b,
        g_fr,
        b_fr: 0.0,
        g_to,
        b_to: 0.0,
        tau,
        sigma,
        s_max: 0.0,
    }
}

#[test]
fn cps_cms_trivial() {
    assert_eq!(cps_cms(1.0, 0.0, 0.3, 0.3, 0.0), (1.0, 0.0));
}

#[test]
fn p2_trivial() {
    let (_, p2, _) = voltage_cone_coeffs(3.0, 1.0, 1.0, 1.0, 0.0).unwrap();
    assert_eq!(p2, 2.0);
}

#[test]
fn coefficients_match_high_precision_values() {
    // 30-digit evaluation of the completed-square coefficients
    let (g, b, sigma, dth, gs): (f64, f64, f64, f64, f64) = (0.5, -1.2, 0.1, 0.05, 0.01);
    let (cps, cms) = cps_cms(g, b, dth, 0.0, -sigma);
    assert!((cps - 0.559350133322297117835273406593).abs() < 1e-15);
    assert!((cms - -1.17351072783862033147801247297).abs() < 1e-15);
    let (rcps, rcms) = cps_cms(g, b, 0.0, dth, sigma);
    assert!((rcps - 0.439400127072669128727597404564).abs() < 1e-15);
    assert!((rcms - -1.22348989710929866027287747381).abs() < 1e-15);
    let (p1, p2, p3) = voltage_cone_coeffs(g, gs, gs, 1.0, dth - sigma).unwrap();
    assert!((p1 - 0.699265049274430003741357879185).abs() < 1e-15);
    assert!((p2 - 0.714142842854284999799939981137).abs() < 1e-15);
    assert!((p3 - 0.145011692160421943329960496271).abs() < 1e-15);
    // complex oracle: cps + j·cms = y·e^{-jδ}
    let z = Complex64::new(g, b) * Complex64::from_polar(1.0, -(dth - sigma));
    assert!((z.re - cps).abs() < 1e-15 && (z.im - cms).abs() < 1e-15);
}

#[test]
fn lossless_branch_has_no_voltage_cone() {
    assert!(voltage_cone_coeffs(0.0, 0.0, 0.0, 1.0, 0.0).is_none());
}

#[test]
fn single_bus_program_has_only_balance_rows() {
    let mut case = NetworkCase {
        name: "one".into(),
        base_mva: 100.0,
        horizon: 1,
        buses: vec![bus(1, 0.9, 1.1, true)],
        branches: vec![],
        generators: vec![generator(1, 1, 1.0, 5.0, 3.0)],
        loads: vec![load_at(1, 1, 0.8, 0.1)],
        shunts: vec![Shunt { id: 1, bus: 1, g_sh: 0.05, b_sh: 0.0 }],
        storage: None,
    };
    case.buses[0].vmin = 1.0;
    case.buses[0].vmax = 1.0;
    let ix = IndexSets::build(&case);
    let op = flat_op(&case);
    let co = compute_operating_coeffs(&case, &ix, &op);
    let flags = PresolveFlags::uniform(1, 0, 0, true, true, true);
    let model = build_ll_primal(&case, &ix, &op, &co, &flags, None).unwrap();
    let census = model.steps[0].program.census();
    assert!(census.keys().all(|k| !k.starts_with("flow") && !k.starts_with("soc")), "{census:?}");
    let sol = solve_ll_primal(&model, None, &SolverSettings::default()).unwrap();
    assert!((sol.pg[0][0] - 0.85).abs() < 1e-8, "{}", sol.pg[0][0]);
}

#[test]
fn lambda_false_fixes_vcheck() {
    let case = load("three_bus.json");
    let ix = IndexSets::build(&case);
    let op = flat_op(&case);
    let co = compute_operating_coeffs(&case, &ix, &op);
    let flags = PresolveFlags::uniform(1, 3, 3, false, true, false);
    let model = build_ll_primal(&case, &ix, &op, &co, &flags, None).unwrap();
    let c = model.steps[0].program.census();
    assert!(!c.contains_key("w0") && !c.contains_key("soc_v"));
    assert_eq!(c["vchk_zero"].eqs, 3);
    let sol = solve_ll_primal(&model, None, &SolverSettings::default()).unwrap();
    assert!(sol.v_chk[0].iter().all(|v| v.abs() < 1e-12));
    assert!(sol.w[0].iter().all(Option::is_none));
}

#[test]
fn gamma_false_fixes_cosine() {
    let case = load("three_bus.json");
    let ix = IndexSets::build(&case);
    let op = flat_op(&case);
    let co = compute_operating_coeffs(&case, &ix, &op);
    let flags = PresolveFlags::uniform(1, 3, 3, true, false, false);
    let sol = solve_ll_primal(
        &build_ll_primal(&case, &ix, &op, &co, &flags, None).unwrap(),
        None,
        &SolverSettings::default(),
    )
    .unwrap();
    assert!(sol.cos_hat[0].iter().all(|c| (c - 1.0).abs() < 1e-12));
}

#[test]
fn triangle_census_matches_index_sets() {
    let case = load("three_bus.json");
    let ix = IndexSets::build(&case);
    let op = flat_op(&case);
    let co = compute_operating_coeffs(&case, &ix, &op);
    let flags = PresolveFlags::uniform(1, 3, 3, true, true, true);
    let prog = &build_ll_primal(&case, &ix, &op, &co, &flags, None).unwrap().steps[0].program;
    let (n, m, np, ng) = (case.buses.len(), ix.forward.len(), ix.pairs.len(), case.generators.len());
    assert_eq!((n, m, np, ng), (3, 3, 3, 2));
    let c = prog.census();
    let vars = |k: &str| c.get(k).map_or(0, |f| f.vars);
    let eqs = |k: &str| c.get(k).map_or(0, |f| f.eqs);
    let socs = |k: &str| c.get(k).map_or(0, |f| f.socs);
    assert_eq!((vars("th_d"), vars("v_d"), vars("pg"), vars("qg")), (n, n, ng, ng));
    assert_eq!((vars("p"), vars("q"), vars("cos_hat"), vars("v_chk")), (2 * m, 2 * m, np, m));
    for w in ["w0", "w1", "w2", "w3"] {
        assert_eq!(vars(w), m);
        assert_eq!(eqs(&format!("{w}_def")), m);
    }
    for f in ["f0", "f1", "f2"] {
        assert_eq!(vars(f), np);
        assert_eq!(eqs(&format!("{f}_def")), np);
    }
    assert_eq!(vars("s_lim"), 2 * m);
    assert_eq!((eqs("bal_p"), eqs("bal_q")), (n, n));
    assert_eq!(eqs("flow_p_fr") + eqs("flow_p_to") + eqs("flow_q_fr") + eqs("flow_q_to"), 4 * m);
    assert_eq!(eqs("ref_angle"), 1);
    assert_eq!((socs("soc_v"), socs("soc_cos"), socs("soc_lim")), (m, np, 2 * m));
    assert_eq!(prog.num_vars(), 2 * n + 4 * m + 2 * ng + np + m + 4 * m + 3 * np + 2 * m);
    assert_eq!(prog.eqs.len(), 2 * n + 4 * m + 4 * m + 3 * np + 1);
}

#[test]
fn undefined_coefficients_and_unrated_limits_are_build_errors() {
    let mut case = load("three_bus.json");
    case.branches[1].g = 0.0;
    case.branches[1].s_max = 0.0;
    let ix = IndexSets::build(&case);
    let op = flat_op(&case);
    let co = compute_operating_coeffs(&case, &ix, &op);
    assert!(!co.voltage_cone_defined(0, 1));
    let flags = PresolveFlags::uniform(1, 3, 3, true, false, false);
    assert_eq!(
        build_ll_primal(&case, &ix, &op, &co, &flags, None).unwrap_err(),
        BuildError::UndefinedCoeffs { branch: 2, t: 0 }
    );
    let flags = PresolveFlags::uniform(1, 3, 3, false, false, true);
    assert_eq!(
        build_ll_primal(&case, &ix, &op, &co, &flags, None).unwrap_err(),
        BuildError::UnratedLimit { branch: 2, t: 0 }
    );
}

#[test]
fn zero_delta_identities() {
    let br = test_branch(1.0, -5.0, 0.02, 0.03, 1.02, 0.05);
    let chk = soc_equivalence_check(
        &DeltaPoint { v_d_i: 0.0, v_d_j: 0.0, th_d_i: 0.0, th_d_j: 0.0, v_chk: 0.0, cos_hat: 1.0 },
        &br,
        0.1,
        0.02,
    );
    assert_eq!(chk.voltage_quadratic, 0.0);
    assert!(chk.voltage_cone.unwrap().abs() < 1e-15);
    // f = (1/4, 0, 1/4)
    assert_eq!(chk.cosine_cone, 0.0);
    assert_eq!(chk.cosine_quadratic, 0.0);
}

fn equivalence_sample(br: &Branch, th_i: f64, th_j: f64, seed: u64) -> usize {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let margin = 1e-9;
    let mut agreed = 0;
    for _ in 0..10_000 {
        let pt = DeltaPoint {
            v_d_i: rng.gen_range(-0.1..0.1),
            v_d_j: rng.gen_range(-0.1..0.1),
            th_d_i: rng.gen_range(-0.1..0.1),
            th_d_j: rng.gen_range(-0.1..0.1),
            v_chk: rng.gen_range(-0.01..0.05),
            cos_hat: rng.gen_range(0.98..1.001),
        };
        let c = soc_equivalence_check(&pt, br, th_i, th_j);
        let (v, k) = c.agreement();
        let near = c.voltage_quadratic.abs() < margin || c.cosine_quadratic.abs() < margin;
        if (v && k) || near {
            agreed += 1;
        }
    }
    agreed
}

#[test]
fn soc_forms_agree_on_fixture_branches() {
    for name in ["three_bus.json", "five_bus.json", "case14.m"] {
        let case = load(name);
        for (k, br) in case.branches.iter().enumerate() {
            assert_eq!(equivalence_sample(br, 0.05, -0.02, k as u64), 10_000, "{name} branch {}", br.id);
        }
    }
}

proptest! {
    #[test]
    fn cone_identities(vchk in -10.0f64..10.0, cos_hat in -10.0f64..10.0) {
        let (w0, w1) = ((1.0 + vchk) / 2.0, (1.0 - vchk) / 2.0);
        prop_assert!((w0 * w0 - w1 * w1 - vchk).abs() < 1e-12);
        let (f0, f2) = (1.25 - cos_hat, cos_hat - 0.75);
        prop_assert!((f0 * f0 - f2 * f2 - (1.0 - cos_hat)).abs() < 1e-12);
    }

    #[test]
    fn completed_square_matches_quadratic(
        g in 0.01f64..20.0, g_fr in 0.0f64..0.5, g_to in 0.0f64..0.5,
        tau in 0.9f64..1.1, phi in -0.5f64..0.5, x in -0.2f64..0.2, y in -0.2f64..0.2,
    ) {
        let (p1, p2, p3) = voltage_cone_coeffs(g, g_fr, g_to, tau, phi).unwrap();
        prop_assert!(p2 >= 0.0 && p3 >= 0.0);
        let quad = (g + g_fr) * x * x / (tau * tau) - 2.0 * g * phi.cos() * x * y / tau + (g + g_to) * y * y;
        let sq = (p1 * x - p2 * y).powi(2) + (p3 * x).powi(2);
        prop_assert!((quad - sq).abs() <= 1e-12 * (1.0 + quad.abs()));
    }
}

fn manufactured(case: &NetworkCase, op: &OperatingPoint, v_d: Vec<f64>, th_d: Vec<f64>) -> PrimalSolution {
    let ix = IndexSets::build(case);
    let co = compute_operating_coeffs(case, &ix, op);
    let m = ix.forward.len();
    let cos_hat: Vec<f64> = ix
        .pairs
        .iter()
        .map(|&(i, j)| 1.0 - (th_d[i] - th_d[j]).powi(2) / 2.0)
        .collect();
    let v_chk: Vec<f64> = ix
        .forward
        .iter()
        .map(|a| {
            let br = &case.branches[a.branch];
            let phi = op.th_op[0][a.from] - op.th_op[0][a.to] - br.sigma;
            let (x, y) = (v_d[a.from], v_d[a.to]);
            (br.g + br.g_fr) * x * x / (br.tau * br.tau) - 2.0 * br.g * phi.cos() * x * y / br.tau
                + (br.g + br.g_to) * y * y
        })
        .collect();
    let mut p = vec![];
    let mut q = vec![];
    for a in 0..2 * m {
        let k = a % m;
        let (pa, qa) =
            cpsota_arc_flow(case, &ix, op, &co, 0, a, &v_d, &th_d, cos_hat[ix.pair_of[k]], v_chk[k]);
        p.push(pa);
        q.push(qa);
    }
    PrimalSolution {
        th_d: vec![th_d],
        v_d: vec![v_d],
        p: vec![p],
        q: vec![q],
        pg: vec![vec![]],
        qg: vec![vec![]],
        cos_hat: vec![cos_hat],
        v_chk: vec![v_chk],
        w: vec![vec![]],
        f: vec![vec![]],
        objective: 0.0,
        iterations: vec![],
        status: vec![],
        raw: vec![],
    }
}

fn exact_op(case: &NetworkCase) -> OperatingPoint {
    solve_exact_polar_opf(case, None, &OpfSettings::default()).unwrap().op
}

#[test]
fn zero_deltas_reproduce_exact_flows() {
    for name in ["three_bus.json", "five_bus.json", "case14.m", "two_bus_phase_shift.m"] {
        let case = load(name);
        let op = exact_op(&case.at_step(0));
        let n = case.buses.len();
        let sol = manufactured(&case.at_step(0), &op, vec![0.0; n], vec![0.0; n]);
        let rep = evaluate_flow_error(&sol, &case.at_step(0), &IndexSets::build(&case), &op);
        assert!(rep.max_p <= 1e-12 && rep.max_q <= 1e-12, "{name}: {} {}", rep.max_p, rep.max_q);
    }
}

#[test]
fn angle_delta_error_is_third_order() {
    let case = load("three_bus.json");
    let ix = IndexSets::build(&case);
    let op = exact_op(&case);
    let d = 0.05;
    let sol = manufactured(&case, &op, vec![0.0; 3], vec![0.0, 0.0, d]);
    let rep = evaluate_flow_error(&sol, &case, &ix, &op);
    for (a, arc) in ix.arcs().enumerate() {
        let br = &case.branches[arc.branch];
        let dd = if arc.to == 2 { d } else if arc.from == 2 { -d } else { 0.0 };
        let vv = op.v_op[0][arc.from] * op.v_op[0][arc.to] / br.tau;
        // |sin d − d| ≤ |d|³/6, |cos d − 1 + d²/2| ≤ d⁴/24
        let bound = vv * br.g.hypot(br.b) * (dd.abs().powi(3) / 6.0 + dd.powi(4) / 24.0) + 1e-14;
        assert!(rep.p_err[0][a] <= bound && rep.q_err[0][a] <= bound, "arc {a}: {} {} {bound}", rep.p_err[0][a], rep.q_err[0][a]);
    }
    assert!(rep.max_p > 1e-6);
}

fn passive_fixed_point(name: &str) {
    let case = load(name);
    let ix = IndexSets::build(&case);
    let passive = StorageSchedule::passive(case.horizon, case.storage.as_ref().map_or(0.0, |s| s.soe_init));
    let exact = solve_exact_polar_opf(&case, Some(&passive), &OpfSettings::default()).unwrap();
    let co = compute_operating_coeffs(&case, &ix, &exact.op);
    for (lam, gam) in [(true, true), (false, false), (true, false), (false, true)] {
        let flags = rated_flags(&case, &ix, lam, gam);
        let model = build_ll_primal(&case, &ix, &exact.op, &co, &flags, Some(&passive)).unwrap();
        let sol = solve_ll_primal(&model, None, &SolverSettings::default()).unwrap();
        let (dv, dth) = sol.max_abs_delta();
        assert!(dv <= 1e-6 && dth <= 1e-6, "{name} {lam} {gam}: {dv} {dth}");
        let rel = (sol.objective - exact.objective).abs() / exact.objective.abs();
        assert!(rel <= 1e-6, "{name}: {} vs {}", sol.objective, exact.objective);
    }
}

#[test]
fn passive_fixed_point_three_bus() {
    passive_fixed_point("three_bus.json");
}

#[test]
fn passive_fixed_point_five_bus() {
    passive_fixed_point("five_bus.json");
}
