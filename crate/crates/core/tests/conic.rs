use approx::assert_abs_diff_eq;
use bilevel_core::conic::{
    check_kkt, dump_program, parse_program, solve_conic, solve_conic_with, ConicProgram, SolveStatus,
    SolverSettings, WarmStart,
};
use proptest::prelude::*;

fn square_above_one() -> ConicProgram<f64> {
    let mut p = ConicProgram::new();
    let x = p.add_var("x", Some(1.0), None);
    p.add_quad(x, 1.0);
    p
}

#[test]
fn square_with_lower_bound() {
    let p = square_above_one();
    let r = solve_conic(&p, None).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-7);
    assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-7);
    assert_abs_diff_eq!(r.lower_multipliers[0], 2.0, epsilon = 1e-6);
    let k = check_kkt(&p, &r);
    assert!(k.max() <= 1e-8, "{k:?}");
}

#[test]
fn kkt_report_on_perturbed_point() {
    let p = square_above_one();
    let mut r = solve_conic(&p, None).unwrap();
    r.x[0] = 1.1;
    r.lower_multipliers[0] = 2.0;
    let k = check_kkt(&p, &r);
    assert_eq!(k.primal_feasibility, 0.0);
    assert_abs_diff_eq!(k.stationarity, 0.2, epsilon = 1e-12);
}

#[test]
fn linear_objective_over_unit_disc() {
    let mut p = ConicProgram::new();
    let x = p.free_var("x");
    let y = p.free_var("y");
    let z = p.add_var("z", Some(1.0), Some(1.0));
    p.add_linear(x, 1.0);
    p.add_linear(y, 1.0);
    p.add_soc("disc", vec![z, x, y]);
    let r = solve_conic(&p, None).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    let h = -(0.5f64).sqrt();
    assert_abs_diff_eq!(r.x[0], h, epsilon = 1e-7);
    assert_abs_diff_eq!(r.x[1], h, epsilon = 1e-7);
    let zc = &r.cone_multipliers[0];
    assert!(zc[0] + 1e-9 >= (zc[1] * zc[1] + zc[2] * zc[2]).sqrt());
    assert!(check_kkt(&p, &r).max() <= 1e-7);
}

#[test]
fn equality_multiplier_sign() {
    let mut p = ConicProgram::new();
    let a = p.free_var("a");
    let b = p.free_var("b");
    p.add_quad(a, 1.0);
    p.add_quad(b, 1.0);
    p.add_eq("sum", vec![(a, 1.0), (b, 1.0)], 1.0);
    let r = solve_conic(&p, None).unwrap();
    assert_abs_diff_eq!(r.x[0], 0.5, epsilon = 1e-8);
    // L = f + y (a + b − 1): 2a + y = 0
    assert_abs_diff_eq!(r.eq_multipliers[0], -1.0, epsilon = 1e-7);
}

#[test]
fn fixed_variable_multiplier_split() {
    let mut p = ConicProgram::new();
    let x = p.add_var("x", Some(2.0), Some(2.0));
    p.add_quad(x, 1.0);
    let r = solve_conic(&p, None).unwrap();
    assert_abs_diff_eq!(r.x[0], 2.0, epsilon = 1e-9);
    // 2x + μ̄ − μ̲ = 0 → μ̲ = 4
    assert_abs_diff_eq!(r.lower_multipliers[0], 4.0, epsilon = 1e-7);
    assert_eq!(r.upper_multipliers[0], 0.0);
}

#[test]
fn infeasible_program_is_reported() {
    let mut p = ConicProgram::new();
    let x = p.add_var("x", Some(1.0), None);
    p.add_quad(x, 1.0);
    p.add_eq("pin", vec![(x, 1.0)], 0.0);
    let r = solve_conic(&p, None).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_program_is_reported() {
    let mut p = ConicProgram::new();
    let x = p.add_var("x", None, Some(0.0));
    p.add_linear(x, 1.0);
    let r = solve_conic(&p, None).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn max_iter_status() {
    let p = square_above_one();
    let s = SolverSettings {
        max_iter: 1,
        ..SolverSettings::default()
    };
    let r = solve_conic_with(&p, None, &s).unwrap();
    assert_eq!(r.status, SolveStatus::MaxIter);
    assert!(r.residuals.gap > 0.0);
}

#[test]
fn single_precision_solve() {
    let mut p = ConicProgram::<f32>::new();
    let x = p.add_var("x", Some(1.0), None);
    p.add_quad(x, 1.0);
    let s = SolverSettings {
        tol: 1e-4,
        ..SolverSettings::default()
    };
    let r = solve_conic_with(&p, None, &s).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.x[0] - 1.0).abs() < 1e-3);
}

/// Deterministic xorshift so the oracle fixture is reproducible.
struct Rng(u64);
impl Rng {
    fn next(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nx = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx <= t {
        return;
    }
    if nx <= -t {
        v.iter_mut().for_each(|a| *a = 0.0);
        return;
    }
    let a = 0.5 * (t + nx);
    v[0] = a;
    for x in &mut v[1..] {
        *x *= a / nx;
    }
}

/// Ten variables: a 4-dimensional cone block and six boxed variables.
fn random_program(seed: u64) -> (ConicProgram<f64>, Vec<(f64, f64)>) {
    let mut rng = Rng(seed);
    let mut p = ConicProgram::new();
    let mut boxes = Vec::new();
    for j in 0..10 {
        if j < 4 {
            p.free_var(format!("c[{j}]"));
            boxes.push((f64::NEG_INFINITY, f64::INFINITY));
        } else {
            let l = rng.range(-1.0, 0.0);
            let u = rng.range(0.1, 1.0);
            p.add_var(format!("b[{j}]"), Some(l), Some(u));
            boxes.push((l, u));
        }
        p.add_quad(j, rng.range(0.2, 2.0));
        p.add_linear(j, rng.range(-3.0, 3.0));
    }
    p.add_soc("k[0]", vec![0, 1, 2, 3]);
    (p, boxes)
}

fn projected_gradient_oracle(p: &ConicProgram<f64>, boxes: &[(f64, f64)]) -> f64 {
    p.objective(&projected_gradient_point(p, boxes))
}

fn projected_gradient_point(p: &ConicProgram<f64>, boxes: &[(f64, f64)]) -> Vec<f64> {
    let lmax = p.quad.iter().fold(0.0f64, |m, q| m.max(2.0 * q));
    let step = 1.0 / lmax;
    let n = p.num_vars();
    let project = |x: &mut Vec<f64>| {
        project_soc(&mut x[..4]);
        for j in 4..n {
            x[j] = x[j].clamp(boxes[j].0, boxes[j].1);
        }
    };
    let mut x = vec![0.0; n];
    let mut yv = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let g = p.gradient(&yv);
        let mut xn: Vec<f64> = (0..n).map(|j| yv[j] - step * g[j]).collect();
        project(&mut xn);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved = (0..n).map(|j| (xn[j] - x[j]).abs()).fold(0.0, f64::max);
        yv = (0..n).map(|j| xn[j] + (t - 1.0) / tn * (xn[j] - x[j])).collect();
        x = xn;
        t = tn;
        if moved < 1e-15 {
            break;
        }
    }
    x
}

#[test]
fn random_program_matches_projected_gradient() {
    for seed in [7u64, 99, 12345] {
        let (p, boxes) = random_program(seed);
        let oracle = projected_gradient_oracle(&p, &boxes);
        let r = solve_conic(&p, None).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(
            (r.objective - oracle).abs() <= 1e-6,
            "seed {seed}: {} vs {oracle}",
            r.objective
        );
    }
}

#[test]
fn cone_multipliers_lie_in_the_cone() {
    let (p, _) = random_program(31);
    let r = solve_conic(&p, None).unwrap();
    for z in &r.cone_multipliers {
        let tail = z[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(z[0] - tail >= -1e-8);
    }
}

#[test]
fn warm_start_from_previous_solution() {
    let (p, _) = random_program(5);
    let cold = solve_conic(&p, None).unwrap();
    let mut q = p.clone();
    q.linear[5] += 1e-3;
    let cold_q = solve_conic(&q, None).unwrap();
    let warm_q = solve_conic(&q, Some(&cold.warm)).unwrap();
    assert_eq!(warm_q.status, SolveStatus::Optimal);
    assert!((warm_q.objective - cold_q.objective).abs() < 1e-7);
    assert!(warm_q.iterations <= 2 * cold_q.iterations);
    let primal_only = solve_conic(&q, Some(&WarmStart::primal(cold.x.clone()))).unwrap();
    assert_eq!(primal_only.status, SolveStatus::Optimal);
}

#[test]
fn mismatched_warm_start_falls_back_to_cold() {
    let p = square_above_one();
    let r = solve_conic(&p, Some(&WarmStart::primal(vec![1.0, 2.0]))).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
}

#[test]
fn dump_round_trip() {
    let (p, _) = random_program(3);
    let text = dump_program(&p);
    let q: ConicProgram<f64> = parse_program(&text).unwrap();
    assert_eq!(q.vars.len(), 10);
    assert_eq!(q.socs, p.socs);
    for j in 0..10 {
        assert_eq!(q.quad[j], p.quad[j]);
        assert_eq!(q.vars[j].lower, p.vars[j].lower);
    }
    assert!(parse_program::<f64>("conic 1\nvars x\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn objective_scaling_invariance(seed in 1u64..10_000, k in 0.1f64..50.0) {
        let (p, _) = random_program(seed);
        let mut q = p.clone();
        q.scale_objective(k);
        let a = solve_conic(&p, None).unwrap();
        let b = solve_conic(&q, None).unwrap();
        prop_assert_eq!(a.status, SolveStatus::Optimal);
        prop_assert_eq!(b.status, SolveStatus::Optimal);
        for j in 0..10 {
            // points on a cone boundary are resolved to about √ε of the gap, ~5e-8 here
            prop_assert!((a.x[j] - b.x[j]).abs() <= 1e-7, "x[{}] {} vs {}", j, a.x[j], b.x[j]);
            let tol = 1e-6 * k.max(1.0);
            prop_assert!((k * a.lower_multipliers[j] - b.lower_multipliers[j]).abs() <= tol);
            prop_assert!((k * a.upper_multipliers[j] - b.upper_multipliers[j]).abs() <= tol);
        }
        for m in 0..4 {
            prop_assert!((k * a.cone_multipliers[0][m] - b.cone_multipliers[0][m]).abs() <= 1e-6 * k.max(1.0));
        }
    }
}

