mod common;

use bilevel_core::bilevel::{ProfitMode, StorageSchedule};
use bilevel_core::netcase::{IndexSets, NetworkCase};
use bilevel_core::pfexact::OpfSettings;
use bilevel_core::presolve::{run_algorithm1, run_presolve, AlgorithmConfig};
use bilevel_core::verify_report::{
    emit_report, find_overloads, rerun_threshold, verify_solution, ProfitComparison, RunReport, REPORT_SCHEMA,
};
use common::*;

fn passive(case: &NetworkCase) -> StorageSchedule {
    let unit = case.storage.as_ref().unwrap();
    StorageSchedule::passive(case.horizon, unit.soe_init)
}

fn arbitrage_config() -> AlgorithmConfig {
    let mut cfg = AlgorithmConfig::default();
    cfg.search.grid_points = 5;
    cfg
}

fn schema_errors(report: &RunReport) -> Vec<String> {
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let inst: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    v.iter_errors(&inst).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

#[test]
fn passive_verification_reproduces_step_one() {
    for name in ["three_bus.json", "five_bus.json", "three_bus_arbitrage.json"] {
        let case = load(name);
        let pre = run_presolve(&case, None, &AlgorithmConfig::default()).unwrap();
        let (ver, _) = verify_solution(&case, &passive(&case), ProfitMode::Audited, &OpfSettings::default()).unwrap();
        let c1 = pre.exact.objective;
        assert!((ver.exact_cost - c1).abs() <= 1e-8 * c1.abs(), "{name}: {} vs {c1}", ver.exact_cost);
        assert_eq!(ver.exact_profit, 0.0);
        assert_eq!(ver.cost_per_step.len(), case.horizon);
    }
}

#[test]
fn exact_prices_are_cost_sensitivities() {
    // central difference of the exact cost in the storage withdrawal at each step
    let case = load("three_bus_arbitrage.json");
    let unit = case.storage.clone().unwrap();
    let s = OpfSettings::default();
    let (ver, _) = verify_solution(&case, &passive(&case), ProfitMode::Audited, &s).unwrap();
    let h = 1e-4;
    for t in 0..case.horizon {
        let cost = |d: f64| {
            let mut p = vec![0.0; case.horizon];
            p[t] = d;
            let sch = StorageSchedule::from_net(&unit, p, vec![0.0; case.horizon]);
            verify_solution(&case, &sch, ProfitMode::Audited, &s).unwrap().0.exact_cost
        };
        let fd = (cost(h) - cost(-h)) / (2.0 * h);
        let lmp = ver.prices.lmp[t];
        assert!((fd - lmp).abs() <= 1e-3 * lmp.abs().max(1.0), "t={t}: fd {fd} lmp {lmp}");
    }
}

#[test]
fn verification_is_pure() {
    let case = load("three_bus_arbitrage.json");
    let before = case.clone();
    let unit = case.storage.clone().unwrap();
    let sch = StorageSchedule::from_net(&unit, vec![0.1, -0.05], vec![0.0, 0.0]);
    let kept = sch.clone();
    let s = OpfSettings::default();
    let a = verify_solution(&case, &sch, ProfitMode::Audited, &s).unwrap();
    let b = verify_solution(&case, &sch, ProfitMode::Audited, &s).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(case, before);
    assert_eq!(sch, kept);
}

#[test]
fn profit_comparison_fields() {
    let c = ProfitComparison::new(10.5, 10.0);
    assert_eq!(c.gap, 0.5);
    assert!((c.relative_gap - 0.05).abs() < 1e-15);
    let z = ProfitComparison::new(1e-10, 0.0);
    assert!((z.relative_gap - 0.1).abs() < 1e-12);
}

#[test]
fn arbitrage_run_reports_both_profits() {
    let case = load("three_bus_arbitrage.json");
    let r = run_algorithm1(&case, &arbitrage_config());
    assert!(r.failure.is_none(), "{:?}", r.failure);
    let p = r.profit.unwrap();
    assert!(p.exact > 0.0);
    assert_eq!(p.gap, p.predicted - p.exact);
    assert!(p.relative_gap <= 0.05, "{p:?}");
    assert!(r.overloads.is_empty() && r.reruns.is_empty());
}

#[test]
fn overload_rule() {
    let case = load("three_bus.json");
    let ix = IndexSets::build(&case);
    let m = ix.forward.len();
    let mut loading = vec![vec![0.5; m]];
    loading[0][0] = 1.2;
    loading[0][1] = 1.0 + 1e-10;
    loading[0][2] = 1.3;
    let mut phi = vec![vec![false; 2 * m]];
    phi[0][m + 2] = true;
    let o = find_overloads(7, &case, &ix, &loading, &phi);
    assert_eq!(o.len(), 1);
    assert_eq!((o[0].iteration, o[0].t, o[0].branch, o[0].ratio), (7, 0, case.branches[0].id, 1.2));
}

#[test]
fn rerun_threshold_rule() {
    assert_eq!(rerun_threshold(0.8, &[0.71]), 0.4);
    assert!((rerun_threshold(0.8, &[0.6, 0.3]) - 0.297).abs() < 1e-15);
    assert_eq!(rerun_threshold(0.08, &[0.7]), 0.05);
}

#[test]
fn derated_line_triggers_a_rerun() {
    // branch 1 rated just above its passive flow, so Φ leaves it unconstrained
    let case = load("three_bus_derated.json");
    let r = run_algorithm1(&case, &AlgorithmConfig::default());
    assert!(r.failure.is_none(), "{:?}", r.failure);
    assert!(!r.overloads.is_empty());
    assert!(r.overloads.iter().all(|o| o.iteration == 1 && o.branch == 1 && o.ratio > 1.0));
    assert_eq!(r.reruns.len(), 1);
    assert!(r.reruns[0] < 0.8);
    assert_eq!(r.loop_trace.len(), 2);
    assert_eq!(r.loop_trace[1].phi_threshold, r.reruns[0]);
    // the first pass over-predicts against a limit it ignored, the re-run does not
    let first = &r.loop_trace[0];
    assert!(first.predicted_profit > 1.5 * first.exact_profit);
    let p = r.profit.unwrap();
    assert!(p.relative_gap <= 0.05, "{p:?}");
    assert!(r.verification.as_ref().unwrap().loading.iter().flatten().all(|&l| l <= 1.0 + 1e-6));
    assert!(schema_errors(&r).is_empty());
}

#[test]
fn emitted_files() {
    let case = load("three_bus_arbitrage.json");
    let r = run_algorithm1(&case, &arbitrage_config());
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&r, dir.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
    assert_eq!(names, ["report.json", "schedule.csv", "prices.csv", "flows.csv"]);
    let rows = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap().lines().count();
    assert_eq!(rows("schedule.csv"), 1 + case.horizon);
    assert_eq!(rows("prices.csv"), 1 + case.horizon);
    assert_eq!(rows("flows.csv"), 1 + case.horizon * 2 * case.branches.len());
    let back = RunReport::from_json(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn partial_reports_only_write_json() {
    let r = RunReport::new("x", 3, &AlgorithmConfig::default());
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(emit_report(&r, dir.path()).unwrap().len(), 1);
    assert!(schema_errors(&r).is_empty(), "{:?}", schema_errors(&r));
}

#[test]
fn reports_validate_against_the_schema() {
    let case = load("three_bus_arbitrage.json");
    let r = run_algorithm1(&case, &arbitrage_config());
    assert!(schema_errors(&r).is_empty(), "{:?}", schema_errors(&r));
    let mut bad: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    bad["schema_version"] = "0.9".into();
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    assert!(!jsonschema::is_valid(&schema, &bad));

    let mut failed = load("three_bus.json");
    failed.storage = None;
    let r = run_algorithm1(&failed, &AlgorithmConfig::default());
    assert!(r.failure.is_some());
    assert!(schema_errors(&r).is_empty(), "{:?}", schema_errors(&r));
}

#[test]
fn runs_are_reproducible_up_to_timings() {
    let case = load("three_bus_arbitrage.json");
    let a = run_algorithm1(&case, &arbitrage_config()).without_timings();
    let b = run_algorithm1(&case, &arbitrage_config()).without_timings();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(RunReport::from_json(&a.to_json()).unwrap(), a);
}
