use std::time::Instant;

use crate::bilevel::{
    discretized_bilevel_search, evaluate_profit, prices_at, CpsotaMarket, StorageSchedule,
};
use crate::cpsota::compute_operating_coeffs;
use crate::netcase::{IndexSets, NetworkCase, StorageUnit};
use crate::pfexact::{branch_ratings, loading_ratios, phi_from_exact, solve_exact_polar_opf, ExactSolution};
use crate::verify_report::{
    find_overloads, rerun_threshold, verify_solution, ApproximationError, Failure, FlowExtract, LoopRecord,
    ProfitComparison, RunReport, StageRecord,
};

use super::{determine_lambda_gamma, warm_start_dual, warm_start_primal, AlgorithmConfig};

const MAX_RERUNS: usize = 3;

struct Stage {
    objective: Option<f64>,
    iterations: usize,
    residual: Option<f64>,
    message: Option<String>,
}

impl Stage {
    fn new(objective: f64, iterations: usize, residual: Option<f64>) -> Self {
        Self {
            objective: Some(objective),
            iterations,
            residual,
            message: None,
        }
    }
}

struct Runner<'a> {
    case: &'a NetworkCase,
    config: &'a AlgorithmConfig,
    report: RunReport,
}

impl Runner<'_> {
    fn stage<T>(
        &mut self,
        iteration: usize,
        step: u8,
        name: &str,
        f: impl FnOnce() -> Result<(T, Stage), String>,
    ) -> Option<T> {
        let start = Instant::now();
        let r = f();
        let seconds = start.elapsed().as_secs_f64();
        let (value, st, ok) = match r {
            Ok((v, st)) => (Some(v), st, true),
            Err(e) => {
                self.report.failure = Some(Failure {
                    iteration,
                    step,
                    message: e.clone(),
                });
                let st = Stage {
                    objective: None,
                    iterations: 0,
                    residual: None,
                    message: Some(e),
                };
                (None, st, false)
            }
        };
        self.report.stages.push(StageRecord {
            iteration,
            step,
            name: name.into(),
            objective: st.objective,
            iterations: st.iterations,
            residual: st.residual,
            seconds,
            ok,
            message: st.message,
        });
        value
    }

    /// One pass of steps 1–6; returns the verified schedule and the step-6 exact solution.
    fn iteration(
        &mut self,
        iteration: usize,
        unit: &StorageUnit,
        schedule: &StorageSchedule,
        carried: Option<ExactSolution>,
        threshold: f64,
    ) -> Option<(StorageSchedule, ExactSolution, IterationOutcome)> {
        let (case, cfg) = (self.case, self.config);
        let ix = IndexSets::build(case);
        let merged = carried.is_some();
        let exact = self.stage(iteration, 1, "operating point", || {
            let e = match carried {
                Some(e) => e,
                None => solve_exact_polar_opf(case, Some(schedule), &cfg.opf).map_err(|e| e.to_string())?,
            };
            let its = e.steps.iter().map(|s| s.iterations).sum();
            let res = e.steps.iter().fold(0.0f64, |a, s| a.max(s.stationarity));
            let mut st = Stage::new(e.objective, its, Some(res));
            if merged {
                st.message = Some("reused from the previous verification".into());
            }
            Ok((e, st))
        })?;
        let op = exact.op.clone();
        let coeffs = compute_operating_coeffs(case, &ix, &op);
        let sel = self.stage(iteration, 2, "flag selection", || {
            let phi = phi_from_exact(case, &ix, &exact, threshold);
            let s = determine_lambda_gamma(case, &ix, &exact, &coeffs, phi, Some(schedule), cfg)
                .map_err(|e| e.to_string())?;
            let st = Stage::new(s.objective, 0, Some(s.max_delta.0.max(s.max_delta.1)));
            Ok((s, st))
        })?;
        let flags = sel.flags.clone();
        self.report.flags = Some(flags.census());
        let (primal, pw) = self.stage(iteration, 3, "lower-level primal", || {
            let r = warm_start_primal(case, &ix, &op, &coeffs, &flags, Some(schedule), None, &cfg.solver)
                .map_err(|e| e.to_string())?;
            let (v, th) = r.0.max_abs_delta();
            let st = Stage::new(r.0.objective, r.0.iterations.iter().sum(), Some(v.max(th)));
            Ok((r, st))
        })?;
        let (_, dw) = self.stage(iteration, 4, "lower-level dual", || {
            let r = warm_start_dual(case, &ix, &op, &coeffs, &flags, Some(schedule), None, &cfg.solver)
                .map_err(|e| e.to_string())?;
            let gap = crate::dualmodel::relative_gap(primal.objective, r.0.objective);
            let st = Stage::new(r.0.objective, r.0.iterations.iter().sum(), Some(gap));
            Ok((r, st))
        })?;
        let beta = ix.storage_bus.expect("checked by the caller");
        let candidate = self.stage(iteration, 5, "bilevel search", || {
            if cfg.passive_only {
                let s = StorageSchedule::passive(case.horizon, unit.soe_init);
                let mut st = Stage::new(0.0, 0, None);
                st.message = Some("disabled".into());
                return Ok((s, st));
            }
            let market = CpsotaMarket {
                case,
                ix: &ix,
                op: &op,
                coeffs: &coeffs,
                flags: &flags,
                settings: cfg.solver,
                primal_warm: Some(&pw),
                dual_warm: Some(&dw),
            };
            let out = discretized_bilevel_search(&market, unit, &cfg.search)?;
            let st = Stage::new(out.evaluation.profit, out.evaluations, out.local_optimum_gap);
            Ok((out.evaluation.schedule, st))
        })?;
        let next = damp(unit, schedule, &candidate, cfg.damping);
        let verified = self.stage(iteration, 6, "verification", || {
            let (ver, ex) = verify_solution(case, &next, cfg.search.mode, &cfg.opf).map_err(|e| e.to_string())?;
            let (p, _) = warm_start_primal(case, &ix, &op, &coeffs, &flags, Some(&next), Some(&pw), &cfg.solver)
                .map_err(|e| e.to_string())?;
            let (d, _) = warm_start_dual(case, &ix, &op, &coeffs, &flags, Some(&next), Some(&dw), &cfg.solver)
                .map_err(|e| e.to_string())?;
            let its = ex.steps.iter().map(|s| s.iterations).sum();
            let st = Stage::new(ver.exact_cost, its, None);
            Ok(((ver, ex, p, d), st))
        })?;
        let (ver, ex, p_next, d_next) = verified;
        let prices = prices_at(&d_next, beta);
        let predicted = evaluate_profit(&next, &prices, cfg.search.mode).profit;
        let flow_err = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter().flatten().zip(b.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        let approximation = ApproximationError {
            predicted_cost: p_next.objective,
            exact_cost: ver.exact_cost,
            relative_error: (p_next.objective - ver.exact_cost).abs() / ver.exact_cost.abs().max(1e-12),
            max_flow_error_p: flow_err(&p_next.p, &ex.flow_p),
            max_flow_error_q: flow_err(&p_next.q, &ex.flow_q),
        };
        let arcs = ix
            .arcs()
            .map(|a| {
                let br = &case.branches[a.branch];
                let (i, j) = if a.reverse { (br.to_bus, br.from_bus) } else { (br.from_bus, br.to_bus) };
                format!("{}:{i}->{j}", br.id)
            })
            .collect();
        let flows = FlowExtract {
            arcs,
            predicted_p: p_next.p.clone(),
            predicted_q: p_next.q.clone(),
            exact_p: ex.flow_p.clone(),
            exact_q: ex.flow_q.clone(),
        };
        // overloads come from the predicted flows
        let ratings = branch_ratings(case, &ix);
        let overloads = find_overloads(iteration, case, &ix, &loading_ratios(&p_next.p, &p_next.q, &ratings), &flags.phi);
        let op_loading = loading_ratios(&exact.flow_p, &exact.flow_q, &ratings);
        let overloaded_op: Vec<f64> = overloads
            .iter()
            .map(|o| {
                let k = ix.forward.iter().position(|a| case.branches[a.branch].id == o.branch).unwrap();
                op_loading[o.t][k]
            })
            .collect();
        let r = &mut self.report;
        r.profit = Some(ProfitComparison::new(predicted, ver.exact_profit));
        r.approximation = Some(approximation);
        r.predicted_prices = Some(prices);
        r.verification = Some(ver);
        r.flows = Some(flows);
        r.schedule = Some(next.clone());
        r.overloads.extend(overloads);
        Some((
            next,
            ex,
            IterationOutcome {
                predicted,
                overloaded_op,
            },
        ))
    }
}

struct IterationOutcome {
    predicted: f64,
    overloaded_op: Vec<f64>,
}

fn damp(unit: &StorageUnit, old: &StorageSchedule, new: &StorageSchedule, d: f64) -> StorageSchedule {
    if d >= 1.0 {
        return new.clone();
    }
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + d * (y - x)).collect::<Vec<f64>>();
    let s = StorageSchedule::from_net(unit, mix(&old.p_es, &new.p_es), mix(&old.q_es, &new.q_es));
    if crate::bilevel::storage_feasible(&s, unit).is_empty() {
        s
    } else {
        new.clone()
    }
}

fn schedule_change(a: &StorageSchedule, b: &StorageSchedule) -> f64 {
    a.p_es
        .iter()
        .zip(&b.p_es)
        .chain(a.q_es.iter().zip(&b.q_es))
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Steps 1–6, optionally looped; failures end the run with a partial report.
pub fn run_algorithm1(case: &NetworkCase, config: &AlgorithmConfig) -> RunReport {
    let mut runner = Runner {
        case,
        config,
        report: RunReport::new(&case.name, case.horizon, config),
    };
    let fail = |mut r: RunReport, message: String| {
        r.failure = Some(Failure {
            iteration: 0,
            step: 0,
            message,
        });
        r
    };
    if let Err(e) = config.validate() {
        return fail(runner.report, e.to_string());
    }
    let Some(unit) = case.storage.clone() else {
        return fail(runner.report, "case has no storage unit".into());
    };
    let mut schedule = StorageSchedule::passive(case.horizon, unit.soe_init);
    let mut carried = None;
    let mut threshold = config.phi_threshold;
    let mut loops = 0;
    let mut iteration = 0;
    while loops < config.loop_max {
        iteration += 1;
        let Some((next, exact, out)) = runner.iteration(iteration, &unit, &schedule, carried.take(), threshold) else {
            return runner.report;
        };
        let change = schedule_change(&schedule, &next);
        let exact_profit = runner.report.verification.as_ref().map_or(0.0, |v| v.exact_profit);
        runner.report.loop_trace.push(LoopRecord {
            iteration,
            phi_threshold: threshold,
            schedule_change: change,
            predicted_profit: out.predicted,
            exact_profit,
        });
        if !out.overloaded_op.is_empty() && runner.report.reruns.len() < MAX_RERUNS {
            let lowered = rerun_threshold(threshold, &out.overloaded_op);
            if lowered < threshold {
                threshold = lowered;
                runner.report.reruns.push(lowered);
                // same schedule, so the operating point is recomputed rather than carried
                continue;
            }
        }
        loops += 1;
        runner.report.converged = change <= config.loop_tol;
        schedule = next;
        carried = Some(exact);
        if runner.report.converged {
            break;
        }
    }
    runner.report
}
