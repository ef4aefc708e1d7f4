use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bilevel_core::bilevel::{discretized_bilevel_search, prices_at, CpsotaMarket, MarketPrices, StorageSchedule};
use bilevel_core::netcase::{
    apply_load_csv, load_case, save_case_json, validate_case, CaseFormat, NetworkCase, StorageUnit,
};
use bilevel_core::presolve::{run_algorithm1, run_presolve, warm_start_dual, warm_start_primal, write_flags_csv, AlgorithmConfig};
use bilevel_core::verify_report::{emit_report, verify_solution};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bilevel", version, about = "Strategic storage bidding against a convex AC OPF market")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a JSON or Matpower case and write it back as validated JSON
    Import {
        #[command(flatten)]
        common: Common,
        /// load series CSV with columns load_id,t,p_d,q_d
        #[arg(long)]
        loads: Option<PathBuf>,
    },
    /// Operating point, Λ/Γ/Φ flags and the warm-started lower level at the passive schedule
    Presolve(Common),
    /// One lower-level clearing (primal and dual) at a fixed schedule
    Clear {
        #[command(flatten)]
        common: Common,
        /// schedule CSV with columns t,p_es,q_es; passive when omitted
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Presolve followed by the discretized bilevel search
    Bilevel(Common),
    /// Exact-model verification of a schedule
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Full algorithm with report emission
    Pipeline(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// case file (.json or Matpower .m)
    #[arg(long)]
    case: PathBuf,
    /// storage unit JSON; replaces the case's own unit
    #[arg(long)]
    storage: Option<PathBuf>,
    /// repeat single-period loads over this many steps
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    phi_threshold: f64,
    #[arg(long, default_value_t = 7)]
    grid_points: usize,
    /// conic solver tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    loop_max: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// recorded in the outputs; every stage is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn load(&self) -> Result<NetworkCase> {
        let mut case = load_case(&self.case, CaseFormat::from_path(&self.case))?;
        if let Some(p) = &self.storage {
            let text = fs::read_to_string(p).with_context(|| p.display().to_string())?;
            let unit: StorageUnit = serde_json::from_str(&text).with_context(|| p.display().to_string())?;
            case.storage = Some(unit);
        }
        if let Some(h) = self.horizon {
            case = case.with_horizon(h);
        }
        check(&case)?;
        Ok(case)
    }

    fn config(&self) -> Result<AlgorithmConfig> {
        let mut cfg = AlgorithmConfig {
            phi_threshold: self.phi_threshold,
            loop_max: self.loop_max,
            ..AlgorithmConfig::default()
        };
        cfg.search.grid_points = self.grid_points;
        cfg.solver.tol = self.tol;
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).with_context(|| self.out_dir.display().to_string())?;
        Ok(self.out_dir.join(name))
    }
}

fn check(case: &NetworkCase) -> Result<()> {
    let errs = validate_case(case);
    if !errs.is_empty() {
        bail!("invalid case:\n  {}", errs.join("\n  "));
    }
    Ok(())
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| path.display().to_string())?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn read_schedule(path: &Path, case: &NetworkCase, unit: &StorageUnit) -> Result<StorageSchedule> {
    #[derive(serde::Deserialize)]
    struct Row {
        t: usize,
        p_es: f64,
        q_es: f64,
    }
    let mut p = vec![0.0; case.horizon];
    let mut q = vec![0.0; case.horizon];
    let mut rdr = csv::Reader::from_path(path).with_context(|| path.display().to_string())?;
    for row in rdr.deserialize() {
        let r: Row = row.with_context(|| path.display().to_string())?;
        if r.t >= case.horizon {
            bail!("{}: step {} outside the horizon {}", path.display(), r.t, case.horizon);
        }
        p[r.t] = r.p_es;
        q[r.t] = r.q_es;
    }
    Ok(StorageSchedule::from_net(unit, p, q))
}

fn schedule_for(c: &Common, path: Option<&Path>, case: &NetworkCase) -> Result<StorageSchedule> {
    let unit = case.storage.as_ref().context("case has no storage unit")?;
    match path {
        Some(p) => read_schedule(p, case, unit),
        None => Ok(StorageSchedule::passive(case.horizon, unit.soe_init)),
    }
    .with_context(|| format!("schedule for {}", c.case.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Import { common, loads } => {
            let mut case = common.load()?;
            if let Some(l) = loads {
                apply_load_csv(&mut case, &l)?;
                check(&case)?;
            }
            let path = common.out(&format!("{}.json", case.name))?;
            save_case_json(&case, &path)?;
            println!(
                "{}: {} buses, {} branches, {} generators, horizon {}, storage {}",
                case.name,
                case.buses.len(),
                case.branches.len(),
                case.generators.len(),
                case.horizon,
                if case.storage.is_some() { "yes" } else { "no" }
            );
        }
        Command::Presolve(c) => {
            let case = c.load()?;
            let out = run_presolve(&case, None, &c.config()?)?;
            write_flags_csv(out.flags(), &case, &out.ix, &c.out("flags.csv")?)?;
            write_json(
                &c.out("presolve.json")?,
                &json!({
                    "case": case.name,
                    "seed": c.seed,
                    "exact_objective": out.exact.objective,
                    "primal_objective": out.primal.objective,
                    "dual_objective": out.dual.objective,
                    "duality_gap": out.duality_gap(),
                    "max_delta": out.selection.max_delta,
                    "marginals": out.selection.marginals,
                    "flags": out.flags(),
                    "operating_point": out.op(),
                }),
            )?;
            println!("exact {:.6}  primal {:.6}  dual {:.6}", out.exact.objective, out.primal.objective, out.dual.objective);
        }
        Command::Clear { common: c, schedule } => {
            let case = c.load()?;
            let cfg = c.config()?;
            let sched = schedule_for(&c, schedule.as_deref(), &case)?;
            let pre = run_presolve(&case, None, &cfg)?;
            let (p, _) = warm_start_primal(
                &case, &pre.ix, pre.op(), &pre.coeffs, pre.flags(), Some(&sched), Some(&pre.warm.primal), &cfg.solver,
            )?;
            let (d, _) = warm_start_dual(
                &case, &pre.ix, pre.op(), &pre.coeffs, pre.flags(), Some(&sched), Some(&pre.warm.dual), &cfg.solver,
            )?;
            let beta = pre.ix.storage_bus.context("case has no storage unit")?;
            let prices = prices_at(&d, beta);
            let gap = bilevel_core::dualmodel::relative_gap(p.objective, d.objective);
            write_json(
                &c.out("clear.json")?,
                &json!({
                    "case": case.name,
                    "schedule": sched,
                    "primal_objective": p.objective,
                    "dual_objective": d.objective,
                    "relative_gap": gap,
                    "prices": prices,
                    "pg": p.pg,
                    "qg": p.qg,
                }),
            )?;
            println!("cost {:.6}  gap {gap:.2e}  lmp {:?}", p.objective, prices.lmp);
        }
        Command::Bilevel(c) => {
            let case = c.load()?;
            let cfg = c.config()?;
            let pre = run_presolve(&case, None, &cfg)?;
            let unit = case.storage.clone().context("case has no storage unit")?;
            let market = CpsotaMarket {
                case: &case,
                ix: &pre.ix,
                op: pre.op(),
                coeffs: &pre.coeffs,
                flags: pre.flags(),
                settings: cfg.solver,
                primal_warm: Some(&pre.warm.primal),
                dual_warm: Some(&pre.warm.dual),
            };
            let out = discretized_bilevel_search(&market, &unit, &cfg.search).map_err(anyhow::Error::msg)?;
            out.write_trace_csv(&c.out("trace.csv")?)?;
            write_json(
                &c.out("bilevel.json")?,
                &json!({
                    "case": case.name,
                    "seed": c.seed,
                    "profit": out.evaluation.profit,
                    "schedule": out.schedule(),
                    "prices": MarketPrices::from_multipliers(&out.evaluation.lam1, &out.evaluation.lam2),
                    "local_optimum_gap": out.local_optimum_gap,
                    "evaluations": out.evaluations,
                }),
            )?;
            println!("profit {:.6}  p_es {:?}", out.evaluation.profit, out.schedule().p_es);
        }
        Command::Verify { common: c, schedule } => {
            let case = c.load()?;
            let cfg = c.config()?;
            let sched = schedule_for(&c, schedule.as_deref(), &case)?;
            let (ver, _) = verify_solution(&case, &sched, cfg.search.mode, &cfg.opf)?;
            write_json(&c.out("verification.json")?, &json!({"case": case.name, "schedule": sched, "verification": ver}))?;
            println!("exact cost {:.6}  exact profit {:.6}", ver.exact_cost, ver.exact_profit);
        }
        Command::Pipeline(c) => {
            let case = c.load()?;
            let cfg = c.config()?;
            log::info!("seed {}", c.seed);
            let report = run_algorithm1(&case, &cfg);
            let files = emit_report(&report, &c.out_dir)?;
            for f in &files {
                log::info!("wrote {}", f.display());
            }
            if let Some(p) = &report.profit {
                println!("profit predicted {:.6}  exact {:.6}  gap {:.2e}", p.predicted, p.exact, p.gap);
            }
            if let Some(f) = &report.failure {
                bail!("step {} of iteration {} failed: {}", f.step, f.iteration, f.message);
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
