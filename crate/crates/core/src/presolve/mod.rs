//! Operating point, flag selection and warm-started lower-level solves.

mod pipeline;

pub use pipeline::run_algorithm1;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilevel::{SearchConfig, StorageSchedule};
use crate::conic::{SolverSettings, WarmStart};
use crate::cpsota::{
    build_ll_primal, compute_operating_coeffs, solve_ll_primal, CpsotaError, DerivedCoeffs, PresolveFlags,
    PrimalSolution,
};
use crate::dualmodel::{build_ll_dual, relative_gap, solve_ll_dual_warm, DualError, DualOptions, DualSolution};
use crate::netcase::{IndexSets, NetworkCase};
use crate::pfexact::{phi_from_exact, solve_exact_polar_opf, ExactSolution, OperatingPoint, OpfError, OpfSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub phi_threshold: f64,
    pub marginal_tol: f64,
    pub loop_max: usize,
    /// largest schedule change (p.u.) accepted as converged
    pub loop_tol: f64,
    /// `new = old + damping·(candidate − old)` between loop iterations
    pub damping: f64,
    /// skip step 5 and keep the storage passive
    pub passive_only: bool,
    pub search: SearchConfig,
    #[serde(skip)]
    pub solver: SolverSettings<f64>,
    #[serde(skip)]
    pub opf: OpfSettings,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            phi_threshold: 0.8,
            marginal_tol: 1e-7,
            loop_max: 1,
            loop_tol: 1e-4,
            damping: 1.0,
            passive_only: false,
            search: SearchConfig::default(),
            solver: SolverSettings::default(),
            opf: OpfSettings::default(),
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<(), PresolveError> {
        let bad = |what: &str| Err(PresolveError::Config(what.to_string()));
        if !(self.phi_threshold > 0.0 && self.phi_threshold <= 1.0) {
            return bad("phi_threshold must lie in (0, 1]");
        }
        if !(self.marginal_tol > 0.0) || !(self.loop_tol > 0.0) || !(self.solver.tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.loop_max < 1 {
            return bad("loop_max must be at least 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        self.search.validate().map_err(PresolveError::Config)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("case has no storage unit")]
    NoStorage,
    #[error(transparent)]
    Opf(#[from] OpfError),
    #[error(transparent)]
    Primal(#[from] CpsotaError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error("equality-form objective {model} differs from the operating-point cost {exact}")]
    Inconsistent { model: f64, exact: f64 },
}

/// Marginals of the equality forms at the operating point, `[t][branch]` and `[t][pair]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub voltage: Vec<Vec<f64>>,
    pub cosine: Vec<Vec<f64>>,
}

/// Λ is true only where the marginal exceeds `tol` and the voltage cone exists.
pub fn flags_from_marginals(m: &Marginals, coeffs: &DerivedCoeffs, phi: Vec<Vec<bool>>, tol: f64) -> PresolveFlags {
    let lam = m
        .voltage
        .iter()
        .enumerate()
        .map(|(t, row)| {
            row.iter()
                .enumerate()
                .map(|(k, &v)| v > tol && coeffs.voltage_cone_defined(t, k))
                .collect()
        })
        .collect();
    let gam = m.cosine.iter().map(|row| row.iter().map(|&c| c < -tol).collect()).collect();
    PresolveFlags { lam, gam, phi }
}

#[derive(Debug, Clone)]
pub struct FlagSelection {
    pub flags: PresolveFlags,
    pub marginals: Marginals,
    /// `(‖V^Δ‖∞, ‖θ^Δ‖∞)` of the equality-form solve
    pub max_delta: (f64, f64),
    pub objective: f64,
}

/// Step 2. At zero deltas the quadratic terms of both equality forms have zero
/// gradient, so the model with `V̌ = 0` and `ĉos = 1` has the same KKT system; its
/// multipliers are the marginals (sensitivity to the right-hand side is `−y`).
/// The zero-delta point need not be the only optimum, so consistency is checked on the
/// objective.
pub fn determine_lambda_gamma(
    case: &NetworkCase,
    ix: &IndexSets,
    exact: &ExactSolution,
    coeffs: &DerivedCoeffs,
    phi: Vec<Vec<bool>>,
    schedule: Option<&StorageSchedule>,
    config: &AlgorithmConfig,
) -> Result<FlagSelection, PresolveError> {
    let linear = PresolveFlags {
        lam: vec![vec![false; ix.forward.len()]; case.horizon],
        gam: vec![vec![false; ix.pairs.len()]; case.horizon],
        phi: phi.clone(),
    };
    let model = build_ll_primal(case, ix, &exact.op, coeffs, &linear, schedule).map_err(CpsotaError::from)?;
    let sol = solve_ll_primal(&model, None, &config.solver)?;
    if relative_gap(sol.objective, exact.objective) > 1e-6 {
        return Err(PresolveError::Inconsistent {
            model: sol.objective,
            exact: exact.objective,
        });
    }
    let max_delta = sol.max_abs_delta();
    let mut marginals = Marginals {
        voltage: vec![],
        cosine: vec![],
    };
    for (step, res) in model.steps.iter().zip(&sol.raw) {
        let y = &res.eq_multipliers;
        let neg = |rows: &[Option<usize>]| rows.iter().map(|r| r.map_or(0.0, |r| -y[r])).collect::<Vec<f64>>();
        marginals.voltage.push(neg(&step.layout.vchk_zero));
        marginals.cosine.push(neg(&step.layout.cos_one));
    }
    let flags = flags_from_marginals(&marginals, coeffs, phi, config.marginal_tol);
    Ok(FlagSelection {
        flags,
        marginals,
        max_delta,
        objective: sol.objective,
    })
}

/// Solver states for the flagged primal and dual.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WarmStartBundle {
    pub primal: Vec<WarmStart<f64>>,
    pub dual: Vec<WarmStart<f64>>,
}

/// Step 3.
#[allow(clippy::too_many_arguments)]
pub fn warm_start_primal(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    coeffs: &DerivedCoeffs,
    flags: &PresolveFlags,
    schedule: Option<&StorageSchedule>,
    warm: Option<&[WarmStart<f64>]>,
    settings: &SolverSettings<f64>,
) -> Result<(PrimalSolution, Vec<WarmStart<f64>>), PresolveError> {
    let model = build_ll_primal(case, ix, op, coeffs, flags, schedule).map_err(CpsotaError::from)?;
    let sol = solve_ll_primal(&model, warm, settings)?;
    let ws = sol.warm_starts();
    Ok((sol, ws))
}

/// Step 4.
#[allow(clippy::too_many_arguments)]
pub fn warm_start_dual(
    case: &NetworkCase,
    ix: &IndexSets,
    op: &OperatingPoint,
    coeffs: &DerivedCoeffs,
    flags: &PresolveFlags,
    schedule: Option<&StorageSchedule>,
    warm: Option<&[WarmStart<f64>]>,
    settings: &SolverSettings<f64>,
) -> Result<(DualSolution, Vec<WarmStart<f64>>), PresolveError> {
    let model = build_ll_dual(case, ix, op, coeffs, flags, schedule, &DualOptions::default()).map_err(DualError::from)?;
    let sol = solve_ll_dual_warm(&model, warm, settings)?;
    let ws = sol.warm.clone();
    Ok((sol, ws))
}

/// Everything steps 1–4 produce.
#[derive(Debug, Clone)]
pub struct PresolveOutput {
    pub ix: IndexSets,
    pub schedule: Option<StorageSchedule>,
    pub exact: ExactSolution,
    pub coeffs: DerivedCoeffs,
    pub selection: FlagSelection,
    pub primal: PrimalSolution,
    pub dual: DualSolution,
    pub warm: WarmStartBundle,
}

impl PresolveOutput {
    pub fn op(&self) -> &OperatingPoint {
        &self.exact.op
    }

    pub fn flags(&self) -> &PresolveFlags {
        &self.selection.flags
    }

    pub fn duality_gap(&self) -> f64 {
        relative_gap(self.primal.objective, self.dual.objective)
    }
}

/// Steps 1–4 around a fixed storage schedule (passive when `None` and the case has storage).
pub fn run_presolve(
    case: &NetworkCase,
    schedule: Option<StorageSchedule>,
    config: &AlgorithmConfig,
) -> Result<PresolveOutput, PresolveError> {
    config.validate()?;
    let ix = IndexSets::build(case);
    let schedule =
        schedule.or_else(|| case.storage.as_ref().map(|s| StorageSchedule::passive(case.horizon, s.soe_init)));
    let exact = solve_exact_polar_opf(case, schedule.as_ref(), &config.opf)?;
    let coeffs = compute_operating_coeffs(case, &ix, &exact.op);
    let phi = phi_from_exact(case, &ix, &exact, config.phi_threshold);
    let selection = determine_lambda_gamma(case, &ix, &exact, &coeffs, phi, schedule.as_ref(), config)?;
    let (primal, pw) = warm_start_primal(
        case,
        &ix,
        &exact.op,
        &coeffs,
        &selection.flags,
        schedule.as_ref(),
        None,
        &config.solver,
    )?;
    let (dual, dw) = warm_start_dual(
        case,
        &ix,
        &exact.op,
        &coeffs,
        &selection.flags,
        schedule.as_ref(),
        None,
        &config.solver,
    )?;
    Ok(PresolveOutput {
        ix,
        schedule,
        exact,
        coeffs,
        selection,
        primal,
        dual,
        warm: WarmStartBundle { primal: pw, dual: dw },
    })
}

/// One row per time step and one column per flagged element.
pub fn write_flags_csv(flags: &PresolveFlags, case: &NetworkCase, ix: &IndexSets, path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["t".to_string()];
    for a in &ix.forward {
        head.push(format!("lam_{}", case.branches[a.branch].id));
    }
    for (i, j) in ix.pair_ids(case) {
        head.push(format!("gam_{i}_{j}"));
    }
    for a in ix.arcs() {
        let br = &case.branches[a.branch];
        let (i, j) = if a.reverse { (br.to_bus, br.from_bus) } else { (br.from_bus, br.to_bus) };
        head.push(format!("phi_{}_{i}_{j}", br.id));
    }
    w.write_record(&head)?;
    for t in 0..flags.horizon() {
        let cells = flags.lam[t].iter().chain(&flags.gam[t]).chain(&flags.phi[t]).map(|&b| u8::from(b).to_string());
        w.write_record(std::iter::once(t.to_string()).chain(cells))?;
    }
    w.flush()
}
