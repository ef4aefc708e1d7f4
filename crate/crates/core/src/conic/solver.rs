//! Primal-dual predictor-corrector interior-point method for
//! `min ½xᵀPx + cᵀx  s.t.  Ax = b,  Gx + s = h,  s ∈ K`.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::cones::{norm2, ConeLayout, NtScaling};
use super::{ConicProgram, ProgramError};
use crate::linalg::{CscMatrix, LdlFactor, LdlSymbolic, Triplets};
use crate::scalar::{dot, norm_inf, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T> {
    pub tol: T,
    pub max_iter: usize,
    pub static_reg: T,
    /// pivots with the wrong sign or magnitude below this are replaced
    pub pivot_eps: T,
    pub dynamic_reg: T,
    pub refine_steps: usize,
    pub step_fraction: T,
    pub warm_blend: T,
    pub warm_margin: T,
    pub infeasibility_tol: T,
    /// after convergence, keep stepping until the relative gap reaches this
    pub polish_gap: T,
    pub polish_iter: usize,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iter: 200,
            static_reg: T::lit(1e-8),
            pivot_eps: T::lit(1e-13),
            dynamic_reg: T::lit(1e-9),
            refine_steps: 10,
            step_fraction: T::lit(0.99),
            warm_blend: T::lit(0.999),
            warm_margin: T::lit(1e-6),
            infeasibility_tol: T::lit(1e-8),
            polish_gap: T::lit(1e-16),
            polish_iter: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
    /// non-finite iterate or a stalled step
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
}

/// Starting point in the solver's internal ordering. Missing parts are filled
/// from the program (`s = h − Gx`, `z = e`, `y = 0`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WarmStart<T> {
    pub x: Vec<T>,
    pub y: Option<Vec<T>>,
    pub s: Option<Vec<T>>,
    pub z: Option<Vec<T>>,
}

impl<T> WarmStart<T> {
    pub fn primal(x: Vec<T>) -> Self {
        Self {
            x,
            y: None,
            s: None,
            z: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    /// multiplier of `Σ a·x − rhs` in `L = f + Σ y·(a·x − rhs) − …`
    pub eq_multipliers: Vec<T>,
    /// multiplier of `l − x ≤ 0`; zero when the bound is absent
    pub lower_multipliers: Vec<T>,
    /// multiplier of `x − u ≤ 0`; zero when the bound is absent
    pub upper_multipliers: Vec<T>,
    pub cone_multipliers: Vec<Vec<T>>,
    pub objective: T,
    pub dual_objective: T,
    pub iterations: usize,
    pub residuals: Residuals<T>,
    pub warm: WarmStart<T>,
}

impl<T: Scalar> SolveResult<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
enum GRow<T> {
    /// `sign·x[var] + s = h`
    Var { var: usize, sign: T },
}

/// Internal standard form of a [`ConicProgram`].
struct StandardForm<T> {
    n: usize,
    m_user: usize,
    a: CscMatrix<T>,
    at: CscMatrix<T>,
    b: Vec<T>,
    g: Vec<GRow<T>>,
    h: Vec<T>,
    layout: ConeLayout,
    p: Vec<T>,
    c: Vec<T>,
    fixed: Vec<(usize, usize)>,
    lower_row: Vec<Option<usize>>,
    upper_row: Vec<Option<usize>>,
}

impl<T: Scalar> StandardForm<T> {
    fn new(prog: &ConicProgram<T>) -> Self {
        let n = prog.num_vars();
        let m_user = prog.eqs.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (r, row) in prog.eqs.iter().enumerate() {
            for &(j, v) in &row.terms {
                a.push((r, j, v));
            }
            b.push(row.rhs);
        }
        let mut fixed = Vec::new();
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut lower_row = vec![None; n];
        let mut upper_row = vec![None; n];
        for (j, v) in prog.vars.iter().enumerate() {
            match (v.lower, v.upper) {
                (Some(l), Some(u)) if l == u => {
                    let r = b.len();
                    a.push((r, j, T::one()));
                    b.push(l);
                    fixed.push((j, r));
                }
                (lo, up) => {
                    if let Some(l) = lo {
                        lower_row[j] = Some(g.len());
                        g.push(GRow::Var { var: j, sign: -T::one() });
                        h.push(-l);
                    }
                    if let Some(u) = up {
                        upper_row[j] = Some(g.len());
                        g.push(GRow::Var { var: j, sign: T::one() });
                        h.push(u);
                    }
                }
            }
        }
        let nonneg = g.len();
        let mut dims = Vec::new();
        for c in &prog.socs {
            dims.push(c.vars.len());
            for &j in &c.vars {
                g.push(GRow::Var { var: j, sign: -T::one() });
                h.push(T::zero());
            }
        }
        let a = CscMatrix::from_triplets(b.len(), n, &a);
        let at = a.transpose();
        Self {
            n,
            m_user,
            at,
            a,
            b,
            g,
            h,
            layout: ConeLayout::new(nonneg, dims),
            p: prog.quad.iter().map(|&q| q + q).collect(),
            c: prog.linear.clone(),
            fixed,
            lower_row,
            upper_row,
        }
    }

    fn g_mul(&self, x: &[T], out: &mut [T]) {
        for (r, row) in self.g.iter().enumerate() {
            let GRow::Var { var, sign } = *row;
            out[r] = sign * x[var];
        }
    }

    fn gt_mul_add(&self, z: &[T], out: &mut [T]) {
        for (r, row) in self.g.iter().enumerate() {
            let GRow::Var { var, sign } = *row;
            out[var] += sign * z[r];
        }
    }

    /// `[P Aᵀ Gᵀ; A 0 0; G 0 −W²]` (upper triangle) with diagonal regularization.
    fn kkt_matrix(&self, w: &NtScaling<T>, reg: T) -> CscMatrix<T> {
        let n = self.n;
        let pdim = self.b.len();
        let off = n + pdim;
        let dim = off + self.layout.dim;
        let mut t = Triplets::new(dim, dim);
        for j in 0..n {
            t.push(j, j, self.p[j] + reg);
        }
        for r in 0..pdim {
            for (j, v) in self.at.col(r) {
                t.push(j, n + r, v);
            }
            t.push(n + r, n + r, -reg);
        }
        for (r, row) in self.g.iter().enumerate() {
            let GRow::Var { var, sign } = *row;
            t.push(var, off + r, sign);
        }
        for r in 0..self.layout.nonneg {
            t.push(off + r, off + r, -w.orthant_sq(r) - reg);
        }
        for k in 0..self.layout.soc_dims.len() {
            let m = w.soc_sq(&self.layout, k);
            let d = self.layout.soc_dims[k];
            let base = off + self.layout.soc_offsets[k];
            for a in 0..d {
                for bb in a..d {
                    let v = -m[a * d + bb] - if a == bb { reg } else { T::zero() };
                    t.push(base + a, base + bb, v);
                }
            }
        }
        t.to_csc()
    }
}

struct KktSystem<T> {
    factor: LdlFactor<T>,
    exact: CscMatrix<T>,
}

impl<T: Scalar> KktSystem<T> {
    fn factor(
        sf: &StandardForm<T>,
        w: &NtScaling<T>,
        settings: &SolverSettings<T>,
        symbolic: &mut Option<LdlSymbolic>,
    ) -> Self {
        let reg = sf.kkt_matrix(w, settings.static_reg);
        let exact = sf.kkt_matrix(w, T::zero());
        let sym = symbolic
            .get_or_insert_with(|| LdlSymbolic::analyze(&reg).expect("KKT pattern has a full diagonal"))
            .clone();
        let mut factor = LdlFactor::new(sym);
        let signs: Vec<i8> = (0..reg.ncols)
            .map(|k| if k < sf.n { 1 } else { -1 })
            .collect();
        let st = factor
            .factor(&reg, Some(&signs), settings.pivot_eps, settings.dynamic_reg)
            .expect("signed factorization cannot fail on the analyzed pattern");
        if st.regularized > 0 {
            debug!("{} pivots regularized", st.regularized);
        }
        Self { factor, exact }
    }

    fn solve(&self, rhs: &[T], refine: usize) -> Vec<T> {
        let mut sol = rhs.to_vec();
        self.factor.solve_in_place(&mut sol);
        let mut kx = vec![T::zero(); rhs.len()];
        for _ in 0..refine {
            self.exact.sym_upper_matvec(&sol, &mut kx);
            let mut r: Vec<T> = rhs.iter().zip(&kx).map(|(&a, &b)| a - b).collect();
            if norm_inf(&r) <= T::epsilon() * (T::one() + norm_inf(rhs)) {
                break;
            }
            self.factor.solve_in_place(&mut r);
            for (s, d) in sol.iter_mut().zip(&r) {
                *s += *d;
            }
        }
        sol
    }
}

/// Solves `[P Aᵀ Gᵀ; A 0 0; G 0 −W²] [dx; dy; dz] = [bx; by; bz]`.
fn solve_newton<T: Scalar>(
    sf: &StandardForm<T>,
    kkt: &KktSystem<T>,
    bx: &[T],
    by: &[T],
    bz: &[T],
    refine: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = sf.n;
    let pdim = by.len();
    let mut rhs = Vec::with_capacity(n + pdim + bz.len());
    rhs.extend_from_slice(bx);
    rhs.extend_from_slice(by);
    rhs.extend_from_slice(bz);
    let sol = kkt.solve(&rhs, refine);
    (
        sol[..n].to_vec(),
        sol[n..n + pdim].to_vec(),
        sol[n + pdim..].to_vec(),
    )
}

struct Best<T> {
    it: Iterate<T>,
    residuals: Residuals<T>,
    pcost: T,
    dcost: T,
    iterations: usize,
}

#[derive(Clone)]
struct Iterate<T> {
    x: Vec<T>,
    y: Vec<T>,
    s: Vec<T>,
    z: Vec<T>,
}

pub fn solve_conic<T: Scalar>(
    program: &ConicProgram<T>,
    warm: Option<&WarmStart<T>>,
) -> Result<SolveResult<T>, ProgramError> {
    solve_conic_with(program, warm, &SolverSettings::default())
}

/// Retries once with heavier regularization after a numerical failure.
pub fn solve_conic_with<T: Scalar>(
    program: &ConicProgram<T>,
    warm: Option<&WarmStart<T>>,
    settings: &SolverSettings<T>,
) -> Result<SolveResult<T>, ProgramError> {
    let first = solve_once(program, warm, settings)?;
    if first.status != SolveStatus::Numerical {
        return Ok(first);
    }
    let hundred = T::lit(100.0);
    let heavier = SolverSettings {
        static_reg: settings.static_reg * hundred,
        dynamic_reg: settings.dynamic_reg * hundred,
        ..settings.clone()
    };
    warn!("numerical failure after {} iterations; retrying with heavier regularization", first.iterations);
    solve_once(program, None, &heavier)
}

fn solve_once<T: Scalar>(
    program: &ConicProgram<T>,
    warm: Option<&WarmStart<T>>,
    settings: &SolverSettings<T>,
) -> Result<SolveResult<T>, ProgramError> {
    program.validate()?;
    let sf = StandardForm::new(program);
    let n = sf.n;
    let pdim = sf.b.len();
    let md = sf.layout.dim;
    let layout = &sf.layout;
    let mut symbolic = None;

    let warm = warm.filter(|w| {
        let ok = w.x.len() == n
            && w.y.as_ref().is_none_or(|y| y.len() == pdim)
            && w.s.as_ref().is_none_or(|s| s.len() == md)
            && w.z.as_ref().is_none_or(|z| z.len() == md);
        if !ok {
            warn!("warm start dimensions do not match the program; starting cold");
        }
        ok
    });

    let mut it = match warm {
        Some(ws) => warm_iterate(&sf, ws, settings),
        None => cold_iterate(&sf, settings, &mut symbolic),
    };

    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let degree = T::from_usize(layout.degree().max(1)).unwrap();
    let e = layout.identity::<T>();
    let nb = T::one().max(norm2(&sf.b));
    let nh = T::one().max(norm2(&sf.h));
    let nc = T::one().max(norm2(&sf.c));

    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;
    let mut residuals = Residuals::default();
    let mut pcost = T::zero();
    let mut dcost = T::zero();
    let mut stalls = 0;
    let mut best: Option<Best<T>> = None;

    for iter in 0..=settings.max_iter {
        iterations = iter;
        let mut rx: Vec<T> = (0..n).map(|j| sf.p[j] * it.x[j] + sf.c[j]).collect();
        let mut aty = vec![T::zero(); n];
        sf.a.matvec_t(&it.y, &mut aty);
        for j in 0..n {
            rx[j] += aty[j];
        }
        sf.gt_mul_add(&it.z, &mut rx);
        let mut ry = vec![T::zero(); pdim];
        sf.a.matvec(&it.x, &mut ry);
        for r in 0..pdim {
            ry[r] -= sf.b[r];
        }
        let mut rz = vec![T::zero(); md];
        sf.g_mul(&it.x, &mut rz);
        for i in 0..md {
            rz[i] += it.s[i] - sf.h[i];
        }
        let gap = dot(&it.s, &it.z);
        let mu = gap / degree;
        let xpx: T = (0..n).map(|j| sf.p[j] * it.x[j] * it.x[j]).sum();
        pcost = half * xpx + dot(&sf.c, &it.x);
        dcost = pcost + dot(&it.y, &ry) + dot(&it.z, &rz) - gap;
        let pres = (norm2(&ry) / nb).max(norm2(&rz) / nh);
        let dres = norm2(&rx) / nc;
        let relgap = gap / T::one().max(pcost.abs().min(dcost.abs()));
        residuals = Residuals {
            primal: pres,
            dual: dres,
            gap: relgap,
        };
        debug!(
            "iter {iter}: pcost {pcost:e} dcost {dcost:e} gap {gap:e} pres {pres:e} dres {dres:e}"
        );
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            status = SolveStatus::Numerical;
            break;
        }
        let converged = pres <= settings.tol && dres <= settings.tol && relgap <= settings.tol;
        if converged && best.as_ref().is_none_or(|b: &Best<T>| relgap < b.residuals.gap) {
            best = Some(Best {
                it: it.clone(),
                residuals,
                pcost,
                dcost,
                iterations: iter,
            });
        }
        if let Some(b) = &best {
            // a few extra steps sharpen points on cone boundaries, whose error scales like √gap
            if !converged || relgap <= settings.polish_gap || iter >= b.iterations + settings.polish_iter {
                status = SolveStatus::Optimal;
                break;
            }
        } else if converged {
            status = SolveStatus::Optimal;
            break;
        }
        if infeasibility_certificate(&sf, &it, settings.infeasibility_tol) {
            status = SolveStatus::Infeasible;
            break;
        }
        if iter == settings.max_iter || stalls >= 5 {
            if stalls >= 5 {
                warn!("interior-point iteration stalled at iteration {iter}");
                status = SolveStatus::Numerical;
            }
            break;
        }

        let w = NtScaling::compute(layout, &it.s, &it.z);
        let kkt = KktSystem::factor(&sf, &w, settings, &mut symbolic);
        let lambda = &w.lambda;
        let mut lsq = vec![T::zero(); md];
        layout.product(lambda, lambda, &mut lsq);

        let bx: Vec<T> = rx.iter().map(|&v| -v).collect();
        let by: Vec<T> = ry.iter().map(|&v| -v).collect();

        let step = |ds_rhs: &[T]| {
            // λ ∘ (W dz + W⁻¹ ds) = ds_rhs
            let mut t = vec![T::zero(); md];
            layout.divide(lambda, ds_rhs, &mut t);
            let mut wt = vec![T::zero(); md];
            w.apply(layout, &t, &mut wt);
            let bz: Vec<T> = (0..md).map(|i| -rz[i] - wt[i]).collect();
            let (dx, dy, dz) = solve_newton(&sf, &kkt, &bx, &by, &bz, settings.refine_steps);
            let mut wdz = vec![T::zero(); md];
            w.apply(layout, &dz, &mut wdz);
            let diff: Vec<T> = (0..md).map(|i| t[i] - wdz[i]).collect();
            let mut ds = vec![T::zero(); md];
            w.apply(layout, &diff, &mut ds);
            (dx, dy, dz, ds)
        };

        let aff_rhs: Vec<T> = lsq.iter().map(|&v| -v).collect();
        let (_, _, dz_a, ds_a) = step(&aff_rhs);
        let alpha_aff = T::one()
            .min(layout.max_step(&it.s, &ds_a))
            .min(layout.max_step(&it.z, &dz_a));
        let sigma = if gap > T::zero() {
            let s_new: Vec<T> = (0..md).map(|i| it.s[i] + alpha_aff * ds_a[i]).collect();
            let z_new: Vec<T> = (0..md).map(|i| it.z[i] + alpha_aff * dz_a[i]).collect();
            let ratio = (dot(&s_new, &z_new) / gap).max(T::zero()).min(T::one());
            ratio * ratio * ratio
        } else {
            T::zero()
        };

        let mut ws_a = vec![T::zero(); md];
        w.apply_inv(layout, &ds_a, &mut ws_a);
        let mut wz_a = vec![T::zero(); md];
        w.apply(layout, &dz_a, &mut wz_a);
        let mut corr = vec![T::zero(); md];
        layout.product(&ws_a, &wz_a, &mut corr);
        let cc_rhs: Vec<T> = (0..md)
            .map(|i| -lsq[i] - corr[i] + sigma * mu * e[i])
            .collect();
        let (dx, dy, dz, ds) = step(&cc_rhs);
        let amax = layout.max_step(&it.s, &ds).min(layout.max_step(&it.z, &dz));
        let alpha = T::one().min(settings.step_fraction * amax);
        if alpha < T::lit(1e-10) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        for j in 0..n {
            it.x[j] += alpha * dx[j];
        }
        for r in 0..pdim {
            it.y[r] += alpha * dy[r];
        }
        for i in 0..md {
            it.s[i] += alpha * ds[i];
            it.z[i] += alpha * dz[i];
        }
        // guard against drift out of the cone from rounding
        if layout.margin(&it.s) <= T::zero() || layout.margin(&it.z) <= T::zero() {
            let floor = T::epsilon() * two;
            layout.push_inside(&mut it.s, floor);
            layout.push_inside(&mut it.z, floor);
        }
    }

    if let Some(b) = best {
        return Ok(assemble_result(
            program,
            &sf,
            b.it,
            SolveStatus::Optimal,
            b.iterations,
            b.residuals,
            b.pcost,
            b.dcost,
        ));
    }
    Ok(assemble_result(
        program, &sf, it, status, iterations, residuals, pcost, dcost,
    ))
}

fn cold_iterate<T: Scalar>(
    sf: &StandardForm<T>,
    settings: &SolverSettings<T>,
    symbolic: &mut Option<LdlSymbolic>,
) -> Iterate<T> {
    let w = NtScaling::identity(&sf.layout);
    let kkt = KktSystem::factor(sf, &w, settings, symbolic);
    let bx: Vec<T> = sf.c.iter().map(|&v| -v).collect();
    let (x, y, z) = solve_newton(sf, &kkt, &bx, &sf.b, &sf.h, settings.refine_steps);
    let mut s: Vec<T> = z.iter().map(|&v| -v).collect();
    let mut z = z;
    let thr = T::lit(1e-8);
    for v in [&mut s, &mut z] {
        if sf.layout.margin(v) <= thr {
            sf.layout.push_inside(v, T::one());
        }
    }
    Iterate { x, y, s, z }
}

fn warm_iterate<T: Scalar>(sf: &StandardForm<T>, ws: &WarmStart<T>, settings: &SolverSettings<T>) -> Iterate<T> {
    let md = sf.layout.dim;
    let x = ws.x.clone();
    let y = ws.y.clone().unwrap_or_else(|| vec![T::zero(); sf.b.len()]);
    let e = sf.layout.identity::<T>();
    let blend = settings.warm_blend;
    let s = match &ws.s {
        Some(s) => s.clone(),
        None => {
            let mut gx = vec![T::zero(); md];
            sf.g_mul(&x, &mut gx);
            (0..md).map(|i| sf.h[i] - gx[i]).collect()
        }
    };
    let z = ws.z.clone().unwrap_or_else(|| e.clone());
    let mix = |v: Vec<T>| {
        let mut out: Vec<T> = v
            .iter()
            .zip(&e)
            .map(|(&a, &u)| blend * a + (T::one() - blend) * u)
            .collect();
        sf.layout.push_inside(&mut out, settings.warm_margin);
        out
    };
    Iterate {
        x,
        y,
        s: mix(s),
        z: mix(z),
    }
}

fn infeasibility_certificate<T: Scalar>(sf: &StandardForm<T>, it: &Iterate<T>, tol: T) -> bool {
    let n = sf.n;
    // primal: Aᵀy + Gᵀz = 0, z ∈ K, bᵀy + hᵀz < 0
    let t = -(dot(&sf.b, &it.y) + dot(&sf.h, &it.z));
    if t > T::zero() {
        let mut r = vec![T::zero(); n];
        sf.a.matvec_t(&it.y, &mut r);
        sf.gt_mul_add(&it.z, &mut r);
        if norm_inf(&r) <= tol * t {
            return true;
        }
    }
    // dual: Px = 0, Ax = 0, Gx ∈ −K, cᵀx < 0
    let t = -dot(&sf.c, &it.x);
    if t > T::zero() {
        let px = (0..n).fold(T::zero(), |m, j| m.max((sf.p[j] * it.x[j]).abs()));
        let mut ax = vec![T::zero(); sf.b.len()];
        sf.a.matvec(&it.x, &mut ax);
        let mut gx = vec![T::zero(); sf.layout.dim];
        sf.g_mul(&it.x, &mut gx);
        gx.iter_mut().for_each(|v| *v = -*v / t);
        if px <= tol * t && norm_inf(&ax) <= tol * t && sf.layout.margin(&gx) >= -tol {
            return true;
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn assemble_result<T: Scalar>(
    program: &ConicProgram<T>,
    sf: &StandardForm<T>,
    it: Iterate<T>,
    status: SolveStatus,
    iterations: usize,
    residuals: Residuals<T>,
    pcost: T,
    dcost: T,
) -> SolveResult<T> {
    let n = sf.n;
    let mut lower = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    for j in 0..n {
        if let Some(r) = sf.lower_row[j] {
            lower[j] = it.z[r];
        }
        if let Some(r) = sf.upper_row[j] {
            upper[j] = it.z[r];
        }
    }
    for &(j, r) in &sf.fixed {
        let nu = it.y[r];
        if nu >= T::zero() {
            upper[j] = nu;
        } else {
            lower[j] = -nu;
        }
    }
    let cone_multipliers = (0..sf.layout.soc_dims.len())
        .map(|k| it.z[sf.layout.soc_range(k)].to_vec())
        .collect();
    SolveResult {
        status,
        eq_multipliers: it.y[..sf.m_user].to_vec(),
        lower_multipliers: lower,
        upper_multipliers: upper,
        cone_multipliers,
        objective: pcost + program.constant,
        dual_objective: dcost + program.constant,
        iterations,
        residuals,
        x: it.x.clone(),
        warm: WarmStart {
            x: it.x,
            y: Some(it.y),
            s: Some(it.s),
            z: Some(it.z),
        },
    }
}
