//! Convex subproblem of one alternating-optimization step: with the
//! quadratic-transform auxiliaries and the Taylor expansion points fixed,
//! minimize `T^u + T^p + T^d` over precoders, CPU shares, split variables
//! and rate variables as a cone program.
//!
//! Internally the precoders are normalized by their power budgets
//! (`W = sqrt(P_k) W~`, `p = sqrt(P_b) p~`) and CPU shares by the server
//! capacity (`f = F_b f'`), so the solver sees O(1) data.

use num_complex::Complex64;

use crate::ao::{LinkModel, TransmitState};
use crate::compute::{energy_constraint_terms, local_time_constraint_terms, ComputeDecision, BETA_MAX};
use crate::conic::{ComplexExpr, ConeProgram, ConicSolution, LinExpr, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, LN2};
use crate::rates::{cap_powers, downlink_limits, uplink_rates, DlRate, DlStream};
use crate::scenario::Scenario;
use crate::surrogate::{downlink_surrogate_sinr, AuxState, UplinkSurrogateModel};

pub mod family {
    pub const OFFLOAD_DELAY: &str = "offload_delay";
    pub const SERVER_TIME: &str = "server_time";
    pub const LOCAL_TIME: &str = "local_time";
    pub const FEEDBACK_DELAY: &str = "feedback_delay";
    pub const COMMON_SURROGATE: &str = "common_surrogate";
    pub const COMMON_LOG: &str = "common_log";
    pub const PRIVATE_SURROGATE: &str = "private_surrogate";
    pub const PRIVATE_LOG: &str = "private_log";
    pub const UPLINK_SURROGATE: [&str; 2] = ["uplink_surrogate_1", "uplink_surrogate_2"];
    pub const USER_POWER: &str = "user_power";
    pub const BS_POWER: &str = "bs_power";
    pub const CPU_BUDGET: &str = "cpu_budget";
    pub const ENERGY_FRACTION_MINUS: &str = "energy_fraction_minus";
    pub const ENERGY_FRACTION_PLUS: &str = "energy_fraction_plus";
    pub const ENERGY_BUDGET: &str = "energy_budget";
    pub const BETA_RANGE: &str = "beta_range";
    pub const NONNEGATIVE: &str = "nonnegative";
}

type CVar = (usize, usize);

/// Index bookkeeping from model quantities to solver variables.
#[derive(Debug, Clone)]
pub struct VarMap {
    /// Row-major entries of `W~[k][m]`, `None` for inactive streams.
    pub w: Vec<[Option<Vec<CVar>>; 2]>,
    pub p_common: Option<Vec<CVar>>,
    pub p_private: Vec<Vec<CVar>>,
    pub f: Vec<usize>,
    /// `None` when the offload fraction is fixed at 1.
    pub beta: Option<Vec<usize>>,
    pub t_u: usize,
    pub t_p: usize,
    pub t_d: usize,
    pub r_up: Vec<[Option<usize>; 2]>,
    pub r_common: Vec<Option<usize>>,
    pub r_private: Vec<usize>,
    /// Scaled surrogate SINR per downlink cap; the true value is `sinr_scale * u`.
    pub u_cap: Vec<usize>,
    pub sinr_scale: Vec<f64>,
    /// Epigraph variables of `f'^2 / (2(1 -+ beta))`.
    pub energy_frac: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SubproblemSpec {
    pub program: ConeProgram,
    pub vars: VarMap,
    pub model: LinkModel,
    sqrt_p_user: Vec<f64>,
    sqrt_p_bs: f64,
    f_scale: f64,
    f_tilde: Vec<f64>,
    /// Energy-term coefficients `kappa f~ F_b^2 / P_b` (partial offload only).
    energy_coeff: Vec<f64>,
    beta_prev: Vec<f64>,
    f_prev_scaled: Vec<f64>,
    surrogate_up: Vec<UplinkSurrogateModel>,
    aux: AuxState,
}

fn complex_block(prog: &mut ConeProgram, n: usize) -> Vec<CVar> {
    (0..n).map(|_| (prog.new_var(), prog.new_var())).collect()
}

/// `h^H p~` with `h` already scaled by `sqrt(P_b)`.
fn inner_expr(h: &CVec, p: &[CVar]) -> ComplexExpr {
    let mut e = ComplexExpr::default();
    for (l, &v) in p.iter().enumerate() {
        e.add_scaled_var(h[l].conj(), v);
    }
    e
}

/// Scale `s` with `a0 / s == b0 * s`, or 1 when either side is degenerate.
fn balance(a0: f64, b0: f64) -> f64 {
    let s = (a0 / b0).sqrt();
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

#[allow(clippy::too_many_arguments)]
fn push_balanced(
    prog: &mut ConeProgram,
    t: usize,
    t0: f64,
    rate: LinExpr,
    b0: f64,
    share: LinExpr,
    family: &'static str,
    user: usize,
) {
    let s = balance(t0, b0);
    prog.rotated(&LinExpr::term(t, 1.0 / s), &rate.scaled(s), &[share], family, Some(user));
}

/// Builds the cone program around `prev` with auxiliaries `aux` (which must
/// be the closed-form update at `prev` for the previous point to stay
/// feasible).
pub fn assemble_subproblem(
    scenario: &Scenario,
    model: &LinkModel,
    aux: &AuxState,
    prev: &TransmitState,
) -> Result<SubproblemSpec> {
    let cfg = &scenario.cfg;
    let users = scenario.users();
    let (n_tx, n_s) = (cfg.ant_user_tx, cfg.streams);
    let n_bt = cfg.ant_bs_tx;
    let p_user = cfg.p_user_w();
    let p_bs = cfg.p_bs_w();
    let sqrt_p_user = vec![p_user.sqrt(); users];
    let sqrt_p_bs = p_bs.sqrt();
    let f_scale = cfg.f_bs_cyc_s;
    let bw = cfg.bandwidth_hz;
    let full = model.full_offload;

    if aux.y.len() != model.downlink.caps.len() || aux.big_y.len() != users {
        return Err(Error::Assembly("auxiliary state does not match the link model".into()));
    }

    let mut prog = ConeProgram::default();

    // Precoder variables.
    let mut w_vars: Vec<[Option<Vec<CVar>>; 2]> = vec![[None, None]; users];
    for s in model.uplink.streams() {
        w_vars[s.user][s.split] = Some(complex_block(&mut prog, n_tx * n_s));
    }
    let p_common = model.downlink.has_common.then(|| complex_block(&mut prog, n_bt));
    let p_private: Vec<Vec<CVar>> = (0..users).map(|_| complex_block(&mut prog, n_bt)).collect();

    let f = prog.new_vars(users).collect::<Vec<_>>();
    let beta = (!full).then(|| prog.new_vars(users).collect::<Vec<_>>());
    let t_u = prog.new_var();
    let t_p = prog.new_var();
    let t_d = prog.new_var();
    let mut r_up: Vec<[Option<usize>; 2]> = vec![[None, None]; users];
    for s in model.uplink.streams() {
        r_up[s.user][s.split] = Some(prog.new_var());
    }
    let r_common: Vec<Option<usize>> =
        (0..users).map(|_| model.downlink.has_common.then(|| prog.new_var())).collect();
    let r_private: Vec<usize> = prog.new_vars(users).collect();
    let u_cap: Vec<usize> = prog.new_vars(model.downlink.caps.len()).collect();

    prog.objective = LinExpr::var(t_u).plus(&LinExpr::var(t_p)).plus(&LinExpr::var(t_d));

    // Bounds.
    for v in [t_u, t_p, t_d] {
        prog.geq(LinExpr::var(v), &LinExpr::constant(0.0), family::NONNEGATIVE, None);
    }
    for k in 0..users {
        prog.geq(LinExpr::var(f[k]), &LinExpr::constant(0.0), family::NONNEGATIVE, Some(k));
        for r in r_up[k].iter().flatten() {
            prog.geq(LinExpr::var(*r), &LinExpr::constant(0.0), family::NONNEGATIVE, Some(k));
        }
        if let Some(r) = r_common[k] {
            prog.geq(LinExpr::var(r), &LinExpr::constant(0.0), family::NONNEGATIVE, Some(k));
        }
        prog.geq(LinExpr::var(r_private[k]), &LinExpr::constant(0.0), family::NONNEGATIVE, Some(k));
        if let Some(beta) = &beta {
            prog.push(
                crate::conic::Cone::Nonneg,
                vec![LinExpr::var(beta[k]), LinExpr::constant(BETA_MAX).minus(&LinExpr::var(beta[k]))],
                family::BETA_RANGE,
                Some(k),
            );
        }
    }

    // The offloaded share as the `z` of a rotated cone: beta, or 1 for full offload.
    let share = |k: usize| -> LinExpr {
        match &beta {
            Some(b) => LinExpr::var(b[k]),
            None => LinExpr::constant(1.0),
        }
    };

    // Stage-time cones: share^2 <= T * scale * rate. Each cone is balanced
    // at the previous iterate (a/s, b*s leaves a*b unchanged), which keeps
    // the interior-point iterates away from badly scaled boundaries.
    let prev_report = crate::ao::evaluate(prev, scenario, model)?;
    let prev_times = prev_report.times;
    for k in 0..users {
        let l = scenario.task_bits[k];
        let mut up_rate = LinExpr::default();
        for r in r_up[k].iter().flatten() {
            up_rate.add_term(*r, bw / l);
        }
        let b0 = bw / l * (prev_report.ru[k][0] + prev_report.ru[k][1]);
        push_balanced(&mut prog, t_u, prev_times.t_u, up_rate, b0, share(k), family::OFFLOAD_DELAY, k);

        let c_cpu = f_scale / (scenario.omega[k] * l);
        let b0 = c_cpu * prev.compute.f[k] / f_scale;
        push_balanced(&mut prog, t_p, prev_times.t_p, LinExpr::term(f[k], c_cpu), b0, share(k), family::SERVER_TIME, k);

        let mut fb_rate = LinExpr::default();
        let scale = bw / (cfg.epsilon_compress * l);
        if let Some(r) = r_common[k] {
            fb_rate.add_term(r, scale);
        }
        fb_rate.add_term(r_private[k], scale);
        let b0 = scale * (prev_report.rd_c_alloc[k] + prev_report.rd_p[k]);
        push_balanced(&mut prog, t_d, prev_times.t_d, fb_rate, b0, share(k), family::FEEDBACK_DELAY, k);
    }

    // Local time, linearized at the previous split.
    let f_tilde = prev.compute.f_tilde.clone();
    let beta_prev = prev.compute.beta.clone();
    if let Some(beta) = &beta {
        let terms = local_time_constraint_terms(&beta_prev, &f_tilde, &scenario.task_bits, &scenario.omega);
        for (k, t) in terms.iter().enumerate() {
            let lhs = LinExpr::term(beta[k], t.slope).offset(t.intercept);
            prog.geq(LinExpr::var(t_p), &lhs, family::LOCAL_TIME, Some(k));
        }
    }

    // Downlink surrogate caps.
    let h_scaled: Vec<CVec> = scenario.h_down.iter().map(|h| h * c(sqrt_p_bs, 0.0)).collect();
    let stream_vars = |s: DlStream| -> &[CVar] {
        match s {
            DlStream::Common => p_common.as_deref().expect("common stream without variables"),
            DlStream::Private(k) => &p_private[k],
        }
    };
    let mut sinr_scale = Vec::with_capacity(model.downlink.caps.len());
    for (ci, cap) in model.downlink.caps.iter().enumerate() {
        let y = aux.y[ci];
        let sigma = downlink_surrogate_sinr(y, &prev.downlink, &scenario.h_down, cap).max(1.0);
        sinr_scale.push(sigma);
        let h = &h_scaled[cap.decoder];
        let sig = inner_expr(h, stream_vars(cap.signal));
        let y2 = y.norm_sqr();
        // v = 2 Re(y* s) - |y|^2 - sigma u >= |y|^2 sum |s_j|^2
        let mut v = LinExpr::default();
        v.add_expr(&sig.re, 2.0 * y.re).add_expr(&sig.im, 2.0 * y.im);
        v.add_term(u_cap[ci], -sigma);
        v.constant -= y2;
        let ya = y2.sqrt();
        let mut z = Vec::with_capacity(2 * cap.interferers.len());
        for s in &cap.interferers {
            let e = inner_expr(h, stream_vars(*s));
            z.push(e.re.scaled(ya));
            z.push(e.im.scaled(ya));
        }
        let (fam_sur, fam_log) = match cap.signal {
            DlStream::Common => (family::COMMON_SURROGATE, family::COMMON_LOG),
            DlStream::Private(_) => (family::PRIVATE_SURROGATE, family::PRIVATE_LOG),
        };
        prog.rotated(&v, &LinExpr::constant(1.0), &z, fam_sur, Some(cap.decoder));

        // ln2 * sum(rates) - ln(sigma) <= ln(u + 1/sigma)
        let mut a = LinExpr::constant(-sigma.ln());
        for r in &cap.rates {
            let var = match *r {
                DlRate::CommonShare(k) => r_common[k].expect("common share without variable"),
                DlRate::Private(k) => r_private[k],
            };
            a.add_term(var, LN2);
        }
        prog.log_epigraph(a, LinExpr::var(u_cap[ci]).offset(1.0 / sigma), fam_log, Some(cap.decoder));
    }
    // Users without any cap on their private stream get no private rate.
    for k in 0..users {
        let capped = model
            .downlink
            .caps
            .iter()
            .any(|cap| cap.rates.contains(&DlRate::Private(k)));
        if !capped {
            prog.geq(LinExpr::constant(0.0), &LinExpr::var(r_private[k]), family::NONNEGATIVE, Some(k));
        }
    }

    // Uplink surrogate caps, expanded around the previous precoders W0.
    // With D_j = W_j - W0_j the cap reads
    // ln2 (R0 - R) + 2 Re sum_j <D_j, C_j> >= sum_j ||D_j^H B_j||^2,
    // C_j = [j = s] G - B_j B_j^H W0_j, R0 the surrogate (= rate) at W0.
    // The absolute form carries terms of the order of the SINR that cancel
    // down to the rate, which stalls the solver for users close to the BS.
    let h_up = &scenario.h_up;
    let mut surrogate_up = Vec::new();
    for s in model.uplink.streams() {
        let sm = UplinkSurrogateModel::build(&aux.big_y[s.user][s.split], &aux.phi[s.user][s.split], h_up, &model.uplink, s)?;
        let mut v = LinExpr::constant(LN2 * sm.eval(&prev.uplink));
        v.add_term(r_up[s.user][s.split].expect("active stream rate"), -LN2);
        let mut z = Vec::new();
        for (j, b) in &sm.quadratic {
            let wj = w_vars[j.user][j.split]
                .as_ref()
                .ok_or_else(|| Error::Assembly(format!("interferer {j:?} is inactive")))?;
            let w0 = prev.uplink.get(*j);
            let mut cj = -(b * b.adjoint() * w0);
            if *j == s {
                cj += &sm.linear;
            }
            let sp = sqrt_p_user[j.user];
            for row in 0..n_tx {
                for col in 0..n_s {
                    let (re, im) = wj[row * n_s + col];
                    let g = cj[(row, col)] * sp;
                    v.add_term(re, 2.0 * g.re).add_term(im, 2.0 * g.im);
                    v.constant -= 2.0 * (w0[(row, col)].conj() * cj[(row, col)]).re;
                }
            }
            // (D~_j^H B)_{ab} = sum_l conj(W~_{la}) B_{lb} - (W0_j^H B_unscaled)_{ab}
            let bs = b * c(sp, 0.0);
            let offset = w0.adjoint() * b;
            for a_col in 0..n_s {
                for b_col in 0..b.ncols() {
                    let mut e = ComplexExpr::default();
                    for l in 0..n_tx {
                        e.add_conj_var_scaled(wj[l * n_s + a_col], bs[(l, b_col)]);
                    }
                    e.re.constant -= offset[(a_col, b_col)].re;
                    e.im.constant -= offset[(a_col, b_col)].im;
                    z.push(e.re);
                    z.push(e.im);
                }
            }
        }
        prog.rotated(&v, &LinExpr::constant(1.0), &z, family::UPLINK_SURROGATE[s.split], Some(s.user));
        surrogate_up.push(sm);
    }

    // Power budgets.
    for k in 0..users {
        let mut z = Vec::new();
        for wv in w_vars[k].iter().flatten() {
            for &(re, im) in wv {
                z.push(LinExpr::var(re));
                z.push(LinExpr::var(im));
            }
        }
        prog.norm_leq(LinExpr::constant(1.0), z, family::USER_POWER, Some(k));
    }
    let mut z = Vec::new();
    for v in p_common.iter().flatten().chain(p_private.iter().flatten()) {
        z.push(LinExpr::var(v.0));
        z.push(LinExpr::var(v.1));
    }
    prog.norm_leq(LinExpr::constant(1.0), z, family::BS_POWER, None);

    // Server CPU budget.
    let mut sum_f = LinExpr::default();
    for &v in &f {
        sum_f.add_term(v, 1.0);
    }
    prog.geq(LinExpr::constant(1.0), &sum_f, family::CPU_BUDGET, None);

    // Server energy.
    let f_prev_scaled: Vec<f64> = prev.compute.f.iter().map(|v| v / f_scale).collect();
    let mut energy_coeff = Vec::new();
    let mut energy_frac = Vec::new();
    if let Some(beta) = &beta {
        let terms = energy_constraint_terms(&f_tilde, &prev.compute.f, cfg.kappa);
        let mut budget = LinExpr::constant(1.0);
        for k in 0..users {
            let coeff = terms[k].coeff * f_scale * f_scale / p_bs;
            energy_coeff.push(coeff);
            let e1 = prog.new_var();
            let e2 = prog.new_var();
            energy_frac.push((e1, e2));
            // f'^2 <= 2 e1 (1 - beta), f'^2 <= 2 e2 (1 + beta)
            let one_minus = LinExpr::constant(1.0).minus(&LinExpr::var(beta[k]));
            let one_plus = LinExpr::constant(1.0).plus(&LinExpr::var(beta[k]));
            prog.rotated(&LinExpr::term(e1, 2.0), &one_minus, &[LinExpr::var(f[k])], family::ENERGY_FRACTION_MINUS, Some(k));
            prog.rotated(&LinExpr::term(e2, 2.0), &one_plus, &[LinExpr::var(f[k])], family::ENERGY_FRACTION_PLUS, Some(k));
            // -coeff f'_prev (2 f' - f'_prev) + coeff (e1 + e2)
            let fp = f_prev_scaled[k];
            let mut term = LinExpr::term(f[k], -2.0 * coeff * fp).offset(coeff * fp * fp);
            term.add_term(e1, coeff).add_term(e2, coeff);
            budget = budget.minus(&term);
        }
        prog.push(crate::conic::Cone::Nonneg, vec![budget], family::ENERGY_BUDGET, None);
    } else {
        // sum_k kappa omega L_k f_k^2 <= P_b T^p
        let z: Vec<LinExpr> = (0..users)
            .map(|k| {
                let a = cfg.kappa * scenario.omega[k] * scenario.task_bits[k] * f_scale * f_scale / p_bs;
                LinExpr::term(f[k], a.sqrt())
            })
            .collect();
        let s = balance(prev_times.t_p, 1.0);
        prog.rotated(&LinExpr::term(t_p, 1.0 / s), &LinExpr::constant(s), &z, family::ENERGY_BUDGET, None);
    }

    Ok(SubproblemSpec {
        program: prog,
        vars: VarMap {
            w: w_vars,
            p_common,
            p_private,
            f,
            beta,
            t_u,
            t_p,
            t_d,
            r_up,
            r_common,
            r_private,
            u_cap,
            sinr_scale,
            energy_frac,
        },
        model: model.clone(),
        sqrt_p_user,
        sqrt_p_bs,
        f_scale,
        f_tilde,
        energy_coeff,
        beta_prev,
        f_prev_scaled,
        surrogate_up,
        aux: aux.clone(),
    })
}

/// Result of one subproblem solve.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub state: TransmitState,
    /// Optimal value of the subproblem (surrogate-based delays).
    pub objective: f64,
    /// Uplink rate variables `R^u_{k,m}` at the optimum.
    pub uplink_rate_vars: Vec<[f64; 2]>,
    /// Private / message rate variables at the optimum.
    pub private_rate_vars: Vec<f64>,
    pub solver_iterations: u32,
}

impl SubproblemSpec {
    pub fn aux(&self) -> &AuxState {
        &self.aux
    }

    pub fn uplink_surrogates(&self) -> &[UplinkSurrogateModel] {
        &self.surrogate_up
    }

    /// The transmit state as a point of this program, with every epigraph
    /// and rate variable set to its tightest feasible value.
    pub fn encode(&self, state: &TransmitState, scenario: &Scenario) -> Result<Vec<f64>> {
        let cfg = &scenario.cfg;
        let users = scenario.users();
        let mut x = vec![0.0; self.program.n_vars];
        let v = &self.vars;
        for k in 0..users {
            for m in 0..2 {
                if let Some(wv) = &v.w[k][m] {
                    let w = &state.uplink.w[k][m];
                    for (idx, &(re, im)) in wv.iter().enumerate() {
                        let z = w[(idx / cfg.streams, idx % cfg.streams)] / self.sqrt_p_user[k];
                        x[re] = z.re;
                        x[im] = z.im;
                    }
                }
            }
        }
        let put = |x: &mut Vec<f64>, vars: &[CVar], p: &CVec, scale: f64| {
            for (l, &(re, im)) in vars.iter().enumerate() {
                x[re] = p[l].re / scale;
                x[im] = p[l].im / scale;
            }
        };
        if let Some(pc) = &v.p_common {
            put(&mut x, pc, &state.downlink.common, self.sqrt_p_bs);
        }
        for k in 0..users {
            put(&mut x, &v.p_private[k], &state.downlink.private[k], self.sqrt_p_bs);
        }
        for k in 0..users {
            x[v.f[k]] = state.compute.f[k] / self.f_scale;
        }
        if let Some(beta) = &v.beta {
            for k in 0..users {
                x[beta[k]] = state.compute.beta[k];
            }
        }

        let ru = uplink_rates(&state.uplink, &scenario.h_up, &self.model.uplink)?;
        for k in 0..users {
            for m in 0..2 {
                if let Some(r) = v.r_up[k][m] {
                    x[r] = ru[k][m];
                }
            }
        }
        let limits = downlink_limits(&state.downlink, &scenario.h_down, &self.model.downlink);
        let alloc = crate::ao::clip_common_alloc(&state.common_alloc, limits.common);
        for k in 0..users {
            if let Some(r) = v.r_common[k] {
                x[r] = alloc[k];
            }
            x[v.r_private[k]] = limits.private[k];
        }
        for (ci, cap) in self.model.downlink.caps.iter().enumerate() {
            let (s, i) = cap_powers(&state.downlink, &scenario.h_down, cap);
            x[v.u_cap[ci]] = s / i / v.sinr_scale[ci];
        }

        // Tightest stage times under the program's own forms.
        let bw = cfg.bandwidth_hz;
        let ratio = |num: f64, den: f64| if num <= 0.0 { 0.0 } else { num / den };
        let (mut tu, mut tp, mut td) = (0.0f64, 0.0f64, 0.0f64);
        let local_terms = local_time_constraint_terms(&self.beta_prev, &self.f_tilde, &scenario.task_bits, &scenario.omega);
        for k in 0..users {
            let l = scenario.task_bits[k];
            let a = if v.beta.is_some() { state.compute.beta[k].powi(2) } else { 1.0 };
            tu = tu.max(ratio(a * l, bw * (ru[k][0] + ru[k][1])));
            tp = tp.max(ratio(scenario.omega[k] * a * l, state.compute.f[k]));
            if v.beta.is_some() {
                tp = tp.max(local_terms[k].eval(state.compute.beta[k]));
            }
            td = td.max(ratio(cfg.epsilon_compress * a * l, bw * (alloc[k] + limits.private[k])));
        }
        if v.beta.is_none() {
            let e: f64 = (0..users)
                .map(|k| cfg.kappa * scenario.omega[k] * scenario.task_bits[k] * state.compute.f[k].powi(2))
                .sum();
            tp = tp.max(e / cfg.p_bs_w());
        }
        x[v.t_u] = tu;
        x[v.t_p] = tp;
        x[v.t_d] = td;
        for (k, &(e1, e2)) in v.energy_frac.iter().enumerate() {
            let fs = x[v.f[k]];
            let b = state.compute.beta[k];
            x[e1] = fs * fs / (2.0 * (1.0 - b));
            x[e2] = fs * fs / (2.0 * (1.0 + b));
        }
        Ok(x)
    }

    /// Maps a solver point back to a transmit state, projecting tiny solver
    /// infeasibilities onto the power, CPU and split-variable bounds.
    pub fn decode(&self, x: &[f64], prev: &TransmitState, scenario: &Scenario) -> TransmitState {
        let cfg = &scenario.cfg;
        let users = scenario.users();
        let v = &self.vars;
        let mut uplink = crate::rates::UplinkPrecoders::zeros(users, cfg.ant_user_tx, cfg.streams);
        for k in 0..users {
            let mut norm2 = 0.0;
            for m in 0..2 {
                if let Some(wv) = &v.w[k][m] {
                    let w = CMat::from_fn(cfg.ant_user_tx, cfg.streams, |r, col| {
                        let (re, im) = wv[r * cfg.streams + col];
                        Complex64::new(x[re], x[im])
                    });
                    norm2 += crate::linalg::fro_norm_sq(&w);
                    uplink.w[k][m] = w;
                }
            }
            let shrink = if norm2 > 1.0 { 1.0 / norm2.sqrt() } else { 1.0 };
            for m in 0..2 {
                uplink.w[k][m] *= c(self.sqrt_p_user[k] * shrink, 0.0);
            }
        }
        let read = |vars: &[CVar]| CVec::from_iterator(vars.len(), vars.iter().map(|&(re, im)| Complex64::new(x[re], x[im])));
        let mut downlink = crate::rates::DownlinkPrecoders {
            common: v.p_common.as_ref().map(|pc| read(pc)).unwrap_or_else(|| CVec::zeros(cfg.ant_bs_tx)),
            private: v.p_private.iter().map(|pv| read(pv)).collect(),
        };
        let norm2 = downlink.power();
        let scale = self.sqrt_p_bs * if norm2 > 1.0 { 1.0 / norm2.sqrt() } else { 1.0 };
        downlink.common *= c(scale, 0.0);
        for p in &mut downlink.private {
            *p *= c(scale, 0.0);
        }

        let mut f: Vec<f64> = v.f.iter().map(|&i| x[i].max(0.0)).collect();
        let total: f64 = f.iter().sum();
        if total > 1.0 {
            f.iter_mut().for_each(|v| *v /= total);
        }
        f.iter_mut().for_each(|v| *v *= self.f_scale);
        let beta = match &v.beta {
            Some(b) => b
                .iter()
                .map(|&i| {
                    let b = x[i].clamp(0.0, BETA_MAX);
                    if b < 1e-9 { 0.0 } else { b }
                })
                .collect(),
            None => vec![1.0; users],
        };
        let common_alloc = v
            .r_common
            .iter()
            .map(|r| r.map(|i| x[i].max(0.0)).unwrap_or(0.0))
            .collect();
        TransmitState {
            uplink,
            downlink,
            compute: ComputeDecision { beta, f, f_tilde: prev.compute.f_tilde.clone() },
            common_alloc,
        }
    }

    /// Convexified server-energy expression (in units of `P_b`) at a state.
    pub fn energy_usage(&self, state: &TransmitState) -> Option<f64> {
        self.vars.beta.as_ref()?;
        let mut total = 0.0;
        for (k, &coeff) in self.energy_coeff.iter().enumerate() {
            let fs = state.compute.f[k] / self.f_scale;
            let fp = self.f_prev_scaled[k];
            let b = state.compute.beta[k];
            total += -coeff * fp * (2.0 * fs - fp) + coeff * fs * fs * (1.0 / (2.0 * (1.0 - b)) + 1.0 / (2.0 * (1.0 + b)));
        }
        Some(total)
    }
}

/// Solves the assembled program and decodes its optimum.
pub fn solve_subproblem(
    spec: &SubproblemSpec,
    prev: &TransmitState,
    scenario: &Scenario,
    settings: &SolverSettings,
) -> Result<SubproblemSolution> {
    let ConicSolution { x, objective, iterations, .. } = spec.program.solve(settings)?;
    let state = spec.decode(&x, prev, scenario);
    let v = &spec.vars;
    let uplink_rate_vars = v
        .r_up
        .iter()
        .map(|r| [r[0].map(|i| x[i]).unwrap_or(0.0), r[1].map(|i| x[i]).unwrap_or(0.0)])
        .collect();
    let private_rate_vars = v.r_private.iter().map(|&i| x[i]).collect();
    Ok(SubproblemSolution { state, objective, uplink_rate_vars, private_rate_vars, solver_iterations: iterations })
}
