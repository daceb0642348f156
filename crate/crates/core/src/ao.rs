//! Alternating optimization: closed-form auxiliary updates interleaved with
//! convex subproblem solves, tracking the exact (not surrogate) objective.

use serde::{Deserialize, Serialize};

use crate::compute::{local_cost, optimal_local_frequency, server_cost, ComputeDecision, BETA_MAX};
use crate::conic::SolverSettings;
use crate::error::{Error, Result};
use crate::linalg::{c, fro_norm_sq, vec_norm_sq, CMat, CVec};
use crate::rates::{
    default_decoding_order, downlink_limits, stage_times, uplink_rates, DownlinkDecoding, DownlinkPrecoders,
    RateReport, UplinkDecoding, UplinkPrecoders,
};
use crate::scenario::Scenario;
use crate::subproblem::{assemble_subproblem, solve_subproblem};
use crate::surrogate::{update_aux, AuxState};

/// Which streams exist and how they are decoded, plus the offload mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub uplink: UplinkDecoding,
    pub downlink: DownlinkDecoding,
    /// Everything is offloaded (`beta = 1`) and nothing runs locally.
    pub full_offload: bool,
}

impl LinkModel {
    /// Uplink and downlink rate splitting with partial offloading.
    pub fn rate_splitting(scenario: &Scenario) -> Self {
        LinkModel {
            uplink: UplinkDecoding::Sic(default_decoding_order(&scenario.h_up)),
            downlink: DownlinkDecoding::rate_splitting(scenario.users()),
            full_offload: false,
        }
    }

    fn splits_uplink(&self) -> bool {
        self.uplink.streams().iter().any(|s| s.split == 1)
    }
}

/// The inherent optimization variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitState {
    pub uplink: UplinkPrecoders,
    pub downlink: DownlinkPrecoders,
    pub compute: ComputeDecision,
    /// Requested common-stream shares `R^d_{k,c}` (bit/s/Hz).
    pub common_alloc: Vec<f64>,
}

/// Scales the requested common shares down so they fit under the exact cap.
pub fn clip_common_alloc(alloc: &[f64], cap: f64) -> Vec<f64> {
    let total: f64 = alloc.iter().map(|a| a.max(0.0)).sum();
    let scale = if total > cap { cap.max(0.0) / total } else { 1.0 };
    alloc.iter().map(|a| a.max(0.0) * scale).collect()
}

/// Exact rates and stage times of a state under a link model. Common
/// shares are reported as achievable, i.e. clipped to the exact cap.
pub fn evaluate(state: &TransmitState, scenario: &Scenario, model: &LinkModel) -> Result<RateReport> {
    let ru = uplink_rates(&state.uplink, &scenario.h_up, &model.uplink)?;
    let limits = downlink_limits(&state.downlink, &scenario.h_down, &model.downlink);
    let alloc = clip_common_alloc(&state.common_alloc, limits.common);
    let up: Vec<f64> = ru.iter().map(|r| r[0] + r[1]).collect();
    let fb: Vec<f64> = alloc.iter().zip(&limits.private).map(|(a, p)| a + p).collect();
    let times = stage_times(&up, &fb, &state.compute, scenario)?;
    Ok(RateReport { ru, rd_c: limits.common, rd_c_alloc: alloc, rd_p: limits.private, times })
}

/// Eigenvectors of a Hermitian matrix for its `n` largest eigenvalues.
fn dominant_eigenvectors(m: &CMat, n: usize) -> CMat {
    let eig = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    CMat::from_fn(m.nrows(), n, |r, col| eig.eigenvectors[(r, idx[col])])
}

fn unit_or_first_axis(v: &CVec) -> CVec {
    let n = vec_norm_sq(v).sqrt();
    if n > 0.0 {
        v / c(n, 0.0)
    } else {
        let mut e = CVec::zeros(v.len());
        e[0] = c(1.0, 0.0);
        e
    }
}

/// Deterministic starting point. Precoders use the full power budgets; the
/// server share is lowered from `F_b / K` when needed so that the server
/// energy budget holds at the start.
pub fn initialize(scenario: &Scenario, model: &LinkModel) -> TransmitState {
    let cfg = &scenario.cfg;
    let users = scenario.users();
    let p_user = cfg.p_user_w();
    let p_bs = cfg.p_bs_w();

    let mut uplink = UplinkPrecoders::zeros(users, cfg.ant_user_tx, cfg.streams);
    let splits = if model.splits_uplink() { 2.0 } else { 1.0 };
    let scale = (p_user / (splits * cfg.streams as f64)).sqrt();
    for k in 0..users {
        let h = &scenario.h_up[k];
        let u = dominant_eigenvectors(&(h * h.adjoint()), cfg.streams) * c(scale, 0.0);
        for s in model.uplink.streams().into_iter().filter(|s| s.user == k) {
            uplink.w[k][s.split] = u.clone();
        }
    }

    let common_share = if model.downlink.has_common { 0.1 } else { 0.0 };
    let mut downlink = DownlinkPrecoders::zeros(users, cfg.ant_bs_tx);
    let private_amp = ((1.0 - common_share) * p_bs / users as f64).sqrt();
    for k in 0..users {
        downlink.private[k] = unit_or_first_axis(&scenario.h_down[k]) * c(private_amp, 0.0);
    }
    if model.downlink.has_common {
        let stacked = CMat::from_fn(cfg.ant_bs_tx, users, |r, col| scenario.h_down[col][r]);
        let gram = &stacked * stacked.adjoint();
        let v = unit_or_first_axis(&dominant_eigenvectors(&gram, 1).column(0).into_owned());
        downlink.common = v * c((common_share * p_bs).sqrt(), 0.0);
    }

    let f_tilde = vec![optimal_local_frequency(p_user, cfg.kappa, cfg.f_user_cyc_s); users];
    let (beta, f) = if model.full_offload {
        let l_total: f64 = (0..users).map(|k| scenario.omega[k] * scenario.task_bits[k]).sum();
        let l_max = (0..users).map(|k| scenario.omega[k] * scenario.task_bits[k]).fold(0.0, f64::max);
        // kappa f^2 sum(omega L) <= P_b * max(omega L) / f
        let f_energy = (p_bs * l_max / (cfg.kappa * l_total)).cbrt();
        (vec![1.0; users], vec![(cfg.f_bs_cyc_s / users as f64).min(f_energy); users])
    } else {
        let b: f64 = 0.5;
        let rate: f64 = f_tilde.iter().map(|ft| cfg.kappa * ft).sum::<f64>() * b * b / (1.0 - b * b);
        // sum_k kappa f~ f^2 b^2 / (1 - b^2) <= P_b
        let f_energy = (p_bs / rate).sqrt();
        (vec![b; users], vec![(cfg.f_bs_cyc_s / users as f64).min(f_energy); users])
    };
    let compute = ComputeDecision { beta, f, f_tilde };

    let limits = downlink_limits(&downlink, &scenario.h_down, &model.downlink);
    let common_alloc = vec![limits.common / users as f64; users];
    TransmitState { uplink, downlink, compute, common_alloc }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: SolverSettings,
    /// Largest violation tolerated when re-encoding the previous iterate
    /// into the next subproblem.
    pub carryover_tol: f64,
}

impl AoOptions {
    pub fn from_config(scenario: &Scenario) -> Self {
        AoOptions {
            tol: scenario.cfg.tol_ao,
            max_iter: scenario.cfg.max_iter,
            solver: SolverSettings::default(),
            carryover_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
    Infeasible,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max-iter",
            Status::Infeasible => "infeasible",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub state: TransmitState,
    pub report: RateReport,
    /// Exact objective at the start point and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub status: Status,
    pub model: LinkModel,
}

impl Solution {
    pub fn objective(&self) -> f64 {
        self.report.total_time()
    }
}

/// Runs the AO loop from the default initializer.
pub fn ao_minimize(scenario: &Scenario, model: &LinkModel, opts: &AoOptions) -> Result<Solution> {
    ao_minimize_from(scenario, model, initialize(scenario, model), opts)
}

/// Runs the AO loop from a given feasible start point.
pub fn ao_minimize_from(
    scenario: &Scenario,
    model: &LinkModel,
    start: TransmitState,
    opts: &AoOptions,
) -> Result<Solution> {
    let mut state = start;
    let mut report = evaluate(&state, scenario, model)?;
    let mut trace = vec![report.total_time()];
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let aux = aux_at(&state, scenario, model)?;
        let spec = assemble_subproblem(scenario, model, &aux, &state)?;
        let x0 = spec.encode(&state, scenario)?;
        let (viol, family, user) = spec.program.max_violation(&x0);
        if viol > opts.carryover_tol * (1.0 + x0.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            return Err(Error::Assembly(format!(
                "previous iterate violates `{family}` (user {user:?}) by {viol:.3e}; auxiliaries are stale"
            )));
        }
        let sol = solve_subproblem(&spec, &state, scenario, &opts.solver).map_err(|e| {
            if iterations == 0 {
                e
            } else {
                Error::Internal(format!("subproblem failed after a successful iteration: {e}"))
            }
        })?;
        iterations += 1;
        let next = evaluate(&sol.state, scenario, model)?;
        let prev_obj = report.total_time();
        state = sol.state;
        report = next;
        trace.push(report.total_time());
        let change = (prev_obj - report.total_time()).abs() / prev_obj.abs().max(f64::MIN_POSITIVE);
        if change <= opts.tol {
            status = Status::Converged;
            break;
        }
    }
    Ok(Solution { state, report, trace, iterations, status, model: model.clone() })
}

/// Closed-form auxiliaries at a state.
pub fn aux_at(state: &TransmitState, scenario: &Scenario, model: &LinkModel) -> Result<AuxState> {
    update_aux(
        &state.uplink.clone(),
        &scenario.h_up,
        &model.uplink,
        &state.downlink,
        &scenario.h_down,
        &model.downlink,
    )
}

/// Largest violations of the original problem constraints by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    pub user_power: f64,
    pub bs_power: f64,
    pub cpu_cap: f64,
    pub local_cpu_cap: f64,
    pub local_energy: f64,
    pub server_energy: f64,
    pub beta_range: f64,
    pub common_rate: f64,
    pub inactive_streams: f64,
}

impl ConstraintAudit {
    pub fn worst(&self) -> (f64, &'static str) {
        [
            (self.user_power, "user_power"),
            (self.bs_power, "bs_power"),
            (self.cpu_cap, "cpu_cap"),
            (self.local_cpu_cap, "local_cpu_cap"),
            (self.local_energy, "local_energy"),
            (self.server_energy, "server_energy"),
            (self.beta_range, "beta_range"),
            (self.common_rate, "common_rate"),
            (self.inactive_streams, "inactive_streams"),
        ]
        .into_iter()
        .fold((0.0, "none"), |best, cur| if cur.0 > best.0 { cur } else { best })
    }
}

/// Checks a solution against the original (non-convexified) constraints.
/// Power and energy violations are relative to their budgets.
pub fn audit(solution: &Solution, scenario: &Scenario) -> Result<ConstraintAudit> {
    let cfg = &scenario.cfg;
    let st = &solution.state;
    let model = &solution.model;
    let users = scenario.users();
    let p_user = cfg.p_user_w();
    let p_bs = cfg.p_bs_w();
    let pos = |v: f64| v.max(0.0);

    let user_power = (0..users).map(|k| pos(st.uplink.power(k) / p_user - 1.0)).fold(0.0, f64::max);
    let bs_power = pos(st.downlink.power() / p_bs - 1.0);
    let f_sum: f64 = st.compute.f.iter().sum();
    let cpu_cap = pos(f_sum / cfg.f_bs_cyc_s - 1.0).max(st.compute.f.iter().map(|f| pos(-f)).fold(0.0, f64::max));
    let local_cpu_cap = st
        .compute
        .f_tilde
        .iter()
        .map(|f| pos(f / cfg.f_user_cyc_s - 1.0))
        .fold(0.0, f64::max);

    let t_p = solution.report.times.t_p;
    let mut local_energy: f64 = 0.0;
    let mut server_energy_j = 0.0;
    for k in 0..users {
        let (b, l, w) = (st.compute.beta[k], scenario.task_bits[k], scenario.omega[k]);
        let (tl, el) = local_cost(b, l, w, st.compute.f_tilde[k], cfg.kappa)?;
        if tl > 0.0 {
            local_energy = local_energy.max(pos(el / (p_user * t_p) - 1.0));
        }
        let (_, es) = server_cost(b, l, w, st.compute.f[k], cfg.kappa)?;
        server_energy_j += es;
    }
    let server_energy = if server_energy_j > 0.0 { pos(server_energy_j / (p_bs * t_p) - 1.0) } else { 0.0 };

    let beta_max = if model.full_offload { 1.0 } else { BETA_MAX };
    let beta_range = st
        .compute
        .beta
        .iter()
        .map(|b| pos(-b).max(pos(b - beta_max)))
        .fold(0.0, f64::max);
    let alloc_sum: f64 = solution.report.rd_c_alloc.iter().sum();
    let common_rate = solution
        .report
        .rd_c_alloc
        .iter()
        .map(|a| pos(-a))
        .fold(pos(alloc_sum - solution.report.rd_c - 1e-12), f64::max);
    let mut inactive_streams: f64 = 0.0;
    for k in 0..users {
        for m in 0..2 {
            if !model.uplink.is_active(crate::rates::StreamId::new(k, m)) {
                inactive_streams = inactive_streams.max(fro_norm_sq(&st.uplink.w[k][m]));
            }
        }
    }
    if !model.downlink.has_common {
        inactive_streams = inactive_streams.max(vec_norm_sq(&st.downlink.common));
    }
    Ok(ConstraintAudit {
        user_power,
        bs_power,
        cpu_cap,
        local_cpu_cap,
        local_energy,
        server_energy,
        beta_range,
        common_rate,
        inactive_streams,
    })
}
