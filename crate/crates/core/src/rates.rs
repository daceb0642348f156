//! Exact rate evaluation for the uplink (SIC over split streams, log-det
//! rates) and the downlink (one common stream plus private streams), and the
//! stage times those rates imply.
//!
//! Rates are spectral efficiencies in bit/s/Hz; they are multiplied by the
//! bandwidth only when turned into delays.

use serde::{Deserialize, Serialize};

use crate::compute::{local_cost, server_cost, ComputeDecision};
use crate::error::{Error, Result};
use crate::linalg::{fro_norm_sq, identity, inner, log2_det_pd, solve_pd, vec_norm_sq, CMat, CVec};
use crate::scenario::Scenario;

/// Uplink stream `(user, split)`; `split` is 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamId {
    pub user: usize,
    pub split: usize,
}

impl StreamId {
    pub fn new(user: usize, split: usize) -> Self {
        StreamId { user, split }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UplinkPrecoders {
    /// `w[k][m]` is `A_ut x A_u`.
    pub w: Vec<[CMat; 2]>,
}

impl UplinkPrecoders {
    pub fn zeros(users: usize, ant_tx: usize, streams: usize) -> Self {
        let z = CMat::zeros(ant_tx, streams);
        UplinkPrecoders { w: vec![[z.clone(), z]; users] }
    }

    pub fn get(&self, s: StreamId) -> &CMat {
        &self.w[s.user][s.split]
    }

    pub fn power(&self, user: usize) -> f64 {
        self.w[user].iter().map(fro_norm_sq).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkPrecoders {
    pub common: CVec,
    pub private: Vec<CVec>,
}

impl DownlinkPrecoders {
    pub fn zeros(users: usize, ant_tx: usize) -> Self {
        DownlinkPrecoders { common: CVec::zeros(ant_tx), private: vec![CVec::zeros(ant_tx); users] }
    }

    pub fn stream(&self, s: DlStream) -> &CVec {
        match s {
            DlStream::Common => &self.common,
            DlStream::Private(k) => &self.private[k],
        }
    }

    pub fn power(&self) -> f64 {
        vec_norm_sq(&self.common) + self.private.iter().map(vec_norm_sq).sum::<f64>()
    }
}

/// SIC decoding order at the BS; position in the list is the decoding rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOrder(Vec<StreamId>);

impl DecodingOrder {
    /// Any duplicate-free list of streams.
    pub fn new(order: Vec<StreamId>, users: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &order {
            if s.user >= users || s.split > 1 {
                return Err(Error::Domain(format!("stream {s:?} out of range")));
            }
            if !seen.insert(*s) {
                return Err(Error::Domain(format!("stream {s:?} appears twice")));
            }
        }
        Ok(DecodingOrder(order))
    }

    /// A permutation of all `2K` split streams.
    pub fn full(order: Vec<StreamId>, users: usize) -> Result<Self> {
        if order.len() != 2 * users {
            return Err(Error::Domain(format!(
                "full decoding order needs {} streams, got {}",
                2 * users,
                order.len()
            )));
        }
        Self::new(order, users)
    }

    pub fn streams(&self) -> &[StreamId] {
        &self.0
    }

    pub fn position(&self, s: StreamId) -> Option<usize> {
        self.0.iter().position(|x| *x == s)
    }

    /// Streams decoded after `s`, i.e. still present as interference.
    pub fn decoded_after(&self, s: StreamId) -> Option<Vec<StreamId>> {
        self.position(s).map(|p| self.0[p + 1..].to_vec())
    }
}

/// User indices sorted by descending norm, ties broken by index.
pub fn order_by_norm(norms: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    idx.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    idx
}

/// First splits of all users by descending `||H_k||_F`, then the second
/// splits in the same user order.
pub fn default_decoding_order(h_up: &[CMat]) -> DecodingOrder {
    let norms: Vec<f64> = h_up.iter().map(fro_norm_sq).collect();
    let users = order_by_norm(&norms);
    let order = (0..2)
        .flat_map(|m| users.iter().map(move |&k| StreamId::new(k, m)))
        .collect();
    DecodingOrder(order)
}

/// How the BS separates the uplink streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UplinkDecoding {
    /// Successive cancellation over the listed streams; unlisted streams are
    /// inactive (their precoders stay zero).
    Sic(DecodingOrder),
    /// One stream per user, all other users' streams treated as noise.
    TreatAsNoise { users: usize },
}

impl UplinkDecoding {
    pub fn streams(&self) -> Vec<StreamId> {
        match self {
            UplinkDecoding::Sic(order) => order.streams().to_vec(),
            UplinkDecoding::TreatAsNoise { users } => (0..*users).map(|k| StreamId::new(k, 0)).collect(),
        }
    }

    pub fn is_active(&self, s: StreamId) -> bool {
        match self {
            UplinkDecoding::Sic(order) => order.position(s).is_some(),
            UplinkDecoding::TreatAsNoise { users } => s.split == 0 && s.user < *users,
        }
    }

    /// Streams that interfere with the decoding of `s`.
    pub fn interferers(&self, s: StreamId) -> Vec<StreamId> {
        match self {
            UplinkDecoding::Sic(order) => order.decoded_after(s).unwrap_or_default(),
            UplinkDecoding::TreatAsNoise { users } => {
                (0..*users).filter(|&i| i != s.user).map(|i| StreamId::new(i, 0)).collect()
            }
        }
    }
}

fn check_uplink_dims(w: &UplinkPrecoders, h: &[CMat]) -> Result<()> {
    if w.w.len() != h.len() {
        return Err(Error::Dimension(format!("{} precoder sets for {} channels", w.w.len(), h.len())));
    }
    for (k, (wk, hk)) in w.w.iter().zip(h).enumerate() {
        for wkm in wk {
            if wkm.nrows() != hk.nrows() {
                return Err(Error::Dimension(format!(
                    "user {k}: precoder has {} rows, channel {}",
                    wkm.nrows(),
                    hk.nrows()
                )));
            }
        }
    }
    Ok(())
}

/// `H^H W W^H H` for one stream.
pub fn received_covariance(w: &CMat, h: &CMat) -> CMat {
    let hw = h.adjoint() * w;
    &hw * hw.adjoint()
}

/// `Omega = I + sum over interferers of H_i^H W_ij W_ij^H H_i`.
pub fn interference_covariance(w: &UplinkPrecoders, h: &[CMat], interferers: &[StreamId]) -> CMat {
    let n = h[0].ncols();
    let mut omega = identity(n);
    for s in interferers {
        omega += received_covariance(w.get(*s), &h[s.user]);
    }
    omega
}

/// Interference-plus-noise covariance seen while decoding `(user, split)`
/// under a SIC order.
pub fn uplink_interference(
    w: &UplinkPrecoders,
    h: &[CMat],
    order: &DecodingOrder,
    user: usize,
    split: usize,
) -> Result<CMat> {
    check_uplink_dims(w, h)?;
    let s = StreamId::new(user, split);
    let later = order
        .decoded_after(s)
        .ok_or_else(|| Error::Domain(format!("stream {s:?} not in decoding order")))?;
    Ok(interference_covariance(w, h, &later))
}

/// `log2 det(I + W^H H Omega^{-1} H^H W)` given the interference covariance.
pub fn stream_rate_given_omega(w: &CMat, h: &CMat, omega: &CMat) -> Result<f64> {
    let hw = h.adjoint() * w;
    let gamma = hw.adjoint() * solve_pd(omega, &hw)?;
    let r = log2_det_pd(&(identity(w.ncols()) + gamma))?;
    Ok(r.max(0.0))
}

pub fn uplink_stream_rate_with(
    w: &UplinkPrecoders,
    h: &[CMat],
    decoding: &UplinkDecoding,
    s: StreamId,
) -> Result<f64> {
    check_uplink_dims(w, h)?;
    let omega = interference_covariance(w, h, &decoding.interferers(s));
    stream_rate_given_omega(w.get(s), &h[s.user], &omega)
}

pub fn uplink_stream_rate(
    w: &UplinkPrecoders,
    h: &[CMat],
    order: &DecodingOrder,
    user: usize,
    split: usize,
) -> Result<f64> {
    let omega = uplink_interference(w, h, order, user, split)?;
    stream_rate_given_omega(&w.w[user][split], &h[user], &omega)
}

/// Per-user, per-split uplink rates; inactive streams report 0.
pub fn uplink_rates(w: &UplinkPrecoders, h: &[CMat], decoding: &UplinkDecoding) -> Result<Vec<[f64; 2]>> {
    let mut out = vec![[0.0; 2]; h.len()];
    for s in decoding.streams() {
        out[s.user][s.split] = uplink_stream_rate_with(w, h, decoding, s)?;
    }
    Ok(out)
}

/// Downlink streams: the shared common stream or user `k`'s private stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DlStream {
    Common,
    Private(usize),
}

/// Rate variables that a downlink decoding step must support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DlRate {
    /// `R^d_{k,c}`, user `k`'s share of the common stream.
    CommonShare(usize),
    /// `R^d_{k,p}`, user `k`'s own stream.
    Private(usize),
}

/// One decoding step at one receiver: the summed `rates` must not exceed
/// `log2(1 + |h_decoder^H p_signal|^2 / (sum_interferers |h^H p|^2 + 1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkCap {
    pub decoder: usize,
    pub signal: DlStream,
    pub interferers: Vec<DlStream>,
    pub rates: Vec<DlRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkDecoding {
    pub users: usize,
    pub has_common: bool,
    pub caps: Vec<DownlinkCap>,
}

impl DownlinkDecoding {
    /// One common stream decoded first by every user, then each private
    /// stream with the other privates as noise.
    pub fn rate_splitting(users: usize) -> Self {
        let all_private: Vec<DlStream> = (0..users).map(DlStream::Private).collect();
        let shares: Vec<DlRate> = (0..users).map(DlRate::CommonShare).collect();
        let mut caps = Vec::with_capacity(2 * users);
        for k in 0..users {
            caps.push(DownlinkCap {
                decoder: k,
                signal: DlStream::Common,
                interferers: all_private.clone(),
                rates: shares.clone(),
            });
        }
        for k in 0..users {
            caps.push(private_cap(k, users));
        }
        DownlinkDecoding { users, has_common: true, caps }
    }

    /// Private streams only, everything else treated as noise.
    pub fn private_only(users: usize) -> Self {
        let caps = (0..users).map(|k| private_cap(k, users)).collect();
        DownlinkDecoding { users, has_common: false, caps }
    }

    /// Superposition coding; `order[0]` is the strongest user. The user at
    /// position `i` decodes the messages of positions `j > i` before its own,
    /// so message `j` is capped at every decoder `i <= j` with positions
    /// `< j` as interference.
    pub fn superposition(order: &[usize]) -> Self {
        let users = order.len();
        let mut caps = Vec::new();
        for (j, &msg) in order.iter().enumerate() {
            let interferers: Vec<DlStream> = order[..j].iter().map(|&l| DlStream::Private(l)).collect();
            for &decoder in &order[..=j] {
                caps.push(DownlinkCap {
                    decoder,
                    signal: DlStream::Private(msg),
                    interferers: interferers.clone(),
                    rates: vec![DlRate::Private(msg)],
                });
            }
        }
        DownlinkDecoding { users, has_common: false, caps }
    }
}

fn private_cap(k: usize, users: usize) -> DownlinkCap {
    DownlinkCap {
        decoder: k,
        signal: DlStream::Private(k),
        interferers: (0..users).filter(|&j| j != k).map(DlStream::Private).collect(),
        rates: vec![DlRate::Private(k)],
    }
}

/// Received signal power and interference-plus-noise power for one cap.
pub fn cap_powers(p: &DownlinkPrecoders, h: &[CVec], cap: &DownlinkCap) -> (f64, f64) {
    let hk = &h[cap.decoder];
    let signal = inner(hk, p.stream(cap.signal)).norm_sqr();
    let interference = 1.0
        + cap
            .interferers
            .iter()
            .map(|s| inner(hk, p.stream(*s)).norm_sqr())
            .sum::<f64>();
    (signal, interference)
}

pub fn cap_rate(p: &DownlinkPrecoders, h: &[CVec], cap: &DownlinkCap) -> f64 {
    let (s, i) = cap_powers(p, h, cap);
    (s / i).ln_1p() / crate::linalg::LN2
}

/// Rate limits implied by the downlink precoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkLimits {
    /// Largest total common rate every user can decode; 0 without a common stream.
    pub common: f64,
    /// Largest rate of each user's own stream.
    pub private: Vec<f64>,
}

pub fn downlink_limits(p: &DownlinkPrecoders, h: &[CVec], decoding: &DownlinkDecoding) -> DownlinkLimits {
    let mut common = if decoding.has_common { f64::INFINITY } else { 0.0 };
    let mut private = vec![f64::INFINITY; decoding.users];
    for cap in &decoding.caps {
        let r = cap_rate(p, h, cap);
        match cap.signal {
            DlStream::Common => common = common.min(r),
            DlStream::Private(k) => private[k] = private[k].min(r),
        }
    }
    for r in private.iter_mut().filter(|r| r.is_infinite()) {
        *r = 0.0;
    }
    if common.is_infinite() {
        common = 0.0;
    }
    DownlinkLimits { common, private }
}

/// Rate-splitting downlink: `(R^d_c, [R^d_{k,p}])`.
pub fn downlink_rates(p: &DownlinkPrecoders, h: &[CVec]) -> (f64, Vec<f64>) {
    let lim = downlink_limits(p, h, &DownlinkDecoding::rate_splitting(h.len()));
    (lim.common, lim.private)
}

/// Stage delays in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub t_u: f64,
    pub t_p: f64,
    pub t_d: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.t_u + self.t_p + self.t_d
    }
}

/// `num / den` with `0 / anything = 0`.
fn delay(num: f64, den: f64, user: usize, what: &'static str) -> Result<f64> {
    if num <= 0.0 {
        Ok(0.0)
    } else if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::InfeasibleRate { user, what })
    }
}

/// Offload, processing and feedback times for per-user uplink sum rates and
/// feedback rates (both in bit/s/Hz).
pub fn stage_times(
    uplink_rate: &[f64],
    feedback_rate: &[f64],
    compute: &ComputeDecision,
    scenario: &Scenario,
) -> Result<StageTimes> {
    let cfg = &scenario.cfg;
    let b = cfg.bandwidth_hz;
    let mut t = StageTimes { t_u: 0.0, t_p: 0.0, t_d: 0.0 };
    for k in 0..scenario.users() {
        let l = scenario.task_bits[k];
        let a = compute.offload_fraction(k);
        t.t_u = t.t_u.max(delay(a * l, b * uplink_rate[k], k, "uplink")?);
        let (ts, _) = server_cost(compute.beta[k], l, scenario.omega[k], compute.f[k], cfg.kappa)
            .map_err(|_| Error::InfeasibleRate { user: k, what: "server cpu" })?;
        let (tl, _) = local_cost(compute.beta[k], l, scenario.omega[k], compute.f_tilde[k], cfg.kappa)
            .map_err(|_| Error::InfeasibleRate { user: k, what: "local cpu" })?;
        t.t_p = t.t_p.max(ts).max(tl);
        t.t_d = t.t_d.max(delay(cfg.epsilon_compress * a * l, b * feedback_rate[k], k, "downlink")?);
    }
    Ok(t)
}

/// Exact rates and stage times of one transmit state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `ru[k][m]`, uplink stream rates.
    pub ru: Vec<[f64; 2]>,
    /// Common-rate cap `min_k log2(1 + gamma_kc)`.
    pub rd_c: f64,
    /// Allocated common portions `R^d_{k,c}`.
    pub rd_c_alloc: Vec<f64>,
    pub rd_p: Vec<f64>,
    pub times: StageTimes,
}

impl RateReport {
    pub fn total_time(&self) -> f64 {
        self.times.total()
    }
}
