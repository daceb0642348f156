//! Shared fixtures and independent oracles for the integration tests. The
//! oracles work from the defining formulas with LU determinants/inverses
//! and explicit loops, never through the library's rate code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsfog::rates::{DownlinkPrecoders, StreamId, UplinkPrecoders};
use rsfog::{build_scenario, Scenario, SystemConfig};

pub type M = DMatrix<Complex64>;
pub type V = DVector<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    // Box-Muller, kept local so the fixture does not depend on library RNG helpers
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt() * scale / 2f64.sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * t.cos(), r * t.sin())
}

pub fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> M {
    M::from_fn(r, c, |_, _| cgauss(rng, scale))
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> V {
    V::from_fn(n, |_, _| cgauss(rng, scale))
}

/// Random uplink instance: channels `A_ut x A_br` and precoders for both splits.
pub fn uplink_instance(
    rng: &mut ChaCha8Rng,
    users: usize,
    a_ut: usize,
    a_br: usize,
    a_u: usize,
) -> (Vec<M>, UplinkPrecoders) {
    let h: Vec<M> = (0..users)
        .map(|_| {
            let gain = 10f64.powf(rng.random_range(-1.0..1.5));
            rand_mat(rng, a_ut, a_br, gain)
        })
        .collect();
    let mut w = UplinkPrecoders::zeros(users, a_ut, a_u);
    for k in 0..users {
        for m in 0..2 {
            let scale = rng.random_range(0.1..2.0);
            w.w[k][m] = rand_mat(rng, a_ut, a_u, scale);
        }
    }
    (h, w)
}

pub fn downlink_instance(rng: &mut ChaCha8Rng, users: usize, a_bt: usize) -> (Vec<V>, DownlinkPrecoders) {
    let h: Vec<V> = (0..users)
        .map(|_| {
            let gain = 10f64.powf(rng.random_range(-1.0..1.5));
            rand_vec(rng, a_bt, gain)
        })
        .collect();
    let p = DownlinkPrecoders {
        common: rand_vec(rng, a_bt, 1.0),
        private: (0..users).map(|_| rand_vec(rng, a_bt, 0.7)).collect(),
    };
    (h, p)
}

pub fn log2_det_lu(m: &M) -> f64 {
    let d = m.clone().determinant();
    d.re.log2()
}

pub fn eye(n: usize) -> M {
    M::identity(n, n)
}

/// `log2 det(I + W^H H Omega^{-1} H^H W)` with `Omega = I + sum_later H^H W W^H H`.
pub fn oracle_stream_rate(h: &[M], w: &UplinkPrecoders, s: StreamId, later: &[StreamId]) -> f64 {
    let n = h[0].ncols();
    let mut omega = eye(n);
    for j in later {
        let hw = h[j.user].adjoint() * &w.w[j.user][j.split];
        omega += &hw * hw.adjoint();
    }
    let hw = h[s.user].adjoint() * &w.w[s.user][s.split];
    let inv = omega.try_inverse().expect("omega invertible");
    let gamma = hw.adjoint() * inv * &hw;
    log2_det_lu(&(eye(gamma.nrows()) + gamma))
}

/// Joint `log2 det(I + sum_all H^H W W^H H)` over the given streams.
pub fn oracle_joint_rate(h: &[M], w: &UplinkPrecoders, streams: &[StreamId]) -> f64 {
    let n = h[0].ncols();
    let mut total = eye(n);
    for j in streams {
        let hw = h[j.user].adjoint() * &w.w[j.user][j.split];
        total += &hw * hw.adjoint();
    }
    log2_det_lu(&total)
}

pub fn dot_h(h: &V, p: &V) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..h.len() {
        acc += h[i].conj() * p[i];
    }
    acc
}

/// `log2(1 + |h^H p_sig|^2 / (1 + sum |h^H p_j|^2))` by direct summation.
pub fn oracle_sinr_rate(h: &V, sig: &V, interferers: &[&V]) -> f64 {
    let s = dot_h(h, sig).norm_sqr();
    let i = 1.0 + interferers.iter().map(|p| dot_h(h, p).norm_sqr()).sum::<f64>();
    (1.0 + s / i).log2()
}

/// Default parameters with `K` users.
pub fn default_config(users: usize) -> SystemConfig {
    SystemConfig { users, ..SystemConfig::default() }
}

pub fn default_scenario(users: usize, seed: u64) -> Scenario {
    build_scenario(&default_config(users), seed).expect("valid scenario")
}

/// Single-antenna, single-user instance with default parameters.
pub fn scalar_config() -> SystemConfig {
    SystemConfig { users: 1, ant_user_tx: 1, ant_bs_rx: 1, ant_bs_tx: 1, streams: 1, ..SystemConfig::default() }
}

/// Brute-force optimum of the single-user, single-antenna problem over a
/// `n x n` grid of (split variable, uplink power split between the two
/// sub-messages). For each grid point the uplink and downlink use full
/// power, and the server share is the largest value meeting both the CPU
/// cap and the true server-energy budget `kappa f^2 omega beta^2 L <= P_b T^p`
/// (found by bisection, the budget violation being increasing in `f`).
/// Returns `(objective, beta, rho)`.
pub fn scalar_grid_oracle(scn: &Scenario, n: usize, beta_max: f64) -> (f64, f64, f64) {
    let cfg = &scn.cfg;
    let (pk, pb) = (cfg.p_user_w(), cfg.p_bs_w());
    let hu = scn.h_up[0][(0, 0)].norm_sqr();
    let hd = scn.h_down[0][0].norm_sqr();
    let (l, omega, kappa) = (scn.task_bits[0], scn.omega[0], cfg.kappa);
    let bw = cfg.bandwidth_hz;
    let ft = (pk / kappa).cbrt().min(cfg.f_user_cyc_s);

    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n {
        let beta = beta_max * i as f64 / (n - 1) as f64;
        let a = beta * beta;
        let t_local = omega * (1.0 - a) * l / ft;
        let work = omega * a * l;
        let f = if work <= 0.0 {
            0.0
        } else {
            let excess = |f: f64| kappa * f * f * work - pb * (work / f).max(t_local);
            let (mut lo, mut hi) = (0.0, cfg.f_bs_cyc_s);
            if excess(hi) <= 0.0 {
                hi
            } else {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if excess(mid) <= 0.0 {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                lo
            }
        };
        let t_p = if work > 0.0 { (work / f).max(t_local) } else { t_local };
        for j in 0..n {
            let rho = j as f64 / (n - 1) as f64;
            // first sub-message decoded under the second's interference
            let r1 = (1.0 + rho * pk * hu / (1.0 + (1.0 - rho) * pk * hu)).log2();
            let r2 = (1.0 + (1.0 - rho) * pk * hu).log2();
            // downlink: common and private share the budget; one user takes both
            let rd = (1.0 + pb * hd).log2();
            let t_u = if a > 0.0 { a * l / (bw * (r1 + r2)) } else { 0.0 };
            let t_d = if a > 0.0 { cfg.epsilon_compress * a * l / (bw * rd) } else { 0.0 };
            let total = t_u + t_p + t_d;
            if total < best.0 {
                best = (total, beta, rho);
            }
        }
    }
    best
}
