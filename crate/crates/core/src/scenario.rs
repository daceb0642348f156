//! Reproducible problem instances: user placement, task sizes and
//! noise-normalized Rayleigh channels.
//!
//! Channels are divided by the noise standard deviation, so every rate
//! formula downstream uses unit noise power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec};
use num_complex::Complex64;

/// Users never sit closer than this to the BS.
pub const MIN_DISTANCE_M: f64 = 1.0;

// Independent RNG streams derived from one seed.
const STREAM_PLACEMENT: u64 = 0;
const STREAM_CHANNELS: u64 = 1;

/// Path loss in dB at `d_km` kilometres.
pub fn path_loss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d_km} km")));
    }
    Ok(128.1 + 37.6 * d_km.log10())
}

/// Amplitude `g` that scales unit-variance fading so that `g^2` is the
/// noise-normalized large-scale gain.
pub fn normalized_gain(d_km: f64, noise_w: f64) -> Result<f64> {
    let pl = path_loss_db(d_km)?;
    Ok((10f64.powf(-pl / 10.0) / noise_w).sqrt())
}

/// Maps a uniform draw to a distance (km) uniform over the annulus between
/// the minimum distance and the cell edge.
pub fn distance_from_uniform(u: f64, cell_radius_m: f64) -> f64 {
    let r0 = MIN_DISTANCE_M;
    let r2 = u * (cell_radius_m * cell_radius_m - r0 * r0) + r0 * r0;
    r2.sqrt() * 1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub seed: u64,
    /// Distance of each user to the BS in km.
    pub distances_km: Vec<f64>,
    pub task_bits: Vec<f64>,
    /// CPU cycles per bit, per user.
    pub omega: Vec<f64>,
    /// Uplink channels, `A_ut x A_br` each; the BS receives `H^H W x`.
    pub h_up: Vec<CMat>,
    /// Downlink channels, length `A_bt`; user `k` receives `h_k^H x`.
    pub h_down: Vec<CVec>,
}

impl Scenario {
    pub fn users(&self) -> usize {
        self.cfg.users
    }

    /// Builds a scenario from explicit parts; used for hand-made instances.
    pub fn from_parts(
        cfg: SystemConfig,
        distances_km: Vec<f64>,
        task_bits: Vec<f64>,
        h_up: Vec<CMat>,
        h_down: Vec<CVec>,
    ) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.users;
        if distances_km.len() != k || task_bits.len() != k || h_up.len() != k || h_down.len() != k {
            return Err(Error::Dimension(format!("expected {k} users in every per-user list")));
        }
        for h in &h_up {
            if h.nrows() != cfg.ant_user_tx || h.ncols() != cfg.ant_bs_rx {
                return Err(Error::Dimension("uplink channel must be A_ut x A_br".into()));
            }
        }
        for h in &h_down {
            if h.len() != cfg.ant_bs_tx {
                return Err(Error::Dimension("downlink channel must have A_bt entries".into()));
            }
        }
        let omega = vec![cfg.omega_cyc_bit; k];
        Ok(Scenario { cfg, seed: 0, distances_km, task_bits, omega, h_up, h_down })
    }

    /// Same users and channels under a different config (solver controls,
    /// compute caps, powers). Dimensions and placement keys must not change.
    pub fn with_config(&self, cfg: SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let mut out = self.clone();
        out.omega = vec![cfg.omega_cyc_bit; cfg.users];
        out.cfg = cfg;
        Ok(out)
    }
}

/// Draws one instance. Placement and task sizes use one RNG stream and the
/// fading another, so `(cfg, seed)` always yields the same instance.
pub fn build_scenario(cfg: &SystemConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_PLACEMENT);
    let k = cfg.users;
    let distances_km: Vec<f64> = (0..k)
        .map(|_| distance_from_uniform(rng.random::<f64>(), cfg.cell_radius_m))
        .collect();
    let task_bits: Vec<f64> = (0..k)
        .map(|_| cfg.l_min_bit + rng.random::<f64>() * (cfg.l_max_bit - cfg.l_min_bit))
        .collect();
    let (h_up, h_down) = draw_channels(&distances_km, cfg, seed)?;
    Ok(Scenario {
        cfg: cfg.clone(),
        seed,
        distances_km,
        task_bits,
        omega: vec![cfg.omega_cyc_bit; k],
        h_up,
        h_down,
    })
}

/// Rayleigh channels for the given user distances.
pub fn draw_channels(
    distances_km: &[f64],
    cfg: &SystemConfig,
    seed: u64,
) -> Result<(Vec<CMat>, Vec<CVec>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_CHANNELS);
    draw_channels_with(distances_km, cfg, || complex_gaussian(&mut rng))
}

/// Unit-variance circularly-symmetric complex Gaussian sample.
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re * s, im * s)
}

/// Same as [`draw_channels`] with a caller-supplied fading source.
pub fn draw_channels_with(
    distances_km: &[f64],
    cfg: &SystemConfig,
    mut fading: impl FnMut() -> Complex64,
) -> Result<(Vec<CMat>, Vec<CVec>)> {
    let noise = cfg.noise_w();
    let mut h_up = Vec::with_capacity(distances_km.len());
    let mut h_down = Vec::with_capacity(distances_km.len());
    for &d in distances_km {
        let g = normalized_gain(d, noise)?;
        h_up.push(CMat::from_fn(cfg.ant_user_tx, cfg.ant_bs_rx, |_, _| fading() * g));
        h_down.push(CVec::from_fn(cfg.ant_bs_tx, |_, _| fading() * g));
    }
    Ok((h_up, h_down))
}
