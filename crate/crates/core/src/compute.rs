//! Computing time and energy at the server and the users, the closed-form
//! local CPU frequency, and the convexified energy / local-time constraints
//! used inside each alternating-optimization subproblem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the split variable `beta` (offload fraction `beta^2`).
/// The `1/(1 - beta)` energy atoms blow up at 1; full offload is the cloud
/// baseline's job.
pub const BETA_MAX: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeDecision {
    /// Split variables; user `k` offloads `beta[k]^2` of its task.
    pub beta: Vec<f64>,
    /// Server CPU shares (cycles/s).
    pub f: Vec<f64>,
    /// Local CPU frequencies (cycles/s).
    pub f_tilde: Vec<f64>,
}

impl ComputeDecision {
    pub fn offload_fraction(&self, k: usize) -> f64 {
        self.beta[k] * self.beta[k]
    }
}

/// Server time and energy for one user's offloaded share.
pub fn server_cost(beta: f64, task_bits: f64, omega: f64, f: f64, kappa: f64) -> Result<(f64, f64)> {
    let cycles = omega * beta * beta * task_bits;
    if cycles <= 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(f > 0.0) {
        return Err(Error::Domain(format!("offloaded work {cycles} cycles with server share {f}")));
    }
    Ok((cycles / f, kappa * f * f * cycles))
}

/// Local time and energy for the share kept on the device.
pub fn local_cost(beta: f64, task_bits: f64, omega: f64, f_tilde: f64, kappa: f64) -> Result<(f64, f64)> {
    let cycles = omega * (1.0 - beta * beta) * task_bits;
    if cycles <= 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(f_tilde > 0.0) {
        return Err(Error::Domain(format!("local work {cycles} cycles with local frequency {f_tilde}")));
    }
    Ok((cycles / f_tilde, kappa * f_tilde * f_tilde * cycles))
}

/// Largest local frequency meeting both `kappa f^3 <= P` and `f <= F`.
pub fn optimal_local_frequency(p_user_w: f64, kappa: f64, f_cap: f64) -> f64 {
    (p_user_w / kappa).cbrt().min(f_cap)
}

/// One user's share of the convexified server-energy constraint,
/// `sum_k (-c f_prev (2f - f_prev) + c f^2 / (2(1-beta)) + c f^2 / (2(1+beta))) <= P_b`
/// with `c = kappa * f_tilde`. Only the concave `-c f^2` part is linearized;
/// the two quadratic-over-affine parts stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerm {
    pub coeff: f64,
    pub f_prev: f64,
}

impl EnergyTerm {
    /// Linearization of `-c f^2` at `f_prev`; an upper bound everywhere.
    pub fn linearized(&self, f: f64) -> f64 {
        -self.coeff * self.f_prev * (2.0 * f - self.f_prev)
    }

    pub fn fraction_terms(&self, f: f64, beta: f64) -> Result<(f64, f64)> {
        if !(beta > -1.0 && beta < 1.0) {
            return Err(Error::Domain(format!("beta {beta} outside (-1, 1)")));
        }
        let q = self.coeff * f * f;
        Ok((q / (2.0 * (1.0 - beta)), q / (2.0 * (1.0 + beta))))
    }

    pub fn eval(&self, f: f64, beta: f64) -> Result<f64> {
        let (a, b) = self.fraction_terms(f, beta)?;
        Ok(self.linearized(f) + a + b)
    }

    /// The energy rate `c f^2 beta^2 / (1 - beta^2)` this term bounds.
    pub fn exact(&self, f: f64, beta: f64) -> f64 {
        self.coeff * f * f * beta * beta / (1.0 - beta * beta)
    }
}

pub fn energy_constraint_terms(f_tilde: &[f64], f_prev: &[f64], kappa: f64) -> Vec<EnergyTerm> {
    f_tilde
        .iter()
        .zip(f_prev)
        .map(|(&ft, &fp)| EnergyTerm { coeff: kappa * ft, f_prev: fp })
        .collect()
}

/// Linearized local-time bound `intercept + slope * beta <= T^p`, exact at
/// `beta_prev` and never below the true local time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTimeTerm {
    pub intercept: f64,
    pub slope: f64,
}

impl LocalTimeTerm {
    pub fn eval(&self, beta: f64) -> f64 {
        self.intercept + self.slope * beta
    }
}

pub fn local_time_constraint_terms(
    beta_prev: &[f64],
    f_tilde: &[f64],
    task_bits: &[f64],
    omega: &[f64],
) -> Vec<LocalTimeTerm> {
    beta_prev
        .iter()
        .enumerate()
        .map(|(k, &bp)| {
            let scale = omega[k] * task_bits[k] / f_tilde[k];
            // omega L (1 - bp (2 beta - bp)) / f~
            LocalTimeTerm { intercept: scale * (1.0 + bp * bp), slope: -2.0 * scale * bp }
        })
        .collect()
}
