//! Quadratic-transform surrogates of the downlink scalar rates and the
//! uplink log-det rates, with their closed-form auxiliary updates.
//!
//! Every surrogate is a lower bound on the exact rate for any auxiliary
//! value and is tight at the closed-form update, which is what lets the
//! alternating optimization keep the previous iterate feasible.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, identity, inner, inverse_pd, log2_det_pd, solve_pd, CMat, CVec, LN2};
use crate::rates::{
    cap_powers, interference_covariance, received_covariance, DownlinkCap, DownlinkDecoding,
    DownlinkPrecoders, StreamId, UplinkDecoding, UplinkPrecoders,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    /// One scalar per downlink decoding cap, aligned with `DownlinkDecoding::caps`.
    pub y: Vec<Complex64>,
    /// `big_y[k][m]`, `A_br x A_u`.
    pub big_y: Vec<[CMat; 2]>,
    /// `phi[k][m]`, Hermitian PSD `A_u x A_u`.
    pub phi: Vec<[CMat; 2]>,
}

/// Closed-form `y = I^{-1} h^H p_signal` for one cap.
pub fn downlink_aux_for_cap(p: &DownlinkPrecoders, h: &[CVec], cap: &DownlinkCap) -> Complex64 {
    let (_, interference) = cap_powers(p, h, cap);
    inner(&h[cap.decoder], p.stream(cap.signal)) / interference
}

pub fn update_downlink_caps(p: &DownlinkPrecoders, h: &[CVec], decoding: &DownlinkDecoding) -> Vec<Complex64> {
    decoding.caps.iter().map(|cap| downlink_aux_for_cap(p, h, cap)).collect()
}

/// Rate-splitting auxiliaries `(y_c, y_p)`.
pub fn update_downlink_aux(p: &DownlinkPrecoders, h: &[CVec]) -> (Vec<Complex64>, Vec<Complex64>) {
    let k = h.len();
    let y = update_downlink_caps(p, h, &DownlinkDecoding::rate_splitting(k));
    (y[..k].to_vec(), y[k..].to_vec())
}

/// Argument of the log in the scalar surrogate: `2 Re(y* s) - |y|^2 I`.
pub fn downlink_surrogate_sinr(y: Complex64, p: &DownlinkPrecoders, h: &[CVec], cap: &DownlinkCap) -> f64 {
    let (_, interference) = cap_powers(p, h, cap);
    let s = inner(&h[cap.decoder], p.stream(cap.signal));
    2.0 * (y.conj() * s).re - y.norm_sqr() * interference
}

/// `log2(1 + 2 Re(y* h^H p) - |y|^2 I)` in bits.
pub fn eval_downlink_surrogate(y: Complex64, p: &DownlinkPrecoders, h: &[CVec], cap: &DownlinkCap) -> Result<f64> {
    let arg = 1.0 + downlink_surrogate_sinr(y, p, h, cap);
    if arg <= 0.0 {
        return Err(Error::SurrogateDomain(arg));
    }
    Ok(arg.log2())
}

/// Closed-form `(Y, Phi)` for one uplink stream.
pub fn uplink_aux_for_stream(
    w: &UplinkPrecoders,
    h: &[CMat],
    decoding: &UplinkDecoding,
    s: StreamId,
) -> Result<(CMat, CMat)> {
    let omega = interference_covariance(w, h, &decoding.interferers(s));
    let wk = w.get(s);
    let hk = &h[s.user];
    let hw = hk.adjoint() * wk;
    let total = &omega + received_covariance(wk, hk);
    let y = solve_pd(&total, &hw)?;
    let phi = hw.adjoint() * solve_pd(&omega, &hw)?;
    Ok((y, crate::linalg::hermitian_part(&phi)))
}

/// Closed-form `(Y, Phi)` for every active stream; inactive ones are zero.
pub fn update_uplink_aux(
    w: &UplinkPrecoders,
    h: &[CMat],
    decoding: &UplinkDecoding,
) -> Result<(Vec<[CMat; 2]>, Vec<[CMat; 2]>)> {
    let users = h.len();
    let (n_rx, n_s) = (h[0].ncols(), w.w[0][0].ncols());
    let zy = CMat::zeros(n_rx, n_s);
    let zp = CMat::zeros(n_s, n_s);
    let mut big_y = vec![[zy.clone(), zy]; users];
    let mut phi = vec![[zp.clone(), zp]; users];
    for s in decoding.streams() {
        let (y, p) = uplink_aux_for_stream(w, h, decoding, s)?;
        big_y[s.user][s.split] = y;
        phi[s.user][s.split] = p;
    }
    Ok((big_y, phi))
}

pub fn update_aux(
    w: &UplinkPrecoders,
    h_up: &[CMat],
    up: &UplinkDecoding,
    p: &DownlinkPrecoders,
    h_down: &[CVec],
    down: &DownlinkDecoding,
) -> Result<AuxState> {
    let (big_y, phi) = update_uplink_aux(w, h_up, up)?;
    Ok(AuxState { y: update_downlink_caps(p, h_down, down), big_y, phi })
}

/// Matrix surrogate of one stream rate:
/// `log2 det(I+Phi) + Tr((I+Phi)(2 Re(W^H H Y) - Y^H (H^H W W^H H + Omega) Y) - Phi) / ln 2`.
pub fn eval_uplink_surrogate(
    big_y: &CMat,
    phi: &CMat,
    w: &UplinkPrecoders,
    h: &[CMat],
    decoding: &UplinkDecoding,
    s: StreamId,
) -> Result<f64> {
    let omega = interference_covariance(w, h, &decoding.interferers(s));
    let wk = w.get(s);
    let hk = &h[s.user];
    let n = phi.nrows();
    let ip = identity(n) + phi;
    let a = wk.adjoint() * hk * big_y;
    let x = &a + a.adjoint() - big_y.adjoint() * (received_covariance(wk, hk) + omega) * big_y;
    let tr = ((&ip * x) - phi).trace().re;
    Ok(log2_det_pd(&ip)? + tr / LN2)
}

/// The uplink surrogate with fixed `(Y, Phi)` written as an explicit
/// function of the precoders:
/// `constant + (2 Re<W_s, G> - sum_j ||W_j^H B_j||_F^2) / ln 2`,
/// where `j` runs over the stream itself and its interferers.
#[derive(Debug, Clone)]
pub struct UplinkSurrogateModel {
    pub stream: StreamId,
    pub constant: f64,
    /// `H_k Y (I + Phi)`, `A_ut x A_u`.
    pub linear: CMat,
    /// `(j, H_j Y L)` with `L L^H = I + Phi`.
    pub quadratic: Vec<(StreamId, CMat)>,
}

impl UplinkSurrogateModel {
    pub fn build(big_y: &CMat, phi: &CMat, h: &[CMat], decoding: &UplinkDecoding, s: StreamId) -> Result<Self> {
        let n = phi.nrows();
        let ip = identity(n) + phi;
        let chol = cholesky_factor(&ip)?;
        let constant = log2_det_pd(&ip)?
            - (phi.trace().re + (&ip * big_y.adjoint() * big_y).trace().re) / LN2;
        let linear = &h[s.user] * big_y * &ip;
        let mut quadratic = vec![(s, &h[s.user] * big_y * &chol)];
        for j in decoding.interferers(s) {
            quadratic.push((j, &h[j.user] * big_y * &chol));
        }
        Ok(UplinkSurrogateModel { stream: s, constant, linear, quadratic })
    }

    pub fn eval(&self, w: &UplinkPrecoders) -> f64 {
        let ws = w.get(self.stream);
        let lin: f64 = ws.iter().zip(self.linear.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .map(|(j, b)| crate::linalg::fro_norm_sq(&(w.get(*j).adjoint() * b)))
            .sum();
        self.constant + (2.0 * lin - quad) / LN2
    }
}

/// `Gamma = W^H H Omega^{-1} H^H W` (the optimal `Phi`) via an explicit
/// inverse; used to cross-check the solve-based update.
pub fn sinr_matrix(w: &UplinkPrecoders, h: &[CMat], decoding: &UplinkDecoding, s: StreamId) -> Result<CMat> {
    let omega = interference_covariance(w, h, &decoding.interferers(s));
    let hw = h[s.user].adjoint() * w.get(s);
    Ok(hw.adjoint() * inverse_pd(&omega)? * hw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::rates::DecodingOrder;

    #[test]
    fn zero_common_gives_zero_aux() {
        let h = vec![CVec::from_vec(vec![c(1.0, 0.0), c(0.5, 0.0)])];
        let p = DownlinkPrecoders { common: CVec::zeros(2), private: vec![CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])] };
        let (yc, yp) = update_downlink_aux(&p, &h);
        assert_eq!(yc[0], c(0.0, 0.0));
        assert!(yp[0].norm() > 0.0);
    }

    #[test]
    fn unit_private_aux() {
        let h = vec![CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])];
        let p = DownlinkPrecoders { common: CVec::zeros(2), private: vec![CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])] };
        let (_, yp) = update_downlink_aux(&p, &h);
        assert!((yp[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_aux_gives_zero_surrogate() {
        let h = vec![CVec::from_vec(vec![c(1.0, 0.3)])];
        let p = DownlinkPrecoders { common: CVec::from_vec(vec![c(2.0, 0.0)]), private: vec![CVec::from_vec(vec![c(1.0, 0.0)])] };
        let d = DownlinkDecoding::rate_splitting(1);
        assert_eq!(eval_downlink_surrogate(c(0.0, 0.0), &p, &h, &d.caps[0]).unwrap(), 0.0);
    }

    #[test]
    fn stale_aux_is_a_domain_error() {
        let h = vec![CVec::from_vec(vec![c(1.0, 0.0)])];
        let p = DownlinkPrecoders { common: CVec::from_vec(vec![c(1.0, 0.0)]), private: vec![CVec::from_vec(vec![c(1.0, 0.0)])] };
        let d = DownlinkDecoding::rate_splitting(1);
        assert!(matches!(
            eval_downlink_surrogate(c(-5.0, 0.0), &p, &h, &d.caps[0]),
            Err(Error::SurrogateDomain(_))
        ));
    }

    #[test]
    fn scalar_uplink_aux() {
        let h = vec![CMat::from_element(1, 1, c(1.0, 0.0))];
        let w = UplinkPrecoders { w: vec![[CMat::from_element(1, 1, c(0.0, 0.0)), CMat::from_element(1, 1, c(1.0, 0.0))]] };
        let order = DecodingOrder::full(vec![StreamId::new(0, 0), StreamId::new(0, 1)], 1).unwrap();
        let dec = UplinkDecoding::Sic(order);
        let (y, phi) = update_uplink_aux(&w, &h, &dec).unwrap();
        assert!((y[0][1][(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((phi[0][1][(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(y[0][0][(0, 0)], c(0.0, 0.0));
        assert_eq!(phi[0][0][(0, 0)], c(0.0, 0.0));
        let val = eval_uplink_surrogate(&y[0][1], &phi[0][1], &w, &h, &dec, StreamId::new(0, 1)).unwrap();
        assert!((val - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_aux_gives_zero_uplink_surrogate() {
        let h = vec![CMat::from_element(2, 2, c(0.4, 0.1))];
        let w = UplinkPrecoders { w: vec![[CMat::from_element(2, 1, c(1.0, 0.0)), CMat::from_element(2, 1, c(0.3, 0.2))]] };
        let dec = UplinkDecoding::Sic(crate::rates::default_decoding_order(&h));
        let v = eval_uplink_surrogate(&CMat::zeros(2, 1), &CMat::zeros(1, 1), &w, &h, &dec, StreamId::new(0, 0)).unwrap();
        assert_eq!(v, 0.0);
    }
}
