//! System parameters and the `key=value` config file format.
//!
//! Keys in the file are spelled exactly like the parameter symbols (`K`,
//! `A_ut`, `P_k_dBm`, ...). Lines starting with `#` and blank lines are
//! ignored; anything after a `#` on a value line is a trailing comment.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All scalar parameters of one simulated network plus solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "A_ut")]
    pub ant_user_tx: usize,
    #[serde(rename = "A_br")]
    pub ant_bs_rx: usize,
    #[serde(rename = "A_bt")]
    pub ant_bs_tx: usize,
    /// Streams per user and per uplink split.
    #[serde(rename = "A_u")]
    pub streams: usize,
    #[serde(rename = "P_k_dBm")]
    pub p_user_dbm: f64,
    /// BS radio budget; also the bound on the server's compute energy rate.
    #[serde(rename = "P_b_dBm")]
    pub p_bs_dbm: f64,
    #[serde(rename = "F_k_cyc_s")]
    pub f_user_cyc_s: f64,
    #[serde(rename = "F_b_cyc_s")]
    pub f_bs_cyc_s: f64,
    #[serde(rename = "omega_cyc_bit")]
    pub omega_cyc_bit: f64,
    #[serde(rename = "kappa")]
    pub kappa: f64,
    #[serde(rename = "epsilon_compress")]
    pub epsilon_compress: f64,
    #[serde(rename = "bandwidth_hz")]
    pub bandwidth_hz: f64,
    #[serde(rename = "noise_dBm")]
    pub noise_dbm: f64,
    #[serde(rename = "cell_radius_m")]
    pub cell_radius_m: f64,
    #[serde(rename = "L_min_bit")]
    pub l_min_bit: f64,
    #[serde(rename = "L_max_bit")]
    pub l_max_bit: f64,
    #[serde(rename = "tol_ao")]
    pub tol_ao: f64,
    #[serde(rename = "max_iter")]
    pub max_iter: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            users: 8,
            ant_user_tx: 2,
            ant_bs_rx: 2,
            ant_bs_tx: 4,
            streams: 2,
            p_user_dbm: 10.0,
            p_bs_dbm: 30.0,
            f_user_cyc_s: 3e6,
            f_bs_cyc_s: 1e9,
            omega_cyc_bit: 297.2,
            kappa: 1e-24,
            epsilon_compress: 0.5,
            bandwidth_hz: 10e6,
            noise_dbm: -100.0,
            cell_radius_m: 100.0,
            l_min_bit: 1e6,
            l_max_bit: 5e6,
            tol_ao: 1e-4,
            max_iter: 30,
        }
    }
}

pub const KEYS: [&str; 19] = [
    "K",
    "A_ut",
    "A_br",
    "A_bt",
    "A_u",
    "P_k_dBm",
    "P_b_dBm",
    "F_k_cyc_s",
    "F_b_cyc_s",
    "omega_cyc_bit",
    "kappa",
    "epsilon_compress",
    "bandwidth_hz",
    "noise_dBm",
    "cell_radius_m",
    "L_min_bit",
    "L_max_bit",
    "tol_ao",
    "max_iter",
];

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for key {key}")))
}

impl SystemConfig {
    pub fn p_user_w(&self) -> f64 {
        dbm_to_watts(self.p_user_dbm)
    }

    pub fn p_bs_w(&self) -> f64 {
        dbm_to_watts(self.p_bs_dbm)
    }

    /// Noise power in watts.
    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Sets one parameter by its file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "K" => self.users = parse_num(key, value)?,
            "A_ut" => self.ant_user_tx = parse_num(key, value)?,
            "A_br" => self.ant_bs_rx = parse_num(key, value)?,
            "A_bt" => self.ant_bs_tx = parse_num(key, value)?,
            "A_u" => self.streams = parse_num(key, value)?,
            "P_k_dBm" => self.p_user_dbm = parse_num(key, value)?,
            "P_b_dBm" => self.p_bs_dbm = parse_num(key, value)?,
            "F_k_cyc_s" => self.f_user_cyc_s = parse_num(key, value)?,
            "F_b_cyc_s" => self.f_bs_cyc_s = parse_num(key, value)?,
            "omega_cyc_bit" => self.omega_cyc_bit = parse_num(key, value)?,
            "kappa" => self.kappa = parse_num(key, value)?,
            "epsilon_compress" => self.epsilon_compress = parse_num(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = parse_num(key, value)?,
            "noise_dBm" => self.noise_dbm = parse_num(key, value)?,
            "cell_radius_m" => self.cell_radius_m = parse_num(key, value)?,
            "L_min_bit" => self.l_min_bit = parse_num(key, value)?,
            "L_max_bit" => self.l_max_bit = parse_num(key, value)?,
            "tol_ao" => self.tol_ao = parse_num(key, value)?,
            "max_iter" => self.max_iter = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses a `key=value` document on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SystemConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Renders the config in the file format; `parse` reads it back exactly.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).expect("known key"));
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "K" => self.users.to_string(),
            "A_ut" => self.ant_user_tx.to_string(),
            "A_br" => self.ant_bs_rx.to_string(),
            "A_bt" => self.ant_bs_tx.to_string(),
            "A_u" => self.streams.to_string(),
            "P_k_dBm" => format!("{:?}", self.p_user_dbm),
            "P_b_dBm" => format!("{:?}", self.p_bs_dbm),
            "F_k_cyc_s" => format!("{:?}", self.f_user_cyc_s),
            "F_b_cyc_s" => format!("{:?}", self.f_bs_cyc_s),
            "omega_cyc_bit" => format!("{:?}", self.omega_cyc_bit),
            "kappa" => format!("{:?}", self.kappa),
            "epsilon_compress" => format!("{:?}", self.epsilon_compress),
            "bandwidth_hz" => format!("{:?}", self.bandwidth_hz),
            "noise_dBm" => format!("{:?}", self.noise_dbm),
            "cell_radius_m" => format!("{:?}", self.cell_radius_m),
            "L_min_bit" => format!("{:?}", self.l_min_bit),
            "L_max_bit" => format!("{:?}", self.l_max_bit),
            "tol_ao" => format!("{:?}", self.tol_ao),
            "max_iter" => self.max_iter.to_string(),
            _ => return None,
        };
        Some(v)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.users == 0 {
            return fail("K must be at least 1".into());
        }
        if self.ant_user_tx == 0 || self.ant_bs_rx == 0 || self.ant_bs_tx == 0 || self.streams == 0 {
            return fail("antenna and stream counts must be positive".into());
        }
        if self.streams > self.ant_user_tx.min(self.ant_bs_rx) {
            return fail(format!(
                "A_u={} exceeds min(A_ut, A_br)={}",
                self.streams,
                self.ant_user_tx.min(self.ant_bs_rx)
            ));
        }
        let positive = [
            ("F_k_cyc_s", self.f_user_cyc_s),
            ("F_b_cyc_s", self.f_bs_cyc_s),
            ("omega_cyc_bit", self.omega_cyc_bit),
            ("kappa", self.kappa),
            ("bandwidth_hz", self.bandwidth_hz),
            ("cell_radius_m", self.cell_radius_m),
            ("L_min_bit", self.l_min_bit),
            ("L_max_bit", self.l_max_bit),
            ("tol_ao", self.tol_ao),
        ];
        for (key, v) in positive {
            // NaN fails this comparison too
            if !(v > 0.0) {
                return fail(format!("{key} must be strictly positive, got {v}"));
            }
        }
        for (key, v) in [
            ("P_k_dBm", self.p_user_dbm),
            ("P_b_dBm", self.p_bs_dbm),
            ("noise_dBm", self.noise_dbm),
        ] {
            if !v.is_finite() {
                return fail(format!("{key} must be finite, got {v}"));
            }
        }
        if !(self.epsilon_compress > 0.0 && self.epsilon_compress <= 1.0) {
            return fail(format!(
                "epsilon_compress must lie in (0, 1], got {}",
                self.epsilon_compress
            ));
        }
        if self.l_min_bit > self.l_max_bit {
            return fail("L_min_bit exceeds L_max_bit".into());
        }
        if self.cell_radius_m <= crate::scenario::MIN_DISTANCE_M {
            return fail("cell radius must exceed the 1 m minimum user distance".into());
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SystemConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_comments_and_overrides() {
        let text = "# small cell\nK = 4\nP_k_dBm=5 # weaker devices\n\ntol_ao=inf\n";
        let cfg = SystemConfig::parse(text).unwrap();
        assert_eq!(cfg.users, 4);
        assert_eq!(cfg.p_user_dbm, 5.0);
        assert!(cfg.tol_ao.is_infinite());
        assert_eq!(cfg.ant_bs_tx, 4);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = SystemConfig::parse("K=2\nfoo=1\n").unwrap_err();
        assert!(matches!(err, Error::Config(msg) if msg.contains("foo")));
    }

    #[test]
    fn missing_equals_is_an_error() {
        assert!(SystemConfig::parse("K 2\n").is_err());
    }

    #[test]
    fn rejects_too_many_streams() {
        assert!(SystemConfig::parse("A_u=3\n").is_err());
    }

    #[test]
    fn rejects_bad_compression() {
        assert!(SystemConfig::parse("epsilon_compress=0\n").is_err());
        assert!(SystemConfig::parse("epsilon_compress=1.5\n").is_err());
        assert!(SystemConfig::parse("epsilon_compress=1\n").is_ok());
    }

    #[test]
    fn kv_string_round_trips() {
        let mut cfg = SystemConfig::default();
        cfg.kappa = 3.3e-25;
        cfg.users = 3;
        let back = SystemConfig::parse(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-25);
    }
}
