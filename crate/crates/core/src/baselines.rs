//! Comparison schemes built from the same AO machinery: SDMA (everything
//! else treated as noise), NOMA (single-split SIC uplink, superposition
//! downlink) and cloud-only processing with rate splitting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ao::{ao_minimize, AoOptions, LinkModel, Solution};
use crate::error::{Error, Result};
use crate::linalg::{fro_norm_sq, vec_norm_sq};
use crate::rates::{order_by_norm, DecodingOrder, DownlinkDecoding, StreamId, UplinkDecoding};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum SchemeKind {
    RS_FOG,
    SDMA,
    NOMA,
    RS_CLOUD,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::RS_FOG, SchemeKind::SDMA, SchemeKind::NOMA, SchemeKind::RS_CLOUD];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::RS_FOG => "RS_FOG",
            SchemeKind::SDMA => "SDMA",
            SchemeKind::NOMA => "NOMA",
            SchemeKind::RS_CLOUD => "RS_CLOUD",
        }
    }

    pub fn link_model(&self, scenario: &Scenario) -> LinkModel {
        match self {
            SchemeKind::RS_FOG => LinkModel::rate_splitting(scenario),
            SchemeKind::SDMA => sdma_model(scenario),
            SchemeKind::NOMA => noma_model(scenario),
            SchemeKind::RS_CLOUD => LinkModel { full_offload: true, ..LinkModel::rate_splitting(scenario) },
        }
    }

    /// SIC layers each receiver runs: per user for the NOMA downlink, zero
    /// for SDMA, and one common-stream layer for rate splitting.
    pub fn sic_layers(&self, users: usize) -> usize {
        match self {
            SchemeKind::NOMA => users.saturating_sub(1),
            SchemeKind::SDMA => 0,
            SchemeKind::RS_FOG | SchemeKind::RS_CLOUD => 1,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}` (expected RS_FOG, SDMA, NOMA or RS_CLOUD)")))
    }
}

pub fn sdma_model(scenario: &Scenario) -> LinkModel {
    let users = scenario.users();
    LinkModel {
        uplink: UplinkDecoding::TreatAsNoise { users },
        downlink: DownlinkDecoding::private_only(users),
        full_offload: false,
    }
}

pub fn noma_model(scenario: &Scenario) -> LinkModel {
    let users = scenario.users();
    let up_norms: Vec<f64> = scenario.h_up.iter().map(fro_norm_sq).collect();
    let order = order_by_norm(&up_norms).into_iter().map(|k| StreamId::new(k, 0)).collect();
    let down_norms: Vec<f64> = scenario.h_down.iter().map(vec_norm_sq).collect();
    LinkModel {
        uplink: UplinkDecoding::Sic(DecodingOrder::new(order, users).expect("one stream per user")),
        downlink: DownlinkDecoding::superposition(&order_by_norm(&down_norms)),
        full_offload: false,
    }
}

pub fn solve_scheme(kind: SchemeKind, scenario: &Scenario, opts: &AoOptions) -> Result<Solution> {
    ao_minimize(scenario, &kind.link_model(scenario), opts)
}

pub fn solve_sdma(scenario: &Scenario, opts: &AoOptions) -> Result<Solution> {
    solve_scheme(SchemeKind::SDMA, scenario, opts)
}

pub fn solve_noma(scenario: &Scenario, opts: &AoOptions) -> Result<Solution> {
    solve_scheme(SchemeKind::NOMA, scenario, opts)
}

pub fn solve_cloud(scenario: &Scenario, opts: &AoOptions) -> Result<Solution> {
    solve_scheme(SchemeKind::RS_CLOUD, scenario, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("rs_fog".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn noma_sic_layers() {
        assert_eq!(SchemeKind::NOMA.sic_layers(8), 7);
        assert_eq!(SchemeKind::NOMA.sic_layers(1), 0);
    }
}
