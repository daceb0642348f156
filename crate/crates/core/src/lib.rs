//! Delay minimization for fog-computing networks with uplink and downlink
//! rate splitting: channel and compute models, quadratic-transform
//! surrogates, a conic subproblem per iteration, and the alternating
//! optimization that ties them together, plus SDMA / NOMA / cloud baselines.

pub mod ao;
pub mod baselines;
pub mod compute;
pub mod config;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod rates;
pub mod scenario;
pub mod subproblem;
pub mod surrogate;

pub use ao::{ao_minimize, ao_minimize_from, audit, evaluate, initialize, AoOptions, LinkModel, Solution, Status, TransmitState};
pub use baselines::{solve_cloud, solve_noma, solve_scheme, solve_sdma, SchemeKind};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use scenario::{build_scenario, Scenario};
