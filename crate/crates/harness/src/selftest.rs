//! Invariant suite behind `rsfog selftest`. Fixed seeds and no timings in
//! the report, so two runs print the same text.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsfog::compute::{local_cost, BETA_MAX};
use rsfog::linalg::{identity, log2_det_pd, CMat, CVec};
use rsfog::rates::{
    cap_rate, default_decoding_order, uplink_rates, DecodingOrder, DlStream, DownlinkDecoding, DownlinkPrecoders,
    StreamId, UplinkDecoding, UplinkPrecoders,
};
use rsfog::scenario::complex_gaussian;
use rsfog::surrogate::{eval_downlink_surrogate, eval_uplink_surrogate, update_downlink_caps, update_uplink_aux};
use rsfog::{ao_minimize_from, build_scenario, solve_scheme, AoOptions, Scenario, SchemeKind, Solution, Status, SystemConfig};

const TIGHTNESS_TOL: f64 = 1e-9;
const CONSERVATION_TOL: f64 = 1e-9;
const DESCENT_SLACK: f64 = 1e-6;
const ORACLE_GAP: f64 = 0.02;
const EQUALIZATION_TOL: f64 = 1e-2;
const NESTING_SLACK: f64 = 1e-3;
/// The canary must move the surrogate at least this far off the exact rate.
const CANARY_GAP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        write!(f, "{failed} of {} checks failed", self.checks.len())
    }
}

/// Which uplink auxiliary to plug into the surrogate; `Negated` is the
/// injected sign error the tightness check has to catch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxMode {
    ClosedForm,
    Negated,
}

fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> CMat {
    CMat::from_fn(r, c, |_, _| complex_gaussian(rng) * scale)
}

fn cvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CVec {
    CVec::from_fn(n, |_, _| complex_gaussian(rng) * scale)
}

fn uplink_instance(rng: &mut ChaCha8Rng, users: usize) -> (Vec<CMat>, UplinkPrecoders) {
    let h: Vec<CMat> = (0..users)
        .map(|_| {
            let gain = 10f64.powf(rng.random_range(-1.0..1.5));
            cmat(rng, 2, 2, gain)
        })
        .collect();
    let mut w = UplinkPrecoders::zeros(users, 2, 2);
    for k in 0..users {
        for m in 0..2 {
            let scale = rng.random_range(0.1..2.0);
            w.w[k][m] = cmat(rng, 2, 2, scale);
        }
    }
    (h, w)
}

fn downlink_instance(rng: &mut ChaCha8Rng, users: usize) -> (Vec<CVec>, DownlinkPrecoders) {
    let h: Vec<CVec> = (0..users)
        .map(|_| {
            let gain = 10f64.powf(rng.random_range(-1.0..1.5));
            cvec(rng, 4, gain)
        })
        .collect();
    let p = DownlinkPrecoders { common: cvec(rng, 4, 1.0), private: (0..users).map(|_| cvec(rng, 4, 0.7)).collect() };
    (h, p)
}

/// Largest gap between each surrogate family at its auxiliary and the exact
/// rate, over 100 random instances with up to 4 users:
/// `[common, private, uplink split 1, uplink split 2]`.
pub fn tightness_gaps(mode: AuxMode) -> rsfog::Result<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    let mut worst = [0.0f64; 4];
    for trial in 0..100 {
        let users = 1 + trial % 4;
        let (h, w) = uplink_instance(&mut rng, users);
        let dec = UplinkDecoding::Sic(default_decoding_order(&h));
        let (y, phi) = update_uplink_aux(&w, &h, &dec)?;
        let exact = uplink_rates(&w, &h, &dec)?;
        for s in dec.streams() {
            let aux = match mode {
                AuxMode::ClosedForm => y[s.user][s.split].clone(),
                AuxMode::Negated => -&y[s.user][s.split],
            };
            let v = eval_uplink_surrogate(&aux, &phi[s.user][s.split], &w, &h, &dec, s)?;
            let gap = (v - exact[s.user][s.split]).abs();
            worst[2 + s.split] = worst[2 + s.split].max(gap);
        }

        let (hd, p) = downlink_instance(&mut rng, users);
        let ddec = DownlinkDecoding::rate_splitting(users);
        let yd = update_downlink_caps(&p, &hd, &ddec);
        for (cap, y) in ddec.caps.iter().zip(yd) {
            let gap = (eval_downlink_surrogate(y, &p, &hd, cap)? - cap_rate(&p, &hd, cap)).abs();
            let family = if cap.signal == DlStream::Common { 0 } else { 1 };
            worst[family] = worst[family].max(gap);
        }
    }
    Ok(worst)
}

fn tightness() -> Check {
    let name = "surrogate tightness";
    match tightness_gaps(AuxMode::ClosedForm) {
        Ok(g) => Check {
            name,
            pass: g.iter().all(|&x| x < TIGHTNESS_TOL),
            detail: format!(
                "max gap common {:.0e}, private {:.0e}, uplink {:.0e}/{:.0e} (tol {TIGHTNESS_TOL:.0e})",
                g[0], g[1], g[2], g[3]
            ),
        },
        Err(e) => Check { name, pass: false, detail: e.to_string() },
    }
}

fn mutation_canary() -> Check {
    let name = "mutation canary";
    match tightness_gaps(AuxMode::Negated) {
        Ok(g) => {
            let caught = g[2].max(g[3]) > CANARY_GAP;
            Check {
                name,
                pass: caught,
                detail: if caught {
                    "sign-flipped uplink auxiliary rejected by the tightness check".into()
                } else {
                    "sign-flipped uplink auxiliary went unnoticed".into()
                },
            }
        }
        Err(e) => Check { name, pass: true, detail: format!("sign-flipped auxiliary rejected: {e}") },
    }
}

fn conservation() -> Check {
    let name = "sum-rate conservation";
    let mut rng = ChaCha8Rng::seed_from_u64(7002);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let users = 1 + trial % 4;
        let (h, w) = uplink_instance(&mut rng, users);
        let mut order: Vec<StreamId> = (0..users).flat_map(|k| [StreamId::new(k, 0), StreamId::new(k, 1)]).collect();
        order.shuffle(&mut rng);
        let result = DecodingOrder::full(order.clone(), users).and_then(|o| {
            let sum: f64 = uplink_rates(&w, &h, &UplinkDecoding::Sic(o))?.iter().map(|r| r[0] + r[1]).sum();
            let mut total = identity(2);
            for s in &order {
                let hw = h[s.user].adjoint() * &w.w[s.user][s.split];
                total += &hw * hw.adjoint();
            }
            Ok((sum - log2_det_pd(&total)?).abs())
        });
        match result {
            Ok(gap) => worst = worst.max(gap),
            Err(e) => return Check { name, pass: false, detail: e.to_string() },
        }
    }
    Check {
        name,
        pass: worst < CONSERVATION_TOL,
        detail: format!("max |sum of stream rates - joint log-det| {worst:.0e} over 100 random orders"),
    }
}

fn default_scenarios(users: usize, seeds: u64) -> rsfog::Result<Vec<Scenario>> {
    let cfg = SystemConfig { users, ..SystemConfig::default() };
    (0..seeds).map(|s| build_scenario(&cfg, s)).collect()
}

fn descent(runs: &[(Scenario, Solution)]) -> Check {
    let mut bad = Vec::new();
    for (scn, sol) in runs {
        let rises = sol.trace.windows(2).any(|w| w[1] > w[0] + DESCENT_SLACK);
        if rises || sol.status != Status::Converged {
            bad.push(format!("seed {} {} rises={rises}", scn.seed, sol.status));
        }
    }
    let max_it = runs.iter().map(|(_, s)| s.iterations).max().unwrap_or(0);
    Check {
        name: "monotone descent",
        pass: bad.is_empty() && !runs.is_empty(),
        detail: if bad.is_empty() {
            format!("{} RS_FOG runs non-increasing and converged, max {max_it} iterations", runs.len())
        } else {
            bad.join("; ")
        },
    }
}

/// Brute force of the single-user, single-antenna instance over a grid of
/// (split variable, uplink power split), with the largest server share that
/// meets the CPU cap and the true energy budget. Returns the best objective.
pub fn scalar_grid(scn: &Scenario, n: usize) -> f64 {
    let cfg = &scn.cfg;
    let (pk, pb) = (cfg.p_user_w(), cfg.p_bs_w());
    let hu = scn.h_up[0][(0, 0)].norm_sqr();
    let hd = scn.h_down[0][0].norm_sqr();
    let (l, omega, kappa) = (scn.task_bits[0], scn.omega[0], cfg.kappa);
    let bw = cfg.bandwidth_hz;
    let ft = (pk / kappa).cbrt().min(cfg.f_user_cyc_s);
    let rd = (1.0 + pb * hd).log2();

    let mut best = f64::INFINITY;
    for i in 0..n {
        let beta = BETA_MAX * i as f64 / (n - 1) as f64;
        let a = beta * beta;
        let t_local = omega * (1.0 - a) * l / ft;
        let work = omega * a * l;
        let t_p = if work > 0.0 {
            let excess = |f: f64| kappa * f * f * work - pb * (work / f).max(t_local);
            let (mut lo, mut hi) = (0.0, cfg.f_bs_cyc_s);
            if excess(hi) > 0.0 {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if excess(mid) <= 0.0 {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                hi = lo;
            }
            (work / hi).max(t_local)
        } else {
            t_local
        };
        for j in 0..n {
            let rho = j as f64 / (n - 1) as f64;
            let r1 = (1.0 + rho * pk * hu / (1.0 + (1.0 - rho) * pk * hu)).log2();
            let r2 = (1.0 + (1.0 - rho) * pk * hu).log2();
            let t_u = if a > 0.0 { a * l / (bw * (r1 + r2)) } else { 0.0 };
            let t_d = if a > 0.0 { cfg.epsilon_compress * a * l / (bw * rd) } else { 0.0 };
            best = best.min(t_u + t_p + t_d);
        }
    }
    best
}

fn oracle() -> Check {
    let name = "scalar oracle equivalence";
    let cfg = SystemConfig {
        users: 1,
        ant_user_tx: 1,
        ant_bs_rx: 1,
        ant_bs_tx: 1,
        streams: 1,
        ..SystemConfig::default()
    };
    let run = build_scenario(&cfg, 0).and_then(|scn| {
        let sol = solve_scheme(SchemeKind::RS_FOG, &scn, &AoOptions::from_config(&scn))?;
        Ok((sol.objective(), scalar_grid(&scn, 200)))
    });
    match run {
        Ok((ao, grid)) => {
            let gap = (ao - grid) / grid;
            Check {
                name,
                pass: gap.abs() <= ORACLE_GAP,
                detail: format!("AO {ao:.6} s vs 200x200 grid {grid:.6} s, relative gap {:.2}%", gap * 100.0),
            }
        }
        Err(e) => Check { name, pass: false, detail: e.to_string() },
    }
}

fn equalization(runs: &[(Scenario, Solution)]) -> Check {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (scn, sol) in runs {
        let c = &sol.state.compute;
        if sol.status != Status::Converged || !c.beta.iter().all(|&b| (0.01..=0.99).contains(&b)) {
            continue;
        }
        checked += 1;
        let tp = sol.report.times.t_p;
        for k in 0..scn.users() {
            match local_cost(c.beta[k], scn.task_bits[k], scn.omega[k], c.f_tilde[k], scn.cfg.kappa) {
                Ok((tl, _)) => worst = worst.max((tl - tp).abs() / tp),
                Err(e) => return Check { name: "local/server time equalization", pass: false, detail: e.to_string() },
            }
        }
    }
    Check {
        name: "local/server time equalization",
        pass: checked > 0 && worst <= EQUALIZATION_TOL,
        detail: format!("max relative spread {worst:.0e} on {checked} interior solutions"),
    }
}

fn nesting(scenarios: &[Scenario]) -> Check {
    let name = "scheme nesting";
    let mut bad = Vec::new();
    for scn in scenarios {
        let opts = AoOptions::from_config(scn);
        let run = solve_scheme(SchemeKind::SDMA, scn, &opts).and_then(|sdma| {
            let warm = ao_minimize_from(scn, &SchemeKind::RS_FOG.link_model(scn), sdma.state.clone(), &opts)?;
            Ok((warm.objective(), sdma.objective()))
        });
        match run {
            Ok((rs, sdma)) if rs > sdma + NESTING_SLACK => bad.push(format!("seed {}: {rs:.6} > {sdma:.6}", scn.seed)),
            Ok(_) => {}
            Err(e) => bad.push(format!("seed {}: {e}", scn.seed)),
        }
    }
    Check {
        name,
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("warm-started RS_FOG within {NESTING_SLACK:.0e} of SDMA on {} seeds", scenarios.len())
        } else {
            bad.join("; ")
        },
    }
}

/// Runs every check. The AO checks use K = 4 and three seeds to keep the
/// suite short; the acceptance test target covers the full-size runs.
pub fn run_selftest() -> Report {
    let mut checks = vec![tightness(), mutation_canary(), conservation()];
    match default_scenarios(4, 3) {
        Ok(scns) => {
            let mut runs = Vec::new();
            let mut errors = Vec::new();
            for scn in &scns {
                match solve_scheme(SchemeKind::RS_FOG, scn, &AoOptions::from_config(scn)) {
                    Ok(sol) => runs.push((scn.clone(), sol)),
                    Err(e) => errors.push(format!("seed {}: {e}", scn.seed)),
                }
            }
            let mut d = descent(&runs);
            if !errors.is_empty() {
                d.pass = false;
                d.detail = format!("{}; {}", d.detail, errors.join("; "));
            }
            checks.push(d);
            checks.push(oracle());
            checks.push(equalization(&runs));
            checks.push(nesting(&scns));
        }
        Err(e) => checks.push(Check { name: "scenario setup", pass: false, detail: e.to_string() }),
    }
    Report { checks }
}
