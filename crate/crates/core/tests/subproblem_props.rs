mod common;

use common::*;
use rsfog::ao::{aux_at, evaluate, initialize};
use rsfog::conic::SolverSettings;
use rsfog::rates::{uplink_rates, DownlinkPrecoders, UplinkPrecoders};
use rsfog::subproblem::{assemble_subproblem, family, solve_subproblem};
use rsfog::{build_scenario, SchemeKind, SystemConfig};

#[test]
fn initial_point_is_feasible_for_first_subproblem() {
    for kind in SchemeKind::ALL {
        for (users, seed) in [(1, 0), (2, 1), (4, 2), (8, 3)] {
            let scn = default_scenario(users, seed);
            let model = kind.link_model(&scn);
            let st = initialize(&scn, &model);
            let aux = aux_at(&st, &scn, &model).unwrap();
            let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();
            let x = spec.encode(&st, &scn).unwrap();
            let (v, fam, user) = spec.program.max_violation(&x);
            assert!(v < 1e-8, "{kind} K={users}: {fam} user {user:?} violated by {v}");
            // the encoded stage times reproduce the exact objective
            let obj = spec.program.objective.eval(&x);
            let exact = evaluate(&st, &scn, &model).unwrap().total_time();
            assert!((obj - exact).abs() <= 1e-9 * exact, "{kind}: {obj} vs {exact}");
        }
    }
}

#[test]
fn solved_point_is_feasible_for_next_subproblem() {
    let scn = default_scenario(4, 7);
    for kind in SchemeKind::ALL {
        let model = kind.link_model(&scn);
        let mut st = initialize(&scn, &model);
        for _ in 0..3 {
            let aux = aux_at(&st, &scn, &model).unwrap();
            let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();
            let x = spec.encode(&st, &scn).unwrap();
            assert!(spec.program.max_violation(&x).0 < 1e-7, "{kind}");
            st = solve_subproblem(&spec, &st, &scn, &SolverSettings::default()).unwrap().state;
        }
    }
}

#[test]
fn per_user_families_have_one_instance_per_user() {
    let scn = default_scenario(8, 0);
    let model = SchemeKind::RS_FOG.link_model(&scn);
    let st = initialize(&scn, &model);
    let aux = aux_at(&st, &scn, &model).unwrap();
    let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();
    let per_user = [
        family::OFFLOAD_DELAY,
        family::SERVER_TIME,
        family::LOCAL_TIME,
        family::FEEDBACK_DELAY,
        family::COMMON_SURROGATE,
        family::COMMON_LOG,
        family::PRIVATE_SURROGATE,
        family::PRIVATE_LOG,
        family::UPLINK_SURROGATE[0],
        family::UPLINK_SURROGATE[1],
        family::USER_POWER,
        family::ENERGY_FRACTION_MINUS,
        family::ENERGY_FRACTION_PLUS,
        family::BETA_RANGE,
    ];
    for fam in per_user {
        assert_eq!(spec.program.count(fam), 8, "{fam}");
    }
    for fam in [family::BS_POWER, family::CPU_BUDGET, family::ENERGY_BUDGET] {
        assert_eq!(spec.program.count(fam), 1, "{fam}");
    }
}

fn dead_channel_scenario() -> rsfog::Scenario {
    let cfg = SystemConfig { users: 1, ..SystemConfig::default() };
    let mut scn = build_scenario(&cfg, 0).unwrap();
    scn.h_up = vec![M::zeros(cfg.ant_user_tx, cfg.ant_bs_rx)];
    scn.h_down = vec![V::zeros(cfg.ant_bs_tx)];
    scn
}

#[test]
fn dead_channels_fall_back_to_local_processing() {
    let scn = dead_channel_scenario();
    let cfg = &scn.cfg;
    let model = SchemeKind::RS_FOG.link_model(&scn);
    let mut st = initialize(&scn, &model);
    st.uplink = UplinkPrecoders::zeros(1, cfg.ant_user_tx, cfg.streams);
    st.downlink = DownlinkPrecoders::zeros(1, cfg.ant_bs_tx);
    st.compute.beta = vec![0.0];
    st.common_alloc = vec![0.0];
    let aux = aux_at(&st, &scn, &model).unwrap();
    let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();
    let sol = solve_subproblem(&spec, &st, &scn, &SolverSettings::default()).unwrap();
    let local = scn.omega[0] * scn.task_bits[0] / st.compute.f_tilde[0];
    assert!(sol.objective <= local * (1.0 + 1e-7));
    assert_eq!(sol.state.compute.beta, vec![0.0]);
    let t = evaluate(&sol.state, &scn, &model).unwrap();
    assert!((t.total_time() - local).abs() <= 1e-7 * local);
}

#[test]
fn resolving_the_same_program_is_reproducible() {
    let scn = default_scenario(4, 3);
    let model = SchemeKind::RS_FOG.link_model(&scn);
    let st = initialize(&scn, &model);
    let aux = aux_at(&st, &scn, &model).unwrap();
    let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();
    let a = solve_subproblem(&spec, &st, &scn, &SolverSettings::default()).unwrap();
    let b = solve_subproblem(&spec, &st, &scn, &SolverSettings::default()).unwrap();
    assert!((a.objective - b.objective).abs() <= 1e-6);
}

#[test]
fn surrogate_rate_variables_are_achievable() {
    for seed in 0..4 {
        let scn = default_scenario(4, seed);
        let model = SchemeKind::RS_FOG.link_model(&scn);
        let st = initialize(&scn, &model);
        let aux = aux_at(&st, &scn, &model).unwrap();
        let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();
        let sol = solve_subproblem(&spec, &st, &scn, &SolverSettings::default()).unwrap();
        let exact = uplink_rates(&sol.state.uplink, &scn.h_up, &model.uplink).unwrap();
        let report = evaluate(&sol.state, &scn, &model).unwrap();
        for k in 0..4 {
            for m in 0..2 {
                assert!(sol.uplink_rate_vars[k][m] <= exact[k][m] + 1e-7, "seed {seed} user {k}");
            }
            assert!(sol.private_rate_vars[k] <= report.rd_p[k] + 1e-7);
        }
        // the subproblem's delays are therefore achievable
        assert!(report.total_time() <= sol.objective * (1.0 + 1e-6));
    }
}

#[test]
fn stale_auxiliaries_are_reported() {
    let scn = default_scenario(3, 5);
    let model = SchemeKind::RS_FOG.link_model(&scn);
    let st = initialize(&scn, &model);
    let mut aux = aux_at(&st, &scn, &model).unwrap();
    for y in &mut aux.y {
        *y = -*y;
    }
    let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();
    let x = spec.encode(&st, &scn).unwrap();
    assert!(spec.program.max_violation(&x).0 > 1e-3);
}

#[test]
fn uplink_cones_match_surrogate_away_from_expansion_point() {
    // the cones are written around the previous precoders; at any other
    // point they must still encode the explicit surrogate model
    let scn = default_scenario(4, 9);
    let model = SchemeKind::RS_FOG.link_model(&scn);
    let st = initialize(&scn, &model);
    let aux = aux_at(&st, &scn, &model).unwrap();
    let spec = assemble_subproblem(&scn, &model, &aux, &st).unwrap();

    let mut r = rng(99);
    let mut moved = st.clone();
    for wk in moved.uplink.w.iter_mut() {
        for w in wk.iter_mut() {
            *w = rand_mat(&mut r, w.nrows(), w.ncols(), 0.05);
        }
    }
    let x = spec.encode(&moved, &scn).unwrap();
    let cones: Vec<_> = spec
        .program
        .constraints
        .iter()
        .filter(|c| family::UPLINK_SURROGATE.contains(&c.family))
        .collect();
    let models = spec.uplink_surrogates();
    assert_eq!(cones.len(), models.len());
    for (cone, sm) in cones.iter().zip(models) {
        let s: Vec<f64> = cone.rows.iter().map(|row| row.eval(&x)).collect();
        let v = 0.5 * (s[0] + s[1]);
        let zz: f64 = s[2..].iter().map(|e| 0.25 * e * e).sum();
        let rate = x[spec.vars.r_up[sm.stream.user][sm.stream.split].unwrap()];
        let encoded = (v - zz) / std::f64::consts::LN_2 + rate;
        let want = sm.eval(&moved.uplink);
        assert!((encoded - want).abs() <= 1e-7 * (1.0 + want.abs()), "{:?}: {encoded} vs {want}", sm.stream);
    }
}
