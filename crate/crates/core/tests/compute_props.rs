
use proptest::prelude::*;
use rsfog::compute::{
    energy_constraint_terms, local_cost, local_time_constraint_terms, optimal_local_frequency, server_cost,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Points meeting the convexified server-energy constraint meet the true
    /// budget `sum E_s <= P_b T^p` with `T^p` the true processing time.
    #[test]
    fn convexified_energy_is_conservative(
        betas in proptest::collection::vec(0.0f64..0.999, 1..6),
        fracs in proptest::collection::vec(0.01f64..1.0, 6),
        prev in proptest::collection::vec(0.01f64..1.0, 6),
        log_pb in -3.0f64..1.0,
    ) {
        let k = betas.len();
        let (kappa, omega, l, fb) = (1e-24, 297.2, 3e6, 1e9);
        let pb = 10f64.powf(log_pb);
        let ft = vec![optimal_local_frequency(0.01, kappa, 3e6); k];
        let f: Vec<f64> = fracs[..k].iter().map(|x| x * fb / k as f64).collect();
        let fp: Vec<f64> = prev[..k].iter().map(|x| x * fb / k as f64).collect();
        let terms = energy_constraint_terms(&ft, &fp, kappa);
        let convex: f64 = (0..k).map(|i| terms[i].eval(f[i], betas[i]).unwrap()).sum();
        if convex <= pb {
            let mut es = 0.0;
            let mut tp: f64 = 0.0;
            for i in 0..k {
                let (ts, e) = server_cost(betas[i], l, omega, f[i], kappa).unwrap();
                let (tl, _) = local_cost(betas[i], l, omega, ft[i], kappa).unwrap();
                es += e;
                tp = tp.max(ts).max(tl);
            }
            prop_assert!(es <= pb * tp * (1.0 + 1e-12));
        }
    }

    /// The linearized local-time bound dominates the true local time.
    #[test]
    fn local_time_bound_dominates(bp in 0.0f64..0.999, b in 0.0f64..0.999, l in 1e6f64..5e6) {
        let t = local_time_constraint_terms(&[bp], &[3e6], &[l], &[297.2]);
        let (exact, _) = local_cost(b, l, 297.2, 3e6, 1e-24).unwrap();
        prop_assert!(t[0].eval(b) >= exact - 1e-9 * exact.max(1.0));
    }

    /// The closed-form local frequency meets both caps with one of them tight.
    #[test]
    fn local_frequency_meets_caps(log_p in -4.0f64..1.0, log_f in 5.0f64..9.0) {
        let (p, cap, kappa) = (10f64.powf(log_p), 10f64.powf(log_f), 1e-24);
        let f = optimal_local_frequency(p, kappa, cap);
        prop_assert!(f <= cap);
        prop_assert!(kappa * f.powi(3) <= p * (1.0 + 1e-12));
        let tight = (f - cap).abs() <= 1e-12 * cap || (kappa * f.powi(3) - p).abs() <= 1e-9 * p;
        prop_assert!(tight);
    }
}

#[test]
fn taylor_exact_at_expansion_point() {
    let ft = [3e6, 2e6];
    let fp = [1.1e8, 4e7];
    let terms = energy_constraint_terms(&ft, &fp, 1e-24);
    for (i, t) in terms.iter().enumerate() {
        for beta in [0.0, 0.4, 0.95] {
            let v = t.eval(fp[i], beta).unwrap();
            assert!((v - t.exact(fp[i], beta)).abs() <= 1e-12 * t.exact(fp[i], beta).max(1e-30));
        }
    }
}
