mod common;

use chancust::analysis::{
    crossing_point, exp_integral_ei, se_bf_upper, se_db_upper, se_sm_approx, se_sm_upper, sym_func, ClosedFormParams,
};
use chancust::channel::{array_response, cascaded_decomposition, dirichlet_sum, wrap_angle, Subchannels};
use chancust::config::SystemConfig;
use chancust::customization::{build_customized_channel, select_paths_bf, select_paths_sm, Scheme};
use chancust::geometry::place_deployment;
use chancust::ris::RisConfiguration;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config() -> SystemConfig {
    SystemConfig {
        c_scale: 5e-8,
        ..SystemConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn array_responses_have_unit_norm(n in 1usize..300, y in -10.0f64..10.0) {
        prop_assert!((array_response(n, y).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_matches_explicit_inner_product(n in 1usize..250, a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let direct = array_response(n, a).dotc(&array_response(n, b));
        prop_assert!((direct - dirichlet_sum(n, b - a)).norm() < 1e-11);
    }

    #[test]
    fn wrap_angle_lands_in_principal_range(x in -100.0f64..100.0) {
        let w = wrap_angle(x);
        prop_assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
        let turns = (x - w) / std::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn composite_factorizes_exactly(seed in any::<u64>(), slopes in prop::collection::vec(-3.0f64..3.0, 4)) {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dep = place_deployment(&cfg, &mut rng).unwrap();
        let subs = Subchannels::draw(&cfg, &dep, &mut rng);
        let gammas: Vec<RisConfiguration> = (0..cfg.n_ris)
            .map(|k| RisConfiguration::aligned(k, dep.ris_element_counts[k], slopes[k], 0.0).with_common_phase(slopes[k] * 0.3))
            .collect();
        let d = cascaded_decomposition(&subs.tx_ris, &gammas, &subs.ris_rx, &dep).unwrap();
        let exact = chancust::channel::assemble_composite(&subs.tx_ris, &gammas, &subs.ris_rx, &dep).unwrap();
        prop_assert!((d.composite() - &exact).norm() < 1e-10 * exact.norm());
    }

    #[test]
    fn sm_approximation_below_upper_bound(c in prop::collection::vec(1e-4f64..1e3, 1..6)) {
        prop_assert!(se_sm_approx(&c).unwrap() < se_sm_upper(&c).unwrap());
        prop_assert!(se_sm_approx(&c).unwrap() >= 0.0);
    }

    #[test]
    fn ei_is_negative_and_increasing(x in -600.0f64..-1e-7, dx in 1e-6f64..1.0) {
        let a = exp_integral_ei(x).unwrap();
        prop_assert!(a < 0.0);
        if x + dx < 0.0 {
            prop_assert!(exp_integral_ei(x + dx).unwrap() < a);
        }
    }

    #[test]
    fn product_form_equals_symmetric_expansion(d in prop::collection::vec(1e-3f64..10.0, 1..=6), z in 1e-3f64..10.0) {
        let product: f64 = d.iter().map(|v| 1.0 + z * v).product();
        let expansion: f64 = 1.0 + (1..=d.len()).map(|n| z.powi(n as i32) * sym_func(&d, n).unwrap()).sum::<f64>();
        prop_assert!((product / expansion - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_point_scaling(n_tx in 2usize..64, c in 1e-7f64..1e-5, kappa in 0.5f64..50.0, k in 2usize..8) {
        let mut cfg = SystemConfig { n_tx, c_scale: c, rician_kappa: kappa, n_ris: k, n_rx: 2, ..SystemConfig::default() };
        let base = crossing_point(&ClosedFormParams::equal_scale(&cfg)).unwrap();
        cfg.n_tx *= 2;
        let wide = crossing_point(&ClosedFormParams::equal_scale(&cfg)).unwrap();
        cfg.n_tx = n_tx;
        cfg.c_scale *= 2.0;
        let big = crossing_point(&ClosedFormParams::equal_scale(&cfg)).unwrap();
        prop_assert!((wide / base - 0.5).abs() < 1e-12);
        prop_assert!((big / base - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bounds_monotone_in_kappa_and_paths(kappa in 0.1f64..100.0, l_r in 1usize..40, e in 1e-3f64..10.0) {
        let cfg = SystemConfig { rician_kappa: kappa, l_r, transmit_power: e, ..SystemConfig::default() };
        let p = ClosedFormParams::equal_scale(&cfg);
        let more_k = ClosedFormParams { kappa: kappa * 1.5, ..p.clone() };
        let more_l = ClosedFormParams { l_r: l_r + 1, ..p.clone() };
        for f in [
            |p: &ClosedFormParams| se_sm_upper(&p.c_values()).unwrap(),
            |p: &ClosedFormParams| se_bf_upper(p).unwrap(),
        ] {
            prop_assert!(f(&more_k) > f(&p));
            prop_assert!(f(&more_l) < f(&p));
        }
    }

    #[test]
    fn db_bound_gap_widens_with_slots(e in 1e-4f64..10.0, m in 1usize..8) {
        let cfg = SystemConfig { transmit_power: e, ..SystemConfig::default() };
        let p = ClosedFormParams::equal_scale(&cfg);
        let bf = se_bf_upper(&p).unwrap();
        let a = se_db_upper(&p, m).unwrap();
        let b = se_db_upper(&p, m + 1).unwrap();
        prop_assert!(a <= bf + 1e-12);
        prop_assert!(bf - b > bf - a);
    }

    #[test]
    fn selection_matches_brute_force(
        seed in any::<u64>(),
        k in 1usize..=3,
        l_r in 1usize..=4,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cands: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..l_r).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect())
            .collect();
        let n_rx = rng.random_range(1..=k);
        let sm = select_paths_sm(&cands, n_rx).unwrap();
        let (ris, paths, value) = common::brute_force_sm(&cands, n_rx);
        prop_assert_eq!(&sm.active_ris, &ris);
        prop_assert_eq!(&sm.slots[0], &paths);
        prop_assert!((sm.objective_value() - value).abs() < 1e-9);
        let bf = select_paths_bf(&cands, 4).unwrap();
        let (_, paths, _) = common::brute_force_bf(&cands, 4);
        prop_assert_eq!(&bf.slots[0], &paths);
    }

    #[test]
    fn customized_channels_keep_transmit_power(seed in any::<u64>()) {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dep = place_deployment(&cfg, &mut rng).unwrap();
        let subs = Subchannels::draw(&cfg, &dep, &mut rng);
        let sel = select_paths_sm(&subs.rx_arrivals(), cfg.n_rx).unwrap();
        let c = build_customized_channel(&sel, 0, &subs, &subs, &dep, false).unwrap();
        let tt = c.t_active.adjoint() * &c.t_active;
        let eye = nalgebra::DMatrix::identity(cfg.n_rx, cfg.n_rx);
        prop_assert!((tt - eye).norm() < 1e-12);
        for col in c.r_active.column_iter() {
            prop_assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scheme_labels_round_trip(m in 1usize..20, which in 0usize..4) {
        let s = [Scheme::Sm, Scheme::Bf, Scheme::Ds(Some(m)), Scheme::Db(Some(m))][which];
        prop_assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
    }

    #[test]
    fn config_dump_round_trips(n_tx in 4usize..64, kappa in 0.0f64..100.0, seed in any::<u64>(), noise in 1e-16f64..1e-9) {
        let cfg = SystemConfig { n_tx, rician_kappa: kappa, rng_seed: seed, noise_power: noise, ..SystemConfig::default() };
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
