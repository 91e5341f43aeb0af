//! Statistical scenarios on the default deployment.

use chancust::channel::{array_response, Subchannels};
use chancust::config::SystemConfig;
use chancust::customization::{build_customized_channel, select_paths_bf, select_paths_sm, Scheme};
use chancust::geometry::{deployment_at, RX_CENTER};
use chancust::montecarlo::{
    estimate_ber, estimate_ergodic_se, estimate_outage, AngleEpoch, AxisName, SweepAxis, TrialPlan,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn power_axis(values: &[f64]) -> SweepAxis {
    SweepAxis::new(AxisName::TransmitPowerDbm, values.to_vec()).unwrap()
}

fn small_plan(axis: SweepAxis, schemes: &[Scheme], seed: u64, angles: usize, fading: usize) -> TrialPlan {
    let mut p = TrialPlan::new(axis, schemes.to_vec(), seed);
    p.n_angle_epochs = angles;
    p.n_fading_epochs = fading;
    p
}

#[test]
fn subchannel_energy_matches_normalization() {
    let cfg = SystemConfig::default();
    let dep = deployment_at(&cfg, RX_CENTER).unwrap();
    let draws = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut tx = vec![0.0; cfg.n_ris];
    let mut rx = vec![0.0; cfg.n_ris];
    for _ in 0..draws {
        let s = Subchannels::draw(&cfg, &dep, &mut rng);
        for k in 0..cfg.n_ris {
            tx[k] += s.tx_ris[k].to_matrix().norm_squared();
            rx[k] += s.ris_rx[k].to_matrix().norm_squared();
        }
    }
    for k in 0..cfg.n_ris {
        let n_s = dep.ris_element_counts[k] as f64;
        let t = tx[k] / draws as f64 / (cfg.n_tx as f64 * n_s);
        let r = rx[k] / draws as f64 / (cfg.n_rx as f64 * n_s);
        assert!((t - 1.0).abs() < 0.02, "tx-ris {k}: {t}");
        assert!((r - 1.0).abs() < 0.02, "ris-rx {k}: {r}");
    }
}

#[test]
fn strong_rician_factor_leaves_the_los_term() {
    let cfg = SystemConfig {
        rician_kappa: 1e12,
        ..SystemConfig::default()
    };
    let dep = deployment_at(&cfg, RX_CENTER).unwrap();
    let s = Subchannels::draw(&cfg, &dep, &mut ChaCha8Rng::seed_from_u64(3));
    for (k, ch) in s.tx_ris.iter().enumerate() {
        let h = ch.to_matrix();
        let los = &ch.paths[0];
        let scale = ((cfg.n_tx * dep.ris_element_counts[k]) as f64).sqrt();
        let a_s = array_response(ch.rows, los.aoa);
        let a_t = array_response(ch.cols, los.aod);
        let ideal = (&a_s * a_t.adjoint()).map(|v| v * scale);
        assert!((&h - &ideal).norm() / ideal.norm() < 1e-5);
    }
}

fn leakage_ratios(cfg: &SystemConfig, draws: u64) -> Vec<f64> {
    (0..draws)
        .map(|e| {
            let ae = AngleEpoch::draw(cfg, 77, e).unwrap();
            let sel = select_paths_sm(&ae.design.rx_arrivals(), cfg.n_rx).unwrap();
            let c = build_customized_channel(&sel, 0, &ae.design, &ae.truth, &ae.deployment, false).unwrap();
            (&c.exact_h - c.approximation()).norm() / c.exact_h.norm()
        })
        .collect()
}

#[test]
fn inactive_paths_leak_little_and_less_with_larger_surfaces() {
    let cfg = SystemConfig::default();
    let base = leakage_ratios(&cfg, 1000);
    let small = base.iter().filter(|&&r| r < 0.2).count();
    assert!(small >= 900, "{small} of 1000 below 0.2");

    let big = SystemConfig {
        c_scale: 4.0 * cfg.c_scale,
        ..cfg
    };
    let larger = leakage_ratios(&big, 300);
    let (m0, m1) = (median(base[..300].to_vec()), median(larger));
    assert!(m1 < m0, "median {m0} -> {m1}");
}

#[test]
fn multiplexing_channel_is_close_to_diagonal() {
    let cfg = SystemConfig::default();
    let mut errs = Vec::new();
    for e in 0..500 {
        let ae = AngleEpoch::draw(&cfg, 5, e).unwrap();
        let sel = select_paths_sm(&ae.design.rx_arrivals(), cfg.n_rx).unwrap();
        let c = build_customized_channel(&sel, 0, &ae.design, &ae.truth, &ae.deployment, false).unwrap();
        let amp = (cfg.transmit_power / cfg.n_rx as f64).sqrt();
        let f = c.t_active.map(|v| v * amp);
        let eff = c.r_active.adjoint() * &c.exact_h * f;
        let ideal = DMatrix::from_diagonal(&DVector::from_vec(c.xi_active.clone())).map(|v| v * amp);
        errs.push((eff - &ideal).norm() / ideal.norm());
    }
    let m = median(errs);
    assert!(m < 0.25, "median relative error {m}");
}

fn beam_gain(c: &chancust::customization::CustomizedChannel, e: f64) -> f64 {
    let k = c.t_active.ncols();
    let ones = DVector::from_element(k, Complex64::new(1.0, 0.0));
    let f = (&c.t_active * ones).map(|v| v * (e / k as f64).sqrt());
    (&c.exact_h * f).norm_squared()
}

#[test]
fn common_phase_refinement_adds_coherent_gain() {
    let cfg = SystemConfig::default();
    let (mut on, mut off) = (0.0, 0.0);
    for e in 0..500 {
        let ae = AngleEpoch::draw(&cfg, 9, e).unwrap();
        let sel = select_paths_bf(&ae.design.rx_arrivals(), cfg.n_ris).unwrap();
        let plain = build_customized_channel(&sel, 0, &ae.design, &ae.truth, &ae.deployment, false).unwrap();
        let refined = build_customized_channel(&sel, 0, &ae.design, &ae.truth, &ae.deployment, true).unwrap();
        for (a, b) in plain.xi_active.iter().zip(&refined.xi_active) {
            assert!((a.norm() - b.norm()).abs() <= 1e-9 * a.norm());
        }
        off += beam_gain(&plain, cfg.transmit_power);
        on += beam_gain(&refined, cfg.transmit_power);
    }
    assert!(on > 1.5 * off, "refined {on} vs plain {off}");
}

#[test]
fn diversity_lowers_outage() {
    let cfg = SystemConfig::default();
    let schemes = [Scheme::Sm, Scheme::Ds(Some(2)), Scheme::Bf, Scheme::Db(Some(2))];
    let plan = small_plan(power_axis(&[10.0, 20.0]), &schemes, 11, 100, 5);
    let res = estimate_outage(&plan, &cfg).unwrap();
    for e in [10.0, 20.0] {
        let p = |s| res.row(e, s).unwrap().mean;
        assert!(p(Scheme::Ds(Some(2))) <= p(Scheme::Sm), "DS vs SM at {e}");
        assert!(p(Scheme::Db(Some(2))) <= p(Scheme::Bf), "DB vs BF at {e}");
    }
}

/// At high power more slots cost SE through the 1/M_R prefactor. The low
/// power side is only reported: on this channel model DS stays below SM
/// there as well.
#[test]
fn diversity_slots_trade_rate_at_high_power() {
    let cfg = SystemConfig::default();
    let schemes = [Scheme::Ds(Some(1)), Scheme::Ds(Some(2)), Scheme::Ds(Some(3))];
    let plan = small_plan(power_axis(&[0.0, 40.0]), &schemes, 13, 100, 5);
    let res = estimate_ergodic_se(&plan, &cfg).unwrap();
    let se = |e, s| res.row(e, s).unwrap().mean;
    assert!(se(40.0, schemes[0]) > se(40.0, schemes[1]));
    assert!(se(40.0, schemes[1]) > se(40.0, schemes[2]));
    eprintln!(
        "low power DS SE for M_R = 1, 2, 3: {:.5} {:.5} {:.5}",
        se(0.0, schemes[0]),
        se(0.0, schemes[1]),
        se(0.0, schemes[2])
    );
}

#[test]
fn angle_error_costs_more_at_high_power() {
    let mut gaps = Vec::new();
    for e_dbm in [10.0, 30.0] {
        let mut cfg = SystemConfig::default();
        AxisName::TransmitPowerDbm.apply(&mut cfg, e_dbm).unwrap();
        let axis = SweepAxis::new(AxisName::SigmaE, vec![0.0, 0.05]).unwrap();
        let plan = small_plan(axis, &[Scheme::Sm, Scheme::Bf], 17, 60, 5);
        let res = estimate_ergodic_se(&plan, &cfg).unwrap();
        for s in [Scheme::Sm, Scheme::Bf] {
            let clean = res.row(0.0, s).unwrap().mean;
            let noisy = res.row(0.05, s).unwrap().mean;
            assert!(noisy <= clean, "{s} at {e_dbm} dBm: {noisy} > {clean}");
            gaps.push(clean - noisy);
        }
    }
    assert!(gaps[2] > gaps[0] && gaps[3] > gaps[1], "gaps {gaps:?}");
}

#[test]
fn noiseless_beamforming_sweeps_are_error_free() {
    let cfg = SystemConfig {
        noise_power: 0.0,
        ..SystemConfig::default()
    };
    let mut plan = small_plan(power_axis(&[0.0, 20.0]), &[Scheme::Bf, Scheme::Db(Some(2))], 19, 10, 2);
    plan.min_bits = 20_000;
    let res = estimate_ber(&plan, &cfg).unwrap();
    assert!(res.rows.iter().all(|r| r.mean == 0.0 && r.count >= 20_000));
}

#[test]
fn four_times_the_bits_halves_the_interval() {
    let cfg = SystemConfig::default();
    let width = |bits: u64| {
        let mut plan = small_plan(power_axis(&[20.0]), &[Scheme::Sm], 23, 20, 2);
        plan.min_bits = bits;
        let r = estimate_ber(&plan, &cfg).unwrap().rows[0].clone();
        let (lo, hi) = r.interval.unwrap();
        (hi - lo, r.count)
    };
    let (w1, n1) = width(50_000);
    let (w2, n2) = width(100_000);
    let (w4, n4) = width(200_000);
    assert!(n2 >= 2 * n1 - n1 / 50 && n4 >= 4 * n1 - n1 / 50);
    let r2 = w2 / w1;
    let r4 = w4 / w1;
    assert!((r2 - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.07, "doubling ratio {r2}");
    assert!((r4 - 0.5).abs() < 0.06, "quadrupling ratio {r4}");
}
