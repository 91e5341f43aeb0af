//! Precoders, combiners and per-realization metrics of the four schemes.
//!
//! All metrics are evaluated on the exact composite channel of each
//! reconfiguration; the customized structure only shapes the transceiver.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::complex_normal;
use crate::config::SystemConfig;
use crate::customization::{CustomizedChannel, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub se_bits_per_hz: f64,
    /// Per-stream SNR after combining (one entry for BF/DB).
    pub post_combine_snr: Vec<f64>,
    /// Minimum-stream SNR fell below the threshold.
    pub outage: bool,
    pub bit_errors: u64,
    pub bits_sent: u64,
}

impl SchemeResult {
    pub fn min_snr(&self) -> f64 {
        self.post_combine_snr.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ber(&self) -> Option<f64> {
        (self.bits_sent > 0).then(|| self.bit_errors as f64 / self.bits_sent as f64)
    }
}

/// `log2 det(I + A)` for Hermitian positive semidefinite `A`.
pub fn log2_det_identity_plus(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let m = DMatrix::<Complex64>::identity(n, n) + a;
    match m.clone().cholesky() {
        Some(ch) => 2.0 * ch.l().diagonal().iter().map(|d| d.re.ln()).sum::<f64>() / LN_2,
        None => m.lu().determinant().norm().ln() / LN_2,
    }
}

/// Multiplexing transceiver shared by SM and DS: precoder, per-slot
/// combiners and the combined effective channel `G`.
struct MultiplexLink {
    precoder: DMatrix<Complex64>,
    combiners: Vec<DMatrix<Complex64>>,
    effective: DMatrix<Complex64>,
}

fn multiplex_link(customs: &[CustomizedChannel], config: &SystemConfig) -> Result<MultiplexLink> {
    let first = check_slots(customs)?;
    let streams = first.xi_active.len();
    let precoder = first.t_active.map(|v| v * (config.transmit_power / streams as f64).sqrt());
    let coherent = customs.len() > 1;
    let mut combiners = Vec::with_capacity(customs.len());
    let mut effective = DMatrix::<Complex64>::zeros(streams, streams);
    for c in customs {
        let mut w = c.r_active.clone();
        let g = w.adjoint() * &c.exact_h * &precoder;
        if coherent {
            // Rotate each combiner column so its stream adds in phase across slots.
            for k in 0..streams {
                let diag = g[(k, k)];
                if diag.norm() > 0.0 {
                    let rot = diag / diag.norm();
                    let mut col = w.column_mut(k);
                    col *= rot;
                }
            }
            effective += w.adjoint() * &c.exact_h * &precoder;
        } else {
            effective += g;
        }
        combiners.push(w);
    }
    Ok(MultiplexLink {
        precoder,
        combiners,
        effective,
    })
}

/// Beamforming transceiver shared by BF and DB.
struct BeamLink {
    #[cfg_attr(not(test), allow(dead_code))]
    precoder: DVector<Complex64>,
    /// `H_m f` of every slot.
    received: Vec<DVector<Complex64>>,
}

fn beam_link(customs: &[CustomizedChannel], config: &SystemConfig) -> Result<BeamLink> {
    let first = check_slots(customs)?;
    let k = first.xi_active.len();
    let ones = DVector::from_element(k, Complex64::new(1.0, 0.0));
    let precoder = (&first.t_active * ones) * Complex64::new((config.transmit_power / k as f64).sqrt(), 0.0);
    let received = customs.iter().map(|c| &c.exact_h * &precoder).collect();
    Ok(BeamLink { precoder, received })
}

fn check_slots(customs: &[CustomizedChannel]) -> Result<&CustomizedChannel> {
    let first = customs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("at least one reconfiguration is required".into()))?;
    if customs.iter().any(|c| {
        c.xi_active.len() != first.xi_active.len()
            || c.exact_h.shape() != first.exact_h.shape()
            || c.t_active != first.t_active
    }) {
        return Err(Error::DimensionMismatch(
            "reconfigurations must share the active RIS set and Tx responses".into(),
        ));
    }
    Ok(first)
}

fn multiplex_result(scheme: Scheme, customs: &[CustomizedChannel], config: &SystemConfig, gamma_th: f64) -> Result<SchemeResult> {
    let link = multiplex_link(customs, config)?;
    let m = customs.len() as f64;
    let noise = m * config.noise_power;
    let g = &link.effective;
    let se = log2_det_identity_plus(&((g * g.adjoint()) / Complex64::new(noise, 0.0))) / m;
    let streams = g.nrows();
    let snr: Vec<f64> = (0..streams)
        .map(|k| {
            let amp: f64 = customs.iter().map(|c| c.xi_active[k].norm()).sum();
            amp * amp * config.transmit_power / (streams as f64 * noise)
        })
        .collect();
    Ok(finish(scheme, se.max(0.0), snr, gamma_th))
}

fn beam_result(scheme: Scheme, customs: &[CustomizedChannel], config: &SystemConfig, gamma_th: f64) -> Result<SchemeResult> {
    let link = beam_link(customs, config)?;
    let m = customs.len() as f64;
    let power: f64 = link.received.iter().map(|v| v.norm_squared()).sum();
    let snr = power / config.noise_power;
    Ok(finish(scheme, snr.ln_1p() / LN_2 / m, vec![snr], gamma_th))
}

fn finish(scheme: Scheme, se: f64, snr: Vec<f64>, gamma_th: f64) -> SchemeResult {
    let outage = snr.iter().any(|&s| s < gamma_th);
    SchemeResult {
        scheme,
        se_bits_per_hz: se,
        post_combine_snr: snr,
        outage,
        bit_errors: 0,
        bits_sent: 0,
    }
}

/// SVD-form spatial multiplexing over one customized channel.
pub fn run_sm(custom: &CustomizedChannel, config: &SystemConfig, gamma_th: f64) -> Result<SchemeResult> {
    multiplex_result(Scheme::Sm, std::slice::from_ref(custom), config, gamma_th)
}

/// Single-stream beamforming with MRC reception.
pub fn run_bf(custom: &CustomizedChannel, config: &SystemConfig, gamma_th: f64) -> Result<SchemeResult> {
    beam_result(Scheme::Bf, std::slice::from_ref(custom), config, gamma_th)
}

/// Spatial multiplexing with one reconfiguration per entry of `customs`.
pub fn run_ds(customs: &[CustomizedChannel], config: &SystemConfig, gamma_th: f64) -> Result<SchemeResult> {
    multiplex_result(Scheme::Ds(Some(customs.len())), customs, config, gamma_th)
}

/// Beamforming with one reconfiguration per entry of `customs`.
pub fn run_db(customs: &[CustomizedChannel], config: &SystemConfig, gamma_th: f64) -> Result<SchemeResult> {
    beam_result(Scheme::Db(Some(customs.len())), customs, config, gamma_th)
}

/// Dispatches on `scheme`. SM and BF use the first reconfiguration only.
pub fn run_scheme(scheme: Scheme, customs: &[CustomizedChannel], config: &SystemConfig, gamma_th: f64) -> Result<SchemeResult> {
    let first = customs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("at least one reconfiguration is required".into()))?;
    match scheme {
        Scheme::Sm => run_sm(first, config, gamma_th),
        Scheme::Bf => run_bf(first, config, gamma_th),
        Scheme::Ds(_) => run_ds(customs, config, gamma_th),
        Scheme::Db(_) => run_db(customs, config, gamma_th),
    }
}

/// Gray-mapped unit-energy QPSK.
pub fn qpsk_symbol(b0: bool, b1: bool) -> Complex64 {
    let re = if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    let im = if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

fn qpsk_errors(b0: bool, b1: bool, decision: Complex64) -> u64 {
    u64::from((decision.re < 0.0) != b0) + u64::from((decision.im < 0.0) != b1)
}

fn noise_vector<R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| complex_normal(rng) * std)
}

/// Sends `symbols` QPSK symbol vectors through the exact channel and counts
/// bit errors. Slots of DS/DB are combined coherently before detection.
///
/// The SE and SNR fields are filled in as for [`run_scheme`] when the noise
/// power is positive, and set to infinity otherwise.
pub fn ber_trial<R: Rng + ?Sized>(
    scheme: Scheme,
    customs: &[CustomizedChannel],
    config: &SystemConfig,
    symbols: u64,
    gamma_th: f64,
    rng: &mut R,
) -> Result<SchemeResult> {
    if symbols == 0 {
        return Err(Error::InvalidArgument("symbol count must be at least 1".into()));
    }
    let customs = match scheme {
        Scheme::Sm | Scheme::Bf => &customs[..customs.len().min(1)],
        _ => customs,
    };
    let mut result = if config.noise_power > 0.0 {
        run_scheme(scheme, customs, config, gamma_th)?
    } else {
        check_slots(customs)?;
        let streams = if scheme.is_multiplexing() { customs[0].xi_active.len() } else { 1 };
        finish(scheme, f64::INFINITY, vec![f64::INFINITY; streams], gamma_th)
    };
    if let Scheme::Ds(_) | Scheme::Db(_) = scheme {
        result.scheme = match scheme {
            Scheme::Ds(_) => Scheme::Ds(Some(customs.len())),
            _ => Scheme::Db(Some(customs.len())),
        };
    }
    let std = config.noise_power.sqrt();
    let n_rx = customs[0].exact_h.nrows();
    let mut errors = 0u64;
    let mut bits = 0u64;
    if scheme.is_multiplexing() {
        let link = multiplex_link(customs, config)?;
        let streams = link.effective.nrows();
        let channels: Vec<DMatrix<Complex64>> = customs.iter().map(|c| &c.exact_h * &link.precoder).collect();
        let detect: Vec<Complex64> = (0..streams).map(|k| link.effective[(k, k)].conj()).collect();
        let mut tx_bits = vec![(false, false); streams];
        for _ in 0..symbols {
            for b in tx_bits.iter_mut() {
                *b = (rng.random::<bool>(), rng.random::<bool>());
            }
            let s = DVector::from_iterator(streams, tx_bits.iter().map(|&(a, b)| qpsk_symbol(a, b)));
            let mut z = DVector::<Complex64>::zeros(streams);
            for (hf, w) in channels.iter().zip(&link.combiners) {
                let y = hf * &s + noise_vector(n_rx, std, rng);
                z += w.adjoint() * y;
            }
            for (k, &(b0, b1)) in tx_bits.iter().enumerate() {
                errors += qpsk_errors(b0, b1, z[k] * detect[k]);
            }
            bits += 2 * streams as u64;
        }
    } else {
        let link = beam_link(customs, config)?;
        for _ in 0..symbols {
            let (b0, b1) = (rng.random::<bool>(), rng.random::<bool>());
            let s = qpsk_symbol(b0, b1);
            let mut z = Complex64::new(0.0, 0.0);
            for hf in &link.received {
                let y = hf * s + noise_vector(n_rx, std, rng);
                z += hf.dotc(&y);
            }
            errors += qpsk_errors(b0, b1, z);
            bits += 2;
        }
    }
    result.bit_errors = errors;
    result.bits_sent = bits;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Subchannels;
    use crate::customization::{build_all_slots, select_for_scheme, DEFAULT_SEARCH_CAP};
    use crate::geometry::{deployment_at, Deployment, RX_CENTER};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (SystemConfig, Deployment, Subchannels) {
        let cfg = SystemConfig::default();
        let dep = deployment_at(&cfg, RX_CENTER).unwrap();
        let subs = Subchannels::draw(&cfg, &dep, &mut ChaCha8Rng::seed_from_u64(seed));
        (cfg, dep, subs)
    }

    fn customs(scheme: Scheme, cfg: &SystemConfig, dep: &Deployment, subs: &Subchannels) -> Vec<CustomizedChannel> {
        let sel = select_for_scheme(&subs.rx_arrivals(), scheme, cfg.m_r, cfg.n_rx, DEFAULT_SEARCH_CAP).unwrap();
        build_all_slots(&sel, subs, subs, dep).unwrap()
    }

    #[test]
    fn log_det_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)]));
        assert!((log2_det_identity_plus(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_constraint_holds() {
        let (cfg, dep, subs) = setup(1);
        let c = customs(Scheme::Sm, &cfg, &dep, &subs);
        let link = multiplex_link(&c, &cfg).unwrap();
        let s = DVector::from_element(cfg.n_rx, qpsk_symbol(true, false));
        assert!(((&link.precoder * s).norm_squared() - cfg.transmit_power).abs() < 1e-9 * cfg.transmit_power);
        for w in &link.combiners {
            for col in w.column_iter() {
                assert!((col.norm() - 1.0).abs() < 1e-12);
            }
        }
        let b = customs(Scheme::Bf, &cfg, &dep, &subs);
        let link = beam_link(&b, &cfg).unwrap();
        assert!((link.precoder.norm_squared() - cfg.transmit_power).abs() < 1e-9 * cfg.transmit_power);
    }

    #[test]
    fn single_slot_diversity_is_identical() {
        let (cfg, dep, subs) = setup(2);
        let sm = customs(Scheme::Sm, &cfg, &dep, &subs);
        let ds = customs(Scheme::Ds(Some(1)), &cfg, &dep, &subs);
        let a = run_sm(&sm[0], &cfg, 10.0).unwrap();
        let b = run_ds(&ds, &cfg, 10.0).unwrap();
        assert_eq!(a.se_bits_per_hz.to_bits(), b.se_bits_per_hz.to_bits());
        assert_eq!(a.post_combine_snr, b.post_combine_snr);
        let bf = customs(Scheme::Bf, &cfg, &dep, &subs);
        let db = customs(Scheme::Db(Some(1)), &cfg, &dep, &subs);
        let a = run_bf(&bf[0], &cfg, 10.0).unwrap();
        let b = run_db(&db, &cfg, 10.0).unwrap();
        assert_eq!(a.se_bits_per_hz.to_bits(), b.se_bits_per_hz.to_bits());
    }

    #[test]
    fn se_vanishes_with_huge_noise_and_grows_with_power() {
        let (mut cfg, dep, subs) = setup(3);
        for scheme in [Scheme::Sm, Scheme::Bf, Scheme::Ds(Some(2)), Scheme::Db(Some(2))] {
            let c = customs(scheme, &cfg, &dep, &subs);
            let mut last = 0.0;
            for dbm in [-10.0, 0.0, 10.0, 20.0, 30.0] {
                cfg.transmit_power = crate::config::dbm_to_watts(dbm);
                let r = run_scheme(scheme, &c, &cfg, 1.0).unwrap();
                assert!(r.se_bits_per_hz > last, "{scheme} at {dbm}");
                last = r.se_bits_per_hz;
            }
            cfg.transmit_power = 1e-30;
            assert!(run_scheme(scheme, &c, &cfg, 1.0).unwrap().se_bits_per_hz < 1e-10);
            cfg.transmit_power = 0.1;
        }
    }

    #[test]
    fn db_never_beats_bf_on_a_realization() {
        let (cfg, dep, subs) = setup(4);
        let bf = run_bf(&customs(Scheme::Bf, &cfg, &dep, &subs)[0], &cfg, 1.0).unwrap();
        let mut gap = 0.0;
        for m in 2..=4 {
            let db = run_db(&customs(Scheme::Db(Some(m)), &cfg, &dep, &subs), &cfg, 1.0).unwrap();
            assert!(db.se_bits_per_hz <= bf.se_bits_per_hz);
            assert!(bf.se_bits_per_hz - db.se_bits_per_hz > gap);
            gap = bf.se_bits_per_hz - db.se_bits_per_hz;
        }
    }

    #[test]
    fn ds_snr_scaling_in_slots() {
        let (cfg, dep, subs) = setup(5);
        let c = customs(Scheme::Ds(Some(3)), &cfg, &dep, &subs);
        let r = run_ds(&c, &cfg, 1.0).unwrap();
        for k in 0..cfg.n_rx {
            let amp: f64 = c.iter().map(|x| x.xi_active[k].norm()).sum();
            let want = amp * amp * cfg.transmit_power / (cfg.n_rx as f64 * 3.0 * cfg.noise_power);
            assert!((r.post_combine_snr[k] / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn outage_threshold() {
        let (cfg, dep, subs) = setup(6);
        let c = customs(Scheme::Bf, &cfg, &dep, &subs);
        assert!(!run_bf(&c[0], &cfg, 0.0).unwrap().outage);
        assert!(run_bf(&c[0], &cfg, f64::INFINITY).unwrap().outage);
    }

    #[test]
    fn noiseless_beamforming_is_error_free() {
        let (mut cfg, dep, subs) = setup(7);
        cfg.noise_power = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scheme in [Scheme::Bf, Scheme::Db(Some(2))] {
            let c = customs(scheme, &cfg, &dep, &subs);
            let r = ber_trial(scheme, &c, &cfg, 500, 1.0, &mut rng).unwrap();
            assert_eq!(r.bit_errors, 0);
            assert_eq!(r.bits_sent, 1000);
        }
    }

    #[test]
    fn ber_trial_is_reproducible() {
        let (cfg, dep, subs) = setup(8);
        let c = customs(Scheme::Ds(Some(2)), &cfg, &dep, &subs);
        let a = ber_trial(Scheme::Ds(Some(2)), &c, &cfg, 300, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = ber_trial(Scheme::Ds(Some(2)), &c, &cfg, 300, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bits_sent, 300 * 2 * cfg.n_rx as u64);
        assert!(ber_trial(Scheme::Sm, &c, &cfg, 0, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }
}
