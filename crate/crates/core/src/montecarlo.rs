//! Ergodic estimation over angle epochs and fading epochs.
//!
//! Randomness is split into independent ChaCha streams keyed by
//! `(angle epoch, fading epoch, purpose)`. Grid points reuse the same
//! streams, so curves along a sweep axis see common random numbers, and
//! results do not depend on how trials are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::{se_bf_upper, se_db_upper, se_sm_approx, se_sm_upper, ClosedFormParams};
use crate::channel::{wrap_angle, LinkKind, MultipathChannel, Subchannels};
use crate::config::{db_to_linear, dbm_to_watts, SystemConfig};
use crate::customization::{build_all_slots, select_for_scheme, PathSelection, Scheme, DEFAULT_SEARCH_CAP};
use crate::error::{Error, Result};
use crate::geometry::{place_deployment, Deployment};
use crate::transceiver::{ber_trial, run_scheme, SchemeResult};

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Placement,
    Angles,
    AngleError,
    Fading,
    BerNoise,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Placement => 1,
            Purpose::Angles => 2,
            Purpose::AngleError => 3,
            Purpose::Fading => 4,
            Purpose::BerNoise => 5,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one `(angle epoch, fading epoch, purpose)`.
pub fn stream_rng(base_seed: u64, angle_epoch: u64, fading_epoch: u64, purpose: Purpose) -> ChaCha8Rng {
    let id = splitmix64(splitmix64(splitmix64(angle_epoch) ^ fading_epoch) ^ purpose.tag());
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Data-parallel over trials; sequential when the `parallel` feature is off.
    #[default]
    Parallel,
}

/// Maps `f` over `0..n`, preserving order.
pub fn par_map<T, F>(execution: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Sequential stand-in when parallelism is compiled out.
#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

/// Perturbs every spatial frequency of a RIS-Rx channel by real Gaussian
/// noise of standard deviation `sigma_e`. Tx-RIS channels are returned as is.
pub fn inject_angle_error<R: Rng + ?Sized>(channel: &MultipathChannel, sigma_e: f64, rng: &mut R) -> Result<MultipathChannel> {
    if !(sigma_e >= 0.0) || !sigma_e.is_finite() {
        return Err(Error::InvalidArgument(format!("angle error std must be >= 0, got {sigma_e}")));
    }
    let mut out = channel.clone();
    if sigma_e == 0.0 || channel.kind != LinkKind::RisToRx {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma_e).expect("finite positive std");
    for p in out.paths.iter_mut() {
        p.aoa = wrap_angle(p.aoa + normal.sample(rng));
        p.aod = wrap_angle(p.aod + normal.sample(rng));
    }
    Ok(out)
}

/// Parameter swept along a grid. Power axes are in dBm and ratio axes in
/// dB, converted on application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisName {
    TransmitPowerDbm,
    NoisePowerDbm,
    KappaDb,
    LR,
    LT,
    NTx,
    NRx,
    MR,
    SigmaE,
    CScale,
}

impl AxisName {
    pub const ALL: [AxisName; 10] = [
        AxisName::TransmitPowerDbm,
        AxisName::NoisePowerDbm,
        AxisName::KappaDb,
        AxisName::LR,
        AxisName::LT,
        AxisName::NTx,
        AxisName::NRx,
        AxisName::MR,
        AxisName::SigmaE,
        AxisName::CScale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::TransmitPowerDbm => "E_dBm",
            AxisName::NoisePowerDbm => "noise_dBm",
            AxisName::KappaDb => "kappa_dB",
            AxisName::LR => "l_r",
            AxisName::LT => "l_t",
            AxisName::NTx => "n_tx",
            AxisName::NRx => "n_rx",
            AxisName::MR => "m_r",
            AxisName::SigmaE => "sigma_e",
            AxisName::CScale => "c_scale",
        }
    }

    fn is_integral(self) -> bool {
        matches!(self, AxisName::LR | AxisName::LT | AxisName::NTx | AxisName::NRx | AxisName::MR)
    }

    /// Writes `value` (display units) into `config`.
    pub fn apply(self, config: &mut SystemConfig, value: f64) -> Result<()> {
        if self.is_integral() && (value.fract() != 0.0 || value < 0.0) {
            return Err(Error::Config(format!("{} needs non-negative integers, got {value}", self.as_str())));
        }
        match self {
            AxisName::TransmitPowerDbm => config.transmit_power = dbm_to_watts(value),
            AxisName::NoisePowerDbm => config.noise_power = dbm_to_watts(value),
            AxisName::KappaDb => config.rician_kappa = db_to_linear(value),
            AxisName::LR => config.l_r = value as usize,
            AxisName::LT => config.l_t = value as usize,
            AxisName::NTx => config.n_tx = value as usize,
            AxisName::NRx => config.n_rx = value as usize,
            AxisName::MR => config.m_r = value as usize,
            AxisName::SigmaE => config.angle_error_std = value,
            AxisName::CScale => config.c_scale = value,
        }
        Ok(())
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|a| a.as_str()).collect();
                Error::InvalidArgument(format!("unknown axis `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: AxisName,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(name: AxisName, values: Vec<f64>) -> Result<Self> {
        let axis = Self { name, values };
        axis.validate()?;
        Ok(axis)
    }

    /// `start, start+step, ...` up to and including `stop` (within round-off).
    pub fn range(name: AxisName, start: f64, step: f64, stop: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::InvalidArgument(format!(
                "range {start}:{step}:{stop} must have step > 0 and stop >= start"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::new(name, (0..count).map(|i| start + i as f64 * step).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sweep grid must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn config_at(&self, base: &SystemConfig, index: usize) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        self.name.apply(&mut cfg, self.values[index])?;
        Ok(cfg)
    }
}

/// `name=start:step:stop`, or `name=value` for a single point.
impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, grid) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("axis `{s}` must look like name=start:step:stop")))?;
        let name: AxisName = name.parse()?;
        let parts: Vec<f64> = grid
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad number in axis `{s}`")))?;
        match parts[..] {
            [v] => Self::new(name, vec![v]),
            [start, step, stop] => Self::range(name, start, step, stop),
            _ => Err(Error::InvalidArgument(format!("axis `{s}` must look like name=start:step:stop"))),
        }
    }
}

/// Scale profile fed to the closed-form companion columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompanionProfile {
    /// Every RIS exactly at `N_S rho = C`.
    Equal,
    /// The realized `N_S rho` of each drawn deployment, averaged over epochs.
    #[default]
    Deployment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub n_angle_epochs: usize,
    pub n_fading_epochs: usize,
    pub schemes: Vec<Scheme>,
    pub axis: SweepAxis,
    /// Linear SNR threshold for outage.
    pub gamma_th: f64,
    pub base_seed: u64,
    pub execution: Execution,
    /// Minimum bits per scheme and grid point for BER estimation.
    pub min_bits: u64,
    pub profile: CompanionProfile,
    pub search_cap: u64,
}

impl TrialPlan {
    pub fn new(axis: SweepAxis, schemes: Vec<Scheme>, base_seed: u64) -> Self {
        Self {
            n_angle_epochs: 200,
            n_fading_epochs: 10,
            schemes,
            axis,
            gamma_th: 10.0,
            base_seed,
            execution: Execution::default(),
            min_bits: 100_000,
            profile: CompanionProfile::default(),
            search_cap: DEFAULT_SEARCH_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_angle_epochs == 0 || self.n_fading_epochs == 0 {
            return Err(Error::InvalidArgument("epoch counts must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidArgument("at least one scheme is required".into()));
        }
        if !(self.gamma_th >= 0.0) {
            return Err(Error::InvalidArgument("outage threshold must be >= 0".into()));
        }
        self.axis.validate()
    }

    fn trials_per_point(&self) -> u64 {
        (self.n_angle_epochs * self.n_fading_epochs) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    SpectralEfficiency,
    BitErrorRate,
    Outage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub mean: f64,
    pub stderr: f64,
    /// Trials (SE, outage) or bits (BER) behind `mean`.
    pub count: u64,
    pub closed_form_approx: Option<f64>,
    pub closed_form_upper: Option<f64>,
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: AxisName,
    pub metric: Metric,
    /// Grid-major, schemes in plan order.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, axis_value: f64, scheme: Scheme) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.axis_value == axis_value && r.scheme == scheme)
    }

    /// Rows of one scheme in grid order.
    pub fn series(&self, scheme: Scheme) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.scheme == scheme).collect()
    }
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Per-angle-epoch outcome of one scheme.
#[derive(Debug, Clone, Default)]
struct SchemeEpoch {
    se: Vec<f64>,
    outages: u64,
    bit_errors: u64,
    bits: u64,
    approx: Option<f64>,
    upper: Option<f64>,
}

/// Draws the deployment and true/estimated channels of an angle epoch.
pub struct AngleEpoch {
    pub deployment: Deployment,
    pub truth: Subchannels,
    pub design: Subchannels,
}

impl AngleEpoch {
    pub fn draw(config: &SystemConfig, base_seed: u64, epoch: u64) -> Result<Self> {
        let deployment = place_deployment(config, &mut stream_rng(base_seed, epoch, 0, Purpose::Placement))?;
        let truth = Subchannels::draw(config, &deployment, &mut stream_rng(base_seed, epoch, 0, Purpose::Angles));
        let mut design = truth.clone();
        let mut err_rng = stream_rng(base_seed, epoch, 0, Purpose::AngleError);
        for ch in design.ris_rx.iter_mut() {
            *ch = inject_angle_error(ch, config.angle_error_std, &mut err_rng)?;
        }
        Ok(Self {
            deployment,
            truth,
            design,
        })
    }

    pub fn redraw_fading(&mut self, config: &SystemConfig, base_seed: u64, epoch: u64, fading_epoch: u64) {
        let mut rng = stream_rng(base_seed, epoch, fading_epoch, Purpose::Fading);
        self.truth.redraw_fading(config, &self.deployment, &mut rng);
        self.design.adopt_gains(&self.truth);
    }
}

fn companions(scheme: Scheme, config: &SystemConfig, plan: &TrialPlan, dep: &Deployment, sel: &PathSelection) -> Result<(Option<f64>, Option<f64>)> {
    let params = match plan.profile {
        CompanionProfile::Equal => ClosedFormParams::equal_scale(config),
        CompanionProfile::Deployment => ClosedFormParams::from_deployment(config, dep, &sel.active_ris),
    };
    Ok(match scheme {
        Scheme::Sm => {
            let c = params.c_values();
            (Some(se_sm_approx(&c)?), Some(se_sm_upper(&c)?))
        }
        Scheme::Bf => (None, Some(se_bf_upper(&params)?)),
        Scheme::Db(_) => (None, Some(se_db_upper(&params, scheme.slots(config.m_r))?)),
        Scheme::Ds(_) => (None, None),
    })
}

fn run_angle_epoch(config: &SystemConfig, plan: &TrialPlan, epoch: u64, metric: Metric, symbols: &[u64]) -> Result<Vec<SchemeEpoch>> {
    let mut ae = AngleEpoch::draw(config, plan.base_seed, epoch)?;
    let arrivals = ae.design.rx_arrivals();
    let selections = plan
        .schemes
        .iter()
        .map(|&s| select_for_scheme(&arrivals, s, config.m_r, config.n_rx, plan.search_cap))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<SchemeEpoch> = Vec::with_capacity(plan.schemes.len());
    for (&scheme, sel) in plan.schemes.iter().zip(&selections) {
        let mut e = SchemeEpoch::default();
        if metric == Metric::SpectralEfficiency {
            (e.approx, e.upper) = companions(scheme, config, plan, &ae.deployment, sel)?;
        }
        out.push(e);
    }
    for f in 0..plan.n_fading_epochs as u64 {
        ae.redraw_fading(config, plan.base_seed, epoch, f);
        for (i, (&scheme, sel)) in plan.schemes.iter().zip(&selections).enumerate() {
            let customs = build_all_slots(sel, &ae.design, &ae.truth, &ae.deployment)?;
            let r: SchemeResult = match metric {
                Metric::BitErrorRate => {
                    let mut rng = stream_rng(plan.base_seed, epoch, f, Purpose::BerNoise);
                    ber_trial(scheme, &customs, config, symbols[i], plan.gamma_th, &mut rng)?
                }
                _ => run_scheme(scheme, &customs, config, plan.gamma_th)?,
            };
            let e = &mut out[i];
            e.se.push(r.se_bits_per_hz);
            e.outages += u64::from(r.outage);
            e.bit_errors += r.bit_errors;
            e.bits += r.bits_sent;
        }
    }
    Ok(out)
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn mean_option(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn estimate(plan: &TrialPlan, config: &SystemConfig, metric: Metric) -> Result<SweepResult> {
    plan.validate()?;
    let grid = &plan.axis.values;
    let configs = (0..grid.len())
        .map(|g| {
            let cfg = plan.axis.config_at(config, g)?;
            match metric {
                Metric::BitErrorRate => cfg.validate_allow_noiseless()?,
                _ => cfg.validate()?,
            }
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let symbols: Vec<Vec<u64>> = configs
        .iter()
        .map(|cfg| {
            plan.schemes
                .iter()
                .map(|s| {
                    let per_symbol = if s.is_multiplexing() { 2 * cfg.n_rx as u64 } else { 2 };
                    let per_trial = per_symbol * plan.trials_per_point();
                    plan.min_bits.div_ceil(per_trial).max(1)
                })
                .collect()
        })
        .collect();

    let n_epochs = plan.n_angle_epochs;
    let outcomes = par_map(plan.execution, grid.len() * n_epochs, |idx| {
        let (g, a) = (idx / n_epochs, idx % n_epochs);
        run_angle_epoch(&configs[g], plan, a as u64, metric, &symbols[g])
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(grid.len() * plan.schemes.len());
    for (g, &axis_value) in grid.iter().enumerate() {
        let epochs = &outcomes[g * n_epochs..(g + 1) * n_epochs];
        for (i, &scheme) in plan.schemes.iter().enumerate() {
            let per: Vec<&SchemeEpoch> = epochs.iter().map(|e| &e[i]).collect();
            let n_trials = plan.trials_per_point();
            let row = match metric {
                Metric::SpectralEfficiency => {
                    let values: Vec<f64> = per.iter().flat_map(|e| e.se.iter().copied()).collect();
                    let (mean, stderr) = mean_stderr(&values);
                    SweepRow {
                        axis_value,
                        scheme,
                        mean,
                        stderr,
                        count: n_trials,
                        closed_form_approx: mean_option(per.iter().map(|e| e.approx)),
                        closed_form_upper: mean_option(per.iter().map(|e| e.upper)),
                        interval: None,
                    }
                }
                Metric::Outage => {
                    let hits: u64 = per.iter().map(|e| e.outages).sum();
                    let p = hits as f64 / n_trials as f64;
                    SweepRow {
                        axis_value,
                        scheme,
                        mean: p,
                        stderr: (p * (1.0 - p) / n_trials as f64).sqrt(),
                        count: n_trials,
                        closed_form_approx: None,
                        closed_form_upper: None,
                        interval: Some(wilson_interval(hits, n_trials, 1.96)),
                    }
                }
                Metric::BitErrorRate => {
                    let errors: u64 = per.iter().map(|e| e.bit_errors).sum();
                    let bits: u64 = per.iter().map(|e| e.bits).sum();
                    let p = errors as f64 / bits as f64;
                    SweepRow {
                        axis_value,
                        scheme,
                        mean: p,
                        stderr: (p * (1.0 - p) / bits as f64).sqrt(),
                        count: bits,
                        closed_form_approx: None,
                        closed_form_upper: None,
                        interval: Some(wilson_interval(errors, bits, 1.96)),
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(SweepResult {
        axis: plan.axis.name,
        metric,
        rows,
    })
}

/// Ergodic spectral efficiency per scheme and grid point.
pub fn estimate_ergodic_se(plan: &TrialPlan, config: &SystemConfig) -> Result<SweepResult> {
    estimate(plan, config, Metric::SpectralEfficiency)
}

/// Bit error rate per scheme and grid point; at least `plan.min_bits` bits each.
pub fn estimate_ber(plan: &TrialPlan, config: &SystemConfig) -> Result<SweepResult> {
    estimate(plan, config, Metric::BitErrorRate)
}

/// Empirical outage probability per scheme and grid point.
pub fn estimate_outage(plan: &TrialPlan, config: &SystemConfig) -> Result<SweepResult> {
    estimate(plan, config, Metric::Outage)
}
