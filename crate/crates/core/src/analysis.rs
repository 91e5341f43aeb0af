//! Closed-form performance expressions and the SM/BF crossing point.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::Deployment;

use std::f64::consts::{LN_2, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^x E_1(x)` for `x > 0`. Stays finite where `e^x` alone would overflow.
pub fn scaled_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::Domain(format!("scaled_e1 needs x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_scaled_continued_fraction(x))
    }
}

/// `E_1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)`.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0; // (-x)^k / k!
    for k in 1..200 {
        term *= -x / k as f64;
        let contrib = term / k as f64;
        sum += contrib;
        if contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Modified Lentz evaluation of `e^x E_1(x)` for `x > 1`.
fn e1_scaled_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Exponential integral `Ei(x) = int_{-inf}^x e^t/t dt` for `x < 0`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::Domain(format!("Ei is implemented for x < 0, got {x}")));
    }
    let a = -x;
    if a <= 1.0 {
        Ok(-e1_series(a))
    } else {
        Ok(-e1_scaled_continued_fraction(a) * (-a).exp())
    }
}

fn check_positive(c: &[f64]) -> Result<()> {
    if let Some(bad) = c.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("per-stream constants must be positive, got {bad}")));
    }
    Ok(())
}

/// Ergodic SM spectral efficiency approximation `-(1/ln2) sum e^c Ei(-c)`.
pub fn se_sm_approx(c: &[f64]) -> Result<f64> {
    check_positive(c)?;
    let mut total = 0.0;
    for &v in c {
        total += scaled_e1(v)?;
    }
    Ok(total / LN_2)
}

/// Jensen upper bound on the ergodic SM spectral efficiency.
pub fn se_sm_upper(c: &[f64]) -> Result<f64> {
    check_positive(c)?;
    Ok(c.iter().map(|&v| (1.0 / v).ln_1p() / LN_2).sum())
}

/// Parameters of the closed-form expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormParams {
    pub transmit_power: f64,
    pub noise_power: f64,
    pub kappa: f64,
    pub l_r: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub m_r: usize,
    /// `N_S,n * rho_n` of the RISs carrying the SM streams.
    pub sm_scales: Vec<f64>,
    /// `N_S,n * rho_n` of all RISs.
    pub bf_scales: Vec<f64>,
}

impl ClosedFormParams {
    /// Every RIS exactly at `N_S rho = C`.
    pub fn equal_scale(config: &SystemConfig) -> Self {
        Self {
            transmit_power: config.transmit_power,
            noise_power: config.noise_power,
            kappa: config.rician_kappa,
            l_r: config.l_r,
            n_tx: config.n_tx,
            n_rx: config.n_rx,
            m_r: config.m_r,
            sm_scales: vec![config.c_scale; config.n_rx],
            bf_scales: vec![config.c_scale; config.n_ris],
        }
    }

    /// Realized profile of a deployment; `sm_active` lists the SM RISs.
    pub fn from_deployment(config: &SystemConfig, deployment: &Deployment, sm_active: &[usize]) -> Self {
        let scales = deployment.scale_profile();
        Self {
            sm_scales: sm_active.iter().map(|&k| scales[k]).collect(),
            bf_scales: scales,
            ..Self::equal_scale(config)
        }
    }

    /// The `n_rx` RISs with the largest `N_S rho` (lowest index on ties).
    pub fn strongest_subset(deployment: &Deployment, n_rx: usize) -> Vec<usize> {
        let scales = deployment.scale_profile();
        let mut idx: Vec<usize> = (0..scales.len()).collect();
        idx.sort_by(|&a, &b| scales[b].total_cmp(&scales[a]).then(a.cmp(&b)));
        idx.truncate(n_rx);
        idx.sort_unstable();
        idx
    }

    pub fn n_ris(&self) -> usize {
        self.bf_scales.len()
    }

    /// `E N_T kappa / (sigma^2 L_R (kappa+1))`.
    pub fn snr_unit(&self) -> f64 {
        self.transmit_power * self.n_tx as f64 * self.kappa
            / (self.noise_power * self.l_r as f64 * (self.kappa + 1.0))
    }

    /// Per-stream constants `c_n = sigma^2 L_R (kappa+1) / (E N_T (N_S rho)^2 kappa)`.
    pub fn c_values(&self) -> Vec<f64> {
        let unit = self.snr_unit();
        self.sm_scales.iter().map(|s| 1.0 / (unit * s * s)).collect()
    }

    /// Average BF beamforming gain including the coherent cross terms.
    fn bf_gain(&self) -> f64 {
        let squares: f64 = self.bf_scales.iter().map(|s| s * s).sum();
        let total: f64 = self.bf_scales.iter().sum();
        let cross = total * total - squares;
        self.snr_unit() * self.n_rx as f64 / self.n_ris() as f64 * (squares + PI / 4.0 * cross)
    }

    fn validate(&self) -> Result<()> {
        let scalars = [self.transmit_power, self.noise_power, self.kappa];
        if scalars.iter().any(|v| !(*v > 0.0)) || self.l_r == 0 || self.n_tx == 0 || self.n_rx == 0 {
            return Err(Error::Domain("closed-form parameters must be positive".into()));
        }
        if self.bf_scales.is_empty() || self.bf_scales.iter().chain(&self.sm_scales).any(|s| !(*s > 0.0)) {
            return Err(Error::Domain("RIS scale profile must be non-empty and positive".into()));
        }
        Ok(())
    }
}

/// Upper bound on the ergodic BF spectral efficiency with MRC.
pub fn se_bf_upper(params: &ClosedFormParams) -> Result<f64> {
    se_db_upper(params, 1)
}

/// Upper bound on the ergodic spectral efficiency of BF with `m_r`
/// reconfigurations per symbol.
pub fn se_db_upper(params: &ClosedFormParams, m_r: usize) -> Result<f64> {
    params.validate()?;
    if m_r == 0 {
        return Err(Error::Domain("m_r must be at least 1".into()));
    }
    let m = m_r as f64;
    Ok((m * params.bf_gain()).ln_1p() / LN_2 / m)
}

/// Elementary symmetric polynomial of order `k` of `d`.
pub fn sym_func(d: &[f64], k: usize) -> Result<f64> {
    if k > d.len() {
        return Err(Error::IndexOutOfRange(format!("order {k} exceeds {} entries", d.len())));
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (i, &x) in d.iter().enumerate() {
        for j in (1..=k.min(i + 1)).rev() {
            e[j] += e[j - 1] * x;
        }
    }
    Ok(e[k])
}

struct CrossingTerms {
    /// `tr_n(D_NR)` for `n = 0..=N_R`.
    sm_traces: Vec<f64>,
    rhs: f64,
}

fn crossing_terms(params: &ClosedFormParams) -> Result<CrossingTerms> {
    params.validate()?;
    let n_rx = params.sm_scales.len();
    if n_rx < 2 {
        return Err(Error::Domain(format!(
            "crossing point needs at least 2 SM streams, got {n_rx}"
        )));
    }
    let d_nr: Vec<f64> = params.sm_scales.iter().map(|s| s * s).collect();
    let d_k: Vec<f64> = params.bf_scales.iter().map(|s| s * s).collect();
    let sm_traces = (0..=n_rx)
        .map(|n| sym_func(&d_nr, n))
        .collect::<Result<Vec<_>>>()?;
    let cross = if d_k.len() >= 2 {
        sym_func(&params.bf_scales, 2)?
    } else {
        0.0
    };
    let rhs = n_rx as f64 / params.n_ris() as f64 * (sym_func(&d_k, 1)? + PI / 2.0 * cross)
        - sm_traces[1];
    Ok(CrossingTerms { sm_traces, rhs })
}

fn power_from_unit(params: &ClosedFormParams, z: f64) -> f64 {
    z * params.noise_power * params.l_r as f64 * (params.kappa + 1.0) / (params.n_tx as f64 * params.kappa)
}

/// Transmit power at which the SM and BF upper bounds cross.
///
/// Solves `sum_{n=2}^{N_R} z^{n-1} tr_n(D_NR) = rhs` for the unique positive
/// `z` (the left side has positive coefficients, hence is increasing) and
/// converts `z` back to watts.
pub fn crossing_point(params: &ClosedFormParams) -> Result<f64> {
    let t = crossing_terms(params)?;
    if !(t.rhs > 0.0) {
        return Err(Error::NoCrossing { rhs: t.rhs });
    }
    let lhs = |z: f64| {
        let mut acc = 0.0;
        let mut zp = 1.0;
        for n in 2..t.sm_traces.len() {
            zp *= z;
            acc += zp * t.sm_traces[n];
        }
        acc
    };
    let mut hi = 1.0;
    while lhs(hi) < t.rhs {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoCrossing { rhs: t.rhs });
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lhs(mid) < t.rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(power_from_unit(params, 0.5 * (lo + hi)))
}

/// Explicit crossing point for two or three SM streams (general profile),
/// `None` for other stream counts.
pub fn crossing_point_closed_form(params: &ClosedFormParams) -> Result<Option<f64>> {
    let t = crossing_terms(params)?;
    if !(t.rhs > 0.0) {
        return Err(Error::NoCrossing { rhs: t.rhs });
    }
    let z = match t.sm_traces.len() - 1 {
        2 => t.rhs / t.sm_traces[2],
        3 => {
            let (b, a) = (t.sm_traces[2], t.sm_traces[3]);
            ((b * b + 4.0 * a * t.rhs).sqrt() - b) / (2.0 * a)
        }
        _ => return Ok(None),
    };
    Ok(Some(power_from_unit(params, z)))
}
