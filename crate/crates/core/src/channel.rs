//! Geometric multipath subchannels and the composite RIS-assisted channel.
//!
//! Angles are stored as spatial frequencies `pi * cos(theta)`. A path's
//! `aoa` indexes the array on the receiving side of the link and `aod` the
//! array on the transmitting side.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::Deployment;
use crate::ris::RisConfiguration;

use std::f64::consts::PI;

/// ULA response `[1, e^{jY}, ..., e^{j(N-1)Y}] / sqrt(N)`.
pub fn array_response(n_elements: usize, spatial_freq: f64) -> DVector<Complex64> {
    let scale = 1.0 / (n_elements as f64).sqrt();
    DVector::from_iterator(
        n_elements,
        (0..n_elements).map(|i| Complex64::from_polar(scale, i as f64 * spatial_freq)),
    )
}

/// `(1/N) * sum_{i<N} e^{j i delta}`, evaluated in closed form.
pub fn dirichlet_sum(n_elements: usize, delta: f64) -> Complex64 {
    let n = n_elements as f64;
    let half = 0.5 * delta;
    let s = half.sin();
    let magnitude = if s.abs() < 1e-9 {
        // Limit at delta = 2 pi m.
        (n * half).cos() / half.cos()
    } else {
        (n * half).sin() / (n * s)
    };
    Complex64::from_polar(1.0, (n - 1.0) * half) * magnitude
}

/// `a^H(y_left) a(y_right)` for an `n`-element ULA.
pub fn steering_inner(n_elements: usize, y_left: f64, y_right: f64) -> Complex64 {
    dirichlet_sum(n_elements, y_right - y_left)
}

/// Wraps a spatial frequency into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Draws `CN(0, 1)` as `(x + jy)/sqrt(2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub aoa: f64,
    pub aod: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    TxToRis,
    RisToRx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathChannel {
    pub rows: usize,
    pub cols: usize,
    pub paths: Vec<PathComponent>,
    pub kind: LinkKind,
    pub ris_index: usize,
}

impl MultipathChannel {
    /// `sum_l alpha_l a_rows(aoa_l) a_cols(aod_l)^H`.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for p in &self.paths {
            let out = array_response(self.rows, p.aoa) * p.gain;
            let inp = array_response(self.cols, p.aod);
            m += out * inp.adjoint();
        }
        m
    }

    /// Spatial frequencies on the RIS side of the link.
    pub fn ris_side_freqs(&self) -> Vec<f64> {
        self.paths
            .iter()
            .map(|p| match self.kind {
                LinkKind::TxToRis => p.aoa,
                LinkKind::RisToRx => p.aod,
            })
            .collect()
    }
}

/// Minimum circular distance enforced between RIS-side spatial frequencies.
///
/// The nominal value is one main-lobe half width of the smallest RIS; it is
/// capped at `pi / count` so that `count` frequencies always fit.
pub fn min_separation(deployment: &Deployment, count: usize) -> f64 {
    let n_min = deployment
        .ris_element_counts
        .iter()
        .copied()
        .min()
        .unwrap_or(1)
        .max(1);
    let nominal = 2.0 * PI / n_min as f64;
    nominal.min(PI / count.max(1) as f64)
}

fn uniform_spatial_freq<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let theta: f64 = rng.random::<f64>() * PI;
    PI * theta.cos()
}

fn separated_spatial_freq<R: Rng + ?Sized>(rng: &mut R, taken: &[f64], sep: f64) -> f64 {
    loop {
        let y = uniform_spatial_freq(rng);
        if taken.iter().all(|&t| wrap_angle(y - t).abs() >= sep) {
            return y;
        }
    }
}

fn rician_gains(config: &SystemConfig, n_s: usize) -> (f64, f64) {
    let k = config.rician_kappa;
    let base = (config.n_tx * n_s) as f64;
    let los = (k * base / (k + 1.0)).sqrt();
    let nlos = if config.l_t == 0 {
        0.0
    } else {
        (base / ((k + 1.0) * config.l_t as f64)).sqrt()
    };
    (los, nlos)
}

fn ris_rx_scale(config: &SystemConfig, n_s: usize) -> f64 {
    ((config.n_rx * n_s) as f64 / config.l_r as f64).sqrt()
}

fn rician_path_count(config: &SystemConfig) -> usize {
    config.l_t + 1
}

fn ris_side_count(config: &SystemConfig) -> usize {
    config.l_t + 1 + config.l_r
}

/// Draws the Tx-RIS `k` subchannel: a deterministic LoS path on the DFT
/// direction plus `L_T` Rayleigh NLoS paths.
pub fn draw_tx_ris_channel<R: Rng + ?Sized>(
    config: &SystemConfig,
    deployment: &Deployment,
    k: usize,
    rng: &mut R,
) -> MultipathChannel {
    let n_s = deployment.ris_element_counts[k];
    let sep = min_separation(deployment, ris_side_count(config));
    let (los_gain, nlos_scale) = rician_gains(config, n_s);

    let mut arrivals = vec![deployment.los_arrival(k)];
    let mut departures = vec![deployment.los_departure(k)];
    for _ in 0..config.l_t {
        let aoa = separated_spatial_freq(rng, &arrivals, sep);
        arrivals.push(aoa);
        departures.push(uniform_spatial_freq(rng));
    }
    let mut paths = Vec::with_capacity(rician_path_count(config));
    paths.push(PathComponent {
        gain: Complex64::new(los_gain, 0.0),
        aoa: arrivals[0],
        aod: departures[0],
    });
    for l in 1..=config.l_t {
        paths.push(PathComponent {
            gain: complex_normal(rng) * nlos_scale,
            aoa: arrivals[l],
            aod: departures[l],
        });
    }
    MultipathChannel {
        rows: n_s,
        cols: config.n_tx,
        paths,
        kind: LinkKind::TxToRis,
        ris_index: k,
    }
}

/// Draws the RIS `k`-Rx subchannel: `L_R` Rayleigh paths whose RIS-side
/// departures keep the minimum separation from each other and from the
/// already `occupied` RIS-side frequencies.
pub fn draw_ris_rx_channel<R: Rng + ?Sized>(
    config: &SystemConfig,
    deployment: &Deployment,
    k: usize,
    occupied: &[f64],
    rng: &mut R,
) -> MultipathChannel {
    let n_s = deployment.ris_element_counts[k];
    let sep = min_separation(deployment, ris_side_count(config).max(occupied.len() + config.l_r));
    let scale = ris_rx_scale(config, n_s);

    let mut taken = occupied.to_vec();
    let mut angles = Vec::with_capacity(config.l_r);
    for _ in 0..config.l_r {
        let aod = separated_spatial_freq(rng, &taken, sep);
        taken.push(aod);
        angles.push((uniform_spatial_freq(rng), aod));
    }
    let paths = angles
        .into_iter()
        .map(|(aoa, aod)| PathComponent {
            gain: complex_normal(rng) * scale,
            aoa,
            aod,
        })
        .collect();
    MultipathChannel {
        rows: config.n_rx,
        cols: n_s,
        paths,
        kind: LinkKind::RisToRx,
        ris_index: k,
    }
}

/// All `2K` subchannels of one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Subchannels {
    pub tx_ris: Vec<MultipathChannel>,
    pub ris_rx: Vec<MultipathChannel>,
}

impl Subchannels {
    pub fn draw<R: Rng + ?Sized>(config: &SystemConfig, deployment: &Deployment, rng: &mut R) -> Self {
        let mut tx_ris = Vec::with_capacity(deployment.n_ris());
        let mut ris_rx = Vec::with_capacity(deployment.n_ris());
        for k in 0..deployment.n_ris() {
            let t = draw_tx_ris_channel(config, deployment, k, rng);
            let r = draw_ris_rx_channel(config, deployment, k, &t.ris_side_freqs(), rng);
            tx_ris.push(t);
            ris_rx.push(r);
        }
        Self { tx_ris, ris_rx }
    }

    /// Redraws every fading coefficient, keeping all angles.
    pub fn redraw_fading<R: Rng + ?Sized>(&mut self, config: &SystemConfig, deployment: &Deployment, rng: &mut R) {
        for (k, ch) in self.tx_ris.iter_mut().enumerate() {
            let (_, nlos_scale) = rician_gains(config, deployment.ris_element_counts[k]);
            for p in ch.paths.iter_mut().skip(1) {
                p.gain = complex_normal(rng) * nlos_scale;
            }
        }
        for (k, ch) in self.ris_rx.iter_mut().enumerate() {
            let scale = ris_rx_scale(config, deployment.ris_element_counts[k]);
            for p in ch.paths.iter_mut() {
                p.gain = complex_normal(rng) * scale;
            }
        }
    }

    /// Copies all path gains from `other`, which must share the path layout.
    pub fn adopt_gains(&mut self, other: &Subchannels) {
        let pairs = self
            .tx_ris
            .iter_mut()
            .zip(&other.tx_ris)
            .chain(self.ris_rx.iter_mut().zip(&other.ris_rx));
        for (mine, theirs) in pairs {
            for (p, q) in mine.paths.iter_mut().zip(&theirs.paths) {
                p.gain = q.gain;
            }
        }
    }

    pub fn n_ris(&self) -> usize {
        self.tx_ris.len()
    }

    /// `K x L_R` table of Rx-side arrival frequencies.
    pub fn rx_arrivals(&self) -> Vec<Vec<f64>> {
        self.ris_rx
            .iter()
            .map(|ch| ch.paths.iter().map(|p| p.aoa).collect())
            .collect()
    }
}

fn check_dims(
    tx_ris: &[MultipathChannel],
    gammas: &[RisConfiguration],
    ris_rx: &[MultipathChannel],
    deployment: &Deployment,
) -> Result<()> {
    let k = deployment.n_ris();
    if tx_ris.len() != k || gammas.len() != k || ris_rx.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "expected {k} RISs, got {} Tx-RIS, {} RIS configs, {} RIS-Rx",
            tx_ris.len(),
            gammas.len(),
            ris_rx.len()
        )));
    }
    for i in 0..k {
        let n_s = deployment.ris_element_counts[i];
        if tx_ris[i].rows != n_s || ris_rx[i].cols != n_s || gammas[i].n_elements != n_s {
            return Err(Error::DimensionMismatch(format!(
                "RIS {i}: element count {n_s} disagrees with channel or configuration"
            )));
        }
        if i > 0 && (tx_ris[i].cols != tx_ris[0].cols || ris_rx[i].rows != ris_rx[0].rows) {
            return Err(Error::DimensionMismatch(format!(
                "RIS {i}: Tx or Rx array size differs from RIS 0"
            )));
        }
    }
    Ok(())
}

/// `sum_k rho_k H_{k,R} Gamma_k H_{T,k}` from fully materialized matrices.
pub fn assemble_composite(
    tx_ris: &[MultipathChannel],
    gammas: &[RisConfiguration],
    ris_rx: &[MultipathChannel],
    deployment: &Deployment,
) -> Result<DMatrix<Complex64>> {
    check_dims(tx_ris, gammas, ris_rx, deployment)?;
    if tx_ris.is_empty() {
        return Err(Error::DimensionMismatch("no RIS in deployment".into()));
    }
    let mut h = DMatrix::zeros(ris_rx[0].rows, tx_ris[0].cols);
    for k in 0..tx_ris.len() {
        let gamma = DMatrix::from_diagonal(&DVector::from_vec(gammas[k].response()));
        let ht = tx_ris[k].to_matrix();
        let hr = ris_rx[k].to_matrix();
        h += (hr * gamma * ht) * Complex64::from(deployment.path_losses[k]);
    }
    Ok(h)
}

/// Cascaded-path view `H = R Xi T^H`.
#[derive(Debug, Clone)]
pub struct CascadedDecomposition {
    /// `N_R x K L_R`; column `k L_R + l` is `a_R(Phi^A_{k,l})`.
    pub r_matrix: DMatrix<Complex64>,
    /// `N_T x K (L_T+1)`; column `k (L_T+1) + j` is `a_T(Theta^D_{k,j})`.
    pub t_matrix: DMatrix<Complex64>,
    /// Block-diagonal cascaded gains.
    pub xi: DMatrix<Complex64>,
    pub rx_paths_per_ris: usize,
    pub tx_paths_per_ris: usize,
}

impl CascadedDecomposition {
    pub fn n_ris(&self) -> usize {
        self.xi.nrows().checked_div(self.rx_paths_per_ris).unwrap_or(0)
    }

    pub fn row_of(&self, k: usize, l: usize) -> usize {
        k * self.rx_paths_per_ris + l
    }

    pub fn col_of(&self, k: usize, j: usize) -> usize {
        k * self.tx_paths_per_ris + j
    }

    /// `(k, l)` for a row of `xi`.
    pub fn row_provenance(&self, row: usize) -> (usize, usize) {
        (row / self.rx_paths_per_ris, row % self.rx_paths_per_ris)
    }

    /// `(k, j)` for a column of `xi`.
    pub fn col_provenance(&self, col: usize) -> (usize, usize) {
        (col / self.tx_paths_per_ris, col % self.tx_paths_per_ris)
    }

    /// Diagonal block `Xi_k` of shape `L_R x (L_T+1)`.
    pub fn block(&self, k: usize) -> DMatrix<Complex64> {
        self.xi
            .view(
                (k * self.rx_paths_per_ris, k * self.tx_paths_per_ris),
                (self.rx_paths_per_ris, self.tx_paths_per_ris),
            )
            .into_owned()
    }

    pub fn composite(&self) -> DMatrix<Complex64> {
        &self.r_matrix * &self.xi * self.t_matrix.adjoint()
    }
}

/// Builds `R`, `T` and `Xi` with `xi_{k,l,j} = rho_k alpha_R alpha_T
/// a_S^H(Phi^D_l) Gamma_k a_S(Theta^A_j)`.
pub fn cascaded_decomposition(
    tx_ris: &[MultipathChannel],
    gammas: &[RisConfiguration],
    ris_rx: &[MultipathChannel],
    deployment: &Deployment,
) -> Result<CascadedDecomposition> {
    check_dims(tx_ris, gammas, ris_rx, deployment)?;
    let k_count = tx_ris.len();
    if k_count == 0 {
        return Err(Error::DimensionMismatch("no RIS in deployment".into()));
    }
    let lt = tx_ris[0].paths.len();
    let lr = ris_rx[0].paths.len();
    if tx_ris.iter().any(|c| c.paths.len() != lt) || ris_rx.iter().any(|c| c.paths.len() != lr) {
        return Err(Error::DimensionMismatch("path counts differ across RISs".into()));
    }
    let n_rx = ris_rx[0].rows;
    let n_tx = tx_ris[0].cols;

    let mut r = DMatrix::zeros(n_rx, k_count * lr);
    let mut t = DMatrix::zeros(n_tx, k_count * lt);
    let mut xi = DMatrix::zeros(k_count * lr, k_count * lt);
    for k in 0..k_count {
        let rho = deployment.path_losses[k];
        for (l, pr) in ris_rx[k].paths.iter().enumerate() {
            r.set_column(k * lr + l, &array_response(n_rx, pr.aoa));
            for (j, pt) in tx_ris[k].paths.iter().enumerate() {
                let inner = gammas[k].transfer(pr.aod, pt.aoa);
                xi[(k * lr + l, k * lt + j)] = pr.gain * pt.gain * rho * inner;
            }
        }
        for (j, pt) in tx_ris[k].paths.iter().enumerate() {
            t.set_column(k * lt + j, &array_response(n_tx, pt.aod));
        }
    }
    Ok(CascadedDecomposition {
        r_matrix: r,
        t_matrix: t,
        xi,
        rx_paths_per_ris: lr,
        tx_paths_per_ris: lt,
    })
}
