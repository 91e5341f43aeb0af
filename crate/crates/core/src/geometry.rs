//! Planar deployment: Tx at the origin, RISs on the Tx DFT directions at a
//! fixed range line, and a receiver dropped uniformly in a disk.
//!
//! Every array is a ULA laid along the y-axis, so the direction cosine of a
//! point `(x, y)` seen from an array at the origin is `y / r`.

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// x-coordinate of the line the RISs are mounted on, meters.
pub const RIS_LINE_X: f64 = 150.0;
/// Center of the receiver coverage disk, meters.
pub const RX_CENTER: [f64; 2] = [200.0, 0.0];
/// Radius of the receiver coverage disk, meters.
pub const RX_RADIUS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub tx_position: [f64; 2],
    pub rx_position: [f64; 2],
    pub ris_positions: Vec<[f64; 2]>,
    pub ris_element_counts: Vec<usize>,
    pub path_losses: Vec<f64>,
    /// Direction cosine of each RIS seen from the Tx (on the DFT grid).
    pub direction_cosines: Vec<f64>,
}

impl Deployment {
    pub fn n_ris(&self) -> usize {
        self.ris_positions.len()
    }

    /// Spatial frequency of the LoS departure at the Tx towards RIS `k`.
    pub fn los_departure(&self, k: usize) -> f64 {
        std::f64::consts::PI * self.direction_cosines[k]
    }

    /// Spatial frequency of the LoS arrival at RIS `k`. The Tx lies in the
    /// mirrored direction, hence the sign flip.
    pub fn los_arrival(&self, k: usize) -> f64 {
        -std::f64::consts::PI * self.direction_cosines[k]
    }

    /// Per-RIS product `N_S,k * rho_k`.
    pub fn scale_profile(&self) -> Vec<f64> {
        self.ris_element_counts
            .iter()
            .zip(&self.path_losses)
            .map(|(&n, &rho)| n as f64 * rho)
            .collect()
    }
}

/// Cascaded free-space loss of the Tx-RIS-Rx link.
pub fn path_loss(r_tx_ris: f64, r_ris_rx: f64, wavelength: f64) -> Result<f64> {
    if !(r_tx_ris > 0.0 && r_ris_rx > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distances must be positive, got {r_tx_ris} and {r_ris_rx}"
        )));
    }
    if !(wavelength > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    Ok((wavelength / (four_pi * r_tx_ris)) * (wavelength / (four_pi * r_ris_rx)))
}

/// Element count that brings `N * rho` closest to `c_scale`, rounding half up.
pub fn ris_element_count(c_scale: f64, path_loss: f64) -> Result<usize> {
    if !(c_scale > 0.0 && path_loss > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "c_scale and path_loss must be positive, got {c_scale} and {path_loss}"
        )));
    }
    let n = (c_scale / path_loss + 0.5).floor();
    if !n.is_finite() || n > usize::MAX as f64 {
        return Err(Error::InvalidArgument(format!(
            "element count {n} is not representable"
        )));
    }
    Ok((n as usize).max(1))
}

/// Direction cosines of the K RIS placements, ordered by descending y.
///
/// The Tx DFT grid is `u_n = 2n/N_T + offset/pi` wrapped into `[-1, 1)`.
/// Boresight (`u = 0`, a RIS on the Rx axis) and endfire (`|u| = 1`, no
/// forward crossing of the mounting line) are excluded; the K remaining
/// directions closest to boresight are taken, preferring the positive side
/// on ties.
pub fn dft_direction_cosines(config: &SystemConfig) -> Result<Vec<f64>> {
    let n_tx = config.n_tx;
    let shift = config.dft_offset / std::f64::consts::PI;
    let mut grid: Vec<f64> = (1..=n_tx)
        .map(|n| {
            let u = (2.0 * n as f64 / n_tx as f64 + shift + 1.0).rem_euclid(2.0) - 1.0;
            // Snap round-off so exact grid points compare equal.
            if u.abs() < 1e-12 {
                0.0
            } else {
                u
            }
        })
        .filter(|u| u.abs() >= 1e-12 && u.abs() < 1.0 - 1e-12)
        .collect();
    grid.sort_by(|a, b| {
        a.abs()
            .total_cmp(&b.abs())
            .then_with(|| b.total_cmp(a))
    });
    if grid.len() < config.n_ris {
        return Err(Error::Config(format!(
            "only {} forward DFT directions exist for n_tx={}, need {}",
            grid.len(),
            n_tx,
            config.n_ris
        )));
    }
    grid.truncate(config.n_ris);
    grid.sort_by(|a, b| b.total_cmp(a));
    Ok(grid)
}

/// Builds the deployment for a given receiver position.
pub fn deployment_at(config: &SystemConfig, rx_position: [f64; 2]) -> Result<Deployment> {
    let wavelength = config.wavelength();
    let cosines = dft_direction_cosines(config)?;
    let tx = [0.0, 0.0];
    let mut ris_positions = Vec::with_capacity(cosines.len());
    let mut path_losses = Vec::with_capacity(cosines.len());
    let mut counts = Vec::with_capacity(cosines.len());
    for &u in &cosines {
        let y = RIS_LINE_X * u / (1.0 - u * u).sqrt();
        let pos = [RIS_LINE_X, y];
        let r_tx = distance(tx, pos);
        let r_rx = distance(pos, rx_position);
        let rho = path_loss(r_tx, r_rx, wavelength)?;
        counts.push(ris_element_count(config.c_scale, rho)?);
        path_losses.push(rho);
        ris_positions.push(pos);
    }
    Ok(Deployment {
        tx_position: tx,
        rx_position,
        ris_positions,
        ris_element_counts: counts,
        path_losses,
        direction_cosines: cosines,
    })
}

/// Uniform point in the coverage disk (square-root radius method).
pub fn sample_rx_position<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    let radius = RX_RADIUS * rng.random::<f64>().sqrt();
    let angle = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    [
        RX_CENTER[0] + radius * angle.cos(),
        RX_CENTER[1] + radius * angle.sin(),
    ]
}

/// Drops the receiver and builds the matching deployment.
pub fn place_deployment<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Deployment> {
    config.validate_allow_noiseless()?;
    let rx = sample_rx_position(rng);
    deployment_at(config, rx)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
