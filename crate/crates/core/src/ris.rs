//! RIS phase-shifter design.
//!
//! Every configuration used here has a linear phase profile
//! `omega_i = i * slope + common_phase` (0-based `i`), so inner products
//! through the surface reduce to a closed-form Dirichlet sum.

use num_complex::Complex64;

use crate::channel::{dirichlet_sum, CascadedDecomposition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RisConfiguration {
    pub ris_index: usize,
    pub n_elements: usize,
    /// Phase increment between neighbouring elements.
    pub slope: f64,
    /// Phase added to every element.
    pub common_phase: f64,
    /// `(l, j)`: the RIS-Rx path and Tx-RIS path this surface aligns.
    pub aligned_path: Option<(usize, usize)>,
}

impl RisConfiguration {
    /// All-zero phases.
    pub fn inactive(ris_index: usize, n_elements: usize) -> Self {
        Self {
            ris_index,
            n_elements,
            slope: 0.0,
            common_phase: 0.0,
            aligned_path: None,
        }
    }

    /// Aligns arrival `theta_a` onto departure `phi_d`.
    pub fn aligned(ris_index: usize, n_elements: usize, phi_d: f64, theta_a: f64) -> Self {
        Self {
            ris_index,
            n_elements,
            slope: phi_d - theta_a,
            common_phase: 0.0,
            aligned_path: None,
        }
    }

    pub fn activating(mut self, l: usize, j: usize) -> Self {
        self.aligned_path = Some((l, j));
        self
    }

    pub fn with_common_phase(mut self, phase: f64) -> Self {
        self.common_phase = phase;
        self
    }

    /// Element phases `omega_i`.
    pub fn phases(&self) -> Vec<f64> {
        (0..self.n_elements)
            .map(|i| i as f64 * self.slope + self.common_phase)
            .collect()
    }

    /// Diagonal of `Gamma`.
    pub fn response(&self) -> Vec<Complex64> {
        self.phases()
            .into_iter()
            .map(|w| Complex64::from_polar(1.0, w))
            .collect()
    }

    /// `a_S^H(out_freq) Gamma a_S(in_freq)`.
    pub fn transfer(&self, out_freq: f64, in_freq: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.common_phase)
            * dirichlet_sum(self.n_elements, in_freq - out_freq + self.slope)
    }
}

/// Phases steering arrival `theta_a` onto departure `phi_d`.
pub fn align_phases(phi_d: f64, theta_a: f64, n_elements: usize) -> RisConfiguration {
    RisConfiguration::aligned(0, n_elements, phi_d, theta_a)
}

/// Cascaded gain `xi_{k,l,j}` of a decomposition.
pub fn effective_gain(decomp: &CascadedDecomposition, k: usize, l: usize, j: usize) -> Result<Complex64> {
    if k >= decomp.n_ris() || l >= decomp.rx_paths_per_ris || j >= decomp.tx_paths_per_ris {
        return Err(Error::IndexOutOfRange(format!(
            "(k={k}, l={l}, j={j}) outside {} RISs x {} Rx paths x {} Tx paths",
            decomp.n_ris(),
            decomp.rx_paths_per_ris,
            decomp.tx_paths_per_ris
        )));
    }
    Ok(decomp.xi[(decomp.row_of(k, l), decomp.col_of(k, j))])
}

/// Common phase that brings the activated path of one RIS into phase with
/// the others at the receiver: `-(arg alpha_R + arg alpha_T + (N_R-1)/2 Phi^A)`.
pub fn common_phase_refinement(alpha_r: Complex64, alpha_t: Complex64, phi_a: f64, n_rx: usize) -> Result<f64> {
    if alpha_r == Complex64::new(0.0, 0.0) || alpha_t == Complex64::new(0.0, 0.0) {
        return Err(Error::UndefinedPhase);
    }
    Ok(-(alpha_r.arg() + alpha_t.arg() + 0.5 * (n_rx as f64 - 1.0) * phi_a))
}

/// Frobenius norm of the channel carried by every path outside `active`
/// (`(k, l, j)` triples).
pub fn leakage_norm(decomp: &CascadedDecomposition, active: &[(usize, usize, usize)]) -> f64 {
    let mut xi = decomp.xi.clone();
    for &(k, l, j) in active {
        xi[(decomp.row_of(k, l), decomp.col_of(k, j))] = Complex64::new(0.0, 0.0);
    }
    (&decomp.r_matrix * xi * decomp.t_matrix.adjoint()).norm()
}
