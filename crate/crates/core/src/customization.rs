//! Path selection and construction of the customized channel.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{array_response, cascaded_decomposition, steering_inner, wrap_angle, CascadedDecomposition, Subchannels};
use crate::error::{Error, Result};
use crate::geometry::Deployment;
use crate::ris::{common_phase_refinement, RisConfiguration};

/// Default limit on the number of candidates an exhaustive search may visit.
pub const DEFAULT_SEARCH_CAP: u64 = 10_000_000;

/// Two objective values closer than this are treated as a tie and resolved
/// in favour of the lexicographically smaller candidate.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Sm,
    Bf,
    /// Spatial multiplexing with RIS reconfigurations per symbol. `None`
    /// takes the count from the configuration.
    Ds(Option<usize>),
    /// Beamforming with RIS reconfigurations per symbol.
    Db(Option<usize>),
}

impl Scheme {
    pub fn slots(&self, config_m_r: usize) -> usize {
        match *self {
            Scheme::Sm | Scheme::Bf => 1,
            Scheme::Ds(m) | Scheme::Db(m) => m.unwrap_or(config_m_r),
        }
    }

    pub fn is_multiplexing(&self) -> bool {
        matches!(self, Scheme::Sm | Scheme::Ds(_))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Sm => write!(f, "sm"),
            Scheme::Bf => write!(f, "bf"),
            Scheme::Ds(None) => write!(f, "ds"),
            Scheme::Db(None) => write!(f, "db"),
            Scheme::Ds(Some(m)) => write!(f, "ds:{m}"),
            Scheme::Db(Some(m)) => write!(f, "db:{m}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, count) = match s.split_once(':') {
            Some((n, c)) => {
                let m: usize = c
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad reconfiguration count in `{s}`")))?;
                if m == 0 {
                    return Err(Error::InvalidArgument(format!("reconfiguration count must be >= 1 in `{s}`")));
                }
                (n.to_string(), Some(m))
            }
            None => (s.clone(), None),
        };
        match (name.as_str(), count) {
            ("sm", None) => Ok(Scheme::Sm),
            ("bf", None) => Ok(Scheme::Bf),
            ("ds", c) => Ok(Scheme::Ds(c)),
            ("db", c) => Ok(Scheme::Db(c)),
            _ => Err(Error::InvalidArgument(format!("unknown scheme `{s}`"))),
        }
    }
}

/// Outcome of a path-selection search.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSelection {
    pub scheme: Scheme,
    /// Activated RISs, in column order.
    pub active_ris: Vec<usize>,
    /// `slots[m][i]`: RIS-Rx path of `active_ris[i]` in reconfiguration `m`.
    /// The Tx-side path is always the LoS path.
    pub slots: Vec<Vec<usize>>,
    /// Search objective reached in each slot.
    pub objectives: Vec<f64>,
}

impl PathSelection {
    pub fn objective_value(&self) -> f64 {
        self.objectives[0]
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }
}

#[derive(Clone, Copy)]
enum Target {
    /// `|| R^H R - I ||_F^2`
    Identity,
    /// `|| R^H R - 1 ||_F^2`
    AllOnes,
}

/// Pairwise cost table over all `(k, l)` candidates.
struct PairCosts {
    per_ris: usize,
    costs: Vec<f64>,
    width: usize,
}

impl PairCosts {
    fn new(candidates: &[Vec<f64>], n_rx: usize, target: Target) -> Self {
        let per_ris = candidates.first().map_or(0, Vec::len);
        let flat: Vec<f64> = candidates.iter().flatten().copied().collect();
        let width = flat.len();
        let mut costs = vec![0.0; width * width];
        for a in 0..width {
            for b in 0..width {
                let g = steering_inner(n_rx, flat[a], flat[b]);
                costs[a * width + b] = match target {
                    Target::Identity => g.norm_sqr(),
                    Target::AllOnes => (g - Complex64::new(1.0, 0.0)).norm_sqr(),
                };
            }
        }
        Self { per_ris, costs, width }
    }

    fn cost(&self, k1: usize, l1: usize, k2: usize, l2: usize) -> f64 {
        self.costs[(k1 * self.per_ris + l1) * self.width + k2 * self.per_ris + l2]
    }

    /// Off-diagonal Gram defect of the columns `(ris[i], paths[i])`.
    fn objective(&self, ris: &[usize], paths: &[usize]) -> f64 {
        let mut total = 0.0;
        for a in 0..ris.len() {
            for b in 0..ris.len() {
                if a != b {
                    total += self.cost(ris[a], paths[a], ris[b], paths[b]);
                }
            }
        }
        total
    }
}

fn improves(candidate: f64, best: f64) -> bool {
    candidate < best - TIE_TOLERANCE
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic `k`-subsets of `0..n`.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Odometer over `allowed[i]` lists, last position fastest.
fn next_tuple(pos: &mut [usize], allowed: &[Vec<usize>]) -> bool {
    for i in (0..pos.len()).rev() {
        if pos[i] + 1 < allowed[i].len() {
            pos[i] += 1;
            for p in pos.iter_mut().skip(i + 1) {
                *p = 0;
            }
            return true;
        }
    }
    false
}

/// Best path tuple for a fixed RIS subset; `allowed[i]` lists the paths
/// admissible for `ris[i]` in ascending order.
fn best_tuple(table: &PairCosts, ris: &[usize], allowed: &[Vec<usize>]) -> Option<(Vec<usize>, f64)> {
    if allowed.iter().any(Vec::is_empty) {
        return None;
    }
    let mut pos = vec![0usize; ris.len()];
    let mut paths: Vec<usize> = pos.iter().zip(allowed).map(|(&p, a)| a[p]).collect();
    let mut best = (paths.clone(), table.objective(ris, &paths));
    while next_tuple(&mut pos, allowed) {
        for (i, (&p, a)) in pos.iter().zip(allowed).enumerate() {
            paths[i] = a[p];
        }
        let value = table.objective(ris, &paths);
        if improves(value, best.1) {
            best = (paths.clone(), value);
        }
    }
    Some(best)
}

fn check_candidates(candidates: &[Vec<f64>]) -> Result<usize> {
    let l_r = candidates.first().map_or(0, Vec::len);
    if l_r == 0 || candidates.iter().any(|c| c.len() != l_r) {
        return Err(Error::DimensionMismatch(
            "candidate table must be non-empty with equal path counts per RIS".into(),
        ));
    }
    Ok(l_r)
}

fn check_cap(size: u128, cap: u64) -> Result<()> {
    if size > cap as u128 {
        Err(Error::SearchTooLarge { size, cap })
    } else {
        Ok(())
    }
}

/// Exhaustive SM path selection with the default search cap.
pub fn select_paths_sm(candidates: &[Vec<f64>], n_rx: usize) -> Result<PathSelection> {
    select_paths_sm_capped(candidates, n_rx, DEFAULT_SEARCH_CAP)
}

/// Picks `n_rx` RISs and one Rx-side path each whose receive responses are
/// as close to orthonormal as possible.
pub fn select_paths_sm_capped(candidates: &[Vec<f64>], n_rx: usize, cap: u64) -> Result<PathSelection> {
    let l_r = check_candidates(candidates)?;
    let k = candidates.len();
    if n_rx == 0 || k < n_rx {
        return Err(Error::Config(format!("SM needs n_ris >= n_rx >= 1, got {k} RISs for {n_rx} streams")));
    }
    check_cap(binomial(k, n_rx) * (l_r as u128).pow(n_rx as u32), cap)?;
    let table = PairCosts::new(candidates, n_rx, Target::Identity);
    let all: Vec<usize> = (0..l_r).collect();
    let allowed = vec![all; n_rx];
    let mut subset: Vec<usize> = (0..n_rx).collect();
    let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
    loop {
        if let Some((paths, value)) = best_tuple(&table, &subset, &allowed) {
            if best.as_ref().is_none_or(|b| improves(value, b.2)) {
                best = Some((subset.clone(), paths, value));
            }
        }
        if !next_combination(&mut subset, k) {
            break;
        }
    }
    let (active_ris, paths, value) = best.expect("at least one subset exists");
    Ok(PathSelection {
        scheme: Scheme::Sm,
        active_ris,
        slots: vec![paths],
        objectives: vec![value],
    })
}

/// Exhaustive BF path selection with the default search cap.
pub fn select_paths_bf(candidates: &[Vec<f64>], n_rx: usize) -> Result<PathSelection> {
    select_paths_bf_capped(candidates, n_rx, DEFAULT_SEARCH_CAP)
}

/// Picks one Rx-side path per RIS (all RISs active) whose receive responses
/// are as close to identical as possible.
pub fn select_paths_bf_capped(candidates: &[Vec<f64>], n_rx: usize, cap: u64) -> Result<PathSelection> {
    let l_r = check_candidates(candidates)?;
    let k = candidates.len();
    check_cap((l_r as u128).saturating_pow(k as u32), cap)?;
    let table = PairCosts::new(candidates, n_rx, Target::AllOnes);
    let ris: Vec<usize> = (0..k).collect();
    let allowed = vec![(0..l_r).collect::<Vec<_>>(); k];
    let (paths, value) = best_tuple(&table, &ris, &allowed).expect("non-empty candidates");
    Ok(PathSelection {
        scheme: Scheme::Bf,
        active_ris: ris,
        slots: vec![paths],
        objectives: vec![value],
    })
}

/// DS/DB selection with the default search cap.
pub fn select_paths_diversity(candidates: &[Vec<f64>], scheme: Scheme, m_r: usize, n_rx: usize) -> Result<PathSelection> {
    select_paths_diversity_capped(candidates, scheme, m_r, n_rx, DEFAULT_SEARCH_CAP)
}

/// Slot 1 is the SM (DS) or BF (DB) solution; each later slot re-runs the
/// same objective greedily over the paths not yet used by each RIS, with the
/// RIS set frozen at slot 1.
pub fn select_paths_diversity_capped(
    candidates: &[Vec<f64>],
    scheme: Scheme,
    m_r: usize,
    n_rx: usize,
    cap: u64,
) -> Result<PathSelection> {
    let l_r = check_candidates(candidates)?;
    if m_r == 0 || m_r > l_r {
        return Err(Error::Infeasible(format!(
            "{m_r} reconfigurations need as many distinct paths per RIS, only {l_r} exist"
        )));
    }
    let (first, target) = match scheme {
        Scheme::Ds(_) | Scheme::Sm => (select_paths_sm_capped(candidates, n_rx, cap)?, Target::Identity),
        Scheme::Db(_) | Scheme::Bf => (select_paths_bf_capped(candidates, n_rx, cap)?, Target::AllOnes),
    };
    let table = PairCosts::new(candidates, n_rx, target);
    let ris = first.active_ris.clone();
    let mut slots = first.slots;
    let mut objectives = first.objectives;
    for _ in 1..m_r {
        let allowed: Vec<Vec<usize>> = (0..ris.len())
            .map(|i| (0..l_r).filter(|l| slots.iter().all(|s| s[i] != *l)).collect())
            .collect();
        let (paths, value) = best_tuple(&table, &ris, &allowed)
            .ok_or_else(|| Error::Infeasible("no unused path left for a RIS".into()))?;
        slots.push(paths);
        objectives.push(value);
    }
    Ok(PathSelection {
        scheme,
        active_ris: ris,
        slots,
        objectives,
    })
}

/// Runs the selection appropriate to `scheme`.
pub fn select_for_scheme(candidates: &[Vec<f64>], scheme: Scheme, config_m_r: usize, n_rx: usize, cap: u64) -> Result<PathSelection> {
    match scheme {
        Scheme::Sm => select_paths_sm_capped(candidates, n_rx, cap),
        Scheme::Bf => select_paths_bf_capped(candidates, n_rx, cap),
        Scheme::Ds(_) | Scheme::Db(_) => {
            select_paths_diversity_capped(candidates, scheme, scheme.slots(config_m_r), n_rx, cap)
        }
    }
}

/// One reconfiguration of the customized channel.
#[derive(Debug, Clone)]
pub struct CustomizedChannel {
    /// Rx responses of the activated paths, from the design angles.
    pub r_active: DMatrix<Complex64>,
    /// Tx responses of the activated (LoS) paths.
    pub t_active: DMatrix<Complex64>,
    /// Activated cascaded gains on the true channel, one per active RIS.
    pub xi_active: Vec<Complex64>,
    /// Exact composite channel under the designed surfaces.
    pub exact_h: DMatrix<Complex64>,
    pub gammas: Vec<RisConfiguration>,
    /// `(k, l)` of each activated path.
    pub active_paths: Vec<(usize, usize)>,
    /// Cascaded view of the true channel under the designed surfaces.
    pub decomposition: CascadedDecomposition,
}

impl CustomizedChannel {
    /// Approximate channel `R_A diag(xi) T_A^H`.
    pub fn approximation(&self) -> DMatrix<Complex64> {
        let xi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.xi_active.clone()));
        &self.r_active * xi * self.t_active.adjoint()
    }

    /// `(k, l, 0)` triples of the activated paths.
    pub fn active_triples(&self) -> Vec<(usize, usize, usize)> {
        self.active_paths.iter().map(|&(k, l)| (k, l, 0)).collect()
    }
}

/// Designs the surfaces for slot `slot` of `selection` using the `design`
/// channel knowledge and evaluates them on `truth`.
///
/// `design` and `truth` share fading gains and Tx-side angles; they differ
/// only when RIS-Rx angles are estimated with error. Inactive RISs keep
/// all-zero phases. With `refine`, each active surface also gets the
/// common phase that co-phases the activated paths at the receiver.
///
/// Arrival frequencies only matter modulo 2 pi to the array response, but
/// the common phase scales them by `(N_R - 1) / 2`. Before refining, each
/// activated arrival is therefore moved to the branch closest to the first
/// one, so that aliased arrivals near +pi and -pi add coherently.
pub fn build_customized_channel(
    selection: &PathSelection,
    slot: usize,
    design: &Subchannels,
    truth: &Subchannels,
    deployment: &Deployment,
    refine: bool,
) -> Result<CustomizedChannel> {
    let paths = selection
        .slots
        .get(slot)
        .ok_or_else(|| Error::IndexOutOfRange(format!("slot {slot} of {}", selection.slots.len())))?;
    let k_count = deployment.n_ris();
    if design.n_ris() != k_count || truth.n_ris() != k_count {
        return Err(Error::DimensionMismatch("subchannels disagree with deployment".into()));
    }
    let n_rx = truth.ris_rx[0].rows;
    let n_tx = truth.tx_ris[0].cols;

    let mut gammas: Vec<RisConfiguration> = (0..k_count)
        .map(|k| RisConfiguration::inactive(k, deployment.ris_element_counts[k]))
        .collect();
    let mut active_paths = Vec::with_capacity(paths.len());
    let mut reference: Option<f64> = None;
    for (&k, &l) in selection.active_ris.iter().zip(paths) {
        let rx_path = design.ris_rx[k]
            .paths
            .get(l)
            .ok_or_else(|| Error::IndexOutOfRange(format!("path {l} of RIS {k}")))?;
        let los = &design.tx_ris[k].paths[0];
        let mut g = RisConfiguration::aligned(k, deployment.ris_element_counts[k], rx_path.aod, los.aoa).activating(l, 0);
        if refine {
            let anchor = *reference.get_or_insert(rx_path.aoa);
            let phi_a = anchor + wrap_angle(rx_path.aoa - anchor);
            g = g.with_common_phase(common_phase_refinement(rx_path.gain, los.gain, phi_a, n_rx)?);
        }
        gammas[k] = g;
        active_paths.push((k, l));
    }

    let decomposition = cascaded_decomposition(&truth.tx_ris, &gammas, &truth.ris_rx, deployment)?;
    let exact_h = decomposition.composite();

    let mut r_active = DMatrix::zeros(n_rx, active_paths.len());
    let mut t_active = DMatrix::zeros(n_tx, active_paths.len());
    let mut xi_active = Vec::with_capacity(active_paths.len());
    for (i, &(k, l)) in active_paths.iter().enumerate() {
        r_active.set_column(i, &array_response(n_rx, design.ris_rx[k].paths[l].aoa));
        t_active.set_column(i, &array_response(n_tx, design.tx_ris[k].paths[0].aod));
        xi_active.push(decomposition.xi[(decomposition.row_of(k, l), decomposition.col_of(k, 0))]);
    }
    Ok(CustomizedChannel {
        r_active,
        t_active,
        xi_active,
        exact_h,
        gammas,
        active_paths,
        decomposition,
    })
}

/// Builds every reconfiguration of a selection. Refinement is applied to
/// the beamforming schemes only.
pub fn build_all_slots(
    selection: &PathSelection,
    design: &Subchannels,
    truth: &Subchannels,
    deployment: &Deployment,
) -> Result<Vec<CustomizedChannel>> {
    let refine = !selection.scheme.is_multiplexing();
    (0..selection.n_slots())
        .map(|m| build_customized_channel(selection, m, design, truth, deployment, refine))
        .collect()
}
