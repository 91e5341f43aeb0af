//! Quick invariant checks runnable from the command line.

use num_complex::Complex64;

use crate::analysis::{crossing_point, crossing_point_closed_form, exp_integral_ei, se_sm_approx, se_sm_upper, ClosedFormParams};
use crate::channel::{array_response, dirichlet_sum};
use crate::config::SystemConfig;
use crate::customization::{build_all_slots, select_for_scheme, Scheme, DEFAULT_SEARCH_CAP};
use crate::geometry::{deployment_at, RX_CENTER};
use crate::montecarlo::{estimate_ergodic_se, AngleEpoch, Execution, TrialPlan};
use crate::transceiver::run_scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Runs every check; never panics on a failed invariant.
pub fn run_selftest(config: &SystemConfig) -> Vec<Check> {
    let mut out = Vec::new();

    let ei = exp_integral_ei(-1.0).unwrap_or(f64::NAN);
    out.push(check("ei_reference", (ei + 0.219_383_934_395_520).abs() < 1e-12, format!("Ei(-1) = {ei:.15}")));

    let c = [0.3, 0.05, 2.0];
    let (approx, upper) = (se_sm_approx(&c).unwrap_or(f64::NAN), se_sm_upper(&c).unwrap_or(f64::NAN));
    out.push(check("jensen_sm", approx < upper, format!("approx {approx:.6} < upper {upper:.6}")));

    let n = 97;
    let delta = 0.37;
    let direct: Complex64 = array_response(n, 0.0).dotc(&array_response(n, delta));
    let closed = dirichlet_sum(n, delta);
    out.push(check("dirichlet_closed_form", (direct - closed).norm() < 1e-12, format!("|diff| = {:.3e}", (direct - closed).norm())));

    let mut two = config.clone();
    two.n_rx = 2;
    let params = ClosedFormParams::equal_scale(&two);
    let detail;
    let ok = match (crossing_point(&params), crossing_point_closed_form(&params)) {
        (Ok(root), Ok(Some(cf))) => {
            detail = format!("numeric {root:.12e} W, closed form {cf:.12e} W");
            rel(root, cf) < 1e-9
        }
        (r, c) => {
            detail = format!("numeric {r:?}, closed form {c:?}");
            false
        }
    };
    out.push(check("crossing_point_n_rx_2", ok, detail));

    match deployment_at(config, RX_CENTER) {
        Ok(dep) => {
            let sane = dep.ris_element_counts.iter().zip(&dep.path_losses).all(|(&n, &rho)| (n as f64 * rho - config.c_scale).abs() <= 0.5 * rho * (1.0 + 1e-12));
            out.push(check("element_count_rounding", sane, format!("counts {:?}", dep.ris_element_counts)));
        }
        Err(e) => out.push(check("element_count_rounding", false, e.to_string())),
    }

    let reductions = (|| -> crate::Result<bool> {
        let mut ae = AngleEpoch::draw(config, config.rng_seed, 0)?;
        ae.redraw_fading(config, config.rng_seed, 0, 0);
        let arrivals = ae.design.rx_arrivals();
        let mut same = true;
        for (a, b) in [(Scheme::Sm, Scheme::Ds(Some(1))), (Scheme::Bf, Scheme::Db(Some(1)))] {
            let sa = select_for_scheme(&arrivals, a, config.m_r, config.n_rx, DEFAULT_SEARCH_CAP)?;
            let sb = select_for_scheme(&arrivals, b, config.m_r, config.n_rx, DEFAULT_SEARCH_CAP)?;
            let ra = run_scheme(a, &build_all_slots(&sa, &ae.design, &ae.truth, &ae.deployment)?, config, 10.0)?;
            let rb = run_scheme(b, &build_all_slots(&sb, &ae.design, &ae.truth, &ae.deployment)?, config, 10.0)?;
            same &= ra.se_bits_per_hz.to_bits() == rb.se_bits_per_hz.to_bits();
        }
        Ok(same)
    })();
    out.push(match reductions {
        Ok(ok) => check("single_slot_reductions", ok, "DS(1) vs SM, DB(1) vs BF".into()),
        Err(e) => check("single_slot_reductions", false, e.to_string()),
    });

    let determinism = (|| -> crate::Result<bool> {
        let axis = "E_dBm=0:10:20".parse()?;
        let mut plan = TrialPlan::new(axis, vec![Scheme::Sm, Scheme::Bf], config.rng_seed);
        plan.n_angle_epochs = 4;
        plan.n_fading_epochs = 2;
        let par = estimate_ergodic_se(&plan, config)?;
        plan.execution = Execution::Sequential;
        Ok(par == estimate_ergodic_se(&plan, config)?)
    })();
    out.push(match determinism {
        Ok(ok) => check("sequential_parallel_agree", ok, "3-point SE sweep".into()),
        Err(e) => check("sequential_parallel_agree", false, e.to_string()),
    });

    out
}
