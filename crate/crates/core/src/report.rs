//! CSV export of sweep results.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::montecarlo::{Metric, SweepResult};

fn number(v: f64) -> String {
    format!("{v:.11e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

pub fn header(metric: Metric) -> &'static str {
    match metric {
        Metric::SpectralEfficiency => "axis,scheme,mc_mean,mc_stderr,closed_form_approx,closed_form_upper,n_trials",
        Metric::BitErrorRate => "axis,scheme,ber,stderr,wilson_low,wilson_high,n_bits",
        Metric::Outage => "axis,scheme,outage,stderr,n_trials",
    }
}

/// Renders `result` as CSV with one header line and one line per row.
pub fn to_csv_string(result: &SweepResult) -> Result<String> {
    if result.rows.is_empty() {
        return Err(Error::Empty("sweep result has no rows".into()));
    }
    let mut out = String::new();
    writeln!(out, "{}", header(result.metric)).expect("writing to a String");
    for r in &result.rows {
        let mut line = format!("{},{},{},{}", number(r.axis_value), r.scheme, number(r.mean), number(r.stderr));
        match result.metric {
            Metric::SpectralEfficiency => {
                line += &format!(",{},{}", optional(r.closed_form_approx), optional(r.closed_form_upper));
            }
            Metric::BitErrorRate => {
                let (lo, hi) = r.interval.unzip();
                line += &format!(",{},{}", optional(lo), optional(hi));
            }
            Metric::Outage => {}
        }
        writeln!(out, "{line},{}", r.count).expect("writing to a String");
    }
    Ok(out)
}

/// Writes the CSV to `path`. Nothing is created when the result is empty.
pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let text = to_csv_string(result)?;
    std::fs::write(path, text)?;
    Ok(())
}
