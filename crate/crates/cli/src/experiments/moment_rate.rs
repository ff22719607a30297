//! Rate function of the second moment through the cumulant of the
//! spectral density, and the Donsker-Varadhan rate on exponential tilts.

use mollify_core::ldp::{dv_rate, exponential_tilt, moment_rate, DV_ORDER};
use mollify_core::mollifiers::KernelId;
use mollify_core::spectral::{sigma_sq, spectral_density};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Metric, Outcome, Table};

pub const CLOSED_FORM_POINTS: [f64; 3] = [0.5, 1.0, 2.0];
pub const TILTS: [f64; 2] = [1.0, 2.0];
const CONVEXITY_TOL: f64 = 1e-6;

/// `(x + 1/x - 2) / 4`, the rate for a unit OU density.
pub fn ou_rate(x: f64) -> f64 {
    (x + 1.0 / x - 2.0) / 4.0
}

pub fn run(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let t = &c.tolerances;
    let kernel = c.kernel_id.build()?;
    let h = c.process.self_similarity_index();
    let density = spectral_density(&kernel, h)?;
    let variance = sigma_sq(&kernel, h)?;
    let closed = matches!(c.kernel_id, KernelId::OuExp | KernelId::OuBessel) && h == 0.5;

    let curve = moment_rate(&density, &c.grid.xs)?;
    let mut table = Table::new("rate.csv", &["x", "rate", "closed_form"]);
    for (&x, &v) in curve.xs.iter().zip(&curve.values) {
        table.push(vec![x, v, if closed { ou_rate(x) } else { f64::NAN }]);
    }

    let mut metrics = vec![Metric::info("variance", variance)];
    if closed {
        let at = moment_rate(&density, &CLOSED_FORM_POINTS)?;
        let err = at
            .xs
            .iter()
            .zip(&at.values)
            .map(|(&x, &v)| (v - ou_rate(x)).abs())
            .fold(0.0, f64::max);
        metrics.push(Metric::at_most("rate_closed_form_error", err, t.rate_abs));
    }
    let at_var = moment_rate(&density, &[variance])?.values[0];
    metrics.push(Metric::at_most("rate_at_variance", at_var, t.rate_abs));
    metrics.push(Metric::flag("rate_convex", curve.is_convex(CONVEXITY_TOL)));
    metrics.push(Metric::info("rate_minimizer", curve.minimizer));

    let mut dv_err: f64 = 0.0;
    for &theta in &TILTS {
        let v = dv_rate(exponential_tilt(theta), None, DV_ORDER)?;
        dv_err = dv_err.max((v - theta * theta / 8.0).abs());
    }
    metrics.push(Metric::at_most("dv_tilt_error", dv_err, t.dv_abs));
    metrics.push(Metric::at_most("dv_at_one", dv_rate(|_| 1.0, None, DV_ORDER)?.abs(), t.dv_abs));

    Ok(Outcome {
        metrics,
        tables: vec![table],
    })
}
