//! Empirical covariance of the unit-scale process of Brownian motion.

use mollify_core::mollifiers::KernelId;
use mollify_core::spectral::{covariance_from_density, empirical_covariance, spectral_density, CovarianceSetup};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Metric, Outcome, Table};

/// Covariance target: closed forms where known, else the spectral integral.
fn target(kernel: KernelId) -> Option<fn(f64) -> f64> {
    match kernel {
        KernelId::OuExp | KernelId::OuBessel => Some(|t: f64| (-t.abs()).exp()),
        KernelId::Psi1 => Some(|t: f64| (1.0 - t.abs()).max(0.0)),
        _ => None,
    }
}

pub fn run(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let kernel = c.kernel_id.build()?;
    let setup = CovarianceSetup {
        replicas: c.replicas,
        horizon: c.grid.horizon,
        dt: c.grid.dt,
        seed: c.seed,
    };
    let report = match target(c.kernel_id) {
        Some(f) => empirical_covariance(&kernel, &c.grid.lags, setup, f)?,
        None => {
            let d = spectral_density(&kernel, 0.5)?;
            let values = c
                .grid
                .lags
                .iter()
                .map(|&t| covariance_from_density(&d, t))
                .collect::<Result<Vec<_>, _>>()?;
            let lags = c.grid.lags.clone();
            empirical_covariance(&kernel, &c.grid.lags, setup, move |t| {
                let k = lags.iter().position(|&l| l == t.abs()).expect("target is only read at the lags");
                values[k]
            })?
        }
    };
    let mut table = Table::new("covariance.csv", &["lag", "empirical", "se", "target", "z"]);
    for k in 0..report.lags.len() {
        let z = (report.empirical[k] - report.target[k]).abs() / report.standard_errors[k];
        table.push(vec![report.lags[k], report.empirical[k], report.standard_errors[k], report.target[k], z]);
    }
    Ok(Outcome {
        metrics: vec![
            Metric::at_most("covariance_max_z", report.max_z, c.tolerances.covariance_z),
            Metric::info("covariance_max_abs_deviation", report.max_abs_deviation),
        ],
        tables: vec![table],
    })
}
