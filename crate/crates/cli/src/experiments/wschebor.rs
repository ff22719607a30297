//! Occupation measure of the normalised increment process against
//! `N(0, sigma^2)`, and the scaling reduction to the unit-scale process.

use mollify_core::increments::{normalized_increment_with, unit_scale_with, IncrementOperator};
use mollify_core::measures::{ks_distance, occupation_measure, occupation_measure_on};
use mollify_core::numerics::special::std_normal_cdf;
use mollify_core::paths::simulate;
use mollify_core::seeding::seed_stream;
use mollify_core::spectral::sigma_sq;
use mollify_core::{stats, EmpiricalMeasure};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Metric, Outcome, Table};

const STREAM_REPLICAS: u64 = 0;
const STREAM_SCALED: u64 = 1;
const STREAM_UNIT: u64 = 2;

/// Refinement factor of the second epsilon.
pub const REFINEMENT: f64 = 4.0;

pub fn run(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let kernel = c.kernel_id.build()?;
    let h = c.process.self_similarity_index();
    let sigma = sigma_sq(&kernel, h)?.sqrt();
    let phi = |x: f64| std_normal_cdf(x / sigma);
    let eps = [c.epsilon, c.epsilon / REFINEMENT];
    let ops = eps
        .iter()
        .map(|&e| IncrementOperator::new(&kernel, e, c.grid.dt))
        .collect::<Result<Vec<_>, _>>()?;
    // The coarse operator has the wider reach, so its grid serves both.
    let grid = ops[0].source_grid(0.0, 1.0)?;

    let per_replica = (0..c.replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, EmpiricalMeasure), CliError> {
            let path = simulate(c.process, grid, seed_stream(c.seed, STREAM_REPLICAS, i))?;
            let mut ks = Vec::with_capacity(ops.len());
            let mut first = None;
            for op in &ops {
                let mu = occupation_measure(&normalized_increment_with(op, &path)?.values)?;
                ks.push(ks_distance(&mu, phi));
                first.get_or_insert(mu);
            }
            Ok((ks, first.expect("two operators")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut ks_table = Table::new("ks.csv", &["replica", "epsilon", "ks"]);
    let mut ks_by_eps = vec![Vec::new(); eps.len()];
    for (i, (ks, _)) in per_replica.iter().enumerate() {
        for (j, &d) in ks.iter().enumerate() {
            ks_table.push(vec![i as f64, eps[j], d]);
            ks_by_eps[j].push(d);
        }
    }
    let med: Vec<f64> = ks_by_eps.iter().map(|v| stats::median(v)).collect();

    let mut metrics = vec![
        Metric::info("sigma", sigma),
        Metric::at_most("ks_to_phi", med[0], c.tolerances.ks_to_phi),
        Metric::info("ks_to_phi_max", ks_by_eps[0].iter().copied().fold(0.0, f64::max)),
        Metric::info("ks_to_phi_refined", med[1]),
        Metric::flag("ks_decreases", med[1] < med[0]),
    ];

    let (scaling_metrics, scaling_table) = scaling(c, &kernel)?;
    metrics.extend(scaling_metrics);

    Ok(Outcome {
        metrics,
        tables: vec![ks_table, histogram(&per_replica[0].1, sigma, c.grid.bins), scaling_table],
    })
}

/// Occupation density of replica 0 on `[-4 sigma, 4 sigma]` next to the
/// Gaussian density.
fn histogram(mu: &EmpiricalMeasure, sigma: f64, bins: usize) -> Table {
    let mut t = Table::new("occupation_density.csv", &["left", "right", "density", "gaussian"]);
    let (lo, hi) = (-4.0 * sigma, 4.0 * sigma);
    let w = (hi - lo) / bins as f64;
    for k in 0..bins {
        let (a, b) = (lo + k as f64 * w, lo + (k + 1) as f64 * w);
        let mass = mu.cdf(b) - mu.cdf(a);
        let gauss = std_normal_cdf(b / sigma) - std_normal_cdf(a / sigma);
        t.push(vec![a, b, mass / w, gauss / w]);
    }
    t
}

/// Second moments of `mu_{X^eps}` against time averages of `X^1` over
/// `[0, 1/eps]`: equal in law by self-similarity.
fn scaling(c: &ExperimentConfig, kernel: &mollify_core::SignedKernel) -> Result<(Vec<Metric>, Table), CliError> {
    let g = &c.grid;
    let eps = g.scaling_epsilon;
    let unit_dt = 1.0 / g.scaling_resolution as f64;
    let scaled_op = IncrementOperator::new(kernel, eps, eps * unit_dt)?;
    let unit_op = IncrementOperator::new(kernel, 1.0, unit_dt)?;
    let scaled_grid = scaled_op.source_grid(0.0, 1.0)?;
    let horizon = 1.0 / eps;
    let unit_grid = unit_op.source_grid(0.0, horizon)?;

    let pairs = (0..g.scaling_replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64), CliError> {
            let a = simulate(c.process, scaled_grid, seed_stream(c.seed, STREAM_SCALED, i))?;
            let mu = occupation_measure(&normalized_increment_with(&scaled_op, &a)?.values)?;
            let b = simulate(c.process, unit_grid, seed_stream(c.seed, STREAM_UNIT, i))?;
            let nu = occupation_measure_on(&unit_scale_with(&unit_op, &b)?, 0.0, horizon)?;
            Ok((mu.integrate(|x| x * x), nu.integrate(|x| x * x)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let ks = stats::ks_two_sample(&a, &b);
    let crit = stats::ks_critical_two_sample(a.len(), b.len(), c.tolerances.ks_level);
    let mut t = Table::new("scaling.csv", &["replica", "second_moment_scaled", "second_moment_unit"]);
    for (i, (x, y)) in pairs.into_iter().enumerate() {
        t.push(vec![i as f64, x, y]);
    }
    Ok((vec![Metric::below("ks_scaling", ks, crit)], t))
}
