//! Marginal law of the increment process against `||psi||_alpha S`.
//!
//! Samples are taken `eps * width` apart, so for compactly supported
//! kernels they come from disjoint stretches of the source and are
//! independent.

use mollify_core::increments::{normalized_increment_with, IncrementOperator};
use mollify_core::paths::{simulate, standard_symmetric_stable, ProcessFamily};
use mollify_core::seeding::{rng_from_seed, seed_stream};
use mollify_core::stats;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Metric, Outcome, Table};

const STREAM_PATHS: u64 = 0;
const STREAM_REFERENCE: u64 = 1;
const QUANTILES: usize = 99;

pub fn run(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let ProcessFamily::StableLevy { alpha } = c.process else {
        return Err(CliError::validation("process", "stable-marginal needs a stable-levy source"));
    };
    let kernel = c.kernel_id.build()?;
    let (a, b) = kernel
        .effective_support()
        .ok_or_else(|| CliError::validation("kernel_id", "kernel has no effective support"))?;
    let op = IncrementOperator::new(&kernel, c.epsilon, c.grid.dt)?;
    let stride = ((c.epsilon * (b - a)) / c.grid.dt - 1e-9).ceil().max(1.0) as usize;
    let grid = op.source_grid(0.0, 1.0)?;
    // Nodes of [0, 1] at the stride.
    let per_path = ((1.0 / c.grid.dt).round() as usize + 1).div_ceil(stride);
    let n = c.grid.samples;
    let paths = n.div_ceil(per_path);

    let chunks = (0..paths as u64)
        .into_par_iter()
        .map(|p| -> Result<Vec<f64>, CliError> {
            let src = simulate(c.process, grid, seed_stream(c.seed, STREAM_PATHS, p))?;
            let inc = normalized_increment_with(&op, &src)?;
            Ok(inc.values().iter().step_by(stride).take(per_path).copied().collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sample: Vec<f64> = chunks.into_iter().flatten().take(n).collect();

    let norm = kernel.lalpha_norm(alpha)?;
    let mut rng = rng_from_seed(seed_stream(c.seed, STREAM_REFERENCE, 0));
    let reference: Vec<f64> = (0..n).map(|_| norm * standard_symmetric_stable(alpha, &mut rng)).collect();

    let ks = stats::ks_two_sample(&sample, &reference);
    let crit = stats::ks_critical_two_sample(sample.len(), reference.len(), c.tolerances.ks_level);

    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (s, r) = (sorted(&sample), sorted(&reference));
    let mut q = Table::new("quantiles.csv", &["p", "increment", "reference"]);
    for k in 1..=QUANTILES {
        let p = k as f64 / (QUANTILES + 1) as f64;
        let i = ((p * n as f64) as usize).min(n - 1);
        q.push(vec![p, s[i], r[i]]);
    }
    Ok(Outcome {
        metrics: vec![
            Metric::info("lalpha_norm", norm),
            Metric::info("samples", sample.len() as f64),
            Metric::info("ks_critical", crit),
            Metric::below("ks_two_sample", ks, crit),
        ],
        tables: vec![q],
    })
}
