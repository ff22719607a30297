//! Path-level snapshots of one Brownian path against Wiener measure.

use mollify_core::levelproc::{check_ball, check_char_functional, extract_cloud};
use mollify_core::paths::{simulate, Grid};
use mollify_core::seeding::seed_stream;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Metric, Outcome, Table};

pub const ATOM_SETS: [&[(f64, f64)]; 3] = [&[(1.0, 1.0)], &[(0.5, 1.0)], &[(0.5, 1.0), (1.0, 1.0)]];
pub const BALL_RADIUS: f64 = 1.0;

const STREAM_PATH: u64 = 0;
const STREAM_ORACLE: u64 = 1;

pub fn run(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let g = &c.grid;
    let grid = Grid::covering(0.0, 1.0 + c.epsilon, g.dt)?;
    let path = simulate(c.process, grid, seed_stream(c.seed, STREAM_PATH, 0))?;
    let cloud = extract_cloud(&path, c.epsilon, g.t_count, g.s_count)?;

    let mut metrics = Vec::new();
    let mut cf = Table::new("char_functional.csv", &["set", "empirical_re", "empirical_im", "limit", "deviation", "se"]);
    for (k, atoms) in ATOM_SETS.iter().enumerate() {
        let chk = check_char_functional(&cloud, atoms)?;
        metrics.push(Metric::at_most(
            &format!("char_functional_deviation_{k}"),
            chk.deviation,
            c.tolerances.char_functional_abs,
        ));
        cf.push(vec![k as f64, chk.empirical_re, chk.empirical_im, chk.limit, chk.deviation, chk.standard_error]);
    }

    let center = vec![0.0; g.s_count];
    let ball = check_ball(&cloud, &center, BALL_RADIUS, g.samples, seed_stream(c.seed, STREAM_ORACLE, 0))?;
    metrics.push(Metric::info("ball_frequency", ball.frequency));
    metrics.push(Metric::info("ball_oracle", ball.oracle.value));
    metrics.push(Metric::at_most("ball_z", ball.z, c.tolerances.ball_z));
    let mut bt = Table::new(
        "ball.csv",
        &["radius", "frequency", "binomial_se", "batch_se", "oracle", "oracle_se", "z"],
    );
    bt.push(vec![
        ball.radius,
        ball.frequency,
        ball.binomial_se,
        ball.batch_se,
        ball.oracle.value,
        ball.oracle.standard_error,
        ball.z,
    ]);
    Ok(Outcome {
        metrics,
        tables: vec![cf, bt],
    })
}
