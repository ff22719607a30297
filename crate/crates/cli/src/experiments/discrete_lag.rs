//! Lag sums of i.i.d. innovations: Gaussian limit of `m_n`, the schedule
//! validators, and the coupling with the continuum occupation measure.

use mollify_core::discrete::{
    coupled_pair, coupling_distance, discrete_measure, innovations, validate_ldp_schedule, validate_lln_schedule,
    Innovation, Subsequence, Verdict,
};
use mollify_core::measures::ks_distance;
use mollify_core::numerics::special::std_normal_cdf;
use mollify_core::seeding::seed_stream;
use mollify_core::{stats, LagSchedule};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Metric, Outcome, Table};

const STREAM_GAUSSIAN: u64 = 0;
const STREAM_UNIFORM: u64 = 1;
const STREAM_COUPLING_SMALL: u64 = 2;
const STREAM_COUPLING: u64 = 3;

pub const LLN_DELTA: f64 = 0.25;
/// Exponent `a` of the power-schedule subsequence.
pub const POWER_SUBSEQUENCE_A: f64 = 2.0;
pub const LDP_RANGE: (u64, u64) = (1 << 10, 1 << 40);

pub fn run(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let g = &c.grid;
    let n = g.n as usize;
    let r = c.schedule.eval(g.n) as usize;

    let ks = (0..c.replicas as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64), CliError> {
            let one = |law, stream| -> Result<f64, CliError> {
                let xs = innovations(law, n + r, seed_stream(c.seed, stream, i));
                Ok(ks_distance(&discrete_measure(&xs, r)?, std_normal_cdf))
            };
            Ok((one(Innovation::Gaussian, STREAM_GAUSSIAN)?, one(Innovation::Uniform, STREAM_UNIFORM)?))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut ks_table = Table::new("ks.csv", &["replica", "ks_gaussian", "ks_uniform"]);
    for (i, &(a, b)) in ks.iter().enumerate() {
        ks_table.push(vec![i as f64, a, b]);
    }
    let (ga, un): (Vec<f64>, Vec<f64>) = ks.into_iter().unzip();

    let mut metrics = vec![
        Metric::info("lag", r as f64),
        Metric::at_most("ks_to_phi_gaussian", stats::median(&ga), c.tolerances.ks_to_phi),
        Metric::at_most("ks_to_phi_uniform", stats::median(&un), c.tolerances.ks_to_phi),
    ];

    let power = LagSchedule::PowerGamma { gamma: 0.6 };
    let sub = Subsequence::for_power_schedule(0.6, POWER_SUBSEQUENCE_A);
    let power_rep = validate_lln_schedule(&power, LLN_DELTA, sub, 2000)?;
    let overlog_rep = validate_lln_schedule(&LagSchedule::OverLog, LLN_DELTA, Subsequence::ExpSquare, 25)?;
    let log_rep = validate_ldp_schedule(&LagSchedule::Log, LDP_RANGE)?;
    metrics.push(Metric::flag("lln_power_example", power_rep.overall.passed()));
    metrics.push(Metric::flag("lln_overlog_example", overlog_rep.overall.passed()));
    metrics.push(Metric::flag(
        "log_schedule_rejected",
        log_rep.log_bounded == Verdict::Fail && log_rep.sqrt_divergent == Verdict::Fail,
    ));
    let own = validate_ldp_schedule(&c.schedule, LDP_RANGE)?;
    metrics.push(Metric::info("schedule_eps_log_n_slope", own.eps_log_n_slope));
    metrics.push(Metric::info("schedule_eps_sqrt_n_slope", own.eps_sqrt_n_slope));

    let mut coupling = Table::new("coupling.csv", &["replica", "n", "lag", "distance", "bound"]);
    let mut medians = Vec::new();
    let mut within = 0usize;
    for (size, stream) in [(g.n_small as usize, STREAM_COUPLING_SMALL), (n, STREAM_COUPLING)] {
        let rows = (0..c.replicas as u64)
            .into_par_iter()
            .map(|i| -> Result<(usize, f64, f64), CliError> {
                let p = coupled_pair(size, &c.schedule, g.substeps, seed_stream(c.seed, stream, i))?;
                Ok((p.r, coupling_distance(&p.discrete, &p.continuum)?, p.coupling_bound()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (i, &(lag, d, b)) in rows.iter().enumerate() {
            coupling.push(vec![i as f64, size as f64, lag as f64, d, b]);
            within += usize::from(d <= b);
        }
        medians.push(stats::median(&rows.iter().map(|x| x.1).collect::<Vec<_>>()));
    }
    metrics.push(Metric::info("coupling_median_small", medians[0]));
    metrics.push(Metric::info("coupling_median", medians[1]));
    metrics.push(Metric::flag("coupling_decreases", medians[1] < medians[0]));
    metrics.push(Metric::info(
        "coupling_within_bound_fraction",
        within as f64 / (2 * c.replicas) as f64,
    ));

    let mut sched = Table::new("schedule.csv", &["n", "lag", "epsilon", "eps_log_n", "eps_sqrt_n"]);
    let mut m = 16u64;
    while m <= g.n {
        let e = c.schedule.epsilon(m);
        let mf = m as f64;
        sched.push(vec![mf, c.schedule.eval(m) as f64, e, e * mf.ln(), e * mf.sqrt()]);
        m *= 2;
    }

    Ok(Outcome {
        metrics,
        tables: vec![ks_table, coupling, sched],
    })
}
