//! One module per named experiment. Each returns its metrics and tables
//! without touching the filesystem.

pub mod discrete_lag;
pub mod level_process;
pub mod moment_rate;
pub mod ou_match;
pub mod spectral_tables;
pub mod stable_marginal;
pub mod wschebor;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::report::Outcome;

pub fn execute(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    match c.experiment {
        Experiment::WscheborCheck => wschebor::run(c),
        Experiment::SpectralTables => spectral_tables::run(c),
        Experiment::OuMatch => ou_match::run(c),
        Experiment::MomentRate => moment_rate::run(c),
        Experiment::LevelProcess => level_process::run(c),
        Experiment::DiscreteLag => discrete_lag::run(c),
        Experiment::StableMarginal => stable_marginal::run(c),
    }
}
