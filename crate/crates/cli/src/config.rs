//! Experiment configuration: per-experiment defaults merged with a JSON file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mollify_core::{KernelId, LagSchedule, ProcessFamily};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// The named experiments, in listing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    WscheborCheck,
    SpectralTables,
    OuMatch,
    MomentRate,
    LevelProcess,
    DiscreteLag,
    StableMarginal,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::WscheborCheck,
        Experiment::SpectralTables,
        Experiment::OuMatch,
        Experiment::MomentRate,
        Experiment::LevelProcess,
        Experiment::DiscreteLag,
        Experiment::StableMarginal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::WscheborCheck => "wschebor-check",
            Experiment::SpectralTables => "spectral-tables",
            Experiment::OuMatch => "ou-match",
            Experiment::MomentRate => "moment-rate",
            Experiment::LevelProcess => "level-process",
            Experiment::DiscreteLag => "discrete-lag",
            Experiment::StableMarginal => "stable-marginal",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::WscheborCheck => {
                "occupation measure of the increment process against its Gaussian limit, plus the scaling reduction"
            }
            Experiment::SpectralTables => {
                "spectral density and covariance tables, sigma^2 identities, Fourier and class-membership checks"
            }
            Experiment::OuMatch => "empirical covariance of the unit-scale process against its closed form",
            Experiment::MomentRate => "second-moment rate function, its closed form and the Donsker-Varadhan rate",
            Experiment::LevelProcess => {
                "path-level snapshots: characteristic functional and L2-ball frequency against Wiener measure"
            }
            Experiment::DiscreteLag => "discrete lag sums: Gaussian limit, schedule validators and the coupling",
            Experiment::StableMarginal => "marginal law of the increment process of a symmetric stable motion",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::validation("experiment", format!("unknown experiment `{s}`")))
    }
}

/// Pass/fail thresholds. Defaults are the acceptance tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Kolmogorov distance of an occupation measure to its Gaussian limit.
    pub ks_to_phi: f64,
    /// Covariance deviations, in standard errors.
    pub covariance_z: f64,
    pub fourier_abs: f64,
    pub k0_abs: f64,
    pub sigma_sq_abs: f64,
    /// `sigma^2` against the covariance at zero from the density.
    pub sigma_sq_consistency: f64,
    pub rate_abs: f64,
    pub dv_abs: f64,
    pub char_functional_abs: f64,
    /// L2-ball frequency against the oracle, in combined standard errors.
    pub ball_z: f64,
    /// Level of the two-sample KS critical values.
    pub ks_level: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ks_to_phi: 0.05,
            covariance_z: 4.0,
            fourier_abs: 1e-6,
            k0_abs: 1e-9,
            sigma_sq_abs: 0.0,
            sigma_sq_consistency: 1e-4,
            rate_abs: 1e-6,
            dv_abs: 1e-8,
            char_functional_abs: 0.05,
            ball_z: 3.0,
            ks_level: 0.01,
        }
    }
}

/// Grid sizes and experiment-specific knobs. Each experiment reads only
/// the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Source grid step.
    pub dt: f64,
    /// Histogram bins of the occupation-density table.
    pub bins: usize,
    /// Time horizon of unit-scale simulations.
    pub horizon: f64,
    /// Covariance lags.
    pub lags: Vec<f64>,
    /// Rate-function abscissae.
    pub xs: Vec<f64>,
    /// Base times and `s`-grid points of the level process.
    pub t_count: usize,
    pub s_count: usize,
    /// Sample count of Monte Carlo references.
    pub samples: usize,
    /// Largest and smallest sample sizes of the discrete experiment.
    pub n: u64,
    pub n_small: u64,
    /// Fine steps per discrete step in the coupling.
    pub substeps: usize,
    pub scaling_epsilon: f64,
    pub scaling_replicas: usize,
    /// Grid steps per unit time of the scaling construction.
    pub scaling_resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dt: 2f64.powi(-20),
            bins: 64,
            horizon: 50.0,
            lags: vec![0.0, 0.25, 0.5, 0.75, 1.0, 2.0],
            xs: (1..=30).map(|k| k as f64 / 10.0).collect(),
            t_count: 1 << 14,
            s_count: 17,
            samples: 10_000,
            n: 1 << 18,
            n_small: 1 << 14,
            substeps: 4,
            scaling_epsilon: 2f64.powi(-6),
            scaling_replicas: 400,
            scaling_resolution: 64,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub kernel_id: KernelId,
    pub process: ProcessFamily,
    pub epsilon: f64,
    pub schedule: LagSchedule,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    /// The configuration that reproduces the acceptance run of `experiment`.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            kernel_id: KernelId::Psi1,
            process: ProcessFamily::Brownian,
            epsilon: 2f64.powi(-10),
            schedule: LagSchedule::PowerGamma { gamma: 0.6 },
            replicas: 20,
            seed: 0,
            output_dir: default_output(),
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
        };
        match experiment {
            Experiment::WscheborCheck | Experiment::DiscreteLag => {}
            Experiment::SpectralTables => {
                c.replicas = 1;
                c.grid.xs = (0..=200).map(|k| k as f64 / 4.0).collect();
                c.grid.lags = (0..=60).map(|k| k as f64 / 20.0).collect();
            }
            Experiment::OuMatch => {
                c.kernel_id = KernelId::OuExp;
                c.replicas = 200;
                c.epsilon = 1.0;
                c.grid.dt = 1.0 / 64.0;
                c.grid.lags = vec![0.0, 1.0, 2.0];
            }
            Experiment::MomentRate => {
                c.kernel_id = KernelId::OuExp;
                c.replicas = 1;
                c.epsilon = 1.0;
            }
            Experiment::LevelProcess => {
                c.replicas = 1;
                c.grid.dt = c.epsilon / 16.0;
                c.grid.samples = 200_000;
            }
            Experiment::StableMarginal => {
                c.process = ProcessFamily::StableLevy { alpha: 1.5 };
                c.replicas = 1;
                c.grid.dt = c.epsilon / 16.0;
            }
        }
        c
    }

    /// Merge a JSON document over the defaults of the experiment it names.
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        let user: Value = serde_json::from_str(text).map_err(|e| CliError::validation("config", e.to_string()))?;
        let obj = user
            .as_object()
            .ok_or_else(|| CliError::validation("config", "top level must be a JSON object"))?;
        let name = obj
            .get("experiment")
            .ok_or_else(|| CliError::validation("experiment", "missing field"))?
            .as_str()
            .ok_or_else(|| CliError::validation("experiment", "must be a string"))?;
        let experiment: Experiment = name.parse()?;
        let mut merged = serde_json::to_value(Self::defaults(experiment)).map_err(CliError::internal)?;
        merge(&mut merged, &user);
        let config: ExperimentConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".to_string() } else { path };
            CliError::validation(field, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs are plain data")
    }

    /// Domain checks, reported against the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::validation(field, msg));
        if let Err(e) = self.process.validate() {
            return bad("process", e.to_string());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("must be positive and finite, got {}", self.epsilon));
        }
        let g = &self.grid;
        if !(g.dt > 0.0 && g.dt.is_finite()) {
            return bad("grid.dt", format!("must be positive and finite, got {}", g.dt));
        }
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return bad("grid.horizon", format!("must be positive and finite, got {}", g.horizon));
        }
        if g.lags.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad("grid.lags", "lags must be finite and nonnegative".into());
        }
        if g.xs.iter().any(|x| !x.is_finite()) {
            return bad("grid.xs", "abscissae must be finite".into());
        }
        if g.bins == 0 {
            return bad("grid.bins", "must be positive".into());
        }
        if g.s_count < 2 {
            return bad("grid.s_count", "need at least 2 points".into());
        }
        if g.t_count == 0 {
            return bad("grid.t_count", "must be positive".into());
        }
        if g.substeps == 0 {
            return bad("grid.substeps", "must be positive".into());
        }
        if !(g.scaling_epsilon > 0.0 && g.scaling_epsilon < 1.0) {
            return bad("grid.scaling_epsilon", format!("must lie in (0, 1), got {}", g.scaling_epsilon));
        }
        if g.scaling_resolution == 0 {
            return bad("grid.scaling_resolution", "must be positive".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.ks_to_phi", t.ks_to_phi),
            ("tolerances.covariance_z", t.covariance_z),
            ("tolerances.fourier_abs", t.fourier_abs),
            ("tolerances.k0_abs", t.k0_abs),
            ("tolerances.sigma_sq_abs", t.sigma_sq_abs),
            ("tolerances.sigma_sq_consistency", t.sigma_sq_consistency),
            ("tolerances.rate_abs", t.rate_abs),
            ("tolerances.dv_abs", t.dv_abs),
            ("tolerances.char_functional_abs", t.char_functional_abs),
            ("tolerances.ball_z", t.ball_z),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, format!("must be nonnegative and finite, got {v}"));
            }
        }
        if !(t.ks_level > 0.0 && t.ks_level < 1.0) {
            return bad("tolerances.ks_level", format!("must lie in (0, 1), got {}", t.ks_level));
        }
        self.validate_for_experiment()
    }

    fn validate_for_experiment(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::validation(field, msg));
        let g = &self.grid;
        let min_replicas = match self.experiment {
            Experiment::OuMatch => 2,
            _ => 1,
        };
        if self.replicas < min_replicas {
            return bad("replicas", format!("need at least {min_replicas}"));
        }
        match self.experiment {
            Experiment::WscheborCheck => {
                if matches!(self.process, ProcessFamily::StableLevy { .. }) {
                    return bad("process", "the Gaussian limit needs a brownian or fbm source".into());
                }
                if self.epsilon >= 1.0 {
                    return bad("epsilon", format!("must lie in (0, 1), got {}", self.epsilon));
                }
                if g.scaling_replicas < 2 {
                    return bad("grid.scaling_replicas", "need at least 2".into());
                }
            }
            Experiment::OuMatch => {
                if self.process != ProcessFamily::Brownian {
                    return bad("process", "covariance matching is defined for a brownian source".into());
                }
                if g.lags.is_empty() {
                    return bad("grid.lags", "need at least one lag".into());
                }
                for &l in &g.lags {
                    let k = l / g.dt;
                    if (k - k.round()).abs() > 1e-9 {
                        return bad("grid.lags", format!("lag {l} is not a multiple of grid.dt = {}", g.dt));
                    }
                }
            }
            Experiment::LevelProcess => {
                if self.process != ProcessFamily::Brownian {
                    return bad("process", "the level process is defined for a brownian source".into());
                }
                if self.epsilon >= 1.0 {
                    return bad("epsilon", format!("must lie in (0, 1), got {}", self.epsilon));
                }
                if g.samples < 2 {
                    return bad("grid.samples", "need at least 2 oracle samples".into());
                }
            }
            Experiment::DiscreteLag => {
                if g.n_small < 16 || g.n_small >= g.n {
                    return bad("grid.n_small", format!("need 16 <= n_small < n, got {} and {}", g.n_small, g.n));
                }
                if let Err(e) = self.schedule.check_invariants(g.n_small, g.n) {
                    return bad("schedule", e.to_string());
                }
            }
            Experiment::StableMarginal => {
                if self.epsilon >= 1.0 {
                    return bad("epsilon", format!("must lie in (0, 1), got {}", self.epsilon));
                }
                if g.samples < 2 {
                    return bad("grid.samples", "need at least 2 samples".into());
                }
            }
            Experiment::SpectralTables | Experiment::MomentRate => {
                if matches!(self.process, ProcessFamily::StableLevy { .. }) {
                    return bad("process", "spectral quantities need a brownian or fbm source".into());
                }
            }
        }
        Ok(())
    }
}

/// Recursive object merge; `process` is a tagged union and is replaced
/// whole, so switching families does not inherit stale fields.
fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if k != "process" && slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::defaults(e);
            let back = ExperimentConfig::from_json_str(&c.to_json()).unwrap();
            assert_eq!(back, c, "{e}");
        }
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = ExperimentConfig::from_json_str(r#"{"experiment": "ou-match", "grid": {"horizon": 20}}"#).unwrap();
        assert_eq!(c.grid.horizon, 20.0);
        assert_eq!(c.grid.lags, vec![0.0, 1.0, 2.0]);
        assert_eq!(c.kernel_id, KernelId::OuExp);
    }

    #[test]
    fn process_is_replaced_whole() {
        let c = ExperimentConfig::from_json_str(
            r#"{"experiment": "stable-marginal", "process": {"family": "fbm", "hurst": 0.3}}"#,
        )
        .unwrap();
        assert_eq!(c.process, ProcessFamily::Fbm { hurst: 0.3 });
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_json_str(text) {
            Err(CliError::Validation { field, .. }) => field,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(r#"{"experiment": "ou-match", "kernel_id": "nope"}"#), "kernel_id");
        assert_eq!(field_of(r#"{"experiment": "nope"}"#), "experiment");
        assert_eq!(field_of(r#"{"kernel_id": "psi1"}"#), "experiment");
        assert_eq!(field_of(r#"{"experiment": "ou-match", "grid": {"bins": -1}}"#), "grid.bins");
        assert_eq!(field_of(r#"{"experiment": "ou-match", "grid": {"colour": 1}}"#), "grid.colour");
        assert_eq!(field_of(r#"{"experiment": "ou-match", "epsilon": -1}"#), "epsilon");
        assert_eq!(
            field_of(r#"{"experiment": "discrete-lag", "schedule": "power:gamma=2"}"#),
            "schedule"
        );
        assert_eq!(
            field_of(r#"{"experiment": "wschebor-check", "process": {"family": "stable-levy", "alpha": 1.5}}"#),
            "process"
        );
        assert_eq!(field_of(r#"{"experiment": "ou-match", "grid": {"lags": [0.3]}}"#), "grid.lags");
        assert_eq!(field_of(r#"{"experiment": "ou-match", "tolerances": {"ks_level": 2}}"#), "tolerances.ks_level");
    }
}
