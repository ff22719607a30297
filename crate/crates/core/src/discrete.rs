//! Partial-sum increment measures with unbounded lag:
//! `m_n = (1/n) sum_{k=1..n} delta_{(S_{k+r_n} - S_k) / sqrt(r_n)}`, lag
//! schedules and numerical checks of their asymptotic hypotheses, and the
//! coupling with the continuum occupation measure of the same path.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{normalized_increment_with, IncrementOperator};
use crate::measures::{dbl_distance, occupation_measure, wasserstein1, DblBounds, EmpiricalMeasure};
use crate::mollifiers::kernel_psi1;
use crate::paths::{simulate_brownian, GridPath};
use crate::seeding::rng_from_seed;
use crate::stats;

/// Lag sequence `n -> r_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum LagSchedule {
    /// `floor(n^gamma)`
    PowerGamma { gamma: f64 },
    /// `floor(n / log n)`
    OverLog,
    /// `floor(log n)`
    Log,
    Constant { r: u64 },
    /// Step function from a table of `(n, r)` rows; `r_n` is the entry of the
    /// largest tabulated `n' <= n` (the first row below the table).
    Custom { source: String, table: Vec<(u64, u64)> },
}

impl LagSchedule {
    /// `r_n` for real `n`, so that huge subsequence indices stay finite.
    pub fn eval_f(&self, n: f64) -> f64 {
        let r = match self {
            LagSchedule::PowerGamma { gamma } => n.powf(*gamma).floor(),
            LagSchedule::OverLog => {
                if n < 3.0 {
                    1.0
                } else {
                    (n / n.ln()).floor()
                }
            }
            LagSchedule::Log => n.ln().floor(),
            LagSchedule::Constant { r } => *r as f64,
            LagSchedule::Custom { table, .. } => {
                let i = table.partition_point(|&(m, _)| (m as f64) <= n);
                table[i.saturating_sub(1)].1 as f64
            }
        };
        r.clamp(1.0, n.max(1.0))
    }

    pub fn eval(&self, n: u64) -> u64 {
        self.eval_f(n as f64) as u64
    }

    /// `eps_n = r_n / n`.
    pub fn epsilon_f(&self, n: f64) -> f64 {
        self.eval_f(n) / n
    }

    pub fn epsilon(&self, n: u64) -> f64 {
        self.epsilon_f(n as f64)
    }

    /// `r_n >= 1`, `eps_n in (0, 1]` and `eps_n` nonincreasing along
    /// `n = 2^k` for `2^k` in `[n_min, n_max]`.
    pub fn check_invariants(&self, n_min: u64, n_max: u64) -> Result<()> {
        let mut prev = f64::INFINITY;
        let mut n = n_min.max(1).next_power_of_two();
        while n <= n_max {
            let e = self.epsilon(n);
            if self.eval(n) < 1 || !(e > 0.0 && e <= 1.0) {
                return Err(Error::param("schedule", format!("eps_{n} = {e} outside (0, 1]")));
            }
            if e > prev * (1.0 + 1e-12) {
                return Err(Error::param("schedule", format!("eps_n increases at n = {n}")));
            }
            prev = e;
            n *= 2;
        }
        Ok(())
    }

    fn parse_table(path: &str) -> Result<Vec<(u64, u64)>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::param("schedule", format!("cannot read table {path}: {e}")))?;
        let mut table = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('n') {
                continue;
            }
            let mut parts = line.split(|c| c == ',' || char::is_whitespace(c)).filter(|s| !s.is_empty());
            let row = (|| -> Option<(u64, u64)> {
                let n = parts.next()?.parse().ok()?;
                let r = parts.next()?.parse().ok()?;
                Some((n, r))
            })()
            .ok_or_else(|| Error::param("schedule", format!("{path}:{}: expected `n,r`", i + 1)))?;
            table.push(row);
        }
        if table.is_empty() {
            return Err(Error::param("schedule", format!("table {path} has no rows")));
        }
        table.sort_unstable();
        Ok(table)
    }
}

impl fmt::Display for LagSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LagSchedule::PowerGamma { gamma } => write!(f, "power:gamma={gamma}"),
            LagSchedule::OverLog => write!(f, "overlog"),
            LagSchedule::Log => write!(f, "log"),
            LagSchedule::Constant { r } => write!(f, "constant:r={r}"),
            LagSchedule::Custom { source, .. } => write!(f, "custom:{source}"),
        }
    }
}

impl FromStr for LagSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let value = |key: &str| -> Result<&str> {
            arg.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .ok_or_else(|| Error::param("schedule", format!("expected `{kind}:{key}=<value>`, got `{s}`")))
        };
        match kind {
            "power" => {
                let gamma: f64 = value("gamma")?
                    .parse()
                    .map_err(|_| Error::param("schedule", format!("bad gamma in `{s}`")))?;
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::param("schedule", format!("gamma must lie in (0, 1), got {gamma}")));
                }
                Ok(LagSchedule::PowerGamma { gamma })
            }
            "overlog" if arg.is_empty() => Ok(LagSchedule::OverLog),
            "log" if arg.is_empty() => Ok(LagSchedule::Log),
            "constant" => {
                let r: u64 = value("r")?
                    .parse()
                    .map_err(|_| Error::param("schedule", format!("bad r in `{s}`")))?;
                if r == 0 {
                    return Err(Error::param("schedule", "constant lag must be positive"));
                }
                Ok(LagSchedule::Constant { r })
            }
            "custom" if !arg.is_empty() => Ok(LagSchedule::Custom {
                source: arg.to_string(),
                table: Self::parse_table(arg)?,
            }),
            _ => Err(Error::param(
                "schedule",
                format!("unknown schedule `{s}` (power:gamma=<g>, overlog, log, constant:r=<r>, custom:<file>)"),
            )),
        }
    }
}

impl Serialize for LagSchedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LagSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Innovation laws, all centred with unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
    /// `Exp(1) - 1`.
    Exponential,
}

pub fn innovations(law: Innovation, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let root3 = 3f64.sqrt();
    (0..len)
        .map(|_| match law {
            Innovation::Gaussian => StandardNormal.sample(&mut rng),
            Innovation::Uniform => root3 * (2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0),
            Innovation::Exponential => Distribution::<f64>::sample(&rand_distr::Exp1, &mut rng) - 1.0,
        })
        .collect()
}

/// Sliding sums `V_k = (S_{k+r} - S_k) / sqrt r`, `k = 1..n`, with
/// `n = xs.len() - r`.
pub fn lag_sums(xs: &[f64], r: usize) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::param("r", "lag must be positive"));
    }
    if xs.len() < r + 1 {
        return Err(Error::Length(format!("need at least r + 1 = {} innovations, got {}", r + 1, xs.len())));
    }
    let n = xs.len() - r;
    // Compensated prefix sums (hi, lo), so differences stay exact to a few ulps.
    let mut prefix = Vec::with_capacity(xs.len() + 1);
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    prefix.push((hi, lo));
    for &x in xs {
        let t = hi + x;
        lo += if hi.abs() >= x.abs() { (hi - t) + x } else { (x - t) + hi };
        hi = t;
        prefix.push((hi, lo));
    }
    let scale = 1.0 / (r as f64).sqrt();
    Ok((1..=n)
        .map(|k| ((prefix[k + r].0 - prefix[k].0) + (prefix[k + r].1 - prefix[k].1)) * scale)
        .collect())
}

/// `m_n` from innovations padded to length `n + r`.
pub fn discrete_measure(xs: &[f64], r: usize) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::from_samples(&lag_sums(xs, r)?)
}

/// Verdict of a finite-range check of an asymptotic condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
            _ => Verdict::Inconclusive,
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Subsequence `k -> n_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Subsequence {
    /// `floor(k^exponent)`
    Power { exponent: f64 },
    /// `floor(e^{k^2})`
    ExpSquare,
}

impl Subsequence {
    /// `n_k = floor(k^{a / (1 - gamma)})`, giving `eps_{n_k} ~ k^{-a}` for
    /// `r_n = floor(n^gamma)`.
    pub fn for_power_schedule(gamma: f64, a: f64) -> Self {
        Subsequence::Power {
            exponent: a / (1.0 - gamma),
        }
    }

    pub fn eval(&self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Subsequence::Power { exponent } => k.powf(*exponent).floor(),
            Subsequence::ExpSquare => (k * k).exp().floor(),
        }
    }

    /// Largest `k` for which `n_k` is finite in `f64`.
    pub fn max_index(&self) -> usize {
        match self {
            Subsequence::Power { exponent } => (700.0 / exponent).exp().min(1e7) as usize,
            Subsequence::ExpSquare => 26,
        }
    }
}

/// Slope of `ys` on `xs` over the upper half of the samples.
fn tail_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let h = xs.len() / 2;
    stats::regression_slope(&xs[h..], &ys[h..])
}

fn classify_slope(slope: f64, pass_below: f64, fail_above: f64) -> Verdict {
    if slope < pass_below {
        Verdict::Pass
    } else if slope > fail_above {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Finite-range check of the LLN hypotheses on `(r_n)` along `(n_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnScheduleReport {
    pub schedule: String,
    pub delta: f64,
    pub k_max: usize,
    /// `r_n -> inf`, `eps_n -> 0`.
    pub lag_unbounded: Verdict,
    /// `sum_k eps_{n_k} < inf`, from the log-log slope of `eps_{n_k}` in `k`.
    pub summable: Verdict,
    pub summable_slope: f64,
    pub partial_sum: f64,
    /// `(eps_{n_k} - eps_{n_{k+1}}) / eps_{n_{k+1}}^{1+delta} -> 0`.
    pub closeness: Verdict,
    pub closeness_slope: f64,
    pub overall: Verdict,
}

const SLOPE_MARGIN: f64 = 0.1;

pub fn validate_lln_schedule(
    schedule: &LagSchedule,
    delta: f64,
    subsequence: Subsequence,
    k_max: usize,
) -> Result<LlnScheduleReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::param("delta", format!("must lie in (0, 1/2), got {delta}")));
    }
    let k_max = k_max.min(subsequence.max_index());
    if k_max < 8 {
        return Err(Error::param("k_max", "need at least 8 subsequence terms"));
    }
    // Skip the initial stretch where the floors make n_k repeat.
    let ks: Vec<usize> = (1..=k_max).filter(|&k| subsequence.eval(k) >= 2.0).collect();
    let ns: Vec<f64> = ks.iter().map(|&k| subsequence.eval(k)).collect();
    let eps: Vec<f64> = ns.iter().map(|&n| schedule.epsilon_f(n)).collect();
    let log_k: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();

    let log_eps: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let summable_slope = tail_slope(&log_k, &log_eps);
    let summable = classify_slope(summable_slope, -1.0 - SLOPE_MARGIN, -1.0 + SLOPE_MARGIN);
    let partial_sum = eps.iter().sum();

    let q: Vec<f64> = eps
        .windows(2)
        .map(|w| ((w[0] - w[1]).abs() / w[1].powf(1.0 + delta)).max(f64::MIN_POSITIVE).ln())
        .collect();
    let closeness_slope = tail_slope(&log_k[..q.len()], &q);
    let closeness = classify_slope(closeness_slope, -SLOPE_MARGIN, SLOPE_MARGIN);

    let lag_unbounded = lag_trend(schedule, ns[0].max(16.0), *ns.last().unwrap_or(&16.0));
    Ok(LlnScheduleReport {
        schedule: schedule.to_string(),
        delta,
        k_max,
        lag_unbounded,
        summable,
        summable_slope,
        partial_sum,
        closeness,
        closeness_slope,
        overall: lag_unbounded.and(summable).and(closeness),
    })
}

/// `r_n` nondecreasing and growing over the second half of a geometric
/// sample of `[lo, hi]`, and `eps_n` shrinking.
fn lag_trend(schedule: &LagSchedule, lo: f64, hi: f64) -> Verdict {
    if !(hi > 4.0 * lo) {
        return Verdict::Inconclusive;
    }
    let pts: Vec<f64> = (0..=64).map(|i| lo * (hi / lo).powf(i as f64 / 64.0)).collect();
    let r: Vec<f64> = pts.iter().map(|&n| schedule.eval_f(n)).collect();
    let e: Vec<f64> = pts.iter().map(|&n| schedule.epsilon_f(n)).collect();
    let mid = r.len() / 2;
    let grows = r[r.len() - 1] > r[mid] && r.windows(2).all(|w| w[1] >= w[0]);
    let shrinks = e[e.len() - 1] < e[mid];
    if grows && shrinks {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Numerical brackets of `eps_n log n` and `eps_n sqrt n` over a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpScheduleReport {
    pub schedule: String,
    pub n_range: (u64, u64),
    /// Min and max of `eps_n log n` over the upper half of the range.
    pub eps_log_n: (f64, f64),
    pub eps_sqrt_n: (f64, f64),
    /// Slopes of the logs of both quantities against `log log n`: zero for
    /// bounded limits, positive for divergence, negative for decay.
    pub eps_log_n_slope: f64,
    pub eps_sqrt_n_slope: f64,
    /// `0 < liminf eps_n log n <= limsup eps_n log n < inf`.
    pub log_bounded: Verdict,
    /// `eps_n sqrt n -> inf`.
    pub sqrt_divergent: Verdict,
}

const LOGLOG_BOUNDED: f64 = 0.25;
const LOGLOG_TREND: f64 = 0.75;

pub fn validate_ldp_schedule(schedule: &LagSchedule, n_range: (u64, u64)) -> Result<LdpScheduleReport> {
    let (lo, hi) = (n_range.0.max(3) as f64, n_range.1 as f64);
    if !(hi >= 16.0 * lo) {
        return Err(Error::param("n_range", "need at least a factor 16 between the ends"));
    }
    let pts: Vec<f64> = (0..=128).map(|i| lo * (hi / lo).powf(i as f64 / 128.0)).collect();
    let ll: Vec<f64> = pts.iter().map(|n| n.ln().ln()).collect();
    let a: Vec<f64> = pts.iter().map(|&n| schedule.epsilon_f(n) * n.ln()).collect();
    let b: Vec<f64> = pts.iter().map(|&n| schedule.epsilon_f(n) * n.sqrt()).collect();
    let bracket = |v: &[f64]| {
        v[v.len() / 2..]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(x, y), &z| (x.min(z), y.max(z)))
    };
    let la: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let sa = tail_slope(&ll, &la);
    let sb = tail_slope(&ll, &lb);
    let log_bounded = if sa.abs() < LOGLOG_BOUNDED {
        Verdict::Pass
    } else if sa.abs() > LOGLOG_TREND {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    let sqrt_divergent = if sb > LOGLOG_TREND {
        Verdict::Pass
    } else if sb < LOGLOG_BOUNDED {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(LdpScheduleReport {
        schedule: schedule.to_string(),
        n_range,
        eps_log_n: bracket(&a),
        eps_sqrt_n: bracket(&b),
        eps_log_n_slope: sa,
        eps_sqrt_n_slope: sb,
        log_bounded,
        sqrt_divergent,
    })
}

/// Upper bound `min(W_1, 2)` on `d_BL(m_n, mu)`; both measures must carry
/// the same source seed.
pub fn coupling_distance(gaussian_m_n: &EmpiricalMeasure, continuum_mu: &EmpiricalMeasure) -> Result<f64> {
    same_source(gaussian_m_n, continuum_mu)?;
    Ok(wasserstein1(gaussian_m_n, continuum_mu).min(2.0))
}

fn same_source(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    match (a.provenance(), b.provenance()) {
        (Some(x), Some(y)) if x == y => Ok(()),
        (x, y) => Err(Error::Provenance(format!("measures come from different sources ({x:?} vs {y:?})"))),
    }
}

/// Dictionary lower and Wasserstein upper bounds on the coupled distance.
pub fn coupling_bounds(gaussian_m_n: &EmpiricalMeasure, continuum_mu: &EmpiricalMeasure) -> Result<DblBounds> {
    same_source(gaussian_m_n, continuum_mu)?;
    dbl_distance(gaussian_m_n, continuum_mu, 64)
}

/// `m_n` from the unit increments of a Brownian path and the continuum
/// occupation measure of its `psi1` increment process at `eps = r_n / n`,
/// the path rescaled to `[0, 1 + eps]`.
#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub n: usize,
    pub r: usize,
    pub epsilon: f64,
    pub discrete: EmpiricalMeasure,
    pub continuum: EmpiricalMeasure,
    /// `max |B(s) - B(t)|` over `|s - t| <= 1/n` on the fine grid.
    pub modulus: f64,
}

impl CoupledPair {
    /// `2 eps^{-1/2} * modulus`.
    pub fn coupling_bound(&self) -> f64 {
        2.0 * self.modulus / self.epsilon.sqrt()
    }
}

pub fn coupled_pair(n: usize, schedule: &LagSchedule, substeps: usize, seed: u64) -> Result<CoupledPair> {
    if substeps == 0 {
        return Err(Error::param("substeps", "must be positive"));
    }
    let r = schedule.eval(n as u64) as usize;
    let eps = r as f64 / n as f64;
    let nodes = (n + r) * substeps + 1;
    let b = simulate_brownian(nodes, (n + r) as f64 / n as f64, seed)?;
    let root_n = (n as f64).sqrt();
    let xs: Vec<f64> = (1..=n + r)
        .map(|i| root_n * (b.values[i * substeps] - b.values[(i - 1) * substeps]))
        .collect();
    let discrete = discrete_measure(&xs, r)?.with_provenance(seed);
    let op = IncrementOperator::new(&kernel_psi1(), eps, b.dt)?;
    let inc = normalized_increment_with(&op, &b)?;
    let continuum = occupation_measure(&inc.values)?;
    let modulus = empirical_modulus(&b, substeps);
    Ok(CoupledPair {
        n,
        r,
        epsilon: eps,
        discrete,
        continuum,
        modulus,
    })
}

/// `max |x_j - x_i|` over `0 < j - i <= window` nodes.
pub fn empirical_modulus(path: &GridPath, window: usize) -> f64 {
    let v = &path.values;
    let mut m = 0.0f64;
    for i in 0..v.len() {
        for j in i + 1..(i + window + 1).min(v.len()) {
            m = m.max((v[j] - v[i]).abs());
        }
    }
    m
}
