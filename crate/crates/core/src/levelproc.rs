//! The process-level empirical measure of a Brownian path: snapshots
//! `xi_t^eps(s) = (W(t + eps s) - W(t)) / sqrt(eps)` on a common `s`-grid,
//! their characteristic functional against the Wiener limit
//! `exp(-1/2 int_0^1 rho([u, 1])^2 du)`, and L2-ball frequencies against a
//! Wiener Monte Carlo oracle.
//!
//! Process-level rates are only reachable through `ldp::estimate_cgf` with
//! functionals of finitely many coordinates.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{GridPath, NODE_TOL};
use crate::seeding::{rng_from_seed, seed_split};
use crate::stats;

/// Snapshots `xi_t^eps` for a set of base times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSampleCloud {
    pub epsilon: f64,
    pub s_grid: Vec<f64>,
    pub t_values: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
}

impl PathSampleCloud {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn s_step(&self) -> f64 {
        1.0 / (self.s_grid.len() - 1) as f64
    }

    /// Nearest `s`-grid index.
    pub fn snap(&self, s: f64) -> usize {
        ((s.clamp(0.0, 1.0) / self.s_step()).round() as usize).min(self.s_grid.len() - 1)
    }

    /// Coordinate `j` of every snapshot.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.snapshots.iter().map(|v| v[j]).collect()
    }

    /// Batch length for batch-means errors: enough snapshots to cover
    /// eight correlation windows of length `eps`.
    pub fn batch_len(&self) -> usize {
        if self.t_values.len() < 2 {
            return 1;
        }
        let spacing = (self.t_values[1] - self.t_values[0]).abs();
        let window = (self.epsilon / spacing).ceil().max(1.0);
        ((8.0 * window) as usize).clamp(1, (self.len() / 10).max(1))
    }
}

/// Snapshots at `t = k / t_count`, `k < t_count`, on `s_count` equispaced
/// points of `[0, 1]`.
pub fn extract_cloud(source: &GridPath, epsilon: f64, t_count: usize, s_count: usize) -> Result<PathSampleCloud> {
    if t_count == 0 {
        return Err(Error::param("t_count", "must be positive"));
    }
    let t_values: Vec<f64> = (0..t_count).map(|k| k as f64 / t_count as f64).collect();
    extract_cloud_at(source, epsilon, &t_values, s_count)
}

/// Snapshots at arbitrary base times.
pub fn extract_cloud_at(source: &GridPath, epsilon: f64, t_values: &[f64], s_count: usize) -> Result<PathSampleCloud> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    if s_count < 2 {
        return Err(Error::param("s_count", "need at least 2 grid points"));
    }
    let s_step = 1.0 / (s_count - 1) as f64;
    if epsilon * s_step < source.dt * (1.0 - NODE_TOL) {
        return Err(Error::Resolution {
            epsilon: epsilon * s_step,
            dt: source.dt,
            min_steps: 1.0,
        });
    }
    let (lo, hi) = t_values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if !t_values.is_empty() {
        source.require_cover(lo, hi + epsilon)?;
    }
    let s_grid: Vec<f64> = (0..s_count).map(|j| j as f64 * s_step).collect();
    let scale = 1.0 / epsilon.sqrt();
    let snapshots = t_values
        .par_iter()
        .map(|&t| -> Result<Vec<f64>> {
            let w0 = source.interpolate(t)?;
            s_grid
                .iter()
                .map(|&s| Ok(if s == 0.0 { 0.0 } else { (source.interpolate(t + epsilon * s)? - w0) * scale }))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(PathSampleCloud {
        epsilon,
        s_grid,
        t_values: t_values.to_vec(),
        snapshots,
    })
}

/// `mean_t exp(i sum_k a_k xi_t(t_k))`, atom locations snapped to the grid.
pub fn char_functional(cloud: &PathSampleCloud, atoms: &[(f64, f64)]) -> Complex64 {
    char_functional_samples(cloud, atoms).0
}

fn char_functional_samples(cloud: &PathSampleCloud, atoms: &[(f64, f64)]) -> (Complex64, Vec<f64>, Vec<f64>) {
    if atoms.is_empty() || cloud.is_empty() {
        return (Complex64::new(1.0, 0.0), vec![1.0; cloud.len()], vec![0.0; cloud.len()]);
    }
    let idx: Vec<(usize, f64)> = atoms.iter().map(|&(t, a)| (cloud.snap(t), a)).collect();
    let (re, im): (Vec<f64>, Vec<f64>) = cloud
        .snapshots
        .iter()
        .map(|v| {
            let phase: f64 = idx.iter().map(|&(j, a)| a * v[j]).sum();
            (phase.cos(), phase.sin())
        })
        .unzip();
    let n = cloud.len() as f64;
    (Complex64::new(re.iter().sum::<f64>() / n, im.iter().sum::<f64>() / n), re, im)
}

/// `exp(-1/2 int_0^1 rho([u, 1])^2 du)` for `rho = sum_k a_k delta_{t_k}`.
pub fn char_functional_limit(atoms: &[(f64, f64)]) -> Result<f64> {
    if let Some(&(t, _)) = atoms.iter().find(|(t, _)| !(0.0..=1.0).contains(t)) {
        return Err(Error::param("atoms", format!("location {t} outside [0, 1]")));
    }
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // On (t_(j-1), t_(j)] the tail mass is the sum over atoms j, j+1, ...
    let mut tail: f64 = sorted.iter().map(|a| a.1).sum();
    let mut prev = 0.0;
    let mut integral = 0.0;
    for &(t, a) in &sorted {
        integral += (t - prev) * tail * tail;
        tail -= a;
        prev = t;
    }
    Ok((-0.5 * integral).exp())
}

/// One atom set's comparison of the empirical characteristic functional
/// with its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharFunctionalCheck {
    pub atoms: Vec<(f64, f64)>,
    pub empirical_re: f64,
    pub empirical_im: f64,
    pub limit: f64,
    pub deviation: f64,
    /// Batch-means error of `|G_eps - G|`, combining both parts.
    pub standard_error: f64,
}

pub fn check_char_functional(cloud: &PathSampleCloud, atoms: &[(f64, f64)]) -> Result<CharFunctionalCheck> {
    let limit = char_functional_limit(atoms)?;
    let (g, re, im) = char_functional_samples(cloud, atoms);
    let b = cloud.batch_len();
    let se = if cloud.len() >= 2 * b {
        stats::batch_means_se(&re, b).hypot(stats::batch_means_se(&im, b))
    } else {
        f64::NAN
    };
    Ok(CharFunctionalCheck {
        atoms: atoms.to_vec(),
        empirical_re: g.re,
        empirical_im: g.im,
        limit,
        deviation: (g - Complex64::new(limit, 0.0)).norm(),
        standard_error: se,
    })
}

/// Trapezoid `L2([0, 1])` norm of grid values.
pub fn trapezoid_l2(values: &[f64], center: &[f64], step: f64) -> f64 {
    let n = values.len();
    let sq: f64 = values
        .iter()
        .zip(center)
        .enumerate()
        .map(|(j, (v, c))| {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            w * (v - c).powi(2)
        })
        .sum();
    (step * sq).sqrt()
}

fn check_center(cloud: &PathSampleCloud, center: &[f64]) -> Result<()> {
    if center.len() != cloud.s_grid.len() {
        return Err(Error::Length(format!(
            "center has {} points, the s-grid {}",
            center.len(),
            cloud.s_grid.len()
        )));
    }
    Ok(())
}

fn ball_indicators(cloud: &PathSampleCloud, center: &[f64], radius: f64) -> Vec<f64> {
    let step = cloud.s_step();
    cloud
        .snapshots
        .iter()
        .map(|v| if trapezoid_l2(v, center, step) < radius { 1.0 } else { 0.0 })
        .collect()
}

/// Fraction of snapshots within `radius` of `center` in the trapezoid L2 norm.
pub fn l2_ball_frequency(cloud: &PathSampleCloud, center: &[f64], radius: f64) -> Result<f64> {
    check_center(cloud, center)?;
    if cloud.is_empty() {
        return Ok(0.0);
    }
    Ok(stats::mean(&ball_indicators(cloud, center, radius)))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// `W(||B - center|| < radius)` over fresh Brownian paths sampled exactly on
/// the `s`-grid with `s_count` points.
pub fn wiener_ball_oracle(s_count: usize, center: &[f64], radius: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    if center.len() != s_count {
        return Err(Error::Length(format!("center has {} points, expected {s_count}", center.len())));
    }
    if samples < 2 {
        return Err(Error::param("samples", "need at least 2 samples"));
    }
    let step = 1.0 / (s_count - 1) as f64;
    let sd = step.sqrt();
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(seed_split(seed, c as u64));
            let mut path = vec![0.0; s_count];
            let n = CHUNK.min(samples - c * CHUNK);
            let mut hits = 0;
            for _ in 0..n {
                for j in 1..s_count {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    path[j] = path[j - 1] + sd * z;
                }
                if trapezoid_l2(&path, center, step) < radius {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(McEstimate {
        value: p,
        standard_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

/// Cloud ball frequency against the Wiener oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallCheck {
    pub radius: f64,
    pub frequency: f64,
    /// Binomial error `sqrt(p(1-p)/n)`, ignoring snapshot overlap.
    pub binomial_se: f64,
    /// Batch-means error accounting for overlap.
    pub batch_se: f64,
    pub oracle: McEstimate,
    /// `|frequency - oracle| / (batch_se + oracle se)`.
    pub z: f64,
}

pub fn check_ball(cloud: &PathSampleCloud, center: &[f64], radius: f64, oracle_samples: usize, seed: u64) -> Result<BallCheck> {
    check_center(cloud, center)?;
    let ind = ball_indicators(cloud, center, radius);
    let p = stats::mean(&ind);
    let binomial_se = (p * (1.0 - p) / ind.len() as f64).sqrt();
    let b = cloud.batch_len();
    let batch_se = if ind.len() >= 2 * b {
        stats::batch_means_se(&ind, b).max(binomial_se)
    } else {
        binomial_se
    };
    let oracle = wiener_ball_oracle(cloud.s_grid.len(), center, radius, oracle_samples, seed)?;
    let z = (p - oracle.value).abs() / (batch_se + oracle.standard_error);
    Ok(BallCheck {
        radius,
        frequency: p,
        binomial_se,
        batch_se,
        oracle,
        z,
    })
}

/// Correlation of coordinate `j` between snapshots `lag` apart, with its
/// `1/sqrt(n)` null error.
pub fn snapshot_lag_correlation(cloud: &PathSampleCloud, j: usize, lag: usize) -> (f64, f64) {
    let x = cloud.coordinate(j);
    if x.len() <= lag + 2 {
        return (f64::NAN, f64::NAN);
    }
    let a = &x[..x.len() - lag];
    let b = &x[lag..];
    let (ma, mb) = (stats::mean(a), stats::mean(b));
    let cov: f64 = a.iter().zip(b).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>();
    let va: f64 = a.iter().map(|u| (u - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
    (cov / (va * vb).sqrt(), 1.0 / (a.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::simulate_brownian;
    use crate::stats::{ks_critical_two_sample, ks_two_sample};
    use approx::assert_relative_eq;

    #[test]
    fn limit_examples() {
        assert_eq!(char_functional_limit(&[]).unwrap(), 1.0);
        assert_relative_eq!(char_functional_limit(&[(1.0, 2.0)]).unwrap(), (-2.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(char_functional_limit(&[(0.5, 1.0)]).unwrap(), (-0.25f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(
            char_functional_limit(&[(1.0, 1.0), (0.5, 1.0)]).unwrap(),
            (-1.25f64).exp(),
            max_relative = 1e-15
        );
        assert!(char_functional_limit(&[(1.5, 1.0)]).is_err());
    }

    #[test]
    fn unit_epsilon_snapshot_is_the_path_increment() {
        let w = simulate_brownian(1025, 2.0, 4).unwrap();
        let c = extract_cloud(&w, 1.0, 4, 9).unwrap();
        assert_eq!(c.len(), 4);
        for (j, &s) in c.s_grid.iter().enumerate() {
            assert!((c.snapshots[0][j] - (w.interpolate(s).unwrap() - w.values[0])).abs() < 1e-14);
        }
        assert!(c.snapshots.iter().all(|v| v[0] == 0.0));
        assert_eq!(char_functional(&c, &[]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn resolution_and_coverage_errors() {
        let w = simulate_brownian(1025, 2.0, 4).unwrap();
        // eps * s_step = 1/1024 < dt = 1/512
        assert!(matches!(extract_cloud(&w, 1.0 / 64.0, 4, 17), Err(Error::Resolution { .. })));
        assert!(matches!(extract_cloud(&w, 1.5, 4, 9), Err(Error::Coverage { .. })));
    }

    #[test]
    fn endpoint_variance_is_one() {
        let w = simulate_brownian((1 << 16) + 1, 1.0 + 1.0 / 64.0, 7).unwrap();
        let c = extract_cloud(&w, 1.0 / 64.0, 4096, 17).unwrap();
        let last = c.coordinate(16);
        let v = stats::variance(&last);
        // about 64 independent windows
        assert!((v - 1.0).abs() < 0.4, "{v}");
    }

    #[test]
    fn ball_limits() {
        let w = simulate_brownian(4097, 2.0, 1).unwrap();
        let c = extract_cloud(&w, 0.5, 64, 17).unwrap();
        let zero = vec![0.0; 17];
        assert_eq!(l2_ball_frequency(&c, &zero, 1e9).unwrap(), 1.0);
        assert_eq!(l2_ball_frequency(&c, &zero, 1e-12).unwrap(), 0.0);
        assert!(l2_ball_frequency(&c, &zero[..3], 1.0).is_err());
    }

    #[test]
    fn oracle_small_ball_probability_is_plausible() {
        // Independent NumPy estimate on the same 65-point grid: 0.8638.
        let o = wiener_ball_oracle(65, &vec![0.0; 65], 1.0, 40_000, 2).unwrap();
        assert!((o.value - 0.8638).abs() < 4.0 * o.standard_error + 2e-3, "{o:?}");
    }

    #[test]
    fn scaling_identity() {
        let eps = 1.0 / 64.0;
        let n = 400;
        let w1 = simulate_brownian(64 * 402 + 1, 402.0, 10).unwrap();
        let big: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let c1 = extract_cloud_at(&w1, 1.0, &big, 9).unwrap();
        let w2 = simulate_brownian(64 * 8 * 8 + 1, 8.0, 11).unwrap();
        let small: Vec<f64> = big.iter().map(|t| eps * t).collect();
        let c2 = extract_cloud_at(&w2, eps, &small, 9).unwrap();
        for j in [2, 4, 8] {
            let d = ks_two_sample(&c1.coordinate(j), &c2.coordinate(j));
            assert!(d < ks_critical_two_sample(n, n, 0.01), "coord {j}: {d}");
        }
    }

    #[test]
    fn meta_slepian_is_one_dependent() {
        let w = simulate_brownian(16 * 3001 + 1, 3001.0, 3).unwrap();
        let t: Vec<f64> = (0..2000).map(|k| 1.5 * k as f64).collect();
        let c = extract_cloud_at(&w, 1.0, &t, 5).unwrap();
        for j in [1, 2, 4] {
            let (r, se) = snapshot_lag_correlation(&c, j, 1);
            assert!(r.abs() <= 4.0 * se, "coord {j}: {r}");
        }
    }
}
