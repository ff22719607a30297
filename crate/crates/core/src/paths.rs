//! Sampled trajectories of Brownian motion, symmetric alpha-stable Lévy
//! motion and fractional Brownian motion.
//!
//! Stable convention: symmetric, `E exp(i theta S(t)) = exp(-t |theta|^alpha)`.
//! At `alpha = 2` this is Brownian motion run at double speed, so the
//! increments have variance `2 dt`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

/// Relative tolerance used when matching times to grid nodes.
pub(crate) const NODE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProcessFamily {
    Brownian,
    StableLevy { alpha: f64 },
    Fbm { hurst: f64 },
}

impl ProcessFamily {
    /// `1/2`, `1/alpha` or `hurst` respectively.
    pub fn self_similarity_index(&self) -> f64 {
        match *self {
            ProcessFamily::Brownian => 0.5,
            ProcessFamily::StableLevy { alpha } => 1.0 / alpha,
            ProcessFamily::Fbm { hurst } => hurst,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProcessFamily::Brownian => Ok(()),
            ProcessFamily::StableLevy { alpha } => {
                if alpha > 0.0 && alpha <= 2.0 {
                    Ok(())
                } else {
                    Err(Error::param("alpha", format!("must lie in (0, 2], got {alpha}")))
                }
            }
            ProcessFamily::Fbm { hurst } => {
                if hurst > 0.0 && hurst < 1.0 {
                    Ok(())
                } else {
                    Err(Error::param("hurst", format!("must lie in (0, 1), got {hurst}")))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ProcessFamily::Brownian => "brownian".into(),
            ProcessFamily::StableLevy { alpha } => format!("stable(alpha={alpha})"),
            ProcessFamily::Fbm { hurst } => format!("fbm(H={hurst})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessDescriptor {
    pub family: ProcessFamily,
    pub seed: u64,
}

impl ProcessDescriptor {
    pub fn self_similarity_index(&self) -> f64 {
        self.family.self_similarity_index()
    }
}

/// Uniform grid `t_start + k dt`, `k = 0..n`, closed at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t_start: f64,
    pub dt: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t_start: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if n < 2 {
            return Err(Error::param("n", format!("need at least 2 samples, got {n}")));
        }
        Ok(Self { t_start, dt, n })
    }

    /// Grid of step `dt` whose nodes include `0` and which covers
    /// `[start, end]`.
    pub fn covering(start: f64, end: f64, dt: f64) -> Result<Self> {
        let (p0, p1) = (start / dt, end / dt);
        let k0 = (p0 + NODE_TOL * p0.abs().max(1.0)).floor();
        let k1 = (p1 - NODE_TOL * p1.abs().max(1.0)).ceil();
        Self::new(k0 * dt, dt, (k1 - k0) as usize + 1)
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + (self.n - 1) as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub t_start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub meta: Option<ProcessDescriptor>,
}

impl GridPath {
    pub fn new(t_start: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        Grid::new(t_start, dt, values.len())?;
        Ok(Self {
            t_start,
            dt,
            values,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: ProcessDescriptor) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn grid(&self) -> Grid {
        Grid {
            t_start: self.t_start,
            dt: self.dt,
            n: self.values.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.time(k))
    }

    /// Fractional grid position of `t`.
    pub fn position(&self, t: f64) -> f64 {
        (t - self.t_start) / self.dt
    }

    /// Index of the node at time `t`, if `t` is a node.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let p = self.position(t);
        let k = p.round();
        if (p - k).abs() <= NODE_TOL * p.abs().max(1.0) && k >= 0.0 && (k as usize) < self.values.len() {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn covers(&self, start: f64, end: f64) -> bool {
        let slack = NODE_TOL * self.dt * (1.0 + self.values.len() as f64);
        start >= self.t_start - slack && end <= self.t_end() + slack
    }

    pub fn require_cover(&self, start: f64, end: f64) -> Result<()> {
        if self.covers(start, end) {
            Ok(())
        } else {
            Err(Error::Coverage {
                need_start: start,
                need_end: end,
                have_start: self.t_start,
                have_end: self.t_end(),
            })
        }
    }

    /// Piecewise-linear interpolation at `t`.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        self.require_cover(t, t)?;
        Ok(self.interpolate_at_position(self.position(t)))
    }

    pub(crate) fn interpolate_at_position(&self, p: f64) -> f64 {
        let last = self.values.len() - 1;
        let p = p.clamp(0.0, last as f64);
        let k = (p.floor() as usize).min(last - 1);
        let frac = p - k as f64;
        if frac <= 0.0 {
            self.values[k]
        } else {
            self.values[k] + frac * (self.values[k + 1] - self.values[k])
        }
    }

    /// Restriction to the nodes inside `[start, end]`; both must be nodes.
    pub fn window(&self, start: f64, end: f64) -> Result<GridPath> {
        self.require_cover(start, end)?;
        let (i0, i1) = match (self.node_index(start), self.node_index(end)) {
            (Some(a), Some(b)) if b > a => (a, b),
            _ => {
                return Err(Error::param(
                    "window",
                    format!("[{start}, {end}] is not aligned with the grid (dt = {})", self.dt),
                ))
            }
        };
        Ok(GridPath {
            t_start: self.time(i0),
            dt: self.dt,
            values: self.values[i0..=i1].to_vec(),
            meta: self.meta,
        })
    }
}

pub fn simulate_brownian(n: usize, horizon: f64, seed: u64) -> Result<GridPath> {
    let grid = grid_on_horizon(n, horizon)?;
    simulate(ProcessFamily::Brownian, grid, seed)
}

pub fn simulate_stable(alpha: f64, n: usize, horizon: f64, seed: u64) -> Result<GridPath> {
    let family = ProcessFamily::StableLevy { alpha };
    family.validate()?;
    simulate(family, grid_on_horizon(n, horizon)?, seed)
}

pub fn simulate_fbm(hurst: f64, n: usize, horizon: f64, seed: u64) -> Result<GridPath> {
    let family = ProcessFamily::Fbm { hurst };
    family.validate()?;
    simulate(family, grid_on_horizon(n, horizon)?, seed)
}

fn grid_on_horizon(n: usize, horizon: f64) -> Result<Grid> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
    }
    if n < 2 {
        return Err(Error::param("n", format!("need at least 2 samples, got {n}")));
    }
    Grid::new(0.0, horizon / (n - 1) as f64, n)
}

/// Sample `family` on `grid`; the value at `grid.t_start` is zero.
pub fn simulate(family: ProcessFamily, grid: Grid, seed: u64) -> Result<GridPath> {
    family.validate()?;
    let increments = match family {
        ProcessFamily::Brownian => brownian_increments(grid.n - 1, grid.dt, seed),
        ProcessFamily::StableLevy { alpha } => stable_increments(alpha, grid.n - 1, grid.dt, seed),
        ProcessFamily::Fbm { hurst } => FbmGenerator::new(hurst, grid.n, grid.dt)?.increments(seed),
    };
    Ok(path_from_increments(grid, &increments, ProcessDescriptor { family, seed }))
}

pub(crate) fn path_from_increments(grid: Grid, increments: &[f64], meta: ProcessDescriptor) -> GridPath {
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut acc = 0.0;
    values.push(acc);
    for &d in increments {
        acc += d;
        values.push(acc);
    }
    GridPath {
        t_start: grid.t_start,
        dt: grid.dt,
        values,
        meta: Some(meta),
    }
}

fn brownian_increments(m: usize, dt: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let sd = dt.sqrt();
    (0..m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect()
}

/// Standard symmetric alpha-stable variate, `E exp(i theta X) = exp(-|theta|^alpha)`,
/// by the Chambers-Mallows-Stuck transform.
pub fn standard_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let av = alpha * v;
    av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

fn stable_increments(alpha: f64, m: usize, dt: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let scale = dt.powf(1.0 / alpha);
    (0..m)
        .map(|_| scale * standard_symmetric_stable(alpha, &mut rng))
        .collect()
}

/// Which exact synthesis route produced an fBm path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisRoute {
    CirculantEmbedding,
    Cholesky,
}

/// Exact fractional Gaussian noise synthesis on a fixed grid. The
/// circulant square roots (or the Cholesky factor) are computed once and
/// reused for every seed.
#[derive(Clone)]
pub struct FbmGenerator {
    hurst: f64,
    steps: usize,
    dt: f64,
    route: Route,
}

#[derive(Clone)]
enum Route {
    Circulant {
        sqrt_eigen: Arc<Vec<f64>>,
        fft: Arc<dyn rustfft::Fft<f64>>,
    },
    Cholesky(Arc<DMatrix<f64>>),
}

/// Largest increment count for which the dense fallback is attempted.
const CHOLESKY_LIMIT: usize = 6000;

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

impl FbmGenerator {
    /// Generator for paths with `n` samples (so `n - 1` increments) of step `dt`.
    pub fn new(hurst: f64, n: usize, dt: f64) -> Result<Self> {
        ProcessFamily::Fbm { hurst }.validate()?;
        Grid::new(0.0, dt, n)?;
        let steps = n - 1;
        match Self::circulant(hurst, steps) {
            Some(route) => Ok(Self {
                hurst,
                steps,
                dt,
                route,
            }),
            None => Self::with_route(hurst, n, dt, SynthesisRoute::Cholesky),
        }
    }

    /// Force a synthesis route.
    pub fn with_route(hurst: f64, n: usize, dt: f64, route: SynthesisRoute) -> Result<Self> {
        ProcessFamily::Fbm { hurst }.validate()?;
        Grid::new(0.0, dt, n)?;
        let steps = n - 1;
        let route = match route {
            SynthesisRoute::CirculantEmbedding => Self::circulant(hurst, steps).ok_or_else(|| {
                Error::Internal("circulant embedding has negative eigenvalues".into())
            })?,
            SynthesisRoute::Cholesky => {
                if steps > CHOLESKY_LIMIT {
                    return Err(Error::Internal(format!(
                        "circulant embedding failed and {steps} increments exceed the dense fallback limit"
                    )));
                }
                let cov = DMatrix::from_fn(steps, steps, |i, j| fgn_autocovariance(hurst, i.abs_diff(j)));
                let chol = cov
                    .cholesky()
                    .ok_or_else(|| Error::Internal("fGn covariance is not positive definite".into()))?;
                Route::Cholesky(Arc::new(chol.l()))
            }
        };
        Ok(Self {
            hurst,
            steps,
            dt,
            route,
        })
    }

    fn circulant(hurst: f64, steps: usize) -> Option<Route> {
        let half = steps.max(1).next_power_of_two();
        let size = 2 * half;
        let mut row: Vec<Complex64> = (0..size)
            .map(|j| {
                let lag = if j <= half { j } else { size - j };
                Complex64::new(fgn_autocovariance(hurst, lag), 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
        if row.iter().any(|c| c.re < -1e-10 * max) {
            return None;
        }
        let sqrt_eigen = row
            .iter()
            .map(|c| (c.re.max(0.0) / size as f64).sqrt())
            .collect();
        Some(Route::Circulant {
            sqrt_eigen: Arc::new(sqrt_eigen),
            fft,
        })
    }

    pub fn route(&self) -> SynthesisRoute {
        match self.route {
            Route::Circulant { .. } => SynthesisRoute::CirculantEmbedding,
            Route::Cholesky(_) => SynthesisRoute::Cholesky,
        }
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Fractional Gaussian noise increments of the path, scaled to `dt`.
    pub fn increments(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let scale = self.dt.powf(self.hurst);
        match &self.route {
            Route::Circulant { sqrt_eigen, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eigen
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..self.steps].iter().map(|c| scale * c.re).collect()
            }
            Route::Cholesky(l) => {
                let z = nalgebra::DVector::<f64>::from_fn(self.steps, |_, _| StandardNormal.sample(&mut rng));
                (l.as_ref() * z).iter().map(|v| scale * v).collect()
            }
        }
    }

    pub fn sample(&self, t_start: f64, seed: u64) -> GridPath {
        let grid = Grid {
            t_start,
            dt: self.dt,
            n: self.steps + 1,
        };
        path_from_increments(
            grid,
            &self.increments(seed),
            ProcessDescriptor {
                family: ProcessFamily::Fbm { hurst: self.hurst },
                seed,
            },
        )
    }
}

/// Reusable sampler for any family on a fixed grid.
#[derive(Clone)]
pub struct PathSampler {
    family: ProcessFamily,
    grid: Grid,
    fbm: Option<FbmGenerator>,
}

impl PathSampler {
    pub fn new(family: ProcessFamily, grid: Grid) -> Result<Self> {
        family.validate()?;
        let fbm = match family {
            ProcessFamily::Fbm { hurst } => Some(FbmGenerator::new(hurst, grid.n, grid.dt)?),
            _ => None,
        };
        Ok(Self { family, grid, fbm })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn family(&self) -> ProcessFamily {
        self.family
    }

    pub fn sample(&self, seed: u64) -> GridPath {
        match (&self.fbm, self.family) {
            (Some(g), _) => g.sample(self.grid.t_start, seed),
            (None, ProcessFamily::StableLevy { alpha }) => path_from_increments(
                self.grid,
                &stable_increments(alpha, self.grid.n - 1, self.grid.dt, seed),
                ProcessDescriptor {
                    family: self.family,
                    seed,
                },
            ),
            _ => path_from_increments(
                self.grid,
                &brownian_increments(self.grid.n - 1, self.grid.dt, seed),
                ProcessDescriptor {
                    family: self.family,
                    seed,
                },
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(simulate_brownian(1, 1.0, 0), Err(Error::Parameter { name: "n", .. })));
        assert!(simulate_brownian(10, 0.0, 0).is_err());
        assert!(matches!(
            simulate_stable(2.5, 10, 1.0, 0),
            Err(Error::Parameter { name: "alpha", .. })
        ));
        assert!(simulate_stable(0.0, 10, 1.0, 0).is_err());
        assert!(simulate_fbm(1.0, 10, 1.0, 0).is_err());
        assert!(simulate_fbm(0.0, 10, 1.0, 0).is_err());
    }

    #[test]
    fn starts_at_zero_and_is_deterministic() {
        let a = simulate_brownian(2, 1.0, 9).unwrap();
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.dt, 1.0);
        let b = simulate_brownian(2, 1.0, 9).unwrap();
        assert_eq!(a, b);
        let s = simulate_stable(1.5, 100, 1.0, 3).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert_eq!(s, simulate_stable(1.5, 100, 1.0, 3).unwrap());
        let f = simulate_fbm(0.3, 100, 1.0, 3).unwrap();
        assert_eq!(f, simulate_fbm(0.3, 100, 1.0, 3).unwrap());
        assert_ne!(f, simulate_fbm(0.3, 100, 1.0, 4).unwrap());
    }

    #[test]
    fn self_similarity_index_matches_family() {
        assert_eq!(ProcessFamily::Brownian.self_similarity_index(), 0.5);
        assert_eq!(ProcessFamily::StableLevy { alpha: 1.5 }.self_similarity_index(), 1.0 / 1.5);
        assert_eq!(ProcessFamily::Fbm { hurst: 0.3 }.self_similarity_index(), 0.3);
    }

    #[test]
    fn circulant_and_cholesky_have_the_same_law() {
        // Same covariance, different square roots: compare second moments.
        let n = 17;
        let c = FbmGenerator::with_route(0.7, n, 1.0 / 16.0, SynthesisRoute::CirculantEmbedding).unwrap();
        let d = FbmGenerator::with_route(0.7, n, 1.0 / 16.0, SynthesisRoute::Cholesky).unwrap();
        assert_eq!(d.route(), SynthesisRoute::Cholesky);
        let reps = 20_000;
        let var_at_end = |g: &FbmGenerator| {
            (0..reps)
                .map(|s| {
                    let v = *g.sample(0.0, s).values.last().unwrap();
                    v * v
                })
                .sum::<f64>()
                / reps as f64
        };
        // Var B_H(1) = 1; MC standard error sqrt(2 / reps) = 0.01.
        assert!((var_at_end(&c) - 1.0).abs() < 0.04);
        assert!((var_at_end(&d) - 1.0).abs() < 0.04);
    }

    #[test]
    fn interpolation_and_windows() {
        let p = GridPath::new(-0.5, 0.25, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.interpolate(0.125).unwrap(), 2.5);
        assert!(p.interpolate(0.6).is_err());
        let w = p.window(0.0, 0.5).unwrap();
        assert_eq!(w.values, vec![2.0, 3.0, 4.0]);
        assert!(p.window(0.1, 0.5).is_err());
        assert_eq!(p.node_index(0.25), Some(3));
    }

    #[test]
    fn alpha_two_stable_has_variance_two() {
        let mut rng = rng_from_seed(5);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| standard_symmetric_stable(2.0, &mut rng)).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // SE of the second moment: sqrt(Var(X^2)/n) = sqrt(8/n) ~ 0.0063
        assert!((var - 2.0).abs() < 0.03, "var = {var}");
    }
}
