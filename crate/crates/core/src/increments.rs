//! Smoothed paths `X * psi^eps`, derivative-type increments
//! `eps^{-1} int X(t - eps u) dpsi(u)` and their normalisation by
//! `eps^{1-H}`.
//!
//! Two evaluation routes:
//! - pure-jump `dpsi`: the atoms are applied to the path directly, with
//!   linear interpolation when `t - eps a` falls between nodes;
//! - otherwise: the derivative of the smoothed piecewise-linear path,
//!   `sum_m w_m (X_{i-m+1} - X_{i-m})` with cell masses
//!   `w_m = (Psi(m dt/eps) - Psi((m-1) dt/eps)) / dt`, `Psi' = psi`.
//!   This is the exact Stieltjes convolution of the interpolated path.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::mollifiers::SignedKernel;
use crate::paths::{Grid, GridPath, NODE_TOL};

/// `eps` must span at least this many grid steps.
pub const MIN_STEPS_PER_EPSILON: f64 = 4.0;
/// Weight count above which convolutions go through the FFT.
const FFT_THRESHOLD: usize = 64;

#[derive(Debug, Clone)]
enum Route {
    Atoms(Vec<(f64, f64)>),
    Cells {
        m_min: i64,
        /// `w[k]` belongs to `m = m_min + k`.
        weights: Vec<f64>,
        /// Unscaled cell masses of `psi^eps`, same indexing.
        masses: Vec<f64>,
    },
}

/// Precomputed convolution weights for one `(kernel, eps, dt)`.
#[derive(Debug, Clone)]
pub struct IncrementOperator {
    kernel: SignedKernel,
    epsilon: f64,
    dt: f64,
    route: Route,
    /// Node offsets reached to the left and right of an output node.
    reach_left: usize,
    reach_right: usize,
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= NODE_TOL * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

impl IncrementOperator {
    pub fn new(kernel: &SignedKernel, epsilon: f64, dt: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
        }
        if epsilon < MIN_STEPS_PER_EPSILON * dt * (1.0 - NODE_TOL) {
            return Err(Error::Resolution {
                epsilon,
                dt,
                min_steps: MIN_STEPS_PER_EPSILON,
            });
        }
        let (lo, hi) = kernel.effective_support().ok_or_else(|| Error::UnsupportedKernel {
            kernel: kernel.id().to_string(),
            reason: "increments need a kernel with finite effective support".into(),
        })?;
        let r = epsilon / dt;
        if kernel.is_pure_jump() {
            let atoms: Vec<(f64, f64)> = kernel
                .atoms()
                .iter()
                .map(|a| (snap(-a.location * r), a.weight))
                .collect();
            let left = atoms.iter().map(|a| (-a.0).ceil()).fold(0.0, f64::max) as usize;
            let right = atoms.iter().map(|a| a.0.ceil()).fold(0.0, f64::max) as usize;
            return Ok(Self {
                kernel: kernel.clone(),
                epsilon,
                dt,
                route: Route::Atoms(atoms),
                reach_left: left,
                reach_right: right,
            });
        }
        let m_min = snap(lo * r).floor() as i64 + 1;
        let m_max = snap(hi * r).ceil() as i64;
        let count = (m_max - m_min + 1) as usize;
        let masses: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|k| {
                let m = (m_min + k as i64) as f64;
                kernel.cell_mass((m - 1.0) / r, m / r)
            })
            .collect::<Result<_>>()?;
        let weights = masses.iter().map(|c| c / dt).collect();
        Ok(Self {
            kernel: kernel.clone(),
            epsilon,
            dt,
            route: Route::Cells {
                m_min,
                weights,
                masses,
            },
            reach_left: m_max.max(0) as usize,
            reach_right: (1 - m_min).max(0) as usize,
        })
    }

    pub fn kernel(&self) -> &SignedKernel {
        &self.kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn uses_atoms(&self) -> bool {
        matches!(self.route, Route::Atoms(_))
    }

    /// Time needed left and right of an output window.
    pub fn reach(&self) -> (f64, f64) {
        (self.reach_left as f64 * self.dt, self.reach_right as f64 * self.dt)
    }

    /// Grid with node 0 that covers `[start, end]` plus the kernel reach.
    pub fn source_grid(&self, start: f64, end: f64) -> Result<Grid> {
        let (l, r) = self.reach();
        Grid::covering(start - l, end + r, self.dt)
    }

    fn output_range(&self, source: &GridPath, start: f64, end: f64) -> Result<(usize, usize)> {
        if ((source.dt - self.dt) / self.dt).abs() > 1e-12 {
            return Err(Error::param(
                "source",
                format!("grid step {} differs from the operator's {}", source.dt, self.dt),
            ));
        }
        let coverage = || Error::Coverage {
            need_start: start - self.reach_left as f64 * self.dt,
            need_end: end + self.reach_right as f64 * self.dt,
            have_start: source.t_start,
            have_end: source.t_end(),
        };
        let i0 = source.node_index(start).ok_or_else(coverage)?;
        let i1 = source.node_index(end).ok_or_else(coverage)?;
        if i1 < i0 || i0 < self.reach_left || i1 + self.reach_right >= source.len() {
            return Err(coverage());
        }
        Ok((i0, i1))
    }

    /// `eps^{-1} int X(t - eps u) dpsi(u)` at the nodes of `[start, end]`.
    pub fn dot(&self, source: &GridPath, start: f64, end: f64) -> Result<GridPath> {
        let (i0, i1) = self.output_range(source, start, end)?;
        let x = &source.values;
        let values = match &self.route {
            Route::Atoms(atoms) => {
                let inv = 1.0 / self.epsilon;
                (i0..=i1)
                    .map(|i| {
                        atoms
                            .iter()
                            .map(|&(shift, w)| {
                                let p = i as f64 + shift;
                                let v = if p.fract() == 0.0 {
                                    x[p as usize]
                                } else {
                                    source.interpolate_at_position(p)
                                };
                                w * v
                            })
                            .sum::<f64>()
                            * inv
                    })
                    .collect()
            }
            Route::Cells { m_min, weights, .. } => {
                // out_i = sum_k w_k dX_{i - m_min - k}
                let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
                correlate(&diffs, weights, i0, i1, *m_min)
            }
        };
        GridPath::new(source.time(i0), source.dt, values)
    }

    /// `int psi^eps(t - s) X(s) ds` at the nodes of `[start, end]`, each
    /// cell contributing its mass times the mean of its end values.
    pub fn smooth(&self, source: &GridPath, start: f64, end: f64) -> Result<GridPath> {
        let (i0, i1) = self.output_range(source, start, end)?;
        let x = &source.values;
        let mid: Vec<f64> = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let values = match &self.route {
            Route::Cells { m_min, masses, .. } => correlate(&mid, masses, i0, i1, *m_min),
            Route::Atoms(_) => {
                // Pure-jump dpsi: psi is piecewise constant, take the cell route.
                let r = self.epsilon / self.dt;
                let (lo, hi) = self.kernel.effective_support().expect("checked in new");
                let m_min = snap(lo * r).floor() as i64 + 1;
                let m_max = snap(hi * r).ceil() as i64;
                let masses: Vec<f64> = (m_min..=m_max)
                    .map(|m| self.kernel.cell_mass((m as f64 - 1.0) / r, m as f64 / r))
                    .collect::<Result<_>>()?;
                if i0 < m_max.max(0) as usize || i1 + (1 - m_min).max(0) as usize >= x.len() {
                    return Err(Error::Coverage {
                        need_start: start - m_max as f64 * self.dt,
                        need_end: end + (1 - m_min) as f64 * self.dt,
                        have_start: source.t_start,
                        have_end: source.t_end(),
                    });
                }
                correlate(&mid, &masses, i0, i1, m_min)
            }
        };
        GridPath::new(source.time(i0), source.dt, values)
    }
}

/// `out[i - i0] = sum_k w[k] d[i - m_min - k]` for `i` in `i0..=i1`.
fn correlate(d: &[f64], w: &[f64], i0: usize, i1: usize, m_min: i64) -> Vec<f64> {
    let n_out = i1 - i0 + 1;
    let k_len = w.len();
    // d index for output i and weight k is i - m_min - k; the smallest used
    // index is i0 - m_min - (k_len - 1).
    let base = i0 as i64 - m_min - (k_len as i64 - 1);
    debug_assert!(base >= 0);
    let base = base as usize;
    let seg = &d[base..base + n_out + k_len - 1];
    if k_len <= FFT_THRESHOLD {
        return (0..n_out)
            .map(|j| {
                // i = i0 + j: d index i - m_min - k = base + j + (k_len - 1 - k)
                w.iter()
                    .enumerate()
                    .map(|(k, wk)| wk * seg[j + k_len - 1 - k])
                    .sum()
            })
            .collect();
    }
    // Linear convolution of seg with w, entries k_len - 1 .. k_len - 1 + n_out.
    let size = (seg.len() + k_len).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex64> = seg.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    a.resize(size, Complex64::new(0.0, 0.0));
    let mut b: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    b.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    a[k_len - 1..k_len - 1 + n_out].iter().map(|c| c.re * scale).collect()
}

/// Increment process of a path: `eps^{1-H}` times the derivative-type
/// increment, on the nodes of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct IncrementProcess {
    pub source: Arc<GridPath>,
    pub kernel: SignedKernel,
    pub epsilon: f64,
    pub hurst_index: f64,
    pub values: GridPath,
}

impl IncrementProcess {
    pub fn values(&self) -> &[f64] {
        &self.values.values
    }
}

/// Evaluation window of the increment processes.
pub const WINDOW: (f64, f64) = (0.0, 1.0);

pub fn smooth(source: &GridPath, kernel: &SignedKernel, epsilon: f64) -> Result<GridPath> {
    IncrementOperator::new(kernel, epsilon, source.dt)?.smooth(source, WINDOW.0, WINDOW.1)
}

pub fn dot_increment(source: &GridPath, kernel: &SignedKernel, epsilon: f64) -> Result<GridPath> {
    IncrementOperator::new(kernel, epsilon, source.dt)?.dot(source, WINDOW.0, WINDOW.1)
}

fn source_hurst(source: &GridPath) -> Result<f64> {
    source
        .meta
        .map(|m| m.self_similarity_index())
        .ok_or_else(|| Error::param("source", "path carries no process descriptor, so H is unknown"))
}

pub fn normalized_increment(
    source: &GridPath,
    kernel: &SignedKernel,
    epsilon: f64,
) -> Result<IncrementProcess> {
    let op = IncrementOperator::new(kernel, epsilon, source.dt)?;
    normalized_increment_with(&op, source)
}

/// As [`normalized_increment`] with precomputed weights.
pub fn normalized_increment_with(op: &IncrementOperator, source: &GridPath) -> Result<IncrementProcess> {
    let h = source_hurst(source)?;
    let mut values = op.dot(source, WINDOW.0, WINDOW.1)?;
    let scale = op.epsilon.powf(1.0 - h);
    values.values.iter_mut().for_each(|v| *v *= scale);
    values.meta = source.meta;
    Ok(IncrementProcess {
        source: Arc::new(source.clone()),
        kernel: op.kernel.clone(),
        epsilon: op.epsilon,
        hurst_index: h,
        values,
    })
}

/// The `eps = 1` process `int X(s) dpsi(t - s)` on every node where the
/// kernel fits inside the source.
pub fn unit_scale_process(source: &GridPath, kernel: &SignedKernel) -> Result<GridPath> {
    let op = IncrementOperator::new(kernel, 1.0, source.dt)?;
    unit_scale_with(&op, source)
}

pub fn unit_scale_with(op: &IncrementOperator, source: &GridPath) -> Result<GridPath> {
    if op.reach_left + op.reach_right >= source.len() {
        let (l, r) = op.reach();
        return Err(Error::Coverage {
            need_start: source.t_start,
            need_end: source.t_start + l + r,
            have_start: source.t_start,
            have_end: source.t_end(),
        });
    }
    let start = source.time(op.reach_left);
    let end = source.time(source.len() - 1 - op.reach_right);
    let mut out = op.dot(source, start, end)?;
    out.meta = source.meta;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifiers::{kernel_fbm_ou_kernel, kernel_ou_exponential, kernel_psi1, kernel_psi2, kernel_triangle};
    use crate::paths::{simulate, ProcessFamily};
    use proptest::prelude::*;

    fn linear_path(dt: f64, start: f64, end: f64, f: impl Fn(f64) -> f64) -> GridPath {
        let g = Grid::covering(start, end, dt).unwrap();
        let values = (0..g.n).map(|k| f(g.t_start + k as f64 * g.dt)).collect();
        GridPath::new(g.t_start, g.dt, values).unwrap()
    }

    #[test]
    fn smooth_of_identity_with_psi1() {
        let dt = 1.0 / 1024.0;
        let x = linear_path(dt, -0.5, 1.5, |t| t);
        let s = smooth(&x, &kernel_psi1(), 0.125).unwrap();
        for (t, v) in s.times().zip(&s.values) {
            assert!((v - (t + 0.0625)).abs() < 1e-12, "t = {t}: {v}");
        }
        // Off-grid kernel edges cost O(dt^2).
        let s = smooth(&x, &kernel_psi1(), 0.1).unwrap();
        for (t, v) in s.times().zip(&s.values) {
            assert!((v - (t + 0.05)).abs() < dt * dt * 2.0, "t = {t}: {v}");
        }
    }

    #[test]
    fn constants_smooth_to_mass_and_differentiate_to_zero() {
        let dt = 1.0 / 512.0;
        let x = linear_path(dt, -40.0, 41.0, |_| 3.0);
        for k in [kernel_psi1(), kernel_psi2(), kernel_triangle(), kernel_ou_exponential()] {
            let m = k.integral().unwrap();
            let s = smooth(&x, &k, 0.25).unwrap();
            assert!(s.values.iter().all(|v| (v - 3.0 * m).abs() < 1e-9), "{:?}", k.id());
            let d = dot_increment(&x, &k, 0.25).unwrap();
            assert!(d.values.iter().all(|v| v.abs() < 1e-9), "{:?}", k.id());
        }
    }

    #[test]
    fn resolution_and_coverage_errors() {
        let dt = 1.0 / 256.0;
        let x = linear_path(dt, -1.0, 2.0, |t| t);
        assert!(matches!(smooth(&x, &kernel_psi1(), dt), Err(Error::Resolution { .. })));
        assert!(matches!(dot_increment(&x, &kernel_psi1(), 1.5), Err(Error::Coverage { .. })));
        assert!(matches!(
            dot_increment(&x, &kernel_fbm_ou_kernel(0.3).unwrap(), 0.1),
            Err(Error::UnsupportedKernel { .. })
        ));
    }

    #[test]
    fn psi1_is_an_exact_forward_difference() {
        let eps = 1.0 / 64.0;
        let op = IncrementOperator::new(&kernel_psi1(), eps, 1.0 / 4096.0).unwrap();
        let g = op.source_grid(0.0, 1.0).unwrap();
        let w = simulate(ProcessFamily::Brownian, g, 7).unwrap();
        let inc = normalized_increment_with(&op, &w).unwrap();
        let i0 = w.node_index(0.0).unwrap();
        let shift = (eps / w.dt).round() as usize;
        for (j, v) in inc.values().iter().enumerate() {
            let want = (w.values[i0 + j + shift] - w.values[i0 + j]) / eps.sqrt();
            assert_eq!(*v, want);
        }
    }

    #[test]
    fn psi2_is_a_centred_second_difference() {
        let dt = 1.0 / 1000.0;
        let x = linear_path(dt, -0.5, 1.5, |t| (3.0 * t).sin() + t * t);
        let eps = 0.05;
        let d = dot_increment(&x, &kernel_psi2(), eps).unwrap();
        for (t, v) in d.times().zip(&d.values) {
            let f = |s: f64| (3.0 * s).sin() + s * s;
            let want = (f(t + eps) - 2.0 * f(t) + f(t - eps)) / (2.0 * eps);
            assert!((v - want).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn off_grid_atoms_interpolate() {
        let dt = 0.01;
        let x = linear_path(dt, -0.5, 1.5, |t| 2.0 * t);
        let d = dot_increment(&x, &kernel_psi1(), 0.123).unwrap();
        assert!(d.values.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn cell_route_agrees_with_atoms_on_psi1() {
        // A custom copy of psi1 without atoms forces the cell route.
        use crate::mollifiers::{KernelBuilder, Support};
        let k = KernelBuilder::new(
            |x| if (-1.0..=0.0).contains(&x) { 1.0 } else { 0.0 },
            Support::Compact { start: -1.0, end: 0.0 },
        )
        .primitive(|x| (x + 1.0).clamp(0.0, 1.0))
        .build();
        let eps = 0.1;
        let op = IncrementOperator::new(&k, eps, 1.0 / 1000.0).unwrap();
        assert!(!op.uses_atoms());
        let g = op.source_grid(0.0, 1.0).unwrap();
        let w = simulate(ProcessFamily::Brownian, g, 3).unwrap();
        let a = op.dot(&w, 0.0, 1.0).unwrap();
        let b = dot_increment(&w, &kernel_psi1(), eps).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn ou_exponential_fft_route_matches_direct_sum() {
        let k = kernel_ou_exponential();
        let dt = 1.0 / 256.0;
        let eps = 1.0 / 32.0;
        let op = IncrementOperator::new(&k, eps, dt).unwrap();
        let g = op.source_grid(0.0, 1.0).unwrap();
        let w = simulate(ProcessFamily::Brownian, g, 11).unwrap();
        let fast = op.dot(&w, 0.0, 1.0).unwrap();
        let Route::Cells { m_min, weights, .. } = &op.route else { panic!() };
        let diffs: Vec<f64> = w.values.windows(2).map(|p| p[1] - p[0]).collect();
        let i0 = w.node_index(0.0).unwrap();
        for (j, v) in fast.values.iter().enumerate() {
            let i = (i0 + j) as i64;
            let direct: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * diffs[(i - m_min - k as i64) as usize])
                .sum();
            assert!((v - direct).abs() < 1e-10 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn derivative_of_smooth_is_dot() {
        let dt = 1.0 / 2048.0;
        let eps = 0.0625;
        let x = linear_path(dt, -0.5, 1.5, |t| (5.0 * t).cos() + t.powi(3));
        for k in [kernel_psi1(), kernel_triangle(), kernel_ou_exponential()] {
            let big = linear_path(dt, -40.0, 1.5, |t| (5.0 * t).cos() + t.powi(3));
            let src = if k.id() == crate::mollifiers::KernelId::OuExp { &big } else { &x };
            let op = IncrementOperator::new(&k, eps, dt).unwrap();
            let s = op.smooth(src, -0.125, 1.125).unwrap();
            let d = op.dot(src, 0.0, 1.0).unwrap();
            let off = s.node_index(0.0).unwrap();
            for j in 1..d.len() - 1 {
                let fd = (s.values[off + j + 1] - s.values[off + j - 1]) / (2.0 * dt);
                assert!((fd - d.values[j]).abs() < 1e-3, "{:?} at {j}: {fd} vs {}", k.id(), d.values[j]);
            }
        }
    }

    #[test]
    fn triangle_second_derivative_is_psi2_increment() {
        let dt = 1.0 / 4096.0;
        let eps = 0.0625;
        let f = |t: f64| (4.0 * t).sin() + 0.3 * t * t;
        let x = linear_path(dt, -0.5, 1.5, f);
        let tri = IncrementOperator::new(&kernel_triangle(), eps, dt).unwrap();
        let s = tri.smooth(&x, -0.125, 1.125).unwrap();
        let d2 = dot_increment(&x, &kernel_psi2(), eps).unwrap();
        let off = s.node_index(0.0).unwrap();
        let h = 8;
        for j in (h..d2.len() - h).step_by(97) {
            let second = (s.values[off + j + h] - 2.0 * s.values[off + j] + s.values[off + j - h])
                / (h as f64 * dt).powi(2);
            assert!((eps * eps * second - eps * d2.values[j]).abs() < 1e-4, "j = {j}");
        }
    }

    #[test]
    fn normalized_increment_needs_a_descriptor() {
        let x = linear_path(0.01, -0.5, 1.5, |t| t);
        assert!(matches!(
            normalized_increment(&x, &kernel_psi1(), 0.1),
            Err(Error::Parameter { .. })
        ));
    }

    #[test]
    fn unit_scale_slepian_window() {
        let dt = 1.0 / 64.0;
        let x = simulate(ProcessFamily::Brownian, Grid::covering(0.0, 10.0, dt).unwrap(), 5).unwrap();
        let s = unit_scale_process(&x, &kernel_psi1()).unwrap();
        assert_eq!(s.t_start, 0.0);
        assert!((s.t_end() - 9.0).abs() < 1e-12);
        assert_eq!(s.values[0], x.values[64] - x.values[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn increments_are_linear_in_the_path(a in -3.0f64..3.0, seed in 0u64..1000) {
            let op = IncrementOperator::new(&kernel_triangle(), 0.05, 1.0 / 512.0).unwrap();
            let g = op.source_grid(0.0, 1.0).unwrap();
            let w = simulate(ProcessFamily::Brownian, g, seed).unwrap();
            let mut scaled = w.clone();
            scaled.values.iter_mut().enumerate().for_each(|(k, v)| *v = a * *v + 2.0 + 0.0 * k as f64);
            let d1 = op.dot(&w, 0.0, 1.0).unwrap();
            let d2 = op.dot(&scaled, 0.0, 1.0).unwrap();
            for (u, v) in d1.values.iter().zip(&d2.values) {
                prop_assert!((a * u - v).abs() < 1e-8 * (1.0 + u.abs()));
            }
        }
    }
}
