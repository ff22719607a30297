//! Second-order theory of the unit-scale increment process of fBm:
//! spectral densities `l_H(lambda) = C_H^{-2} |psi_hat(lambda)|^2 |lambda|^{1-2H}`,
//! covariances `r(t) = 2 int_0^inf cos(t lambda) l(lambda) dlambda`, the
//! variance `sigma_psi^2 = -1/2 int int |u - v|^{2H} dpsi(u) dpsi(v)`, and
//! the empirical checks against simulated paths.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{unit_scale_with, IncrementOperator};
use crate::mollifiers::{gh_membership, KernelId, SignedKernel};
use crate::numerics::optimize::log_grid_sup;
use crate::numerics::quadrature::{fourier_cosine, integrate, integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::numerics::special::harmonizable_constant_sq;
use crate::paths::{simulate, ProcessFamily};
use crate::seeding::seed_split;
use crate::stats;

/// Spectral density of the unit-scale increment process.
#[derive(Clone)]
pub struct SpectralDensity {
    kernel: SignedKernel,
    hurst: f64,
    inv_c2: f64,
    pub kernel_id: String,
    /// `sup l`, `+inf` when `l` blows up at 0.
    pub sup_value: f64,
    pub sup_location: f64,
    pub continuous_at_zero: bool,
}

impl std::fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralDensity")
            .field("kernel_id", &self.kernel_id)
            .field("hurst", &self.hurst)
            .field("sup_value", &self.sup_value)
            .field("continuous_at_zero", &self.continuous_at_zero)
            .finish()
    }
}

/// Stand-in for `lambda = 0`, small enough that `|lambda|^{+-(2H-1)}`
/// saturates to 0 or to overflow.
const LAMBDA_ZERO: f64 = 1e-150;

impl SpectralDensity {
    pub(crate) fn raw_at(&self, lambda: f64) -> f64 {
        self.raw(lambda)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn kernel(&self) -> &SignedKernel {
        &self.kernel
    }

    fn raw(&self, lambda: f64) -> f64 {
        let a = lambda.abs();
        let f = self.kernel.fourier(a).unwrap_or(Complex64::new(f64::NAN, 0.0));
        self.inv_c2 * f.norm_sqr() * a.powf(1.0 - 2.0 * self.hurst)
    }

    /// `l(lambda)`; at `lambda = 0` the limit, or `+inf` if it diverges.
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            if !self.continuous_at_zero {
                return f64::INFINITY;
            }
            return self.raw(LAMBDA_ZERO);
        }
        self.raw(lambda)
    }

    /// Rows `lambda,density`.
    pub fn write_csv<W: Write>(&self, lambdas: &[f64], mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda,density")?;
        for &l in lambdas {
            writeln!(out, "{l},{}", self.eval(l))?;
        }
        Ok(())
    }

    /// Exponent `q` of the tail `int_L^inf l ~ L^{-q}`.
    fn tail_exponent(&self) -> f64 {
        2.0 * self.kernel.fourier_decay() - 2.0 + 2.0 * self.hurst
    }
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::param("hurst", format!("must lie in (0, 1), got {hurst}")));
    }
    Ok(())
}

/// Spectral density of the unit-scale increment process built from fBm of
/// index `hurst` with `kernel`.
pub fn spectral_density(kernel: &SignedKernel, hurst: f64) -> Result<SpectralDensity> {
    check_hurst(hurst)?;
    if !kernel.is_integrable() && !kernel.has_closed_fourier() {
        return Err(Error::UnsupportedKernel {
            kernel: kernel.id().to_string(),
            reason: "kernel is neither integrable nor equipped with a closed-form transform".into(),
        });
    }
    let continuous_at_zero = gh_membership(kernel, hurst)?.membership.is_yes();
    let mut d = SpectralDensity {
        kernel: kernel.clone(),
        hurst,
        inv_c2: 1.0 / harmonizable_constant_sq(hurst),
        kernel_id: kernel.id().to_string(),
        sup_value: f64::INFINITY,
        sup_location: 0.0,
        continuous_at_zero,
    };
    if continuous_at_zero {
        let (x, v) = log_grid_sup(|l| d.raw(l), 1e-6, 1e3, 361);
        let at_zero = d.raw(LAMBDA_ZERO);
        if at_zero >= v {
            d.sup_value = at_zero;
            d.sup_location = 0.0;
        } else {
            d.sup_value = v;
            d.sup_location = x;
        }
    }
    Ok(d)
}

/// Period of `|psi_hat|^2` for kernels with atoms or breaks on the
/// integers; truncation points are multiples of it.
const TRUNCATION_PERIOD: f64 = 2.0 * PI;
const BASE_PERIODS: f64 = 16.0;
const MAX_DOUBLINGS: usize = 9;

/// `2 int_0^inf cos(t l) l(l) dl`.
///
/// Kernels with compact support: panel sums to `L_j = 2 pi 16 2^j`,
/// Richardson-extrapolated with the known tail exponent until successive
/// extrapolants agree. Other kernels: `t = 0` as above, `t != 0` by the
/// accelerated oscillatory rule.
pub fn covariance_from_density(density: &SpectralDensity, t: f64) -> Result<f64> {
    if !density.continuous_at_zero {
        return Err(Error::Domain(format!(
            "density of {} at H = {} is not integrable near 0",
            density.kernel_id, density.hurst
        )));
    }
    let t = t.abs();
    let compact = matches!(density.kernel.support(), crate::mollifiers::Support::Compact { .. });
    if t > 0.0 && !compact {
        let r = fourier_cosine(|l| density.raw(l), t, QuadOptions::tol(1e-13, 1e-11))?;
        return Ok(2.0 * r.value);
    }
    half_line_integral(density, |l| 2.0 * (t * l).cos() * density.raw(l), 1e-9)
}

/// `int_0^inf f(l) dl` for integrands that decay like the density. Compact
/// kernels: panel sums to `L_j = 2 pi 16 2^j`, Richardson-extrapolated with
/// the known tail exponent until successive extrapolants agree. Smooth
/// densities: mapped adaptive quadrature.
pub(crate) fn half_line_integral<F: Fn(f64) -> f64 + Sync>(density: &SpectralDensity, f: F, tol: f64) -> Result<f64> {
    let compact = matches!(density.kernel.support(), crate::mollifiers::Support::Compact { .. });
    if !compact {
        return Ok(integrate_to_infinity(&f, 0.0, QuadOptions::tol(1e-14, 1e-12))?.value);
    }
    let q = density.tail_exponent();
    let opts = QuadOptions::tol(1e-15, 1e-13);
    let mut pos = 0.0;
    let mut acc = 0.0;
    let mut partial = Vec::new();
    let mut last: Option<f64> = None;
    for j in 0..=MAX_DOUBLINGS {
        let end = TRUNCATION_PERIOD * BASE_PERIODS * 2f64.powi(j as i32);
        // Panels of half a period, starting at 0 (integrable singularity
        // there when H > 1/2).
        let panel = 0.5 * TRUNCATION_PERIOD;
        let panels = ((end - pos) / panel).round() as usize;
        let sums: Vec<f64> = (0..panels)
            .into_par_iter()
            .map(|k| {
                let a = pos + k as f64 * panel;
                integrate(&f, a, a + panel, opts).map(|r| r.value)
            })
            .collect::<Result<_>>()?;
        acc += sums.iter().sum::<f64>();
        pos = end;
        partial.push(acc);
        if partial.len() >= 2 {
            let n = partial.len();
            let r = 2f64.powf(q);
            let extrap = (r * partial[n - 1] - partial[n - 2]) / (r - 1.0);
            if let Some(prev) = last {
                if (extrap - prev).abs() <= tol * extrap.abs().max(1.0) {
                    return Ok(extrap);
                }
            }
            last = Some(extrap);
        }
    }
    last.ok_or(Error::Internal("no extrapolant".into()))
}

/// `-1/2 int int |u - v|^{2H} dpsi(u) dpsi(v)`: exact double sum over the
/// atoms, quadrature for terms with the density. Kernels without a finite
/// `dpsi` fall back to the spectral integral.
pub fn sigma_sq(kernel: &SignedKernel, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !kernel.is_bounded_variation() {
        return covariance_from_density(&spectral_density(kernel, hurst)?, 0.0);
    }
    let p = 2.0 * hurst;
    let atoms = kernel.atoms();
    let aa: f64 = atoms
        .iter()
        .flat_map(|a| atoms.iter().map(move |b| a.weight * b.weight * (a.location - b.location).abs().powf(p)))
        .sum();
    let Some(_) = kernel.density(0.0) else {
        return Ok(-0.5 * aa);
    };
    let (lo, hi) = kernel.effective_support().ok_or_else(|| Error::UnsupportedKernel {
        kernel: kernel.id().to_string(),
        reason: "density without finite effective support".into(),
    })?;
    let dens = |v: f64| kernel.density(v).unwrap_or(0.0);
    let opts = QuadOptions::tol(1e-13, 1e-11);
    let mut breaks: Vec<f64> = kernel.breakpoints().to_vec();
    breaks.extend(atoms.iter().map(|a| a.location));
    let inner = |u: f64| -> Result<f64> {
        let mut b = breaks.clone();
        b.push(u);
        Ok(integrate_with_breaks(|v| (u - v).abs().powf(p) * dens(v), lo, hi, &b, opts)?.value)
    };
    let ad: f64 = atoms
        .iter()
        .map(|a| inner(a.location).map(|v| a.weight * v))
        .sum::<Result<f64>>()?;
    // Outer integral; inner failures surface as NaN and are reported.
    let dd = integrate_with_breaks(
        |u| dens(u) * inner(u).unwrap_or(f64::NAN),
        lo,
        hi,
        &breaks,
        QuadOptions::tol(1e-12, 1e-10),
    )?
    .value;
    if !dd.is_finite() {
        return Err(Error::Quadrature {
            tolerance: 1e-12,
            estimate: f64::NAN,
        });
    }
    Ok(-0.5 * (aa + 2.0 * ad + dd))
}

/// Empirical covariance of a simulated unit-scale process against a target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub kernel: String,
    pub lags: Vec<f64>,
    pub empirical: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub target: Vec<f64>,
    pub max_abs_deviation: f64,
    /// Largest `|empirical - target| / SE`.
    pub max_z: f64,
    pub replicas: usize,
    pub horizon: f64,
}

impl CovarianceReport {
    pub fn within(&self, z: f64) -> bool {
        self.max_z <= z
    }

    /// Rows `lag,empirical,se,target`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lag,empirical,se,target")?;
        for k in 0..self.lags.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.lags[k], self.empirical[k], self.standard_errors[k], self.target[k]
            )?;
        }
        Ok(())
    }
}

/// Simulation settings for covariance checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSetup {
    pub replicas: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for CovarianceSetup {
    fn default() -> Self {
        Self {
            replicas: 200,
            horizon: 50.0,
            dt: 1.0 / 64.0,
            seed: 0,
        }
    }
}

/// Per-replica time-averaged lag products of the unit-scale process of
/// Brownian motion with `kernel`, averaged over replicas.
pub fn empirical_covariance<F: Fn(f64) -> f64>(
    kernel: &SignedKernel,
    lags: &[f64],
    setup: CovarianceSetup,
    target: F,
) -> Result<CovarianceReport> {
    if setup.replicas < 2 {
        return Err(Error::param("replicas", "need at least 2 replicas for a standard error"));
    }
    let op = IncrementOperator::new(kernel, 1.0, setup.dt)?;
    let lag_steps: Vec<usize> = lags
        .iter()
        .map(|&l| {
            let k = (l.abs() / setup.dt).round();
            if ((k * setup.dt) - l.abs()).abs() > 1e-9 {
                Err(Error::param("lags", format!("lag {l} is not a multiple of dt = {}", setup.dt)))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<_>>()?;
    let grid = op.source_grid(0.0, setup.horizon)?;
    let per_replica: Vec<Vec<f64>> = (0..setup.replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let w = simulate(ProcessFamily::Brownian, grid, seed_split(setup.seed, r as u64))?;
            let z = unit_scale_with(&op, &w)?;
            let z = z.window(0.0, setup.horizon)?;
            Ok(lag_steps
                .iter()
                .map(|&k| {
                    let m = z.len() - k;
                    z.values[..m].iter().zip(&z.values[k..]).map(|(a, b)| a * b).sum::<f64>() / m as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut empirical = Vec::with_capacity(lags.len());
    let mut ses = Vec::with_capacity(lags.len());
    let mut targets = Vec::with_capacity(lags.len());
    let (mut max_dev, mut max_z) = (0.0f64, 0.0f64);
    for (j, &l) in lags.iter().enumerate() {
        let xs: Vec<f64> = per_replica.iter().map(|v| v[j]).collect();
        let m = stats::mean(&xs);
        let se = stats::std_error(&xs);
        let tg = target(l);
        max_dev = max_dev.max((m - tg).abs());
        max_z = max_z.max((m - tg).abs() / se);
        empirical.push(m);
        ses.push(se);
        targets.push(tg);
    }
    Ok(CovarianceReport {
        kernel: kernel.id().to_string(),
        lags: lags.to_vec(),
        empirical,
        standard_errors: ses,
        target: targets,
        max_abs_deviation: max_dev,
        max_z,
        replicas: setup.replicas,
        horizon: setup.horizon,
    })
}

/// Empirical covariance of the OU-matching kernels against `e^{-|t|}`.
pub fn verify_ou_match(kernel: &SignedKernel, lags: &[f64], setup: CovarianceSetup) -> Result<CovarianceReport> {
    if !matches!(kernel.id(), KernelId::OuExp | KernelId::OuBessel) {
        return Err(Error::param(
            "kernel",
            format!("OU matching applies to ou-exp and ou-bessel, got {}", kernel.id()),
        ));
    }
    if lags.is_empty() {
        return Ok(CovarianceReport {
            kernel: kernel.id().to_string(),
            lags: Vec::new(),
            empirical: Vec::new(),
            standard_errors: Vec::new(),
            target: Vec::new(),
            max_abs_deviation: 0.0,
            max_z: 0.0,
            replicas: setup.replicas,
            horizon: setup.horizon,
        });
    }
    empirical_covariance(kernel, lags, setup, |t| (-t.abs()).exp())
}

/// Averaged periodogram `(lambda_k, dt/(2 pi m) |sum x_j e^{-i lambda_k j dt}|^2)`
/// over non-overlapping segments of length `m`.
pub fn averaged_periodogram(x: &[f64], dt: f64, segment: usize) -> Vec<(f64, f64)> {
    let segments = x.len() / segment;
    if segments == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment);
    let mut power = vec![0.0; segment / 2 + 1];
    for s in 0..segments {
        let mut buf: Vec<Complex64> = x[s * segment..(s + 1) * segment]
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p += buf[k].norm_sqr();
        }
    }
    let scale = dt / (2.0 * PI * segment as f64 * segments as f64);
    power
        .iter()
        .enumerate()
        .map(|(k, p)| (2.0 * PI * k as f64 / (segment as f64 * dt), p * scale))
        .collect()
}

/// Relative L1 distance `sum |I - l| / sum l` over frequencies in
/// `(0, band]`, the periodogram smoothed by a centred moving average of
/// `2 half_width + 1` ordinates.
pub fn periodogram_l1_error(periodogram: &[(f64, f64)], density: &SpectralDensity, band: f64, half_width: usize) -> f64 {
    let n = periodogram.len();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..n {
        let (l, _) = periodogram[k];
        if l > band {
            break;
        }
        let a = k.saturating_sub(half_width).max(1);
        let b = (k + half_width).min(n - 1);
        let smooth = periodogram[a..=b].iter().map(|p| p.1).sum::<f64>() / (b - a + 1) as f64;
        let target = density.eval(l);
        num += (smooth - target).abs();
        den += target;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifiers::{kernel_fbm_ou_kernel, kernel_ou_bessel_kernel, kernel_ou_exponential, kernel_psi1, kernel_psi2, kernel_triangle};
    use approx::assert_relative_eq;

    fn fgn_cov(h: f64, t: f64) -> f64 {
        let p = 2.0 * h;
        0.5 * ((t + 1.0).abs().powf(p) + (t - 1.0).abs().powf(p) - 2.0 * t.abs().powf(p))
    }

    #[test]
    fn ou_exponential_density() {
        let d = spectral_density(&kernel_ou_exponential(), 0.5).unwrap();
        for l in [0.0, 0.3, 1.0, 7.0] {
            assert_relative_eq!(d.eval(l), 1.0 / (PI * (1.0 + l * l)), max_relative = 1e-12);
        }
        assert!(d.continuous_at_zero);
        assert_relative_eq!(d.sup_value, 1.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(covariance_from_density(&d, 1.0).unwrap(), (-1f64).exp(), max_relative = 1e-9);
        assert_relative_eq!(covariance_from_density(&d, 0.0).unwrap(), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn slepian_density_and_covariance() {
        let d = spectral_density(&kernel_psi1(), 0.5).unwrap();
        for l in [0.5, 1.0, PI, 10.0] {
            let s = (0.5 * l).sin() / (0.5 * l);
            assert_relative_eq!(d.eval(l), s * s / (2.0 * PI), max_relative = 1e-12);
        }
        assert_relative_eq!(d.sup_value, 1.0 / (2.0 * PI), max_relative = 1e-10);
        for t in [0.0, 0.25, 0.5, 0.75, 1.0, 2.0] {
            let r = covariance_from_density(&d, t).unwrap();
            assert!((r - (1.0 - t).max(0.0)).abs() < 1e-7, "t = {t}: {r}");
        }
    }

    #[test]
    fn fgn_covariance_via_density() {
        for h in [0.3, 0.7] {
            let d = spectral_density(&kernel_psi2(), h).unwrap();
            assert!(d.continuous_at_zero);
            let r0 = covariance_from_density(&d, 0.0).unwrap();
            assert!((r0 - sigma_sq(&kernel_psi2(), h).unwrap()).abs() < 1e-6);
        }
        let d = spectral_density(&kernel_psi1(), 0.3).unwrap();
        for t in [0.0, 0.3, 0.5, 1.0, 2.0] {
            let r = covariance_from_density(&d, t).unwrap();
            assert!((r - fgn_cov(0.3, t)).abs() < 1e-6, "t = {t}: {r} vs {}", fgn_cov(0.3, t));
        }
    }

    #[test]
    fn psi1_above_half_is_discontinuous() {
        let d = spectral_density(&kernel_psi1(), 0.7).unwrap();
        assert!(!d.continuous_at_zero);
        assert_eq!(d.sup_value, f64::INFINITY);
        assert!(covariance_from_density(&d, 0.0).is_err());
    }

    #[test]
    fn fbm_ou_density_is_ou() {
        let d = spectral_density(&kernel_fbm_ou_kernel(0.3).unwrap(), 0.3).unwrap();
        for l in [0.0, 0.5, 2.0, 20.0] {
            assert_relative_eq!(d.eval(l), 1.0 / (PI * (1.0 + l * l)), max_relative = 1e-10);
        }
    }

    #[test]
    fn sigma_sq_atom_sums() {
        assert_eq!(sigma_sq(&kernel_psi1(), 0.5).unwrap(), 1.0);
        assert_eq!(sigma_sq(&kernel_psi2(), 0.5).unwrap(), 0.5);
        assert_eq!(sigma_sq(&kernel_psi1(), 0.3).unwrap(), 1.0);
        // ||psi||_2^2 at H = 1/2
        assert_relative_eq!(sigma_sq(&kernel_ou_exponential(), 0.5).unwrap(), 1.0, max_relative = 1e-8);
        assert_relative_eq!(sigma_sq(&kernel_triangle(), 0.5).unwrap(), 1.0 / 6.0, max_relative = 1e-8);
    }

    #[test]
    fn sigma_sq_matches_density_for_density_kernels() {
        assert!(!spectral_density(&kernel_triangle(), 0.7).unwrap().continuous_at_zero);
        for h in [0.3, 0.5] {
            let k = kernel_triangle();
            let s = sigma_sq(&k, h).unwrap();
            let r = covariance_from_density(&spectral_density(&k, h).unwrap(), 0.0).unwrap();
            assert!((s - r).abs() < 1e-6, "H = {h}: {s} vs {r}");
        }
        let k = kernel_ou_exponential();
        let s = sigma_sq(&k, 0.3).unwrap();
        let r = covariance_from_density(&spectral_density(&k, 0.3).unwrap(), 0.0).unwrap();
        assert!((s - r).abs() < 1e-5, "{s} vs {r}");
    }

    #[test]
    fn evenness_and_decay() {
        for k in [kernel_psi1(), kernel_psi2(), kernel_triangle(), kernel_ou_exponential(), kernel_ou_bessel_kernel()] {
            let d = spectral_density(&k, 0.5).unwrap();
            for l in [0.1, 1.0, 3.3, 40.0] {
                assert!((d.eval(l) - d.eval(-l)).abs() <= 1e-12);
            }
            assert!(d.eval(1e3) < 1e-5 && d.eval(1e4) < d.eval(1e3) + 1e-12);
        }
    }

    #[test]
    fn ou_match_empty_lags() {
        let r = verify_ou_match(&kernel_ou_exponential(), &[], CovarianceSetup::default()).unwrap();
        assert!(r.lags.is_empty());
        assert!(verify_ou_match(&kernel_psi1(), &[1.0], CovarianceSetup::default()).is_err());
    }

    #[test]
    fn periodogram_of_white_noise_is_flat() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::seeding::rng_from_seed(1);
        let dt = 0.5;
        let x: Vec<f64> = (0..1 << 16).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = averaged_periodogram(&x, dt, 256);
        // white noise of variance 1 at step dt has density dt / (2 pi)
        let mean = p[1..].iter().map(|v| v.1).sum::<f64>() / (p.len() - 1) as f64;
        assert!((mean - dt / (2.0 * PI)).abs() < 0.03 * dt / (2.0 * PI));
    }
}
