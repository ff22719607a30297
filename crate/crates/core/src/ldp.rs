//! Rate functions: Monte Carlo scaled cumulant generating functionals and
//! their dictionary Legendre duals, the moment rate built from
//! `L(y) = -(1/4 pi) int log(1 - 4 pi y l(s)) ds`, the Donsker-Varadhan
//! rate `1/2 int |g'|^2 dN`, and the space-time rate of block paths.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{unit_scale_with, IncrementOperator};
use crate::measures::{EmpiricalMeasure, MeasurePath};
use crate::mollifiers::{SignedKernel, Support};
use crate::numerics::optimize::ternary_max;
use crate::numerics::quadrature::{gaussian_expectation, integrate_with_breaks, QuadOptions};
use crate::paths::{simulate, ProcessFamily};
use crate::seeding::seed_split;
use crate::spectral::{half_line_integral, SpectralDensity};

/// Bounded test function `f` for `Lambda(f) = lim T^{-1} log E exp int_0^T f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// `coef * min(x^2, cap)`
    ClippedSquare { coef: f64, cap: f64 },
    /// `slope * clamp(x, -cap, cap)`
    ClippedLinear { slope: f64, cap: f64 },
    /// Logistic smoothing of `amplitude * 1[lo, hi]` with edge width `width`.
    SmoothIndicator { lo: f64, hi: f64, width: f64, amplitude: f64 },
    Cosine { freq: f64, amplitude: f64 },
    Sine { freq: f64, amplitude: f64 },
    Combination { terms: Vec<(f64, TestFunction)> },
    Shifted { inner: Box<TestFunction>, offset: f64 },
}

fn logistic(x: f64) -> f64 {
    0.5 * (1.0 + (0.5 * x).tanh())
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        self.varying(x) + self.constant_part()
    }

    /// The additive constant carried explicitly (so that the estimator
    /// returns `Lambda(f + c) = Lambda(f) + c` exactly).
    pub fn constant_part(&self) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Shifted { inner, offset } => inner.constant_part() + offset,
            TestFunction::Combination { terms } => terms.iter().map(|(c, f)| c * f.constant_part()).sum(),
            _ => 0.0,
        }
    }

    /// `f - constant_part()`.
    pub fn varying(&self, x: f64) -> f64 {
        match self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::ClippedSquare { coef, cap } => coef * (x * x).min(*cap),
            TestFunction::ClippedLinear { slope, cap } => slope * x.clamp(-cap, *cap),
            TestFunction::SmoothIndicator { lo, hi, width, amplitude } => {
                amplitude * (logistic((x - lo) / width) - logistic((x - hi) / width))
            }
            TestFunction::Cosine { freq, amplitude } => amplitude * (freq * x).cos(),
            TestFunction::Sine { freq, amplitude } => amplitude * (freq * x).sin(),
            TestFunction::Combination { terms } => terms.iter().map(|(c, f)| c * f.varying(x)).sum(),
            TestFunction::Shifted { inner, .. } => inner.varying(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TestFunction::Constant { value } if *value == 0.0)
    }

    /// Points where the function has a kink, for quadrature.
    fn kinks(&self) -> Vec<f64> {
        match self {
            TestFunction::ClippedSquare { cap, .. } => vec![-cap.sqrt(), cap.sqrt()],
            TestFunction::ClippedLinear { cap, .. } => vec![-cap, *cap],
            TestFunction::Combination { terms } => terms.iter().flat_map(|(_, f)| f.kinks()).collect(),
            TestFunction::Shifted { inner, .. } => inner.kinks(),
            _ => Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::Constant { value } => format!("const({value})"),
            TestFunction::ClippedSquare { coef, cap } => format!("{coef}*min(x^2,{cap})"),
            TestFunction::ClippedLinear { slope, cap } => format!("{slope}*clamp(x,{cap})"),
            TestFunction::SmoothIndicator { lo, hi, width, amplitude } => {
                format!("{amplitude}*ind[{lo},{hi}]~{width}")
            }
            TestFunction::Cosine { freq, amplitude } => format!("{amplitude}*cos({freq}x)"),
            TestFunction::Sine { freq, amplitude } => format!("{amplitude}*sin({freq}x)"),
            TestFunction::Combination { terms } => terms
                .iter()
                .map(|(c, f)| format!("{c}*({})", f.label()))
                .collect::<Vec<_>>()
                .join("+"),
            TestFunction::Shifted { inner, offset } => format!("{}+{offset}", inner.label()),
        }
    }
}

/// Estimator settings for [`estimate_cgf_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgfOptions {
    pub dt: f64,
    /// Horizon must be at least this many kernel support widths.
    pub min_horizon_widths: f64,
}

impl Default for CgfOptions {
    fn default() -> Self {
        Self {
            dt: 1.0 / 32.0,
            min_horizon_widths: 20.0,
        }
    }
}

/// ESS fraction below which an estimate is flagged.
pub const ESS_WARN_FRACTION: f64 = 0.10;
/// ESS fraction below which an estimate is refused.
pub const ESS_REFUSE_FRACTION: f64 = 0.01;

/// Monte Carlo estimate of `Lambda` on a dictionary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CGFEstimate {
    pub kernel: String,
    pub dictionary: Vec<TestFunction>,
    pub values: Vec<f64>,
    /// Jackknife standard errors.
    pub standard_errors: Vec<f64>,
    /// Effective sample sizes of the exponential weights.
    pub effective_sample_sizes: Vec<f64>,
    pub warnings: Vec<String>,
    pub horizon: f64,
    pub replicas: usize,
}

impl CGFEstimate {
    pub fn write_json<W: Write>(&self, out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(std::io::Error::other)
    }
}

/// Width used for the horizon precondition. Exponentially tailed kernels
/// count the region holding all but `1e-6` of the `e^{-|x|}` tail.
pub fn support_width(kernel: &SignedKernel) -> Result<f64> {
    match kernel.support() {
        Support::Compact { start, end } => Ok(end - start),
        Support::ExponentialTail { bulk_start, bulk_end } => Ok((bulk_end - bulk_start) * 6.0 / 15.0),
        Support::AlgebraicTail => Err(Error::UnsupportedKernel {
            kernel: kernel.id().to_string(),
            reason: "no finite support width".into(),
        }),
    }
}

pub fn estimate_cgf(
    kernel: &SignedKernel,
    family: ProcessFamily,
    dictionary: &[TestFunction],
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<CGFEstimate> {
    estimate_cgf_with(kernel, family, dictionary, horizon, replicas, seed, CgfOptions::default())
}

/// `T^{-1} log mean_r exp int_0^T f(X(t)) dt` for each `f` in the
/// dictionary, `X` the unit-scale increment process of the source.
pub fn estimate_cgf_with(
    kernel: &SignedKernel,
    family: ProcessFamily,
    dictionary: &[TestFunction],
    horizon: f64,
    replicas: usize,
    seed: u64,
    opts: CgfOptions,
) -> Result<CGFEstimate> {
    family.validate()?;
    if replicas < 2 {
        return Err(Error::param("replicas", "need at least 2 replicas"));
    }
    let width = support_width(kernel)?;
    if horizon < opts.min_horizon_widths * width {
        return Err(Error::param(
            "horizon",
            format!(
                "{horizon} is shorter than {} support widths ({})",
                opts.min_horizon_widths,
                opts.min_horizon_widths * width
            ),
        ));
    }
    let op = IncrementOperator::new(kernel, 1.0, opts.dt)?;
    let grid = op.source_grid(0.0, horizon)?;
    // integrals[r][j] = int_0^T varying_j(X_r)
    let integrals: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let w = simulate(family, grid, seed_split(seed, r as u64))?;
            let z = unit_scale_with(&op, &w)?.window(0.0, horizon)?;
            let last = z.len() - 1;
            Ok(dictionary
                .iter()
                .map(|f| {
                    let inner: f64 = z.values.iter().map(|&x| f.varying(x)).sum();
                    let ends = 0.5 * (f.varying(z.values[0]) + f.varying(z.values[last]));
                    z.dt * (inner - ends)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(dictionary.len());
    let mut ses = Vec::with_capacity(dictionary.len());
    let mut esss = Vec::with_capacity(dictionary.len());
    let mut warnings = Vec::new();
    for (j, f) in dictionary.iter().enumerate() {
        let a: Vec<f64> = integrals.iter().map(|v| v[j]).collect();
        let est = log_mean_exp(&a, horizon);
        let frac = est.ess / replicas as f64;
        if frac < ESS_REFUSE_FRACTION {
            return Err(Error::Degenerate(format!(
                "effective sample size {:.1} of {replicas} for {}",
                est.ess,
                f.label()
            )));
        }
        if frac < ESS_WARN_FRACTION {
            warnings.push(format!(
                "effective sample size {:.1} of {replicas} for {}",
                est.ess,
                f.label()
            ));
        }
        values.push(est.value + f.constant_part());
        ses.push(est.se);
        esss.push(est.ess);
    }
    Ok(CGFEstimate {
        kernel: kernel.id().to_string(),
        dictionary: dictionary.to_vec(),
        values,
        standard_errors: ses,
        effective_sample_sizes: esss,
        warnings,
        horizon,
        replicas,
    })
}

struct LogMeanExp {
    value: f64,
    se: f64,
    ess: f64,
}

/// `T^{-1} log mean exp(a)` with a leave-one-out jackknife error.
fn log_mean_exp(a: &[f64], horizon: f64) -> LogMeanExp {
    let r = a.len();
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = a.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    let value = (m + (s / r as f64).ln()) / horizon;
    // Leave-one-out sums from prefix and suffix sums, free of cancellation.
    let mut prefix = vec![0.0; r + 1];
    for i in 0..r {
        prefix[i + 1] = prefix[i] + w[i];
    }
    let mut suffix = vec![0.0; r + 1];
    for i in (0..r).rev() {
        suffix[i] = suffix[i + 1] + w[i];
    }
    let loo: Vec<f64> = (0..r)
        .map(|i| (m + ((prefix[i] + suffix[i + 1]) / (r - 1) as f64).ln()) / horizon)
        .collect();
    let mean = loo.iter().sum::<f64>() / r as f64;
    let var = loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (r - 1) as f64 / r as f64;
    LogMeanExp {
        value,
        se: var.sqrt(),
        ess: s * s / s2,
    }
}

/// Whether a rate value is exact or a dictionary lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub minimizer: f64,
    pub kind: RateKind,
}

impl RateCurve {
    fn from_parts(xs: Vec<f64>, values: Vec<f64>, standard_errors: Vec<f64>, kind: RateKind) -> Self {
        let minimizer = xs
            .iter()
            .zip(&values)
            .fold((f64::NAN, f64::INFINITY), |best, (&x, &v)| if v < best.1 { (x, v) } else { best })
            .0;
        Self {
            xs,
            values,
            standard_errors,
            minimizer,
            kind,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Divided second differences on the (possibly uneven) grid.
    pub fn second_differences(&self) -> Vec<f64> {
        (1..self.xs.len().saturating_sub(1))
            .map(|i| {
                let (x0, x1, x2) = (self.xs[i - 1], self.xs[i], self.xs[i + 1]);
                let (v0, v1, v2) = (self.values[i - 1], self.values[i], self.values[i + 1]);
                ((v2 - v1) / (x2 - x1) - (v1 - v0) / (x1 - x0)) / (0.5 * (x2 - x0))
            })
            .collect()
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        self.second_differences().iter().all(|&d| d >= -tol || d.is_nan())
    }

    /// Rows `x,rate`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,rate")?;
        for (x, v) in self.xs.iter().zip(&self.values) {
            writeln!(out, "{x},{v}")?;
        }
        Ok(())
    }
}

/// One-parameter families of target measures for the dictionary dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetFamily {
    /// `N(x, sd^2)`
    ShiftedGaussian { sd: f64 },
    /// `N(0, x)`: the target is a second moment.
    CenteredGaussian,
}

impl TargetFamily {
    fn mean_sd(&self, x: f64) -> (f64, f64) {
        match *self {
            TargetFamily::ShiftedGaussian { sd } => (x, sd),
            TargetFamily::CenteredGaussian => (0.0, x.max(0.0).sqrt()),
        }
    }
}

/// `int f dN(m, s^2)`, adaptive over `m +- 12 s` split at the kinks.
fn gaussian_integral(f: &TestFunction, mean: f64, sd: f64) -> Result<f64> {
    if sd == 0.0 {
        return Ok(f.eval(mean));
    }
    let (lo, hi) = (mean - 12.0 * sd, mean + 12.0 * sd);
    let mut breaks = f.kinks();
    breaks.extend((1..24).map(|k| lo + (hi - lo) * k as f64 / 24.0));
    let norm = 1.0 / (sd * (2.0 * PI).sqrt());
    let v = integrate_with_breaks(
        |x| f.varying(x) * norm * (-0.5 * ((x - mean) / sd).powi(2)).exp(),
        lo,
        hi,
        &breaks,
        QuadOptions::tol(1e-12, 1e-10),
    )?;
    Ok(v.value + f.constant_part())
}

/// Dictionary lower bound `max(0, max_f int f dnu_x - Lambda(f))` on the
/// Legendre dual at each target `nu_x` of the family. Ties go to the first
/// maximiser in dictionary order.
pub fn legendre_dual_on_grid(cgf: &CGFEstimate, targets: &[f64], family: TargetFamily) -> Result<RateCurve> {
    if cgf.dictionary.is_empty() {
        return Err(Error::param("dictionary", "must be nonempty"));
    }
    let mut values = Vec::with_capacity(targets.len());
    let mut ses = Vec::with_capacity(targets.len());
    for &x in targets {
        let (m, s) = family.mean_sd(x);
        let mut best = (0.0, 0.0);
        for (j, f) in cgf.dictionary.iter().enumerate() {
            let v = gaussian_integral(f, m, s)? - cgf.values[j];
            if v > best.0 {
                best = (v, cgf.standard_errors[j]);
            }
        }
        values.push(best.0);
        ses.push(best.1);
    }
    Ok(RateCurve::from_parts(targets.to_vec(), values, ses, RateKind::LowerBound))
}

fn require_bounded(density: &SpectralDensity) -> Result<()> {
    if !density.sup_value.is_finite() {
        return Err(Error::Domain(format!(
            "spectral density of {} at H = {} is unbounded",
            density.kernel_id,
            density.hurst()
        )));
    }
    Ok(())
}

/// `L(y) = -(1/4 pi) int_R log(1 - 4 pi y l(s)) ds` for `y < 1/(4 pi M)`.
pub fn moment_cumulant(density: &SpectralDensity, y: f64) -> Result<f64> {
    require_bounded(density)?;
    let c = 4.0 * PI * y;
    if c * density.sup_value >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let v = half_line_integral(density, |s| (-c * density.raw_at(s)).ln_1p(), 1e-12)?;
    Ok(-v / (2.0 * PI))
}

/// `L'(y) = int_R l / (1 - 4 pi y l)`.
fn moment_cumulant_derivative(density: &SpectralDensity, y: f64) -> Result<f64> {
    let c = 4.0 * PI * y;
    let v = half_line_integral(
        density,
        |s| {
            let l = density.raw_at(s);
            l / (1.0 - c * l)
        },
        1e-10,
    )?;
    Ok(2.0 * v)
}

/// `I(x) = sup_y {x y - L(y)}` on `y in (-Y0, 1/(4 pi M))`, by ternary
/// search on the concave objective; `I(0) = +inf`.
pub fn moment_rate(density: &SpectralDensity, xs: &[f64]) -> Result<RateCurve> {
    require_bounded(density)?;
    if let Some(&x) = xs.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::param("xs", format!("must be nonnegative, got {x}")));
    }
    let y_max = 1.0 / (4.0 * PI * density.sup_value);
    let objective = |x: f64, y: f64| match moment_cumulant(density, y) {
        Ok(l) if l.is_finite() => x * y - l,
        _ => f64::NEG_INFINITY,
    };
    let mut values = Vec::with_capacity(xs.len());
    for &x in xs {
        if x == 0.0 {
            values.push(f64::INFINITY);
            continue;
        }
        // Y0: push the lower end out until the objective increases there.
        let mut lo = -1.0;
        while lo > -1e12 && x - moment_cumulant_derivative(density, lo)? <= 0.0 {
            lo *= 4.0;
        }
        let hi = y_max * (1.0 - 1e-12);
        let (_, v) = ternary_max(|y| objective(x, y), lo, hi, 1e-10);
        values.push(v.max(0.0));
    }
    Ok(RateCurve::from_parts(xs.to_vec(), values, vec![0.0; xs.len()], RateKind::Exact))
}

/// Default Gauss-Hermite order for [`dv_rate`].
pub const DV_ORDER: usize = 96;
const DV_NORM_TOL: f64 = 1e-8;
const DV_DIFF_STEP: f64 = 1e-5;

/// `1/2 int |g'|^2 dN` for `d mu = g^2 dN`; `g'` by central differences
/// when not supplied.
pub fn dv_rate<G: Fn(f64) -> f64>(g: G, derivative: Option<&dyn Fn(f64) -> f64>, order: usize) -> Result<f64> {
    let norm = gaussian_expectation(|x| g(x).powi(2), order);
    if (norm - 1.0).abs() > DV_NORM_TOL {
        return Err(Error::Normalization(format!("int g^2 dN = {norm}, expected 1")));
    }
    let v = match derivative {
        Some(dg) => gaussian_expectation(|x| dg(x).powi(2), order),
        None => gaussian_expectation(
            |x| ((g(x + DV_DIFF_STEP) - g(x - DV_DIFF_STEP)) / (2.0 * DV_DIFF_STEP)).powi(2),
            order,
        ),
    };
    Ok(0.5 * v)
}

/// `g(x) = exp((theta x - theta^2 / 2) / 2)`, so that `g^2 dN = N(theta, 1)`.
pub fn exponential_tilt(theta: f64) -> impl Fn(f64) -> f64 {
    move |x| (0.5 * (theta * x - 0.5 * theta * theta)).exp()
}

/// `sum_k |block_k| rate(slope_k)` for a block path.
pub fn space_time_rate<F>(path: &MeasurePath, block_rates: F) -> Result<f64>
where
    F: Fn(&EmpiricalMeasure) -> Result<f64>,
{
    let mut total = 0.0;
    for k in 0..path.blocks().len() {
        let slope = path.slope(k);
        if !slope.is_probability() {
            return Err(Error::Normalization(format!(
                "block {k} slope has mass {}",
                slope.total_mass()
            )));
        }
        total += (path.times[k + 1] - path.times[k]) * block_rates(&slope)?;
    }
    Ok(total)
}
