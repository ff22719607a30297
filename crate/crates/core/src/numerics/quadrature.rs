//! Adaptive Gauss-Kronrod integration, semi-infinite and oscillatory
//! variants, and Gauss-Hermite rules for Gaussian expectations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// One K15 panel: (kronrod estimate, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        resk += WGK[j] * sum;
        if j % 2 == 1 {
            resg += WG[j / 2] * sum;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7-K15 integration of `f` over `[a, b]`, split first at
/// the given interior breakpoints.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = std::iter::once(lo)
        .chain(breaks.iter().copied().filter(|&x| x > lo && x < hi))
        .chain(std::iter::once(hi))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    for w in cuts.windows(2) {
        let (v, e) = gk15(&f, w[0], w[1]);
        evals += 15;
        total += v;
        err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                tolerance: opts.abs_tol.max(opts.rel_tol * total.abs()),
                estimate: err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval collapsed to adjacent floats; keep what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    if !value.is_finite() {
        return Err(Error::Quadrature {
            tolerance: opts.abs_tol,
            estimate: f64::INFINITY,
        });
    }
    Ok(QuadResult {
        value: sign * value,
        error,
        evaluations: evals,
    })
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, a, b, &[], opts)
}

/// Integral over `[a, inf)` via the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate(
        |t| {
            let s = 1.0 - t;
            let x = a + t / s;
            let v = f(x) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// Integral over the whole real line, split at `center`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, center: f64, opts: QuadOptions) -> Result<QuadResult> {
    let half_opts = QuadOptions {
        abs_tol: 0.5 * opts.abs_tol,
        ..opts
    };
    let right = integrate_to_infinity(&f, center, half_opts)?;
    let left = integrate_to_infinity(|x| f(2.0 * center - x), center, half_opts)?;
    Ok(QuadResult {
        value: left.value + right.value,
        error: left.error + right.error,
        evaluations: left.evaluations + right.evaluations,
    })
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums. Returns
/// the last diagonal estimate together with the size of its final update.
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let n = partial_sums.len();
    if n < 3 {
        let last = partial_sums.last().copied().unwrap_or(0.0);
        return (last, f64::INFINITY);
    }
    // prev = column k-1, cur = column k of the epsilon table.
    let mut prev: Vec<f64> = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial_sums.to_vec();
    let mut best = partial_sums[n - 1];
    let mut best_delta = (partial_sums[n - 1] - partial_sums[n - 2]).abs();
    let mut column = 0;
    while cur.len() > 1 {
        let next: Vec<f64> = (0..cur.len() - 1)
            .map(|i| prev[i + 1] + 1.0 / (cur[i + 1] - cur[i]))
            .collect();
        column += 1;
        prev = cur;
        cur = next;
        if cur.iter().any(|v| !v.is_finite()) {
            break;
        }
        // Even columns carry the accelerated estimates.
        if column % 2 == 0 && cur.len() >= 2 {
            let est = cur[cur.len() - 1];
            let delta = (est - cur[cur.len() - 2]).abs();
            if delta < best_delta {
                best = est;
                best_delta = delta;
            }
        }
    }
    (best, best_delta)
}

/// `int_0^inf g(x) cos(omega x) dx` for slowly decaying `g`, by summing
/// half-period panels and accelerating the alternating tail with Wynn's
/// epsilon. `omega == 0` falls back to the plain semi-infinite rule.
pub fn fourier_cosine<F: Fn(f64) -> f64>(g: F, omega: f64, opts: QuadOptions) -> Result<QuadResult> {
    let omega = omega.abs();
    if omega == 0.0 {
        return integrate_to_infinity(g, 0.0, opts);
    }
    let half_period = std::f64::consts::PI / omega;
    let panel_opts = QuadOptions {
        abs_tol: opts.abs_tol * 1e-2,
        rel_tol: opts.rel_tol * 1e-2,
        max_intervals: opts.max_intervals,
    };
    // First panel ends at the first zero of cos(omega x).
    let first_end = 0.5 * half_period;
    let head = integrate(|x| g(x) * (omega * x).cos(), 0.0, first_end, panel_opts)?;
    let mut sum = head.value;
    let mut evals = head.evaluations;
    let mut partial = Vec::with_capacity(64);
    let mut last_estimate = f64::NAN;
    let mut start = first_end;
    for k in 0..400 {
        let end = start + half_period;
        let panel = integrate(|x| g(x) * (omega * x).cos(), start, end, panel_opts)?;
        evals += panel.evaluations;
        sum += panel.value;
        partial.push(sum);
        start = end;
        if k >= 10 && partial.len() >= 12 {
            let window = &partial[partial.len().saturating_sub(40)..];
            let (est, _) = wynn_epsilon(window);
            let change = (est - last_estimate).abs();
            last_estimate = est;
            if change <= opts.abs_tol.max(opts.rel_tol * est.abs()) {
                return Ok(QuadResult {
                    value: est,
                    error: change,
                    evaluations: evals,
                });
            }
        }
    }
    Err(Error::Quadrature {
        tolerance: opts.abs_tol,
        estimate: f64::NAN,
    })
}

/// Nodes and weights for `E[f(Z)]`, `Z ~ N(0, 1)` (probabilists' Hermite
/// weight, normalised to total mass one). Golub-Welsch.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Hermite order must be positive");
    let jacobi = nalgebra::DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}

/// `E[f(Z)]` for standard normal `Z`.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(f: F, order: usize) -> f64 {
    let (x, w) = gauss_hermite(order);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_rule_is_exact_to_degree_22() {
        for deg in 0..=22 {
            let (v, _) = gk15(&|x: f64| x.powi(deg), -1.0, 1.0);
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((v - exact).abs() < 1e-14, "degree {deg}: {v} vs {exact}");
        }
    }

    #[test]
    fn gauss_subrule_is_exact_to_degree_13() {
        for deg in 0..=13 {
            let f = |x: f64| x.powi(deg);
            let mut resg = f(0.0) * WG[3];
            for j in (1..7).step_by(2) {
                resg += WG[j / 2] * (f(XGK[j]) + f(-XGK[j]));
            }
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((resg - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_handles_log_endpoint_singularity() {
        // int_0^1 ln x dx = -1
        let r = integrate(|x| x.ln(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn semi_infinite_and_real_line() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-11);
        let r = integrate_real_line(|x| 1.0 / (1.0 + x * x), 0.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn fourier_cosine_of_slow_tail() {
        // int_0^inf cos(x)/sqrt(1+x^2) dx = K0(1)
        let r = fourier_cosine(|x| 1.0 / (1.0 + x * x).sqrt(), 1.0, QuadOptions::tol(1e-11, 1e-11))
            .unwrap();
        assert_relative_eq!(r.value, 0.421_024_438_240_708_33, epsilon = 1e-9);
        // int_0^inf sin-free Dirichlet-type: cos(x)/(1+x^2) -> pi/(2e)
        let r = fourier_cosine(|x| 1.0 / (1.0 + x * x), 1.0, QuadOptions::default()).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI / (2.0 * 1f64.exp()), epsilon = 1e-9);
    }

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(20);
        let m = |p: i32| x.iter().zip(&w).map(|(a, b)| b * a.powi(p)).sum::<f64>();
        assert_relative_eq!(m(0), 1.0, epsilon = 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert_relative_eq!(m(2), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m(4), 3.0, epsilon = 1e-11);
        assert_relative_eq!(m(6), 15.0, epsilon = 1e-10);
        // E exp(Z) = e^{1/2}
        assert_relative_eq!(gaussian_expectation(f64::exp, 40), 0.5f64.exp(), epsilon = 1e-13);
    }
}
