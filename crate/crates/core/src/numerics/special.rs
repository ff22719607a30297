//! Special functions: modified Bessel K0, its integral, Gaussian CDF and
//! the fBm harmonizable constant.

use std::f64::consts::PI;

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

/// Argument at which K0 leaves the power series.
pub const K0_SERIES_LIMIT: f64 = 2.0;
/// Above this the asymptotic expansion, optimally truncated, is below 1e-16.
const K0_ASYMPTOTIC_FROM: f64 = 25.0;

/// Modified Bessel function of the second kind, order zero.
///
/// `x <= 2`: ascending series
/// `K0(x) = -(ln(x/2) + gamma) I0(x) + sum_k (x^2/4)^k / (k!)^2 H_k`.
/// `2 < x < 25`: `e^x K0(x) = int_0^inf exp(-x (cosh t - 1)) dt` by the
/// trapezoidal rule, which converges geometrically for this integrand.
/// `x >= 25`: Hankel asymptotic expansion.
pub fn bessel_k0(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "K0 is defined for x > 0 (diverges logarithmically at 0), got {x}"
        )));
    }
    Ok(if x <= K0_SERIES_LIMIT {
        k0_series(x)
    } else if x < K0_ASYMPTOTIC_FROM {
        k0_scaled_integral(x) * (-x).exp()
    } else {
        k0_asymptotic(x)
    })
}

fn k0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0; // (q^k / (k!)^2)
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0 + tail
}

fn k0_scaled_integral(x: f64) -> f64 {
    // Integrand exp(-x(cosh t - 1)) is below 1e-18 once x(cosh t - 1) > 42.
    let t_max = (1.0 + 42.0 / x).acosh();
    let steps = 160usize;
    let h = t_max / steps as f64;
    let mut sum = 0.5;
    for k in 1..=steps {
        let t = k as f64 * h;
        sum += (-x * (t.cosh() - 1.0)).exp();
    }
    sum * h
}

fn k0_asymptotic(x: f64) -> f64 {
    // sqrt(pi/2x) e^{-x} sum_k a_k, a_k = a_{k-1} * (-(2k-1)^2) / (8 k x)
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        let next = term * (-(odd * odd)) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * (-x).exp() * sum
}

/// `int_0^x K0(t) dt`, x >= 0.
pub fn bessel_k0_integral(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x <= K0_SERIES_LIMIT {
        // Integrate the series termwise: int_0^x t^{2k} ln(t/2) dt is closed form.
        let mut total = 0.0;
        let mut coef = 1.0; // 1 / (4^k (k!)^2)
        let mut harmonic = 0.0;
        let lx = (0.5 * x).ln();
        for k in 0..60 {
            let kf = k as f64;
            if k > 0 {
                coef /= 4.0 * kf * kf;
                harmonic += 1.0 / kf;
            }
            let p = 2.0 * kf + 1.0;
            let xp = x.powf(p);
            // int_0^x t^{2k} dt = x^p / p ; int_0^x t^{2k} ln(t/2) dt = x^p (ln(x/2)/p - 1/p^2)
            let log_part = xp * (lx / p - 1.0 / (p * p));
            let plain = xp / p;
            let term = coef * (-(log_part) - EULER_GAMMA * plain + harmonic * plain);
            total += term;
            if term.abs() < 1e-18 * total.abs().max(1e-300) && k > 2 {
                break;
            }
        }
        total
    } else {
        // int_0^inf K0 = pi/2; subtract the tail int_x^inf K0.
        let tail = super::quadrature::integrate_to_infinity(
            |t| bessel_k0(t).unwrap_or(0.0),
            x,
            super::quadrature::QuadOptions::tol(1e-15, 1e-13),
        )
        .map(|r| r.value)
        .unwrap_or(0.0);
        0.5 * PI - tail
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `C_H^2 = 2 pi / (Gamma(2H + 1) sin(pi H))`, the constant of the
/// harmonizable representation of fBm, via log-Gamma.
pub fn harmonizable_constant_sq(hurst: f64) -> f64 {
    2.0 * PI * (-ln_gamma(2.0 * hurst + 1.0)).exp() / (PI * hurst).sin()
}
