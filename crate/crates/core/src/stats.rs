//! Sample statistics and Kolmogorov-Smirnov machinery used by the
//! Monte Carlo checks.

/// Asymptotic Kolmogorov critical coefficient `c(alpha) = sqrt(-ln(alpha/2)/2)`.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(0.5 * alpha).ln() / 2.0).sqrt()
}

/// One-sample KS critical value at level `alpha` for `n` observations.
pub fn ks_critical_one_sample(n: usize, alpha: f64) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

/// Two-sample KS critical value at level `alpha`.
pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Two-sample KS statistic `sup |F_a - F_b|` for unweighted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let (num, den) = xs.iter().zip(ys).fold((0.0, 0.0), |(n, d), (&x, &y)| {
        (n + (x - mx) * (y - my), d + (x - mx) * (x - mx))
    });
    num / den
}

/// Standard error of a mean of a correlated series by non-overlapping
/// batch means.
pub fn batch_means_se(xs: &[f64], batch_len: usize) -> f64 {
    let batch_len = batch_len.max(1);
    let batches: Vec<f64> = xs.chunks_exact(batch_len).map(mean).collect();
    if batches.len() < 2 {
        return f64::INFINITY;
    }
    std_error(&batches)
}
