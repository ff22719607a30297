//! One-dimensional search on unimodal objectives.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if c == d {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // Report the best point seen at the end, first in scan order on ties.
    [(c, fc), (x, fx), (d, fd)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Ternary search for the maximum of a concave `f` on `[a, b]`.
pub fn ternary_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    for _ in 0..400 {
        if b - a <= x_tol {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) < f(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Locate the supremum of `f` on `[lo, hi]` (with `lo > 0`): scan a
/// logarithmic grid, then refine the best bracket by golden section.
pub fn log_grid_sup<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo * (ratio * i as f64).exp()).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let (imax, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let a = grid[imax.saturating_sub(1)];
    let b = grid[(imax + 1).min(points - 1)];
    let (x, v) = golden_max(&f, a, b, 1e-12 * b.max(1e-300));
    if v >= vals[imax] {
        (x, v)
    } else {
        (grid[imax], vals[imax])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -5.0, 5.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ternary_concave() {
        let (x, _) = ternary_max(|x| (1.0 + x).ln() - 0.5 * x, 0.0, 10.0, 1e-11);
        assert!((x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_grid_sup_interior() {
        let (x, v) = log_grid_sup(|x| x * (-x).exp(), 1e-3, 1e3, 200);
        assert!((x - 1.0).abs() < 1e-6);
        assert!((v - (-1f64).exp()).abs() < 1e-12);
    }
}
