//! Occupation measures, space-time histograms and their cumulative
//! measure paths, plus the KS and bounded-Lipschitz comparisons.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::GridPath;

/// Tolerance on total masses of constructed measures.
pub const MASS_TOL: f64 = 1e-12;

/// Finite weighted point measure, points sorted by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    points: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    total_mass: f64,
    /// Seed of the path the measure was built from, when known.
    provenance: Option<u64>,
}

impl Default for EmpiricalMeasure {
    fn default() -> Self {
        Self::zero()
    }
}

impl EmpiricalMeasure {
    pub fn zero() -> Self {
        Self {
            points: Vec::new(),
            cumulative: Vec::new(),
            total_mass: 0.0,
            provenance: None,
        }
    }

    pub fn from_weighted(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.0.is_finite() || !(p.1 >= 0.0) || !p.1.is_finite()) {
            return Err(Error::param("points", format!("bad point {p:?}: values must be finite and weights nonnegative")));
        }
        points.retain(|p| p.1 > 0.0);
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut acc = 0.0;
        let cumulative = points
            .iter()
            .map(|p| {
                acc += p.1;
                acc
            })
            .collect();
        Ok(Self {
            points,
            cumulative,
            total_mass: acc,
            provenance: None,
        })
    }

    /// Uniform probability on the samples.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Length("no samples".into()));
        }
        let w = 1.0 / samples.len() as f64;
        Self::from_weighted(samples.iter().map(|&x| (x, w)).collect())
    }

    pub fn dirac(x: f64) -> Self {
        Self::from_weighted(vec![(x, 1.0)]).expect("finite point")
    }

    pub fn with_provenance(mut self, seed: u64) -> Self {
        self.provenance = Some(seed);
        self
    }

    pub fn provenance(&self) -> Option<u64> {
        self.provenance
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() <= 1e-9
    }

    /// `mu((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// `mu((-inf, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 < x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|&(x, w)| w * f(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x| x) / self.total_mass
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.integrate(|x| (x - m) * (x - m)) / self.total_mass
    }

    /// Smallest `x` with `cdf(x) >= p * total_mass`.
    pub fn quantile(&self, p: f64) -> f64 {
        let target = p.clamp(0.0, 1.0) * self.total_mass;
        let k = self.cumulative.partition_point(|&c| c < target * (1.0 - 1e-15));
        self.points[k.min(self.points.len() - 1)].0
    }

    /// Sum of two measures. Commutative and associative up to the order of
    /// floating-point summation of the total, which is recomputed in sorted
    /// order.
    pub fn merge(&self, other: &EmpiricalMeasure) -> EmpiricalMeasure {
        let mut pts = Vec::with_capacity(self.points.len() + other.points.len());
        pts.extend_from_slice(&self.points);
        pts.extend_from_slice(&other.points);
        let mut m = Self::from_weighted(pts).expect("inputs are valid");
        m.provenance = if self.provenance == other.provenance { self.provenance } else { None };
        m
    }

    pub fn scale(&self, c: f64) -> EmpiricalMeasure {
        let mut m = Self::from_weighted(self.points.iter().map(|&(x, w)| (x, c * w)).collect())
            .expect("scaled weights stay valid");
        m.provenance = self.provenance;
        m
    }

    /// Equal-weight average of probability measures.
    pub fn average(parts: &[EmpiricalMeasure]) -> Result<EmpiricalMeasure> {
        if parts.is_empty() {
            return Err(Error::Length("nothing to average".into()));
        }
        let c = 1.0 / parts.len() as f64;
        let pts = parts
            .iter()
            .flat_map(|m| m.points.iter().map(move |&(x, w)| (x, c * w)))
            .collect();
        Self::from_weighted(pts)
    }

    /// Rows `value,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "value,weight")?;
        for (x, w) in &self.points {
            writeln!(out, "{x},{w}")?;
        }
        Ok(())
    }
}

/// Occupation measure `int_0^1 delta_{Z(t)} dt` of a path, by the
/// trapezoidal rule on its nodes in `[0, 1]`.
pub fn occupation_measure(path: &GridPath) -> Result<EmpiricalMeasure> {
    occupation_measure_on(path, 0.0, 1.0)
}

/// Normalised occupation measure of `[start, end]`.
pub fn occupation_measure_on(path: &GridPath, start: f64, end: f64) -> Result<EmpiricalMeasure> {
    let w = path.window(start, end)?;
    let n = w.len();
    let h = w.dt / (end - start);
    let pts = w
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| (v, if k == 0 || k == n - 1 { 0.5 * h } else { h }))
        .collect();
    let m = EmpiricalMeasure::from_weighted(pts)?;
    Ok(match path.meta {
        Some(d) => m.with_provenance(d.seed),
        None => m,
    })
}

/// `sup_x |F(x) - G(x)|` over the jump points of `mu`, both one-sided
/// limits included.
pub fn ks_distance<F: Fn(f64) -> f64>(mu: &EmpiricalMeasure, target_cdf: F) -> f64 {
    let mut d: f64 = 0.0;
    let mut prev = 0.0;
    let mut k = 0;
    let pts = mu.points();
    while k < pts.len() {
        let x = pts[k].0;
        let mut j = k;
        while j < pts.len() && pts[j].0 == x {
            j += 1;
        }
        let here = mu.cumulative[j - 1];
        // Left limit of the target taken just below the jump, so that
        // targets with atoms are compared fairly.
        d = d
            .max((here - target_cdf(x)).abs())
            .max((prev - target_cdf(x.next_down())).abs());
        prev = here;
        k = j;
    }
    d
}

/// Two-sample KS distance between measures.
pub fn ks_between(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let mut d: f64 = 0.0;
    for m in [mu, nu] {
        for &(x, _) in m.points() {
            d = d.max((mu.cdf(x) - nu.cdf(x)).abs());
        }
    }
    d
}

/// `W_1(mu, nu) = int |F - G|`.
pub fn wasserstein1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let mut xs: Vec<f64> = mu.points().iter().chain(nu.points()).map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2)
        .map(|w| (mu.cdf(w[0]) - nu.cdf(w[0])).abs() * (w[1] - w[0]))
        .sum()
}

/// Test function with `||f||_inf + Lip(f) <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BlFunction {
    /// `h max(0, 1 - |x - c|/w)` with `h = w/(1 + w)`.
    Hat { center: f64, width: f64 },
    /// `a tanh((x - c)/s)` with `a = s/(1 + s)`.
    Tanh { center: f64, scale: f64 },
    /// `clamp(L (x - c), -(1 - L), 1 - L)`.
    Ramp { center: f64, slope: f64 },
}

impl BlFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BlFunction::Hat { center, width } => {
                width / (1.0 + width) * (1.0 - (x - center).abs() / width).max(0.0)
            }
            BlFunction::Tanh { center, scale } => scale / (1.0 + scale) * ((x - center) / scale).tanh(),
            BlFunction::Ramp { center, slope } => {
                let cap = 1.0 - slope;
                (slope * (x - center)).clamp(-cap, cap)
            }
        }
    }
}

/// Dictionary at `size` quantile knots of `reference`.
pub fn bl_dictionary(reference: &EmpiricalMeasure, size: usize) -> Vec<BlFunction> {
    if reference.points().is_empty() || size == 0 {
        return Vec::new();
    }
    let q1 = reference.quantile(0.25);
    let q3 = reference.quantile(0.75);
    let spread = (q3 - q1).max(1e-3);
    let knots: Vec<f64> = (0..size)
        .map(|k| reference.quantile((k as f64 + 0.5) / size as f64))
        .collect();
    let mut dict = Vec::with_capacity(size * 12);
    for &c in &knots {
        for f in [0.1, 0.3, 1.0, 3.0] {
            dict.push(BlFunction::Hat {
                center: c,
                width: f * spread,
            });
            dict.push(BlFunction::Tanh {
                center: c,
                scale: f * spread,
            });
        }
        for slope in [0.1, 0.25, 0.5, 0.75] {
            dict.push(BlFunction::Ramp { center: c, slope });
        }
    }
    dict
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DblBounds {
    /// `max |int f dmu - int f dnu|` over the dictionary.
    pub lower: f64,
    /// `min(W_1, 2)`.
    pub upper: f64,
}

/// Certified bracket on the bounded-Lipschitz distance.
pub fn dbl_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, dictionary_size: usize) -> Result<DblBounds> {
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if !m.is_probability() {
            return Err(Error::Normalization(format!(
                "{name} has mass {}, expected a probability measure",
                m.total_mass()
            )));
        }
    }
    let pooled = mu.merge(nu);
    let dict = bl_dictionary(&pooled, dictionary_size);
    let lower = dict
        .par_iter()
        .map(|f| (mu.integrate(|x| f.eval(x)) - nu.integrate(|x| f.eval(x))).abs())
        .reduce(|| 0.0, f64::max);
    let upper = wasserstein1(mu, nu).min(2.0);
    Ok(DblBounds {
        lower: lower.min(upper),
        upper,
    })
}

/// Dictionary discrepancy `max_f |int f dmu - int f dnu|` against a fixed
/// dictionary (no normalisation check).
pub fn dictionary_discrepancy(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, dict: &[BlFunction]) -> f64 {
    dict.iter()
        .map(|f| (mu.integrate(|x| f.eval(x)) - nu.integrate(|x| f.eval(x))).abs())
        .fold(0.0, f64::max)
}

/// How value-bin edges are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueRange {
    /// Equal-width bins over the data range.
    Data,
    /// Equal-width bins over `[lo, hi]`; values outside go to the end bins.
    Fixed { lo: f64, hi: f64 },
}

/// Histogram of `(t, Z(t))` with mass `dt` per unit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeHistogram {
    pub time_edges: Vec<f64>,
    pub value_edges: Vec<f64>,
    /// `mass[i][j]`: time bin `i`, value bin `j`.
    pub mass: Vec<Vec<f64>>,
}

fn equal_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    edges[1..bins].partition_point(|&e| e <= x)
}

pub fn space_time_measure(path: &GridPath, time_bins: usize, value_bins: usize) -> Result<SpaceTimeHistogram> {
    space_time_measure_with(path, time_bins, value_bins, ValueRange::Data)
}

/// Each grid cell `[t_k, t_k + dt]` puts `dt/2` at each end value, in the
/// time bin that contains the cell midpoint.
pub fn space_time_measure_with(
    path: &GridPath,
    time_bins: usize,
    value_bins: usize,
    range: ValueRange,
) -> Result<SpaceTimeHistogram> {
    if time_bins < 2 || value_bins < 2 {
        return Err(Error::param("bins", format!("need at least 2 bins per axis, got {time_bins} x {value_bins}")));
    }
    let w = path.window(0.0, 1.0)?;
    let (lo, hi) = match range {
        ValueRange::Data => {
            let lo = w.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        }
        ValueRange::Fixed { lo, hi } => {
            if !(hi > lo) {
                return Err(Error::param("value_range", format!("need lo < hi, got [{lo}, {hi}]")));
            }
            (lo, hi)
        }
    };
    let time_edges = equal_edges(0.0, 1.0, time_bins);
    let value_edges = equal_edges(lo, hi, value_bins);
    let mut mass = vec![vec![0.0; value_bins]; time_bins];
    let half = 0.5 * w.dt;
    for k in 0..w.len() - 1 {
        let mid = w.time(k) + half;
        let row = &mut mass[bin_of(&time_edges, mid)];
        row[bin_of(&value_edges, w.values[k])] += half;
        row[bin_of(&value_edges, w.values[k + 1])] += half;
    }
    Ok(SpaceTimeHistogram {
        time_edges,
        value_edges,
        mass,
    })
}

impl SpaceTimeHistogram {
    pub fn time_bins(&self) -> usize {
        self.time_edges.len() - 1
    }

    pub fn value_bins(&self) -> usize {
        self.value_edges.len() - 1
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().flatten().sum()
    }

    /// Row sums; equal to the time-bin widths.
    pub fn first_marginal(&self) -> Vec<f64> {
        self.mass.iter().map(|r| r.iter().sum()).collect()
    }

    /// Column sums.
    pub fn second_marginal(&self) -> Vec<f64> {
        (0..self.value_bins())
            .map(|j| self.mass.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn value_centers(&self) -> Vec<f64> {
        self.value_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Binned counterpart of a measure on the same value edges.
    pub fn bin_measure(&self, mu: &EmpiricalMeasure) -> Vec<f64> {
        let mut out = vec![0.0; self.value_bins()];
        for &(x, w) in mu.points() {
            out[bin_of(&self.value_edges, x)] += w;
        }
        out
    }

    /// KS distance between a row's normalised profile and a target CDF,
    /// evaluated at the interior value edges.
    pub fn row_ks_at_edges<F: Fn(f64) -> f64>(&self, row: usize, cdf: F) -> f64 {
        let r = &self.mass[row];
        let total: f64 = r.iter().sum();
        let mut acc = 0.0;
        let mut d: f64 = 0.0;
        for j in 0..r.len() - 1 {
            acc += r[j];
            d = d.max((acc / total - cdf(self.value_edges[j + 1])).abs());
        }
        d
    }

    /// Rows `t_bin,v_bin,mass`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_bin,v_bin,mass")?;
        for (i, row) in self.mass.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                writeln!(out, "{i},{j},{m}")?;
            }
        }
        Ok(())
    }
}

/// Occupation measures of the time slices `[k/bins, (k+1)/bins]`, each
/// normalised to mass one.
pub fn time_slices(path: &GridPath, bins: usize) -> Result<Vec<EmpiricalMeasure>> {
    (0..bins)
        .map(|k| occupation_measure_on(path, k as f64 / bins as f64, (k + 1) as f64 / bins as f64))
        .collect()
}

/// `t -> M([0, t] x .)` at the time-bin edges, stored with the block
/// measures `M([t_k, t_{k+1}] x .)` it was summed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurePath {
    pub times: Vec<f64>,
    pub cumulative: Vec<EmpiricalMeasure>,
    blocks: Vec<EmpiricalMeasure>,
}

impl MeasurePath {
    /// Path from its time blocks; block `k` must have mass
    /// `times[k+1] - times[k]`.
    pub fn from_blocks(times: Vec<f64>, blocks: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.len() != blocks.len() + 1 {
            return Err(Error::Length(format!(
                "{} times need {} blocks, got {}",
                times.len(),
                times.len().saturating_sub(1),
                blocks.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("times", "must be increasing"));
        }
        for (k, b) in blocks.iter().enumerate() {
            let len = times[k + 1] - times[k];
            if (b.total_mass() - len).abs() > 1e-9 * len.max(1.0) {
                return Err(Error::Normalization(format!(
                    "block {k} has mass {} but spans {len}",
                    b.total_mass()
                )));
            }
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(EmpiricalMeasure::zero());
        for b in &blocks {
            let next = cumulative.last().expect("nonempty").merge(b);
            cumulative.push(next);
        }
        Ok(Self {
            times,
            cumulative,
            blocks,
        })
    }

    pub fn blocks(&self) -> &[EmpiricalMeasure] {
        &self.blocks
    }

    pub fn at_end(&self) -> &EmpiricalMeasure {
        self.cumulative.last().expect("nonempty")
    }

    /// Block measure divided by the block length.
    pub fn slope(&self, k: usize) -> EmpiricalMeasure {
        self.blocks[k].scale(1.0 / (self.times[k + 1] - self.times[k]))
    }
}

/// The cumulative map `F(M)(t) = M([0, t] x .)`, with each value bin
/// represented by its centre.
pub fn f_map(m: &SpaceTimeHistogram) -> Result<MeasurePath> {
    let centers = m.value_centers();
    let blocks = m
        .mass
        .iter()
        .map(|row| EmpiricalMeasure::from_weighted(centers.iter().copied().zip(row.iter().copied()).collect()))
        .collect::<Result<Vec<_>>>()?;
    // Block masses are within one dt of the bin widths; use the masses
    // themselves as the time increments' reference.
    let mut times = Vec::with_capacity(blocks.len() + 1);
    times.push(0.0);
    let mut t = 0.0;
    for b in &blocks {
        t += b.total_mass();
        times.push(t);
    }
    let mut path = MeasurePath::from_blocks(times, blocks)?;
    path.times = m.time_edges.clone();
    Ok(path)
}

/// `sigma_{2H}^2 = 4 - 2^{2H}`: variance of `B(2) - 2B(1) + B(0)`.
pub fn second_difference_variance(hurst: f64) -> f64 {
    4.0 - 2f64.powf(2.0 * hurst)
}

/// Empirical measure of the normalised second differences
/// `(n^H / sigma_{2H}) (B((i+2)/n) - 2 B((i+1)/n) + B(i/n))`, `i = 0..n-2`.
pub fn fixed_lag_second_order(path: &GridPath, n: usize, hurst: f64) -> Result<EmpiricalMeasure> {
    if n < 4 {
        return Err(Error::Resolution {
            epsilon: 1.0 / n as f64,
            dt: path.dt,
            min_steps: 4.0,
        });
    }
    if ((path.dt * n as f64) - 1.0).abs() > 1e-9 {
        return Err(Error::param("path", format!("grid step {} is not 1/{n}", path.dt)));
    }
    let w = path.window(0.0, 1.0)?;
    let c = (n as f64).powf(hurst) / second_difference_variance(hurst).sqrt();
    let samples: Vec<f64> = w.values.windows(3).map(|v| c * (v[2] - 2.0 * v[1] + v[0])).collect();
    EmpiricalMeasure::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::std_normal_cdf;
    use crate::paths::{simulate_brownian, Grid};
    use proptest::prelude::*;

    fn identity_path(n: usize) -> GridPath {
        GridPath::new(0.0, 1.0 / n as f64, (0..=n).map(|k| k as f64 / n as f64).collect()).unwrap()
    }

    #[test]
    fn occupation_of_constant_and_identity() {
        let c = GridPath::new(0.0, 0.01, vec![3.0; 101]).unwrap();
        let m = occupation_measure(&c).unwrap();
        assert!((m.total_mass() - 1.0).abs() < MASS_TOL);
        assert_eq!(m.cdf(2.999), 0.0);
        assert!((m.cdf(3.0) - 1.0).abs() < MASS_TOL);
        let n = 1000;
        let m = occupation_measure(&identity_path(n)).unwrap();
        assert!(ks_distance(&m, |x| x.clamp(0.0, 1.0)) <= 1.0 / n as f64 + 1e-12);
    }

    #[test]
    fn occupation_needs_cover() {
        let p = GridPath::new(0.0, 0.01, vec![0.0; 50]).unwrap();
        assert!(matches!(occupation_measure(&p), Err(Error::Coverage { .. })));
    }

    #[test]
    fn ks_examples() {
        assert!((ks_distance(&EmpiricalMeasure::dirac(0.0), std_normal_cdf) - 0.5).abs() < 1e-15);
        let m = EmpiricalMeasure::from_samples(&[0.0, 1.0]).unwrap();
        let own = |x: f64| m.cdf(x);
        assert_eq!(ks_distance(&m, own), 0.0);
    }

    #[test]
    fn dbl_examples() {
        let a = EmpiricalMeasure::dirac(0.0);
        let z = dbl_distance(&a, &a, 16).unwrap();
        assert_eq!(z.lower, 0.0);
        assert_eq!(z.upper, 0.0);
        for h in [1e-3, 0.05, 0.2] {
            let b = EmpiricalMeasure::dirac(h);
            let d = dbl_distance(&a, &b, 16).unwrap();
            assert!(d.lower >= 0.5 * h - 1e-15, "h = {h}: {d:?}");
            assert!(d.upper <= h + 1e-15);
            let e = dbl_distance(&b, &a, 16).unwrap();
            assert_eq!(d, e);
        }
        let half = EmpiricalMeasure::from_weighted(vec![(0.0, 0.5)]).unwrap();
        assert!(matches!(dbl_distance(&half, &a, 4), Err(Error::Normalization(_))));
    }

    #[test]
    fn dictionary_is_bl_normalised() {
        let m = EmpiricalMeasure::from_samples(&[-2.0, -0.5, 0.0, 0.3, 1.7]).unwrap();
        for f in bl_dictionary(&m, 8) {
            let xs: Vec<f64> = (-4000..=4000).map(|k| k as f64 / 500.0).collect();
            let sup = xs.iter().map(|&x| f.eval(x).abs()).fold(0.0, f64::max);
            let lip = xs.windows(2).map(|w| (f.eval(w[1]) - f.eval(w[0])).abs() / (w[1] - w[0])).fold(0.0, f64::max);
            assert!(sup + lip <= 1.0 + 1e-9, "{f:?}: {sup} + {lip}");
        }
    }

    #[test]
    fn space_time_marginals() {
        let w = simulate_brownian((1 << 12) + 1, 1.0, 9).unwrap();
        let h = space_time_measure(&w, 8, 32).unwrap();
        for m in h.first_marginal() {
            assert!((m - 0.125).abs() < 1e-12);
        }
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        let occ = occupation_measure(&w).unwrap();
        let binned = h.bin_measure(&occ);
        for (a, b) in binned.iter().zip(h.second_marginal()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(space_time_measure(&w, 1, 32).is_err());
    }

    #[test]
    fn f_map_telescopes() {
        let w = simulate_brownian((1 << 10) + 1, 1.0, 2).unwrap();
        let h = space_time_measure(&w, 8, 16).unwrap();
        let p = f_map(&h).unwrap();
        assert_eq!(p.cumulative[0].total_mass(), 0.0);
        for (k, row) in h.mass.iter().enumerate() {
            let back: Vec<f64> = h.bin_measure(&p.blocks()[k]);
            assert_eq!(&back, row);
            assert!((p.cumulative[k + 1].total_mass() - h.time_edges[k + 1]).abs() < 1e-12);
        }
        let end = h.bin_measure(p.at_end());
        for (a, b) in end.iter().zip(h.second_marginal()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn measure_path_rejects_bad_blocks() {
        let b = EmpiricalMeasure::from_weighted(vec![(0.0, 0.3)]).unwrap();
        assert!(matches!(
            MeasurePath::from_blocks(vec![0.0, 0.5], vec![b]),
            Err(Error::Normalization(_))
        ));
    }

    #[test]
    fn second_difference_constant() {
        assert_eq!(second_difference_variance(0.5), 2.0);
        // brute force from the fBm covariance
        for h in [0.3, 0.5, 0.7] {
            let c = |s: f64, t: f64| 0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).abs().powf(2.0 * h));
            let coef = [(0.0, 1.0), (1.0, -2.0), (2.0, 1.0)];
            let v: f64 = coef
                .iter()
                .flat_map(|a| coef.iter().map(move |b| a.1 * b.1 * c(a.0, b.0)))
                .sum();
            assert!((v - second_difference_variance(h)).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_lag_mass_and_errors() {
        let n = 64;
        let w = simulate_brownian(n + 1, 1.0, 1).unwrap();
        let m = fixed_lag_second_order(&w, n, 0.5).unwrap();
        assert!((m.total_mass() - 1.0).abs() < MASS_TOL);
        assert_eq!(m.points().len(), n - 1);
        let w3 = GridPath::new(0.0, 1.0 / 3.0, vec![0.0; 4]).unwrap();
        assert!(matches!(fixed_lag_second_order(&w3, 3, 0.5), Err(Error::Resolution { .. })));
    }

    #[test]
    fn provenance_from_descriptor() {
        let w = simulate_brownian(129, 1.0, 77).unwrap();
        assert_eq!(occupation_measure(&w).unwrap().provenance(), Some(77));
        let g = Grid::covering(0.0, 1.0, 0.01).unwrap();
        assert_eq!(g.t_start, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn cdf_is_monotone_and_reaches_mass(xs in proptest::collection::vec(-10.0f64..10.0, 1..60)) {
            let m = EmpiricalMeasure::from_samples(&xs).unwrap();
            prop_assert!((m.total_mass() - 1.0).abs() < MASS_TOL);
            let mut last = 0.0;
            for k in -110..=110 {
                let c = m.cdf(k as f64 / 10.0);
                prop_assert!(c >= last);
                last = c;
            }
            prop_assert!((m.cdf(11.0) - m.total_mass()).abs() < 1e-15);
        }

        #[test]
        fn merge_is_order_independent(
            a in proptest::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..20),
            b in proptest::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..20),
            c in proptest::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..20),
        ) {
            let (a, b, c) = (
                EmpiricalMeasure::from_weighted(a).unwrap(),
                EmpiricalMeasure::from_weighted(b).unwrap(),
                EmpiricalMeasure::from_weighted(c).unwrap(),
            );
            let left = a.merge(&b).merge(&c);
            let right = c.merge(&a.merge(&b));
            prop_assert_eq!(left.points(), right.points());
        }

        #[test]
        fn dbl_is_symmetric(
            a in proptest::collection::vec(-3.0f64..3.0, 1..30),
            b in proptest::collection::vec(-3.0f64..3.0, 1..30),
        ) {
            let (m, n) = (EmpiricalMeasure::from_samples(&a).unwrap(), EmpiricalMeasure::from_samples(&b).unwrap());
            let d1 = dbl_distance(&m, &n, 8).unwrap();
            let d2 = dbl_distance(&n, &m, 8).unwrap();
            prop_assert!((d1.lower - d2.lower).abs() < 1e-14);
            prop_assert!(d1.lower <= d1.upper + 1e-14);
        }
    }
}
