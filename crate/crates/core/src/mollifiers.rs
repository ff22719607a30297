//! Bounded-variation kernels `psi`, their signed derivative measures
//! `dpsi = atoms + density`, Fourier transforms
//! `psi_hat(l) = int e^{i l t} psi(t) dt` and class membership reports.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::{
    fourier_cosine, integrate_to_infinity, integrate_with_breaks, QuadOptions,
};
use crate::numerics::special::{bessel_k0, harmonizable_constant_sq};
use crate::stats::regression_slope;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type ComplexFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Name of a built-in kernel, as accepted in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelId {
    Psi1,
    Psi2,
    Triangle,
    OuExp,
    OuBessel,
    FbmOu { hurst: f64 },
    Custom,
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelId::Psi1 => f.write_str("psi1"),
            KernelId::Psi2 => f.write_str("psi2"),
            KernelId::Triangle => f.write_str("triangle"),
            KernelId::OuExp => f.write_str("ou-exp"),
            KernelId::OuBessel => f.write_str("ou-bessel"),
            KernelId::FbmOu { hurst } => write!(f, "fbm-ou:H={hurst}"),
            KernelId::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("kernel_id", format!("unknown kernel `{s}` (expected psi1, psi2, triangle, ou-exp, ou-bessel or fbm-ou:H=<h>)"));
        Ok(match s {
            "psi1" => KernelId::Psi1,
            "psi2" => KernelId::Psi2,
            "triangle" => KernelId::Triangle,
            "ou-exp" => KernelId::OuExp,
            "ou-bessel" => KernelId::OuBessel,
            other => {
                let h = other
                    .strip_prefix("fbm-ou:H=")
                    .ok_or_else(bad)?
                    .parse::<f64>()
                    .map_err(|_| bad())?;
                if !(h > 0.0 && h <= 0.5) {
                    return Err(Error::param(
                        "kernel_id",
                        format!("fbm-ou needs 0 < H <= 1/2, got {h}"),
                    ));
                }
                KernelId::FbmOu { hurst: h }
            }
        })
    }
}

impl Serialize for KernelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl KernelId {
    pub fn build(&self) -> Result<SignedKernel> {
        Ok(match *self {
            KernelId::Psi1 => kernel_psi1(),
            KernelId::Psi2 => kernel_psi2(),
            KernelId::Triangle => kernel_triangle(),
            KernelId::OuExp => kernel_ou_exponential(),
            KernelId::OuBessel => kernel_ou_bessel_kernel(),
            KernelId::FbmOu { hurst } => kernel_fbm_ou_kernel(hurst)?,
            KernelId::Custom => {
                return Err(Error::param("kernel_id", "custom kernels cannot be built by name"))
            }
        })
    }
}

/// Point mass of `dpsi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Compact { start: f64, end: f64 },
    /// Unbounded, with exponentially decaying tails; `bulk` carries all but
    /// 1e-14 of the mass of `|psi|`.
    ExponentialTail { bulk_start: f64, bulk_end: f64 },
    /// Unbounded with algebraic tails (not integrable).
    AlgebraicTail,
}

#[derive(Debug, Clone, Copy)]
struct Norms {
    l1: f64,
    l2: f64,
}

/// A kernel `psi` and its distributional derivative `dpsi`.
#[derive(Clone)]
pub struct SignedKernel {
    id: KernelId,
    atoms: Vec<Atom>,
    density: Option<RealFn>,
    psi: RealFn,
    primitive: Option<RealFn>,
    fourier_closed: Option<ComplexFn>,
    support: Support,
    /// Points where `psi` or the density jump or blow up.
    breaks: Vec<f64>,
    bounded_variation: bool,
    integrable: bool,
    /// `|psi_hat(l)| = O(|l|^{-decay})` as `|l| -> inf`.
    fourier_decay: f64,
    derivative: Option<KernelId>,
    norms: Arc<OnceLock<Norms>>,
}

impl fmt::Debug for SignedKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignedKernel")
            .field("id", &self.id)
            .field("atoms", &self.atoms)
            .field("has_density", &self.density.is_some())
            .field("support", &self.support)
            .finish()
    }
}

/// Builder for kernels outside the named catalogue.
pub struct KernelBuilder {
    kernel: SignedKernel,
}

impl KernelBuilder {
    pub fn new(psi: impl Fn(f64) -> f64 + Send + Sync + 'static, support: Support) -> Self {
        Self {
            kernel: SignedKernel {
                id: KernelId::Custom,
                atoms: Vec::new(),
                density: None,
                psi: Arc::new(psi),
                primitive: None,
                fourier_closed: None,
                support,
                breaks: Vec::new(),
                bounded_variation: true,
                integrable: !matches!(support, Support::AlgebraicTail),
                fourier_decay: 1.0,
                derivative: None,
                norms: Arc::new(OnceLock::new()),
            },
        }
    }
    pub fn atoms(mut self, atoms: Vec<Atom>) -> Self {
        self.kernel.breaks.extend(atoms.iter().map(|a| a.location));
        self.kernel.atoms = atoms;
        self
    }
    pub fn density(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.kernel.density = Some(Arc::new(d));
        self
    }
    pub fn primitive(mut self, p: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.kernel.primitive = Some(Arc::new(p));
        self
    }
    pub fn fourier(mut self, f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        self.kernel.fourier_closed = Some(Arc::new(f));
        self
    }
    pub fn breaks(mut self, b: &[f64]) -> Self {
        self.kernel.breaks.extend_from_slice(b);
        self
    }
    pub fn bounded_variation(mut self, bv: bool) -> Self {
        self.kernel.bounded_variation = bv;
        self
    }
    pub fn fourier_decay(mut self, d: f64) -> Self {
        self.kernel.fourier_decay = d;
        self
    }
    fn id(mut self, id: KernelId) -> Self {
        self.kernel.id = id;
        self
    }
    fn derivative(mut self, id: KernelId) -> Self {
        self.kernel.derivative = Some(id);
        self
    }
    pub fn build(mut self) -> SignedKernel {
        self.kernel.breaks.sort_by(f64::total_cmp);
        self.kernel.breaks.dedup();
        self.kernel
    }
}

/// `sin(z)/z`, exact at 0.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `psi_1 = 1_[-1,0]`, the first-order increment kernel.
pub fn kernel_psi1() -> SignedKernel {
    KernelBuilder::new(
        |x| if (-1.0..=0.0).contains(&x) { 1.0 } else { 0.0 },
        Support::Compact {
            start: -1.0,
            end: 0.0,
        },
    )
    .atoms(vec![
        Atom {
            location: -1.0,
            weight: 1.0,
        },
        Atom {
            location: 0.0,
            weight: -1.0,
        },
    ])
    .primitive(|x| (x + 1.0).clamp(0.0, 1.0))
    .fourier(|l| Complex64::from_polar(sinc(0.5 * l), -0.5 * l))
    .id(KernelId::Psi1)
    .build()
}

/// `psi_2 = (1_[-1,0] - 1_[0,1]) / 2`, the second-order increment kernel.
pub fn kernel_psi2() -> SignedKernel {
    KernelBuilder::new(
        |x| {
            if (-1.0..0.0).contains(&x) {
                0.5
            } else if (0.0..=1.0).contains(&x) {
                -0.5
            } else {
                0.0
            }
        },
        Support::Compact { start: -1.0, end: 1.0 },
    )
    .atoms(vec![
        Atom {
            location: -1.0,
            weight: 0.5,
        },
        Atom {
            location: 0.0,
            weight: -1.0,
        },
        Atom {
            location: 1.0,
            weight: 0.5,
        },
    ])
    .primitive(|x| {
        if x <= -1.0 || x >= 1.0 {
            0.0
        } else if x < 0.0 {
            0.5 * (x + 1.0)
        } else {
            0.5 * (1.0 - x)
        }
    })
    // (1 - cos l) / (i l), written without cancellation near 0.
    .fourier(|l| {
        let s = (0.5 * l).sin();
        let m = if l == 0.0 { 0.0 } else { 2.0 * s * s / l };
        Complex64::new(0.0, -m)
    })
    .id(KernelId::Psi2)
    .build()
}

/// `psi(t) = (1 - |t|)^+ / 2`, whose derivative is `psi_2`.
pub fn kernel_triangle() -> SignedKernel {
    KernelBuilder::new(
        |x| 0.5 * (1.0 - x.abs()).max(0.0),
        Support::Compact { start: -1.0, end: 1.0 },
    )
    .density(|x| {
        if (-1.0..0.0).contains(&x) {
            0.5
        } else if (0.0..1.0).contains(&x) {
            -0.5
        } else {
            0.0
        }
    })
    .breaks(&[-1.0, 0.0, 1.0])
    .primitive(|x| {
        if x <= -1.0 {
            0.0
        } else if x <= 0.0 {
            0.25 * (x + 1.0) * (x + 1.0)
        } else if x < 1.0 {
            0.25 + 0.5 * x - 0.25 * x * x
        } else {
            0.5
        }
    })
    .fourier(|l| {
        let s = sinc(0.5 * l);
        Complex64::new(0.5 * s * s, 0.0)
    })
    .fourier_decay(2.0)
    .id(KernelId::Triangle)
    .derivative(KernelId::Psi2)
    .build()
}

/// Tail cut for the exponential kernels: `e^{-x} < 1e-15`.
const EXP_TAIL: f64 = 34.6;

/// `psi(x) = sqrt(2) e^{-x} 1_[0, inf)(x)`, for which the unit-scale
/// increment process of Brownian motion is the stationary OU process.
pub fn kernel_ou_exponential() -> SignedKernel {
    KernelBuilder::new(
        |x| if x >= 0.0 { SQRT_2 * (-x).exp() } else { 0.0 },
        Support::ExponentialTail {
            bulk_start: 0.0,
            bulk_end: EXP_TAIL,
        },
    )
    .atoms(vec![Atom {
        location: 0.0,
        weight: SQRT_2,
    }])
    .density(|x| if x > 0.0 { -SQRT_2 * (-x).exp() } else { 0.0 })
    .primitive(|x| if x > 0.0 { SQRT_2 * (-(-x).exp_m1()) } else { 0.0 })
    .fourier(|l| Complex64::new(SQRT_2, 0.0) / Complex64::new(1.0, -l))
    .id(KernelId::OuExp)
    .build()
}

/// `psi(x) = (sqrt(2)/pi) K0(|x|)`, `x != 0`.
pub fn kernel_ou_bessel(x: f64) -> Result<f64> {
    Ok(SQRT_2 / PI * bessel_k0(x.abs())?)
}

/// The even OU-matching kernel with `psi_hat(l) = sqrt(2)/sqrt(1 + l^2)`.
/// It is integrable but unbounded at 0, so it is not of bounded variation
/// and `dpsi` has no finite atoms-plus-density representation.
pub fn kernel_ou_bessel_kernel() -> SignedKernel {
    KernelBuilder::new(
        |x| kernel_ou_bessel(x).unwrap_or(f64::INFINITY),
        Support::ExponentialTail {
            bulk_start: -EXP_TAIL,
            bulk_end: EXP_TAIL,
        },
    )
    .breaks(&[0.0])
    .bounded_variation(false)
    .fourier(|l| Complex64::new(SQRT_2 / (1.0 + l * l).sqrt(), 0.0))
    .id(KernelId::OuBessel)
    .build()
}

/// `C_H` of the harmonizable representation.
pub fn harmonizable_constant(hurst: f64) -> f64 {
    harmonizable_constant_sq(hurst).sqrt()
}

fn check_fbm_ou_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.5 {
        return Err(Error::Domain(format!(
            "fbm-ou kernel needs H <= 1/2: for H = {hurst} the target transform is discontinuous at 0 and cannot be the transform of an integrable kernel"
        )));
    }
    if !(hurst > 0.0) {
        return Err(Error::Domain(format!("fbm-ou kernel needs H > 0, got {hurst}")));
    }
    Ok(())
}

/// `psi(x) = (C_H/pi) int_0^inf cos(l x) l^{H-1/2} / sqrt(pi (1 + l^2)) dl`,
/// the even kernel turning fBm of index `H <= 1/2` into the OU process.
pub fn kernel_fbm_ou(hurst: f64, x: f64) -> Result<f64> {
    check_fbm_ou_hurst(hurst)?;
    if x == 0.0 && hurst >= 0.5 {
        return Err(Error::Domain("fbm-ou kernel at H = 1/2 diverges at x = 0".into()));
    }
    let p = hurst - 0.5;
    let g = move |l: f64| {
        if l == 0.0 {
            0.0
        } else {
            l.powf(p) / (PI * (1.0 + l * l)).sqrt()
        }
    };
    let r = fourier_cosine(g, x, QuadOptions::tol(1e-13, 1e-11))?;
    Ok(harmonizable_constant(hurst) / PI * r.value)
}

pub fn kernel_fbm_ou_kernel(hurst: f64) -> Result<SignedKernel> {
    check_fbm_ou_hurst(hurst)?;
    let c = harmonizable_constant(hurst);
    Ok(KernelBuilder::new(
        move |x| kernel_fbm_ou(hurst, x).unwrap_or(f64::INFINITY),
        Support::AlgebraicTail,
    )
    .breaks(&[0.0])
    .bounded_variation(false)
    .fourier(move |l| {
        let a = l.abs();
        Complex64::new(c * a.powf(hurst - 0.5) / (PI * (1.0 + l * l)).sqrt(), 0.0)
    })
    .id(KernelId::FbmOu { hurst })
    .build())
}

impl SignedKernel {
    pub fn id(&self) -> KernelId {
        self.id
    }

    pub fn psi(&self, x: f64) -> f64 {
        (self.psi)(x)
    }

    /// `psi^eps(t) = psi(t / eps) / eps`.
    pub fn rescaled(&self, epsilon: f64, t: f64) -> f64 {
        self.psi(t / epsilon) / epsilon
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self, x: f64) -> Option<f64> {
        self.density.as_ref().map(|d| d(x))
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    /// `dpsi` consists of atoms only.
    pub fn is_pure_jump(&self) -> bool {
        self.bounded_variation && self.density.is_none() && !self.atoms.is_empty()
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn is_bounded_variation(&self) -> bool {
        self.bounded_variation
    }

    pub fn is_integrable(&self) -> bool {
        self.integrable
    }

    pub fn fourier_decay(&self) -> f64 {
        self.fourier_decay
    }

    /// Interval outside which `psi` is negligible, if there is one.
    pub fn effective_support(&self) -> Option<(f64, f64)> {
        match self.support {
            Support::Compact { start, end } => Some((start, end)),
            Support::ExponentialTail {
                bulk_start,
                bulk_end,
            } => Some((bulk_start, bulk_end)),
            Support::AlgebraicTail => None,
        }
    }

    fn require_support(&self) -> Result<(f64, f64)> {
        self.effective_support().ok_or_else(|| Error::UnsupportedKernel {
            kernel: self.id.to_string(),
            reason: "kernel has algebraic tails and no finite effective support".into(),
        })
    }

    /// `int_a^b psi`, from the closed-form primitive when there is one.
    pub fn cell_mass(&self, a: f64, b: f64) -> Result<f64> {
        if let Some(p) = &self.primitive {
            return Ok(p(b) - p(a));
        }
        let (lo, hi) = self.require_support()?;
        let (a2, b2) = (a.max(lo), b.min(hi));
        if a2 >= b2 {
            return Ok(0.0);
        }
        let r = integrate_with_breaks(&*self.psi, a2, b2, &self.breaks, QuadOptions::tol(1e-14, 1e-11))?;
        Ok(r.value)
    }

    fn quad_over_support<F: Fn(f64) -> f64>(&self, f: F, opts: QuadOptions) -> Result<f64> {
        let (lo, hi) = self.require_support()?;
        let breaks: Vec<f64> = self.breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
        let mut total = 0.0;
        // Split at each break so singular points sit at panel ends.
        let mut cuts = vec![lo];
        cuts.extend(breaks);
        cuts.push(hi);
        for w in cuts.windows(2) {
            total += integrate_with_breaks(&f, w[0], w[1], &[], opts)?.value;
        }
        if let Support::ExponentialTail { .. } = self.support {
            // Tails beyond the bulk are below 1e-14; include them anyway when cheap.
            total += integrate_to_infinity(&f, hi, opts).map(|r| r.value).unwrap_or(0.0);
            total += integrate_to_infinity(|x| f(-x), -lo, opts).map(|r| r.value).unwrap_or(0.0);
        }
        Ok(total)
    }

    fn norms(&self) -> Result<Norms> {
        if let Some(n) = self.norms.get() {
            return Ok(*n);
        }
        let opts = QuadOptions::tol(1e-13, 1e-11);
        let l1 = self.quad_over_support(|x| self.psi(x).abs(), opts)?;
        let l2 = self.quad_over_support(|x| self.psi(x).powi(2), opts)?.sqrt();
        // Idempotent fill: concurrent callers compute the same value.
        Ok(*self.norms.get_or_init(|| Norms { l1, l2 }))
    }

    pub fn l1_norm(&self) -> Result<f64> {
        Ok(self.norms()?.l1)
    }

    pub fn l2_norm(&self) -> Result<f64> {
        Ok(self.norms()?.l2)
    }

    /// `(int |psi|^alpha)^{1/alpha}`.
    pub fn lalpha_norm(&self, alpha: f64) -> Result<f64> {
        let v = self.quad_over_support(|x| self.psi(x).abs().powf(alpha), QuadOptions::tol(1e-13, 1e-11))?;
        Ok(v.powf(1.0 / alpha))
    }

    /// `int psi` by quadrature.
    pub fn integral(&self) -> Result<f64> {
        self.quad_over_support(|x| self.psi(x), QuadOptions::tol(1e-14, 1e-12))
    }

    /// `int |t psi(t)| dt` by quadrature; infinite for algebraic tails.
    pub fn first_abs_moment(&self) -> Result<f64> {
        if matches!(self.support, Support::AlgebraicTail) {
            return Ok(f64::INFINITY);
        }
        self.quad_over_support(|x| (x * self.psi(x)).abs(), QuadOptions::tol(1e-13, 1e-11))
    }

    /// Total mass of `dpsi`: atom weights plus the density integral.
    pub fn dpsi_total_mass(&self) -> Result<f64> {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight).sum();
        let dens = match &self.density {
            Some(d) => self.quad_over_support(|x| d(x), QuadOptions::tol(1e-14, 1e-12))?,
            None => 0.0,
        };
        Ok(atoms + dens)
    }

    fn require_bv(&self) -> Result<()> {
        if self.bounded_variation {
            Ok(())
        } else {
            Err(Error::UnsupportedKernel {
                kernel: self.id.to_string(),
                reason: "kernel is not of bounded variation; dpsi has no finite representation".into(),
            })
        }
    }

    /// `int e^{i l s} dpsi(s)`: atoms exactly, density by quadrature.
    pub fn dpsi_fourier(&self, lambda: f64) -> Result<Complex64> {
        self.require_bv()?;
        let mut acc: Complex64 = self
            .atoms
            .iter()
            .map(|a| Complex64::from_polar(a.weight, lambda * a.location))
            .sum();
        if let Some(d) = &self.density {
            let opts = QuadOptions::tol(1e-13, 1e-11);
            let re = self.quad_over_support(|x| d(x) * (lambda * x).cos(), opts)?;
            let im = self.quad_over_support(|x| d(x) * (lambda * x).sin(), opts)?;
            acc += Complex64::new(re, im);
        }
        Ok(acc)
    }

    /// `psi_hat(l)` by quadrature of `psi`, independent of any closed form.
    pub fn fourier_numeric(&self, lambda: f64) -> Result<Complex64> {
        if !self.integrable {
            return Err(Error::UnsupportedKernel {
                kernel: self.id.to_string(),
                reason: "kernel is not integrable".into(),
            });
        }
        let opts = QuadOptions::tol(1e-12, 1e-10);
        let re = self.quad_over_support(|x| self.psi(x) * (lambda * x).cos(), opts)?;
        let im = self.quad_over_support(|x| self.psi(x) * (lambda * x).sin(), opts)?;
        Ok(Complex64::new(re, im))
    }

    /// `psi_hat(l)`: the closed form when the kernel has one, otherwise
    /// quadrature.
    pub fn fourier(&self, lambda: f64) -> Result<Complex64> {
        match &self.fourier_closed {
            Some(f) => Ok(f(lambda)),
            None => self.fourier_numeric(lambda),
        }
    }

    pub fn has_closed_fourier(&self) -> bool {
        self.fourier_closed.is_some()
    }

    /// The kernel `psi'` when `dpsi` is absolutely continuous and named.
    pub fn derivative_kernel(&self) -> Option<SignedKernel> {
        self.derivative.and_then(|id| id.build().ok())
    }

    pub fn classify(&self, hurst_list: &[f64]) -> Result<KernelClassReport> {
        classify(self, hurst_list)
    }
}

/// Outcome of a numerical limit test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    Yes,
    No,
    Inconclusive,
}

impl Membership {
    pub fn is_yes(self) -> bool {
        self == Membership::Yes
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HurstMembership {
    pub hurst: f64,
    pub membership: Membership,
    /// `(lambda, |psi_hat(lambda)| |lambda|^{1/2 - H})` along `lambda = 2^-k`.
    pub evidence: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelClassReport {
    pub kernel: String,
    pub bounded_variation: bool,
    pub integrable: bool,
    pub compact_support: bool,
    /// BV and L1.
    pub in_g: bool,
    pub in_g_h: Vec<HurstMembership>,
    /// Zero integral and finite first absolute moment.
    pub in_g0: bool,
    pub integral: f64,
    pub first_abs_moment: f64,
}

impl KernelClassReport {
    pub fn in_g_h_for(&self, hurst: f64) -> Option<Membership> {
        self.in_g_h
            .iter()
            .find(|m| (m.hurst - hurst).abs() < 1e-12)
            .map(|m| m.membership)
    }
}

/// First and last exponent of the dyadic sequence `lambda = 2^-k`.
pub const CLASS_K_RANGE: (i32, i32) = (10, 40);
/// Cauchy tolerance of the limit test.
pub const CLASS_CAUCHY_TOL: f64 = 1e-6;
/// Log-log slope above which the sequence is read as decaying to 0.
const CLASS_SLOPE_TOL: f64 = 0.02;

pub(crate) fn gh_membership(kernel: &SignedKernel, hurst: f64) -> Result<HurstMembership> {
    let evidence: Vec<(f64, f64)> = (CLASS_K_RANGE.0..=CLASS_K_RANGE.1)
        .map(|k| {
            let l = 2f64.powi(-k);
            kernel.fourier(l).map(|f| (l, f.norm() * l.powf(0.5 - hurst)))
        })
        .collect::<Result<_>>()?;
    let tail = &evidence[evidence.len() - 10..];
    let spread = tail
        .iter()
        .flat_map(|a| tail.iter().map(move |b| (a.1 - b.1).abs()))
        .fold(0.0, f64::max);
    let membership = if spread < CLASS_CAUCHY_TOL {
        Membership::Yes
    } else {
        let positive: Vec<(f64, f64)> = tail.iter().copied().filter(|p| p.1 > 0.0).collect();
        if positive.len() < 3 {
            Membership::Inconclusive
        } else {
            let xs: Vec<f64> = positive.iter().map(|p| p.0.ln()).collect();
            let ys: Vec<f64> = positive.iter().map(|p| p.1.ln()).collect();
            let slope = regression_slope(&xs, &ys);
            if slope > CLASS_SLOPE_TOL {
                // Power-law decay to zero as lambda -> 0: the tail is Cauchy.
                Membership::Yes
            } else if slope < -CLASS_SLOPE_TOL {
                Membership::No
            } else {
                Membership::Inconclusive
            }
        }
    };
    Ok(HurstMembership {
        hurst,
        membership,
        evidence,
    })
}

/// Class memberships `G = BV ∩ L1`, `G_H` and `G_0` of a kernel.
pub fn classify(kernel: &SignedKernel, hurst_list: &[f64]) -> Result<KernelClassReport> {
    let in_g_h = hurst_list
        .iter()
        .map(|&h| gh_membership(kernel, h))
        .collect::<Result<Vec<_>>>()?;
    let (integral, first_abs_moment) = if kernel.integrable {
        (kernel.integral()?, kernel.first_abs_moment()?)
    } else {
        (f64::NAN, f64::INFINITY)
    };
    let in_g0 = kernel.integrable && integral.abs() < 1e-9 && first_abs_moment.is_finite();
    Ok(KernelClassReport {
        kernel: kernel.id.to_string(),
        bounded_variation: kernel.bounded_variation,
        integrable: kernel.integrable,
        compact_support: matches!(kernel.support, Support::Compact { .. }),
        in_g: kernel.bounded_variation && kernel.integrable,
        in_g_h,
        in_g0,
        integral,
        first_abs_moment,
    })
}

/// Every named kernel, with `fbm-ou` at `H = 0.3`.
pub fn kernel_corpus() -> Vec<SignedKernel> {
    vec![
        kernel_psi1(),
        kernel_psi2(),
        kernel_triangle(),
        kernel_ou_exponential(),
        kernel_ou_bessel_kernel(),
        kernel_fbm_ou_kernel(0.3).expect("0.3 is a valid index"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn psi1_basics() {
        let k = kernel_psi1();
        assert_relative_eq!(k.l2_norm().unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(k.fourier(PI).unwrap().norm(), 2.0 / PI, epsilon = 1e-15);
        assert_eq!(k.dpsi_total_mass().unwrap(), 0.0);
        assert_relative_eq!(k.fourier(1e-12).unwrap().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn psi2_basics() {
        let k = kernel_psi2();
        assert_relative_eq!(k.fourier(PI).unwrap().norm(), 2.0 / PI, epsilon = 1e-15);
        assert!(k.fourier(2.0 * PI).unwrap().norm() < 1e-15);
        let a = k.fourier(1e-6).unwrap().norm() * 1e-6f64.powf(0.5 - 0.9);
        assert!(a < 1e-3);
        assert_eq!(k.dpsi_total_mass().unwrap(), 0.0);
    }

    #[test]
    fn triangle_basics() {
        let k = kernel_triangle();
        assert_eq!(k.psi(0.0), 0.5);
        assert_eq!(k.effective_support(), Some((-1.0, 1.0)));
        let d = k.derivative_kernel().unwrap();
        assert_eq!(d.id(), KernelId::Psi2);
        // psi' = psi_2: the transform of the density of dpsi is -i l psi_hat,
        // and equals the transform of psi_2 up to the sign of the argument.
        let via_density = k.dpsi_fourier(PI).unwrap();
        assert_relative_eq!(via_density.norm(), d.fourier(PI).unwrap().norm(), epsilon = 1e-10);
        assert!(k.dpsi_total_mass().unwrap().abs() < 1e-10);
    }

    #[test]
    fn ou_exponential_basics() {
        let k = kernel_ou_exponential();
        assert_relative_eq!(k.fourier(0.0).unwrap().norm_sqr(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(k.fourier(1.0).unwrap().norm_sqr(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(k.l2_norm().unwrap(), 1.0, epsilon = 1e-10);
        assert!(k.dpsi_total_mass().unwrap().abs() < 1e-10);
    }

    #[test]
    fn ou_bessel_values() {
        assert!(matches!(kernel_ou_bessel(0.0), Err(Error::Domain(_))));
        assert_relative_eq!(
            kernel_ou_bessel(1.0).unwrap(),
            SQRT_2 / PI * 0.421_024_438_240_708_33,
            max_relative = 1e-12
        );
        let k = kernel_ou_bessel_kernel();
        for l in [0.0, 1.0, 5.0] {
            let num = k.fourier_numeric(l).unwrap();
            let want = SQRT_2 / (1.0 + l * l).sqrt();
            assert!((num.re - want).abs() < 1e-6, "lambda {l}: {} vs {want}", num.re);
            assert!(num.im.abs() < 1e-6);
        }
    }

    #[test]
    fn fbm_ou_kernel() {
        assert_relative_eq!(harmonizable_constant_sq(0.5), 2.0 * PI, epsilon = 1e-12);
        assert!(matches!(kernel_fbm_ou(0.6, 1.0), Err(Error::Domain(_))));
        let at_half = kernel_fbm_ou(0.5, 1.0).unwrap();
        assert!((at_half - kernel_ou_bessel(1.0).unwrap()).abs() < 1e-6);
        // arbitrary-precision reference values
        assert_relative_eq!(kernel_fbm_ou(0.3, 1.0).unwrap(), 0.378_275_428_166_703_17, max_relative = 1e-8);
        assert_relative_eq!(kernel_fbm_ou(0.3, 2.0).unwrap(), 0.172_627_437_099_597_86, max_relative = 1e-8);
        assert_relative_eq!(kernel_fbm_ou(0.3, 0.5).unwrap(), 0.655_340_091_264_539_19, max_relative = 1e-8);
        assert_relative_eq!(kernel_fbm_ou(0.5, 0.5).unwrap(), 0.416_134_786_396_532_79, max_relative = 1e-8);
    }

    #[test]
    fn kernel_ids_round_trip() {
        for s in ["psi1", "psi2", "triangle", "ou-exp", "ou-bessel", "fbm-ou:H=0.3"] {
            let id: KernelId = s.parse().unwrap();
            assert_eq!(id.to_string(), s);
            assert!(id.build().is_ok());
        }
        assert!("psi3".parse::<KernelId>().is_err());
        assert!("fbm-ou:H=0.7".parse::<KernelId>().is_err());
    }

    #[test]
    fn fourier_at_zero_is_the_integral() {
        for k in [kernel_psi1(), kernel_psi2(), kernel_triangle(), kernel_ou_exponential()] {
            let f0 = k.fourier(0.0).unwrap();
            assert!((f0.re - k.integral().unwrap()).abs() < 1e-9, "{:?}", k.id());
            assert!(f0.im.abs() < 1e-12);
        }
    }

    #[test]
    fn classification() {
        let r = kernel_psi1().classify(&[0.3, 0.5, 0.7]).unwrap();
        assert!(r.in_g);
        assert_eq!(r.in_g_h_for(0.7), Some(Membership::No));
        assert_eq!(r.in_g_h_for(0.5), Some(Membership::Yes));
        assert_eq!(r.in_g_h_for(0.3), Some(Membership::Yes));
        assert!(!r.in_g0);
        let hs: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let r = kernel_psi2().classify(&hs).unwrap();
        assert!(r.in_g0);
        assert!(r.in_g_h.iter().all(|m| m.membership.is_yes()));
        let r = kernel_ou_bessel_kernel().classify(&[0.5]).unwrap();
        assert!(!r.in_g && r.integrable && !r.bounded_variation);
        let r = kernel_fbm_ou_kernel(0.3).unwrap().classify(&[0.3]).unwrap();
        assert!(!r.integrable && !r.in_g0);
    }

    #[test]
    fn cell_mass_quadrature_matches_bessel_integral() {
        use crate::numerics::special::bessel_k0_integral;
        let k = kernel_ou_bessel_kernel();
        let m = k.cell_mass(0.0, 1.5).unwrap();
        assert_relative_eq!(m, SQRT_2 / PI * bessel_k0_integral(1.5), max_relative = 1e-10);
        let m = k.cell_mass(-0.25, 0.25).unwrap();
        assert_relative_eq!(m, 2.0 * SQRT_2 / PI * bessel_k0_integral(0.25), max_relative = 1e-10);
    }
}
