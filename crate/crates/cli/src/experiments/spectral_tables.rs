//! Density and covariance tables for the configured kernel, and the
//! kernel-independent identities: `sigma^2` atom sums, the ou-bessel
//! transform, `K0(1)` and class membership.

use mollify_core::mollifiers::{kernel_corpus, kernel_ou_bessel_kernel, kernel_psi1, kernel_psi2, Membership};
use mollify_core::numerics::quadrature::{integrate_to_infinity, QuadOptions};
use mollify_core::numerics::special::bessel_k0;
use mollify_core::spectral::{covariance_from_density, sigma_sq, spectral_density};
use mollify_core::SignedKernel;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{Metric, Outcome, Table};

pub const K0_AT_ONE: f64 = 0.42102443824;
pub const FOURIER_POINTS: [f64; 3] = [0.0, 1.0, 5.0];
pub const HURST_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub fn run(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let t = &c.tolerances;
    let kernel = c.kernel_id.build()?;
    let h = c.process.self_similarity_index();
    let mut metrics = Vec::new();
    let mut tables = Vec::new();

    let density = spectral_density(&kernel, h)?;
    let mut dt = Table::new("density.csv", &["lambda", "density"]);
    for &l in &c.grid.xs {
        dt.push(vec![l, density.eval(l)]);
    }
    tables.push(dt);
    metrics.push(Metric::flag("density_continuous_at_zero", density.continuous_at_zero));
    let s2 = sigma_sq(&kernel, h)?;
    metrics.push(Metric::info("sigma_sq", s2));
    if density.continuous_at_zero {
        let mut ct = Table::new("covariance.csv", &["t", "covariance"]);
        for &l in &c.grid.lags {
            ct.push(vec![l, covariance_from_density(&density, l)?]);
        }
        let r0 = covariance_from_density(&density, 0.0)?;
        tables.push(ct);
        metrics.push(Metric::at_most("sigma_sq_consistency", (s2 - r0).abs(), t.sigma_sq_consistency));
    }

    metrics.push(Metric::at_most("sigma_sq_psi1", (sigma_sq(&kernel_psi1(), 0.5)? - 1.0).abs(), t.sigma_sq_abs));
    metrics.push(Metric::at_most("sigma_sq_psi2", (sigma_sq(&kernel_psi2(), 0.5)? - 0.5).abs(), t.sigma_sq_abs));
    let mut worst: f64 = 0.0;
    for (k, hs) in [(kernel_psi1(), &[0.3, 0.5][..]), (kernel_psi2(), &[0.3, 0.5, 0.7][..])] {
        for &h in hs {
            worst = worst.max(consistency(&k, h)?);
        }
    }
    metrics.push(Metric::at_most("sigma_sq_identity_consistency", worst, t.sigma_sq_consistency));

    let bessel = kernel_ou_bessel_kernel();
    let mut ft = Table::new("ou_bessel_fourier.csv", &["lambda", "numeric", "closed_form"]);
    let mut worst: f64 = 0.0;
    for &l in &FOURIER_POINTS {
        let num = bessel.fourier_numeric(l)?.re;
        let exact = 2f64.sqrt() / (1.0 + l * l).sqrt();
        worst = worst.max((num - exact).abs());
        ft.push(vec![l, num, exact]);
    }
    tables.push(ft);
    metrics.push(Metric::at_most("ou_bessel_fourier_error", worst, t.fourier_abs));

    let series = bessel_k0(1.0)?;
    // Oracle: K0(x) = int_0^inf exp(-x cosh u) du.
    let quad = integrate_to_infinity(|u| (-u.cosh()).exp(), 0.0, QuadOptions::tol(1e-14, 1e-13))?.value;
    metrics.push(Metric::at_most(
        "k0_error",
        (series - K0_AT_ONE).abs().max((series - quad).abs()),
        t.k0_abs,
    ));

    metrics.extend(class_checks()?);
    Ok(Outcome { metrics, tables })
}

fn consistency(k: &SignedKernel, h: f64) -> Result<f64, CliError> {
    let d = spectral_density(k, h)?;
    Ok((sigma_sq(k, h)? - covariance_from_density(&d, 0.0)?).abs())
}

fn class_checks() -> Result<Vec<Metric>, CliError> {
    let psi1 = kernel_psi1().classify(&[0.7])?;
    let psi2 = kernel_psi2().classify(&HURST_GRID)?;
    let mut implication = true;
    for k in kernel_corpus() {
        let r = k.classify(&HURST_GRID)?;
        if r.in_g0 && r.in_g_h.iter().any(|m| m.membership != Membership::Yes) {
            implication = false;
        }
    }
    Ok(vec![
        Metric::flag("psi1_outside_g_h_at_0.7", psi1.in_g_h_for(0.7) == Some(Membership::No)),
        Metric::flag("psi2_in_g_h", psi2.in_g_h.iter().all(|m| m.membership.is_yes())),
        Metric::flag("g0_implies_g_h", implication),
    ])
}
