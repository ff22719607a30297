use mollify_core::ldp::*;
use mollify_core::mollifiers::kernel_ou_exponential;
use mollify_core::paths::ProcessFamily;

fn ou_estimate() -> CGFEstimate {
    let mut dict = vec![TestFunction::Constant { value: 0.0 }];
    for y in [0.01, 0.02, 0.04] {
        dict.push(TestFunction::ClippedSquare { coef: y, cap: 25.0 });
    }
    for b in [0.02, 0.04] {
        dict.push(TestFunction::ClippedLinear { slope: b, cap: 5.0 });
    }
    let opts = CgfOptions {
        dt: 1.0 / 16.0,
        min_horizon_widths: 20.0,
    };
    estimate_cgf_with(&kernel_ou_exponential(), ProcessFamily::Brownian, &dict, 300.0, 1000, 11, opts).unwrap()
}

#[test]
fn quadratic_functional_matches_szego_cumulant() {
    let e = ou_estimate();
    assert!(e.warnings.is_empty());
    for (j, y) in [0.01f64, 0.02, 0.04].into_iter().enumerate() {
        let exact = 0.5 * (1.0 - (1.0 - 4.0 * y).sqrt());
        let (v, se) = (e.values[j + 1], e.standard_errors[j + 1]);
        assert!((v - exact).abs() <= 3.0 * se, "y = {y}: {v} vs {exact} (se {se})");
    }
}

#[test]
fn dictionary_dual_stays_below_tilt_rates() {
    let e = ou_estimate();
    let thetas = [0.0, 0.5, 1.0, 2.0];
    let c = legendre_dual_on_grid(&e, &thetas, TargetFamily::ShiftedGaussian { sd: 1.0 }).unwrap();
    assert_eq!(c.kind, RateKind::LowerBound);
    assert_eq!(c.values[0], 0.0);
    for (k, th) in thetas.iter().enumerate() {
        assert!(c.values[k] <= th * th / 8.0 + 3.0 * c.standard_errors[k], "theta = {th}");
    }
}
