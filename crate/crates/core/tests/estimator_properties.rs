use ghost_optics::biphoton::GeometryConfig;
use ghost_optics::estimators::image::ImageModel;
use ghost_optics::estimators::interference::{sum_uncertainty_to_visibility, InterferenceModel};
use ghost_optics::estimators::lm::FitModel;
use ghost_optics::estimators::{epr_report, visibility_to_sum_uncertainty};
use proptest::prelude::*;

/// Worst mismatch between the analytic gradient and central differences,
/// relative to the largest analytic entry of the same parameter's column.
fn jacobian_mismatch(model: &dyn FitModel, p: &[f64], steps: &[f64], xs: &[f64]) -> f64 {
    let np = model.n_params();
    let mut err = vec![0.0f64; np];
    let mut col = vec![0.0f64; np];
    let mut g = vec![0.0; np];
    for &x in xs {
        model.eval(p, x, Some(&mut g));
        for j in 0..np {
            let mut hi = p.to_vec();
            let mut lo = p.to_vec();
            hi[j] += steps[j];
            lo[j] -= steps[j];
            let fd = (model.eval(&hi, x, None) - model.eval(&lo, x, None)) / (2.0 * steps[j]);
            err[j] = err[j].max((g[j] - fd).abs());
            col[j] = col[j].max(g[j].abs());
        }
    }
    err.iter().zip(&col).map(|(e, c)| e / c).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn interference_jacobian_matches_differences(
        amp in 0.5..3.0f64,
        s in 0.0005..0.03f64,
        a in 0.1..0.25f64,
        d in 0.3..0.5f64,
        x0 in -0.05..0.05f64,
        eta in 0.0..1.0f64,
    ) {
        let m = InterferenceModel::new(702.2e-9, 0.51);
        let p = [amp, s, a, d, x0, eta];
        let steps = [1e-6 * amp, 1e-6 * s, 1e-6 * a, 1e-6 * d, 1e-6, 1e-6];
        let xs: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64 + 0.0137).collect();
        let worst = jacobian_mismatch(&m, &p, &steps, &xs);
        prop_assert!(worst < 1e-5, "worst {worst}");
    }

    #[test]
    fn image_jacobian_matches_differences(amp in 0.5..3.0f64, sigma in 0.02..0.3f64) {
        let m = ImageModel::new(&GeometryConfig::reference_bench());
        let p = [amp, sigma];
        let steps = [1e-6 * amp, 1e-6 * sigma];
        let xs: Vec<f64> = (0..61).map(|i| -1.2 + 0.04 * i as f64 + 0.0031).collect();
        let worst = jacobian_mismatch(&m, &p, &steps, &xs);
        prop_assert!(worst < 1e-5, "worst {worst}");
    }

    #[test]
    fn epr_verdict_is_scale_invariant(
        dk in 1e3..5e4f64,
        ratio_k in 0.01..2.0f64,
        dx in 1e-5..1e-3f64,
        ratio_x in 0.01..2.0f64,
        c in 0.01..100.0f64,
    ) {
        // k -> c k, x -> x / c leaves the inequalities and the product unchanged
        let r1 = epr_report(dk, dk * 1.1, dk * ratio_k, dx, dx * 0.9, dx * ratio_x).unwrap();
        let r2 = epr_report(c * dk, c * dk * 1.1, c * dk * ratio_k, dx / c, dx * 0.9 / c, dx * ratio_x / c).unwrap();
        prop_assert_eq!(r1.epr_momentum_ok, r2.epr_momentum_ok);
        prop_assert_eq!(r1.epr_position_ok, r2.epr_position_ok);
        prop_assert!((r1.product - r2.product).abs() <= 1e-12 * r1.product);
    }

    #[test]
    fn visibility_mapping_round_trips(sigma in 1.0..6000.0f64, d in 0.1e-3..1e-3f64) {
        let v = sum_uncertainty_to_visibility(sigma, d);
        prop_assume!(v > 1e-12);
        let back = visibility_to_sum_uncertainty(v, d).unwrap();
        prop_assert!((back - sigma).abs() <= 1e-8 * sigma);
    }
}
