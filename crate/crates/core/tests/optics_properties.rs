use ghost_optics::optics::*;
use num_complex::Complex64;
use proptest::prelude::*;

const LAMBDA: f64 = 702.2e-9;

fn grid() -> TransverseGrid {
    make_grid(1024, 10.24e-3, 0.0).unwrap()
}

/// Smooth random field: a few Gaussian blobs with random phases.
fn blobs(params: &[(f64, f64, f64, f64)]) -> ComplexField {
    ComplexField::from_fn(grid(), LAMBDA, |x| {
        params
            .iter()
            .map(|&(c, w, a, ph)| Complex64::from_polar(a * (-((x - c) / w).powi(2)).exp(), ph))
            .sum()
    })
    .unwrap()
}

fn blob_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec(
        (-1.5e-3..1.5e-3f64, 0.1e-3..0.6e-3f64, 0.1..1.0f64, 0.0..std::f64::consts::TAU),
        1..4,
    )
}

fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn max_abs(a: &ComplexField) -> f64 {
    a.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagation_conserves_power(b in blob_strategy(), z in 0.0..1.5f64) {
        let u = blobs(&b);
        let p0 = u.power();
        let v = fresnel_propagate(&u, z).unwrap();
        prop_assert!((v.power() - p0).abs() <= 1e-9 * p0);
        let back = propagate_backward(&u, z).unwrap();
        prop_assert!((back.power() - p0).abs() <= 1e-9 * p0);
    }

    #[test]
    fn fourier_plane_conserves_power(b in blob_strategy(), f in 0.05..2.0f64) {
        let u = blobs(&b);
        let v = fourier_plane(&u, f).unwrap();
        prop_assert!((v.power() - u.power()).abs() <= 1e-9 * u.power());
    }

    #[test]
    fn propagation_composes(b in blob_strategy(), z1 in 0.0..0.8f64, z2 in 0.0..0.8f64) {
        let u = blobs(&b);
        let two = fresnel_propagate(&fresnel_propagate(&u, z1).unwrap(), z2).unwrap();
        let one = fresnel_propagate(&u, z1 + z2).unwrap();
        prop_assert!(max_diff(&two, &one) <= 1e-10 * max_abs(&u));
    }

    #[test]
    fn backward_undoes_forward(b in blob_strategy(), z in 0.0..1.5f64) {
        let u = blobs(&b);
        let round = propagate_backward(&fresnel_propagate(&u, z).unwrap(), z).unwrap();
        prop_assert!(max_diff(&round, &u) <= 1e-10 * max_abs(&u));
    }

    #[test]
    fn propagation_is_linear(
        b1 in blob_strategy(),
        b2 in blob_strategy(),
        re in -2.0..2.0f64,
        im in -2.0..2.0f64,
        z in 0.0..1.0f64,
    ) {
        let (u, v) = (blobs(&b1), blobs(&b2));
        let c = Complex64::new(re, im);
        let combo = ComplexField::new(
            grid(),
            u.values().iter().zip(v.values()).map(|(a, b)| a + c * b).collect(),
            LAMBDA,
        ).unwrap();
        let lhs = fresnel_propagate(&combo, z).unwrap();
        let (pu, pv) = (fresnel_propagate(&u, z).unwrap(), fresnel_propagate(&v, z).unwrap());
        let rhs = ComplexField::new(
            grid(),
            pu.values().iter().zip(pv.values()).map(|(a, b)| a + c * b).collect(),
            LAMBDA,
        ).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-10 * (max_abs(&u) + c.norm() * max_abs(&v)));
    }

    #[test]
    fn masks_are_idempotent(a in 0.02e-3..0.3e-3f64, extra in 0.01e-3..0.5e-3f64, b in blob_strategy()) {
        let spec = DoubleSlitSpec::new(a, a + extra).unwrap();
        let m = double_slit_mask(&grid(), &spec).unwrap();
        let u = blobs(&b);
        let once = u.masked(&m).unwrap();
        let twice = once.masked(&m).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(m.iter().all(|&v| v == 0.0 || v == 1.0));
        // even mask on a symmetric grid
        let n = m.len();
        for i in 1..n {
            prop_assert_eq!(m[i], m[n - i]);
        }
    }

    #[test]
    fn even_fields_stay_even(w in 0.1e-3..0.6e-3f64, z in 0.0..1.0f64, f in 0.1..1.0f64) {
        let u = ComplexField::from_fn(grid(), LAMBDA, |x| Complex64::new((-(x / w).powi(2)).exp(), 0.0)).unwrap();
        for v in [fresnel_propagate(&u, z).unwrap(), fourier_plane(&u, f).unwrap()] {
            let n = v.values().len();
            let scale = max_abs(&v);
            for i in 1..n {
                prop_assert!((v.values()[i] - v.values()[n - i]).norm() <= 1e-9 * scale);
            }
        }
    }
}

#[test]
fn tilt_maps_to_focal_position() {
    let g = grid();
    let q = 40.0 * g.frequency_spacing();
    let u = ComplexField::from_fn(g, LAMBDA, |x| Complex64::new((-(x / 2e-3).powi(2)).exp(), 0.0))
        .unwrap()
        .tilted(q);
    let f = 0.51;
    let v = fourier_plane(&u, f).unwrap();
    let i = v.intensity();
    let peak = (0..i.len()).max_by(|&a, &b| i[a].total_cmp(&i[b])).unwrap();
    let x = v.grid().position(peak);
    assert!((x - focal_plane_coordinate(q, f, LAMBDA)).abs() < 0.5 * v.grid().spacing());
}
