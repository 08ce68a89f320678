//! Ghost-image fits: blur of the magnified double slit and the FWHM excess.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::fwhm::{half_max_crossings, PeakSelector};
use super::interference::{ErrorSource, FitData, BOOTSTRAP_RESAMPLES};
use super::lm::{levenberg_marquardt, FitModel, LmOptions, LmResult};
use crate::biphoton::{
    blurred_image_value, check_two_photon_lens_equation, image_rectangles, magnification,
    DetectorPlane, GeometryConfig, Pattern, IMAGE_LENS_TOLERANCE,
};
use crate::error::{Error, Result};

const DENSE_SAMPLES: usize = 20_001;

/// `A * [rect * G_sigma](x)` with the rectangles fixed; parameters `[A, sigma]`
/// and positions in millimeters.
#[derive(Debug, Clone)]
pub struct ImageModel {
    rects_mm: [(f64, f64); 2],
}

impl ImageModel {
    pub fn new(geom: &GeometryConfig) -> Self {
        let r = image_rectangles(geom);
        Self {
            rects_mm: [(r[0].0 * 1e3, r[0].1 * 1e3), (r[1].0 * 1e3, r[1].1 * 1e3)],
        }
    }
}

impl FitModel for ImageModel {
    fn n_params(&self) -> usize {
        2
    }

    fn eval(&self, p: &[f64], x: f64, grad: Option<&mut [f64]>) -> f64 {
        let (amp, sigma) = (p[0], p[1]);
        let shape = blurred_image_value(x, &self.rects_mm, sigma);
        if let Some(g) = grad {
            g[0] = shape;
            g[1] = if sigma > 0.0 {
                // d/dsigma of Phi((x-l)/sigma) - Phi((x-r)/sigma)
                let gauss = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mut acc = 0.0;
                for (l, r) in self.rects_mm {
                    let zl = (x - l) / sigma;
                    let zr = (x - r) / sigma;
                    acc += -gauss(zl) * zl / sigma + gauss(zr) * zr / sigma;
                }
                amp * acc
            } else {
                0.0
            };
        }
        amp * shape
    }
}

/// Per-peak centers and FWHM of the blurred double rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakWidths {
    /// Location of each maximum of the summed profile.
    pub centers: [f64; 2],
    /// FWHM of each rectangle's own blurred profile.
    pub fwhm: [f64; 2],
    /// Whether the summed profile drops below half maximum between the peaks.
    pub resolved: bool,
}

fn dense_pattern(rects: &[(f64, f64); 2], sigma: f64, lo: f64, hi: f64) -> Result<Pattern> {
    let xs: Vec<f64> = (0..DENSE_SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / (DENSE_SAMPLES - 1) as f64)
        .collect();
    let ys = xs.iter().map(|&x| blurred_image_value(x, rects, sigma)).collect();
    Pattern::new(xs, ys, DetectorPlane::Image)
}

/// Location of the maximum in `[lo, hi]`; the middle of the plateau when flat.
fn peak_center(p: &Pattern, lo: f64, hi: f64) -> f64 {
    let inside: Vec<(f64, f64)> = p
        .positions()
        .iter()
        .zip(p.rates())
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(x, y)| (*x, *y))
        .collect();
    let top = inside.iter().map(|s| s.1).fold(0.0, f64::max);
    let on_top: Vec<f64> = inside
        .iter()
        .filter(|s| s.1 >= top * (1.0 - 1e-12))
        .map(|s| s.0)
        .collect();
    0.5 * (on_top[0] + on_top[on_top.len() - 1])
}

/// Measures both peaks of `[rects * G_sigma]` on a dense grid (units as given).
///
/// Widths are taken per rectangle so they stay defined, and grow
/// continuously, after the blur merges the two images.
pub fn peak_widths(rects: &[(f64, f64); 2], sigma: f64) -> Result<PeakWidths> {
    let pad = (rects[1].1 - rects[0].0) + 6.0 * sigma;
    let lo = rects[0].0 - pad;
    let hi = rects[1].1 + pad;
    let split = 0.5 * (rects[0].1 + rects[1].0);
    let both = dense_pattern(rects, sigma, lo, hi)?;
    let resolved = half_max_crossings(&both, PeakSelector::Window { lo, hi: split }).is_ok()
        && half_max_crossings(&both, PeakSelector::Window { lo: split, hi }).is_ok();
    let mut fwhm = [0.0; 2];
    for (j, rect) in rects.iter().enumerate() {
        let single = [*rect, (rect.0, rect.0)];
        let p = dense_pattern(&single, sigma, lo, hi)?;
        let (a, b) = half_max_crossings(&p, PeakSelector::Global)?;
        fwhm[j] = b - a;
    }
    Ok(PeakWidths {
        centers: [peak_center(&both, lo, split), peak_center(&both, split, hi)],
        fwhm,
        resolved,
    })
}

/// Mean per-peak FWHM excess over the magnified slit width for a blur.
pub fn fwhm_excess_for_blur(geom: &GeometryConfig, blur_sigma: f64) -> Result<f64> {
    let rects = image_rectangles(geom);
    let w = peak_widths(&rects, blur_sigma)?;
    Ok(0.5 * (w.fwhm[0] + w.fwhm[1]) - magnification(geom) * geom.slit.slit_width())
}

/// Blur (image plane, meters) whose per-peak FWHM exceeds `m a` by `excess`.
pub fn blur_for_fwhm_excess(geom: &GeometryConfig, excess: f64) -> Result<f64> {
    if !(excess >= 0.0 && excess.is_finite()) {
        return Err(Error::invalid("FWHM excess must be non-negative"));
    }
    if excess == 0.0 {
        return Ok(0.0);
    }
    let a_img = magnification(geom) * geom.slit.slit_width();
    let (mut lo, mut hi) = (0.0, a_img);
    while fwhm_excess_for_blur(geom, hi)? < excess {
        hi *= 2.0;
        if hi > 1e3 * a_img {
            return Err(Error::invalid("requested FWHM excess is unreachable"));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fwhm_excess_for_blur(geom, mid)? < excess {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of an image fit. Lengths in the image plane, meters.
#[derive(Debug, Clone, Serialize)]
pub struct ImageFit {
    pub blur_sigma: f64,
    pub blur_sigma_error: f64,
    pub amplitude: f64,
    pub peak_centers: [f64; 2],
    pub fwhm_fitted: [f64; 2],
    pub fwhm_ideal: f64,
    pub peaks_resolved: bool,
    pub magnification: f64,
    /// One-sigma error of the mean FWHM excess.
    pub excess_error: f64,
    pub error_source: ErrorSource,
    pub residual_rms: f64,
    pub iterations: usize,
    pub n_points: usize,
}

impl ImageFit {
    pub fn peak_separation(&self) -> f64 {
        self.peak_centers[1] - self.peak_centers[0]
    }
}

/// `Delta(x_s - x_i)` as the mean FWHM excess of the fitted peaks (image plane).
pub fn position_uncertainty_from_image(fit: &ImageFit) -> f64 {
    0.5 * (fit.fwhm_fitted[0] + fit.fwhm_fitted[1]) - fit.fwhm_ideal
}

/// The same excess referred to the object plane (divided by the magnification).
pub fn position_uncertainty_object_plane(fit: &ImageFit) -> f64 {
    position_uncertainty_from_image(fit) / fit.magnification
}

/// Count runs of samples above half the maximum wider than `min_width`.
fn bright_regions(xs: &[f64], ys: &[f64], min_width: f64) -> usize {
    let half = 0.5 * ys.iter().cloned().fold(0.0, f64::max);
    let mut regions = 0;
    let mut start: Option<f64> = None;
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let above = y >= half;
        match (above, start) {
            (true, None) => start = Some(x),
            (false, Some(s)) => {
                if xs[i - 1] - s >= min_width {
                    regions += 1;
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if xs[xs.len() - 1] - s >= min_width {
            regions += 1;
        }
    }
    regions
}

fn image_lm_options(geom: &GeometryConfig, peak: f64) -> LmOptions {
    let a_img = magnification(geom) * geom.slit.slit_width() * 1e3;
    LmOptions {
        max_iterations: 500,
        step_tolerance: 1e-8,
        initial_damping: 1e-3,
        lower: vec![0.0, 0.0],
        upper: vec![f64::INFINITY, 10.0 * a_img],
        scale: vec![peak.max(1e-300), 1e-4 * a_img],
    }
}

/// Least squares over blur and amplitude with the template fixed by geometry.
pub fn fit_image(data: FitData<'_>, geom: &GeometryConfig, bootstrap_seed: u64) -> Result<ImageFit> {
    geom.validate()?;
    let lens = check_two_photon_lens_equation(geom, IMAGE_LENS_TOLERANCE);
    if !lens.satisfied {
        return Err(Error::Configuration(format!(
            "check_two_photon_lens_equation failed: residual {:.4}",
            lens.residual
        )));
    }
    let (xs, ys) = data.xy();
    let rects = image_rectangles(geom);
    if xs[0] > rects[0].0 || xs[xs.len() - 1] < rects[1].1 {
        return Err(Error::Shape("both image peaks must lie inside the scan window".into()));
    }
    let m = magnification(geom);
    let a_img = m * geom.slit.slit_width();
    if bright_regions(&xs, &ys, 0.25 * a_img) < 2 {
        return Err(Error::Shape("data do not show two separate image peaks".into()));
    }
    let weights = data.weights(&ys);
    let xs_mm: Vec<f64> = xs.iter().map(|x| x * 1e3).collect();
    let model = ImageModel::new(geom);
    let peak = ys.iter().cloned().fold(0.0, f64::max);
    let lm = image_lm_options(geom, peak);
    let starts: Vec<Vec<f64>> = [0.05, 0.2, 0.5]
        .iter()
        .map(|f| vec![peak, f * a_img * 1e3])
        .collect();
    let results: Vec<Result<LmResult>> = starts
        .par_iter()
        .map(|p0| levenberg_marquardt(&model, &xs_mm, &ys, &weights, p0, &lm))
        .collect();
    let mut best: Option<LmResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.cost < b.cost) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let best = match best {
        Some(b) => b,
        None => return Err(first_err.expect("three branches")),
    };
    let n = xs.len();
    let dof = (n - 2).max(1) as f64;
    let mut var_sigma = best.inverse_hessian[(1, 1)];
    if !data.is_counts() {
        var_sigma *= 2.0 * best.cost / dof;
    }
    let sigma = best.params[1] * 1e-3;
    let mut sigma_err = var_sigma.max(0.0).sqrt() * 1e-3;

    let widths = peak_widths(&rects, sigma)?;
    let slope = {
        let h = (1e-3 * a_img).max(0.05 * sigma_err);
        let up = fwhm_excess_for_blur(geom, sigma + h)?;
        let down = fwhm_excess_for_blur(geom, (sigma - h).max(0.0))?;
        (up - down) / (sigma + h - (sigma - h).max(0.0))
    };
    let mut excess_error = slope.abs() * sigma_err;
    let mut error_source = ErrorSource::Covariance;

    if data.is_counts() {
        let boots: Vec<Option<(f64, f64)>> = (0..BOOTSTRAP_RESAMPLES)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
                rng.set_stream(b as u64);
                let y: Vec<f64> = ys
                    .iter()
                    .map(|&c| {
                        if c <= 0.0 {
                            0.0
                        } else {
                            Poisson::new(c).map(|p| p.sample(&mut rng)).unwrap_or(c)
                        }
                    })
                    .collect();
                let w: Vec<f64> = y.iter().map(|c| 1.0 / c.max(1.0)).collect();
                let r = levenberg_marquardt(&model, &xs_mm, &y, &w, &best.params, &lm).ok()?;
                let s = r.params[1] * 1e-3;
                Some((s, fwhm_excess_for_blur(geom, s).ok()?))
            })
            .collect();
        let ok: Vec<(f64, f64)> = boots.into_iter().flatten().collect();
        if ok.len() >= 2 {
            let std = |v: Vec<f64>| {
                let k = v.len() as f64;
                let mean = v.iter().sum::<f64>() / k;
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            };
            let bs = std(ok.iter().map(|p| p.0).collect());
            let be = std(ok.iter().map(|p| p.1).collect());
            if be > excess_error {
                error_source = ErrorSource::Bootstrap;
            }
            sigma_err = sigma_err.max(bs);
            excess_error = excess_error.max(be);
        }
    }

    let fitted_peak = xs_mm
        .iter()
        .map(|&x| model.eval(&best.params, x, None))
        .fold(0.0, f64::max);
    let rss: f64 = xs_mm
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (model.eval(&best.params, x, None) - y).powi(2))
        .sum();

    Ok(ImageFit {
        blur_sigma: sigma,
        blur_sigma_error: sigma_err,
        amplitude: best.params[0],
        peak_centers: widths.centers,
        fwhm_fitted: widths.fwhm,
        fwhm_ideal: a_img,
        peaks_resolved: widths.resolved,
        magnification: m,
        excess_error,
        error_source,
        residual_rms: (rss / n as f64).sqrt() / fitted_peak.max(f64::MIN_POSITIVE),
        iterations: best.iterations,
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biphoton::{ghost_image_pattern, smear_pattern};
    use crate::estimators::fwhm::fwhm;
    use crate::optics::make_grid;

    fn grid() -> crate::optics::TransverseGrid {
        make_grid(1024, 3e-3, 0.0).unwrap()
    }

    #[test]
    fn ideal_self_fit() {
        let g = GeometryConfig::reference_bench();
        let p = ghost_image_pattern(&g, 0.0, &grid()).unwrap();
        let fit = fit_image((&p).into(), &g, 0).unwrap();
        let h = grid().spacing();
        assert!(fit.blur_sigma < 0.5 * h, "{}", fit.blur_sigma);
        assert!((fit.fwhm_fitted[0] - 0.297e-3).abs() < 0.001e-3);
        assert!((fit.peak_separation() - 0.72e-3).abs() < h);
        assert!(position_uncertainty_from_image(&fit).abs() < h);
    }

    #[test]
    fn recovers_blur_and_excess() {
        let g = GeometryConfig::reference_bench();
        let blur = blur_for_fwhm_excess(&g, 0.11e-3).unwrap();
        assert!((fwhm_excess_for_blur(&g, blur).unwrap() - 0.11e-3).abs() < 1e-12);
        let p = ghost_image_pattern(&g, blur, &grid()).unwrap();
        let fit = fit_image((&p).into(), &g, 0).unwrap();
        assert!((fit.blur_sigma / blur - 1.0).abs() < 1e-4);
        assert!((position_uncertainty_from_image(&fit) - 0.11e-3).abs() < 1e-7);
        assert!(
            (position_uncertainty_object_plane(&fit) - 0.11e-3 / magnification(&g)).abs() < 1e-7
        );
    }

    #[test]
    fn centers_do_not_move_with_blur() {
        let g = GeometryConfig::reference_bench();
        let h = grid().spacing();
        // up to the blur at which the gap between the images fills to 40%
        for blur in [0.0, 0.02e-3, 0.06e-3, 0.1e-3, 0.14e-3, 0.18e-3] {
            let p = ghost_image_pattern(&g, blur, &grid()).unwrap();
            let fit = fit_image((&p).into(), &g, 0).unwrap();
            let d_img = magnification(&g) * 0.4e-3;
            assert!((fit.peak_separation() - d_img).abs() < h, "{blur}: {:?}", fit);
        }
    }

    #[test]
    fn excess_grows_with_blur() {
        // flat (to rounding) while the blur is far below the slit image,
        // strictly increasing once it is not
        let rects = image_rectangles(&GeometryConfig::reference_bench());
        let mut last = -1.0;
        for i in 0..=60 {
            let s = i as f64 * 0.005e-3;
            let w = peak_widths(&rects, s).unwrap();
            let mean = 0.5 * (w.fwhm[0] + w.fwhm[1]);
            if s >= 0.03e-3 {
                assert!(mean > last, "blur {s}");
            } else {
                // sub-sample interpolation error of the dense evaluation grid
                assert!(mean > last - 3e-7, "blur {s}");
            }
            last = mean;
        }
    }

    #[test]
    fn fwhm_of_blurred_rectangle_matches_brute_force() {
        let n = 1 << 14;
        let g = make_grid(n, 4e-3, 0.0).unwrap();
        let h = g.spacing();
        let rect: Vec<f64> = g
            .positions()
            .iter()
            .map(|x| if x.abs() <= 0.1485e-3 { 1.0 } else { 0.0 })
            .collect();
        let p = Pattern::new(g.positions(), rect, DetectorPlane::Image).unwrap();
        for sigma in [0.01e-3, 0.05e-3, 0.1e-3] {
            let brute = fwhm(&smear_pattern(&p, sigma).unwrap(), PeakSelector::Global).unwrap();
            let single = [(-0.1485e-3, 0.1485e-3), (1.8515e-3, 2.1485e-3)];
            let w = peak_widths(&single, sigma).unwrap();
            assert!((w.fwhm[0] - brute).abs() < h, "{sigma}");
        }
    }

    #[test]
    fn single_peak_is_shape_error() {
        let g = GeometryConfig::reference_bench();
        let xs = grid().positions();
        let ys = xs
            .iter()
            .map(|x| if (x - 0.36e-3).abs() < 0.15e-3 { 1.0 } else { 0.0 })
            .collect();
        let p = Pattern::new(xs, ys, DetectorPlane::Image).unwrap();
        assert!(matches!(fit_image((&p).into(), &g, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = ImageModel::new(&GeometryConfig::reference_bench());
        let p = [1.3, 0.04];
        let mut g = [0.0; 2];
        for x in [-0.5, -0.2, 0.0, 0.21, 0.5] {
            m.eval(&p, x, Some(&mut g));
            for k in 0..2 {
                let h = 1e-6 * p[k].abs();
                let mut up = p;
                let mut dn = p;
                up[k] += h;
                dn[k] -= h;
                let fd = (m.eval(&up, x, None) - m.eval(&dn, x, None)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(1e-3), "{x} {k}");
            }
        }
    }
}
