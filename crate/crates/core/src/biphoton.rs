//! Entangled signal/idler pairs: the joint momentum model, the bench
//! geometry, and coincidence patterns in the focal and image planes.
//!
//! Coincidence patterns in the idler's focal plane are computed in the
//! advanced-wave picture. The point-like detector behind the signal arm is
//! treated as a source; its wave crosses the double slit, travels back to
//! the crystal, is conjugated there against the plane-wave pump, and then
//! continues through the idler arm to the scanning detector.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optics::{
    apply_transfer, double_slit_mask, fourier_plane, fresnel_propagate, propagate_backward,
    ComplexField, DoubleSlitSpec, TransverseGrid,
};

/// Joint transverse-momentum model of the pair.
///
/// `|Phi(ks, ki)|^2` is Gaussian in the sum `ks + ki` (standard deviation
/// `sigma_sum`) and in the difference `ks - ki` (standard deviation
/// `sigma_diff`, fixed so each photon's marginal has standard deviation
/// `sigma_single`). An infinite `sigma_single` is the thin-crystal limit in
/// which phase matching places no bound on the single-photon angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiphotonModel {
    pub wavelength: f64,
    pub sigma_sum: f64,
    pub sigma_single: f64,
    pub pump_plane_wave: bool,
}

impl BiphotonModel {
    pub fn new(wavelength: f64, sigma_sum: f64, sigma_single: f64) -> Result<Self> {
        let m = Self {
            wavelength,
            sigma_sum,
            sigma_single,
            pump_plane_wave: true,
        };
        m.validate()?;
        Ok(m)
    }

    /// Single-photon spread set from the far-field divergence angle.
    pub fn from_divergence(wavelength: f64, sigma_sum: f64, delta_theta: f64) -> Result<Self> {
        Self::new(
            wavelength,
            sigma_sum,
            2.0 * PI / wavelength * delta_theta,
        )
    }

    /// No phase-matching bound on single-photon angles.
    pub fn thin_crystal(wavelength: f64, sigma_sum: f64) -> Result<Self> {
        Self::new(wavelength, sigma_sum, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        if !(self.sigma_sum >= 0.0 && self.sigma_sum.is_finite()) {
            return Err(Error::invalid("sigma_sum must be non-negative and finite"));
        }
        if !(self.sigma_single > self.sigma_sum) {
            return Err(Error::invalid(format!(
                "sigma_sum ({:.4e} 1/m) must be below sigma_single ({:.4e} 1/m) for an entangled source",
                self.sigma_sum, self.sigma_single
            )));
        }
        if !self.pump_plane_wave {
            return Err(Error::invalid("only a plane-wave pump is modelled"));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Standard deviation of `ks - ki`.
    pub fn sigma_diff(&self) -> f64 {
        if self.sigma_single.is_infinite() {
            f64::INFINITY
        } else {
            (4.0 * self.sigma_single * self.sigma_single - self.sigma_sum * self.sigma_sum).sqrt()
        }
    }

    /// Normalized joint amplitude; needs `sigma_sum > 0` and finite `sigma_single`.
    pub fn joint_amplitude(&self, ks: f64, ki: f64) -> Result<f64> {
        let sm = self.sigma_diff();
        if self.sigma_sum == 0.0 || sm.is_infinite() {
            return Err(Error::invalid(
                "joint amplitude is a distribution in the delta-correlated or thin-crystal limit",
            ));
        }
        let sp = self.sigma_sum;
        let norm = 1.0 / (PI * sp * sm).sqrt();
        let u = ks + ki;
        let v = ks - ki;
        Ok(norm * (-(u * u) / (4.0 * sp * sp) - v * v / (4.0 * sm * sm)).exp())
    }
}

/// How the signal-arm detector collects light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CollectionMode {
    /// Small detector in the focal plane of the collection lens.
    Point,
    /// Collects every photon that passes the slits.
    Bucket,
}

/// Lengths of the optical train, all in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryConfig {
    pub slit: DoubleSlitSpec,
    /// Slit plane to crystal.
    pub a1: f64,
    /// Crystal to imaging lens.
    pub a2: f64,
    /// Imaging lens to image-plane detector.
    pub b: f64,
    pub f_imaging: f64,
    pub f_collection: f64,
    pub d1_mode: CollectionMode,
    pub d2_width: f64,
    pub d3_width: f64,
}

impl Serialize for DoubleSlitSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("DoubleSlitSpec", 2)?;
        st.serialize_field("slit_width", &self.slit_width())?;
        st.serialize_field("slit_separation", &self.slit_separation())?;
        st.end()
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b", self.b),
            ("f_imaging", self.f_imaging),
            ("f_collection", self.f_collection),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("d2_width", self.d2_width), ("d3_width", self.d3_width)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Object distance measured through the crystal fold.
    pub fn object_distance(&self) -> f64 {
        self.a1 + self.a2
    }

    pub fn image_distance(&self) -> f64 {
        self.b
    }

    /// Bench used for the reference measurements: 0.165 mm slits 0.4 mm
    /// apart, 510 mm imaging lens, a1 = 32.5 cm, a2 = 46.5 cm, b = 142 cm.
    pub fn reference_bench() -> Self {
        Self {
            slit: DoubleSlitSpec::new(0.165e-3, 0.4e-3).expect("valid slit"),
            a1: 0.325,
            a2: 0.465,
            b: 1.42,
            f_imaging: 0.510,
            f_collection: 0.500,
            d1_mode: CollectionMode::Point,
            d2_width: 0.1e-3,
            d3_width: 0.1e-3,
        }
    }
}

/// Plane in which a pattern is recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorPlane {
    /// Back focal plane of the imaging lens (D2).
    ImagingFocal,
    /// Two-photon image plane (D3).
    Image,
    /// Back focal plane of the collection lens (D1).
    CollectionFocal,
}

/// Relative rate versus detector position.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    positions: Vec<f64>,
    rates: Vec<f64>,
    plane: DetectorPlane,
}

impl Pattern {
    pub fn new(positions: Vec<f64>, rates: Vec<f64>, plane: DetectorPlane) -> Result<Self> {
        if positions.len() != rates.len() {
            return Err(Error::invalid("positions and rates differ in length"));
        }
        if positions.len() < 2 {
            return Err(Error::invalid("pattern needs at least two samples"));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("pattern positions must be strictly increasing"));
        }
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::invalid("pattern rates must be finite and non-negative"));
        }
        Ok(Self {
            positions,
            rates,
            plane,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn plane(&self) -> DetectorPlane {
        self.plane
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.rates.iter().cloned().fold(0.0, f64::max)
    }

    /// Rates scaled so the maximum is 1 (unchanged if all zero).
    pub fn normalized(mut self) -> Self {
        let peak = self.peak();
        if peak > 0.0 {
            self.rates.iter_mut().for_each(|r| *r /= peak);
        }
        self
    }

    /// Samples with `lo <= x <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Self> {
        let (positions, rates): (Vec<f64>, Vec<f64>) = self
            .positions
            .iter()
            .zip(&self.rates)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(x, r)| (*x, *r))
            .unzip();
        Self::new(positions, rates, self.plane)
    }

    /// Uniform spacing, if the positions are uniformly spaced.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let h = (self.positions[self.len() - 1] - self.positions[0]) / (self.len() - 1) as f64;
        let uniform = self
            .positions
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-6 * h);
        uniform.then_some(h)
    }

    /// Trapezoidal integral of the rate.
    pub fn integral(&self) -> f64 {
        self.positions
            .windows(2)
            .zip(self.rates.windows(2))
            .map(|(x, r)| 0.5 * (r[0] + r[1]) * (x[1] - x[0]))
            .sum()
    }

    /// Largest deviation from mirror symmetry about x = 0, relative to the peak.
    pub fn parity_error(&self) -> f64 {
        let peak = self.peak();
        let n = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = self.positions[i];
            if let Some(j) = self
                .positions
                .iter()
                .position(|y| (y + x).abs() <= 1e-9 * (1.0 + x.abs()))
            {
                worst = worst.max((self.rates[i] - self.rates[j]).abs());
            }
        }
        if peak > 0.0 {
            worst / peak
        } else {
            worst
        }
    }
}

/// Ideal ghost interference-diffraction rate at D2, peak 1.
///
/// `sinc^2(pi a x / (lambda f)) cos^2(pi d x / (lambda f))`.
pub fn analytic_ghost_interference(x2: f64, geom: &GeometryConfig, wavelength: f64) -> f64 {
    let lf = wavelength * geom.f_imaging;
    let u = PI * geom.slit.slit_width() * x2 / lf;
    let s = if u == 0.0 { 1.0 } else { u.sin() / u };
    let c = (PI * geom.slit.slit_separation() * x2 / lf).cos();
    s * s * c * c
}

/// Focal-plane blur `f sigma_sum lambda / (2 pi)` from a spread of the sum momentum.
pub fn momentum_spread_to_focal_blur(sigma_sum: f64, geom: &GeometryConfig, wavelength: f64) -> f64 {
    geom.f_imaging * sigma_sum * wavelength / (2.0 * PI)
}

/// Grid requirements for the focal-plane calculations: the slit width and
/// the focal-plane fringe period must each span at least 10 samples.
pub fn check_interference_resolution(geom: &GeometryConfig, grid: &TransverseGrid) -> Result<()> {
    let across_slit = geom.slit.slit_width() / grid.spacing();
    if across_slit < 10.0 {
        return Err(Error::Resolution {
            what: "slit width",
            required: 10.0,
            available: across_slit,
        });
    }
    // fringe period lambda f / d over focal spacing lambda f / L
    let across_fringe = grid.extent() / geom.slit.slit_separation();
    if across_fringe < 10.0 {
        return Err(Error::Resolution {
            what: "focal-plane fringe period",
            required: 10.0,
            available: across_fringe,
        });
    }
    Ok(())
}

/// Discrete Gaussian mixture over transverse momenta on the grid's own
/// frequency lattice. Integer-bin tilts keep every field periodic on the grid.
fn momentum_mixture(sigma: f64, dq: f64) -> Vec<(f64, f64)> {
    if sigma == 0.0 {
        return vec![(0.0, 1.0)];
    }
    let reach = (6.0 * sigma / dq).ceil() as i64;
    let mut nodes: Vec<(f64, f64)> = (-reach..=reach)
        .map(|m| {
            let q = m as f64 * dq;
            (q, (-(q * q) / (2.0 * sigma * sigma)).exp())
        })
        .collect();
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    nodes.iter_mut().for_each(|(_, w)| *w /= total);
    nodes
}

/// Zero-padding factor so the tilt lattice resolves `sigma` with at least
/// four bins per standard deviation (capped at 16).
fn padding_for(sigma: f64, grid: &TransverseGrid) -> usize {
    if sigma == 0.0 {
        return 1;
    }
    let needed = (4.0 * grid.frequency_spacing() / sigma).ceil() as usize;
    needed.clamp(1, 16).next_power_of_two()
}

fn padded(grid: &TransverseGrid, factor: usize) -> Result<TransverseGrid> {
    TransverseGrid::new(grid.n() * factor, grid.spacing(), grid.center())
}

fn sum_weighted(
    parts: Vec<(f64, Vec<f64>)>,
) -> Vec<f64> {
    let n = parts.first().map(|p| p.1.len()).unwrap_or(0);
    let mut acc = vec![0.0; n];
    for (w, inten) in parts {
        for (a, v) in acc.iter_mut().zip(inten) {
            *a += w * v;
        }
    }
    acc
}

/// Coincidence pattern between a point-like D1 (at the center of the
/// collection-lens focal plane) and D2 scanning the imaging-lens focal plane.
///
/// The sum-momentum spread enters as an incoherent mixture of pump tilts;
/// the difference-momentum spread as a coherent angular filter applied at
/// the crystal. D2's aperture is applied as a box average.
pub fn klyshko_interference_pattern(
    model: &BiphotonModel,
    geom: &GeometryConfig,
    grid: &TransverseGrid,
) -> Result<Pattern> {
    model.validate()?;
    geom.validate()?;
    check_interference_resolution(geom, grid)?;
    if geom.d1_mode != CollectionMode::Point {
        return Err(Error::Configuration(
            "ghost interference needs a point-like D1 in the collection-lens focal plane".into(),
        ));
    }
    let grid = padded(grid, padding_for(model.sigma_sum, grid))?;
    let lambda = model.wavelength;
    let mask = double_slit_mask(&grid, &geom.slit)?;

    // D1 at the focal-plane center radiates a plane wave toward the slits.
    let source = ComplexField::from_fn(grid, lambda, |_| Complex64::new(1.0, 0.0))?.masked(&mask)?;
    let advanced = propagate_backward(&source.conj(), geom.a1)?;
    let at_crystal = advanced.conj();

    let sigma_diff = model.sigma_diff();
    let tilts = momentum_mixture(model.sigma_sum, grid.frequency_spacing());
    let parts: Vec<(f64, Vec<f64>)> = tilts
        .par_iter()
        .map(|&(q_pump, weight)| -> Result<(f64, Vec<f64>)> {
            let mut idler = at_crystal.tilted(q_pump);
            if sigma_diff.is_finite() {
                idler = apply_transfer(&idler, |q| {
                    let v = q_pump - 2.0 * q;
                    Complex64::new((-(v * v) / (4.0 * sigma_diff * sigma_diff)).exp(), 0.0)
                });
            }
            let at_lens = fresnel_propagate(&idler, geom.a2)?;
            let focal = fourier_plane(&at_lens, geom.f_imaging)?;
            Ok((weight, focal.intensity()))
        })
        .collect::<Result<_>>()?;
    let focal_grid = TransverseGrid::new(
        grid.n(),
        lambda * geom.f_imaging / grid.extent(),
        0.0,
    )?;
    let rates = sum_weighted(parts);
    let pattern = Pattern::new(focal_grid.positions(), rates, DetectorPlane::ImagingFocal)?;
    Ok(box_average(&pattern, geom.d2_width)?.normalized())
}

/// Convolution with a unit-area Gaussian of standard deviation `kernel_sigma`.
///
/// Needs uniformly spaced positions; values beyond the pattern are zero.
pub fn smear_pattern(p: &Pattern, kernel_sigma: f64) -> Result<Pattern> {
    if !(kernel_sigma >= 0.0 && kernel_sigma.is_finite()) {
        return Err(Error::invalid("kernel sigma must be non-negative"));
    }
    if kernel_sigma == 0.0 {
        return Ok(p.clone());
    }
    let h = p
        .uniform_spacing()
        .ok_or_else(|| Error::invalid("smearing needs uniformly spaced positions"))?;
    let reach = (8.0 * kernel_sigma / h).ceil() as isize;
    let mut kernel: Vec<f64> = (-reach..=reach)
        .map(|j| {
            let x = j as f64 * h;
            (-(x * x) / (2.0 * kernel_sigma * kernel_sigma)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let n = p.len() as isize;
    let rates = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (kj, k) in kernel.iter().enumerate() {
                let src = i + kj as isize - reach;
                if (0..n).contains(&src) {
                    acc += k * p.rates[src as usize];
                }
            }
            acc
        })
        .collect();
    Pattern::new(p.positions.clone(), rates, p.plane)
}

/// Average of the linearly interpolated rate over a detector aperture of
/// `width` centered on each sample. Rates beyond the pattern are zero.
pub fn box_average(p: &Pattern, width: f64) -> Result<Pattern> {
    if !(width >= 0.0 && width.is_finite()) {
        return Err(Error::invalid("detector width must be non-negative"));
    }
    if width == 0.0 {
        return Ok(p.clone());
    }
    let xs = &p.positions;
    let rs = &p.rates;
    let n = xs.len();
    let mut cumulative = vec![0.0; n];
    for i in 1..n {
        cumulative[i] = cumulative[i - 1] + 0.5 * (rs[i] + rs[i - 1]) * (xs[i] - xs[i - 1]);
    }
    // integral of the interpolant from xs[0] to x, clamped to the support
    let primitive = |x: f64| -> f64 {
        if x <= xs[0] {
            return 0.0;
        }
        if x >= xs[n - 1] {
            return cumulative[n - 1];
        }
        let j = xs.partition_point(|&v| v <= x) - 1;
        let h = xs[j + 1] - xs[j];
        let t = (x - xs[j]) / h;
        cumulative[j] + h * (rs[j] * t + 0.5 * (rs[j + 1] - rs[j]) * t * t)
    };
    let rates = xs
        .iter()
        .map(|&x| ((primitive(x + 0.5 * width) - primitive(x - 0.5 * width)) / width).max(0.0))
        .collect();
    Pattern::new(xs.clone(), rates, p.plane)
}

/// Residual of the two-photon thin-lens equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LensCheck {
    /// `|1/s_i + 1/s_o - 1/f| * f`.
    pub residual: f64,
    pub satisfied: bool,
}

pub fn check_two_photon_lens_equation(geom: &GeometryConfig, tol: f64) -> LensCheck {
    let f = geom.f_imaging;
    let residual = (1.0 / geom.image_distance() + 1.0 / geom.object_distance() - 1.0 / f).abs() * f;
    LensCheck {
        residual,
        satisfied: residual <= tol,
    }
}

/// `s_i / s_o`.
pub fn magnification(geom: &GeometryConfig) -> f64 {
    geom.image_distance() / geom.object_distance()
}

/// Tolerance on the lens equation below which an image is formed.
pub const IMAGE_LENS_TOLERANCE: f64 = 0.02;

fn require_imaging(geom: &GeometryConfig) -> Result<()> {
    let check = check_two_photon_lens_equation(geom, IMAGE_LENS_TOLERANCE);
    if !check.satisfied {
        return Err(Error::Configuration(format!(
            "check_two_photon_lens_equation failed: residual {:.4} exceeds tolerance {IMAGE_LENS_TOLERANCE}",
            check.residual
        )));
    }
    Ok(())
}

/// Edges `[(left, right); 2]` of the two magnified slit images.
pub fn image_rectangles(geom: &GeometryConfig) -> [(f64, f64); 2] {
    let m = magnification(geom);
    let half_w = 0.5 * m * geom.slit.slit_width();
    let c = 0.5 * m * geom.slit.slit_separation();
    [(-c - half_w, -c + half_w), (c - half_w, c + half_w)]
}

/// 1 inside either magnified slit image, else 0 (edges inside).
pub fn ideal_ghost_image(x3: f64, geom: &GeometryConfig) -> Result<f64> {
    require_imaging(geom)?;
    let tol = 1e-12 * geom.slit.slit_separation();
    Ok(
        if image_rectangles(geom)
            .iter()
            .any(|(l, r)| x3 >= l - tol && x3 <= r + tol)
        {
            1.0
        } else {
            0.0
        },
    )
}

/// Blurred ghost image evaluated at `x`: the ideal rectangles convolved with
/// a unit-area Gaussian (closed form via erf).
pub fn blurred_image_value(x: f64, rects: &[(f64, f64); 2], blur_sigma: f64) -> f64 {
    if blur_sigma == 0.0 {
        return if rects.iter().any(|(l, r)| x >= *l && x <= *r) {
            1.0
        } else {
            0.0
        };
    }
    let s = std::f64::consts::SQRT_2 * blur_sigma;
    rects
        .iter()
        .map(|(l, r)| 0.5 * (libm::erf((x - l) / s) - libm::erf((x - r) / s)))
        .sum()
}

/// Ghost image at D3 with an aggregated Gaussian blur, peak 1.
pub fn ghost_image_pattern(
    geom: &GeometryConfig,
    blur_sigma_x: f64,
    grid: &TransverseGrid,
) -> Result<Pattern> {
    geom.validate()?;
    require_imaging(geom)?;
    if !(blur_sigma_x >= 0.0 && blur_sigma_x.is_finite()) {
        return Err(Error::invalid("blur must be non-negative"));
    }
    let rects = image_rectangles(geom);
    let tol = 1e-12 * geom.slit.slit_separation();
    let widened = [
        (rects[0].0 - tol, rects[0].1 + tol),
        (rects[1].0 - tol, rects[1].1 + tol),
    ];
    let rates = grid
        .positions()
        .iter()
        .map(|&x| blurred_image_value(x, if blur_sigma_x == 0.0 { &widened } else { &rects }, blur_sigma_x))
        .collect();
    Ok(Pattern::new(grid.positions(), rates, DetectorPlane::Image)?.normalized())
}

/// Detector whose singles are requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    D1,
    D2,
    D3,
}

/// Singles rate of one detector: the joint rate integrated over the partner.
///
/// Under a plane-wave pump each photon on its own is an incoherent mixture
/// of plane waves whose transverse momenta have standard deviation
/// `sigma_single`. D1 sees that mixture through the slits in the collection
/// focal plane, D2 in the imaging focal plane (aperture applied), and D3 in
/// the image plane, where every plane wave is uniform.
pub fn singles_pattern(
    model: &BiphotonModel,
    geom: &GeometryConfig,
    grid: &TransverseGrid,
    which: Detector,
) -> Result<Pattern> {
    model.validate()?;
    geom.validate()?;
    if model.sigma_single.is_infinite() {
        return Err(Error::invalid(
            "singles need a finite single-photon momentum spread",
        ));
    }
    let lambda = model.wavelength;
    match which {
        Detector::D1 => {
            check_interference_resolution(geom, grid)?;
            let mask = double_slit_mask(grid, &geom.slit)?;
            let p = plane_wave_mixture_focal(grid, Some(&mask), model.sigma_single, geom.f_collection, lambda)?;
            Ok(Pattern::new(p.0, p.1, DetectorPlane::CollectionFocal)?.normalized())
        }
        Detector::D2 => {
            let p = plane_wave_mixture_focal(grid, None, model.sigma_single, geom.f_imaging, lambda)?;
            let pattern = Pattern::new(p.0, p.1, DetectorPlane::ImagingFocal)?;
            Ok(box_average(&pattern, geom.d2_width)?.normalized())
        }
        Detector::D3 => {
            let rates = vec![1.0; grid.n()];
            Pattern::new(grid.positions(), rates, DetectorPlane::Image)
        }
    }
}

fn plane_wave_mixture_focal(
    grid: &TransverseGrid,
    mask: Option<&[f64]>,
    sigma_k: f64,
    f: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = ComplexField::from_fn(*grid, lambda, |_| Complex64::new(1.0, 0.0))?;
    let tilts = momentum_mixture(sigma_k, grid.frequency_spacing());
    let parts: Vec<(f64, Vec<f64>)> = tilts
        .par_iter()
        .map(|&(q, w)| -> Result<(f64, Vec<f64>)> {
            let mut field = base.tilted(q);
            if let Some(m) = mask {
                field = field.masked(m)?;
            }
            Ok((w, fourier_plane(&field, f)?.intensity()))
        })
        .collect::<Result<_>>()?;
    let focal = TransverseGrid::new(grid.n(), lambda * f / grid.extent(), 0.0)?;
    Ok((focal.positions(), sum_weighted(parts)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::make_grid;

    const LAMBDA: f64 = 702.2e-9;

    fn bench_grid() -> TransverseGrid {
        make_grid(4096, 20.48e-3, 0.0).unwrap()
    }

    #[test]
    fn analytic_pattern_zeros() {
        let g = GeometryConfig::reference_bench();
        assert_eq!(analytic_ghost_interference(0.0, &g, LAMBDA), 1.0);
        let cos_zero = LAMBDA * 0.510 / (2.0 * 0.4e-3);
        assert!((cos_zero - 0.448e-3).abs() < 0.001e-3);
        assert!(analytic_ghost_interference(cos_zero, &g, LAMBDA) < 1e-25);
        let sinc_zero = LAMBDA * 0.510 / 0.165e-3;
        assert!((sinc_zero - 2.170e-3).abs() < 0.001e-3);
        assert!(analytic_ghost_interference(sinc_zero, &g, LAMBDA) < 1e-25);
        for x in [0.1e-3, 0.77e-3, 1.9e-3] {
            let a = analytic_ghost_interference(x, &g, LAMBDA);
            assert_eq!(a, analytic_ghost_interference(-x, &g, LAMBDA));
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn model_invariants() {
        assert!(BiphotonModel::new(LAMBDA, 3.0, 2.0).is_err());
        assert!(BiphotonModel::new(LAMBDA, -1.0, 2.0).is_err());
        let m = BiphotonModel::from_divergence(LAMBDA, 2500.0, 2.6e-3).unwrap();
        assert!((m.sigma_single - 23.26e3).abs() < 10.0);
        // each marginal: var = (sigma_sum^2 + sigma_diff^2) / 4
        let var = (m.sigma_sum.powi(2) + m.sigma_diff().powi(2)) / 4.0;
        assert!((var.sqrt() / m.sigma_single - 1.0).abs() < 1e-12);
    }

    #[test]
    fn joint_amplitude_is_normalized_and_has_stated_widths() {
        // brute-force quadrature on a dense (ks, ki) lattice
        let m = BiphotonModel::new(LAMBDA, 2.0, 5.0).unwrap();
        let h = 0.05;
        let (mut norm, mut sum2, mut ks2) = (0.0, 0.0, 0.0);
        for i in -800..=800 {
            for j in -800..=800 {
                let ks = i as f64 * h;
                let ki = j as f64 * h;
                let p = m.joint_amplitude(ks, ki).unwrap().powi(2) * h * h;
                norm += p;
                sum2 += p * (ks + ki).powi(2);
                ks2 += p * ks * ks;
            }
        }
        assert!((norm - 1.0).abs() < 1e-9, "{norm}");
        assert!((sum2.sqrt() - 2.0).abs() < 1e-6, "{}", sum2.sqrt());
        assert!((ks2.sqrt() - 5.0).abs() < 1e-6, "{}", ks2.sqrt());
        assert!(BiphotonModel::thin_crystal(LAMBDA, 0.0).unwrap().joint_amplitude(0.0, 0.0).is_err());
    }

    #[test]
    fn klyshko_ideal_limit_matches_analytic() {
        let mut geom = GeometryConfig::reference_bench();
        geom.d2_width = 0.0;
        let model = BiphotonModel::thin_crystal(LAMBDA, 0.0).unwrap();
        let p = klyshko_interference_pattern(&model, &geom, &bench_grid()).unwrap();
        let w = p.window(-2.5e-3, 2.5e-3).unwrap();
        assert!(w.len() >= 200);
        let mse: f64 = w
            .positions()
            .iter()
            .zip(w.rates())
            .map(|(x, r)| (r - analytic_ghost_interference(*x, &geom, LAMBDA)).powi(2))
            .sum::<f64>()
            / w.len() as f64;
        assert!(mse.sqrt() < 1e-3, "rms {}", mse.sqrt());
        assert!(p.parity_error() < 1e-9);
    }

    #[test]
    fn klyshko_rejects_coarse_grid_and_bucket_d1() {
        let geom = GeometryConfig::reference_bench();
        let model = BiphotonModel::thin_crystal(LAMBDA, 0.0).unwrap();
        let coarse = make_grid(1024, 20.48e-3, 0.0).unwrap();
        assert!(matches!(
            klyshko_interference_pattern(&model, &geom, &coarse),
            Err(Error::Resolution { .. })
        ));
        let narrow = make_grid(4096, 2e-3, 0.0).unwrap();
        assert!(matches!(
            klyshko_interference_pattern(&model, &geom, &narrow),
            Err(Error::Resolution { .. })
        ));
        let mut bucket = geom;
        bucket.d1_mode = CollectionMode::Bucket;
        assert!(klyshko_interference_pattern(&model, &bucket, &bench_grid()).is_err());
    }

    #[test]
    fn sum_spread_equals_focal_smear() {
        // Mixture over pump tilts == smearing the ideal pattern by f sigma lambda / 2 pi.
        let mut geom = GeometryConfig::reference_bench();
        geom.d2_width = 0.0;
        let grid = bench_grid();
        let ideal = klyshko_interference_pattern(
            &BiphotonModel::thin_crystal(LAMBDA, 0.0).unwrap(),
            &geom,
            &grid,
        )
        .unwrap();
        let sigma = 2500.0;
        let mixed = klyshko_interference_pattern(
            &BiphotonModel::thin_crystal(LAMBDA, sigma).unwrap(),
            &geom,
            &grid,
        )
        .unwrap();
        let smeared = smear_pattern(&ideal, momentum_spread_to_focal_blur(sigma, &geom, LAMBDA))
            .unwrap()
            .normalized();
        let mixed = mixed.window(-10e-3, 10e-3).unwrap();
        let smeared = smeared.window(-10e-3, 10e-3).unwrap();
        for (a, b) in mixed.rates().iter().zip(smeared.rates()) {
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn single_slit_gives_no_fringes() {
        let geom = GeometryConfig::reference_bench();
        let grid = bench_grid();
        let mask = crate::optics::single_slit_mask(&grid, 0.165e-3, 0.2e-3).unwrap();
        let src = ComplexField::from_fn(grid, LAMBDA, |_| Complex64::new(1.0, 0.0))
            .unwrap()
            .masked(&mask)
            .unwrap();
        let focal = fourier_plane(&fresnel_propagate(&src, geom.a1 + geom.a2).unwrap(), geom.f_imaging)
            .unwrap();
        let inten = focal.intensity();
        let peak = inten.iter().cloned().fold(0.0, f64::max);
        // pure sinc^2: compare against the envelope alone
        for (i, v) in inten.iter().enumerate() {
            let x = focal.grid().position(i);
            if x.abs() > 2.5e-3 {
                continue;
            }
            let u = PI * 0.165e-3 * x / (LAMBDA * geom.f_imaging);
            let s = if u == 0.0 { 1.0 } else { u.sin() / u };
            assert!((v / peak - s * s).abs() < 2e-3);
        }
    }

    #[test]
    fn focal_blur_examples() {
        let g = GeometryConfig::reference_bench();
        assert_eq!(momentum_spread_to_focal_blur(0.0, &g, LAMBDA), 0.0);
        let s = momentum_spread_to_focal_blur(2500.0, &g, LAMBDA);
        assert!((s - 0.1424e-3).abs() < 0.0001e-3, "{s}");
        assert!((momentum_spread_to_focal_blur(5000.0, &g, LAMBDA) - 2.0 * s).abs() < 1e-18);
    }

    #[test]
    fn smear_identity_and_cosine_visibility() {
        let grid = make_grid(8192, 40e-3, 0.0).unwrap();
        let kappa = 2.0 * PI * 0.4e-3 / (LAMBDA * 0.510);
        let rates: Vec<f64> = grid
            .positions()
            .iter()
            .map(|x| 1.0 + (kappa * x).cos())
            .collect();
        let p = Pattern::new(grid.positions(), rates, DetectorPlane::ImagingFocal).unwrap();
        assert_eq!(smear_pattern(&p, 0.0).unwrap(), p);
        let sigma = 0.1424e-3;
        let s = smear_pattern(&p, sigma).unwrap();
        // interior samples: amplitude of the cosine relative to the mean
        let mid = s.window(-5e-3, 5e-3).unwrap();
        let hi = mid.rates().iter().cloned().fold(0.0, f64::max);
        let lo = mid.rates().iter().cloned().fold(f64::INFINITY, f64::min);
        let v = (hi - lo) / (hi + lo);
        let expected = (-(kappa * sigma).powi(2) / 2.0).exp();
        assert!((v - expected).abs() < 2e-3, "{v} vs {expected}");
    }

    #[test]
    fn smear_preserves_integral() {
        let grid = make_grid(2048, 10e-3, 0.0).unwrap();
        let rates: Vec<f64> = grid
            .positions()
            .iter()
            .map(|x| (-(x / 0.5e-3).powi(2)).exp() * (1.0 + (x * 9000.0).cos()))
            .collect();
        let p = Pattern::new(grid.positions(), rates, DetectorPlane::Image).unwrap();
        let s = smear_pattern(&p, 0.2e-3).unwrap();
        assert!((s.integral() / p.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lens_equation_examples() {
        let g = GeometryConfig::reference_bench();
        let c = check_two_photon_lens_equation(&g, 0.01);
        assert!((c.residual - 0.0047).abs() < 0.0001, "{}", c.residual);
        assert!(c.satisfied);
        let mut sym = g;
        sym.a1 = 0.51;
        sym.a2 = 0.51;
        sym.b = 1.02;
        assert!(check_two_photon_lens_equation(&sym, 0.0).residual < 1e-15);
        let mut at_focus = g;
        at_focus.a1 = 0.2;
        at_focus.a2 = 0.31;
        for b in [0.1, 1.0, 10.0] {
            at_focus.b = b;
            assert!(!check_two_photon_lens_equation(&at_focus, 0.02).satisfied);
        }
    }

    #[test]
    fn magnification_examples() {
        let g = GeometryConfig::reference_bench();
        assert!((magnification(&g) - 1.80).abs() < 0.005);
        let mut unit = g;
        unit.a1 = 0.5;
        unit.a2 = 0.5;
        unit.b = 1.0;
        assert_eq!(magnification(&unit), 1.0);
        unit.b = 2.0;
        assert_eq!(magnification(&unit), 2.0);
    }

    #[test]
    fn ideal_image_geometry() {
        let g = GeometryConfig::reference_bench();
        let r = image_rectangles(&g);
        let width = r[1].1 - r[1].0;
        let centers = 0.5 * (r[1].0 + r[1].1) - 0.5 * (r[0].0 + r[0].1);
        assert!((width - 0.297e-3).abs() < 0.0005e-3);
        assert!((centers - 0.72e-3).abs() < 0.002e-3);
        assert_eq!(ideal_ghost_image(0.0, &g).unwrap(), 0.0);
        assert_eq!(ideal_ghost_image(0.36e-3, &g).unwrap(), 1.0);

        let mut unit = g;
        unit.a1 = 0.51;
        unit.a2 = 0.51;
        unit.b = 1.02;
        for x in [-0.3e-3, -0.2e-3, -0.1e-3, 0.0, 0.15e-3, 0.2e-3, 0.28e-3, 0.29e-3] {
            let slit = if unit.slit.is_open(x, 1e-15) { 1.0 } else { 0.0 };
            assert_eq!(ideal_ghost_image(x, &unit).unwrap(), slit);
        }

        let mut off = g;
        off.b = 2.0;
        assert!(matches!(
            ideal_ghost_image(0.0, &off),
            Err(Error::Configuration(msg)) if msg.contains("check_two_photon_lens_equation")
        ));
    }

    #[test]
    fn blurred_image_converges_to_ideal() {
        let g = GeometryConfig::reference_bench();
        let grid = make_grid(4096, 4e-3, 0.0).unwrap();
        let ideal = ghost_image_pattern(&g, 0.0, &grid).unwrap();
        for (x, r) in ideal.positions().iter().zip(ideal.rates()) {
            assert_eq!(*r, ideal_ghost_image(*x, &g).unwrap());
        }
        let rects = image_rectangles(&g);
        let blurred = ghost_image_pattern(&g, 1e-7, &grid).unwrap();
        for (x, (a, b)) in ideal
            .positions()
            .iter()
            .zip(ideal.rates().iter().zip(blurred.rates()))
        {
            let near_edge = rects
                .iter()
                .any(|(l, r)| (x - l).abs() < 1e-6 || (x - r).abs() < 1e-6);
            if !near_edge {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn image_matches_numerical_convolution() {
        // erf closed form vs brute-force smearing of the ideal image
        let g = GeometryConfig::reference_bench();
        let grid = make_grid(1 << 14, 4e-3, 0.0).unwrap();
        let ideal = ghost_image_pattern(&g, 0.0, &grid).unwrap();
        let sigma = 0.06e-3;
        let brute = smear_pattern(&ideal, sigma).unwrap();
        let rects = image_rectangles(&g);
        for (x, b) in brute.positions().iter().zip(brute.rates()) {
            let exact = blurred_image_value(*x, &rects, sigma);
            assert!((exact - b).abs() < 5e-3, "{x}: {exact} vs {b}");
        }
    }

    #[test]
    fn singles_d1_d2_d3() {
        let geom = GeometryConfig::reference_bench();
        let grid = bench_grid();
        let model = BiphotonModel::from_divergence(LAMBDA, 2500.0, 2.6e-3).unwrap();

        let d3 = singles_pattern(&model, &geom, &grid, Detector::D3).unwrap();
        assert!(d3.rates().iter().all(|&r| r == 1.0));

        // D2: Gaussian of standard deviation f * divergence in the focal plane
        let d2 = singles_pattern(&model, &geom, &grid, Detector::D2).unwrap();
        let total: f64 = d2.rates().iter().sum();
        let var: f64 = d2
            .positions()
            .iter()
            .zip(d2.rates())
            .map(|(x, r)| r * x * x)
            .sum::<f64>()
            / total;
        let expected = (0.510f64 * 2.6e-3).powi(2) + 0.1e-3f64.powi(2) / 12.0;
        assert!((var.sqrt() / expected.sqrt() - 1.0).abs() < 0.01);

        let d1 = singles_pattern(&model, &geom, &grid, Detector::D1).unwrap();
        assert_eq!(d1.plane(), DetectorPlane::CollectionFocal);
        // bell-shaped: monotone decreasing away from the center over the first 2 mm
        let right = d1.window(0.0, 2e-3).unwrap();
        assert!(right.rates().windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
