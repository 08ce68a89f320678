//! Visibility fits of focal-plane interference patterns.
//!
//! The fitted curve is the double-slit far field with visibility, written so
//! that the fringe contrast comes from a Gaussian blur of the ideal pattern:
//!
//! `m(x) = A * [G_s * (sinc^2(pi a u / (lambda f)) (1 + cos(2 pi d u / (lambda f))) / 2)](x - x0)`
//!
//! with `G_s` a unit-area Gaussian of variance `s`. Convolving the cosine
//! gives `V = exp(-kappa^2 s / 2)` with `kappa = 2 pi d / (lambda f)`, so the
//! fringe term is `(1 + V cos)/2` while the envelope receives the same blur,
//! which keeps `V` unbiased when the blur is a sizable fraction of a fringe.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::lm::{levenberg_marquardt, FitModel, LmOptions, LmResult};
use super::quadrature::gauss_hermite;
use crate::biphoton::{GeometryConfig, Pattern};
use crate::counting::CountsHistogram;
use crate::error::{Error, Result};

const QUADRATURE_NODES: usize = 48;
const MIN_FRINGES: f64 = 5.0;
pub const BOOTSTRAP_RESAMPLES: usize = 100;

/// Data handed to a fit: a noiseless pattern or Poisson counts.
#[derive(Debug, Clone, Copy)]
pub enum FitData<'a> {
    Pattern(&'a Pattern),
    Counts(&'a CountsHistogram),
}

impl<'a> From<&'a Pattern> for FitData<'a> {
    fn from(p: &'a Pattern) -> Self {
        FitData::Pattern(p)
    }
}

impl<'a> From<&'a CountsHistogram> for FitData<'a> {
    fn from(c: &'a CountsHistogram) -> Self {
        FitData::Counts(c)
    }
}

impl FitData<'_> {
    pub(crate) fn xy(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            FitData::Pattern(p) => (p.positions().to_vec(), p.rates().to_vec()),
            FitData::Counts(c) => (c.positions().to_vec(), c.as_f64()),
        }
    }

    pub(crate) fn weights(&self, ys: &[f64]) -> Vec<f64> {
        match self {
            FitData::Pattern(_) => vec![1.0; ys.len()],
            FitData::Counts(_) => ys.iter().map(|c| 1.0 / c.max(1.0)).collect(),
        }
    }

    pub(crate) fn is_counts(&self) -> bool {
        matches!(self, FitData::Counts(_))
    }
}

/// `sin z / z` and its first two derivatives.
fn sinc_derivs(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        (
            1.0 - z2 / 6.0 + z2 * z2 / 120.0,
            -z / 3.0 + z * z2 / 30.0,
            -1.0 / 3.0 + z2 / 10.0,
        )
    } else {
        let s = z.sin() / z;
        let s1 = (z.cos() - s) / z;
        let s2 = -s - 2.0 * s1 / z;
        (s, s1, s2)
    }
}

/// Blurred double-slit model. Parameters, all in millimeters:
/// `[A, s (blur variance, mm^2), a, d, x0, eta (mm^-2)]`; positions in
/// millimeters. `eta` is the curvature of an extra Gaussian envelope
/// `exp(-eta u^2 / 2)`, left free because phase matching caps the idler
/// angles; `eta = 0` is the bare double-slit pattern.
#[derive(Debug, Clone)]
pub struct InterferenceModel {
    lambda_f_mm2: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

struct Unblurred {
    value: f64,
    du: f64,
    du2: f64,
    da: f64,
    dd: f64,
    deta: f64,
}

impl InterferenceModel {
    pub fn new(wavelength: f64, focal_length: f64) -> Self {
        let (nodes, weights) = gauss_hermite(QUADRATURE_NODES);
        Self {
            lambda_f_mm2: wavelength * focal_length * 1e6,
            nodes,
            weights,
        }
    }

    fn unblurred(&self, a: f64, d: f64, eta: f64, u: f64) -> Unblurred {
        let alpha = PI / self.lambda_f_mm2;
        let (s, s1, s2) = sinc_derivs(alpha * a * u);
        let env = s * s;
        let env_u = 2.0 * s * s1 * alpha * a;
        let env_uu = 2.0 * (s1 * s1 + s * s2) * (alpha * a).powi(2);
        let env_a = 2.0 * s * s1 * alpha * u;
        let beta = 2.0 * alpha * d * u;
        let (sb, cb) = beta.sin_cos();
        let fr = 0.5 * (1.0 + cb);
        let fr_u = -alpha * d * sb;
        let fr_uu = -2.0 * (alpha * d).powi(2) * cb;
        let fr_d = -alpha * u * sb;
        let g = (-0.5 * eta * u * u).exp();
        let g_u = -eta * u * g;
        let g_uu = (eta * eta * u * u - eta) * g;
        let g_eta = -0.5 * u * u * g;
        Unblurred {
            value: env * fr * g,
            du: env_u * fr * g + env * fr_u * g + env * fr * g_u,
            du2: env_uu * fr * g
                + env * fr_uu * g
                + env * fr * g_uu
                + 2.0 * (env_u * fr_u * g + env_u * fr * g_u + env * fr_u * g_u),
            da: env_a * fr * g,
            dd: env * fr_d * g,
            deta: env * fr * g_eta,
        }
    }

    /// `kappa = 2 pi d / (lambda f)` in 1/mm.
    pub fn kappa(&self, d_mm: f64) -> f64 {
        2.0 * PI * d_mm / self.lambda_f_mm2
    }

    pub fn lambda_f_mm2(&self) -> f64 {
        self.lambda_f_mm2
    }
}

impl FitModel for InterferenceModel {
    fn n_params(&self) -> usize {
        6
    }

    fn eval(&self, p: &[f64], x: f64, grad: Option<&mut [f64]>) -> f64 {
        let (amp, s, a, d, x0, eta) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        let root = s.max(0.0).sqrt();
        let (mut v, mut du, mut du2, mut da, mut dd, mut deta) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let want_grad = grad.is_some();
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            let u = x - x0 + root * t;
            let m = self.unblurred(a, d, eta, u);
            v += w * m.value;
            if want_grad {
                du += w * m.du;
                du2 += w * m.du2;
                da += w * m.da;
                dd += w * m.dd;
                deta += w * m.deta;
            }
        }
        if let Some(g) = grad {
            g[0] = v;
            // heat equation: d/ds (G_s * m) = (G_s * m'') / 2
            g[1] = 0.5 * amp * du2;
            g[2] = amp * da;
            g[3] = amp * dd;
            g[4] = -amp * du;
            g[5] = amp * deta;
        }
        amp * v
    }
}

/// Optional starting point and fit controls.
#[derive(Debug, Clone)]
pub struct InterferenceFitOptions {
    pub wavelength: f64,
    /// Only samples with `|x| <= half_width` enter the fit.
    pub window_half_width: Option<f64>,
    pub initial_visibility: Option<f64>,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl InterferenceFitOptions {
    pub fn new(wavelength: f64) -> Self {
        Self {
            wavelength,
            window_half_width: None,
            initial_visibility: None,
            bootstrap_resamples: BOOTSTRAP_RESAMPLES,
            bootstrap_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSource {
    Covariance,
    Bootstrap,
}

/// Outcome of a visibility fit. Lengths in meters, wavenumbers in 1/m.
#[derive(Debug, Clone, Serialize)]
pub struct InterferenceFit {
    pub visibility: f64,
    pub visibility_error: f64,
    pub fitted_a: f64,
    pub fitted_d: f64,
    pub envelope_center: f64,
    pub amplitude: f64,
    /// Standard deviation of the Gaussian blur carried by the model.
    pub blur_sigma: f64,
    /// Contrast left by the D2 aperture alone, `sinc(kappa w / 2)`.
    pub detector_visibility: f64,
    /// Fitted visibility divided by the detector contribution (at most 1).
    pub corrected_visibility: f64,
    /// Sum-momentum spread implied by the corrected visibility.
    pub sigma_sum: f64,
    pub sigma_sum_error: f64,
    pub error_source: ErrorSource,
    pub residual_rms: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub branch: usize,
    pub n_points: usize,
    /// Curvature of the extra Gaussian envelope, 1/m^2.
    pub envelope_curvature: f64,
    /// Order `[amplitude, blur variance (m^2), a (m), d (m), x0 (m), envelope curvature (1/m^2)]`.
    pub covariance: Vec<Vec<f64>>,
}

/// `sigma_sum = sqrt(-2 ln V) / d`.
pub fn visibility_to_sum_uncertainty(v: f64, d: f64) -> Result<f64> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(format!("visibility must lie in (0, 1], got {v}")));
    }
    if !(d > 0.0) {
        return Err(Error::invalid("slit separation must be positive"));
    }
    Ok((-2.0 * v.ln()).max(0.0).sqrt() / d)
}

/// Visibility that a sum-momentum spread leaves on the fringes, `exp(-(d sigma)^2 / 2)`.
pub fn sum_uncertainty_to_visibility(sigma_sum: f64, d: f64) -> f64 {
    (-(d * sigma_sum).powi(2) / 2.0).exp()
}

fn detector_visibility(kappa_per_m: f64, width: f64) -> f64 {
    let z = 0.5 * kappa_per_m * width;
    if z == 0.0 {
        1.0
    } else {
        (z.sin() / z).abs()
    }
}

struct Prepared {
    xs_mm: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
}

fn prepare(data: FitData<'_>, window: Option<f64>) -> Result<Prepared> {
    let (xs, ys) = data.xy();
    let weights_all = data.weights(&ys);
    let mut out = Prepared {
        xs_mm: Vec::new(),
        ys: Vec::new(),
        weights: Vec::new(),
    };
    for ((x, y), w) in xs.iter().zip(&ys).zip(&weights_all) {
        if window.is_none_or(|h| x.abs() <= h) {
            out.xs_mm.push(x * 1e3);
            out.ys.push(*y);
            out.weights.push(*w);
        }
    }
    if out.ys.iter().all(|y| *y <= 0.0) {
        return Err(Error::InsufficientData("no counts in the fit window".into()));
    }
    Ok(out)
}

fn lm_options(geom: &GeometryConfig, model: &InterferenceModel, span_mm: f64, peak: f64) -> LmOptions {
    let a = geom.slit.slit_width() * 1e3;
    let d = geom.slit.slit_separation() * 1e3;
    let kappa = model.kappa(d);
    let s_max = 2.0 * 40.0 / (kappa * kappa);
    LmOptions {
        max_iterations: 500,
        step_tolerance: 1e-8,
        initial_damping: 1e-3,
        lower: vec![0.0, 0.0, 0.05 * a, 0.5 * d, -0.25 * span_mm, 0.0],
        upper: vec![f64::INFINITY, s_max, 0.95 * d, 2.0 * d, 0.25 * span_mm, 100.0],
        scale: vec![peak.max(1e-300), 1e-4 / (kappa * kappa), a, d, 1e-3 * a, 1e-4],
    }
}

fn best_branch(results: Vec<Result<LmResult>>) -> Result<(usize, LmResult)> {
    let mut best: Option<(usize, LmResult)> = None;
    let mut first_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|(_, b)| r.cost < b.cost) {
                    best = Some((i, r));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one branch"))
}

/// Weighted least-squares visibility fit.
///
/// Counts are weighted by `1 / max(count, 1)`. Three starts (visibility and
/// fringe spacing perturbed) run independently; the lowest cost wins, ties
/// go to the earlier start. For counts, error bars are the larger of the
/// covariance estimate and a Poisson bootstrap.
pub fn fit_interference(
    data: FitData<'_>,
    geom: &GeometryConfig,
    opts: &InterferenceFitOptions,
) -> Result<InterferenceFit> {
    geom.validate()?;
    let model = InterferenceModel::new(opts.wavelength, geom.f_imaging);
    let prep = prepare(data, opts.window_half_width)?;
    let n = prep.xs_mm.len();
    let span = prep.xs_mm.last().copied().unwrap_or(0.0) - prep.xs_mm.first().copied().unwrap_or(0.0);
    let period = model.lambda_f_mm2() / (geom.slit.slit_separation() * 1e3);
    if span / period < MIN_FRINGES {
        return Err(Error::InsufficientData(format!(
            "window spans {:.2} fringes, need at least {MIN_FRINGES}",
            span / period
        )));
    }
    let peak = prep.ys.iter().cloned().fold(0.0, f64::max);
    let lm = lm_options(geom, &model, span, peak);
    let a0 = geom.slit.slit_width() * 1e3;
    let d0 = geom.slit.slit_separation() * 1e3;
    let v0 = opts.initial_visibility.unwrap_or(0.8).clamp(0.05, 0.99);
    let starts: Vec<Vec<f64>> = [(v0, 1.0), (0.5 * v0, 0.985), ((v0 + 1.0) / 2.0, 1.015)]
        .iter()
        .map(|&(v, scale_d)| {
            let d = d0 * scale_d;
            let k = model.kappa(d);
            vec![peak, -2.0 * f64::ln(v) / (k * k), a0, d, 0.0, 0.0]
        })
        .collect();
    let results: Vec<Result<LmResult>> = starts
        .par_iter()
        .map(|p0| levenberg_marquardt(&model, &prep.xs_mm, &prep.ys, &prep.weights, p0, &lm))
        .collect();
    let (branch, best) = best_branch(results)?;

    let dof = (n - model.n_params()).max(1) as f64;
    let reduced_chi2 = 2.0 * best.cost / dof;
    let mut cov = best.inverse_hessian.clone();
    if !data.is_counts() {
        cov *= reduced_chi2;
    }

    let p = &best.params;
    let derived = derive(&model, geom, p);
    // gradient of V with respect to (s, d)
    let kappa = model.kappa(p[3]);
    let dv_ds = -0.5 * kappa * kappa * derived.visibility;
    let dv_dd = -kappa * kappa * p[1] / p[3] * derived.visibility;
    let var_v = dv_ds * dv_ds * cov[(1, 1)]
        + 2.0 * dv_ds * dv_dd * cov[(1, 3)]
        + dv_dd * dv_dd * cov[(3, 3)];
    let mut visibility_error = var_v.max(0.0).sqrt();
    let mut sigma_sum_error = sigma_error_from_v(derived.corrected_visibility, visibility_error / derived.detector_visibility, geom);
    let mut error_source = ErrorSource::Covariance;

    if data.is_counts() && opts.bootstrap_resamples > 1 {
        let (bv, bs) = bootstrap(&model, &prep, &lm, p, geom, opts)?;
        if bs > sigma_sum_error || bv > visibility_error {
            error_source = ErrorSource::Bootstrap;
        }
        visibility_error = visibility_error.max(bv);
        sigma_sum_error = sigma_sum_error.max(bs);
    }

    let fitted_peak = prep
        .xs_mm
        .iter()
        .map(|&x| model.eval(p, x, None))
        .fold(0.0, f64::max);
    let rss: f64 = prep
        .xs_mm
        .iter()
        .zip(&prep.ys)
        .map(|(&x, &y)| (model.eval(p, x, None) - y).powi(2))
        .sum();
    let residual_rms = if fitted_peak > 0.0 {
        (rss / n as f64).sqrt() / fitted_peak
    } else {
        f64::INFINITY
    };

    // mm-based parameters to SI
    let unit = [1.0, 1e-6, 1e-3, 1e-3, 1e-3, 1e6];
    let covariance = (0..6)
        .map(|i| (0..6).map(|j| cov[(i, j)] * unit[i] * unit[j]).collect())
        .collect();

    Ok(InterferenceFit {
        visibility: derived.visibility,
        visibility_error,
        fitted_a: p[2] * 1e-3,
        fitted_d: p[3] * 1e-3,
        envelope_center: p[4] * 1e-3,
        amplitude: p[0],
        blur_sigma: p[1].sqrt() * 1e-3,
        envelope_curvature: p[5] * 1e6,
        detector_visibility: derived.detector_visibility,
        corrected_visibility: derived.corrected_visibility,
        sigma_sum: derived.sigma_sum,
        sigma_sum_error,
        error_source,
        residual_rms,
        reduced_chi2,
        iterations: best.iterations,
        branch,
        n_points: n,
        covariance,
    })
}

struct Derived {
    visibility: f64,
    detector_visibility: f64,
    corrected_visibility: f64,
    sigma_sum: f64,
}

fn derive(model: &InterferenceModel, geom: &GeometryConfig, p: &[f64]) -> Derived {
    let kappa = model.kappa(p[3]);
    let visibility = (-0.5 * kappa * kappa * p[1]).exp();
    let kappa_geom = model.kappa(geom.slit.slit_separation() * 1e3) * 1e3;
    let detector_visibility = detector_visibility(kappa_geom, geom.d2_width);
    let corrected_visibility = (visibility / detector_visibility).min(1.0);
    let sigma_sum = visibility_to_sum_uncertainty(corrected_visibility.max(f64::MIN_POSITIVE), geom.slit.slit_separation())
        .unwrap_or(f64::INFINITY);
    Derived {
        visibility,
        detector_visibility,
        corrected_visibility,
        sigma_sum,
    }
}

fn sigma_error_from_v(v: f64, v_err: f64, geom: &GeometryConfig) -> f64 {
    let d = geom.slit.slit_separation();
    if v >= 1.0 || v <= 0.0 {
        // sigma = sqrt(-2 ln V)/d is not differentiable at V = 1; use the
        // value reached one standard error below
        return visibility_to_sum_uncertainty((v - v_err).clamp(f64::MIN_POSITIVE, 1.0), d)
            .unwrap_or(f64::INFINITY);
    }
    let sigma = (-2.0 * v.ln()).sqrt() / d;
    v_err / (v * d * d * sigma)
}

fn bootstrap(
    model: &InterferenceModel,
    prep: &Prepared,
    lm: &LmOptions,
    best: &[f64],
    geom: &GeometryConfig,
    opts: &InterferenceFitOptions,
) -> Result<(f64, f64)> {
    let fits: Vec<Option<(f64, f64)>> = (0..opts.bootstrap_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.bootstrap_seed);
            rng.set_stream(b as u64);
            let ys: Vec<f64> = prep
                .ys
                .iter()
                .map(|&c| {
                    if c <= 0.0 {
                        0.0
                    } else {
                        Poisson::new(c).map(|p| p.sample(&mut rng)).unwrap_or(c)
                    }
                })
                .collect();
            let w: Vec<f64> = ys.iter().map(|c| 1.0 / c.max(1.0)).collect();
            levenberg_marquardt(model, &prep.xs_mm, &ys, &w, best, lm)
                .ok()
                .map(|r| {
                    let d = derive(model, geom, &r.params);
                    (d.visibility, d.sigma_sum)
                })
        })
        .collect();
    let ok: Vec<(f64, f64)> = fits.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::Fit {
            iterations: lm.max_iterations,
            cost: f64::NAN,
            last_step: f64::NAN,
        });
    }
    let std = |vals: Vec<f64>| {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok((
        std(ok.iter().map(|p| p.0).collect()),
        std(ok.iter().map(|p| p.1).collect()),
    ))
}
