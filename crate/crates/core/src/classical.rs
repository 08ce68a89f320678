//! Classically momentum-correlated particle pairs ("rotating guns").
//!
//! Each pair shares a nominal transverse wavevector `K` drawn from `P(K)`;
//! particle 1 leaves with `K + n1`, particle 2 with `-K + n2`. The noise
//! terms are independent and no narrower than `1 / (2w)` for a gun of
//! aperture `w`, because each particle diffracts on its own.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::biphoton::{box_average, check_interference_resolution, DetectorPlane, GeometryConfig, Pattern};
use crate::error::{Error, Result};
use crate::optics::{double_slit_mask, fourier_plane, fresnel_propagate, ComplexField, TransverseGrid};

/// Shape of `P(K)`; both have standard deviation `k_spread`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KDistribution {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionMode {
    /// Each particle leaves from its own point of the aperture.
    Independent,
    /// Both particles leave from the same point.
    SharedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalGunModel {
    /// 1/m.
    pub k_spread: f64,
    /// m.
    pub source_width_w: f64,
    /// Standard deviation of each particle's independent momentum noise, 1/m.
    pub noise_sigma: f64,
    pub k_distribution: KDistribution,
    pub emission: EmissionMode,
}

impl ClassicalGunModel {
    /// Gaussian `P(K)`, independent emission, noise at the floor `1/(2w)`.
    pub fn new(k_spread: f64, source_width_w: f64) -> Result<Self> {
        Self::with_noise_factor(k_spread, source_width_w, 1.0)
    }

    /// Noise `factor / (2w)`; factors below 1 break the per-particle bound.
    pub fn with_noise_factor(k_spread: f64, source_width_w: f64, factor: f64) -> Result<Self> {
        let m = Self {
            k_spread,
            source_width_w,
            noise_sigma: factor / (2.0 * source_width_w),
            k_distribution: KDistribution::Gaussian,
            emission: EmissionMode::Independent,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_spread >= 0.0 && self.k_spread.is_finite()) {
            return Err(Error::invalid("k_spread must be non-negative"));
        }
        if !(self.source_width_w > 0.0 && self.source_width_w.is_finite()) {
            return Err(Error::invalid("source width must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma * self.source_width_w >= 0.5 * (1.0 - 1e-12)) {
            return Err(Error::invalid(format!(
                "noise {:.4e} 1/m below the per-particle floor 1/(2w) = {:.4e} 1/m",
                self.noise_sigma,
                0.5 / self.source_width_w
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSample {
    pub k1: f64,
    pub k2: f64,
    pub x1: f64,
    pub x2: f64,
    pub shared_k: f64,
}

impl PairSample {
    /// Transverse positions after free flight over `distance`.
    pub fn positions_after(&self, distance: f64, wavenumber: f64) -> (f64, f64) {
        (
            self.x1 + distance * self.k1 / wavenumber,
            self.x2 + distance * self.k2 / wavenumber,
        )
    }
}

fn draw(model: &ClassicalGunModel, rng: &mut ChaCha8Rng) -> PairSample {
    let shared_k = match model.k_distribution {
        KDistribution::Gaussian if model.k_spread > 0.0 => {
            Normal::new(0.0, model.k_spread).expect("positive std").sample(rng)
        }
        KDistribution::Uniform if model.k_spread > 0.0 => {
            let half = 3f64.sqrt() * model.k_spread;
            rng.random_range(-half..=half)
        }
        _ => 0.0,
    };
    let noise = Normal::new(0.0, model.noise_sigma).expect("finite noise");
    let aperture = Normal::new(0.0, model.source_width_w).expect("positive width");
    let k1 = shared_k + noise.sample(rng);
    let k2 = -shared_k + noise.sample(rng);
    let x1 = aperture.sample(rng);
    let x2 = match model.emission {
        EmissionMode::Independent => aperture.sample(rng),
        EmissionMode::SharedPoint => x1,
    };
    PairSample {
        k1,
        k2,
        x1,
        x2,
        shared_k,
    }
}

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One pair, deterministic in `seed`.
pub fn sample_pair(model: &ClassicalGunModel, seed: u64) -> PairSample {
    sample_pair_indexed(model, seed, 0)
}

/// Pair number `index` of the run seeded by `seed` (its own ChaCha8 stream).
pub fn sample_pair_indexed(model: &ClassicalGunModel, seed: u64, index: u64) -> PairSample {
    draw(model, &mut rng_for(seed, index))
}

/// Standard deviations of single-particle and combined variables.
///
/// `*_noise` fields hold the parts independent of the shared variable
/// (`std(k_j - (+/-)K)`, and the positions themselves since emission points
/// are the only position variables); for measured quantum data they are
/// set equal to the marginals and `n_samples` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationStats {
    pub dk1: f64,
    pub dk2: f64,
    pub dk_sum: f64,
    pub dx1: f64,
    pub dx2: f64,
    pub dx_diff: f64,
    pub dk1_noise: f64,
    pub dk2_noise: f64,
    pub dx1_noise: f64,
    pub dx2_noise: f64,
    pub n_samples: Option<usize>,
}

impl CorrelationStats {
    /// Stats given directly (e.g. from measurement); no sampling margin.
    pub fn injected(dk1: f64, dk2: f64, dk_sum: f64, dx1: f64, dx2: f64, dx_diff: f64) -> Self {
        Self {
            dk1,
            dk2,
            dk_sum,
            dx1,
            dx2,
            dx_diff,
            dk1_noise: dk1,
            dk2_noise: dk2,
            dx1_noise: dx1,
            dx2_noise: dx2,
            n_samples: None,
        }
    }

    /// `5 / sqrt(n)`, or 0 for injected stats.
    pub fn epsilon(&self) -> f64 {
        self.n_samples.map_or(0.0, |n| 5.0 / (n as f64).sqrt())
    }
}

pub const MIN_STATS_SAMPLES: usize = 1000;

fn std_dev(values: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let mean = values.clone().sum::<f64>() / n as f64;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn classical_stats(model: &ClassicalGunModel, n_samples: usize, seed: u64) -> Result<CorrelationStats> {
    model.validate()?;
    if n_samples < MIN_STATS_SAMPLES {
        return Err(Error::invalid(format!(
            "{n_samples} samples; statistics need at least {MIN_STATS_SAMPLES}"
        )));
    }
    let samples: Vec<PairSample> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| sample_pair_indexed(model, seed, i))
        .collect();
    let s = &samples;
    let n = n_samples;
    let dx_diff = std_dev(s.iter().map(|p| p.x1 - p.x2), n);
    let dx1 = std_dev(s.iter().map(|p| p.x1), n);
    let dx2 = std_dev(s.iter().map(|p| p.x2), n);
    Ok(CorrelationStats {
        dk1: std_dev(s.iter().map(|p| p.k1), n),
        dk2: std_dev(s.iter().map(|p| p.k2), n),
        dk_sum: std_dev(s.iter().map(|p| p.k1 + p.k2), n),
        dx1,
        dx2,
        dx_diff,
        dk1_noise: std_dev(s.iter().map(|p| p.k1 - p.shared_k), n),
        dk2_noise: std_dev(s.iter().map(|p| p.k2 + p.shared_k), n),
        dx1_noise: dx1,
        dx2_noise: dx2,
        n_samples: Some(n),
    })
}

/// Verdicts on the classical quadrature bounds and on the EPR inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalVerdict {
    /// `dk_sum > max(dk1_noise, dk2_noise) (1 - eps)`.
    pub eq8_momentum_ok: bool,
    /// `dx_diff > max(dx1_noise, dx2_noise) (1 - eps)`.
    pub eq8_position_ok: bool,
    /// `dk_sum < min(dk1, dk2) (1 + eps)`.
    pub epr_momentum_satisfied: bool,
    /// `dx_diff < min(dx1, dx2) (1 + eps)`.
    pub epr_position_satisfied: bool,
    /// Not both EPR inequalities hold.
    pub eq3_violated_as_expected: bool,
    /// `dk_sum dx_diff >= 1 - 2 eps`.
    pub product_at_least_one: bool,
    pub epsilon: f64,
}

pub fn verify_classical_bounds(stats: &CorrelationStats) -> Result<ClassicalVerdict> {
    let all = [
        stats.dk1,
        stats.dk2,
        stats.dk_sum,
        stats.dx1,
        stats.dx2,
        stats.dx_diff,
        stats.dk1_noise,
        stats.dk2_noise,
        stats.dx1_noise,
        stats.dx2_noise,
    ];
    if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("uncertainties must be finite and non-negative"));
    }
    if [stats.dk1, stats.dk2, stats.dx1, stats.dx2].contains(&0.0) {
        return Err(Error::invalid(
            "zero single-particle spread: no classical source reaches it",
        ));
    }
    let eps = stats.epsilon();
    let epr_momentum_satisfied = stats.dk_sum < stats.dk1.min(stats.dk2) * (1.0 + eps);
    let epr_position_satisfied = stats.dx_diff < stats.dx1.min(stats.dx2) * (1.0 + eps);
    Ok(ClassicalVerdict {
        eq8_momentum_ok: stats.dk_sum > stats.dk1_noise.max(stats.dk2_noise) * (1.0 - eps),
        eq8_position_ok: stats.dx_diff > stats.dx1_noise.max(stats.dx2_noise) * (1.0 - eps),
        epr_momentum_satisfied,
        epr_position_satisfied,
        eq3_violated_as_expected: !(epr_momentum_satisfied && epr_position_satisfied),
        product_at_least_one: stats.dk_sum * stats.dx_diff >= 1.0 - 2.0 * eps,
        epsilon: eps,
    })
}

const PATTERN_CHUNK: usize = 32;

/// Coincidence rate between a point-like D1 behind the slits and D2 in the
/// imaging-lens focal plane, for pairs from the gun model.
///
/// Every pair contributes `P1 * I2(x)`: particle 1 is a Gaussian beam whose
/// intensity has standard deviation `w`, tilted by `k1`, propagated `a1`
/// and masked by the slits, with `P1` the power it delivers to the focused
/// point detector; particle 2 is the same beam tilted by `k2`, propagated
/// `a2` and focused. The beam already carries the angular spread `1/(2w)`,
/// so only noise above that floor enters the tilts. Pairs add incoherently.
pub fn classical_coincidence_pattern(
    model: &ClassicalGunModel,
    geom: &GeometryConfig,
    grid: &TransverseGrid,
    wavelength: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Pattern> {
    model.validate()?;
    geom.validate()?;
    check_interference_resolution(geom, grid)?;
    if n_samples == 0 {
        return Err(Error::invalid("need at least one pair"));
    }
    let w = model.source_width_w;
    if 6.0 * w > grid.extent() / 2.0 {
        return Err(Error::Resolution {
            what: "gun aperture (grid half-extent in units of w)",
            required: 6.0,
            available: grid.extent() / 2.0 / w,
        });
    }
    let mask = double_slit_mask(grid, &geom.slit)?;
    let beam = ComplexField::from_fn(*grid, wavelength, |x| {
        Complex64::new((-(x * x) / (4.0 * w * w)).exp(), 0.0)
    })?;
    let floor = 0.5 / w;
    let excess = (model.noise_sigma.powi(2) - floor * floor).max(0.0).sqrt();
    let tilt_model = ClassicalGunModel {
        noise_sigma: excess,
        ..*model
    };
    let dx = grid.spacing();

    // fixed chunks summed in order keep the result independent of threading
    let chunks: Vec<Vec<f64>> = (0..n_samples.div_ceil(PATTERN_CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Vec<f64>> {
            let mut part = vec![0.0; grid.n()];
            let end = ((c + 1) * PATTERN_CHUNK).min(n_samples);
            for i in c * PATTERN_CHUNK..end {
                let mut rng = rng_for(seed, i as u64);
                let pair = draw_tilts(&tilt_model, &mut rng);
                let arm1 = fresnel_propagate(&beam.tilted(pair.0), geom.a1)?.masked(&mask)?;
                let on_axis: Complex64 = arm1.values().iter().sum::<Complex64>() * dx;
                let p1 = on_axis.norm_sqr();
                let arm2 = fresnel_propagate(&beam.tilted(pair.1), geom.a2)?;
                let i2 = fourier_plane(&arm2, geom.f_imaging)?.intensity();
                for (a, v) in part.iter_mut().zip(i2) {
                    *a += p1 * v;
                }
            }
            Ok(part)
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; grid.n()];
    for c in chunks {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
    }
    let focal = TransverseGrid::new(grid.n(), wavelength * geom.f_imaging / grid.extent(), 0.0)?;
    let pattern = Pattern::new(focal.positions(), acc, DetectorPlane::ImagingFocal)?;
    Ok(box_average(&pattern, geom.d2_width)?.normalized())
}

fn draw_tilts(model: &ClassicalGunModel, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let shared = match model.k_distribution {
        KDistribution::Gaussian if model.k_spread > 0.0 => {
            Normal::new(0.0, model.k_spread).expect("positive std").sample(rng)
        }
        KDistribution::Uniform if model.k_spread > 0.0 => {
            let half = 3f64.sqrt() * model.k_spread;
            rng.random_range(-half..=half)
        }
        _ => 0.0,
    };
    if model.noise_sigma > 0.0 {
        let n = Normal::new(0.0, model.noise_sigma).expect("positive noise");
        (shared + n.sample(rng), -shared + n.sample(rng))
    } else {
        (shared, -shared)
    }
}

/// One row of the classical property sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub model: ClassicalGunModel,
    pub stats: CorrelationStats,
    pub verdict: ClassicalVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub samples_per_model: usize,
    pub all_eq8_hold: bool,
    pub eq3_never_jointly_satisfied: bool,
    pub all_products_at_least_one: bool,
}

/// Random gun models for the property sweep: `k_spread` log-uniform in
/// [0.1, 50] 1/mm, `w` log-uniform in [0.01, 2] mm, noise factor in [1, 2],
/// `P(K)` alternating Gaussian and uniform, independent emission.
pub fn random_models(n_models: usize, seed: u64) -> Vec<ClassicalGunModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_models)
        .map(|i| {
            let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
                (rng.random_range(lo.ln()..hi.ln())).exp()
            };
            let k_spread = log_uniform(&mut rng, 100.0, 50_000.0);
            let w = log_uniform(&mut rng, 1e-5, 2e-3);
            let factor = rng.random_range(1.0..2.0);
            let mut m = ClassicalGunModel::with_noise_factor(k_spread, w, factor)
                .expect("sweep ranges are valid");
            if i % 2 == 1 {
                m.k_distribution = KDistribution::Uniform;
            }
            m
        })
        .collect()
}

pub fn classical_sweep(n_models: usize, samples_per_model: usize, seed: u64) -> Result<SweepReport> {
    let models = random_models(n_models, seed);
    let rows: Vec<SweepRow> = models
        .into_iter()
        .enumerate()
        .map(|(index, model)| -> Result<SweepRow> {
            let stats = classical_stats(&model, samples_per_model, seed.wrapping_add(1 + index as u64))?;
            let verdict = verify_classical_bounds(&stats)?;
            Ok(SweepRow {
                index,
                model,
                stats,
                verdict,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        samples_per_model,
        all_eq8_hold: rows
            .iter()
            .all(|r| r.verdict.eq8_momentum_ok && r.verdict.eq8_position_ok),
        eq3_never_jointly_satisfied: rows.iter().all(|r| r.verdict.eq3_violated_as_expected),
        all_products_at_least_one: rows.iter().all(|r| r.verdict.product_at_least_one),
        rows,
    })
}
