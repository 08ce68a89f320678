//! Mode dispatch: simulate, fit, and write artifacts.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{BlurSpec, ExperimentConfig, Mode};
use super::io::{counts_csv, json_bytes, pattern_csv, quantity, write_atomic};
use crate::biphoton::{
    check_two_photon_lens_equation, ghost_image_pattern, klyshko_interference_pattern, magnification,
    singles_pattern, BiphotonModel, CollectionMode, Detector, GeometryConfig, Pattern, IMAGE_LENS_TOLERANCE,
};
use crate::classical::{
    classical_coincidence_pattern, classical_stats, classical_sweep, verify_classical_bounds, ClassicalGunModel,
    ClassicalVerdict, CorrelationStats, EmissionMode, KDistribution,
};
use crate::counting::sample_counts;
use crate::error::{Error, Result};
use crate::estimators::{
    blur_for_fwhm_excess, epr_report, fit_image, fit_interference, position_uncertainty_from_image,
    position_uncertainty_object_plane, EprReport, ImageFit, InterferenceFit, InterferenceFitOptions,
};

/// Process exit code for an error: 2 fit failures, 3 configuration
/// problems, 1 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Fit { .. } | Error::InsufficientData(_) | Error::Shape(_) => 2,
        Error::Configuration(_) | Error::Parse { .. } | Error::Resolution { .. } => 3,
        _ => 1,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mode: Mode,
    pub files: Vec<PathBuf>,
    pub report: Value,
}

/// Independent stream per consumer of the run seed (splitmix64 finalizer).
fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn count(n: impl Into<u64>) -> Value {
    json!({ "value": n.into(), "unit": "1" })
}

fn ratio(v: f64) -> Value {
    quantity(v, "1")
}

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }
}

/// Run `config.mode`, writing artifacts into `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    let mode = config
        .mode
        .ok_or_else(|| Error::Configuration("no mode selected".into()))?;
    config.require(mode)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut art = Artifacts {
        dir: out_dir,
        files: Vec::new(),
    };
    let (inputs, fits, epr, report_name) = match mode {
        Mode::Interference => run_interference(config, &mut art)?,
        Mode::Image => run_image(config, &mut art)?,
        Mode::Classical => run_classical(config, &mut art)?,
        Mode::Sweep => run_sweep(config, &mut art)?,
        Mode::Report => run_report(config, out_dir)?,
    };
    let report = json!({
        "inputs": inputs,
        "fits": fits,
        "epr_report": epr,
        "provenance": {
            "seed": count(config.counts.seed),
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": config.source_hash,
            "mode": mode.name(),
        },
    });
    art.write(report_name, &json_bytes(&report))?;
    Ok(RunOutput {
        mode,
        files: art.files,
        report,
    })
}

type ModeResult = (Value, Value, Value, &'static str);

fn geometry_json(g: &GeometryConfig) -> Value {
    json!({
        "slit_width": quantity(g.slit.slit_width(), "m"),
        "slit_separation": quantity(g.slit.slit_separation(), "m"),
        "a1": quantity(g.a1, "m"),
        "a2": quantity(g.a2, "m"),
        "b": quantity(g.b, "m"),
        "f_imaging": quantity(g.f_imaging, "m"),
        "f_collection": quantity(g.f_collection, "m"),
        "d1_mode": match g.d1_mode {
            CollectionMode::Point => "point",
            CollectionMode::Bucket => "bucket",
        },
        "d2_width": quantity(g.d2_width, "m"),
        "d3_width": quantity(g.d3_width, "m"),
        "object_distance": quantity(g.object_distance(), "m"),
        "image_distance": quantity(g.image_distance(), "m"),
        "magnification": ratio(magnification(g)),
    })
}

fn biphoton_json(b: &BiphotonModel) -> Value {
    json!({
        "wavelength": quantity(b.wavelength, "m"),
        "sigma_sum": quantity(b.sigma_sum, "1/m"),
        "sigma_single": quantity(b.sigma_single, "1/m"),
        "pump_plane_wave": b.pump_plane_wave,
    })
}

fn common_inputs(config: &ExperimentConfig) -> Value {
    json!({
        "grid": {
            "samples": count(config.grid.samples as u64),
            "extent": quantity(config.grid.extent, "m"),
        },
        "counts": {
            "total": count(config.counts.total),
            "seed": count(config.counts.seed),
        },
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

/// `(max - min) / max` over the pattern.
fn relative_variation(p: &Pattern) -> f64 {
    let max = p.rates().iter().cloned().fold(f64::MIN, f64::max);
    let min = p.rates().iter().cloned().fold(f64::MAX, f64::min);
    if max > 0.0 {
        (max - min) / max
    } else {
        0.0
    }
}

fn interference_fit_json(fit: &InterferenceFit) -> Value {
    json!({
        "visibility": ratio(fit.visibility),
        "visibility_error": ratio(fit.visibility_error),
        "detector_visibility": ratio(fit.detector_visibility),
        "corrected_visibility": ratio(fit.corrected_visibility),
        "sigma_sum": quantity(fit.sigma_sum, "1/m"),
        "sigma_sum_error": quantity(fit.sigma_sum_error, "1/m"),
        "error_source": fit.error_source,
        "fitted_a": quantity(fit.fitted_a, "m"),
        "fitted_d": quantity(fit.fitted_d, "m"),
        "envelope_center": quantity(fit.envelope_center, "m"),
        "envelope_curvature": quantity(fit.envelope_curvature, "1/m^2"),
        "blur_sigma": quantity(fit.blur_sigma, "m"),
        "amplitude": quantity(fit.amplitude, "rate"),
        "residual_rms": quantity(fit.residual_rms, "rate"),
        "reduced_chi2": ratio(fit.reduced_chi2),
        "iterations": count(fit.iterations as u64),
        "branch": count(fit.branch as u64),
        "n_points": count(fit.n_points as u64),
    })
}

fn run_interference(config: &ExperimentConfig, art: &mut Artifacts<'_>) -> Result<ModeResult> {
    let geom = config.geometry.expect("checked by require");
    let model = config.biphoton.expect("checked by require");
    let grid = config.grid.build()?;
    let hw = config.interference.half_width;
    let seed = config.counts.seed;

    let pattern = klyshko_interference_pattern(&model, &geom, &grid)?.window(-hw, hw)?;
    let counts = sample_counts(&pattern, config.counts.total, seed)?;
    art.write("interference_pattern.csv", pattern_csv(&pattern).as_bytes())?;
    art.write("interference_counts.csv", counts_csv(&counts).as_bytes())?;

    let mut opts = InterferenceFitOptions::new(model.wavelength);
    opts.bootstrap_resamples = config.interference.bootstrap;
    opts.bootstrap_seed = derive_seed(seed, 1);
    let fit = fit_interference((&counts).into(), &geom, &opts)?;

    let singles = if model.sigma_single.is_finite() {
        let d2 = singles_pattern(&model, &geom, &grid, Detector::D2)?.window(-hw, hw)?;
        let d3 = singles_pattern(&model, &geom, &grid, Detector::D3)?.window(-hw, hw)?;
        json!({
            "d2_relative_variation": ratio(relative_variation(&d2)),
            "d3_relative_variation": ratio(relative_variation(&d3)),
        })
    } else {
        Value::Null
    };

    let inputs = merge(
        common_inputs(config),
        json!({
            "geometry": geometry_json(&geom),
            "biphoton": biphoton_json(&model),
            "scan_half_width": quantity(hw, "m"),
            "bootstrap_resamples": count(config.interference.bootstrap as u64),
        }),
    );
    let mut fit_json = interference_fit_json(&fit);
    fit_json["epr_momentum_ok"] = json!(fit.sigma_sum < model.sigma_single);
    let fits = json!({
        "interference": fit_json,
        "singles": singles,
        "counts_total": count(counts.total()),
    });
    Ok((inputs, fits, Value::Null, "interference_report.json"))
}

fn image_fit_json(fit: &ImageFit, generating_blur: f64) -> Value {
    json!({
        "blur_sigma": quantity(fit.blur_sigma, "m"),
        "blur_sigma_error": quantity(fit.blur_sigma_error, "m"),
        "generating_blur_sigma": quantity(generating_blur, "m"),
        "amplitude": quantity(fit.amplitude, "rate"),
        "peak_centers": [quantity(fit.peak_centers[0], "m"), quantity(fit.peak_centers[1], "m")],
        "peak_separation": quantity(fit.peak_separation(), "m"),
        "fwhm_fitted": [quantity(fit.fwhm_fitted[0], "m"), quantity(fit.fwhm_fitted[1], "m")],
        "fwhm_ideal": quantity(fit.fwhm_ideal, "m"),
        "fwhm_excess": quantity(position_uncertainty_from_image(fit), "m"),
        "fwhm_excess_error": quantity(fit.excess_error, "m"),
        "fwhm_excess_object_plane": quantity(position_uncertainty_object_plane(fit), "m"),
        "peaks_resolved": fit.peaks_resolved,
        "magnification": ratio(fit.magnification),
        "error_source": fit.error_source,
        "residual_rms": quantity(fit.residual_rms, "rate"),
        "iterations": count(fit.iterations as u64),
        "n_points": count(fit.n_points as u64),
    })
}

fn run_image(config: &ExperimentConfig, art: &mut Artifacts<'_>) -> Result<ModeResult> {
    let geom = config.geometry.expect("checked by require");
    let image = config.image.expect("checked by require");
    let lens = check_two_photon_lens_equation(&geom, IMAGE_LENS_TOLERANCE);
    if !lens.satisfied {
        return Err(Error::Configuration(format!(
            "check_two_photon_lens_equation failed: residual {:.4} exceeds tolerance {IMAGE_LENS_TOLERANCE}",
            lens.residual
        )));
    }
    let grid = config.grid.build()?;
    let seed = config.counts.seed;
    let blur = match image.blur {
        BlurSpec::Sigma(s) => s,
        BlurSpec::FwhmExcess(e) => blur_for_fwhm_excess(&geom, e)?,
    };
    let hw = image.half_width;
    let pattern = ghost_image_pattern(&geom, blur, &grid)?.window(-hw, hw)?;
    let counts = sample_counts(&pattern, config.counts.total, seed)?;
    art.write("image_pattern.csv", pattern_csv(&pattern).as_bytes())?;
    art.write("image_counts.csv", counts_csv(&counts).as_bytes())?;
    let fit = fit_image((&counts).into(), &geom, derive_seed(seed, 2))?;

    let blur_json = match image.blur {
        BlurSpec::Sigma(s) => json!({ "blur_sigma": quantity(s, "m") }),
        BlurSpec::FwhmExcess(e) => json!({ "fwhm_excess": quantity(e, "m") }),
    };
    let inputs = merge(
        common_inputs(config),
        json!({
            "geometry": geometry_json(&geom),
            "image": merge(json!({ "half_width": quantity(hw, "m") }), blur_json),
            "lens_equation_residual": ratio(lens.residual),
        }),
    );
    let fits = json!({
        "image": image_fit_json(&fit, blur),
        "counts_total": count(counts.total()),
    });
    Ok((inputs, fits, Value::Null, "image_report.json"))
}

fn gun_json(m: &ClassicalGunModel) -> Value {
    json!({
        "k_spread": quantity(m.k_spread, "1/m"),
        "source_width": quantity(m.source_width_w, "m"),
        "noise_sigma": quantity(m.noise_sigma, "1/m"),
        "distribution": match m.k_distribution {
            KDistribution::Gaussian => "gaussian",
            KDistribution::Uniform => "uniform",
        },
        "emission": match m.emission {
            EmissionMode::Independent => "independent",
            EmissionMode::SharedPoint => "shared",
        },
    })
}

fn stats_json(s: &CorrelationStats) -> Value {
    json!({
        "dk1": quantity(s.dk1, "1/m"),
        "dk2": quantity(s.dk2, "1/m"),
        "dk_sum": quantity(s.dk_sum, "1/m"),
        "dx1": quantity(s.dx1, "m"),
        "dx2": quantity(s.dx2, "m"),
        "dx_diff": quantity(s.dx_diff, "m"),
        "dk1_noise": quantity(s.dk1_noise, "1/m"),
        "dk2_noise": quantity(s.dk2_noise, "1/m"),
        "dx1_noise": quantity(s.dx1_noise, "m"),
        "dx2_noise": quantity(s.dx2_noise, "m"),
        "n_samples": s.n_samples.map(|n| count(n as u64)),
    })
}

fn verdict_json(v: &ClassicalVerdict) -> Value {
    json!({
        "eq8_momentum_ok": v.eq8_momentum_ok,
        "eq8_position_ok": v.eq8_position_ok,
        "epr_momentum_satisfied": v.epr_momentum_satisfied,
        "epr_position_satisfied": v.epr_position_satisfied,
        "eq3_violated_as_expected": v.eq3_violated_as_expected,
        "product_at_least_one": v.product_at_least_one,
        "epsilon": ratio(v.epsilon),
    })
}

fn run_classical(config: &ExperimentConfig, art: &mut Artifacts<'_>) -> Result<ModeResult> {
    let geom = config.geometry.expect("checked by require");
    let cl = config.classical.expect("checked by require");
    let lambda = cl
        .wavelength
        .or(config.biphoton.map(|b| b.wavelength))
        .expect("checked by require");
    let grid = config.grid.build()?;
    let seed = config.counts.seed;
    let hw = config.interference.half_width;

    let pattern = classical_coincidence_pattern(&cl.model, &geom, &grid, lambda, cl.pattern_samples, derive_seed(seed, 3))?
        .window(-hw, hw)?;
    art.write("classical_pattern.csv", pattern_csv(&pattern).as_bytes())?;
    let mut opts = InterferenceFitOptions::new(lambda);
    opts.bootstrap_seed = derive_seed(seed, 4);
    let fit = fit_interference((&pattern).into(), &geom, &opts)?;
    let stats = classical_stats(&cl.model, cl.samples, derive_seed(seed, 5))?;
    let verdict = verify_classical_bounds(&stats)?;

    let inputs = merge(
        common_inputs(config),
        json!({
            "geometry": geometry_json(&geom),
            "wavelength": quantity(lambda, "m"),
            "gun": gun_json(&cl.model),
            "pattern_samples": count(cl.pattern_samples as u64),
            "samples": count(cl.samples as u64),
            "scan_half_width": quantity(hw, "m"),
        }),
    );
    let fits = json!({
        "coincidence": interference_fit_json(&fit),
        "stats": stats_json(&stats),
        "verdict": verdict_json(&verdict),
        "product": ratio(stats.dk_sum * stats.dx_diff),
    });
    Ok((inputs, fits, Value::Null, "classical_report.json"))
}

fn run_sweep(config: &ExperimentConfig, art: &mut Artifacts<'_>) -> Result<ModeResult> {
    let seed = config.counts.seed;
    let sweep = classical_sweep(config.sweep.models, config.sweep.samples, derive_seed(seed, 6))?;
    let mut csv = String::from(
        "index,distribution,k_spread_per_mm,source_width_mm,noise_sigma_per_mm,dk1_per_mm,dk2_per_mm,\
dk_sum_per_mm,dx1_mm,dx2_mm,dx_diff_mm,product,eq8_momentum_ok,eq8_position_ok,eq3_violated_as_expected,\
product_at_least_one\n",
    );
    for r in &sweep.rows {
        let s = &r.stats;
        let v = &r.verdict;
        let dist = match r.model.k_distribution {
            KDistribution::Gaussian => "gaussian",
            KDistribution::Uniform => "uniform",
        };
        let nums = [
            r.model.k_spread * 1e-3,
            r.model.source_width_w * 1e3,
            r.model.noise_sigma * 1e-3,
            s.dk1 * 1e-3,
            s.dk2 * 1e-3,
            s.dk_sum * 1e-3,
            s.dx1 * 1e3,
            s.dx2 * 1e3,
            s.dx_diff * 1e3,
            s.dk_sum * s.dx_diff,
        ]
        .map(|x| format!("{x:.16e}"))
        .join(",");
        csv.push_str(&format!(
            "{},{dist},{nums},{},{},{},{}\n",
            r.index, v.eq8_momentum_ok, v.eq8_position_ok, v.eq3_violated_as_expected, v.product_at_least_one
        ));
    }
    art.write("sweep.csv", csv.as_bytes())?;
    let inputs = merge(
        common_inputs(config),
        json!({
            "models": count(config.sweep.models as u64),
            "samples_per_model": count(config.sweep.samples as u64),
        }),
    );
    let fits = json!({
        "sweep": {
            "models": count(sweep.rows.len() as u64),
            "all_eq8_hold": sweep.all_eq8_hold,
            "eq3_never_jointly_satisfied": sweep.eq3_never_jointly_satisfied,
            "all_products_at_least_one": sweep.all_products_at_least_one,
        }
    });
    Ok((inputs, fits, Value::Null, "sweep_report.json"))
}

/// Value and error of `fits.<section>.<key>` from a prior report.
fn prior_value(path: &Path, section: &str, key: &str, err_key: &str) -> Result<(f64, Option<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Configuration(format!("{}: not a report: {e}", path.display())))?;
    let fit = &v["fits"][section];
    let value = fit[key]["value"].as_f64().ok_or_else(|| {
        Error::Configuration(format!("{}: no fits.{section}.{key}", path.display()))
    })?;
    Ok((value, fit[err_key]["value"].as_f64()))
}

pub fn epr_report_json(r: &EprReport) -> Value {
    json!({
        "dk1": quantity(r.dk1, "1/m"),
        "dk2": quantity(r.dk2, "1/m"),
        "dk_sum": quantity(r.dk_sum, "1/m"),
        "dx1": quantity(r.dx1, "m"),
        "dx2": quantity(r.dx2, "m"),
        "dx_diff": quantity(r.dx_diff, "m"),
        "epr_momentum_ok": r.epr_momentum_ok,
        "epr_position_ok": r.epr_position_ok,
        "product": ratio(r.product),
        "product_below_one": r.product_below_one,
        "classical_bounds": r.classical_bounds.as_ref().map(verdict_json),
        "convention_note": r.convention_note,
        "notes": r.notes,
    })
}

fn run_report(config: &ExperimentConfig, out_dir: &Path) -> Result<ModeResult> {
    let rc = &config.report;
    let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { out_dir.join(p) };
    let need = |what: &str| {
        Error::Configuration(format!("report needs {what}: give it inline in [report] or via a prior report"))
    };

    let mut sources = serde_json::Map::new();
    let (dk_sum, dk_sum_err) = match (rc.dk_sum, &rc.interference_report) {
        (Some(v), _) => (v, None),
        (None, Some(p)) => {
            sources.insert("interference_report".into(), json!(p.display().to_string()));
            let p = resolve(p);
            prior_value(&p, "interference", "sigma_sum", "sigma_sum_error")?
        }
        (None, None) => return Err(need("dk_sum")),
    };
    let (dx_diff, dx_diff_err) = match (rc.dx_diff, &rc.image_report) {
        (Some(v), _) => (v, None),
        (None, Some(p)) => {
            sources.insert("image_report".into(), json!(p.display().to_string()));
            let p = resolve(p);
            prior_value(&p, "image", "fwhm_excess", "fwhm_excess_error")?
        }
        (None, None) => return Err(need("dx_diff")),
    };
    let single_k = config.biphoton.map(|b| b.sigma_single);
    let slit = config.geometry.map(|g| g.slit.slit_width());
    let dk1 = rc.dk1.or(single_k).ok_or_else(|| need("dk1"))?;
    let dk2 = rc.dk2.or(single_k).ok_or_else(|| need("dk2"))?;
    let dx1 = rc.dx1.or(slit).ok_or_else(|| need("dx1"))?;
    let dx2 = rc.dx2.or(slit).ok_or_else(|| need("dx2"))?;

    let report = epr_report(dk1, dk2, dk_sum, dx1, dx2, dx_diff).map_err(|e| Error::Configuration(e.to_string()))?;
    let product_error = match (dk_sum_err, dx_diff_err) {
        (None, None) => None,
        (ek, ex) => {
            let rk = ek.unwrap_or(0.0) / dk_sum;
            let rx = ex.unwrap_or(0.0) / dx_diff;
            Some(report.product * (rk * rk + rx * rx).sqrt())
        }
    };
    let inputs = json!({
        "dk1": quantity(dk1, "1/m"),
        "dk2": quantity(dk2, "1/m"),
        "dk_sum": quantity(dk_sum, "1/m"),
        "dx1": quantity(dx1, "m"),
        "dx2": quantity(dx2, "m"),
        "dx_diff": quantity(dx_diff, "m"),
        "sources": sources,
    });
    let fits = json!({
        "dk_sum_error": dk_sum_err.map(|e| quantity(e, "1/m")),
        "dx_diff_error": dx_diff_err.map(|e| quantity(e, "m")),
        "product_error": product_error.map(ratio),
    });
    Ok((inputs, fits, epr_report_json(&report), "epr_report.json"))
}
