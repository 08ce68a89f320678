//! EPR-type inequalities and the uncertainty product.

use std::f64::consts::PI;

use serde::Serialize;

use crate::classical::{verify_classical_bounds, ClassicalVerdict, CorrelationStats};
use crate::error::{Error, Result};

pub const CONVENTION_NOTE: &str = "All uncertainties are standard deviations. \
Single-photon position uncertainties are the slit width. The position \
correlation width is the FWHM excess of the ghost image measured in the image \
plane and is compared with object-plane quantities without rescaling by the \
magnification; the momentum spreads refer to the source.";

pub const NOT_SUFFICIENT_NOTE: &str = "Product below 1 is a necessary but not sufficient \
condition for EPR-type correlation: both inequalities on the sum momentum and on \
the position difference must hold as well.";

/// Verdict on a set of six uncertainties. Wavenumbers in 1/m, lengths in m.
#[derive(Debug, Clone, Serialize)]
pub struct EprReport {
    pub dk1: f64,
    pub dk2: f64,
    pub dk_sum: f64,
    pub dx1: f64,
    pub dx2: f64,
    pub dx_diff: f64,
    /// `dk_sum < min(dk1, dk2)`.
    pub epr_momentum_ok: bool,
    /// `dx_diff < min(dx1, dx2)`.
    pub epr_position_ok: bool,
    /// `dk_sum * dx_diff`.
    pub product: f64,
    pub product_below_one: bool,
    /// `None` when the inputs are degenerate for the classical checker.
    pub classical_bounds: Option<ClassicalVerdict>,
    pub convention_note: String,
    pub notes: Vec<String>,
}

pub fn epr_report(dk1: f64, dk2: f64, dk_sum: f64, dx1: f64, dx2: f64, dx_diff: f64) -> Result<EprReport> {
    for (name, v) in [
        ("dk1", dk1),
        ("dk2", dk2),
        ("dk_sum", dk_sum),
        ("dx1", dx1),
        ("dx2", dx2),
        ("dx_diff", dx_diff),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be non-negative and finite, got {v}")));
        }
    }
    let epr_momentum_ok = dk_sum < dk1.min(dk2);
    let epr_position_ok = dx_diff < dx1.min(dx2);
    let product = dk_sum * dx_diff;
    let product_below_one = product < 1.0;
    let classical_bounds =
        verify_classical_bounds(&CorrelationStats::injected(dk1, dk2, dk_sum, dx1, dx2, dx_diff)).ok();

    let mut notes = Vec::new();
    if product_below_one {
        notes.push(NOT_SUFFICIENT_NOTE.to_string());
        if !(epr_momentum_ok && epr_position_ok) {
            notes.push(format!(
                "Warning: product {product:.3} is below 1 but the {} inequality fails.",
                match (epr_momentum_ok, epr_position_ok) {
                    (false, false) => "momentum and the position",
                    (false, true) => "momentum",
                    _ => "position",
                }
            ));
        }
    }
    Ok(EprReport {
        dk1,
        dk2,
        dk_sum,
        dx1,
        dx2,
        dx_diff,
        epr_momentum_ok,
        epr_position_ok,
        product,
        product_below_one,
        classical_bounds,
        convention_note: CONVENTION_NOTE.to_string(),
        notes,
    })
}

/// `Delta k = (2 pi / lambda) Delta theta`.
pub fn divergence_to_single_uncertainty(delta_theta: f64, wavelength: f64) -> Result<f64> {
    if !(delta_theta > 0.0) || !(wavelength > 0.0) {
        return Err(Error::invalid("divergence and wavelength must be positive"));
    }
    Ok(2.0 * PI / wavelength * delta_theta)
}
