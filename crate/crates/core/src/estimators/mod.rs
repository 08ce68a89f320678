//! Parameter recovery from patterns and counts, and the EPR report.

pub mod epr;
pub mod fwhm;
pub mod image;
pub mod interference;
pub mod lm;
pub mod quadrature;

pub use epr::{divergence_to_single_uncertainty, epr_report, EprReport};
pub use fwhm::{fwhm, PeakSelector};
pub use image::{
    blur_for_fwhm_excess, fit_image, position_uncertainty_from_image,
    position_uncertainty_object_plane, ImageFit,
};
pub use interference::{
    fit_interference, visibility_to_sum_uncertainty, FitData, InterferenceFit,
    InterferenceFitOptions,
};
