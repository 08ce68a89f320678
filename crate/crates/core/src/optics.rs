//! Scalar one-dimensional wave optics on a uniform transverse grid.
//!
//! Fields are sampled complex amplitudes `u(x)` in the paraxial regime.
//! Free-space propagation uses the angular-spectrum form of the Fresnel
//! transfer function `H(q) = exp(-i q^2 z / (2k))`; lenses are thin phase
//! masks. Everything is a pure function of its inputs.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest grid accepted anywhere in the crate.
pub const MIN_GRID_SAMPLES: usize = 16;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Uniform sampling of the transverse coordinate.
///
/// Sample `i` sits at `center + (i - n/2) * spacing`, so for even `n` the
/// grid holds the origin and is one sample longer on the negative side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseGrid {
    n: usize,
    spacing: f64,
    center: f64,
}

impl TransverseGrid {
    pub fn new(n: usize, spacing: f64, center: f64) -> Result<Self> {
        if n < MIN_GRID_SAMPLES {
            return Err(Error::invalid(format!(
                "grid needs at least {MIN_GRID_SAMPLES} samples, got {n}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!(
                "grid spacing must be positive and finite, got {spacing}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::invalid("grid center must be finite"));
        }
        Ok(Self { n, spacing, center })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn extent(&self) -> f64 {
        self.n as f64 * self.spacing
    }

    pub fn position(&self, i: usize) -> f64 {
        self.center + (i as f64 - (self.n / 2) as f64) * self.spacing
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.position(i)).collect()
    }

    pub fn min_position(&self) -> f64 {
        self.position(0)
    }

    pub fn max_position(&self) -> f64 {
        self.position(self.n - 1)
    }

    /// Angular spatial frequency of DFT bin `j` (FFT ordering), rad/m.
    pub fn angular_frequency(&self, j: usize) -> f64 {
        let n = self.n as isize;
        let j = j as isize;
        let signed = if j < (n + 1) / 2 { j } else { j - n };
        2.0 * PI * signed as f64 / self.extent()
    }

    /// Spacing of the angular spatial-frequency grid, rad/m.
    pub fn frequency_spacing(&self) -> f64 {
        2.0 * PI / self.extent()
    }
}

/// Grid of `n` samples spanning `extent` around `center`.
pub fn make_grid(n: usize, extent: f64, center: f64) -> Result<TransverseGrid> {
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::invalid(format!(
            "grid extent must be positive, got {extent}"
        )));
    }
    if n < MIN_GRID_SAMPLES {
        return Err(Error::invalid(format!(
            "grid needs at least {MIN_GRID_SAMPLES} samples, got {n}"
        )));
    }
    TransverseGrid::new(n, extent / n as f64, center)
}

/// Sampled complex transverse amplitude at one wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: TransverseGrid,
    values: Vec<Complex64>,
    wavelength: f64,
}

impl ComplexField {
    pub fn new(grid: TransverseGrid, values: Vec<Complex64>, wavelength: f64) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid(format!(
                "field has {} samples but grid has {}",
                values.len(),
                grid.n()
            )));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self {
            grid,
            values,
            wavelength,
        })
    }

    pub fn from_fn(
        grid: TransverseGrid,
        wavelength: f64,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let values = (0..grid.n()).map(|i| f(grid.position(i))).collect();
        Self::new(grid, values, wavelength)
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// `sum |u|^2 * spacing`.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
            wavelength: self.wavelength,
        }
    }

    /// Pointwise product with a real transmission profile.
    pub fn masked(&self, mask: &[f64]) -> Result<Self> {
        if mask.len() != self.values.len() {
            return Err(Error::invalid("mask length does not match field"));
        }
        let values = self
            .values
            .iter()
            .zip(mask)
            .map(|(v, m)| v * m)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
            wavelength: self.wavelength,
        })
    }

    /// Pointwise product with `exp(i q x)`.
    pub fn tilted(&self, q: f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * Complex64::from_polar(1.0, q * self.grid.position(i)))
            .collect();
        Self {
            grid: self.grid,
            values,
            wavelength: self.wavelength,
        }
    }

    fn check_power(&self) -> Result<()> {
        let p = self.power();
        if !p.is_finite() {
            return Err(Error::invalid("field power is not finite"));
        }
        Ok(())
    }
}

/// Two identical slits of width `a` whose centers are `d` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleSlitSpec {
    slit_width: f64,
    slit_separation: f64,
}

impl DoubleSlitSpec {
    pub fn new(slit_width: f64, slit_separation: f64) -> Result<Self> {
        if !(slit_width > 0.0 && slit_width.is_finite()) {
            return Err(Error::invalid(format!(
                "slit width must be positive, got {slit_width}"
            )));
        }
        if !(slit_separation > slit_width && slit_separation.is_finite()) {
            return Err(Error::invalid(format!(
                "slits overlap: width {slit_width} m must be smaller than separation {slit_separation} m"
            )));
        }
        Ok(Self {
            slit_width,
            slit_separation,
        })
    }

    pub fn slit_width(&self) -> f64 {
        self.slit_width
    }

    pub fn slit_separation(&self) -> f64 {
        self.slit_separation
    }

    /// Open iff inside either slit; edges count as open.
    pub fn is_open(&self, x: f64, edge_tolerance: f64) -> bool {
        let half = 0.5 * self.slit_width + edge_tolerance;
        let c = 0.5 * self.slit_separation;
        (x - c).abs() <= half || (x + c).abs() <= half
    }
}

fn edge_tolerance(grid: &TransverseGrid) -> f64 {
    1e-9 * grid.spacing()
}

pub fn double_slit_mask(grid: &TransverseGrid, spec: &DoubleSlitSpec) -> Result<Vec<f64>> {
    let outer = 0.5 * spec.slit_separation() + 0.5 * spec.slit_width();
    if grid.extent() < spec.slit_separation() + spec.slit_width()
        || grid.min_position() > -outer
        || grid.max_position() < outer
    {
        return Err(Error::invalid(format!(
            "grid [{:.6e}, {:.6e}] m cannot contain both slits (outer edges at ±{outer:.6e} m)",
            grid.min_position(),
            grid.max_position()
        )));
    }
    let tol = edge_tolerance(grid);
    Ok((0..grid.n())
        .map(|i| {
            if spec.is_open(grid.position(i), tol) {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// One open slit of `width` centered at `center`.
pub fn single_slit_mask(grid: &TransverseGrid, width: f64, center: f64) -> Result<Vec<f64>> {
    if !(width > 0.0) {
        return Err(Error::invalid("slit width must be positive"));
    }
    if grid.min_position() > center - 0.5 * width || grid.max_position() < center + 0.5 * width {
        return Err(Error::invalid("grid cannot contain the slit"));
    }
    let tol = edge_tolerance(grid);
    Ok((0..grid.n())
        .map(|i| {
            if (grid.position(i) - center).abs() <= 0.5 * width + tol {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// Multiply the DFT of `field` by `transfer(q)`, q in rad/m.
pub fn apply_transfer(field: &ComplexField, transfer: impl Fn(f64) -> Complex64) -> ComplexField {
    let n = field.grid.n();
    let (fwd, inv) = fft_pair(n);
    let mut buf = field.values.clone();
    fwd.process(&mut buf);
    let scale = 1.0 / n as f64;
    for (j, v) in buf.iter_mut().enumerate() {
        *v *= transfer(field.grid.angular_frequency(j)) * scale;
    }
    inv.process(&mut buf);
    ComplexField {
        grid: field.grid,
        values: buf,
        wavelength: field.wavelength,
    }
}

/// Paraxial free-space propagation over `distance_z >= 0`.
pub fn fresnel_propagate(field: &ComplexField, distance_z: f64) -> Result<ComplexField> {
    if !(distance_z >= 0.0) || !distance_z.is_finite() {
        return Err(Error::invalid(format!(
            "propagation distance must be non-negative and finite, got {distance_z}"
        )));
    }
    field.check_power()?;
    if distance_z == 0.0 {
        return Ok(field.clone());
    }
    let k = field.wavenumber();
    Ok(apply_transfer(field, |q| {
        Complex64::from_polar(1.0, -q * q * distance_z / (2.0 * k))
    }))
}

/// Time-reversed propagation over `distance_z`, computed as the conjugate
/// of forward propagation of the conjugate field.
pub fn propagate_backward(field: &ComplexField, distance_z: f64) -> Result<ComplexField> {
    Ok(fresnel_propagate(&field.conj(), distance_z)?.conj())
}

/// Thin lens phase `exp(-i k x^2 / (2f))`; positive `f` converges.
pub fn thin_lens(field: &ComplexField, focal_length_f: f64) -> Result<ComplexField> {
    if focal_length_f == 0.0 || !focal_length_f.is_finite() {
        return Err(Error::invalid(format!(
            "focal length must be non-zero and finite, got {focal_length_f}"
        )));
    }
    let k = field.wavenumber();
    let values = field
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = field.grid.position(i);
            v * Complex64::from_polar(1.0, -k * x * x / (2.0 * focal_length_f))
        })
        .collect();
    Ok(ComplexField {
        grid: field.grid,
        values,
        wavelength: field.wavelength,
    })
}

/// Field in the back focal plane of a lens of focal length `f` placed at
/// the plane of `field` (lens followed by propagation over `f`).
///
/// Evaluated in closed form as a scaled Fourier transform, so it does not
/// suffer the chirp sampling limits of `thin_lens` + `fresnel_propagate`.
/// The output grid has spacing `lambda f / extent` and is centered at 0;
/// power is conserved exactly.
pub fn fourier_plane(field: &ComplexField, f: f64) -> Result<ComplexField> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::invalid(format!(
            "focal length must be positive, got {f}"
        )));
    }
    field.check_power()?;
    let grid = field.grid;
    let n = grid.n();
    let half = (n / 2) as f64;
    let lambda = field.wavelength;
    let k = field.wavenumber();
    let out_grid = TransverseGrid::new(n, lambda * f / grid.extent(), 0.0)?;

    // Centered DFT: sum_i u_i exp(-i q_m x_i) dx with q_m = 2 pi (m - n/2) / L.
    let (fwd, _) = fft_pair(n);
    let mut buf: Vec<Complex64> = field
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { *v } else { -v })
        .collect();
    fwd.process(&mut buf);

    let norm = Complex64::new(0.0, lambda * f).sqrt().inv();
    let dq = grid.frequency_spacing();
    let values = buf
        .into_iter()
        .enumerate()
        .map(|(m, v)| {
            let shift = m as f64 - half;
            let q = shift * dq;
            let sign = if (m + n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
            let x = out_grid.position(m);
            let phase = Complex64::from_polar(1.0, k * x * x / (2.0 * f) - q * grid.center());
            v * sign * grid.spacing() * phase * norm
        })
        .collect();
    ComplexField::new(out_grid, values, lambda)
}

/// Focal-plane position that a transverse wavevector maps to: `x = f k_x / k`.
pub fn focal_plane_coordinate(k_transverse: f64, f: f64, wavelength: f64) -> f64 {
    f * k_transverse * wavelength / (2.0 * PI)
}

/// Inverse of [`focal_plane_coordinate`].
pub fn transverse_wavevector_at(x: f64, f: f64, wavelength: f64) -> f64 {
    2.0 * PI * x / (wavelength * f)
}
