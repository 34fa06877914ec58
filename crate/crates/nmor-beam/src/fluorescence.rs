//! Electron-impact fluorescence cross-check.
//!
//! Electrons ionize a small fraction of the vapor; the recombination glow is
//! proportional to the beam's column density, giving a geometry reference
//! that is independent of the polarization-rotation channel. The synthetic
//! image is uniform along z with a Gaussian column profile in y, and the fit
//! extracts centroid and width from the z-averaged profile.

use std::f64::consts::PI;

use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::field::BeamParams;
use crate::fit::FitError;
use crate::imaging::{BeamState, CameraConfig, Channel, Frame};
use crate::lm::{self, LmConfig};
use crate::rng::pixel_rng;

#[derive(Debug, Error)]
pub enum FluorescenceError {
    #[error("camera config invalid: {0}")]
    Camera(#[from] crate::imaging::ImagingError),
    #[error("fit failed: {0}")]
    Fit(#[from] FitError),
}

/// Fluorescence imaging settings: a camera plus the brightness conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluorescenceConfig {
    pub camera: CameraConfig,
    /// Photons per second per unit of column density (counts/s per A/m).
    pub brightness_scale: f64,
}

impl Default for FluorescenceConfig {
    fn default() -> Self {
        FluorescenceConfig {
            camera: CameraConfig {
                exposure: 30.0,
                quantum_efficiency: 0.25,
                magnification: 1.0,
                pixel_pitch: 31.25e-6,
                gain: 30.0,
                ..CameraConfig::default()
            },
            brightness_scale: 2e6,
        }
    }
}

/// Column density of the beam (A/m): the current density integrated along
/// the line of sight, `(I0 / (sqrt(pi) w)) exp(-(y-y0)^2 / w^2)`.
pub fn column_density(y: f64, p: &BeamParams) -> f64 {
    let u = y - p.center_y0;
    p.total_current / (PI.sqrt() * p.width_w) * (-u * u / (p.width_w * p.width_w)).exp()
}

/// Synthesize one fluorescence exposure. The mean signal follows the column
/// density, uniform along z; Poisson shot noise and Gaussian read noise are
/// applied exactly as in the polarimeter channel.
pub fn synthesize_fluorescence(
    p: &BeamParams,
    c: &FluorescenceConfig,
    noise_on: bool,
) -> Result<Frame, FluorescenceError> {
    c.camera.validate()?;
    let grid = c.camera.grid();
    let max_dn = c.camera.max_dn();
    let mut data = Vec::with_capacity(grid.len());
    let mut saturated = 0usize;

    for iy in 0..grid.ny {
        let mean_e = c.brightness_scale
            * column_density(grid.y(iy), p).abs()
            * c.camera.exposure
            * c.camera.quantum_efficiency;
        for iz in 0..grid.nz {
            let px = grid.idx(iy, iz);
            let dn = if noise_on {
                let mut rng = pixel_rng(c.camera.rng_seed, u64::MAX, px as u64);
                let shot = if mean_e > 0.0 {
                    Poisson::new(mean_e).expect("positive mean").sample(&mut rng)
                } else {
                    0.0
                };
                let read = if c.camera.read_noise > 0.0 {
                    Normal::new(0.0, c.camera.read_noise)
                        .expect("valid sigma")
                        .sample(&mut rng)
                } else {
                    0.0
                };
                ((shot + read) / c.camera.gain).round()
            } else {
                mean_e / c.camera.gain
            };
            if dn > max_dn {
                saturated += 1;
            }
            data.push(dn.clamp(0.0, max_dn));
        }
    }

    Ok(Frame {
        data,
        channel: Channel::Ch1,
        beam_state: BeamState::On,
        config: c.camera,
        acquisition_index: 0,
        saturated_pixels: saturated,
    })
}

/// Centroid and width recovered from a fluorescence image.
#[derive(Debug, Clone, Copy)]
pub struct FluorescenceFit {
    pub center_y0: f64,
    pub center_y0_err: f64,
    pub width_w: f64,
    pub width_w_err: f64,
    pub amplitude: f64,
    pub background: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Fit `A exp(-(y-y0)^2/w^2) + b` to the z-averaged column profile.
pub fn fit_fluorescence(frame: &Frame) -> Result<FluorescenceFit, FluorescenceError> {
    let grid = frame.grid();
    let mut profile = Vec::with_capacity(grid.ny);
    for iy in 0..grid.ny {
        let mut s = 0.0;
        for iz in 0..grid.nz {
            s += frame.data[grid.idx(iy, iz)];
        }
        profile.push(s / grid.nz as f64);
    }

    // moment-based starting point
    let bg0 = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut peak, mut peak_iy) = (f64::NEG_INFINITY, 0);
    for (iy, &v) in profile.iter().enumerate() {
        if v > peak {
            peak = v;
            peak_iy = iy;
        }
    }
    let amp0 = (peak - bg0).max(1e-12);
    let mut m0 = 0.0;
    let mut m2 = 0.0;
    for (iy, &v) in profile.iter().enumerate() {
        let e = (v - bg0).max(0.0);
        let dy = grid.y(iy) - grid.y(peak_iy);
        m0 += e;
        m2 += e * dy * dy;
    }
    let w0 = if m0 > 0.0 {
        (2.0 * m2 / m0).sqrt().max(grid.step_y)
    } else {
        grid.step_y
    };
    let y00 = grid.y(peak_iy);

    let visit = |p: &[f64], emit: &mut dyn FnMut(f64, &[f64])| {
        for (iy, &v) in profile.iter().enumerate() {
            let u = grid.y(iy) - p[1];
            let g = (-u * u / (p[2] * p[2])).exp();
            let model = p[0] * g + p[3];
            emit(
                v - model,
                &[
                    g,
                    p[0] * g * 2.0 * u / (p[2] * p[2]),
                    p[0] * g * 2.0 * u * u / (p[2] * p[2] * p[2]),
                    1.0,
                ],
            );
        }
    };
    let half_span = 0.5 * grid.span_y();
    let valid = |p: &[f64]| p[2] > 0.0 && p[1].abs() <= half_span;
    let report = lm::fit(visit, valid, &[amp0, y00, w0, bg0], &LmConfig::default())
        .map_err(FitError::from)?;

    // flat 4x4 covariance: diagonal entries 5 and 10 are y0 and w
    Ok(FluorescenceFit {
        center_y0: report.params[1],
        center_y0_err: report.covariance[5].max(0.0).sqrt(),
        width_w: report.params[2],
        width_w_err: report.covariance[10].max(0.0).sqrt(),
        amplitude: report.params[0],
        background: report.params[3],
        converged: report.converged,
        iterations: report.iterations,
    })
}
